//! Terminal-tracking objective and its adjoint gradient.
//!
//! ```text
//!   J(f) = ½‖y^{Nt} − v‖²_h + (ε/2)‖f‖²_{h,t}
//! ```
//!
//! Gradients are Riesz representatives in the control inner product:
//! `⟨⟨·,·⟩⟩_{h,t}` for full space–time controls and `⟨·,·⟩_h` on `q` for
//! separable controls `fⁿ = q·gⁿ`. Hence `dJ(f)[δf] = ⟨∇J(f), δf⟩` exactly,
//! which is what the line search and [`fd_check`] rely on.

use alloc::sync::Arc;
use alloc::vec::Vec;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{check_finite, Error, Result};
use crate::linsolve::CnOperators;
use crate::mesh::{re_dot, Field, Grid2D, SpaceTimeField};
use crate::pde::{adjoint, forward_scaled, AdjointTrajectory, ForcingRule, Trajectory};

/// How the adjoint states enter the gradient.
///
/// With `λ` the adjoint recursion started from `λ^{Nt}`, level `n` of the
/// gradient is `γ·λⁿ⁺¹ + ε fⁿ` (left rule):
/// - `Exact`: `λ^{Nt} = M₋^{−*}(y^{Nt} − v)`, `γ = 1`. This is the exact
///   derivative of the discrete objective.
/// - `Uncorrected`: `λ^{Nt} = y^{Nt} − v`, `γ = 1` (no terminal solve).
/// - `TimeStepScaled`: `λ^{Nt} = y^{Nt} − v`, `γ = Δt`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum GradientMode {
    #[default]
    Exact,
    Uncorrected,
    TimeStepScaled,
}

impl GradientMode {
    pub const ALL: [GradientMode; 3] = [
        GradientMode::Exact,
        GradientMode::Uncorrected,
        GradientMode::TimeStepScaled,
    ];

    pub fn name(self) -> &'static str {
        match self {
            GradientMode::Exact => "exact",
            GradientMode::Uncorrected => "uncorrected",
            GradientMode::TimeStepScaled => "dt-scaled",
        }
    }
}

impl core::str::FromStr for GradientMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "exact" => Ok(GradientMode::Exact),
            // `paper` is kept as the command-line spelling of the uncorrected formula
            "uncorrected" | "paper" => Ok(GradientMode::Uncorrected),
            "dt-scaled" => Ok(GradientMode::TimeStepScaled),
            other => Err(Error::Unknown {
                kind: "gradient mode",
                value: other.into(),
            }),
        }
    }
}

/// The unknown source.
#[derive(Debug, Clone, PartialEq)]
pub enum Control {
    /// One field per time level `n = 0..Nt−1`.
    Full(SpaceTimeField),
    /// `fⁿ = q·gⁿ` with the temporal profile `g` prescribed and never optimized.
    Separable { q: Field, g: Arc<[Complex64]> },
}

impl Control {
    pub fn separable(q: Field, g: impl Into<Arc<[Complex64]>>) -> Self {
        Control::Separable { q, g: g.into() }
    }

    /// The zero control of the same mode (and the same `g`).
    pub fn zeros_like(&self) -> Self {
        match self {
            Control::Full(f) => Control::Full(SpaceTimeField::zeros(f.nt(), f.levels().first().map_or(0, |l| l.len()))),
            Control::Separable { q, g } => Control::Separable {
                q: Field::zeros(q.len()),
                g: g.clone(),
            },
        }
    }

    pub fn mode_name(&self) -> &'static str {
        match self {
            Control::Full(_) => "full",
            Control::Separable { .. } => "separable",
        }
    }

    pub fn as_full(&self) -> Option<&SpaceTimeField> {
        match self {
            Control::Full(f) => Some(f),
            Control::Separable { .. } => None,
        }
    }

    pub fn q(&self) -> Option<&Field> {
        match self {
            Control::Full(_) => None,
            Control::Separable { q, .. } => Some(q),
        }
    }

    /// `fⁿ` for every level.
    pub fn materialize(&self) -> SpaceTimeField {
        match self {
            Control::Full(f) => f.clone(),
            Control::Separable { q, g } => SpaceTimeField::from_levels(g.iter().map(|&gn| q.scaled(gn)).collect()),
        }
    }

    pub fn check(&self, grid: &Grid2D) -> Result<()> {
        match self {
            Control::Full(f) => {
                grid.check_space_time(f)?;
                f.check_finite()
            }
            Control::Separable { q, g } => {
                grid.check_field(q)?;
                if g.len() != grid.nt() {
                    return Err(Error::LengthMismatch {
                        expected: grid.nt(),
                        found: g.len(),
                    });
                }
                check_finite(g)?;
                check_finite(q)
            }
        }
    }

    fn same_mode(&self, other: &Control) -> bool {
        matches!(
            (self, other),
            (Control::Full(_), Control::Full(_)) | (Control::Separable { .. }, Control::Separable { .. })
        )
    }

    /// Control-space inner product: `⟨⟨·,·⟩⟩_{h,t}` (full) or `⟨·,·⟩_h` on `q`.
    pub fn inner(&self, other: &Control, grid: &Grid2D) -> f64 {
        assert!(self.same_mode(other), "control modes differ");
        match (self, other) {
            (Control::Full(a), Control::Full(b)) => a.re_dot(b) * grid.cell_area() * grid.dt(),
            (Control::Separable { q: a, .. }, Control::Separable { q: b, .. }) => re_dot(a, b) * grid.cell_area(),
            _ => unreachable!(),
        }
    }

    pub fn norm(&self, grid: &Grid2D) -> f64 {
        libm::sqrt(self.inner(self, grid))
    }

    /// `‖f‖²_{h,t}` of the materialized forcing.
    pub fn forcing_norm_sq(&self, grid: &Grid2D) -> f64 {
        match self {
            Control::Full(f) => f.re_dot(f) * grid.cell_area() * grid.dt(),
            Control::Separable { q, g } => {
                let g_sq: f64 = g.iter().map(|v| v.norm_sqr()).sum::<f64>() * grid.dt();
                re_dot(q, q) * grid.cell_area() * g_sq
            }
        }
    }

    /// `self += alpha * other`.
    pub fn axpy(&mut self, alpha: f64, other: &Control) {
        let alpha = Complex64::new(alpha, 0.0);
        match (self, other) {
            (Control::Full(a), Control::Full(b)) => a.axpy(alpha, b),
            (Control::Separable { q: a, .. }, Control::Separable { q: b, .. }) => a.axpy(alpha, b),
            _ => panic!("control modes differ"),
        }
    }

    pub fn scale(&mut self, alpha: f64) {
        let alpha = Complex64::new(alpha, 0.0);
        match self {
            Control::Full(f) => f.scale(alpha),
            Control::Separable { q, .. } => q.scale(alpha),
        }
    }

    pub fn scaled(&self, alpha: f64) -> Control {
        let mut out = self.clone();
        out.scale(alpha);
        out
    }

    /// Real coordinates of the control (`2·len`), re/im interleaved.
    pub fn coordinate_count(&self) -> usize {
        match self {
            Control::Full(f) => 2 * f.levels().iter().map(|l| l.len()).sum::<usize>(),
            Control::Separable { q, .. } => 2 * q.len(),
        }
    }

    fn entry_mut(&mut self, coordinate: usize) -> &mut f64 {
        let entry = coordinate / 2;
        let value = match self {
            Control::Full(f) => {
                let m = f.levels()[0].len();
                &mut f.levels_mut()[entry / m][entry % m]
            }
            Control::Separable { q, .. } => &mut q[entry],
        };
        match coordinate % 2 {
            0 => &mut value.re,
            _ => &mut value.im,
        }
    }

    fn entry(&self, coordinate: usize) -> f64 {
        let entry = coordinate / 2;
        let value = match self {
            Control::Full(f) => {
                let m = f.levels()[0].len();
                f.levels()[entry / m][entry % m]
            }
            Control::Separable { q, .. } => q[entry],
        };
        match coordinate % 2 {
            0 => value.re,
            _ => value.im,
        }
    }
}

/// Problem data shared by all objective and gradient evaluations.
#[derive(Debug, Clone)]
pub struct InverseProblem {
    pub grid: Grid2D,
    pub ops: Arc<CnOperators>,
    pub y0: Field,
    pub data: Field,
    /// Tikhonov weight.
    pub eps: f64,
    pub rule: ForcingRule,
    pub gradient_mode: GradientMode,
}

/// Result of one objective evaluation.
#[derive(Debug, Clone)]
pub struct Evaluation {
    pub j: f64,
    /// `½‖y^{Nt} − v‖²_h`.
    pub misfit: f64,
    pub traj: Trajectory,
}

impl InverseProblem {
    pub fn new(grid: Grid2D, ops: Arc<CnOperators>, y0: Field, data: Field, eps: f64) -> Result<Self> {
        grid.check_field(&y0)?;
        grid.check_field(&data)?;
        check_finite(&y0)?;
        check_finite(&data)?;
        if !(eps.is_finite() && eps >= 0.0) {
            return Err(Error::param("eps", "must be finite and non-negative"));
        }
        if ops.dim() != grid.m() {
            return Err(Error::LengthMismatch {
                expected: grid.m(),
                found: ops.dim(),
            });
        }
        Ok(Self {
            grid,
            ops,
            y0,
            data,
            eps,
            rule: ForcingRule::Left,
            gradient_mode: GradientMode::Exact,
        })
    }

    pub fn with_rule(mut self, rule: ForcingRule) -> Self {
        self.rule = rule;
        self
    }

    pub fn with_gradient_mode(mut self, mode: GradientMode) -> Self {
        self.gradient_mode = mode;
        self
    }

    pub fn with_eps(mut self, eps: f64) -> Self {
        self.eps = eps;
        self
    }

    /// Forward trajectory driven by `c`.
    pub fn simulate(&self, c: &Control) -> Result<Trajectory> {
        c.check(&self.grid)?;
        Ok(self.simulate_unchecked(c))
    }

    fn simulate_unchecked(&self, c: &Control) -> Trajectory {
        match c {
            Control::Full(f) => forward_scaled(&self.grid, &self.ops, &self.y0, self.rule, |n, rhs, w| {
                for (o, v) in rhs.iter_mut().zip(f.level(n).iter()) {
                    *o += v * w;
                }
            }),
            Control::Separable { q, g } => forward_scaled(&self.grid, &self.ops, &self.y0, self.rule, |n, rhs, w| {
                let s = g[n] * w;
                for (o, v) in rhs.iter_mut().zip(q.iter()) {
                    *o += v * s;
                }
            }),
        }
    }

    /// `J`, the misfit term and the forward trajectory for reuse by the gradient.
    pub fn objective(&self, c: &Control) -> Result<Evaluation> {
        let traj = self.simulate(c)?;
        let residual = traj.final_state().sub(&self.data);
        check_finite(&residual)?;
        let misfit = 0.5 * re_dot(&residual, &residual) * self.grid.cell_area();
        let j = misfit + 0.5 * self.eps * c.forcing_norm_sq(&self.grid);
        Ok(Evaluation { j, misfit, traj })
    }

    /// Adjoint trajectory for the terminal residual of `traj`, started per the gradient mode.
    pub fn adjoint_states(&self, traj: &Trajectory) -> Result<AdjointTrajectory> {
        if traj.nt() != self.grid.nt() {
            return Err(Error::LengthMismatch {
                expected: self.grid.nt(),
                found: traj.nt(),
            });
        }
        let residual = traj.final_state().sub(&self.data);
        let terminal = match self.gradient_mode {
            GradientMode::Exact => self.ops.solve_hermitian(&residual)?,
            GradientMode::Uncorrected | GradientMode::TimeStepScaled => residual,
        };
        adjoint(&self.grid, &self.ops, &terminal)
    }

    /// Data-misfit part of the gradient per control level (without `ε f`).
    fn misfit_gradient_levels(&self, traj: &Trajectory) -> Result<Vec<Field>> {
        let adj = self.adjoint_states(traj)?;
        let nt = self.grid.nt();
        let gamma = match self.gradient_mode {
            GradientMode::TimeStepScaled => self.grid.dt(),
            _ => 1.0,
        };
        let mut levels = alloc::vec![Field::zeros(self.grid.m()); nt];
        for k in 0..nt {
            for (n, w) in self.rule.step_weights(k, nt) {
                if w != 0.0 {
                    levels[n].axpy(Complex64::new(gamma * w, 0.0), adj.state(k + 1));
                }
            }
        }
        Ok(levels)
    }

    /// Gradient for a full space–time control: `γ·φⁿ⁺¹ + ε fⁿ`.
    pub fn gradient_full(&self, c: &Control, traj: &Trajectory) -> Result<SpaceTimeField> {
        let f = c.as_full().ok_or(Error::WrongControlMode { expected: "full" })?;
        self.grid.check_space_time(f)?;
        let mut levels = self.misfit_gradient_levels(traj)?;
        let eps = Complex64::new(self.eps, 0.0);
        for (level, fn_) in levels.iter_mut().zip(f.levels()) {
            level.axpy(eps, fn_);
        }
        Ok(SpaceTimeField::from_levels(levels))
    }

    /// Gradient with respect to `q` for `fⁿ = q·gⁿ`:
    /// `Σₙ conj(gⁿ)·(γ·φⁿ⁺¹ + ε q gⁿ)·Δt`.
    pub fn gradient_separable(&self, c: &Control, traj: &Trajectory) -> Result<Field> {
        let Control::Separable { q, g } = c else {
            return Err(Error::WrongControlMode { expected: "separable" });
        };
        self.grid.check_field(q)?;
        let levels = self.misfit_gradient_levels(traj)?;
        let dt = self.grid.dt();
        let mut grad = Field::zeros(self.grid.m());
        let mut g_sq = 0.0;
        for (level, gn) in levels.iter().zip(g.iter()) {
            grad.axpy(gn.conj() * dt, level);
            g_sq += gn.norm_sqr() * dt;
        }
        grad.axpy(Complex64::new(self.eps * g_sq, 0.0), q);
        Ok(grad)
    }

    /// Gradient in the same mode as `c`.
    pub fn gradient(&self, c: &Control, traj: &Trajectory) -> Result<Control> {
        match c {
            Control::Full(_) => Ok(Control::Full(self.gradient_full(c, traj)?)),
            Control::Separable { g, .. } => Ok(Control::Separable {
                q: self.gradient_separable(c, traj)?,
                g: g.clone(),
            }),
        }
    }

    /// Objective and gradient in one pass.
    pub fn evaluate(&self, c: &Control) -> Result<(Evaluation, Control)> {
        let eval = self.objective(c)?;
        let grad = self.gradient(c, &eval.traj)?;
        Ok((eval, grad))
    }
}

/// One probed coordinate of a finite-difference check.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Probe {
    /// Real coordinate index (`2·entry` real part, `2·entry + 1` imaginary part).
    pub coordinate: usize,
    pub analytic: f64,
    pub finite_difference: f64,
    pub relative_error: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FdReport {
    pub max_relative_error: f64,
    pub probes: Vec<Probe>,
}

fn relative_error(a: f64, b: f64) -> f64 {
    let scale = a.abs().max(b.abs());
    if scale < f64::MIN_POSITIVE {
        0.0
    } else {
        (a - b).abs() / scale
    }
}

/// Compares the adjoint gradient with central differences of `J` on
/// `n_probes` coordinates drawn from a `seed`ed generator. Real and imaginary
/// parts are treated as independent real coordinates.
pub fn fd_check(p: &InverseProblem, c: &Control, n_probes: usize, h_fd: f64, seed: u64) -> Result<FdReport> {
    if n_probes == 0 {
        return Err(Error::param("n_probes", "must be at least 1"));
    }
    if !(h_fd.is_finite() && h_fd > 0.0) {
        return Err(Error::param("h_fd", "must be positive"));
    }
    let (_, grad) = p.evaluate(c)?;
    // dJ/dx_k = w·Re rₖ (or Im rₖ) with w the quadrature weight of the control pairing
    let weight = match c {
        Control::Full(_) => p.grid.cell_area() * p.grid.dt(),
        Control::Separable { .. } => p.grid.cell_area(),
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let count = c.coordinate_count();
    let mut probes = Vec::with_capacity(n_probes);
    let mut probe = c.clone();
    for _ in 0..n_probes {
        let coordinate = rng.gen_range(0..count);
        let base = c.entry(coordinate);
        *probe.entry_mut(coordinate) = base + h_fd;
        let plus = p.objective(&probe)?.j;
        *probe.entry_mut(coordinate) = base - h_fd;
        let minus = p.objective(&probe)?.j;
        *probe.entry_mut(coordinate) = base;
        let finite_difference = (plus - minus) / (2.0 * h_fd);
        let analytic = weight * grad.entry(coordinate);
        probes.push(Probe {
            coordinate,
            analytic,
            finite_difference,
            relative_error: relative_error(analytic, finite_difference),
        });
    }
    let max_relative_error = probes.iter().map(|pr| pr.relative_error).fold(0.0, f64::max);
    Ok(FdReport {
        max_relative_error,
        probes,
    })
}

/// Runs [`fd_check`] for every [`GradientMode`] and returns the mode with the
/// smallest error together with all errors.
pub fn calibrate_gradient(
    p: &InverseProblem,
    c: &Control,
    n_probes: usize,
    h_fd: f64,
    seed: u64,
) -> Result<(GradientMode, Vec<(GradientMode, f64)>)> {
    let mut errors = Vec::with_capacity(GradientMode::ALL.len());
    for mode in GradientMode::ALL {
        let candidate = p.clone().with_gradient_mode(mode);
        errors.push((mode, fd_check(&candidate, c, n_probes, h_fd, seed)?.max_relative_error));
    }
    let best = errors
        .iter()
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .map(|e| e.0)
        .expect("three candidates");
    Ok((best, errors))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linsolve::CnParams;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn problem(eps: f64) -> InverseProblem {
        let grid = Grid2D::unit(5, 5, 4).unwrap();
        let ops = Arc::new(CnOperators::assemble(&grid, CnParams::new(36e-4, 15e-4, c(0.2, 0.1))).unwrap());
        let y0 = grid.sample(|x, y| {
            c(
                libm::sin(core::f64::consts::PI * x) * libm::sin(core::f64::consts::PI * y),
                0.0,
            )
        });
        let data = grid.sample(|x, y| c(x * y, 0.5 * x));
        InverseProblem::new(grid, ops, y0, data, eps).unwrap()
    }

    fn random_full(grid: &Grid2D, seed: u64) -> Control {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Control::Full(SpaceTimeField::from_levels(
            (0..grid.nt())
                .map(|_| {
                    Field::from_vec(
                        (0..grid.m())
                            .map(|_| c(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
                            .collect(),
                    )
                })
                .collect(),
        ))
    }

    #[test]
    fn exact_data_gives_zero_objective_and_gradient() {
        let mut p = problem(0.0);
        let f = random_full(&p.grid, 3);
        p.data = p.simulate(&f).unwrap().observe();
        let (eval, grad) = p.evaluate(&f).unwrap();
        assert_eq!(eval.j, 0.0);
        assert!(grad
            .as_full()
            .unwrap()
            .levels()
            .iter()
            .all(|l| l.iter().all(|v| *v == c(0.0, 0.0))));
    }

    #[test]
    fn zero_control_gradient_with_exact_data_is_zero_for_any_eps() {
        let mut p = problem(0.7);
        let zero = Control::Full(p.grid.zeros_space_time());
        p.data = p.simulate(&zero).unwrap().observe();
        let (eval, grad) = p.evaluate(&zero).unwrap();
        assert_eq!(eval.j, 0.0);
        assert_eq!(grad.norm(&p.grid), 0.0);
    }

    #[test]
    fn zero_state_objective_is_half_data_norm() {
        let mut p = problem(0.3);
        p.y0 = p.grid.zeros();
        let zero = Control::Full(p.grid.zeros_space_time());
        let eval = p.objective(&zero).unwrap();
        let expected = 0.5 * p.grid.inner_h(&p.data, &p.data).unwrap();
        assert!((eval.j - expected).abs() <= 1e-15 * expected);
        assert_eq!(eval.j, eval.misfit);
    }

    #[test]
    fn non_finite_control_is_rejected_with_index() {
        let p = problem(0.1);
        let mut f = random_full(&p.grid, 1);
        if let Control::Full(levels) = &mut f {
            levels.levels_mut()[2][5] = c(f64::NAN, 0.0);
        }
        assert_eq!(
            p.objective(&f).unwrap_err(),
            Error::NonFinite {
                index: 2 * p.grid.m() + 5
            }
        );
    }

    #[test]
    fn wrong_mode_is_rejected() {
        let p = problem(0.1);
        let full = random_full(&p.grid, 1);
        let traj = p.simulate(&full).unwrap();
        assert!(matches!(
            p.gradient_separable(&full, &traj),
            Err(Error::WrongControlMode { .. })
        ));
        let sep = Control::separable(p.grid.zeros(), alloc::vec![c(1.0, 0.0); p.grid.nt()]);
        assert!(matches!(
            p.gradient_full(&sep, &traj),
            Err(Error::WrongControlMode { .. })
        ));
    }

    #[test]
    fn separable_gradient_with_zero_profile_vanishes() {
        let p = problem(0.2);
        let q = p.grid.sample(c);
        let sep = Control::separable(q, alloc::vec![c(0.0, 0.0); p.grid.nt()]);
        let traj = p.simulate(&sep).unwrap();
        let grad = p.gradient_separable(&sep, &traj).unwrap();
        assert!(grad.iter().all(|v| *v == c(0.0, 0.0)));
    }

    #[test]
    fn single_step_separable_equals_full() {
        let grid = Grid2D::unit(5, 5, 1).unwrap();
        let ops = Arc::new(CnOperators::assemble(&grid, CnParams::new(0.01, 0.02, c(0.2, 0.1))).unwrap());
        let data = grid.sample(|x, y| c(x, -y));
        let p = InverseProblem::new(grid, ops, grid.zeros(), data, 0.05).unwrap();
        let q = grid.sample(|x, y| c(x * y, x + y));
        let sep = Control::separable(q.clone(), alloc::vec![c(1.0, 0.0)]);
        let full = Control::Full(SpaceTimeField::from_levels(alloc::vec![q]));
        let traj = p.simulate(&sep).unwrap();
        let gs = p.gradient_separable(&sep, &traj).unwrap();
        let gf = p.gradient_full(&full, &traj).unwrap();
        for (a, b) in gs.iter().zip(gf.level(0).iter()) {
            assert!((a - b).norm() <= 1e-15 * b.norm().max(1.0));
        }
    }

    #[test]
    fn fd_check_of_zero_problem_is_zero() {
        let mut p = problem(0.0);
        p.y0 = p.grid.zeros();
        p.data = p.grid.zeros();
        let zero = Control::Full(p.grid.zeros_space_time());
        let report = fd_check(&p, &zero, 10, 1e-6, 0).unwrap();
        assert_eq!(report.max_relative_error, 0.0);
        assert!(fd_check(&p, &zero, 0, 1e-6, 0).is_err());
        assert!(fd_check(&p, &zero, 1, 0.0, 0).is_err());
    }

    #[test]
    fn gradient_mode_parsing() {
        assert_eq!("paper".parse::<GradientMode>().unwrap(), GradientMode::Uncorrected);
        assert_eq!("exact".parse::<GradientMode>().unwrap(), GradientMode::Exact);
        assert!("newton".parse::<GradientMode>().is_err());
    }
}
