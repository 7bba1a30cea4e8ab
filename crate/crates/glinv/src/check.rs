//! Self-checks run by `glinv check`: adjoint gradient against finite
//! differences, forward/adjoint duality and observed convergence orders.

use std::fmt;
use std::sync::Arc;

use glinv_core::experiments::{convergence_study, standard_complex_normal, ConvergenceReport, ConvergenceSetup};
use glinv_core::inverse::{calibrate_gradient, fd_check};
use glinv_core::pde::{adjoint, forward};
use glinv_core::{
    CnOperators, CnParams, Complex64, Control, Field, ForcingRule, Grid2D, InverseProblem, Result, SpaceTimeField,
};

pub const GRADIENT_TOL: f64 = 1e-6;
pub const DUALITY_TOL: f64 = 1e-9;
/// Central-difference step. The objective is quadratic in the control, so
/// the differences are exact up to roundoff, which shrinks with the step.
pub const FD_STEP: f64 = 1e-2;
pub const SPATIAL_ORDER: (f64, f64) = (1.8, 2.2);
pub const LEFT_ORDER: (f64, f64) = (0.8, 1.3);
pub const TRAPEZOID_ORDER: (f64, f64) = (1.8, 2.2);

/// One measured quantity and whether it met its bound.
#[derive(Debug, Clone, PartialEq)]
pub struct CheckLine {
    pub name: String,
    pub value: f64,
    pub bound: String,
    pub pass: bool,
}

impl CheckLine {
    fn at_most(name: impl Into<String>, value: f64, tol: f64) -> Self {
        Self {
            name: name.into(),
            value,
            bound: format!("<= {tol:e}"),
            pass: value <= tol,
        }
    }

    fn at_least(name: impl Into<String>, value: f64, tol: f64) -> Self {
        Self {
            name: name.into(),
            value,
            bound: format!(">= {tol:e}"),
            pass: value >= tol,
        }
    }

    fn within(name: impl Into<String>, value: f64, (lo, hi): (f64, f64)) -> Self {
        Self {
            name: name.into(),
            value,
            bound: format!("in [{lo}, {hi}]"),
            pass: (lo..=hi).contains(&value),
        }
    }
}

impl fmt::Display for CheckLine {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let verdict = if self.pass { "PASS" } else { "FAIL" };
        write!(f, "{verdict} {}: {:.6e} ({})", self.name, self.value, self.bound)
    }
}

fn default_params() -> CnParams {
    CnParams::new(36e-4, 15e-4, Complex64::new(0.2, 0.1))
}

fn random_space_time(grid: &Grid2D, seed: u64) -> SpaceTimeField {
    let flat = standard_complex_normal(grid.nt() * grid.m(), seed);
    SpaceTimeField::from_levels(flat.chunks(grid.m()).map(|c| Field::from_vec(c.to_vec())).collect())
}

fn sin_sin(grid: &Grid2D) -> Field {
    use std::f64::consts::PI;
    grid.sample(|x, y| Complex64::new((PI * x).sin() * (PI * y).sin(), 0.0))
}

fn problem(grid: Grid2D, seed: u64) -> Result<InverseProblem> {
    let ops = Arc::new(CnOperators::assemble(&grid, default_params())?);
    let y0 = sin_sin(&grid);
    let data = standard_complex_normal(grid.m(), seed);
    InverseProblem::new(grid, ops, y0, data, 1e-5)
}

/// Central differences on 20 random coordinates of a random full control on
/// a (9,9,8) grid, the same for a separable control, and the calibration of
/// the gradient variants on a (5,5,4) grid.
pub fn gradient(seed: u64) -> Result<Vec<CheckLine>> {
    let mut lines = Vec::new();
    let p = problem(Grid2D::unit(9, 9, 8)?, seed)?;
    let full = Control::Full(random_space_time(&p.grid, seed.wrapping_add(1)));
    let report = fd_check(&p, &full, 20, FD_STEP, seed)?;
    lines.push(CheckLine::at_most(
        "full control, max relative error",
        report.max_relative_error,
        GRADIENT_TOL,
    ));

    let q = standard_complex_normal(p.grid.m(), seed.wrapping_add(2));
    let g: Vec<Complex64> = (0..p.grid.nt())
        .map(|n| Complex64::new(1.0 + 0.5 * p.grid.time(n), -0.25))
        .collect();
    let sep = Control::separable(q, g);
    let report = fd_check(&p, &sep, 20, FD_STEP, seed)?;
    lines.push(CheckLine::at_most(
        "separable control, max relative error",
        report.max_relative_error,
        GRADIENT_TOL,
    ));

    let small = problem(Grid2D::unit(5, 5, 4)?, seed)?;
    let c = Control::Full(random_space_time(&small.grid, seed.wrapping_add(3)));
    let (best, errors) = calibrate_gradient(&small, &c, 20, FD_STEP, seed)?;
    for (mode, err) in errors {
        let name = format!("calibration, {} gradient", mode.name());
        lines.push(if mode == best {
            CheckLine::at_most(name, err, GRADIENT_TOL)
        } else {
            CheckLine::at_least(name, err, 1e-2)
        });
    }
    Ok(lines)
}

/// Relative mismatch between `⟨Ψ₀f, v⟩_h` and `Σₙ Δt ⟨fⁿ, λⁿ⁺¹⟩_h`, where
/// `Ψ₀` is the forward map from a zero initial state with left-point forcing
/// and `λ` the adjoint trajectory started from `M₋^{-*} v`.
pub fn duality_mismatch(grid: &Grid2D, ops: &CnOperators, f: &SpaceTimeField, v: &Field) -> Result<f64> {
    let traj = forward(grid, ops, &grid.zeros(), f, ForcingRule::Left)?;
    let lhs = grid.pairing_h(traj.final_state(), v)?;
    let lambda = adjoint(grid, ops, &ops.solve_hermitian(v)?)?;
    let mut rhs = Complex64::new(0.0, 0.0);
    for n in 0..grid.nt() {
        rhs += grid.pairing_h(f.level(n), lambda.state(n + 1))? * grid.dt();
    }
    let scale = lhs.norm().max(rhs.norm());
    Ok(if scale == 0.0 { 0.0 } else { (lhs - rhs).norm() / scale })
}

pub fn duality(seed: u64) -> Result<Vec<CheckLine>> {
    let mut lines = Vec::new();
    for (k, (nx, ny, nt)) in [(9, 9, 8), (12, 7, 10), (17, 17, 16)].into_iter().enumerate() {
        let grid = Grid2D::unit(nx, ny, nt)?;
        let ops = CnOperators::assemble(&grid, default_params())?;
        let s = seed.wrapping_add(10 * k as u64);
        let f = random_space_time(&grid, s);
        let v = standard_complex_normal(grid.m(), s.wrapping_add(1));
        lines.push(CheckLine::at_most(
            format!("({nx},{ny},{nt}) pairing mismatch"),
            duality_mismatch(&grid, &ops, &f, &v)?,
            DUALITY_TOL,
        ));
    }
    Ok(lines)
}

pub fn convergence_lines(report: &ConvergenceReport) -> Vec<CheckLine> {
    let (name, band) = match report.rule {
        ForcingRule::Left => ("left", LEFT_ORDER),
        ForcingRule::Trapezoid => ("trapezoid", TRAPEZOID_ORDER),
    };
    vec![
        CheckLine::within("spatial order", report.spatial_order, SPATIAL_ORDER),
        CheckLine::within(format!("temporal order, {name} forcing"), report.temporal_order, band),
    ]
}

pub fn convergence(rule: ForcingRule) -> Result<(ConvergenceReport, Vec<CheckLine>)> {
    let report = convergence_study(rule, &ConvergenceSetup::default())?;
    let lines = convergence_lines(&report);
    Ok((report, lines))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gradient_and_duality_checks_pass() {
        for line in gradient(3).unwrap().into_iter().chain(duality(3).unwrap()) {
            assert!(line.pass, "{line}");
        }
    }

    #[test]
    fn display_marks_verdict() {
        let line = CheckLine::at_most("x", 2.0, 1.0);
        assert!(line.to_string().starts_with("FAIL x"));
        assert!(CheckLine::within("y", 2.0, (1.8, 2.2)).pass);
    }
}
