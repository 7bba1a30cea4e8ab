//! Dense oracles and randomized property checks shared by the integration
//! tests and the acceptance runner.

#![allow(dead_code)]

use std::sync::Arc;

use glinv_core::experiments::{add_noise, standard_complex_normal};
use glinv_core::optimize::{ncg_minimize, pr_plus_beta, project_ball};
use glinv_core::pde::forward;
use glinv_core::{
    CnOperators, CnParams, Complex64, Control, Field, ForcingRule, Grid2D, InverseProblem, NcgConfig, SpaceTimeField,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub type C = Complex64;
pub type Dense = Vec<Vec<C>>;

pub fn c(re: f64, im: f64) -> C {
    C::new(re, im)
}

pub fn default_params() -> CnParams {
    CnParams::new(36e-4, 15e-4, c(0.2, 0.1))
}

// ---------------------------------------------------------------- dense oracle

/// `(a+ib)Δ_h − p` assembled entry by entry from the five-point stencil.
pub fn dense_generator(grid: &Grid2D, params: &CnParams) -> Dense {
    let (mx, my, m) = (grid.mx(), grid.my(), grid.m());
    let d = c(params.a, params.b);
    let (wx, wy) = (1.0 / (grid.dx() * grid.dx()), 1.0 / (grid.dy() * grid.dy()));
    let mut a = vec![vec![c(0.0, 0.0); m]; m];
    for j in 0..my {
        for i in 0..mx {
            let k = j * mx + i;
            a[k][k] = d * (-2.0 * wx - 2.0 * wy) - params.p;
            if i > 0 {
                a[k][k - 1] = d * wx;
            }
            if i + 1 < mx {
                a[k][k + 1] = d * wx;
            }
            if j > 0 {
                a[k][k - mx] = d * wy;
            }
            if j + 1 < my {
                a[k][k + mx] = d * wy;
            }
        }
    }
    a
}

pub fn dense_identity_plus(a: &Dense, s: f64) -> Dense {
    let m = a.len();
    (0..m)
        .map(|r| {
            (0..m)
                .map(|k| a[r][k] * s + if r == k { c(1.0, 0.0) } else { c(0.0, 0.0) })
                .collect()
        })
        .collect()
}

pub fn dense_mul(a: &Dense, x: &[C]) -> Vec<C> {
    a.iter()
        .map(|row| row.iter().zip(x).map(|(u, v)| u * v).sum())
        .collect()
}

/// Gaussian elimination with partial pivoting on a copy.
pub fn dense_solve(a: &Dense, b: &[C]) -> Vec<C> {
    let m = a.len();
    let mut a = a.clone();
    let mut x = b.to_vec();
    for k in 0..m {
        let p = (k..m)
            .max_by(|&i, &j| a[i][k].norm().partial_cmp(&a[j][k].norm()).unwrap())
            .unwrap();
        a.swap(k, p);
        x.swap(k, p);
        for i in k + 1..m {
            let f = a[i][k] / a[k][k];
            if f == c(0.0, 0.0) {
                continue;
            }
            let (top, bottom) = a.split_at_mut(i);
            for (dst, src) in bottom[0][k..].iter_mut().zip(&top[k][k..]) {
                *dst -= f * src;
            }
            let t = x[k];
            x[i] -= f * t;
        }
    }
    for k in (0..m).rev() {
        let mut s = x[k];
        for j in k + 1..m {
            s -= a[k][j] * x[j];
        }
        x[k] = s / a[k][k];
    }
    x
}

/// Crank–Nicolson trajectory with dense operators.
pub fn dense_forward(grid: &Grid2D, params: &CnParams, y0: &[C], f: &SpaceTimeField, rule: ForcingRule) -> Vec<Vec<C>> {
    let a = dense_generator(grid, params);
    let dt = grid.dt();
    let m_minus = dense_identity_plus(&a, -0.5 * dt);
    let m_plus = dense_identity_plus(&a, 0.5 * dt);
    let nt = grid.nt();
    let mut states = vec![y0.to_vec()];
    for k in 0..nt {
        let forcing: Vec<C> = match rule {
            ForcingRule::Left => f.level(k).to_vec(),
            ForcingRule::Trapezoid => {
                let next = f.level((k + 1).min(nt - 1));
                f.level(k).iter().zip(next.iter()).map(|(u, v)| (u + v) * 0.5).collect()
            }
        };
        let mut rhs = dense_mul(&m_plus, &states[k]);
        for (r, g) in rhs.iter_mut().zip(&forcing) {
            *r += g * dt;
        }
        states.push(dense_solve(&m_minus, &rhs));
    }
    states
}

pub fn rel_diff(x: &[C], y: &[C]) -> f64 {
    let num: f64 = x.iter().zip(y).map(|(u, v)| (u - v).norm_sqr()).sum();
    let den: f64 = y.iter().map(|v| v.norm_sqr()).sum();
    if den == 0.0 {
        num.sqrt()
    } else {
        (num / den).sqrt()
    }
}

// ---------------------------------------------------------------- random data

pub struct Gen {
    pub rng: ChaCha8Rng,
}

impl Gen {
    pub fn new(seed: u64) -> Self {
        Self {
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    pub fn field(&mut self, m: usize) -> Field {
        let seed = self.rng.gen();
        standard_complex_normal(m, seed)
    }

    pub fn space_time(&mut self, grid: &Grid2D) -> SpaceTimeField {
        SpaceTimeField::from_levels((0..grid.nt()).map(|_| self.field(grid.m())).collect())
    }

    pub fn profile(&mut self, nt: usize) -> Vec<C> {
        (0..nt)
            .map(|_| c(self.rng.gen_range(0.5..1.5), self.rng.gen_range(-0.5..0.5)))
            .collect()
    }

    /// A full or separable control of the same shape as `like`.
    pub fn control_like(&mut self, grid: &Grid2D, like: &Control) -> Control {
        match like {
            Control::Full(_) => Control::Full(self.space_time(grid)),
            Control::Separable { g, .. } => Control::Separable {
                q: self.field(grid.m()),
                g: g.clone(),
            },
        }
    }

    pub fn grid(&mut self) -> Grid2D {
        let n = |r: &mut ChaCha8Rng| r.gen_range(9..=17);
        let (nx, ny, nt) = (n(&mut self.rng), n(&mut self.rng), self.rng.gen_range(8..=16));
        Grid2D::unit(nx, ny, nt).unwrap()
    }

    pub fn params(&mut self) -> CnParams {
        CnParams::new(
            self.rng.gen_range(1e-3..0.2),
            self.rng.gen_range(-0.1..0.1),
            c(self.rng.gen_range(0.0..1.0), self.rng.gen_range(-0.5..0.5)),
        )
    }

    pub fn rule(&mut self) -> ForcingRule {
        if self.rng.gen() {
            ForcingRule::Left
        } else {
            ForcingRule::Trapezoid
        }
    }

    /// Random problem with data, `y₀`, coefficients and forcing rule drawn at random.
    pub fn problem(&mut self, eps: f64) -> InverseProblem {
        let grid = self.grid();
        let ops = Arc::new(CnOperators::assemble(&grid, self.params()).unwrap());
        let y0 = self.field(grid.m());
        let data = self.field(grid.m());
        let rule = self.rule();
        InverseProblem::new(grid, ops, y0, data, eps).unwrap().with_rule(rule)
    }

    /// A zero control of random mode.
    pub fn zero_control(&mut self, grid: &Grid2D) -> Control {
        if self.rng.gen() {
            Control::Full(grid.zeros_space_time())
        } else {
            Control::separable(grid.zeros(), self.profile(grid.nt()))
        }
    }
}

// ---------------------------------------------------------------- properties

pub type Check = Result<(), String>;
pub type PropertyCheck = fn(usize, u64) -> Check;

pub fn convexity(trials: usize, seed: u64) -> Check {
    let mut g = Gen::new(seed);
    for t in 0..trials {
        let eps = g.rng.gen_range(0.0..1e-2);
        let p = g.problem(eps);
        let shape = g.zero_control(&p.grid);
        let f1 = g.control_like(&p.grid, &shape);
        let f2 = g.control_like(&p.grid, &shape);
        let mut mid = f1.scaled(0.5);
        mid.axpy(0.5, &f2);
        let (j1, j2, jm) = (
            p.objective(&f1).unwrap().j,
            p.objective(&f2).unwrap().j,
            p.objective(&mid).unwrap().j,
        );
        if jm > 0.5 * (j1 + j2) + 1e-12 * (1.0 + j1.abs() + j2.abs()) {
            return Err(format!("trial {t}: J(mid) = {jm:e} > mean {:e}", 0.5 * (j1 + j2)));
        }
    }
    Ok(())
}

pub fn gradient_monotonicity(trials: usize, seed: u64) -> Check {
    let mut g = Gen::new(seed);
    for t in 0..trials {
        let eps = g.rng.gen_range(0.0..1e-2);
        let p = g.problem(eps);
        let shape = g.zero_control(&p.grid);
        let f1 = g.control_like(&p.grid, &shape);
        let f2 = g.control_like(&p.grid, &shape);
        let (_, r1) = p.evaluate(&f1).unwrap();
        let (_, r2) = p.evaluate(&f2).unwrap();
        let mut dr = r1;
        dr.axpy(-1.0, &r2);
        let mut df = f1;
        df.axpy(-1.0, &f2);
        let v = dr.inner(&df, &p.grid);
        if v < -1e-10 {
            return Err(format!("trial {t}: <dr, df> = {v:e}"));
        }
    }
    Ok(())
}

/// `∇J_ε(f) − ∇J_0(f) = ε·f` on every level of a full control.
pub fn eps_shift(trials: usize, seed: u64) -> Check {
    let mut g = Gen::new(seed);
    for t in 0..trials {
        let eps = g.rng.gen_range(1e-6..1.0);
        let p = g.problem(eps);
        let p0 = p.clone().with_eps(0.0);
        let f = Control::Full(g.space_time(&p.grid));
        let (_, r) = p.evaluate(&f).unwrap();
        let (_, r0) = p0.evaluate(&f).unwrap();
        let (r, r0, f) = (r.as_full().unwrap(), r0.as_full().unwrap(), f.as_full().unwrap());
        for n in 0..p.grid.nt() {
            for k in 0..p.grid.m() {
                let want = f.level(n)[k] * eps;
                let got = r.level(n)[k] - r0.level(n)[k];
                let scale = r0.level(n)[k].norm() + want.norm();
                if (got - want).norm() > 4.0 * f64::EPSILON * scale {
                    return Err(format!("trial {t}, level {n}, node {k}: {got} vs {want}"));
                }
            }
        }
    }
    Ok(())
}

/// `Ψ(f₁ + s·f₂) = Ψ(f₁) + s·(Ψ(f₂) − Ψ(0))` for the full trajectory.
pub fn affine_linearity(trials: usize, seed: u64) -> Check {
    let mut g = Gen::new(seed);
    for t in 0..trials {
        let grid = g.grid();
        let ops = CnOperators::assemble(&grid, g.params()).unwrap();
        let rule = g.rule();
        let y0 = g.field(grid.m());
        let (f1, f2) = (g.space_time(&grid), g.space_time(&grid));
        let s = g.rng.gen_range(-3.0..3.0);
        let mut comb = f1.clone();
        comb.axpy(c(s, 0.0), &f2);
        let run = |f: &SpaceTimeField| forward(&grid, &ops, &y0, f, rule).unwrap();
        let (y1, y2, y0_run, yc) = (run(&f1), run(&f2), run(&grid.zeros_space_time()), run(&comb));
        for n in 0..=grid.nt() {
            let want: Vec<C> = (0..grid.m())
                .map(|k| y1.state(n)[k] + (y2.state(n)[k] - y0_run.state(n)[k]) * s)
                .collect();
            let err = rel_diff(yc.state(n), &want);
            if err > 1e-12 {
                return Err(format!("trial {t}, level {n}: relative deviation {err:e}"));
            }
        }
    }
    Ok(())
}

/// β ≥ 0 for random gradient pairs and along every NCG run of [`monotone_descent`].
pub fn pr_beta_nonnegative(trials: usize, seed: u64) -> Check {
    let mut g = Gen::new(seed);
    for t in 0..trials {
        let grid = g.grid();
        let shape = g.zero_control(&grid);
        let a = g.control_like(&grid, &shape);
        let mut b = g.control_like(&grid, &shape);
        if g.rng.gen() {
            // nearly parallel pairs drive the numerator towards zero
            b = a.scaled(g.rng.gen_range(0.9..1.1));
        }
        let beta = pr_plus_beta(&a, &b, &grid);
        if !(beta >= 0.0 && beta.is_finite()) {
            return Err(format!("trial {t}: beta = {beta}"));
        }
    }
    Ok(())
}

/// Every accepted NCG step decreases `J` and satisfies the Armijo inequality.
pub fn monotone_descent(trials: usize, seed: u64) -> Check {
    let mut g = Gen::new(seed);
    for t in 0..trials {
        let eps = g.rng.gen_range(1e-6..1e-2);
        let p = g.problem(eps);
        let c0 = g.zero_control(&p.grid);
        let cfg = NcgConfig {
            tau: 1e-12,
            k_max: 15,
            rho: if g.rng.gen_bool(0.25) {
                Some(g.rng.gen_range(0.1..2.0))
            } else {
                None
            },
            ..NcgConfig::default()
        };
        let report = ncg_minimize(&p, &c0, &cfg).unwrap();
        let mut prev = report.initial_j;
        for rec in &report.history {
            if rec.j > prev {
                return Err(format!("trial {t}, k = {}: J rose from {prev:e} to {:e}", rec.k, rec.j));
            }
            if rec.j > prev + cfg.armijo_c * rec.alpha * rec.slope {
                return Err(format!("trial {t}, k = {}: Armijo inequality violated", rec.k));
            }
            if rec.beta < 0.0 {
                return Err(format!("trial {t}, k = {}: beta = {}", rec.k, rec.beta));
            }
            prev = rec.j;
        }
    }
    Ok(())
}

pub fn noise_normalization(trials: usize, seed: u64) -> Check {
    let mut g = Gen::new(seed);
    for t in 0..trials {
        let grid = g.grid();
        let u = g.field(grid.m()).scaled(c(g.rng.gen_range(1e-3..1e3), 0.0));
        let delta = g.rng.gen_range(0.0..0.2);
        let noisy = add_noise(&grid, &u, delta, g.rng.gen()).unwrap();
        let achieved = grid.norm_h(&noisy.sub(&u)).unwrap() / grid.norm_h(&u).unwrap();
        if (achieved - delta).abs() > 1e-14 {
            return Err(format!("trial {t}: achieved {achieved:e} for delta {delta:e}"));
        }
    }
    Ok(())
}

pub fn projection_idempotence(trials: usize, seed: u64) -> Check {
    let mut g = Gen::new(seed);
    for t in 0..trials {
        let grid = g.grid();
        let shape = g.zero_control(&grid);
        let f = g.control_like(&grid, &shape);
        let norm = f.forcing_norm_sq(&grid).sqrt();
        let rho = norm * g.rng.gen_range(0.05..2.0);
        let once = project_ball(&f, rho, &grid);
        let twice = project_ball(&once, rho, &grid);
        let n1 = once.forcing_norm_sq(&grid).sqrt();
        if n1 > rho * (1.0 + 1e-14) {
            return Err(format!("trial {t}: ‖P f‖ = {n1:e} > rho = {rho:e}"));
        }
        let (a, b) = (once.materialize(), twice.materialize());
        for (la, lb) in a.levels().iter().zip(b.levels()) {
            if rel_diff(lb, la) > 1e-15 {
                return Err(format!("trial {t}: P(P f) != P f"));
            }
        }
        if norm <= rho && once != f {
            return Err(format!("trial {t}: P moved a point inside the ball"));
        }
    }
    Ok(())
}
