//! Polak–Ribière⁺ nonlinear conjugate gradient with Armijo backtracking.
//!
//! Search directions restart to steepest descent at `k = 0`, every
//! `restart_period` iterations, whenever `⟨⟨r_k, d_{k−1}⟩⟩ ≥ 0`, and whenever
//! the assembled direction fails `⟨⟨r_k, d_k⟩⟩ < 0`. All pairings and norms
//! are the control-space ones of [`Control::inner`].

use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::inverse::{Control, Evaluation, InverseProblem};
use crate::mesh::{Field, Grid2D};

/// Denominator safeguard of the PR⁺ formula.
pub const BETA_SAFEGUARD: f64 = 1e-30;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NcgConfig {
    /// Stop once `‖r_k‖ < tau`.
    pub tau: f64,
    pub k_max: usize,
    /// Sufficient-decrease constant `c ∈ (0,1)`.
    pub armijo_c: f64,
    /// Step reduction per rejected trial, in `(0,1)`.
    pub backtrack_factor: f64,
    /// First trial step at `k = 0` (and every step if `warm_start` is off).
    pub alpha0: f64,
    /// When set, the first trial at `k ≥ 1` is the previous step divided by
    /// `backtrack_factor`.
    pub warm_start: bool,
    pub restart_period: usize,
    /// Radius of the feasible ball `‖f‖_{h,t} ≤ rho`; `None` is unconstrained.
    pub rho: Option<f64>,
    pub max_backtracks: usize,
}

impl Default for NcgConfig {
    fn default() -> Self {
        Self {
            tau: 1e-5,
            k_max: 300,
            armijo_c: 1e-3,
            backtrack_factor: 0.5,
            alpha0: 1.0,
            warm_start: false,
            restart_period: 5,
            rho: None,
            max_backtracks: 60,
        }
    }
}

impl NcgConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.tau.is_finite() && self.tau > 0.0) {
            return Err(Error::param("tau", "must be positive"));
        }
        if !(self.armijo_c > 0.0 && self.armijo_c < 1.0) {
            return Err(Error::param("armijo_c", "must lie in (0, 1)"));
        }
        if !(self.backtrack_factor > 0.0 && self.backtrack_factor < 1.0) {
            return Err(Error::param("backtrack_factor", "must lie in (0, 1)"));
        }
        if !(self.alpha0.is_finite() && self.alpha0 > 0.0) {
            return Err(Error::param("alpha0", "must be positive"));
        }
        if self.restart_period == 0 {
            return Err(Error::param("restart_period", "must be at least 1"));
        }
        if let Some(rho) = self.rho {
            if !(rho.is_finite() && rho > 0.0) {
                return Err(Error::param("rho", "must be positive"));
            }
        }
        if self.max_backtracks == 0 {
            return Err(Error::param("max_backtracks", "must be at least 1"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopReason {
    Tolerance,
    KMax,
    LineSearchFailure,
}

impl StopReason {
    pub fn name(self) -> &'static str {
        match self {
            StopReason::Tolerance => "tolerance",
            StopReason::KMax => "k_max",
            StopReason::LineSearchFailure => "line_search_failure",
        }
    }
}

/// One accepted NCG step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IterationRecord {
    pub k: usize,
    /// Objective after the step.
    pub j: f64,
    /// Misfit term after the step.
    pub misfit: f64,
    /// `‖r_k‖` at the start of the step.
    pub grad_norm: f64,
    pub alpha: f64,
    pub beta: f64,
    pub backtracks: usize,
    pub restarted: bool,
    /// `⟨⟨r_k, d_k⟩⟩`.
    pub slope: f64,
}

#[derive(Debug, Clone)]
pub struct RunReport {
    pub iterations: usize,
    pub history: Vec<IterationRecord>,
    pub initial_control: Control,
    pub initial_j: f64,
    pub final_control: Control,
    pub final_state: Field,
    pub final_j: f64,
    pub final_misfit: f64,
    pub final_grad_norm: f64,
    pub stop_reason: StopReason,
}

/// `max{0, ⟨⟨r_k − r_{k−1}, r_k⟩⟩ / (⟨⟨r_{k−1}, r_{k−1}⟩⟩ + 10⁻³⁰)}`.
pub fn pr_plus_beta(r_k: &Control, r_km1: &Control, grid: &Grid2D) -> f64 {
    let num = r_k.inner(r_k, grid) - r_km1.inner(r_k, grid);
    let den = r_km1.inner(r_km1, grid) + BETA_SAFEGUARD;
    (num / den).max(0.0)
}

/// Scales `f` back onto `{‖f‖_{h,t} ≤ rho}` when it lies outside.
pub fn project_ball(f: &Control, rho: f64, grid: &Grid2D) -> Control {
    let norm = libm::sqrt(f.forcing_norm_sq(grid));
    if norm <= rho {
        f.clone()
    } else {
        f.scaled(rho / norm)
    }
}

/// Accepted line-search point.
#[derive(Debug, Clone)]
pub struct LineSearch<T> {
    pub alpha: f64,
    pub j: f64,
    pub backtracks: usize,
    pub point: Control,
    pub payload: T,
}

/// Armijo backtracking along `d` from `f`: the first
/// `α ∈ {alpha0·σʲ}` with `J(P(f + αd)) ≤ J(f) + c·α·⟨⟨r, d⟩⟩`, where `P` is
/// the ball projection when `cfg.rho` is set.
#[allow(clippy::too_many_arguments)]
pub fn armijo<T>(
    mut eval: impl FnMut(&Control) -> Result<(f64, T)>,
    f: &Control,
    j0: f64,
    d: &Control,
    r: &Control,
    alpha0: f64,
    cfg: &NcgConfig,
    grid: &Grid2D,
) -> Result<LineSearch<T>> {
    let slope = r.inner(d, grid);
    if slope.is_nan() || slope >= 0.0 {
        return Err(Error::NotDescent { slope });
    }
    let mut alpha = alpha0;
    for backtracks in 0..=cfg.max_backtracks {
        let mut point = f.clone();
        point.axpy(alpha, d);
        if let Some(rho) = cfg.rho {
            point = project_ball(&point, rho, grid);
        }
        let (j, payload) = eval(&point)?;
        if j <= j0 + cfg.armijo_c * alpha * slope {
            return Ok(LineSearch {
                alpha,
                j,
                backtracks,
                point,
                payload,
            });
        }
        alpha *= cfg.backtrack_factor;
    }
    Err(Error::LineSearchFailure {
        backtracks: cfg.max_backtracks,
    })
}

/// Minimizes the objective of `problem` starting from `c0`.
pub fn ncg_minimize(problem: &InverseProblem, c0: &Control, cfg: &NcgConfig) -> Result<RunReport> {
    ncg_minimize_with(problem, c0, cfg, |_| {})
}

/// As [`ncg_minimize`], calling `observer` after every accepted step.
///
/// A line-search failure is not an error: the partial report is returned
/// with [`StopReason::LineSearchFailure`].
pub fn ncg_minimize_with(
    problem: &InverseProblem,
    c0: &Control,
    cfg: &NcgConfig,
    mut observer: impl FnMut(&IterationRecord),
) -> Result<RunReport> {
    cfg.validate()?;
    let grid = &problem.grid;
    let mut f = match cfg.rho {
        Some(rho) => project_ball(c0, rho, grid),
        None => c0.clone(),
    };
    let (mut eval, mut r): (Evaluation, Control) = problem.evaluate(&f)?;
    let initial_j = eval.j;
    let mut history: Vec<IterationRecord> = Vec::new();
    let mut prev: Option<(Control, Control)> = None; // (r_{k−1}, d_{k−1})
    let mut last_alpha = cfg.alpha0;
    let mut k = 0;

    let stop_reason = loop {
        let grad_norm = r.norm(grid);
        if grad_norm < cfg.tau {
            break StopReason::Tolerance;
        }
        if k >= cfg.k_max {
            break StopReason::KMax;
        }

        let mut beta = 0.0;
        let mut restarted = true;
        let mut d = r.scaled(-1.0);
        if let Some((r_prev, d_prev)) = prev.as_ref() {
            if k % cfg.restart_period != 0 && r.inner(d_prev, grid) < 0.0 {
                beta = pr_plus_beta(&r, r_prev, grid);
                d.axpy(beta, d_prev);
                restarted = false;
            }
        }
        let mut slope = r.inner(&d, grid);
        if !restarted && slope >= 0.0 {
            d = r.scaled(-1.0);
            beta = 0.0;
            restarted = true;
            slope = r.inner(&d, grid);
        }

        let alpha0 = if k == 0 || !cfg.warm_start {
            cfg.alpha0
        } else {
            last_alpha / cfg.backtrack_factor
        };
        let search = armijo(
            |trial| problem.objective(trial).map(|e| (e.j, e)),
            &f,
            eval.j,
            &d,
            &r,
            alpha0,
            cfg,
            grid,
        );
        let search = match search {
            Ok(s) => s,
            Err(Error::LineSearchFailure { .. }) => break StopReason::LineSearchFailure,
            Err(e) => return Err(e),
        };

        let record = IterationRecord {
            k,
            j: search.j,
            misfit: search.payload.misfit,
            grad_norm,
            alpha: search.alpha,
            beta,
            backtracks: search.backtracks,
            restarted,
            slope,
        };
        observer(&record);
        history.push(record);

        last_alpha = search.alpha;
        f = search.point;
        eval = search.payload;
        let r_next = problem.gradient(&f, &eval.traj)?;
        prev = Some((core::mem::replace(&mut r, r_next), d));
        k += 1;
    };

    Ok(RunReport {
        iterations: history.len(),
        history,
        initial_control: c0.clone(),
        initial_j,
        final_grad_norm: r.norm(grid),
        final_state: eval.traj.observe(),
        final_j: eval.j,
        final_misfit: eval.misfit,
        final_control: f,
        stop_reason,
    })
}
