//! Benchmark sources, synthetic data, noise, error metrics, the table
//! configurations and the manufactured-solution convergence study.

use alloc::format;
use alloc::string::String;
use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::inverse::{Control, GradientMode, InverseProblem};
use crate::linsolve::{CnOperators, CnParams};
use crate::mesh::{re_dot, Field, Grid2D, SpaceTimeField};
use crate::optimize::{ncg_minimize_with, IterationRecord, NcgConfig, RunReport};
use crate::pde::{forward, ForcingRule};

/// Width of the Gaussian envelopes of examples 2 and 4.
pub const SIGMA: f64 = 0.12;

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

fn sin_pi(k: f64, x: f64) -> f64 {
    libm::sin(k * PI * x)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExampleId {
    /// `q = sin(2πx) sin(2πy)`.
    Ex1,
    /// `q = i·exp(−|x − c|²/(2σ²)) sin(πx) sin(πy)`.
    Ex2,
    /// `q = sin(2πx) sin(2πy) + 0.7i·sin(3πx) sin(2πy)`.
    Ex3,
    /// `f = i·exp(−|x − c|² t/(2σ²)) sin(πx) sin(πy)`, full space–time.
    Ex4,
}

impl ExampleId {
    pub const ALL: [ExampleId; 4] = [ExampleId::Ex1, ExampleId::Ex2, ExampleId::Ex3, ExampleId::Ex4];

    pub fn name(self) -> &'static str {
        match self {
            ExampleId::Ex1 => "example1",
            ExampleId::Ex2 => "example2",
            ExampleId::Ex3 => "example3",
            ExampleId::Ex4 => "example4",
        }
    }

    pub fn description(self) -> &'static str {
        match self {
            ExampleId::Ex1 => "smooth real-valued source sin(2πx)sin(2πy)",
            ExampleId::Ex2 => "purely imaginary Gaussian-modulated source (σ = 0.12)",
            ExampleId::Ex3 => "complex source sin(2πx)sin(2πy) + 0.7i sin(3πx)sin(2πy)",
            ExampleId::Ex4 => "space–time forcing i·exp(−r²t/(2σ²))sin(πx)sin(πy)",
        }
    }

    pub fn default_mode(self) -> ControlMode {
        match self {
            ExampleId::Ex4 => ControlMode::Full,
            _ => ControlMode::Separable,
        }
    }

    /// Spatial factor `q(x, y)` of the separable examples.
    pub fn q(self, x: f64, y: f64) -> Option<Complex64> {
        match self {
            ExampleId::Ex1 => Some(c(sin_pi(2.0, x) * sin_pi(2.0, y), 0.0)),
            ExampleId::Ex2 => {
                let r2 = (x - 0.5) * (x - 0.5) + (y - 0.5) * (y - 0.5);
                let env = libm::exp(-r2 / (2.0 * SIGMA * SIGMA));
                Some(c(0.0, env * sin_pi(1.0, x) * sin_pi(1.0, y)))
            }
            ExampleId::Ex3 => Some(c(
                sin_pi(2.0, x) * sin_pi(2.0, y),
                0.7 * sin_pi(3.0, x) * sin_pi(2.0, y),
            )),
            ExampleId::Ex4 => None,
        }
    }

    /// Space–time forcing `f(x, y, t)` (for separable examples with `g ≡ 1`).
    pub fn f(self, x: f64, y: f64, t: f64) -> Complex64 {
        match self {
            ExampleId::Ex4 => {
                let r2 = (x - 0.5) * (x - 0.5) + (y - 0.5) * (y - 0.5);
                let env = libm::exp(-r2 * t / (2.0 * SIGMA * SIGMA));
                c(0.0, env * sin_pi(1.0, x) * sin_pi(1.0, y))
            }
            other => other.q(x, y).expect("separable example"),
        }
    }
}

impl core::str::FromStr for ExampleId {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "example1" | "ex1" | "1" => Ok(ExampleId::Ex1),
            "example2" | "ex2" | "2" => Ok(ExampleId::Ex2),
            "example3" | "ex3" | "3" => Ok(ExampleId::Ex3),
            "example4" | "ex4" | "4" => Ok(ExampleId::Ex4),
            other => Err(Error::Unknown {
                kind: "example",
                value: other.into(),
            }),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ControlMode {
    Full,
    Separable,
}

/// Prescribed temporal profile `g` of separable sources.
#[derive(Debug, Clone, PartialEq)]
pub enum TimeProfile {
    Constant(Complex64),
    /// Explicit samples `g⁰ … g^{Nt−1}`.
    Samples(Vec<Complex64>),
}

impl Default for TimeProfile {
    fn default() -> Self {
        TimeProfile::Constant(c(1.0, 0.0))
    }
}

impl TimeProfile {
    pub fn samples(&self, nt: usize) -> Result<Vec<Complex64>> {
        match self {
            TimeProfile::Constant(v) => Ok(vec![*v; nt]),
            TimeProfile::Samples(s) if s.len() == nt => Ok(s.clone()),
            TimeProfile::Samples(s) => Err(Error::LengthMismatch {
                expected: nt,
                found: s.len(),
            }),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum InitialCondition {
    /// `sin(πx/Lx) sin(πy/Ly)`.
    #[default]
    SinSin,
    Zero,
}

impl InitialCondition {
    pub fn sample(self, grid: &Grid2D) -> Field {
        match self {
            InitialCondition::SinSin => {
                let (lx, ly) = (grid.lx(), grid.ly());
                grid.sample(|x, y| c(sin_pi(1.0, x / lx) * sin_pi(1.0, y / ly), 0.0))
            }
            InitialCondition::Zero => grid.zeros(),
        }
    }
}

/// Everything needed to run one reconstruction.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentSpec {
    pub example: ExampleId,
    pub lx: f64,
    pub ly: f64,
    pub t_final: f64,
    pub nx: usize,
    pub ny: usize,
    pub nt: usize,
    pub params: CnParams,
    pub y0: InitialCondition,
    pub eps: f64,
    pub noise_delta: f64,
    pub seed: u64,
    pub control_mode: ControlMode,
    pub g: TimeProfile,
    pub rule: ForcingRule,
    pub gradient_mode: GradientMode,
    /// Synthetic data are generated on a grid refined by this factor in
    /// space and time and restricted to the reconstruction grid. `1`
    /// reuses the reconstruction grid.
    pub data_refinement: usize,
    pub ncg: NcgConfig,
}

impl ExperimentSpec {
    /// Defaults: unit square and time, `(a, b) = (36e−4, 15e−4)`,
    /// `p = 0.2 + 0.1i`, `(Nx, Ny, Nt) = (100, 100, 70)`,
    /// `y₀ = sin(πx) sin(πy)`, `ε = τ = 1e−5`, `g ≡ 1`, no noise.
    pub fn new(example: ExampleId) -> Self {
        Self {
            example,
            lx: 1.0,
            ly: 1.0,
            t_final: 1.0,
            nx: 100,
            ny: 100,
            nt: 70,
            params: CnParams::new(36e-4, 15e-4, c(0.2, 0.1)),
            y0: InitialCondition::SinSin,
            eps: 1e-5,
            noise_delta: 0.0,
            seed: 0,
            control_mode: example.default_mode(),
            g: TimeProfile::default(),
            rule: ForcingRule::Left,
            gradient_mode: GradientMode::Exact,
            data_refinement: 1,
            ncg: NcgConfig::default(),
        }
    }

    pub fn with_grid(mut self, nx: usize, ny: usize, nt: usize) -> Self {
        (self.nx, self.ny, self.nt) = (nx, ny, nt);
        self
    }

    pub fn grid(&self) -> Result<Grid2D> {
        Grid2D::new(self.lx, self.ly, self.t_final, self.nx, self.ny, self.nt)
    }

    pub fn validate(&self) -> Result<()> {
        self.grid()?;
        self.ncg.validate()?;
        if !(self.eps.is_finite() && self.eps >= 0.0) {
            return Err(Error::param("eps", "must be finite and non-negative"));
        }
        if !(self.noise_delta.is_finite() && self.noise_delta >= 0.0) {
            return Err(Error::param("delta", "must be finite and non-negative"));
        }
        if self.data_refinement == 0 {
            return Err(Error::param("data_refinement", "must be at least 1"));
        }
        if self.example == ExampleId::Ex4 && self.control_mode == ControlMode::Separable {
            return Err(Error::param("control_mode", "example4 has no separable form"));
        }
        if let TimeProfile::Samples(s) = &self.g {
            if self.data_refinement != 1 {
                return Err(Error::param("g", "sampled profiles need data_refinement = 1"));
            }
            if s.len() != self.nt {
                return Err(Error::param(
                    "g",
                    format!("expected {} samples, found {}", self.nt, s.len()),
                ));
            }
        }
        Ok(())
    }
}

/// True source of `example` on `grid`, in the requested mode.
pub fn make_source(example: ExampleId, grid: &Grid2D, mode: ControlMode, g: &TimeProfile) -> Result<Control> {
    match (example.q(0.0, 0.0), mode) {
        (Some(_), ControlMode::Separable) => {
            let q = grid.sample(|x, y| example.q(x, y).expect("separable example"));
            Ok(Control::separable(q, g.samples(grid.nt())?))
        }
        (Some(_), ControlMode::Full) => {
            let q = grid.sample(|x, y| example.q(x, y).expect("separable example"));
            let g = g.samples(grid.nt())?;
            Ok(Control::Full(SpaceTimeField::from_levels(
                g.iter().map(|&gn| q.scaled(gn)).collect(),
            )))
        }
        (None, ControlMode::Full) => Ok(Control::Full(grid.sample_space_time(|x, y, t| example.f(x, y, t)))),
        (None, ControlMode::Separable) => Err(Error::param("control_mode", "example4 has no separable form")),
    }
}

/// Restriction of a field on `fine` to the nodes of `coarse` (`factor`-fold refinement).
fn restrict(fine_grid: &Grid2D, fine: &Field, coarse_grid: &Grid2D, factor: usize) -> Field {
    Field::from_vec(
        (0..coarse_grid.m())
            .map(|k| {
                let (i, j) = coarse_grid.node(k);
                fine[fine_grid.index(factor * i, factor * j)]
            })
            .collect(),
    )
}

/// Noise-free final state `u_T` and the true control on the reconstruction grid.
pub fn synthesize_data(spec: &ExperimentSpec) -> Result<(Field, Control)> {
    spec.validate()?;
    let grid = spec.grid()?;
    let truth = make_source(spec.example, &grid, spec.control_mode, &spec.g)?;
    let r = spec.data_refinement;
    let data_grid = if r == 1 {
        grid
    } else {
        grid.with_resolution(r * spec.nx, r * spec.ny, r * spec.nt)?
    };
    let ops = CnOperators::assemble(&data_grid, spec.params)?;
    let data_truth = if r == 1 {
        truth.clone()
    } else {
        make_source(spec.example, &data_grid, spec.control_mode, &spec.g)?
    };
    let traj = forward(
        &data_grid,
        &ops,
        &spec.y0.sample(&data_grid),
        &data_truth.materialize(),
        spec.rule,
    )?;
    let u_t = if r == 1 {
        traj.observe()
    } else {
        restrict(&data_grid, traj.final_state(), &grid, r)
    };
    Ok((u_t, truth))
}

/// `u_T + δ·(‖u_T‖_h/‖ξ‖_h)·ξ` with `ξ` circularly symmetric complex
/// Gaussian: independent standard normal real and imaginary parts drawn in
/// that order per node from a ChaCha8 stream seeded with `seed`.
pub fn add_noise(grid: &Grid2D, u_t: &Field, delta: f64, seed: u64) -> Result<Field> {
    grid.check_field(u_t)?;
    if !(delta.is_finite() && delta >= 0.0) {
        return Err(Error::param("delta", "must be finite and non-negative"));
    }
    if delta == 0.0 {
        return Ok(u_t.clone());
    }
    let data_norm = grid.norm_h(u_t)?;
    if data_norm == 0.0 {
        return Err(Error::ZeroNorm("data"));
    }
    let xi = standard_complex_normal(u_t.len(), seed);
    let scale = delta * data_norm / grid.norm_h(&xi)?;
    let mut noisy = u_t.clone();
    noisy.axpy(c(scale, 0.0), &xi);
    Ok(noisy)
}

/// `len` circularly symmetric complex normals from the ChaCha8 stream of `seed`,
/// real part first.
pub fn standard_complex_normal(len: usize, seed: u64) -> Field {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Field::from_vec(
        (0..len)
            .map(|_| {
                let re: f64 = StandardNormal.sample(&mut rng);
                let im: f64 = StandardNormal.sample(&mut rng);
                c(re, im)
            })
            .collect(),
    )
}

/// Squared relative errors in the conventions of the result tables.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Metrics {
    /// `‖Ψ(f_rec) − data‖²_h / ‖data‖²_h`.
    pub misfit_sq_ratio: f64,
    /// `‖q_rec − q‖²_h / ‖q‖²_h` (separable reconstructions only).
    pub q_err_sq_ratio: Option<f64>,
    /// `‖f_rec − f‖²_{h,t} / ‖f‖²_{h,t}`.
    pub f_err_sq_ratio: Option<f64>,
    pub iterations: usize,
}

pub fn compute_metrics(grid: &Grid2D, recon: &RunReport, truth: &Control, data: &Field) -> Result<Metrics> {
    grid.check_field(data)?;
    grid.check_field(&recon.final_state)?;
    let data_sq = re_dot(data, data);
    if data_sq == 0.0 {
        return Err(Error::ZeroNorm("data"));
    }
    let resid = recon.final_state.sub(data);
    let misfit_sq_ratio = re_dot(&resid, &resid) / data_sq;

    let q_err_sq_ratio = match (recon.final_control.q(), truth.q()) {
        (Some(q_rec), Some(q)) => {
            grid.check_field(q_rec)?;
            grid.check_field(q)?;
            let q_sq = re_dot(q, q);
            if q_sq == 0.0 {
                return Err(Error::ZeroNorm("true source"));
            }
            let diff = q_rec.sub(q);
            Some(re_dot(&diff, &diff) / q_sq)
        }
        _ => None,
    };

    let f_true = truth.materialize();
    let f_rec = recon.final_control.materialize();
    grid.check_space_time(&f_true)?;
    grid.check_space_time(&f_rec)?;
    let f_sq = f_true.re_dot(&f_true);
    let f_err_sq_ratio = if f_sq == 0.0 {
        if q_err_sq_ratio.is_none() {
            return Err(Error::ZeroNorm("true source"));
        }
        None
    } else {
        let mut diff = f_rec;
        diff.axpy(c(-1.0, 0.0), &f_true);
        Some(diff.re_dot(&diff) / f_sq)
    };

    Ok(Metrics {
        misfit_sq_ratio,
        q_err_sq_ratio,
        f_err_sq_ratio,
        iterations: recon.iterations,
    })
}

/// Outcome of [`run_experiment`].
#[derive(Debug, Clone)]
pub struct Experiment {
    pub grid: Grid2D,
    pub truth: Control,
    /// Noise-free final state.
    pub clean_data: Field,
    /// Data handed to the reconstruction (noisy when `noise_delta > 0`).
    pub data: Field,
    pub report: RunReport,
    pub metrics: Metrics,
}

/// Builds the inverse problem of `spec` with the given data.
pub fn build_problem(spec: &ExperimentSpec, data: Field) -> Result<InverseProblem> {
    let grid = spec.grid()?;
    let ops = Arc::new(CnOperators::assemble(&grid, spec.params)?);
    Ok(InverseProblem::new(grid, ops, spec.y0.sample(&grid), data, spec.eps)?
        .with_rule(spec.rule)
        .with_gradient_mode(spec.gradient_mode))
}

/// Synthesizes data, reconstructs from the zero control and scores the result.
pub fn run_experiment(spec: &ExperimentSpec) -> Result<Experiment> {
    run_experiment_with(spec, |_| {})
}

pub fn run_experiment_with(spec: &ExperimentSpec, observer: impl FnMut(&IterationRecord)) -> Result<Experiment> {
    let (clean_data, truth) = synthesize_data(spec)?;
    let grid = spec.grid()?;
    let data = add_noise(&grid, &clean_data, spec.noise_delta, spec.seed)?;
    let problem = build_problem(spec, data.clone())?;
    let c0 = truth.zeros_like();
    let report = ncg_minimize_with(&problem, &c0, &spec.ncg, observer)?;
    let metrics = compute_metrics(&grid, &report, &truth, &data)?;
    Ok(Experiment {
        grid,
        truth,
        clean_data,
        data,
        report,
        metrics,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TableId {
    /// Stopping tolerance sweep.
    T1,
    /// Mesh and time-step sweep.
    T2,
    /// Regularization sweep.
    T3,
    /// Noise sweep on example 3.
    T4,
}

impl TableId {
    pub fn name(self) -> &'static str {
        match self {
            TableId::T1 => "T1",
            TableId::T2 => "T2",
            TableId::T3 => "T3",
            TableId::T4 => "T4",
        }
    }
}

impl core::str::FromStr for TableId {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "T1" | "t1" => Ok(TableId::T1),
            "T2" | "t2" => Ok(TableId::T2),
            "T3" | "t3" => Ok(TableId::T3),
            "T4" | "t4" => Ok(TableId::T4),
            other => Err(Error::Unknown {
                kind: "table",
                value: other.into(),
            }),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Scale {
    Paper,
    #[default]
    Desk,
}

impl Scale {
    pub fn name(self) -> &'static str {
        match self {
            Scale::Paper => "paper",
            Scale::Desk => "desk",
        }
    }

    fn grid(self) -> (usize, usize, usize) {
        match self {
            Scale::Paper => (100, 100, 70),
            Scale::Desk => (50, 50, 70),
        }
    }

    fn k_max(self, noisy: bool) -> usize {
        match (self, noisy) {
            (Scale::Desk, false) => 300,
            (Scale::Desk, true) => 1500,
            (Scale::Paper, false) => 2000,
            (Scale::Paper, true) => 20000,
        }
    }
}

impl core::str::FromStr for Scale {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "paper" | "full" => Ok(Scale::Paper),
            "desk" => Ok(Scale::Desk),
            other => Err(Error::Unknown {
                kind: "scale",
                value: other.into(),
            }),
        }
    }
}

/// One configuration of a result table.
#[derive(Debug, Clone, PartialEq)]
pub struct TableRow {
    pub label: String,
    pub spec: ExperimentSpec,
}

/// Row configurations of `table` at `scale`, with `seed` for the noise draws.
pub fn table_rows(table: TableId, scale: Scale, seed: u64) -> Vec<TableRow> {
    let (nx, ny, nt) = scale.grid();
    let base = |example: ExampleId, noisy: bool| {
        let mut spec = ExperimentSpec::new(example).with_grid(nx, ny, nt);
        spec.eps = 1e-5;
        spec.ncg.tau = 1e-5;
        spec.ncg.k_max = scale.k_max(noisy);
        spec.seed = seed;
        spec
    };
    match table {
        TableId::T1 => [1e-3, 1e-4, 1e-5, 1e-6]
            .into_iter()
            .map(|tau| {
                let mut spec = base(ExampleId::Ex1, false);
                spec.ncg.tau = tau;
                TableRow {
                    label: format!("tau={tau:e}"),
                    spec,
                }
            })
            .collect(),
        TableId::T2 => {
            let grids: [(usize, usize, usize); 4] = match scale {
                Scale::Paper => [(35, 35, 70), (50, 50, 70), (100, 100, 70), (100, 100, 150)],
                Scale::Desk => [(25, 25, 70), (35, 35, 70), (50, 50, 70), (50, 50, 150)],
            };
            grids
                .into_iter()
                .map(|(nx, ny, nt)| TableRow {
                    label: format!("grid={nx}x{ny}x{nt}"),
                    spec: base(ExampleId::Ex1, false).with_grid(nx, ny, nt),
                })
                .collect()
        }
        TableId::T3 => [1e-3, 1e-4, 1e-5, 1e-6]
            .into_iter()
            .map(|eps| {
                let mut spec = base(ExampleId::Ex1, false);
                spec.eps = eps;
                TableRow {
                    label: format!("eps={eps:e}"),
                    spec,
                }
            })
            .collect(),
        TableId::T4 => {
            let mut rows: Vec<TableRow> = [0.0, 1e-3, 5e-3]
                .into_iter()
                .map(|delta| {
                    let mut spec = base(ExampleId::Ex3, delta > 0.0);
                    spec.noise_delta = delta;
                    TableRow {
                        label: format!("delta={delta:e},eps=1e-5"),
                        spec,
                    }
                })
                .collect();
            // stronger regularization at the lower noise level
            let mut spec = base(ExampleId::Ex3, true);
            spec.noise_delta = 1e-3;
            spec.eps = 1e-3;
            rows.push(TableRow {
                label: String::from("delta=1e-3,eps=1e-3"),
                spec,
            });
            rows
        }
    }
}

/// Manufactured solution `y⋆ = e^{−t} sin(πx/Lx) sin(πy/Ly)` and its forcing
/// `f = ∂t y⋆ − (a+ib)Δy⋆ + p y⋆`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Manufactured {
    pub params: CnParams,
    pub lx: f64,
    pub ly: f64,
}

impl Manufactured {
    pub fn solution(&self, x: f64, y: f64, t: f64) -> Complex64 {
        c(libm::exp(-t) * sin_pi(1.0, x / self.lx) * sin_pi(1.0, y / self.ly), 0.0)
    }

    pub fn forcing(&self, x: f64, y: f64, t: f64) -> Complex64 {
        let k2 = PI * PI * (1.0 / (self.lx * self.lx) + 1.0 / (self.ly * self.ly));
        let diffusion = c(self.params.a, self.params.b);
        (c(-1.0, 0.0) + diffusion * k2 + self.params.p) * self.solution(x, y, t)
    }

    /// Relative `‖y^{Nt} − y⋆(·,T)‖_h / ‖y⋆(·,T)‖_h` on `grid`.
    pub fn final_error(&self, grid: &Grid2D, rule: ForcingRule) -> Result<f64> {
        let ops = CnOperators::assemble(grid, self.params)?;
        let y0 = grid.sample(|x, y| self.solution(x, y, 0.0));
        let f = grid.sample_space_time(|x, y, t| self.forcing(x, y, t));
        let traj = forward(grid, &ops, &y0, &f, rule)?;
        let exact = grid.sample(|x, y| self.solution(x, y, grid.t_final()));
        let err = traj.final_state().sub(&exact);
        Ok(grid.norm_h(&err)? / grid.norm_h(&exact)?)
    }
}

/// Error-vs-resolution rows and fitted orders of a convergence study.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceReport {
    pub rule: ForcingRule,
    /// `(N, relative error)` with `N = Nx = Ny`, time steps fixed.
    pub spatial: Vec<(usize, f64)>,
    /// `(Nt, relative error)`, spatial grid fixed.
    pub temporal: Vec<(usize, f64)>,
    pub spatial_order: f64,
    pub temporal_order: f64,
}

/// Resolutions and coefficients of a convergence study.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceSetup {
    pub params: CnParams,
    pub spatial_n: Vec<usize>,
    /// Time steps of the spatial sweep; large enough for the time error to be negligible.
    pub spatial_nt: usize,
    pub temporal_n: usize,
    pub temporal_nt: Vec<usize>,
}

impl Default for ConvergenceSetup {
    fn default() -> Self {
        Self {
            params: CnParams::new(36e-4, 15e-4, c(0.2, 0.1)),
            spatial_n: vec![8, 16, 32, 64],
            spatial_nt: 1000,
            temporal_n: 64,
            temporal_nt: vec![4, 8, 16, 32],
        }
    }
}

/// Least-squares slope of `log(error)` against `log(1/N)`.
pub fn fitted_order(rows: &[(usize, f64)]) -> f64 {
    let pts: Vec<(f64, f64)> = rows
        .iter()
        .map(|&(n, e)| (-libm::log(n as f64), libm::log(e)))
        .collect();
    let len = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / len;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / len;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    sxy / sxx
}

/// Observed spatial and temporal orders against the manufactured solution.
///
/// The spatial sweep always integrates the forcing with the trapezoid rule
/// so that the time error stays below the spatial error; `rule` governs the
/// temporal sweep.
pub fn convergence_study(rule: ForcingRule, setup: &ConvergenceSetup) -> Result<ConvergenceReport> {
    let mms = Manufactured {
        params: setup.params,
        lx: 1.0,
        ly: 1.0,
    };
    let spatial = setup
        .spatial_n
        .iter()
        .map(|&n| {
            let grid = Grid2D::unit(n, n, setup.spatial_nt)?;
            Ok((n, mms.final_error(&grid, ForcingRule::Trapezoid)?))
        })
        .collect::<Result<Vec<_>>>()?;
    let temporal = setup
        .temporal_nt
        .iter()
        .map(|&nt| {
            let grid = Grid2D::unit(setup.temporal_n, setup.temporal_n, nt)?;
            Ok((nt, mms.final_error(&grid, rule)?))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ConvergenceReport {
        rule,
        spatial_order: fitted_order(&spatial),
        temporal_order: fitted_order(&temporal),
        spatial,
        temporal,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn example_sources_at_nodes() {
        let grid = Grid2D::unit(100, 100, 70).unwrap();
        let g = TimeProfile::default();
        let ex1 = make_source(ExampleId::Ex1, &grid, ControlMode::Separable, &g).unwrap();
        let q1 = ex1.q().unwrap();
        assert!((q1[grid.index(25, 25)] - c(1.0, 0.0)).norm() < 1e-15);

        let ex2 = make_source(ExampleId::Ex2, &grid, ControlMode::Separable, &g).unwrap();
        let q2 = ex2.q().unwrap();
        assert!((q2[grid.index(50, 50)] - c(0.0, 1.0)).norm() < 1e-15);

        let ex4 = make_source(ExampleId::Ex4, &grid, ControlMode::Full, &g).unwrap();
        let f0 = ex4.as_full().unwrap().level(0);
        for k in 0..grid.m() {
            let (x, y) = grid.coords(k);
            let expected = c(0.0, sin_pi(1.0, x) * sin_pi(1.0, y));
            assert!((f0[k] - expected).norm() < 1e-15);
        }
        assert!(make_source(ExampleId::Ex4, &grid, ControlMode::Separable, &g).is_err());
    }

    #[test]
    fn sources_vanish_on_the_boundary() {
        let t = 0.7;
        for ex in ExampleId::ALL {
            let max = (0..=50)
                .flat_map(|i| (0..=50).map(move |j| (i as f64 / 50.0, j as f64 / 50.0)))
                .map(|(x, y)| ex.f(x, y, t).norm())
                .fold(0.0, f64::max);
            for s in 0..=200 {
                let s = s as f64 / 200.0;
                for (x, y) in [(0.0, s), (1.0, s), (s, 0.0), (s, 1.0)] {
                    assert!(ex.f(x, y, t).norm() <= 1e-12 * max, "{ex:?} at ({x}, {y})");
                }
            }
        }
    }

    #[test]
    fn noise_free_and_zero_data_cases() {
        let grid = Grid2D::unit(6, 6, 3).unwrap();
        let u = grid.sample(c);
        assert_eq!(add_noise(&grid, &u, 0.0, 9).unwrap(), u);
        assert_eq!(
            add_noise(&grid, &grid.zeros(), 1e-3, 9).unwrap_err(),
            Error::ZeroNorm("data")
        );
        assert!(add_noise(&grid, &u, -1.0, 9).is_err());
    }

    #[test]
    fn noise_is_seed_deterministic() {
        let grid = Grid2D::unit(6, 6, 3).unwrap();
        let u = grid.sample(c);
        let a = add_noise(&grid, &u, 1e-2, 7).unwrap();
        let b = add_noise(&grid, &u, 1e-2, 7).unwrap();
        let d = add_noise(&grid, &u, 1e-2, 8).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, d);
    }

    #[test]
    fn zero_truth_and_zero_initial_state_give_zero_data() {
        let mut spec = ExperimentSpec::new(ExampleId::Ex1).with_grid(6, 6, 4);
        spec.y0 = InitialCondition::Zero;
        spec.g = TimeProfile::Constant(c(0.0, 0.0));
        let (u, _) = synthesize_data(&spec).unwrap();
        assert!(u.iter().all(|v| *v == c(0.0, 0.0)));
    }

    #[test]
    fn example1_data_is_nonzero() {
        let spec = ExperimentSpec::new(ExampleId::Ex1).with_grid(20, 20, 10);
        let (u, _) = synthesize_data(&spec).unwrap();
        assert!(spec.grid().unwrap().norm_h(&u).unwrap() > 0.0);
    }

    #[test]
    fn refined_data_grid_is_close_to_inverse_crime_data() {
        let mut spec = ExperimentSpec::new(ExampleId::Ex3).with_grid(16, 16, 10);
        let (crime, _) = synthesize_data(&spec).unwrap();
        spec.data_refinement = 2;
        let (fine, _) = synthesize_data(&spec).unwrap();
        let grid = spec.grid().unwrap();
        let rel = grid.norm_h(&fine.sub(&crime)).unwrap() / grid.norm_h(&crime).unwrap();
        assert!(rel > 0.0 && rel < 5e-2, "{rel}");
    }

    #[test]
    fn spec_validation() {
        let mut spec = ExperimentSpec::new(ExampleId::Ex4);
        spec.control_mode = ControlMode::Separable;
        assert!(spec.validate().is_err());
        let mut spec = ExperimentSpec::new(ExampleId::Ex1);
        spec.nt = 0;
        assert!(matches!(spec.validate(), Err(Error::InvalidGrid(_))));
        let mut spec = ExperimentSpec::new(ExampleId::Ex1);
        spec.g = TimeProfile::Samples(vec![c(1.0, 0.0); 3]);
        assert!(spec.validate().is_err());
    }

    #[test]
    fn table_row_layouts() {
        assert_eq!(table_rows(TableId::T1, Scale::Desk, 0).len(), 4);
        assert_eq!(table_rows(TableId::T2, Scale::Paper, 0)[3].spec.nt, 150);
        let t4 = table_rows(TableId::T4, Scale::Desk, 7);
        assert_eq!(t4.len(), 4);
        assert_eq!(t4[0].spec.noise_delta, 0.0);
        assert_eq!(t4[0].spec.ncg.k_max, 300);
        assert_eq!(t4[2].spec.ncg.k_max, 1500);
        assert!(t4.iter().all(|r| r.spec.example == ExampleId::Ex3 && r.spec.seed == 7));
        assert!("T9".parse::<TableId>().is_err());
    }

    #[test]
    fn fitted_order_of_exact_power_law() {
        let rows: Vec<_> = [4usize, 8, 16].iter().map(|&n| (n, 3.0 / (n * n) as f64)).collect();
        assert!((fitted_order(&rows) - 2.0).abs() < 1e-12);
    }
}
