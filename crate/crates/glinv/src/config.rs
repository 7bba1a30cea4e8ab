//! JSON run configuration, command-line overrides and the effective-config snapshot.

use std::path::{Path, PathBuf};

use glinv_core::experiments::{ControlMode, ExampleId, ExperimentSpec, InitialCondition, TimeProfile};
use glinv_core::{CnParams, Complex64, GradientMode, NcgConfig};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{invalid, CliError};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridConfig {
    pub lx: f64,
    pub ly: f64,
    pub t_final: f64,
    pub nx: usize,
    pub ny: usize,
    pub nt: usize,
}

impl Default for GridConfig {
    fn default() -> Self {
        Self {
            lx: 1.0,
            ly: 1.0,
            t_final: 1.0,
            nx: 100,
            ny: 100,
            nt: 70,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelConfig {
    pub a: f64,
    pub b: f64,
    /// `[re, im]`.
    pub p: [f64; 2],
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            a: 36e-4,
            b: 15e-4,
            p: [0.2, 0.1],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NcgSection {
    pub tau: f64,
    pub k_max: usize,
    pub armijo_c: f64,
    pub backtrack_factor: f64,
    pub alpha0: f64,
    pub warm_start: bool,
    pub restart_period: usize,
    pub rho: Option<f64>,
    pub max_backtracks: usize,
}

impl Default for NcgSection {
    fn default() -> Self {
        let d = NcgConfig::default();
        Self {
            tau: d.tau,
            k_max: d.k_max,
            armijo_c: d.armijo_c,
            backtrack_factor: d.backtrack_factor,
            alpha0: d.alpha0,
            warm_start: d.warm_start,
            restart_period: d.restart_period,
            rho: d.rho,
            max_backtracks: d.max_backtracks,
        }
    }
}

impl NcgSection {
    fn to_core(&self) -> NcgConfig {
        NcgConfig {
            tau: self.tau,
            k_max: self.k_max,
            armijo_c: self.armijo_c,
            backtrack_factor: self.backtrack_factor,
            alpha0: self.alpha0,
            warm_start: self.warm_start,
            restart_period: self.restart_period,
            rho: self.rho,
            max_backtracks: self.max_backtracks,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputConfig {
    pub dir: PathBuf,
    pub field_csv: bool,
    pub field_binary: bool,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self {
            dir: PathBuf::from("out"),
            field_csv: true,
            field_binary: true,
        }
    }
}

/// Everything `glinv run` needs. Missing keys take their defaults.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub example: String,
    pub grid: GridConfig,
    pub model: ModelConfig,
    /// `sin-sin` or `zero`.
    pub initial_state: String,
    pub eps: f64,
    pub delta: f64,
    pub seed: u64,
    /// `separable` or `full`; empty selects the example's own form.
    pub control_mode: String,
    /// Samples `[re, im]` of g at every forcing level; empty means g ≡ 1.
    pub g: Vec<[f64; 2]>,
    /// `left` or `trapezoid`.
    pub forcing: String,
    /// `exact`, `uncorrected` (alias `paper`) or `dt-scaled`.
    pub grad_mode: String,
    pub data_refinement: usize,
    pub ncg: NcgSection,
    pub output: OutputConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            example: "example1".into(),
            grid: GridConfig::default(),
            model: ModelConfig::default(),
            initial_state: "sin-sin".into(),
            eps: 1e-5,
            delta: 0.0,
            seed: 0,
            control_mode: String::new(),
            g: Vec::new(),
            forcing: "left".into(),
            grad_mode: "exact".into(),
            data_refinement: 1,
            ncg: NcgSection::default(),
            output: OutputConfig::default(),
        }
    }
}

/// Command-line values that replace file or default values.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub example: Option<String>,
    pub grid: Option<(usize, usize, usize)>,
    pub nx: Option<usize>,
    pub ny: Option<usize>,
    pub nt: Option<usize>,
    pub eps: Option<f64>,
    pub tau: Option<f64>,
    pub delta: Option<f64>,
    pub seed: Option<u64>,
    pub alpha0: Option<f64>,
    pub rho: Option<f64>,
    pub k_max: Option<usize>,
    pub forcing: Option<String>,
    pub grad_mode: Option<String>,
    pub out: Option<PathBuf>,
}

impl Overrides {
    /// Applies the overrides and returns the names of the fields they touched.
    pub fn apply(&self, cfg: &mut RunConfig) -> Vec<&'static str> {
        let mut touched = Vec::new();
        macro_rules! set {
            ($src:expr, $dst:expr, $name:literal) => {
                if let Some(v) = &$src {
                    $dst = v.clone();
                    touched.push($name);
                }
            };
        }
        set!(self.example, cfg.example, "example");
        if let Some((nx, ny, nt)) = self.grid {
            (cfg.grid.nx, cfg.grid.ny, cfg.grid.nt) = (nx, ny, nt);
            touched.extend(["grid.nx", "grid.ny", "grid.nt"]);
        }
        set!(self.nx, cfg.grid.nx, "grid.nx");
        set!(self.ny, cfg.grid.ny, "grid.ny");
        set!(self.nt, cfg.grid.nt, "grid.nt");
        set!(self.eps, cfg.eps, "eps");
        set!(self.tau, cfg.ncg.tau, "ncg.tau");
        set!(self.delta, cfg.delta, "delta");
        set!(self.seed, cfg.seed, "seed");
        set!(self.alpha0, cfg.ncg.alpha0, "ncg.alpha0");
        if let Some(rho) = self.rho {
            cfg.ncg.rho = Some(rho);
            touched.push("ncg.rho");
        }
        set!(self.k_max, cfg.ncg.k_max, "ncg.k_max");
        set!(self.forcing, cfg.forcing, "forcing");
        set!(self.grad_mode, cfg.grad_mode, "grad_mode");
        set!(self.out, cfg.output.dir, "output.dir");
        touched.sort_unstable();
        touched.dedup();
        touched
    }
}

/// Parses `NX,NY,NT`.
pub fn parse_grid(s: &str) -> Result<(usize, usize, usize), String> {
    let parts: Vec<&str> = s.split(',').map(str::trim).collect();
    if parts.len() != 3 {
        return Err(format!("expected NX,NY,NT, got `{s}`"));
    }
    let n = |i: usize, name: &str| {
        parts[i]
            .parse::<usize>()
            .map_err(|e| format!("{name} `{}`: {e}", parts[i]))
    };
    Ok((n(0, "NX")?, n(1, "NY")?, n(2, "NT")?))
}

fn parse_field<T: std::str::FromStr<Err = glinv_core::Error>>(field: &str, value: &str) -> Result<T, CliError> {
    value
        .parse()
        .map_err(|e: glinv_core::Error| CliError::config(format!("{field}: {e}")))
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self, CliError> {
        serde_json::from_str(text).map_err(|e| CliError::config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::config(format!("{}: {e}", path.display())))?;
        Self::from_json(&text).map_err(|e| CliError::config(format!("{}: {e}", path.display())))
    }

    /// Resolves every name and checks every value; no solve happens here.
    pub fn to_spec(&self) -> Result<ExperimentSpec, CliError> {
        let example: ExampleId = parse_field("example", &self.example)?;
        let mut spec = ExperimentSpec::new(example);
        let g = &self.grid;
        (spec.lx, spec.ly, spec.t_final) = (g.lx, g.ly, g.t_final);
        spec = spec.with_grid(g.nx, g.ny, g.nt);
        if !(self.model.a.is_finite() && self.model.a > 0.0) {
            return Err(CliError::config("model.a: must be positive"));
        }
        let [p_re, p_im] = self.model.p;
        spec.params = CnParams::new(self.model.a, self.model.b, Complex64::new(p_re, p_im));
        spec.y0 = match self.initial_state.as_str() {
            "sin-sin" => InitialCondition::SinSin,
            "zero" => InitialCondition::Zero,
            other => return Err(CliError::config(format!("initial_state: unknown `{other}`"))),
        };
        spec.eps = self.eps;
        spec.noise_delta = self.delta;
        spec.seed = self.seed;
        spec.control_mode = match self.control_mode.as_str() {
            "" => example.default_mode(),
            "separable" => ControlMode::Separable,
            "full" => ControlMode::Full,
            other => return Err(CliError::config(format!("control_mode: unknown `{other}`"))),
        };
        if !self.g.is_empty() {
            spec.g = TimeProfile::Samples(self.g.iter().map(|&[re, im]| Complex64::new(re, im)).collect());
        }
        spec.rule = parse_field("forcing", &self.forcing)?;
        spec.gradient_mode = parse_field::<GradientMode>("grad_mode", &self.grad_mode)?;
        spec.data_refinement = self.data_refinement;
        spec.ncg = self.ncg.to_core();
        spec.validate().map_err(invalid)?;
        Ok(spec)
    }

    /// Copy with every defaulted choice spelled out.
    pub fn resolved(&self) -> Result<Self, CliError> {
        let spec = self.to_spec()?;
        let mut out = self.clone();
        out.example = spec.example.name().into();
        out.control_mode = match spec.control_mode {
            ControlMode::Separable => "separable".into(),
            ControlMode::Full => "full".into(),
        };
        out.grad_mode = spec.gradient_mode.name().into();
        Ok(out)
    }

    /// First 16 hex digits of the SHA-256 of the canonical JSON, output section excluded.
    pub fn hash(&self) -> String {
        let mut value = serde_json::to_value(self).expect("config serializes");
        if let Some(obj) = value.as_object_mut() {
            obj.remove("output");
        }
        hash_json(&value)
    }
}

pub fn hash_json(value: &serde_json::Value) -> String {
    let digest = Sha256::digest(value.to_string().as_bytes());
    digest.iter().take(8).map(|b| format!("{b:02x}")).collect()
}

/// Provenance block stored ahead of the effective config.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub tool: String,
    pub version: String,
    pub config_hash: String,
    pub seed: u64,
    pub config_file: Option<PathBuf>,
    pub overrides: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Snapshot {
    pub glinv: Provenance,
    pub config: RunConfig,
}

impl Snapshot {
    pub fn new(config: RunConfig, config_file: Option<PathBuf>, overrides: &[&str]) -> Self {
        Self {
            glinv: Provenance {
                tool: "glinv".into(),
                version: VERSION.into(),
                config_hash: config.hash(),
                seed: config.seed,
                config_file,
                overrides: overrides.iter().map(|s| s.to_string()).collect(),
            },
            config,
        }
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("snapshot serializes");
        s.push('\n');
        s
    }
}
