//! The `run`, `table`, `check` and `convergence` commands.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use glinv_core::experiments::{run_experiment_with, ConvergenceReport, Experiment, Scale, TableId};
use glinv_core::optimize::IterationRecord;
use glinv_core::{Complex64, ForcingRule, GradientMode, StopReason};
use serde_json::json;

use crate::check::{self, CheckLine};
use crate::config::{hash_json, Overrides, RunConfig, Snapshot};
use crate::error::{invalid, CliError};
use crate::formats::{field_csv, header_line, history_csv, metrics_csv, write_glf, MetricsRow};
use crate::table::{run_rows, table_csv, timing_csv, TableOptions};

fn write(path: &Path, contents: impl AsRef<[u8]>) -> Result<(), CliError> {
    fs::write(path, contents).map_err(|e| CliError::io(path, e))
}

fn create_dir(dir: &Path) -> Result<(), CliError> {
    fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))
}

pub fn progress_line(r: &IterationRecord) -> String {
    format!(
        "k={:>5} J={:.6e} misfit={:.6e} |r|={:.6e} alpha={:.3e} backtracks={}",
        r.k, r.j, r.misfit, r.grad_norm, r.alpha, r.backtracks
    )
}

/// Builds the effective configuration from an optional file and overrides.
pub fn effective_config(
    file: Option<&Path>,
    overrides: &Overrides,
) -> Result<(Snapshot, glinv_core::experiments::ExperimentSpec), CliError> {
    let mut cfg = match file {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    let touched = overrides.apply(&mut cfg);
    let cfg = cfg.resolved()?;
    let spec = cfg.to_spec()?;
    Ok((Snapshot::new(cfg, file.map(Path::to_path_buf), &touched), spec))
}

/// Files written by [`run`].
#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub dir: PathBuf,
    pub metrics: MetricsRow,
    pub stop_reason: StopReason,
}

/// One reconstruction; writes the snapshot, history, metrics and field dumps.
pub fn run(
    file: Option<&Path>,
    overrides: &Overrides,
    mut progress: impl FnMut(&IterationRecord),
) -> Result<RunOutcome, CliError> {
    let (snapshot, spec) = effective_config(file, overrides)?;
    let cfg = &snapshot.config;
    let dir = cfg.output.dir.clone();
    create_dir(&dir)?;
    write(&dir.join("config.json"), snapshot.to_json())?;

    let exp = run_experiment_with(&spec, |r| progress(r))?;
    let header = header_line(&snapshot.glinv.config_hash, cfg.seed);
    let report = &exp.report;
    let metrics = MetricsRow {
        example: spec.example.name().into(),
        iterations: exp.metrics.iterations,
        stop_reason: report.stop_reason.name().into(),
        misfit_sq_ratio: exp.metrics.misfit_sq_ratio,
        q_err_sq_ratio: exp.metrics.q_err_sq_ratio,
        f_err_sq_ratio: exp.metrics.f_err_sq_ratio,
        final_j: report.final_j,
        final_grad_norm: report.final_grad_norm,
    };
    write(&dir.join("history.csv"), history_csv(&header, &report.history))?;
    write(&dir.join("metrics.csv"), metrics_csv(&header, &metrics))?;
    write_fields(&dir, &header, cfg, &exp)?;

    if report.stop_reason == StopReason::LineSearchFailure {
        return Err(CliError::LineSearch {
            iterations: report.iterations,
        });
    }
    Ok(RunOutcome {
        dir,
        metrics,
        stop_reason: report.stop_reason,
    })
}

fn write_fields(dir: &Path, header: &str, cfg: &RunConfig, exp: &Experiment) -> Result<(), CliError> {
    let grid = &exp.grid;
    let mut fields: Vec<(&str, &[Complex64])> = vec![("data", &exp.data), ("final_state", &exp.report.final_state)];
    let last = grid.nt() - 1;
    match (exp.report.final_control.q(), exp.truth.q()) {
        (Some(q_rec), Some(q_true)) => {
            fields.push(("q_rec", q_rec));
            fields.push(("q_true", q_true));
        }
        _ => {
            if let (Some(f_rec), Some(f_true)) = (exp.report.final_control.as_full(), exp.truth.as_full()) {
                fields.push(("f_rec_last", f_rec.level(last)));
                fields.push(("f_true_last", f_true.level(last)));
            }
        }
    }
    for (name, values) in fields {
        if cfg.output.field_csv {
            write(&dir.join(format!("{name}.csv")), field_csv(header, grid, values))?;
        }
        if cfg.output.field_binary {
            let mut buf = Vec::new();
            write_glf(&mut buf, grid.mx(), grid.my(), values).map_err(|e| CliError::io(dir.join(name), e))?;
            write(&dir.join(format!("{name}.glf")), buf)?;
        }
    }
    Ok(())
}

/// Runs a result table; returns the CSV path.
pub fn table(opts: &TableOptions, out: &Path, mut log: impl FnMut(&str) + Send) -> Result<PathBuf, CliError> {
    let rows = opts.rows();
    for row in &rows {
        row.spec.validate().map_err(invalid)?;
    }
    create_dir(out)?;
    let log = std::sync::Mutex::new(&mut log);
    let results = run_rows(&rows, opts.jobs, |row, res| {
        let msg = match res {
            Ok(r) => format!(
                "{} {}: {} iterations, misfit {:.4e}, {:.1}s",
                opts.table.name(),
                row.label,
                r.metrics.iterations,
                r.metrics.misfit_sq_ratio,
                r.wall_time.as_secs_f64()
            ),
            Err(e) => format!("{} {}: {e}", opts.table.name(), row.label),
        };
        (log.lock().unwrap())(&msg);
    });
    let results = results.into_iter().collect::<Result<Vec<_>, _>>()?;
    let header = header_line(&opts.hash(), opts.seed);
    let name = opts.table.name();
    let path = out.join(format!("table_{name}.csv"));
    write(&path, table_csv(&header, opts.table, &results))?;
    write(
        &out.join(format!("table_{name}_timing.csv")),
        timing_csv(&header, opts.table, &results),
    )?;
    if let Some(r) = results.iter().find(|r| r.stop_reason == StopReason::LineSearchFailure) {
        return Err(CliError::LineSearch {
            iterations: r.metrics.iterations,
        });
    }
    Ok(path)
}

pub fn parse_table(s: &str) -> Result<TableId, CliError> {
    s.parse().map_err(invalid)
}

pub fn parse_scale(s: &str) -> Result<Scale, CliError> {
    s.parse().map_err(invalid)
}

pub fn parse_rule(s: &str) -> Result<ForcingRule, CliError> {
    s.parse().map_err(|e| CliError::config(format!("rule: {e}")))
}

pub fn parse_grad_mode(s: &str) -> Result<GradientMode, CliError> {
    s.parse().map_err(|e| CliError::config(format!("grad-mode: {e}")))
}

/// Prints the lines and fails when any of them failed.
pub fn verdict(lines: &[CheckLine], mut print: impl FnMut(&str)) -> Result<(), CliError> {
    for l in lines {
        print(&l.to_string());
    }
    match lines.iter().filter(|l| !l.pass).count() {
        0 => Ok(()),
        n => Err(CliError::CheckFailed(n)),
    }
}

pub fn convergence_csv(report: &ConvergenceReport) -> String {
    let rule = match report.rule {
        ForcingRule::Left => "left",
        ForcingRule::Trapezoid => "trapezoid",
    };
    let hash = hash_json(&json!({ "convergence": rule }));
    let mut s = header_line(&hash, 0);
    s.push_str("sweep,n,relative_error\n");
    for (n, e) in &report.spatial {
        let _ = writeln!(s, "spatial,{n},{e:e}");
    }
    for (n, e) in &report.temporal {
        let _ = writeln!(s, "temporal,{n},{e:e}");
    }
    let _ = writeln!(s, "spatial_order,,{:e}", report.spatial_order);
    let _ = writeln!(s, "temporal_order,,{:e}", report.temporal_order);
    s
}

/// Convergence study for `rule`, written to `out/convergence_<rule>.csv`.
pub fn convergence(rule: ForcingRule, out: &Path) -> Result<(PathBuf, Vec<CheckLine>), CliError> {
    let (report, lines) = check::convergence(rule)?;
    create_dir(out)?;
    let name = match rule {
        ForcingRule::Left => "left",
        ForcingRule::Trapezoid => "trapezoid",
    };
    let path = out.join(format!("convergence_{name}.csv"));
    write(&path, convergence_csv(&report))?;
    Ok((path, lines))
}
