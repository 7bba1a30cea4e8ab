//! Parallel execution of result-table rows.

use std::fmt::Write as _;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::{Duration, Instant};

use glinv_core::experiments::{run_experiment, table_rows, Metrics, Scale, TableId, TableRow};
use glinv_core::{GradientMode, StopReason};
use serde_json::json;

use crate::config::hash_json;

#[derive(Debug, Clone)]
pub struct TableOptions {
    pub table: TableId,
    pub scale: Scale,
    pub seed: u64,
    /// Replaces the grid of every row.
    pub grid: Option<(usize, usize, usize)>,
    pub k_max: Option<usize>,
    pub grad_mode: Option<GradientMode>,
    /// Worker threads; `0` uses the available parallelism.
    pub jobs: usize,
}

impl TableOptions {
    pub fn new(table: TableId, scale: Scale) -> Self {
        Self {
            table,
            scale,
            seed: 0,
            grid: None,
            k_max: None,
            grad_mode: None,
            jobs: 0,
        }
    }

    pub fn rows(&self) -> Vec<TableRow> {
        let mut rows = table_rows(self.table, self.scale, self.seed);
        for row in &mut rows {
            if let Some((nx, ny, nt)) = self.grid {
                row.spec = row.spec.clone().with_grid(nx, ny, nt);
            }
            if let Some(k) = self.k_max {
                row.spec.ncg.k_max = k;
            }
            if let Some(mode) = self.grad_mode {
                row.spec.gradient_mode = mode;
            }
        }
        rows
    }

    pub fn hash(&self) -> String {
        hash_json(&json!({
            "table": self.table.name(),
            "scale": self.scale.name(),
            "seed": self.seed,
            "grid": self.grid,
            "k_max": self.k_max,
            "grad_mode": self.grad_mode.map(GradientMode::name),
        }))
    }
}

#[derive(Debug, Clone)]
pub struct TableResult {
    pub row: TableRow,
    pub metrics: Metrics,
    pub stop_reason: StopReason,
    pub wall_time: Duration,
}

/// Runs the rows on up to `jobs` threads and returns the outcomes in row order.
pub fn run_rows(
    rows: &[TableRow],
    jobs: usize,
    on_done: impl Fn(&TableRow, &Result<TableResult, glinv_core::Error>) + Sync,
) -> Vec<Result<TableResult, glinv_core::Error>> {
    let jobs = match jobs {
        0 => std::thread::available_parallelism().map_or(1, usize::from),
        n => n,
    }
    .min(rows.len())
    .max(1);
    let next = AtomicUsize::new(0);
    let slots: Vec<Mutex<Option<Result<TableResult, glinv_core::Error>>>> =
        rows.iter().map(|_| Mutex::new(None)).collect();
    std::thread::scope(|s| {
        for _ in 0..jobs {
            s.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                let Some(row) = rows.get(i) else { break };
                let start = Instant::now();
                let out = run_experiment(&row.spec).map(|e| TableResult {
                    row: row.clone(),
                    metrics: e.metrics,
                    stop_reason: e.report.stop_reason,
                    wall_time: start.elapsed(),
                });
                on_done(row, &out);
                *slots[i].lock().unwrap() = Some(out);
            });
        }
    });
    slots
        .into_iter()
        .map(|m| m.into_inner().unwrap().expect("every row ran"))
        .collect()
}

pub const TABLE_COLUMNS: &str = "table,row,example,nx,ny,nt,eps,tau,delta,seed,k_max,grad_mode,iterations,stop_reason,misfit_sq_ratio,q_err_sq_ratio,f_err_sq_ratio";

fn opt(v: Option<f64>) -> String {
    v.map(|x| format!("{x:e}")).unwrap_or_default()
}

/// Deterministic results: configuration columns, iterations, the three ratios.
pub fn table_csv(header: &str, table: TableId, results: &[TableResult]) -> String {
    let mut s = format!("{header}{TABLE_COLUMNS}\n");
    for r in results {
        let spec = &r.row.spec;
        let m = &r.metrics;
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{:e},{:e},{:e},{},{},{},{},{},{:e},{},{}",
            table.name(),
            r.row.label.replace(',', ";"),
            spec.example.name(),
            spec.nx,
            spec.ny,
            spec.nt,
            spec.eps,
            spec.ncg.tau,
            spec.noise_delta,
            spec.seed,
            spec.ncg.k_max,
            spec.gradient_mode.name(),
            m.iterations,
            r.stop_reason.name(),
            m.misfit_sq_ratio,
            opt(m.q_err_sq_ratio),
            opt(m.f_err_sq_ratio),
        );
    }
    s
}

/// Wall time per row, kept apart from [`table_csv`] so reruns stay byte-identical.
pub fn timing_csv(header: &str, table: TableId, results: &[TableResult]) -> String {
    let mut s = format!("{header}table,row,wall_time_s\n");
    for r in results {
        let _ = writeln!(
            s,
            "{},{},{:.3}",
            table.name(),
            r.row.label.replace(',', ";"),
            r.wall_time.as_secs_f64()
        );
    }
    s
}
