use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use glinv::check;
use glinv::commands::{self, parse_grad_mode, parse_rule, parse_scale, parse_table, progress_line, verdict};
use glinv::config::parse_grid;
use glinv::table::TableOptions;
use glinv::{CliError, Overrides};

/// Source reconstruction for the linear complex Ginzburg–Landau equation
/// from a final-time observation.
#[derive(Parser)]
#[command(name = "glinv", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Reconstruct the source of one example.
    Run(RunArgs),
    /// Run the rows of a result table (T1..T4).
    Table(TableArgs),
    /// Self-checks; exit status 0 iff every check passes.
    Check {
        #[command(subcommand)]
        what: CheckWhat,
    },
    /// Convergence study against a manufactured solution.
    Convergence {
        /// left, trapezoid or both.
        #[arg(long, default_value = "both")]
        rule: String,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
}

#[derive(Subcommand)]
enum CheckWhat {
    /// Adjoint gradient against central differences.
    Gradient {
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Forward/adjoint duality pairing.
    Duality {
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Observed orders of the forward solver.
    Convergence {
        #[arg(long, default_value = "trapezoid")]
        rule: String,
    },
}

#[derive(Args)]
struct RunArgs {
    /// example1 .. example4; overrides the config file.
    example: Option<String>,
    /// JSON configuration; flags take precedence.
    #[arg(long)]
    config: Option<PathBuf>,
    /// NX,NY,NT.
    #[arg(long, value_parser = parse_grid)]
    grid: Option<(usize, usize, usize)>,
    #[arg(long)]
    nx: Option<usize>,
    #[arg(long)]
    ny: Option<usize>,
    #[arg(long)]
    nt: Option<usize>,
    #[arg(long)]
    eps: Option<f64>,
    #[arg(long)]
    tau: Option<f64>,
    #[arg(long)]
    delta: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    alpha0: Option<f64>,
    #[arg(long)]
    rho: Option<f64>,
    #[arg(long)]
    k_max: Option<usize>,
    /// left or trapezoid.
    #[arg(long)]
    forcing: Option<String>,
    /// exact, uncorrected (alias paper) or dt-scaled.
    #[arg(long)]
    grad_mode: Option<String>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// No per-iteration progress on stderr.
    #[arg(long, short)]
    quiet: bool,
}

#[derive(Args)]
struct TableArgs {
    table: String,
    /// desk or paper.
    #[arg(long, default_value = "desk")]
    scale: String,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// NX,NY,NT for every row.
    #[arg(long, value_parser = parse_grid)]
    grid: Option<(usize, usize, usize)>,
    #[arg(long)]
    k_max: Option<usize>,
    #[arg(long)]
    grad_mode: Option<String>,
    /// Worker threads (0: all cores).
    #[arg(long, default_value_t = 0)]
    jobs: usize,
    #[arg(long, default_value = "out")]
    out: PathBuf,
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Run(a) => {
            let overrides = Overrides {
                example: a.example,
                grid: a.grid,
                nx: a.nx,
                ny: a.ny,
                nt: a.nt,
                eps: a.eps,
                tau: a.tau,
                delta: a.delta,
                seed: a.seed,
                alpha0: a.alpha0,
                rho: a.rho,
                k_max: a.k_max,
                forcing: a.forcing,
                grad_mode: a.grad_mode,
                out: a.out,
            };
            let quiet = a.quiet;
            let outcome = commands::run(a.config.as_deref(), &overrides, |r| {
                if !quiet {
                    eprintln!("{}", progress_line(r));
                }
            })?;
            let m = &outcome.metrics;
            println!(
                "{}: {} iterations ({}), misfit ratio {:.4e}, q-error ratio {}, f-error ratio {}",
                m.example,
                m.iterations,
                m.stop_reason,
                m.misfit_sq_ratio,
                m.q_err_sq_ratio.map_or("-".into(), |v| format!("{v:.4e}")),
                m.f_err_sq_ratio.map_or("-".into(), |v| format!("{v:.4e}")),
            );
            println!("wrote {}", outcome.dir.display());
            Ok(())
        }
        Command::Table(a) => {
            let mut opts = TableOptions::new(parse_table(&a.table)?, parse_scale(&a.scale)?);
            opts.seed = a.seed;
            opts.grid = a.grid;
            opts.k_max = a.k_max;
            opts.grad_mode = a.grad_mode.as_deref().map(parse_grad_mode).transpose()?;
            opts.jobs = a.jobs;
            let path = commands::table(&opts, &a.out, |line| eprintln!("{line}"))?;
            println!("wrote {}", path.display());
            Ok(())
        }
        Command::Check { what } => {
            let lines = match what {
                CheckWhat::Gradient { seed } => check::gradient(seed)?,
                CheckWhat::Duality { seed } => check::duality(seed)?,
                CheckWhat::Convergence { rule } => check::convergence(parse_rule(&rule)?)?.1,
            };
            verdict(&lines, |l| println!("{l}"))
        }
        Command::Convergence { rule, out } => {
            let rules = match rule.as_str() {
                "both" => vec![glinv_core::ForcingRule::Left, glinv_core::ForcingRule::Trapezoid],
                other => vec![parse_rule(other)?],
            };
            let mut lines = Vec::new();
            for r in rules {
                let (path, l) = commands::convergence(r, &out)?;
                println!("wrote {}", path.display());
                lines.extend(l);
            }
            verdict(&lines, |l| println!("{l}"))
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("glinv: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
