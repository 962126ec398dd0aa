//! `horizon`: validation, single-point overlaps, fidelity curves and resumable sweeps.
//!
//! Exit status: 0 success, 1 usage or configuration error, 2 numerical
//! non-convergence, 3 oracle failure.

mod commands;
mod config;
mod validate;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use commands::{CurveArgs, Failure, OverlapsArgs, SweepArgs};
use config::RunConfig;
use validate::Fault;

#[derive(Debug, Parser)]
#[command(name = "horizon", version, about = "Discriminating entangled and thermal field states across an acceleration horizon")]
struct Cli {
    #[command(flatten)]
    shared: Shared,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct Shared {
    /// TOML run configuration; flags override its values.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Relative tolerance of the overlap quadratures.
    #[arg(long, global = true, value_name = "REL", allow_negative_numbers = true)]
    tol: Option<f64>,
    /// Worker threads; defaults to the available cores.
    #[arg(long, global = true, value_name = "N")]
    jobs: Option<usize>,
    /// Write the four Rindler spectra as CSV (overlaps only).
    #[arg(long, global = true)]
    dump_spectra: bool,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run the special-function, quadrature and Fock-oracle suites.
    Validate {
        #[arg(long, hide = true, value_enum)]
        inject_fault: Option<Fault>,
    },
    /// Overlaps, occupation and normalisations at one acceleration, as JSON.
    Overlaps {
        /// Dimensionless acceleration.
        #[arg(long)]
        a: f64,
        /// Packet frequency parameter.
        #[arg(long)]
        n: Option<f64>,
        /// Infrared cutoff.
        #[arg(long)]
        cutoff: Option<f64>,
    },
    /// Fidelity curves as CSV and SVG.
    Curve {
        /// Squeezing values, comma separated.
        #[arg(long, value_delimiter = ',')]
        s: Option<Vec<f64>>,
        #[arg(long)]
        points: Option<usize>,
        #[arg(long)]
        a_min: Option<f64>,
        #[arg(long)]
        a_max: Option<f64>,
        /// Omit the error-probability bounds from the plot.
        #[arg(long)]
        no_bounds: bool,
    },
    /// Full sweep to JSON lines, resuming from records already in the output.
    Sweep,
}

fn load_config(shared: &Shared) -> Result<RunConfig, Failure> {
    let mut cfg = match &shared.config {
        Some(p) => RunConfig::load(p).map_err(Failure::Config)?,
        None => RunConfig::default(),
    };
    if let Some(tol) = shared.tol {
        cfg.quadrature.rel_tol = Some(tol);
    }
    if let Some(dir) = &shared.out {
        cfg.output.dir = dir.clone();
    }
    Ok(cfg)
}

fn run(cli: Cli) -> Result<(), Failure> {
    if let Some(n) = cli.shared.jobs {
        if n == 0 {
            return Err(Failure::Config("--jobs must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Failure::Config(format!("thread pool: {e}")))?;
    }
    if cli.shared.dump_spectra && !matches!(cli.command, Command::Overlaps { .. }) {
        return Err(Failure::Config("--dump-spectra only applies to the overlaps command".into()));
    }
    let mut cfg = load_config(&cli.shared)?;
    match cli.command {
        Command::Validate { inject_fault } => {
            let report = validate::run(inject_fault);
            let json = serde_json::to_string_pretty(&report).expect("report serialises") + "\n";
            if cli.shared.out.is_some() {
                std::fs::create_dir_all(&cfg.output.dir)
                    .and_then(|_| std::fs::write(cfg.output.dir.join("validate.json"), &json))
                    .map_err(|e| Failure::Config(format!("{}: {e}", cfg.output.dir.display())))?;
            }
            print!("{json}");
            for suite in &report.suites {
                eprintln!("{:<12} {:>4} checks  {}", suite.name, suite.checks, if suite.passed { "ok" } else { "FAILED" });
            }
            eprintln!("cross-block sign: resolved {}, assembly {}", report.resolved_cross_sign, report.assembly_cross_sign);
            let failures: Vec<String> =
                report.suites.iter().flat_map(|s| s.failures.iter().map(move |f| format!("[{}] {f}", s.name))).collect();
            if report.passed {
                Ok(())
            } else if report.oracle_failed() {
                Err(Failure::Oracle(failures.join("\n")))
            } else {
                Err(Failure::Numerical(failures.join("\n")))
            }
        }
        Command::Overlaps { a, n, cutoff } => {
            if let Some(n) = n {
                cfg.scenario.n_param = n;
            }
            if let Some(c) = cutoff {
                cfg.scenario.cutoff = c;
            }
            let args = OverlapsArgs { a, out: cli.shared.out.clone(), dump_spectra: cli.shared.dump_spectra };
            print!("{}", commands::overlaps(&cfg, &args)?);
            Ok(())
        }
        Command::Curve { s, points, a_min, a_max, no_bounds } => {
            if let Some(s) = s {
                cfg.s_values = s;
            }
            if let Some(p) = points {
                cfg.grid.points = p;
            }
            if let Some(lo) = a_min {
                cfg.grid.a_min = lo;
            }
            if let Some(hi) = a_max {
                cfg.grid.a_max = hi;
            }
            if points.is_some() || a_min.is_some() || a_max.is_some() {
                cfg.grid.values = None;
            }
            cfg.refine_minimum = false;
            let sweep_cfg = cfg.sweep_config().map_err(Failure::Config)?;
            let args = CurveArgs { out: cfg.output.dir.clone(), bounds: cfg.output.bounds && !no_bounds };
            eprint!("{}", commands::curve(&sweep_cfg, &args)?);
            Ok(())
        }
        Command::Sweep => {
            let sweep_cfg = cfg.sweep_config().map_err(Failure::Config)?;
            let args = SweepArgs { out: cfg.output.dir.clone(), bounds: cfg.output.bounds };
            let outcome = commands::sweep(&sweep_cfg, &args)?;
            eprintln!("computed {} point(s), reused {}", outcome.computed, outcome.reused);
            print!("{}", serde_json::to_string_pretty(&outcome.summary).expect("summary serialises") + "\n");
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message());
            ExitCode::from(f.exit_code())
        }
    }
}
