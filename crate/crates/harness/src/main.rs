use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use npns_core::diagnostics::FitWindow;
use npns_harness::error::{HarnessError, Result};
use npns_harness::run;
use npns_harness::RunConfig;

/// Stochastic Nernst-Planck-Navier-Stokes runs on the periodic torus.
#[derive(Debug, Parser)]
#[command(name = "npns", version)]
struct Cli {
    /// Worker threads for ensembles and sweeps.
    #[arg(long, global = true, env = "NPNS_THREADS")]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, clap::Args)]
struct RunArgs {
    /// `key = value` configuration file; defaults apply without one.
    #[arg(long)]
    config: Option<PathBuf>,

    /// Overrides `seed` from the configuration.
    #[arg(long)]
    seed: Option<u64>,

    /// Overrides `output` from the configuration.
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Single trajectory: NDJSON energy records and a final checkpoint.
    Simulate(RunArgs),
    /// Ensemble means of ‖U‖², per-path prefactors and unit-time ratios.
    Ensemble(RunArgs),
    /// Corrector residual against κ‖u‖/N^α for each shell in `shell_list`.
    CorrectorCheck(RunArgs),
    /// Fitted ensemble decay rate over `kappa_list × shell_list`.
    RateSweep(RunArgs),
    /// Exponential decay fit of an NDJSON time series.
    Fit {
        input: PathBuf,
        /// Column to fit; defaults to `total_energy` or `mean_energy`.
        #[arg(long)]
        column: Option<String>,
        /// Window start; the tail half is used when no window is given.
        #[arg(long, requires = "to")]
        from: Option<f64>,
        #[arg(long, requires = "from")]
        to: Option<f64>,
        #[arg(long)]
        output: Option<PathBuf>,
    },
}

fn load(args: &RunArgs, default_output: &str) -> Result<(RunConfig, PathBuf)> {
    let mut cfg = match &args.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    let output = args
        .output
        .clone()
        .or_else(|| cfg.output.clone())
        .unwrap_or_else(|| PathBuf::from(default_output));
    Ok((cfg, output))
}

fn emit(output: Option<&Path>, text: &str) -> Result<()> {
    match output {
        Some(path) => std::fs::write(path, format!("{text}\n"))
            .map_err(|e| HarnessError::io(format!("writing {}", path.display()), e)),
        None => {
            println!("{text}");
            Ok(())
        }
    }
}

fn execute(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Simulate(args) => {
            let (cfg, output) = load(&args, "npns.ndjson")?;
            let summary = run::simulate(&cfg, &output)?;
            let last = summary.records.last().expect("initial record");
            println!(
                "t = {} |U|^2 = {:e}, {} records in {}, checkpoint {}",
                last.t,
                last.total_energy,
                summary.records.len(),
                output.display(),
                summary.checkpoint.display()
            );
        }
        Command::Ensemble(args) => {
            let (cfg, output) = load(&args, "npns-ensemble.ndjson")?;
            let pool = run::thread_pool(cli.threads)?;
            let result = run::ensemble(&cfg, &output, &pool)?;
            match result.fit {
                Some(fit) => println!(
                    "{} trajectories, fitted rate {:.6} on [{}, {}]",
                    result.paths.len(),
                    fit.rate,
                    fit.window.0,
                    fit.window.1
                ),
                None => println!("{} trajectories, no decay fit (zero energy)", result.paths.len()),
            }
        }
        Command::CorrectorCheck(args) => {
            let (cfg, output) = load(&args, "npns-corrector.csv")?;
            let reports = run::corrector_check(&cfg)?;
            run::write_corrector_csv(&output, &reports)?;
            for r in &reports {
                println!("N = {:>3}  error {:.4e}  reference {:.4e}  ratio {:.4e}", r.shell, r.error_norm, r.reference, r.ratio);
            }
        }
        Command::RateSweep(args) => {
            let (cfg, output) = load(&args, "npns-sweep.csv")?;
            let pool = run::thread_pool(cli.threads)?;
            let rows = run::rate_sweep(&cfg, &pool)?;
            run::write_sweep_csv(&output, &rows)?;
            for r in &rows {
                println!("kappa = {} N = {}  rate {:.6}  gamma {:.6}", r.kappa, r.shell, r.rate, r.gamma);
            }
        }
        Command::Fit {
            input,
            column,
            from,
            to,
            output,
        } => {
            let window = match (from, to) {
                (Some(a), Some(b)) => FitWindow::Range(a, b),
                _ => FitWindow::TailHalf,
            };
            let fit = run::fit_file(&input, column.as_deref(), window)?;
            emit(output.as_deref(), &serde_json::to_string(&fit).expect("fit serializes"))?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("npns: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
