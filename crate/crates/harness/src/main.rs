use clap::{Parser, Subcommand};
use rsgd_harness::bench::{bench_aggregators, bench_csv};
use rsgd_harness::config::load_config;
use rsgd_harness::runner::run_experiment;
use rsgd_harness::verify::{exit_code, verify_all, CheckStatus, VerifyBudget};
use rsgd_harness::HarnessError;
use std::path::PathBuf;
use std::process::ExitCode;

/// Robust stochastic optimization harness: medoid mini-batch descent, its
/// clipped variant, and baselines, with reproducible paired experiments.
///
/// Exit codes: 0 success, 1 check failure or runtime error, 2 usage or
/// configuration error, 3 all checks skipped.
#[derive(Parser)]
#[command(name = "rsgd", version, about, long_about = None)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the experiment described by a JSON config file.
    Run {
        config: PathBuf,
        /// Output directory; overrides RSGD_OUT_DIR and the config field.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the numerical verification suite and print one row per check.
    Verify {
        /// Trials per (M, d, gamma) combination of the dispersion sweep.
        #[arg(long, default_value_t = 10_000)]
        trials: u64,
        /// Draws for the zero-mean and second-moment estimates.
        #[arg(long, default_value_t = 100_000)]
        draws: u64,
        #[arg(long, default_value_t = 20260810)]
        seed: u64,
    },
    /// Time the aggregation operators over random inputs and emit CSV.
    Bench {
        #[arg(long, value_delimiter = ',', default_values_t = vec![10usize, 1000, 100000])]
        dims: Vec<usize>,
        #[arg(long, value_delimiter = ',', default_values_t = vec![4usize, 16])]
        chunks: Vec<usize>,
        #[arg(long, default_value_t = 25)]
        reps: usize,
        #[arg(long, default_value_t = 20260810)]
        seed: u64,
        /// Write the CSV here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Print the horizon-balanced clipping threshold and step size.
    Schedule {
        #[arg(long)]
        t: usize,
        #[arg(long)]
        delta: f64,
        #[arg(long)]
        delta1: f64,
        #[arg(long)]
        l: f64,
        #[arg(long)]
        sigma: f64,
        #[arg(long)]
        p: f64,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(code) => code,
        Err(HarnessError::Config(msg)) => {
            eprintln!("config error: {msg}");
            ExitCode::from(2)
        }
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(1)
        }
    }
}

fn dispatch(cli: Cli) -> Result<ExitCode, HarnessError> {
    match cli.command {
        Command::Run { config, out } => {
            let cfg = load_config(&config)?;
            let resolved = cfg.resolve()?;
            let out = out.or_else(|| std::env::var_os("RSGD_OUT_DIR").map(PathBuf::from));
            let output = run_experiment(&resolved, out.as_deref())?;
            println!("config {}", output.config_hash);
            println!(
                "{} optimizers x {} runs -> {} trajectories",
                resolved.optimizers.len(),
                resolved.runs,
                output.trajectory_paths.len()
            );
            for row in &output.summary {
                println!(
                    "  {:<20} m={:<4} diverged={}/{} final_loss={:.6e} +- {:.2e} avg_grad_sq={:.6e} +- {:.2e}",
                    row.label,
                    row.m,
                    row.diverged,
                    row.runs,
                    row.final_loss_mean,
                    row.final_loss_std,
                    row.avg_grad_norm_sq_mean,
                    row.avg_grad_norm_sq_std
                );
            }
            println!("summary: {}", output.summary_csv.display());
            Ok(ExitCode::SUCCESS)
        }
        Command::Verify {
            trials,
            draws,
            seed,
        } => {
            let rows = verify_all(VerifyBudget { trials, draws }, seed);
            for row in &rows {
                let tag = match row.status {
                    CheckStatus::Pass => "PASS",
                    CheckStatus::Fail => "FAIL",
                    CheckStatus::Skip => "SKIP",
                };
                println!("{tag} {:<35} {}", row.name, row.detail);
            }
            let code = exit_code(&rows);
            println!(
                "{} checks: {} passed, {} failed, {} skipped",
                rows.len(),
                rows.iter().filter(|r| r.status == CheckStatus::Pass).count(),
                rows.iter().filter(|r| r.status == CheckStatus::Fail).count(),
                rows.iter().filter(|r| r.status == CheckStatus::Skip).count(),
            );
            Ok(ExitCode::from(code as u8))
        }
        Command::Bench {
            dims,
            chunks,
            reps,
            seed,
            out,
        } => {
            let rows = bench_aggregators(&dims, &chunks, reps, seed);
            let csv = bench_csv(&rows);
            match out {
                Some(path) => std::fs::write(path, csv)?,
                None => print!("{csv}"),
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Schedule {
            t,
            delta,
            delta1,
            l,
            sigma,
            p,
        } => {
            let (lambda, alpha) =
                rsgd_core::optimizers::clipping_schedule(t, delta, delta1, l, sigma, p)
                    .map_err(|e| HarnessError::Config(e.to_string()))?;
            println!("lambda = {lambda}");
            println!("alpha = {alpha}");
            Ok(ExitCode::SUCCESS)
        }
    }
}
