//! `skyhaul` — closed-loop transport simulation runner.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use skyhaul_cli::{
    apply_overrides, compare_scenarios, load_config, run_scenario, CliError, OUT_ENV,
};

#[derive(Parser)]
#[command(
    name = "skyhaul",
    version,
    about = "Simulates cooperative cable transport with non-stopping carriers"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one scenario and write trace.csv, summary.json and plot extracts.
    Run {
        /// Scenario TOML; an empty file runs the reference scenario.
        config: PathBuf,
        /// Output directory (default: $SKYHAUL_OUT or ./out).
        #[arg(long, value_name = "DIR")]
        out: Option<PathBuf>,
        /// Patch one scenario key, e.g. --override optimizer.enabled=false.
        /// Repeatable.
        #[arg(long = "override", value_name = "KEY=VALUE")]
        overrides: Vec<String>,
        /// Replay the run and fail unless both traces are byte-identical.
        #[arg(long)]
        seed_check: bool,
    },
    /// Run the scenario with the optimizer on and off and compare.
    Compare {
        /// Scenario TOML; an empty file compares the reference scenario.
        config: PathBuf,
        /// Output directory (default: $SKYHAUL_OUT or ./out).
        #[arg(long, value_name = "DIR")]
        out: Option<PathBuf>,
        /// Patch one scenario key before both runs. Repeatable.
        #[arg(long = "override", value_name = "KEY=VALUE")]
        overrides: Vec<String>,
    },
}

fn output_root(flag: Option<PathBuf>) -> PathBuf {
    flag.or_else(|| std::env::var_os(OUT_ENV).map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("out"))
}

fn execute(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Run {
            config,
            out,
            overrides,
            seed_check,
        } => {
            let scenario = apply_overrides(&load_config(&config)?, &overrides)?;
            let out_dir = output_root(out);
            let artifacts = run_scenario(&scenario, &out_dir, seed_check)?;
            let m = &artifacts.summary.metrics;
            if seed_check {
                println!("seed check: replayed trace is byte-identical");
            }
            println!(
                "completed {} ticks in {:.2} s (wall)",
                m.rows, m.wall_seconds
            );
            println!(
                "tracking: mean |e_p| = {:.4} m (max {:.4}), mean |e_R| = {:.4} rad",
                m.mean_position_error, m.max_position_error, m.mean_attitude_error
            );
            println!(
                "slowest commanded carrier: {:.3} m/s (carrier {} at t = {:.2} s)",
                m.min_desired_speed, m.min_desired_speed_carrier, m.min_desired_speed_time
            );
            println!("outputs in {}", artifacts.out_dir.display());
            Ok(())
        }
        Command::Compare {
            config,
            out,
            overrides,
        } => {
            let scenario = apply_overrides(&load_config(&config)?, &overrides)?;
            let out_dir = output_root(out);
            let comparison = compare_scenarios(&scenario, &out_dir)?;
            println!("{:<28} {:>12} {:>12}", "metric", "optimized", "baseline");
            let rows = [
                (
                    "min commanded speed [m/s]",
                    comparison.optimized.min_desired_speed,
                    comparison.baseline.min_desired_speed,
                ),
                (
                    "mean |e_p| [m]",
                    comparison.optimized.mean_position_error,
                    comparison.baseline.mean_position_error,
                ),
                (
                    "mean |e_R| [rad]",
                    comparison.optimized.mean_attitude_error,
                    comparison.baseline.mean_attitude_error,
                ),
                (
                    "final |e_p| [m]",
                    comparison.optimized.final_position_error,
                    comparison.baseline.final_position_error,
                ),
            ];
            for (label, a, b) in rows {
                println!("{label:<28} {a:>12.4} {b:>12.4}");
            }
            println!(
                "optimizer prevents stagnation: {}",
                comparison.optimizer_prevents_stagnation
            );
            println!("outputs in {}", out_dir.display());
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
