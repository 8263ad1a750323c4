use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use mcfc_bench::{
    batch_run, run_oracle, run_scenario, scale_failure_scenario, tradeoff_sweep, HarnessError,
    RunOptions, ScenarioSpec,
};
use mcfc_core::PATTERN_GRID_POINTS;

#[derive(Parser)]
#[command(
    name = "mcfc",
    version,
    about = "Minimum-correction failure compensation for linear arrays"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Directory for records, patterns and traces.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Samples of the exported pattern grid.
    #[arg(long, default_value_t = PATTERN_GRID_POINTS)]
    grid: usize,
    /// Constraint tolerance in dB, overriding the scenario file.
    #[arg(long)]
    constraint_tol: Option<f64>,
}

impl Common {
    fn options(&self) -> RunOptions {
        RunOptions {
            out_dir: self.out.clone(),
            grid_points: self.grid,
            constraint_tol_db: self.constraint_tol,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Correct one scenario.
    Run {
        scenario: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Exhaustive minimum over supports up to a given size.
    Oracle {
        scenario: PathBuf,
        #[arg(long)]
        max_support: usize,
        #[command(flatten)]
        common: Common,
    },
    /// Corrections versus target level.
    Sweep {
        scenario: PathBuf,
        /// Targets in dB, loosest first (comma separated).
        #[arg(
            long,
            value_delimiter = ',',
            allow_hyphen_values = true,
            required = true
        )]
        targets: Vec<f64>,
        #[command(flatten)]
        common: Common,
    },
    /// Print the fault indices of a scaled failure pattern.
    Scale {
        /// 1-based faults of the base array (comma separated).
        #[arg(long, value_delimiter = ',', required = true)]
        faults: Vec<usize>,
        #[arg(long)]
        base_n: usize,
        #[arg(long)]
        factor: usize,
        #[arg(long)]
        count: usize,
    },
    /// Run every scenario file in a directory.
    Batch {
        dir: PathBuf,
        #[arg(long, default_value_t = 1)]
        parallel: usize,
        #[command(flatten)]
        common: Common,
    },
}

fn run(cli: Cli) -> Result<(), HarnessError> {
    match cli.command {
        Command::Run { scenario, common } => {
            let spec = ScenarioSpec::load(&scenario)?;
            let out = run_scenario(&spec, &common.options())?;
            println!("{}", serde_json::to_string_pretty(&out.record)?);
        }
        Command::Oracle {
            scenario,
            max_support,
            common,
        } => {
            let spec = ScenarioSpec::load(&scenario)?;
            let rec = run_oracle(&spec, max_support, &common.options())?;
            println!("{}", serde_json::to_string_pretty(&rec)?);
        }
        Command::Sweep {
            scenario,
            targets,
            common,
        } => {
            let spec = ScenarioSpec::load(&scenario)?;
            let report = tradeoff_sweep(&spec, &targets, &common.options())?;
            println!("{}", serde_json::to_string_pretty(&report)?);
        }
        Command::Scale {
            faults,
            base_n,
            factor,
            count,
        } => {
            let idx = scale_failure_scenario(&faults, base_n, factor, count)?;
            let text: Vec<String> = idx.iter().map(ToString::to_string).collect();
            println!("{}", text.join(","));
        }
        Command::Batch {
            dir,
            parallel,
            common,
        } => {
            let rows = batch_run(&dir, parallel, &common.options())?;
            for r in &rows {
                println!(
                    "{}\t{}\t{}",
                    r.file,
                    r.status,
                    r.n_corrections.map_or("-".into(), |n| n.to_string())
                );
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_infeasible() {
                ExitCode::from(2)
            } else {
                ExitCode::from(1)
            }
        }
    }
}
