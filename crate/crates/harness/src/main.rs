use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use vfm_harness::commands::{self, bench_digest, GridSpec, DEFAULT_SWEEP_HZ};
use vfm_harness::{BenchOptions, CommonOptions, HarnessError};

#[derive(Parser)]
#[command(
    name = "vfm",
    version,
    about = "Vibratory finger manipulation simulator"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Scenario TOML file
    #[arg(long)]
    scenario: PathBuf,
    /// Seed for sensor noise, perturbation and goal sampling
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Override a scenario field, e.g. `controller.duty_fraction=1.0`
    #[arg(long = "set", value_name = "KEY=VALUE")]
    sets: Vec<String>,
}

impl From<Common> for CommonOptions {
    fn from(c: Common) -> Self {
        CommonOptions {
            scenario: c.scenario,
            seed: c.seed,
            out: c.out,
            sets: c.sets,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Run one closed-loop episode per scenario goal
    Simulate(Common),
    /// Chained random-goal trials
    Bench {
        #[command(flatten)]
        common: Common,
        /// Number of trials (defaults to goals.count)
        #[arg(long)]
        trials: Option<usize>,
        /// Run duty fraction 0.5 against 1.0 on the same goals and seeds
        #[arg(long)]
        paired: bool,
    },
    /// Steady orbit rate against drive frequency
    SweepFreq {
        #[command(flatten)]
        common: Common,
        /// Frequencies in Hz: `start:stop:count` or a comma list
        #[arg(long, default_value = DEFAULT_SWEEP_HZ)]
        freqs: GridSpec,
    },
    /// Tilt force, slip threshold and margins across radii
    Feasibility {
        #[command(flatten)]
        common: Common,
        /// Radii in m: `start:stop:count` or a comma list
        #[arg(long)]
        r_grid: Option<GridSpec>,
    },
}

fn run(cli: Cli) -> Result<u8, HarnessError> {
    match cli.command {
        Command::Simulate(c) => {
            let (code, summary) = commands::simulate(&c.into())?;
            for r in &summary.runs {
                println!(
                    "goal {:>3}: {:<8} pos {:.3} mm, ori {:.3} deg, t {:.2} s {}",
                    r.index,
                    r.outcome,
                    r.position_error_mm,
                    r.orientation_error_deg,
                    r.sim_time_s,
                    r.detail
                );
            }
            Ok(code)
        }
        Command::Bench {
            common,
            trials,
            paired,
        } => {
            let opts = BenchOptions {
                common: common.into(),
                trials,
                paired,
            };
            let (code, report) = commands::bench(&opts)?;
            for line in bench_digest(&report) {
                println!("{line}");
            }
            if code != 0 {
                eprintln!("duty-gated arm is not more accurate than continuous drive");
            }
            Ok(code)
        }
        Command::SweepFreq { common, freqs } => {
            let (code, rows) = commands::sweep_freq(&common.into(), &freqs)?;
            for r in &rows {
                match r.rates {
                    Some((a, s)) => println!(
                        "{:7.2} Hz: analytic {a:.5} rad/s, simulated {s:.5} rad/s",
                        r.freq_hz
                    ),
                    None => println!("{:7.2} Hz: infeasible", r.freq_hz),
                }
            }
            Ok(code)
        }
        Command::Feasibility { common, r_grid } => {
            let (code, rows) = commands::feasibility(&common.into(), r_grid.as_ref())?;
            println!("{} rows", rows.len());
            Ok(code)
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
