use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use cabin_emc::io_cli::report::{screening_csv, spectrum_csv, trace_csv};
use cabin_emc::io_cli::{
    emit_report, load_scenario, run_buzz, run_scenario, OutputFormat, Scenario, UnknownKeys,
};
use cabin_emc::Error;

const EXIT_BLOCKED: u8 = 1;
const EXIT_CONFIG: u8 = 2;
const EXIT_RUNTIME: u8 = 3;

#[derive(Parser)]
#[command(
    name = "cabin-emc",
    version,
    about = "GSM1800 in-cabin RACH interference and TDMA buzz analysis"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct ScenarioArgs {
    /// Scenario file (TOML)
    scenario: PathBuf,
    /// Warn about unknown keys instead of rejecting the scenario
    #[arg(long)]
    lax: bool,
}

#[derive(Args)]
struct SimArgs {
    /// Simulated time in milliseconds
    #[arg(long, default_value_t = 1000.0)]
    horizon: f64,
    /// Override the scenario's RNG seed
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate, analyse and write reports
    Run {
        #[command(flatten)]
        scenario: ScenarioArgs,
        #[command(flatten)]
        sim: SimArgs,
        /// Output directory
        #[arg(long, env = "CABIN_EMC_OUT_DIR", default_value = "out")]
        out: PathBuf,
        /// Comma-separated subset of summary,csv,json
        #[arg(long, value_delimiter = ',', default_value = "summary,csv,json")]
        formats: Vec<String>,
    },
    /// Validate a scenario without running it
    Check {
        #[command(flatten)]
        scenario: ScenarioArgs,
    },
    /// Print the band-plan screening table
    Bands {
        #[command(flatten)]
        scenario: ScenarioArgs,
    },
    /// Envelope and spectrum only
    Buzz {
        #[command(flatten)]
        scenario: ScenarioArgs,
        #[command(flatten)]
        sim: SimArgs,
        /// Also write envelope.csv and spectrum.csv here
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn load(args: &ScenarioArgs) -> Result<Scenario, Error> {
    let mode = if args.lax {
        UnknownKeys::Warn
    } else {
        UnknownKeys::Reject
    };
    let loaded = load_scenario(&args.scenario, mode)?;
    for w in &loaded.warnings {
        eprintln!("warning: {w}");
    }
    Ok(loaded.scenario)
}

fn with_seed(mut s: Scenario, seed: Option<u64>) -> Scenario {
    if let Some(seed) = seed {
        s.sim.seed = seed;
    }
    s
}

fn execute(cli: Cli) -> Result<u8, Error> {
    match cli.command {
        Command::Check { scenario } => {
            let s = load(&scenario)?;
            println!(
                "ok: {} stations, {} victims, {} triggers",
                s.stations.len(),
                s.victims.len(),
                s.sim.triggers.len()
            );
            Ok(0)
        }
        Command::Bands { scenario } => {
            let s = load(&scenario)?;
            let rows = cabin_emc::io_cli::report::screening_table(&s)?;
            print!("{}", screening_csv(&rows));
            Ok(0)
        }
        Command::Buzz { scenario, sim, out } => {
            let s = with_seed(load(&scenario)?, sim.seed);
            let (_, trace, spectrum, buzz) = run_buzz(&s, sim.horizon)?;
            println!(
                "{}",
                serde_json::to_string_pretty(&buzz)
                    .map_err(|e| Error::InvalidArgument(e.to_string()))?
            );
            if let Some(dir) = out {
                let manifest = cabin_emc::io_cli::emit::write_atomically(
                    &dir,
                    &[
                        ("envelope.csv", trace_csv(&trace)),
                        ("spectrum.csv", spectrum_csv(&spectrum)),
                    ],
                )?;
                print_manifest(
                    &manifest
                        .files
                        .iter()
                        .map(|f| (f.path.as_path(), f.sha256.as_str()))
                        .collect::<Vec<_>>(),
                );
            }
            Ok(0)
        }
        Command::Run {
            scenario,
            sim,
            out,
            formats,
        } => {
            let formats = formats
                .iter()
                .filter(|f| !f.trim().is_empty())
                .map(|f| f.parse::<OutputFormat>())
                .collect::<Result<Vec<_>, _>>()
                .map_err(|e| Error::Config(e.to_string()))?;
            let s = with_seed(load(&scenario)?, sim.seed);
            let report = run_scenario(&s, sim.horizon)?;
            let manifest = emit_report(&report, &out, &formats)?;
            print_manifest(
                &manifest
                    .files
                    .iter()
                    .map(|f| (f.path.as_path(), f.sha256.as_str()))
                    .collect::<Vec<_>>(),
            );
            for m in &report.margins {
                println!("{}: {}", m.victim, m.verdict);
            }
            Ok(if report.any_blocked() {
                EXIT_BLOCKED
            } else {
                0
            })
        }
    }
}

fn print_manifest(files: &[(&Path, &str)]) {
    for (path, sha) in files {
        println!("{sha}  {}", path.display());
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_config() {
                EXIT_CONFIG
            } else {
                EXIT_RUNTIME
            })
        }
    }
}
