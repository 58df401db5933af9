use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use gridimpact::dataset::{generate, write_dataset, DatasetError, DEFAULT_BUSES, DEFAULT_SEED};
use gridimpact::pipeline::{cmd_report, cmd_run, cmd_validate, Exit, Overrides, ReportSelections};

#[derive(Parser)]
#[command(
    name = "gridimpact",
    version,
    about = "EV charging impact studies on campus distribution grids"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check a topology and meter files; prints findings one per line.
    Validate {
        #[arg(long)]
        topology: PathBuf,
        #[arg(long, num_args = 0..)]
        meters: Vec<PathBuf>,
    },
    /// Run the configured study and persist its tables.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Cap on concurrent day runs; overrides `jobs` in the config.
        #[arg(long)]
        jobs: Option<usize>,
        /// Solve every step from a flat start.
        #[arg(long)]
        no_warm_start: bool,
    },
    /// Draw charts from a persisted study.
    Report {
        #[arg(long)]
        study: PathBuf,
        /// `bus=ID,months=LIST` (LIST is `all` or e.g. `4,7,10,1`).
        #[arg(long, num_args = 1..)]
        voltage: Vec<String>,
        /// `bus=ID`
        #[arg(long, num_args = 1..)]
        swing: Vec<String>,
        /// `from=ID,to=ID,months=LIST`
        #[arg(long, num_args = 1..)]
        flow: Vec<String>,
        /// Chart directory; defaults to `<study>/charts`.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Write the synthetic campus dataset.
    SeedDataset {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = DEFAULT_BUSES)]
        buses: usize,
        #[arg(long, default_value_t = DEFAULT_SEED)]
        seed: u64,
    },
}

fn joined(args: Vec<String>) -> Vec<String> {
    if args.is_empty() {
        Vec::new()
    } else {
        vec![args.join(",")]
    }
}

fn run(cli: Cli) -> Exit {
    let fail = |e: &dyn std::fmt::Display, exit: Exit| {
        eprintln!("error: {e}");
        exit
    };
    match cli.command {
        Command::Validate { topology, meters } => match cmd_validate(&topology, &meters) {
            Ok(outcome) => {
                for f in &outcome.findings {
                    println!("{f}");
                }
                outcome.exit
            }
            Err(e) => fail(&e, e.exit()),
        },
        Command::Run {
            config,
            out,
            jobs,
            no_warm_start,
        } => {
            let overrides = Overrides {
                jobs,
                warm_start: no_warm_start.then_some(false),
            };
            match cmd_run(&config, &out, &overrides) {
                Ok(o) => {
                    println!(
                        "{} solves, {} non-converged, tables in {}",
                        o.run.attempted_solves,
                        o.run.non_converged,
                        out.display()
                    );
                    Exit::Success
                }
                Err(e) => fail(&e, e.exit()),
            }
        }
        Command::Report {
            study,
            voltage,
            swing,
            flow,
            out,
        } => {
            let selections = ReportSelections {
                voltage: joined(voltage),
                swing,
                flow: joined(flow),
            };
            let out = out.unwrap_or_else(|| study.join("charts"));
            match cmd_report(&study, &selections, &out) {
                Ok(files) => {
                    for f in files {
                        println!("{}", f.display());
                    }
                    Exit::Success
                }
                Err(e) => fail(&e, e.exit()),
            }
        }
        Command::SeedDataset { out, buses, seed } => {
            match generate(buses, seed).and_then(|d| write_dataset(&d, &out)) {
                Ok(files) => {
                    println!(
                        "wrote {} meter files to {}",
                        files.meters.len(),
                        out.display()
                    );
                    Exit::Success
                }
                Err(e @ DatasetError::TooFewBuses { .. }) => fail(&e, Exit::Domain),
                Err(e) => fail(&e, Exit::Environment),
            }
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("GRID_LOG", "warn"))
        .format_timestamp(None)
        .init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    ExitCode::from(run(cli).code() as u8)
}
