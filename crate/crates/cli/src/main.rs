use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use tunnelsense_core::scenario::{
    builtin, coefficient_table, run_calibration, run_estimate, run_scenario, run_sweep, validate_config, Provenance,
    Scenario, SweepReport, BUILTIN_SCENARIOS,
};
use tunnelsense_core::{Error, ExpansionOrder};

const EXIT_INVALID_CONFIG: u8 = 2;
const EXIT_RUNTIME: u8 = 3;

#[derive(Parser)]
#[command(name = "tunnelsense", version, about = "Heterodyne force-detection scenario runner")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one scenario: spectra, per-line forces, SNRs, exponent.
    Simulate(RunArgs),
    /// Run the electrostatic bias ladder and extrapolate to SNR = 1.
    Calibrate(RunArgs),
    /// Detectability table over a (d0, V, noise) grid.
    Sweep(RunArgs),
    /// Estimate the force exponent from the plate line and the sidebands.
    EstimateN(RunArgs),
    /// Print the line coefficients of a 1/d^n force.
    Tables(TablesArgs),
    /// Check a scenario file and list every violation.
    Validate(ValidateArgs),
    /// List the bundled scenarios, or print one.
    Fixtures { name: Option<String> },
}

#[derive(Args)]
struct RunArgs {
    /// Scenario file, or `builtin:<name>` for a bundled one.
    #[arg(long)]
    config: String,
    /// Directory for output files; written atomically.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Overrides the seed in the scenario file.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, value_enum, default_value_t = Format::Report)]
    format: Format,
}

#[derive(Args)]
struct TablesArgs {
    #[arg(long, default_value_t = 4.0)]
    n: f64,
    #[arg(long, default_value_t = 1e-5)]
    a: f64,
    #[arg(long, default_value_t = 2e-3)]
    b: f64,
    #[arg(long, value_enum, default_value_t = Order::Second)]
    order: Order,
    /// Read the written-out 1/d^4 table instead of the generic formula.
    #[arg(long)]
    literal: bool,
}

#[derive(Args)]
struct ValidateArgs {
    #[arg(long)]
    config: String,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Table,
    Report,
}

#[derive(Clone, Copy, ValueEnum)]
enum Order {
    First,
    Second,
}

enum Failure {
    InvalidConfig(String),
    Runtime(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Config(_) => Failure::InvalidConfig(e.to_string()),
            other => Failure::Runtime(other.to_string()),
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::InvalidConfig(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(EXIT_INVALID_CONFIG)
        }
        Err(Failure::Runtime(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(EXIT_RUNTIME)
        }
    }
}

fn run(command: Command) -> Result<(), Failure> {
    match command {
        Command::Simulate(args) => {
            let scenario = load(&args)?;
            let run = run_scenario(&scenario)?;
            let report = run.report.to_toml();
            emit(&args, &report, &run.report.line_table());
            if let Some(dir) = &args.out {
                write_atomic(dir, "report.toml", &report)?;
                write_atomic(dir, "lines.tsv", &run.report.line_table())?;
                write_atomic(dir, "spectrum.tsv", &run.spectrum.to_table())?;
            }
        }
        Command::Calibrate(args) => {
            let report = run_calibration(&load(&args)?)?;
            let text = report.to_toml();
            emit(&args, &text, &report.table());
            if let Some(dir) = &args.out {
                write_atomic(dir, "calibration.toml", &text)?;
            }
        }
        Command::Sweep(args) => {
            let scenario = load(&args)?;
            let report = SweepReport {
                provenance: Provenance::of(&scenario),
                rows: run_sweep(&scenario)?,
            };
            let text = report.to_toml();
            emit(&args, &text, &report.table());
            if let Some(dir) = &args.out {
                write_atomic(dir, "sweep.toml", &text)?;
                write_atomic(dir, "sweep.tsv", &report.table())?;
            }
        }
        Command::EstimateN(args) => {
            let report = run_estimate(&load(&args)?)?;
            let text = report.to_toml();
            emit(&args, &text, &report.table());
            if let Some(dir) = &args.out {
                write_atomic(dir, "estimate.toml", &text)?;
            }
        }
        Command::Tables(args) => {
            let order = match args.order {
                Order::First => ExpansionOrder::First,
                Order::Second => ExpansionOrder::Second,
            };
            let table = coefficient_table(args.n, args.a, args.b, order, args.literal)
                .map_err(|e| Failure::InvalidConfig(e.to_string()))?;
            print!("{table}");
        }
        Command::Validate(args) => {
            let (label, text) = read_config(&args.config)?;
            let diagnostics = validate_config(&text);
            if !diagnostics.is_empty() {
                for d in &diagnostics {
                    println!("{}", located(&label, d));
                }
                return Err(Failure::InvalidConfig(format!(
                    "{label}: {} diagnostic(s)",
                    diagnostics.len()
                )));
            }
            println!("{label}: no diagnostics");
        }
        Command::Fixtures { name } => match name {
            None => {
                for (name, _) in BUILTIN_SCENARIOS {
                    println!("{name}");
                }
            }
            Some(name) => {
                let text = builtin(&name)
                    .ok_or_else(|| Failure::InvalidConfig(format!("no bundled scenario named {name:?}")))?;
                print!("{text}");
            }
        },
    }
    Ok(())
}

fn located(label: &str, d: &tunnelsense_core::scenario::Diagnostic) -> String {
    match d.line {
        Some(line) => format!("{label}:{line}: {}: {}", d.key, d.message),
        None => format!("{label}: {}: {}", d.key, d.message),
    }
}

fn read_config(source: &str) -> Result<(String, String), Failure> {
    if let Some(name) = source.strip_prefix("builtin:") {
        let text = builtin(name).ok_or_else(|| {
            let known: Vec<&str> = BUILTIN_SCENARIOS.iter().map(|(n, _)| *n).collect();
            Failure::InvalidConfig(format!(
                "no bundled scenario named {name:?}; known: {}",
                known.join(", ")
            ))
        })?;
        return Ok((source.to_string(), text.to_string()));
    }
    let text = fs::read_to_string(source).map_err(|e| Failure::InvalidConfig(format!("cannot read {source}: {e}")))?;
    Ok((source.to_string(), text))
}

fn load(args: &RunArgs) -> Result<Scenario, Failure> {
    let (label, text) = read_config(&args.config)?;
    let diagnostics = validate_config(&text);
    if !diagnostics.is_empty() {
        let lines: Vec<String> = diagnostics.iter().map(|d| located(&label, d)).collect();
        return Err(Failure::InvalidConfig(format!(
            "invalid scenario\n{}",
            lines.join("\n")
        )));
    }
    let scenario = Scenario::from_toml(&text)?;
    Ok(match args.seed {
        Some(seed) => scenario.with_seed(seed),
        None => scenario,
    })
}

fn emit(args: &RunArgs, report: &str, table: &str) {
    match args.format {
        Format::Report => print!("{report}"),
        Format::Table => print!("{table}"),
    }
}

fn write_atomic(dir: &Path, name: &str, contents: &str) -> Result<(), Failure> {
    let io = |e: std::io::Error| Failure::Runtime(format!("cannot write {}: {e}", dir.join(name).display()));
    fs::create_dir_all(dir).map_err(io)?;
    let tmp = dir.join(format!(".{name}.tmp"));
    fs::write(&tmp, contents).map_err(io)?;
    fs::rename(&tmp, dir.join(name)).map_err(io)
}
