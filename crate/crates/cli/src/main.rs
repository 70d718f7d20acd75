use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use opatwin_cli::export::RunOutput;
use opatwin_cli::scenarios::{self, LockLoop, RunError};
use opatwin_cli::validate::{self, Tolerances};
use opatwin_cli::ScenarioConfig;
use opatwin_core::locking::SmlTarget;

/// Digital twin of a low-frequency squeezed-light source: figure scenarios, fits and
/// acceptance checks.
#[derive(Debug, Parser)]
#[command(name = "opatwin", version)]
struct Cli {
    /// Scenario configuration (JSON). Built-in defaults when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides the configured seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory for CSV and JSON files.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    /// Scales simulated durations and numbers of averaged records.
    #[arg(long, global = true, default_value_t = 1.0)]
    scale: f64,
    /// Suppresses the summary on stdout.
    #[arg(long, global = true)]
    quiet: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Target {
    #[value(name = "0")]
    Zero,
    #[value(name = "pi")]
    Pi,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Loop {
    Pump,
    Lo,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Noise power at 5 kHz with the LO phase locked and scanned.
    SweepPhase,
    /// Stitched broadband spectra of the SQL, squeezed and anti-squeezed light.
    Spectrum,
    /// RMS-averaged zero-span traces at low analysis frequencies.
    ZeroSpan {
        /// Analysis frequency in Hz; all configured points when omitted.
        #[arg(long)]
        center: Option<f64>,
    },
    /// Scan-then-lock run of the pump phase or the LO phase.
    LockDemo {
        #[arg(long, value_enum, default_value = "0")]
        target: Target,
        #[arg(long = "loop", value_enum, default_value = "pump")]
        lock: Loop,
    },
    /// Phase-jitter and operating-point fits from a CSV of measured pairs.
    Fit { input: PathBuf },
    /// Long hold of the squeezed quadrature and its fluctuation statistics.
    Stability,
    /// Runs the acceptance suite; exits with status 2 if any check fails.
    Validate {
        /// JSON file overriding individual tolerances.
        #[arg(long)]
        tolerances: Option<PathBuf>,
        /// Runs only the listed checks (comma separated ids).
        #[arg(long, value_delimiter = ',')]
        only: Option<Vec<u8>>,
    },
    /// Prints the default configuration.
    Defaults,
}

enum Failure {
    Validation(String),
    Acceptance,
}

impl From<RunError> for Failure {
    fn from(e: RunError) -> Self {
        Failure::Validation(e.to_string())
    }
}

fn load_config(cli: &Cli) -> Result<ScenarioConfig, Failure> {
    let mut config = match &cli.config {
        Some(path) => ScenarioConfig::load(path).map_err(|e| Failure::Validation(e.to_string()))?,
        None => ScenarioConfig::default(),
    };
    if let Some(seed) = cli.seed {
        config.seed = seed;
    }
    if !(cli.scale > 0.0 && cli.scale.is_finite()) {
        return Err(Failure::Validation(format!("--scale must be positive, got {}", cli.scale)));
    }
    let config = config.scaled(cli.scale);
    config.validate().map_err(|e| Failure::Validation(e.to_string()))?;
    Ok(config)
}

fn emit(cli: &Cli, out: &RunOutput) -> Result<(), Failure> {
    let paths = out
        .write_to(&cli.out)
        .map_err(|e| Failure::Validation(format!("cannot write to {}: {e}", cli.out.display())))?;
    if !cli.quiet {
        print!("{}", out.summary_json());
        for p in paths {
            eprintln!("wrote {}", p.display());
        }
    }
    Ok(())
}

fn run(cli: &Cli) -> Result<(), Failure> {
    if let Command::Defaults = cli.command {
        println!("{}", ScenarioConfig::default().to_json());
        return Ok(());
    }
    let config = load_config(cli)?;
    match &cli.command {
        Command::SweepPhase => emit(cli, &scenarios::sweep_phase(&config)?),
        Command::Spectrum => emit(cli, &scenarios::spectrum(&config)?),
        Command::ZeroSpan { center } => emit(cli, &scenarios::zero_span(&config, *center)?),
        Command::LockDemo { target, lock } => {
            let target = match target {
                Target::Zero => SmlTarget::Zero,
                Target::Pi => SmlTarget::Pi,
            };
            let lock = match lock {
                Loop::Pump => LockLoop::Pump,
                Loop::Lo => LockLoop::Lo,
            };
            emit(cli, &scenarios::lock_demo(&config, lock, target)?.0)
        }
        Command::Fit { input } => {
            let text = std::fs::read_to_string(input)
                .map_err(|e| Failure::Validation(format!("cannot read {}: {e}", input.display())))?;
            emit(cli, &scenarios::fit(&config, &text, &input.display().to_string())?)
        }
        Command::Stability => emit(cli, &scenarios::stability(&config)?),
        Command::Validate { tolerances, only } => {
            let tol = match tolerances {
                Some(path) => {
                    let text = std::fs::read_to_string(path)
                        .map_err(|e| Failure::Validation(format!("cannot read {}: {e}", path.display())))?;
                    serde_json::from_str::<Tolerances>(&text)
                        .map_err(|e| Failure::Validation(format!("{}: {e}", path.display())))?
                }
                None => Tolerances::default(),
            };
            let report = validate::run(&config, &tol, only.as_deref());
            for r in &report.results {
                println!("{}", r.line());
            }
            if report.all_passed() {
                Ok(())
            } else {
                Err(Failure::Acceptance)
            }
        }
        Command::Defaults => unreachable!("handled above"),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Validation(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Acceptance) => ExitCode::from(2),
    }
}
