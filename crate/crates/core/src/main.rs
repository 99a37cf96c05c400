use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use log::info;

use ghz_sagnac::sweep::{self, Command, Settings, SweepSpec};
use ghz_sagnac::{selftest, Error};

const EXIT_USAGE: u8 = 1;
const EXIT_NUMERIC: u8 = 2;
const EXIT_CAPACITY: u8 = 3;

/// GHZ-input Sagnac interferometer: fidelity, QFI and parity-precision tables.
#[derive(Parser)]
#[command(name = "ghz-sagnac", version)]
struct Cli {
    #[command(subcommand)]
    command: Sub,
}

#[derive(Subcommand)]
enum Sub {
    /// Ground-state fidelity of both branches over an (omega_s, omega_p) grid
    PhaseDiagram(SweepArgs),
    /// Fock-level occupation of one branch
    FockHistogram(SweepArgs),
    /// GHZ and uncorrelated-input QFI against particle number
    QfiScaling(SweepArgs),
    /// Parity fringe and rotation precision against omega_s
    ParityScan(SweepArgs),
    /// Parity-readout precision against particle number, with the QCRB
    PrecisionScaling(SweepArgs),
    /// Run the invariant and oracle-equivalence battery
    Selftest {
        /// Fock cutoff of the brute-force tensor oracles (at most 8)
        #[arg(long, default_value_t = 6)]
        nmax: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Args)]
struct SweepArgs {
    /// Comma-separated rotation frequencies
    #[arg(long, allow_hyphen_values = true)]
    omega_s: Option<String>,
    /// Comma-separated drive frequencies
    #[arg(long)]
    omega_p: Option<String>,
    /// Comma-separated particle numbers
    #[arg(long)]
    n_particles: Option<String>,
    /// Axis as [name=]min:max:count[:log]; repeatable
    #[arg(long)]
    grid: Vec<String>,
    /// exact, truncated or both
    #[arg(long)]
    engine: Option<String>,
    /// Write the table here instead of stdout
    #[arg(long)]
    out: Option<PathBuf>,
    /// key=value file (or a previously written table); flags override it
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    workers: Option<usize>,
    /// Highest Fock level in fock-histogram
    #[arg(long)]
    nmax: Option<usize>,
    /// Time step of the Fock integrator in fock-histogram
    #[arg(long)]
    dt: Option<f64>,
    /// up or down (fock-histogram)
    #[arg(long)]
    branch: Option<String>,
}

impl SweepArgs {
    fn settings(&self) -> Result<Settings, Error> {
        let base = match &self.config {
            Some(path) => {
                let text = fs::read_to_string(path)
                    .map_err(|e| Error::Domain(format!("cannot read config {}: {e}", path.display())))?;
                Settings::parse(&text)?
            }
            None => Settings::new(),
        };
        let mut cli = Settings::new();
        let mut put = |k: &str, v: Option<String>| v.map_or(Ok(()), |v| cli.set(k, v));
        put("omega-s", self.omega_s.clone())?;
        put("omega-p", self.omega_p.clone())?;
        put("n-particles", self.n_particles.clone())?;
        put("grid", (!self.grid.is_empty()).then(|| self.grid.join(",")))?;
        put("engine", self.engine.clone())?;
        put("workers", self.workers.map(|w| w.to_string()))?;
        put("nmax", self.nmax.map(|n| n.to_string()))?;
        put("dt", self.dt.map(|d| d.to_string()))?;
        put("branch", self.branch.clone())?;
        put("out", self.out.as_ref().map(|p| p.display().to_string()))?;
        base.merge(&cli)
    }
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Capacity(_) => EXIT_CAPACITY,
        e if e.is_numeric() => EXIT_NUMERIC,
        _ => EXIT_USAGE,
    }
}

fn emit(text: &str, out: Option<&PathBuf>) -> Result<(), Error> {
    match out {
        Some(path) => fs::write(path, text).map_err(|e| Error::Domain(format!("cannot write {}: {e}", path.display()))),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn run_sweep(command: Command, args: &SweepArgs) -> Result<u8, Error> {
    let spec = SweepSpec::resolve(command, &args.settings()?)?;
    info!("{command}: {} workers", spec.workers);
    let table = sweep::run(&spec)?;
    emit(&table.to_csv(), spec.out.as_ref())?;
    if let Some(t) = table.meta("wall_time_s") {
        info!("{command}: {} rows in {t} s", table.rows.len());
    }
    if table.failures > 0 {
        eprintln!("{command}: {} grid points failed, see error.* metadata", table.failures);
        return Ok(EXIT_NUMERIC);
    }
    Ok(0)
}

fn run(cli: Cli) -> Result<u8, Error> {
    let (command, args) = match cli.command {
        Sub::Selftest { nmax, out } => {
            let report = selftest::run(nmax)?;
            emit(&format!("{report}\n"), out.as_ref())?;
            return Ok(if report.passed() { 0 } else { EXIT_NUMERIC });
        }
        Sub::PhaseDiagram(a) => (Command::PhaseDiagram, a),
        Sub::FockHistogram(a) => (Command::FockHistogram, a),
        Sub::QfiScaling(a) => (Command::QfiScaling, a),
        Sub::ParityScan(a) => (Command::ParityScan, a),
        Sub::PrecisionScaling(a) => (Command::PrecisionScaling, a),
    };
    run_sweep(command, &args)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { EXIT_USAGE } else { 0 });
        }
    };
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
