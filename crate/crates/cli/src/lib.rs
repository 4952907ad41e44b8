//! Command-line front end: presets, overrides, subcommands and table output.

pub mod commands;
pub mod config;

use std::fs;
use std::io::{self, Write};
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use magnonic::protocols::{ProtocolKind, Switching, TimingSource};
use magnonic::table::Table;
use magnonic::Truncation;

use config::{parse_angle, parse_truncation, GridSpec, Overrides, RunConfig};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("numerical failure: {0}")]
    Numerical(magnonic::Error),
    #[error("I/O error: {0}")]
    Io(#[from] io::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Numerical(_) => 3,
            CliError::Io(_) => 1,
        }
    }
}

impl From<magnonic::Error> for CliError {
    fn from(e: magnonic::Error) -> Self {
        use magnonic::Error as E;
        match e {
            E::InvalidParameter(_) | E::InvalidTruncation { .. } | E::InvalidGrid(_) | E::LabelOutOfRange(_) => {
                CliError::Config(e.to_string())
            }
            other => CliError::Numerical(other),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Workflow {
    Bell,
    Ghz,
    QubitMagnon,
}

impl From<Workflow> for ProtocolKind {
    fn from(w: Workflow) -> Self {
        match w {
            Workflow::Bell => ProtocolKind::BellPhotonMagnon,
            Workflow::Ghz => ProtocolKind::Ghz,
            Workflow::QubitMagnon => ProtocolKind::BellQubitMagnon,
        }
    }
}

/// Spectra, Rabi traces, sweeps and entanglement protocols for a qubit coupled
/// to a photon mode and a magnon mode.
///
/// Frequencies, couplings and rates are absolute; each workflow preset puts
/// its reference frequency (omega_a for bell, omega_m for ghz and
/// qubit-magnon) at 1. Precedence: preset, then --config file, then flags.
#[derive(Debug, Parser)]
#[command(name = "magnonic", version)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    #[command(flatten)]
    pub common: CommonArgs,
}

#[derive(Debug, Args)]
pub struct CommonArgs {
    #[arg(long, global = true, value_enum)]
    pub workflow: Option<Workflow>,
    /// Flat `key = value` file.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Photon-magnon coupling.
    #[arg(long = "g", global = true, allow_negative_numbers = true)]
    pub g: Option<f64>,
    /// Photon-qubit coupling.
    #[arg(long = "G", global = true, allow_negative_numbers = true)]
    pub big_g: Option<f64>,
    /// Mixing angle: radians or forms like `pi/4`, `0.25pi`.
    #[arg(long, global = true, value_parser = parse_angle)]
    pub theta: Option<f64>,
    #[arg(long, global = true)]
    pub omega_a: Option<f64>,
    #[arg(long, global = true)]
    pub omega_m: Option<f64>,
    /// Decay rate applied to photon, magnon and qubit.
    #[arg(long, global = true)]
    pub kappa: Option<f64>,
    /// Target phase in [0, 2 pi): radians or forms like `pi/2`.
    #[arg(long, global = true, value_parser = parse_angle)]
    pub phi: Option<f64>,
    /// Fock cutoffs `n_a,n_m`, or one value for both.
    #[arg(long, global = true, value_parser = parse_truncation)]
    pub trunc: Option<Truncation>,
    /// Operating points from closed forms or the crossing finder.
    #[arg(long, global = true, value_parser = parse_timing)]
    pub timing: Option<TimingSource>,
    /// `sudden` or `ramp:<duration>`.
    #[arg(long, global = true, value_parser = parse_switching)]
    pub switching: Option<Switching>,
    /// Sweep workers; defaults to the available parallelism.
    #[arg(long, global = true)]
    pub jobs: Option<usize>,
    /// Records per protocol step.
    #[arg(long, global = true)]
    pub samples: Option<usize>,
    /// Output file; standard output when absent.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
}

fn parse_timing(s: &str) -> Result<TimingSource, String> {
    s.parse().map_err(|e: magnonic::Error| e.to_string())
}

fn parse_switching(s: &str) -> Result<Switching, String> {
    s.parse().map_err(|e: magnonic::Error| e.to_string())
}

fn parse_range(s: &str) -> Result<(f64, f64), String> {
    let bad = || format!("bad range '{s}', expected lo:hi");
    let (lo, hi) = s.split_once(':').ok_or_else(bad)?;
    let (lo, hi): (f64, f64) = (lo.trim().parse().map_err(|_| bad())?, hi.trim().parse().map_err(|_| bad())?);
    if !(lo.is_finite() && hi.is_finite() && hi > lo) {
        return Err(bad());
    }
    Ok((lo, hi))
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Dressed levels of the workflow's pair across its avoided crossing.
    Spectrum {
        /// `omega_q` window `lo:hi`; defaults to a bracket around the expected crossing.
        #[arg(long, value_parser = parse_range)]
        range: Option<(f64, f64)>,
        #[arg(long, default_value_t = 401)]
        points: usize,
    },
    /// Full and effective population transfer for the four (g, G) presets,
    /// or for the given couplings.
    Rabi {
        /// Sampling step in units of the inverse reference frequency.
        #[arg(long, default_value_t = 0.05)]
        dt: f64,
        /// Rows written per preset.
        #[arg(long, default_value_t = 801)]
        points: usize,
    },
    /// Final fidelity with and without decoherence over a (g, G) grid.
    Sweep {
        /// `lo:hi:n` in units of the reference frequency.
        #[arg(long = "g-range", default_value = "0.05:0.2:7")]
        g_range: GridSpec,
        #[arg(long = "G-range", default_value = "0.05:0.2:7")]
        big_g_range: GridSpec,
    },
    /// Protocol fidelity versus time at several decay rates.
    FidelityDynamics {
        /// Comma-separated rates in units of the reference frequency.
        #[arg(long, value_delimiter = ',', default_values_t = commands::DYNAMICS_KAPPAS)]
        kappas: Vec<f64>,
    },
    /// Closed-form versus numeric resonance shifts and couplings.
    Validity {
        /// Coupling values `lo:hi:n` in units of the reference frequency.
        #[arg(long, default_value = "0.01:0.2:20")]
        values: GridSpec,
    },
    /// One protocol run with its schedule and fidelity trace.
    Protocol,
}

impl CommonArgs {
    fn overrides(&self) -> Overrides {
        Overrides {
            workflow: self.workflow.map(Into::into),
            g: self.g,
            big_g: self.big_g,
            theta: self.theta,
            omega_a: self.omega_a,
            omega_m: self.omega_m,
            kappa: self.kappa,
            phi: self.phi,
            trunc: self.trunc,
            timing: self.timing,
            switching: self.switching,
            jobs: self.jobs,
            samples: self.samples,
            out: self.out.clone(),
            ..Overrides::default()
        }
    }
}

/// Preset, then config file, then flags.
pub fn resolve(cli: &Cli) -> Result<RunConfig, CliError> {
    let mut o = match &cli.common.config {
        Some(path) => {
            let text = fs::read_to_string(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
            Overrides::parse_file(&text)?
        }
        None => Overrides::default(),
    };
    o.merge(&cli.common.overrides());
    RunConfig::resolve(&o)
}

pub fn build_table(cli: &Cli, cfg: &RunConfig) -> Result<Table, CliError> {
    match &cli.command {
        Command::Spectrum { range, points } => commands::cmd_spectrum(cfg, *range, *points),
        Command::Rabi { dt, points } => {
            if !(dt.is_finite() && *dt > 0.0) {
                return Err(CliError::Config(format!("dt must be positive, got {dt}")));
            }
            commands::cmd_rabi(cfg, *dt, *points)
        }
        Command::Sweep { g_range, big_g_range } => commands::cmd_sweep(cfg, *g_range, *big_g_range),
        Command::FidelityDynamics { kappas } => {
            if kappas.iter().any(|k| !(k.is_finite() && *k >= 0.0)) {
                return Err(CliError::Config("rates must be finite and non-negative".into()));
            }
            commands::cmd_fidelity_dynamics(cfg, kappas)
        }
        Command::Validity { values } => commands::cmd_validity(cfg, *values),
        Command::Protocol => commands::cmd_protocol(cfg),
    }
}

pub fn write_table(table: &Table, out: Option<&std::path::Path>) -> Result<(), CliError> {
    match out {
        Some(path) => {
            let mut f = io::BufWriter::new(fs::File::create(path)?);
            table.write_to(&mut f)?;
            f.flush()?;
        }
        None => {
            let stdout = io::stdout();
            let mut lock = stdout.lock();
            table.write_to(&mut lock)?;
            lock.flush()?;
        }
    }
    Ok(())
}

/// Resolves, computes and writes one command.
pub fn run(cli: &Cli) -> Result<(), CliError> {
    let cfg = resolve(cli)?;
    let table = build_table(cli, &cfg)?;
    write_table(&table, cfg.out.as_deref())
}
