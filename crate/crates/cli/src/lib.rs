//! `omit` command-line workbench: simulate probe sweeps and `(Δ, Ω)` maps,
//! fit datasets jointly, and convert between pump power and photon number.
//!
//! Exit codes: 0 success, 2 configuration or parse error, 3 model
//! singularity, 4 fit not converged, 5 insufficient data, 6 linewidth
//! feature not found or under-resolved, 7 output not writable.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod commands;
pub mod config;
pub mod dataset;
pub mod error;
pub mod svg;

use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use omit_core::{dbm_to_watts, watts_to_dbm, PumpScheme};

pub use commands::{
    build_problem, cmd_fit, cmd_linewidth, cmd_map, cmd_photons, cmd_simulate, FitReport, LinewidthReport,
    OutputOptions, PhotonReport,
};
pub use config::{resolve, Condition, PumpEntry, RunConfig};
pub use dataset::{map_from_csv, map_to_csv, DatasetFile, ParseError, Row};
pub use error::CliError;

use commands::emit;

#[derive(Debug, Parser)]
#[command(name = "omit", version, about = "Simulate and fit optomechanical probe transmission")]
pub struct Cli {
    /// JSON run configuration (frequencies in Hz).
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Noise seed, overriding `noise.seed` in the config.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true, default_value = ".")]
    pub out: PathBuf,
    /// Plot |S21| in dB. Stored data stays linear.
    #[arg(long, global = true)]
    pub db: bool,
    #[command(subcommand)]
    pub command: Command,
}

/// Pump given on the command line. With `--scheme` it replaces the
/// config's pump list; otherwise the other flags override every pump in it.
#[derive(Debug, Clone, Default, Args)]
pub struct PumpArgs {
    #[arg(long)]
    pub scheme: Option<PumpScheme>,
    #[arg(long, allow_negative_numbers = true)]
    pub detuning_hz: Option<f64>,
    #[arg(long, conflicts_with = "power_dbm")]
    pub ncav: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    pub power_dbm: Option<f64>,
    #[arg(long)]
    pub temperature_mk: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    pub probe_power_dbm: Option<f64>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write one dataset CSV per pump condition.
    Simulate {
        #[command(flatten)]
        pump: PumpArgs,
        /// Step the pump across the cavity, one probe sweep per step.
        #[arg(long)]
        protocol: bool,
        /// Also write an SVG plot.
        #[arg(long)]
        svg: bool,
    },
    /// Write one (Δ, Ω) map CSV per pump condition.
    Map {
        #[command(flatten)]
        pump: PumpArgs,
        /// Also write an SVG heatmap.
        #[arg(long)]
        svg: bool,
    },
    /// Fit datasets jointly; writes fit_report.json and fit_residuals.csv.
    Fit {
        #[arg(required = true)]
        datasets: Vec<PathBuf>,
    },
    /// Intracavity photon number and cooperativity for a pump power.
    Photons {
        #[arg(
            long,
            allow_negative_numbers = true,
            required_unless_present = "power_w",
            conflicts_with = "power_w"
        )]
        power_dbm: Option<f64>,
        #[arg(long)]
        power_w: Option<f64>,
        /// Pump detuning; defaults to the red sideband.
        #[arg(long, allow_negative_numbers = true)]
        detuning_hz: Option<f64>,
    },
    /// FWHM of the mechanical feature in a dataset.
    Linewidth { dataset: PathBuf },
    /// Convert between dBm and watts.
    Convert {
        #[arg(
            long,
            allow_negative_numbers = true,
            required_unless_present = "watts",
            conflicts_with = "watts"
        )]
        dbm: Option<f64>,
        #[arg(long)]
        watts: Option<f64>,
    },
}

fn load_config(cli: &Cli) -> Result<RunConfig, CliError> {
    match &cli.config {
        Some(path) => RunConfig::load(path),
        None => Err(CliError::Config("this command needs --config".into())),
    }
}

/// Pump conditions for `simulate` and `map`.
pub fn conditions(config: &RunConfig, args: &PumpArgs) -> Result<Vec<Condition>, CliError> {
    if let Some(scheme) = args.scheme {
        let entry = PumpEntry {
            label: None,
            scheme,
            detuning_hz: args.detuning_hz,
            n_cav: args.ncav,
            power_dbm: args.power_dbm,
            temperature_mk: args.temperature_mk,
            probe_power_dbm: args.probe_power_dbm,
            cavity: None,
            mechanics: None,
        };
        return Ok(vec![resolve(&entry, 0, &config.cavity, &config.mechanics)?]);
    }
    if config.pumps.is_empty() {
        return Err(CliError::Config(
            "no pumps: list them in the config or pass --scheme".into(),
        ));
    }
    config
        .pumps
        .iter()
        .enumerate()
        .map(|(i, p)| {
            let mut entry = p.clone();
            if args.ncav.is_some() || args.power_dbm.is_some() {
                entry.n_cav = args.ncav;
                entry.power_dbm = args.power_dbm;
            }
            entry.detuning_hz = args.detuning_hz.or(entry.detuning_hz);
            entry.temperature_mk = args.temperature_mk.or(entry.temperature_mk);
            entry.probe_power_dbm = args.probe_power_dbm.or(entry.probe_power_dbm);
            resolve(&entry, i, &config.cavity, &config.mechanics)
        })
        .collect()
}

/// Runs one command, printing results to `stdout`.
pub fn run(cli: &Cli, stdout: &mut dyn Write) -> Result<(), CliError> {
    let opts = OutputOptions {
        svg: false,
        db: cli.db,
        seed: cli.seed,
    };
    match &cli.command {
        Command::Simulate { pump, protocol, svg } => {
            let config = load_config(cli)?;
            let conds = conditions(&config, pump)?;
            let opts = OutputOptions { svg: *svg, ..opts };
            for path in cmd_simulate(&config, &conds, *protocol, opts, &cli.out)? {
                emit(stdout, &format!("wrote {}\n", path.display()))?;
            }
        }
        Command::Map { pump, svg } => {
            let config = load_config(cli)?;
            let conds = conditions(&config, pump)?;
            let opts = OutputOptions { svg: *svg, ..opts };
            for path in cmd_map(&config, &conds, opts, &cli.out)? {
                emit(stdout, &format!("wrote {}\n", path.display()))?;
            }
        }
        Command::Fit { datasets } => {
            let config = load_config(cli)?;
            let report = cmd_fit(&config, datasets, &cli.out)?;
            let mut text = format!(
                "converged after {} iterations, rms residual {:e}\n",
                report.iterations, report.rms_residual
            );
            for p in &report.parameters {
                let u = p.uncertainty.map_or("n/a".to_string(), |u| format!("{u:e}"));
                text.push_str(&format!(
                    "{} [{} {}] = {:e} ± {u} {}\n",
                    p.name, p.scope, p.id, p.value, p.unit
                ));
            }
            emit(stdout, &text)?;
        }
        Command::Photons {
            power_dbm,
            power_w,
            detuning_hz,
        } => {
            let config = load_config(cli)?;
            let watts = match (power_dbm, power_w) {
                (Some(dbm), _) => dbm_to_watts(*dbm),
                (None, Some(w)) => *w,
                (None, None) => return Err(CliError::Config("give --power-dbm or --power-w".into())),
            };
            let r = cmd_photons(&config, watts, *detuning_hz)?;
            emit(
                stdout,
                &format!(
                    "power_w: {:e}\ndetuning_hz: {:e}\nn_cav: {:e}\ncooperativity: {:e}\n",
                    r.power_w, r.detuning_hz, r.n_cav, r.cooperativity
                ),
            )?;
        }
        Command::Linewidth { dataset } => {
            let config = cli.config.as_ref().map(|_| load_config(cli)).transpose()?;
            let file = commands::read_dataset(dataset)?;
            let r = cmd_linewidth(&file, config.as_ref())?;
            let mut text = format!("fwhm_hz: {:e}\n", r.fwhm_hz);
            if let Some(c) = r.cooperativity {
                text.push_str(&format!("cooperativity: {c:e}\n"));
            }
            emit(stdout, &text)?;
        }
        Command::Convert { dbm, watts } => {
            let text = match (dbm, watts) {
                (Some(dbm), _) => format!("{:e} W\n", dbm_to_watts(*dbm)),
                (None, Some(w)) => {
                    let dbm = watts_to_dbm(*w).map_err(|e| CliError::Config(e.to_string()))?;
                    format!("{dbm} dBm\n")
                }
                (None, None) => return Err(CliError::Config("give --dbm or --watts".into())),
            };
            emit(stdout, &text)?;
        }
    }
    Ok(())
}
