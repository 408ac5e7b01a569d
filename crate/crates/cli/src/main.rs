//! `dynrf`: spectra, sweeps, filtered traces and phonon fits from a config file.
//!
//! Exit codes: 0 success, 2 configuration or usage error, 3 numerical
//! failure, 4 I/O error.

// Negated comparisons reject NaN along with out-of-range values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod commands;
mod config;
mod manifest;
mod output;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use dynrf::experiments::SweepAxis;
use dynrf::model::Tier;
use dynrf::parallel::ExecMode;
use dynrf::{Error, ErrorCategory, Result};

use commands::Context;
use config::SweepSection;

/// RK4 step used by `--fixed-step` without a value, ps.
const DEFAULT_FIXED_STEP_PS: &str = "0.1";

#[derive(Parser)]
#[command(
    name = "dynrf",
    version,
    about = "Pulsed resonance fluorescence of a cavity-coupled emitter"
)]
struct Cli {
    /// Directory that receives every output file.
    #[arg(long, global = true, default_value = ".")]
    output_dir: PathBuf,
    /// Worker threads for parallel stages; 1 runs everything sequentially.
    #[arg(long, global = true)]
    jobs: Option<usize>,
    /// Fixed-step RK4 (optionally with the step in ps) for bit-reproducible runs.
    #[arg(long, global = true, value_name = "STEP_PS", num_args = 0..=1,
          default_missing_value = DEFAULT_FIXED_STEP_PS)]
    fixed_step: Option<f64>,
    /// Reserved; the simulator uses no random numbers.
    #[arg(long, global = true, hide = true)]
    seedless: bool,
    /// More log output (-v info, -vv debug).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum TierArg {
    A,
    B,
    C,
}

impl From<TierArg> for Tier {
    fn from(t: TierArg) -> Self {
        match t {
            TierArg::A => Tier::BadCavity,
            TierArg::B => Tier::FullQuantum,
            TierArg::C => Tier::FullPlusPhonons,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum AxisArg {
    Amplitude,
    LaserDetuning,
    CavityDetuning,
    PulseWidth,
}

impl From<AxisArg> for SweepAxis {
    fn from(a: AxisArg) -> Self {
        match a {
            AxisArg::Amplitude => SweepAxis::Amplitude,
            AxisArg::LaserDetuning => SweepAxis::LaserDetuning,
            AxisArg::CavityDetuning => SweepAxis::CavityDetuning,
            AxisArg::PulseWidth => SweepAxis::PulseWidth,
        }
    }
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Switch {
    On,
    Off,
}

#[derive(Subcommand)]
enum Command {
    /// Long-time incoherent spectrum of one configuration.
    Spectrum {
        config: PathBuf,
        #[arg(long, ignore_case = true)]
        tier: Option<TierArg>,
        /// Also write the time-resolved spectrum S(ω, t).
        #[arg(long)]
        time_resolved: bool,
    },
    /// One spectrum per value of a swept parameter.
    Sweep {
        config: PathBuf,
        #[arg(long)]
        axis: Option<AxisArg>,
        /// Comma-separated list or `start:stop:step` (inclusive).
        #[arg(long)]
        values: Option<String>,
        #[arg(long)]
        tier: Option<TierArg>,
    },
    /// Intensity behind a Lorentzian filter, with and without the detector response.
    TimeTrace {
        config: PathBuf,
        #[arg(long = "filter-center-GHz", allow_negative_numbers = true)]
        filter_center: Option<f64>,
        #[arg(long = "filter-fwhm-GHz")]
        filter_fwhm: Option<f64>,
        #[arg(long, value_enum, default_value = "on")]
        irf: Switch,
    },
    /// Fits the phonon coupling to a measured central-peak Rabi curve.
    FitRabi {
        config: PathBuf,
        /// CSV with amplitude (π) and intensity columns.
        #[arg(long)]
        target: PathBuf,
        /// Upper end of the alpha_p bracket, ps².
        #[arg(long)]
        alpha_max: Option<f64>,
    },
    /// The same amplitude sweep under tiers A, B and C.
    Tiers {
        config: PathBuf,
        #[arg(long)]
        values: Option<String>,
    },
}

/// Parses `a,b,c` or `start:stop:step` with the stop value included.
fn parse_values(text: &str) -> Result<Vec<f64>> {
    let err = |m: String| Error::config("--values", m);
    let num = |s: &str| {
        s.trim()
            .parse::<f64>()
            .map_err(|_| err(format!("`{s}` is not a number")))
    };
    if text.contains(':') {
        let parts: Vec<&str> = text.split(':').collect();
        let [a, b, h] = parts.as_slice() else {
            return Err(err("ranges are written start:stop:step".into()));
        };
        let (a, b, h) = (num(a)?, num(b)?, num(h)?);
        if !(h > 0.0) || !(b >= a) {
            return Err(err("need step > 0 and stop ≥ start".into()));
        }
        let n = ((b - a) / h + 1e-9).floor() as usize;
        return Ok((0..=n).map(|k| a + k as f64 * h).collect());
    }
    text.split(',').filter(|s| !s.trim().is_empty()).map(num).collect()
}

fn override_sweep(cfg: &mut config::RunConfig, axis: Option<AxisArg>, values: Option<&str>) -> Result<()> {
    let values = values.map(parse_values).transpose()?;
    match (&mut cfg.sweep, axis, values) {
        (Some(s), a, v) => {
            if let Some(a) = a {
                s.axis = a.into();
            }
            if let Some(v) = v {
                s.values = v;
            }
        }
        (None, a, Some(values)) => {
            cfg.sweep = Some(SweepSection {
                axis: a.map_or(SweepAxis::Amplitude, Into::into),
                values,
            })
        }
        (None, _, None) => {}
    }
    Ok(())
}

fn load(path: &Path, cli: &Cli) -> Result<(config::RunConfig, Vec<u8>)> {
    let (mut cfg, bytes) = config::load(path)?;
    if let Some(step) = cli.fixed_step {
        cfg.grid.fixed_step_ps = Some(step);
    }
    Ok((cfg, bytes))
}

fn run(cli: &Cli) -> Result<()> {
    if cli.seedless {
        return Err(Error::config(
            "--seedless",
            "reserved: the simulator draws no random numbers",
        ));
    }
    let exec = match cli.jobs {
        Some(0) => return Err(Error::config("--jobs", "must be at least 1")),
        Some(1) => ExecMode::Sequential,
        Some(n) => {
            rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build_global()
                .map_err(|e| Error::config("--jobs", e.to_string()))?;
            ExecMode::Parallel
        }
        None => ExecMode::Parallel,
    };
    let context = |path: &Path, edit: &dyn Fn(&mut config::RunConfig) -> Result<()>| -> Result<Context> {
        let (mut cfg, input) = load(path, cli)?;
        edit(&mut cfg)?;
        Ok(Context {
            config: cfg.resolve()?,
            input,
            output_dir: &cli.output_dir,
            exec,
        })
    };
    match &cli.command {
        Command::Spectrum {
            config,
            tier,
            time_resolved,
        } => {
            let ctx = context(config, &|c| {
                if let Some(t) = tier {
                    c.model.tier = (*t).into();
                }
                Ok(())
            })?;
            commands::spectrum(&ctx, *time_resolved)
        }
        Command::Sweep {
            config,
            axis,
            values,
            tier,
        } => {
            let ctx = context(config, &|c| {
                if let Some(t) = tier {
                    c.model.tier = (*t).into();
                }
                override_sweep(c, *axis, values.as_deref())
            })?;
            commands::sweep(&ctx)
        }
        Command::TimeTrace {
            config,
            filter_center,
            filter_fwhm,
            irf,
        } => {
            let ctx = context(config, &|c| {
                if let Some(v) = filter_center {
                    c.filter.center = *v;
                }
                if let Some(v) = filter_fwhm {
                    c.filter.fwhm = *v;
                }
                Ok(())
            })?;
            commands::time_trace(&ctx, *irf == Switch::On)
        }
        Command::FitRabi {
            config,
            target,
            alpha_max,
        } => {
            let ctx = context(config, &|c| {
                if let Some(v) = alpha_max {
                    c.fit.alpha_max_ps2 = *v;
                }
                Ok(())
            })?;
            commands::fit_rabi(&ctx, target)
        }
        Command::Tiers { config, values } => {
            let ctx = context(config, &|c| override_sweep(c, None, values.as_deref()))?;
            commands::tiers(&ctx)
        }
    }
}

fn exit_code(e: &Error) -> u8 {
    match e.category() {
        ErrorCategory::Config => 2,
        ErrorCategory::Numerics => 3,
        ErrorCategory::Io => 4,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let kind = match e.category() {
                ErrorCategory::Config => "config error",
                ErrorCategory::Numerics => "numerics error",
                ErrorCategory::Io => "io error",
            };
            eprintln!("dynrf: {kind}: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
