//! Figure-level drivers built on single spectrum runs: parameter sweeps,
//! peak finding, Rabi curves, phonon-coupling fits and tier comparisons.

mod fit;
mod peaks;
mod rabi;
mod tiers;

use serde::{Deserialize, Serialize};

pub use fit::{fit_phonon_coupling, FitOptions, FitReport, FitStep};
pub use peaks::{detect_peaks, value_at, Peak, PeakList, DEFAULT_PROMINENCE, SIDEBAND_PROMINENCE};
pub use rabi::{central_intensity, rabi_curve, RabiCurve, DEFAULT_CENTRAL_WINDOW_GHZ};
pub use tiers::{mirror_ratio, relative_l2, tier_comparison, TierComparison, TierRun};

use crate::correlations::{
    check_resolution, omega_grid, spectrometer_convolve, spectrum, time_resolved_map, two_time_correlation,
    CorrelationGrid, CorrelationSpec, Engine, SpectrumResult,
};
use crate::error::{Error, Result};
use crate::model::{calibrate_area, calibrate_cw_rabi, effective_pulse_area, ModelConfig, PulseEnvelope};
use crate::ode::Stepping;
use crate::parallel::{self, ExecMode};
use crate::units::ghz_to_rad_ps;

/// Numerical settings shared by every spectrum computed in a study.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpectrumSettings {
    pub dt_prime: f64,
    pub dtau: f64,
    pub tau_max: Option<f64>,
    /// Half width of the detuning window, rad/ps.
    pub window: f64,
    /// Detuning bin, rad/ps.
    pub bin: f64,
    /// Simulated time after the pulse centre, ps.
    pub after_pulse: f64,
    /// Simulated time for cw drive, ps.
    pub cw_duration: f64,
    /// Finest spectral feature the delay window must resolve, rad/ps.
    pub resolution: f64,
    /// Optional Gaussian spectrometer response (intensity FWHM, rad/ps).
    pub spectrometer_fwhm: Option<f64>,
    pub engine: Engine,
    pub stepping: Stepping,
    /// Emit `S(ω, t)` on every `n`-th t′ sample.
    pub map_every: Option<usize>,
    /// Continue delays past the window end with the stationary propagator.
    pub stationary_tail: bool,
    #[serde(skip)]
    pub exec: ExecMode,
}

impl Default for SpectrumSettings {
    fn default() -> Self {
        Self {
            dt_prime: 1.0,
            dtau: 0.5,
            tau_max: None,
            window: ghz_to_rad_ps(150.0),
            bin: ghz_to_rad_ps(0.25),
            after_pulse: 600.0,
            cw_duration: 600.0,
            resolution: ghz_to_rad_ps(2.0),
            spectrometer_fwhm: None,
            engine: Engine::Auto,
            stepping: Stepping::default(),
            map_every: None,
            stationary_tail: true,
            exec: ExecMode::default(),
        }
    }
}

impl SpectrumSettings {
    /// End of the simulated window, rounded up to a whole t′ step.
    pub fn t_end(&self, cfg: &ModelConfig) -> f64 {
        let raw = match &cfg.pulse {
            PulseEnvelope::Cw { .. } => self.cw_duration,
            PulseEnvelope::Gaussian { center, .. } => center + self.after_pulse,
            PulseEnvelope::Tabulated { times, .. } => times.last().copied().unwrap_or(0.0) + self.after_pulse,
        };
        (raw / self.dt_prime - 1e-9).ceil().max(1.0) * self.dt_prime
    }

    pub fn correlation_spec(&self, cfg: &ModelConfig) -> CorrelationSpec {
        CorrelationSpec {
            t_end: self.t_end(cfg),
            dt_prime: self.dt_prime,
            dtau: self.dtau,
            tau_max: self.tau_max,
            engine: self.engine,
            stepping: self.stepping,
            stationary_tail: self.stationary_tail,
            exec: self.exec,
        }
    }

    pub fn omega(&self) -> Result<Vec<f64>> {
        omega_grid(self.window, self.bin)
    }
}

/// One configuration carried through to its spectrum.
#[derive(Debug, Clone)]
pub struct SpectrumRun {
    pub config: ModelConfig,
    pub correlation: CorrelationGrid,
    pub spectrum: SpectrumResult,
}

/// Correlation, resolution check and long-time spectrum for `cfg`.
pub fn run_spectrum(cfg: &ModelConfig, settings: &SpectrumSettings) -> Result<SpectrumRun> {
    cfg.validate()?;
    let omega = settings.omega()?;
    let correlation = two_time_correlation(cfg, &settings.correlation_spec(cfg))?;
    check_resolution(&correlation, settings.resolution)?;
    let mut result = spectrum(&correlation, &omega);
    if let Some(every) = settings.map_every {
        result.map = Some(time_resolved_map(&correlation, &omega, every));
    }
    if let Some(fwhm) = settings.spectrometer_fwhm {
        result.intensity = spectrometer_convolve(&omega, &result.intensity, fwhm);
        if let Some(map) = result.map.as_mut() {
            for row in &mut map.values {
                *row = spectrometer_convolve(&omega, row, fwhm);
            }
        }
    }
    Ok(SpectrumRun {
        config: cfg.clone(),
        correlation,
        spectrum: result,
    })
}

/// Swept parameter; values are in the units noted per variant.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepAxis {
    /// Effective pulse area in π, or the effective cw Rabi frequency in GHz.
    Amplitude,
    /// Laser frequency shift in GHz; moves both detunings by the opposite amount.
    LaserDetuning,
    /// Cavity detuning from the laser in GHz.
    CavityDetuning,
    /// Gaussian FWHM in ps at the base configuration's effective area.
    PulseWidth,
}

impl SweepAxis {
    pub fn label(self) -> &'static str {
        match self {
            SweepAxis::Amplitude => "amplitude",
            SweepAxis::LaserDetuning => "laser_detuning",
            SweepAxis::CavityDetuning => "cavity_detuning",
            SweepAxis::PulseWidth => "pulse_width",
        }
    }
}

#[derive(Debug, Clone)]
pub struct SweepSpec {
    pub axis: SweepAxis,
    pub values: Vec<f64>,
    pub base: ModelConfig,
}

impl SweepSpec {
    pub fn validate(&self) -> Result<()> {
        if self.values.is_empty() {
            return Err(Error::config("sweep.values", "must not be empty"));
        }
        if self.values.iter().any(|v| !v.is_finite()) {
            return Err(Error::config("sweep.values", "must be finite"));
        }
        let up = self.values.windows(2).all(|w| w[1] > w[0]);
        let down = self.values.windows(2).all(|w| w[1] < w[0]);
        if !(up || down) {
            return Err(Error::config("sweep.values", "must be strictly monotone"));
        }
        self.base.validate()
    }

    /// Configuration of the member at `value`.
    pub fn member(&self, value: f64) -> Result<ModelConfig> {
        let mut cfg = self.base.clone();
        match self.axis {
            SweepAxis::Amplitude if cfg.pulse.is_cw() => calibrate_cw_rabi(&mut cfg, ghz_to_rad_ps(value))?,
            SweepAxis::Amplitude => calibrate_area(&mut cfg, value)?,
            SweepAxis::LaserDetuning => {
                let shift = ghz_to_rad_ps(value);
                cfg.cavity_detuning -= shift;
                cfg.exciton_detuning -= shift;
            }
            SweepAxis::CavityDetuning => cfg.cavity_detuning = ghz_to_rad_ps(value),
            SweepAxis::PulseWidth => {
                if !(value > 0.0) {
                    return Err(Error::config("sweep.values", "pulse widths must be positive"));
                }
                let area = effective_pulse_area(&self.base)?;
                cfg.pulse = PulseEnvelope::gaussian_with_area(1.0, value, None)?;
                calibrate_area(&mut cfg, area)?;
            }
        }
        Ok(cfg)
    }
}

/// One long-time spectrum per sweep value, in the order of `spec.values`.
pub fn run_sweep(spec: &SweepSpec, settings: &SpectrumSettings) -> Result<Vec<SpectrumResult>> {
    spec.validate()?;
    parallel::try_map(settings.exec, spec.values.len(), |i| {
        let value = spec.values[i];
        spec.member(value)
            .and_then(|cfg| run_spectrum(&cfg, settings))
            .map(|run| run.spectrum)
            .map_err(|e| Error::Sweep {
                axis: spec.axis.label().to_string(),
                value,
                source: Box::new(e),
            })
    })
}
