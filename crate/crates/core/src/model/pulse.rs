use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::units::fwhm_to_sigma;

/// Real, non-negative drive envelope Ω(t) in rad/ps.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum PulseEnvelope {
    /// `Ω₀ exp(−(t − t₀)² / 2σ²)` with σ from the intensity-free FWHM of Ω.
    Gaussian { amplitude: f64, fwhm: f64, center: f64 },
    /// Constant `Ω₀` switched on at `t = 0`.
    Cw { amplitude: f64 },
    /// Linear interpolation through `(t, Ω)` samples, zero outside.
    Tabulated { times: Vec<f64>, values: Vec<f64> },
}

impl PulseEnvelope {
    /// Gaussian pulse of area `area_pi · π`. The center defaults to `4σ`.
    pub fn gaussian_with_area(area_pi: f64, fwhm: f64, center: Option<f64>) -> Result<Self> {
        if !(fwhm > 0.0) {
            return Err(Error::config("pulse.fwhm_ps", "must be positive"));
        }
        if !(area_pi >= 0.0) {
            return Err(Error::config("pulse.area_pi", "must be non-negative"));
        }
        let sigma = fwhm_to_sigma(fwhm);
        let amplitude = area_pi * PI / (sigma * (2.0 * PI).sqrt());
        Ok(PulseEnvelope::Gaussian {
            amplitude,
            fwhm,
            center: center.unwrap_or(4.0 * sigma),
        })
    }

    pub fn tabulated(times: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if times.len() != values.len() || times.len() < 2 {
            return Err(Error::config("pulse.table", "need at least two (t, Ω) rows"));
        }
        if times.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::config("pulse.table", "times must be strictly increasing"));
        }
        if values.iter().any(|&v| !(v >= 0.0)) {
            return Err(Error::config("pulse.table", "Ω values must be non-negative"));
        }
        Ok(PulseEnvelope::Tabulated { times, values })
    }

    pub fn is_cw(&self) -> bool {
        matches!(self, PulseEnvelope::Cw { .. })
    }

    pub fn sigma(&self) -> Option<f64> {
        match self {
            PulseEnvelope::Gaussian { fwhm, .. } => Some(fwhm_to_sigma(*fwhm)),
            _ => None,
        }
    }

    /// Ω(t) in rad/ps.
    pub fn omega(&self, t: f64) -> f64 {
        match self {
            PulseEnvelope::Gaussian {
                amplitude,
                fwhm,
                center,
            } => {
                let s = fwhm_to_sigma(*fwhm);
                let x = (t - center) / s;
                amplitude * (-0.5 * x * x).exp()
            }
            PulseEnvelope::Cw { amplitude } => {
                if t >= 0.0 {
                    *amplitude
                } else {
                    0.0
                }
            }
            PulseEnvelope::Tabulated { times, values } => {
                let n = times.len();
                if t < times[0] || t > times[n - 1] {
                    return 0.0;
                }
                let k = times.partition_point(|&x| x <= t).clamp(1, n - 1);
                let (t0, t1) = (times[k - 1], times[k]);
                let w = (t - t0) / (t1 - t0);
                values[k - 1] * (1.0 - w) + values[k] * w
            }
        }
    }

    /// Analytic ∫Ω dt / π; `None` for continuous-wave drive.
    pub fn area_pi(&self) -> Option<f64> {
        match self {
            PulseEnvelope::Gaussian { amplitude, fwhm, .. } => {
                Some(amplitude * fwhm_to_sigma(*fwhm) * (2.0 * PI).sqrt() / PI)
            }
            PulseEnvelope::Cw { .. } => None,
            PulseEnvelope::Tabulated { times, values } => {
                let a: f64 = times
                    .windows(2)
                    .zip(values.windows(2))
                    .map(|(t, v)| 0.5 * (v[0] + v[1]) * (t[1] - t[0]))
                    .sum();
                Some(a / PI)
            }
        }
    }

    /// Peak value of Ω(t).
    pub fn peak(&self) -> f64 {
        match self {
            PulseEnvelope::Gaussian { amplitude, .. } | PulseEnvelope::Cw { amplitude } => *amplitude,
            PulseEnvelope::Tabulated { values, .. } => values.iter().copied().fold(0.0, f64::max),
        }
    }

    /// Time after which Ω(t) stays below `rel · peak` for good (`None` for cw).
    pub fn quiet_after(&self, rel: f64) -> Option<f64> {
        match self {
            PulseEnvelope::Gaussian { fwhm, center, .. } => {
                let s = fwhm_to_sigma(*fwhm);
                Some(center + s * (2.0 * (1.0 / rel).ln()).sqrt())
            }
            PulseEnvelope::Cw { .. } => None,
            PulseEnvelope::Tabulated { times, .. } => times.last().copied(),
        }
    }

    /// Nominal time at which the drive is centered.
    pub fn center(&self) -> f64 {
        match self {
            PulseEnvelope::Gaussian { center, .. } => *center,
            PulseEnvelope::Cw { .. } => 0.0,
            PulseEnvelope::Tabulated { times, values } => {
                let (mut num, mut den) = (0.0, 0.0);
                for (t, v) in times.iter().zip(values) {
                    num += t * v;
                    den += v;
                }
                if den > 0.0 {
                    num / den
                } else {
                    times[0]
                }
            }
        }
    }

    /// The same envelope with Ω multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> Self {
        match self {
            PulseEnvelope::Gaussian {
                amplitude,
                fwhm,
                center,
            } => PulseEnvelope::Gaussian {
                amplitude: amplitude * factor,
                fwhm: *fwhm,
                center: *center,
            },
            PulseEnvelope::Cw { amplitude } => PulseEnvelope::Cw {
                amplitude: amplitude * factor,
            },
            PulseEnvelope::Tabulated { times, values } => PulseEnvelope::Tabulated {
                times: times.clone(),
                values: values.iter().map(|v| v * factor).collect(),
            },
        }
    }
}
