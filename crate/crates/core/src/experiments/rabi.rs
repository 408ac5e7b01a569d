//! Central-peak intensity as a function of pulse area.

use serde::{Deserialize, Serialize};

use super::{detect_peaks, SpectrumSettings, DEFAULT_PROMINENCE};
use crate::correlations::{band_integral, spectrum, two_time_correlation, CorrelationGrid};
use crate::error::{Error, Result};
use crate::model::{calibrate_area, ModelConfig};
use crate::parallel;
use crate::units::ghz_to_rad_ps;

pub const DEFAULT_CENTRAL_WINDOW_GHZ: f64 = 5.0;

/// Sampled Rabi curve with its turning points.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RabiCurve {
    /// Effective pulse areas, π.
    pub areas: Vec<f64>,
    pub intensity: Vec<f64>,
    /// Interpolated areas of interior maxima and minima.
    pub maxima: Vec<f64>,
    pub minima: Vec<f64>,
    /// Mean spacing of successive maxima, π.
    pub period: Option<f64>,
    /// Decay rate of the contrast per unit area.
    pub damping: Option<f64>,
}

/// Vertex of the parabola through three points.
fn vertex(x: [f64; 3], y: [f64; 3]) -> (f64, f64) {
    let d1 = (y[1] - y[0]) / (x[1] - x[0]);
    let d2 = (y[2] - y[1]) / (x[2] - x[1]);
    let a = (d2 - d1) / (x[2] - x[0]);
    if a == 0.0 {
        return (x[1], y[1]);
    }
    let b = d1 - a * (x[0] + x[1]);
    let xv = (-b / (2.0 * a)).clamp(x[0], x[2]);
    let yv = y[0] + (xv - x[0]) * (d1 + a * (xv - x[1]));
    (xv, yv)
}

impl RabiCurve {
    /// Builds the curve and locates its interior extrema.
    pub fn from_samples(areas: Vec<f64>, intensity: Vec<f64>) -> Result<Self> {
        if areas.is_empty() || areas.len() != intensity.len() {
            return Err(Error::config(
                "rabi",
                "need matching, non-empty amplitude and intensity columns",
            ));
        }
        if areas.iter().chain(&intensity).any(|v| !v.is_finite()) {
            return Err(Error::config("rabi", "values must be finite"));
        }
        if areas.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::config(
                "rabi.amplitude",
                "amplitudes must be strictly increasing; sort the rows",
            ));
        }
        let mut maxima = Vec::new();
        let mut minima = Vec::new();
        let mut max_vals = Vec::new();
        let mut min_vals = Vec::new();
        for i in 1..areas.len().saturating_sub(1) {
            let (a, b, c) = (intensity[i - 1], intensity[i], intensity[i + 1]);
            let x = [areas[i - 1], areas[i], areas[i + 1]];
            if b > a && b >= c {
                let (xv, yv) = vertex(x, [a, b, c]);
                maxima.push(xv);
                max_vals.push(yv);
            } else if b < a && b <= c {
                let (xv, yv) = vertex(x, [a, b, c]);
                minima.push(xv);
                min_vals.push(yv);
            }
        }
        let period = (maxima.len() >= 2).then(|| (maxima[maxima.len() - 1] - maxima[0]) / (maxima.len() - 1) as f64);
        let contrast = Self::contrasts(&maxima, &max_vals, &minima, &min_vals);
        let damping = (contrast.len() >= 2).then(|| {
            let pts: Vec<(f64, f64)> = contrast
                .iter()
                .filter(|c| c.1 > 0.0)
                .map(|&(x, c)| (x, c.ln()))
                .collect();
            let n = pts.len() as f64;
            let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
            let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
            let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
            let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
            if sxx > 0.0 {
                -sxy / sxx
            } else {
                0.0
            }
        });
        Ok(Self {
            areas,
            intensity,
            maxima,
            minima,
            period,
            damping,
        })
    }

    /// `(area of maximum, (max − next min)/(max + next min))` pairs.
    fn contrasts(maxima: &[f64], max_vals: &[f64], minima: &[f64], min_vals: &[f64]) -> Vec<(f64, f64)> {
        let mut out = Vec::new();
        for (x, v) in maxima.iter().zip(max_vals) {
            if let Some(j) = minima.iter().position(|m| m > x) {
                let lo = min_vals[j];
                if v + lo > 0.0 {
                    out.push((*x, (v - lo) / (v + lo)));
                }
            }
        }
        out
    }

    /// Contrast of each maximum against the following minimum.
    pub fn contrast(&self) -> Vec<(f64, f64)> {
        let pick = |xs: &[f64]| -> Vec<f64> { xs.iter().map(|&x| self.interpolate(x)).collect() };
        Self::contrasts(&self.maxima, &pick(&self.maxima), &self.minima, &pick(&self.minima))
    }

    /// Whether a maximum beyond `area` is followed by a minimum with at
    /// least `min_contrast`, or vice versa.
    pub fn oscillates_beyond(&self, area: f64, min_contrast: f64) -> bool {
        let mut ext: Vec<(f64, f64)> = self
            .maxima
            .iter()
            .chain(&self.minima)
            .map(|&x| (x, self.interpolate(x)))
            .collect();
        ext.sort_by(|a, b| a.0.total_cmp(&b.0));
        ext.windows(2).any(|w| {
            let (hi, lo) = if w[0].1 > w[1].1 {
                (w[0].1, w[1].1)
            } else {
                (w[1].1, w[0].1)
            };
            w[1].0 > area && hi + lo > 0.0 && (hi - lo) / (hi + lo) >= min_contrast
        })
    }

    /// Linear interpolation of the sampled intensity.
    pub fn interpolate(&self, area: f64) -> f64 {
        let a = &self.areas;
        match a.iter().position(|&x| x >= area) {
            Some(0) => self.intensity[0],
            Some(i) => {
                let f = (area - a[i - 1]) / (a[i] - a[i - 1]);
                self.intensity[i - 1] * (1.0 - f) + self.intensity[i] * f
            }
            None => *self.intensity.last().expect("non-empty"),
        }
    }
}

/// Spectral weight within `±half_window` (rad/ps) of the laser.
pub fn central_intensity(corr: &CorrelationGrid, half_window: f64) -> f64 {
    band_integral(corr, -half_window, half_window)
}

/// Central-peak intensity at each effective area (π) of `base`'s pulse.
pub fn rabi_curve(
    base: &ModelConfig,
    areas: &[f64],
    window_ghz: f64,
    settings: &SpectrumSettings,
) -> Result<RabiCurve> {
    if !(window_ghz > 0.0) {
        return Err(Error::config("rabi.window_GHz", "must be positive"));
    }
    let half = ghz_to_rad_ps(window_ghz);
    let omega = settings.omega()?;
    let intensity = parallel::try_map(settings.exec, areas.len(), |i| {
        let mut cfg = base.clone();
        calibrate_area(&mut cfg, areas[i])?;
        let corr = two_time_correlation(&cfg, &settings.correlation_spec(&cfg))?;
        let peaks = detect_peaks(&spectrum(&corr, &omega), DEFAULT_PROMINENCE);
        if peaks
            .peaks
            .iter()
            .any(|p| p.center.abs() > 0.5 * window_ghz && p.center.abs() < window_ghz)
        {
            log::warn!(
                "central window ±{window_ghz} GHz overlaps a side peak at area {}π",
                areas[i]
            );
        }
        Ok(central_intensity(&corr, half).max(0.0))
    })?;
    RabiCurve::from_samples(areas.to_vec(), intensity)
}
