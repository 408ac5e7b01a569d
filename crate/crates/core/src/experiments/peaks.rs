//! Local maxima of a spectrum with prominence and width.

use serde::{Deserialize, Serialize};

use crate::correlations::SpectrumResult;
use crate::units::rad_ps_to_ghz;

/// Minimum prominence, as a fraction of the global maximum.
pub const DEFAULT_PROMINENCE: f64 = 0.02;

/// Lower threshold for weak sidebands next to a dominant post-pulse line.
pub const SIDEBAND_PROMINENCE: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Peak {
    /// GHz from the laser.
    pub center: f64,
    pub height: f64,
    pub prominence: f64,
    /// Width at half prominence, GHz.
    pub fwhm: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct PeakList {
    /// Sorted by centre.
    pub peaks: Vec<Peak>,
}

impl PeakList {
    pub fn len(&self) -> usize {
        self.peaks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.peaks.is_empty()
    }

    /// Peak nearest to `center_ghz`, if any lies within `tol_ghz`.
    pub fn near(&self, center_ghz: f64, tol_ghz: f64) -> Option<&Peak> {
        self.peaks
            .iter()
            .filter(|p| (p.center - center_ghz).abs() <= tol_ghz)
            .min_by(|a, b| (a.center - center_ghz).abs().total_cmp(&(b.center - center_ghz).abs()))
    }

    /// Peaks with `sign·(center − reference) > guard`, nearest first.
    pub fn side(&self, reference: f64, sign: f64, guard: f64) -> Vec<Peak> {
        let mut v: Vec<Peak> = self
            .peaks
            .iter()
            .filter(|p| sign * (p.center - reference) > guard)
            .copied()
            .collect();
        v.sort_by(|a, b| (a.center - reference).abs().total_cmp(&(b.center - reference).abs()));
        v
    }

    /// Highest peak.
    pub fn tallest(&self) -> Option<&Peak> {
        self.peaks.iter().max_by(|a, b| a.height.total_cmp(&b.height))
    }
}

/// Linear interpolation of the spectrum at `omega` (rad/ps); 0 outside the grid.
pub fn value_at(s: &SpectrumResult, omega: f64) -> f64 {
    let w = &s.omega;
    if w.len() < 2 || omega < w[0] || omega > w[w.len() - 1] {
        return 0.0;
    }
    let h = w[1] - w[0];
    let x = (omega - w[0]) / h;
    let i = (x.floor() as usize).min(w.len() - 2);
    let f = x - i as f64;
    s.intensity[i] * (1.0 - f) + s.intensity[i + 1] * f
}

/// Strict interior maxima whose prominence reaches `prominence_frac·max(S)`.
///
/// Prominence is the drop to the higher of the two lowest points met before
/// a taller sample (or the grid edge) on either side. Centres are refined by
/// a parabola through three samples and widths measured at half prominence
/// by linear interpolation.
pub fn detect_peaks(s: &SpectrumResult, prominence_frac: f64) -> PeakList {
    let y = &s.intensity;
    let n = y.len();
    if n < 3 {
        return PeakList::default();
    }
    let gmax = y.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !(gmax > 0.0) {
        return PeakList::default();
    }
    let h = s.bin();
    let threshold = prominence_frac * gmax;
    let mut peaks = Vec::new();
    for i in 1..n - 1 {
        if !(y[i] > y[i - 1] && y[i] > y[i + 1]) {
            continue;
        }
        let mut left_min = y[i];
        let mut j = i;
        while j > 0 {
            j -= 1;
            if y[j] > y[i] {
                break;
            }
            left_min = left_min.min(y[j]);
        }
        let mut right_min = y[i];
        let mut j = i;
        while j + 1 < n {
            j += 1;
            if y[j] > y[i] {
                break;
            }
            right_min = right_min.min(y[j]);
        }
        let prominence = y[i] - left_min.max(right_min);
        if prominence < threshold || prominence <= 0.0 {
            continue;
        }
        let (a, b, c) = (y[i - 1], y[i], y[i + 1]);
        let denom = a - 2.0 * b + c;
        let shift = if denom != 0.0 { 0.5 * (a - c) / denom } else { 0.0 };
        let center = s.omega[i] + shift * h;
        let level = y[i] - 0.5 * prominence;
        let mut l = i;
        while l > 0 && y[l - 1] > level {
            l -= 1;
        }
        let left = if l == 0 {
            s.omega[0]
        } else {
            s.omega[l - 1] + h * (level - y[l - 1]) / (y[l] - y[l - 1])
        };
        let mut r = i;
        while r + 1 < n && y[r + 1] > level {
            r += 1;
        }
        let right = if r + 1 == n {
            s.omega[n - 1]
        } else {
            s.omega[r] + h * (y[r] - level) / (y[r] - y[r + 1])
        };
        peaks.push(Peak {
            center: rad_ps_to_ghz(center),
            height: y[i],
            prominence,
            fwhm: rad_ps_to_ghz(right - left),
        });
    }
    PeakList { peaks }
}
