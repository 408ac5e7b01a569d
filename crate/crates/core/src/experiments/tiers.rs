//! The same amplitude sweep under the three model tiers.

use serde::{Deserialize, Serialize};

use super::{detect_peaks, run_sweep, value_at, SpectrumSettings, SweepAxis, SweepSpec, SIDEBAND_PROMINENCE};
use crate::correlations::SpectrumResult;
use crate::error::Result;
use crate::model::{ModelConfig, Tier};
use crate::units::ghz_to_rad_ps;

/// Height of the outermost detected peak on the `sign` side of the laser
/// over the spectrum at the mirrored detuning. Peaks within `guard_ghz` of
/// the laser are ignored; `prominence_frac` is passed to [`detect_peaks`].
pub fn mirror_ratio(s: &SpectrumResult, sign: f64, guard_ghz: f64, prominence_frac: f64) -> Option<f64> {
    let peaks = detect_peaks(s, prominence_frac);
    let outer = peaks.side(0.0, sign, guard_ghz).last().copied()?;
    let w = ghz_to_rad_ps(outer.center);
    let mirror = value_at(s, -w);
    (mirror > 0.0).then(|| value_at(s, w) / mirror)
}

/// `‖a − b‖₂ / ‖b‖₂` over stacked spectra.
pub fn relative_l2(a: &[SpectrumResult], b: &[SpectrumResult]) -> f64 {
    let mut num = 0.0;
    let mut den = 0.0;
    for (x, y) in a.iter().zip(b) {
        for (u, v) in x.intensity.iter().zip(&y.intensity) {
            num += (u - v).powi(2);
            den += v * v;
        }
    }
    if den > 0.0 {
        (num / den).sqrt()
    } else {
        num.sqrt()
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TierRun {
    pub tier: Tier,
    pub spectra: Vec<SpectrumResult>,
    /// Cavity-side outer-peak mirror ratio per sweep value.
    pub asymmetry: Vec<Option<f64>>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TierComparison {
    pub areas: Vec<f64>,
    pub runs: Vec<TierRun>,
    /// Relative L2 distance between the tier-C and tier-B maps.
    pub phonon_difference: f64,
}

/// Runs tiers A, B and C over an amplitude sweep of `base`.
pub fn tier_comparison(base: &ModelConfig, areas: &[f64], settings: &SpectrumSettings) -> Result<TierComparison> {
    let sign = if base.cavity_detuning < 0.0 { -1.0 } else { 1.0 };
    let guard = 2.0;
    let mut runs = Vec::new();
    for tier in [Tier::BadCavity, Tier::FullQuantum, Tier::FullPlusPhonons] {
        let mut cfg = base.clone();
        cfg.tier = tier;
        cfg.phonon = match tier {
            Tier::FullPlusPhonons => Some(base.phonon.clone().unwrap_or_default()),
            _ => None,
        };
        let spec = SweepSpec {
            axis: SweepAxis::Amplitude,
            values: areas.to_vec(),
            base: cfg,
        };
        let spectra = run_sweep(&spec, settings)?;
        let asymmetry = spectra
            .iter()
            .map(|s| mirror_ratio(s, sign, guard, SIDEBAND_PROMINENCE))
            .collect();
        runs.push(TierRun {
            tier,
            spectra,
            asymmetry,
        });
    }
    let phonon_difference = relative_l2(&runs[2].spectra, &runs[1].spectra);
    Ok(TierComparison {
        areas: areas.to_vec(),
        runs,
        phonon_difference,
    })
}
