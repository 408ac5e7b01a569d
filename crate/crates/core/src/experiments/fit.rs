//! One-parameter fit of the phonon coupling to a Rabi curve.

use serde::{Deserialize, Serialize};

use super::{rabi_curve, RabiCurve, SpectrumSettings};
use crate::error::{Error, Result};
use crate::model::{ModelConfig, Tier};
use crate::phonon::PhononParams;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitOptions {
    /// Bracket for `alpha_p`, ps².
    pub alpha_min: f64,
    pub alpha_max: f64,
    /// Final bracket width relative to the initial one.
    pub rel_tol: f64,
    pub max_iter: usize,
    /// Central-peak window, GHz.
    pub window_ghz: f64,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            alpha_min: 0.0,
            alpha_max: 0.02,
            rel_tol: 5e-3,
            max_iter: 60,
            window_ghz: super::DEFAULT_CENTRAL_WINDOW_GHZ,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitStep {
    pub alpha_p: f64,
    pub residual: f64,
    /// Best residual seen so far.
    pub best: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitReport {
    pub phonon: PhononParams,
    pub alpha_p: f64,
    /// Factor multiplying the simulated curve.
    pub scale: f64,
    pub residual: f64,
    pub iterations: usize,
    pub history: Vec<FitStep>,
    pub at_bound: bool,
    pub curve: RabiCurve,
}

/// Least-squares scale `s` minimising `Σ(s·sim − target)²`, with the residual.
fn scaled_residual(sim: &[f64], target: &[f64]) -> (f64, f64) {
    let ss: f64 = sim.iter().map(|v| v * v).sum();
    let st: f64 = sim.iter().zip(target).map(|(a, b)| a * b).sum();
    let s = if ss > 0.0 { st / ss } else { 0.0 };
    let r = sim.iter().zip(target).map(|(a, b)| (s * a - b).powi(2)).sum();
    (s, r)
}

/// Golden-section search over `alpha_p` with `omega_b` and the cutoff
/// frozen; the intensity scale is eliminated in closed form at each trial.
pub fn fit_phonon_coupling(
    target: &RabiCurve,
    base: &ModelConfig,
    opts: &FitOptions,
    settings: &SpectrumSettings,
) -> Result<FitReport> {
    if !(opts.alpha_min >= 0.0 && opts.alpha_max > opts.alpha_min) {
        return Err(Error::config(
            "fit.alpha_max",
            "bracket must satisfy 0 ≤ alpha_min < alpha_max",
        ));
    }
    if target.areas.len() < 2 {
        return Err(Error::config("fit.target", "needs at least two amplitudes"));
    }
    let template = base.phonon.clone().unwrap_or_default();
    let params = |alpha: f64| PhononParams {
        alpha_p: alpha,
        temperature_k: base.device.temperature_k,
        ..template.clone()
    };
    let simulate = |alpha: f64| -> Result<(f64, f64, RabiCurve)> {
        let cfg = ModelConfig {
            tier: Tier::FullPlusPhonons,
            phonon: Some(params(alpha)),
            ..base.clone()
        };
        let curve = rabi_curve(&cfg, &target.areas, opts.window_ghz, settings)?;
        let (s, r) = scaled_residual(&curve.intensity, &target.intensity);
        log::debug!("alpha_p = {alpha:.6} ps²: residual {r:.6e}");
        Ok((s, r, curve))
    };

    let mut history: Vec<FitStep> = Vec::new();
    let mut best: Option<(f64, f64, f64, RabiCurve)> = None;
    let mut eval = |alpha: f64, history: &mut Vec<FitStep>| -> Result<f64> {
        let (s, r, curve) = simulate(alpha)?;
        if best.as_ref().is_none_or(|b| r < b.2) {
            best = Some((alpha, s, r, curve));
        }
        let b = best.as_ref().map_or(r, |b| b.2);
        history.push(FitStep {
            alpha_p: alpha,
            residual: r,
            best: b,
        });
        Ok(r)
    };

    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let (mut a, mut b) = (opts.alpha_min, opts.alpha_max);
    let width0 = b - a;
    eval(a, &mut history)?;
    eval(b, &mut history)?;
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let mut fc = eval(c, &mut history)?;
    let mut fd = eval(d, &mut history)?;
    let mut iterations = 0;
    while b - a > opts.rel_tol * width0 {
        if iterations >= opts.max_iter {
            return Err(Error::Fit(format!(
                "bracket [{a:.3e}, {b:.3e}] not below tolerance after {iterations} iterations"
            )));
        }
        iterations += 1;
        if fc <= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = eval(c, &mut history)?;
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = eval(d, &mut history)?;
        }
    }
    let (alpha, scale, residual, curve) = best.expect("at least one evaluation");
    let edge = 0.5 * opts.rel_tol * width0;
    let at_bound = alpha - opts.alpha_min <= edge || opts.alpha_max - alpha <= edge;
    if at_bound {
        log::warn!("fitted alpha_p = {alpha:.4e} ps² lies at a bound of the search bracket");
    }
    Ok(FitReport {
        phonon: params(alpha),
        alpha_p: alpha,
        scale,
        residual,
        iterations,
        history,
        at_bound,
        curve,
    })
}
