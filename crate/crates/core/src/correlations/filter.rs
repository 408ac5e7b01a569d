//! Spectrally filtered intensity traces and detector response.

use serde::{Deserialize, Serialize};

use super::CorrelationGrid;
use crate::error::{Error, Result};
use crate::qcore::{C64, ZERO};
use crate::units::{fwhm_to_sigma, ghz_to_rad_ps};

/// Single-pole Lorentzian filter with unit peak transmission.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FilterSpec {
    /// Pass frequency relative to the laser, rad/ps.
    pub center: f64,
    /// Intensity FWHM, rad/ps.
    pub fwhm: f64,
}

impl FilterSpec {
    pub fn new(center: f64) -> Self {
        Self {
            center,
            fwhm: ghz_to_rad_ps(8.0),
        }
    }

    /// Amplitude decay rate `Γ_f = fwhm/2`.
    pub fn rate(&self) -> f64 {
        0.5 * self.fwhm
    }

    /// Amplitude transfer at detuning `omega`.
    pub fn transfer(&self, omega: f64) -> C64 {
        let g = self.rate();
        C64::new(g, 0.0) / C64::new(g, self.center - omega)
    }
}

/// Detector response: Gaussian core plus a one-sided exponential tail.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IrfSpec {
    pub fast_fwhm: f64,
    pub slow_tau: f64,
    pub slow_weight: f64,
}

impl Default for IrfSpec {
    fn default() -> Self {
        Self {
            fast_fwhm: 30.0,
            slow_tau: 350.0,
            slow_weight: 0.1,
        }
    }
}

impl IrfSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.fast_fwhm > 0.0 && self.slow_tau > 0.0) {
            return Err(Error::config("irf", "fast_fwhm_ps and slow_tau_ps must be positive"));
        }
        if !(0.0..=1.0).contains(&self.slow_weight) {
            return Err(Error::config("irf.slow_weight", "must lie in [0, 1]"));
        }
        Ok(())
    }

    /// Kernel sampled at `j·step` for `j ≥ −offset`, normalised to unit
    /// area under the rectangle rule. Returns `(offset, samples)`.
    pub fn kernel(&self, step: f64) -> Result<(usize, Vec<f64>)> {
        self.validate()?;
        let sigma = fwhm_to_sigma(self.fast_fwhm);
        let back = (6.0 * sigma / step).ceil() as usize;
        let fwd = back.max(if self.slow_weight > 0.0 {
            (12.0 * self.slow_tau / step).ceil() as usize
        } else {
            0
        });
        let norm = 1.0 / (sigma * std::f64::consts::TAU.sqrt());
        let mut k: Vec<f64> = (0..=back + fwd)
            .map(|i| {
                let t = (i as f64 - back as f64) * step;
                let fast = norm * (-0.5 * (t / sigma).powi(2)).exp();
                let slow = if t >= 0.0 {
                    (-t / self.slow_tau).exp() / self.slow_tau
                } else {
                    0.0
                };
                (1.0 - self.slow_weight) * fast + self.slow_weight * slow
            })
            .collect();
        let area: f64 = k.iter().sum::<f64>() * step;
        for v in &mut k {
            *v /= area;
        }
        Ok((back, k))
    }
}

/// Convolves a uniformly sampled signal with the detector response,
/// treating the signal as zero outside its samples.
pub fn convolve_irf(values: &[f64], step: f64, irf: &IrfSpec) -> Result<Vec<f64>> {
    let (off, k) = irf.kernel(step)?;
    let n = values.len();
    let mut out = vec![0.0; n];
    for (i, &v) in values.iter().enumerate() {
        if v == 0.0 {
            continue;
        }
        for (j, &kj) in k.iter().enumerate() {
            let idx = i as isize + j as isize - off as isize;
            if idx < 0 {
                continue;
            }
            if idx as usize >= n {
                break;
            }
            out[idx as usize] += v * kj * step;
        }
    }
    Ok(out)
}

/// Filtered intensity on the t′ grid, before and optionally after the
/// detector response.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FilteredTrace {
    pub times: Vec<f64>,
    pub intensity: Vec<f64>,
    pub convolved: Option<Vec<f64>>,
}

/// Whether `filter` lies inside a spectral window of half width `half_width`.
pub fn check_filter_window(filter: &FilterSpec, half_width: f64) -> bool {
    filter.center.abs() <= half_width
}

/// Weights of `∫₀^h e^{−Γ(h−s)} F(s) ds ≈ a·F(0) + b·F(h)` for linear `F`.
fn etd_weights(rate: f64, h: f64) -> (f64, f64, f64) {
    let u = rate * h;
    let decay = (-u).exp();
    if u < 1e-4 {
        let a = h * (0.5 - u / 3.0 + u * u / 8.0);
        let b = h * (0.5 - u / 6.0 + u * u / 24.0);
        return (decay, a, b);
    }
    let q = (-(-u).exp_m1() - u * decay) / (u * u);
    let p = -(-u).exp_m1() / u;
    (decay, h * q, h * (p - q))
}

/// `I(t) = ∫∫ h*(t−t₁) h(t−t₂) G(t₁,t₂) dt₁ dt₂` with the filter impulse
/// response `h(t) = Γ_f e^{−Γ_f t − i·center·t}`.
///
/// The carrier at the filter centre is divided out of `G` before the
/// piecewise-linear quadrature, so sampling on the t′ grid only has to
/// resolve the slow envelope of the passed light.
pub fn filtered_time_trace(
    corr: &CorrelationGrid,
    filter: &FilterSpec,
    irf: Option<&IrfSpec>,
) -> Result<FilteredTrace> {
    let gamma = filter.rate();
    if !(gamma > 0.0 && gamma.is_finite()) {
        return Err(Error::config("filter.fwhm_ghz", "must be positive"));
    }
    let m = corr.rows.len();
    let h = corr.dt_prime;
    let max_lag = corr.tau_span();
    if max_lag + 1e-9 < corr.t_end && max_lag < 10.0 / gamma {
        return Err(Error::numerics(
            "filtered_time_trace",
            format!(
                "delays up to {max_lag:.1} ps do not cover the filter memory {:.1} ps",
                10.0 / gamma
            ),
        ));
    }
    if filter.center.abs() > std::f64::consts::PI / h {
        log::warn!("filter centre beyond the t′ grid Nyquist frequency");
    }
    let w = filter.center;
    let demod = |a: usize, b: usize| -> C64 {
        match corr.two_time(a, b) {
            Some(v) => v * C64::from_polar(1.0, w * h * (b as f64 - a as f64)),
            None => ZERO,
        }
    };
    let (decay, wa, wb) = etd_weights(gamma, h);
    let mut inner = vec![ZERO; m];
    let mut intensity = vec![0.0; m];
    #[allow(clippy::needless_range_loop)]
    for n in 1..m {
        for (a, v) in inner.iter_mut().enumerate() {
            *v = *v * decay + demod(a, n - 1) * wa + demod(a, n) * wb;
        }
        let mut out = ZERO;
        let mut fac = 1.0;
        for mm in (0..n).rev() {
            out += (inner[mm] * wa + inner[mm + 1] * wb) * fac;
            fac *= decay;
        }
        intensity[n] = gamma * gamma * out.re;
    }
    let convolved = irf.map(|s| convolve_irf(&intensity, h, s)).transpose()?;
    Ok(FilteredTrace {
        times: corr.t_prime.clone(),
        intensity,
        convolved,
    })
}

/// Convolves a spectrum on a uniform grid with a Gaussian of intensity
/// FWHM `fwhm` (rad/ps), zero beyond the grid.
pub fn spectrometer_convolve(omega: &[f64], values: &[f64], fwhm: f64) -> Vec<f64> {
    if omega.len() < 2 || fwhm <= 0.0 {
        return values.to_vec();
    }
    let dw = omega[1] - omega[0];
    let sigma = fwhm_to_sigma(fwhm);
    let half = (5.0 * sigma / dw).ceil() as isize;
    let kernel: Vec<f64> = (-half..=half)
        .map(|j| (-0.5 * (j as f64 * dw / sigma).powi(2)).exp())
        .collect();
    let norm: f64 = kernel.iter().sum();
    let n = values.len() as isize;
    (0..n)
        .map(|i| {
            let mut acc = 0.0;
            for (jj, kv) in kernel.iter().enumerate() {
                let idx = i + jj as isize - half;
                if (0..n).contains(&idx) {
                    acc += kv * values[idx as usize];
                }
            }
            acc / norm
        })
        .collect()
}
