//! Incoherent emission spectra from the sampled correlation triangle.

use serde::{Deserialize, Serialize};

use super::CorrelationGrid;
use crate::error::{Error, Result};
use crate::qcore::{C64, ZERO};

/// Long-time spectrum on a detuning grid relative to the laser.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectrumResult {
    /// rad/ps, symmetric about 0.
    pub omega: Vec<f64>,
    pub intensity: Vec<f64>,
    pub map: Option<SpectrumMap>,
}

/// Time-resolved spectrum `S(ω, t)`, one row per time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectrumMap {
    pub times: Vec<f64>,
    pub values: Vec<Vec<f64>>,
}

impl SpectrumResult {
    pub fn max(&self) -> f64 {
        self.intensity.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    /// Grid spacing, rad/ps.
    pub fn bin(&self) -> f64 {
        match self.omega.as_slice() {
            [a, b, ..] => b - a,
            _ => 0.0,
        }
    }

    /// Trapezoidal `∫S dω` over the grid.
    pub fn integral(&self) -> f64 {
        self.omega
            .windows(2)
            .zip(self.intensity.windows(2))
            .map(|(w, s)| 0.5 * (w[1] - w[0]) * (s[0] + s[1]))
            .sum()
    }
}

/// `2n + 1` points `k·bin`, `|k| ≤ n`, with `n = round(half_width / bin)`.
pub fn omega_grid(half_width: f64, bin: f64) -> Result<Vec<f64>> {
    if !(bin > 0.0 && half_width >= 0.0 && bin.is_finite() && half_width.is_finite()) {
        return Err(Error::config("spectrum", "window and bin must be positive"));
    }
    let n = (half_width / bin).round() as i64;
    Ok((-n..=n).map(|k| k as f64 * bin).collect())
}

/// Fails when the stored delays cannot resolve `resolution` (rad/ps).
pub fn check_resolution(corr: &CorrelationGrid, resolution: f64) -> Result<()> {
    let span = corr.tau_span();
    if span <= 0.0 || std::f64::consts::TAU / span > resolution {
        return Err(Error::numerics(
            "spectrum",
            format!(
                "delay window {span:.1} ps resolves only {:.3} rad/ps, coarser than the requested {resolution:.3} rad/ps",
                std::f64::consts::TAU / span.max(f64::MIN_POSITIVE)
            ),
        ));
    }
    Ok(())
}

/// Quadrature-weighted delay coefficients for the window `[0, t′_n]`.
///
/// Each t′ sample carries the full step `Δt′`; along τ the origin carries
/// half a step and every later sample a full one. With `Δt′ = Δτ` this makes
/// the discrete spectrum a Hermitian quadratic form of the sampled field,
/// hence non-negative, and keeps the origin weighting exact for the
/// frequency sum rule.
fn delay_coefficients(corr: &CorrelationGrid, n: usize) -> Vec<C64> {
    let r = corr.stride();
    let last = corr.rows.len().saturating_sub(1).min(n);
    let width = corr.rows.iter().take(last + 1).map(Vec::len).max().unwrap_or(0);
    let mut c = vec![ZERO; width];
    for (i, row) in corr.rows.iter().enumerate().take(last + 1) {
        let len = row.len().min((n - i) * r + 1);
        c[0] += row[0] * (0.5 * corr.dtau);
        for j in 1..len {
            c[j] += row[j] * corr.dtau;
        }
    }
    for v in &mut c {
        *v *= corr.dt_prime;
    }
    c
}

/// Coefficients of the long-time spectrum: the whole triangle plus the
/// stationary continuation when one was computed.
fn long_time_coefficients(corr: &CorrelationGrid) -> Vec<C64> {
    let n = corr.rows.len().saturating_sub(1);
    let mut c = delay_coefficients(corr, n);
    if c.len() < corr.tail.len() {
        c.resize(corr.tail.len(), ZERO);
    }
    let w = corr.dt_prime * corr.dtau;
    for (j, (cj, t)) in c.iter_mut().zip(&corr.tail).enumerate() {
        *cj += t * if j == 0 { 0.5 * w } else { w };
    }
    c
}

fn transform(coeffs: &[C64], dtau: f64, omega: &[f64]) -> Vec<f64> {
    omega
        .iter()
        .map(|&w| {
            let mut acc = 0.0;
            for (j, c) in coeffs.iter().enumerate() {
                let (s, co) = (w * j as f64 * dtau).sin_cos();
                acc += c.re * co - c.im * s;
            }
            acc
        })
        .collect()
}

/// Long-time spectrum `S(ω) = Re Σ g(t′,τ) e^{iωτ}` over the whole triangle,
/// with delays past `t_end` taken from the stationary continuation if present.
pub fn spectrum(corr: &CorrelationGrid, omega: &[f64]) -> SpectrumResult {
    SpectrumResult {
        omega: omega.to_vec(),
        intensity: transform(&long_time_coefficients(corr), corr.dtau, omega),
        map: None,
    }
}

/// Spectrum accumulated up to `t′_n` with delays cut at `t_end`.
pub fn spectrum_at(corr: &CorrelationGrid, omega: &[f64], n: usize) -> Vec<f64> {
    transform(&delay_coefficients(corr, n), corr.dtau, omega)
}

/// `S(ω, t)` at every `every`-th t′ sample (always including the last).
pub fn time_resolved_map(corr: &CorrelationGrid, omega: &[f64], every: usize) -> SpectrumMap {
    let m = corr.rows.len();
    let every = every.max(1);
    let mut idx: Vec<usize> = (0..m).step_by(every).collect();
    if idx.last() != Some(&(m - 1)) {
        idx.push(m - 1);
    }
    SpectrumMap {
        times: idx.iter().map(|&i| corr.t_prime[i]).collect(),
        values: idx.iter().map(|&i| spectrum_at(corr, omega, i)).collect(),
    }
}

/// Exact `∫_lo^hi S(ω) dω` of the long-time spectrum, evaluated in the delay
/// domain.
pub fn band_integral(corr: &CorrelationGrid, lo: f64, hi: f64) -> f64 {
    let c = long_time_coefficients(corr);
    let mut acc = c.first().map_or(0.0, |c0| c0.re * (hi - lo));
    for (j, cj) in c.iter().enumerate().skip(1) {
        let tau = j as f64 * corr.dtau;
        // ∫ e^{iωτ} dω = (e^{i·hi·τ} − e^{i·lo·τ}) / (iτ)
        let v = (C64::from_polar(1.0, hi * tau) - C64::from_polar(1.0, lo * tau)) / C64::new(0.0, tau);
        acc += (cj * v).re;
    }
    acc
}
