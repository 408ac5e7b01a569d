use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::units::SPEED_OF_LIGHT_NM_PER_PS;

pub const DEFAULT_WAVELENGTH_NM: f64 = 900.0;

/// Measured device characteristics together with the rates they imply.
///
/// `kappa`, `gamma` and `g` are angular rates in rad/ps.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DeviceParams {
    pub q_factor: f64,
    pub purcell: f64,
    pub lifetime_ps: f64,
    pub wavelength_nm: f64,
    pub temperature_k: f64,
    pub kappa: f64,
    pub gamma: f64,
    pub g: f64,
}

/// Cavity loss, background emitter decay and cavity coupling from the
/// quality factor, Purcell factor and on-resonance lifetime.
///
/// `κ = ω_c / Q`, `γ = 1 / (F_p τ_on)` and `g = √(κ (1/τ_on − γ)) / 2`, so
/// that the on-resonance decay `4g²/κ + γ` equals `1/τ_on`.
pub fn derive_rates(q_factor: f64, purcell: f64, lifetime_ps: f64, wavelength_nm: f64) -> Result<(f64, f64, f64)> {
    for (name, v) in [
        ("device.q_factor", q_factor),
        ("device.purcell", purcell),
        ("device.lifetime_ps", lifetime_ps),
        ("device.wavelength_nm", wavelength_nm),
    ] {
        if !(v > 0.0) || !v.is_finite() {
            return Err(Error::config(name, format!("must be positive, got {v}")));
        }
    }
    let omega_c = 2.0 * std::f64::consts::PI * SPEED_OF_LIGHT_NM_PER_PS / wavelength_nm;
    let kappa = omega_c / q_factor;
    let gamma = 1.0 / (purcell * lifetime_ps);
    let total = 1.0 / lifetime_ps;
    if total <= gamma {
        return Err(Error::InconsistentDevice(format!(
            "on-resonance decay 1/τ_on = {total:.4e} /ps does not exceed background decay {gamma:.4e} /ps (Purcell factor {purcell})"
        )));
    }
    let g = (kappa * (total - gamma)).sqrt() / 2.0;
    Ok((kappa, gamma, g))
}

impl DeviceParams {
    pub fn from_measured(
        q_factor: f64,
        purcell: f64,
        lifetime_ps: f64,
        wavelength_nm: f64,
        temperature_k: f64,
    ) -> Result<Self> {
        if purcell < 1.0 {
            return Err(Error::config("device.purcell", format!("must be >= 1, got {purcell}")));
        }
        if !(temperature_k >= 0.0) {
            return Err(Error::config("device.temperature_K", "must be non-negative"));
        }
        let (kappa, gamma, g) = derive_rates(q_factor, purcell, lifetime_ps, wavelength_nm)?;
        if 4.0 * g > kappa {
            log::warn!(
                "4g = {:.4} exceeds κ = {:.4}: weak-coupling assumption is marginal",
                4.0 * g,
                kappa
            );
        }
        Ok(Self {
            q_factor,
            purcell,
            lifetime_ps,
            wavelength_nm,
            temperature_k,
            kappa,
            gamma,
            g,
        })
    }

    /// Overrides the derived coupling, e.g. to decouple the emitter.
    pub fn with_coupling(mut self, g: f64) -> Self {
        self.g = g;
        self
    }

    /// Device 1: Q = 10584, F_p = 8.25, τ_on = 66.3 ps.
    pub fn device1(temperature_k: f64) -> Self {
        Self::from_measured(10584.0, 8.25, 66.3, DEFAULT_WAVELENGTH_NM, temperature_k).expect("valid device")
    }

    /// Device 2: Q = 14652, F_p = 10.4, τ_on = 61.3 ps.
    pub fn device2(temperature_k: f64) -> Self {
        Self::from_measured(14652.0, 10.4, 61.3, DEFAULT_WAVELENGTH_NM, temperature_k).expect("valid device")
    }

    /// Device 3: Q = 6796, F_p = 7, τ_on = 70 ps.
    pub fn device3(temperature_k: f64) -> Self {
        Self::from_measured(6796.0, 7.0, 70.0, DEFAULT_WAVELENGTH_NM, temperature_k).expect("valid device")
    }

    /// Purcell-enhanced decay through a resonant cavity, `4g²/κ`.
    pub fn purcell_rate(&self) -> f64 {
        4.0 * self.g * self.g / self.kappa
    }

    /// Emitter decay with the cavity adiabatically eliminated.
    pub fn bad_cavity_decay(&self) -> f64 {
        self.gamma + self.purcell_rate()
    }
}
