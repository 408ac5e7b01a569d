//! Unit conversions and physical constants.
//!
//! Internally every frequency is an angular frequency in rad/ps and every time
//! is in ps. User-facing quantities are ordinary frequencies in GHz.

use std::f64::consts::PI;

/// Speed of light in nm/ps.
pub const SPEED_OF_LIGHT_NM_PER_PS: f64 = 299_792.458;

/// Boltzmann constant over reduced Planck constant, in rad/(ps K).
pub const KB_OVER_HBAR: f64 = 1.380_649e-23 / 1.054_571_817e-34 * 1e-12;

/// GHz (ordinary) to rad/ps.
#[inline]
pub fn ghz_to_rad_ps(f_ghz: f64) -> f64 {
    2.0 * PI * f_ghz * 1e-3
}

/// rad/ps to GHz (ordinary).
#[inline]
pub fn rad_ps_to_ghz(w: f64) -> f64 {
    w / (2.0 * PI) * 1e3
}

/// THz (ordinary) to rad/ps.
#[inline]
pub fn thz_to_rad_ps(f_thz: f64) -> f64 {
    2.0 * PI * f_thz
}

/// Thermal angular frequency k_B T / hbar in rad/ps.
#[inline]
pub fn thermal_frequency(temperature_k: f64) -> f64 {
    KB_OVER_HBAR * temperature_k
}

/// Gaussian standard deviation from a full width at half maximum.
#[inline]
pub fn fwhm_to_sigma(fwhm: f64) -> f64 {
    fwhm / (2.0 * (2.0 * std::f64::consts::LN_2).sqrt())
}
