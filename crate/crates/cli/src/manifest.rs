//! Reproducibility record written next to every set of outputs.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use dynrf::model::ModelConfig;
use dynrf::phonon::b_average;
use dynrf::units::rad_ps_to_ghz;
use dynrf::Result;

use crate::config::RunConfig;

pub const MANIFEST_FILE: &str = "manifest.json";

/// Rates implied by the device parameters, all as angular rate over 2π.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DerivedRates {
    #[serde(rename = "kappa_GHz")]
    pub kappa: f64,
    #[serde(rename = "gamma_GHz")]
    pub gamma: f64,
    #[serde(rename = "g_GHz")]
    pub g: f64,
    /// Emitter decay with the cavity eliminated, `γ + 4g²/κ`.
    #[serde(rename = "bad_cavity_decay_GHz")]
    pub bad_cavity_decay: f64,
    /// Thermal phonon displacement ⟨B⟩ at the device temperature; 1 without phonons.
    pub b_avg: f64,
}

impl DerivedRates {
    pub fn new(cfg: &ModelConfig) -> Result<Self> {
        let d = &cfg.device;
        let b_avg = match cfg.active_phonons() {
            Some(p) => b_average(&p)?,
            None => 1.0,
        };
        Ok(Self {
            kappa: rad_ps_to_ghz(d.kappa),
            gamma: rad_ps_to_ghz(d.gamma),
            g: rad_ps_to_ghz(d.g),
            bad_cavity_decay: rad_ps_to_ghz(d.bad_cavity_decay()),
            b_avg,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    pub command: String,
    /// Fully resolved input; feeding the manifest back as a config reruns it.
    pub config: RunConfig,
    pub derived: DerivedRates,
    /// End of the simulated window, ps.
    pub t_end_ps: f64,
    /// Hex SHA-256 of the config file as read.
    pub config_sha256: String,
    pub duration_s: f64,
    /// Files written, relative to the output directory.
    pub outputs: Vec<String>,
    /// Modelling choices a reader of the outputs should know about.
    pub notes: Vec<String>,
}

impl RunManifest {
    pub fn new(command: &str, config: &RunConfig, input: &[u8]) -> Result<Self> {
        let model = config.model_config()?;
        let settings = config.settings()?;
        let mut notes = vec![format!(
            "detector response: {} ps Gaussian plus {}% exponential tail of {} ps",
            config.irf.fast_fwhm_ps,
            100.0 * config.irf.slow_weight,
            config.irf.slow_tau_ps
        )];
        match config.grid.spectrometer_fwhm {
            Some(w) => notes.push(format!(
                "spectra convolved with a {w} GHz FWHM Gaussian spectrometer response"
            )),
            None => notes.push("spectra not convolved with a spectrometer response".into()),
        }
        if model.active_phonons().is_some() {
            notes.push(
                "phonons: second-order polaron master equation, super-Ohmic spectral density \
                 alpha_p·ω³·exp(−ω²/2ω_b²), memory kernel evaluated with the instantaneous system Hamiltonian"
                    .into(),
            );
        }
        Ok(Self {
            tool: env!("CARGO_PKG_NAME").to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            command: command.to_string(),
            config: config.clone(),
            derived: DerivedRates::new(&model)?,
            t_end_ps: settings.t_end(&model),
            config_sha256: hex::encode(Sha256::digest(input)),
            duration_s: 0.0,
            outputs: Vec::new(),
            notes,
        })
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(|e| dynrf::Error::Serialization(e.to_string()))
    }

    #[cfg(test)]
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| dynrf::Error::Serialization(e.to_string()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::from_toml;

    #[test]
    fn manifest_round_trips_exactly() {
        let text = r#"
            [model]
            tier = "C"
            [device]
            preset = "device2"
            temperature_K = 19.0
            [pulse]
            kind = "gaussian"
            area_pi = 5.5
            fwhm_ps = 54.0
            [detunings_GHz]
            exciton = -15.0
        "#;
        let cfg = from_toml(text).unwrap().resolve().unwrap();
        let mut m = RunManifest::new("spectrum", &cfg, text.as_bytes()).unwrap();
        m.duration_s = 12.345_678_901_234_567;
        m.outputs.push("spectrum.csv".into());
        let back = RunManifest::from_json(&m.to_json().unwrap()).unwrap();
        assert_eq!(back, m);
        assert_eq!(m.config_sha256.len(), 64);
        assert!(m.derived.b_avg < 1.0 && m.derived.b_avg > 0.5);
        let reparsed = crate::config::from_json(&m.to_json().unwrap())
            .unwrap()
            .resolve()
            .unwrap();
        assert_eq!(reparsed, cfg);
    }
}
