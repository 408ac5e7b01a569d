//! Run configuration as read from TOML or JSON, in GHz and ps.
//!
//! Every section is optional except `[device]` and `[pulse]`; missing values
//! take the defaults of [`Default`]. [`RunConfig::resolve`] expands device
//! presets so that the serialized form spells out every parameter.

use std::path::Path;

use serde::{Deserialize, Serialize};

use dynrf::correlations::{Engine, FilterSpec, IrfSpec};
use dynrf::experiments::{FitOptions, SpectrumSettings, SweepAxis, DEFAULT_CENTRAL_WINDOW_GHZ};
use dynrf::model::{calibrate_area, calibrate_cw_rabi, DeviceParams, ModelConfig, PulseEnvelope, Tier};
use dynrf::ode::Stepping;
use dynrf::phonon::{PhononParams, DEFAULT_ALPHA_PS2, DEFAULT_OMEGA_B_THZ, DEFAULT_TAU_CUTOFF_PS};
use dynrf::units::{ghz_to_rad_ps, thz_to_rad_ps};
use dynrf::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub model: ModelSection,
    pub device: DeviceSection,
    pub pulse: PulseSection,
    #[serde(default, rename = "detunings_GHz")]
    pub detunings: Detunings,
    #[serde(default)]
    pub phonon: PhononSection,
    #[serde(default)]
    pub grid: GridSection,
    #[serde(default)]
    pub filter: FilterSection,
    #[serde(default)]
    pub irf: IrfSection,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepSection>,
    #[serde(default)]
    pub fit: FitSection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ModelSection {
    pub tier: Tier,
    pub fock_cutoff: usize,
    pub displaced_frame: bool,
    /// Pure dephasing rate over 2π.
    #[serde(rename = "pure_dephasing_GHz")]
    pub pure_dephasing: f64,
}

impl Default for ModelSection {
    fn default() -> Self {
        Self {
            tier: Tier::FullQuantum,
            fock_cutoff: 3,
            displaced_frame: true,
            pure_dephasing: 0.0,
        }
    }
}

/// Either a named preset or the four measured quantities.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DeviceSection {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub preset: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub q_factor: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub purcell: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lifetime_ps: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub wavelength_nm: Option<f64>,
    #[serde(rename = "temperature_K", default = "default_temperature")]
    pub temperature_k: f64,
    /// Overrides the coupling derived from Q, F_p and τ_on; `g/2π`.
    #[serde(rename = "g_GHz", default, skip_serializing_if = "Option::is_none")]
    pub g: Option<f64>,
}

fn default_temperature() -> f64 {
    4.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum PulseSection {
    /// Gaussian laser pulse calibrated to an effective emitter-frame area.
    Gaussian {
        area_pi: f64,
        fwhm_ps: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        center_ps: Option<f64>,
    },
    /// Constant drive switched on at t = 0, calibrated to a steady Rabi frequency.
    Cw {
        #[serde(rename = "rabi_GHz")]
        rabi: f64,
    },
    /// Sampled drive Ω(t)/2π, optionally rescaled to an effective area.
    Tabulated {
        times_ps: Vec<f64>,
        #[serde(rename = "rabi_GHz")]
        rabi: Vec<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        area_pi: Option<f64>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Detunings {
    /// ω_c − ω_L over 2π.
    pub cavity: f64,
    /// ω_x − ω_L over 2π.
    pub exciton: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PhononSection {
    pub alpha_ps2: f64,
    #[serde(rename = "omega_b_THz")]
    pub omega_b_thz: f64,
    pub tau_cutoff_ps: f64,
}

impl Default for PhononSection {
    fn default() -> Self {
        Self {
            alpha_ps2: DEFAULT_ALPHA_PS2,
            omega_b_thz: DEFAULT_OMEGA_B_THZ,
            tau_cutoff_ps: DEFAULT_TAU_CUTOFF_PS,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EngineChoice {
    Auto,
    Propagator,
    Direct,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GridSection {
    pub dt_prime_ps: f64,
    pub dtau_ps: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tau_max_ps: Option<f64>,
    #[serde(rename = "window_GHz")]
    pub window: f64,
    #[serde(rename = "bin_GHz")]
    pub bin: f64,
    pub after_pulse_ps: f64,
    pub cw_duration_ps: f64,
    #[serde(rename = "resolution_GHz")]
    pub resolution: f64,
    #[serde(rename = "spectrometer_fwhm_GHz", skip_serializing_if = "Option::is_none")]
    pub spectrometer_fwhm: Option<f64>,
    pub engine: EngineChoice,
    pub rtol: f64,
    pub atol: f64,
    /// Classical RK4 with this step instead of adaptive stepping.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub fixed_step_ps: Option<f64>,
    pub stationary_tail: bool,
    /// t′ stride of the time-resolved map.
    pub map_every: usize,
}

impl Default for GridSection {
    fn default() -> Self {
        let d = SpectrumSettings::default();
        let Stepping::Adaptive { rtol, atol } = d.stepping else {
            unreachable!("default stepping is adaptive")
        };
        Self {
            dt_prime_ps: d.dt_prime,
            dtau_ps: d.dtau,
            tau_max_ps: d.tau_max,
            window: 150.0,
            bin: 0.25,
            after_pulse_ps: d.after_pulse,
            cw_duration_ps: d.cw_duration,
            resolution: 2.0,
            spectrometer_fwhm: None,
            engine: EngineChoice::Auto,
            rtol,
            atol,
            fixed_step_ps: None,
            stationary_tail: d.stationary_tail,
            map_every: 10,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FilterSection {
    #[serde(rename = "center_GHz")]
    pub center: f64,
    #[serde(rename = "fwhm_GHz")]
    pub fwhm: f64,
}

impl Default for FilterSection {
    fn default() -> Self {
        Self { center: 0.0, fwhm: 8.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct IrfSection {
    pub fast_fwhm_ps: f64,
    pub slow_tau_ps: f64,
    pub slow_weight: f64,
}

impl Default for IrfSection {
    fn default() -> Self {
        let d = IrfSpec::default();
        Self {
            fast_fwhm_ps: d.fast_fwhm,
            slow_tau_ps: d.slow_tau,
            slow_weight: d.slow_weight,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSection {
    pub axis: SweepAxis,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FitSection {
    pub alpha_min_ps2: f64,
    pub alpha_max_ps2: f64,
    pub rel_tol: f64,
    pub max_iter: usize,
    #[serde(rename = "window_GHz")]
    pub window: f64,
}

impl Default for FitSection {
    fn default() -> Self {
        let d = FitOptions::default();
        Self {
            alpha_min_ps2: d.alpha_min,
            alpha_max_ps2: d.alpha_max,
            rel_tol: d.rel_tol,
            max_iter: d.max_iter,
            window: DEFAULT_CENTRAL_WINDOW_GHZ,
        }
    }
}

/// Deserializes `text`, reporting the dotted path of the offending field.
fn parse_with_path<'de, D>(de: D, origin: &str) -> Result<RunConfig>
where
    D: serde::Deserializer<'de>,
    D::Error: std::fmt::Display,
{
    serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        let path = if path == "." { origin.to_string() } else { path };
        Error::config(path, e.inner().to_string())
    })
}

/// Parses a TOML config.
pub fn from_toml(text: &str) -> Result<RunConfig> {
    let de = toml::de::Deserializer::parse(text).map_err(|e| Error::config("<toml>", e.to_string()))?;
    parse_with_path(de, "<toml>")
}

/// Parses a JSON config, or the `config` member of a run manifest.
pub fn from_json(text: &str) -> Result<RunConfig> {
    let value: serde_json::Value = serde_json::from_str(text).map_err(|e| Error::config("<json>", e.to_string()))?;
    let body = match value {
        serde_json::Value::Object(mut m) if m.contains_key("tool") && m.contains_key("config") => {
            m.remove("config").expect("checked")
        }
        other => other,
    };
    parse_with_path(body, "<json>")
}

/// Reads a config; `.json` files are parsed as JSON, everything else as TOML.
pub fn load(path: &Path) -> Result<(RunConfig, Vec<u8>)> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    let text = std::str::from_utf8(&bytes).map_err(|_| Error::config(path.display().to_string(), "not valid UTF-8"))?;
    let is_json = path.extension().is_some_and(|e| e.eq_ignore_ascii_case("json"));
    let cfg = if is_json { from_json(text)? } else { from_toml(text)? };
    Ok((cfg.resolve()?, bytes))
}

fn preset(name: &str, temperature: f64) -> Result<DeviceParams> {
    match name {
        "device1" => Ok(DeviceParams::device1(temperature)),
        "device2" => Ok(DeviceParams::device2(temperature)),
        "device3" => Ok(DeviceParams::device3(temperature)),
        other => Err(Error::config(
            "device.preset",
            format!("unknown preset `{other}`; expected device1, device2 or device3"),
        )),
    }
}

impl DeviceSection {
    fn params(&self) -> Result<DeviceParams> {
        let measured = [self.q_factor, self.purcell, self.lifetime_ps];
        let d = match &self.preset {
            Some(name) => {
                if measured.iter().any(Option::is_some) {
                    return Err(Error::config(
                        "device",
                        "give either `preset` or the measured q_factor, purcell and lifetime_ps, not both",
                    ));
                }
                preset(name, self.temperature_k)?
            }
            None => {
                let field = |v: Option<f64>, name: &str| {
                    v.ok_or_else(|| Error::config(format!("device.{name}"), "missing field (or set `preset`)"))
                };
                DeviceParams::from_measured(
                    field(self.q_factor, "q_factor")?,
                    field(self.purcell, "purcell")?,
                    field(self.lifetime_ps, "lifetime_ps")?,
                    self.wavelength_nm.unwrap_or(dynrf::model::DEFAULT_WAVELENGTH_NM),
                    self.temperature_k,
                )?
            }
        };
        match self.g {
            Some(g) if !(g >= 0.0) => Err(Error::config("device.g_GHz", "must be non-negative")),
            Some(g) => Ok(d.with_coupling(ghz_to_rad_ps(g))),
            None => Ok(d),
        }
    }
}

impl RunConfig {
    /// Expands presets into measured values and checks cross-field rules.
    pub fn resolve(mut self) -> Result<Self> {
        let d = self.device.params()?;
        self.device.preset = None;
        self.device.q_factor = Some(d.q_factor);
        self.device.purcell = Some(d.purcell);
        self.device.lifetime_ps = Some(d.lifetime_ps);
        self.device.wavelength_nm = Some(d.wavelength_nm);
        if let Some(s) = &self.sweep {
            if s.values.is_empty() {
                return Err(Error::config("sweep.values", "must not be empty"));
            }
        }
        self.model_config()?;
        self.settings()?;
        Ok(self)
    }

    pub fn device_params(&self) -> Result<DeviceParams> {
        self.device.params()
    }

    pub fn phonon_params(&self) -> PhononParams {
        PhononParams {
            alpha_p: self.phonon.alpha_ps2,
            omega_b: thz_to_rad_ps(self.phonon.omega_b_thz),
            temperature_k: self.device.temperature_k,
            tau_cutoff: self.phonon.tau_cutoff_ps,
        }
    }

    /// Simulator configuration with the drive calibrated.
    pub fn model_config(&self) -> Result<ModelConfig> {
        let device = self.device_params()?;
        let pulse = match &self.pulse {
            PulseSection::Gaussian { fwhm_ps, center_ps, .. } => {
                PulseEnvelope::gaussian_with_area(1.0, *fwhm_ps, *center_ps)?
            }
            PulseSection::Cw { .. } => PulseEnvelope::Cw { amplitude: 1.0 },
            PulseSection::Tabulated { times_ps, rabi, .. } => {
                PulseEnvelope::tabulated(times_ps.clone(), rabi.iter().map(|&v| ghz_to_rad_ps(v)).collect())?
            }
        };
        let mut cfg = ModelConfig::new(self.model.tier, device, pulse, self.model.fock_cutoff)?;
        cfg.cavity_detuning = ghz_to_rad_ps(self.detunings.cavity);
        cfg.exciton_detuning = ghz_to_rad_ps(self.detunings.exciton);
        cfg.displaced_frame = self.model.displaced_frame;
        cfg.pure_dephasing = ghz_to_rad_ps(self.model.pure_dephasing);
        if self.model.tier == Tier::FullPlusPhonons {
            cfg.phonon = Some(self.phonon_params());
        }
        match &self.pulse {
            PulseSection::Gaussian { area_pi, .. }
            | PulseSection::Tabulated {
                area_pi: Some(area_pi), ..
            } => calibrate_area(&mut cfg, *area_pi)?,
            PulseSection::Cw { rabi } => calibrate_cw_rabi(&mut cfg, ghz_to_rad_ps(*rabi))?,
            PulseSection::Tabulated { area_pi: None, .. } => {}
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn stepping(&self) -> Result<Stepping> {
        let g = &self.grid;
        match g.fixed_step_ps {
            Some(h) if !(h > 0.0) => Err(Error::config("grid.fixed_step_ps", "must be positive")),
            Some(step) => Ok(Stepping::Fixed { step }),
            None if !(g.rtol > 0.0 && g.atol > 0.0) => Err(Error::config("grid.rtol", "tolerances must be positive")),
            None => Ok(Stepping::Adaptive {
                rtol: g.rtol,
                atol: g.atol,
            }),
        }
    }

    pub fn settings(&self) -> Result<SpectrumSettings> {
        let g = &self.grid;
        for (name, v) in [
            ("grid.dt_prime_ps", g.dt_prime_ps),
            ("grid.dtau_ps", g.dtau_ps),
            ("grid.window_GHz", g.window),
            ("grid.bin_GHz", g.bin),
            ("grid.resolution_GHz", g.resolution),
        ] {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::config(name, "must be positive"));
            }
        }
        for (name, v) in [
            ("grid.after_pulse_ps", g.after_pulse_ps),
            ("grid.cw_duration_ps", g.cw_duration_ps),
        ] {
            if !(v >= 0.0) {
                return Err(Error::config(name, "must be non-negative"));
            }
        }
        if g.map_every == 0 {
            return Err(Error::config("grid.map_every", "must be at least 1"));
        }
        Ok(SpectrumSettings {
            dt_prime: g.dt_prime_ps,
            dtau: g.dtau_ps,
            tau_max: g.tau_max_ps,
            window: ghz_to_rad_ps(g.window),
            bin: ghz_to_rad_ps(g.bin),
            after_pulse: g.after_pulse_ps,
            cw_duration: g.cw_duration_ps,
            resolution: ghz_to_rad_ps(g.resolution),
            spectrometer_fwhm: g.spectrometer_fwhm.map(ghz_to_rad_ps),
            engine: match g.engine {
                EngineChoice::Auto => Engine::Auto,
                EngineChoice::Propagator => Engine::Propagator,
                EngineChoice::Direct => Engine::Direct,
            },
            stepping: self.stepping()?,
            map_every: None,
            stationary_tail: g.stationary_tail,
            exec: Default::default(),
        })
    }

    pub fn filter(&self) -> Result<FilterSpec> {
        if !(self.filter.fwhm > 0.0) {
            return Err(Error::config("filter.fwhm_GHz", "must be positive"));
        }
        Ok(FilterSpec {
            center: ghz_to_rad_ps(self.filter.center),
            fwhm: ghz_to_rad_ps(self.filter.fwhm),
        })
    }

    pub fn irf(&self) -> Result<IrfSpec> {
        let irf = IrfSpec {
            fast_fwhm: self.irf.fast_fwhm_ps,
            slow_tau: self.irf.slow_tau_ps,
            slow_weight: self.irf.slow_weight,
        };
        irf.validate()?;
        Ok(irf)
    }

    pub fn fit_options(&self) -> FitOptions {
        FitOptions {
            alpha_min: self.fit.alpha_min_ps2,
            alpha_max: self.fit.alpha_max_ps2,
            rel_tol: self.fit.rel_tol,
            max_iter: self.fit.max_iter,
            window_ghz: self.fit.window,
        }
    }
}
