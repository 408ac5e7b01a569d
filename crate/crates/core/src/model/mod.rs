//! Device parameters, drive envelopes and Hamiltonian assembly for the three
//! model tiers.
//!
//! * Tier A eliminates the cavity: a bare emitter (D = 2) decaying at
//!   `γ + 4g²/κ`, driven directly by the envelope.
//! * Tier B keeps a quantized cavity mode driven by the laser, either in the
//!   lab frame or in the coherently displaced frame where the cavity drive
//!   becomes an emitter drive `gα(t)σ⁺ + h.c.`.
//! * Tier C adds the polaron phonon term; coherent couplings to the emitter
//!   are multiplied by ⟨B⟩.

mod device;
mod displacement;
mod pulse;

use std::sync::Arc;

use serde::{Deserialize, Serialize};

pub use device::{derive_rates, DeviceParams, DEFAULT_WAVELENGTH_NM};
pub use displacement::{cavity_cw_rabi, cavity_drive_area, DisplacementTable, DEFAULT_TABLE_STEP};
pub use pulse::PulseEnvelope;

use crate::error::{Error, Result};
use crate::phonon::{self, PhononParams};
use crate::qcore::{
    build_operators, emitter_operators, CollapseTerm, DensityMatrix, HilbertConfig, Operator, C64, ZERO,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Tier {
    #[serde(rename = "A", alias = "A_bad_cavity", alias = "bad_cavity")]
    BadCavity,
    #[serde(rename = "B", alias = "B_full_quantum", alias = "full_quantum")]
    FullQuantum,
    #[serde(rename = "C", alias = "C_full_plus_phonons", alias = "full_plus_phonons")]
    FullPlusPhonons,
}

impl Tier {
    pub fn label(self) -> &'static str {
        match self {
            Tier::BadCavity => "A",
            Tier::FullQuantum => "B",
            Tier::FullPlusPhonons => "C",
        }
    }

    pub fn has_cavity(self) -> bool {
        !matches!(self, Tier::BadCavity)
    }
}

/// Everything needed to build the generator of one simulation.
///
/// Rates and detunings are in rad/ps. For tier A, `pulse` drives the emitter
/// directly; otherwise it is the laser drive on the cavity.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelConfig {
    pub tier: Tier,
    pub cavity_detuning: f64,
    pub exciton_detuning: f64,
    pub device: DeviceParams,
    pub pulse: PulseEnvelope,
    pub hilbert: HilbertConfig,
    pub displaced_frame: bool,
    pub pure_dephasing: f64,
    pub phonon: Option<PhononParams>,
}

impl ModelConfig {
    /// Tier-B device model at zero detuning with no drive.
    pub fn new(tier: Tier, device: DeviceParams, pulse: PulseEnvelope, fock_cutoff: usize) -> Result<Self> {
        Ok(Self {
            tier,
            cavity_detuning: 0.0,
            exciton_detuning: 0.0,
            device,
            pulse,
            hilbert: HilbertConfig::new(fock_cutoff)?,
            displaced_frame: true,
            pure_dephasing: 0.0,
            phonon: None,
        })
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("detunings_GHz.cavity", self.cavity_detuning),
            ("detunings_GHz.exciton", self.exciton_detuning),
        ] {
            if !v.is_finite() {
                return Err(Error::config(name, "must be finite"));
            }
        }
        if !(self.pure_dephasing >= 0.0) {
            return Err(Error::config("model.pure_dephasing_GHz", "must be non-negative"));
        }
        if self.tier == Tier::FullPlusPhonons {
            match &self.phonon {
                Some(p) => p.validate()?,
                None => return Err(Error::config("phonon", "tier C requires phonon parameters")),
            }
        }
        Ok(())
    }

    /// Hilbert-space dimension actually used by the tier.
    pub fn dim(&self) -> usize {
        if self.tier.has_cavity() {
            self.hilbert.dim()
        } else {
            2
        }
    }

    /// Phonon parameters when phonons are active, with the device temperature.
    pub fn active_phonons(&self) -> Option<PhononParams> {
        match (self.tier, &self.phonon) {
            (Tier::FullPlusPhonons, Some(p)) => Some(PhononParams {
                temperature_k: self.device.temperature_k,
                ..p.clone()
            }),
            _ => None,
        }
    }

    pub fn uses_displacement(&self) -> bool {
        self.tier.has_cavity() && self.displaced_frame
    }
}

/// Time dependence of the single drive term `c(t)·D + c*(t)·D†`.
#[derive(Debug, Clone)]
pub enum DriveSchedule {
    /// `c(t) = scale · Ω(t) / 2`.
    Envelope { pulse: PulseEnvelope, scale: f64 },
    /// `c(t) = scale · α(t)`.
    Displacement { table: Arc<DisplacementTable>, scale: f64 },
}

impl DriveSchedule {
    pub fn coefficient(&self, t: f64) -> C64 {
        match self {
            DriveSchedule::Envelope { pulse, scale } => C64::new(0.5 * scale * pulse.omega(t), 0.0),
            DriveSchedule::Displacement { table, scale } => table.alpha(t) * *scale,
        }
    }
}

/// A model compiled into operators and time-dependent coefficients.
#[derive(Debug, Clone)]
pub struct SystemModel {
    pub tier: Tier,
    pub dim: usize,
    /// Time-independent part of H.
    pub h_static: Operator,
    /// `D` in the drive term `c(t)·D + h.c.`.
    pub drive_op: Operator,
    pub drive: DriveSchedule,
    pub collapse: Vec<CollapseTerm>,
    /// Operator whose fluctuations are detected: `a` with a cavity, `σ⁻` for tier A.
    pub field: Operator,
    pub excited: Operator,
    /// Cavity photon number in the simulation frame, absent for tier A.
    pub number: Option<Operator>,
    pub sigma_plus: Operator,
    /// `g·a` (zero for tier A); the emitter coupling is `⟨B⟩(σ⁺K + K†σ⁻)` with `K = g·a (+ gα)`.
    pub coupling: Operator,
    pub displacement: Option<Arc<DisplacementTable>>,
    pub g: f64,
    pub b_avg: f64,
    pub phonon: Option<PhononParams>,
}

impl SystemModel {
    /// Compiles `cfg`; the displacement table (if any) spans `[0, t_max]`.
    pub fn new(cfg: &ModelConfig, t_max: f64) -> Result<Self> {
        cfg.validate()?;
        let dev = &cfg.device;
        let phonon = cfg.active_phonons();
        let b_avg = match &phonon {
            Some(p) => phonon::b_average(p)?,
            None => 1.0,
        };
        if cfg.tier == Tier::BadCavity {
            let (sm, sp) = emitter_operators();
            let excited = sp.mul(&sm);
            let h_static = excited.scale(C64::new(cfg.exciton_detuning, 0.0));
            let mut collapse = vec![CollapseTerm::new("emitter", dev.bad_cavity_decay(), sm.clone())];
            if cfg.pure_dephasing > 0.0 {
                collapse.push(CollapseTerm::new("pure_dephasing", cfg.pure_dephasing, excited.clone()));
            }
            return Ok(Self {
                tier: cfg.tier,
                dim: 2,
                h_static,
                drive_op: sp.clone(),
                drive: DriveSchedule::Envelope {
                    pulse: cfg.pulse.clone(),
                    scale: 1.0,
                },
                collapse,
                field: sm,
                excited,
                number: None,
                sigma_plus: sp,
                coupling: Operator::zeros(2),
                displacement: None,
                g: dev.g,
                b_avg: 1.0,
                phonon: None,
            });
        }

        let ops = build_operators(cfg.hilbert);
        let d = ops.dim();
        let number = ops.number();
        let excited = ops.excited_projector();
        let g_eff = dev.g * b_avg;
        let jc = ops.a.mul(&ops.sigma_plus).add(&ops.a_dagger.mul(&ops.sigma_minus));
        let h_static = number
            .scale(C64::new(cfg.cavity_detuning, 0.0))
            .add(&excited.scale(C64::new(cfg.exciton_detuning, 0.0)))
            .add(&jc.scale(C64::new(g_eff, 0.0)));
        let mut collapse = vec![
            CollapseTerm::new("cavity", dev.kappa, ops.a.clone()),
            CollapseTerm::new("emitter", dev.gamma, ops.sigma_minus.clone()),
        ];
        if cfg.pure_dephasing > 0.0 {
            collapse.push(CollapseTerm::new("pure_dephasing", cfg.pure_dephasing, excited.clone()));
        }
        let (drive_op, drive, displacement) = if cfg.displaced_frame {
            let table = Arc::new(DisplacementTable::solve(
                &cfg.pulse,
                cfg.cavity_detuning,
                dev.kappa,
                t_max.max(DEFAULT_TABLE_STEP),
                DEFAULT_TABLE_STEP,
            )?);
            (
                ops.sigma_plus.clone(),
                DriveSchedule::Displacement {
                    table: table.clone(),
                    scale: g_eff,
                },
                Some(table),
            )
        } else {
            (
                ops.a_dagger.clone(),
                DriveSchedule::Envelope {
                    pulse: cfg.pulse.clone(),
                    scale: 1.0,
                },
                None,
            )
        };
        Ok(Self {
            tier: cfg.tier,
            dim: d,
            h_static,
            drive_op,
            drive,
            collapse,
            field: ops.a.clone(),
            excited,
            number: Some(number),
            sigma_plus: ops.sigma_plus.clone(),
            coupling: ops.a.scale(C64::new(dev.g, 0.0)),
            displacement,
            g: dev.g,
            b_avg,
            phonon,
        })
    }

    pub fn drive_coefficient(&self, t: f64) -> C64 {
        self.drive.coefficient(t)
    }

    /// Full Hamiltonian in the simulation frame at time `t`.
    pub fn hamiltonian(&self, t: f64) -> Operator {
        let c = self.drive_coefficient(t);
        let drive = self.drive_op.scale(c);
        self.h_static.add(&drive).add(&drive.dagger())
    }

    /// c-number added to the simulation-frame field to obtain the lab-frame
    /// cavity amplitude (`α(t)` in the displaced frame, else 0).
    pub fn field_offset(&self, t: f64) -> C64 {
        match &self.displacement {
            Some(tab) => tab.alpha(t),
            None => ZERO,
        }
    }

    /// `K(t)` in the emitter coupling `⟨B⟩(σ⁺K + K†σ⁻)`.
    pub fn emitter_coupling(&self, t: f64) -> Operator {
        let mut k = self.coupling.clone();
        match (&self.drive, self.tier) {
            (_, Tier::BadCavity) => {
                let c = self.drive_coefficient(t);
                for i in 0..self.dim {
                    k.0[(i, i)] += c;
                }
            }
            (DriveSchedule::Displacement { table, .. }, _) => {
                let c = table.alpha(t) * self.g;
                for i in 0..self.dim {
                    k.0[(i, i)] += c;
                }
            }
            _ => {}
        }
        k
    }

    /// Ground state `|g, 0⟩`.
    pub fn ground_state(&self) -> DensityMatrix {
        DensityMatrix::basis_state(self.dim, 0)
    }

    /// Excited emitter with an empty cavity, `|e, 0⟩`.
    pub fn excited_state(&self) -> DensityMatrix {
        let idx = if self.tier.has_cavity() { self.dim / 2 } else { 1 };
        DensityMatrix::basis_state(self.dim, idx)
    }

    /// Earliest sampled time after which the drive coefficient stays within
    /// `rel · max|c|` of its value at `t_end`, scanning on `step`.
    pub fn stationary_after(&self, t_end: f64, step: f64, rel: f64) -> f64 {
        let n = (t_end / step).ceil() as usize;
        let samples: Vec<C64> = (0..=n)
            .map(|k| self.drive_coefficient((k as f64 * step).min(t_end)))
            .collect();
        let c_end = samples[n];
        let scale = samples.iter().map(|c| c.norm()).fold(0.0, f64::max);
        if scale == 0.0 {
            return 0.0;
        }
        for k in (0..=n).rev() {
            if (samples[k] - c_end).norm() > rel * scale {
                return ((k + 1) as f64 * step).min(t_end);
            }
        }
        0.0
    }
}

/// Hamiltonian of `cfg` at time `t` in its simulation frame.
pub fn build_hamiltonian(cfg: &ModelConfig, t: f64) -> Result<Operator> {
    let sys = SystemModel::new(cfg, t.max(0.0) + 1.0)?;
    Ok(sys.hamiltonian(t))
}

/// Coherent cavity amplitude α(t) at the requested times.
pub fn displacement_trajectory(cfg: &ModelConfig, t_grid: &[f64]) -> Result<Vec<C64>> {
    if !cfg.tier.has_cavity() {
        return Err(Error::config(
            "model.tier",
            "the displacement transform needs a cavity (tier B or C)",
        ));
    }
    let t_max = t_grid.iter().copied().fold(0.0, f64::max) + DEFAULT_TABLE_STEP;
    let tab = DisplacementTable::solve(
        &cfg.pulse,
        cfg.cavity_detuning,
        cfg.device.kappa,
        t_max,
        DEFAULT_TABLE_STEP,
    )?;
    Ok(t_grid.iter().map(|&t| tab.alpha(t)).collect())
}

/// Emitter-frame pulse area in units of π: `∫2g|α|dt/π` with a cavity,
/// the bare envelope area for tier A. Excludes ⟨B⟩.
pub fn effective_pulse_area(cfg: &ModelConfig) -> Result<f64> {
    if cfg.pulse.is_cw() {
        return Err(Error::config(
            "pulse.kind",
            "effective pulse area is undefined for cw drive",
        ));
    }
    if cfg.tier.has_cavity() {
        cavity_drive_area(&cfg.pulse, cfg.cavity_detuning, cfg.device.kappa, cfg.device.g)
    } else {
        Ok(cfg.pulse.area_pi().unwrap_or(0.0))
    }
}

/// Steady-state emitter Rabi frequency of a cw drive, rad/ps.
pub fn effective_cw_rabi(cfg: &ModelConfig) -> Result<f64> {
    let PulseEnvelope::Cw { amplitude } = cfg.pulse else {
        return Err(Error::config("pulse.kind", "expected a cw drive"));
    };
    if cfg.tier.has_cavity() {
        Ok(cavity_cw_rabi(
            amplitude,
            cfg.cavity_detuning,
            cfg.device.kappa,
            cfg.device.g,
        ))
    } else {
        Ok(amplitude)
    }
}

/// Rescales the pulse so that `effective_pulse_area` equals `area_pi`.
pub fn calibrate_area(cfg: &mut ModelConfig, area_pi: f64) -> Result<()> {
    if !(area_pi >= 0.0) {
        return Err(Error::config("pulse.area_pi", "must be non-negative"));
    }
    let current = effective_pulse_area(cfg)?;
    if current <= 0.0 {
        if area_pi == 0.0 {
            return Ok(());
        }
        return Err(Error::config("pulse", "cannot calibrate a pulse with zero area"));
    }
    cfg.pulse = cfg.pulse.scaled(area_pi / current);
    Ok(())
}

/// Rescales a cw drive so that the steady emitter Rabi frequency is `rabi`.
pub fn calibrate_cw_rabi(cfg: &mut ModelConfig, rabi: f64) -> Result<()> {
    let unit = ModelConfig {
        pulse: PulseEnvelope::Cw { amplitude: 1.0 },
        ..cfg.clone()
    };
    let per_unit = effective_cw_rabi(&unit)?;
    cfg.pulse = PulseEnvelope::Cw {
        amplitude: rabi / per_unit,
    };
    Ok(())
}
