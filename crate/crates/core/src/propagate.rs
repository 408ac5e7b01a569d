//! Time propagation of the master equation with observable recording.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::model::{ModelConfig, SystemModel};
use crate::ode::{self, Stats, Stepping, System};
use crate::phonon::{BatchScratch, PolaronKernel, PolaronSnapshot};
use crate::qcore::{trace_of_product, DensityMatrix, Operator, SparseOp, C64, I, ONE, ZERO};

/// Relative change of the drive coefficient below which the polaron
/// scattering operators are reused.
pub const POLARON_CACHE_TOLERANCE: f64 = 1e-4;

/// Output sampling and integrator settings.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeGrid {
    pub t_start: f64,
    pub t_end: f64,
    pub output_step: f64,
    pub stepping: Stepping,
}

impl TimeGrid {
    pub fn new(t_start: f64, t_end: f64, output_step: f64) -> Result<Self> {
        if !(t_end > t_start) {
            return Err(Error::config("grid.t_end_ps", "must exceed the start time"));
        }
        if !(output_step > 0.0) {
            return Err(Error::config("grid.output_step", "must be positive"));
        }
        Ok(Self {
            t_start,
            t_end,
            output_step,
            stepping: Stepping::default(),
        })
    }

    pub fn with_stepping(mut self, stepping: Stepping) -> Self {
        self.stepping = stepping;
        self
    }

    /// Uniform samples from `t_start`; the last sample is `t_end`.
    pub fn times(&self) -> Vec<f64> {
        sample_times(self.t_start, self.t_end, self.output_step)
    }
}

pub(crate) fn sample_times(t0: f64, t1: f64, step: f64) -> Vec<f64> {
    let n = ((t1 - t0) / step + 1e-9).floor() as usize;
    let mut ts: Vec<f64> = (0..=n).map(|k| t0 + k as f64 * step).collect();
    let last = *ts.last().expect("at least one sample");
    if (t1 - last).abs() <= 1e-9 * step {
        *ts.last_mut().expect("non-empty") = t1;
    } else {
        ts.push(t1);
    }
    ts
}

/// Tolerances for the state invariants checked at every physical sample.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InvariantLimits {
    pub trace: f64,
    pub hermiticity: f64,
    pub min_eigenvalue: f64,
}

impl Default for InvariantLimits {
    fn default() -> Self {
        Self {
            trace: 1e-6,
            hermiticity: 1e-10,
            min_eigenvalue: -1e-6,
        }
    }
}

/// Worst invariant values seen along a run.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct Hygiene {
    pub max_trace_drift: f64,
    pub max_hermiticity_error: f64,
    pub min_eigenvalue: f64,
}

impl Default for Hygiene {
    fn default() -> Self {
        Self {
            max_trace_drift: 0.0,
            max_hermiticity_error: 0.0,
            min_eigenvalue: f64::INFINITY,
        }
    }
}

impl Hygiene {
    pub fn merge(&mut self, other: &Hygiene) {
        self.max_trace_drift = self.max_trace_drift.max(other.max_trace_drift);
        self.max_hermiticity_error = self.max_hermiticity_error.max(other.max_hermiticity_error);
        self.min_eigenvalue = self.min_eigenvalue.min(other.min_eigenvalue);
    }

    pub(crate) fn record(&mut self, t: f64, rho: &DensityMatrix, limits: &InvariantLimits) -> Result<()> {
        let drift = (rho.trace() - ONE).norm();
        let herm = rho.hermiticity_error();
        let min_ev = rho.min_eigenvalue();
        self.max_trace_drift = self.max_trace_drift.max(drift);
        self.max_hermiticity_error = self.max_hermiticity_error.max(herm);
        self.min_eigenvalue = self.min_eigenvalue.min(min_ev);
        if drift > limits.trace {
            return Err(Error::Invariant {
                t,
                message: format!("trace drift {drift:.3e} exceeds {:.1e}", limits.trace),
            });
        }
        if herm > limits.hermiticity {
            return Err(Error::Invariant {
                t,
                message: format!("hermiticity error {herm:.3e} exceeds {:.1e}", limits.hermiticity),
            });
        }
        if min_ev < limits.min_eigenvalue {
            return Err(Error::Invariant {
                t,
                message: format!("minimum eigenvalue {min_ev:.3e} below {:.1e}", limits.min_eigenvalue),
            });
        }
        Ok(())
    }
}

/// Sampled observables. For tier A the field is `σ⁻`. `field` is the
/// lab-frame amplitude (the displacement is added back in the displaced frame).
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Observables {
    pub population: Vec<f64>,
    pub photon_number: Vec<f64>,
    pub field: Vec<C64>,
    /// `⟨a_δ†a_δ⟩ = ⟨a†a⟩ − |⟨a⟩|²`.
    pub fluctuation: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Option<Vec<DensityMatrix>>,
    pub observables: Observables,
    pub hygiene: Hygiene,
    pub stats: Stats,
}

/// Per-worker mutable state of the right-hand side: scratch space and the
/// cached polaron operators.
#[derive(Debug, Clone)]
pub struct Workspace {
    tmp: Vec<C64>,
    polaron: Option<(C64, PolaronSnapshot)>,
    batch: BatchScratch,
    pub snapshots_built: usize,
}

impl Workspace {
    pub fn new(dim: usize) -> Self {
        Self {
            tmp: vec![ZERO; dim * dim],
            polaron: None,
            batch: BatchScratch::default(),
            snapshots_built: 0,
        }
    }

    pub fn reset(&mut self) {
        self.polaron = None;
    }
}

#[derive(Debug, Clone)]
struct Jump {
    rate: f64,
    op: SparseOp,
}

/// Matrix-free Liouvillian of a compiled model.
///
/// Writes the master equation as `ρ̇ = −i(H_eff ρ − ρ H_eff†) + Σ r AρA† + D_pol(ρ)`
/// with the non-Hermitian `H_eff = H − (i/2)Σ r A†A`.
#[derive(Debug, Clone)]
pub struct Generator {
    model: Arc<SystemModel>,
    dim: usize,
    h_eff: SparseOp,
    drive_re: SparseOp,
    drive_im: SparseOp,
    jumps: Vec<Jump>,
    polaron: Option<Arc<PolaronKernel>>,
    cache_floor: f64,
}

impl Generator {
    pub fn new(model: Arc<SystemModel>) -> Result<Self> {
        let d = model.dim;
        let mut h_eff = model.h_static.clone();
        let mut jumps = Vec::new();
        for term in &model.collapse {
            if term.rate < 0.0 {
                return Err(Error::NegativeRate {
                    name: term.name.clone(),
                    rate: term.rate,
                });
            }
            if term.rate == 0.0 {
                continue;
            }
            let ada = term.op.dagger().mul(&term.op);
            h_eff = h_eff.add(&ada.scale(C64::new(0.0, -0.5 * term.rate)));
            jumps.push(Jump {
                rate: term.rate,
                op: SparseOp::from_operator(&term.op),
            });
        }
        let dop = &model.drive_op;
        let d_re = dop.add(&dop.dagger());
        let d_im = dop.add(&dop.dagger().scale(C64::new(-1.0, 0.0))).scale(I);
        let polaron = match &model.phonon {
            Some(p) => {
                let k = PolaronKernel::new(p)?;
                if k.is_trivial() {
                    None
                } else {
                    Some(Arc::new(k))
                }
            }
            None => None,
        };
        let cache_floor = 2.0 * model.g * model.b_avg;
        Ok(Self {
            dim: d,
            h_eff: SparseOp::from_operator(&h_eff),
            drive_re: SparseOp::from_operator(&d_re),
            drive_im: SparseOp::from_operator(&d_im),
            jumps,
            polaron,
            cache_floor,
            model,
        })
    }

    pub fn from_config(cfg: &ModelConfig, t_max: f64) -> Result<Self> {
        Self::new(Arc::new(SystemModel::new(cfg, t_max)?))
    }

    pub fn model(&self) -> &Arc<SystemModel> {
        &self.model
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn has_phonons(&self) -> bool {
        self.polaron.is_some()
    }

    pub fn workspace(&self) -> Workspace {
        Workspace::new(self.dim)
    }

    fn polaron_snapshot<'w>(&self, t: f64, c: C64, ws: &'w mut Workspace) -> Result<Option<&'w PolaronSnapshot>> {
        let Some(kernel) = &self.polaron else {
            return Ok(None);
        };
        let stale = match &ws.polaron {
            Some((c0, _)) => (c - *c0).norm() > POLARON_CACHE_TOLERANCE * (c.norm() + self.cache_floor),
            None => true,
        };
        if stale {
            let h = self.model.hamiltonian(t);
            let k = self.model.emitter_coupling(t);
            let snap = kernel.snapshot(&h, &k, &self.model.sigma_plus)?;
            ws.polaron = Some((c, snap));
            ws.snapshots_built += 1;
        }
        Ok(ws.polaron.as_ref().map(|(_, s)| s))
    }

    /// `out = L(t) ρ` for one column-major `D × D` matrix.
    pub fn apply(&self, t: f64, rho: &[C64], out: &mut [C64], ws: &mut Workspace) -> Result<()> {
        self.apply_batch(t, rho, out, ws)
    }

    /// Every term except the polaron one, accumulated into `out`.
    fn apply_markov(&self, c: C64, rho: &[C64], out: &mut [C64], ws: &mut Workspace) {
        let mi = -I;
        self.h_eff.left_mul_acc(mi, rho, out);
        self.h_eff.right_mul_dagger_acc(I, rho, out);
        if c.re != 0.0 {
            let f = mi * c.re;
            self.drive_re.left_mul_acc(f, rho, out);
            self.drive_re.right_mul_acc(-f, rho, out);
        }
        if c.im != 0.0 {
            let f = mi * c.im;
            self.drive_im.left_mul_acc(f, rho, out);
            self.drive_im.right_mul_acc(-f, rho, out);
        }
        for j in &self.jumps {
            ws.tmp.fill(ZERO);
            j.op.right_mul_dagger_acc(ONE, rho, &mut ws.tmp);
            j.op.left_mul_acc(C64::new(j.rate, 0.0), &ws.tmp, out);
        }
    }

    /// Applies the generator to each `D × D` block of `y`.
    pub fn apply_batch(&self, t: f64, y: &[C64], dy: &mut [C64], ws: &mut Workspace) -> Result<()> {
        let d2 = self.dim * self.dim;
        if !y.len().is_multiple_of(d2) || dy.len() != y.len() {
            return Err(Error::DimensionMismatch {
                expected: d2,
                got: y.len(),
            });
        }
        let c = self.model.drive_coefficient(t);
        for (yb, db) in y.chunks_exact(d2).zip(dy.chunks_exact_mut(d2)) {
            db.fill(ZERO);
            self.apply_markov(c, yb, db, ws);
        }
        if self.polaron.is_some() {
            let mut batch = std::mem::take(&mut ws.batch);
            let snap = self.polaron_snapshot(t, c, ws)?.expect("phonons active");
            snap.apply_batch_acc(y, dy, &mut batch);
            ws.batch = batch;
        }
        Ok(())
    }

    /// ODE system view over a batch of matrices.
    pub fn system<'a>(&'a self, ws: &'a mut Workspace) -> GeneratorSystem<'a> {
        GeneratorSystem { gen: self, ws }
    }
}

pub struct GeneratorSystem<'a> {
    gen: &'a Generator,
    ws: &'a mut Workspace,
}

impl System for GeneratorSystem<'_> {
    fn rhs(&mut self, t: f64, y: &[C64], dy: &mut [C64]) -> Result<()> {
        self.gen.apply_batch(t, y, dy, self.ws)
    }
}

/// A compiled model with integrator settings: the entry point for single runs.
#[derive(Debug, Clone)]
pub struct Dynamics {
    pub generator: Arc<Generator>,
    pub stepping: Stepping,
    pub limits: InvariantLimits,
}

impl Dynamics {
    pub fn new(cfg: &ModelConfig, t_max: f64, stepping: Stepping) -> Result<Self> {
        Ok(Self {
            generator: Arc::new(Generator::from_config(cfg, t_max)?),
            stepping,
            limits: InvariantLimits::default(),
        })
    }

    pub fn model(&self) -> &SystemModel {
        self.generator.model()
    }

    pub fn dim(&self) -> usize {
        self.generator.dim()
    }

    /// Integrates a single matrix from `t0` through `outputs`, calling
    /// `on_output(index, t, state)`.
    pub fn run<O>(&self, t0: f64, y0: &[C64], outputs: &[f64], mut on_output: O) -> Result<(Vec<C64>, Stats)>
    where
        O: FnMut(usize, f64, &[C64]) -> Result<()>,
    {
        let mut ws = self.generator.workspace();
        let mut sys = self.generator.system(&mut ws);
        let hint = match self.stepping {
            Stepping::Fixed { .. } => None,
            Stepping::Adaptive { .. } => Some(0.05),
        };
        ode::integrate(&mut sys, t0, y0, outputs, self.stepping, hint, &mut on_output)
    }

    /// Samples `(population, photon number, lab-frame field, fluctuation)` of a state at `t`.
    pub fn observe(&self, t: f64, rho: &[C64]) -> (f64, f64, C64, f64) {
        let m = self.model();
        let d = m.dim;
        let pop = trace_of_product(m.excited.0.as_slice(), rho, d).re;
        let f = trace_of_product(m.field.0.as_slice(), rho, d);
        let ff = match &m.number {
            Some(n) => trace_of_product(n.0.as_slice(), rho, d).re,
            None => pop,
        };
        let fluct = ff - f.norm_sqr();
        let off = m.field_offset(t);
        let tr = rho.iter().step_by(d + 1).fold(ZERO, |a, v| a + v);
        let field = f + off * tr;
        let number = ff + 2.0 * (off.conj() * f).re + off.norm_sqr() * tr.re;
        (pop, number, field, fluct)
    }

    pub fn evolve(&self, rho0: &DensityMatrix, grid: &TimeGrid, keep_states: bool) -> Result<Trajectory> {
        self.evolve_inner(rho0, grid, None, keep_states)
    }

    /// Evolves to `t_insert`, replaces the state by `right·ρ·left` (either
    /// side optional) and continues under the same generator.
    pub fn evolve_with_insertion(
        &self,
        rho0: &DensityMatrix,
        grid: &TimeGrid,
        t_insert: f64,
        left: Option<&Operator>,
        right: Option<&Operator>,
        keep_states: bool,
    ) -> Result<Trajectory> {
        if t_insert < grid.t_start || t_insert > grid.t_end {
            return Err(Error::config("t_insert", "insertion time must lie within the grid"));
        }
        self.evolve_inner(rho0, grid, Some((t_insert, left, right)), keep_states)
    }

    fn evolve_inner(
        &self,
        rho0: &DensityMatrix,
        grid: &TimeGrid,
        insertion: Option<(f64, Option<&Operator>, Option<&Operator>)>,
        keep_states: bool,
    ) -> Result<Trajectory> {
        let d = self.dim();
        if rho0.dim() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                got: rho0.dim(),
            });
        }
        for op in insertion.iter().flat_map(|(_, l, r)| [l, r]).flatten() {
            if op.dim() != d {
                return Err(Error::DimensionMismatch {
                    expected: d,
                    got: op.dim(),
                });
            }
        }
        let times = grid.times();
        let mut traj = Trajectory {
            times: times.clone(),
            states: keep_states.then(Vec::new),
            observables: Observables::default(),
            hygiene: Hygiene::default(),
            stats: Stats::default(),
        };
        let t_split = insertion.map(|(t, _, _)| t).unwrap_or(f64::INFINITY);
        let (before, after): (Vec<f64>, Vec<f64>) = times.iter().partition(|&&t| t < t_split);
        let limits = self.limits;
        let record = |traj: &mut Trajectory, t: f64, y: &[C64], physical: bool| -> Result<()> {
            let rho = DensityMatrix::from_flat(d, y);
            if physical {
                traj.hygiene.record(t, &rho, &limits)?;
            }
            let (pop, n, f, fl) = self.observe(t, y);
            traj.observables.population.push(pop);
            traj.observables.photon_number.push(n);
            traj.observables.field.push(f);
            traj.observables.fluctuation.push(fl);
            if let Some(states) = traj.states.as_mut() {
                states.push(rho);
            }
            Ok(())
        };
        let mut outs = before.clone();
        if insertion.is_some() {
            outs.push(t_split);
        }
        let (mut y, stats) = if outs.is_empty() {
            (rho0.as_slice().to_vec(), Stats::default())
        } else {
            self.run(grid.t_start, rho0.as_slice(), &outs, |k, t, y| {
                if k < before.len() {
                    record(&mut traj, t, y, true)?;
                }
                Ok(())
            })?
        };
        traj.stats = stats;
        let Some((t_ins, left, right)) = insertion else {
            return Ok(traj);
        };
        let mut m = DensityMatrix::from_flat(d, &y).0;
        if let Some(r) = right {
            m = &r.0 * m;
        }
        if let Some(l) = left {
            m *= &l.0;
        }
        y = m.as_slice().to_vec();
        if !after.is_empty() {
            let (_, s2) = self.run(t_ins, &y, &after, |_, t, yk| record(&mut traj, t, yk, false))?;
            traj.stats.accepted += s2.accepted;
            traj.stats.rejected += s2.rejected;
            traj.stats.evaluations += s2.evaluations;
        }
        Ok(traj)
    }
}

/// Evolves `rho0` under `cfg` and samples the observables on `grid`.
pub fn evolve(rho0: &DensityMatrix, cfg: &ModelConfig, grid: &TimeGrid) -> Result<Trajectory> {
    Dynamics::new(cfg, grid.t_end, grid.stepping)?.evolve(rho0, grid, true)
}

/// As [`evolve`], with the state replaced by `right·ρ·left` at `t_insert`.
pub fn evolve_with_insertion(
    rho0: &DensityMatrix,
    cfg: &ModelConfig,
    t_insert: f64,
    left: Option<&Operator>,
    right: Option<&Operator>,
    grid: &TimeGrid,
) -> Result<Trajectory> {
    Dynamics::new(cfg, grid.t_end, grid.stepping)?.evolve_with_insertion(rho0, grid, t_insert, left, right, true)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{calibrate_area, DeviceParams, PulseEnvelope, Tier};
    use crate::phonon::PhononParams;
    use crate::qcore::lindblad_rhs;

    fn cfg(tier: Tier, pulse: PulseEnvelope, n: usize) -> ModelConfig {
        ModelConfig::new(tier, DeviceParams::device1(4.0), pulse, n).unwrap()
    }

    fn random_state(d: usize, seed: u64) -> DensityMatrix {
        let mut s = seed;
        let mut next = || {
            s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((s >> 11) as f64 / (1u64 << 53) as f64) - 0.5
        };
        let m = nalgebra::DMatrix::from_fn(d, d, |_, _| C64::new(next(), next()));
        let r = &m * m.adjoint();
        let tr = r.trace();
        DensityMatrix(r / tr)
    }

    #[test]
    fn matrix_free_rhs_matches_dense_reference() {
        let mut c = cfg(
            Tier::FullQuantum,
            PulseEnvelope::gaussian_with_area(1.0, 24.0, Some(40.0)).unwrap(),
            3,
        );
        c.cavity_detuning = -0.16;
        c.exciton_detuning = 0.05;
        c.pure_dephasing = 0.01;
        for displaced in [true, false] {
            c.displaced_frame = displaced;
            let gen = Generator::from_config(&c, 100.0).unwrap();
            let m = gen.model();
            let rho = random_state(gen.dim(), 7);
            let mut ws = gen.workspace();
            let mut out = vec![ZERO; gen.dim() * gen.dim()];
            gen.apply(37.0, rho.as_slice(), &mut out, &mut ws).unwrap();
            let reference = lindblad_rhs(&rho, &m.hamiltonian(37.0), &m.collapse).unwrap();
            let err = out
                .iter()
                .zip(reference.as_slice())
                .map(|(a, b)| (a - b).norm())
                .fold(0.0, f64::max);
            assert!(err < 1e-14, "{err}");
        }
    }

    #[test]
    fn phonon_rhs_is_trace_free_and_hermitian() {
        let mut c = cfg(
            Tier::FullPlusPhonons,
            PulseEnvelope::gaussian_with_area(1.0, 24.0, Some(40.0)).unwrap(),
            3,
        );
        calibrate_area(&mut c, 3.0).unwrap();
        c.phonon = Some(PhononParams::default());
        let gen = Generator::from_config(&c, 100.0).unwrap();
        assert!(gen.has_phonons());
        let rho = random_state(gen.dim(), 3);
        let mut ws = gen.workspace();
        let d = gen.dim();
        let mut out = vec![ZERO; d * d];
        gen.apply(40.0, rho.as_slice(), &mut out, &mut ws).unwrap();
        let r = DensityMatrix::from_flat(d, &out);
        assert!(r.trace().norm() < 1e-10);
        assert!(r.hermiticity_error() < 1e-12);
    }

    #[test]
    fn ground_state_is_stationary_without_drive() {
        let c = cfg(Tier::FullQuantum, PulseEnvelope::Cw { amplitude: 0.0 }, 2);
        let dynamics = Dynamics::new(&c, 50.0, Stepping::default()).unwrap();
        let grid = TimeGrid::new(0.0, 50.0, 5.0).unwrap();
        let tr = dynamics.evolve(&dynamics.model().ground_state(), &grid, true).unwrap();
        for s in tr.states.unwrap() {
            assert_eq!(s, dynamics.model().ground_state());
        }
    }

    #[test]
    fn bad_cavity_decay_follows_on_resonance_lifetime() {
        let c = cfg(Tier::BadCavity, PulseEnvelope::Cw { amplitude: 0.0 }, 1);
        let dynamics = Dynamics::new(&c, 200.0, Stepping::default()).unwrap();
        let grid = TimeGrid::new(0.0, 200.0, 10.0).unwrap();
        let tr = dynamics
            .evolve(&dynamics.model().excited_state(), &grid, false)
            .unwrap();
        for (t, p) in tr.times.iter().zip(&tr.observables.population) {
            assert!((p - (-t / 66.3).exp()).abs() < 1e-8, "t = {t}");
        }
    }

    #[test]
    fn insertion_with_identity_is_plain_evolution() {
        let c = cfg(
            Tier::FullQuantum,
            PulseEnvelope::gaussian_with_area(0.5, 24.0, None).unwrap(),
            2,
        );
        let grid = TimeGrid::new(0.0, 80.0, 2.0)
            .unwrap()
            .with_stepping(Stepping::Fixed { step: 0.05 });
        let dynamics = Dynamics::new(&c, 80.0, grid.stepping).unwrap();
        let rho0 = dynamics.model().ground_state();
        let id = Operator::identity(dynamics.dim());
        let a = dynamics.evolve(&rho0, &grid, true).unwrap();
        let b = dynamics
            .evolve_with_insertion(&rho0, &grid, 30.0, Some(&id), Some(&id), true)
            .unwrap();
        assert_eq!(a.observables, b.observables);
    }

    #[test]
    fn lowering_the_ground_state_gives_zero() {
        let c = cfg(Tier::BadCavity, PulseEnvelope::Cw { amplitude: 0.0 }, 1);
        let dynamics = Dynamics::new(&c, 20.0, Stepping::default()).unwrap();
        let grid = TimeGrid::new(0.0, 20.0, 1.0).unwrap();
        let sm = dynamics.model().field.clone();
        let tr = dynamics
            .evolve_with_insertion(&dynamics.model().ground_state(), &grid, 0.0, None, Some(&sm), true)
            .unwrap();
        for s in tr.states.unwrap() {
            assert!(s.0.iter().all(|v| *v == ZERO));
        }
    }

    #[test]
    fn two_time_decay_closed_form() {
        // G(t, τ) = Tr[σ⁻ U_τ(ρ(t) σ⁺)] = e^{−Γt} e^{−Γτ/2} e^{−iΔτ}
        let mut c = cfg(Tier::BadCavity, PulseEnvelope::Cw { amplitude: 0.0 }, 1);
        c.exciton_detuning = -0.3;
        let big_gamma = c.device.bad_cavity_decay();
        let dynamics = Dynamics::new(&c, 150.0, Stepping::default()).unwrap();
        let grid = TimeGrid::new(0.0, 150.0, 5.0).unwrap();
        let sm = dynamics.model().field.clone();
        let sp = sm.dagger();
        let t_ins = 40.0;
        let tr = dynamics
            .evolve_with_insertion(&dynamics.model().excited_state(), &grid, t_ins, Some(&sp), None, true)
            .unwrap();
        for (t, s) in tr.times.iter().zip(tr.states.unwrap()) {
            if *t < t_ins {
                continue;
            }
            let tau = t - t_ins;
            let g = trace_of_product(sm.0.as_slice(), s.as_slice(), 2);
            let exact = C64::new(0.0, 0.3 * tau).exp() * (-big_gamma * t_ins - 0.5 * big_gamma * tau).exp();
            assert!((g - exact).norm() < 1e-6, "τ = {tau}: {g} vs {exact}");
        }
    }

    #[test]
    fn hygiene_is_recorded() {
        let mut c = cfg(
            Tier::FullQuantum,
            PulseEnvelope::gaussian_with_area(1.0, 24.0, None).unwrap(),
            3,
        );
        calibrate_area(&mut c, 2.0).unwrap();
        let dynamics = Dynamics::new(&c, 200.0, Stepping::default()).unwrap();
        let grid = TimeGrid::new(0.0, 200.0, 1.0).unwrap();
        let tr = dynamics.evolve(&dynamics.model().ground_state(), &grid, false).unwrap();
        assert!(tr.hygiene.max_trace_drift < 1e-8);
        assert!(tr.hygiene.max_hermiticity_error < 1e-12);
        assert!(tr.hygiene.min_eigenvalue > -1e-8);
        let peak = tr.observables.population.iter().copied().fold(0.0, f64::max);
        assert!(peak > 0.1);
    }
}
