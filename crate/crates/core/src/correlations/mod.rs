//! Two-time fluctuation correlations by the quantum regression theorem,
//! and the spectra and filtered traces derived from them.
//!
//! The correlation sampled here is `g(t′, τ) = ⟨a_δ†(t′) a_δ(t′+τ)⟩` with
//! `a_δ = a − ⟨a⟩`. A c-number displacement of the field drops out of
//! `a_δ`, so the simulation-frame field operator is used directly.

mod filter;
mod spectrum;

use std::collections::VecDeque;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

pub use filter::{
    check_filter_window, convolve_irf, filtered_time_trace, spectrometer_convolve, FilterSpec, FilteredTrace, IrfSpec,
};
pub use spectrum::{
    band_integral, check_resolution, omega_grid, spectrum, spectrum_at, time_resolved_map, SpectrumMap, SpectrumResult,
};

use crate::error::{Error, Result};
use crate::model::ModelConfig;
use crate::ode::{self, Stepping};
use crate::parallel::{self, ExecMode};
use crate::propagate::{Dynamics, Generator, Hygiene};
use crate::qcore::{gemm, trace_of_product, DensityMatrix, SparseOp, C64, ONE, ZERO};

/// Largest Hilbert-space dimension for which the superoperator engine is
/// chosen automatically.
pub const PROPAGATOR_MAX_DIM: usize = 12;

/// Intervals whose propagators are built together in one parallel batch.
const PROPAGATOR_CHUNK: usize = 32;

/// Relative drive change below which the generator counts as stationary.
const STATIONARY_REL: f64 = 1e-10;

/// The stationary continuation stops once the carried state has decayed
/// by this factor from its largest norm.
const TAIL_REL: f64 = 1e-12;

/// Upper bound on continuation steps, as a multiple of the sampled steps.
const TAIL_MAX_FACTOR: usize = 200;

/// Upper bound on t′ samples summed past `t_end`, as a multiple of the
/// sampled rows.
const TAIL_LATER_ROWS: usize = 20;

/// How the τ evolutions are carried out.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Engine {
    /// Propagator for small systems, direct otherwise.
    #[default]
    Auto,
    /// Builds the `D² × D²` step propagator for each `Δτ` interval once and
    /// advances every inserted matrix with it.
    Propagator,
    /// Integrates each inserted matrix separately.
    Direct,
}

/// Sampling of the correlation triangle.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CorrelationSpec {
    /// Last sampled absolute time, ps; a multiple of `dt_prime`.
    pub t_end: f64,
    pub dt_prime: f64,
    pub dtau: f64,
    /// Longest delay kept; the full triangle when `None`.
    pub tau_max: Option<f64>,
    pub engine: Engine,
    pub stepping: Stepping,
    /// Continue every row past `t_end` with the stationary propagator so the
    /// long-time spectrum carries no truncation ripple. Needs the propagator
    /// engine, a full triangle and a generator that is constant at `t_end`.
    #[serde(default = "default_tail")]
    pub stationary_tail: bool,
    #[serde(skip)]
    pub exec: ExecMode,
}

fn default_tail() -> bool {
    true
}

impl CorrelationSpec {
    pub fn new(t_end: f64) -> Self {
        Self {
            t_end,
            dt_prime: 1.0,
            dtau: 0.5,
            tau_max: None,
            engine: Engine::Auto,
            stepping: Stepping::default(),
            stationary_tail: true,
            exec: ExecMode::default(),
        }
    }

    /// Steps `(Δτ intervals, t′ stride in Δτ units, τ samples per row − 1)`.
    fn layout(&self) -> Result<(usize, usize, usize)> {
        let pos = |v: f64| v.is_finite() && v > 0.0;
        if !pos(self.dtau) || !pos(self.dt_prime) || !pos(self.t_end) {
            return Err(Error::config(
                "correlation",
                "t_end, dt_prime and dtau must be positive",
            ));
        }
        let ratio = self.dt_prime / self.dtau;
        let r = ratio.round();
        if r < 1.0 || (ratio - r).abs() > 1e-9 * ratio {
            return Err(Error::config(
                "correlation.dt_prime_ps",
                "must be an integer multiple of dtau_ps",
            ));
        }
        let r = r as usize;
        let m = self.t_end / self.dt_prime;
        if (m - m.round()).abs() > 1e-9 * m.max(1.0) {
            return Err(Error::config(
                "correlation.t_end_ps",
                "must be a multiple of dt_prime_ps",
            ));
        }
        let k = m.round() as usize * r;
        let l = match self.tau_max {
            None => k,
            Some(t) if t >= 0.0 => ((t / self.dtau + 1e-9).floor() as usize).min(k),
            Some(_) => return Err(Error::config("correlation.tau_max_ps", "must be non-negative")),
        };
        Ok((k, r, l))
    }
}

/// Sampled `g(t′, τ)` on the triangle `t′ + τ ≤ t_end`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CorrelationGrid {
    pub dt_prime: f64,
    pub dtau: f64,
    pub t_end: f64,
    pub t_prime: Vec<f64>,
    /// `rows[i][j] = g(t′_i, j·Δτ)`; rows shorten towards `t_end`.
    pub rows: Vec<Vec<C64>>,
    /// Absolute times `kΔτ` of the mean-field series.
    pub times: Vec<f64>,
    /// Lab-frame `⟨a⟩` (or `⟨σ⁻⟩` without a cavity) on `times`.
    pub mean_field: Vec<C64>,
    /// Emitter population on `times`.
    pub population: Vec<f64>,
    pub hygiene: Hygiene,
    pub engine: Engine,
    /// `tail[j] = Σ g(t′, jΔτ)` over the samples the triangle leaves out:
    /// delays reaching past `t_end`, and rows starting after it when the
    /// fluctuations die out. Empty when no continuation was computed.
    #[serde(default)]
    pub tail: Vec<C64>,
}

impl CorrelationGrid {
    /// t′ stride in units of Δτ.
    pub fn stride(&self) -> usize {
        (self.dt_prime / self.dtau).round() as usize
    }

    /// Delay axis of the longest row.
    pub fn tau(&self) -> Vec<f64> {
        let n = self.rows.first().map_or(0, Vec::len);
        (0..n).map(|j| j as f64 * self.dtau).collect()
    }

    pub fn value(&self, i: usize, j: usize) -> Option<C64> {
        self.rows.get(i).and_then(|r| r.get(j)).copied()
    }

    /// `⟨a_δ† a_δ⟩(t′)`, the real part of `g(t′, 0)`.
    pub fn fluctuation(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r[0].re).collect()
    }

    /// `G(t′_a, t′_b)` with the Hermitian extension below the diagonal;
    /// `None` beyond the stored delays.
    pub fn two_time(&self, a: usize, b: usize) -> Option<C64> {
        let r = self.stride();
        if b >= a {
            self.value(a, (b - a) * r)
        } else {
            self.value(b, (a - b) * r).map(|v| v.conj())
        }
    }

    /// Largest delay present in every row that is cut only by `t_end`.
    pub fn tau_span(&self) -> f64 {
        self.rows.first().map_or(0.0, |r| (r.len() - 1) as f64 * self.dtau)
    }

    pub fn is_zero(&self, tol: f64) -> bool {
        self.rows.iter().flatten().all(|v| v.norm() <= tol)
    }
}

/// Computes `g(t′, τ)` for `cfg` starting from the ground state at `t = 0`.
pub fn two_time_correlation(cfg: &ModelConfig, spec: &CorrelationSpec) -> Result<CorrelationGrid> {
    let dynamics = Dynamics::new(cfg, spec.t_end, spec.stepping)?;
    correlate(&dynamics, spec)
}

/// As [`two_time_correlation`] for an already compiled model.
pub fn correlate(dynamics: &Dynamics, spec: &CorrelationSpec) -> Result<CorrelationGrid> {
    correlate_from(dynamics, spec, &dynamics.model().ground_state())
}

/// As [`correlate`] with an explicit state at `t = 0`.
pub fn correlate_from(dynamics: &Dynamics, spec: &CorrelationSpec, rho0: &DensityMatrix) -> Result<CorrelationGrid> {
    if rho0.dim() != dynamics.dim() {
        return Err(Error::DimensionMismatch {
            expected: dynamics.dim(),
            got: rho0.dim(),
        });
    }
    let layout = spec.layout()?;
    let engine = match spec.engine {
        Engine::Auto if dynamics.dim() <= PROPAGATOR_MAX_DIM => Engine::Propagator,
        Engine::Auto => Engine::Direct,
        e => e,
    };
    let sweep = Sweep::new(dynamics, spec, layout, rho0);
    match engine {
        Engine::Propagator => sweep.propagator(),
        _ => sweep.direct(),
    }
}

/// Advances a flattened matrix by one `Δτ` under the stationary generator.
type StationaryStep<'s> = dyn FnMut(&mut Vec<C64>) -> Result<()> + 's;

struct Sweep<'a> {
    dynamics: &'a Dynamics,
    spec: &'a CorrelationSpec,
    steps: usize,
    stride: usize,
    max_lag: usize,
    d: usize,
    field: SparseOp,
    rho0: &'a DensityMatrix,
}

/// `Tr[fΛ] − ⟨f⟩·TrΛ`.
fn fluct_corr(f: &[C64], lam: &[C64], mean: C64, d: usize) -> C64 {
    let tr = lam.iter().step_by(d + 1).fold(ZERO, |a, v| a + v);
    trace_of_product(f, lam, d) - mean * tr
}

impl<'a> Sweep<'a> {
    fn new(
        dynamics: &'a Dynamics,
        spec: &'a CorrelationSpec,
        (steps, stride, max_lag): (usize, usize, usize),
        rho0: &'a DensityMatrix,
    ) -> Self {
        let model = dynamics.model();
        Self {
            dynamics,
            spec,
            steps,
            stride,
            max_lag,
            d: model.dim,
            field: SparseOp::from_operator(&model.field),
            rho0,
        }
    }

    fn time(&self, k: usize) -> f64 {
        k as f64 * self.spec.dtau
    }

    fn row_len(&self, k: usize) -> usize {
        self.max_lag.min(self.steps - k) + 1
    }

    /// `Λ = ρ (f† − ⟨f⟩*)`.
    fn insert(&self, rho: &[C64], mean: C64) -> Vec<C64> {
        let mut lam: Vec<C64> = rho.iter().map(|v| -mean.conj() * v).collect();
        self.field.right_mul_dagger_acc(ONE, rho, &mut lam);
        lam
    }

    fn field_dense(&self) -> &[C64] {
        self.dynamics.model().field.0.as_slice()
    }

    fn finish(
        &self,
        rows: Vec<Vec<C64>>,
        mean_sim: Vec<C64>,
        population: Vec<f64>,
        traces: Vec<C64>,
        hygiene: Hygiene,
        engine: Engine,
    ) -> CorrelationGrid {
        let model = self.dynamics.model();
        let times: Vec<f64> = (0..=self.steps).map(|k| self.time(k)).collect();
        let mean_field = times
            .iter()
            .zip(mean_sim.iter().zip(&traces))
            .map(|(&t, (&m, &tr))| m + model.field_offset(t) * tr)
            .collect();
        CorrelationGrid {
            dt_prime: self.spec.dt_prime,
            dtau: self.spec.dtau,
            t_end: self.spec.t_end,
            t_prime: (0..rows.len()).map(|i| self.time(i * self.stride)).collect(),
            rows,
            times,
            mean_field,
            population,
            hygiene,
            engine,
            tail: Vec::new(),
        }
    }

    fn observe(&self, rho: &[C64]) -> (C64, f64, C64) {
        let model = self.dynamics.model();
        let mean = trace_of_product(self.field_dense(), rho, self.d);
        let pop = trace_of_product(model.excited.0.as_slice(), rho, self.d).re;
        let tr = rho.iter().step_by(self.d + 1).fold(ZERO, |a, v| a + v);
        (mean, pop, tr)
    }

    /// Superoperator of the interval `[s_k, s_{k+1}]`; column `p` is the
    /// evolved `p`-th matrix unit.
    fn interval_propagator(&self, generator: &Generator, k: usize) -> Result<Vec<C64>> {
        let d2 = self.d * self.d;
        let mut y = vec![ZERO; d2 * d2];
        for p in 0..d2 {
            y[p * d2 + p] = ONE;
        }
        let mut ws = generator.workspace();
        let mut sys = generator.system(&mut ws);
        let hint = match self.spec.stepping {
            Stepping::Fixed { .. } => None,
            Stepping::Adaptive { .. } => Some(0.05f64.min(self.spec.dtau)),
        };
        ode::advance(
            &mut sys,
            self.time(k),
            self.time(k + 1),
            &mut y,
            self.spec.stepping,
            hint,
        )?;
        Ok(y)
    }

    fn propagator(&self) -> Result<CorrelationGrid> {
        let generator: &Arc<Generator> = &self.dynamics.generator;
        let model = self.dynamics.model();
        let (d, d2, steps) = (self.d, self.d * self.d, self.steps);
        let t_stat = model.stationary_after(self.spec.t_end, self.spec.dtau, STATIONARY_REL);
        let k_stat = ((t_stat / self.spec.dtau - 1e-9).ceil().max(0.0) as usize).min(steps);
        let stationary = if k_stat < steps {
            Some(self.interval_propagator(generator, k_stat)?)
        } else {
            None
        };

        let f = self.field_dense();
        let limits = self.dynamics.limits;
        let mut hygiene = Hygiene::default();
        let mut rho = self.rho0.as_slice().to_vec();
        let mut rho_next = vec![ZERO; d2];
        let mut lam: Vec<C64> = Vec::new();
        let mut lam_next: Vec<C64> = Vec::new();
        let mut owners: VecDeque<usize> = VecDeque::new();
        let mut rows: Vec<Vec<C64>> = Vec::new();
        let mut mean = Vec::with_capacity(steps + 1);
        let mut population = Vec::with_capacity(steps + 1);
        let mut traces = Vec::with_capacity(steps + 1);

        let mut record = |k: usize, rho: &[C64], lam: &mut Vec<C64>, owners: &mut VecDeque<usize>| -> Result<()> {
            let t = self.time(k);
            hygiene.record(t, &DensityMatrix::from_flat(d, rho), &limits)?;
            let (m, pop, tr) = self.observe(rho);
            mean.push(m);
            population.push(pop);
            traces.push(tr);
            for (c, &i) in owners.iter().enumerate() {
                rows[i].push(fluct_corr(f, &lam[c * d2..(c + 1) * d2], m, d));
            }
            while let Some(&i) = owners.front() {
                if rows[i].len() < self.row_len(i * self.stride) {
                    break;
                }
                owners.pop_front();
                lam.drain(..d2);
            }
            if k.is_multiple_of(self.stride) {
                let new = self.insert(rho, m);
                let mut row = Vec::with_capacity(self.row_len(k));
                row.push(fluct_corr(f, &new, m, d));
                let done = row.len() >= self.row_len(k);
                rows.push(row);
                if !done {
                    owners.push_back(rows.len() - 1);
                    lam.extend_from_slice(&new);
                }
            }
            Ok(())
        };

        let mut k0 = 0;
        while k0 < steps {
            let k1 = (k0 + PROPAGATOR_CHUNK).min(steps);
            let props = parallel::try_map(self.spec.exec, k1 - k0, |j| {
                let k = k0 + j;
                if k >= k_stat {
                    Ok(None)
                } else {
                    self.interval_propagator(generator, k).map(Some)
                }
            })?;
            for k in k0..k1 {
                record(k, &rho, &mut lam, &mut owners)?;
                let u = props[k - k0]
                    .as_deref()
                    .or(stationary.as_deref())
                    .expect("propagator for every interval");
                gemm(d2, d2, 1, ONE, u, &rho, ZERO, &mut rho_next);
                std::mem::swap(&mut rho, &mut rho_next);
                let cols = lam.len() / d2;
                if cols > 0 {
                    lam_next.resize(lam.len(), ZERO);
                    gemm(d2, d2, cols, ONE, u, &lam, ZERO, &mut lam_next);
                    std::mem::swap(&mut lam, &mut lam_next);
                }
            }
            k0 = k1;
        }
        // Λ(t_end) of every row that reaches t_end, ordered by remaining
        // length: rows still owned, then the one inserted at t_end.
        let ends = if self.spec.stationary_tail && self.max_lag == steps {
            stationary.as_ref().map(|_| {
                let mut v = lam.clone();
                if steps.is_multiple_of(self.stride) {
                    v.extend(self.insert(&rho, trace_of_product(f, &rho, d)));
                }
                v
            })
        } else {
            None
        };
        record(steps, &rho, &mut lam, &mut owners)?;
        let peak_fluct = rows.iter().map(|r| r[0].re).fold(0.0, f64::max);
        let mut grid = self.finish(rows, mean, population, traces, hygiene, Engine::Propagator);
        if let (Some(ends), Some(u)) = (ends, stationary.as_deref()) {
            let mut scratch = vec![ZERO; d2];
            let mut step = |x: &mut Vec<C64>| {
                gemm(d2, d2, 1, ONE, u, x, ZERO, &mut scratch);
                std::mem::swap(x, &mut scratch);
                Ok(())
            };
            let later = self.later_rows(&mut step, &rho, peak_fluct)?;
            grid.tail = self.continue_rows(&mut step, &ends, later.as_deref())?;
        }
        Ok(grid)
    }

    /// `Σ Λ(t′)` over the t′ samples past `t_end`, continuing the state with
    /// the stationary propagator until its fluctuation has died out. `None`
    /// when it does not (a drive still on), since the sum then diverges.
    fn later_rows(&self, step: &mut StationaryStep, rho_end: &[C64], peak_fluct: f64) -> Result<Option<Vec<C64>>> {
        let (d, d2) = (self.d, self.d * self.d);
        let f = self.field_dense();
        let cap = TAIL_LATER_ROWS * (self.steps / self.stride).max(1);
        let mut rho = rho_end.to_vec();
        let mut sum = vec![ZERO; d2];
        for _ in 0..cap {
            for _ in 0..self.stride {
                step(&mut rho)?;
            }
            let lam = self.insert(&rho, trace_of_product(f, &rho, d));
            let fluct = trace_of_product(f, &lam, d).re;
            for (a, b) in sum.iter_mut().zip(&lam) {
                *a += b;
            }
            if fluct.abs() <= TAIL_REL * peak_fluct {
                return Ok(Some(sum));
            }
        }
        log::debug!("fluctuations persist past t_end; later rows left out of the long-time spectrum");
        Ok(None)
    }

    /// Extends the rows ending at `t_end` with the stationary one-`Δτ` map
    /// `step`. `ends` holds their `Λ(t_end)` columns, oldest row
    /// first, and row `c` of them has `n_c = (columns − 1 − c)·stride` stored
    /// lags. `later` is the summed `Λ` of rows starting after `t_end`, which
    /// enter at lag 0.
    fn continue_rows(&self, step: &mut StationaryStep, ends: &[C64], later: Option<&[C64]>) -> Result<Vec<C64>> {
        let d2 = self.d * self.d;
        let cols = ends.len() / d2;
        if cols == 0 {
            return Ok(Vec::new());
        }
        let f = self.field_dense();
        // Remaining row length at t_end of column c.
        let remaining = |c: usize| (cols - 1 - c) * self.stride;
        let last_injection = remaining(0);
        let cap = TAIL_MAX_FACTOR * self.steps.max(1) + last_injection;
        let mut carried = later.map_or_else(|| vec![ZERO; d2], <[C64]>::to_vec);
        let mut tail = vec![trace_of_product(f, &carried, self.d)];
        let mut peak = 0.0f64;
        let mut c = cols;
        for j in 0.. {
            // Inject the rows whose stored samples end at lag index j.
            while c > 0 && remaining(c - 1) == j {
                c -= 1;
                for (a, b) in carried.iter_mut().zip(&ends[c * d2..(c + 1) * d2]) {
                    *a += b;
                }
            }
            step(&mut carried)?;
            let norm = carried.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt();
            peak = peak.max(norm);
            if !norm.is_finite() {
                return Err(Error::numerics("correlation", "stationary continuation diverged"));
            }
            if j >= last_injection && norm <= TAIL_REL * peak {
                break;
            }
            if j >= cap {
                log::warn!(
                    "stationary continuation stopped after {j} steps at relative norm {:.1e}",
                    norm / peak
                );
                break;
            }
            tail.push(trace_of_product(f, &carried, self.d));
        }
        Ok(tail)
    }

    fn direct(&self) -> Result<CorrelationGrid> {
        let (d, steps) = (self.d, self.steps);
        let f = self.field_dense();
        let limits = self.dynamics.limits;
        let outputs: Vec<f64> = (0..=steps).map(|k| self.time(k)).collect();
        let mut hygiene = Hygiene::default();
        let mut mean = Vec::with_capacity(steps + 1);
        let mut population = Vec::with_capacity(steps + 1);
        let mut traces = Vec::with_capacity(steps + 1);
        let mut inserted: Vec<Vec<C64>> = Vec::new();
        let mut rho_end = Vec::new();
        self.dynamics.run(0.0, self.rho0.as_slice(), &outputs, |k, t, y| {
            if k == steps {
                rho_end = y.to_vec();
            }
            hygiene.record(t, &DensityMatrix::from_flat(d, y), &limits)?;
            let (m, pop, tr) = self.observe(y);
            mean.push(m);
            population.push(pop);
            traces.push(tr);
            if k.is_multiple_of(self.stride) {
                inserted.push(self.insert(y, m));
            }
            Ok(())
        })?;

        let rows = parallel::try_map(self.spec.exec, inserted.len(), |i| {
            let k = i * self.stride;
            let len = self.row_len(k);
            let lam = &inserted[i];
            let mut row = Vec::with_capacity(len);
            row.push(fluct_corr(f, lam, mean[k], d));
            let mut end = lam.clone();
            if len > 1 {
                let outs = &outputs[k + 1..k + len];
                self.dynamics.run(outputs[k], lam, outs, |j, _, y| {
                    row.push(fluct_corr(f, y, mean[k + 1 + j], d));
                    if j + 2 == len {
                        end.copy_from_slice(y);
                    }
                    Ok(())
                })?;
            }
            Ok((row, end))
        })?;
        let (rows, ends): (Vec<_>, Vec<_>) = rows.into_iter().unzip();
        let peak_fluct = rows.iter().map(|r| r[0].re).fold(0.0, f64::max);
        let mut grid = self.finish(rows, mean, population, traces, hygiene, Engine::Direct);

        let model = self.dynamics.model();
        let t_stat = model.stationary_after(self.spec.t_end, self.spec.dtau, STATIONARY_REL);
        let k_stat = ((t_stat / self.spec.dtau - 1e-9).ceil().max(0.0) as usize).min(steps);
        if self.spec.stationary_tail && self.max_lag == steps && k_stat < steps {
            // The generator no longer changes past t_stat, so one Δτ there
            // stands for every later interval.
            let (t0, t1) = (self.time(k_stat), self.time(k_stat + 1));
            let mut step = |x: &mut Vec<C64>| {
                let (y, _) = self.dynamics.run(t0, x, &[t1], |_, _, _| Ok(()))?;
                *x = y;
                Ok(())
            };
            let ends = ends.concat();
            let later = self.later_rows(&mut step, &rho_end, peak_fluct)?;
            grid.tail = self.continue_rows(&mut step, &ends, later.as_deref())?;
        }
        Ok(grid)
    }
}
