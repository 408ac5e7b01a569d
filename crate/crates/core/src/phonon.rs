//! Acoustic-phonon coupling in the polaron frame.
//!
//! The bath is described by the super-ohmic spectral density
//! `J(ω) = α_p ω³ exp(−ω²/2ω_b²)`. The polaron transform renormalizes the
//! coherent emitter couplings by `⟨B⟩ = exp(−φ(0)/2)` and leaves a
//! second-order, time-local scattering term built from the kernels
//! `G_g = cosh φ − 1` and `G_u = sinh φ`.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::qcore::{
    dense_left_mul_acc, dense_right_mul_acc, gemm, DensityMatrix, Operator, SparseOp, C64, I, ONE, ZERO,
};
use crate::quadrature::{gauss_legendre, integrate_adaptive};
use crate::units::{thermal_frequency, thz_to_rad_ps};

pub const DEFAULT_ALPHA_PS2: f64 = 0.005;
pub const DEFAULT_OMEGA_B_THZ: f64 = 1.0;
pub const DEFAULT_TAU_CUTOFF_PS: f64 = 5.0;

/// Upper frequency cutoff of the bath integrals in units of `omega_b`.
const OMEGA_CUTOFF_FACTOR: f64 = 8.0;
/// Kernel nodes: two Gauss–Legendre panels of this many points each.
const KERNEL_PANEL_NODES: usize = 32;
/// Half-width (rad/ps) and spacing of the tabulated kernel transforms.
const TABLE_HALF_WIDTH: f64 = 25.0;
const TABLE_STEP: f64 = 0.005;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhononParams {
    /// Coupling strength α_p, ps².
    pub alpha_p: f64,
    /// Cutoff frequency ω_b, rad/ps.
    pub omega_b: f64,
    pub temperature_k: f64,
    /// Upper limit of the memory-kernel integral, ps.
    pub tau_cutoff: f64,
}

impl Default for PhononParams {
    fn default() -> Self {
        Self {
            alpha_p: DEFAULT_ALPHA_PS2,
            omega_b: thz_to_rad_ps(DEFAULT_OMEGA_B_THZ),
            temperature_k: 4.0,
            tau_cutoff: DEFAULT_TAU_CUTOFF_PS,
        }
    }
}

impl PhononParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha_p >= 0.0) || !self.alpha_p.is_finite() {
            return Err(Error::config("phonon.alpha_ps2", "must be finite and non-negative"));
        }
        if !(self.omega_b > 0.0) {
            return Err(Error::config("phonon.omega_b_THz", "must be positive"));
        }
        if !(self.tau_cutoff > 0.0) {
            return Err(Error::config("phonon.tau_cutoff_ps", "must be positive"));
        }
        if !(self.temperature_k >= 0.0) {
            return Err(Error::config("device.temperature_K", "must be non-negative"));
        }
        Ok(())
    }
}

pub fn spectral_density(omega: f64, p: &PhononParams) -> f64 {
    let x = omega / p.omega_b;
    p.alpha_p * omega.powi(3) * (-0.5 * x * x).exp()
}

/// `ω·coth(ω / 2k_BT)`, regular at ω → 0 and T → 0.
fn omega_coth(omega: f64, kt: f64) -> f64 {
    if kt == 0.0 {
        return omega;
    }
    let x = omega / (2.0 * kt);
    if x.abs() < 1e-4 {
        2.0 * kt * (1.0 + x * x / 3.0)
    } else {
        omega / x.tanh()
    }
}

/// Bath correlation `φ(τ) = ∫ J(ω)/ω² [coth(ω/2k_BT) cos ωτ − i sin ωτ] dω`.
pub fn phonon_correlation(tau: f64, p: &PhononParams) -> Result<C64> {
    phonon_correlation_tol(tau, p, 1e-10)
}

fn phonon_correlation_tol(tau: f64, p: &PhononParams, rel_tol: f64) -> Result<C64> {
    if p.alpha_p == 0.0 {
        return Ok(ZERO);
    }
    let kt = thermal_frequency(p.temperature_k);
    let wb = p.omega_b;
    let scale = p.alpha_p * wb * wb * (1.0 + kt / wb);
    let integrand = |w: f64| {
        let envelope = p.alpha_p * (-0.5 * (w / wb).powi(2)).exp();
        let (s, c) = (w * tau).sin_cos();
        C64::new(envelope * omega_coth(w, kt) * c, -envelope * w * s)
    };
    let (v, _) = integrate_adaptive(
        integrand,
        0.0,
        OMEGA_CUTOFF_FACTOR * wb,
        1e-3 * rel_tol * scale,
        rel_tol,
        20_000,
    )?;
    Ok(v)
}

/// Polaron renormalization `⟨B⟩ = exp(−φ(0)/2)`.
pub fn b_average(p: &PhononParams) -> Result<f64> {
    p.validate()?;
    let phi0 = phonon_correlation(0.0, p)?;
    Ok((-0.5 * phi0.re).exp())
}

/// Which polaron kernel: `G_g = cosh φ − 1` or `G_u = sinh φ`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Channel {
    G,
    U,
}

/// Memory kernels of one bath and their one-sided Fourier transforms
/// `Ĝ_m(ω) = ∫₀^{τ_c} G_m(τ) e^{−iωτ} dτ`, tabulated for cubic interpolation.
#[derive(Debug, Clone)]
pub struct PolaronKernel {
    b_avg: f64,
    phi0: f64,
    nodes: Vec<f64>,
    weights: Vec<f64>,
    kernels: [Vec<C64>; 2],
    table: [Vec<C64>; 2],
    dtable: [Vec<C64>; 2],
}

impl PolaronKernel {
    pub fn new(p: &PhononParams) -> Result<Self> {
        p.validate()?;
        let phi0 = phonon_correlation(0.0, p)?.re;
        if p.alpha_p > 0.0 {
            let tail = phonon_correlation(p.tau_cutoff, p)?;
            if tail.norm() >= 1e-4 * phi0.abs() {
                return Err(Error::config(
                    "phonon.tau_cutoff_ps",
                    format!(
                        "bath correlation has not decayed at τ_c = {} ps (|φ(τ_c)|/φ(0) = {:.2e}); increase the cutoff",
                        p.tau_cutoff,
                        tail.norm() / phi0
                    ),
                ));
            }
        }
        let split = 0.25 * p.tau_cutoff;
        let (mut nodes, mut weights) = gauss_legendre(KERNEL_PANEL_NODES, 0.0, split);
        let (n2, w2) = gauss_legendre(KERNEL_PANEL_NODES, split, p.tau_cutoff);
        nodes.extend(n2);
        weights.extend(w2);
        let mut kg = Vec::with_capacity(nodes.len());
        let mut ku = Vec::with_capacity(nodes.len());
        for &tau in &nodes {
            let phi = phonon_correlation(tau, p)?;
            kg.push(phi.cosh() - ONE);
            ku.push(phi.sinh());
        }
        let mut kernel = Self {
            b_avg: (-0.5 * phi0).exp(),
            phi0,
            nodes,
            weights,
            kernels: [kg, ku],
            table: [Vec::new(), Vec::new()],
            dtable: [Vec::new(), Vec::new()],
        };
        let n = (2.0 * TABLE_HALF_WIDTH / TABLE_STEP).round() as usize + 1;
        for m in 0..2 {
            let mut vals = Vec::with_capacity(n);
            let mut ders = Vec::with_capacity(n);
            for k in 0..n {
                let w = -TABLE_HALF_WIDTH + k as f64 * TABLE_STEP;
                let (v, d) = kernel.transform_direct(m, w);
                vals.push(v);
                ders.push(d);
            }
            kernel.table[m] = vals;
            kernel.dtable[m] = ders;
        }
        Ok(kernel)
    }

    pub fn b_avg(&self) -> f64 {
        self.b_avg
    }

    pub fn phi0(&self) -> f64 {
        self.phi0
    }

    pub fn is_trivial(&self) -> bool {
        self.kernels.iter().all(|k| k.iter().all(|v| *v == ZERO))
    }

    /// `(Ĝ_m(ω), dĜ_m/dω)` by direct quadrature over the kernel nodes.
    fn transform_direct(&self, m: usize, w: f64) -> (C64, C64) {
        let mut v = ZERO;
        let mut d = ZERO;
        for ((&tau, &wt), &g) in self.nodes.iter().zip(&self.weights).zip(&self.kernels[m]) {
            let term = g * C64::new(0.0, -w * tau).exp() * wt;
            v += term;
            d += term * C64::new(0.0, -tau);
        }
        (v, d)
    }

    pub fn transform(&self, channel: Channel, w: f64) -> C64 {
        let m = channel as usize;
        if w.abs() >= TABLE_HALF_WIDTH {
            return self.transform_direct(m, w).0;
        }
        let x = (w + TABLE_HALF_WIDTH) / TABLE_STEP;
        let k = (x.floor() as usize).min(self.table[m].len() - 2);
        let s = x - k as f64;
        let s2 = s * s;
        let s3 = s2 * s;
        let h00 = 2.0 * s3 - 3.0 * s2 + 1.0;
        let h10 = s3 - 2.0 * s2 + s;
        let h01 = -2.0 * s3 + 3.0 * s2;
        let h11 = s3 - s2;
        self.table[m][k] * h00
            + self.dtable[m][k] * (h10 * TABLE_STEP)
            + self.table[m][k + 1] * h01
            + self.dtable[m][k + 1] * (h11 * TABLE_STEP)
    }

    /// Scattering operators for the frozen system Hamiltonian `h_sys` and
    /// emitter coupling `K` (so that `X_g = ⟨B⟩(σ⁺K + K†σ⁻)`).
    pub fn snapshot(&self, h_sys: &Operator, coupling: &Operator, sigma_plus: &Operator) -> Result<PolaronSnapshot> {
        let d = h_sys.dim();
        let p = sigma_plus.mul(coupling).0;
        let pd = p.adjoint();
        let b = C64::new(self.b_avg, 0.0);
        let xs = [(&p + &pd) * b, (&p - &pd) * (I * b)];
        let herm = (&h_sys.0 + h_sys.0.adjoint()) * C64::new(0.5, 0.0);
        let eig = nalgebra::SymmetricEigen::try_new(herm, 1e-14, 10_000)
            .ok_or_else(|| Error::numerics("polaron dissipator", "eigendecomposition did not converge"))?;
        let v = &eig.eigenvectors;
        let vd = v.adjoint();
        let e = &eig.eigenvalues;
        let mut ys: [DMatrix<C64>; 2] = [DMatrix::zeros(d, d), DMatrix::zeros(d, d)];
        for (m, ch) in [Channel::G, Channel::U].into_iter().enumerate() {
            let mut xp = &vd * &xs[m] * v;
            for j in 0..d {
                for i in 0..d {
                    if xp[(i, j)] != ZERO {
                        xp[(i, j)] *= self.transform(ch, e[i] - e[j]);
                    }
                }
            }
            ys[m] = v * xp * &vd;
        }
        let a = &xs[0] * &ys[0] + &xs[1] * &ys[1];
        let mut left_stack = Vec::with_capacity(3 * d * d);
        left_stack.extend(a.iter().map(|v| -v));
        left_stack.extend(ys[0].iter().copied());
        left_stack.extend(ys[1].iter().copied());
        let mut right_stack = vec![ZERO; 3 * d * d];
        for (m, src) in [&a, &ys[0], &ys[1]].into_iter().enumerate() {
            for k in 0..d {
                for r in 0..d {
                    right_stack[(m * d + r) + 3 * d * k] = src[(r, k)].conj();
                }
            }
        }
        Ok(PolaronSnapshot {
            dim: d,
            x: [
                SparseOp::from_operator(&Operator(xs[0].clone())),
                SparseOp::from_operator(&Operator(xs[1].clone())),
            ],
            y: [ys[0].as_slice().to_vec(), ys[1].as_slice().to_vec()],
            y_dag: [ys[0].adjoint().as_slice().to_vec(), ys[1].adjoint().as_slice().to_vec()],
            a: a.as_slice().to_vec(),
            a_dag: a.adjoint().as_slice().to_vec(),
            left_stack,
            right_stack,
        })
    }
}

/// The polaron dissipator for one frozen Hamiltonian,
/// `D(ρ) = −Σ_m (X_m Y_m ρ − Y_m ρ X_m + ρ Y_m† X_m − X_m ρ Y_m†)` with
/// `Y_m = ∫₀^{τ_c} G_m(τ) X̃_m(−τ) dτ`.
#[derive(Debug, Clone)]
pub struct PolaronSnapshot {
    dim: usize,
    x: [SparseOp; 2],
    y: [Vec<C64>; 2],
    y_dag: [Vec<C64>; 2],
    a: Vec<C64>,
    a_dag: Vec<C64>,
    left_stack: Vec<C64>,
    right_stack: Vec<C64>,
}

impl PolaronSnapshot {
    /// `out += D(ρ)`; `tmp` is scratch space of length D².
    pub fn apply_acc(&self, rho: &[C64], out: &mut [C64], tmp: &mut [C64]) {
        let d = self.dim;
        dense_left_mul_acc(-ONE, &self.a, rho, out, d);
        dense_right_mul_acc(-ONE, rho, &self.a_dag, out, d);
        for m in 0..2 {
            tmp.fill(ZERO);
            self.x[m].right_mul_acc(ONE, rho, tmp);
            dense_left_mul_acc(ONE, &self.y[m], tmp, out, d);
            tmp.fill(ZERO);
            dense_right_mul_acc(ONE, rho, &self.y_dag[m], tmp, d);
            self.x[m].left_mul_acc(ONE, tmp, out);
        }
    }

    /// `out_p += D(ρ_p)` for every `D × D` block of `y`, with the dense
    /// products done as two stacked matrix multiplications over the batch.
    pub fn apply_batch_acc(&self, y: &[C64], out: &mut [C64], scratch: &mut BatchScratch) {
        let d = self.dim;
        let d2 = d * d;
        let n = y.len() / d2;
        let rows = 3 * d;
        let cols = n * d;
        scratch.resize(rows * cols, d2);
        let BatchScratch { stack, result, block } = scratch;

        // Block-transposed copy of y, then ρ_p·M for M ∈ {A†, Y₀†, Y₁†} in one product.
        for p in 0..n {
            let rho = &y[p * d2..(p + 1) * d2];
            let dst = &mut stack[p * d2..(p + 1) * d2];
            for k in 0..d {
                for i in 0..d {
                    dst[k + i * d] = rho[i + k * d];
                }
            }
        }
        gemm(
            rows,
            d,
            cols,
            ONE,
            &self.right_stack,
            &stack[..cols * d],
            ZERO,
            &mut result[..rows * cols],
        );
        for p in 0..n {
            let o = &mut out[p * d2..(p + 1) * d2];
            for m in 0..3 {
                for a in 0..d {
                    for i in 0..d {
                        block[i + a * d] = result[(m * d + a) + rows * (p * d + i)];
                    }
                }
                if m == 0 {
                    for (ov, bv) in o.iter_mut().zip(block.iter()) {
                        *ov -= bv;
                    }
                } else {
                    self.x[m - 1].left_mul_acc(ONE, block, o);
                }
            }
        }

        // Columns of [ρ_p; ρ_p X₀; ρ_p X₁], then [−A | Y₀ | Y₁] times that stack.
        for p in 0..n {
            let rho = &y[p * d2..(p + 1) * d2];
            for j in 0..d {
                let c = rows * (p * d + j);
                stack[c..c + d].copy_from_slice(&rho[j * d..(j + 1) * d]);
            }
            for m in 0..2 {
                block.fill(ZERO);
                self.x[m].right_mul_acc(ONE, rho, block);
                for j in 0..d {
                    let c = rows * (p * d + j) + (m + 1) * d;
                    stack[c..c + d].copy_from_slice(&block[j * d..(j + 1) * d]);
                }
            }
        }
        gemm(
            d,
            rows,
            cols,
            ONE,
            &self.left_stack,
            &stack[..rows * cols],
            ONE,
            &mut out[..n * d2],
        );
    }
}

/// Reusable buffers for [`PolaronSnapshot::apply_batch_acc`].
#[derive(Debug, Clone, Default)]
pub struct BatchScratch {
    stack: Vec<C64>,
    result: Vec<C64>,
    block: Vec<C64>,
}

impl BatchScratch {
    fn resize(&mut self, len: usize, d2: usize) {
        if self.stack.len() < len {
            self.stack.resize(len, ZERO);
            self.result.resize(len, ZERO);
        }
        if self.block.len() != d2 {
            self.block.resize(d2, ZERO);
        }
    }
}

/// Polaron scattering term for `rho` under the frozen `h_sys`.
pub fn polaron_dissipator(
    rho: &DensityMatrix,
    h_sys: &Operator,
    coupling: &Operator,
    sigma_plus: &Operator,
    p: &PhononParams,
) -> Result<DensityMatrix> {
    let d = rho.dim();
    if h_sys.dim() != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            got: h_sys.dim(),
        });
    }
    let kernel = PolaronKernel::new(p)?;
    let snap = kernel.snapshot(h_sys, coupling, sigma_plus)?;
    let mut out = vec![ZERO; d * d];
    let mut tmp = vec![ZERO; d * d];
    snap.apply_acc(rho.as_slice(), &mut out, &mut tmp);
    Ok(DensityMatrix::from_flat(d, &out))
}

/// Phonon-assisted transition rates `(down, up)` across a gap `Δ` for a
/// two-level probe `H = Δσ⁺σ⁻` with unit emitter coupling `K = 1 rad/ps`,
/// read off the dissipator as `D(|e⟩⟨e|)_gg` and `D(|g⟩⟨g|)_ee`. Rates scale
/// as `K²`.
pub fn asymmetry_check(p: &PhononParams, delta: f64) -> Result<(f64, f64)> {
    if delta == 0.0 {
        return Err(Error::config("delta", "the gap must be nonzero"));
    }
    let (sm, sp) = crate::qcore::emitter_operators();
    let h = sp.mul(&sm).scale(C64::new(delta, 0.0));
    let k = Operator::identity(2);
    let kernel = PolaronKernel::new(p)?;
    let snap = kernel.snapshot(&h, &k, &sp)?;
    let mut out = vec![ZERO; 4];
    let mut tmp = vec![ZERO; 4];
    let excited = DensityMatrix::basis_state(2, 1);
    snap.apply_acc(excited.as_slice(), &mut out, &mut tmp);
    let down = out[0].re;
    out.fill(ZERO);
    let ground = DensityMatrix::basis_state(2, 0);
    snap.apply_acc(ground.as_slice(), &mut out, &mut tmp);
    let up = out[3].re;
    Ok((down, up))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qcore::{build_operators, HilbertConfig};

    fn params(alpha: f64, t: f64) -> PhononParams {
        PhononParams {
            alpha_p: alpha,
            temperature_k: t,
            ..PhononParams::default()
        }
    }

    #[test]
    fn spectral_density_shape() {
        let p = params(0.03, 4.0);
        assert_eq!(spectral_density(0.0, &p), 0.0);
        assert_eq!(spectral_density(3.0, &params(0.0, 4.0)), 0.0);
        // dJ/dω = 0 at ω = √3 ω_b
        let w0 = 3f64.sqrt() * p.omega_b;
        let h = 1e-5;
        let slope = (spectral_density(w0 + h, &p) - spectral_density(w0 - h, &p)) / (2.0 * h);
        assert!(slope.abs() < 1e-8 * spectral_density(w0, &p));
        assert!(spectral_density(w0, &p) > spectral_density(1.1 * w0, &p));
        assert!(spectral_density(w0, &p) > spectral_density(0.9 * w0, &p));
    }

    #[test]
    fn correlation_at_zero_is_real_and_positive() {
        let p = params(0.005, 4.0);
        let phi0 = phonon_correlation(0.0, &p).unwrap();
        assert_eq!(phi0.im, 0.0);
        assert!(phi0.re > 0.0);
        assert_eq!(phonon_correlation(1.3, &params(0.0, 4.0)).unwrap(), ZERO);
    }

    #[test]
    fn zero_temperature_correlation_closed_form() {
        // At T = 0 and infinite cutoff, φ(0) = α_p ω_b² ∫₀^∞ x e^{−x²/2} dx = α_p ω_b².
        let p = params(0.005, 0.0);
        let phi0 = phonon_correlation(0.0, &p).unwrap().re;
        assert!((phi0 - p.alpha_p * p.omega_b * p.omega_b).abs() < 1e-9 * phi0);
    }

    #[test]
    fn b_average_limits_and_monotonicity() {
        assert_eq!(b_average(&params(0.0, 4.0)).unwrap(), 1.0);
        let b4 = b_average(&params(0.005, 4.0)).unwrap();
        let b19 = b_average(&params(0.005, 19.0)).unwrap();
        let b4s = b_average(&params(0.01, 4.0)).unwrap();
        assert!(b19 < b4 && b4s < b4 && b4 < 1.0);
    }

    #[test]
    fn b_average_against_refined_quadrature() {
        // Composite Simpson on a fine ω grid as an independent oracle.
        let p = params(0.005, 14.0);
        let kt = thermal_frequency(p.temperature_k);
        let top = OMEGA_CUTOFF_FACTOR * p.omega_b;
        let n = 200_000;
        let h = top / n as f64;
        let f = |w: f64| p.alpha_p * (-0.5 * (w / p.omega_b).powi(2)).exp() * omega_coth(w, kt);
        let mut s = f(0.0) + f(top);
        for k in 1..n {
            s += if k % 2 == 1 { 4.0 } else { 2.0 } * f(k as f64 * h);
        }
        let phi0 = s * h / 3.0;
        let b = b_average(&p).unwrap();
        assert!((b - (-0.5 * phi0).exp()).abs() < 1e-6);
    }

    #[test]
    fn kernel_transform_matches_adaptive_reference() {
        let p = params(0.005, 4.0);
        let kernel = PolaronKernel::new(&p).unwrap();
        for &w in &[0.0, 0.163, -0.7, 3.1, 12.0, 30.0] {
            // reference: adaptive integration of (cosh φ − 1)e^{−iωτ}
            let (refv, _) = integrate_adaptive(
                |tau| {
                    let phi = phonon_correlation_tol(tau, &p, 1e-9).unwrap();
                    (phi.cosh() - ONE) * C64::new(0.0, -w * tau).exp()
                },
                0.0,
                p.tau_cutoff,
                1e-11,
                1e-7,
                200,
            )
            .unwrap();
            let got = kernel.transform(Channel::G, w);
            assert!(
                (got - refv).norm() < 1e-6 * refv.norm().max(1e-3),
                "ω = {w}: {got} vs {refv}"
            );
        }
    }

    #[test]
    fn short_cutoff_is_rejected() {
        let p = PhononParams {
            tau_cutoff: 0.2,
            ..params(0.005, 4.0)
        };
        assert!(PolaronKernel::new(&p).is_err());
    }

    #[test]
    fn dissipator_vanishes_without_coupling() {
        let ops = build_operators(HilbertConfig::new(2).unwrap());
        let d = ops.dim();
        let h = ops.number().scale(C64::new(0.3, 0.0));
        let rho = DensityMatrix::maximally_mixed(d);
        let zero_k = Operator::zeros(d);
        let out = polaron_dissipator(&rho, &h, &zero_k, &ops.sigma_plus, &params(0.005, 4.0)).unwrap();
        assert!(out.0.iter().all(|v| v.norm() == 0.0));
        let k = ops.a.scale(C64::new(0.03, 0.0));
        let out = polaron_dissipator(&rho, &h, &k, &ops.sigma_plus, &params(0.0, 4.0)).unwrap();
        assert!(out.0.iter().all(|v| v.norm() == 0.0));
    }

    #[test]
    fn batched_apply_matches_single_matrix_apply() {
        let ops = build_operators(HilbertConfig::new(2).unwrap());
        let d = ops.dim();
        let h = ops
            .number()
            .scale(C64::new(-0.1, 0.0))
            .add(&ops.sigma_plus.add(&ops.sigma_minus).scale(C64::new(0.3, 0.0)));
        let k = ops
            .a
            .scale(C64::new(0.02, 0.0))
            .add(&Operator::identity(d).scale(C64::new(0.1, 0.05)));
        let snap = PolaronKernel::new(&params(0.005, 4.0))
            .unwrap()
            .snapshot(&h, &k, &ops.sigma_plus)
            .unwrap();
        let n = 5;
        let y: Vec<C64> = (0..n * d * d)
            .map(|i| C64::new((i as f64 * 0.37).sin(), (i as f64 * 0.11).cos()))
            .collect();
        let mut batched = vec![C64::new(0.5, -0.25); y.len()];
        snap.apply_batch_acc(&y, &mut batched, &mut BatchScratch::default());
        let mut tmp = vec![ZERO; d * d];
        for (p, (yb, bb)) in y.chunks(d * d).zip(batched.chunks(d * d)).enumerate() {
            let mut single = vec![C64::new(0.5, -0.25); d * d];
            snap.apply_acc(yb, &mut single, &mut tmp);
            for (a, b) in single.iter().zip(bb) {
                assert!((a - b).norm() < 1e-13, "block {p}: {a} vs {b}");
            }
        }
    }

    #[test]
    fn dissipator_is_trace_free_and_hermitian() {
        let ops = build_operators(HilbertConfig::new(3).unwrap());
        let d = ops.dim();
        let jc = ops.a.mul(&ops.sigma_plus).add(&ops.a_dagger.mul(&ops.sigma_minus));
        let drive = ops.sigma_plus.add(&ops.sigma_minus).scale(C64::new(0.2, 0.0));
        let h = ops
            .number()
            .scale(C64::new(-0.16, 0.0))
            .add(&jc.scale(C64::new(0.025, 0.0)))
            .add(&drive);
        let mut k = ops.a.scale(C64::new(0.026, 0.0));
        for i in 0..d {
            k.0[(i, i)] += C64::new(0.1, -0.15);
        }
        let mut m = DMatrix::from_fn(d, d, |i, j| {
            C64::new((i + 2 * j) as f64 * 0.1, (i as f64 - j as f64) * 0.05)
        });
        m = &m * m.adjoint();
        let tr = m.trace();
        let rho = DensityMatrix(m / tr);
        let out = polaron_dissipator(&rho, &h, &k, &ops.sigma_plus, &params(0.005, 4.0)).unwrap();
        assert!(out.trace().norm() < 1e-12);
        assert!(out.hermiticity_error() < 1e-12);
        assert!(out.0.iter().any(|v| v.norm() > 1e-6));
    }

    #[test]
    fn detailed_balance_at_26_ghz() {
        let p = params(0.005, 4.0);
        let delta = crate::units::ghz_to_rad_ps(26.0);
        let (down, up) = asymmetry_check(&p, delta).unwrap();
        assert!(down > up && up > 0.0);
        let expected = (delta / thermal_frequency(p.temperature_k)).exp();
        assert!(
            (down / up / expected - 1.0).abs() < 0.05,
            "{} vs {}",
            down / up,
            expected
        );
    }

    #[test]
    fn asymmetry_rates_match_direct_kernel_oracle() {
        // rate = 2⟨B⟩² Re ∫₀^{τ_c} (e^{φ(τ)} − 1) e^{±iΔτ} dτ via trapezoid on a fine τ grid.
        let p = params(0.005, 10.0);
        let delta = 0.4;
        let b = b_average(&p).unwrap();
        let n = 4000;
        let h = p.tau_cutoff / n as f64;
        let phis: Vec<C64> = (0..=n).map(|k| phonon_correlation(k as f64 * h, &p).unwrap()).collect();
        let rate = |sign: f64| {
            let mut s = ZERO;
            for (k, phi) in phis.iter().enumerate() {
                let w = if k == 0 || k == n { 0.5 } else { 1.0 };
                s += (phi.exp() - ONE) * C64::new(0.0, sign * delta * k as f64 * h).exp() * w;
            }
            2.0 * b * b * (s * h).re
        };
        let (down, up) = asymmetry_check(&p, delta).unwrap();
        assert!((down - rate(1.0)).abs() < 1e-5 * down, "{down} vs {}", rate(1.0));
        assert!((up - rate(-1.0)).abs() < 1e-5 * down, "{up} vs {}", rate(-1.0));
    }

    #[test]
    fn classical_limit_rates_equalize() {
        let p = params(0.005, 300.0);
        let (down, up) = asymmetry_check(&p, 0.05).unwrap();
        assert!((down / up - 1.0).abs() < 0.05);
        let (d0, u0) = asymmetry_check(&params(0.0, 4.0), 0.2).unwrap();
        assert_eq!((d0, u0), (0.0, 0.0));
    }
}
