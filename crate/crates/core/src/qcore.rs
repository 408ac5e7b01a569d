//! Dense complex linear algebra for a two-level emitter tensored with a
//! truncated cavity Fock space.
//!
//! Basis ordering is emitter ⊗ Fock with the emitter index varying slowest:
//! `index = e * (N + 1) + n`, where `e = 0` is the ground state `|g⟩`,
//! `e = 1` the excited state `|e⟩` and `n = 0..=N` the photon number.
//! Matrices are stored column-major (nalgebra convention), so entry `(i, j)`
//! of a `D × D` matrix lives at `j * D + i` in the flat slice.

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type C64 = Complex64;

pub const ZERO: C64 = C64::new(0.0, 0.0);
pub const ONE: C64 = C64::new(1.0, 0.0);
pub const I: C64 = C64::new(0.0, 1.0);

/// Truncation of the cavity mode.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct HilbertConfig {
    /// Maximum photon number kept in the Fock space.
    pub fock_cutoff: usize,
}

impl HilbertConfig {
    pub fn new(fock_cutoff: usize) -> Result<Self> {
        if fock_cutoff < 1 {
            return Err(Error::config("model.fock_cutoff", "must be at least 1"));
        }
        Ok(Self { fock_cutoff })
    }

    pub fn fock_dim(&self) -> usize {
        self.fock_cutoff + 1
    }

    /// Total dimension `D = 2 (N + 1)`.
    pub fn dim(&self) -> usize {
        2 * self.fock_dim()
    }

    pub fn index(&self, excited: bool, photons: usize) -> usize {
        usize::from(excited) * self.fock_dim() + photons
    }
}

/// A square complex matrix acting on the system Hilbert space.
#[derive(Debug, Clone, PartialEq)]
pub struct Operator(pub DMatrix<C64>);

impl Operator {
    pub fn zeros(dim: usize) -> Self {
        Operator(DMatrix::zeros(dim, dim))
    }

    pub fn identity(dim: usize) -> Self {
        Operator(DMatrix::identity(dim, dim))
    }

    pub fn from_matrix(m: DMatrix<C64>) -> Result<Self> {
        if m.nrows() != m.ncols() {
            return Err(Error::DimensionMismatch {
                expected: m.nrows(),
                got: m.ncols(),
            });
        }
        if m.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::numerics("operator", "non-finite entry"));
        }
        Ok(Operator(m))
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<C64> {
        &self.0
    }

    pub fn dagger(&self) -> Operator {
        Operator(self.0.adjoint())
    }

    pub fn scale(&self, s: C64) -> Operator {
        Operator(&self.0 * s)
    }

    pub fn add(&self, other: &Operator) -> Operator {
        Operator(&self.0 + &other.0)
    }

    pub fn mul(&self, other: &Operator) -> Operator {
        Operator(&self.0 * &other.0)
    }

    pub fn commutator(&self, other: &Operator) -> Operator {
        Operator(&self.0 * &other.0 - &other.0 * &self.0)
    }

    /// Largest entrywise deviation from Hermiticity.
    pub fn hermiticity_error(&self) -> f64 {
        hermiticity_error(&self.0)
    }

    pub fn max_abs(&self) -> f64 {
        self.0.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    /// Eigenvalues of the Hermitian part, ascending.
    pub fn hermitian_eigenvalues(&self) -> Vec<f64> {
        hermitian_eigenvalues(&self.0)
    }
}

/// The ladder and Pauli operators on `emitter ⊗ Fock`.
#[derive(Debug, Clone)]
pub struct OperatorSet {
    pub hilbert: HilbertConfig,
    pub a: Operator,
    pub a_dagger: Operator,
    pub sigma_minus: Operator,
    pub sigma_plus: Operator,
    pub identity: Operator,
}

impl OperatorSet {
    pub fn dim(&self) -> usize {
        self.hilbert.dim()
    }

    pub fn number(&self) -> Operator {
        self.a_dagger.mul(&self.a)
    }

    pub fn excited_projector(&self) -> Operator {
        self.sigma_plus.mul(&self.sigma_minus)
    }
}

/// Constructs `a`, `a†`, `σ⁻`, `σ⁺` and the identity for the given truncation.
pub fn build_operators(cfg: HilbertConfig) -> OperatorSet {
    let d = cfg.dim();
    let nf = cfg.fock_dim();
    let mut a = DMatrix::<C64>::zeros(d, d);
    let mut sm = DMatrix::<C64>::zeros(d, d);
    for e in 0..2 {
        for n in 1..nf {
            let row = cfg.index(e == 1, n - 1);
            let col = cfg.index(e == 1, n);
            a[(row, col)] = C64::new((n as f64).sqrt(), 0.0);
        }
    }
    for n in 0..nf {
        sm[(cfg.index(false, n), cfg.index(true, n))] = ONE;
    }
    let a = Operator(a);
    let sigma_minus = Operator(sm);
    OperatorSet {
        hilbert: cfg,
        a_dagger: a.dagger(),
        a,
        sigma_plus: sigma_minus.dagger(),
        sigma_minus,
        identity: Operator::identity(d),
    }
}

/// Operators for the bare two-level emitter (`D = 2`, basis `|g⟩, |e⟩`).
pub fn emitter_operators() -> (Operator, Operator) {
    let mut sm = DMatrix::<C64>::zeros(2, 2);
    sm[(0, 1)] = ONE;
    let sm = Operator(sm);
    let sp = sm.dagger();
    (sm, sp)
}

/// A density matrix (or, inside regression-theorem propagation, a general
/// operator-valued state).
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix(pub DMatrix<C64>);

impl DensityMatrix {
    /// The pure state `|index⟩⟨index|`.
    pub fn basis_state(dim: usize, index: usize) -> Self {
        let mut m = DMatrix::zeros(dim, dim);
        m[(index, index)] = ONE;
        DensityMatrix(m)
    }

    pub fn maximally_mixed(dim: usize) -> Self {
        DensityMatrix(DMatrix::identity(dim, dim) * C64::new(1.0 / dim as f64, 0.0))
    }

    pub fn from_flat(dim: usize, data: &[C64]) -> Self {
        DensityMatrix(DMatrix::from_column_slice(dim, dim, data))
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn as_slice(&self) -> &[C64] {
        self.0.as_slice()
    }

    pub fn trace(&self) -> C64 {
        self.0.trace()
    }

    pub fn hermiticity_error(&self) -> f64 {
        hermiticity_error(&self.0)
    }

    pub fn min_eigenvalue(&self) -> f64 {
        hermitian_eigenvalues(&self.0).first().copied().unwrap_or(0.0)
    }
}

/// `Tr(op · rho)`.
pub fn expectation(rho: &DensityMatrix, op: &Operator) -> Result<C64> {
    if rho.dim() != op.dim() {
        return Err(Error::DimensionMismatch {
            expected: op.dim(),
            got: rho.dim(),
        });
    }
    Ok(trace_of_product(op.0.as_slice(), rho.0.as_slice(), op.dim()))
}

/// `Tr(A B)` for column-major `D × D` slices without forming the product.
pub fn trace_of_product(a: &[C64], b: &[C64], dim: usize) -> C64 {
    let mut acc = ZERO;
    for i in 0..dim {
        for k in 0..dim {
            acc += a[k * dim + i] * b[i * dim + k];
        }
    }
    acc
}

/// A collapse channel `rate/2 · (2AρA† − A†Aρ − ρA†A)`.
#[derive(Debug, Clone)]
pub struct CollapseTerm {
    pub name: String,
    pub rate: f64,
    pub op: Operator,
}

impl CollapseTerm {
    pub fn new(name: impl Into<String>, rate: f64, op: Operator) -> Self {
        Self {
            name: name.into(),
            rate,
            op,
        }
    }
}

/// Dense reference evaluation of the Lindblad right-hand side
/// `−i[H, ρ] + Σ (rate/2)(2AρA† − A†Aρ − ρA†A)`.
pub fn lindblad_rhs(rho: &DensityMatrix, h: &Operator, collapse_terms: &[CollapseTerm]) -> Result<DensityMatrix> {
    let d = rho.dim();
    if h.dim() != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            got: h.dim(),
        });
    }
    let r = &rho.0;
    let mut out = (&h.0 * r - r * &h.0) * (-I);
    for term in collapse_terms {
        if term.rate < 0.0 {
            return Err(Error::NegativeRate {
                name: term.name.clone(),
                rate: term.rate,
            });
        }
        if term.op.dim() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                got: term.op.dim(),
            });
        }
        let a = &term.op.0;
        let ad = a.adjoint();
        let ada = &ad * a;
        let half = C64::new(term.rate / 2.0, 0.0);
        out += (a * r * &ad * C64::new(2.0, 0.0) - &ada * r - r * &ada) * half;
    }
    Ok(DensityMatrix(out))
}

pub(crate) fn hermiticity_error(m: &DMatrix<C64>) -> f64 {
    let d = m.nrows();
    let mut worst = 0.0_f64;
    for j in 0..d {
        for i in 0..=j {
            worst = worst.max((m[(i, j)] - m[(j, i)].conj()).norm());
        }
    }
    worst
}

pub(crate) fn hermitian_eigenvalues(m: &DMatrix<C64>) -> Vec<f64> {
    let herm = (m + m.adjoint()) * C64::new(0.5, 0.0);
    let mut ev: Vec<f64> = herm.symmetric_eigenvalues().iter().copied().collect();
    ev.sort_by(|a, b| a.total_cmp(b));
    ev
}

/// Nonzero entries of an operator, used for structure-aware products on
/// flat column-major matrices.
#[derive(Debug, Clone)]
pub struct SparseOp {
    dim: usize,
    entries: Vec<(usize, usize, C64)>,
}

impl SparseOp {
    pub fn from_operator(op: &Operator) -> Self {
        let d = op.dim();
        let mut entries = Vec::new();
        for j in 0..d {
            for i in 0..d {
                let v = op.0[(i, j)];
                if v != ZERO {
                    entries.push((i, j, v));
                }
            }
        }
        Self { dim: d, entries }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn nnz(&self) -> usize {
        self.entries.len()
    }

    pub fn is_zero(&self) -> bool {
        self.entries.is_empty()
    }

    /// `out += alpha · Op · x`.
    #[inline]
    pub fn left_mul_acc(&self, alpha: C64, x: &[C64], out: &mut [C64]) {
        let d = self.dim;
        for &(i, k, v) in &self.entries {
            let f = alpha * v;
            for j in 0..d {
                out[j * d + i] += f * x[j * d + k];
            }
        }
    }

    /// `out += alpha · x · Op`.
    #[inline]
    pub fn right_mul_acc(&self, alpha: C64, x: &[C64], out: &mut [C64]) {
        let d = self.dim;
        for &(k, j, v) in &self.entries {
            let f = alpha * v;
            let (src, dst) = (k * d, j * d);
            for i in 0..d {
                out[dst + i] += f * x[src + i];
            }
        }
    }

    /// `out += alpha · x · Op†`.
    #[inline]
    pub fn right_mul_dagger_acc(&self, alpha: C64, x: &[C64], out: &mut [C64]) {
        let d = self.dim;
        // (x Op†)_{ij} = Σ_k x_{ik} conj(Op_{jk})
        for &(j, k, v) in &self.entries {
            let f = alpha * v.conj();
            let (src, dst) = (k * d, j * d);
            for i in 0..d {
                out[dst + i] += f * x[src + i];
            }
        }
    }
}

/// `out += alpha · A · x` for dense column-major `A`.
pub(crate) fn dense_left_mul_acc(alpha: C64, a: &[C64], x: &[C64], out: &mut [C64], d: usize) {
    for j in 0..d {
        let xcol = &x[j * d..(j + 1) * d];
        let ocol = &mut out[j * d..(j + 1) * d];
        for (k, &xv) in xcol.iter().enumerate() {
            if xv == ZERO {
                continue;
            }
            let f = alpha * xv;
            let acol = &a[k * d..(k + 1) * d];
            for (o, &av) in ocol.iter_mut().zip(acol) {
                *o += av * f;
            }
        }
    }
}

/// `out += alpha · x · A` for dense column-major `A`.
pub(crate) fn dense_right_mul_acc(alpha: C64, x: &[C64], a: &[C64], out: &mut [C64], d: usize) {
    for j in 0..d {
        let acol = &a[j * d..(j + 1) * d];
        let ocol = &mut out[j * d..(j + 1) * d];
        for (k, &av) in acol.iter().enumerate() {
            if av == ZERO {
                continue;
            }
            let f = alpha * av;
            let xcol = &x[k * d..(k + 1) * d];
            for (o, &xv) in ocol.iter_mut().zip(xcol) {
                *o += xv * f;
            }
        }
    }
}

/// `C ← α·A·B + β·C` for column-major `A (m×k)`, `B (k×n)` and `C (m×n)`.
#[allow(clippy::too_many_arguments)]
pub fn gemm(m: usize, k: usize, n: usize, alpha: C64, a: &[C64], b: &[C64], beta: C64, c: &mut [C64]) {
    assert!(
        a.len() >= m * k && b.len() >= k * n && c.len() >= m * n,
        "gemm operand too short"
    );
    if m == 0 || n == 0 {
        return;
    }
    // SAFETY: `Complex<f64>` is `repr(C)` with layout `[re, im]`, matching
    // matrixmultiply's `[f64; 2]`. Bounds were checked above and the strides
    // describe dense column-major storage of exactly those extents.
    unsafe {
        matrixmultiply::zgemm(
            matrixmultiply::CGemmOption::Standard,
            matrixmultiply::CGemmOption::Standard,
            m,
            k,
            n,
            [alpha.re, alpha.im],
            a.as_ptr() as *const [f64; 2],
            1,
            m as isize,
            b.as_ptr() as *const [f64; 2],
            1,
            k as isize,
            [beta.re, beta.im],
            c.as_mut_ptr() as *mut [f64; 2],
            1,
            m as isize,
        );
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn ops(n: usize) -> OperatorSet {
        build_operators(HilbertConfig::new(n).unwrap())
    }

    #[test]
    fn gemm_matches_nalgebra() {
        let a = DMatrix::from_fn(5, 3, |i, j| C64::new(i as f64 - 0.5 * j as f64, 0.25 * (i * j) as f64));
        let b = DMatrix::from_fn(3, 4, |i, j| C64::new(1.0 + j as f64, i as f64 - 1.0));
        let mut c = DMatrix::from_element(5, 4, C64::new(0.5, -1.0));
        let expect = &a * &b * C64::new(2.0, 1.0) + &c * C64::new(0.0, 1.0);
        gemm(
            5,
            3,
            4,
            C64::new(2.0, 1.0),
            a.as_slice(),
            b.as_slice(),
            I,
            c.as_mut_slice(),
        );
        assert!((c - expect).norm() < 1e-12);
    }

    #[test]
    fn rejects_zero_cutoff() {
        assert!(HilbertConfig::new(0).is_err());
    }

    #[test]
    fn number_operator_spectrum_n1() {
        let o = ops(1);
        let ev = o.number().hermitian_eigenvalues();
        let expect = [0.0, 0.0, 1.0, 1.0];
        for (a, b) in ev.iter().zip(expect) {
            assert_abs_diff_eq!(*a, b, epsilon = 1e-12);
        }
    }

    #[test]
    fn number_operator_spectrum_general() {
        for n in 1..6 {
            let ev = ops(n).number().hermitian_eigenvalues();
            for (k, v) in ev.iter().enumerate() {
                assert_abs_diff_eq!(*v, (k / 2) as f64, epsilon = 1e-10);
            }
        }
    }

    #[test]
    fn excited_projector_is_idempotent() {
        for n in 1..5 {
            let p = ops(n).excited_projector();
            let p2 = p.mul(&p);
            assert!((p2.0 - &p.0).iter().all(|z| z.norm() < 1e-15));
        }
    }

    #[test]
    fn canonical_commutator_on_untruncated_block() {
        // Direct matrix arithmetic: [a, a†] = 1 on rows/cols with n < N.
        let cfg = HilbertConfig::new(3).unwrap();
        let o = build_operators(cfg);
        let c = o.a.commutator(&o.a_dagger);
        for e in [false, true] {
            for n in 0..3 {
                for e2 in [false, true] {
                    for n2 in 0..3 {
                        let v = c.0[(cfg.index(e, n), cfg.index(e2, n2))];
                        let want = if e == e2 && n == n2 { 1.0 } else { 0.0 };
                        assert_abs_diff_eq!(v.re, want, epsilon = 1e-12);
                        assert_abs_diff_eq!(v.im, 0.0, epsilon = 1e-12);
                    }
                }
            }
        }
        // the truncated corner carries −N instead of 1
        let corner = c.0[(cfg.index(false, 3), cfg.index(false, 3))];
        assert_abs_diff_eq!(corner.re, -3.0, epsilon = 1e-12);
    }

    #[test]
    fn ladder_action() {
        let cfg = HilbertConfig::new(4).unwrap();
        let o = build_operators(cfg);
        for n in 1..=4 {
            let v = o.a.0[(cfg.index(true, n - 1), cfg.index(true, n))];
            assert_abs_diff_eq!(v.re, (n as f64).sqrt(), epsilon = 1e-14);
        }
        assert_eq!(o.sigma_minus.0[(cfg.index(false, 2), cfg.index(true, 2))], ONE);
    }

    #[test]
    fn expectation_examples() {
        let cfg = HilbertConfig::new(2).unwrap();
        let o = build_operators(cfg);
        let vac = DensityMatrix::basis_state(cfg.dim(), cfg.index(false, 0));
        assert_abs_diff_eq!(expectation(&vac, &o.number()).unwrap().re, 0.0);
        let exc = DensityMatrix::basis_state(cfg.dim(), cfg.index(true, 0));
        assert_abs_diff_eq!(expectation(&exc, &o.excited_projector()).unwrap().re, 1.0);

        let mixed = DensityMatrix::maximally_mixed(4);
        let id = Operator::identity(4);
        assert_abs_diff_eq!(expectation(&mixed, &id).unwrap().re, 1.0, epsilon = 1e-15);

        assert!(matches!(
            expectation(&mixed, &o.a),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn lindblad_rhs_zero_cases() {
        let rho = DensityMatrix::maximally_mixed(4);
        let out = lindblad_rhs(&rho, &Operator::zeros(4), &[]).unwrap();
        assert!(out.0.iter().all(|z| *z == ZERO));
    }

    #[test]
    fn lindblad_rhs_rejects_negative_rate() {
        let (sm, _) = emitter_operators();
        let rho = DensityMatrix::basis_state(2, 1);
        let err = lindblad_rhs(&rho, &Operator::zeros(2), &[CollapseTerm::new("x", -1.0, sm)]);
        assert!(matches!(err, Err(Error::NegativeRate { .. })));
    }

    #[test]
    fn excited_state_decays_at_full_rate() {
        // γ/2 · L[σ⁻] convention gives d⟨σ⁺σ⁻⟩/dt = −γ.
        let cfg = HilbertConfig::new(1).unwrap();
        let o = build_operators(cfg);
        let gamma = 0.37;
        let rho = DensityMatrix::basis_state(cfg.dim(), cfg.index(true, 0));
        let d = lindblad_rhs(
            &rho,
            &Operator::zeros(cfg.dim()),
            &[CollapseTerm::new("emitter", gamma, o.sigma_minus.clone())],
        )
        .unwrap();
        let rate = expectation(&d, &o.excited_projector()).unwrap();
        assert_abs_diff_eq!(rate.re, -gamma, epsilon = 1e-14);
    }

    #[test]
    fn coherence_rotates_at_detuning() {
        // H = Δ σ⁺σ⁻: dρ_ge/dt = iΔ ρ_ge, so ρ_ge(t) = ρ_ge(0) e^{iΔt}.
        let delta = crate::units::ghz_to_rad_ps(-15.0);
        let (sm, sp) = emitter_operators();
        let h = sp.mul(&sm).scale(C64::new(delta, 0.0));
        let rho = DensityMatrix(DMatrix::from_element(2, 2, C64::new(0.5, 0.0)));
        let d = lindblad_rhs(&rho, &h, &[]).unwrap();
        let slope = d.0[(0, 1)] / rho.0[(0, 1)];
        assert_abs_diff_eq!(slope.re, 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(slope.im, delta, epsilon = 1e-14);
        assert_abs_diff_eq!(slope.im.abs(), 2.0 * std::f64::consts::PI * 0.015, epsilon = 1e-14);
    }

    #[test]
    fn sparse_kernels_match_dense() {
        let o = ops(2);
        let d = o.dim();
        let x = DMatrix::<C64>::from_fn(d, d, |i, j| C64::new(i as f64 - 0.3 * j as f64, 0.1 * (i * j) as f64));
        let a = SparseOp::from_operator(&o.a);
        let alpha = C64::new(0.7, -0.2);

        let mut out = vec![ZERO; d * d];
        a.left_mul_acc(alpha, x.as_slice(), &mut out);
        let want = &o.a.0 * &x * alpha;
        assert!(out.iter().zip(want.iter()).all(|(p, q)| (p - q).norm() < 1e-12));

        let mut out = vec![ZERO; d * d];
        a.right_mul_acc(alpha, x.as_slice(), &mut out);
        let want = &x * &o.a.0 * alpha;
        assert!(out.iter().zip(want.iter()).all(|(p, q)| (p - q).norm() < 1e-12));

        let mut out = vec![ZERO; d * d];
        a.right_mul_dagger_acc(alpha, x.as_slice(), &mut out);
        let want = &x * o.a.0.adjoint() * alpha;
        assert!(out.iter().zip(want.iter()).all(|(p, q)| (p - q).norm() < 1e-12));

        let mut out = vec![ZERO; d * d];
        dense_left_mul_acc(alpha, o.a.0.as_slice(), x.as_slice(), &mut out, d);
        let want = &o.a.0 * &x * alpha;
        assert!(out.iter().zip(want.iter()).all(|(p, q)| (p - q).norm() < 1e-12));

        let mut out = vec![ZERO; d * d];
        dense_right_mul_acc(alpha, x.as_slice(), o.a.0.as_slice(), &mut out, d);
        let want = &x * &o.a.0 * alpha;
        assert!(out.iter().zip(want.iter()).all(|(p, q)| (p - q).norm() < 1e-12));
    }
}
