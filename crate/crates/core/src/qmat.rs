//! Small-dimension quantum linear algebra for qubits and qubit pairs.
//!
//! Everything here works on dense 2×2 and 4×4 complex matrices. Two-qubit
//! states are usually handled in Bloch form
//!
//! ```text
//! ρ = ¼ (1⊗1 + Σ m_A(i) σ_i⊗1 + Σ m_B(j) 1⊗σ_j + Σ T_ij σ_i⊗σ_j)
//! ```
//!
//! with axis order (x, y, z). Logarithms are base 2 throughout.

use nalgebra::{Matrix2, Matrix3, Matrix4, SymmetricEigen, Vector3, Vector4, SVD};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::stats::ProbTable;

pub type C64 = Complex64;
pub type Mat2 = Matrix2<C64>;
pub type Mat4 = Matrix4<C64>;

/// Tolerance for accepting a matrix as a density operator.
pub const STATE_TOL: f64 = 1e-10;
/// Tolerance for POVM positivity and completeness.
pub const POVM_TOL: f64 = 1e-12;
/// Eigenvalues in `[-EIG_CLAMP, 0)` are treated as numerical zeros.
pub const EIG_CLAMP: f64 = 1e-12;

const ZERO: C64 = C64::new(0.0, 0.0);
const ONE: C64 = C64::new(1.0, 0.0);
const I: C64 = C64::new(0.0, 1.0);

pub fn identity2() -> Mat2 {
    Mat2::identity()
}

pub fn sigma_x() -> Mat2 {
    Mat2::new(ZERO, ONE, ONE, ZERO)
}

pub fn sigma_y() -> Mat2 {
    Mat2::new(ZERO, -I, I, ZERO)
}

pub fn sigma_z() -> Mat2 {
    Mat2::new(ONE, ZERO, ZERO, -ONE)
}

/// Pauli matrices in (x, y, z) order.
pub fn paulis() -> [Mat2; 3] {
    [sigma_x(), sigma_y(), sigma_z()]
}

/// `n·σ` for a real 3-vector.
pub fn bloch_operator(n: &Vector3<f64>) -> Mat2 {
    Mat2::new(
        C64::new(n.z, 0.0),
        C64::new(n.x, -n.y),
        C64::new(n.x, n.y),
        C64::new(-n.z, 0.0),
    )
}

/// `γ·1 + v·σ`.
pub fn affine_qubit_operator(gamma: f64, v: &Vector3<f64>) -> Mat2 {
    bloch_operator(v) + Mat2::identity() * C64::new(gamma, 0.0)
}

/// Decomposes a Hermitian 2×2 matrix as `γ·1 + v·σ`.
pub fn qubit_bloch_parts(m: &Mat2) -> (f64, Vector3<f64>) {
    let gamma = 0.5 * (m[(0, 0)].re + m[(1, 1)].re);
    let v = Vector3::new(
        0.5 * (m[(0, 1)].re + m[(1, 0)].re),
        0.5 * (m[(1, 0)].im - m[(0, 1)].im),
        0.5 * (m[(0, 0)].re - m[(1, 1)].re),
    );
    (gamma, v)
}

pub fn kron(a: &Mat2, b: &Mat2) -> Mat4 {
    Mat4::from_fn(|r, c| a[(r / 2, c / 2)] * b[(r % 2, c % 2)])
}

fn spin_flip_operator() -> Mat4 {
    let sy = sigma_y();
    kron(&sy, &sy)
}

/// Two-qubit state in Bloch form.
#[derive(Debug, Clone, PartialEq)]
pub struct TwoQubitState {
    pub m_a: Vector3<f64>,
    pub m_b: Vector3<f64>,
    pub t: Matrix3<f64>,
}

impl TwoQubitState {
    pub fn new(m_a: Vector3<f64>, m_b: Vector3<f64>, t: Matrix3<f64>) -> Self {
        Self { m_a, m_b, t }
    }

    /// State with unbiased marginals, fully described by its correlation matrix.
    pub fn from_correlations(t: Matrix3<f64>) -> Self {
        Self::new(Vector3::zeros(), Vector3::zeros(), t)
    }

    /// Werner state `W|Φ⁺⟩⟨Φ⁺| + (1−W)/4·1`.
    pub fn werner(w: f64) -> Self {
        Self::from_correlations(Matrix3::from_diagonal(&Vector3::new(w, -w, w)))
    }

    pub fn phi_plus() -> Self {
        Self::werner(1.0)
    }

    /// Bloch components of an arbitrary 4×4 operator, `T_ij = Tr[ρ σ_i⊗σ_j]`.
    pub fn from_density(rho: &Mat4) -> Self {
        let p = paulis();
        let id = identity2();
        let expect = |op: Mat4| (rho * op).trace().re;
        let m_a = Vector3::from_fn(|i, _| expect(kron(&p[i], &id)));
        let m_b = Vector3::from_fn(|i, _| expect(kron(&id, &p[i])));
        let t = Matrix3::from_fn(|i, j| expect(kron(&p[i], &p[j])));
        Self { m_a, m_b, t }
    }

    pub fn density(&self) -> Mat4 {
        density_from_bloch(&self.m_a, &self.m_b, &self.t)
    }

    pub fn has_unbiased_marginals(&self) -> bool {
        self.m_a.norm() == 0.0 && self.m_b.norm() == 0.0
    }

    pub fn is_physical(&self, tol: f64) -> bool {
        min_eigenvalue(&self.density()) >= -tol
    }
}

/// Builds `ρ = ¼(1⊗1 + m_A·σ⊗1 + 1⊗m_B·σ + Σ T_ij σ_i⊗σ_j)`.
///
/// The result is Hermitian with unit trace for any finite input; positivity is
/// not checked.
pub fn density_from_bloch(m_a: &Vector3<f64>, m_b: &Vector3<f64>, t: &Matrix3<f64>) -> Mat4 {
    // Closed form of the Pauli expansion; rows/cols ordered |00>,|01>,|10>,|11>.
    let (ax, ay, az) = (m_a.x, m_a.y, m_a.z);
    let (bx, by, bz) = (m_b.x, m_b.y, m_b.z);
    let (txx, txy, txz) = (t[(0, 0)], t[(0, 1)], t[(0, 2)]);
    let (tyx, tyy, tyz) = (t[(1, 0)], t[(1, 1)], t[(1, 2)]);
    let (tzx, tzy, tzz) = (t[(2, 0)], t[(2, 1)], t[(2, 2)]);
    let c = |re: f64, im: f64| C64::new(0.25 * re, 0.25 * im);

    let d00 = c(1.0 + az + bz + tzz, 0.0);
    let d11 = c(1.0 + az - bz - tzz, 0.0);
    let d22 = c(1.0 - az + bz - tzz, 0.0);
    let d33 = c(1.0 - az - bz + tzz, 0.0);
    // <00|ρ|01>, <00|ρ|10>, ...
    let r01 = c(bx + tzx, -(by + tzy));
    let r23 = c(bx - tzx, -(by - tzy));
    let r02 = c(ax + txz, -(ay + tyz));
    let r13 = c(ax - txz, -(ay - tyz));
    let r03 = c(txx - tyy, -(txy + tyx));
    let r12 = c(txx + tyy, txy - tyx);

    Mat4::new(
        d00,
        r01,
        r02,
        r03,
        r01.conj(),
        d11,
        r12,
        r13,
        r02.conj(),
        r12.conj(),
        d22,
        r23,
        r03.conj(),
        r13.conj(),
        r23.conj(),
        d33,
    )
}

/// Eigen-decomposition of a Hermitian 4×4 matrix, eigenvalues descending.
pub fn eigh4(m: &Mat4) -> (Vector4<f64>, Mat4) {
    let herm = (m + m.adjoint()) * C64::new(0.5, 0.0);
    let eig = SymmetricEigen::new(herm);
    let mut order = [0usize, 1, 2, 3];
    order.sort_by(|&i, &j| eig.eigenvalues[j].total_cmp(&eig.eigenvalues[i]));
    let values = Vector4::from_fn(|k, _| eig.eigenvalues[order[k]]);
    let vectors = Mat4::from_fn(|r, k| eig.eigenvectors[(r, order[k])]);
    (values, vectors)
}

pub fn eigvalsh4(m: &Mat4) -> Vector4<f64> {
    eigh4(m).0
}

pub fn min_eigenvalue(m: &Mat4) -> f64 {
    let herm = (m + m.adjoint()) * C64::new(0.5, 0.0);
    herm.symmetric_eigenvalues().min()
}

fn clamp_nonneg(x: f64) -> f64 {
    x.max(0.0)
}

/// Checks that `rho` is a density operator within [`STATE_TOL`].
pub fn validate_state(rho: &Mat4) -> Result<()> {
    if rho.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(Error::Domain("state has non-finite entries".into()));
    }
    let herm_gap = (rho - rho.adjoint())
        .iter()
        .map(|z| z.norm())
        .fold(0.0, f64::max);
    if herm_gap > STATE_TOL {
        return Err(Error::Domain(format!(
            "state is not Hermitian (gap {herm_gap:e})"
        )));
    }
    let tr = rho.trace();
    if (tr.re - 1.0).abs() > STATE_TOL || tr.im.abs() > STATE_TOL {
        return Err(Error::Domain(format!("state trace is {tr}, expected 1")));
    }
    let lmin = min_eigenvalue(rho);
    if lmin < -STATE_TOL {
        return Err(Error::Domain(format!(
            "state is not positive semidefinite (min eigenvalue {lmin:e})"
        )));
    }
    Ok(())
}

/// Wootters concurrence `max(0, e₁−e₂−e₃−e₄)`.
///
/// The `e_i` are the square roots of the eigenvalues of `ρρ̃`. They are obtained
/// as the singular values of `Aᵀ(σy⊗σy)A` for a factor `ρ = AA†`, which keeps
/// small values accurate.
pub fn concurrence(rho: &Mat4) -> Result<f64> {
    validate_state(rho)?;
    Ok(concurrence_unchecked(rho))
}

/// [`concurrence`] without input validation, for inner optimization loops.
/// Negative eigenvalues of `rho` are clamped to zero.
pub fn concurrence_unchecked(rho: &Mat4) -> f64 {
    let (vals, vecs) = eigh4(rho);
    concurrence_from_eigh(&vals, &vecs)
}

/// Concurrence from a precomputed eigen-decomposition of the state.
pub fn concurrence_from_eigh(vals: &Vector4<f64>, vecs: &Mat4) -> f64 {
    signed_concurrence_from_eigh(vals, vecs).max(0.0)
}

/// `e₁−e₂−e₃−e₄` before clipping at zero; negative values measure how deep a
/// state sits inside the separable set.
pub fn signed_concurrence_from_eigh(vals: &Vector4<f64>, vecs: &Mat4) -> f64 {
    let mut factor = *vecs;
    for k in 0..4 {
        let s = C64::new(clamp_nonneg(vals[k]).sqrt(), 0.0);
        for r in 0..4 {
            factor[(r, k)] *= s;
        }
    }
    let flipped = factor.transpose() * spin_flip_operator() * factor;
    let sv = SVD::new(flipped, false, false).singular_values;
    let mut e = [sv[0], sv[1], sv[2], sv[3]];
    e.sort_by(|a, b| b.total_cmp(a));
    e[0] - e[1] - e[2] - e[3]
}

/// Concurrence evaluated literally as the eigenvalues of `√(√ρ ρ̃ √ρ)`.
/// Kept as an independent cross-check of [`concurrence`].
pub fn concurrence_sqrt_form(rho: &Mat4) -> Result<f64> {
    validate_state(rho)?;
    let (vals, vecs) = eigh4(rho);
    let sqrt_diag = Mat4::from_diagonal(&vals.map(|v| C64::new(clamp_nonneg(v).sqrt(), 0.0)));
    let sqrt_rho = vecs * sqrt_diag * vecs.adjoint();
    let y = spin_flip_operator();
    let rho_tilde = y * rho.conjugate() * y;
    let r = sqrt_rho * rho_tilde * sqrt_rho;
    let ev = eigvalsh4(&r);
    let e: Vec<f64> = ev.iter().map(|&v| clamp_nonneg(v).sqrt()).collect();
    Ok((e[0] - e[1] - e[2] - e[3]).max(0.0))
}

/// Signed singular values `(t₁, t₂, t₃)` of a correlation matrix: `T = O_A diag(t) O_Bᵀ`
/// with `O_A, O_B` proper rotations. The sign of `det T` is carried by `t₃`.
pub fn signed_singular_values(t: &Matrix3<f64>) -> Vector3<f64> {
    // The fixed-size 3×3 SVD of nalgebra loses accuracy near degenerate
    // singular values; the dynamic implementation does not.
    let dynamic = nalgebra::DMatrix::from_column_slice(3, 3, t.as_slice());
    let mut s: Vec<f64> = dynamic.singular_values().iter().copied().collect();
    s.sort_by(|a, b| b.total_cmp(a));
    let sign = if t.determinant() < 0.0 { -1.0 } else { 1.0 };
    Vector3::new(s[0], s[1], sign * s[2])
}

/// Spectrum (descending) of `ρ(0, 0, T)`.
///
/// A state with unbiased marginals is locally unitarily equivalent to a
/// Bell-diagonal state, whose eigenvalues are `¼(1 + s·t)` over the four sign
/// patterns with `s₁s₂s₃ = −1`.
pub fn zero_marginal_spectrum(t: &Matrix3<f64>) -> Vector4<f64> {
    let tv = signed_singular_values(t);
    let patterns = [
        [1.0, -1.0, 1.0],
        [-1.0, 1.0, 1.0],
        [1.0, 1.0, -1.0],
        [-1.0, -1.0, -1.0],
    ];
    let mut ev: Vec<f64> = patterns
        .iter()
        .map(|s| 0.25 * (1.0 + s[0] * tv.x + s[1] * tv.y + s[2] * tv.z))
        .collect();
    ev.sort_by(|a, b| b.total_cmp(a));
    Vector4::new(ev[0], ev[1], ev[2], ev[3])
}

/// Concurrence of `ρ(0, 0, T)` in closed form, `max(0, 2λ_max − 1)`.
pub fn zero_marginal_concurrence(t: &Matrix3<f64>) -> f64 {
    (2.0 * zero_marginal_spectrum(t)[0] - 1.0).max(0.0)
}

/// Binary entropy in bits.
pub fn binary_entropy(p: f64) -> f64 {
    shannon_entropy(&[p, 1.0 - p])
}

/// Shannon entropy in bits of a probability vector, with `0·log 0 = 0`.
/// Entries in `[-EIG_CLAMP, 0)` are treated as zero.
pub fn shannon_entropy(probs: &[f64]) -> f64 {
    probs
        .iter()
        .filter(|&&p| p > 0.0)
        .map(|&p| -p * p.log2())
        .sum()
}

/// `E_F = h(½(1 − √(1 − C²)))`.
pub fn entanglement_of_formation(rho: &Mat4) -> Result<f64> {
    let c = concurrence(rho)?;
    Ok(eof_from_concurrence(c))
}

pub fn eof_from_concurrence(c: f64) -> f64 {
    let c = c.clamp(0.0, 1.0);
    binary_entropy(0.5 * (1.0 - (1.0 - c * c).max(0.0).sqrt()))
}

/// Von Neumann entropy in bits of an `n×n` density operator.
pub fn von_neumann_entropy(rho: &nalgebra::DMatrix<C64>) -> Result<f64> {
    let n = rho.nrows();
    if n == 0 || rho.ncols() != n {
        return Err(Error::Domain(
            "entropy needs a non-empty square matrix".into(),
        ));
    }
    let herm_gap = (rho - rho.adjoint())
        .iter()
        .map(|z| z.norm())
        .fold(0.0, f64::max);
    let tr = rho.trace();
    if herm_gap > STATE_TOL || (tr.re - 1.0).abs() > STATE_TOL || tr.im.abs() > STATE_TOL {
        return Err(Error::Domain(
            "entropy input is not a unit-trace Hermitian matrix".into(),
        ));
    }
    let herm = (rho + rho.adjoint()) * C64::new(0.5, 0.0);
    let ev = herm.symmetric_eigenvalues();
    if ev.min() < -STATE_TOL {
        return Err(Error::Domain(format!(
            "entropy input is not positive semidefinite (min eigenvalue {:e})",
            ev.min()
        )));
    }
    Ok(spectrum_entropy(ev.as_slice()))
}

/// Entropy of a (possibly slightly negative) spectrum.
pub fn spectrum_entropy(ev: &[f64]) -> f64 {
    let clamped: Vec<f64> = ev.iter().map(|&v| clamp_nonneg(v)).collect();
    shannon_entropy(&clamped)
}

pub fn entropy4(rho: &Mat4) -> Result<f64> {
    validate_state(rho)?;
    Ok(spectrum_entropy(eigvalsh4(rho).as_slice()))
}

/// Partial transpose on the second qubit.
pub fn partial_transpose_b(rho: &Mat4) -> Mat4 {
    Mat4::from_fn(|r, c| {
        let (a1, b1) = (r / 2, r % 2);
        let (a2, b2) = (c / 2, c % 2);
        rho[(2 * a1 + b2, 2 * a2 + b1)]
    })
}

/// Smallest eigenvalue of the partial transpose; negative iff the state is
/// entangled (for two qubits).
pub fn ppt_min_eigenvalue(rho: &Mat4) -> f64 {
    min_eigenvalue(&partial_transpose_b(rho))
}

/// Spectral purification data `|ψ⟩ = Σ_j √λ_j |φ_j⟩|j⟩`.
#[derive(Debug, Clone)]
pub struct Purification {
    pub eigenvalues: Vector4<f64>,
    /// Columns are the eigenvectors `φ_j`.
    pub eigenvectors: Mat4,
}

impl Purification {
    pub fn reconstruct(&self) -> Mat4 {
        let d = Mat4::from_diagonal(&self.eigenvalues.map(|v| C64::new(v, 0.0)));
        self.eigenvectors * d * self.eigenvectors.adjoint()
    }

    /// Eve's reduced state, diagonal in her basis.
    pub fn environment_state(&self) -> Mat4 {
        // (ρ_E)_jk = √(λ_jλ_k)⟨φ_k|φ_j⟩ = λ_j δ_jk
        let g = self.eigenvectors.adjoint() * self.eigenvectors;
        Mat4::from_fn(|j, k| {
            C64::new((self.eigenvalues[j] * self.eigenvalues[k]).sqrt(), 0.0) * g[(k, j)]
        })
    }

    /// Unnormalized conditional state of Eve, `Tr_AB[(Π⊗1)|ψ⟩⟨ψ|]`, for an
    /// operator `op` acting on AB.
    pub fn conditional_environment_state(&self, op: &Mat4) -> Mat4 {
        let g = self.eigenvectors.adjoint() * op * self.eigenvectors;
        Mat4::from_fn(|j, k| {
            C64::new((self.eigenvalues[j] * self.eigenvalues[k]).sqrt(), 0.0) * g[(k, j)]
        })
    }
}

/// Eigen-decomposition based purification; eigenvalues sorted descending and
/// clamped to be non-negative, then renormalized.
pub fn purify(rho: &Mat4) -> Result<Purification> {
    validate_state(rho)?;
    Ok(purify_unchecked(rho))
}

pub fn purify_unchecked(rho: &Mat4) -> Purification {
    let (vals, vecs) = eigh4(rho);
    let clamped = vals.map(clamp_nonneg);
    let total = clamped.sum();
    Purification {
        eigenvalues: clamped / total,
        eigenvectors: vecs,
    }
}

/// A qubit POVM: positive 2×2 elements summing to the identity.
#[derive(Debug, Clone, PartialEq)]
pub struct Povm {
    elements: Vec<Mat2>,
}

impl Povm {
    pub fn new(elements: Vec<Mat2>) -> Result<Self> {
        if elements.is_empty() {
            return Err(Error::InvalidPovm("no elements".into()));
        }
        let mut sum = Mat2::zeros();
        for (k, e) in elements.iter().enumerate() {
            let herm_gap = (e - e.adjoint())
                .iter()
                .map(|z| z.norm())
                .fold(0.0, f64::max);
            if herm_gap > POVM_TOL {
                return Err(Error::InvalidPovm(format!("element {k} is not Hermitian")));
            }
            let lmin = qubit_min_eigenvalue(e);
            if lmin < -POVM_TOL {
                return Err(Error::InvalidPovm(format!(
                    "element {k} has negative eigenvalue {lmin:e}"
                )));
            }
            sum += e;
        }
        let gap = (sum - Mat2::identity())
            .iter()
            .map(|z| z.norm())
            .fold(0.0, f64::max);
        if gap > POVM_TOL {
            return Err(Error::InvalidPovm(format!(
                "elements sum to identity only within {gap:e}"
            )));
        }
        Ok(Self { elements })
    }

    /// Builds a POVM without validation. Callers guarantee the invariants.
    pub(crate) fn from_elements_unchecked(elements: Vec<Mat2>) -> Self {
        Self { elements }
    }

    /// Two-outcome measurement `{γ1 + (η/2) n·σ, (1−γ)1 − (η/2) n·σ}` with
    /// outcome order `[+1, −1]`.
    pub fn dichotomic(gamma: f64, eta: f64, n: &Vector3<f64>) -> Result<Self> {
        let v = n.normalize() * (0.5 * eta);
        Self::new(vec![
            affine_qubit_operator(gamma, &v),
            affine_qubit_operator(1.0 - gamma, &(-v)),
        ])
    }

    /// Unbiased noisy observable `½(1 ± η n·σ)`.
    pub fn unbiased(eta: f64, n: &Vector3<f64>) -> Result<Self> {
        Self::dichotomic(0.5, eta, n)
    }

    /// Projective measurement along `n`, outcomes `[+1, −1]`.
    pub fn projective(n: &Vector3<f64>) -> Self {
        Self::dichotomic(0.5, 1.0, n).expect("projective POVM is valid")
    }

    pub fn elements(&self) -> &[Mat2] {
        &self.elements
    }

    pub fn len(&self) -> usize {
        self.elements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elements.is_empty()
    }

    /// Observable `Σ_a a Π^a` for label list `labels`.
    pub fn observable(&self, labels: &[f64]) -> Mat2 {
        self.elements
            .iter()
            .zip(labels)
            .fold(Mat2::zeros(), |acc, (e, &l)| acc + e * C64::new(l, 0.0))
    }
}

pub fn qubit_min_eigenvalue(m: &Mat2) -> f64 {
    let (g, v) = qubit_bloch_parts(m);
    g - v.norm()
}

/// SIC-POVM used for the symmetric-measurement family, with `χ = e^{2πi/3}`.
pub fn sic_povm() -> Povm {
    let chi = C64::from_polar(1.0, 2.0 * std::f64::consts::PI / 3.0);
    let off = 1.0 / (3.0 * 2f64.sqrt());
    let r = |x: f64| C64::new(x, 0.0);
    let s0 = Mat2::new(r(0.5), ZERO, ZERO, ZERO);
    let s1 = Mat2::new(r(1.0 / 6.0), r(off), r(off), r(1.0 / 3.0));
    let s2 = Mat2::new(r(1.0 / 6.0), chi * off, chi.conj() * off, r(1.0 / 3.0));
    let s3 = Mat2::new(r(1.0 / 6.0), chi.conj() * off, chi * off, r(1.0 / 3.0));
    Povm::new(vec![s0, s1, s2, s3]).expect("SIC elements form a POVM")
}

/// `p(a,b|x,y) = Tr[ρ Π^a_x ⊗ Π^b_y]` for every setting pair, outcome labels
/// left for the caller to attach.
pub fn born_statistics(rho: &Mat4, povms_a: &[Povm], povms_b: &[Povm]) -> Result<ProbTable> {
    validate_state(rho)?;
    for p in povms_a.iter().chain(povms_b) {
        Povm::new(p.elements.clone())?;
    }
    born_statistics_unchecked(rho, povms_a, povms_b)
}

pub(crate) fn born_statistics_unchecked(
    rho: &Mat4,
    povms_a: &[Povm],
    povms_b: &[Povm],
) -> Result<ProbTable> {
    if povms_a.is_empty() || povms_b.is_empty() {
        return Err(Error::Domain(
            "each party needs at least one measurement".into(),
        ));
    }
    let ka = povms_a[0].len();
    let kb = povms_b[0].len();
    if povms_a.iter().any(|p| p.len() != ka) || povms_b.iter().any(|p| p.len() != kb) {
        return Err(Error::Domain(
            "all settings of a party must have the same number of outcomes".into(),
        ));
    }
    let mut table = ProbTable::zeros(povms_a.len(), povms_b.len(), ka, kb);
    for (x, pa) in povms_a.iter().enumerate() {
        for (y, pb) in povms_b.iter().enumerate() {
            for (a, ea) in pa.elements.iter().enumerate() {
                for (b, eb) in pb.elements.iter().enumerate() {
                    table.set(x, y, a, b, expectation(rho, &kron(ea, eb)));
                }
            }
        }
    }
    Ok(table)
}

/// `Re Tr[ρ·op]`.
pub fn expectation(rho: &Mat4, op: &Mat4) -> f64 {
    let mut acc = 0.0;
    for r in 0..4 {
        for c in 0..4 {
            acc += (rho[(r, c)] * op[(c, r)]).re;
        }
    }
    acc
}

/// Fidelity `⟨ψ|ρ|ψ⟩` with a pure state.
pub fn pure_fidelity(rho: &Mat4, psi: &Vector4<C64>) -> f64 {
    (psi.adjoint() * rho * psi)[(0, 0)].re
}

pub fn phi_plus_vector() -> Vector4<C64> {
    let s = C64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
    Vector4::new(s, ZERO, ZERO, s)
}

pub fn pure_density(psi: &Vector4<C64>) -> Mat4 {
    psi * psi.adjoint()
}
