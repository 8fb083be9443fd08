#![allow(dead_code)]

use dimcert::qmat::{Mat2, Mat4, C64};
use nalgebra::{DMatrix, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn gaussian(rng: &mut ChaCha8Rng) -> C64 {
    C64::new(rng.sample(StandardNormal), rng.sample(StandardNormal))
}

/// `GG†/Tr` for a `4×k` complex Gaussian `G`; `k` sets the rank.
pub fn random_state(rng: &mut ChaCha8Rng, rank: usize) -> Mat4 {
    let g = DMatrix::from_fn(4, rank, |_, _| gaussian(rng));
    let rho = &g * g.adjoint();
    let tr = rho.trace();
    Mat4::from_fn(|r, c| rho[(r, c)] / tr)
}

/// Haar-ish random unitary from the QR decomposition of a Gaussian matrix.
pub fn random_unitary2(rng: &mut ChaCha8Rng) -> Mat2 {
    let g = Mat2::from_fn(|_, _| gaussian(rng));
    g.qr().q()
}

/// Eigenvalues of a Hermitian matrix, ascending.
pub fn hermitian_eigenvalues(m: &DMatrix<C64>) -> Vec<f64> {
    let herm = (m + m.adjoint()) * C64::new(0.5, 0.0);
    let mut v: Vec<f64> = SymmetricEigen::new(herm)
        .eigenvalues
        .iter()
        .copied()
        .collect();
    v.sort_by(f64::total_cmp);
    v
}

pub fn dyn4(m: &Mat4) -> DMatrix<C64> {
    DMatrix::from_fn(4, 4, |r, c| m[(r, c)])
}

/// Partial transpose on Bob, written with explicit basis indices `|ab⟩ = |2a+b⟩`.
pub fn partial_transpose_oracle(rho: &Mat4) -> Mat4 {
    let mut out = Mat4::zeros();
    for a in 0..2 {
        for b in 0..2 {
            for a2 in 0..2 {
                for b2 in 0..2 {
                    out[(2 * a + b, 2 * a2 + b2)] = rho[(2 * a + b2, 2 * a2 + b)];
                }
            }
        }
    }
    out
}

/// Wootters concurrence from the eigenvalues of `√ρ ρ̃ √ρ`, with `ρ̃` built
/// from explicit Pauli matrices.
pub fn concurrence_oracle(rho: &Mat4) -> f64 {
    let z = C64::new(0.0, 0.0);
    let i = C64::new(0.0, 1.0);
    let sy = Mat2::new(z, -i, i, z);
    let yy = sy.kronecker(&sy);
    let tilde = yy * rho.conjugate() * yy;
    let eig = SymmetricEigen::new(dyn4(rho));
    let sqrt_d = DMatrix::from_diagonal(&eig.eigenvalues.map(|v| C64::new(v.max(0.0).sqrt(), 0.0)));
    let sqrt_rho = &eig.eigenvectors * sqrt_d * eig.eigenvectors.adjoint();
    let r = &sqrt_rho * dyn4(&tilde) * &sqrt_rho;
    let mut e: Vec<f64> = hermitian_eigenvalues(&r)
        .iter()
        .map(|v| v.max(0.0).sqrt())
        .collect();
    e.sort_by(|a, b| b.total_cmp(a));
    (e[0] - e[1] - e[2] - e[3]).max(0.0)
}

/// Von Neumann entropy in bits from a Hermitian eigen-decomposition.
pub fn entropy_oracle(m: &DMatrix<C64>) -> f64 {
    hermitian_eigenvalues(m)
        .iter()
        .filter(|&&v| v > 1e-15)
        .map(|v| -v * v.log2())
        .sum()
}
