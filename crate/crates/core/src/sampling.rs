//! Seeded random matrices for audits and tests.

use nalgebra::QR;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::linalg::{hermitian_part, CMatrix, DensityMatrix, HermitianMatrix, C64};

pub type SampleRng = ChaCha8Rng;

pub fn rng(seed: u64) -> SampleRng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn normal<R: Rng + ?Sized>(r: &mut R) -> f64 {
    StandardNormal.sample(r)
}

/// Complex Ginibre matrix with unit-variance entries.
pub fn random_matrix<R: Rng + ?Sized>(n: usize, r: &mut R) -> CMatrix {
    CMatrix::from_fn(n, n, |_, _| C64::new(normal(r), normal(r)) / 2f64.sqrt())
}

pub fn random_hermitian<R: Rng + ?Sized>(n: usize, r: &mut R) -> HermitianMatrix {
    HermitianMatrix::from_hermitian_part(&hermitian_part(&random_matrix(n, r)))
}

/// Haar-ish unitary from the QR factor of a Ginibre matrix.
pub fn random_unitary<R: Rng + ?Sized>(n: usize, r: &mut R) -> CMatrix {
    let qr = QR::new(random_matrix(n, r));
    let q = qr.q();
    let rr = qr.r();
    let mut u = q.clone();
    for j in 0..n {
        let d = rr[(j, j)];
        let phase = if d.norm() > 0.0 { d / d.norm() } else { C64::new(1.0, 0.0) };
        for i in 0..n {
            u[(i, j)] = q[(i, j)] * phase;
        }
    }
    u
}

/// Positive definite matrix with eigenvalues drawn from `[lo, hi]` in a random basis.
pub fn random_positive<R: Rng + ?Sized>(n: usize, lo: f64, hi: f64, r: &mut R) -> HermitianMatrix {
    let u = random_unitary(n, r);
    let diag: Vec<f64> = (0..n).map(|_| r.random_range(lo..hi)).collect();
    let d = HermitianMatrix::from_real_diagonal(&diag);
    HermitianMatrix::from_hermitian_part(&(&u * d.as_matrix() * u.adjoint()))
}

/// Invertible density whose eigenvalues (normalized convention, summing to `n`)
/// are bounded below by `floor`.
pub fn random_density<R: Rng + ?Sized>(n: usize, floor: f64, r: &mut R) -> DensityMatrix {
    let u = random_unitary(n, r);
    let weights: Vec<f64> = (0..n).map(|_| r.random_range(0.05..1.0)).collect();
    let total: f64 = weights.iter().sum();
    let free = n as f64 - floor * n as f64;
    let diag: Vec<f64> = weights.iter().map(|w| floor + free * w / total).collect();
    let d = HermitianMatrix::from_real_diagonal(&diag);
    let h = HermitianMatrix::from_hermitian_part(&(&u * d.as_matrix() * u.adjoint()));
    DensityMatrix::from_hermitian_unchecked(h)
}

/// Random diagonal density with entries at least `floor`.
pub fn random_diagonal_density<R: Rng + ?Sized>(n: usize, floor: f64, r: &mut R) -> DensityMatrix {
    let weights: Vec<f64> = (0..n).map(|_| r.random_range(0.05..1.0)).collect();
    let total: f64 = weights.iter().sum();
    let free = n as f64 - floor * n as f64;
    let diag: Vec<f64> = weights.iter().map(|w| floor + free * w / total).collect();
    DensityMatrix::from_hermitian_unchecked(HermitianMatrix::from_real_diagonal(&diag))
}
