//! Seeded random instances: Hermitian matrices, states, unitaries, channels.
//!
//! All generators take an explicit RNG so callers control determinism.

use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::channel::QuantumChannel;
use crate::operator::{identity, CMat, DensityMatrix, HermitianOperator, C64};

pub type SeededRng = ChaCha8Rng;

pub fn rng(seed: u64) -> SeededRng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn gaussian<R: Rng + ?Sized>(g: &mut R) -> f64 {
    g.sample(StandardNormal)
}

/// Matrix with i.i.d. standard complex Gaussian entries.
pub fn ginibre<R: Rng + ?Sized>(g: &mut R, rows: usize, cols: usize) -> CMat {
    CMat::from_fn(rows, cols, |_, _| {
        C64::new(gaussian(g), gaussian(g)) * std::f64::consts::FRAC_1_SQRT_2
    })
}

pub fn random_hermitian<R: Rng + ?Sized>(g: &mut R, n: usize) -> HermitianOperator {
    let a = ginibre(g, n, n);
    HermitianOperator::from_hermitian_parts(&(&a + a.adjoint()).scale(0.5))
}

/// Full-rank random state `G G* / Tr(G G*)`.
pub fn random_density<R: Rng + ?Sized>(g: &mut R, n: usize) -> DensityMatrix {
    random_density_rank(g, n, n)
}

/// Random state of the given rank.
pub fn random_density_rank<R: Rng + ?Sized>(g: &mut R, n: usize, rank: usize) -> DensityMatrix {
    let a = ginibre(g, n, rank.max(1));
    DensityMatrix::from_unnormalized(&(&a * a.adjoint())).expect("Gram matrix is a state")
}

/// Random state bounded away from the boundary: `(1-s) ρ + s I/n`.
pub fn random_faithful_density<R: Rng + ?Sized>(g: &mut R, n: usize, s: f64) -> DensityMatrix {
    let rho = random_density(g, n);
    let m = rho.matrix().scale(1.0 - s) + identity(n).scale(s / n as f64);
    DensityMatrix::from_unnormalized(&m).expect("mixture is a state")
}

pub fn random_unit_vector<R: Rng + ?Sized>(g: &mut R, n: usize) -> DVector<C64> {
    let v = DVector::from_fn(n, |_, _| C64::new(gaussian(g), gaussian(g)));
    let norm = v.norm();
    v.unscale(norm)
}

/// Haar-random unitary from the QR decomposition of a Ginibre matrix.
pub fn random_unitary<R: Rng + ?Sized>(g: &mut R, n: usize) -> CMat {
    random_isometry(g, n, n)
}

/// Random isometry `C^cols → C^rows` (`rows ≥ cols`).
pub fn random_isometry<R: Rng + ?Sized>(g: &mut R, rows: usize, cols: usize) -> CMat {
    assert!(rows >= cols, "isometry needs rows >= cols");
    let a = ginibre(g, rows, cols);
    let qr = a.qr();
    let mut q = qr.q();
    let rr = qr.r();
    for j in 0..cols {
        let d = rr[(j, j)];
        let phase = if d.norm() > 0.0 { d / d.norm() } else { C64::new(1.0, 0.0) };
        let mut col = q.column_mut(j);
        col *= phase;
    }
    q
}

/// Random channel `M_in → M_out` with `kraus` Kraus operators, obtained
/// from a random Stinespring isometry.
pub fn random_channel<R: Rng + ?Sized>(
    g: &mut R,
    in_dim: usize,
    out_dim: usize,
    kraus: usize,
) -> QuantumChannel {
    let v = random_isometry(g, out_dim * kraus, in_dim);
    let ops = (0..kraus)
        .map(|k| v.rows(k * out_dim, out_dim).into_owned())
        .collect();
    QuantumChannel::from_kraus(in_dim, out_dim, ops).expect("isometry blocks are trace preserving")
}

/// Random real matrix with i.i.d. standard normal entries.
pub fn random_real<R: Rng + ?Sized>(g: &mut R, rows: usize, cols: usize) -> nalgebra::DMatrix<f64> {
    nalgebra::DMatrix::from_fn(rows, cols, |_, _| gaussian(g))
}

pub fn random_real_vector<R: Rng + ?Sized>(g: &mut R, n: usize) -> DVector<f64> {
    DVector::from_fn(n, |_, _| gaussian(g))
}
