//! Hermitian matrix calculus on finite-dimensional Hilbert spaces.
//!
//! Everything here is dense and complex-valued. States are density matrices
//! with respect to the canonical trace, so a state `φ` acts as
//! `φ(a) = Tr(ρ a)`. Singular functions (logarithms, negative and imaginary
//! powers) are applied on the support only: eigenvalues below
//! [`SUPPORT_TOL`] times the largest eigenvalue are treated as kernel and
//! mapped to zero.

use std::fmt;
use std::ops::{Add, Mul, Sub};

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type C64 = Complex64;
pub type CMat = DMatrix<C64>;

/// Relative eigenvalue threshold separating support from kernel.
pub const SUPPORT_TOL: f64 = 1e-12;
/// Hermiticity defect above which construction fails.
pub const HERM_TOL: f64 = 1e-8;
/// Most negative eigenvalue accepted (and clipped) for a density matrix.
pub const PSD_FLOOR: f64 = -1e-12;
/// Trace deviation accepted on input; densities are renormalized afterwards.
pub const TRACE_TOL: f64 = 1e-9;

pub fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

pub fn r(re: f64) -> C64 {
    C64::new(re, 0.0)
}

/// Conjugate transpose.
pub fn dagger(m: &CMat) -> CMat {
    m.adjoint()
}

pub fn identity(n: usize) -> CMat {
    CMat::identity(n, n)
}

pub fn zeros(rows: usize, cols: usize) -> CMat {
    CMat::zeros(rows, cols)
}

pub fn trace(m: &CMat) -> C64 {
    m.trace()
}

/// Real diagonal matrix.
pub fn diag(values: &[f64]) -> CMat {
    let n = values.len();
    let mut m = zeros(n, n);
    for (i, v) in values.iter().enumerate() {
        m[(i, i)] = r(*v);
    }
    m
}

pub fn commutator(a: &CMat, b: &CMat) -> CMat {
    a * b - b * a
}

/// Hilbert–Schmidt inner product `Tr(a* b)`.
pub fn hs_inner_c(a: &CMat, b: &CMat) -> C64 {
    a.iter().zip(b.iter()).map(|(x, y)| x.conj() * y).sum()
}

pub fn frobenius(a: &CMat) -> f64 {
    a.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt()
}

pub fn max_abs(a: &CMat) -> f64 {
    a.iter().map(|x| x.norm()).fold(0.0, f64::max)
}

/// Largest entrywise deviation from Hermiticity.
pub fn hermiticity_defect(m: &CMat) -> f64 {
    let n = m.nrows();
    let mut dev: f64 = 0.0;
    for i in 0..n {
        for j in i..n {
            dev = dev.max((m[(i, j)] - m[(j, i)].conj()).norm());
        }
    }
    dev
}

/// `(m + m*)/2`.
pub fn symmetrize(m: &CMat) -> CMat {
    (m + m.adjoint()).scale(0.5)
}

/// Kronecker product of two arbitrary matrices.
pub fn kron(a: &CMat, b: &CMat) -> CMat {
    a.kronecker(b)
}

/// Kronecker product of a list of factors, left to right.
pub fn kron_all(factors: &[CMat]) -> CMat {
    let mut acc = identity(1);
    for f in factors {
        acc = kron(&acc, f);
    }
    acc
}

/// Trace norm of a Hermitian matrix (sum of absolute eigenvalues).
pub fn trace_norm_hermitian(m: &CMat) -> f64 {
    let eig = SymmetricEigen::new(symmetrize(m));
    eig.eigenvalues.iter().map(|x| x.abs()).sum()
}

/// Trace norm of an arbitrary matrix (sum of singular values).
pub fn trace_norm(m: &CMat) -> f64 {
    m.clone().svd(false, false).singular_values.iter().sum()
}

/// Operator norm (largest singular value).
pub fn operator_norm(m: &CMat) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    m.clone()
        .svd(false, false)
        .singular_values
        .iter()
        .fold(0.0, |a: f64, b| a.max(*b))
}

fn check_square(m: &CMat) -> Result<usize> {
    if m.nrows() != m.ncols() {
        return Err(Error::NotSquare {
            rows: m.nrows(),
            cols: m.ncols(),
        });
    }
    Ok(m.nrows())
}

/// Self-adjoint operator on `C^n`.
#[derive(Clone, Debug, PartialEq)]
pub struct HermitianOperator(CMat);

impl HermitianOperator {
    /// Symmetrizes `m`; fails when `m` is not square or deviates from its
    /// adjoint by more than [`HERM_TOL`] (relative to its largest entry).
    pub fn new(m: CMat) -> Result<Self> {
        check_square(&m)?;
        let scale = max_abs(&m).max(1.0);
        let deviation = hermiticity_defect(&m);
        if deviation > HERM_TOL * scale {
            return Err(Error::NotHermitian { deviation });
        }
        Ok(Self(symmetrize(&m)))
    }

    /// Wraps `m` after symmetrization without the deviation check. Used for
    /// matrices that are Hermitian by construction.
    pub fn from_hermitian_parts(m: &CMat) -> Self {
        Self(symmetrize(m))
    }

    pub fn diagonal(values: &[f64]) -> Self {
        Self(diag(values))
    }

    pub fn identity(n: usize) -> Self {
        Self(identity(n))
    }

    pub fn zeros(n: usize) -> Self {
        Self(zeros(n, n))
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn matrix(&self) -> &CMat {
        &self.0
    }

    pub fn into_matrix(self) -> CMat {
        self.0
    }

    pub fn trace(&self) -> f64 {
        self.0.trace().re
    }

    pub fn scaled(&self, s: f64) -> Self {
        Self(self.0.scale(s))
    }

    /// `self + s·I`.
    pub fn shifted(&self, s: f64) -> Self {
        Self(&self.0 + identity(self.dim()).scale(s))
    }

    /// Expectation in the state `ρ`: `Tr(ρ h)`.
    pub fn expectation(&self, rho: &DensityMatrix) -> f64 {
        hs_inner(rho.as_hermitian(), self)
    }
}

impl fmt::Display for HermitianOperator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl Add for &HermitianOperator {
    type Output = HermitianOperator;
    fn add(self, rhs: Self) -> HermitianOperator {
        HermitianOperator(&self.0 + &rhs.0)
    }
}

impl Sub for &HermitianOperator {
    type Output = HermitianOperator;
    fn sub(self, rhs: Self) -> HermitianOperator {
        HermitianOperator(&self.0 - &rhs.0)
    }
}

impl Add for HermitianOperator {
    type Output = HermitianOperator;
    fn add(self, rhs: Self) -> HermitianOperator {
        HermitianOperator(self.0 + rhs.0)
    }
}

impl Sub for HermitianOperator {
    type Output = HermitianOperator;
    fn sub(self, rhs: Self) -> HermitianOperator {
        HermitianOperator(self.0 - rhs.0)
    }
}

impl Mul<f64> for &HermitianOperator {
    type Output = HermitianOperator;
    fn mul(self, rhs: f64) -> HermitianOperator {
        self.scaled(rhs)
    }
}

/// Eigen-decomposition `U diag(λ) U*` with ascending eigenvalues.
#[derive(Clone, Debug)]
pub struct SpectralDecomposition {
    pub eigenvalues: Vec<f64>,
    pub eigenvectors: CMat,
}

impl SpectralDecomposition {
    pub fn dim(&self) -> usize {
        self.eigenvalues.len()
    }

    /// Support threshold: [`SUPPORT_TOL`] times the largest |eigenvalue|.
    pub fn support_threshold(&self) -> f64 {
        let top = self.eigenvalues.iter().fold(0.0_f64, |a, b| a.max(b.abs()));
        SUPPORT_TOL * top.max(f64::MIN_POSITIVE)
    }

    /// Indices of eigenvalues on the support (strictly above threshold).
    pub fn support_indices(&self) -> Vec<usize> {
        let thr = self.support_threshold();
        (0..self.dim())
            .filter(|&i| self.eigenvalues[i] > thr)
            .collect()
    }

    /// `U diag(f(λ)) U*` with complex values. When `on_support` is set,
    /// eigenvalues with |λ| at or below the support threshold map to zero.
    pub fn apply_complex<F>(&self, f: F, on_support: bool) -> Result<CMat>
    where
        F: Fn(f64) -> C64,
    {
        let n = self.dim();
        let thr = self.support_threshold();
        let mut values = Vec::with_capacity(n);
        for &l in &self.eigenvalues {
            let v = if on_support && l.abs() <= thr {
                C64::new(0.0, 0.0)
            } else {
                let v = f(l);
                if !v.re.is_finite() || !v.im.is_finite() {
                    return Err(Error::FunctionUndefined(l));
                }
                v
            };
            values.push(v);
        }
        let u = &self.eigenvectors;
        let mut scaled = u.clone();
        for (j, v) in values.iter().enumerate() {
            let mut col = scaled.column_mut(j);
            col *= *v;
        }
        Ok(scaled * u.adjoint())
    }

    /// Real function of the operator; the result is Hermitian.
    pub fn apply<F>(&self, f: F, on_support: bool) -> Result<HermitianOperator>
    where
        F: Fn(f64) -> f64,
    {
        let m = self.apply_complex(|x| r(f(x)), on_support)?;
        Ok(HermitianOperator::from_hermitian_parts(&m))
    }

    pub fn reconstruct(&self) -> CMat {
        self.apply_complex(r, false)
            .expect("identity function is finite")
    }
}

/// Ascending spectral decomposition of a Hermitian operator.
pub fn spectral(h: &HermitianOperator) -> SpectralDecomposition {
    spectral_of_hermitian(h.matrix())
}

/// Spectral decomposition of a raw matrix, rejecting non-Hermitian input.
pub fn spectral_checked(m: &CMat) -> Result<SpectralDecomposition> {
    let h = HermitianOperator::new(m.clone())?;
    Ok(spectral(&h))
}

fn spectral_of_hermitian(m: &CMat) -> SpectralDecomposition {
    let n = m.nrows();
    if n == 0 {
        return SpectralDecomposition {
            eigenvalues: Vec::new(),
            eigenvectors: zeros(0, 0),
        };
    }
    let eig = SymmetricEigen::new(m.clone());
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let eigenvalues = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let mut eigenvectors = zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        eigenvectors.set_column(dst, &eig.eigenvectors.column(src));
    }
    SpectralDecomposition {
        eigenvalues,
        eigenvectors,
    }
}

/// Functional calculus `f(h)`. Functions singular at zero (logarithm,
/// negative powers) require `on_support`.
pub fn matrix_fn<F>(h: &HermitianOperator, f: F, on_support: bool) -> Result<HermitianOperator>
where
    F: Fn(f64) -> f64,
{
    spectral(h).apply(f, on_support)
}

/// Kronecker product `a ⊗ b`.
pub fn tensor(a: &HermitianOperator, b: &HermitianOperator) -> HermitianOperator {
    HermitianOperator(kron(&a.0, &b.0))
}

/// `Tr(a b)` for Hermitian operators (always real).
pub fn hs_inner(a: &HermitianOperator, b: &HermitianOperator) -> f64 {
    hs_inner_c(&a.0, &b.0).re
}

/// Partial trace of an arbitrary square matrix on `⊗ C^{dims[k]}`, keeping
/// the factors in `keep` (in ascending order).
pub fn partial_trace_matrix(x: &CMat, dims: &[usize], keep: &[usize]) -> Result<CMat> {
    let n = check_square(x)?;
    let total: usize = dims.iter().product();
    if total != n {
        return Err(Error::DimensionMismatch {
            expected: total,
            got: n,
        });
    }
    let mut keep_sorted: Vec<usize> = keep.to_vec();
    keep_sorted.sort_unstable();
    keep_sorted.dedup();
    if keep_sorted.len() != keep.len() || keep_sorted.iter().any(|&k| k >= dims.len()) {
        return Err(Error::InvalidParameter(format!(
            "keep set {keep:?} invalid for {} factors",
            dims.len()
        )));
    }
    let traced: Vec<usize> = (0..dims.len())
        .filter(|k| !keep_sorted.contains(k))
        .collect();
    // strides of the full row-major multi-index
    let mut strides = vec![1usize; dims.len()];
    for k in (0..dims.len().saturating_sub(1)).rev() {
        strides[k] = strides[k + 1] * dims[k + 1];
    }
    let keep_dims: Vec<usize> = keep_sorted.iter().map(|&k| dims[k]).collect();
    let trace_dims: Vec<usize> = traced.iter().map(|&k| dims[k]).collect();
    let out_n: usize = keep_dims.iter().product();
    let trace_n: usize = trace_dims.iter().product();

    let offset = |local: usize, which: &[usize], local_dims: &[usize]| -> usize {
        let mut rem = local;
        let mut off = 0;
        for (pos, &k) in which.iter().enumerate().rev() {
            let d = local_dims[pos];
            off += (rem % d) * strides[k];
            rem /= d;
        }
        off
    };
    let keep_offsets: Vec<usize> = (0..out_n)
        .map(|i| offset(i, &keep_sorted, &keep_dims))
        .collect();
    let trace_offsets: Vec<usize> = (0..trace_n)
        .map(|i| offset(i, &traced, &trace_dims))
        .collect();

    let mut out = zeros(out_n, out_n);
    for (i, &ki) in keep_offsets.iter().enumerate() {
        for (j, &kj) in keep_offsets.iter().enumerate() {
            let mut acc = C64::new(0.0, 0.0);
            for &t in &trace_offsets {
                acc += x[(ki + t, kj + t)];
            }
            out[(i, j)] = acc;
        }
    }
    Ok(out)
}

pub fn partial_trace(
    x: &HermitianOperator,
    dims: &[usize],
    keep: &[usize],
) -> Result<HermitianOperator> {
    Ok(HermitianOperator::from_hermitian_parts(
        &partial_trace_matrix(x.matrix(), dims, keep)?,
    ))
}

/// Positive semidefinite unit-trace matrix together with its spectrum.
#[derive(Clone, Debug)]
pub struct DensityMatrix {
    rho: HermitianOperator,
    spec: SpectralDecomposition,
    rank: usize,
}

impl PartialEq for DensityMatrix {
    fn eq(&self, other: &Self) -> bool {
        self.rho == other.rho
    }
}

impl DensityMatrix {
    /// Validates positivity (eigenvalues ≥ [`PSD_FLOOR`], clipped to zero)
    /// and unit trace (within [`TRACE_TOL`], renormalized exactly).
    pub fn new(m: CMat) -> Result<Self> {
        let h = HermitianOperator::new(m)?;
        Self::from_hermitian(h)
    }

    pub fn from_hermitian(h: HermitianOperator) -> Result<Self> {
        let tr = h.trace();
        if (tr - 1.0).abs() > TRACE_TOL {
            return Err(Error::NotDensity(format!("trace {tr} differs from 1")));
        }
        let spec = spectral(&h);
        if let Some(&min) = spec.eigenvalues.first() {
            if min < PSD_FLOOR {
                return Err(Error::NotDensity(format!("negative eigenvalue {min:e}")));
            }
        }
        Ok(Self::assemble(spec))
    }

    /// Normalizes a positive semidefinite matrix to unit trace; small
    /// negative eigenvalues (relative to the trace) are clipped.
    pub fn from_unnormalized(m: &CMat) -> Result<Self> {
        let h = HermitianOperator::new(m.clone())?;
        let tr = h.trace();
        if tr.is_nan() || tr <= 0.0 {
            return Err(Error::NotDensity(format!("non-positive trace {tr}")));
        }
        let spec = spectral(&h.scaled(1.0 / tr));
        if let Some(&min) = spec.eigenvalues.first() {
            if min < -1e-10 {
                return Err(Error::NotDensity(format!("negative eigenvalue {min:e}")));
            }
        }
        Ok(Self::assemble(spec))
    }

    fn assemble(mut spec: SpectralDecomposition) -> Self {
        for l in spec.eigenvalues.iter_mut() {
            if *l < 0.0 {
                *l = 0.0;
            }
        }
        let total: f64 = spec.eigenvalues.iter().sum();
        for l in spec.eigenvalues.iter_mut() {
            *l /= total;
        }
        let rho = HermitianOperator::from_hermitian_parts(&spec.reconstruct());
        let rank = spec.support_indices().len();
        Self { rho, spec, rank }
    }

    pub fn diagonal(probs: &[f64]) -> Result<Self> {
        Self::new(diag(probs))
    }

    /// `I/n`.
    pub fn maximally_mixed(n: usize) -> Self {
        Self::assemble(SpectralDecomposition {
            eigenvalues: vec![1.0 / n as f64; n],
            eigenvectors: identity(n),
        })
    }

    /// Pure state `|ψ⟩⟨ψ|` of a (not necessarily normalized) vector.
    pub fn pure(psi: &[C64]) -> Result<Self> {
        let v = nalgebra::DVector::from_column_slice(psi);
        let norm = v.norm();
        if norm == 0.0 {
            return Err(Error::NotDensity("zero vector".into()));
        }
        let v = v.unscale(norm);
        Self::new(&v * v.adjoint())
    }

    pub fn dim(&self) -> usize {
        self.rho.dim()
    }

    pub fn matrix(&self) -> &CMat {
        self.rho.matrix()
    }

    pub fn as_hermitian(&self) -> &HermitianOperator {
        &self.rho
    }

    pub fn spectrum(&self) -> &SpectralDecomposition {
        &self.spec
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.spec.eigenvalues
    }

    pub fn support_rank(&self) -> usize {
        self.rank
    }

    pub fn is_faithful(&self) -> bool {
        self.rank == self.dim()
    }

    pub fn ensure_faithful(&self) -> Result<()> {
        if self.is_faithful() {
            Ok(())
        } else {
            Err(Error::NonFaithful {
                rank: self.rank,
                dim: self.dim(),
            })
        }
    }

    /// `φ(a) = Tr(ρ a)` for an arbitrary matrix.
    pub fn expect(&self, a: &CMat) -> C64 {
        (self.matrix() * a).trace()
    }

    /// Isometry whose columns span the support.
    pub fn support_isometry(&self) -> CMat {
        let idx = self.spec.support_indices();
        let n = self.dim();
        let mut v = zeros(n, idx.len());
        for (j, &i) in idx.iter().enumerate() {
            v.set_column(j, &self.spec.eigenvectors.column(i));
        }
        v
    }

    pub fn support_projection(&self) -> CMat {
        let v = self.support_isometry();
        &v * v.adjoint()
    }

    /// Real power on the support (kernel maps to zero).
    pub fn power(&self, p: f64) -> HermitianOperator {
        self.spec
            .apply(|x| x.powf(p), true)
            .expect("powers are finite on the support")
    }

    pub fn sqrt(&self) -> HermitianOperator {
        self.power(0.5)
    }

    /// Logarithm on the support.
    pub fn log(&self) -> HermitianOperator {
        self.spec
            .apply(f64::ln, true)
            .expect("log is finite on the support")
    }

    /// `ρ^{it}` on the support; a partial isometry.
    pub fn imaginary_power(&self, t: f64) -> CMat {
        self.spec
            .apply_complex(|x| C64::new(0.0, t * x.ln()).exp(), true)
            .expect("imaginary powers are finite on the support")
    }

    /// von Neumann entropy `-Tr ρ log ρ`.
    pub fn entropy(&self) -> f64 {
        self.spec
            .eigenvalues
            .iter()
            .filter(|&&l| l > 0.0)
            .map(|&l| -l * l.ln())
            .sum()
    }

    /// Convex combination `Σ w_i ρ_i`.
    pub fn mixture(states: &[&DensityMatrix], weights: &[f64]) -> Result<Self> {
        let first = states.first().ok_or(Error::EmptyFamily)?;
        let n = first.dim();
        let mut acc = zeros(n, n);
        for (s, w) in states.iter().zip(weights) {
            if s.dim() != n {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    got: s.dim(),
                });
            }
            acc += s.matrix().scale(*w);
        }
        Self::from_unnormalized(&acc)
    }

    /// `ρ ⊗ σ`.
    pub fn tensor(&self, other: &DensityMatrix) -> DensityMatrix {
        DensityMatrix::from_unnormalized(&kron(self.matrix(), other.matrix()))
            .expect("tensor product of states is a state")
    }

    /// Compression `V* ρ V` to the range of an isometry, renormalized.
    pub fn compress(&self, v: &CMat) -> Result<DensityMatrix> {
        DensityMatrix::from_unnormalized(&(v.adjoint() * self.matrix() * v))
    }

    pub fn partial_trace(&self, dims: &[usize], keep: &[usize]) -> Result<DensityMatrix> {
        DensityMatrix::from_unnormalized(&partial_trace_matrix(self.matrix(), dims, keep)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::random::{random_density, random_hermitian, rng};

    fn close(a: &CMat, b: &CMat, tol: f64) -> bool {
        max_abs(&(a - b)) < tol
    }

    fn sigma_x() -> CMat {
        CMat::from_row_slice(2, 2, &[r(0.0), r(1.0), r(1.0), r(0.0)])
    }

    #[test]
    fn spectral_of_diagonal() {
        let s = spectral(&HermitianOperator::diagonal(&[1.0, 2.0]));
        assert_eq!(s.eigenvalues, vec![1.0, 2.0]);
        assert!(close(&s.eigenvectors.map(|z| r(z.norm())), &identity(2), 1e-14));
    }

    #[test]
    fn spectral_of_pauli_x() {
        let s = spectral(&HermitianOperator::new(sigma_x()).unwrap());
        assert!((s.eigenvalues[0] + 1.0).abs() < 1e-14);
        assert!((s.eigenvalues[1] - 1.0).abs() < 1e-14);
    }

    #[test]
    fn spectral_reconstructs_random() {
        let mut g = rng(11);
        for n in [2, 4, 7] {
            let h = random_hermitian(&mut g, n);
            let s = spectral(&h);
            assert!(s.eigenvalues.windows(2).all(|w| w[0] <= w[1]));
            assert!(max_abs(&(s.reconstruct() - h.matrix())) < 1e-10 * n as f64);
        }
    }

    #[test]
    fn non_hermitian_rejected() {
        let m = CMat::from_row_slice(2, 2, &[r(0.0), r(1.0), r(0.0), r(0.0)]);
        assert!(matches!(spectral_checked(&m), Err(Error::NotHermitian { .. })));
        let rect = zeros(2, 3);
        assert!(matches!(HermitianOperator::new(rect), Err(Error::NotSquare { .. })));
    }

    #[test]
    fn matrix_functions_on_diagonals() {
        let e = matrix_fn(&HermitianOperator::zeros(2), f64::exp, false).unwrap();
        assert!(close(e.matrix(), &identity(2), 1e-15));

        let l = matrix_fn(&HermitianOperator::diagonal(&[0.5, 0.5]), f64::ln, true).unwrap();
        let ln2 = 2f64.ln();
        assert!(close(l.matrix(), &diag(&[-ln2, -ln2]), 1e-15));

        let s = matrix_fn(&HermitianOperator::diagonal(&[0.25, 0.75]), f64::sqrt, true).unwrap();
        assert!(close(s.matrix(), &diag(&[0.5, 3f64.sqrt() / 2.0]), 1e-15));
    }

    #[test]
    fn singular_function_needs_support_flag() {
        let h = HermitianOperator::diagonal(&[0.0, 1.0]);
        assert!(matrix_fn(&h, f64::ln, false).is_err());
        let l = matrix_fn(&h, f64::ln, true).unwrap();
        assert!(close(l.matrix(), &zeros(2, 2), 1e-15));
        // log of a negative retained eigenvalue is undefined
        let neg = HermitianOperator::diagonal(&[-1.0, 1.0]);
        assert!(matches!(
            matrix_fn(&neg, f64::ln, true),
            Err(Error::FunctionUndefined(_))
        ));
    }

    #[test]
    fn functional_calculus_composes() {
        let mut g = rng(3);
        let h = random_hermitian(&mut g, 4);
        let direct = matrix_fn(&h, |x| (0.3 * x).exp().sqrt(), false).unwrap();
        let inner = matrix_fn(&h, |x| (0.3 * x).exp(), false).unwrap();
        let outer = matrix_fn(&inner, f64::sqrt, false).unwrap();
        assert!(close(direct.matrix(), outer.matrix(), 1e-8));
    }

    #[test]
    fn tensor_examples() {
        let i4 = tensor(&HermitianOperator::identity(2), &HermitianOperator::identity(2));
        assert!(close(i4.matrix(), &identity(4), 1e-15));
        let t = tensor(
            &HermitianOperator::diagonal(&[1.0, 0.0]),
            &HermitianOperator::diagonal(&[0.0, 1.0]),
        );
        assert!(close(t.matrix(), &diag(&[0.0, 1.0, 0.0, 0.0]), 1e-15));

        let mut g = rng(5);
        let a = random_hermitian(&mut g, 2);
        let b = random_hermitian(&mut g, 3);
        // oracle: explicit double loop over Kronecker entries on the diagonal
        let mut tr = 0.0;
        for i in 0..2 {
            for j in 0..3 {
                tr += (a.matrix()[(i, i)] * b.matrix()[(j, j)]).re;
            }
        }
        assert!((tensor(&a, &b).trace() - tr).abs() < 1e-12);
        assert!((tr - a.trace() * b.trace()).abs() < 1e-12);
    }

    #[test]
    fn partial_trace_examples() {
        let mut g = rng(7);
        let rho = random_density(&mut g, 2);
        let tau = random_density(&mut g, 3);
        let joint = rho.tensor(&tau);
        let back = joint.partial_trace(&[2, 3], &[0]).unwrap();
        assert!(close(back.matrix(), rho.matrix(), 1e-12));

        // maximally entangled state
        let s = 0.5f64.sqrt();
        let bell = DensityMatrix::pure(&[r(s), r(0.0), r(0.0), r(s)]).unwrap();
        let m = bell.partial_trace(&[2, 2], &[0]).unwrap();
        assert!(close(m.matrix(), &diag(&[0.5, 0.5]), 1e-14));

        // index-contraction oracle on a random 2⊗3 state
        let w = random_density(&mut g, 6);
        let red = partial_trace_matrix(w.matrix(), &[2, 3], &[1]).unwrap();
        let mut oracle = zeros(3, 3);
        for a in 0..3 {
            for b in 0..3 {
                for k in 0..2 {
                    oracle[(a, b)] += w.matrix()[(k * 3 + a, k * 3 + b)];
                }
            }
        }
        assert!(close(&red, &oracle, 1e-15));
        assert!((red.trace().re - 1.0).abs() < 1e-12);
    }

    #[test]
    fn partial_trace_three_factors_and_errors() {
        let mut g = rng(8);
        let a = random_density(&mut g, 2);
        let b = random_density(&mut g, 3);
        let cst = random_density(&mut g, 2);
        let abc = a.tensor(&b).tensor(&cst);
        let ac = abc.partial_trace(&[2, 3, 2], &[0, 2]).unwrap();
        assert!(close(ac.matrix(), a.tensor(&cst).matrix(), 1e-12));
        assert!(partial_trace_matrix(abc.matrix(), &[2, 2], &[0]).is_err());
        assert!(partial_trace_matrix(abc.matrix(), &[2, 3, 2], &[3]).is_err());
    }

    #[test]
    fn hs_inner_examples() {
        let i2 = HermitianOperator::identity(2);
        assert_eq!(hs_inner(&i2, &i2), 2.0);
        let sx = HermitianOperator::new(sigma_x()).unwrap();
        let sz = HermitianOperator::diagonal(&[1.0, -1.0]);
        assert_eq!(hs_inner(&sx, &sz), 0.0);
        let mut g = rng(9);
        let a = random_hermitian(&mut g, 3);
        let b = random_hermitian(&mut g, 3);
        let mut oracle = 0.0;
        for i in 0..3 {
            for j in 0..3 {
                oracle += (a.matrix()[(i, j)] * b.matrix()[(j, i)]).re;
            }
        }
        assert!((hs_inner(&a, &b) - oracle).abs() < 1e-12);
    }

    #[test]
    fn density_validation() {
        assert!(DensityMatrix::diagonal(&[0.5, 0.6]).is_err());
        assert!(DensityMatrix::diagonal(&[1.1, -0.1]).is_err());
        let d = DensityMatrix::diagonal(&[1.0, 0.0]).unwrap();
        assert_eq!(d.support_rank(), 1);
        assert!(!d.is_faithful());
        assert!(DensityMatrix::maximally_mixed(3).is_faithful());
    }
}
