//! Null spaces and orthonormalization shared by the algebra and channel code.

use nalgebra::DMatrix;

use crate::operator::{hs_inner_c, zeros, CMat, C64};

/// Orthonormal basis (as columns) of the null space of `a`. Singular values
/// at or below `tol · max(1, σ_max)` count as zero.
pub fn null_space(a: &CMat, tol: f64) -> CMat {
    let cols = a.ncols();
    if cols == 0 {
        return zeros(0, 0);
    }
    let padded = if a.nrows() < cols {
        let mut p = zeros(cols, cols);
        p.rows_mut(0, a.nrows()).copy_from(a);
        p
    } else {
        a.clone()
    };
    let svd = padded.svd(false, true);
    let v_t = svd.v_t.expect("requested V");
    let smax = svd.singular_values.iter().fold(0.0_f64, |x, y| x.max(*y));
    let thr = tol * smax.max(1.0);
    let keep: Vec<usize> = (0..svd.singular_values.len())
        .filter(|&i| svd.singular_values[i] <= thr)
        .collect();
    let mut out = zeros(cols, keep.len());
    for (j, &i) in keep.iter().enumerate() {
        let row = v_t.row(i);
        for k in 0..cols {
            out[(k, j)] = row[k].conj();
        }
    }
    out
}

/// Real counterpart of [`null_space`].
pub fn null_space_real(a: &DMatrix<f64>, tol: f64) -> DMatrix<f64> {
    let cols = a.ncols();
    if cols == 0 {
        return DMatrix::zeros(0, 0);
    }
    let padded = if a.nrows() < cols {
        let mut p = DMatrix::zeros(cols, cols);
        p.rows_mut(0, a.nrows()).copy_from(a);
        p
    } else {
        a.clone()
    };
    let svd = padded.svd(false, true);
    let v_t = svd.v_t.expect("requested V");
    let smax = svd.singular_values.iter().fold(0.0_f64, |x, y| x.max(*y));
    let thr = tol * smax.max(1.0);
    let keep: Vec<usize> = (0..svd.singular_values.len())
        .filter(|&i| svd.singular_values[i] <= thr)
        .collect();
    let mut out = DMatrix::zeros(cols, keep.len());
    for (j, &i) in keep.iter().enumerate() {
        out.set_column(j, &v_t.row(i).transpose());
    }
    out
}

/// Column-major vectorization.
pub fn vec_of(m: &CMat) -> nalgebra::DVector<C64> {
    nalgebra::DVector::from_column_slice(m.as_slice())
}

pub fn unvec(v: &[C64], rows: usize, cols: usize) -> CMat {
    CMat::from_column_slice(rows, cols, v)
}

/// Gram–Schmidt step with one re-orthogonalization pass. Returns the
/// normalized residual of `x` against `basis` when its norm exceeds
/// `tol · scale`.
pub fn orthogonal_residual(basis: &[CMat], x: &CMat, tol: f64, scale: f64) -> Option<CMat> {
    let mut y = x.clone();
    for _ in 0..2 {
        for b in basis {
            let coef = hs_inner_c(b, &y);
            y -= b * coef;
        }
    }
    let rn = y.norm();
    if rn > tol * scale && rn > 0.0 {
        Some(y.unscale(rn))
    } else {
        None
    }
}

/// Real orthonormal basis for the Hermitian `n×n` matrices (HS inner product).
pub fn hermitian_basis(n: usize) -> Vec<CMat> {
    let mut out = Vec::with_capacity(n * n);
    let s = std::f64::consts::FRAC_1_SQRT_2;
    for i in 0..n {
        let mut m = zeros(n, n);
        m[(i, i)] = C64::new(1.0, 0.0);
        out.push(m);
    }
    for i in 0..n {
        for j in (i + 1)..n {
            let mut m = zeros(n, n);
            m[(i, j)] = C64::new(s, 0.0);
            m[(j, i)] = C64::new(s, 0.0);
            out.push(m);
            let mut m = zeros(n, n);
            m[(i, j)] = C64::new(0.0, -s);
            m[(j, i)] = C64::new(0.0, s);
            out.push(m);
        }
    }
    out
}
