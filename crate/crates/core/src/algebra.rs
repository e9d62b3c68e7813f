//! Finite-dimensional *-subalgebras of `M_n`.
//!
//! A subalgebra is stored in Wedderburn form: a unitary `U` and blocks
//! `(d_k, m_k)` such that the algebra is `U (⊕_k B(C^{d_k}) ⊗ I_{m_k}) U*`.
//! Inside block `k`, the column index `i·m_k + s` carries the pair `(i, s)`.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::channel::QuantumChannel;
use crate::error::{Error, Result};
use crate::numerics::{null_space, orthogonal_residual, unvec};
use crate::operator::{
    commutator, dagger, hs_inner_c, identity, kron, max_abs, spectral_checked, zeros, CMat,
    DensityMatrix, C64,
};
use crate::random::{gaussian, ginibre, rng};

const SPAN_TOL: f64 = 1e-8;
const CLOSURE_TOL: f64 = 1e-8;
const GAP_TOL: f64 = 1e-6;
const MAX_DRAWS: usize = 10;

/// A subspace of `M_n` with a Hilbert–Schmidt orthonormal basis.
#[derive(Clone, Debug)]
pub struct OperatorSpan {
    ambient_dim: usize,
    basis: Vec<CMat>,
}

impl OperatorSpan {
    pub fn empty(ambient_dim: usize) -> Self {
        OperatorSpan { ambient_dim, basis: Vec::new() }
    }

    /// Span of the given matrices; elements whose relative residual against
    /// the running span is below `1e-8` are dropped.
    pub fn from_elements(ambient_dim: usize, elements: &[CMat]) -> Result<Self> {
        let mut s = Self::empty(ambient_dim);
        for e in elements {
            s.try_add(e)?;
        }
        Ok(s)
    }

    /// Adds `x` if it is not already in the span; returns whether it grew.
    pub fn try_add(&mut self, x: &CMat) -> Result<bool> {
        self.try_add_scaled(x, x.norm())
    }

    /// As [`try_add`](Self::try_add), with the residual measured against
    /// `scale` instead of `‖x‖`.
    pub fn try_add_scaled(&mut self, x: &CMat, scale: f64) -> Result<bool> {
        if x.nrows() != self.ambient_dim || x.ncols() != self.ambient_dim {
            return Err(Error::DimensionMismatch { expected: self.ambient_dim, got: x.nrows() });
        }
        match orthogonal_residual(&self.basis, x, SPAN_TOL, scale) {
            Some(y) => {
                self.basis.push(y);
                Ok(true)
            }
            None => Ok(false),
        }
    }

    pub fn ambient_dim(&self) -> usize {
        self.ambient_dim
    }

    pub fn dim(&self) -> usize {
        self.basis.len()
    }

    pub fn basis(&self) -> &[CMat] {
        &self.basis
    }

    pub fn project(&self, x: &CMat) -> CMat {
        let mut out = zeros(self.ambient_dim, self.ambient_dim);
        for b in &self.basis {
            out += b * hs_inner_c(b, x);
        }
        out
    }

    /// Frobenius norm of the component of `x` orthogonal to the span.
    pub fn residual(&self, x: &CMat) -> f64 {
        (x - self.project(x)).norm()
    }

    pub fn contains(&self, x: &CMat, tol: f64) -> bool {
        self.residual(x) <= tol * x.norm().max(1.0)
    }

    /// Largest entry of `G − I` for the Gram matrix of the basis.
    pub fn gram_defect(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for (i, a) in self.basis.iter().enumerate() {
            for (j, b) in self.basis.iter().enumerate() {
                let expect = if i == j { 1.0 } else { 0.0 };
                worst = worst.max((hs_inner_c(a, b) - C64::new(expect, 0.0)).norm());
            }
        }
        worst
    }

    /// Random complex combination of basis elements.
    pub fn random_element<R: Rng + ?Sized>(&self, g: &mut R) -> CMat {
        let mut out = zeros(self.ambient_dim, self.ambient_dim);
        for b in &self.basis {
            out += b * C64::new(gaussian(g), gaussian(g));
        }
        out
    }

    /// Mutual containment residual with another span of the same dimension.
    pub fn distance(&self, other: &OperatorSpan) -> f64 {
        if self.dim() != other.dim() {
            return f64::INFINITY;
        }
        let a = self.basis.iter().map(|b| other.residual(b)).fold(0.0, f64::max);
        let b = other.basis.iter().map(|b| self.residual(b)).fold(0.0, f64::max);
        a.max(b)
    }
}

/// Serialized form `{"unitary": matrix, "blocks": [[d, m], …]}`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SubalgebraJson {
    pub unitary: crate::schema::JsonMatrix,
    pub blocks: Vec<[usize; 2]>,
}

#[derive(Clone, Debug)]
pub struct StarSubalgebra {
    ambient_dim: usize,
    unitary: CMat,
    blocks: Vec<(usize, usize)>,
}

impl StarSubalgebra {
    pub fn new(unitary: CMat, blocks: Vec<(usize, usize)>) -> Result<Self> {
        let n = unitary.nrows();
        if unitary.ncols() != n {
            return Err(Error::NotSquare { rows: n, cols: unitary.ncols() });
        }
        let total: usize = blocks.iter().map(|(d, m)| d * m).sum();
        if total != n || blocks.iter().any(|&(d, m)| d == 0 || m == 0) {
            return Err(Error::InvalidParameter(format!(
                "blocks {blocks:?} do not tile dimension {n}"
            )));
        }
        let defect = max_abs(&(unitary.adjoint() * &unitary - identity(n)));
        if defect > 1e-9 {
            return Err(Error::InvalidParameter(format!(
                "basis change is not unitary (defect {defect:.3e})"
            )));
        }
        Ok(StarSubalgebra { ambient_dim: n, unitary, blocks })
    }

    pub fn full(n: usize) -> Self {
        StarSubalgebra { ambient_dim: n, unitary: identity(n), blocks: vec![(n, 1)] }
    }

    pub fn scalars(n: usize) -> Self {
        StarSubalgebra { ambient_dim: n, unitary: identity(n), blocks: vec![(1, n)] }
    }

    /// Diagonal matrices in the standard basis.
    pub fn diagonal(n: usize) -> Self {
        StarSubalgebra { ambient_dim: n, unitary: identity(n), blocks: vec![(1, 1); n] }
    }

    /// Diagonal matrices constant on each fiber of a partition of `0..n`.
    pub fn from_partition(n: usize, fibers: &[Vec<usize>]) -> Result<Self> {
        let mut seen = vec![false; n];
        let mut u = zeros(n, n);
        let mut col = 0;
        let mut blocks = Vec::new();
        for fiber in fibers.iter().filter(|f| !f.is_empty()) {
            for &x in fiber {
                if x >= n || seen[x] {
                    return Err(Error::InvalidParameter("fibers do not partition".into()));
                }
                seen[x] = true;
                u[(x, col)] = C64::new(1.0, 0.0);
                col += 1;
            }
            blocks.push((1, fiber.len()));
        }
        if col != n {
            return Err(Error::InvalidParameter("fibers do not cover the space".into()));
        }
        Self::new(u, blocks)
    }

    /// `B(C^{d_left}) ⊗ I_{d_right}`.
    pub fn tensor_left(d_left: usize, d_right: usize) -> Self {
        StarSubalgebra {
            ambient_dim: d_left * d_right,
            unitary: identity(d_left * d_right),
            blocks: vec![(d_left, d_right)],
        }
    }

    pub fn ambient_dim(&self) -> usize {
        self.ambient_dim
    }

    pub fn unitary(&self) -> &CMat {
        &self.unitary
    }

    pub fn blocks(&self) -> &[(usize, usize)] {
        &self.blocks
    }

    /// Complex dimension `Σ d_k²`.
    pub fn dim(&self) -> usize {
        self.blocks.iter().map(|(d, _)| d * d).sum()
    }

    pub fn is_commutative(&self) -> bool {
        self.blocks.iter().all(|&(d, _)| d == 1)
    }

    fn offsets(&self) -> Vec<usize> {
        let mut off = Vec::with_capacity(self.blocks.len());
        let mut acc = 0;
        for &(d, m) in &self.blocks {
            off.push(acc);
            acc += d * m;
        }
        off
    }

    /// Builds `U (⊕ x_k ⊗ I_{m_k}) U*`.
    pub fn embed(&self, parts: &[CMat]) -> Result<CMat> {
        if parts.len() != self.blocks.len() {
            return Err(Error::DimensionMismatch { expected: self.blocks.len(), got: parts.len() });
        }
        let n = self.ambient_dim;
        let mut inner = zeros(n, n);
        for ((&(d, m), off), x) in self.blocks.iter().zip(self.offsets()).zip(parts) {
            if x.nrows() != d || x.ncols() != d {
                return Err(Error::DimensionMismatch { expected: d, got: x.nrows() });
            }
            inner.view_mut((off, off), (d * m, d * m)).copy_from(&kron(x, &identity(m)));
        }
        Ok(&self.unitary * inner * self.unitary.adjoint())
    }

    /// Diagonal blocks `Y_k = (U* x U)_{kk}` of size `d_k m_k`.
    pub fn diagonal_blocks(&self, x: &CMat) -> Vec<CMat> {
        let y = self.unitary.adjoint() * x * &self.unitary;
        self.blocks
            .iter()
            .zip(self.offsets())
            .map(|(&(d, m), off)| y.view((off, off), (d * m, d * m)).into_owned())
            .collect()
    }

    /// Trace-preserving block components: `Tr_{m_k}` of each diagonal block.
    pub fn block_partial_traces(&self, x: &CMat) -> Vec<CMat> {
        self.diagonal_blocks(x)
            .iter()
            .zip(&self.blocks)
            .map(|(y, &(d, m))| {
                crate::operator::partial_trace_matrix(y, &[d, m], &[0]).expect("block dims")
            })
            .collect()
    }

    /// Hilbert–Schmidt orthogonal projection onto the algebra.
    pub fn project(&self, x: &CMat) -> CMat {
        let parts: Vec<CMat> = self
            .block_partial_traces(x)
            .into_iter()
            .zip(&self.blocks)
            .map(|(p, &(_, m))| p.unscale(m as f64))
            .collect();
        self.embed(&parts).expect("shapes match")
    }

    pub fn residual(&self, x: &CMat) -> f64 {
        (x - self.project(x)).norm()
    }

    /// Kraus operators `U_k (I_d ⊗ |s⟩⟨s'|) U_k* / √m` of [`Self::project`].
    pub fn projection_kraus(&self) -> Vec<CMat> {
        let n = self.ambient_dim;
        let mut out = Vec::new();
        let mut offset = 0;
        for &(d, m) in &self.blocks {
            let w = C64::new(1.0 / (m as f64).sqrt(), 0.0);
            for s in 0..m {
                for s2 in 0..m {
                    let mut k = zeros(n, n);
                    for i in 0..d {
                        let a = self.unitary.column(offset + i * m + s);
                        let b = self.unitary.column(offset + i * m + s2);
                        k += a * b.adjoint();
                    }
                    out.push(k * w);
                }
            }
            offset += d * m;
        }
        out
    }

    pub fn contains(&self, x: &CMat, tol: f64) -> bool {
        self.residual(x) <= tol * x.norm().max(1.0)
    }

    /// Hilbert–Schmidt orthonormal basis of matrix units.
    pub fn basis(&self) -> Vec<CMat> {
        let n = self.ambient_dim;
        let mut out = Vec::with_capacity(self.dim());
        for ((&(d, m), off), _) in self.blocks.iter().zip(self.offsets()).zip(0..) {
            let w = C64::new(1.0 / (m as f64).sqrt(), 0.0);
            for i in 0..d {
                for j in 0..d {
                    let mut inner = zeros(n, n);
                    for s in 0..m {
                        inner[(off + i * m + s, off + j * m + s)] = w;
                    }
                    out.push(&self.unitary * inner * self.unitary.adjoint());
                }
            }
        }
        out
    }

    pub fn span(&self) -> OperatorSpan {
        OperatorSpan { ambient_dim: self.ambient_dim, basis: self.basis() }
    }

    pub fn random_element<R: Rng + ?Sized>(&self, g: &mut R) -> CMat {
        let parts: Vec<CMat> = self.blocks.iter().map(|&(d, _)| ginibre(g, d, d)).collect();
        self.embed(&parts).expect("shapes match")
    }

    /// Minimal central projections, in block order.
    pub fn central_projections(&self) -> Vec<CMat> {
        (0..self.blocks.len())
            .map(|k| {
                let parts: Vec<CMat> = self
                    .blocks
                    .iter()
                    .enumerate()
                    .map(|(j, &(d, _))| if j == k { identity(d) } else { zeros(d, d) })
                    .collect();
                self.embed(&parts).expect("shapes match")
            })
            .collect()
    }

    /// The commutant `{x : xa = ax ∀a}`, read off the block structure.
    pub fn commutant(&self) -> StarSubalgebra {
        let n = self.ambient_dim;
        let mut perm = zeros(n, n);
        let mut blocks = Vec::with_capacity(self.blocks.len());
        for (&(d, m), off) in self.blocks.iter().zip(self.offsets()) {
            for i in 0..d {
                for s in 0..m {
                    // new column (s, i) ↦ old column (i, s)
                    perm[(off + i * m + s, off + s * d + i)] = C64::new(1.0, 0.0);
                }
            }
            blocks.push((m, d));
        }
        StarSubalgebra { ambient_dim: n, unitary: &self.unitary * perm, blocks }.canonical()
    }

    /// Same algebra with blocks ordered by descending `d`, then descending
    /// `d·m`.
    fn canonical(self) -> StarSubalgebra {
        let off = self.offsets();
        let mut order: Vec<usize> = (0..self.blocks.len()).collect();
        order.sort_by(|&a, &b| {
            let (da, ma) = self.blocks[a];
            let (db, mb) = self.blocks[b];
            db.cmp(&da).then((db * mb).cmp(&(da * ma)))
        });
        let n = self.ambient_dim;
        let mut u = zeros(n, n);
        let mut col = 0;
        for &k in &order {
            let (d, m) = self.blocks[k];
            for j in 0..d * m {
                u.set_column(col, &self.unitary.column(off[k] + j));
                col += 1;
            }
        }
        let blocks = order.iter().map(|&k| self.blocks[k]).collect();
        StarSubalgebra { ambient_dim: n, unitary: u, blocks }
    }

    /// Whether `self ⊆ other` as subalgebras.
    pub fn is_subalgebra_of(&self, other: &StarSubalgebra, tol: f64) -> bool {
        self.basis().iter().all(|b| other.contains(b, tol))
    }

    /// Same algebra as `other` (mutual containment).
    pub fn same_as(&self, other: &StarSubalgebra, tol: f64) -> bool {
        self.dim() == other.dim() && self.is_subalgebra_of(other, tol)
    }

    pub fn to_json(&self) -> SubalgebraJson {
        SubalgebraJson {
            unitary: crate::schema::JsonMatrix::from_matrix(&self.unitary),
            blocks: self.blocks.iter().map(|&(d, m)| [d, m]).collect(),
        }
    }

    pub fn from_json(j: &SubalgebraJson) -> Result<Self> {
        let u = j.unitary.to_matrix()?;
        Self::new(u, j.blocks.iter().map(|b| (b[0], b[1])).collect())
    }
}

/// Basis of `{x ∈ M_n : xg = gx ∀g ∈ gens}`.
pub fn commutant(gens: &[CMat], ambient_dim: usize) -> Result<OperatorSpan> {
    let n = ambient_dim;
    if gens.is_empty() {
        let mut basis = Vec::with_capacity(n * n);
        for j in 0..n {
            for i in 0..n {
                let mut e = zeros(n, n);
                e[(i, j)] = C64::new(1.0, 0.0);
                basis.push(e);
            }
        }
        return Ok(OperatorSpan { ambient_dim: n, basis });
    }
    let nn = n * n;
    let mut stacked = zeros(nn * gens.len(), nn);
    let id = identity(n);
    for (k, g) in gens.iter().enumerate() {
        if g.nrows() != n || g.ncols() != n {
            return Err(Error::DimensionMismatch { expected: n, got: g.nrows() });
        }
        // vec(gX − Xg) = (I⊗g − gᵀ⊗I) vec X
        let l = kron(&id, g) - kron(&g.transpose(), &id);
        stacked.view_mut((k * nn, 0), (nn, nn)).copy_from(&l);
    }
    let ns = null_space(&stacked, 1e-10);
    let basis = (0..ns.ncols())
        .map(|j| unvec(ns.column(j).as_slice(), n, n))
        .collect();
    Ok(OperatorSpan { ambient_dim: n, basis })
}

/// Span of all words in `gens ∪ gens*`, starting from the identity.
pub fn generated_span(gens: &[CMat], ambient_dim: usize) -> Result<OperatorSpan> {
    let n = ambient_dim;
    let mut letters: Vec<CMat> = Vec::new();
    for g in gens {
        if g.nrows() != n || g.ncols() != n {
            return Err(Error::DimensionMismatch { expected: n, got: g.nrows() });
        }
        let norm = g.norm();
        if norm < 1e-14 {
            continue;
        }
        letters.push(g.unscale(norm));
        letters.push(g.adjoint().unscale(norm));
    }
    let mut span = OperatorSpan::empty(n);
    span.try_add(&identity(n))?;
    let mut frontier = 0;
    while frontier < span.dim() {
        let w = span.basis[frontier].clone();
        frontier += 1;
        for l in &letters {
            span.try_add_scaled(&(&w * l), 1.0)?;
            if span.dim() > n * n {
                return Err(Error::Decomposition("span exceeded n² during closure".into()));
            }
        }
    }
    Ok(span)
}

/// The *-algebra generated by `gens` and the identity, in block form.
pub fn generated_algebra(gens: &[CMat], ambient_dim: usize) -> Result<StarSubalgebra> {
    let span = generated_span(gens, ambient_dim)?;
    block_decompose(&span)
}

/// Wedderburn decomposition of a span closed under products and adjoints.
pub fn block_decompose(span: &OperatorSpan) -> Result<StarSubalgebra> {
    block_decompose_seeded(span, 0x00b1_0c4d)
}

pub fn block_decompose_seeded(span: &OperatorSpan, seed: u64) -> Result<StarSubalgebra> {
    let n = span.ambient_dim;
    if span.dim() == 0 {
        return Err(Error::NotAnAlgebra(f64::INFINITY));
    }
    if span.dim() == 1 {
        let r = span.residual(&identity(n)) / (n as f64).sqrt();
        if r > CLOSURE_TOL {
            return Err(Error::NotAnAlgebra(r));
        }
        return Ok(StarSubalgebra::scalars(n));
    }
    let mut g = rng(seed);
    check_closure(span, &mut g)?;
    let center = center_of(span)?;
    let mut last_err = Error::Decomposition("no attempt made".into());
    for _ in 0..MAX_DRAWS {
        match try_decompose(span, &center, &mut g) {
            Ok(alg) => return Ok(alg),
            Err(Retry::Redraw(e)) => last_err = e,
            Err(Retry::Fatal(e)) => return Err(e),
        }
    }
    Err(last_err)
}

enum Retry {
    Redraw(Error),
    Fatal(Error),
}

fn check_closure(span: &OperatorSpan, g: &mut impl Rng) -> Result<()> {
    let n = span.ambient_dim;
    let mut worst = span.residual(&identity(n)) / (n as f64).sqrt();
    for b in &span.basis {
        worst = worst.max(span.residual(&b.adjoint()));
    }
    for _ in 0..3 {
        let x = span.random_element(g);
        let y = span.random_element(g);
        let p = &x * &y;
        worst = worst.max(span.residual(&p) / p.norm().max(1e-300));
    }
    if worst > CLOSURE_TOL {
        return Err(Error::NotAnAlgebra(worst));
    }
    Ok(())
}

/// Center as the kernel of `z ↦ Σ_j ‖[z, b_j]‖²` restricted to the span.
fn center_of(span: &OperatorSpan) -> Result<Vec<CMat>> {
    let n = span.ambient_dim;
    let dim = span.dim();
    let nn = n * n;
    let mut c1 = zeros(n, n);
    let mut c2 = zeros(n, n);
    let mut mid = zeros(nn, nn);
    for b in &span.basis {
        let bd = b.adjoint();
        c1 += &bd * b;
        c2 += b * &bd;
        // vec(b* X b) and vec(b X b*)
        mid += kron(&b.transpose(), &bd) + kron(&bd.transpose(), b);
    }
    // L(X) = c1 X + X c2 − Σ (b* X b + b X b*) with c2 built from b b*
    let id = identity(n);
    let l = kron(&id, &c1) + kron(&c2.transpose(), &id) - mid;
    let mut bmat = zeros(nn, dim);
    for (j, b) in span.basis.iter().enumerate() {
        bmat.set_column(j, &nalgebra::DVector::from_column_slice(b.as_slice()));
    }
    let gram = bmat.adjoint() * &l * &bmat;
    let gram = (&gram + dagger(&gram)) * C64::new(0.5, 0.0);
    let eig = gram.symmetric_eigen();
    let scale = eig.eigenvalues.iter().fold(1.0_f64, |a, b| a.max(b.abs()));
    let mut out = Vec::new();
    for (i, &lam) in eig.eigenvalues.iter().enumerate() {
        if lam <= 1e-9 * scale {
            let v = eig.eigenvectors.column(i);
            let mut z = zeros(n, n);
            for (j, b) in span.basis.iter().enumerate() {
                z += b * v[j];
            }
            out.push(z);
        }
    }
    if out.is_empty() {
        return Err(Error::Decomposition("empty center".into()));
    }
    Ok(out)
}

/// Groups ascending eigenvalues into clusters separated by gaps above `tol`.
fn clusters(vals: &[f64], tol: f64) -> Vec<std::ops::Range<usize>> {
    let mut out = Vec::new();
    let mut start = 0;
    for i in 1..=vals.len() {
        if i == vals.len() || vals[i] - vals[i - 1] > tol {
            out.push(start..i);
            start = i;
        }
    }
    out
}

fn min_gap(vals: &[f64], groups: &[std::ops::Range<usize>]) -> f64 {
    groups
        .windows(2)
        .map(|w| vals[w[1].start] - vals[w[0].end - 1])
        .fold(f64::INFINITY, f64::min)
}

fn random_hermitian_in(elements: &[CMat], g: &mut impl Rng) -> CMat {
    let n = elements[0].nrows();
    let mut h = zeros(n, n);
    for e in elements {
        let w = C64::new(gaussian(g), gaussian(g));
        h += e * w;
    }
    (&h + dagger(&h)) * C64::new(0.5, 0.0)
}

struct Block {
    d: usize,
    m: usize,
    columns: CMat,
    key: usize,
}

fn try_decompose(
    span: &OperatorSpan,
    center: &[CMat],
    g: &mut impl Rng,
) -> std::result::Result<StarSubalgebra, Retry> {
    let n = span.ambient_dim;
    let z = random_hermitian_in(center, g);
    let zs = spectral_checked(&z).map_err(Retry::Fatal)?;
    let spread = zs.eigenvalues.last().unwrap() - zs.eigenvalues[0];
    let tight = 1e-9 * spread.max(1.0);
    let zc = clusters(&zs.eigenvalues, tight);
    if zc.len() != center.len() {
        return Err(Retry::Redraw(Error::Decomposition(format!(
            "central element split into {} parts, center has dimension {}",
            zc.len(),
            center.len()
        ))));
    }
    if zc.len() > 1 && min_gap(&zs.eigenvalues, &zc) < GAP_TOL {
        return Err(Retry::Redraw(Error::Decomposition("central eigenvalue collision".into())));
    }
    let x = random_hermitian_in(&span.basis, g);
    let a = span.random_element(g);
    let mut blocks = Vec::with_capacity(zc.len());
    for range in zc {
        let mut v = zeros(n, range.len());
        for (c, i) in range.clone().enumerate() {
            v.set_column(c, &zs.eigenvectors.column(i));
        }
        let r = range.len();
        let xk = v.adjoint() * &x * &v;
        let xk = (&xk + dagger(&xk)) * C64::new(0.5, 0.0);
        let xs = spectral_checked(&xk).map_err(Retry::Fatal)?;
        let xspread = xs.eigenvalues.last().unwrap() - xs.eigenvalues[0];
        let xc = clusters(&xs.eigenvalues, 1e-9 * xspread.max(1.0));
        let d = xc.len();
        if r % d != 0 || xc.iter().any(|c| c.len() != r / d) {
            return Err(Retry::Redraw(Error::Decomposition(
                "unequal multiplicities inside a block".into(),
            )));
        }
        if d > 1 && min_gap(&xs.eigenvalues, &xc) < GAP_TOL {
            return Err(Retry::Redraw(Error::Decomposition("block eigenvalue collision".into())));
        }
        let m = r / d;
        let ak = v.adjoint() * &a * &v;
        let mut e: Vec<CMat> = xc
            .iter()
            .map(|c| {
                let mut cols = zeros(r, m);
                for (j, i) in c.clone().enumerate() {
                    cols.set_column(j, &xs.eigenvectors.column(i));
                }
                cols
            })
            .collect();
        let first = e[0].clone();
        for ej in e.iter_mut().skip(1) {
            let w = &*ej * ej.adjoint() * &ak * &first;
            let nu = w.column(0).norm();
            if nu < GAP_TOL {
                return Err(Retry::Redraw(Error::Decomposition(
                    "matrix-unit element degenerate".into(),
                )));
            }
            *ej = w.unscale(nu);
        }
        let mut cols = zeros(n, r);
        for (i, ei) in e.iter().enumerate() {
            let full = &v * ei;
            for s in 0..m {
                cols.set_column(i * m + s, &full.column(s));
            }
        }
        let proj = &v * v.adjoint();
        let key = (0..n).find(|&i| proj[(i, i)].re > 1e-9).unwrap_or(n);
        blocks.push(Block { d, m, columns: cols, key });
    }
    blocks.sort_by(|p, q| {
        q.d.cmp(&p.d)
            .then((q.d * q.m).cmp(&(p.d * p.m)))
            .then(p.key.cmp(&q.key))
    });
    let mut u = zeros(n, n);
    let mut off = 0;
    for b in &blocks {
        u.view_mut((0, off), (n, b.d * b.m)).copy_from(&b.columns);
        off += b.d * b.m;
    }
    let alg = StarSubalgebra::new(u, blocks.iter().map(|b| (b.d, b.m)).collect())
        .map_err(Retry::Redraw)?;
    if alg.dim() != span.dim() {
        return Err(Retry::Fatal(Error::Decomposition(format!(
            "block dimensions sum to {} but span has dimension {}",
            alg.dim(),
            span.dim()
        ))));
    }
    let worst = span.basis.iter().map(|b| alg.residual(b)).fold(0.0, f64::max);
    if worst > CLOSURE_TOL {
        return Err(Retry::Redraw(Error::Decomposition(format!(
            "reconstruction residual {worst:.3e}"
        ))));
    }
    Ok(alg)
}

/// Hilbert–Schmidt projection onto `alg` as a channel (self-dual, unital).
pub fn trace_conditional_expectation(alg: &StarSubalgebra) -> QuantumChannel {
    let n = alg.ambient_dim();
    QuantumChannel::from_kraus(n, n, alg.projection_kraus())
        .expect("orthogonal projection onto a *-subalgebra is a channel")
}

/// Density of the restriction of `ρ` to `alg` with respect to the trace,
/// i.e. the trace-preserving projection `E_tr(ρ)`.
pub fn restrict_density(alg: &StarSubalgebra, rho: &DensityMatrix) -> Result<DensityMatrix> {
    DensityMatrix::from_unnormalized(&alg.project(rho.matrix()))
}

/// `τ ↦ ρ_ω^{1/2} E(ω₀^{-1/2} τ ω₀^{-1/2}) ρ_ω^{1/2}` with `ω₀ = E(ρ_ω)`,
/// the Schrödinger form of the ω-compatible conditional expectation.
pub fn generalized_recovery(alg: &StarSubalgebra, omega: &DensityMatrix, tau: &CMat) -> Result<CMat> {
    omega.ensure_faithful()?;
    let w0 = restrict_density(alg, omega)?;
    let inv = w0.power(-0.5).into_matrix();
    let s = omega.sqrt().into_matrix();
    Ok(&s * alg.project(&(&inv * tau * &inv)) * &s)
}

/// The generalized conditional expectation `E_ω`, Heisenberg action
/// `b ↦ ω₀^{-1/2} E(ρ_ω^{1/2} b ρ_ω^{1/2}) ω₀^{-1/2}`.
pub fn generalized_conditional_expectation(
    alg: &StarSubalgebra,
    omega: &DensityMatrix,
) -> Result<QuantumChannel> {
    omega.ensure_faithful()?;
    let n = alg.ambient_dim();
    if omega.dim() != n {
        return Err(Error::DimensionMismatch { expected: n, got: omega.dim() });
    }
    let w0 = restrict_density(alg, omega)?;
    let inv = w0.power(-0.5).into_matrix();
    let s = omega.sqrt().into_matrix();
    let kraus = alg.projection_kraus().iter().map(|a| &s * a.adjoint() * &inv).collect();
    QuantumChannel::from_kraus_heisenberg(n, n, kraus)
}

/// Residuals of the modular-invariance test: the generator residual
/// `max_b ‖[log ρ_ω, b] − E[log ρ_ω, b]‖` and the direct conjugation residual
/// at `t ∈ {0.5, 1}`.
pub fn modular_invariance_residuals(
    alg: &StarSubalgebra,
    omega: &DensityMatrix,
) -> Result<(f64, f64)> {
    omega.ensure_faithful()?;
    let log = omega.log().into_matrix();
    let basis = alg.basis();
    let gen = basis
        .iter()
        .map(|b| alg.residual(&commutator(&log, b)))
        .fold(0.0, f64::max);
    let mut conj: f64 = 0.0;
    for t in [0.5, 1.0] {
        let u = omega.imaginary_power(t);
        for b in &basis {
            conj = conj.max(alg.residual(&(&u * b * u.adjoint())));
        }
    }
    Ok((gen, conj))
}

pub fn is_modular_invariant(alg: &StarSubalgebra, omega: &DensityMatrix) -> Result<bool> {
    let (gen, conj) = modular_invariance_residuals(alg, omega)?;
    Ok(gen < 1e-9 && conj < 1e-9)
}
