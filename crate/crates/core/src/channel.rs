//! Completely positive trace-preserving maps in Kraus form.
//!
//! Kraus operators are `out_dim × in_dim`. The Schrödinger action sends a
//! density on the input space to one on the output space; the Heisenberg
//! action sends an observable on the output space back to the input space.
//! A coarse-graining `σ: N → M` in the algebraic picture is the Heisenberg
//! action of a channel whose input is the `M` side.

use rand::Rng;

use crate::algebra::{generated_algebra, StarSubalgebra};
use crate::error::{Error, Result};
use crate::numerics::{hermitian_basis, null_space, null_space_real, unvec};
use crate::operator::{
    dagger, hermiticity_defect, identity, kron, max_abs, zeros, CMat,
    DensityMatrix, HermitianOperator, C64,
};
use crate::random::{ginibre, rng};

const TP_TOL: f64 = 1e-10;
const CHOI_FLOOR: f64 = -1e-10;

/// Which picture a channel was specified in.
#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum Picture {
    Schrodinger,
    Heisenberg,
}

#[derive(Clone, Debug)]
pub struct QuantumChannel {
    in_dim: usize,
    out_dim: usize,
    kraus: Vec<CMat>,
    picture: Picture,
}

/// Choi matrix `J = Σ_ij E_ij ⊗ Φ(E_ij)` of a linear map, together with its
/// dimensions. Not necessarily positive.
#[derive(Clone, Debug)]
pub struct ChoiMatrix {
    pub in_dim: usize,
    pub out_dim: usize,
    pub matrix: CMat,
}

impl ChoiMatrix {
    /// Choi matrix of an arbitrary linear map given by its Schrödinger action.
    pub fn from_map<F>(in_dim: usize, out_dim: usize, f: F) -> Self
    where
        F: Fn(&CMat) -> CMat,
    {
        let mut j = zeros(in_dim * out_dim, in_dim * out_dim);
        for a in 0..in_dim {
            for b in 0..in_dim {
                let mut e = zeros(in_dim, in_dim);
                e[(a, b)] = C64::new(1.0, 0.0);
                let img = f(&e);
                for o in 0..out_dim {
                    for p in 0..out_dim {
                        j[(a * out_dim + o, b * out_dim + p)] = img[(o, p)];
                    }
                }
            }
        }
        ChoiMatrix { in_dim, out_dim, matrix: j }
    }

    /// The transpose map on `M_n`, the standard positive but not 2-positive map.
    pub fn transpose_map(n: usize) -> Self {
        Self::from_map(n, n, |x| x.transpose())
    }

    pub fn min_eigenvalue(&self) -> f64 {
        let h = (&self.matrix + dagger(&self.matrix)) * C64::new(0.5, 0.0);
        h.symmetric_eigenvalues()
            .iter()
            .fold(f64::INFINITY, |m, v| m.min(*v))
    }

    /// Schrödinger action `Φ(X) = Σ_ab X_ab Φ(E_ab)`.
    pub fn apply(&self, x: &CMat) -> CMat {
        let (n, m) = (self.in_dim, self.out_dim);
        let mut out = zeros(m, m);
        for a in 0..n {
            for b in 0..n {
                let xab = x[(a, b)];
                if xab == C64::new(0.0, 0.0) {
                    continue;
                }
                for o in 0..m {
                    for p in 0..m {
                        out[(o, p)] += xab * self.matrix[(a * m + o, b * m + p)];
                    }
                }
            }
        }
        out
    }

    /// Heisenberg action, `Φ*(A)_ij = Tr(A Φ(E_ji))`.
    pub fn apply_dual(&self, a: &CMat) -> CMat {
        let (n, m) = (self.in_dim, self.out_dim);
        let mut out = zeros(n, n);
        for i in 0..n {
            for j in 0..n {
                let mut s = C64::new(0.0, 0.0);
                for o in 0..m {
                    for p in 0..m {
                        s += a[(p, o)] * self.matrix[(j * m + o, i * m + p)];
                    }
                }
                out[(i, j)] = s;
            }
        }
        out
    }
}

/// Outcome of the 2-positivity test.
#[derive(Clone, Debug)]
pub struct PositivityReport {
    pub min_choi_eigenvalue: f64,
    pub completely_positive: bool,
    pub schwarz_margin: f64,
    pub two_positive: bool,
}

impl QuantumChannel {
    /// Builds a channel from Kraus operators, rejecting maps that fail to be
    /// trace preserving by more than `1e-10`.
    pub fn from_kraus(in_dim: usize, out_dim: usize, kraus: Vec<CMat>) -> Result<Self> {
        Self::with_picture(in_dim, out_dim, kraus, Picture::Schrodinger)
    }

    /// As [`Self::from_kraus`] for a map specified in the Heisenberg picture.
    pub fn from_kraus_heisenberg(in_dim: usize, out_dim: usize, kraus: Vec<CMat>) -> Result<Self> {
        Self::with_picture(in_dim, out_dim, kraus, Picture::Heisenberg)
    }

    fn with_picture(
        in_dim: usize,
        out_dim: usize,
        kraus: Vec<CMat>,
        picture: Picture,
    ) -> Result<Self> {
        if kraus.is_empty() {
            return Err(Error::InvalidParameter("empty Kraus list".into()));
        }
        let mut s = zeros(in_dim, in_dim);
        for k in &kraus {
            if k.nrows() != out_dim || k.ncols() != in_dim {
                return Err(Error::DimensionMismatch {
                    expected: out_dim * in_dim,
                    got: k.nrows() * k.ncols(),
                });
            }
            s += k.adjoint() * k;
        }
        let defect = max_abs(&(s - identity(in_dim)));
        if defect > TP_TOL {
            return Err(Error::InvalidParameter(format!(
                "Kraus operators not trace preserving (defect {defect:.3e})"
            )));
        }
        Ok(QuantumChannel { in_dim, out_dim, kraus, picture })
    }

    /// Kraus operators from a Choi matrix with the layout of [`ChoiMatrix`].
    pub fn from_choi(choi: &ChoiMatrix) -> Result<Self> {
        Self::from_choi_tagged(choi, Picture::Schrodinger)
    }

    fn from_choi_tagged(choi: &ChoiMatrix, picture: Picture) -> Result<Self> {
        let (n, m) = (choi.in_dim, choi.out_dim);
        if choi.matrix.nrows() != n * m || choi.matrix.ncols() != n * m {
            return Err(Error::DimensionMismatch {
                expected: n * m,
                got: choi.matrix.nrows(),
            });
        }
        if hermiticity_defect(&choi.matrix) > 1e-8 {
            return Err(Error::NotCompletelyPositive(f64::NAN));
        }
        let h = (&choi.matrix + dagger(&choi.matrix)) * C64::new(0.5, 0.0);
        let eig = h.symmetric_eigen();
        let lmax = eig.eigenvalues.iter().fold(0.0_f64, |a, b| a.max(b.abs()));
        let mut kraus = Vec::new();
        for (idx, &lam) in eig.eigenvalues.iter().enumerate() {
            if lam < CHOI_FLOOR * lmax.max(1.0) {
                return Err(Error::NotCompletelyPositive(lam));
            }
            if lam <= 1e-14 * lmax.max(1.0) {
                continue;
            }
            let v = eig.eigenvectors.column(idx);
            let k = CMat::from_fn(m, n, |o, i| v[i * m + o] * lam.sqrt());
            kraus.push(k);
        }
        if kraus.is_empty() {
            kraus.push(zeros(m, n));
        }
        Self::with_picture(n, m, kraus, picture)
    }

    /// Channel from its Schrödinger action on `in_dim × in_dim` matrices.
    pub fn from_schrodinger_fn<F>(in_dim: usize, out_dim: usize, f: F) -> Result<Self>
    where
        F: Fn(&CMat) -> CMat,
    {
        Self::from_choi(&ChoiMatrix::from_map(in_dim, out_dim, f))
    }

    /// Channel from its Heisenberg action `f: B(C^out) → B(C^in)`.
    pub fn from_heisenberg_fn<F>(in_dim: usize, out_dim: usize, f: F) -> Result<Self>
    where
        F: Fn(&CMat) -> CMat,
    {
        // Φ(E_ab)_{op} = Tr(E_ab · f(|p⟩⟨o|)) = f(|p⟩⟨o|)_{ba}
        let mut images = vec![zeros(in_dim, in_dim); out_dim * out_dim];
        for o in 0..out_dim {
            for p in 0..out_dim {
                let mut e = zeros(out_dim, out_dim);
                e[(p, o)] = C64::new(1.0, 0.0);
                images[p * out_dim + o] = f(&e);
            }
        }
        let mut j = zeros(in_dim * out_dim, in_dim * out_dim);
        for a in 0..in_dim {
            for b in 0..in_dim {
                for o in 0..out_dim {
                    for p in 0..out_dim {
                        j[(a * out_dim + o, b * out_dim + p)] = images[p * out_dim + o][(b, a)];
                    }
                }
            }
        }
        Self::from_choi_tagged(
            &ChoiMatrix { in_dim, out_dim, matrix: j },
            Picture::Heisenberg,
        )
    }

    pub fn identity(n: usize) -> Self {
        QuantumChannel {
            in_dim: n,
            out_dim: n,
            kraus: vec![identity(n)],
            picture: Picture::Schrodinger,
        }
    }

    /// `ρ ↦ UρU*`.
    pub fn unitary(u: &CMat) -> Result<Self> {
        let n = u.nrows();
        if u.ncols() != n {
            return Err(Error::NotSquare { rows: n, cols: u.ncols() });
        }
        Self::from_kraus(n, n, vec![u.clone()])
    }

    /// `ρ ↦ (1−ε)ρ + ε·Tr(ρ)·I/n`.
    pub fn depolarizing(n: usize, eps: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&eps) {
            return Err(Error::InvalidParameter(format!("depolarizing ε = {eps}")));
        }
        let mut kraus = Vec::with_capacity(n * n + 1);
        let keep = 1.0 - eps;
        if keep > 0.0 {
            kraus.push(identity(n) * C64::new(keep.sqrt(), 0.0));
        }
        if eps > 0.0 {
            let w = (eps / n as f64).sqrt();
            for i in 0..n {
                for j in 0..n {
                    let mut e = zeros(n, n);
                    e[(i, j)] = C64::new(w, 0.0);
                    kraus.push(e);
                }
            }
        }
        Self::from_kraus(n, n, kraus)
    }

    /// Partial trace over all factors not listed in `keep`.
    pub fn partial_trace(dims: &[usize], keep: &[usize]) -> Result<Self> {
        let total: usize = dims.iter().product();
        if keep.iter().any(|&k| k >= dims.len()) {
            return Err(Error::InvalidParameter("kept factor out of range".into()));
        }
        let out: usize = keep.iter().map(|&k| dims[k]).product();
        Self::from_schrodinger_fn(total, out, |x| {
            crate::operator::partial_trace_matrix(x, dims, keep).expect("dims checked")
        })
    }

    /// `ρ ↦ ρ ⊗ τ`, the Schrödinger form of the embedding `a ↦ a ⊗ I` read
    /// against `τ`.
    pub fn append(n: usize, tau: &DensityMatrix) -> Result<Self> {
        let m = tau.dim();
        let spec = tau.spectrum();
        let mut kraus = Vec::new();
        for (idx, &lam) in spec.eigenvalues.iter().enumerate() {
            if lam <= 0.0 {
                continue;
            }
            let v = spec.eigenvectors.column(idx).into_owned();
            let col = CMat::from_column_slice(m, 1, v.as_slice()) * C64::new(lam.sqrt(), 0.0);
            kraus.push(kron(&identity(n), &col));
        }
        Self::from_kraus(n, n * m, kraus)
    }

    /// Block-diagonal mixture of unitaries: on the `k`-th diagonal block of
    /// sizes `sizes`, apply `unitaries[k]`; off-diagonal blocks are kept.
    pub fn direct_sum_unitary(unitaries: &[CMat]) -> Result<Self> {
        let n: usize = unitaries.iter().map(|u| u.nrows()).sum();
        let mut u = zeros(n, n);
        let mut off = 0;
        for b in unitaries {
            let d = b.nrows();
            u.view_mut((off, off), (d, d)).copy_from(b);
            off += d;
        }
        Self::unitary(&u)
    }

    pub fn in_dim(&self) -> usize {
        self.in_dim
    }

    pub fn out_dim(&self) -> usize {
        self.out_dim
    }

    pub fn kraus(&self) -> &[CMat] {
        &self.kraus
    }

    pub fn picture(&self) -> Picture {
        self.picture
    }

    pub fn schrodinger_apply(&self, rho: &CMat) -> CMat {
        let mut out = zeros(self.out_dim, self.out_dim);
        for k in &self.kraus {
            out += k * rho * k.adjoint();
        }
        out
    }

    pub fn heisenberg_apply(&self, a: &CMat) -> CMat {
        let mut out = zeros(self.in_dim, self.in_dim);
        for k in &self.kraus {
            out += k.adjoint() * a * k;
        }
        out
    }

    pub fn schrodinger(&self, rho: &DensityMatrix) -> Result<DensityMatrix> {
        self.check_in(rho.dim())?;
        DensityMatrix::from_unnormalized(&self.schrodinger_apply(rho.matrix()))
    }

    pub fn heisenberg(&self, a: &HermitianOperator) -> Result<HermitianOperator> {
        if a.dim() != self.out_dim {
            return Err(Error::DimensionMismatch { expected: self.out_dim, got: a.dim() });
        }
        Ok(HermitianOperator::from_hermitian_parts(
            &self.heisenberg_apply(a.matrix()),
        ))
    }

    fn check_in(&self, d: usize) -> Result<()> {
        if d != self.in_dim {
            return Err(Error::DimensionMismatch { expected: self.in_dim, got: d });
        }
        Ok(())
    }

    pub fn choi(&self) -> ChoiMatrix {
        let (n, m) = (self.in_dim, self.out_dim);
        let mut j = zeros(n * m, n * m);
        for k in &self.kraus {
            // vec with index i*m+o holds K_{o,i}
            let v = CMat::from_fn(n * m, 1, |idx, _| k[(idx % m, idx / m)]);
            j += &v * v.adjoint();
        }
        ChoiMatrix { in_dim: n, out_dim: m, matrix: j }
    }

    /// Schrödinger composition: first `self`, then `next`.
    pub fn then(&self, next: &QuantumChannel) -> Result<QuantumChannel> {
        if next.in_dim != self.out_dim {
            return Err(Error::DimensionMismatch { expected: self.out_dim, got: next.in_dim });
        }
        let mut kraus = Vec::with_capacity(self.kraus.len() * next.kraus.len());
        for b in &next.kraus {
            for a in &self.kraus {
                let p = b * a;
                if p.norm() > 1e-15 {
                    kraus.push(p);
                }
            }
        }
        if kraus.is_empty() {
            kraus.push(zeros(next.out_dim, self.in_dim));
        }
        Self::from_kraus(self.in_dim, next.out_dim, kraus)
    }

    /// Matrix of the Heisenberg action on column-major vectorized operators.
    pub fn heisenberg_superoperator(&self) -> CMat {
        let mut s = zeros(self.in_dim * self.in_dim, self.out_dim * self.out_dim);
        for k in &self.kraus {
            s += kron(&k.transpose(), &k.adjoint());
        }
        s
    }

    /// Stinespring isometry `V: C^in → C^out ⊗ C^r` with `σ(a) = V*(a⊗I)V`.
    pub fn stinespring(&self) -> CMat {
        let r = self.kraus.len();
        let mut v = zeros(self.out_dim * r, self.in_dim);
        for (k, op) in self.kraus.iter().enumerate() {
            for o in 0..self.out_dim {
                for i in 0..self.in_dim {
                    v[(o * r + k, i)] = op[(o, i)];
                }
            }
        }
        v
    }

    /// Trace-preservation defect `max |Σ K*K − I|`.
    pub fn tp_defect(&self) -> f64 {
        let mut s = zeros(self.in_dim, self.in_dim);
        for k in &self.kraus {
            s += k.adjoint() * k;
        }
        max_abs(&(s - identity(self.in_dim)))
    }

    /// Choi matrix for the Schrödinger action restricted to `p·p`-corner on the
    /// input and read off in the `q·q`-corner on the output, as isometries.
    fn compressed(&self, p_iso: &CMat, q_iso: &CMat) -> Result<QuantumChannel> {
        let kraus: Vec<CMat> = self
            .kraus
            .iter()
            .map(|k| q_iso.adjoint() * k * p_iso)
            .filter(|k| k.norm() > 1e-15)
            .collect();
        let kraus = if kraus.is_empty() {
            vec![zeros(q_iso.ncols(), p_iso.ncols())]
        } else {
            kraus
        };
        Self::from_kraus(p_iso.ncols(), q_iso.ncols(), kraus).map_err(|e| {
            Error::SupportMismatch(format!("compressed channel not trace preserving: {e}"))
        })
    }
}

/// Choi positivity plus a Schwarz-inequality spot check on random inputs.
pub fn is_2_positive_map(choi: &ChoiMatrix, seed: u64) -> PositivityReport {
    let min_eig = choi.min_eigenvalue();
    let scale = max_abs(&choi.matrix).max(1.0);
    let cp = min_eig >= CHOI_FLOOR * scale;
    let mut g = rng(seed);
    let mut margin = f64::INFINITY;
    for _ in 0..8 {
        let a = ginibre(&mut g, choi.out_dim, choi.out_dim);
        let lhs = choi.apply_dual(&(a.adjoint() * &a));
        let pa = choi.apply_dual(&a);
        let d = lhs - pa.adjoint() * &pa;
        let h = (&d + dagger(&d)) * C64::new(0.5, 0.0);
        let m = h.symmetric_eigenvalues().iter().fold(f64::INFINITY, |x, y| x.min(*y));
        margin = margin.min(m);
    }
    PositivityReport {
        min_choi_eigenvalue: min_eig,
        completely_positive: cp,
        schwarz_margin: margin,
        two_positive: cp && margin >= -1e-9,
    }
}

pub fn is_2_positive(ch: &QuantumChannel) -> bool {
    is_2_positive_map(&ch.choi(), 0x5eed).two_positive
}

/// Support isometries and the compressed channel of [`compress_to_support`].
#[derive(Clone, Debug)]
pub struct Compression {
    pub channel: QuantumChannel,
    /// Isometry onto `supp ω` in the input space.
    pub p: CMat,
    /// Isometry onto `supp ω∘σ` in the output space.
    pub q: CMat,
    /// Isometry onto the orthogonal complement of `q`.
    pub q_perp: CMat,
    pub omega: DensityMatrix,
}

impl Compression {
    pub fn p_projection(&self) -> CMat {
        &self.p * self.p.adjoint()
    }

    pub fn q_projection(&self) -> CMat {
        &self.q * self.q.adjoint()
    }

    /// Compresses an input density to the corner of `p`. The state must live
    /// inside `supp ω`.
    pub fn compress_input(&self, rho: &DensityMatrix) -> Result<DensityMatrix> {
        let leak = 1.0 - (self.p.adjoint() * rho.matrix() * &self.p).trace().re;
        if leak.abs() > 1e-9 {
            return Err(Error::SupportMismatch(format!(
                "state has weight {leak:.3e} outside the reference support"
            )));
        }
        rho.compress(&self.p)
    }

    /// β-extension of a recovery map on the corners: `τ ↦ P β̃(Q*τQ) P* +
    /// Tr((1−q)τ)·ρ_ω`, as a channel from the full output space to the full
    /// input space.
    pub fn extend_recovery(&self, inner: &QuantumChannel) -> Result<QuantumChannel> {
        let mut kraus: Vec<CMat> = inner
            .kraus()
            .iter()
            .map(|r| &self.p * r * self.q.adjoint())
            .collect();
        if self.q_perp.ncols() > 0 {
            let spec = self.omega.spectrum();
            for (idx, &lam) in spec.eigenvalues.iter().enumerate() {
                if lam <= spec.support_threshold() {
                    continue;
                }
                let v = spec.eigenvectors.column(idx).into_owned();
                for j in 0..self.q_perp.ncols() {
                    let e = self.q_perp.column(j).into_owned();
                    kraus.push(&v * e.adjoint() * C64::new(lam.sqrt(), 0.0));
                }
            }
        }
        QuantumChannel::from_kraus(self.q.nrows(), self.p.nrows(), kraus)
    }
}

/// Restricts `ch` to `supp ω` on the input and `supp ch(ω)` on the output.
pub fn compress_to_support(ch: &QuantumChannel, omega: &DensityMatrix) -> Result<Compression> {
    ch.check_in(omega.dim())?;
    let omega_out = ch.schrodinger(omega)?;
    let p = omega.support_isometry();
    let q = omega_out.support_isometry();
    let spec = omega_out.spectrum();
    let thr = spec.support_threshold();
    let perp_idx: Vec<usize> = (0..spec.dim()).filter(|&i| spec.eigenvalues[i] <= thr).collect();
    let mut q_perp = zeros(ch.out_dim, perp_idx.len());
    for (c, &i) in perp_idx.iter().enumerate() {
        q_perp.set_column(c, &spec.eigenvectors.column(i));
    }
    let channel = ch.compressed(&p, &q)?;
    Ok(Compression { channel, p, q, q_perp, omega: omega.clone() })
}

/// Petz dual with respect to `ω`, returned in Schrödinger form as a channel
/// from the output space of `ch` back to its input space. Its Heisenberg
/// action is `b ↦ ρ_N^{-1/2} σ^T(ρ_ω^{1/2} b ρ_ω^{1/2}) ρ_N^{-1/2}` with
/// `ρ_N = ch(ρ_ω)`. Non-faithful references are handled on the supports and
/// extended by `ω` off the output support.
pub fn petz_dual(ch: &QuantumChannel, omega: &DensityMatrix) -> Result<QuantumChannel> {
    ch.check_in(omega.dim())?;
    let omega_out = ch.schrodinger(omega)?;
    if omega.is_faithful() && omega_out.is_faithful() {
        return petz_faithful(ch, omega, &omega_out);
    }
    let comp = compress_to_support(ch, omega)?;
    let w = comp.compress_input(omega)?;
    let w_out = comp.channel.schrodinger(&w)?;
    if !w.is_faithful() || !w_out.is_faithful() {
        return Err(Error::SupportMismatch(
            "reference state still degenerate after compression".into(),
        ));
    }
    let inner = petz_faithful(&comp.channel, &w, &w_out)?;
    comp.extend_recovery(&inner)
}

fn petz_faithful(
    ch: &QuantumChannel,
    omega: &DensityMatrix,
    omega_out: &DensityMatrix,
) -> Result<QuantumChannel> {
    let s = omega.sqrt().into_matrix();
    let inv = omega_out.power(-0.5).into_matrix();
    let kraus: Vec<CMat> = ch.kraus().iter().map(|k| &s * k.adjoint() * &inv).collect();
    QuantumChannel::from_kraus(ch.out_dim(), ch.in_dim(), kraus)
        .map_err(|e| Error::SupportMismatch(format!("Petz dual: {e}")))
}

/// Largest subalgebra of the output algebra on which the Heisenberg action is
/// multiplicative.
pub fn multiplicative_domain(ch: &QuantumChannel) -> Result<StarSubalgebra> {
    let n = ch.out_dim();
    let v = ch.stinespring();
    let r = ch.kraus().len();
    let proj_perp = identity(n * r) - &v * v.adjoint();
    let basis = hermitian_basis(n);
    let rows = n * r * ch.in_dim();
    let mut a = nalgebra::DMatrix::<f64>::zeros(2 * rows, basis.len());
    for (c, h) in basis.iter().enumerate() {
        let d = &proj_perp * kron(h, &identity(r)) * &v;
        for (idx, z) in d.as_slice().iter().enumerate() {
            a[(idx, c)] = z.re;
            a[(rows + idx, c)] = z.im;
        }
    }
    let ns = null_space_real(&a, 1e-9);
    let gens: Vec<CMat> = (0..ns.ncols())
        .map(|j| {
            let mut m = zeros(n, n);
            for (c, h) in basis.iter().enumerate() {
                m += h * C64::new(ns[(c, j)], 0.0);
            }
            m
        })
        .collect();
    let alg = generated_algebra(&gens, n)?;
    let mut g = rng(0x6d64);
    for _ in 0..4 {
        let x = alg.random_element(&mut g);
        let y = ginibre(&mut g, n, n);
        let lhs = ch.heisenberg_apply(&(&x * &y));
        let rhs = ch.heisenberg_apply(&x) * ch.heisenberg_apply(&y);
        let lhs2 = ch.heisenberg_apply(&(&y * &x));
        let rhs2 = ch.heisenberg_apply(&y) * ch.heisenberg_apply(&x);
        let res = max_abs(&(lhs - rhs)).max(max_abs(&(lhs2 - rhs2)));
        let scale = x.norm() * y.norm();
        if res > 1e-9 * scale.max(1.0) {
            return Err(Error::Inconsistency(format!(
                "multiplicative domain closure failed (product residual {res:.3e})"
            )));
        }
    }
    Ok(alg)
}

/// The fixed-point algebras `N₁ ⊂ B(C^out)` and `M₁ ⊂ B(C^in)` of the Petz
/// round trip, with the residual of `σ: N₁ → M₁` as a *-isomorphism.
#[derive(Clone, Debug)]
pub struct FixedPoints {
    pub n1: StarSubalgebra,
    pub m1: StarSubalgebra,
    pub isomorphism_residual: f64,
}

pub fn fixed_point_subalgebras(ch: &QuantumChannel, omega: &DensityMatrix) -> Result<FixedPoints> {
    omega.ensure_faithful()?;
    let omega_out = ch.schrodinger(omega)?;
    omega_out.ensure_faithful()?;
    let dual = petz_dual(ch, omega)?;
    let (n, m) = (ch.out_dim(), ch.in_dim());
    let sigma = ch.heisenberg_superoperator();
    let star = dual.heisenberg_superoperator();
    let on_n = &star * &sigma - identity(n * n);
    let on_m = &sigma * &star - identity(m * m);
    let n1_basis = fixed_basis(&on_n, n);
    let m1_basis = fixed_basis(&on_m, m);
    let n1 = generated_algebra(&n1_basis, n)?;
    let m1 = generated_algebra(&m1_basis, m)?;
    if n1.dim() != n1_basis.len() || m1.dim() != m1_basis.len() {
        return Err(Error::Inconsistency(
            "fixed-point space is not closed under products".into(),
        ));
    }
    let mut residual: f64 = 0.0;
    let basis = n1.basis();
    for a in &basis {
        let sa = ch.heisenberg_apply(a);
        residual = residual.max(m1.residual(&sa));
        residual = residual.max(max_abs(&(ch.heisenberg_apply(&a.adjoint()) - sa.adjoint())));
        for b in &basis {
            let lhs = ch.heisenberg_apply(&(a * b));
            let rhs = &sa * ch.heisenberg_apply(b);
            residual = residual.max(max_abs(&(lhs - rhs)));
        }
    }
    if n1.dim() != m1.dim() {
        residual = residual.max(1.0);
    }
    Ok(FixedPoints { n1, m1, isomorphism_residual: residual })
}

pub fn fixed_point_subalgebra_n1(
    ch: &QuantumChannel,
    omega: &DensityMatrix,
) -> Result<StarSubalgebra> {
    let fp = fixed_point_subalgebras(ch, omega)?;
    if fp.isomorphism_residual > 1e-8 {
        return Err(Error::Inconsistency(format!(
            "restriction to N1 is not a *-isomorphism (residual {:.3e})",
            fp.isomorphism_residual
        )));
    }
    Ok(fp.n1)
}

fn fixed_basis(defect: &CMat, n: usize) -> Vec<CMat> {
    let ns = null_space(defect, 1e-8);
    (0..ns.ncols())
        .map(|j| unvec(ns.column(j).as_slice(), n, n))
        .collect()
}

/// Duality residual of `⟨a₁, σ*(a₂)⟩` against `⟨σ(a₁), a₂⟩` in the
/// symmetric KMS inner products of `ch(ω)` and `ω`, for random test pairs.
pub fn petz_duality_residual(
    ch: &QuantumChannel,
    omega: &DensityMatrix,
    dual: &QuantumChannel,
    samples: usize,
    g: &mut impl Rng,
) -> Result<f64> {
    let w_out = ch.schrodinger(omega)?;
    let sn = w_out.sqrt().into_matrix();
    let sm = omega.sqrt().into_matrix();
    let mut worst: f64 = 0.0;
    for _ in 0..samples {
        let a1 = ginibre(g, ch.out_dim(), ch.out_dim());
        let a2 = ginibre(g, ch.in_dim(), ch.in_dim());
        let lhs = (&sn * a1.adjoint() * &sn * dual.heisenberg_apply(&a2)).trace();
        let rhs = (&sm * ch.heisenberg_apply(&a1).adjoint() * &sm * &a2).trace();
        worst = worst.max((lhs - rhs).norm());
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::operator::{c, diag, r, trace};
    use crate::random::{random_channel, random_density, random_faithful_density, random_unitary};

    fn pauli_z() -> CMat {
        diag(&[1.0, -1.0])
    }

    #[test]
    fn identity_channel_heisenberg() {
        let ch = QuantumChannel::identity(2);
        assert!(max_abs(&(ch.heisenberg_apply(&pauli_z()) - pauli_z())) < 1e-15);
    }

    #[test]
    fn full_depolarizing_kills_traceless() {
        let ch = QuantumChannel::depolarizing(2, 1.0).unwrap();
        assert!(max_abs(&ch.heisenberg_apply(&pauli_z())) < 1e-15);
        assert!(max_abs(&(ch.heisenberg_apply(&identity(2)) - identity(2))) < 1e-14);
    }

    #[test]
    fn duality_on_random_channel() {
        let mut g = rng(3);
        for _ in 0..10 {
            let ch = random_channel(&mut g, 3, 2, 3);
            let rho = random_density(&mut g, 3);
            let a = crate::random::random_hermitian(&mut g, 2);
            let lhs = trace(&(ch.schrodinger_apply(rho.matrix()) * a.matrix()));
            let rhs = trace(&(rho.matrix() * ch.heisenberg_apply(a.matrix())));
            assert!((lhs - rhs).norm() < 1e-10);
            assert!((trace(&ch.schrodinger_apply(rho.matrix())) - r(1.0)).norm() < 1e-12);
        }
    }

    #[test]
    fn trace_out_channel() {
        let mut g = rng(5);
        let a = random_density(&mut g, 2);
        let b = random_density(&mut g, 3);
        let ch = QuantumChannel::partial_trace(&[2, 3], &[0]).unwrap();
        let out = ch.schrodinger(&a.tensor(&b)).unwrap();
        assert!(max_abs(&(out.matrix() - a.matrix())) < 1e-12);
    }

    #[test]
    fn transpose_is_not_2_positive() {
        let rep = is_2_positive_map(&ChoiMatrix::transpose_map(2), 1);
        assert!(!rep.two_positive);
        assert!((rep.min_choi_eigenvalue + 1.0).abs() < 1e-12);
    }

    #[test]
    fn kraus_maps_are_2_positive() {
        let mut g = rng(8);
        let ch = random_channel(&mut g, 3, 3, 2);
        assert!(is_2_positive(&ch));
    }

    #[test]
    fn petz_of_unitary_is_inverse() {
        let mut g = rng(11);
        let u = random_unitary(&mut g, 3);
        let ch = QuantumChannel::unitary(&u).unwrap();
        let w = random_faithful_density(&mut g, 3, 0.1);
        let dual = petz_dual(&ch, &w).unwrap();
        let x = ginibre(&mut g, 3, 3);
        let back = dual.schrodinger_apply(&ch.schrodinger_apply(&x));
        assert!(max_abs(&(back - x)) < 1e-10);
    }

    #[test]
    fn petz_duality_relation() {
        let mut g = rng(12);
        let ch = random_channel(&mut g, 3, 2, 3);
        let w = random_faithful_density(&mut g, 3, 0.05);
        let dual = petz_dual(&ch, &w).unwrap();
        let res = petz_duality_residual(&ch, &w, &dual, 5, &mut g).unwrap();
        assert!(res < 1e-9, "{res}");
        let w_out = ch.schrodinger(&w).unwrap();
        let back = dual.schrodinger(&w_out).unwrap();
        assert!(max_abs(&(back.matrix() - w.matrix())) < 1e-10);
    }

    #[test]
    fn compress_faithful_is_identity_compression() {
        let mut g = rng(13);
        let ch = random_channel(&mut g, 3, 3, 2);
        let w = random_faithful_density(&mut g, 3, 0.1);
        let comp = compress_to_support(&ch, &w).unwrap();
        assert_eq!(comp.p.ncols(), 3);
        assert_eq!(comp.channel.in_dim(), 3);
    }

    #[test]
    fn compress_pure_state() {
        let psi = [c(1.0, 0.0), c(0.0, 0.0)];
        let w = DensityMatrix::pure(&psi).unwrap();
        let comp = compress_to_support(&QuantumChannel::identity(2), &w).unwrap();
        assert_eq!(comp.p.ncols(), 1);
        assert_eq!(comp.q.ncols(), 1);
    }

    #[test]
    fn compress_rank_two_in_three() {
        let mut g = rng(14);
        let w = crate::random::random_density_rank(&mut g, 3, 2);
        let ch = random_channel(&mut g, 3, 3, 1);
        let comp = compress_to_support(&ch, &w).unwrap();
        assert_eq!(comp.p.ncols(), 2);
        let rep = is_2_positive_map(&comp.channel.choi(), 2);
        assert!(rep.completely_positive);
        assert!(comp.channel.tp_defect() < 1e-10);
    }

    #[test]
    fn multiplicative_domain_examples() {
        let mut g = rng(15);
        let u = random_unitary(&mut g, 3);
        let md = multiplicative_domain(&QuantumChannel::unitary(&u).unwrap()).unwrap();
        assert_eq!(md.dim(), 9);
        let md = multiplicative_domain(&QuantumChannel::depolarizing(3, 1.0).unwrap()).unwrap();
        assert_eq!(md.dim(), 1);
    }

    #[test]
    fn multiplicative_domain_of_block_dephasing() {
        // Pinching onto two 2-dim blocks: the blocks survive, coherences die.
        let mut p0 = zeros(4, 4);
        p0[(0, 0)] = r(1.0);
        p0[(1, 1)] = r(1.0);
        let p1 = identity(4) - &p0;
        let ch = QuantumChannel::from_kraus(4, 4, vec![p0, p1]).unwrap();
        let md = multiplicative_domain(&ch).unwrap();
        assert_eq!(md.dim(), 8);
        assert_eq!(md.blocks(), &[(2, 1), (2, 1)]);
    }

    #[test]
    fn fixed_points_trace_out_product() {
        let mut g = rng(16);
        let a = random_faithful_density(&mut g, 2, 0.1);
        let b = random_faithful_density(&mut g, 2, 0.1);
        let ch = QuantumChannel::partial_trace(&[2, 2], &[0]).unwrap();
        let fp = fixed_point_subalgebras(&ch, &a.tensor(&b)).unwrap();
        assert_eq!(fp.n1.dim(), 4);
        assert_eq!(fp.m1.dim(), 4);
        assert!(fp.isomorphism_residual < 1e-9);
        let dep = QuantumChannel::depolarizing(2, 0.4).unwrap();
        let n1 = fixed_point_subalgebra_n1(&dep, &a).unwrap();
        assert_eq!(n1.dim(), 1);
    }
}
