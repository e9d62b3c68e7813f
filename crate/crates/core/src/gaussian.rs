//! Quasifree states and maps on CCR algebras over finite-dimensional real
//! symplectic spaces, handled through their action on Weyl unitaries.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::operator::{CMat, C64};
use crate::random::{gaussian, random_real_vector};
use crate::schema::GaussianJson;

pub type RMat = DMatrix<f64>;
pub type RVec = DVector<f64>;

fn block_diag(m: &RMat, n: usize) -> RMat {
    let k = m.nrows();
    let mut out = RMat::zeros(k * n, k * n);
    for i in 0..n {
        out.view_mut((i * k, i * k), (k, k)).copy_from(m);
    }
    out
}

fn min_eig_hermitian(re: &RMat, im: &RMat) -> f64 {
    let n = re.nrows();
    let m = CMat::from_fn(n, n, |i, j| C64::new(re[(i, j)], im[(i, j)]));
    let h = (&m + m.adjoint()) * C64::new(0.5, 0.0);
    h.symmetric_eigenvalues().iter().cloned().fold(f64::INFINITY, f64::min)
}

/// `(H, σ, α)` with the state condition `α + iσ ⪰ 0`.
#[derive(Clone, Debug, PartialEq)]
pub struct SymplecticSpace {
    alpha: RMat,
    sigma: RMat,
}

impl SymplecticSpace {
    pub fn new(alpha: RMat, sigma: RMat) -> Result<Self> {
        let n = alpha.nrows();
        if alpha.ncols() != n || sigma.nrows() != n || sigma.ncols() != n {
            return Err(Error::NotSquare { rows: sigma.nrows(), cols: sigma.ncols() });
        }
        if n == 0 || !n.is_multiple_of(2) {
            return Err(Error::InvalidParameter(format!("symplectic dimension {n} is not even")));
        }
        let scale = sigma.amax().max(alpha.amax()).max(1.0);
        if (&sigma + sigma.transpose()).amax() > 1e-12 * scale {
            return Err(Error::InvalidParameter("σ is not antisymmetric".into()));
        }
        if (&alpha - alpha.transpose()).amax() > 1e-12 * scale {
            return Err(Error::InvalidParameter("α is not symmetric".into()));
        }
        if sigma.clone().svd(false, false).singular_values.min() < 1e-12 * scale {
            return Err(Error::InvalidParameter("σ is degenerate".into()));
        }
        if alpha.clone().symmetric_eigen().eigenvalues.min() <= 0.0 {
            return Err(Error::InvalidParameter("α is not positive definite".into()));
        }
        let margin = min_eig_hermitian(&alpha, &sigma);
        if margin < -1e-10 {
            return Err(Error::InvalidParameter(format!(
                "α + iσ is not positive semidefinite (min eigenvalue {margin:.3e})"
            )));
        }
        Ok(SymplecticSpace { alpha, sigma })
    }

    pub fn from_json(j: &GaussianJson) -> Result<Self> {
        Self::new(j.alpha.to_real()?, j.sigma.to_real()?)
    }

    /// Standard form `α = νI`, `σ = ⊕ [[0, 1], [−1, 0]]` on `R^{2k}`.
    pub fn standard(k: usize, nu: f64) -> Result<Self> {
        let mut s = RMat::zeros(2 * k, 2 * k);
        for i in 0..k {
            s[(2 * i, 2 * i + 1)] = 1.0;
            s[(2 * i + 1, 2 * i)] = -1.0;
        }
        Self::new(RMat::identity(2 * k, 2 * k) * nu, s)
    }

    /// A random valid space: `σ` standard, `α = Sᵀ diag(ν_i) S` with `S`
    /// symplectic and symplectic eigenvalues `ν_i ∈ [lo, hi]`, `lo ≥ 1`.
    pub fn random<R: Rng + ?Sized>(g: &mut R, k: usize, lo: f64, hi: f64) -> Result<Self> {
        let base = Self::standard(k, 1.0)?;
        let mut h = RMat::from_fn(2 * k, 2 * k, |_, _| 0.3 * gaussian(g));
        h = (&h + h.transpose()) * 0.5;
        let s = (&base.sigma * h).exp();
        let mut nu = RMat::zeros(2 * k, 2 * k);
        for i in 0..k {
            let v = g.random_range(lo..=hi);
            nu[(2 * i, 2 * i)] = v;
            nu[(2 * i + 1, 2 * i + 1)] = v;
        }
        let alpha = s.transpose() * nu * &s;
        Self::new((&alpha + alpha.transpose()) * 0.5, base.sigma)
    }

    pub fn dim(&self) -> usize {
        self.alpha.nrows()
    }

    pub fn alpha(&self) -> &RMat {
        &self.alpha
    }

    pub fn sigma(&self) -> &RMat {
        &self.sigma
    }

    pub fn symplectic(&self, f: &RVec, g: &RVec) -> f64 {
        f.dot(&(&self.sigma * g))
    }

    pub fn variance(&self, f: &RVec, g: &RVec) -> f64 {
        f.dot(&(&self.alpha * g))
    }

    /// Smallest eigenvalue of `α + iσ`.
    pub fn state_margin(&self) -> f64 {
        min_eig_hermitian(&self.alpha, &self.sigma)
    }

    /// `H_n = H ⊕ … ⊕ H` with the induced forms.
    pub fn direct_power(&self, n: usize) -> SymplecticSpace {
        SymplecticSpace {
            alpha: block_diag(&self.alpha, n),
            sigma: block_diag(&self.sigma, n),
        }
    }

    fn check(&self, f: &RVec) -> Result<()> {
        if f.len() != self.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), got: f.len() });
        }
        Ok(())
    }
}

/// Finite linear combination `Σ c_k W(f_k)`.
#[derive(Clone, Debug, PartialEq)]
pub struct WeylPolynomial {
    pub terms: Vec<(C64, RVec)>,
}

impl WeylPolynomial {
    pub fn weyl(f: RVec) -> Self {
        WeylPolynomial { terms: vec![(C64::new(1.0, 0.0), f)] }
    }

    pub fn scalar(c: C64, dim: usize) -> Self {
        WeylPolynomial { terms: vec![(c, RVec::zeros(dim))] }
    }

    /// Product reduced by `W(f)W(g) = e^{iσ(f,g)} W(f+g)`.
    pub fn mul(&self, other: &WeylPolynomial, space: &SymplecticSpace) -> WeylPolynomial {
        let mut terms = Vec::with_capacity(self.terms.len() * other.terms.len());
        for (a, f) in &self.terms {
            for (b, g) in &other.terms {
                let phase = C64::new(0.0, space.symplectic(f, g)).exp();
                terms.push((a * b * phase, f + g));
            }
        }
        WeylPolynomial { terms }.simplified()
    }

    /// `W(f)* = W(−f)`.
    pub fn adjoint(&self) -> WeylPolynomial {
        WeylPolynomial { terms: self.terms.iter().map(|(c, f)| (c.conj(), -f)).collect() }
    }

    pub fn add(&self, other: &WeylPolynomial) -> WeylPolynomial {
        let mut terms = self.terms.clone();
        terms.extend(other.terms.iter().cloned());
        WeylPolynomial { terms }.simplified()
    }

    /// Merges terms with identical vectors and drops zero coefficients.
    pub fn simplified(self) -> WeylPolynomial {
        let mut out: Vec<(C64, RVec)> = Vec::with_capacity(self.terms.len());
        for (c, f) in self.terms {
            match out.iter_mut().find(|(_, g)| *g == f) {
                Some(slot) => slot.0 += c,
                None => out.push((c, f)),
            }
        }
        out.retain(|(c, _)| c.norm() != 0.0);
        WeylPolynomial { terms: out }
    }

    /// Largest coefficient difference after aligning vectors within `tol`.
    pub fn distance(&self, other: &WeylPolynomial, tol: f64) -> f64 {
        let mut rest = other.terms.clone();
        let mut worst: f64 = 0.0;
        for (c, f) in &self.terms {
            match rest.iter().position(|(_, g)| (f - g).amax() <= tol) {
                Some(i) => {
                    let (d, g) = rest.swap_remove(i);
                    worst = worst.max((c - d).norm()).max((f - g).amax());
                }
                None => worst = worst.max(c.norm()),
            }
        }
        rest.iter().fold(worst, |w, (c, _)| w.max(c.norm()))
    }
}

/// `φ_{m,α}(W(f)) = exp(i m(f) − α(f,f)/2)`.
#[derive(Clone, Debug)]
pub struct QuasifreeState {
    pub space: SymplecticSpace,
    pub m: RVec,
}

impl QuasifreeState {
    pub fn new(space: SymplecticSpace, m: RVec) -> Result<Self> {
        space.check(&m)?;
        Ok(QuasifreeState { space, m })
    }

    pub fn eval_weyl(&self, f: &RVec) -> Result<C64> {
        self.space.check(f)?;
        Ok(C64::new(-0.5 * self.space.variance(f, f), self.m.dot(f)).exp())
    }

    pub fn eval(&self, p: &WeylPolynomial) -> Result<C64> {
        p.terms
            .iter()
            .try_fold(C64::new(0.0, 0.0), |acc, (c, f)| Ok(acc + c * self.eval_weyl(f)?))
    }

    /// `φ^{⊗n}` on `H_n`, mean `m ⊕ … ⊕ m`.
    pub fn tensor_power(&self, n: usize) -> QuasifreeState {
        let k = self.m.len();
        QuasifreeState {
            space: self.space.direct_power(n),
            m: RVec::from_fn(k * n, |i, _| self.m[i % k]),
        }
    }
}

/// `W(f) ↦ exp(−q(f,f)/2 + i ℓ(f)) W(Af)`, mapping Weyl unitaries of
/// `source` into the algebra over `target`.
#[derive(Clone, Debug)]
pub struct GaussianMap {
    pub source: SymplecticSpace,
    pub target: SymplecticSpace,
    pub a: RMat,
    pub q: RMat,
    pub linear: RVec,
}

/// Structural positivity data of a Gaussian map.
#[derive(Clone, Debug, Serialize)]
pub struct CpCertificate {
    pub completely_positive: bool,
    /// Smallest eigenvalue of `Q + i(σ_source − Aᵀσ_target A)`.
    pub margin: f64,
    /// Smallest eigenvalue of the same form over basis and sample vectors.
    pub sample_margin: f64,
    /// Smallest eigenvalue of the raw kernel Gram matrix on random points,
    /// relative to its largest.
    pub kernel_margin: f64,
}

impl GaussianMap {
    pub fn new(source: SymplecticSpace, target: SymplecticSpace, a: RMat, q: RMat) -> Result<Self> {
        if a.nrows() != target.dim() || a.ncols() != source.dim() {
            return Err(Error::DimensionMismatch { expected: target.dim(), got: a.nrows() });
        }
        if q.nrows() != source.dim() || q.ncols() != source.dim() {
            return Err(Error::DimensionMismatch { expected: source.dim(), got: q.nrows() });
        }
        let linear = RVec::zeros(source.dim());
        Ok(GaussianMap { source, target, a, q: (&q + q.transpose()) * 0.5, linear })
    }

    pub fn apply_weyl(&self, f: &RVec) -> Result<WeylPolynomial> {
        self.source.check(f)?;
        let c = C64::new(-0.5 * f.dot(&(&self.q * f)), self.linear.dot(f)).exp();
        Ok(WeylPolynomial { terms: vec![(c, &self.a * f)] })
    }

    pub fn apply(&self, p: &WeylPolynomial) -> Result<WeylPolynomial> {
        let mut terms = Vec::with_capacity(p.terms.len());
        for (c, f) in &p.terms {
            let img = self.apply_weyl(f)?;
            terms.extend(img.terms.into_iter().map(|(d, g)| (c * d, g)));
        }
        Ok(WeylPolynomial { terms }.simplified())
    }

    /// `self ∘ inner`: apply `inner` first, then `self`.
    pub fn after(&self, inner: &GaussianMap) -> Result<GaussianMap> {
        if inner.target != self.source {
            return Err(Error::InvalidParameter("maps do not compose".into()));
        }
        let q = &inner.q + inner.a.transpose() * &self.q * &inner.a;
        let mut out = GaussianMap::new(
            inner.source.clone(),
            self.target.clone(),
            &self.a * &inner.a,
            q,
        )?;
        out.linear = &inner.linear + inner.a.transpose() * &self.linear;
        Ok(out)
    }

    /// Same map with the noise form scaled by `s`.
    pub fn with_noise_scaled(&self, s: f64) -> GaussianMap {
        GaussianMap { q: &self.q * s, ..self.clone() }
    }

    /// Same map with `ε·I` added to the noise form.
    pub fn with_noise_added(&self, eps: f64) -> GaussianMap {
        let n = self.q.nrows();
        GaussianMap { q: &self.q + RMat::identity(n, n) * eps, ..self.clone() }
    }

    fn cp_form(&self) -> (RMat, RMat) {
        let tau = self.source.sigma() - self.a.transpose() * self.target.sigma() * &self.a;
        (self.q.clone(), tau)
    }

    /// Positivity test: the kernel `(f, g) ↦ exp(−q(g−f)/2) e^{i(σ(g,f) −
    /// σ'(Ag,Af))}` is positive definite iff `Q + i(σ − Aᵀσ'A) ⪰ 0`.
    pub fn check_cp<R: Rng + ?Sized>(&self, samples: &[RVec], g: &mut R) -> Result<CpCertificate> {
        let n = self.source.dim();
        let (q, tau) = self.cp_form();
        let margin = min_eig_hermitian(&q, &tau);
        let mut vecs: Vec<RVec> = (0..n)
            .map(|i| {
                let mut e = RVec::zeros(n);
                e[i] = 1.0;
                e
            })
            .collect();
        for s in samples {
            self.source.check(s)?;
            vecs.push(s.clone());
        }
        let k = vecs.len();
        let gre = RMat::from_fn(k, k, |i, j| vecs[i].dot(&(&q * &vecs[j])));
        let gim = RMat::from_fn(k, k, |i, j| vecs[i].dot(&(&tau * &vecs[j])));
        let sample_margin = min_eig_hermitian(&gre, &gim);
        let pts: Vec<RVec> = (0..12).map(|_| random_real_vector(g, n) * 0.5).collect();
        let kernel = CMat::from_fn(12, 12, |i, j| {
            let d = &pts[j] - &pts[i];
            let phase = pts[j].dot(&(&tau * &pts[i]));
            C64::new(-0.5 * d.dot(&(&q * &d)), phase).exp()
        });
        let h = (&kernel + kernel.adjoint()) * C64::new(0.5, 0.0);
        let ev = h.symmetric_eigenvalues();
        let top = ev.iter().cloned().fold(0.0, f64::max).max(1e-300);
        let kernel_margin = ev.iter().cloned().fold(f64::INFINITY, f64::min) / top;
        Ok(CpCertificate {
            completely_positive: margin >= -1e-10,
            margin,
            sample_margin,
            kernel_margin,
        })
    }
}

fn diagonal_embedding(k: usize, n: usize) -> RMat {
    let mut a = RMat::zeros(k * n, k);
    let s = 1.0 / (n as f64).sqrt();
    for i in 0..n {
        for j in 0..k {
            a[(i * k + j, j)] = s;
        }
    }
    a
}

/// `T(W(f)) = W(n^{-1/2}(f ⊕ … ⊕ f))`.
pub fn sample_mean_channel(space: &SymplecticSpace, n: usize) -> Result<GaussianMap> {
    if n == 0 {
        return Err(Error::InvalidParameter("n must be positive".into()));
    }
    let k = space.dim();
    GaussianMap::new(space.clone(), space.direct_power(n), diagonal_embedding(k, n), RMat::zeros(k, k))
}

/// `S_α(W(f₁ ⊕ … ⊕ f_n)) = W(n^{-1/2} Σ f_i) exp(α(Σf_i, Σf_i)/(2n) − Σ α(f_i, f_i)/2)`.
pub fn randomization_map(space: &SymplecticSpace, n: usize) -> Result<GaussianMap> {
    if n == 0 {
        return Err(Error::InvalidParameter("n must be positive".into()));
    }
    let k = space.dim();
    let big = space.direct_power(n);
    let a = diagonal_embedding(k, n).transpose();
    let q = big.alpha() - a.transpose() * space.alpha() * &a;
    GaussianMap::new(big, space.clone(), a, q)
}

#[derive(Clone, Debug, Serialize)]
pub struct SufficiencyPairReport {
    pub n: usize,
    pub samples: usize,
    pub means: usize,
    pub max_deviation: f64,
    pub cp_sample_mean: CpCertificate,
    pub cp_randomization: CpCertificate,
    /// The state gate is the matrix condition `α + iσ ⪰ 0`, stronger than the
    /// pairwise inequality `σ(f,g)² ≤ α(f,f)α(g,g)`.
    pub state_margin: f64,
    pub pairwise_condition_holds: bool,
}

/// Checks `ψ_m ∘ T ∘ S_α = ψ_m` on random Weyl vectors for each mean, where
/// `ψ_m = φ_{m,α}^{⊗n}`. Without explicit means, five random ones are drawn.
pub fn verify_sufficiency_pair<R: Rng + ?Sized>(
    space: &SymplecticSpace,
    n: usize,
    m_list: &[RVec],
    samples: usize,
    g: &mut R,
) -> Result<SufficiencyPairReport> {
    let t = sample_mean_channel(space, n)?;
    let s = randomization_map(space, n)?;
    verify_pair_with(space, &t, &s, m_list, samples, g)
}

/// As [`verify_sufficiency_pair`] with an explicit randomization map.
pub fn verify_pair_with<R: Rng + ?Sized>(
    space: &SymplecticSpace,
    t: &GaussianMap,
    s: &GaussianMap,
    m_list: &[RVec],
    samples: usize,
    g: &mut R,
) -> Result<SufficiencyPairReport> {
    let n = t.target.dim() / space.dim();
    let composite = t.after(s)?;
    let means: Vec<RVec> = if m_list.is_empty() {
        (0..5).map(|_| random_real_vector(g, space.dim())).collect()
    } else {
        m_list.to_vec()
    };
    let vecs: Vec<RVec> = (0..samples).map(|_| random_real_vector(g, space.dim() * n)).collect();
    let mut worst: f64 = 0.0;
    for m in &means {
        let psi = QuasifreeState::new(space.clone(), m.clone())?.tensor_power(n);
        for f in &vecs {
            let direct = psi.eval_weyl(f)?;
            let via = psi.eval(&composite.apply_weyl(f)?)?;
            worst = worst.max((direct - via).norm());
        }
    }
    let k = space.dim();
    let pairwise = (0..samples.max(2)).all(|_| {
        let f = random_real_vector(g, k);
        let h = random_real_vector(g, k);
        space.symplectic(&f, &h).powi(2) <= space.variance(&f, &f) * space.variance(&h, &h) + 1e-12
    });
    let extra: Vec<RVec> = vecs.iter().take(4).cloned().collect();
    let small: Vec<RVec> = extra.iter().map(|v| v.rows(0, k).into_owned()).collect();
    Ok(SufficiencyPairReport {
        n,
        samples,
        means: means.len(),
        max_deviation: worst,
        cp_sample_mean: t.check_cp(&small, g)?,
        cp_randomization: s.check_cp(&extra, g)?,
        state_margin: space.state_margin(),
        pairwise_condition_holds: pairwise,
    })
}

/// Modular data of the vacuum-type state `φ_0` on `(H, σ, α)`.
#[derive(Clone, Debug)]
pub struct ModularData {
    /// `σ(f,g) = α(Df, g)`.
    pub d: RMat,
    /// Complex structure of the polar decomposition `D = J|D|`.
    pub j: RMat,
    /// `L = artanh|D|`, so that `|D|^{-1} = coth L`.
    pub l: RMat,
    pub j_defect: f64,
}

impl ModularData {
    pub fn new(space: &SymplecticSpace) -> Result<Self> {
        let alpha = space.alpha();
        let se = alpha.clone().symmetric_eigen();
        let sq = &se.eigenvectors
            * RMat::from_diagonal(&se.eigenvalues.map(f64::sqrt))
            * se.eigenvectors.transpose();
        let isq = &se.eigenvectors
            * RMat::from_diagonal(&se.eigenvalues.map(|x| 1.0 / x.sqrt()))
            * se.eigenvectors.transpose();
        let d = alpha
            .clone()
            .lu()
            .solve(&space.sigma().transpose())
            .ok_or_else(|| Error::InvalidParameter("α is singular".into()))?;
        // α-orthonormal coordinates: D̃ = α^{1/2} D α^{-1/2} is skew-symmetric.
        let dt = &sq * &d * &isq;
        let abs = (dt.transpose() * &dt).symmetric_eigen();
        let smin = abs.eigenvalues.iter().cloned().fold(f64::INFINITY, f64::min).max(0.0).sqrt();
        let smax = abs.eigenvalues.iter().cloned().fold(0.0, f64::max).sqrt();
        if smin < 1e-12 {
            return Err(Error::InvalidParameter("D is not invertible".into()));
        }
        if smax >= 1.0 - 1e-8 {
            return Err(Error::InvalidParameter(format!("‖D‖ = {smax} is not below 1")));
        }
        let v = &abs.eigenvectors;
        let fun = |f: fn(f64) -> f64| {
            v * RMat::from_diagonal(&abs.eigenvalues.map(|x| f(x.max(0.0).sqrt()))) * v.transpose()
        };
        let inv_abs = fun(|x| 1.0 / x);
        let lt = fun(f64::atanh);
        let jt = &dt * inv_abs;
        let n = jt.nrows();
        let j_defect = (&jt * &jt + RMat::identity(n, n)).amax();
        if j_defect > 1e-9 {
            return Err(Error::Decomposition(format!("J² ≠ −I (defect {j_defect:.3e})")));
        }
        Ok(ModularData { j: &isq * jt * &sq, l: &isq * lt * &sq, d, j_defect })
    }

    /// `V_t = exp(−2tJL)`, the symbol of the modular group.
    pub fn v(&self, t: f64) -> RMat {
        (&self.j * &self.l * (-2.0 * t)).exp()
    }
}

/// `u_t^g = e^{iσ(V_t g, g)} W(V_t g − g)`.
pub fn cocycle_polynomial(md: &ModularData, space: &SymplecticSpace, g: &RVec, t: f64) -> WeylPolynomial {
    let vg = md.v(t) * g;
    let phase = C64::new(0.0, space.symplectic(&vg, g)).exp();
    WeylPolynomial { terms: vec![(phase, vg - g)] }
}

/// Largest deviation in `u_{s+t} = u_s σ_s(u_t)` and `u_t u_t* = 1` over the
/// sampled times.
pub fn cocycle_identity_residual(
    md: &ModularData,
    space: &SymplecticSpace,
    g: &RVec,
    times: &[f64],
) -> f64 {
    let mut worst: f64 = 0.0;
    let one = WeylPolynomial::scalar(C64::new(1.0, 0.0), space.dim());
    for &s in times {
        let us = cocycle_polynomial(md, space, g, s);
        let unit = us.mul(&us.adjoint(), space);
        worst = worst.max(unit.distance(&one, 1e-10));
        for &t in times {
            let ut = cocycle_polynomial(md, space, g, t);
            let vs = md.v(s);
            let shifted = WeylPolynomial {
                terms: ut.terms.iter().map(|(c, f)| (*c, &vs * f)).collect(),
            };
            let lhs = cocycle_polynomial(md, space, g, s + t);
            worst = worst.max(lhs.distance(&us.mul(&shifted, space), 1e-10));
        }
    }
    worst
}

#[derive(Clone, Debug)]
pub struct ShiftSubspace {
    /// Orthonormal columns spanning `{V_t g − g}`.
    pub basis: RMat,
    pub rank: usize,
    pub cocycle_residual: f64,
}

/// Minimal sufficient subspace for the Gaussian shift over `K`:
/// `span{V_t g − g : g ∈ K, t ∈ times}`.
pub fn gaussian_shift_minimal_subspace(
    space: &SymplecticSpace,
    k: &[RVec],
    times: &[f64],
) -> Result<ShiftSubspace> {
    let md = ModularData::new(space)?;
    let n = space.dim();
    let mut cols: Vec<RVec> = Vec::new();
    let mut cocycle: f64 = 0.0;
    for g in k {
        space.check(g)?;
        for &t in times {
            cols.push(md.v(t) * g - g);
        }
        cocycle = cocycle.max(cocycle_identity_residual(&md, space, g, times));
    }
    if cols.is_empty() {
        return Ok(ShiftSubspace { basis: RMat::zeros(n, 0), rank: 0, cocycle_residual: 0.0 });
    }
    let m = RMat::from_columns(&cols);
    let scale = k.iter().map(|g| g.amax()).fold(1.0, f64::max);
    let svd = m.svd(true, false);
    let u = svd.u.expect("requested");
    let keep: Vec<usize> = (0..svd.singular_values.len())
        .filter(|&i| svd.singular_values[i] > 1e-9 * scale)
        .collect();
    let mut basis = RMat::zeros(n, keep.len());
    for (j, &i) in keep.iter().enumerate() {
        basis.set_column(j, &u.column(i));
    }
    Ok(ShiftSubspace { rank: keep.len(), basis, cocycle_residual: cocycle })
}

/// Diagonal copy `{g ⊕ … ⊕ g}` inside `H_n`, as generating vectors.
pub fn diagonal_copy(k: usize, n: usize) -> Vec<RVec> {
    let emb = diagonal_embedding(k, n);
    (0..k).map(|j| emb.column(j).into_owned()).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::random::rng;

    fn qubit() -> SymplecticSpace {
        SymplecticSpace::standard(1, 1.0).unwrap()
    }

    #[test]
    fn state_examples() {
        let st = QuasifreeState::new(qubit(), RVec::zeros(2)).unwrap();
        assert_eq!(st.eval_weyl(&RVec::zeros(2)).unwrap(), C64::new(1.0, 0.0));
        let e1 = RVec::from_vec(vec![1.0, 0.0]);
        assert!((st.eval_weyl(&e1).unwrap() - C64::new((-0.5f64).exp(), 0.0)).norm() < 1e-15);
        let mut g = rng(70);
        let sp = SymplecticSpace::random(&mut g, 2, 1.0, 1.5).unwrap();
        let st = QuasifreeState::new(sp.clone(), random_real_vector(&mut g, 4)).unwrap();
        let f = random_real_vector(&mut g, 4);
        let h = random_real_vector(&mut g, 4);
        let reduced = WeylPolynomial::weyl(f.clone()).mul(&WeylPolynomial::weyl(h.clone()), &sp);
        let phase = C64::new(0.0, sp.symplectic(&f, &h)).exp();
        let formula = phase * st.eval_weyl(&(&f + &h)).unwrap();
        assert!((st.eval(&reduced).unwrap() - formula).norm() < 1e-12);
    }

    #[test]
    fn weyl_associativity() {
        let mut g = rng(71);
        let sp = SymplecticSpace::random(&mut g, 2, 1.0, 2.0).unwrap();
        let w = |g: &mut crate::random::SeededRng| WeylPolynomial::weyl(random_real_vector(g, 4));
        let (a, b, c) = (w(&mut g), w(&mut g), w(&mut g));
        let left = a.mul(&b, &sp).mul(&c, &sp);
        let right = a.mul(&b.mul(&c, &sp), &sp);
        assert!(left.distance(&right, 1e-12) < 1e-12);
    }

    #[test]
    fn sample_mean_examples() {
        let sp = qubit();
        let t = sample_mean_channel(&sp, 1).unwrap();
        assert_eq!(t.a, RMat::identity(2, 2));
        let t = sample_mean_channel(&sp, 2).unwrap();
        let e1 = RVec::from_vec(vec![1.0, 0.0]);
        let img = t.apply_weyl(&e1).unwrap();
        let s = 1.0 / 2f64.sqrt();
        assert!((&img.terms[0].1 - RVec::from_vec(vec![s, 0.0, s, 0.0])).amax() < 1e-15);
        assert!(t.check_cp(&[], &mut rng(1)).unwrap().completely_positive);
    }

    #[test]
    fn randomization_examples() {
        let mut g = rng(72);
        let sp = SymplecticSpace::random(&mut g, 1, 1.0, 1.4).unwrap();
        let s1 = randomization_map(&sp, 1).unwrap();
        assert!(s1.q.amax() < 1e-15);
        let s2 = randomization_map(&sp, 2).unwrap();
        let f = random_real_vector(&mut g, 2);
        let mut ff = RVec::zeros(4);
        ff.rows_mut(0, 2).copy_from(&f);
        ff.rows_mut(2, 2).copy_from(&f);
        assert!(ff.dot(&(&s2.q * &ff)).abs() < 1e-12);
        let img = s2.apply_weyl(&ff).unwrap();
        assert!((&img.terms[0].1 - &f * 2f64.sqrt()).amax() < 1e-12);
        let mut fm = ff.clone();
        fm.rows_mut(2, 2).copy_from(&(-&f));
        assert!((fm.dot(&(&s2.q * &fm)) - 2.0 * sp.variance(&f, &f)).abs() < 1e-12);
        assert!((&s2.a * &fm).amax() < 1e-15);
    }

    #[test]
    fn cp_checks() {
        let mut g = rng(73);
        for n in [2, 3] {
            let sp = SymplecticSpace::random(&mut g, 1, 1.0, 1.5).unwrap();
            let s = randomization_map(&sp, n).unwrap();
            let samples: Vec<RVec> = (0..3).map(|_| random_real_vector(&mut g, 2 * n)).collect();
            let c = s.check_cp(&samples, &mut g).unwrap();
            assert!(c.completely_positive && c.sample_margin > -1e-10);
            assert!(c.kernel_margin > -1e-9);
            let half = s.with_noise_scaled(0.5).check_cp(&samples, &mut g).unwrap();
            assert!(!half.completely_positive && half.margin < -1e-3);
            for eps in [0.0, 0.01, 0.1] {
                assert!(s.with_noise_added(eps).check_cp(&samples, &mut g).unwrap().completely_positive);
            }
        }
    }

    #[test]
    fn sufficiency_pair() {
        let mut g = rng(74);
        let sp = SymplecticSpace::random(&mut g, 1, 1.0, 1.5).unwrap();
        let rep = verify_sufficiency_pair(&sp, 1, &[], 20, &mut g).unwrap();
        assert!(rep.max_deviation < 1e-14);
        let rep = verify_sufficiency_pair(&sp, 3, &[], 100, &mut g).unwrap();
        assert!(rep.max_deviation < 1e-10);
        assert!(rep.cp_randomization.completely_positive && rep.cp_sample_mean.completely_positive);
        let t = sample_mean_channel(&sp, 3).unwrap();
        let bad = randomization_map(&sp, 3).unwrap().with_noise_scaled(0.5);
        let rep = verify_pair_with(&sp, &t, &bad, &[], 100, &mut g).unwrap();
        assert!(rep.max_deviation > 1e-3);
    }

    #[test]
    fn composition_symbol() {
        let mut g = rng(75);
        let sp = SymplecticSpace::random(&mut g, 1, 1.0, 1.5).unwrap();
        let t = sample_mean_channel(&sp, 2).unwrap();
        let s = randomization_map(&sp, 2).unwrap();
        let ts = t.after(&s).unwrap();
        let f = random_real_vector(&mut g, 4);
        let two_step = t.apply(&s.apply_weyl(&f).unwrap()).unwrap();
        assert!(ts.apply_weyl(&f).unwrap().distance(&two_step, 1e-12) < 1e-11);
    }

    #[test]
    fn modular_data() {
        let mut g = rng(76);
        let sp = SymplecticSpace::random(&mut g, 2, 1.2, 2.0).unwrap();
        let md = ModularData::new(&sp).unwrap();
        for t in [0.37, 0.71, 1.13] {
            let v = md.v(t);
            assert!((v.transpose() * sp.alpha() * &v - sp.alpha()).amax() < 1e-9);
            assert!((&v * &md.j - &md.j * &v).amax() < 1e-9);
        }
        let f = random_real_vector(&mut g, 4);
        let h = random_real_vector(&mut g, 4);
        assert!((sp.variance(&(&md.d * &f), &h) - sp.symplectic(&f, &h)).abs() < 1e-12);
        assert!(ModularData::new(&SymplecticSpace::standard(1, 1.0).unwrap()).is_err());
    }

    #[test]
    fn shift_subspaces() {
        let mut g = rng(77);
        let sp = SymplecticSpace::random(&mut g, 2, 1.2, 2.0).unwrap();
        let times = [0.37, 0.71, 1.13];
        let zero = gaussian_shift_minimal_subspace(&sp, &[RVec::zeros(4)], &times).unwrap();
        assert_eq!(zero.rank, 0);
        let full: Vec<RVec> = (0..4).map(|i| RMat::identity(4, 4).column(i).into_owned()).collect();
        let s = gaussian_shift_minimal_subspace(&sp, &full, &times).unwrap();
        assert_eq!(s.rank, 4);
        assert!(s.cocycle_residual < 1e-10);
        let big = sp.direct_power(3);
        let diag = diagonal_copy(4, 3);
        let s = gaussian_shift_minimal_subspace(&big, &diag, &times).unwrap();
        assert_eq!(s.rank, 4);
        let d = RMat::from_columns(&diag);
        let proj = &d * d.transpose();
        assert!((&proj * &s.basis - &s.basis).amax() < 1e-9);
    }

    #[test]
    fn invalid_spaces() {
        let s = SymplecticSpace::standard(1, 1.0).unwrap();
        assert!(SymplecticSpace::new(s.alpha() * 0.5, s.sigma().clone()).is_err());
        assert!(SymplecticSpace::new(RMat::identity(3, 3), RMat::zeros(3, 3)).is_err());
    }
}
