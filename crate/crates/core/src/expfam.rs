//! Perturbed states, quantum exponential families and the Kubo–Mori (BKM)
//! Fisher information.

use nalgebra::DMatrix;
use rand::Rng;

use crate::channel::QuantumChannel;
use crate::divergence::relative_entropy;
use crate::error::{Error, Result};
use crate::operator::{
    r, spectral, trace_norm_hermitian, CMat, DensityMatrix, HermitianOperator,
    SpectralDecomposition,
};
use crate::random::random_density;
use crate::schema::ExpFamilyJson;

/// Logarithmic mean `(x − y)/(log x − log y)`, with `w(x, x) = x`.
pub fn bkm_weight(x: f64, y: f64) -> f64 {
    if x == y {
        return x;
    }
    let u = x.ln() - y.ln();
    if u.abs() < 1e-6 {
        (x * y).sqrt() * (1.0 + u * u / 24.0)
    } else {
        (x - y) / u
    }
}

/// `log Tr exp(h)` together with the spectral data of `h`.
fn log_trace_exp(h: &HermitianOperator) -> (f64, SpectralDecomposition) {
    let spec = spectral(h);
    let top = spec.eigenvalues.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let sum: f64 = spec.eigenvalues.iter().map(|&l| (l - top).exp()).sum();
    (top + sum.ln(), spec)
}

fn normalized_exp(h: &HermitianOperator) -> Result<DensityMatrix> {
    let (log_z, spec) = log_trace_exp(h);
    let m = spec.apply(|l| (l - log_z).exp(), false)?;
    DensityMatrix::from_hermitian(m)
}

fn check_pair(omega: &DensityMatrix, a: &HermitianOperator) -> Result<()> {
    omega.ensure_faithful()?;
    if a.dim() != omega.dim() {
        return Err(Error::DimensionMismatch { expected: omega.dim(), got: a.dim() });
    }
    Ok(())
}

/// `[ω^a] = exp(log ρ_ω + a)/Tr exp(log ρ_ω + a)`.
pub fn perturbed_state(omega: &DensityMatrix, a: &HermitianOperator) -> Result<DensityMatrix> {
    check_pair(omega, a)?;
    normalized_exp(&(omega.log() + a.clone()))
}

/// `c(ω, a) = −log Tr exp(log ρ_ω + a)`.
pub fn c_functional(omega: &DensityMatrix, a: &HermitianOperator) -> Result<f64> {
    check_pair(omega, a)?;
    Ok(-log_trace_exp(&(omega.log() + a.clone())).0)
}

/// `ψ ↦ S(ψ‖ω) − ψ(a)`, minimized by the perturbed state.
pub fn variational_value(
    psi: &DensityMatrix,
    omega: &DensityMatrix,
    a: &HermitianOperator,
) -> Result<f64> {
    Ok(relative_entropy(psi, omega)? - a.expectation(psi))
}

/// Smallest excess of the variational functional over its value at `[ω^a]`
/// among random nearby candidates. Non-negative up to rounding.
pub fn variational_margin<R: Rng + ?Sized>(
    omega: &DensityMatrix,
    a: &HermitianOperator,
    g: &mut R,
    samples: usize,
) -> Result<f64> {
    let opt = perturbed_state(omega, a)?;
    let best = variational_value(&opt, omega, a)?;
    let mut margin = f64::INFINITY;
    for _ in 0..samples {
        let s = g.random_range(0.01..0.3);
        let other = random_density(g, omega.dim());
        let cand = DensityMatrix::mixture(&[&opt, &other], &[1.0 - s, s])?;
        margin = margin.min(variational_value(&cand, omega, a)? - best);
    }
    Ok(margin)
}

/// `Σ_ij w(λ_i, λ_j) conj(h_ij) k_ij − Tr(ρh) Tr(ρk)` in the eigenbasis of `ρ`.
pub fn bkm_form(rho: &DensityMatrix, h: &HermitianOperator, k: &HermitianOperator) -> Result<f64> {
    rho.ensure_faithful()?;
    if h.dim() != rho.dim() || k.dim() != rho.dim() {
        return Err(Error::DimensionMismatch {
            expected: rho.dim(),
            got: h.dim().max(k.dim()),
        });
    }
    let spec = rho.spectrum();
    let u = &spec.eigenvectors;
    let ht = u.adjoint() * h.matrix() * u;
    let kt = u.adjoint() * k.matrix() * u;
    let lam = &spec.eigenvalues;
    let n = lam.len();
    let mut acc = 0.0;
    let mut eh = 0.0;
    let mut ek = 0.0;
    for i in 0..n {
        eh += lam[i] * ht[(i, i)].re;
        ek += lam[i] * kt[(i, i)].re;
        for j in 0..n {
            acc += bkm_weight(lam[i], lam[j]) * (ht[(i, j)].conj() * kt[(i, j)]).re;
        }
    }
    Ok(acc - eh * ek)
}

/// `Σ_ij conj(x_ij) y_ij / w(λ_i, λ_j)`: the BKM metric on tangent vectors
/// (traceless Hermitian perturbations of `ρ`). Equals `bkm_form` of the
/// corresponding logarithmic derivatives.
pub fn bkm_tangent_form(rho: &DensityMatrix, x: &CMat, y: &CMat) -> Result<f64> {
    rho.ensure_faithful()?;
    let spec = rho.spectrum();
    let u = &spec.eigenvectors;
    let xt = u.adjoint() * x * u;
    let yt = u.adjoint() * y * u;
    let lam = &spec.eigenvalues;
    let mut acc = 0.0;
    for i in 0..lam.len() {
        for j in 0..lam.len() {
            acc += (xt[(i, j)].conj() * yt[(i, j)]).re / bkm_weight(lam[i], lam[j]);
        }
    }
    Ok(acc)
}

/// Derivative of `log` at `ρ` applied to a tangent `x`.
pub fn log_derivative(rho: &DensityMatrix, x: &CMat) -> Result<HermitianOperator> {
    rho.ensure_faithful()?;
    let spec = rho.spectrum();
    let u = &spec.eigenvectors;
    let mut xt = u.adjoint() * x * u;
    let lam = &spec.eigenvalues;
    for i in 0..lam.len() {
        for j in 0..lam.len() {
            xt[(i, j)] /= r(bkm_weight(lam[i], lam[j]));
        }
    }
    HermitianOperator::new(u * xt * u.adjoint())
}

/// Tangent `∂ρ` of a perturbed state `ρ = [ω^a]` along a score `ℓ` (the
/// centred direction): `(∂ρ)_ij = w(λ_i, λ_j) ℓ_ij` in the eigenbasis of `ρ`.
fn tangent_from_score(rho: &DensityMatrix, score: &HermitianOperator) -> CMat {
    let spec = rho.spectrum();
    let u = &spec.eigenvectors;
    let mut t = u.adjoint() * score.matrix() * u;
    let lam = &spec.eigenvalues;
    for i in 0..lam.len() {
        for j in 0..lam.len() {
            t[(i, j)] *= r(bkm_weight(lam[i], lam[j]));
        }
    }
    u * t * u.adjoint()
}

/// Parametric family of faithful states with derivative data.
pub trait ParametricFamily {
    fn dim(&self) -> usize;
    fn n_params(&self) -> usize;
    fn state(&self, theta: &[f64]) -> Result<DensityMatrix>;
    /// Derivatives `∂_i a(θ)` of the exponent.
    fn exponent_derivatives(&self, theta: &[f64]) -> Result<Vec<HermitianOperator>>;
    fn grid(&self) -> &[Vec<f64>];
}

/// `ρ_θ = exp(H + Σ θ_i a_i)/Z(θ)`.
#[derive(Clone, Debug)]
pub struct ExponentialFamily {
    base_log: HermitianOperator,
    generators: Vec<HermitianOperator>,
    theta_grid: Vec<Vec<f64>>,
}

impl ExponentialFamily {
    pub fn new(
        base_log: HermitianOperator,
        generators: Vec<HermitianOperator>,
        theta_grid: Vec<Vec<f64>>,
    ) -> Result<Self> {
        let n = base_log.dim();
        if let Some(g) = generators.iter().find(|g| g.dim() != n) {
            return Err(Error::DimensionMismatch { expected: n, got: g.dim() });
        }
        if let Some(t) = theta_grid.iter().find(|t| t.len() != generators.len()) {
            return Err(Error::DimensionMismatch { expected: generators.len(), got: t.len() });
        }
        if theta_grid.iter().flatten().any(|x| !x.is_finite()) {
            return Err(Error::InvalidParameter("non-finite grid point".into()));
        }
        Ok(ExponentialFamily { base_log, generators, theta_grid })
    }

    pub fn from_json(j: &ExpFamilyJson) -> Result<Self> {
        let h = HermitianOperator::new(j.h.to_matrix()?)?;
        let gens = j
            .generators
            .iter()
            .map(|g| HermitianOperator::new(g.to_matrix()?))
            .collect::<Result<Vec<_>>>()?;
        Self::new(h, gens, j.theta_grid.clone())
    }

    pub fn base_log(&self) -> &HermitianOperator {
        &self.base_log
    }

    pub fn generators(&self) -> &[HermitianOperator] {
        &self.generators
    }

    fn exponent(&self, theta: &[f64]) -> Result<HermitianOperator> {
        if theta.len() != self.generators.len() {
            return Err(Error::DimensionMismatch {
                expected: self.generators.len(),
                got: theta.len(),
            });
        }
        let mut h = self.base_log.clone();
        for (t, a) in theta.iter().zip(&self.generators) {
            h = h + a.scaled(*t);
        }
        Ok(h)
    }

    /// `log Tr exp(H + Σ θ_i a_i)`.
    pub fn log_partition(&self, theta: &[f64]) -> Result<f64> {
        Ok(log_trace_exp(&self.exponent(theta)?).0)
    }
}

impl ParametricFamily for ExponentialFamily {
    fn dim(&self) -> usize {
        self.base_log.dim()
    }

    fn n_params(&self) -> usize {
        self.generators.len()
    }

    fn state(&self, theta: &[f64]) -> Result<DensityMatrix> {
        normalized_exp(&self.exponent(theta)?)
    }

    fn exponent_derivatives(&self, theta: &[f64]) -> Result<Vec<HermitianOperator>> {
        if theta.len() != self.generators.len() {
            return Err(Error::DimensionMismatch {
                expected: self.generators.len(),
                got: theta.len(),
            });
        }
        Ok(self.generators.clone())
    }

    fn grid(&self) -> &[Vec<f64>] {
        &self.theta_grid
    }
}

type ExponentMap = dyn Fn(&[f64]) -> Result<HermitianOperator> + Send + Sync;

/// `φ_θ = [ω^{a(θ)}]` for a faithful `ω`; derivatives of `a` by symmetric
/// differences with the given spacing.
pub struct DominatedFamily {
    omega: DensityMatrix,
    a: Box<ExponentMap>,
    n_params: usize,
    step: f64,
    theta_grid: Vec<Vec<f64>>,
}

impl std::fmt::Debug for DominatedFamily {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("DominatedFamily")
            .field("dim", &self.omega.dim())
            .field("n_params", &self.n_params)
            .field("step", &self.step)
            .finish()
    }
}

impl DominatedFamily {
    pub fn new<F>(
        omega: DensityMatrix,
        n_params: usize,
        step: f64,
        theta_grid: Vec<Vec<f64>>,
        a: F,
    ) -> Result<Self>
    where
        F: Fn(&[f64]) -> Result<HermitianOperator> + Send + Sync + 'static,
    {
        omega.ensure_faithful()?;
        if step.is_nan() || step <= 0.0 {
            return Err(Error::InvalidParameter("difference step must be positive".into()));
        }
        if let Some(t) = theta_grid.iter().find(|t| t.len() != n_params) {
            return Err(Error::DimensionMismatch { expected: n_params, got: t.len() });
        }
        Ok(DominatedFamily { omega, a: Box::new(a), n_params, step, theta_grid })
    }

    pub fn omega(&self) -> &DensityMatrix {
        &self.omega
    }

    /// Tightest `(λ, μ)` with `λω ≤ φ_θ ≤ μω` over the grid.
    pub fn domination_bounds(&self) -> Result<(f64, f64)> {
        let inv = self.omega.power(-0.5).into_matrix();
        let mut lo = f64::INFINITY;
        let mut hi: f64 = 0.0;
        for t in &self.theta_grid {
            let s = self.state(t)?;
            let m = HermitianOperator::new(&inv * s.matrix() * &inv)?;
            let ev = spectral(&m).eigenvalues;
            lo = lo.min(ev[0]);
            hi = hi.max(*ev.last().unwrap_or(&0.0));
        }
        Ok((lo, hi))
    }
}

impl ParametricFamily for DominatedFamily {
    fn dim(&self) -> usize {
        self.omega.dim()
    }

    fn n_params(&self) -> usize {
        self.n_params
    }

    fn state(&self, theta: &[f64]) -> Result<DensityMatrix> {
        perturbed_state(&self.omega, &(self.a)(theta)?)
    }

    fn exponent_derivatives(&self, theta: &[f64]) -> Result<Vec<HermitianOperator>> {
        (0..self.n_params)
            .map(|i| {
                let mut p = theta.to_vec();
                let mut m = theta.to_vec();
                p[i] += self.step;
                m[i] -= self.step;
                Ok(((self.a)(&p)? - (self.a)(&m)?).scaled(0.5 / self.step))
            })
            .collect()
    }

    fn grid(&self) -> &[Vec<f64>] {
        &self.theta_grid
    }
}

/// `ℓ_i = ∂_i a(θ) − φ_θ(∂_i a(θ))`.
pub fn score_operators<F: ParametricFamily + ?Sized>(
    fam: &F,
    theta: &[f64],
) -> Result<Vec<HermitianOperator>> {
    let rho = fam.state(theta)?;
    Ok(fam
        .exponent_derivatives(theta)?
        .into_iter()
        .map(|d| {
            let m = d.expectation(&rho);
            d.shifted(-m)
        })
        .collect())
}

/// Tangents `∂_i ρ_θ`.
pub fn state_tangents<F: ParametricFamily + ?Sized>(fam: &F, theta: &[f64]) -> Result<Vec<CMat>> {
    let rho = fam.state(theta)?;
    Ok(score_operators(fam, theta)?
        .iter()
        .map(|l| tangent_from_score(&rho, l))
        .collect())
}

fn gram<T>(items: &[T], f: impl Fn(&T, &T) -> Result<f64>) -> Result<DMatrix<f64>> {
    let k = items.len();
    let mut g = DMatrix::zeros(k, k);
    for i in 0..k {
        for j in i..k {
            let v = f(&items[i], &items[j])?;
            g[(i, j)] = v;
            g[(j, i)] = v;
        }
    }
    Ok(g)
}

/// `g_ij(θ) = γ_{φ_θ}(ℓ_i, ℓ_j)`.
pub fn fisher_matrix<F: ParametricFamily + ?Sized>(fam: &F, theta: &[f64]) -> Result<DMatrix<f64>> {
    let rho = fam.state(theta)?;
    let scores = score_operators(fam, theta)?;
    gram(&scores, |a, b| bkm_form(&rho, a, b))
}

/// Central-difference Hessian of a scalar function.
pub fn finite_difference_hessian<F>(f: F, theta: &[f64], step: f64) -> Result<DMatrix<f64>>
where
    F: Fn(&[f64]) -> Result<f64>,
{
    let k = theta.len();
    let mut h = DMatrix::zeros(k, k);
    let at = |di: &[(usize, f64)]| {
        let mut p = theta.to_vec();
        for &(i, d) in di {
            p[i] += d;
        }
        f(&p)
    };
    let f0 = f(theta)?;
    for i in 0..k {
        h[(i, i)] = (at(&[(i, step)])? - 2.0 * f0 + at(&[(i, -step)])?) / (step * step);
        for j in i + 1..k {
            let v = (at(&[(i, step), (j, step)])? - at(&[(i, step), (j, -step)])?
                - at(&[(i, -step), (j, step)])?
                + at(&[(i, -step), (j, -step)])?)
                / (4.0 * step * step);
            h[(i, j)] = v;
            h[(j, i)] = v;
        }
    }
    Ok(h)
}

/// The induced family `θ ↦ ch(φ_θ)` restricted to the support of its image.
struct InducedFamily<'a, F: ParametricFamily + ?Sized> {
    fam: &'a F,
    ch: &'a QuantumChannel,
    q: CMat,
}

impl<'a, F: ParametricFamily + ?Sized> InducedFamily<'a, F> {
    fn new(fam: &'a F, ch: &'a QuantumChannel) -> Result<Self> {
        if ch.in_dim() != fam.dim() {
            return Err(Error::DimensionMismatch { expected: fam.dim(), got: ch.in_dim() });
        }
        let t0 = fam.grid().first().ok_or(Error::EmptyFamily)?;
        let img = ch.schrodinger(&fam.state(t0)?)?;
        Ok(InducedFamily { fam, ch, q: img.support_isometry() })
    }

    fn compress(&self, x: &CMat) -> CMat {
        self.q.adjoint() * x * &self.q
    }

    fn state(&self, theta: &[f64]) -> Result<DensityMatrix> {
        let img = self.ch.schrodinger_apply(self.fam.state(theta)?.matrix());
        let s = DensityMatrix::from_unnormalized(&self.compress(&img))?;
        if !s.is_faithful() {
            return Err(Error::NonFaithful { rank: s.support_rank(), dim: s.dim() });
        }
        Ok(s)
    }

    fn tangents(&self, theta: &[f64]) -> Result<Vec<CMat>> {
        Ok(state_tangents(self.fam, theta)?
            .iter()
            .map(|t| self.compress(&self.ch.schrodinger_apply(t)))
            .collect())
    }

    /// `b(θ) = log ch(φ_θ) − log ch(φ_{θ₀})` on the compressed output.
    fn exponent(&self, theta: &[f64], base: &DensityMatrix) -> Result<HermitianOperator> {
        Ok(self.state(theta)?.log() - base.log())
    }
}

/// Fisher information of the family pushed through `ch`, on the support of
/// the image.
pub fn induced_fisher_matrix<F: ParametricFamily + ?Sized>(
    fam: &F,
    ch: &QuantumChannel,
    theta: &[f64],
) -> Result<DMatrix<f64>> {
    let ind = InducedFamily::new(fam, ch)?;
    let rho = ind.state(theta)?;
    gram(&ind.tangents(theta)?, |x, y| bkm_tangent_form(&rho, x, y))
}

/// Central-difference Hessian of `θ' ↦ S(ρ_θ‖ρ_θ')` at `θ' = θ`, another
/// expression of the BKM Fisher metric.
pub fn fisher_by_relative_entropy<S>(state: S, theta: &[f64], step: f64) -> Result<DMatrix<f64>>
where
    S: Fn(&[f64]) -> Result<DensityMatrix>,
{
    let here = state(theta)?;
    finite_difference_hessian(|t| relative_entropy(&here, &state(t)?), theta, step)
}

/// Induced density `ch(φ_θ)` on the support of the image family.
pub fn induced_state<F: ParametricFamily + ?Sized>(
    fam: &F,
    ch: &QuantumChannel,
    theta: &[f64],
) -> Result<DensityMatrix> {
    InducedFamily::new(fam, ch)?.state(theta)
}

#[derive(Clone, Debug)]
pub struct FisherPoint {
    pub theta: Vec<f64>,
    pub g: DMatrix<f64>,
    pub h: DMatrix<f64>,
    /// Smallest eigenvalue of `g − h`.
    pub gap: f64,
    /// Spectral norm of `g − h`.
    pub deviation: f64,
}

#[derive(Clone, Debug)]
pub struct FisherComparison {
    pub points: Vec<FisherPoint>,
    pub sufficient: bool,
    pub tol: f64,
}

fn symmetric_eigen_range(m: &DMatrix<f64>) -> (f64, f64) {
    if m.nrows() == 0 {
        return (0.0, 0.0);
    }
    let ev = m.clone().symmetric_eigen().eigenvalues;
    let lo = ev.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = ev.iter().map(|x| x.abs()).fold(0.0, f64::max);
    (lo, hi)
}

/// Compares the Fisher information before and after `ch` on every grid
/// point. Equality on the whole grid is read as sufficiency.
pub fn fisher_compare<F: ParametricFamily + ?Sized>(
    fam: &F,
    ch: &QuantumChannel,
    tol: f64,
) -> Result<FisherComparison> {
    let ind = InducedFamily::new(fam, ch)?;
    let mut points = Vec::with_capacity(fam.grid().len());
    for theta in fam.grid() {
        let g = fisher_matrix(fam, theta)?;
        let rho = ind.state(theta)?;
        let h = gram(&ind.tangents(theta)?, |x, y| bkm_tangent_form(&rho, x, y))?;
        let (gap, deviation) = symmetric_eigen_range(&(&g - &h));
        points.push(FisherPoint { theta: theta.clone(), g, h, gap, deviation });
    }
    let sufficient = points.iter().all(|p| p.deviation < tol);
    Ok(FisherComparison { points, sufficient, tol })
}

/// Checks that `φ_θ = [φ_{θ₀}^{σ(b(θ))}]` with `b(θ) = log ch(φ_θ) − log
/// ch(φ_{θ₀})`; the companion identity on the output holds by construction.
/// Returns the verdict and the largest trace-norm residual.
pub fn exp_transfer_check<F: ParametricFamily + ?Sized>(
    fam: &F,
    ch: &QuantumChannel,
    tol: f64,
) -> Result<(bool, f64)> {
    let ind = InducedFamily::new(fam, ch)?;
    let t0 = &fam.grid()[0];
    let base = fam.state(t0)?;
    let base_out = ind.state(t0)?;
    let mut worst: f64 = 0.0;
    for theta in fam.grid() {
        let b = ind.exponent(theta, &base_out)?;
        let lifted = &ind.q * b.matrix() * ind.q.adjoint();
        let a = HermitianOperator::new(ch.heisenberg_apply(&lifted))?;
        let rebuilt = perturbed_state(&base, &a)?;
        let target = fam.state(theta)?;
        worst = worst.max(trace_norm_hermitian(
            &(rebuilt.matrix() - target.matrix()),
        ));
        let out_check = perturbed_state(&base_out, &b)?;
        worst = worst.max(trace_norm_hermitian(
            &(out_check.matrix() - ind.state(theta)?.matrix()),
        ));
    }
    Ok((worst < tol, worst))
}
