//! Relative entropy, relative α-entropies, transition probability, entropy and
//! Connes cocycles.
//!
//! Infinite divergences are returned as `f64::INFINITY` exactly; no large
//! finite surrogate is ever used.

use crate::algebra::StarSubalgebra;
use crate::error::{Error, Result};
use crate::operator::{CMat, DensityMatrix, C64};

/// Weight of `ρ` outside the support of `σ`.
pub fn support_leak(rho: &DensityMatrix, sigma: &DensityMatrix) -> f64 {
    let q = sigma.support_isometry();
    1.0 - (q.adjoint() * rho.matrix() * &q).trace().re
}

fn supported_by(rho: &DensityMatrix, sigma: &DensityMatrix) -> bool {
    support_leak(rho, sigma) <= 1e-12
}

/// `S(ρ‖σ) = Tr ρ(log ρ − log σ)`, or `+∞` when `supp ρ ⊄ supp σ`.
pub fn relative_entropy(rho: &DensityMatrix, sigma: &DensityMatrix) -> Result<f64> {
    check_dims(rho, sigma)?;
    if !supported_by(rho, sigma) {
        return Ok(f64::INFINITY);
    }
    let cross = (rho.matrix() * sigma.log().matrix()).trace().re;
    Ok((-rho.entropy() - cross).max(0.0))
}

fn check_dims(a: &DensityMatrix, b: &DensityMatrix) -> Result<()> {
    if a.dim() != b.dim() {
        return Err(Error::DimensionMismatch { expected: a.dim(), got: b.dim() });
    }
    Ok(())
}

fn check_alpha(alpha: f64) -> Result<()> {
    if !(alpha > -1.0 && alpha < 1.0) || alpha == 0.0 {
        return Err(Error::InvalidParameter(format!("α = {alpha} outside (−1,1)∖{{0}}")));
    }
    Ok(())
}

/// `S_α(ρ₁‖ρ₂) = Tr(I − ρ₂^α ρ₁^{−α})ρ₁ / (α(1−α))`, powers on supports. For
/// negative α a support violation gives `+∞`.
pub fn alpha_entropy(rho1: &DensityMatrix, rho2: &DensityMatrix, alpha: f64) -> Result<f64> {
    check_alpha(alpha)?;
    check_dims(rho1, rho2)?;
    if alpha < 0.0 && !supported_by(rho1, rho2) {
        return Ok(f64::INFINITY);
    }
    let overlap = (rho2.power(alpha).matrix() * rho1.power(1.0 - alpha).matrix())
        .trace()
        .re;
    Ok((1.0 - overlap) / (alpha * (1.0 - alpha)))
}

/// `Tr ρ^{1/2} σ^{1/2}`.
pub fn transition_probability(phi: &DensityMatrix, omega: &DensityMatrix) -> Result<f64> {
    check_dims(phi, omega)?;
    let v = (phi.sqrt().matrix() * omega.sqrt().matrix()).trace().re;
    Ok(v.clamp(0.0, 1.0))
}

/// von Neumann entropy.
pub fn state_entropy(phi: &DensityMatrix) -> f64 {
    phi.entropy()
}

/// Entropy of the restriction of `ρ` to a subalgebra, measured against the
/// canonical trace of the subalgebra (minimal projections have trace one).
pub fn restricted_entropy(alg: &StarSubalgebra, rho: &DensityMatrix) -> f64 {
    alg.block_partial_traces(rho.matrix())
        .iter()
        .map(|x| {
            let h = (x + x.adjoint()) * C64::new(0.5, 0.0);
            h.symmetric_eigenvalues()
                .iter()
                .filter(|&&l| l > 1e-300)
                .map(|&l| -l * l.ln())
                .sum::<f64>()
        })
        .sum()
}

/// `[Dφ, Dω]_t = ρ_φ^{it} ρ_ω^{−it}`, each power on its own support.
pub fn connes_cocycle(phi: &DensityMatrix, omega: &DensityMatrix, t: f64) -> Result<CMat> {
    check_dims(phi, omega)?;
    Ok(phi.imaginary_power(t) * omega.imaginary_power(-t))
}

/// `Δ(ψ/ω): x ↦ ρ_ψ x ρ_ω^{−1}` on the Hilbert–Schmidt space, restricted to
/// operators whose right support lies in `supp ω`.
#[derive(Clone, Debug)]
pub struct RelativeModularOperator {
    left: DensityMatrix,
    right: DensityMatrix,
}

impl RelativeModularOperator {
    pub fn new(left: &DensityMatrix, right: &DensityMatrix) -> Result<Self> {
        check_dims(left, right)?;
        Ok(RelativeModularOperator { left: left.clone(), right: right.clone() })
    }

    pub fn apply(&self, x: &CMat) -> CMat {
        self.left.matrix() * x * self.right.power(-1.0).matrix()
    }

    /// `f(Δ)x` through the joint eigenbasis `|u_i⟩⟨v_j|` with eigenvalue
    /// `λ_i/μ_j`. Left-kernel directions use `f0 = f(0)`; `None` marks it as
    /// infinite, in which case any weight there yields an error.
    pub fn apply_fn<F>(&self, f: F, f0: Option<f64>, x: &CMat) -> Result<CMat>
    where
        F: Fn(f64) -> f64,
    {
        let ls = self.left.spectrum();
        let rs = self.right.spectrum();
        let (lu, rv) = (&ls.eigenvectors, &rs.eigenvectors);
        let coeff = lu.adjoint() * x * rv;
        let lthr = ls.support_threshold();
        let mut out = CMat::zeros(coeff.nrows(), coeff.ncols());
        for j in rs.support_indices() {
            let mu = rs.eigenvalues[j];
            for i in 0..ls.dim() {
                let c = coeff[(i, j)];
                let lam = ls.eigenvalues[i];
                let w = if lam > lthr {
                    f(lam / mu)
                } else if c.norm() <= 1e-14 {
                    0.0
                } else {
                    f0.ok_or(Error::FunctionUndefined(0.0))?
                };
                out[(i, j)] = c * w;
            }
        }
        Ok(lu * out * rv.adjoint())
    }

    /// `⟨ξ_ω, f(Δ(ψ/ω)) ξ_ω⟩` with `ξ_ω = ρ_ω^{1/2}`.
    pub fn quasi_entropy<F>(&self, f: F, f0: Option<f64>) -> Result<f64>
    where
        F: Fn(f64) -> f64,
    {
        let xi = self.right.sqrt().into_matrix();
        let img = self.apply_fn(f, f0, &xi)?;
        Ok((xi.adjoint() * img).trace().re)
    }
}

/// `S_α(ρ₁‖ρ₂)` evaluated as the quasi-entropy `⟨ξ₁, f_α(Δ(ρ₂/ρ₁)) ξ₁⟩` with
/// `f_α(x) = (1 − x^α)/(α(1−α))`.
pub fn alpha_entropy_quasi(rho1: &DensityMatrix, rho2: &DensityMatrix, alpha: f64) -> Result<f64> {
    check_alpha(alpha)?;
    let delta = RelativeModularOperator::new(rho2, rho1)?;
    let k = alpha * (1.0 - alpha);
    let f0 = if alpha > 0.0 { Some(1.0 / k) } else { None };
    match delta.quasi_entropy(|x| (1.0 - x.powf(alpha)) / k, f0) {
        Err(Error::FunctionUndefined(_)) => Ok(f64::INFINITY),
        other => other,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::operator::{c, identity, max_abs};
    use crate::random::{random_density, random_faithful_density, rng};

    fn skewed() -> DensityMatrix {
        DensityMatrix::diagonal(&[2.0 / 3.0, 1.0 / 3.0]).unwrap()
    }

    fn binary_entropy() -> f64 {
        -(1.0 / 3.0f64) * (1.0 / 3.0f64).ln() - (2.0 / 3.0f64) * (2.0 / 3.0f64).ln()
    }

    #[test]
    fn relative_entropy_examples() {
        let mut g = rng(31);
        let rho = random_density(&mut g, 3);
        assert!(relative_entropy(&rho, &rho).unwrap().abs() < 1e-10);
        let v = relative_entropy(&skewed(), &DensityMatrix::maximally_mixed(2)).unwrap();
        assert!((v - (2f64.ln() - binary_entropy())).abs() < 1e-12);
        assert!((v - 0.056_633).abs() < 1e-5);
        let a = DensityMatrix::pure(&[c(1.0, 0.0), c(0.0, 0.0)]).unwrap();
        let b = DensityMatrix::pure(&[c(0.0, 0.0), c(1.0, 0.0)]).unwrap();
        assert_eq!(relative_entropy(&a, &b).unwrap(), f64::INFINITY);
    }

    #[test]
    fn alpha_entropy_examples() {
        let mut g = rng(32);
        let rho = random_faithful_density(&mut g, 3, 0.1);
        for a in [-0.5, 0.5, 0.3] {
            assert!(alpha_entropy(&rho, &rho, a).unwrap().abs() < 1e-10);
        }
        let v = alpha_entropy(&skewed(), &DensityMatrix::maximally_mixed(2), 0.5).unwrap();
        let expect = 4.0 * (1.0 - ((1.0f64 / 3.0).sqrt() + (1.0f64 / 6.0).sqrt()));
        assert!((v - expect).abs() < 1e-12);
        assert!((v - 0.0577).abs() < 1e-4);
        assert!(alpha_entropy(&rho, &rho, 1.0).is_err());
        assert!(alpha_entropy(&rho, &rho, 0.0).is_err());
    }

    #[test]
    fn alpha_limit_approaches_relative_entropy() {
        let mut g = rng(33);
        for _ in 0..10 {
            let a = random_faithful_density(&mut g, 2, 0.2);
            let b = random_faithful_density(&mut g, 2, 0.2);
            let s = relative_entropy(&a, &b).unwrap();
            let sa = alpha_entropy(&a, &b, 0.01).unwrap();
            assert!((s - sa).abs() < 0.05, "{s} {sa}");
        }
    }

    #[test]
    fn quasi_entropy_route_agrees() {
        let mut g = rng(34);
        for _ in 0..10 {
            let a = random_density(&mut g, 3);
            let b = random_density(&mut g, 3);
            for alpha in [-0.5, 0.5, 0.8] {
                let direct = alpha_entropy(&a, &b, alpha).unwrap();
                let quasi = alpha_entropy_quasi(&a, &b, alpha).unwrap();
                assert!((direct - quasi).abs() < 1e-8);
            }
        }
    }

    #[test]
    fn transition_probability_examples() {
        let mut g = rng(35);
        let rho = random_density(&mut g, 3);
        assert!((transition_probability(&rho, &rho).unwrap() - 1.0).abs() < 1e-10);
        let a = DensityMatrix::pure(&[c(1.0, 0.0), c(0.0, 0.0)]).unwrap();
        let b = DensityMatrix::pure(&[c(0.0, 0.0), c(1.0, 0.0)]).unwrap();
        assert!(transition_probability(&a, &b).unwrap().abs() < 1e-12);
        let v = transition_probability(&skewed(), &DensityMatrix::maximally_mixed(2)).unwrap();
        assert!((v - 0.9856).abs() < 1e-4);
    }

    #[test]
    fn entropy_examples() {
        let a = DensityMatrix::pure(&[c(0.6, 0.0), c(0.0, 0.8)]).unwrap();
        assert!(state_entropy(&a).abs() < 1e-12);
        let m = DensityMatrix::maximally_mixed(5);
        assert!((state_entropy(&m) - 5f64.ln()).abs() < 1e-12);
        assert!((state_entropy(&skewed()) - binary_entropy()).abs() < 1e-12);
        assert!((binary_entropy() - 0.6365).abs() < 1e-4);
    }

    #[test]
    fn cocycle_examples() {
        let mut g = rng(36);
        let phi = random_faithful_density(&mut g, 2, 0.1);
        let omega = random_faithful_density(&mut g, 2, 0.1);
        let u0 = connes_cocycle(&phi, &omega, 0.0).unwrap();
        assert!(max_abs(&(u0 - identity(2))) < 1e-12);
        let same = connes_cocycle(&omega, &omega, 0.8).unwrap();
        assert!(max_abs(&(same - identity(2))) < 1e-12);
        let (t, s) = (0.3, 0.4);
        let lhs = connes_cocycle(&phi, &omega, t + s).unwrap();
        let us = connes_cocycle(&phi, &omega, s).unwrap();
        let wt = omega.imaginary_power(t);
        let rhs = connes_cocycle(&phi, &omega, t).unwrap() * (&wt * us * wt.adjoint());
        assert!(max_abs(&(lhs - rhs)) < 1e-9);
        let ut = connes_cocycle(&phi, &omega, t).unwrap();
        assert!(max_abs(&(&ut * ut.adjoint() - identity(2))) < 1e-12);
    }

    #[test]
    fn cocycle_of_rank_deficient_state_is_support_projection_at_zero() {
        let phi = DensityMatrix::pure(&[c(1.0, 0.0), c(0.0, 0.0)]).unwrap();
        let u0 = connes_cocycle(&phi, &DensityMatrix::maximally_mixed(2), 0.0).unwrap();
        assert!(max_abs(&(u0 - phi.support_projection())) < 1e-12);
    }
}
