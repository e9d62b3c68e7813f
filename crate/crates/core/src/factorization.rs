//! Block factorization of a family across a modular-invariant subalgebra and
//! its commutant, with the tensor-power and pure-state demonstrations.

use nalgebra::DVector;
use serde::Serialize;

use crate::algebra::{generated_algebra, is_modular_invariant, StarSubalgebra};
use crate::error::{Error, Result};
use crate::operator::{
    identity, kron, kron_all, partial_trace_matrix, r, trace_norm_hermitian, zeros, CMat,
    DensityMatrix, C64,
};
use crate::schema::JsonMatrix;
use crate::sufficiency::{
    build_experiment, minimal_sufficient_subalgebra, SufficiencyConfig, StatisticalExperiment,
};

/// `U*ρ_θU = ⊕_n φ_θ(p_n) ρ^L_n(θ) ⊗ ρ^R_n`.
#[derive(Clone, Debug)]
pub struct Factorization {
    pub blocks: Vec<(usize, usize)>,
    pub basis_change: CMat,
    pub central_projections: Vec<CMat>,
    /// `weights[θ][n] = φ_θ(p_n)`.
    pub weights: Vec<Vec<f64>>,
    /// `left[θ][n]`.
    pub left: Vec<Vec<DensityMatrix>>,
    /// θ-independent right factors, read off the dominating state.
    pub right: Vec<DensityMatrix>,
    /// Relative commutant, `⊕ I ⊗ B(C^{m_n})`.
    pub commutant: StarSubalgebra,
    /// Trace-norm reconstruction error per θ.
    pub residuals: Vec<f64>,
}

#[derive(Clone, Debug, Serialize)]
pub struct BlockReport {
    pub left_dim: usize,
    pub right_dim: usize,
    pub right_factor: JsonMatrix,
}

#[derive(Clone, Debug, Serialize)]
pub struct MemberReport {
    pub theta: Vec<f64>,
    pub weights: Vec<f64>,
    pub left_factors: Vec<JsonMatrix>,
    pub residual: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct FactorizationReport {
    pub blocks: Vec<BlockReport>,
    pub members: Vec<MemberReport>,
    pub max_residual: f64,
}

fn block_state(x: &CMat) -> Result<(f64, DensityMatrix)> {
    let w = x.trace().re;
    let n = x.nrows();
    if w <= 1e-14 {
        return Ok((w.max(0.0), DensityMatrix::maximally_mixed(n)));
    }
    Ok((w, DensityMatrix::from_unnormalized(x)?))
}

fn offsets(blocks: &[(usize, usize)]) -> Vec<usize> {
    blocks
        .iter()
        .scan(0, |acc, &(d, m)| {
            let o = *acc;
            *acc += d * m;
            Some(o)
        })
        .collect()
}

impl Factorization {
    /// `U (⊕ w_n ρ^L_n ⊗ ρ^R_n) U*` for member `idx`.
    pub fn rebuild(&self, idx: usize) -> CMat {
        let n = self.basis_change.nrows();
        let mut inner = zeros(n, n);
        for (k, off) in offsets(&self.blocks).into_iter().enumerate() {
            let (d, m) = self.blocks[k];
            let x = kron(self.left[idx][k].matrix(), self.right[k].matrix())
                * r(self.weights[idx][k]);
            inner.view_mut((off, off), (d * m, d * m)).copy_from(&x);
        }
        &self.basis_change * inner * self.basis_change.adjoint()
    }

    pub fn max_residual(&self) -> f64 {
        self.residuals.iter().cloned().fold(0.0, f64::max)
    }

    pub fn report(&self, thetas: &[Vec<f64>]) -> FactorizationReport {
        FactorizationReport {
            blocks: self
                .blocks
                .iter()
                .zip(&self.right)
                .map(|(&(d, m), rf)| BlockReport {
                    left_dim: d,
                    right_dim: m,
                    right_factor: JsonMatrix::from_matrix(rf.matrix()),
                })
                .collect(),
            members: (0..self.weights.len())
                .map(|i| MemberReport {
                    theta: thetas.get(i).cloned().unwrap_or_default(),
                    weights: self.weights[i].clone(),
                    left_factors: self.left[i]
                        .iter()
                        .map(|l| JsonMatrix::from_matrix(l.matrix()))
                        .collect(),
                    residual: self.residuals[i],
                })
                .collect(),
            max_residual: self.max_residual(),
        }
    }
}

/// Splits every member across the blocks of a modular-invariant subalgebra.
/// Fails when the subalgebra is not invariant under the modular group of the
/// dominating state, or when the factorized form does not reproduce the
/// family (residual above `1e-6`), which happens exactly when the subalgebra
/// is not sufficient.
pub fn factorize(exp: &StatisticalExperiment, alg: &StarSubalgebra) -> Result<Factorization> {
    if alg.ambient_dim() != exp.dim() {
        return Err(Error::DimensionMismatch { expected: exp.dim(), got: alg.ambient_dim() });
    }
    let omega = exp.omega();
    if !is_modular_invariant(alg, omega)? {
        return Err(Error::InvalidParameter(
            "subalgebra is not invariant under the modular group of the dominating state".into(),
        ));
    }
    let blocks = alg.blocks().to_vec();
    let right = alg
        .diagonal_blocks(omega.matrix())
        .iter()
        .zip(&blocks)
        .map(|(y, &(d, m))| {
            DensityMatrix::from_unnormalized(&partial_trace_matrix(y, &[d, m], &[1])?)
        })
        .collect::<Result<Vec<_>>>()?;
    let mut weights = Vec::with_capacity(exp.len());
    let mut left = Vec::with_capacity(exp.len());
    for s in exp.states() {
        let mut w = Vec::with_capacity(blocks.len());
        let mut l = Vec::with_capacity(blocks.len());
        for (y, &(d, m)) in alg.diagonal_blocks(s.matrix()).iter().zip(&blocks) {
            let (wk, lk) = block_state(&partial_trace_matrix(y, &[d, m], &[0])?)?;
            w.push(wk);
            l.push(lk);
        }
        weights.push(w);
        left.push(l);
    }
    let mut f = Factorization {
        blocks,
        basis_change: alg.unitary().clone(),
        central_projections: alg.central_projections(),
        weights,
        left,
        right,
        commutant: alg.commutant(),
        residuals: Vec::new(),
    };
    f.residuals = exp
        .states()
        .iter()
        .enumerate()
        .map(|(i, s)| trace_norm_hermitian(&(f.rebuild(i) - s.matrix())))
        .collect();
    let worst = f.max_residual();
    if worst > 1e-6 {
        return Err(Error::Inconsistency(format!(
            "family does not factorize across the subalgebra (residual {worst:.3e})"
        )));
    }
    Ok(f)
}

/// Unitary permuting tensor positions `i` and `i+1` of `(C^d)^{⊗n}`.
pub fn transposition_unitary(d: usize, n: usize, i: usize) -> CMat {
    let dim = d.pow(n as u32);
    let mut u = zeros(dim, dim);
    let mut digits = vec![0usize; n];
    for idx in 0..dim {
        let mut rest = idx;
        for p in (0..n).rev() {
            digits[p] = rest % d;
            rest /= d;
        }
        digits.swap(i, i + 1);
        let target = digits.iter().fold(0, |acc, &x| acc * d + x);
        digits.swap(i, i + 1);
        u[(target, idx)] = r(1.0);
    }
    u
}

#[derive(Clone, Debug)]
pub struct SymmetricPower {
    pub experiment: StatisticalExperiment,
    /// Commutant of the permutation representation.
    pub algebra: StarSubalgebra,
    /// Algebra generated by the permutation unitaries.
    pub permutations: StarSubalgebra,
    pub factorization: Factorization,
}

/// The family `{ρ_θ^{⊗n}}` with the commutant of the symmetric group action.
pub fn symmetric_power_experiment(
    family: &[DensityMatrix],
    n: usize,
) -> Result<SymmetricPower> {
    let first = family.first().ok_or(Error::EmptyFamily)?;
    let d = first.dim();
    if n == 0 {
        return Err(Error::InvalidParameter("tensor power must be positive".into()));
    }
    if n > 4 || (d as f64).powi(n as i32) > 256.0 {
        return Err(Error::SizeCap(format!("d = {d}, n = {n} exceeds d^n ≤ 256, n ≤ 4")));
    }
    let dim = d.pow(n as u32);
    let states = family
        .iter()
        .enumerate()
        .map(|(i, s)| {
            let factors = vec![s.matrix().clone(); n];
            Ok((vec![i as f64], DensityMatrix::from_unnormalized(&kron_all(&factors))?))
        })
        .collect::<Result<Vec<_>>>()?;
    let experiment = build_experiment(states, None)?;
    let gens: Vec<CMat> = (0..n.saturating_sub(1)).map(|i| transposition_unitary(d, n, i)).collect();
    let permutations = if gens.is_empty() {
        StarSubalgebra::scalars(dim)
    } else {
        generated_algebra(&gens, dim)?
    };
    let algebra = permutations.commutant();
    let factorization = factorize(&experiment, &algebra)?;
    Ok(SymmetricPower { experiment, algebra, permutations, factorization })
}

/// Bipartition check of one vector: top Schmidt weight and right factor.
#[derive(Clone, Debug)]
pub struct SchmidtSplit {
    pub schmidt_fidelity: f64,
    pub left: DVector<C64>,
    pub right: DVector<C64>,
}

/// Schmidt decomposition of `ξ ∈ C^{dl} ⊗ C^{dr}`; reports the leading term.
pub fn schmidt_split(xi: &DVector<C64>, dl: usize, dr: usize) -> Result<SchmidtSplit> {
    if xi.len() != dl * dr {
        return Err(Error::DimensionMismatch { expected: dl * dr, got: xi.len() });
    }
    let norm = xi.norm();
    if norm == 0.0 {
        return Err(Error::InvalidParameter("zero vector".into()));
    }
    let m = CMat::from_fn(dl, dr, |a, b| xi[a * dr + b] / r(norm));
    let svd = m.svd(true, true);
    let u = svd.u.as_ref().expect("requested");
    let vt = svd.v_t.as_ref().expect("requested");
    let (k, s0) = svd
        .singular_values
        .iter()
        .enumerate()
        .fold((0, -1.0), |best, (i, &s)| if s > best.1 { (i, s) } else { best });
    Ok(SchmidtSplit {
        schmidt_fidelity: s0 * s0,
        left: u.column(k).into_owned(),
        right: vt.row(k).transpose(),
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct TensorSplitReport {
    pub left_dim: usize,
    pub right_dim: usize,
    /// Smallest weight of the leading Schmidt term over the family.
    pub min_schmidt_fidelity: f64,
    /// Smallest `|⟨ξ_R(θ), ξ_R(θ₀)⟩|²` over the family.
    pub min_right_fidelity: f64,
    pub right_factor: Vec<[f64; 2]>,
    pub detected: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct PureFamilyReport {
    pub ambient_dim: usize,
    pub support_dim: usize,
    pub orthogonality_threshold: f64,
    pub orthogonal_pairs: Vec<[usize; 2]>,
    /// Blocks of the minimal sufficient subalgebra on the support.
    pub minimal_blocks: Vec<[usize; 2]>,
    /// The minimal algebra is a single factor `B(H_L) ⊗ I`.
    pub single_factor: bool,
    /// The single factor has a nontrivial multiplicity space.
    pub nontrivial_factorization: bool,
    /// Split of the support inside the minimal algebra's own tensor
    /// structure.
    pub algebra_split: Option<TensorSplitReport>,
    /// Split across a requested bipartition of the ambient space.
    pub bipartition_split: Option<TensorSplitReport>,
}

const ORTHO_TOL: f64 = 1e-10;

fn split_family(vectors: &[DVector<C64>], dl: usize, dr: usize) -> Result<TensorSplitReport> {
    let splits = vectors
        .iter()
        .map(|v| schmidt_split(v, dl, dr))
        .collect::<Result<Vec<_>>>()?;
    let min_schmidt = splits.iter().map(|s| s.schmidt_fidelity).fold(1.0, f64::min);
    let r0 = &splits[0].right;
    let min_right = splits
        .iter()
        .map(|s| r0.dotc(&s.right).norm_sqr())
        .fold(1.0, f64::min);
    let detected = min_schmidt > 1.0 - 1e-8 && min_right > 1.0 - 1e-8;
    Ok(TensorSplitReport {
        left_dim: dl,
        right_dim: dr,
        min_schmidt_fidelity: min_schmidt,
        min_right_fidelity: min_right,
        right_factor: r0.iter().map(|z| [z.re, z.im]).collect(),
        detected,
    })
}

/// Pure family `{ξ_θ}`: minimal sufficient subalgebra, orthogonality
/// structure and tensor splits. `bipartition` optionally names an ambient
/// split `C^{dl} ⊗ C^{dr}` to test for a common right factor.
pub fn pure_family_analysis(
    vectors: &[DVector<C64>],
    bipartition: Option<(usize, usize)>,
    cfg: &SufficiencyConfig,
) -> Result<PureFamilyReport> {
    let first = vectors.first().ok_or(Error::EmptyFamily)?;
    let n = first.len();
    let mut unit = Vec::with_capacity(vectors.len());
    for v in vectors {
        if v.len() != n {
            return Err(Error::DimensionMismatch { expected: n, got: v.len() });
        }
        let norm = v.norm();
        if norm.is_nan() || norm <= 1e-12 {
            return Err(Error::InvalidParameter("degenerate span: zero vector".into()));
        }
        unit.push(v.unscale(norm));
    }
    let mut orthogonal_pairs = Vec::new();
    for i in 0..unit.len() {
        for j in i + 1..unit.len() {
            if unit[i].dotc(&unit[j]).norm() < ORTHO_TOL {
                orthogonal_pairs.push([i, j]);
            }
        }
    }
    let states = unit
        .iter()
        .enumerate()
        .map(|(i, v)| Ok((vec![i as f64], DensityMatrix::pure(v.as_slice())?)))
        .collect::<Result<Vec<_>>>()?;
    let exp = build_experiment(states, None)?;
    let minimal = minimal_sufficient_subalgebra(&exp, cfg)?;
    let alg = &minimal.on_support;
    let single_factor = alg.blocks().len() == 1;
    let algebra_split = if single_factor {
        let (dl, dr) = alg.blocks()[0];
        let rotated: Vec<DVector<C64>> = unit
            .iter()
            .map(|v| alg.unitary().adjoint() * minimal.support.adjoint() * v)
            .collect();
        Some(split_family(&rotated, dl, dr)?)
    } else {
        None
    };
    let bipartition_split = match bipartition {
        Some((dl, dr)) => Some(split_family(&unit, dl, dr)?),
        None => None,
    };
    Ok(PureFamilyReport {
        ambient_dim: n,
        support_dim: minimal.support.ncols(),
        orthogonality_threshold: ORTHO_TOL,
        orthogonal_pairs,
        minimal_blocks: alg.blocks().iter().map(|&(d, m)| [d, m]).collect(),
        single_factor,
        nontrivial_factorization: single_factor && alg.blocks()[0].1 > 1,
        algebra_split,
        bipartition_split,
    })
}

/// `Σ w_k ρ^L_k ⊗ ρ^R_k` weight of the symmetric subspace for `ρ^{⊗2}`.
pub fn symmetric_weight_oracle(rho: &DensityMatrix) -> f64 {
    let d = rho.dim();
    let swap = transposition_unitary(d, 2, 0);
    let sym = (identity(d * d) + swap) * r(0.5);
    (sym * kron(rho.matrix(), rho.matrix())).trace().re
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::divergence::{restricted_entropy, state_entropy};
    use crate::operator::max_abs;
    use crate::random::{random_faithful_density, random_unit_vector, rng};
    use crate::sufficiency::subalgebra_sufficient;

    fn family(states: Vec<DensityMatrix>) -> StatisticalExperiment {
        build_experiment(
            states.into_iter().enumerate().map(|(i, s)| (vec![i as f64], s)).collect(),
            None,
        )
        .unwrap()
    }

    #[test]
    fn full_algebra_single_block() {
        let mut g = rng(60);
        let exp = family((0..3).map(|_| random_faithful_density(&mut g, 3, 0.1)).collect());
        let f = factorize(&exp, &StarSubalgebra::full(3)).unwrap();
        assert_eq!(f.blocks, vec![(3, 1)]);
        for (i, s) in exp.states().iter().enumerate() {
            assert!(max_abs(&(f.left[i][0].matrix() - s.matrix())) < 1e-12);
        }
        assert!(f.max_residual() < 1e-12);
    }

    #[test]
    fn product_family_right_factor() {
        let mut g = rng(61);
        let tau = random_faithful_density(&mut g, 2, 0.1);
        let exp = family(
            (0..3).map(|_| random_faithful_density(&mut g, 3, 0.1).tensor(&tau)).collect(),
        );
        let alg = StarSubalgebra::tensor_left(3, 2);
        let f = factorize(&exp, &alg).unwrap();
        assert!(max_abs(&(f.right[0].matrix() - tau.matrix())) < 1e-10);
        assert!(f.max_residual() < 1e-10);
        for i in 0..exp.len() {
            let other = exp.states()[i].partial_trace(&[3, 2], &[1]).unwrap();
            assert!(trace_norm_hermitian(&(other.matrix() - f.right[0].matrix())) < 1e-8);
        }
        let w = exp.omega();
        let bound = state_entropy(w) + 1e-9;
        assert!(restricted_entropy(&alg, w) <= bound);
        assert!(restricted_entropy(&f.commutant, w) <= bound);
    }

    #[test]
    fn diagonal_family_weights() {
        let probs = [[0.2, 0.5, 0.3], [0.6, 0.1, 0.3]];
        let exp = family(probs.iter().map(|p| DensityMatrix::diagonal(p).unwrap()).collect());
        let f = factorize(&exp, &StarSubalgebra::diagonal(3)).unwrap();
        for (i, p) in probs.iter().enumerate() {
            for (k, &x) in p.iter().enumerate() {
                assert!((f.weights[i][k] - x).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn insufficient_subalgebra_fails() {
        let mut g = rng(62);
        let exp = family((0..2).map(|_| random_faithful_density(&mut g, 4, 0.1)).collect());
        let alg = StarSubalgebra::tensor_left(2, 2);
        let v = subalgebra_sufficient(&exp, &alg, &Default::default()).unwrap();
        assert!(!v.sufficient);
        assert!(matches!(
            factorize(&exp, &alg),
            Err(Error::InvalidParameter(_)) | Err(Error::Inconsistency(_))
        ));
    }

    #[test]
    fn schur_weyl_two_copies() {
        let rho = DensityMatrix::diagonal(&[2.0 / 3.0, 1.0 / 3.0]).unwrap();
        let sp = symmetric_power_experiment(std::slice::from_ref(&rho), 2).unwrap();
        assert_eq!(sp.algebra.blocks(), &[(3, 1), (1, 1)]);
        assert!((sp.factorization.weights[0][0] - 7.0 / 9.0).abs() < 1e-10);
        assert!((symmetric_weight_oracle(&rho) - 7.0 / 9.0).abs() < 1e-12);
        let sp = symmetric_power_experiment(&[DensityMatrix::maximally_mixed(2)], 2).unwrap();
        assert!((sp.factorization.weights[0][0] - 0.75).abs() < 1e-10);
    }

    #[test]
    fn schur_weyl_three_copies() {
        let mut g = rng(63);
        let fam: Vec<DensityMatrix> = (0..2).map(|_| random_faithful_density(&mut g, 2, 0.1)).collect();
        let sp = symmetric_power_experiment(&fam, 3).unwrap();
        assert_eq!(sp.algebra.blocks(), &[(4, 1), (2, 2)]);
        assert!(sp.factorization.max_residual() < 1e-8);
        let v = subalgebra_sufficient(&sp.experiment, &sp.algebra, &Default::default()).unwrap();
        assert!(v.sufficient && v.concordant);
    }

    #[test]
    fn schur_weyl_trivial_and_capped() {
        let rho = DensityMatrix::diagonal(&[0.6, 0.4]).unwrap();
        let sp = symmetric_power_experiment(std::slice::from_ref(&rho), 1).unwrap();
        assert_eq!(sp.algebra.blocks(), &[(2, 1)]);
        assert!(matches!(symmetric_power_experiment(&[rho], 5), Err(Error::SizeCap(_))));
    }

    #[test]
    fn pure_family_dichotomy() {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let zero = DVector::from_vec(vec![r(1.0), r(0.0)]);
        let plus = DVector::from_vec(vec![r(s), r(s)]);
        let rep = pure_family_analysis(&[zero.clone(), plus], None, &Default::default()).unwrap();
        assert_eq!(rep.minimal_blocks, vec![[2, 1]]);
        assert!(rep.orthogonal_pairs.is_empty());
        assert!(rep.single_factor && !rep.nontrivial_factorization);
        let rep = pure_family_analysis(&[zero.clone(), zero], None, &Default::default()).unwrap();
        assert_eq!(rep.support_dim, 1);
        assert_eq!(rep.minimal_blocks, vec![[1, 1]]);
    }

    #[test]
    fn pure_product_family_split() {
        let mut g = rng(64);
        let phi = random_unit_vector(&mut g, 3);
        let lefts: Vec<DVector<C64>> = (0..3).map(|_| random_unit_vector(&mut g, 2)).collect();
        let vecs: Vec<DVector<C64>> = lefts
            .iter()
            .map(|l| DVector::from_iterator(6, kron(&CMat::from_column_slice(2, 1, l.as_slice()), &CMat::from_column_slice(3, 1, phi.as_slice())).iter().cloned()))
            .collect();
        let rep = pure_family_analysis(&vecs, Some((2, 3)), &Default::default()).unwrap();
        let split = rep.bipartition_split.unwrap();
        assert!(split.detected);
        let right = DVector::from_iterator(3, split.right_factor.iter().map(|z| C64::new(z[0], z[1])));
        assert!(right.dotc(&phi).norm_sqr() > 1.0 - 1e-8);
        assert_eq!(rep.support_dim, 2);
    }
}
