//! Sufficiency of subalgebras and coarse-grainings for a finite family of
//! states, decided by several independent criteria that must agree.

use std::collections::BTreeMap;

use serde::Serialize;

use crate::algebra::{
    generalized_conditional_expectation, generalized_recovery, generated_algebra,
    restrict_density, trace_conditional_expectation, StarSubalgebra,
};
use crate::channel::{
    compress_to_support, fixed_point_subalgebras, multiplicative_domain, petz_dual,
    QuantumChannel,
};
use crate::divergence::{alpha_entropy, connes_cocycle, relative_entropy, support_leak};
use crate::error::{Error, Result};
use crate::operator::{identity, trace_norm_hermitian, zeros, CMat, DensityMatrix, C64};
use crate::schema::{ChannelJson, ExperimentJson};

/// Finite family `{ρ_θ}` with dominating state `ω = Σ λ_n ρ_n`.
#[derive(Clone, Debug)]
pub struct StatisticalExperiment {
    thetas: Vec<Vec<f64>>,
    states: Vec<DensityMatrix>,
    weights: Vec<f64>,
    omega: DensityMatrix,
}

/// Assembles an experiment; weights default to uniform and must be positive.
pub fn build_experiment(
    states: Vec<(Vec<f64>, DensityMatrix)>,
    weights: Option<Vec<f64>>,
) -> Result<StatisticalExperiment> {
    if states.is_empty() {
        return Err(Error::EmptyFamily);
    }
    let n = states[0].1.dim();
    if let Some(bad) = states.iter().find(|(_, s)| s.dim() != n) {
        return Err(Error::DimensionMismatch { expected: n, got: bad.1.dim() });
    }
    let k = states.len();
    let weights = match weights {
        None => vec![1.0 / k as f64; k],
        Some(w) => {
            if w.len() != k {
                return Err(Error::InvalidParameter(format!(
                    "{} weights for {k} states",
                    w.len()
                )));
            }
            if w.iter().any(|&x| !x.is_finite() || x <= 0.0) {
                return Err(Error::InvalidParameter("weights must be positive".into()));
            }
            let total: f64 = w.iter().sum();
            if (total - 1.0).abs() > 1e-9 {
                return Err(Error::InvalidParameter(format!("weights sum to {total}")));
            }
            w.iter().map(|x| x / total).collect()
        }
    };
    let refs: Vec<&DensityMatrix> = states.iter().map(|(_, s)| s).collect();
    let omega = DensityMatrix::mixture(&refs, &weights)?;
    for (_, s) in &states {
        let leak = support_leak(s, &omega);
        if leak > 1e-9 {
            return Err(Error::SupportMismatch(format!(
                "state has weight {leak:.3e} outside the dominating support"
            )));
        }
    }
    let (thetas, states) = states.into_iter().unzip();
    Ok(StatisticalExperiment { thetas, states, weights, omega })
}

impl StatisticalExperiment {
    pub fn from_json(j: &ExperimentJson) -> Result<Self> {
        let mut states = Vec::with_capacity(j.states.len());
        for s in &j.states {
            let m = s.density.to_matrix()?;
            if m.nrows() != j.dim {
                return Err(Error::DimensionMismatch { expected: j.dim, got: m.nrows() });
            }
            states.push((s.theta.clone(), DensityMatrix::new(m)?));
        }
        build_experiment(states, j.weights.clone())
    }

    pub fn dim(&self) -> usize {
        self.omega.dim()
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn states(&self) -> &[DensityMatrix] {
        &self.states
    }

    pub fn thetas(&self) -> &[Vec<f64>] {
        &self.thetas
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn omega(&self) -> &DensityMatrix {
        &self.omega
    }

    /// The experiment `{V*ρ_θV}` on the range of an isometry containing the
    /// dominating support.
    pub fn compressed(&self, v: &CMat) -> Result<StatisticalExperiment> {
        let states = self
            .thetas
            .iter()
            .zip(&self.states)
            .map(|(t, s)| Ok((t.clone(), s.compress(v)?)))
            .collect::<Result<Vec<_>>>()?;
        build_experiment(states, Some(self.weights.clone()))
    }

    /// Image of the family under a channel, with the same weights.
    pub fn pushforward(&self, ch: &QuantumChannel) -> Result<StatisticalExperiment> {
        let states = self
            .thetas
            .iter()
            .zip(&self.states)
            .map(|(t, s)| Ok((t.clone(), ch.schrodinger(s)?)))
            .collect::<Result<Vec<_>>>()?;
        build_experiment(states, Some(self.weights.clone()))
    }
}

/// Criterion parameters.
#[derive(Clone, Debug, Serialize)]
pub struct SufficiencyConfig {
    pub tol: f64,
    pub alphas: Vec<f64>,
    pub t_sample: Vec<f64>,
    pub seed: u64,
}

impl Default for SufficiencyConfig {
    fn default() -> Self {
        SufficiencyConfig {
            tol: 1e-8,
            alphas: vec![-0.5, 0.5],
            t_sample: vec![0.37, 0.71, 1.13],
            seed: 20_240_917,
        }
    }
}

#[derive(Clone, Debug, Serialize, PartialEq)]
pub struct CriterionResult {
    pub passed: bool,
    pub residual: f64,
}

impl CriterionResult {
    fn new(residual: f64, threshold: f64) -> Self {
        CriterionResult { passed: residual <= threshold, residual }
    }
}

#[derive(Clone, Debug)]
pub struct SufficiencyVerdict {
    pub sufficient: bool,
    /// Whether every criterion returned the same answer.
    pub concordant: bool,
    pub criteria: BTreeMap<String, CriterionResult>,
    /// Recovery map: for a channel, from its output back to its input; for a
    /// subalgebra, the generalized conditional expectation.
    pub witness: Option<QuantumChannel>,
}

#[derive(Clone, Debug, Serialize)]
pub struct VerdictReport {
    pub sufficient: bool,
    pub concordant: bool,
    pub criteria: BTreeMap<String, CriterionResult>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub witness: Option<ChannelJson>,
}

impl SufficiencyVerdict {
    fn decide(criteria: BTreeMap<String, CriterionResult>, tie_break: &str) -> (bool, bool) {
        let yes = criteria.values().filter(|c| c.passed).count();
        let no = criteria.len() - yes;
        let sufficient = match yes.cmp(&no) {
            std::cmp::Ordering::Greater => true,
            std::cmp::Ordering::Less => false,
            std::cmp::Ordering::Equal => criteria.get(tie_break).is_some_and(|c| c.passed),
        };
        (sufficient, yes == 0 || no == 0)
    }

    pub fn report(&self) -> VerdictReport {
        VerdictReport {
            sufficient: self.sufficient,
            concordant: self.concordant,
            criteria: self.criteria.clone(),
            witness: self.witness.as_ref().map(ChannelJson::from_channel),
        }
    }

    /// Names of criteria whose answer differs from the verdict.
    pub fn dissenting(&self) -> Vec<&str> {
        self.criteria
            .iter()
            .filter(|(_, c)| c.passed != self.sufficient)
            .map(|(k, _)| k.as_str())
            .collect()
    }
}

fn alpha_key(prefix: &str, a: f64) -> String {
    format!("{prefix}[{a}]")
}

fn entropy_gap(v1: f64, v2: f64) -> f64 {
    if v1.is_infinite() && v2.is_infinite() {
        0.0
    } else {
        (v1 - v2).abs() / v1.abs().max(1.0)
    }
}

/// Generator of the cocycle at `t = 0`: `log ρ − P_ρ log ω` on the support of
/// `ρ`, which reduces to `log ρ − log ω` for faithful `ρ`.
pub fn cocycle_generator(rho: &DensityMatrix, omega: &DensityMatrix) -> CMat {
    rho.log().into_matrix() - rho.support_projection() * omega.log().into_matrix()
}

/// Checks a subalgebra against a family with faithful dominating state.
fn subalgebra_criteria(
    exp: &StatisticalExperiment,
    alg: &StarSubalgebra,
    cfg: &SufficiencyConfig,
) -> Result<BTreeMap<String, CriterionResult>> {
    let omega = exp.omega();
    let n = exp.dim();
    let w0 = restrict_density(alg, omega)?;
    let restricted: Vec<DensityMatrix> = exp
        .states()
        .iter()
        .map(|s| restrict_density(alg, s))
        .collect::<Result<_>>()?;
    let mut out = BTreeMap::new();
    for &a in &cfg.alphas {
        let mut gap: f64 = 0.0;
        for (s, r) in exp.states().iter().zip(&restricted) {
            gap = gap.max(entropy_gap(alpha_entropy(s, omega, a)?, alpha_entropy(r, &w0, a)?));
        }
        out.insert(alpha_key("alpha_entropy", a), CriterionResult::new(gap, cfg.tol));
    }
    let mut gap: f64 = 0.0;
    for (s, r) in exp.states().iter().zip(&restricted) {
        gap = gap.max(entropy_gap(relative_entropy(s, omega)?, relative_entropy(r, &w0)?));
    }
    out.insert("relative_entropy".into(), CriterionResult::new(gap, cfg.tol));

    let scale = (n as f64).sqrt();
    let mut member: f64 = 0.0;
    let mut restriction: f64 = 0.0;
    let mut generator: f64 = 0.0;
    for (s, r) in exp.states().iter().zip(&restricted) {
        for &t in &cfg.t_sample {
            let u = connes_cocycle(s, omega, t)?;
            member = member.max(alg.residual(&u) / scale);
            let u0 = connes_cocycle(r, &w0, t)?;
            restriction = restriction.max((u - u0).norm() / scale);
        }
        let d = cocycle_generator(s, omega);
        generator = generator.max(alg.residual(&d) / d.norm().max(1.0));
    }
    out.insert("cocycle_membership".into(), CriterionResult::new(member, cfg.tol));
    out.insert("cocycle_generator".into(), CriterionResult::new(generator, cfg.tol));
    out.insert("cocycle_restriction".into(), CriterionResult::new(restriction, cfg.tol));

    let mut inv: f64 = 0.0;
    for s in exp.states() {
        let back = generalized_recovery(alg, omega, s.matrix())?;
        inv = inv.max(trace_norm_hermitian(&(back - s.matrix())));
    }
    out.insert("conditional_expectation".into(), CriterionResult::new(inv, cfg.tol));
    Ok(out)
}

/// Sufficiency of a subalgebra. With a faithful dominating state all
/// criteria are evaluated directly; otherwise the question is routed through
/// the channel criteria for the trace-preserving projection onto `alg`.
pub fn subalgebra_sufficient(
    exp: &StatisticalExperiment,
    alg: &StarSubalgebra,
    cfg: &SufficiencyConfig,
) -> Result<SufficiencyVerdict> {
    if alg.ambient_dim() != exp.dim() {
        return Err(Error::DimensionMismatch { expected: exp.dim(), got: alg.ambient_dim() });
    }
    if !exp.omega().is_faithful() {
        let ch = trace_conditional_expectation(alg);
        let inner = channel_sufficient(exp, &ch, cfg)?;
        let criteria = inner
            .criteria
            .into_iter()
            .map(|(k, v)| (format!("channel:{k}"), v))
            .collect();
        return Ok(SufficiencyVerdict {
            sufficient: inner.sufficient,
            concordant: inner.concordant,
            criteria,
            witness: inner.witness,
        });
    }
    let criteria = subalgebra_criteria(exp, alg, cfg)?;
    let (sufficient, concordant) =
        SufficiencyVerdict::decide(criteria.clone(), "conditional_expectation");
    let witness = if sufficient {
        Some(generalized_conditional_expectation(alg, exp.omega())?)
    } else {
        None
    };
    Ok(SufficiencyVerdict { sufficient, concordant, criteria, witness })
}

/// Largest trace-norm error of `β(ch(ρ_θ))` against `ρ_θ`.
pub fn recovery_residual(
    exp: &StatisticalExperiment,
    ch: &QuantumChannel,
    beta: &QuantumChannel,
) -> f64 {
    exp.states()
        .iter()
        .map(|s| {
            let back = beta.schrodinger_apply(&ch.schrodinger_apply(s.matrix()));
            trace_norm_hermitian(&(back - s.matrix()))
        })
        .fold(0.0, f64::max)
}

/// Residual of `σ(log σ*(D_θ) − log σ*(D_ω)) = log D_θ − log D_ω` on the
/// support-compressed problem. Requires every compressed density and its
/// image to be faithful.
pub fn matsuff_check(
    exp: &StatisticalExperiment,
    ch: &QuantumChannel,
    tol: f64,
) -> Result<(bool, f64)> {
    let comp = compress_to_support(ch, exp.omega())?;
    let cexp = exp.compressed(&comp.p)?;
    matsuff_compressed(&cexp, &comp.channel, tol)
}

fn matsuff_compressed(
    cexp: &StatisticalExperiment,
    ch: &QuantumChannel,
    tol: f64,
) -> Result<(bool, f64)> {
    let w = cexp.omega();
    let w_out = ch.schrodinger(w)?;
    let lw = w.log().into_matrix();
    let lw_out = w_out.log().into_matrix();
    let mut worst: f64 = 0.0;
    for s in cexp.states() {
        let img = ch.schrodinger(s)?;
        if !s.is_faithful() || !img.is_faithful() {
            return Err(Error::SupportMismatch(
                "logarithmic criterion needs faithful densities on the supports".into(),
            ));
        }
        let lhs = ch.heisenberg_apply(&(img.log().into_matrix() - &lw_out));
        let rhs = s.log().into_matrix() - &lw;
        worst = worst.max((lhs - rhs).norm());
    }
    Ok((worst <= tol, worst))
}

fn nested_residual(v: &SufficiencyVerdict) -> f64 {
    let key = ["conditional_expectation", "channel:recovery"]
        .into_iter()
        .find(|k| v.criteria.contains_key(*k));
    key.map_or(f64::NAN, |k| v.criteria[k].residual)
}

/// Sufficiency of a channel (Schrödinger direction from the family's space).
pub fn channel_sufficient(
    exp: &StatisticalExperiment,
    ch: &QuantumChannel,
    cfg: &SufficiencyConfig,
) -> Result<SufficiencyVerdict> {
    if ch.in_dim() != exp.dim() {
        return Err(Error::DimensionMismatch { expected: exp.dim(), got: ch.in_dim() });
    }
    let omega = exp.omega();
    let w_out = ch.schrodinger(omega)?;
    let mut criteria = BTreeMap::new();
    let mut nested_concordant = true;

    let beta = petz_dual(ch, omega)?;
    let rec = recovery_residual(exp, ch, &beta);
    criteria.insert("recovery".to_string(), CriterionResult::new(rec, cfg.tol));

    let images: Vec<DensityMatrix> =
        exp.states().iter().map(|s| ch.schrodinger(s)).collect::<Result<_>>()?;
    let mut gap: f64 = 0.0;
    let mut finite = true;
    for (s, img) in exp.states().iter().zip(&images) {
        let before = relative_entropy(s, omega)?;
        if !before.is_finite() {
            finite = false;
        }
        gap = gap.max(entropy_gap(before, relative_entropy(img, &w_out)?));
    }
    if finite {
        criteria.insert("relative_entropy".into(), CriterionResult::new(gap, cfg.tol));
    }
    for &a in &cfg.alphas {
        let mut gap: f64 = 0.0;
        for (s, img) in exp.states().iter().zip(&images) {
            gap = gap.max(entropy_gap(alpha_entropy(s, omega, a)?, alpha_entropy(img, &w_out, a)?));
        }
        criteria.insert(alpha_key("alpha_entropy", a), CriterionResult::new(gap, cfg.tol));
    }

    let comp = compress_to_support(ch, omega)?;
    let cexp = exp.compressed(&comp.p)?;
    let cch = &comp.channel;
    let cw = cexp.omega();
    let cw_out = cch.schrodinger(cw)?;

    // image of the multiplicative domain
    let md = multiplicative_domain(cch)?;
    let images_md: Vec<CMat> = md.basis().iter().map(|b| cch.heisenberg_apply(b)).collect();
    let m0 = generated_algebra(&images_md, cexp.dim())?;
    let sub = subalgebra_sufficient(&cexp, &m0, cfg)?;
    nested_concordant &= sub.concordant;
    criteria.insert(
        "multiplicative_image".into(),
        CriterionResult { passed: sub.sufficient, residual: nested_residual(&sub) },
    );
    let cw0 = restrict_density(&m0, cw)?;
    for &a in &cfg.alphas {
        let mut gap: f64 = 0.0;
        for s in cexp.states() {
            let r = restrict_density(&m0, s)?;
            gap = gap.max(entropy_gap(alpha_entropy(s, cw, a)?, alpha_entropy(&r, &cw0, a)?));
        }
        criteria.insert(
            alpha_key("alpha_entropy_multiplicative", a),
            CriterionResult::new(gap, cfg.tol),
        );
    }

    let scale = (cexp.dim() as f64).sqrt();
    let mut coc: f64 = 0.0;
    for s in cexp.states() {
        let img = cch.schrodinger(s)?;
        for &t in &cfg.t_sample {
            let lhs = cch.heisenberg_apply(&connes_cocycle(&img, &cw_out, t)?);
            let rhs = connes_cocycle(s, cw, t)?;
            coc = coc.max((lhs - rhs).norm() / scale);
        }
    }
    criteria.insert("cocycle".into(), CriterionResult::new(coc, cfg.tol));

    let fp = fixed_point_subalgebras(cch, cw)?;
    let sub = subalgebra_sufficient(&cexp, &fp.m1, cfg)?;
    nested_concordant &= sub.concordant;
    criteria.insert(
        "fixed_point_algebra".into(),
        CriterionResult { passed: sub.sufficient, residual: nested_residual(&sub) },
    );

    if let Ok((_, res)) = matsuff_compressed(&cexp, cch, cfg.tol) {
        criteria.insert("log_derivative".into(), CriterionResult::new(res, cfg.tol));
    }

    let (sufficient, concordant) = SufficiencyVerdict::decide(criteria.clone(), "recovery");
    Ok(SufficiencyVerdict {
        sufficient,
        concordant: concordant && nested_concordant,
        criteria,
        witness: sufficient.then_some(beta),
    })
}

/// Result of [`minimal_sufficient_subalgebra`].
#[derive(Clone, Debug)]
pub struct MinimalSufficient {
    /// The algebra on the full space: the minimal algebra on `supp ω` plus the
    /// complement projection as an extra block when `ω` is not faithful.
    pub algebra: StarSubalgebra,
    /// The minimal algebra on `supp ω`.
    pub on_support: StarSubalgebra,
    /// Isometry onto `supp ω`.
    pub support: CMat,
    pub t_sample: Vec<f64>,
    /// Number of proper subalgebras checked to be insufficient.
    pub minimality_checks: usize,
}

/// The subalgebra generated by the Connes cocycles of the family against
/// `ω`, validated as sufficient and spot-checked for minimality.
pub fn minimal_sufficient_subalgebra(
    exp: &StatisticalExperiment,
    cfg: &SufficiencyConfig,
) -> Result<MinimalSufficient> {
    let support = exp.omega().support_isometry();
    let cexp = exp.compressed(&support)?;
    let w = cexp.omega();
    let r = cexp.dim();
    let mut t_sample = cfg.t_sample.clone();
    let mut rounds = 0;
    let alg = loop {
        let mut gens = Vec::new();
        for s in cexp.states() {
            gens.push(s.support_projection());
            gens.push(cocycle_generator(s, w));
            for &t in &t_sample {
                gens.push(connes_cocycle(s, w, t)?);
            }
        }
        let alg = generated_algebra(&gens, r)?;
        let v = subalgebra_sufficient(&cexp, &alg, cfg)?;
        if v.sufficient && v.concordant {
            break alg;
        }
        rounds += 1;
        if rounds > 3 {
            return Err(Error::Inconsistency(format!(
                "cocycle algebra failed validation after {rounds} rounds: {:?}",
                v.dissenting()
            )));
        }
        let golden = 0.5 * (1.0 + 5f64.sqrt());
        let extra: Vec<f64> = t_sample.iter().map(|t| t * golden).collect();
        t_sample.extend(extra);
    };
    let mut checks = 0;
    for smaller in proper_reductions(&alg)? {
        let v = subalgebra_sufficient(&cexp, &smaller, cfg)?;
        if v.sufficient {
            return Err(Error::Inconsistency(
                "a proper subalgebra of the cocycle algebra is also sufficient".into(),
            ));
        }
        checks += 1;
    }
    let algebra = lift_with_complement(&alg, &support)?;
    Ok(MinimalSufficient { algebra, on_support: alg, support, t_sample, minimality_checks: checks })
}

/// Proper subalgebras obtained by collapsing one noncommutative block to
/// scalars or by merging two commutative blocks.
fn proper_reductions(alg: &StarSubalgebra) -> Result<Vec<StarSubalgebra>> {
    let blocks = alg.blocks();
    let u = alg.unitary();
    let n = alg.ambient_dim();
    let mut offsets = Vec::with_capacity(blocks.len());
    let mut acc = 0;
    for &(d, m) in blocks {
        offsets.push(acc);
        acc += d * m;
    }
    let mut out = Vec::new();
    for (k, &(d, m)) in blocks.iter().enumerate() {
        if d > 1 {
            let mut nb = blocks.to_vec();
            nb[k] = (1, d * m);
            out.push(StarSubalgebra::new(u.clone(), nb)?);
        }
    }
    let commutative: Vec<usize> = (0..blocks.len()).filter(|&k| blocks[k].0 == 1).collect();
    for (ii, &a) in commutative.iter().enumerate() {
        for &b in &commutative[ii + 1..] {
            let mut cols = Vec::with_capacity(n);
            let mut nb = Vec::new();
            for (k, &(d, m)) in blocks.iter().enumerate() {
                if k == b {
                    continue;
                }
                cols.extend(offsets[k]..offsets[k] + d * m);
                if k == a {
                    cols.extend(offsets[b]..offsets[b] + blocks[b].1);
                    nb.push((1, m + blocks[b].1));
                } else {
                    nb.push((d, m));
                }
            }
            let mut nu = zeros(n, n);
            for (j, &c) in cols.iter().enumerate() {
                nu.set_column(j, &u.column(c));
            }
            out.push(StarSubalgebra::new(nu, nb)?);
        }
    }
    Ok(out)
}

/// `{V x V* + c(1 − VV*)}` for `x` in `alg`.
fn lift_with_complement(alg: &StarSubalgebra, v: &CMat) -> Result<StarSubalgebra> {
    let n = v.nrows();
    let r = v.ncols();
    if r == n {
        let u = v * alg.unitary();
        return StarSubalgebra::new(u, alg.blocks().to_vec());
    }
    let proj = identity(n) - v * v.adjoint();
    let eig = ((&proj + proj.adjoint()) * C64::new(0.5, 0.0)).symmetric_eigen();
    let mut idx: Vec<usize> = (0..n).collect();
    idx.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let mut u = zeros(n, n);
    let inner = v * alg.unitary();
    for j in 0..r {
        u.set_column(j, &inner.column(j));
    }
    for (j, &i) in idx.iter().take(n - r).enumerate() {
        u.set_column(r + j, &eig.eigenvectors.column(i));
    }
    let mut blocks = alg.blocks().to_vec();
    blocks.push((1, n - r));
    StarSubalgebra::new(u, blocks)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::operator::{c, diag, kron, max_abs, r};
    use crate::random::{random_faithful_density, random_unitary, rng};

    fn family(states: Vec<DensityMatrix>) -> StatisticalExperiment {
        build_experiment(
            states.into_iter().enumerate().map(|(i, s)| (vec![i as f64], s)).collect(),
            None,
        )
        .unwrap()
    }

    fn diag_family() -> StatisticalExperiment {
        family(
            [0.2, 0.5, 0.7]
                .iter()
                .map(|&t| DensityMatrix::diagonal(&[t, 1.0 - t]).unwrap())
                .collect(),
        )
    }

    fn coherent_family() -> StatisticalExperiment {
        family(
            [0.1, 0.3]
                .iter()
                .map(|&t| {
                    DensityMatrix::new(CMat::from_row_slice(
                        2,
                        2,
                        &[r(0.5), c(t, 0.0), c(t, 0.0), r(0.5)],
                    ))
                    .unwrap()
                })
                .chain(std::iter::once(DensityMatrix::diagonal(&[0.6, 0.4]).unwrap()))
                .collect(),
        )
    }

    #[test]
    fn build_examples() {
        let mut g = rng(41);
        let s = random_faithful_density(&mut g, 3, 0.1);
        let e = build_experiment(vec![(vec![0.0], s.clone())], None).unwrap();
        assert!(max_abs(&(e.omega().matrix() - s.matrix())) < 1e-12);
        let a = DensityMatrix::pure(&[r(1.0), r(0.0)]).unwrap();
        let b = DensityMatrix::pure(&[r(0.0), r(1.0)]).unwrap();
        let e = family(vec![a, b]);
        assert!(e.omega().is_faithful());
        let states: Vec<DensityMatrix> =
            (0..3).map(|_| random_faithful_density(&mut g, 3, 0.1)).collect();
        let w = [0.5, 0.3, 0.2];
        let e = build_experiment(
            states.iter().cloned().map(|s| (vec![], s)).collect(),
            Some(w.to_vec()),
        )
        .unwrap();
        let mut expect = zeros(3, 3);
        for (s, x) in states.iter().zip(w) {
            expect += s.matrix() * r(x);
        }
        assert!(max_abs(&(e.omega().matrix() - expect)) < 1e-12);
        assert!(matches!(build_experiment(vec![], None), Err(Error::EmptyFamily)));
    }

    #[test]
    fn full_algebra_is_sufficient() {
        let v = subalgebra_sufficient(&coherent_family(), &StarSubalgebra::full(2), &Default::default())
            .unwrap();
        assert!(v.sufficient && v.concordant, "{:?}", v.criteria);
    }

    #[test]
    fn diagonal_family_diagonal_algebra() {
        let v = subalgebra_sufficient(&diag_family(), &StarSubalgebra::diagonal(2), &Default::default())
            .unwrap();
        assert!(v.sufficient && v.concordant);
        assert!(v.criteria.values().all(|c| c.residual < 1e-10), "{:?}", v.criteria);
    }

    #[test]
    fn coherent_family_diagonal_algebra_insufficient() {
        let v = subalgebra_sufficient(
            &coherent_family(),
            &StarSubalgebra::diagonal(2),
            &Default::default(),
        )
        .unwrap();
        assert!(!v.sufficient && v.concordant, "{:?}", v.criteria);
        assert!(v.criteria["relative_entropy"].residual > 1e-3);
    }

    #[test]
    fn unitary_channel_is_sufficient() {
        let mut g = rng(42);
        let u = random_unitary(&mut g, 3);
        let exp = family((0..3).map(|_| random_faithful_density(&mut g, 3, 0.05)).collect());
        let ch = QuantumChannel::unitary(&u).unwrap();
        let v = channel_sufficient(&exp, &ch, &Default::default()).unwrap();
        assert!(v.sufficient && v.concordant, "{:?}", v.criteria);
        let (ok, res) = matsuff_check(&exp, &ch, 1e-8).unwrap();
        assert!(ok && res < 1e-9);
    }

    #[test]
    fn trace_out_product_family() {
        let mut g = rng(43);
        let tau = random_faithful_density(&mut g, 2, 0.1);
        let states: Vec<DensityMatrix> = (0..3)
            .map(|_| random_faithful_density(&mut g, 2, 0.1).tensor(&tau))
            .collect();
        let exp = family(states);
        let ch = QuantumChannel::partial_trace(&[2, 2], &[0]).unwrap();
        let v = channel_sufficient(&exp, &ch, &Default::default()).unwrap();
        assert!(v.sufficient && v.concordant, "{:?}", v.criteria);
        let beta = v.witness.unwrap();
        for s in exp.states() {
            let marginal = ch.schrodinger_apply(s.matrix());
            let expect = kron(&marginal, tau.matrix());
            assert!(max_abs(&(beta.schrodinger_apply(&marginal) - expect)) < 1e-9);
        }
        let (ok, res) = matsuff_check(&exp, &ch, 1e-8).unwrap();
        assert!(ok && res < 1e-9);
    }

    #[test]
    fn trace_out_correlated_family() {
        let mut g = rng(44);
        let tau = random_faithful_density(&mut g, 2, 0.1);
        let mut states: Vec<DensityMatrix> = (0..2)
            .map(|_| random_faithful_density(&mut g, 2, 0.1).tensor(&tau))
            .collect();
        states.push(random_faithful_density(&mut g, 4, 0.1));
        let exp = family(states);
        let ch = QuantumChannel::partial_trace(&[2, 2], &[0]).unwrap();
        let v = channel_sufficient(&exp, &ch, &Default::default()).unwrap();
        assert!(!v.sufficient && v.concordant, "{:?}", v.criteria);
        assert!(v.criteria["relative_entropy"].residual > 1e-4);
        let (ok, res) = matsuff_check(&exp, &ch, 1e-8).unwrap();
        assert!(!ok && res > 0.01);
    }

    #[test]
    fn minimal_algebra_examples() {
        let mut g = rng(45);
        let s = random_faithful_density(&mut g, 3, 0.1);
        let m = minimal_sufficient_subalgebra(&family(vec![s]), &Default::default()).unwrap();
        assert_eq!(m.algebra.blocks(), &[(1, 3)]);
        let m = minimal_sufficient_subalgebra(&diag_family(), &Default::default()).unwrap();
        assert!(m.algebra.same_as(&StarSubalgebra::diagonal(2), 1e-8));
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let zero = DensityMatrix::pure(&[r(1.0), r(0.0)]).unwrap();
        let plus = DensityMatrix::pure(&[r(s), r(s)]).unwrap();
        let m = minimal_sufficient_subalgebra(&family(vec![zero, plus]), &Default::default())
            .unwrap();
        assert_eq!(m.algebra.blocks(), &[(2, 1)]);
    }

    #[test]
    fn minimal_algebra_with_degenerate_support() {
        let a = DensityMatrix::diagonal(&[0.3, 0.7, 0.0]).unwrap();
        let b = DensityMatrix::diagonal(&[0.6, 0.4, 0.0]).unwrap();
        let m = minimal_sufficient_subalgebra(&family(vec![a, b]), &Default::default()).unwrap();
        assert_eq!(m.on_support.dim(), 2);
        assert_eq!(m.algebra.dim(), 3);
        assert!(m.algebra.contains(&diag(&[0.0, 0.0, 1.0]), 1e-10));
    }

    #[test]
    fn non_faithful_subalgebra_route() {
        let a = DensityMatrix::diagonal(&[0.3, 0.7, 0.0]).unwrap();
        let b = DensityMatrix::diagonal(&[0.6, 0.4, 0.0]).unwrap();
        let exp = family(vec![a, b]);
        let v = subalgebra_sufficient(&exp, &StarSubalgebra::diagonal(3), &Default::default())
            .unwrap();
        assert!(v.sufficient && v.concordant, "{:?}", v.criteria);
        assert!(v.criteria.keys().all(|k| k.starts_with("channel:")));
        let v = subalgebra_sufficient(&exp, &StarSubalgebra::scalars(3), &Default::default())
            .unwrap();
        assert!(!v.sufficient && v.concordant, "{:?}", v.criteria);
    }
}
