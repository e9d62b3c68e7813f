//! Classical sufficiency on finite sample spaces and its embedding into
//! diagonal matrix algebras.

use serde::Serialize;

use crate::algebra::StarSubalgebra;
use crate::error::{Error, Result};
use crate::operator::DensityMatrix;
use crate::schema::ClassicalJson;
use crate::sufficiency::{build_experiment, StatisticalExperiment};

/// Family of probability vectors on `{0, …, N−1}` with dominating measure
/// `μ = Σ w_θ P_θ`.
#[derive(Clone, Debug)]
pub struct FiniteExperiment {
    thetas: Vec<Vec<f64>>,
    family: Vec<Vec<f64>>,
    weights: Vec<f64>,
    mu: Vec<f64>,
}

impl FiniteExperiment {
    pub fn new(members: Vec<(Vec<f64>, Vec<f64>)>) -> Result<Self> {
        let k = members.len();
        Self::with_weights(members, vec![1.0 / k.max(1) as f64; k])
    }

    pub fn with_weights(members: Vec<(Vec<f64>, Vec<f64>)>, weights: Vec<f64>) -> Result<Self> {
        let first = members.first().ok_or(Error::EmptyFamily)?;
        let n = first.1.len();
        if n == 0 {
            return Err(Error::InvalidParameter("empty sample space".into()));
        }
        if weights.len() != members.len() || weights.iter().any(|&w| w.is_nan() || w <= 0.0) {
            return Err(Error::InvalidParameter("weights must be positive, one per member".into()));
        }
        let total: f64 = weights.iter().sum();
        let weights: Vec<f64> = weights.iter().map(|w| w / total).collect();
        let mut mu = vec![0.0; n];
        for ((_, p), w) in members.iter().zip(&weights) {
            if p.len() != n {
                return Err(Error::DimensionMismatch { expected: n, got: p.len() });
            }
            if p.iter().any(|&x| !x.is_finite() || x < 0.0) {
                return Err(Error::InvalidParameter("negative or non-finite probability".into()));
            }
            let s: f64 = p.iter().sum();
            if (s - 1.0).abs() > 1e-9 {
                return Err(Error::InvalidParameter(format!("probabilities sum to {s}")));
            }
            for (m, &x) in mu.iter_mut().zip(p) {
                *m += w * x;
            }
        }
        let (thetas, family) = members.into_iter().unzip();
        Ok(FiniteExperiment { thetas, family, weights, mu })
    }

    pub fn from_json(j: &ClassicalJson) -> Result<Self> {
        let exp = Self::new(j.family.iter().map(|m| (m.theta.clone(), m.p.clone())).collect())?;
        if exp.sample_size() != j.n {
            return Err(Error::DimensionMismatch { expected: j.n, got: exp.sample_size() });
        }
        Ok(exp)
    }

    pub fn sample_size(&self) -> usize {
        self.mu.len()
    }

    pub fn family(&self) -> &[Vec<f64>] {
        &self.family
    }

    pub fn thetas(&self) -> &[Vec<f64>] {
        &self.thetas
    }

    pub fn mu(&self) -> &[f64] {
        &self.mu
    }
}

/// Total map `T: {0..N} → {0..K}`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Statistic {
    map: Vec<usize>,
    classes: usize,
}

impl Statistic {
    pub fn new(map: Vec<usize>) -> Self {
        let classes = map.iter().max().map_or(0, |m| m + 1);
        Statistic { map, classes }
    }

    pub fn identity(n: usize) -> Self {
        Self::new((0..n).collect())
    }

    pub fn constant(n: usize) -> Self {
        Self::new(vec![0; n])
    }

    pub fn map(&self) -> &[usize] {
        &self.map
    }

    pub fn classes(&self) -> usize {
        self.classes
    }

    /// Non-empty fibers, ordered by label.
    pub fn fibers(&self) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); self.classes];
        for (x, &k) in self.map.iter().enumerate() {
            out[k].push(x);
        }
        out.retain(|f| !f.is_empty());
        out
    }

    /// Whether every fiber of `self` lies inside a fiber of `coarse`.
    pub fn refines(&self, coarse: &Statistic) -> bool {
        self.fibers().iter().all(|f| f.iter().all(|&x| coarse.map[x] == coarse.map[f[0]]))
    }

    fn check(&self, n: usize) -> Result<()> {
        if self.map.len() != n {
            return Err(Error::DimensionMismatch { expected: n, got: self.map.len() });
        }
        Ok(())
    }
}

/// Largest θ-dependence of `P_θ(x | T = T(x))` on `supp μ`.
pub fn conditional_variation(exp: &FiniteExperiment, t: &Statistic) -> Result<f64> {
    t.check(exp.sample_size())?;
    let mut worst: f64 = 0.0;
    for fiber in t.fibers() {
        let support: Vec<usize> = fiber.into_iter().filter(|&x| exp.mu[x] > 0.0).collect();
        let mu_mass: f64 = support.iter().map(|&x| exp.mu[x]).sum();
        if mu_mass == 0.0 {
            continue;
        }
        for p in &exp.family {
            let mass: f64 = support.iter().map(|&x| p[x]).sum();
            if mass == 0.0 {
                continue;
            }
            for &x in &support {
                worst = worst.max((p[x] / mass - exp.mu[x] / mu_mass).abs());
            }
        }
    }
    Ok(worst)
}

/// Conditional distributions given `T` are θ-independent within `1e-12`.
pub fn is_sufficient_statistic(exp: &FiniteExperiment, t: &Statistic) -> Result<bool> {
    Ok(conditional_variation(exp, t)? <= 1e-12)
}

/// Largest relative residual of the best factorization
/// `dP_θ/dμ(x) = g_θ(T(x)) h(x)` with `h` taken, fiber by fiber, from the
/// member carrying the most mass there.
pub fn factorization_residual(exp: &FiniteExperiment, t: &Statistic) -> Result<f64> {
    t.check(exp.sample_size())?;
    let mut worst: f64 = 0.0;
    for fiber in t.fibers() {
        let support: Vec<usize> = fiber.into_iter().filter(|&x| exp.mu[x] > 0.0).collect();
        if support.is_empty() {
            continue;
        }
        let ratio = |p: &[f64], x: usize| p[x] / exp.mu[x];
        let reference = exp
            .family
            .iter()
            .max_by(|a, b| {
                let ma: f64 = support.iter().map(|&x| a[x]).sum();
                let mb: f64 = support.iter().map(|&x| b[x]).sum();
                ma.total_cmp(&mb)
            })
            .expect("non-empty family");
        let top = support.iter().map(|&x| ratio(reference, x)).fold(0.0, f64::max);
        let h: Vec<f64> = support.iter().map(|&x| ratio(reference, x) / top).collect();
        let hh: f64 = h.iter().map(|v| v * v).sum();
        for p in &exp.family {
            let r: Vec<f64> = support.iter().map(|&x| ratio(p, x)).collect();
            let g = r.iter().zip(&h).map(|(a, b)| a * b).sum::<f64>() / hh;
            let scale = r.iter().cloned().fold(1.0, f64::max);
            for (a, b) in r.iter().zip(&h) {
                worst = worst.max((a - g * b).abs() / scale);
            }
        }
    }
    Ok(worst)
}

pub fn factorization_check(exp: &FiniteExperiment, t: &Statistic) -> Result<bool> {
    Ok(factorization_residual(exp, t)? <= 1e-10)
}

/// Level sets of `p/(p+q)` (ties within `1e-12`); points outside
/// `supp(P+Q)` form one extra class. Labels follow first appearance.
pub fn likelihood_ratio_statistic(p: &[f64], q: &[f64]) -> Result<Statistic> {
    if p.len() != q.len() {
        return Err(Error::DimensionMismatch { expected: p.len(), got: q.len() });
    }
    let n = p.len();
    let mut levels: Vec<f64> = Vec::new();
    let mut null_label = None;
    let mut map = vec![0; n];
    let mut next = 0;
    let mut label_of_level: Vec<usize> = Vec::new();
    for x in 0..n {
        let s = p[x] + q[x];
        if s <= 0.0 {
            map[x] = *null_label.get_or_insert_with(|| {
                next += 1;
                next - 1
            });
            continue;
        }
        let r = p[x] / s;
        match levels.iter().position(|&l| (l - r).abs() <= 1e-12) {
            Some(i) => map[x] = label_of_level[i],
            None => {
                levels.push(r);
                label_of_level.push(next);
                map[x] = next;
                next += 1;
            }
        }
    }
    Ok(Statistic::new(map))
}

/// All set partitions of `{0..n}` as restricted growth strings.
pub fn set_partitions(n: usize) -> Vec<Statistic> {
    fn rec(prefix: &mut Vec<usize>, n: usize, max: usize, out: &mut Vec<Statistic>) {
        if prefix.len() == n {
            out.push(Statistic::new(prefix.clone()));
            return;
        }
        let lim = if prefix.is_empty() { 0 } else { max + 1 };
        for k in 0..=lim {
            prefix.push(k);
            rec(prefix, n, max.max(k), out);
            prefix.pop();
        }
    }
    let mut out = Vec::new();
    if n > 0 {
        rec(&mut Vec::with_capacity(n), n, 0, &mut out);
    }
    out
}

#[derive(Clone, Debug, Serialize)]
pub struct MinimalityReport {
    pub partitions_checked: usize,
    pub sufficient_partitions: usize,
    /// Every sufficient partition refines the likelihood-ratio partition.
    pub minimal: bool,
    pub likelihood_ratio_sufficient: bool,
}

/// Exhaustive minimality check of the likelihood ratio for `{P, Q}`.
pub fn likelihood_ratio_minimality(p: &[f64], q: &[f64]) -> Result<MinimalityReport> {
    let n = p.len();
    if n > 8 {
        return Err(Error::SizeCap(format!("exhaustive enumeration needs N ≤ 8, got {n}")));
    }
    let exp = FiniteExperiment::new(vec![(vec![0.0], p.to_vec()), (vec![1.0], q.to_vec())])?;
    let lr = likelihood_ratio_statistic(p, q)?;
    let mut checked = 0;
    let mut sufficient = 0;
    let mut minimal = true;
    for part in set_partitions(n) {
        checked += 1;
        if is_sufficient_statistic(&exp, &part)? {
            sufficient += 1;
            if !part.refines(&lr) && !refines_on_support(&part, &lr, exp.mu()) {
                minimal = false;
            }
        }
    }
    Ok(MinimalityReport {
        partitions_checked: checked,
        sufficient_partitions: sufficient,
        minimal,
        likelihood_ratio_sufficient: is_sufficient_statistic(&exp, &lr)?,
    })
}

fn refines_on_support(fine: &Statistic, coarse: &Statistic, mu: &[f64]) -> bool {
    fine.fibers().iter().all(|f| {
        let s: Vec<usize> = f.iter().cloned().filter(|&x| mu[x] > 0.0).collect();
        s.iter().all(|&x| coarse.map[x] == coarse.map[s[0]])
    })
}

/// Diagonal densities with the same weights as the dominating measure.
pub fn embed_diagonal(exp: &FiniteExperiment) -> Result<StatisticalExperiment> {
    let states = exp
        .thetas
        .iter()
        .zip(&exp.family)
        .map(|(t, p)| Ok((t.clone(), DensityMatrix::diagonal(p)?)))
        .collect::<Result<Vec<_>>>()?;
    build_experiment(states, Some(exp.weights.clone()))
}

/// Diagonal subalgebra of `T`-measurable functions.
pub fn statistic_subalgebra(t: &Statistic) -> Result<StarSubalgebra> {
    StarSubalgebra::from_partition(t.map.len(), &t.fibers())
}

/// `{0,1}^N` with i.i.d. Bernoulli(θ) coordinates; bit `i` of `x` is coin `i`.
pub fn bernoulli_product(n: usize, thetas: &[f64]) -> Result<FiniteExperiment> {
    if n == 0 || n > 16 {
        return Err(Error::SizeCap(format!("Bernoulli product with N = {n}")));
    }
    let members = thetas
        .iter()
        .map(|&th| {
            if !(0.0..=1.0).contains(&th) {
                return Err(Error::InvalidParameter(format!("θ = {th} outside [0, 1]")));
            }
            let p = (0..1usize << n)
                .map(|x| {
                    let ones = x.count_ones() as i32;
                    th.powi(ones) * (1.0 - th).powi(n as i32 - ones)
                })
                .collect();
            Ok((vec![th], p))
        })
        .collect::<Result<Vec<_>>>()?;
    FiniteExperiment::new(members)
}

/// Number of successes on `{0,1}^N`.
pub fn sum_statistic(n: usize) -> Statistic {
    Statistic::new((0..1usize << n).map(|x| x.count_ones() as usize).collect())
}

#[derive(Clone, Debug, Serialize)]
pub struct NormalDemo {
    pub variables: usize,
    pub grid_points: usize,
    pub max_conditional_variation: f64,
}

/// `n` i.i.d. normal variables with unit variance discretized on 101 points
/// of `[−5, 5]`, with the sum of grid indices as the statistic. Illustrative:
/// the discretized family is again an exponential family in the sum.
pub fn discretized_normal_demo(n: usize, means: &[f64]) -> Result<NormalDemo> {
    if n == 0 || n > 3 {
        return Err(Error::SizeCap(format!("normal demo supports 1 to 3 variables, got {n}")));
    }
    const POINTS: usize = 101;
    let grid: Vec<f64> = (0..POINTS).map(|i| -5.0 + 0.1 * i as f64).collect();
    let size = POINTS.pow(n as u32);
    let digits = |mut x: usize| {
        let mut d = [0usize; 3];
        for slot in d.iter_mut().take(n) {
            *slot = x % POINTS;
            x /= POINTS;
        }
        d
    };
    let members = means
        .iter()
        .map(|&m| {
            let mut p: Vec<f64> = (0..size)
                .map(|x| {
                    let d = digits(x);
                    let e: f64 = d[..n].iter().map(|&i| (grid[i] - m).powi(2)).sum();
                    (-0.5 * e).exp()
                })
                .collect();
            let z: f64 = p.iter().sum();
            p.iter_mut().for_each(|v| *v /= z);
            (vec![m], p)
        })
        .collect();
    let exp = FiniteExperiment::new(members)?;
    let t = Statistic::new((0..size).map(|x| digits(x)[..n].iter().sum()).collect());
    Ok(NormalDemo {
        variables: n,
        grid_points: POINTS,
        max_conditional_variation: conditional_variation(&exp, &t)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sufficiency::{minimal_sufficient_subalgebra, subalgebra_sufficient};

    fn pair(p: &[f64], q: &[f64]) -> FiniteExperiment {
        FiniteExperiment::new(vec![(vec![0.0], p.to_vec()), (vec![1.0], q.to_vec())]).unwrap()
    }

    #[test]
    fn identity_and_constant() {
        let e = pair(&[0.2, 0.3, 0.5], &[0.5, 0.3, 0.2]);
        assert!(is_sufficient_statistic(&e, &Statistic::identity(3)).unwrap());
        assert!(factorization_check(&e, &Statistic::identity(3)).unwrap());
        assert!(!is_sufficient_statistic(&e, &Statistic::constant(3)).unwrap());
        assert!(!factorization_check(&e, &Statistic::constant(3)).unwrap());
    }

    #[test]
    fn bernoulli_sum() {
        for n in 1..=6 {
            let e = bernoulli_product(n, &[0.2, 0.5, 0.7]).unwrap();
            let t = sum_statistic(n);
            assert!(is_sufficient_statistic(&e, &t).unwrap());
            assert!(factorization_check(&e, &t).unwrap());
        }
        let e = bernoulli_product(3, &[0.2, 0.7]).unwrap();
        let first_coin = Statistic::new((0..8).map(|x| x & 1).collect());
        assert!(!is_sufficient_statistic(&e, &first_coin).unwrap());
        assert!(!factorization_check(&e, &first_coin).unwrap());
    }

    #[test]
    fn likelihood_ratio_examples() {
        let t = likelihood_ratio_statistic(&[0.3, 0.7], &[0.3, 0.7]).unwrap();
        assert_eq!(t.fibers().len(), 1);
        let t = likelihood_ratio_statistic(&[1.0, 0.0], &[0.0, 1.0]).unwrap();
        assert_eq!(t.fibers().len(), 2);
        let t = likelihood_ratio_statistic(&[0.5, 0.3, 0.2], &[0.5, 0.2, 0.3]).unwrap();
        assert_eq!(t.fibers(), vec![vec![0], vec![1], vec![2]]);
        let t = likelihood_ratio_statistic(&[0.2, 0.4, 0.1, 0.3], &[0.1, 0.2, 0.3, 0.4]).unwrap();
        assert_eq!(t.fibers(), vec![vec![0, 1], vec![2], vec![3]]);
    }

    #[test]
    fn partitions_count() {
        let bell = [1, 1, 2, 5, 15, 52, 203, 877, 4140];
        for (n, &b) in bell.iter().enumerate().skip(1) {
            assert_eq!(set_partitions(n).len(), b);
        }
    }

    #[test]
    fn likelihood_ratio_minimal() {
        let rep = likelihood_ratio_minimality(&[0.2, 0.4, 0.1, 0.3], &[0.1, 0.2, 0.3, 0.4]).unwrap();
        assert!(rep.minimal && rep.likelihood_ratio_sufficient);
        assert_eq!(rep.partitions_checked, 15);
    }

    #[test]
    fn embedding_concordance() {
        let e = bernoulli_product(3, &[0.3, 0.6]).unwrap();
        let q = embed_diagonal(&e).unwrap();
        for (s, p) in q.states().iter().zip(e.family()) {
            for (x, &v) in p.iter().enumerate() {
                assert!((s.matrix()[(x, x)].re - v).abs() < 1e-15);
            }
        }
        let alg = statistic_subalgebra(&sum_statistic(3)).unwrap();
        let v = subalgebra_sufficient(&q, &alg, &Default::default()).unwrap();
        assert!(v.sufficient && v.concordant);
        let alg = statistic_subalgebra(&Statistic::new((0..8).map(|x| x & 1).collect())).unwrap();
        assert!(!subalgebra_sufficient(&q, &alg, &Default::default()).unwrap().sufficient);
    }

    #[test]
    fn likelihood_ratio_algebra_is_minimal_sufficient() {
        let p = [0.2, 0.4, 0.1, 0.3];
        let qv = [0.1, 0.2, 0.3, 0.4];
        let e = embed_diagonal(&pair(&p, &qv)).unwrap();
        let m = minimal_sufficient_subalgebra(&e, &Default::default()).unwrap();
        let lr = statistic_subalgebra(&likelihood_ratio_statistic(&p, &qv).unwrap()).unwrap();
        assert!(m.algebra.same_as(&lr, 1e-8));
    }

    #[test]
    fn normal_demo() {
        let d = discretized_normal_demo(2, &[-0.5, 0.0, 0.8]).unwrap();
        assert!(d.max_conditional_variation < 1e-12);
    }
}
