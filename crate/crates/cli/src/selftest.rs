use serde_json::{json, Map, Value};

use qsuff::classical::{
    bernoulli_product, embed_diagonal, factorization_check, is_sufficient_statistic,
    statistic_subalgebra, sum_statistic,
};
use qsuff::divergence::{alpha_entropy, relative_entropy};
use qsuff::gaussian::{verify_sufficiency_pair, SymplecticSpace};
use qsuff::random::{random_channel, random_density, random_faithful_density, random_unitary, rng};
use qsuff::sufficiency::{build_experiment, channel_sufficient, subalgebra_sufficient, SufficiencyConfig};
use qsuff::{QuantumChannel, Result};

struct Suite {
    checks: Map<String, Value>,
    ok: bool,
}

impl Suite {
    fn record(&mut self, name: &str, outcome: Result<(bool, f64)>) {
        let entry = match outcome {
            Ok((passed, residual)) => {
                self.ok &= passed;
                json!({"passed": passed, "residual": residual})
            }
            Err(e) => {
                self.ok = false;
                json!({"passed": false, "error": e.to_string()})
            }
        };
        self.checks.insert(name.to_string(), entry);
    }
}

/// Small randomized versions of the library's property tests.
pub fn run(cfg: &SufficiencyConfig) -> (Value, bool) {
    let mut s = Suite { checks: Map::new(), ok: true };
    s.record("data_processing", data_processing(cfg.seed));
    s.record("unitary_recovery", unitary_recovery(cfg));
    s.record("depolarizing_insufficient", depolarizing(cfg));
    s.record("trace_out_product", trace_out(cfg));
    s.record("bernoulli_concordance", bernoulli(cfg));
    s.record("gaussian_pair", gaussian_pair(cfg.seed));
    let passed = s.ok;
    (json!({"checks": s.checks, "all_passed": passed}), passed)
}

fn data_processing(seed: u64) -> Result<(bool, f64)> {
    let mut g = rng(seed);
    let mut worst = f64::NEG_INFINITY;
    for i in 0..20 {
        let (n, m) = (2 + i % 3, 2 + (i / 3) % 3);
        let rho = random_density(&mut g, n);
        let sigma = random_faithful_density(&mut g, n, 0.05);
        let ch = random_channel(&mut g, n, m, 2);
        let (r2, s2) = (ch.schrodinger(&rho)?, ch.schrodinger(&sigma)?);
        worst = worst.max(relative_entropy(&r2, &s2)? - relative_entropy(&rho, &sigma)?);
        for a in [-0.5, 0.5] {
            worst = worst.max(alpha_entropy(&r2, &s2, a)? - alpha_entropy(&rho, &sigma, a)?);
        }
    }
    Ok((worst < 1e-9, worst.max(0.0)))
}

fn family(seed: u64, n: usize, k: usize) -> Result<qsuff::StatisticalExperiment> {
    let mut g = rng(seed);
    let states = (0..k).map(|i| (vec![i as f64], random_faithful_density(&mut g, n, 0.1))).collect();
    build_experiment(states, None)
}

fn unitary_recovery(cfg: &SufficiencyConfig) -> Result<(bool, f64)> {
    let exp = family(cfg.seed ^ 1, 3, 3)?;
    let ch = QuantumChannel::unitary(&random_unitary(&mut rng(cfg.seed ^ 2), 3))?;
    let v = channel_sufficient(&exp, &ch, cfg)?;
    let r = v.criteria.get("recovery").map_or(f64::INFINITY, |c| c.residual);
    Ok((v.sufficient && v.concordant, r))
}

fn depolarizing(cfg: &SufficiencyConfig) -> Result<(bool, f64)> {
    let exp = family(cfg.seed ^ 3, 3, 2)?;
    let v = channel_sufficient(&exp, &QuantumChannel::depolarizing(3, 0.3)?, cfg)?;
    let r = v.criteria.get("recovery").map_or(0.0, |c| c.residual);
    Ok((!v.sufficient && v.concordant, r))
}

fn trace_out(cfg: &SufficiencyConfig) -> Result<(bool, f64)> {
    let mut g = rng(cfg.seed ^ 4);
    let tau = random_faithful_density(&mut g, 2, 0.1);
    let states = (0..3)
        .map(|i| (vec![i as f64], random_faithful_density(&mut g, 2, 0.1).tensor(&tau)))
        .collect();
    let exp = build_experiment(states, None)?;
    let v = channel_sufficient(&exp, &QuantumChannel::partial_trace(&[2, 2], &[0])?, cfg)?;
    let r = v.criteria.get("recovery").map_or(f64::INFINITY, |c| c.residual);
    Ok((v.sufficient && v.concordant, r))
}

fn bernoulli(cfg: &SufficiencyConfig) -> Result<(bool, f64)> {
    let exp = bernoulli_product(3, &[0.25, 0.6])?;
    let t = sum_statistic(3);
    let classical = is_sufficient_statistic(&exp, &t)?;
    let factor = factorization_check(&exp, &t)?;
    let v = subalgebra_sufficient(&embed_diagonal(&exp)?, &statistic_subalgebra(&t)?, cfg)?;
    Ok((classical && factor && v.sufficient && v.concordant, 0.0))
}

fn gaussian_pair(seed: u64) -> Result<(bool, f64)> {
    let space = SymplecticSpace::standard(1, 1.5)?;
    let rep = verify_sufficiency_pair(&space, 3, &[], 20, &mut rng(seed ^ 5))?;
    let ok = rep.max_deviation < 1e-10
        && rep.cp_sample_mean.completely_positive
        && rep.cp_randomization.completely_positive;
    Ok((ok, rep.max_deviation))
}
