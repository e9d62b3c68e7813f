use proptest::prelude::*;

use qsuff::channel::petz_dual;
use qsuff::classical::{
    embed_diagonal, factorization_check, is_sufficient_statistic, statistic_subalgebra,
    FiniteExperiment, Statistic,
};
use qsuff::divergence::{alpha_entropy, relative_entropy};
use qsuff::operator::trace_norm_hermitian;
use qsuff::random::{random_channel, random_density, random_faithful_density, random_unitary, rng};
use qsuff::sufficiency::{build_experiment, channel_sufficient, recovery_residual, subalgebra_sufficient};
use qsuff::{QuantumChannel, StarSubalgebra, SufficiencyConfig};

fn config() -> ProptestConfig {
    ProptestConfig { cases: 24, ..ProptestConfig::default() }
}

proptest! {
    #![proptest_config(config())]

    #[test]
    fn divergences_contract(seed in any::<u64>(), n in 2usize..5, m in 2usize..5) {
        let mut g = rng(seed);
        let rho = random_density(&mut g, n);
        let sigma = random_faithful_density(&mut g, n, 0.05);
        let ch = random_channel(&mut g, n, m, n.div_ceil(m).max(2));
        let (r2, s2) = (ch.schrodinger(&rho).unwrap(), ch.schrodinger(&sigma).unwrap());
        prop_assert!(relative_entropy(&r2, &s2).unwrap() <= relative_entropy(&rho, &sigma).unwrap() + 1e-9);
        for a in [-0.5, 0.5] {
            prop_assert!(alpha_entropy(&r2, &s2, a).unwrap() <= alpha_entropy(&rho, &sigma, a).unwrap() + 1e-9);
        }
    }

    #[test]
    fn petz_dual_fixes_reference(seed in any::<u64>(), n in 2usize..5) {
        let mut g = rng(seed);
        let omega = random_faithful_density(&mut g, n, 0.1);
        let ch = random_channel(&mut g, n, n, 2);
        let beta = petz_dual(&ch, &omega).unwrap();
        let back = beta.schrodinger_apply(&ch.schrodinger_apply(omega.matrix()));
        prop_assert!(trace_norm_hermitian(&(back - omega.matrix())) < 1e-9);
    }

    #[test]
    fn unitary_channels_are_sufficient(seed in any::<u64>(), n in 2usize..5, k in 2usize..4) {
        let mut g = rng(seed);
        let states = (0..k).map(|i| (vec![i as f64], random_faithful_density(&mut g, n, 0.1))).collect();
        let exp = build_experiment(states, None).unwrap();
        let ch = QuantumChannel::unitary(&random_unitary(&mut g, n)).unwrap();
        let v = channel_sufficient(&exp, &ch, &SufficiencyConfig::default()).unwrap();
        prop_assert!(v.sufficient && v.concordant);
        let beta = v.witness.unwrap();
        prop_assert!(recovery_residual(&exp, &ch, &beta) < 1e-8);
    }

    #[test]
    fn depolarizing_is_not_sufficient(seed in any::<u64>(), n in 2usize..5, eps in 0.1f64..0.9) {
        let mut g = rng(seed);
        let states = (0..2).map(|i| (vec![i as f64], random_faithful_density(&mut g, n, 0.1))).collect();
        let exp = build_experiment(states, None).unwrap();
        let v = channel_sufficient(&exp, &QuantumChannel::depolarizing(n, eps).unwrap(), &SufficiencyConfig::default()).unwrap();
        prop_assert!(!v.sufficient && v.concordant);
    }

    #[test]
    fn classical_and_embedded_agree(
        probs in prop::collection::vec(prop::collection::vec(0.05f64..1.0, 5), 2..4),
        map in prop::collection::vec(0usize..3, 5),
    ) {
        let members = probs
            .into_iter()
            .enumerate()
            .map(|(i, p)| {
                let s: f64 = p.iter().sum();
                (vec![i as f64], p.into_iter().map(|x| x / s).collect())
            })
            .collect();
        let exp = FiniteExperiment::new(members).unwrap();
        let t = Statistic::new(map);
        let a = is_sufficient_statistic(&exp, &t).unwrap();
        prop_assert_eq!(a, factorization_check(&exp, &t).unwrap());
        let v = subalgebra_sufficient(
            &embed_diagonal(&exp).unwrap(),
            &statistic_subalgebra(&t).unwrap(),
            &SufficiencyConfig::default(),
        ).unwrap();
        prop_assert_eq!(a, v.sufficient);
        prop_assert!(v.concordant);
    }

    #[test]
    fn full_algebra_is_sufficient(seed in any::<u64>(), n in 2usize..5) {
        let mut g = rng(seed);
        let states = (0..2).map(|i| (vec![i as f64], random_faithful_density(&mut g, n, 0.1))).collect();
        let exp = build_experiment(states, None).unwrap();
        let v = subalgebra_sufficient(&exp, &StarSubalgebra::full(n), &SufficiencyConfig::default()).unwrap();
        prop_assert!(v.sufficient && v.concordant);
        let v = subalgebra_sufficient(&exp, &StarSubalgebra::scalars(n), &SufficiencyConfig::default()).unwrap();
        prop_assert!(!v.sufficient && v.concordant);
    }
}
