mod common;

use proptest::prelude::*;
use rand::Rng;
use ratetruth_core::maxent::{
    boltzmann_with_prior, entropy_decomposition, local_equilibrium_identity, maxent_channel, truth_constrained_maxent,
    FeatureConstraint, NefSource, ThermoSystem,
};
use ratetruth_core::measures::{kl_divergence, mutual_information, semantic_mutual_information, shannon_entropy};
use ratetruth_core::prob::{max_likelihood_ratio, normalize, semantic_bayes, truth_from_likelihood};
use ratetruth_core::solver::{
    mmi_iterate, mmi_step, rate_point_parametric, sweep_curve, ConstraintKernel, ConstraintSource, SolverOptions,
    SweepMode, Variant,
};
use ratetruth_core::truth::{distortion_to_truth, learn_truth_empirical, truth_to_distortion, Normalization};
use ratetruth_core::{Distribution, JointDistribution, LabelSet};

fn weights(n: std::ops::Range<usize>) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(0.01f64..1.0, n)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn normalized_weights_sum_to_one(w in weights(1..50)) {
        let d = normalize(&w).unwrap();
        let s: f64 = d.probs().iter().sum();
        prop_assert!((s - 1.0).abs() < 1e-12);
    }

    #[test]
    fn kl_and_mi_are_nonnegative(seed in any::<u64>(), m in 2usize..10, n in 2usize..6) {
        let mut rng = common::rng(seed);
        let p = common::distribution(&mut rng, m);
        let q = common::distribution(&mut rng, m);
        prop_assert!(kl_divergence(&p, &q).unwrap().0 >= 0.0);
        let rows: Vec<Vec<f64>> = (0..m).map(|_| common::simplex_point(&mut rng, n)).collect();
        let ch = ratetruth_core::Channel::from_rows(&rows).unwrap();
        let mi = mutual_information(&p, &ch).unwrap();
        prop_assert!(mi.mi.0 >= 0.0);
        prop_assert!(mi.mi.0 <= shannon_entropy(&p).0 + 1e-12);
        prop_assert!(mi.mi.0 <= mi.label_entropy.0 + 1e-12);
    }

    #[test]
    fn step_rows_are_normalized(seed in any::<u64>(), m in 2usize..20, n in 2usize..8, s in 0.1f64..5.0) {
        let mut rng = common::rng(seed);
        let t = common::semchan(&mut rng, m, n, 0.3);
        let k = ConstraintKernel::rate_truth(&t, s).unwrap();
        let marginal = common::distribution(&mut rng, n);
        let step = mmi_step(&marginal, &k).unwrap();
        for row in step.channel.rows() {
            prop_assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn lagrangian_never_rises(seed in any::<u64>(), m in 2usize..16, n in 2usize..6, s in 0.1f64..4.0) {
        let mut rng = common::rng(seed);
        let prior = common::distribution(&mut rng, m);
        let d = common::distortion(&mut rng, m, n);
        let k = ConstraintKernel::rate_distortion(&d, -s).unwrap();
        let r = mmi_iterate(&prior, &k, &SolverOptions::default()).unwrap();
        for w in r.trace.windows(2) {
            prop_assert!(w[1].objective_bits <= w[0].objective_bits + 1e-12);
        }
    }

    #[test]
    fn zero_labels_stay_zero(seed in any::<u64>(), m in 2usize..12, n in 3usize..6) {
        let mut rng = common::rng(seed);
        let prior = common::distribution(&mut rng, m);
        let d = common::distortion(&mut rng, m, n);
        let k = ConstraintKernel::rate_distortion(&d, -1.0).unwrap();
        let mut start = common::distribution(&mut rng, n).into_vec();
        let dead = rng.gen_range(0..n);
        start[dead] = 0.0;
        let opts = SolverOptions {
            initial_marginal: Some(normalize(&start).unwrap()),
            ..SolverOptions::default()
        };
        let r = mmi_iterate(&prior, &k, &opts).unwrap();
        prop_assert!(r.trace.iter().all(|t| t.label_marginal[dead] == 0.0));
    }

    #[test]
    fn rate_truth_chain_and_support(seed in any::<u64>(), m in 2usize..24, n in 2usize..6) {
        let mut rng = common::rng(seed);
        let prior = common::distribution(&mut rng, m);
        let t = common::semchan(&mut rng, m, n, 0.4);
        let k = ConstraintKernel::rate_truth(&t, 1.0).unwrap();
        let r = mmi_iterate(&prior, &k, &SolverOptions::default()).unwrap();
        for (i, row) in r.channel.rows().enumerate() {
            for (j, p) in row.iter().enumerate() {
                prop_assert!(!(*p > 0.0 && t.truth(i, j) == 0.0));
            }
        }
        let smi = semantic_mutual_information(&prior, &r.channel, &t).unwrap().smi;
        // equality is attainable, so allow rounding
        prop_assert!(r.rate_bits.0 >= smi.0 - 1e-12);
    }

    #[test]
    fn parametric_rate_tracks_direct_rate(seed in any::<u64>(), m in 2usize..16, n in 2usize..6, s in 0.1f64..4.0) {
        let mut rng = common::rng(seed);
        let prior = common::distribution(&mut rng, m);
        let d = common::distortion(&mut rng, m, n);
        let k = ConstraintKernel::rate_distortion(&d, -s).unwrap();
        let r = mmi_iterate(&prior, &k, &SolverOptions::default().with_tol(1e-12).with_max_iter(200_000)).unwrap();
        let p = rate_point_parametric(&prior, &k, &r).unwrap();
        // exact at the fixed point; what is left is KL(new marginal ‖ old)
        prop_assert!((p.rate_bits.0 - r.rate_bits.0).abs() < 1e-9);
    }

    #[test]
    fn warm_and_cold_sweeps_agree(seed in any::<u64>(), m in 2usize..12, n in 2usize..5) {
        let mut rng = common::rng(seed);
        let prior = common::distribution(&mut rng, m);
        let d = common::distortion(&mut rng, m, n);
        let s = [-0.5, -1.0, -2.0, -4.0];
        let opts = SolverOptions::default().with_tol(1e-11).with_max_iter(200_000);
        let src = ConstraintSource::Distortion(&d);
        let warm = sweep_curve(&prior, Variant::RateDistortion, src, &s, &opts, SweepMode::WarmStart);
        let cold = sweep_curve(&prior, Variant::RateDistortion, src, &s, &opts, SweepMode::ColdStart);
        for (a, b) in warm.iter().zip(&cold) {
            let (a, b) = (a.outcome.as_ref().unwrap(), b.outcome.as_ref().unwrap());
            prop_assert!((a.rate_bits.0 - b.rate_bits.0).abs() < 1e-7);
        }
    }

    #[test]
    fn truth_distortion_roundtrip(seed in any::<u64>(), m in 1usize..12, n in 1usize..6) {
        let mut rng = common::rng(seed);
        let t = common::semchan(&mut rng, m.max(n), n, 0.3);
        let back = distortion_to_truth(&truth_to_distortion(&t), LabelSet::numbered(n)).unwrap();
        for (a, b) in t.as_row_major().iter().zip(back.as_row_major()) {
            if *a == 0.0 {
                prop_assert_eq!(*b, 0.0);
            } else {
                // exp(−ln t) carries the rounding of ln t scaled by |ln t|
                prop_assert!((a - b).abs() <= 4.0 * f64::EPSILON * a * (1.0 + a.ln().abs()));
            }
        }
    }

    #[test]
    fn empirical_truth_is_symmetric(seed in any::<u64>(), m in 2usize..10, n in 2usize..6) {
        let mut rng = common::rng(seed);
        let data: Vec<f64> = (0..m * n).map(|_| rng.gen_range(0.01..1.0)).collect();
        let joint = JointDistribution::new(m, n, normalize(&data).unwrap().into_vec()).unwrap();
        let a = learn_truth_empirical(&joint, LabelSet::numbered(n), Normalization::Global).unwrap();
        let b = learn_truth_empirical(&joint.transpose(), LabelSet::numbered(m), Normalization::Global).unwrap();
        let mut top: f64 = 0.0;
        for i in 0..m {
            for j in 0..n {
                prop_assert!((a.truth(i, j) - b.truth(j, i)).abs() < 1e-12);
                top = top.max(a.truth(i, j));
            }
        }
        prop_assert_eq!(top, 1.0);
    }

    #[test]
    fn third_bayes_roundtrip(seed in any::<u64>(), n in 2usize..40) {
        let mut rng = common::rng(seed);
        let prior = common::distribution(&mut rng, n);
        let mut t: Vec<f64> = (0..n).map(|_| rng.gen::<f64>()).collect();
        t[rng.gen_range(0..n)] = 1.0;
        let sb = semantic_bayes(&prior, &t).unwrap();
        let ratio = max_likelihood_ratio(&prior, &sb.posterior).unwrap();
        let back = truth_from_likelihood(&prior, &sb.posterior, ratio).unwrap();
        for (a, b) in t.iter().zip(&back.truth) {
            prop_assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn maxent_identity_and_truth_channel(seed in any::<u64>(), m in 2usize..16, n in 2usize..6, s in 0.2f64..3.0) {
        let mut rng = common::rng(seed);
        let prior = common::distribution(&mut rng, m);
        let f: Vec<f64> = (0..m * n).map(|_| rng.gen_range(-2.0..2.0)).collect();
        let feats = [FeatureConstraint::new(m, n, f, 0.0, rng.gen_range(-1.0..1.0)).unwrap()];
        let ch = maxent_channel(&feats, m, n).unwrap();
        let d = entropy_decomposition(&prior, &ch, NefSource::Features(&feats)).unwrap();
        prop_assert!(d.residual() < 1e-9);

        let t = common::semchan(&mut rng, m, n, 0.3);
        let a = truth_constrained_maxent(&t, s).unwrap();
        let b = mmi_step(&Distribution::uniform(n), &ConstraintKernel::rate_truth(&t, s).unwrap()).unwrap();
        prop_assert_eq!(&a, &b.channel);
        let d = entropy_decomposition(&prior, &a, NefSource::Truth { semchan: &t, s_abs: s }).unwrap();
        prop_assert!(d.residual() < 1e-9);
    }

    #[test]
    fn weighted_boltzmann_is_semantic_bayes(seed in any::<u64>(), n in 1usize..10, temp in 0.1f64..10.0) {
        let mut rng = common::rng(seed);
        let prior = common::distribution(&mut rng, n);
        let e: Vec<f64> = (0..n).map(|_| rng.gen_range(0.0..5.0)).collect();
        let wb = boltzmann_with_prior(&prior, &e, temp, 1.0).unwrap();
        let t: Vec<f64> = e.iter().map(|v| ratetruth_core::math::exp(-v / temp)).collect();
        prop_assert_eq!(wb.distribution, semantic_bayes(&prior, &t).unwrap().posterior);
    }

    #[test]
    fn local_equilibrium_identity_holds(seed in any::<u64>(), levels in 1usize..6, areas in 1usize..4) {
        let mut rng = common::rng(seed);
        let sys = ThermoSystem::new(
            (0..levels).map(|_| rng.gen_range(0.0..4.0)).collect(),
            (0..levels).map(|_| rng.gen_range(1..6) as f64).collect(),
            (0..areas).map(|_| rng.gen_range(0.1..6.0)).collect(),
            common::distribution(&mut rng, areas).into_vec(),
        )
        .unwrap();
        prop_assert!(local_equilibrium_identity(&sys).unwrap().residual < 1e-9);
    }
}
