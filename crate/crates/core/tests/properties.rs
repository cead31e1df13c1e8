use compound_core::bounds::combinatorics::partition_count;
use compound_core::bounds::packing::{enumerate_partitions, rho, PARTITION_CEILING};
use compound_core::estimator::{exact_aggregate, penalty, projection_estimate};
use compound_core::multiindex::enumerate_union;
use compound_core::sequence::{kl_divergence, observe};
use compound_core::{
    CandidateSpace, CoefficientMap, FamilyRule, IndexBox, MultiIndex, PriorSpec,
    SequenceObservation, Support,
};
use proptest::prelude::*;

fn coeff_map(d: usize) -> impl Strategy<Value = CoefficientMap> {
    prop::collection::vec((prop::collection::vec(-3i32..=3, d), -5.0f64..5.0), 0..12).prop_map(
        move |pairs| {
            let mut c = CoefficientMap::new(d);
            for (e, v) in pairs {
                c.insert(MultiIndex::new(e), v).unwrap();
            }
            c
        },
    )
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn distance_is_a_squared_metric(f in coeff_map(2), g in coeff_map(2)) {
        prop_assert!(f.squared_distance(&g) >= 0.0);
        prop_assert_eq!(f.squared_distance(&f), 0.0);
        prop_assert!((f.squared_distance(&g) - g.squared_distance(&f)).abs() < 1e-12);
    }

    #[test]
    fn kl_is_half_scaled_distance(f in coeff_map(3), g in coeff_map(3), eps in 0.01f64..0.99) {
        let kl = kl_divergence(&f, &g, eps);
        prop_assert!((kl - 0.5 * f.squared_distance(&g) / (eps * eps)).abs() <= 1e-9 * kl.max(1.0));
    }

    #[test]
    fn coefficient_csv_round_trip(f in coeff_map(3)) {
        let mut buf = Vec::new();
        f.write_csv(&mut buf, "theta").unwrap();
        let back = CoefficientMap::read_csv(&buf[..], "theta").unwrap();
        prop_assert_eq!(back.squared_distance(&f), 0.0);
    }

    #[test]
    fn union_is_sorted_unique_and_has_zero(mask_a in 1u64..8, mask_b in 1u64..8, cutoff in 1u32..3) {
        let sup = [Support::from_mask(mask_a), Support::from_mask(mask_b)];
        let idx = enumerate_union(3, cutoff, &sup).unwrap();
        prop_assert!(idx.windows(2).all(|w| w[0] < w[1]));
        prop_assert!(idx.iter().any(|j| j.is_zero()));
        prop_assert!(idx.iter().all(|j| sup.iter().any(|v| j.support().is_subset_of(*v)) && j.sup_norm() <= cutoff));
    }

    #[test]
    fn observation_csv_round_trip(seed in any::<u64>(), eps in 0.05f64..0.9) {
        let obs = observe(&CoefficientMap::new(2), eps, &IndexBox::full(2, 2), seed).unwrap();
        let mut buf = Vec::new();
        obs.write_csv(&mut buf).unwrap();
        let back = SequenceObservation::read_csv(&buf[..]).unwrap();
        prop_assert_eq!(back.entries(), obs.entries());
        prop_assert_eq!(back.epsilon, obs.epsilon);
    }

    #[test]
    fn aggregate_is_a_convex_combination(seed in any::<u64>(), eps in 0.05f64..0.5) {
        let space = CandidateSpace::new(2, 1, 2, 2, FamilyRule::Disjoint).unwrap();
        let cands = space.enumerate(10_000).unwrap();
        let truth = CoefficientMap::from_pairs(2, [(MultiIndex::new(vec![1, 0]), 0.4)]).unwrap();
        let obs = observe(&truth, eps, &IndexBox::full(2, 2), seed).unwrap();
        let prior = PriorSpec::from_epsilon(2, eps, 2);
        let agg = exact_aggregate(&obs, cands.clone(), &prior).unwrap();
        let w = agg.ensemble.weights();
        prop_assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        for (j, _) in obs.entries() {
            let vals: Vec<f64> = cands.iter().map(|c| projection_estimate(&obs, c).get(j)).collect();
            let lo = vals.iter().cloned().fold(f64::INFINITY, f64::min);
            let hi = vals.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let v = agg.estimate.get(j);
            prop_assert!(v >= lo - 1e-12 && v <= hi + 1e-12);
            let mix: f64 = vals.iter().zip(&w).map(|(a, b)| a * b).sum();
            prop_assert!((v - mix).abs() < 1e-9);
        }
    }

    #[test]
    fn prior_and_penalty_signs(eps in 0.05f64..0.9) {
        let space = CandidateSpace::new(3, 2, 2, 2, FamilyRule::Disjoint).unwrap();
        let prior = PriorSpec::from_epsilon(3, eps, 2);
        for c in space.enumerate(100_000).unwrap() {
            prop_assert!(prior.log_prior(&c) <= 0.0);
            prop_assert!(penalty(&c, eps) >= 2.0 * eps * eps);
        }
    }

    #[test]
    fn rho_is_a_metric_on_random_triples(d in 4usize..=8, s in 1usize..=2, a in any::<prop::sample::Index>(),
                                         b in any::<prop::sample::Index>(), c in any::<prop::sample::Index>()) {
        let m = 2;
        let all = enumerate_partitions(d, s, m, PARTITION_CEILING).unwrap();
        prop_assert_eq!(all.len() as u64, partition_count(d as u64, s as u64, m as u64).unwrap().try_into().unwrap_or(0u64));
        let (p, q, r) = (a.get(&all), b.get(&all), c.get(&all));
        let pq = rho(p, q).unwrap();
        prop_assert!((0.0..=1.0).contains(&pq));
        prop_assert_eq!(pq, rho(q, p).unwrap());
        prop_assert_eq!(pq == 0.0, p == q);
        prop_assert!(rho(p, r).unwrap() <= pq + rho(q, r).unwrap() + 1e-12);
    }
}
