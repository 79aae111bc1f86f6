mod common;

use std::collections::BTreeSet;

use causal_pareto::pareto::{
    diversity_regions, gd, hvi, hypervolume, igd, non_dominated_indices, select_local_batch,
    LocalFront,
};
use causal_pareto::scm::Domain;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn point(m: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(0.0..1.0f64, m)
}

fn cloud(m: usize, max: usize) -> impl Strategy<Value = Vec<Vec<f64>>> {
    prop::collection::vec(point(m), 1..max)
}

fn dims() -> impl Strategy<Value = usize> {
    2usize..=4
}

fn front_of(points: &[Vec<f64>]) -> Vec<Vec<f64>> {
    common::pairwise_non_dominated(points)
        .into_iter()
        .map(|i| points[i].clone())
        .collect()
}

fn bits(points: &[Vec<f64>]) -> BTreeSet<Vec<u64>> {
    points
        .iter()
        .map(|p| p.iter().map(|v| v.to_bits()).collect())
        .collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn filter_agrees_with_pairwise_oracle(points in dims().prop_flat_map(|m| cloud(m, 40))) {
        let fast: BTreeSet<usize> = non_dominated_indices(&points).unwrap().into_iter().collect();
        let kept = front_of(&points);
        // Duplicates are kept once by the filter; compare as value sets.
        let fast_values: Vec<Vec<f64>> = fast.iter().map(|&i| points[i].clone()).collect();
        prop_assert_eq!(bits(&fast_values), bits(&kept));
    }

    #[test]
    fn filter_is_idempotent_and_order_insensitive(points in dims().prop_flat_map(|m| cloud(m, 40)), seed in any::<u64>()) {
        let once: Vec<Vec<f64>> = non_dominated_indices(&points).unwrap().into_iter().map(|i| points[i].clone()).collect();
        let twice: Vec<Vec<f64>> = non_dominated_indices(&once).unwrap().into_iter().map(|i| once[i].clone()).collect();
        prop_assert_eq!(&once, &twice);
        let mut shuffled = points.clone();
        rand::seq::SliceRandom::shuffle(&mut shuffled[..], &mut ChaCha8Rng::seed_from_u64(seed));
        let other: Vec<Vec<f64>> = non_dominated_indices(&shuffled).unwrap().into_iter().map(|i| shuffled[i].clone()).collect();
        prop_assert_eq!(bits(&once), bits(&other));
    }

    #[test]
    fn hypervolume_grows_only_with_non_dominated_points(
        (points, extra) in dims().prop_flat_map(|m| (cloud(m, 15), point(m)))
    ) {
        let r = vec![1.0; points[0].len()];
        let base = hypervolume(&points, &r).unwrap();
        let mut more = points.clone();
        more.push(extra.clone());
        let grown = hypervolume(&more, &r).unwrap();
        let weakly_dominated = points.iter().any(|p| p.iter().zip(&extra).all(|(a, b)| a <= b));
        if weakly_dominated {
            prop_assert!((grown - base).abs() <= 1e-12 * base.max(1.0));
        } else {
            prop_assert!(grown > base);
        }
    }

    #[test]
    fn hvi_is_zero_exactly_for_dominated_batches(
        (archive, batch) in dims().prop_flat_map(|m| (cloud(m, 15), cloud(m, 5)))
    ) {
        let r = vec![1.0; archive[0].len()];
        let gain = hvi(&batch, &archive, &r).unwrap();
        prop_assert!(gain >= 0.0);
        let all_covered = batch
            .iter()
            .all(|b| archive.iter().any(|a| a.iter().zip(b).all(|(x, y)| x <= y)));
        prop_assert_eq!(gain <= 1e-12, all_covered);
    }

    #[test]
    fn exact_hypervolume_matches_monte_carlo(points in (2usize..=3).prop_flat_map(|m| cloud(m, 12)), seed in any::<u64>()) {
        let r = vec![1.0; points[0].len()];
        let exact = hypervolume(&points, &r).unwrap();
        let samples = 200_000;
        let mc = common::mc_hypervolume(&points, &r, samples, seed);
        let lo: f64 = (0..r.len()).map(|j| 1.0 - points.iter().map(|p| p[j]).fold(f64::INFINITY, f64::min)).product();
        let p = (exact / lo).clamp(1e-9, 1.0);
        let sigma = lo * (p * (1.0 - p) / samples as f64).sqrt();
        prop_assert!((exact - mc).abs() <= 6.0 * sigma + 1e-12, "exact {exact} mc {mc} sigma {sigma}");
    }

    #[test]
    fn distances_ignore_order_and_joint_translation(
        (a, b, shift) in dims().prop_flat_map(|m| (cloud(m, 12), cloud(m, 12), point(m))),
        seed in any::<u64>(),
    ) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut a2 = a.clone();
        let mut b2 = b.clone();
        rand::seq::SliceRandom::shuffle(&mut a2[..], &mut rng);
        rand::seq::SliceRandom::shuffle(&mut b2[..], &mut rng);
        prop_assert!((gd(&a, &b).unwrap() - gd(&a2, &b2).unwrap()).abs() <= 1e-12);
        prop_assert!((igd(&a, &b).unwrap() - igd(&a2, &b2).unwrap()).abs() <= 1e-12);
        let mv = |s: &[Vec<f64>]| -> Vec<Vec<f64>> {
            s.iter().map(|p| p.iter().zip(&shift).map(|(x, d)| x + 10.0 * d).collect()).collect()
        };
        prop_assert!((gd(&a, &b).unwrap() - gd(&mv(&a), &mv(&b)).unwrap()).abs() <= 1e-9);
        prop_assert!((igd(&a, &b).unwrap() - igd(&mv(&a), &mv(&b)).unwrap()).abs() <= 1e-9);
    }

    #[test]
    fn batches_are_balanced_across_regions(seed in any::<u64>(), b in 1usize..8) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        // Candidates along a trade-off curve, split into a few clumps.
        let n = rng.gen_range(1..30);
        let clumps = rng.gen_range(1..5);
        let inputs: Vec<Vec<f64>> = (0..n)
            .map(|_| {
                let c = rng.gen_range(0..clumps) as f64 / clumps as f64;
                vec![(c + 0.05 * rng.gen::<f64>()).min(1.0)]
            })
            .collect();
        let objectives: Vec<Vec<f64>> = inputs.iter().map(|x| vec![x[0], 1.0 - x[0] + 0.01 * rng.gen::<f64>()]).collect();
        let candidates = LocalFront { inputs, objectives };
        let bounds = vec![Domain::new(0.0, 1.0).unwrap()];
        let regions = diversity_regions(&candidates.inputs, &bounds, 8, 0.1);
        let archive = vec![vec![0.9, 0.9]];
        let sel = select_local_batch(&candidates, &regions, &archive, &[1.2, 1.2], b).unwrap();
        prop_assert_eq!(sel.indices.len(), b.min(n));
        let distinct: BTreeSet<usize> = sel.indices.iter().copied().collect();
        prop_assert_eq!(distinct.len(), sel.indices.len());
        let sizes = regions.sizes();
        let mut counts = vec![0usize; regions.k];
        for &i in &sel.indices {
            counts[regions.labels[i]] += 1;
        }
        let max = *counts.iter().max().unwrap();
        for (c, s) in counts.iter().zip(&sizes) {
            prop_assert!(c <= s);
            if c < s {
                prop_assert!(max - c <= 1, "counts {counts:?} sizes {sizes:?}");
            }
        }
    }
}
