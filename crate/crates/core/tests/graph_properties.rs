mod common;

use std::collections::BTreeSet;

use causal_pareto::graph::{
    check_pomis_consistency, enumerate_pomis, interventional_border, is_minimal_intervention_set,
    is_pomis, latent_project, muct, project_out, CausalGraph, InterventionSet,
};
use proptest::prelude::*;

fn projected(seed: u64, max_bidirected: usize) -> CausalGraph {
    latent_project(&common::random_admg(seed, 8, max_bidirected)).unwrap()
}

/// Every subset of the treatments, as intervention sets.
fn treatment_subsets(g: &CausalGraph) -> Vec<InterventionSet> {
    let xs: Vec<_> = g.treatments().into_iter().collect();
    (0u32..1 << xs.len())
        .map(|bits| {
            InterventionSet::from(
                xs.iter()
                    .enumerate()
                    .filter(|(k, _)| bits >> k & 1 == 1)
                    .map(|(_, v)| v.clone())
                    .collect::<BTreeSet<_>>(),
            )
        })
        .collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn border_of_any_do_graph_is_a_pomis(seed in any::<u64>()) {
        let g = projected(seed, 3);
        let y = g.targets();
        for s in treatment_subsets(&g) {
            let border = interventional_border(&g.mutilate(&s).unwrap(), &y).unwrap();
            prop_assert!(is_pomis(&g, &border).unwrap(), "border {} of do{}", border, s);
        }
    }

    #[test]
    fn enumeration_matches_both_characterizations(seed in any::<u64>()) {
        let g = projected(seed, 3);
        let y = g.targets();
        let subsets = treatment_subsets(&g);
        let fixpoints: BTreeSet<InterventionSet> = subsets
            .iter()
            .filter(|s| &interventional_border(&g.mutilate(s).unwrap(), &y).unwrap() == *s)
            .cloned()
            .collect();
        let images: BTreeSet<InterventionSet> = subsets
            .iter()
            .map(|s| interventional_border(&g.mutilate(s).unwrap(), &y).unwrap())
            .collect();
        let enumerated: BTreeSet<InterventionSet> = enumerate_pomis(&g).unwrap().into_iter().collect();
        prop_assert_eq!(&enumerated, &fixpoints);
        prop_assert_eq!(&enumerated, &images);
        prop_assert!(check_pomis_consistency(&g).is_ok());
    }

    #[test]
    fn every_pomis_is_a_mis(seed in any::<u64>()) {
        let g = projected(seed, 3);
        for s in enumerate_pomis(&g).unwrap() {
            prop_assert!(is_minimal_intervention_set(&g, &s).unwrap(), "{}", s);
        }
    }

    #[test]
    fn muct_is_closed_in_the_ancestral_graph(seed in any::<u64>()) {
        let g = projected(seed, 3);
        let y = g.targets();
        let t = muct(&g, &y).unwrap();
        let h = g.subgraph(&g.ancestors_inclusive(&y).unwrap()).unwrap();
        prop_assert_eq!(&h.descendants_inclusive(&t).unwrap(), &t);
        prop_assert_eq!(&h.c_component(&t).unwrap(), &t);
        prop_assert!(y.is_subset(&t));
    }

    #[test]
    fn without_confounders_only_the_parents_are_pomis(seed in any::<u64>()) {
        let g = projected(seed, 0);
        prop_assume!(g.bidirected_edges().is_empty());
        let y = g.targets();
        let pa: BTreeSet<_> = g.parents(&y).unwrap().difference(&y).cloned().collect();
        prop_assert_eq!(enumerate_pomis(&g).unwrap(), vec![InterventionSet::from(pa)]);
    }

    #[test]
    fn mutilation_is_idempotent(seed in any::<u64>(), pick in any::<u32>()) {
        let g = projected(seed, 3);
        let subsets = treatment_subsets(&g);
        let s = &subsets[pick as usize % subsets.len()];
        let once = g.mutilate(s).unwrap();
        prop_assert_eq!(&once.mutilate(s).unwrap(), &once);
        prop_assert_eq!(&g.mutilate(&InterventionSet::empty()).unwrap(), &g);
    }

    #[test]
    fn projection_is_identity_without_hidden_and_stays_acyclic(seed in any::<u64>()) {
        let g = common::random_admg(seed, 8, 3);
        prop_assert_eq!(&project_out(&g, &BTreeSet::new()).unwrap(), &g);
        let p = latent_project(&g).unwrap();
        prop_assert_eq!(p.topological_names().len(), p.len());
        prop_assert!(p.non_manipulative().is_empty());
        prop_assert_eq!(p.len(), g.len() - g.non_manipulative().len());
    }
}
