//! Minimal unobserved-confounders' territory, interventional borders and the
//! possibly Pareto-optimal minimal intervention sets they characterize.

use std::collections::BTreeSet;

use super::{CausalGraph, GraphError, InterventionSet, Mask, Result, VariableId, VariableRole};

/// Default upper bound on the number of treatments for subset scans.
pub const DEFAULT_TREATMENT_CAP: usize = 20;

const CONSISTENCY_VERTEX_LIMIT: usize = 12;

fn ensure_targets(graph: &CausalGraph, y: &BTreeSet<VariableId>) -> Result<Mask> {
    if y.is_empty() {
        return Err(GraphError::NoTarget);
    }
    graph.mask_of(y)
}

/// Least fixpoint of `T <- De(CC(T)_H)_H` from `T = Y`, with `H = G[An(Y)]`.
pub(crate) fn muct_mask(graph: &CausalGraph, y: &[bool]) -> Mask {
    let h = graph.ancestors_mask(y, &graph.full());
    let mut t = y.to_vec();
    loop {
        let cc = graph.c_component_mask(&t, &h);
        let next = graph.descendants_mask(&cc, &h);
        if next == t {
            return t;
        }
        t = next;
    }
}

/// `pa(T) \ T` in `graph` with `T` the MUCT.
pub(crate) fn border_mask(graph: &CausalGraph, y: &[bool]) -> Mask {
    let t = muct_mask(graph, y);
    let mut out = vec![false; graph.len()];
    for i in (0..graph.len()).filter(|&i| t[i]) {
        for &p in graph.parents_of(i) {
            if !t[p] {
                out[p] = true;
            }
        }
    }
    out
}

pub fn muct(graph: &CausalGraph, y: &BTreeSet<VariableId>) -> Result<BTreeSet<VariableId>> {
    let y = ensure_targets(graph, y)?;
    Ok(graph.set_of(&muct_mask(graph, &y)))
}

pub fn interventional_border(
    graph: &CausalGraph,
    y: &BTreeSet<VariableId>,
) -> Result<InterventionSet> {
    let y = ensure_targets(graph, y)?;
    Ok(graph.set_of(&border_mask(graph, &y)).into())
}

/// True iff every member of `s` is an ancestor of a target in the do-graph.
pub fn is_minimal_intervention_set(graph: &CausalGraph, s: &InterventionSet) -> Result<bool> {
    let y = ensure_targets(graph, &graph.targets())?;
    let s = graph.intervention_mask(s)?;
    Ok(is_mis_mask(graph, &s, &y))
}

fn is_mis_mask(graph: &CausalGraph, s: &[bool], y: &[bool]) -> bool {
    let g = graph.mutilate_mask(s);
    let an = g.ancestors_mask(y, &g.full());
    (0..graph.len()).all(|i| !s[i] || an[i])
}

/// True iff `IB(G_{X̄_s}, Y) = s`.
pub fn is_pomis(graph: &CausalGraph, s: &InterventionSet) -> Result<bool> {
    let y = ensure_targets(graph, &graph.targets())?;
    let s = graph.intervention_mask(s)?;
    Ok(border_mask(&graph.mutilate_mask(&s), &y) == s)
}

fn treatment_indices(graph: &CausalGraph, cap: usize) -> Result<Vec<usize>> {
    let xs: Vec<usize> = (0..graph.len())
        .filter(|&i| graph.roles_slice()[i] == VariableRole::Treatment)
        .collect();
    if xs.len() > cap {
        return Err(GraphError::SearchSpaceTooLarge {
            count: xs.len(),
            cap,
        });
    }
    Ok(xs)
}

/// Every subset of the treatments, as masks, in increasing bit order.
fn subsets(graph: &CausalGraph, xs: &[usize]) -> impl Iterator<Item = Mask> {
    let n = graph.len();
    let xs = xs.to_vec();
    (0u64..(1u64 << xs.len())).map(move |bits| {
        let mut mask = vec![false; n];
        for (k, &i) in xs.iter().enumerate() {
            if bits >> k & 1 == 1 {
                mask[i] = true;
            }
        }
        mask
    })
}

fn sorted_sets(graph: &CausalGraph, masks: impl IntoIterator<Item = Mask>) -> Vec<InterventionSet> {
    masks
        .into_iter()
        .map(|m| InterventionSet::from(graph.set_of(&m)))
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect()
}

/// The exact POMIS family via a scan over all treatment subsets.
pub fn enumerate_pomis(graph: &CausalGraph) -> Result<Vec<InterventionSet>> {
    enumerate_pomis_with_cap(graph, DEFAULT_TREATMENT_CAP)
}

pub fn enumerate_pomis_with_cap(graph: &CausalGraph, cap: usize) -> Result<Vec<InterventionSet>> {
    let y = ensure_targets(graph, &graph.targets())?;
    let xs = treatment_indices(graph, cap)?;
    let fixpoints = subsets(graph, &xs).filter(|s| border_mask(&graph.mutilate_mask(s), &y) == *s);
    Ok(sorted_sets(graph, fixpoints))
}

/// Every minimal intervention set, sorted.
pub fn minimal_intervention_sets(graph: &CausalGraph) -> Result<Vec<InterventionSet>> {
    let y = ensure_targets(graph, &graph.targets())?;
    let xs = treatment_indices(graph, DEFAULT_TREATMENT_CAP)?;
    let mis = subsets(graph, &xs).filter(|s| is_mis_mask(graph, s, &y));
    Ok(sorted_sets(graph, mis))
}

/// Outcome of [`check_pomis_consistency`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConsistencyReport {
    pub subsets_checked: usize,
    pub territories_checked: usize,
    pub pomis: Vec<InterventionSet>,
    pub mis_count: usize,
}

fn is_uc_territory(graph: &CausalGraph, t: &[bool], h: &[bool]) -> bool {
    graph.descendants_mask(t, h) == t && graph.c_component_mask(t, h) == t
}

fn describe(graph: &CausalGraph, mask: &[bool]) -> String {
    InterventionSet::from(graph.set_of(mask)).to_string()
}

/// Brute-force cross-check of the border characterization on a small graph.
///
/// For every treatment subset `S` the border of the do-graph must itself be a
/// POMIS, the set of borders must equal the fixpoint scan, every POMIS must be
/// a MIS, and the MUCT of every do-graph must be a closed territory with no
/// smaller territory containing the targets.
pub fn check_pomis_consistency(graph: &CausalGraph) -> Result<ConsistencyReport> {
    if graph.len() > CONSISTENCY_VERTEX_LIMIT {
        return Err(GraphError::SearchSpaceTooLarge {
            count: graph.len(),
            cap: CONSISTENCY_VERTEX_LIMIT,
        });
    }
    let y = ensure_targets(graph, &graph.targets())?;
    let xs = treatment_indices(graph, DEFAULT_TREATMENT_CAP)?;
    let is_treatment = graph.role_mask(VariableRole::Treatment);

    let mut borders = Vec::new();
    let mut fixpoints = Vec::new();
    let mut subsets_checked = 0;
    let mut territories_checked = 0;
    for s in subsets(graph, &xs) {
        subsets_checked += 1;
        let g_s = graph.mutilate_mask(&s);
        let border = border_mask(&g_s, &y);
        if border == s {
            fixpoints.push(s.clone());
        }
        if (0..graph.len()).any(|i| border[i] && !is_treatment[i]) {
            return Err(GraphError::Consistency {
                check: "border within treatments",
                witness: describe(graph, &s),
            });
        }
        let g_b = graph.mutilate_mask(&border);
        if border_mask(&g_b, &y) != border {
            return Err(GraphError::Consistency {
                check: "border idempotence",
                witness: describe(graph, &s),
            });
        }

        let h = g_s.ancestors_mask(&y, &g_s.full());
        let t = muct_mask(&g_s, &y);
        if !is_uc_territory(&g_s, &t, &h) {
            return Err(GraphError::Consistency {
                check: "muct closure",
                witness: describe(graph, &s),
            });
        }
        let free: Vec<usize> = (0..graph.len()).filter(|&i| t[i] && !y[i]).collect();
        for bits in 0u64..(1u64 << free.len()) {
            if bits.count_ones() as usize == free.len() {
                continue;
            }
            territories_checked += 1;
            let mut sub = y.clone();
            for (k, &i) in free.iter().enumerate() {
                if bits >> k & 1 == 1 {
                    sub[i] = true;
                }
            }
            if is_uc_territory(&g_s, &sub, &h) {
                return Err(GraphError::Consistency {
                    check: "muct minimality",
                    witness: format!("{} under do{}", describe(graph, &sub), describe(graph, &s)),
                });
            }
        }
        borders.push(border);
    }

    let from_borders = sorted_sets(graph, borders);
    let from_fixpoints = sorted_sets(graph, fixpoints);
    if from_borders != from_fixpoints {
        let witness = from_borders
            .iter()
            .chain(from_fixpoints.iter())
            .find(|s| !(from_borders.contains(s) && from_fixpoints.contains(s)))
            .map(ToString::to_string)
            .unwrap_or_default();
        return Err(GraphError::Consistency {
            check: "border image equals fixpoint scan",
            witness,
        });
    }
    let mis = minimal_intervention_sets(graph)?;
    if let Some(bad) = from_fixpoints.iter().find(|s| !mis.contains(s)) {
        return Err(GraphError::Consistency {
            check: "pomis within mis",
            witness: bad.to_string(),
        });
    }
    Ok(ConsistencyReport {
        subsets_checked,
        territories_checked,
        pomis: from_fixpoints,
        mis_count: mis.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::fixtures::*;

    #[test]
    fn muct_without_confounders_is_targets() {
        let g = fig_a();
        assert_eq!(muct(&g, &g.targets()).unwrap(), ids(&["Y1", "Y2"]));
        assert_eq!(
            interventional_border(&g, &g.targets()).unwrap(),
            iset(&["X1", "X2"])
        );
    }

    #[test]
    fn muct_absorbs_confounded_ancestor_and_its_descendants() {
        let g = fig_b();
        assert_eq!(
            muct(&g, &g.targets()).unwrap(),
            ids(&["X1", "X4", "Y1", "Y2"])
        );
        assert_eq!(
            interventional_border(&g, &g.targets()).unwrap(),
            iset(&["X2", "X3"])
        );
    }

    #[test]
    fn isolated_targets_have_empty_border() {
        let g = graph("[variables]\nX: treatment\nY: target\n");
        assert!(interventional_border(&g, &g.targets()).unwrap().is_empty());
        assert_eq!(enumerate_pomis(&g).unwrap(), vec![InterventionSet::empty()]);
    }

    #[test]
    fn minimal_intervention_sets_examples() {
        assert!(is_minimal_intervention_set(&fig_b(), &InterventionSet::empty()).unwrap());
        let chain = graph(
            "[variables]\nX1: treatment\nX2: treatment\nY: target\n[edges]\nX1 -> X2\nX2 -> Y\n",
        );
        assert!(!is_minimal_intervention_set(&chain, &iset(&["X1", "X2"])).unwrap());
        assert!(is_minimal_intervention_set(&chain, &iset(&["X1"])).unwrap());
        assert!(is_minimal_intervention_set(&fig_b(), &iset(&["X4"])).unwrap());
    }

    #[test]
    fn pomis_membership() {
        assert!(is_pomis(&fig_a(), &iset(&["X1", "X2"])).unwrap());
        assert!(is_pomis(&fig_b(), &iset(&["X2", "X3"])).unwrap());
        assert!(is_pomis(&fig_b(), &iset(&["X1", "X2", "X3"])).unwrap());
        assert!(!is_pomis(&fig_b(), &iset(&["X4"])).unwrap());
    }

    #[test]
    fn pomis_families() {
        assert_eq!(
            enumerate_pomis(&fig_a()).unwrap(),
            vec![iset(&["X1", "X2"])]
        );
        assert_eq!(
            enumerate_pomis(&fig_b()).unwrap(),
            vec![iset(&["X1", "X2", "X3"]), iset(&["X2", "X3"])]
        );
    }

    #[test]
    fn treatment_cap_is_enforced() {
        assert_eq!(
            enumerate_pomis_with_cap(&fig_a(), 3),
            Err(GraphError::SearchSpaceTooLarge { count: 4, cap: 3 })
        );
    }

    #[test]
    fn consistency_on_paper_style_graphs() {
        let a = check_pomis_consistency(&fig_a()).unwrap();
        assert_eq!(a.subsets_checked, 16);
        assert_eq!(a.pomis, vec![iset(&["X1", "X2"])]);
        let b = check_pomis_consistency(&fig_b()).unwrap();
        assert_eq!(b.pomis.len(), 2);
        assert!(b.territories_checked > 0);
    }
}

/// Structural summary of a graph after projecting out its non-manipulative
/// variables.
#[derive(Debug, Clone, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct GraphAnalysis {
    pub projected: String,
    pub hidden: BTreeSet<VariableId>,
    pub targets: BTreeSet<VariableId>,
    pub muct: BTreeSet<VariableId>,
    pub interventional_border: InterventionSet,
    pub pomis: Vec<InterventionSet>,
    pub mis: Vec<InterventionSet>,
}

pub fn analyze(graph: &CausalGraph) -> Result<GraphAnalysis> {
    let projected = super::latent_project(graph)?;
    let targets = projected.targets();
    Ok(GraphAnalysis {
        projected: super::format_graph(&projected),
        hidden: graph.non_manipulative(),
        muct: muct(&projected, &targets)?,
        interventional_border: interventional_border(&projected, &targets)?,
        pomis: enumerate_pomis(&projected)?,
        mis: minimal_intervention_sets(&projected)?,
        targets,
    })
}
