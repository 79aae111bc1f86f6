//! Latent projection of non-manipulative variables.

use std::collections::{BTreeMap, BTreeSet};

use super::{CausalGraph, GraphError, Mask, Result, VariableId, VariableRole};

/// Projects out every non-manipulative variable.
pub fn latent_project(graph: &CausalGraph) -> Result<CausalGraph> {
    project_out(graph, &graph.non_manipulative())
}

/// Projection of `graph` onto `V \ hidden`.
///
/// `A -> B` survives iff a directed path from `A` to `B` runs through hidden
/// vertices only. `A <-> B` is added iff a collider-free path between them has
/// arrowheads at both ends and only hidden intermediates: a hidden common
/// cause, or an original bidirected edge between two vertices that reach `A`
/// and `B` through hidden directed paths.
pub fn project_out(graph: &CausalGraph, hidden: &BTreeSet<VariableId>) -> Result<CausalGraph> {
    for v in hidden {
        if graph.role(v.as_str())? == VariableRole::Target {
            return Err(GraphError::TargetProjected(v.to_string()));
        }
    }
    let c = graph.mask_of(hidden)?;
    let n = graph.len();
    let kept: Vec<usize> = (0..n).filter(|&i| !c[i]).collect();

    // Hidden vertices with a hidden-only directed path into each kept vertex.
    let hidden_sources: BTreeMap<usize, Mask> = kept
        .iter()
        .map(|&v| {
            let direct: Mask = (0..n)
                .map(|i| c[i] && graph.parents_of(v).contains(&i))
                .collect();
            (v, graph.closure(&direct, &c, |i| graph.parents_of(i)))
        })
        .collect();

    let mut directed = BTreeSet::new();
    for &b in &kept {
        let sources = &hidden_sources[&b];
        for &a in &kept {
            let via_hidden = (0..n).any(|h| sources[h] && graph.parents_of(h).contains(&a));
            if graph.parents_of(b).contains(&a) || via_hidden {
                directed.insert((graph.name(a).clone(), graph.name(b).clone()));
            }
        }
    }

    let mut bidirected = BTreeSet::new();
    for (ka, &a) in kept.iter().enumerate() {
        for &b in &kept[ka + 1..] {
            let (sa, sb) = (&hidden_sources[&a], &hidden_sources[&b]);
            let common_cause = (0..n).any(|h| sa[h] && sb[h]);
            let reach_a: Vec<usize> = std::iter::once(a)
                .chain((0..n).filter(|&h| sa[h]))
                .collect();
            let reach_b: Vec<usize> = std::iter::once(b)
                .chain((0..n).filter(|&h| sb[h]))
                .collect();
            let confounded = reach_a
                .iter()
                .any(|&u| reach_b.iter().any(|w| graph.spouses_of(u).contains(w)));
            if common_cause || confounded {
                bidirected.insert((graph.name(a).clone(), graph.name(b).clone()));
            }
        }
    }

    let vertices = kept
        .iter()
        .map(|&i| (graph.name(i).clone(), graph.roles_slice()[i]));
    CausalGraph::new(vertices, directed, bidirected)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::fixtures::*;
    use crate::graph::{enumerate_pomis, parse_graph};

    #[test]
    fn no_hidden_variables_is_identity() {
        let g = fig_b();
        assert_eq!(latent_project(&g).unwrap(), g);
    }

    #[test]
    fn contracts_a_hidden_mediator() {
        let g = graph(
            "[variables]\nA: treatment\nC: nonmanipulative\nB: target\n[edges]\nA -> C\nC -> B\n",
        );
        let p = latent_project(&g).unwrap();
        assert_eq!(p.len(), 2);
        assert!(p.has_directed_edge("A", "B"));
        assert!(p.bidirected_edges().is_empty());
    }

    #[test]
    fn hidden_common_cause_becomes_bidirected() {
        let g = graph(
            "[variables]\nA: treatment\nB: target\nH: nonmanipulative\nK: nonmanipulative\n\
             [edges]\nK -> H\nH -> A\nK -> B\n",
        );
        let p = latent_project(&g).unwrap();
        assert!(p.has_bidirected_edge("A", "B"));
        assert!(p.directed_edges().is_empty());
    }

    #[test]
    fn collider_does_not_confound() {
        let g = graph(
            "[variables]\nA: treatment\nB: target\nH: nonmanipulative\n[edges]\nA -> H\nB -> H\n",
        );
        let p = latent_project(&g).unwrap();
        assert!(p.bidirected_edges().is_empty());
        assert!(p.directed_edges().is_empty());
    }

    #[test]
    fn confounder_into_hidden_chain_propagates() {
        let g = graph(
            "[variables]\nA: treatment\nB: target\nH: nonmanipulative\n\
             [edges]\nH -> B\nA <-> H\n",
        );
        assert!(latent_project(&g).unwrap().has_bidirected_edge("A", "B"));
    }

    #[test]
    fn rejects_projecting_a_target() {
        let g = fig_a();
        assert_eq!(
            project_out(&g, &ids(&["Y1"])),
            Err(GraphError::TargetProjected("Y1".into()))
        );
    }

    #[test]
    fn age_confounds_its_children_after_projection() {
        let g = parse_graph(include_str!("../../problems/health.scm")).unwrap();
        let p = latent_project(&g).unwrap();
        assert!(!p.contains("Age"));
        assert!(p.has_bidirected_edge("PSA", "Statin"));
        assert_eq!(
            enumerate_pomis(&p).unwrap(),
            vec![iset(&["Aspirin", "BMI"])]
        );
    }
}
