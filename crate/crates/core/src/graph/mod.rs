//! Acyclic directed mixed graphs (ADMGs) with variable roles.
//!
//! Directed edges carry direct causal effects, bidirected edges stand for an
//! unobserved confounder shared by their endpoints. Vertices are kept sorted
//! by name so every derived set and every enumeration is deterministic.

mod pomis;
mod projection;
pub(crate) mod text;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use pomis::{
    analyze, check_pomis_consistency, enumerate_pomis, enumerate_pomis_with_cap,
    interventional_border, is_minimal_intervention_set, is_pomis, minimal_intervention_sets, muct,
    ConsistencyReport, GraphAnalysis, DEFAULT_TREATMENT_CAP,
};
pub use projection::{latent_project, project_out};
pub use text::{format_graph, parse_graph, parse_role};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum GraphError {
    #[error("unknown variable `{0}`")]
    UnknownVertex(String),
    #[error("variable `{0}` declared twice")]
    DuplicateVertex(String),
    #[error("invalid variable name `{0}`")]
    InvalidName(String),
    #[error("self-loop on `{0}`")]
    SelfLoop(String),
    #[error("directed cycle through `{0}`")]
    Cycle(String),
    #[error("graph has no target variable")]
    NoTarget,
    #[error("`{0}` is a target and cannot be intervened upon")]
    TargetIntervened(String),
    #[error("`{0}` is not a treatment variable")]
    NotTreatment(String),
    #[error("`{0}` is a target and cannot be projected out")]
    TargetProjected(String),
    #[error("search space too large: {count} treatments exceeds the cap of {cap}")]
    SearchSpaceTooLarge { count: usize, cap: usize },
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("consistency failure in {check}: witness {witness}")]
    Consistency {
        check: &'static str,
        witness: String,
    },
}

pub type Result<T, E = GraphError> = std::result::Result<T, E>;

/// Name of an endogenous variable.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct VariableId(String);

impl VariableId {
    pub fn new(name: impl Into<String>) -> Result<Self> {
        let name = name.into();
        if is_identifier(&name) {
            Ok(Self(name))
        } else {
            Err(GraphError::InvalidName(name))
        }
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

pub(crate) fn is_identifier(s: &str) -> bool {
    let mut chars = s.chars();
    match chars.next() {
        Some(c) if c.is_ascii_alphabetic() || c == '_' => {}
        _ => return false,
    }
    chars.all(|c| c.is_ascii_alphanumeric() || c == '_')
}

impl fmt::Display for VariableId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::borrow::Borrow<str> for VariableId {
    fn borrow(&self) -> &str {
        &self.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VariableRole {
    Treatment,
    Target,
    NonManipulative,
}

impl fmt::Display for VariableRole {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            VariableRole::Treatment => "treatment",
            VariableRole::Target => "target",
            VariableRole::NonManipulative => "nonmanipulative",
        })
    }
}

/// A set of treatment variables to intervene upon. The empty set is the
/// observational regime.
#[derive(Debug, Clone, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct InterventionSet(BTreeSet<VariableId>);

impl InterventionSet {
    pub fn empty() -> Self {
        Self::default()
    }

    pub fn from_names<I, S>(names: I) -> Result<Self>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        names
            .into_iter()
            .map(VariableId::new)
            .collect::<Result<BTreeSet<_>>>()
            .map(Self)
    }

    pub fn members(&self) -> &BTreeSet<VariableId> {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn contains(&self, v: &str) -> bool {
        self.0.contains(v)
    }

    pub fn iter(&self) -> impl Iterator<Item = &VariableId> {
        self.0.iter()
    }

    /// Compact tag such as `{X1,X2}`; `{}` for the empty set.
    pub fn tag(&self) -> String {
        self.to_string()
    }
}

impl From<BTreeSet<VariableId>> for InterventionSet {
    fn from(set: BTreeSet<VariableId>) -> Self {
        Self(set)
    }
}

impl fmt::Display for InterventionSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("{")?;
        for (i, v) in self.0.iter().enumerate() {
            if i > 0 {
                f.write_str(",")?;
            }
            f.write_str(v.as_str())?;
        }
        f.write_str("}")
    }
}

/// Vertex subset over a graph's index space.
pub(crate) type Mask = Vec<bool>;

/// An acyclic directed mixed graph whose vertices are sorted by name.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CausalGraph {
    names: Vec<VariableId>,
    roles: Vec<VariableRole>,
    index: BTreeMap<VariableId, usize>,
    parents: Vec<Vec<usize>>,
    children: Vec<Vec<usize>>,
    spouses: Vec<Vec<usize>>,
}

impl CausalGraph {
    /// Builds and validates a graph. Bidirected pairs are unordered; duplicate
    /// edges collapse.
    pub fn new(
        vertices: impl IntoIterator<Item = (VariableId, VariableRole)>,
        directed: impl IntoIterator<Item = (VariableId, VariableId)>,
        bidirected: impl IntoIterator<Item = (VariableId, VariableId)>,
    ) -> Result<Self> {
        let mut roles_by_name = BTreeMap::new();
        for (v, role) in vertices {
            if roles_by_name.insert(v.clone(), role).is_some() {
                return Err(GraphError::DuplicateVertex(v.to_string()));
            }
        }
        let names: Vec<VariableId> = roles_by_name.keys().cloned().collect();
        let roles: Vec<VariableRole> = roles_by_name.values().copied().collect();
        let index: BTreeMap<VariableId, usize> = names
            .iter()
            .cloned()
            .enumerate()
            .map(|(i, v)| (v, i))
            .collect();
        let n = names.len();
        let lookup = |v: &VariableId| -> Result<usize> {
            index
                .get(v)
                .copied()
                .ok_or_else(|| GraphError::UnknownVertex(v.to_string()))
        };

        let mut dir = BTreeSet::new();
        for (a, b) in directed {
            let (i, j) = (lookup(&a)?, lookup(&b)?);
            if i == j {
                return Err(GraphError::SelfLoop(a.to_string()));
            }
            dir.insert((i, j));
        }
        let mut bi = BTreeSet::new();
        for (a, b) in bidirected {
            let (i, j) = (lookup(&a)?, lookup(&b)?);
            if i == j {
                return Err(GraphError::SelfLoop(a.to_string()));
            }
            bi.insert((i.min(j), i.max(j)));
        }
        let graph = Self::from_indexed(names, roles, index, n, &dir, &bi);
        graph.check_acyclic()?;
        Ok(graph)
    }

    fn from_indexed(
        names: Vec<VariableId>,
        roles: Vec<VariableRole>,
        index: BTreeMap<VariableId, usize>,
        n: usize,
        dir: &BTreeSet<(usize, usize)>,
        bi: &BTreeSet<(usize, usize)>,
    ) -> Self {
        let mut parents = vec![Vec::new(); n];
        let mut children = vec![Vec::new(); n];
        let mut spouses = vec![Vec::new(); n];
        for &(i, j) in dir {
            children[i].push(j);
            parents[j].push(i);
        }
        for &(i, j) in bi {
            spouses[i].push(j);
            spouses[j].push(i);
        }
        for list in parents
            .iter_mut()
            .chain(children.iter_mut())
            .chain(spouses.iter_mut())
        {
            list.sort_unstable();
        }
        Self {
            names,
            roles,
            index,
            parents,
            children,
            spouses,
        }
    }

    /// Rebuilds a graph keeping only the edges accepted by the filters.
    fn filtered(
        &self,
        keep_directed: impl Fn(usize, usize) -> bool,
        keep_bidirected: impl Fn(usize, usize) -> bool,
    ) -> Self {
        let dir: BTreeSet<_> = self
            .directed_pairs()
            .filter(|&(i, j)| keep_directed(i, j))
            .collect();
        let bi: BTreeSet<_> = self
            .bidirected_pairs()
            .filter(|&(i, j)| keep_bidirected(i, j))
            .collect();
        Self::from_indexed(
            self.names.clone(),
            self.roles.clone(),
            self.index.clone(),
            self.len(),
            &dir,
            &bi,
        )
    }

    fn check_acyclic(&self) -> Result<()> {
        let n = self.len();
        let mut indegree: Vec<usize> = self.parents.iter().map(Vec::len).collect();
        let mut queue: Vec<usize> = (0..n).filter(|&i| indegree[i] == 0).collect();
        let mut seen = 0;
        while let Some(i) = queue.pop() {
            seen += 1;
            for &c in &self.children[i] {
                indegree[c] -= 1;
                if indegree[c] == 0 {
                    queue.push(c);
                }
            }
        }
        if seen == n {
            Ok(())
        } else {
            let on_cycle = (0..n).find(|&i| indegree[i] > 0).unwrap_or(0);
            Err(GraphError::Cycle(self.names[on_cycle].to_string()))
        }
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn vertices(&self) -> impl Iterator<Item = (&VariableId, VariableRole)> {
        self.names.iter().zip(self.roles.iter().copied())
    }

    pub fn vertex_set(&self) -> BTreeSet<VariableId> {
        self.names.iter().cloned().collect()
    }

    pub fn role(&self, v: &str) -> Result<VariableRole> {
        self.idx(v).map(|i| self.roles[i])
    }

    pub fn contains(&self, v: &str) -> bool {
        self.index.contains_key(v)
    }

    fn with_role(&self, role: VariableRole) -> BTreeSet<VariableId> {
        self.vertices()
            .filter(|(_, r)| *r == role)
            .map(|(v, _)| v.clone())
            .collect()
    }

    pub fn targets(&self) -> BTreeSet<VariableId> {
        self.with_role(VariableRole::Target)
    }

    pub fn treatments(&self) -> BTreeSet<VariableId> {
        self.with_role(VariableRole::Treatment)
    }

    pub fn non_manipulative(&self) -> BTreeSet<VariableId> {
        self.with_role(VariableRole::NonManipulative)
    }

    /// Directed edges as `(from, to)` in sorted order.
    pub fn directed_edges(&self) -> Vec<(VariableId, VariableId)> {
        self.directed_pairs()
            .map(|(i, j)| (self.names[i].clone(), self.names[j].clone()))
            .collect()
    }

    /// Bidirected edges with the smaller name first, in sorted order.
    pub fn bidirected_edges(&self) -> Vec<(VariableId, VariableId)> {
        self.bidirected_pairs()
            .map(|(i, j)| (self.names[i].clone(), self.names[j].clone()))
            .collect()
    }

    pub(crate) fn directed_pairs(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.children
            .iter()
            .enumerate()
            .flat_map(|(i, cs)| cs.iter().map(move |&j| (i, j)))
    }

    pub(crate) fn bidirected_pairs(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.spouses
            .iter()
            .enumerate()
            .flat_map(|(i, ss)| ss.iter().filter(move |&&j| j > i).map(move |&j| (i, j)))
    }

    pub fn has_directed_edge(&self, from: &str, to: &str) -> bool {
        match (self.index.get(from), self.index.get(to)) {
            (Some(&i), Some(&j)) => self.children[i].contains(&j),
            _ => false,
        }
    }

    pub fn has_bidirected_edge(&self, a: &str, b: &str) -> bool {
        match (self.index.get(a), self.index.get(b)) {
            (Some(&i), Some(&j)) => self.spouses[i].contains(&j),
            _ => false,
        }
    }

    // ---- index-space helpers -------------------------------------------

    pub(crate) fn idx(&self, v: &str) -> Result<usize> {
        self.index
            .get(v)
            .copied()
            .ok_or_else(|| GraphError::UnknownVertex(v.to_string()))
    }

    pub(crate) fn mask_of<'a, I>(&self, set: I) -> Result<Mask>
    where
        I: IntoIterator<Item = &'a VariableId>,
    {
        let mut mask = vec![false; self.len()];
        for v in set {
            mask[self.idx(v.as_str())?] = true;
        }
        Ok(mask)
    }

    pub(crate) fn set_of(&self, mask: &[bool]) -> BTreeSet<VariableId> {
        mask.iter()
            .enumerate()
            .filter(|(_, &m)| m)
            .map(|(i, _)| self.names[i].clone())
            .collect()
    }

    pub(crate) fn role_mask(&self, role: VariableRole) -> Mask {
        self.roles.iter().map(|&r| r == role).collect()
    }

    pub(crate) fn name(&self, i: usize) -> &VariableId {
        &self.names[i]
    }

    pub(crate) fn roles_slice(&self) -> &[VariableRole] {
        &self.roles
    }

    pub(crate) fn parents_of(&self, i: usize) -> &[usize] {
        &self.parents[i]
    }

    pub(crate) fn children_of(&self, i: usize) -> &[usize] {
        &self.children[i]
    }

    pub(crate) fn spouses_of(&self, i: usize) -> &[usize] {
        &self.spouses[i]
    }

    /// Closure of `start` along the adjacency given by `next`, restricted to
    /// `within`. Seeds are included.
    pub(crate) fn closure<'a>(
        &'a self,
        start: &[bool],
        within: &[bool],
        next: impl Fn(usize) -> &'a [usize],
    ) -> Mask {
        let mut out = vec![false; self.len()];
        let mut stack: Vec<usize> = (0..self.len()).filter(|&i| start[i] && within[i]).collect();
        for &i in &stack {
            out[i] = true;
        }
        while let Some(i) = stack.pop() {
            for &j in next(i) {
                if within[j] && !out[j] {
                    out[j] = true;
                    stack.push(j);
                }
            }
        }
        out
    }

    pub(crate) fn ancestors_mask(&self, s: &[bool], within: &[bool]) -> Mask {
        self.closure(s, within, |i| self.parents_of(i))
    }

    pub(crate) fn descendants_mask(&self, s: &[bool], within: &[bool]) -> Mask {
        self.closure(s, within, |i| self.children_of(i))
    }

    pub(crate) fn c_component_mask(&self, s: &[bool], within: &[bool]) -> Mask {
        self.closure(s, within, |i| self.spouses_of(i))
    }

    pub(crate) fn full(&self) -> Mask {
        vec![true; self.len()]
    }

    /// Vertex indices in a topological order (parents before children, ties
    /// by name).
    pub(crate) fn topological_order(&self) -> Vec<usize> {
        let n = self.len();
        let mut indegree: Vec<usize> = self.parents.iter().map(Vec::len).collect();
        let mut ready: BTreeSet<usize> = (0..n).filter(|&i| indegree[i] == 0).collect();
        let mut order = Vec::with_capacity(n);
        while let Some(i) = ready.pop_first() {
            order.push(i);
            for &c in &self.children[i] {
                indegree[c] -= 1;
                if indegree[c] == 0 {
                    ready.insert(c);
                }
            }
        }
        order
    }

    pub fn topological_names(&self) -> Vec<VariableId> {
        self.topological_order()
            .into_iter()
            .map(|i| self.names[i].clone())
            .collect()
    }

    // ---- public graph operations ---------------------------------------

    /// `pa(S)`: direct causes of members of `S`. A member of `S` is only
    /// included when it is a parent of another member.
    pub fn parents(&self, s: &BTreeSet<VariableId>) -> Result<BTreeSet<VariableId>> {
        let mask = self.mask_of(s)?;
        let mut out = vec![false; self.len()];
        for (i, _) in mask.iter().enumerate().filter(|(_, &m)| m) {
            for &p in &self.parents[i] {
                out[p] = true;
            }
        }
        Ok(self.set_of(&out))
    }

    /// `Pa(S) = pa(S) ∪ S`.
    pub fn parents_inclusive(&self, s: &BTreeSet<VariableId>) -> Result<BTreeSet<VariableId>> {
        let mut out = self.parents(s)?;
        out.extend(s.iter().cloned());
        Ok(out)
    }

    /// `an(S)`: every vertex with a directed path into `S`. Members of `S`
    /// appear only when they are ancestors of another member.
    pub fn ancestors(&self, s: &BTreeSet<VariableId>) -> Result<BTreeSet<VariableId>> {
        let mask = self.mask_of(s)?;
        Ok(self.set_of(&self.strict_closure(&mask, |i| self.parents_of(i))))
    }

    /// `An(S) = an(S) ∪ S`.
    pub fn ancestors_inclusive(&self, s: &BTreeSet<VariableId>) -> Result<BTreeSet<VariableId>> {
        let mask = self.mask_of(s)?;
        Ok(self.set_of(&self.ancestors_mask(&mask, &self.full())))
    }

    /// `de(S)`: every vertex reachable from `S` along directed edges.
    pub fn descendants(&self, s: &BTreeSet<VariableId>) -> Result<BTreeSet<VariableId>> {
        let mask = self.mask_of(s)?;
        Ok(self.set_of(&self.strict_closure(&mask, |i| self.children_of(i))))
    }

    /// `De(S) = de(S) ∪ S`.
    pub fn descendants_inclusive(&self, s: &BTreeSet<VariableId>) -> Result<BTreeSet<VariableId>> {
        let mask = self.mask_of(s)?;
        Ok(self.set_of(&self.descendants_mask(&mask, &self.full())))
    }

    /// Vertices reachable by at least one step from `s`.
    fn strict_closure<'a>(&'a self, s: &[bool], next: impl Fn(usize) -> &'a [usize]) -> Mask {
        let mut first_step = vec![false; self.len()];
        for i in (0..self.len()).filter(|&i| s[i]) {
            for &j in next(i) {
                first_step[j] = true;
            }
        }
        self.closure(&first_step, &self.full(), next)
    }

    /// The do-graph `G_{X̄_s}`: all directed edges into members of `s` and
    /// all bidirected edges touching them are removed.
    pub fn mutilate(&self, s: &InterventionSet) -> Result<CausalGraph> {
        let mask = self.intervention_mask(s)?;
        Ok(self.mutilate_mask(&mask))
    }

    pub(crate) fn intervention_mask(&self, s: &InterventionSet) -> Result<Mask> {
        for v in s.iter() {
            match self.role(v.as_str())? {
                VariableRole::Treatment => {}
                VariableRole::Target => return Err(GraphError::TargetIntervened(v.to_string())),
                VariableRole::NonManipulative => {
                    return Err(GraphError::NotTreatment(v.to_string()))
                }
            }
        }
        self.mask_of(s.iter())
    }

    pub(crate) fn mutilate_mask(&self, s: &[bool]) -> CausalGraph {
        self.filtered(|_, j| !s[j], |i, j| !s[i] && !s[j])
    }

    /// `G[W]`: the induced subgraph on `w`.
    pub fn subgraph(&self, w: &BTreeSet<VariableId>) -> Result<CausalGraph> {
        let mask = self.mask_of(w)?;
        Ok(self.subgraph_mask(&mask))
    }

    pub(crate) fn subgraph_mask(&self, w: &[bool]) -> CausalGraph {
        let keep: Vec<usize> = (0..self.len()).filter(|&i| w[i]).collect();
        let mut remap = vec![usize::MAX; self.len()];
        for (new, &old) in keep.iter().enumerate() {
            remap[old] = new;
        }
        let names: Vec<VariableId> = keep.iter().map(|&i| self.names[i].clone()).collect();
        let roles: Vec<VariableRole> = keep.iter().map(|&i| self.roles[i]).collect();
        let index = names
            .iter()
            .cloned()
            .enumerate()
            .map(|(i, v)| (v, i))
            .collect();
        let dir: BTreeSet<_> = self
            .directed_pairs()
            .filter(|&(i, j)| w[i] && w[j])
            .map(|(i, j)| (remap[i], remap[j]))
            .collect();
        let bi: BTreeSet<_> = self
            .bidirected_pairs()
            .filter(|&(i, j)| w[i] && w[j])
            .map(|(i, j)| (remap[i], remap[j]))
            .collect();
        Self::from_indexed(names, roles, index, keep.len(), &dir, &bi)
    }

    /// `CC(S)`: the union of the bidirected components touching `s`.
    pub fn c_component(&self, s: &BTreeSet<VariableId>) -> Result<BTreeSet<VariableId>> {
        let mask = self.mask_of(s)?;
        Ok(self.set_of(&self.c_component_mask(&mask, &self.full())))
    }
}

#[cfg(test)]
pub(crate) mod fixtures {
    use super::*;

    pub fn ids(names: &[&str]) -> BTreeSet<VariableId> {
        names.iter().map(|n| VariableId::new(*n).unwrap()).collect()
    }

    pub fn iset(names: &[&str]) -> InterventionSet {
        InterventionSet::from_names(names.iter().copied()).unwrap()
    }

    pub fn graph(text: &str) -> CausalGraph {
        parse_graph(text).unwrap()
    }

    pub fn chain() -> CausalGraph {
        graph("[variables]\nA: treatment\nB: treatment\nC: target\n[edges]\nA -> B\nB -> C\n")
    }

    /// Two treatments feeding two targets, no confounding.
    pub fn fig_a() -> CausalGraph {
        graph(
            "[variables]
            X1: treatment
            X2: treatment
            X3: treatment
            X4: treatment
            Y1: target
            Y2: target
            [edges]
            X3 -> X4
            X4 -> X1
            X3 -> X2
            X1 -> Y1
            X1 -> Y2
            X2 -> Y1
            X2 -> Y2",
        )
    }

    /// X4 is confounded with Y1 and reaches it through X1.
    pub fn fig_b() -> CausalGraph {
        graph(
            "[variables]
            X1: treatment
            X2: treatment
            X3: treatment
            X4: treatment
            Y1: target
            Y2: target
            [edges]
            X4 -> X1
            X1 -> Y1
            X2 -> Y1
            X3 -> Y1
            X2 -> Y2
            X3 -> Y2
            X4 <-> Y1",
        )
    }
}

#[cfg(test)]
mod tests {
    use super::fixtures::*;
    use super::*;

    #[test]
    fn parents_of_chain_tail() {
        assert_eq!(chain().parents(&ids(&["C"])).unwrap(), ids(&["B"]));
        assert_eq!(
            chain().parents_inclusive(&ids(&["C"])).unwrap(),
            ids(&["B", "C"])
        );
    }

    #[test]
    fn parents_of_targets_in_fig_a() {
        assert_eq!(
            fig_a().parents(&ids(&["Y1", "Y2"])).unwrap(),
            ids(&["X1", "X2"])
        );
    }

    #[test]
    fn parent_inside_argument_is_kept() {
        assert_eq!(
            chain().parents(&ids(&["B", "C"])).unwrap(),
            ids(&["A", "B"])
        );
    }

    #[test]
    fn unknown_vertex_is_rejected() {
        assert_eq!(
            chain().parents(&ids(&["Z"])),
            Err(GraphError::UnknownVertex("Z".into()))
        );
    }

    #[test]
    fn ancestors_and_descendants() {
        let g = chain();
        assert_eq!(g.ancestors(&ids(&["C"])).unwrap(), ids(&["A", "B"]));
        assert_eq!(g.ancestors(&BTreeSet::new()).unwrap(), BTreeSet::new());
        assert_eq!(g.descendants(&ids(&["A"])).unwrap(), ids(&["B", "C"]));
        assert_eq!(
            g.descendants_inclusive(&ids(&["B"])).unwrap(),
            ids(&["B", "C"])
        );
        assert!(fig_b().ancestors(&ids(&["Y1"])).unwrap().contains("X4"));
    }

    #[test]
    fn mutilate_empty_is_identity() {
        let g = fig_b();
        assert_eq!(g.mutilate(&InterventionSet::empty()).unwrap(), g);
    }

    #[test]
    fn mutilate_chain_middle() {
        let m = chain().mutilate(&iset(&["B"])).unwrap();
        assert_eq!(
            m.directed_edges(),
            vec![(VariableId::new("B").unwrap(), VariableId::new("C").unwrap())]
        );
    }

    #[test]
    fn mutilate_keeps_confounder_not_touching_intervention() {
        let m = fig_b().mutilate(&iset(&["X1"])).unwrap();
        assert!(m.has_bidirected_edge("X4", "Y1"));
        assert!(!m.has_directed_edge("X4", "X1"));
        assert!(m.has_directed_edge("X1", "Y1"));
        let m4 = fig_b().mutilate(&iset(&["X4"])).unwrap();
        assert!(!m4.has_bidirected_edge("X4", "Y1"));
    }

    #[test]
    fn mutilate_rejects_targets() {
        assert_eq!(
            fig_b().mutilate(&iset(&["Y1"])),
            Err(GraphError::TargetIntervened("Y1".into()))
        );
    }

    #[test]
    fn mutilate_is_idempotent() {
        let g = fig_b();
        let s = iset(&["X1", "X4"]);
        let once = g.mutilate(&s).unwrap();
        assert_eq!(once.mutilate(&s).unwrap(), once);
    }

    #[test]
    fn subgraph_extremes() {
        let g = fig_b();
        assert_eq!(g.subgraph(&g.vertex_set()).unwrap(), g);
        assert!(g.subgraph(&BTreeSet::new()).unwrap().is_empty());
        let an_y = g.ancestors_inclusive(&g.targets()).unwrap();
        assert_eq!(g.subgraph(&an_y).unwrap(), g);
    }

    #[test]
    fn c_components() {
        let g = fig_a();
        assert_eq!(
            g.c_component(&ids(&["X1", "Y2"])).unwrap(),
            ids(&["X1", "Y2"])
        );
        assert_eq!(
            fig_b().c_component(&ids(&["Y1", "Y2"])).unwrap(),
            ids(&["X4", "Y1", "Y2"])
        );
        let pairs = graph(
            "[variables]\nA: treatment\nB: treatment\nC: treatment\nD: treatment\nY: target\n\
             [edges]\nA <-> B\nC <-> D\n",
        );
        assert_eq!(
            pairs.c_component(&ids(&["A", "C"])).unwrap(),
            ids(&["A", "B", "C", "D"])
        );
    }

    #[test]
    fn rejects_cycles_and_self_loops() {
        let err = parse_graph("[variables]\nA: treatment\nB: target\n[edges]\nA -> B\nB -> A\n");
        assert!(matches!(err, Err(GraphError::Cycle(_))));
        let err = parse_graph("[variables]\nA: treatment\nB: target\n[edges]\nA <-> A\n");
        assert!(matches!(err, Err(GraphError::SelfLoop(_))));
    }

    #[test]
    fn topological_order_respects_edges() {
        let g = fig_a();
        let order = g.topological_names();
        let pos = |n: &str| order.iter().position(|v| v.as_str() == n).unwrap();
        for (a, b) in g.directed_edges() {
            assert!(pos(a.as_str()) < pos(b.as_str()));
        }
    }
}
