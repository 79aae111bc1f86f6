//! Structural causal model files.
//!
//! A model file extends the graph text format with `[exogenous]`,
//! `[equations]` and `[domains]` sections:
//!
//! ```text
//! [variables]
//! X: treatment
//! Y: target
//! [edges]
//! X -> Y
//! [exogenous]
//! Ux: normal(0, 1)
//! Uy: normal(0, 1)
//! [equations]
//! X = Ux
//! Y = 2 * X + Uy
//! [domains]
//! X = [-1, 2]
//! ```
//!
//! Directed edges must match the endogenous names each equation reads.
//! Bidirected edges are derived from exogenous variables shared by two
//! equations; listing them under `[edges]` is optional but they must agree.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::{self, Write as _};

use serde::{Deserialize, Serialize};

use super::expr::Expr;
use super::{Result, ScmError};
use crate::graph::text::{parse_edge_line, parse_variable_line, sections, EdgeLine, Line};
use crate::graph::{
    is_identifier, CausalGraph, GraphError, InterventionSet, VariableId, VariableRole,
};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Distribution {
    Gaussian {
        mean: f64,
        stddev: f64,
    },
    TruncatedGaussian {
        mean: f64,
        stddev: f64,
        lo: f64,
        hi: f64,
    },
    Uniform {
        lo: f64,
        hi: f64,
    },
    /// Takes `hi` with probability `p`, else `lo`.
    Bernoulli {
        p: f64,
        lo: f64,
        hi: f64,
    },
}

impl Distribution {
    pub fn validate(&self) -> std::result::Result<(), String> {
        let ok = match *self {
            Distribution::Gaussian { mean, stddev } => mean.is_finite() && stddev > 0.0,
            Distribution::TruncatedGaussian {
                mean,
                stddev,
                lo,
                hi,
            } => mean.is_finite() && stddev > 0.0 && lo < hi,
            Distribution::Uniform { lo, hi } => lo.is_finite() && hi.is_finite() && lo < hi,
            Distribution::Bernoulli { p, lo, hi } => {
                (0.0..=1.0).contains(&p) && lo.is_finite() && hi.is_finite()
            }
        };
        if ok {
            Ok(())
        } else {
            Err(format!("invalid parameters for {self}"))
        }
    }

    fn parse(text: &str) -> std::result::Result<Self, String> {
        let text = text.trim();
        let (name, rest) = text
            .split_once('(')
            .ok_or_else(|| format!("expected `distribution(args)`, got `{text}`"))?;
        let args = rest
            .strip_suffix(')')
            .ok_or_else(|| "missing `)`".to_string())?;
        let args: Vec<f64> = args
            .split(',')
            .map(|a| {
                let a = a.trim();
                a.parse::<f64>()
                    .map_err(|_| format!("invalid number `{a}`"))
            })
            .collect::<std::result::Result<_, _>>()?;
        let arity = |n: usize| {
            if args.len() == n {
                Ok(())
            } else {
                Err(format!("{} expects {n} arguments", name.trim()))
            }
        };
        let d = match name.trim() {
            "normal" | "gaussian" => {
                arity(2)?;
                Distribution::Gaussian {
                    mean: args[0],
                    stddev: args[1],
                }
            }
            "truncnormal" => {
                arity(4)?;
                Distribution::TruncatedGaussian {
                    mean: args[0],
                    stddev: args[1],
                    lo: args[2],
                    hi: args[3],
                }
            }
            "uniform" => {
                arity(2)?;
                Distribution::Uniform {
                    lo: args[0],
                    hi: args[1],
                }
            }
            "bernoulli" => match args.len() {
                1 => Distribution::Bernoulli {
                    p: args[0],
                    lo: -1.0,
                    hi: 1.0,
                },
                _ => {
                    arity(3)?;
                    Distribution::Bernoulli {
                        p: args[0],
                        lo: args[1],
                        hi: args[2],
                    }
                }
            },
            other => return Err(format!("unknown distribution `{other}`")),
        };
        d.validate()?;
        Ok(d)
    }
}

impl fmt::Display for Distribution {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            Distribution::Gaussian { mean, stddev } => write!(f, "normal({mean}, {stddev})"),
            Distribution::TruncatedGaussian {
                mean,
                stddev,
                lo,
                hi,
            } => write!(f, "truncnormal({mean}, {stddev}, {lo}, {hi})"),
            Distribution::Uniform { lo, hi } => write!(f, "uniform({lo}, {hi})"),
            Distribution::Bernoulli { p, lo, hi } => write!(f, "bernoulli({p}, {lo}, {hi})"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExogenousSpec {
    pub name: String,
    pub distribution: Distribution,
}

/// Closed interval of admissible intervention values.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Domain {
    pub lo: f64,
    pub hi: f64,
}

impl Domain {
    pub fn new(lo: f64, hi: f64) -> Option<Self> {
        (lo.is_finite() && hi.is_finite() && lo < hi).then_some(Self { lo, hi })
    }

    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }

    pub fn contains(&self, x: f64) -> bool {
        self.lo <= x && x <= self.hi
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StructuralEquation {
    pub variable: VariableId,
    pub expression: Expr,
}

/// A validated structural causal model.
#[derive(Debug, Clone, PartialEq)]
pub struct ScmSpec {
    graph: CausalGraph,
    /// Keyed by variable; one per endogenous variable.
    equations: BTreeMap<VariableId, Expr>,
    /// Sampling order is declaration order.
    exogenous: Vec<ExogenousSpec>,
    domains: BTreeMap<VariableId, Domain>,
}

/// A value assignment to an intervention set, aligned with its sorted
/// members.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InterventionAssignment {
    pub set: InterventionSet,
    pub values: Vec<f64>,
}

impl InterventionAssignment {
    pub fn new(set: InterventionSet, values: Vec<f64>) -> Self {
        Self { set, values }
    }

    pub fn observational() -> Self {
        Self::new(InterventionSet::empty(), Vec::new())
    }

    /// Parses `"X2=1.0,X3=0.5"`; an empty string is the observational regime.
    pub fn parse(text: &str) -> Result<Self> {
        let mut pairs = BTreeMap::new();
        for part in text.split(',').map(str::trim).filter(|p| !p.is_empty()) {
            let (name, value) = part
                .split_once('=')
                .ok_or_else(|| ScmError::Invalid(format!("expected `name=value`, got `{part}`")))?;
            let id = VariableId::new(name.trim())?;
            let v: f64 = value
                .trim()
                .parse()
                .map_err(|_| ScmError::Invalid(format!("invalid value `{}`", value.trim())))?;
            if pairs.insert(id, v).is_some() {
                return Err(ScmError::Invalid(format!(
                    "`{}` assigned twice",
                    name.trim()
                )));
            }
        }
        let set = InterventionSet::from(pairs.keys().cloned().collect::<BTreeSet<_>>());
        Ok(Self::new(set, pairs.into_values().collect()))
    }

    pub fn pairs(&self) -> impl Iterator<Item = (&VariableId, f64)> {
        self.set.iter().zip(self.values.iter().copied())
    }
}

fn parse_err(line: usize, message: impl Into<String>) -> ScmError {
    ScmError::Parse {
        line,
        message: message.into(),
    }
}

fn parse_domain(text: &str) -> std::result::Result<Domain, String> {
    let inner = text
        .trim()
        .strip_prefix('[')
        .and_then(|t| t.strip_suffix(']'))
        .ok_or_else(|| format!("expected `[lo, hi]`, got `{}`", text.trim()))?;
    let (lo, hi) = inner
        .split_once(',')
        .ok_or_else(|| "expected `[lo, hi]`".to_string())?;
    let num = |s: &str| {
        s.trim()
            .parse::<f64>()
            .map_err(|_| format!("invalid number `{}`", s.trim()))
    };
    Domain::new(num(lo)?, num(hi)?).ok_or_else(|| "domain needs lo < hi".to_string())
}

fn split_assignment<'a>(line: &Line<'a>, sep: char) -> Result<(&'a str, &'a str)> {
    line.text
        .split_once(sep)
        .map(|(a, b)| (a.trim(), b.trim()))
        .ok_or_else(|| parse_err(line.number, format!("expected `name {sep} ...`")))
}

impl ScmSpec {
    /// Parses and validates a model file.
    pub fn parse(text: &str) -> Result<Self> {
        let sections = sections(text)?;
        let mut vertices = Vec::new();
        let mut directed: Vec<(VariableId, VariableId, usize)> = Vec::new();
        let mut declared_bi: Vec<(VariableId, VariableId, usize)> = Vec::new();
        let mut exogenous: Vec<ExogenousSpec> = Vec::new();
        let mut equations: Vec<(VariableId, Expr, usize)> = Vec::new();
        let mut domains: Vec<(VariableId, Domain, usize)> = Vec::new();

        for (name, lines) in &sections {
            match name.as_str() {
                "variables" => {
                    for line in lines {
                        vertices.push(parse_variable_line(line)?);
                    }
                }
                "edges" => {
                    for line in lines {
                        match parse_edge_line(line)? {
                            EdgeLine::Directed(a, b) => directed.push((a, b, line.number)),
                            EdgeLine::Bidirected(a, b) => declared_bi.push((a, b, line.number)),
                        }
                    }
                }
                "exogenous" => {
                    for line in lines {
                        let (n, d) = split_assignment(line, ':')?;
                        if !is_identifier(n) {
                            return Err(parse_err(line.number, format!("invalid name `{n}`")));
                        }
                        let distribution =
                            Distribution::parse(d).map_err(|m| parse_err(line.number, m))?;
                        if exogenous.iter().any(|e| e.name == n) {
                            return Err(parse_err(line.number, format!("`{n}` declared twice")));
                        }
                        exogenous.push(ExogenousSpec {
                            name: n.to_string(),
                            distribution,
                        });
                    }
                }
                "equations" => {
                    for line in lines {
                        let (v, e) = split_assignment(line, '=')?;
                        let v = VariableId::new(v)
                            .map_err(|_| parse_err(line.number, format!("invalid name `{v}`")))?;
                        let e = Expr::parse(e)
                            .map_err(|err| parse_err(line.number, err.to_string()))?;
                        equations.push((v, e, line.number));
                    }
                }
                "domains" => {
                    for line in lines {
                        let (v, d) = split_assignment(line, '=')?;
                        let v = VariableId::new(v)
                            .map_err(|_| parse_err(line.number, format!("invalid name `{v}`")))?;
                        let d = parse_domain(d).map_err(|m| parse_err(line.number, m))?;
                        domains.push((v, d, line.number));
                    }
                }
                other => {
                    let line = lines.first().map_or(1, |l| l.number);
                    return Err(parse_err(line, format!("unknown section [{other}]")));
                }
            }
        }

        let roles: BTreeMap<VariableId, VariableRole> = {
            let mut m = BTreeMap::new();
            for (v, r) in &vertices {
                if m.insert(v.clone(), *r).is_some() {
                    return Err(GraphError::DuplicateVertex(v.to_string()).into());
                }
            }
            m
        };
        let exo_names: BTreeSet<&str> = exogenous.iter().map(|e| e.name.as_str()).collect();
        if let Some(clash) = exo_names.iter().find(|n| roles.contains_key(**n)) {
            return Err(ScmError::Invalid(format!(
                "`{clash}` is both endogenous and exogenous"
            )));
        }

        let mut eq_map: BTreeMap<VariableId, (Expr, usize)> = BTreeMap::new();
        for (v, e, line) in equations {
            if !roles.contains_key(&v) {
                return Err(parse_err(
                    line,
                    format!("equation for undeclared variable `{v}`"),
                ));
            }
            if eq_map.insert(v.clone(), (e, line)).is_some() {
                return Err(parse_err(line, format!("second equation for `{v}`")));
            }
        }
        if let Some(missing) = roles.keys().find(|v| !eq_map.contains_key(*v)) {
            return Err(ScmError::Invalid(format!("no equation for `{missing}`")));
        }

        // Cross-check equation references against the directed edges.
        let edge_set: BTreeSet<(VariableId, VariableId)> = directed
            .iter()
            .map(|(a, b, _)| (a.clone(), b.clone()))
            .collect();
        for (a, b, line) in &directed {
            if let Some((expr, _)) = eq_map.get(b) {
                if !expr.names().contains(a.as_str()) && roles.contains_key(a) {
                    return Err(parse_err(
                        *line,
                        format!("edge {a} -> {b} but the equation for `{b}` does not read `{a}`"),
                    ));
                }
            }
        }
        let mut exo_users: BTreeMap<&str, Vec<VariableId>> = BTreeMap::new();
        for (v, (expr, line)) in &eq_map {
            for name in expr.names() {
                if let Some(n) = exo_names.get(name.as_str()) {
                    exo_users.entry(n).or_default().push(v.clone());
                    continue;
                }
                let id = VariableId::new(name.clone())?;
                if !roles.contains_key(&id) {
                    return Err(parse_err(
                        *line,
                        format!("equation for `{v}` reads undeclared name `{name}`"),
                    ));
                }
                if !edge_set.contains(&(id.clone(), v.clone())) {
                    return Err(parse_err(
                        *line,
                        format!("equation for `{v}` reads `{id}`, which is not a parent of `{v}`"),
                    ));
                }
            }
        }

        let mut derived_bi: BTreeSet<(VariableId, VariableId)> = BTreeSet::new();
        for users in exo_users.values() {
            for (i, a) in users.iter().enumerate() {
                for b in &users[i + 1..] {
                    derived_bi.insert((a.clone().min(b.clone()), a.clone().max(b.clone())));
                }
            }
        }
        for (a, b, line) in &declared_bi {
            let key = (a.clone().min(b.clone()), a.clone().max(b.clone()));
            if !derived_bi.contains(&key) {
                return Err(parse_err(
                    *line,
                    format!("bidirected edge {a} <-> {b} without a shared exogenous variable"),
                ));
            }
        }

        let mut domain_map = BTreeMap::new();
        for (v, d, line) in domains {
            match roles.get(&v) {
                Some(VariableRole::Treatment) => {}
                Some(_) => {
                    return Err(parse_err(
                        line,
                        format!("domain given for non-treatment `{v}`"),
                    ))
                }
                None => return Err(parse_err(line, format!("domain for undeclared `{v}`"))),
            }
            if domain_map.insert(v.clone(), d).is_some() {
                return Err(parse_err(line, format!("second domain for `{v}`")));
            }
        }
        if let Some((missing, _)) = roles
            .iter()
            .find(|(v, r)| **r == VariableRole::Treatment && !domain_map.contains_key(*v))
        {
            return Err(ScmError::Invalid(format!(
                "treatment `{missing}` has no domain"
            )));
        }

        let graph = CausalGraph::new(
            vertices,
            directed.into_iter().map(|(a, b, _)| (a, b)),
            derived_bi,
        )?;
        if graph.targets().is_empty() {
            return Err(GraphError::NoTarget.into());
        }
        Ok(Self {
            graph,
            equations: eq_map.into_iter().map(|(v, (e, _))| (v, e)).collect(),
            exogenous,
            domains: domain_map,
        })
    }

    /// Writes the model in the format accepted by [`ScmSpec::parse`].
    pub fn serialize(&self) -> String {
        let mut out = crate::graph::format_graph(&self.graph);
        out.push_str("\n[exogenous]\n");
        for e in &self.exogenous {
            let _ = writeln!(out, "{}: {}", e.name, e.distribution);
        }
        out.push_str("\n[equations]\n");
        for v in self.graph.topological_names() {
            let _ = writeln!(out, "{v} = {}", self.equations[&v]);
        }
        out.push_str("\n[domains]\n");
        for (v, d) in &self.domains {
            let _ = writeln!(out, "{v} = [{}, {}]", d.lo, d.hi);
        }
        out
    }

    pub fn graph(&self) -> &CausalGraph {
        &self.graph
    }

    pub fn equations(&self) -> impl Iterator<Item = StructuralEquation> + '_ {
        self.equations.iter().map(|(v, e)| StructuralEquation {
            variable: v.clone(),
            expression: e.clone(),
        })
    }

    pub fn equation(&self, v: &str) -> Option<&Expr> {
        self.equations.get(v)
    }

    pub fn exogenous(&self) -> &[ExogenousSpec] {
        &self.exogenous
    }

    pub fn domain(&self, v: &str) -> Option<Domain> {
        self.domains.get(v).copied()
    }

    pub fn domains(&self) -> &BTreeMap<VariableId, Domain> {
        &self.domains
    }

    /// Target variables in their fixed (sorted) order.
    pub fn targets(&self) -> Vec<VariableId> {
        self.graph.targets().into_iter().collect()
    }

    /// Domains of the members of `set` in sorted member order.
    pub fn bounds(&self, set: &InterventionSet) -> Result<Vec<Domain>> {
        set.iter()
            .map(|v| {
                self.domain(v.as_str())
                    .ok_or_else(|| ScmError::Invalid(format!("`{v}` has no domain")))
            })
            .collect()
    }

    /// Checks that every member is a treatment and every value lies in its
    /// domain.
    pub fn validate_assignment(&self, a: &InterventionAssignment) -> Result<()> {
        if a.set.len() != a.values.len() {
            return Err(ScmError::Invalid(format!(
                "{} values for intervention set {}",
                a.values.len(),
                a.set
            )));
        }
        for (v, x) in a.pairs() {
            match self.graph.role(v.as_str())? {
                VariableRole::Treatment => {}
                VariableRole::Target => {
                    return Err(GraphError::TargetIntervened(v.to_string()).into())
                }
                VariableRole::NonManipulative => {
                    return Err(GraphError::NotTreatment(v.to_string()).into())
                }
            }
            let d = self.domains[v];
            if !d.contains(x) {
                return Err(ScmError::OutOfDomain {
                    variable: v.to_string(),
                    value: x,
                    lo: d.lo,
                    hi: d.hi,
                });
            }
        }
        Ok(())
    }

    /// A copy whose equation for `v` is replaced. Used to build variants of
    /// the benchmarks in tests and experiments.
    pub fn with_equation(&self, v: &str, text: &str) -> Result<Self> {
        let mut spec = self.clone();
        let id = VariableId::new(v)?;
        if !spec.equations.contains_key(v) {
            return Err(GraphError::UnknownVertex(v.to_string()).into());
        }
        spec.equations.insert(id, Expr::parse(text)?);
        Self::parse(&spec.serialize())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const LINEAR: &str = "
        [variables]
        X: treatment
        Y: target
        [edges]
        X -> Y
        [exogenous]
        Ux: normal(0, 1)
        Uy: normal(0, 1)
        [equations]
        X = Ux
        Y = 2 * X + Uy
        [domains]
        X = [-1, 5]
    ";

    #[test]
    fn parses_a_linear_model() {
        let spec = ScmSpec::parse(LINEAR).unwrap();
        assert_eq!(spec.targets(), vec![VariableId::new("Y").unwrap()]);
        assert_eq!(spec.domain("X"), Domain::new(-1.0, 5.0));
        assert_eq!(spec.exogenous().len(), 2);
    }

    #[test]
    fn serialize_round_trips() {
        let spec = ScmSpec::parse(LINEAR).unwrap();
        assert_eq!(ScmSpec::parse(&spec.serialize()).unwrap(), spec);
    }

    #[test]
    fn non_parent_reference_names_both_variables() {
        let text = LINEAR.replace("X -> Y", "").replace("[edges]", "[edges]\n");
        let err = ScmSpec::parse(&text).unwrap_err().to_string();
        assert!(err.contains("`Y`") && err.contains("`X`"), "{err}");
    }

    #[test]
    fn edge_without_reference_is_a_mismatch() {
        let text = LINEAR.replace("Y = 2 * X + Uy", "Y = Uy");
        let err = ScmSpec::parse(&text).unwrap_err();
        assert!(matches!(err, ScmError::Parse { line: 6, .. }), "{err}");
    }

    #[test]
    fn dangling_name() {
        let text = LINEAR.replace("Y = 2 * X + Uy", "Y = 2 * X + Q");
        let err = ScmSpec::parse(&text).unwrap_err().to_string();
        assert!(err.contains("undeclared name `Q`"), "{err}");
    }

    #[test]
    fn missing_domain() {
        let text = LINEAR.replace("X = [-1, 5]", "");
        let err = ScmSpec::parse(&text).unwrap_err().to_string();
        assert!(err.contains("no domain"), "{err}");
    }

    #[test]
    fn shared_exogenous_becomes_bidirected_edge() {
        let text = LINEAR.replace("Y = 2 * X + Uy", "Y = 2 * X + Ux");
        let spec = ScmSpec::parse(&text).unwrap();
        assert!(spec.graph().has_bidirected_edge("X", "Y"));
    }

    #[test]
    fn declared_confounder_needs_shared_noise() {
        let text = LINEAR.replace("X -> Y", "X -> Y\nX <-> Y");
        assert!(ScmSpec::parse(&text).is_err());
    }

    #[test]
    fn invalid_distribution_parameters() {
        let text = LINEAR.replace("Ux: normal(0, 1)", "Ux: normal(0, -1)");
        assert!(ScmSpec::parse(&text).is_err());
        let text = LINEAR.replace("Ux: normal(0, 1)", "Ux: uniform(2, 1)");
        assert!(ScmSpec::parse(&text).is_err());
        let text = LINEAR.replace("Ux: normal(0, 1)", "Ux: bernoulli(1.5)");
        assert!(ScmSpec::parse(&text).is_err());
    }

    #[test]
    fn assignment_parsing_and_validation() {
        let spec = ScmSpec::parse(LINEAR).unwrap();
        let a = InterventionAssignment::parse("X=3").unwrap();
        assert_eq!(a.values, vec![3.0]);
        spec.validate_assignment(&a).unwrap();
        let out = InterventionAssignment::parse("X=9").unwrap();
        assert!(matches!(
            spec.validate_assignment(&out),
            Err(ScmError::OutOfDomain { .. })
        ));
        let y = InterventionAssignment::parse("Y=1").unwrap();
        assert!(spec.validate_assignment(&y).is_err());
        assert!(InterventionAssignment::parse("").unwrap().set.is_empty());
    }
}
