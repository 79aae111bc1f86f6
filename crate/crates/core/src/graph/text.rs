//! Line-oriented graph text format.
//!
//! ```text
//! [variables]
//! X1: treatment
//! Y1: target
//! Age: nonmanipulative
//! [edges]
//! X1 -> Y1
//! Age <-> Y1
//! ```
//!
//! `#` starts a comment. Sections other than `[variables]` and `[edges]` are
//! ignored here so the same file can carry a full model.

use std::fmt::Write as _;

use super::{CausalGraph, GraphError, Result, VariableId, VariableRole};

/// One non-empty, comment-stripped line with its 1-based line number.
#[derive(Debug, Clone)]
pub(crate) struct Line<'a> {
    pub number: usize,
    pub text: &'a str,
}

/// Splits text into `(section name, lines)` in order of appearance. Lines
/// before the first header are reported as an error.
pub(crate) fn sections(text: &str) -> Result<Vec<(String, Vec<Line<'_>>)>> {
    let mut out: Vec<(String, Vec<Line<'_>>)> = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let number = i + 1;
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        if let Some(name) = line.strip_prefix('[').and_then(|l| l.strip_suffix(']')) {
            let name = name.trim().to_ascii_lowercase();
            if out.iter().any(|(n, _)| *n == name) {
                return Err(GraphError::Parse {
                    line: number,
                    message: format!("duplicate section [{name}]"),
                });
            }
            out.push((name, Vec::new()));
            continue;
        }
        match out.last_mut() {
            Some((_, lines)) => lines.push(Line { number, text: line }),
            None => {
                return Err(GraphError::Parse {
                    line: number,
                    message: "content before the first [section] header".into(),
                })
            }
        }
    }
    Ok(out)
}

pub fn parse_role(s: &str) -> Option<VariableRole> {
    match s.trim().to_ascii_lowercase().as_str() {
        "treatment" | "manipulative" => Some(VariableRole::Treatment),
        "target" | "output" => Some(VariableRole::Target),
        "nonmanipulative" | "non-manipulative" | "non_manipulative" => {
            Some(VariableRole::NonManipulative)
        }
        _ => None,
    }
}

fn parse_id(s: &str, line: usize) -> Result<VariableId> {
    VariableId::new(s.trim()).map_err(|_| GraphError::Parse {
        line,
        message: format!("invalid variable name `{}`", s.trim()),
    })
}

pub(crate) fn parse_variable_line(line: &Line<'_>) -> Result<(VariableId, VariableRole)> {
    let (name, role) = line.text.split_once(':').ok_or_else(|| GraphError::Parse {
        line: line.number,
        message: "expected `name: role`".into(),
    })?;
    let role = parse_role(role).ok_or_else(|| GraphError::Parse {
        line: line.number,
        message: format!("unknown role `{}`", role.trim()),
    })?;
    Ok((parse_id(name, line.number)?, role))
}

pub(crate) enum EdgeLine {
    Directed(VariableId, VariableId),
    Bidirected(VariableId, VariableId),
}

pub(crate) fn parse_edge_line(line: &Line<'_>) -> Result<EdgeLine> {
    if let Some((a, b)) = line.text.split_once("<->") {
        Ok(EdgeLine::Bidirected(
            parse_id(a, line.number)?,
            parse_id(b, line.number)?,
        ))
    } else if let Some((a, b)) = line.text.split_once("->") {
        Ok(EdgeLine::Directed(
            parse_id(a, line.number)?,
            parse_id(b, line.number)?,
        ))
    } else {
        Err(GraphError::Parse {
            line: line.number,
            message: "expected `A -> B` or `A <-> B`".into(),
        })
    }
}

/// Parses the `[variables]` and `[edges]` sections.
pub fn parse_graph(text: &str) -> Result<CausalGraph> {
    let sections = sections(text)?;
    let mut vertices = Vec::new();
    let mut directed = Vec::new();
    let mut bidirected = Vec::new();
    let mut saw_variables = false;
    for (name, lines) in &sections {
        match name.as_str() {
            "variables" => {
                saw_variables = true;
                for line in lines {
                    vertices.push(parse_variable_line(line)?);
                }
            }
            "edges" => {
                for line in lines {
                    match parse_edge_line(line)? {
                        EdgeLine::Directed(a, b) => directed.push((a, b)),
                        EdgeLine::Bidirected(a, b) => bidirected.push((a, b)),
                    }
                }
            }
            _ => {}
        }
    }
    if !saw_variables {
        return Err(GraphError::Parse {
            line: 1,
            message: "missing [variables] section".into(),
        });
    }
    CausalGraph::new(vertices, directed, bidirected)
}

/// Writes the graph in the format accepted by [`parse_graph`].
pub fn format_graph(graph: &CausalGraph) -> String {
    let mut out = String::from("[variables]\n");
    for (v, role) in graph.vertices() {
        let _ = writeln!(out, "{v}: {role}");
    }
    out.push_str("\n[edges]\n");
    for (a, b) in graph.directed_edges() {
        let _ = writeln!(out, "{a} -> {b}");
    }
    for (a, b) in graph.bidirected_edges() {
        let _ = writeln!(out, "{a} <-> {b}");
    }
    out
}
