//! Non-domination machinery under minimization: filtering, exact
//! hypervolume, hypervolume improvement, front discovery over surrogate
//! means, diversity regions, balanced batch selection and distance metrics.

mod batch;
mod discover;
mod hypervolume;
mod regions;

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::graph::{InterventionSet, VariableId};

pub use batch::{select_local_batch, BatchSelection};
pub use discover::{discover_local_front, DiscoveryConfig, LocalFront, Objectives};
pub use hypervolume::{hvi, hypervolume, hypervolume_clipped, reference_point, rhvi};
pub use regions::{diversity_regions, DiversityRegionSet, DEFAULT_K_MAX, DEFAULT_LINK_DISTANCE};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ParetoError {
    #[error("non-finite objective value at point {0}")]
    NonFinite(usize),
    #[error("point {index} has {got} objectives, expected {expected}")]
    DimensionMismatch {
        index: usize,
        expected: usize,
        got: usize,
    },
    #[error("point {0} does not strictly dominate the reference point")]
    NotDominatingReference(usize),
    #[error("hypervolume supports 1 to 4 objectives, got {0}")]
    UnsupportedDimension(usize),
    #[error("front is empty")]
    EmptyFront,
    #[error("CSV: {0}")]
    Csv(String),
}

pub type Result<T, E = ParetoError> = std::result::Result<T, E>;

/// An objective vector together with the intervention that produced it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrontPoint {
    pub objectives: Vec<f64>,
    pub set: InterventionSet,
    /// Intervention values aligned with the sorted members of `set`.
    pub x: Vec<f64>,
    /// Monte-Carlo standard errors of `objectives`, when estimated.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub std_error: Vec<f64>,
}

impl FrontPoint {
    pub fn new(objectives: Vec<f64>, set: InterventionSet, x: Vec<f64>) -> Self {
        Self {
            objectives,
            set,
            x,
            std_error: Vec::new(),
        }
    }
}

/// A mutually non-dominated collection of points.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ParetoArchive {
    points: Vec<FrontPoint>,
}

impl ParetoArchive {
    pub fn points(&self) -> &[FrontPoint] {
        &self.points
    }

    pub fn into_points(self) -> Vec<FrontPoint> {
        self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn objectives(&self) -> Vec<Vec<f64>> {
        self.points.iter().map(|p| p.objectives.clone()).collect()
    }
}

/// `a` Pareto-dominates `b`: no worse everywhere, strictly better somewhere.
pub fn dominates(a: &[f64], b: &[f64]) -> bool {
    let mut strict = false;
    for (x, y) in a.iter().zip(b) {
        if x > y {
            return false;
        }
        strict |= x < y;
    }
    strict
}

fn weakly_dominates(a: &[f64], b: &[f64]) -> bool {
    a.iter().zip(b).all(|(x, y)| x <= y)
}

fn lexicographic(a: &[f64], b: &[f64]) -> Ordering {
    a.iter()
        .zip(b)
        .map(|(x, y)| x.total_cmp(y))
        .find(|o| o.is_ne())
        .unwrap_or(Ordering::Equal)
}

pub(crate) fn check_finite<'a>(points: impl IntoIterator<Item = &'a [f64]>) -> Result<usize> {
    let mut m = None;
    for (i, p) in points.into_iter().enumerate() {
        if p.iter().any(|v| !v.is_finite()) {
            return Err(ParetoError::NonFinite(i));
        }
        match m {
            None => m = Some(p.len()),
            Some(expected) if expected != p.len() => {
                return Err(ParetoError::DimensionMismatch {
                    index: i,
                    expected,
                    got: p.len(),
                })
            }
            _ => {}
        }
    }
    Ok(m.unwrap_or(0))
}

/// Indices of the non-dominated points in input order. Of several identical
/// vectors only the first is kept.
pub fn non_dominated_indices(points: &[Vec<f64>]) -> Result<Vec<usize>> {
    let m = check_finite(points.iter().map(Vec::as_slice))?;
    let mut order: Vec<usize> = (0..points.len()).collect();
    order.sort_by(|&a, &b| lexicographic(&points[a], &points[b]).then(a.cmp(&b)));
    // A dominator precedes its victim lexicographically, so one sweep
    // against the growing front suffices.
    let mut front: Vec<usize> = Vec::new();
    for i in order {
        let dominated = if m == 2 {
            front.last().is_some_and(|&f| points[f][1] <= points[i][1])
        } else {
            front
                .iter()
                .any(|&f| weakly_dominates(&points[f], &points[i]))
        };
        if !dominated {
            front.push(i);
        }
    }
    front.sort_unstable();
    Ok(front)
}

/// The maximal mutually non-dominated subset, in input order.
pub fn non_dominated_filter(points: Vec<FrontPoint>) -> Result<ParetoArchive> {
    let objectives: Vec<Vec<f64>> = points.iter().map(|p| p.objectives.clone()).collect();
    let keep = non_dominated_indices(&objectives)?;
    let mut keep = keep.into_iter().peekable();
    let points = points
        .into_iter()
        .enumerate()
        .filter_map(|(i, p)| {
            (keep.peek() == Some(&i)).then(|| {
                keep.next();
                p
            })
        })
        .collect();
    Ok(ParetoArchive { points })
}

fn mean_nearest(from: &[Vec<f64>], to: &[Vec<f64>]) -> Result<f64> {
    if from.is_empty() || to.is_empty() {
        return Err(ParetoError::EmptyFront);
    }
    check_finite(from.iter().chain(to).map(Vec::as_slice))?;
    let total: f64 = from
        .iter()
        .map(|a| {
            to.iter()
                .map(|b| a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>())
                .fold(f64::INFINITY, f64::min)
                .sqrt()
        })
        .sum();
    Ok(total / from.len() as f64)
}

/// Generational distance: mean distance from each approximate point to the
/// nearest true point.
pub fn gd(approx: &[Vec<f64>], truth: &[Vec<f64>]) -> Result<f64> {
    mean_nearest(approx, truth)
}

/// Inverted generational distance: mean distance from each true point to
/// the nearest approximate point.
pub fn igd(approx: &[Vec<f64>], truth: &[Vec<f64>]) -> Result<f64> {
    mean_nearest(truth, approx)
}

fn join(values: &[f64]) -> String {
    values
        .iter()
        .map(|v| v.to_string())
        .collect::<Vec<_>>()
        .join(";")
}

fn split(field: &str) -> Result<Vec<f64>> {
    if field.is_empty() {
        return Ok(Vec::new());
    }
    field
        .split(';')
        .map(|v| {
            v.parse()
                .map_err(|_| ParetoError::Csv(format!("invalid number `{v}`")))
        })
        .collect()
}

/// One row per point: set members (`;`-separated), x-vector, objectives and
/// standard errors (each `;`-separated).
pub fn front_to_csv(points: &[FrontPoint]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["set", "x", "objectives", "std_error"])
        .expect("in-memory write");
    for p in points {
        let set = p
            .set
            .iter()
            .map(VariableId::as_str)
            .collect::<Vec<_>>()
            .join(";");
        w.write_record([set, join(&p.x), join(&p.objectives), join(&p.std_error)])
            .expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("UTF-8 output")
}

/// Parses the output of [`front_to_csv`].
pub fn front_from_csv(text: &str) -> Result<Vec<FrontPoint>> {
    let mut r = csv::Reader::from_reader(text.as_bytes());
    let mut out = Vec::new();
    for record in r.records() {
        let record = record.map_err(|e| ParetoError::Csv(e.to_string()))?;
        if record.len() != 4 {
            return Err(ParetoError::Csv(format!(
                "expected 4 fields, got {}",
                record.len()
            )));
        }
        let names: Vec<&str> = record[0].split(';').filter(|s| !s.is_empty()).collect();
        let set = InterventionSet::from_names(names.iter().copied())
            .map_err(|e| ParetoError::Csv(e.to_string()))?;
        out.push(FrontPoint {
            set,
            x: split(&record[1])?,
            objectives: split(&record[2])?,
            std_error: split(&record[3])?,
        });
    }
    Ok(out)
}
