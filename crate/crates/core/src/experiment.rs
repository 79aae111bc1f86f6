//! Multi-seed experiments and their summary statistics.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::pareto::dominates;
use crate::rng::derive;
use crate::scm::ScmSpec;
use crate::solver::{run, run_baseline, Progress, Reference, Result, RunReport, SolverConfig};

/// The `count` per-seed seeds split from a master seed.
pub fn split_seeds(master: u64, count: usize) -> Vec<u64> {
    (0..count as u64).map(|k| derive(master, &[k])).collect()
}

/// Runs every seed (in parallel) and returns the reports in seed order.
pub fn run_seeds(
    spec: &ScmSpec,
    config: &SolverConfig,
    baseline: bool,
    seeds: &[u64],
    reference: Option<&Reference>,
) -> Result<Vec<RunReport>> {
    seeds
        .par_iter()
        .map(|&seed| {
            let config = SolverConfig {
                seed,
                ..config.clone()
            };
            if baseline {
                run_baseline(spec, &config, reference.cloned())
            } else {
                run(spec, &config, reference.cloned())
            }
        })
        .collect()
}

/// Median (mean of the middle pair for even counts). `NaN` when empty.
pub fn median(values: &[f64]) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Sample standard deviation; 0 for fewer than two values.
pub fn std_dev(values: &[f64]) -> f64 {
    let n = values.len();
    if n < 2 {
        return 0.0;
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt()
}

/// Across-seed statistics after a given number of iterations (0 is the
/// initial design).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateRow {
    pub iteration: usize,
    pub evaluations: usize,
    pub intervention_count_median: f64,
    pub gd_median: Option<f64>,
    pub gd_std: Option<f64>,
    pub igd_median: Option<f64>,
    pub igd_std: Option<f64>,
}

fn stats(values: Vec<Option<f64>>) -> (Option<f64>, Option<f64>) {
    let v: Option<Vec<f64>> = values.into_iter().collect();
    match v {
        Some(v) if !v.is_empty() => (Some(median(&v)), Some(std_dev(&v))),
        _ => (None, None),
    }
}

/// One row per iteration index, over the reports that reached it.
pub fn aggregate(reports: &[RunReport]) -> Vec<AggregateRow> {
    let trajectories: Vec<Vec<&Progress>> = reports.iter().map(RunReport::trajectory).collect();
    let len = trajectories.iter().map(Vec::len).max().unwrap_or(0);
    (0..len)
        .map(|k| {
            let at: Vec<&Progress> = trajectories
                .iter()
                .filter_map(|t| t.get(k).copied())
                .collect();
            let counts: Vec<f64> = at.iter().map(|p| p.intervention_count as f64).collect();
            let (gd_median, gd_std) = stats(at.iter().map(|p| p.gd).collect());
            let (igd_median, igd_std) = stats(at.iter().map(|p| p.igd).collect());
            AggregateRow {
                iteration: k,
                evaluations: at.iter().map(|p| p.evaluations).max().unwrap_or(0),
                intervention_count_median: median(&counts),
                gd_median,
                gd_std,
                igd_median,
                igd_std,
            }
        })
        .collect()
}

pub fn aggregate_to_csv(rows: &[AggregateRow]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r).expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8")
}

pub fn aggregate_from_csv(text: &str) -> std::result::Result<Vec<AggregateRow>, csv::Error> {
    csv::Reader::from_reader(text.as_bytes())
        .deserialize()
        .collect()
}

/// The last recorded metrics whose cumulative intervention-variable count
/// stays within `budget`; the initial design if even that exceeds it.
pub fn progress_at_budget(report: &RunReport, budget: usize) -> &Progress {
    let t = report.trajectory();
    t.iter()
        .rev()
        .find(|p| p.intervention_count <= budget)
        .copied()
        .unwrap_or(t[0])
}

/// Fraction of `front` dominated by at least one point of `by`; 0 for an
/// empty `front`.
pub fn dominated_fraction(front: &[Vec<f64>], by: &[Vec<f64>]) -> f64 {
    if front.is_empty() {
        return 0.0;
    }
    let n = front
        .iter()
        .filter(|p| by.iter().any(|q| dominates(q, p)))
        .count();
    n as f64 / front.len() as f64
}
