//! Brute-force reference fronts over regular grids.

use rayon::prelude::*;

use super::simulate::CompiledScm;
use super::spec::{Domain, InterventionAssignment, ScmSpec};
use super::{Result, ScmError};
use crate::graph::InterventionSet;
use crate::pareto::{non_dominated_filter, FrontPoint, ParetoArchive};

/// Largest number of interventional-mean evaluations a ground-truth front
/// may request.
pub const GROUND_TRUTH_BUDGET: u64 = 1_000_000;

/// The `k`-th point of a regular grid with `per_dim` values per axis,
/// endpoints included. Axis 0 varies slowest.
fn grid_point(bounds: &[Domain], per_dim: usize, mut k: usize) -> Vec<f64> {
    let mut x = vec![0.0; bounds.len()];
    for (j, d) in bounds.iter().enumerate().rev() {
        let i = k % per_dim;
        k /= per_dim;
        x[j] = d.lo + d.width() * i as f64 / (per_dim - 1) as f64;
    }
    x
}

/// All points of a regular grid over `bounds`; a zero-dimensional box has
/// one (empty) point.
pub fn grid_points(bounds: &[Domain], per_dim: usize) -> Vec<Vec<f64>> {
    let count = per_dim.pow(bounds.len() as u32);
    (0..count).map(|k| grid_point(bounds, per_dim, k)).collect()
}

/// Evaluates the interventional means on a regular grid over every set's
/// domain, with one shared Monte-Carlo sample, and returns the non-dominated
/// subset of the pooled points.
pub fn ground_truth_front(
    spec: &ScmSpec,
    sets: &[InterventionSet],
    grid_per_dim: usize,
    n_mc: usize,
    seed: u64,
) -> Result<ParetoArchive> {
    if grid_per_dim < 2 {
        return Err(ScmError::Invalid(format!(
            "grid needs at least 2 points per dimension, got {grid_per_dim}"
        )));
    }
    let mut requested: u64 = 0;
    for s in sets {
        let count = (grid_per_dim as u64)
            .checked_pow(s.len() as u32)
            .unwrap_or(u64::MAX);
        requested = requested.saturating_add(count);
    }
    if requested > GROUND_TRUTH_BUDGET {
        return Err(ScmError::BudgetExceeded {
            requested,
            budget: GROUND_TRUTH_BUDGET,
        });
    }
    let scm = CompiledScm::new(spec)?;
    let sample = scm.sample_exogenous(n_mc, seed);
    let jobs: Vec<(usize, usize)> = sets
        .iter()
        .enumerate()
        .flat_map(|(s, set)| (0..grid_per_dim.pow(set.len() as u32)).map(move |k| (s, k)))
        .collect();
    let bounds: Vec<Vec<Domain>> = sets.iter().map(|s| spec.bounds(s)).collect::<Result<_>>()?;
    let points = jobs
        .par_iter()
        .map(|&(s, k)| {
            let x = grid_point(&bounds[s], grid_per_dim, k);
            let a = InterventionAssignment::new(sets[s].clone(), x);
            let mu = scm.mean_with(&sample, &a)?;
            Ok(FrontPoint {
                objectives: mu.means,
                set: a.set,
                x: a.values,
                std_error: mu.std_error,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    non_dominated_filter(points).map_err(|e| ScmError::Invalid(e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_covers_corners() {
        let b = vec![
            Domain::new(0.0, 1.0).unwrap(),
            Domain::new(-2.0, 2.0).unwrap(),
        ];
        let g = grid_points(&b, 3);
        assert_eq!(g.len(), 9);
        assert_eq!(g[0], vec![0.0, -2.0]);
        assert_eq!(g[8], vec![1.0, 2.0]);
        assert_eq!(grid_points(&[], 5), vec![Vec::<f64>::new()]);
    }

    #[test]
    fn monotone_objective_front_is_a_corner() {
        let spec = ScmSpec::parse(
            "[variables]\nA: treatment\nB: treatment\nY: target\n[edges]\nA -> Y\nB -> Y\n\
             [exogenous]\nU: normal(0, 1)\n[equations]\nA = U\nB = U\nY = A + 2 * B\n\
             [domains]\nA = [0, 1]\nB = [-1, 3]\n",
        )
        .unwrap();
        let set = InterventionSet::from_names(["A", "B"]).unwrap();
        let front = ground_truth_front(&spec, &[set], 5, 10, 0).unwrap();
        assert_eq!(front.len(), 1);
        assert_eq!(front.points()[0].x, vec![0.0, -1.0]);
    }

    #[test]
    fn budget_guard() {
        let spec = super::super::builtin_problem("synthetic1").unwrap();
        let all = InterventionSet::from_names(["X1", "X2", "X3", "X4"]).unwrap();
        let err = ground_truth_front(&spec, &[all], 40, 10, 0).unwrap_err();
        assert!(matches!(err, ScmError::BudgetExceeded { .. }));
    }
}
