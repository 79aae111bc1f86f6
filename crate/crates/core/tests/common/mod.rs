//! Helpers shared by the integration tests.
#![allow(dead_code)]

use causal_pareto::graph::{CausalGraph, VariableId, VariableRole};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// A random acyclic graph with confounders. Vertices are created in a
/// topological order; the last one or two are targets, the rest treatments
/// or (occasionally) non-manipulative.
pub fn random_admg(seed: u64, max_vertices: usize, max_bidirected: usize) -> CausalGraph {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = rng.gen_range(3..=max_vertices);
    let n_targets = rng.gen_range(1..=2);
    let name = |i: usize| VariableId::new(format!("V{i}")).unwrap();
    let vertices: Vec<(VariableId, VariableRole)> = (0..n)
        .map(|i| {
            let role = if i >= n - n_targets {
                VariableRole::Target
            } else if rng.gen_bool(0.2) {
                VariableRole::NonManipulative
            } else {
                VariableRole::Treatment
            };
            (name(i), role)
        })
        .collect();
    let mut directed = Vec::new();
    for j in 1..n {
        for i in 0..j {
            if rng.gen_bool(0.35) {
                directed.push((name(i), name(j)));
            }
        }
    }
    let mut bidirected = Vec::new();
    for _ in 0..rng.gen_range(0..=max_bidirected) {
        let a = rng.gen_range(0..n);
        let b = rng.gen_range(0..n);
        if a != b {
            bidirected.push((name(a.min(b)), name(a.max(b))));
        }
    }
    CausalGraph::new(vertices, directed, bidirected).expect("generated graph is valid")
}

/// Random mutually non-dominated-ish point cloud in `[0, 1]^m`.
pub fn random_front(rng: &mut ChaCha8Rng, m: usize, max_points: usize) -> Vec<Vec<f64>> {
    let n = rng.gen_range(1..=max_points);
    (0..n)
        .map(|_| {
            // Points near the simplex give genuine trade-offs.
            let raw: Vec<f64> = (0..m).map(|_| rng.gen::<f64>() + 0.05).collect();
            let s: f64 = raw.iter().sum();
            raw.iter().map(|v| v / s + 0.1 * rng.gen::<f64>()).collect()
        })
        .collect()
}

/// Monte-Carlo rejection estimate of the dominated volume inside the box
/// spanned by the componentwise minimum of `points` and `reference`.
pub fn mc_hypervolume(points: &[Vec<f64>], reference: &[f64], samples: usize, seed: u64) -> f64 {
    let m = reference.len();
    let lo: Vec<f64> = (0..m)
        .map(|j| points.iter().map(|p| p[j]).fold(f64::INFINITY, f64::min))
        .collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut z = vec![0.0; m];
    let mut hits = 0usize;
    for _ in 0..samples {
        for j in 0..m {
            z[j] = lo[j] + rng.gen::<f64>() * (reference[j] - lo[j]);
        }
        if points.iter().any(|p| p.iter().zip(&z).all(|(a, b)| a <= b)) {
            hits += 1;
        }
    }
    let volume: f64 = (0..m).map(|j| reference[j] - lo[j]).product();
    volume * hits as f64 / samples as f64
}

/// Minimization dominance, written out independently of the library.
pub fn better(a: &[f64], b: &[f64]) -> bool {
    a.iter().zip(b).all(|(x, y)| x <= y) && a.iter().zip(b).any(|(x, y)| x < y)
}

/// Pairwise-check oracle: indices of points not dominated by any other.
pub fn pairwise_non_dominated(points: &[Vec<f64>]) -> Vec<usize> {
    (0..points.len())
        .filter(|&i| !points.iter().any(|q| better(q, &points[i])))
        .collect()
}
