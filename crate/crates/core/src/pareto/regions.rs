//! Diversity regions: single-linkage clusters of an approximate Pareto set in
//! normalized input space.

use serde::{Deserialize, Serialize};

use crate::scm::Domain;

/// Default cap on the number of regions.
pub const DEFAULT_K_MAX: usize = 8;
/// Default linkage distance in unit-cube coordinates.
pub const DEFAULT_LINK_DISTANCE: f64 = 0.1;

/// A partition of candidate points into regions `0..k`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DiversityRegionSet {
    /// Region of each candidate, numbered by first appearance.
    pub labels: Vec<usize>,
    pub k: usize,
}

impl DiversityRegionSet {
    /// Members of region `r`, in candidate order.
    pub fn members(&self, r: usize) -> Vec<usize> {
        (0..self.labels.len())
            .filter(|&i| self.labels[i] == r)
            .collect()
    }

    pub fn sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.k];
        for &l in &self.labels {
            sizes[l] += 1;
        }
        sizes
    }
}

fn find(parent: &mut [usize], mut i: usize) -> usize {
    while parent[i] != i {
        parent[i] = parent[parent[i]];
        i = parent[i];
    }
    i
}

/// Links every pair of inputs closer than `link_distance` (after scaling
/// each coordinate by its domain width) and keeps merging the closest
/// clusters while more than `k_max` remain.
pub fn diversity_regions(
    inputs: &[Vec<f64>],
    bounds: &[Domain],
    k_max: usize,
    link_distance: f64,
) -> DiversityRegionSet {
    let n = inputs.len();
    let k_max = k_max.max(1);
    let unit: Vec<Vec<f64>> = inputs
        .iter()
        .map(|x| {
            x.iter()
                .zip(bounds)
                .map(|(v, d)| (v - d.lo) / d.width())
                .collect()
        })
        .collect();
    let mut edges: Vec<(f64, usize, usize)> = Vec::with_capacity(n * n.saturating_sub(1) / 2);
    for i in 0..n {
        for j in i + 1..n {
            let d = unit[i]
                .iter()
                .zip(&unit[j])
                .map(|(a, b)| (a - b).powi(2))
                .sum::<f64>()
                .sqrt();
            edges.push((d, i, j));
        }
    }
    edges.sort_by(|a, b| a.0.total_cmp(&b.0).then((a.1, a.2).cmp(&(b.1, b.2))));
    let mut parent: Vec<usize> = (0..n).collect();
    let mut components = n;
    for (d, i, j) in edges {
        if d > link_distance && components <= k_max {
            break;
        }
        let (a, b) = (find(&mut parent, i), find(&mut parent, j));
        if a != b {
            parent[a.max(b)] = a.min(b);
            components -= 1;
        }
    }
    let mut roots: Vec<usize> = Vec::new();
    let labels = (0..n)
        .map(|i| {
            let r = find(&mut parent, i);
            match roots.iter().position(|&x| x == r) {
                Some(p) => p,
                None => {
                    roots.push(r);
                    roots.len() - 1
                }
            }
        })
        .collect();
    DiversityRegionSet {
        labels,
        k: roots.len(),
    }
}
