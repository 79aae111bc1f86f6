//! Region-balanced batch selection maximizing hypervolume improvement.

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use super::discover::LocalFront;
use super::hypervolume::hvi;
use super::regions::DiversityRegionSet;
use super::{lexicographic, Result};

/// Chosen candidates, in pick order.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct BatchSelection {
    /// Indices into the candidate list.
    pub indices: Vec<usize>,
    pub inputs: Vec<Vec<f64>>,
    pub objectives: Vec<Vec<f64>>,
    /// Hypervolume improvement of the whole batch over the archive.
    pub hvi: f64,
}

/// Whether per-region pick counts are balanced: counts of regions that still
/// have unpicked candidates differ from the largest count by at most one.
pub(crate) fn balanced(counts: &[usize], sizes: &[usize]) -> bool {
    let max = counts.iter().copied().max().unwrap_or(0);
    counts
        .iter()
        .zip(sizes)
        .all(|(&c, &s)| c <= s && (c == s || max - c <= 1))
}

fn batch_hvi(
    picks: &[usize],
    candidates: &LocalFront,
    archive: &[Vec<f64>],
    reference: &[f64],
) -> Result<f64> {
    let batch: Vec<Vec<f64>> = picks
        .iter()
        .map(|&i| candidates.objectives[i].clone())
        .collect();
    hvi(&batch, archive, reference)
}

/// Greedily picks up to `b` candidates maximizing the batch hypervolume
/// improvement over `archive`, choosing only from the least-used regions so
/// region counts stay balanced, then applies single swaps that keep the
/// balance and strictly raise the improvement until none remains. Ties go to
/// the lexicographically smallest input.
pub fn select_local_batch(
    candidates: &LocalFront,
    regions: &DiversityRegionSet,
    archive: &[Vec<f64>],
    reference: &[f64],
    b: usize,
) -> Result<BatchSelection> {
    let n = candidates.len();
    let sizes = regions.sizes();
    let mut counts = vec![0usize; regions.k];
    let mut picked = vec![false; n];
    let mut picks: Vec<usize> = Vec::new();
    let mut current = 0.0;

    // Candidates in lexicographic input order make the tie-break a plain
    // "first best wins".
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &c| {
        lexicographic(&candidates.inputs[a], &candidates.inputs[c]).then(a.cmp(&c))
    });

    while picks.len() < b.min(n) {
        let open: Vec<usize> = (0..regions.k).filter(|&r| counts[r] < sizes[r]).collect();
        let least = open
            .iter()
            .map(|&r| counts[r])
            .min()
            .expect("candidates remain");
        let mut best: Option<(usize, f64)> = None;
        for &i in &order {
            let r = regions.labels[i];
            if picked[i] || counts[r] != least {
                continue;
            }
            let mut trial = picks.clone();
            trial.push(i);
            let v = batch_hvi(&trial, candidates, archive, reference)?;
            if best.map_or(true, |(_, bv)| v > bv) {
                best = Some((i, v));
            }
        }
        let (i, v) = best.expect("an open region has a candidate");
        picked[i] = true;
        counts[regions.labels[i]] += 1;
        picks.push(i);
        current = v;
    }

    loop {
        let mut improved = false;
        'outer: for slot in 0..picks.len() {
            for &i in &order {
                if picked[i] {
                    continue;
                }
                let out = picks[slot];
                let mut trial_counts = counts.clone();
                trial_counts[regions.labels[out]] -= 1;
                trial_counts[regions.labels[i]] += 1;
                if !balanced(&trial_counts, &sizes) {
                    continue;
                }
                let mut trial = picks.clone();
                trial[slot] = i;
                let v = batch_hvi(&trial, candidates, archive, reference)?;
                if v.partial_cmp(&current) == Some(Ordering::Greater)
                    && v - current > 1e-12 * current.abs().max(1.0)
                {
                    picked[out] = false;
                    picked[i] = true;
                    counts = trial_counts;
                    picks = trial;
                    current = v;
                    improved = true;
                    break 'outer;
                }
            }
        }
        if !improved {
            break;
        }
    }

    Ok(BatchSelection {
        inputs: picks
            .iter()
            .map(|&i| candidates.inputs[i].clone())
            .collect(),
        objectives: picks
            .iter()
            .map(|&i| candidates.objectives[i].clone())
            .collect(),
        indices: picks,
        hvi: current,
    })
}
