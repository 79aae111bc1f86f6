//! Content-addressed cache of reference fronts.

use std::path::{Path, PathBuf};

use causal_pareto::graph::InterventionSet;
use causal_pareto::pareto::front_to_csv;
use causal_pareto::scm::{ground_truth_front, ScmSpec};
use sha2::{Digest, Sha256};

use crate::{CliError, Result};

/// Hex digest identifying a reference-front computation.
pub fn key(
    spec: &ScmSpec,
    sets: &[InterventionSet],
    grid: usize,
    n_mc: usize,
    seed: u64,
) -> String {
    let mut h = Sha256::new();
    h.update(b"ground-truth/v1\n");
    h.update(spec.serialize().as_bytes());
    for s in sets {
        h.update(format!("\nset {s}").as_bytes());
    }
    h.update(format!("\ngrid {grid}\nmc {n_mc}\nseed {seed}\n").as_bytes());
    h.finalize().iter().map(|b| format!("{b:02x}")).collect()
}

pub fn path(root: &Path, key: &str) -> PathBuf {
    root.join("cache").join(format!("ground-truth-{key}.csv"))
}

/// The front as CSV text and whether it came from the cache.
pub fn ground_truth_csv(
    root: &Path,
    spec: &ScmSpec,
    sets: &[InterventionSet],
    grid: usize,
    n_mc: usize,
    seed: u64,
) -> Result<(String, bool)> {
    let file = path(root, &key(spec, sets, grid, n_mc, seed));
    if let Ok(text) = std::fs::read_to_string(&file) {
        return Ok((text, true));
    }
    let front = ground_truth_front(spec, sets, grid, n_mc, seed).map_err(|e| match e {
        causal_pareto::scm::ScmError::BudgetExceeded { .. } => CliError::Usage(e.to_string()),
        e => CliError::Runtime(e.to_string()),
    })?;
    let text = front_to_csv(front.points());
    crate::commands::write(&file, &text)?;
    Ok((text, false))
}
