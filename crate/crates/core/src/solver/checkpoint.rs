use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{InterventionRecord, IterationLog, Progress, Result, SolverConfig, SolverError};
use crate::graph::InterventionSet;

/// Everything needed to resume a run: the evaluated data, the log and the
/// iteration at which each set's surrogates were last refit. Seeds are
/// derived from counters, so no generator state needs saving.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub mode: String,
    pub config: SolverConfig,
    pub sets: Vec<InterventionSet>,
    pub updated: Vec<usize>,
    pub records: Vec<InterventionRecord>,
    pub initial: Progress,
    pub log: Vec<IterationLog>,
}

impl Checkpoint {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| SolverError::Checkpoint(format!("{}: {e}", path.display())))?;
        serde_json::from_str(&text)
            .map_err(|e| SolverError::Checkpoint(format!("{}: {e}", path.display())))
    }

    /// Writes atomically through a sibling temporary file.
    pub fn save(&self, path: &Path) -> Result<()> {
        let tmp = path.with_extension("tmp");
        let text = serde_json::to_string(self).expect("checkpoint serializes");
        std::fs::write(&tmp, text)
            .and_then(|_| std::fs::rename(&tmp, path))
            .map_err(|e| SolverError::Checkpoint(format!("{}: {e}", path.display())))
    }
}
