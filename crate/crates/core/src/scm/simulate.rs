//! Monte-Carlo execution of a structural causal model under interventions.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution as _, StandardNormal};
use serde::{Deserialize, Serialize};

use super::expr::{Program, Slot};
use super::spec::{Distribution, InterventionAssignment, ScmSpec};
use super::{Result, ScmError};
use crate::graph::VariableId;

/// Estimated target means under one intervention.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MuVector {
    /// One per target, in sorted target order.
    pub means: Vec<f64>,
    pub mc_samples: usize,
    /// Sample standard deviation over `sqrt(mc_samples)`.
    pub std_error: Vec<f64>,
}

/// `n` draws of every exogenous variable, one column each in declaration
/// order. The stream depends only on the seed, so two interventions
/// evaluated on the same sample share their noise.
#[derive(Debug, Clone, PartialEq)]
pub struct ExogenousSample {
    n: usize,
    columns: Vec<Vec<f64>>,
}

impl ExogenousSample {
    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn column(&self, j: usize) -> &[f64] {
        &self.columns[j]
    }
}

fn draw(d: &Distribution, rng: &mut ChaCha8Rng) -> f64 {
    match *d {
        Distribution::Gaussian { mean, stddev } => {
            let z: f64 = StandardNormal.sample(rng);
            mean + stddev * z
        }
        Distribution::TruncatedGaussian {
            mean,
            stddev,
            lo,
            hi,
        } => {
            // Rejection is exact; the cap only matters for intervals deep in
            // a tail, where a uniform draw over [lo, hi] is a close stand-in.
            for _ in 0..10_000 {
                let z: f64 = StandardNormal.sample(rng);
                let x = mean + stddev * z;
                if (lo..=hi).contains(&x) {
                    return x;
                }
            }
            rng.gen_range(lo..=hi)
        }
        Distribution::Uniform { lo, hi } => rng.gen_range(lo..hi),
        Distribution::Bernoulli { p, lo, hi } => {
            if rng.gen::<f64>() < p {
                hi
            } else {
                lo
            }
        }
    }
}

/// Endogenous values of one simulation: a constant (clamped or
/// noise-free) or one value per draw.
#[derive(Debug, Clone, PartialEq)]
enum Column {
    Constant(f64),
    Samples(Vec<f64>),
}

impl Column {
    fn slot(&self) -> Slot<'_> {
        match self {
            Column::Constant(x) => Slot::Scalar(*x),
            Column::Samples(c) => Slot::Column(c),
        }
    }
}

/// Sample matrix returned by [`simulate`]: one column per endogenous
/// variable, keyed by name.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleMatrix {
    pub n: usize,
    pub columns: BTreeMap<VariableId, Vec<f64>>,
}

impl SampleMatrix {
    pub fn column(&self, v: &str) -> Option<&[f64]> {
        self.columns.get(v).map(Vec::as_slice)
    }

    /// Row `i` in sorted variable order.
    pub fn row(&self, i: usize) -> Vec<f64> {
        self.columns.values().map(|c| c[i]).collect()
    }
}

/// A model compiled for repeated evaluation.
#[derive(Debug, Clone)]
pub struct CompiledScm {
    /// Endogenous variables in topological order.
    order: Vec<VariableId>,
    position: BTreeMap<VariableId, usize>,
    programs: Vec<Program>,
    exogenous: Vec<Distribution>,
    /// Positions of the targets, in sorted target order.
    targets: Vec<usize>,
    /// For each position, whether some target depends on it.
    relevant: Vec<bool>,
}

impl CompiledScm {
    pub fn new(spec: &ScmSpec) -> Result<Self> {
        let order = spec.graph().topological_names();
        let position: BTreeMap<VariableId, usize> = order
            .iter()
            .enumerate()
            .map(|(i, v)| (v.clone(), i))
            .collect();
        let exo_index: BTreeMap<&str, usize> = spec
            .exogenous()
            .iter()
            .enumerate()
            .map(|(j, e)| (e.name.as_str(), j))
            .collect();
        let n_endo = order.len();
        let resolve = |name: &str| {
            position
                .get(name)
                .copied()
                .or_else(|| exo_index.get(name).map(|j| n_endo + j))
        };
        let programs = order
            .iter()
            .map(|v| {
                spec.equation(v.as_str())
                    .expect("validated spec has an equation per variable")
                    .compile(&resolve)
                    .map_err(|source| ScmError::Eval {
                        variable: v.to_string(),
                        source,
                    })
            })
            .collect::<Result<Vec<_>>>()?;
        let targets: Vec<usize> = spec.targets().iter().map(|t| position[t]).collect();
        let ancestors = spec.graph().ancestors_inclusive(&spec.graph().targets())?;
        let relevant = order.iter().map(|v| ancestors.contains(v)).collect();
        Ok(Self {
            order,
            position,
            programs,
            exogenous: spec.exogenous().iter().map(|e| e.distribution).collect(),
            targets,
            relevant,
        })
    }

    pub fn sample_exogenous(&self, n: usize, seed: u64) -> ExogenousSample {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let columns = self
            .exogenous
            .iter()
            .map(|d| (0..n).map(|_| draw(d, &mut rng)).collect())
            .collect();
        ExogenousSample { n, columns }
    }

    fn clamps(&self, a: &InterventionAssignment) -> Result<Vec<Option<f64>>> {
        let mut clamps = vec![None; self.order.len()];
        for (v, x) in a.pairs() {
            let i = *self
                .position
                .get(v)
                .ok_or_else(|| ScmError::Invalid(format!("unknown variable `{v}`")))?;
            clamps[i] = Some(x);
        }
        Ok(clamps)
    }

    /// Evaluates endogenous columns in topological order. With
    /// `targets_only`, variables no target depends on are skipped.
    fn propagate(
        &self,
        sample: &ExogenousSample,
        a: &InterventionAssignment,
        targets_only: bool,
    ) -> Result<Vec<Option<Column>>> {
        let clamps = self.clamps(a)?;
        let n = sample.n;
        let mut values: Vec<Option<Column>> = vec![None; self.order.len()];
        for (i, program) in self.programs.iter().enumerate() {
            if let Some(x) = clamps[i] {
                values[i] = Some(Column::Constant(x));
                continue;
            }
            if targets_only && !self.relevant[i] {
                continue;
            }
            let slots: Vec<Slot<'_>> = values
                .iter()
                .map(|c| c.as_ref().map_or(Slot::Scalar(f64::NAN), Column::slot))
                .chain(sample.columns.iter().map(|c| Slot::Column(c)))
                .collect();
            let variable = &self.order[i];
            let col = match program.eval_scalar_or_column(&slots, n) {
                Ok(Ok(x)) => Column::Constant(x),
                Ok(Err(c)) => Column::Samples(c),
                Err(source) => {
                    return Err(ScmError::Eval {
                        variable: variable.to_string(),
                        source,
                    })
                }
            };
            let finite = match &col {
                Column::Constant(x) => x.is_finite(),
                Column::Samples(c) => c.iter().all(|x| x.is_finite()),
            };
            if !finite {
                return Err(ScmError::NonFinite(variable.to_string()));
            }
            values[i] = Some(col);
        }
        Ok(values)
    }

    /// All endogenous variables for every draw of `sample`.
    pub fn simulate_with(
        &self,
        sample: &ExogenousSample,
        a: &InterventionAssignment,
    ) -> Result<SampleMatrix> {
        let values = self.propagate(sample, a, false)?;
        let columns = self
            .order
            .iter()
            .zip(values)
            .map(|(v, c)| {
                let col = match c.expect("all variables evaluated") {
                    Column::Constant(x) => vec![x; sample.n],
                    Column::Samples(c) => c,
                };
                (v.clone(), col)
            })
            .collect();
        Ok(SampleMatrix {
            n: sample.n,
            columns,
        })
    }

    /// Target means and standard errors over `sample`.
    pub fn mean_with(
        &self,
        sample: &ExogenousSample,
        a: &InterventionAssignment,
    ) -> Result<MuVector> {
        let n = sample.n;
        if n < 2 {
            return Err(ScmError::Invalid(format!(
                "at least 2 Monte-Carlo samples required, got {n}"
            )));
        }
        let values = self.propagate(sample, a, true)?;
        let mut means = Vec::with_capacity(self.targets.len());
        let mut std_error = Vec::with_capacity(self.targets.len());
        for &t in &self.targets {
            match values[t].as_ref().expect("targets evaluated") {
                Column::Constant(x) => {
                    means.push(*x);
                    std_error.push(0.0);
                }
                Column::Samples(c) => {
                    let mean = c.iter().sum::<f64>() / n as f64;
                    let var = c.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
                    means.push(mean);
                    std_error.push((var / n as f64).sqrt());
                }
            }
        }
        Ok(MuVector {
            means,
            mc_samples: n,
            std_error,
        })
    }
}

/// `n` draws of all endogenous variables under `intervention`.
pub fn simulate(
    spec: &ScmSpec,
    intervention: &InterventionAssignment,
    n: usize,
    seed: u64,
) -> Result<SampleMatrix> {
    if n == 0 {
        return Err(ScmError::Invalid("at least one sample required".into()));
    }
    spec.validate_assignment(intervention)?;
    let scm = CompiledScm::new(spec)?;
    scm.simulate_with(&scm.sample_exogenous(n, seed), intervention)
}

/// Draws from the model with no intervention.
pub fn simulate_observational(spec: &ScmSpec, n: usize, seed: u64) -> Result<SampleMatrix> {
    let scm = CompiledScm::new(spec)?;
    let sample = scm.sample_exogenous(n, seed);
    let values = scm.propagate(&sample, &InterventionAssignment::observational(), false)?;
    let columns = scm
        .order
        .iter()
        .zip(values)
        .map(|(v, c)| match c.expect("evaluated") {
            Column::Constant(x) => (v.clone(), vec![x; n]),
            Column::Samples(c) => (v.clone(), c),
        })
        .collect();
    Ok(SampleMatrix { n, columns })
}

/// Monte-Carlo estimate of the target means under `intervention`.
pub fn interventional_mean(
    spec: &ScmSpec,
    intervention: &InterventionAssignment,
    n: usize,
    seed: u64,
) -> Result<MuVector> {
    spec.validate_assignment(intervention)?;
    let scm = CompiledScm::new(spec)?;
    scm.mean_with(&scm.sample_exogenous(n, seed), intervention)
}
