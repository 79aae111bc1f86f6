//! The set-arbitrating Bayesian optimization loop.
//!
//! One local problem is kept per intervention set. Every iteration each set
//! proposes a batch from its surrogate Pareto front; the set whose batch
//! promises the largest relative hypervolume improvement over its own
//! evaluated front is intervened upon, and only that set's surrogates are
//! refit. The causal Pareto front is the non-dominated subset of all
//! evaluations.

mod checkpoint;

use std::collections::BTreeSet;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::graph::{enumerate_pomis, latent_project, GraphError, InterventionSet};
use crate::pareto::{
    self, discover_local_front, diversity_regions, non_dominated_filter, non_dominated_indices,
    reference_point, rhvi, select_local_batch, DiscoveryConfig, DiversityRegionSet, FrontPoint,
    LocalFront, Objectives, ParetoArchive, ParetoError,
};
use crate::rng::derive;
use crate::scm::{CompiledScm, Domain, ExogenousSample, InterventionAssignment, ScmError, ScmSpec};
use crate::surrogate::{GpModel, Observation, SurrogateError};

pub use checkpoint::Checkpoint;

#[derive(Debug, Error)]
pub enum SolverError {
    #[error("configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Scm(#[from] ScmError),
    #[error(transparent)]
    Surrogate(#[from] SurrogateError),
    #[error(transparent)]
    Pareto(#[from] ParetoError),
    #[error("checkpoint: {0}")]
    Checkpoint(String),
}

pub type Result<T, E = SolverError> = std::result::Result<T, E>;

/// Which intervention sets the solver arbitrates between.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind", content = "sets")]
pub enum SetsMode {
    /// Possibly Pareto-optimal minimal intervention sets of the graph after
    /// projecting out non-manipulative variables.
    Pomis,
    /// Every subset of the treatments, including the empty set.
    AllSubsets,
    Explicit(Vec<InterventionSet>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    pub sets_mode: SetsMode,
    /// Initial evaluations per set.
    pub init_samples: usize,
    pub batch_size: usize,
    pub iterations: usize,
    /// Monte-Carlo samples per interventional mean.
    pub mc_samples: usize,
    pub seed: u64,
    pub discovery_population: usize,
    pub discovery_generations: usize,
    pub k_max: usize,
    pub link_distance: f64,
    /// Relative margin of the reference point beyond the nadir.
    pub reference_margin: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            sets_mode: SetsMode::Pomis,
            init_samples: 5,
            batch_size: 5,
            iterations: 30,
            mc_samples: 10_000,
            seed: 0,
            discovery_population: 100,
            discovery_generations: 50,
            k_max: pareto::DEFAULT_K_MAX,
            link_distance: pareto::DEFAULT_LINK_DISTANCE,
            reference_margin: 0.1,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if self.init_samples == 0 {
            return Err(SolverError::Config(
                "init_samples must be at least 1".into(),
            ));
        }
        if self.batch_size == 0 {
            return Err(SolverError::Config("batch_size must be at least 1".into()));
        }
        if self.mc_samples < 2 {
            return Err(SolverError::Config("mc_samples must be at least 2".into()));
        }
        if self.discovery_population == 0 {
            return Err(SolverError::Config(
                "discovery population must be positive".into(),
            ));
        }
        if !(self.link_distance > 0.0 && self.reference_margin > 0.0) {
            return Err(SolverError::Config(
                "link distance and reference margin must be positive".into(),
            ));
        }
        Ok(())
    }
}

/// A ground-truth front to score against, with the grid resolution used to
/// compute it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Reference {
    pub front: Vec<Vec<f64>>,
    pub grid: usize,
}

/// One evaluated intervention.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InterventionRecord {
    pub set: InterventionSet,
    pub x: Vec<f64>,
    pub mu: Vec<f64>,
    pub std_error: Vec<f64>,
    /// 0 for initial samples, otherwise the iteration that chose it.
    pub iteration: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SetScore {
    pub set: InterventionSet,
    /// Infinite when the set's evaluated front has no volume yet.
    #[serde(with = "finite_or_inf")]
    pub rhvi: f64,
}

/// Metrics of the pooled front after some number of evaluations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Progress {
    pub evaluations: usize,
    pub intervention_count: usize,
    pub front_size: usize,
    pub gd: Option<f64>,
    pub igd: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationLog {
    pub iteration: usize,
    pub chosen: InterventionSet,
    pub scores: Vec<SetScore>,
    pub batch: Vec<Vec<f64>>,
    pub mu: Vec<Vec<f64>>,
    pub progress: Progress,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub mode: String,
    pub seed: u64,
    pub config: SolverConfig,
    pub sets: Vec<InterventionSet>,
    pub targets: Vec<String>,
    /// Grid resolution of the reference front, when metrics were computed.
    pub reference_grid: Option<usize>,
    pub initial: Progress,
    pub log: Vec<IterationLog>,
    /// Non-dominated subset of every evaluation.
    pub front: ParetoArchive,
    pub records: Vec<InterventionRecord>,
}

impl RunReport {
    pub fn total_evaluations(&self) -> usize {
        self.records.len()
    }

    pub fn total_intervention_count(&self) -> usize {
        self.records.iter().map(|r| r.set.len()).sum()
    }

    /// Metrics after initialization followed by every iteration.
    pub fn trajectory(&self) -> Vec<&Progress> {
        std::iter::once(&self.initial)
            .chain(self.log.iter().map(|l| &l.progress))
            .collect()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

mod finite_or_inf {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_finite() {
            s.serialize_f64(*v)
        } else {
            s.serialize_str(if *v > 0.0 { "inf" } else { "-inf" })
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Value {
            Num(f64),
            Text(String),
        }
        match Value::deserialize(d)? {
            Value::Num(v) => Ok(v),
            Value::Text(t) if t == "inf" => Ok(f64::INFINITY),
            Value::Text(t) if t == "-inf" => Ok(f64::NEG_INFINITY),
            Value::Text(t) => Err(serde::de::Error::custom(format!("invalid number `{t}`"))),
        }
    }
}

/// Posterior means of one model per objective.
struct PosteriorMeans<'a>(&'a [GpModel]);

impl Objectives for PosteriorMeans<'_> {
    fn dim(&self) -> usize {
        self.0[0].bounds().len()
    }

    fn n_objectives(&self) -> usize {
        self.0.len()
    }

    fn evaluate(&self, x: &[f64]) -> Vec<f64> {
        self.0.iter().map(|m| m.mean(x)).collect()
    }
}

/// The local problem over one intervention set.
#[derive(Debug, Clone)]
pub struct LocalProblem {
    pub set: InterventionSet,
    pub bounds: Vec<Domain>,
    /// Indices into the solver's record list.
    pub records: Vec<usize>,
    pub models: Vec<GpModel>,
    pub approx: LocalFront,
    pub regions: DiversityRegionSet,
    /// Iteration whose data the models were last fit on.
    pub updated: usize,
}

// Stream identifiers for seed derivation.
const STREAM_MC: u64 = 1;
const STREAM_INIT: u64 = 2;
const STREAM_DISCOVER: u64 = 3;
const STREAM_PAD: u64 = 4;

/// Latin hypercube sample of `k` points in `bounds`.
fn latin_hypercube(bounds: &[Domain], k: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut points = vec![vec![0.0; bounds.len()]; k];
    for (j, d) in bounds.iter().enumerate() {
        let mut strata: Vec<usize> = (0..k).collect();
        strata.shuffle(&mut rng);
        for (i, s) in strata.into_iter().enumerate() {
            let u = (s as f64 + rng.gen::<f64>()) / k as f64;
            points[i][j] = d.lo + u * d.width();
        }
    }
    points
}

/// Resolves the configured family of intervention sets.
pub fn resolve_sets(spec: &ScmSpec, mode: &SetsMode) -> Result<Vec<InterventionSet>> {
    let sets = match mode {
        SetsMode::Pomis => enumerate_pomis(&latent_project(spec.graph())?)?,
        SetsMode::AllSubsets => {
            let xs: Vec<_> = spec.graph().treatments().into_iter().collect();
            if xs.len() > 16 {
                return Err(SolverError::Config(format!(
                    "{} treatments are too many for all subsets",
                    xs.len()
                )));
            }
            (0u32..(1 << xs.len()))
                .map(|bits| {
                    InterventionSet::from(
                        xs.iter()
                            .enumerate()
                            .filter(|(k, _)| bits >> k & 1 == 1)
                            .map(|(_, v)| v.clone())
                            .collect::<BTreeSet<_>>(),
                    )
                })
                .collect()
        }
        SetsMode::Explicit(sets) => sets.clone(),
    };
    if sets.is_empty() {
        return Err(SolverError::Config(
            "no intervention sets to optimize over".into(),
        ));
    }
    let mut seen = BTreeSet::new();
    for s in &sets {
        if !seen.insert(s.clone()) {
            return Err(SolverError::Config(format!(
                "intervention set {s} listed twice"
            )));
        }
        spec.bounds(s)?;
    }
    Ok(sets)
}

/// Full solver state between iterations.
pub struct SolverState {
    spec: ScmSpec,
    config: SolverConfig,
    scm: CompiledScm,
    sample: ExogenousSample,
    problems: Vec<LocalProblem>,
    records: Vec<InterventionRecord>,
    initial: Progress,
    log: Vec<IterationLog>,
    reference: Option<Reference>,
    mode: String,
}

impl SolverState {
    /// Evaluates `init_samples` Latin-hypercube points per set, fits the
    /// surrogates and discovers the initial local fronts.
    pub fn initialize(
        spec: &ScmSpec,
        config: &SolverConfig,
        reference: Option<Reference>,
    ) -> Result<Self> {
        config.validate()?;
        let sets = resolve_sets(spec, &config.sets_mode)?;
        let scm = CompiledScm::new(spec)?;
        let sample = scm.sample_exogenous(config.mc_samples, derive(config.seed, &[STREAM_MC]));
        let mut records = Vec::new();
        for (s, set) in sets.iter().enumerate() {
            let bounds = spec.bounds(set)?;
            for x in latin_hypercube(
                &bounds,
                config.init_samples,
                derive(config.seed, &[STREAM_INIT, s as u64]),
            ) {
                records.push(evaluate(&scm, &sample, set, x, 0)?);
            }
        }
        let mut state = Self {
            spec: spec.clone(),
            config: config.clone(),
            scm,
            sample,
            problems: Vec::new(),
            records,
            initial: Progress {
                evaluations: 0,
                intervention_count: 0,
                front_size: 0,
                gd: None,
                igd: None,
            },
            log: Vec::new(),
            reference,
            mode: "mocbo".into(),
        };
        state.problems = sets
            .par_iter()
            .enumerate()
            .map(|(s, set)| state.build_problem(s, set, 0))
            .collect::<Result<_>>()?;
        state.initial = state.progress()?;
        Ok(state)
    }

    fn build_problem(
        &self,
        s: usize,
        set: &InterventionSet,
        iteration: usize,
    ) -> Result<LocalProblem> {
        let bounds = self.spec.bounds(set)?;
        let records: Vec<usize> = (0..self.records.len())
            .filter(|&i| &self.records[i].set == set)
            .collect();
        let m = self.scm_targets();
        let models = (0..m)
            .into_par_iter()
            .map(|j| {
                let obs: Vec<Observation> = records
                    .iter()
                    .map(|&i| Observation {
                        x: self.records[i].x.clone(),
                        y: self.records[i].mu[j],
                        std_error: self.records[i].std_error[j],
                    })
                    .collect();
                GpModel::fit(&obs, &bounds)
            })
            .collect::<std::result::Result<Vec<_>, _>>()?;
        let warm: Vec<Vec<f64>> = records.iter().map(|&i| self.records[i].x.clone()).collect();
        let discovery = DiscoveryConfig {
            population: self.config.discovery_population,
            generations: self.config.discovery_generations,
            seed: derive(
                self.config.seed,
                &[STREAM_DISCOVER, iteration as u64, s as u64],
            ),
        };
        let approx = discover_local_front(&PosteriorMeans(&models), &bounds, &warm, &discovery);
        let regions = diversity_regions(
            &approx.inputs,
            &bounds,
            self.config.k_max,
            self.config.link_distance,
        );
        Ok(LocalProblem {
            set: set.clone(),
            bounds,
            records,
            models,
            approx,
            regions,
            updated: iteration,
        })
    }

    fn scm_targets(&self) -> usize {
        self.spec.targets().len()
    }

    pub fn problems(&self) -> &[LocalProblem] {
        &self.problems
    }

    pub fn records(&self) -> &[InterventionRecord] {
        &self.records
    }

    pub fn log(&self) -> &[IterationLog] {
        &self.log
    }

    pub fn iteration(&self) -> usize {
        self.log.len()
    }

    fn evaluated_front(&self, problem: &LocalProblem) -> Result<Vec<Vec<f64>>> {
        let mus: Vec<Vec<f64>> = problem
            .records
            .iter()
            .map(|&i| self.records[i].mu.clone())
            .collect();
        Ok(non_dominated_indices(&mus)?
            .into_iter()
            .map(|i| mus[i].clone())
            .collect())
    }

    /// Shared reference point: nadir of every evaluated mean plus a margin.
    pub fn reference_point(&self) -> Result<Vec<f64>> {
        let all: Vec<Vec<f64>> = self.records.iter().map(|r| r.mu.clone()).collect();
        Ok(reference_point(&all, self.config.reference_margin)?)
    }

    /// Candidate batch and its relative hypervolume improvement for one set.
    fn propose(
        &self,
        s: usize,
        reference: &[f64],
        iteration: usize,
    ) -> Result<(Vec<Vec<f64>>, f64)> {
        let problem = &self.problems[s];
        let local = self.evaluated_front(problem)?;
        let selection = select_local_batch(
            &problem.approx,
            &problem.regions,
            &local,
            reference,
            self.config.batch_size,
        )?;
        let mut batch = selection.inputs;
        if batch.len() < self.config.batch_size {
            // Too few surrogate-optimal candidates: fill with uniform
            // exploration points.
            let mut rng = ChaCha8Rng::seed_from_u64(derive(
                self.config.seed,
                &[STREAM_PAD, iteration as u64, s as u64],
            ));
            while batch.len() < self.config.batch_size {
                batch.push(
                    problem
                        .bounds
                        .iter()
                        .map(|d| rng.gen_range(d.lo..=d.hi))
                        .collect(),
                );
            }
        }
        let predicted: Vec<Vec<f64>> = batch
            .iter()
            .map(|x| PosteriorMeans(&problem.models).evaluate(x))
            .collect();
        let score = rhvi(&predicted, &local, reference)?;
        Ok((batch, score))
    }

    /// One iteration. On error the state is left unchanged.
    pub fn step(&mut self) -> Result<()> {
        let iteration = self.log.len() + 1;
        let reference = self.reference_point()?;
        let proposals: Vec<(Vec<Vec<f64>>, f64)> = (0..self.problems.len())
            .into_par_iter()
            .map(|s| self.propose(s, &reference, iteration))
            .collect::<Result<_>>()?;
        let mut chosen = 0;
        for (s, (_, score)) in proposals.iter().enumerate() {
            if *score > proposals[chosen].1 {
                chosen = s;
            }
        }
        let set = self.problems[chosen].set.clone();
        let batch = proposals[chosen].0.clone();
        let new_records = batch
            .iter()
            .map(|x| evaluate(&self.scm, &self.sample, &set, x.clone(), iteration))
            .collect::<Result<Vec<_>>>()?;

        let previous = self.records.len();
        self.records.extend(new_records);
        let rebuilt = self.build_problem(chosen, &set, iteration);
        let progress = rebuilt.as_ref().ok().map(|_| self.progress());
        match (rebuilt, progress) {
            (Ok(problem), Some(Ok(progress))) => {
                self.problems[chosen] = problem;
                self.log.push(IterationLog {
                    iteration,
                    chosen: set.clone(),
                    scores: self
                        .problems
                        .iter()
                        .zip(&proposals)
                        .map(|(p, (_, score))| SetScore {
                            set: p.set.clone(),
                            rhvi: *score,
                        })
                        .collect(),
                    mu: self.records[previous..]
                        .iter()
                        .map(|r| r.mu.clone())
                        .collect(),
                    batch,
                    progress,
                });
                Ok(())
            }
            (Err(e), _) | (_, Some(Err(e))) => {
                self.records.truncate(previous);
                Err(e)
            }
            (Ok(_), None) => unreachable!("progress computed when the rebuild succeeds"),
        }
    }

    fn progress(&self) -> Result<Progress> {
        let front = self.causal_front()?;
        let (gd, igd) = match &self.reference {
            Some(r) => {
                let approx = front.objectives();
                (
                    Some(pareto::gd(&approx, &r.front)?),
                    Some(pareto::igd(&approx, &r.front)?),
                )
            }
            None => (None, None),
        };
        Ok(Progress {
            evaluations: self.records.len(),
            intervention_count: self.records.iter().map(|r| r.set.len()).sum(),
            front_size: front.len(),
            gd,
            igd,
        })
    }

    /// Non-dominated subset of every evaluation, with origins.
    pub fn causal_front(&self) -> Result<ParetoArchive> {
        Ok(non_dominated_filter(
            self.records
                .iter()
                .map(|r| FrontPoint {
                    objectives: r.mu.clone(),
                    set: r.set.clone(),
                    x: r.x.clone(),
                    std_error: r.std_error.clone(),
                })
                .collect(),
        )?)
    }

    pub fn report(&self) -> Result<RunReport> {
        Ok(RunReport {
            mode: self.mode.clone(),
            seed: self.config.seed,
            config: self.config.clone(),
            sets: self.problems.iter().map(|p| p.set.clone()).collect(),
            targets: self.spec.targets().iter().map(|t| t.to_string()).collect(),
            reference_grid: self.reference.as_ref().map(|r| r.grid),
            initial: self.initial.clone(),
            log: self.log.clone(),
            front: self.causal_front()?,
            records: self.records.clone(),
        })
    }

    pub fn checkpoint(&self) -> Checkpoint {
        Checkpoint {
            mode: self.mode.clone(),
            config: self.config.clone(),
            sets: self.problems.iter().map(|p| p.set.clone()).collect(),
            updated: self.problems.iter().map(|p| p.updated).collect(),
            records: self.records.clone(),
            initial: self.initial.clone(),
            log: self.log.clone(),
        }
    }

    /// Rebuilds the state saved by [`SolverState::checkpoint`]. Surrogates
    /// and fronts are recomputed from the records, which reproduces them
    /// exactly.
    pub fn restore(
        spec: &ScmSpec,
        checkpoint: Checkpoint,
        reference: Option<Reference>,
    ) -> Result<Self> {
        checkpoint.config.validate()?;
        if checkpoint.sets.len() != checkpoint.updated.len() {
            return Err(SolverError::Checkpoint(
                "sets and update stamps differ in length".into(),
            ));
        }
        let scm = CompiledScm::new(spec)?;
        let sample = scm.sample_exogenous(
            checkpoint.config.mc_samples,
            derive(checkpoint.config.seed, &[STREAM_MC]),
        );
        let mut state = Self {
            spec: spec.clone(),
            config: checkpoint.config,
            scm,
            sample,
            problems: Vec::new(),
            records: checkpoint.records,
            initial: checkpoint.initial,
            log: checkpoint.log,
            reference,
            mode: checkpoint.mode,
        };
        // A set's records all predate its last update, so refitting from the
        // full record list reproduces its models.
        let problems = checkpoint
            .sets
            .par_iter()
            .zip(&checkpoint.updated)
            .enumerate()
            .map(|(s, (set, &updated))| state.build_problem(s, set, updated))
            .collect::<Result<Vec<_>>>()?;
        state.problems = problems;
        Ok(state)
    }
}

fn evaluate(
    scm: &CompiledScm,
    sample: &ExogenousSample,
    set: &InterventionSet,
    x: Vec<f64>,
    iteration: usize,
) -> Result<InterventionRecord> {
    let a = InterventionAssignment::new(set.clone(), x);
    let mu = scm.mean_with(sample, &a)?;
    Ok(InterventionRecord {
        set: a.set,
        x: a.values,
        mu: mu.means,
        std_error: mu.std_error,
        iteration,
    })
}

/// Initialization followed by `config.iterations` steps.
pub fn run(
    spec: &ScmSpec,
    config: &SolverConfig,
    reference: Option<Reference>,
) -> Result<RunReport> {
    let mut state = SolverState::initialize(spec, config, reference)?;
    for _ in 0..config.iterations {
        state.step()?;
    }
    state.report()
}

/// The same loop restricted to the single set of all treatments.
pub fn run_baseline(
    spec: &ScmSpec,
    config: &SolverConfig,
    reference: Option<Reference>,
) -> Result<RunReport> {
    let config = baseline_config(spec, config);
    let mut state = SolverState::initialize(spec, &config, reference)?;
    state.mode = "baseline".into();
    for _ in 0..config.iterations {
        state.step()?;
    }
    state.report()
}

/// `config` with the set family replaced by all treatments at once.
pub fn baseline_config(spec: &ScmSpec, config: &SolverConfig) -> SolverConfig {
    SolverConfig {
        sets_mode: SetsMode::Explicit(vec![InterventionSet::from(spec.graph().treatments())]),
        ..config.clone()
    }
}

/// Runs (or resumes) the loop, writing a checkpoint after initialization and
/// after every iteration.
pub fn run_with_checkpoint(
    spec: &ScmSpec,
    config: &SolverConfig,
    baseline: bool,
    reference: Option<Reference>,
    path: &std::path::Path,
) -> Result<RunReport> {
    let mut state = if path.exists() {
        let cp = Checkpoint::load(path)?;
        let mut expected = if baseline {
            baseline_config(spec, config)
        } else {
            config.clone()
        };
        expected.iterations = cp.config.iterations;
        if cp.config != expected {
            return Err(SolverError::Checkpoint(format!(
                "{} was written with a different configuration",
                path.display()
            )));
        }
        let mut state = SolverState::restore(spec, cp, reference)?;
        state.config.iterations = config.iterations;
        state
    } else {
        let cfg = if baseline {
            baseline_config(spec, config)
        } else {
            config.clone()
        };
        let mut state = SolverState::initialize(spec, &cfg, reference)?;
        if baseline {
            state.mode = "baseline".into();
        }
        state.checkpoint().save(path)?;
        state
    };
    while state.iteration() < config.iterations {
        state.step()?;
        state.checkpoint().save(path)?;
    }
    state.report()
}
