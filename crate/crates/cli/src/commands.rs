use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use causal_pareto::experiment::{
    aggregate, aggregate_to_csv, dominated_fraction, median, progress_at_budget, split_seeds,
};
use causal_pareto::graph::{
    analyze as analyze_graph, enumerate_pomis, latent_project, parse_graph, InterventionSet,
};
use causal_pareto::pareto::{front_from_csv, front_to_csv};
use causal_pareto::scm::{
    builtin_problem, interventional_mean, parse_spec, InterventionAssignment, ScmError, ScmSpec,
};
use causal_pareto::solver::{
    self, baseline_config, resolve_sets, run_with_checkpoint, Reference, RunReport, SetsMode,
    SolverConfig,
};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::{
    cache, AnalyzeArgs, CliError, CompareArgs, EvalArgs, GroundTruthArgs, Mode, ProblemArgs,
    Result, RunArgs, SetFamily, OUT_ENV,
};

/// What a run directory holds besides the per-seed files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunMeta {
    pub problem: String,
    pub mode: String,
    pub master_seed: u64,
    pub seeds: Vec<u64>,
    pub config: SolverConfig,
    pub reference_grid: Option<usize>,
}

fn runtime(e: impl std::fmt::Display) -> CliError {
    CliError::Runtime(e.to_string())
}

pub fn write(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir)
            .map_err(|e| CliError::Runtime(format!("{}: {e}", dir.display())))?;
    }
    std::fs::write(path, text).map_err(|e| CliError::Runtime(format!("{}: {e}", path.display())))
}

fn read(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| CliError::Runtime(format!("{}: {e}", path.display())))
}

fn out_root() -> PathBuf {
    std::env::var_os(OUT_ENV)
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from("runs"))
}

fn load(problem: &ProblemArgs) -> Result<(String, ScmSpec)> {
    match (&problem.problem, &problem.spec) {
        (Some(name), None) => match builtin_problem(name) {
            Ok(spec) => Ok((name.clone(), spec)),
            Err(e @ ScmError::UnknownProblem { .. }) => Err(CliError::Usage(e.to_string())),
            Err(e) => Err(runtime(e)),
        },
        (None, Some(path)) => {
            let spec = parse_spec(&read(path)?)
                .map_err(|e| CliError::Runtime(format!("{}: {e}", path.display())))?;
            let name = path
                .file_stem()
                .map_or("spec".into(), |s| s.to_string_lossy().into_owned());
            Ok((name, spec))
        }
        _ => Err(CliError::Usage(
            "exactly one of --problem or --spec is required".into(),
        )),
    }
}

fn family(spec: &ScmSpec, sets: SetFamily) -> Result<Vec<InterventionSet>> {
    let mode = match sets {
        SetFamily::Pomis => SetsMode::Pomis,
        SetFamily::All => SetsMode::AllSubsets,
    };
    resolve_sets(spec, &mode).map_err(runtime)
}

/// Prints to stdout, ignoring a closed pipe.
fn emit(text: &str) {
    use std::io::Write;
    let _ = std::io::stdout().lock().write_all(text.as_bytes());
}

fn print_json(value: &impl Serialize) {
    emit(&(serde_json::to_string_pretty(value).expect("serializable") + "\n"));
}

pub fn analyze(args: AnalyzeArgs) -> Result<()> {
    let graph = match &args.graph {
        Some(path) => parse_graph(&read(path)?)
            .map_err(|e| CliError::Runtime(format!("{}: {e}", path.display())))?,
        None => load(&args.problem)?.1.graph().clone(),
    };
    print_json(&analyze_graph(&graph).map_err(runtime)?);
    Ok(())
}

pub fn eval(args: EvalArgs) -> Result<()> {
    let (_, spec) = load(&args.problem)?;
    let assignment = match &args.intervention {
        Some(text) => {
            InterventionAssignment::parse(text).map_err(|e| CliError::Usage(e.to_string()))?
        }
        None => InterventionAssignment::observational(),
    };
    let mu =
        interventional_mean(&spec, &assignment, args.mc_samples, args.seed).map_err(runtime)?;
    print_json(&serde_json::json!({
        "intervention": assignment.set.to_string(),
        "values": assignment.values,
        "targets": spec.targets(),
        "means": mu.means,
        "std_error": mu.std_error,
        "mc_samples": mu.mc_samples,
    }));
    Ok(())
}

pub fn ground_truth(args: GroundTruthArgs) -> Result<()> {
    let (name, spec) = load(&args.problem)?;
    let sets = family(&spec, args.sets)?;
    let root = out_root();
    let (text, hit) =
        cache::ground_truth_csv(&root, &spec, &sets, args.grid, args.mc_samples, args.seed)?;
    let out = args
        .out
        .unwrap_or_else(|| root.join(format!("ground-truth-{name}-grid{}", args.grid)));
    write(&out.join("front.csv"), &text)?;
    eprintln!(
        "{} reference front for {name}: {} ({})",
        if hit { "cached" } else { "computed" },
        out.join("front.csv").display(),
        front_from_csv(&text).map_err(runtime)?.len()
    );
    Ok(())
}

/// Reference front over the POMIS family, computed once and cached.
fn reference(root: &Path, spec: &ScmSpec, args: &RunArgs) -> Result<Reference> {
    let sets = enumerate_pomis(&latent_project(spec.graph()).map_err(runtime)?).map_err(runtime)?;
    let (text, _) =
        cache::ground_truth_csv(root, spec, &sets, args.grid, args.mc_samples, args.seed)?;
    let front = front_from_csv(&text).map_err(runtime)?;
    Ok(Reference {
        front: front.into_iter().map(|p| p.objectives).collect(),
        grid: args.grid,
    })
}

pub fn run(args: RunArgs) -> Result<()> {
    match args.mode {
        Mode::GraphAnalyze => {
            return analyze(AnalyzeArgs {
                problem: args.problem,
                graph: None,
            })
        }
        Mode::GroundTruth => {
            return ground_truth(GroundTruthArgs {
                problem: args.problem,
                grid: args.grid,
                mc_samples: args.mc_samples,
                seed: args.seed,
                sets: args.sets,
                out: args.out,
            })
        }
        Mode::Mocbo | Mode::Baseline => {}
    }
    if args.seeds == 0 {
        return Err(CliError::Usage("--seeds must be at least 1".into()));
    }
    let (name, spec) = load(&args.problem)?;
    let baseline = args.mode == Mode::Baseline;
    let mode = if baseline { "baseline" } else { "mocbo" };
    let config = SolverConfig {
        sets_mode: match args.sets {
            SetFamily::Pomis => SetsMode::Pomis,
            SetFamily::All => SetsMode::AllSubsets,
        },
        init_samples: args.init_samples,
        batch_size: args.batch_size,
        iterations: args.iters,
        mc_samples: args.mc_samples,
        seed: args.seed,
        ..SolverConfig::default()
    };
    config
        .validate()
        .map_err(|e| CliError::Usage(e.to_string()))?;
    let root = out_root();
    let out = args
        .out
        .clone()
        .unwrap_or_else(|| root.join(format!("{name}-{mode}-seed{}", args.seed)));
    let reference = if args.no_reference {
        None
    } else {
        Some(reference(&root, &spec, &args)?)
    };
    let seeds = split_seeds(args.seed, args.seeds);
    let reports: Vec<RunReport> = seeds
        .par_iter()
        .enumerate()
        .map(|(k, &seed)| {
            let cfg = SolverConfig {
                seed,
                ..config.clone()
            };
            let checkpoint = out.join(format!("checkpoint-{k}.json"));
            if args.checkpoint {
                std::fs::create_dir_all(&out).map_err(runtime)?;
                run_with_checkpoint(&spec, &cfg, baseline, reference.clone(), &checkpoint)
                    .map_err(runtime)
            } else if baseline {
                solver::run_baseline(&spec, &cfg, reference.clone()).map_err(runtime)
            } else {
                solver::run(&spec, &cfg, reference.clone()).map_err(runtime)
            }
        })
        .collect::<Result<_>>()?;
    for (k, r) in reports.iter().enumerate() {
        write(&out.join(format!("report-{k}.json")), &r.to_json())?;
        write(
            &out.join(format!("front-{k}.csv")),
            &front_to_csv(r.front.points()),
        )?;
    }
    let rows = aggregate(&reports);
    write(&out.join("aggregate.csv"), &aggregate_to_csv(&rows))?;
    let meta = RunMeta {
        problem: name.clone(),
        mode: mode.into(),
        master_seed: args.seed,
        seeds: seeds.clone(),
        config: if baseline {
            baseline_config(&spec, &config)
        } else {
            config
        },
        reference_grid: reference.as_ref().map(|r| r.grid),
    };
    write(
        &out.join("meta.json"),
        &serde_json::to_string_pretty(&meta).expect("serializable"),
    )?;

    eprintln!("{name} {mode}: {} seeds -> {}", seeds.len(), out.display());
    let mut table = String::from("seed,evaluations,interventions,front_size,gd,igd\n");
    for (k, r) in reports.iter().enumerate() {
        let last = r
            .trajectory()
            .last()
            .copied()
            .cloned()
            .expect("initial progress");
        writeln!(
            table,
            "{k},{},{},{},{},{}",
            last.evaluations,
            last.intervention_count,
            last.front_size,
            fmt(last.gd),
            fmt(last.igd)
        )
        .expect("write to string");
    }
    if let Some(last) = rows.last() {
        writeln!(
            table,
            "median,,{},,{},{}",
            last.intervention_count_median,
            fmt(last.gd_median),
            fmt(last.igd_median)
        )
        .expect("write to string");
    }
    emit(&table);
    Ok(())
}

fn fmt(v: Option<f64>) -> String {
    v.map_or(String::new(), |v| format!("{v}"))
}

/// One compared run directory.
struct RunDir {
    path: PathBuf,
    meta: RunMeta,
    reports: Vec<RunReport>,
}

fn load_run(path: &Path) -> Result<RunDir> {
    let meta: RunMeta = serde_json::from_str(&read(&path.join("meta.json"))?)
        .map_err(|e| CliError::Runtime(format!("{}: {e}", path.join("meta.json").display())))?;
    let reports = (0..meta.seeds.len())
        .map(|k| {
            let file = path.join(format!("report-{k}.json"));
            serde_json::from_str(&read(&file)?)
                .map_err(|e| CliError::Runtime(format!("{}: {e}", file.display())))
        })
        .collect::<Result<Vec<RunReport>>>()?;
    Ok(RunDir {
        path: path.to_path_buf(),
        meta,
        reports,
    })
}

/// Median over seeds of a per-seed quantity.
fn per_seed_median(reports: &[RunReport], f: impl Fn(&RunReport) -> Option<f64>) -> Option<f64> {
    let v: Option<Vec<f64>> = reports.iter().map(f).collect();
    v.map(|v| median(&v))
}

pub fn compare(args: CompareArgs) -> Result<()> {
    let runs = args
        .dirs
        .iter()
        .map(|d| load_run(d))
        .collect::<Result<Vec<_>>>()?;
    let problem = &runs[0].meta.problem;
    if let Some(other) = runs.iter().find(|r| &r.meta.problem != problem) {
        return Err(CliError::Usage(format!(
            "{} is for problem `{}`, {} for `{problem}`",
            other.path.display(),
            other.meta.problem,
            runs[0].path.display()
        )));
    }
    let budget = runs
        .iter()
        .flat_map(|r| r.reports.iter().map(RunReport::total_intervention_count))
        .min()
        .unwrap_or(0);
    let first = &runs[0];
    let final_gd =
        |r: &RunDir| per_seed_median(&r.reports, |p| p.trajectory().last().and_then(|q| q.gd));
    let final_igd =
        |r: &RunDir| per_seed_median(&r.reports, |p| p.trajectory().last().and_then(|q| q.igd));
    let (gd0, igd0) = (final_gd(first), final_igd(first));
    let mut table = String::from(
        "dir,mode,seeds,gd_median,igd_median,gd_delta,igd_delta,budget,igd_at_budget,dominated_by_first\n",
    );
    for r in &runs {
        let (gd, igd) = (final_gd(r), final_igd(r));
        let delta = |a: Option<f64>, b: Option<f64>| a.zip(b).map(|(a, b)| a - b);
        let at_budget = per_seed_median(&r.reports, |p| progress_at_budget(p, budget).igd);
        let n = r.reports.len().min(first.reports.len());
        let dominated: Vec<f64> = (0..n)
            .map(|k| {
                dominated_fraction(
                    &r.reports[k].front.objectives(),
                    &first.reports[k].front.objectives(),
                )
            })
            .collect();
        writeln!(
            table,
            "{},{},{},{},{},{},{},{budget},{},{}",
            r.path.display(),
            r.meta.mode,
            r.reports.len(),
            fmt(gd),
            fmt(igd),
            fmt(delta(gd, gd0)),
            fmt(delta(igd, igd0)),
            fmt(at_budget),
            median(&dominated),
        )
        .expect("write to string");
    }
    emit(&table);
    if let Some(out) = &args.out {
        write(out, &table)?;
    }
    Ok(())
}
