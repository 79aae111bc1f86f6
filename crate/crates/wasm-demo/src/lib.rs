//! WebAssembly bindings for the browser demo in `www/`.
//!
//! Every export takes plain strings and numbers and returns JSON text. The
//! `*_json` functions hold the logic so they can be tested natively.

use causal_pareto::graph::{analyze, parse_graph};
use causal_pareto::scm::{builtin_problem, ground_truth_front, parse_spec, ScmSpec};
use causal_pareto::solver::{resolve_sets, run, SetsMode, SolverConfig};
use serde_json::json;
use wasm_bindgen::prelude::*;

/// Largest grid the demo evaluates per dimension.
pub const MAX_GRID: usize = 15;
/// Largest iteration count the demo runs.
pub const MAX_ITERATIONS: usize = 20;

/// A built-in problem name or the text of a model file.
fn model(source: &str) -> Result<ScmSpec, String> {
    let name = source.trim();
    if !name.contains('\n') && !name.contains('[') {
        return builtin_problem(name).map_err(|e| e.to_string());
    }
    parse_spec(source).map_err(|e| e.to_string())
}

fn family(name: &str) -> Result<SetsMode, String> {
    match name {
        "pomis" => Ok(SetsMode::Pomis),
        "all" => Ok(SetsMode::AllSubsets),
        other => Err(format!(
            "unknown set family `{other}` (expected pomis or all)"
        )),
    }
}

/// Projection, MUCT, border, POMIS and MIS of a graph given as model or
/// graph text (or a built-in problem name).
pub fn analyze_graph_json(source: &str) -> Result<String, String> {
    let graph = match model(source) {
        Ok(spec) => spec.graph().clone(),
        Err(_) => parse_graph(source).map_err(|e| e.to_string())?,
    };
    let analysis = analyze(&graph).map_err(|e| e.to_string())?;
    serde_json::to_string(&analysis).map_err(|e| e.to_string())
}

/// Grid-search front over the POMIS (`"pomis"`) or every subset (`"all"`).
pub fn explore_front_json(
    source: &str,
    sets: &str,
    grid: usize,
    mc_samples: usize,
    seed: u64,
) -> Result<String, String> {
    if !(2..=MAX_GRID).contains(&grid) {
        return Err(format!("grid must be between 2 and {MAX_GRID}"));
    }
    let spec = model(source)?;
    let family = resolve_sets(&spec, &family(sets)?).map_err(|e| e.to_string())?;
    let front =
        ground_truth_front(&spec, &family, grid, mc_samples, seed).map_err(|e| e.to_string())?;
    Ok(json!({
        "targets": spec.targets(),
        "sets": family.iter().map(|s| s.tag()).collect::<Vec<_>>(),
        "points": front.points(),
    })
    .to_string())
}

/// A short optimization run with a reduced budget; returns the full report.
pub fn run_solver_json(
    source: &str,
    sets: &str,
    iterations: usize,
    seed: u64,
) -> Result<String, String> {
    if iterations > MAX_ITERATIONS {
        return Err(format!("at most {MAX_ITERATIONS} iterations"));
    }
    let spec = model(source)?;
    let config = SolverConfig {
        sets_mode: family(sets)?,
        iterations,
        seed,
        mc_samples: 2_000,
        discovery_population: 40,
        discovery_generations: 20,
        ..SolverConfig::default()
    };
    let report = run(&spec, &config, None).map_err(|e| e.to_string())?;
    Ok(report.to_json())
}

#[wasm_bindgen]
pub fn analyze_graph(source: &str) -> Result<String, JsValue> {
    analyze_graph_json(source).map_err(|e| JsValue::from_str(&e))
}

#[wasm_bindgen]
pub fn explore_front(
    source: &str,
    sets: &str,
    grid: usize,
    mc_samples: usize,
    seed: u32,
) -> Result<String, JsValue> {
    explore_front_json(source, sets, grid, mc_samples, seed as u64)
        .map_err(|e| JsValue::from_str(&e))
}

#[wasm_bindgen]
pub fn run_solver(
    source: &str,
    sets: &str,
    iterations: usize,
    seed: u32,
) -> Result<String, JsValue> {
    run_solver_json(source, sets, iterations, seed as u64).map_err(|e| JsValue::from_str(&e))
}
