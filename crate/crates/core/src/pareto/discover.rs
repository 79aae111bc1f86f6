//! Approximate Pareto set discovery over cheap objective functions (surrogate
//! posterior means) with an NSGA-II style evolutionary search.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{dominates, non_dominated_indices};
use crate::scm::Domain;

/// A vector-valued function over a box, e.g. the posterior means of one
/// surrogate per objective.
pub trait Objectives: Sync {
    /// Number of inputs.
    fn dim(&self) -> usize;
    fn n_objectives(&self) -> usize;
    /// Objective vector at `x` (original units, inside the bounds).
    fn evaluate(&self, x: &[f64]) -> Vec<f64>;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DiscoveryConfig {
    pub population: usize,
    pub generations: usize,
    pub seed: u64,
}

impl Default for DiscoveryConfig {
    fn default() -> Self {
        Self {
            population: 100,
            generations: 50,
            seed: 0,
        }
    }
}

/// Mutually non-dominated inputs and their objective vectors.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct LocalFront {
    pub inputs: Vec<Vec<f64>>,
    pub objectives: Vec<Vec<f64>>,
}

impl LocalFront {
    pub fn len(&self) -> usize {
        self.inputs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.inputs.is_empty()
    }
}

const SBX_ETA: f64 = 15.0;
const MUTATION_ETA: f64 = 20.0;
const CROSSOVER_PROB: f64 = 0.9;

struct Individual {
    /// Normalized to the unit cube.
    u: Vec<f64>,
    f: Vec<f64>,
    rank: usize,
    crowding: f64,
}

fn to_original(u: &[f64], bounds: &[Domain]) -> Vec<f64> {
    u.iter()
        .zip(bounds)
        .map(|(v, d)| (d.lo + v * d.width()).clamp(d.lo, d.hi))
        .collect()
}

fn to_unit(x: &[f64], bounds: &[Domain]) -> Vec<f64> {
    x.iter()
        .zip(bounds)
        .map(|(v, d)| ((v - d.lo) / d.width()).clamp(0.0, 1.0))
        .collect()
}

/// Ranks by non-dominated sorting and assigns crowding distances in place.
fn rank_and_crowd(pop: &mut [Individual]) {
    let n = pop.len();
    let mut dominated_by = vec![0usize; n];
    let mut dominates_list: Vec<Vec<usize>> = vec![Vec::new(); n];
    for i in 0..n {
        for j in i + 1..n {
            if dominates(&pop[i].f, &pop[j].f) {
                dominates_list[i].push(j);
                dominated_by[j] += 1;
            } else if dominates(&pop[j].f, &pop[i].f) {
                dominates_list[j].push(i);
                dominated_by[i] += 1;
            }
        }
    }
    let mut current: Vec<usize> = (0..n).filter(|&i| dominated_by[i] == 0).collect();
    let mut rank = 0;
    while !current.is_empty() {
        let mut next = Vec::new();
        for &i in &current {
            pop[i].rank = rank;
            for &j in &dominates_list[i] {
                dominated_by[j] -= 1;
                if dominated_by[j] == 0 {
                    next.push(j);
                }
            }
        }
        crowd(pop, &current);
        next.sort_unstable();
        current = next;
        rank += 1;
    }
}

fn crowd(pop: &mut [Individual], front: &[usize]) {
    for &i in front {
        pop[i].crowding = 0.0;
    }
    if front.len() <= 2 {
        for &i in front {
            pop[i].crowding = f64::INFINITY;
        }
        return;
    }
    let m = pop[front[0]].f.len();
    for k in 0..m {
        let mut order = front.to_vec();
        order.sort_by(|&a, &b| pop[a].f[k].total_cmp(&pop[b].f[k]).then(a.cmp(&b)));
        let lo = pop[order[0]].f[k];
        let hi = pop[*order.last().expect("non-empty")].f[k];
        pop[order[0]].crowding = f64::INFINITY;
        pop[*order.last().expect("non-empty")].crowding = f64::INFINITY;
        if hi > lo {
            for w in 1..order.len() - 1 {
                let gap = pop[order[w + 1]].f[k] - pop[order[w - 1]].f[k];
                pop[order[w]].crowding += gap / (hi - lo);
            }
        }
    }
}

fn better(a: &Individual, b: &Individual) -> bool {
    a.rank < b.rank || (a.rank == b.rank && a.crowding > b.crowding)
}

fn tournament<'a>(pop: &'a [Individual], rng: &mut ChaCha8Rng) -> &'a Individual {
    let a = &pop[rng.gen_range(0..pop.len())];
    let b = &pop[rng.gen_range(0..pop.len())];
    if better(b, a) {
        b
    } else {
        a
    }
}

/// Simulated binary crossover on the unit cube.
fn sbx(p1: &[f64], p2: &[f64], rng: &mut ChaCha8Rng) -> (Vec<f64>, Vec<f64>) {
    let mut c1 = p1.to_vec();
    let mut c2 = p2.to_vec();
    if rng.gen::<f64>() > CROSSOVER_PROB {
        return (c1, c2);
    }
    for i in 0..p1.len() {
        if rng.gen::<f64>() > 0.5 || (p1[i] - p2[i]).abs() < 1e-14 {
            continue;
        }
        let r: f64 = rng.gen();
        let beta = if r <= 0.5 {
            (2.0 * r).powf(1.0 / (SBX_ETA + 1.0))
        } else {
            (1.0 / (2.0 * (1.0 - r))).powf(1.0 / (SBX_ETA + 1.0))
        };
        let mean = 0.5 * (p1[i] + p2[i]);
        let half = 0.5 * (p1[i] - p2[i]);
        c1[i] = (mean + beta * half).clamp(0.0, 1.0);
        c2[i] = (mean - beta * half).clamp(0.0, 1.0);
    }
    (c1, c2)
}

/// Polynomial mutation on the unit cube.
fn mutate(u: &mut [f64], rng: &mut ChaCha8Rng) {
    let p = 1.0 / u.len() as f64;
    for v in u.iter_mut() {
        if rng.gen::<f64>() >= p {
            continue;
        }
        let r: f64 = rng.gen();
        let delta = if r < 0.5 {
            let xy = 1.0 - *v;
            (2.0 * r + (1.0 - 2.0 * r) * xy.powf(MUTATION_ETA + 1.0))
                .powf(1.0 / (MUTATION_ETA + 1.0))
                - 1.0
        } else {
            let xy = *v;
            1.0 - (2.0 * (1.0 - r) + 2.0 * (r - 0.5) * xy.powf(MUTATION_ETA + 1.0))
                .powf(1.0 / (MUTATION_ETA + 1.0))
        };
        *v = (*v + delta).clamp(0.0, 1.0);
    }
}

fn evaluate_all(
    objectives: &impl Objectives,
    bounds: &[Domain],
    us: Vec<Vec<f64>>,
) -> Vec<Individual> {
    us.into_iter()
        .map(|u| {
            let f = objectives.evaluate(&to_original(&u, bounds));
            Individual {
                u,
                f,
                rank: 0,
                crowding: 0.0,
            }
        })
        .collect()
}

/// Evolves a population over `bounds` and returns its non-dominated members.
/// `warm_start` points (original units) join the initial population. The
/// result is a pure function of the arguments.
pub fn discover_local_front(
    objectives: &impl Objectives,
    bounds: &[Domain],
    warm_start: &[Vec<f64>],
    config: &DiscoveryConfig,
) -> LocalFront {
    let d = bounds.len();
    debug_assert_eq!(d, objectives.dim());
    if d == 0 {
        return LocalFront {
            inputs: vec![Vec::new()],
            objectives: vec![objectives.evaluate(&[])],
        };
    }
    let size = config.population.max(4);
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut init: Vec<Vec<f64>> = warm_start
        .iter()
        .take(size)
        .map(|x| to_unit(x, bounds))
        .collect();
    while init.len() < size {
        init.push((0..d).map(|_| rng.gen()).collect());
    }
    let mut pop = evaluate_all(objectives, bounds, init);
    rank_and_crowd(&mut pop);

    for _ in 0..config.generations {
        let mut children = Vec::with_capacity(size);
        while children.len() < size {
            let (c1, c2) = {
                let a = tournament(&pop, &mut rng);
                let b = tournament(&pop, &mut rng);
                sbx(&a.u, &b.u, &mut rng)
            };
            for mut c in [c1, c2] {
                mutate(&mut c, &mut rng);
                if children.len() < size {
                    children.push(c);
                }
            }
        }
        pop.extend(evaluate_all(objectives, bounds, children));
        rank_and_crowd(&mut pop);
        let mut order: Vec<usize> = (0..pop.len()).collect();
        order.sort_by(|&a, &b| {
            pop[a]
                .rank
                .cmp(&pop[b].rank)
                .then(pop[b].crowding.total_cmp(&pop[a].crowding))
                .then(a.cmp(&b))
        });
        order.truncate(size);
        order.sort_unstable();
        let mut keep = vec![false; pop.len()];
        for i in order {
            keep[i] = true;
        }
        let mut k = keep.into_iter();
        pop.retain(|_| k.next().expect("aligned"));
        rank_and_crowd(&mut pop);
    }

    let fs: Vec<Vec<f64>> = pop.iter().map(|p| p.f.clone()).collect();
    let front = non_dominated_indices(&fs).unwrap_or_default();
    let refined: Vec<(Vec<f64>, Vec<f64>)> = front
        .into_iter()
        .map(|i| refine(objectives, bounds, pop[i].u.clone(), pop[i].f.clone()))
        .collect();
    let fs: Vec<Vec<f64>> = refined.iter().map(|(_, f)| f.clone()).collect();
    let mut out = LocalFront::default();
    for i in non_dominated_indices(&fs).unwrap_or_default() {
        out.inputs.push(to_original(&refined[i].0, bounds));
        out.objectives.push(refined[i].1.clone());
    }
    out
}

const REFINE_STEPS: usize = 25;
const FD_STEP: f64 = 1e-6;

/// Central-difference Jacobian rows (one gradient per objective) in unit
/// coordinates. Coordinates at a bound use a one-sided difference.
fn jacobian(objectives: &impl Objectives, bounds: &[Domain], u: &[f64]) -> Vec<Vec<f64>> {
    let m = objectives.n_objectives();
    let mut grads = vec![vec![0.0; u.len()]; m];
    for k in 0..u.len() {
        let hi = (u[k] + FD_STEP).min(1.0);
        let lo = (u[k] - FD_STEP).max(0.0);
        let mut up = u.to_vec();
        up[k] = hi;
        let mut down = u.to_vec();
        down[k] = lo;
        let fu = objectives.evaluate(&to_original(&up, bounds));
        let fd = objectives.evaluate(&to_original(&down, bounds));
        for j in 0..m {
            grads[j][k] = (fu[j] - fd[j]) / (hi - lo);
        }
    }
    grads
}

/// Minimum-norm point of the convex hull of `grads` (Frank-Wolfe).
fn min_norm_combination(grads: &[Vec<f64>]) -> Vec<f64> {
    let m = grads.len();
    let dot = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>();
    let mut w = vec![1.0 / m as f64; m];
    let combine = |w: &[f64]| {
        let mut v = vec![0.0; grads[0].len()];
        for (wj, g) in w.iter().zip(grads) {
            for (vk, gk) in v.iter_mut().zip(g) {
                *vk += wj * gk;
            }
        }
        v
    };
    for _ in 0..50 {
        let v = combine(&w);
        let t = (0..m)
            .min_by(|&a, &b| dot(&grads[a], &v).total_cmp(&dot(&grads[b], &v)))
            .expect("at least one objective");
        let diff: Vec<f64> = grads[t].iter().zip(&v).map(|(g, x)| g - x).collect();
        let denom = dot(&diff, &diff);
        if denom <= 0.0 {
            break;
        }
        let gamma = (-dot(&v, &diff) / denom).clamp(0.0, 1.0);
        if gamma <= 1e-12 {
            break;
        }
        for (j, wj) in w.iter_mut().enumerate() {
            *wj *= 1.0 - gamma;
            if j == t {
                *wj += gamma;
            }
        }
    }
    combine(&w)
}

/// Moves `u` along common descent directions of all objectives while the
/// objective vector keeps improving in the Pareto sense.
fn refine(
    objectives: &impl Objectives,
    bounds: &[Domain],
    mut u: Vec<f64>,
    mut f: Vec<f64>,
) -> (Vec<f64>, Vec<f64>) {
    for _ in 0..REFINE_STEPS {
        let grads = jacobian(objectives, bounds, &u);
        // Coordinates pinned at a bound cannot move outward.
        let projected: Vec<Vec<f64>> = grads
            .iter()
            .map(|g| {
                g.iter()
                    .zip(&u)
                    .map(|(gk, uk)| {
                        if (*uk <= 0.0 && *gk > 0.0) || (*uk >= 1.0 && *gk < 0.0) {
                            0.0
                        } else {
                            *gk
                        }
                    })
                    .collect()
            })
            .collect();
        let dir = min_norm_combination(&projected);
        let norm = dir.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm < 1e-9 {
            break;
        }
        let mut step = 0.1 / norm;
        let mut moved = false;
        for _ in 0..20 {
            let trial: Vec<f64> = u
                .iter()
                .zip(&dir)
                .map(|(a, b)| (a - step * b).clamp(0.0, 1.0))
                .collect();
            let ft = objectives.evaluate(&to_original(&trial, bounds));
            if dominates(&ft, &f) {
                u = trial;
                f = ft;
                moved = true;
                break;
            }
            step *= 0.5;
        }
        if !moved {
            break;
        }
    }
    (u, f)
}
