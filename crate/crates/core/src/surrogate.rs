//! Gaussian-process regression with an anisotropic squared-exponential
//! kernel, one model per objective and intervention set.
//!
//! Inputs are scaled to the unit cube by the set's domains and targets are
//! standardized. Hyperparameters (log lengthscales, log signal variance, log
//! noise variance) maximize the log marginal likelihood with a multi-start
//! quasi-Newton search inside fixed bounds.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::scm::Domain;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SurrogateError {
    #[error("no observations to fit")]
    Empty,
    #[error("observation {0} has a non-finite value")]
    NonFinite(usize),
    #[error("observation {index} has {got} inputs, expected {expected}")]
    DimensionMismatch {
        index: usize,
        expected: usize,
        got: usize,
    },
    #[error("kernel matrix is not positive definite even with jitter")]
    NotPositiveDefinite,
}

pub type Result<T, E = SurrogateError> = std::result::Result<T, E>;

/// One evaluated point: intervention values, objective estimate and its
/// Monte-Carlo standard error.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Observation {
    pub x: Vec<f64>,
    pub y: f64,
    pub std_error: f64,
}

/// Kernel hyperparameters in unit-cube inputs and standardized targets.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GpHyperparameters {
    pub lengthscales: Vec<f64>,
    pub signal_variance: f64,
    pub noise_variance: f64,
}

impl GpHyperparameters {
    fn to_log(&self) -> Vec<f64> {
        self.lengthscales
            .iter()
            .map(|l| l.ln())
            .chain([self.signal_variance.ln(), self.noise_variance.ln()])
            .collect()
    }

    fn from_log(theta: &[f64]) -> Self {
        let d = theta.len() - 2;
        Self {
            lengthscales: theta[..d].iter().map(|t| t.exp()).collect(),
            signal_variance: theta[d].exp(),
            noise_variance: theta[d + 1].exp(),
        }
    }
}

const LENGTHSCALE_RANGE: (f64, f64) = (1e-2, 1e1);
const SIGNAL_RANGE: (f64, f64) = (1e-2, 1e2);
const NOISE_MIN: f64 = 1e-8;
const NOISE_MAX: f64 = 0.5;
const JITTER: [f64; 5] = [1e-10, 1e-9, 1e-8, 1e-7, 1e-6];
/// (lengthscale, signal variance) starting points.
const STARTS: [(f64, f64); 5] = [(0.1, 1.0), (0.3, 1.0), (1.0, 1.0), (0.3, 0.3), (1.0, 3.0)];
const MAX_ITERATIONS: usize = 40;

fn sq_exp(a: &[f64], b: &[f64], lengthscales: &[f64]) -> f64 {
    let r2: f64 = a
        .iter()
        .zip(b)
        .zip(lengthscales)
        .map(|((x, y), l)| ((x - y) / l).powi(2))
        .sum();
    (-0.5 * r2).exp()
}

/// Signal part of the Gram matrix (without noise).
fn gram(x: &[Vec<f64>], h: &GpHyperparameters) -> DMatrix<f64> {
    let n = x.len();
    DMatrix::from_fn(n, n, |i, j| {
        h.signal_variance * sq_exp(&x[i], &x[j], &h.lengthscales)
    })
}

/// Factorizes `k + noise I`, escalating jitter on failure.
fn factorize(mut k: DMatrix<f64>, noise: f64) -> Result<Cholesky<f64, Dyn>> {
    let n = k.nrows();
    for i in 0..n {
        k[(i, i)] += noise;
    }
    if let Some(c) = Cholesky::new(k.clone()) {
        return Ok(c);
    }
    for jitter in JITTER {
        let mut kj = k.clone();
        for i in 0..n {
            kj[(i, i)] += jitter;
        }
        if let Some(c) = Cholesky::new(kj) {
            return Ok(c);
        }
    }
    Err(SurrogateError::NotPositiveDefinite)
}

/// Log marginal likelihood of standardized targets `y` at unit-cube inputs
/// `x`, and its gradient with respect to
/// `[log lengthscales.., log signal variance, log noise variance]`.
pub fn log_marginal_likelihood(
    x: &[Vec<f64>],
    y: &[f64],
    log_params: &[f64],
) -> Result<(f64, Vec<f64>)> {
    let n = x.len();
    let d = log_params.len() - 2;
    let h = GpHyperparameters::from_log(log_params);
    let kf = gram(x, &h);
    let chol = factorize(kf.clone(), h.noise_variance)?;
    let yv = DVector::from_column_slice(y);
    let alpha = chol.solve(&yv);
    let log_det: f64 = chol.l().diagonal().iter().map(|v| v.ln()).sum::<f64>() * 2.0;
    let lml =
        -0.5 * yv.dot(&alpha) - 0.5 * log_det - 0.5 * n as f64 * (2.0 * std::f64::consts::PI).ln();

    // d lml / d theta = 1/2 tr((alpha alpha^T - K^-1) dK/dtheta)
    let w = &alpha * alpha.transpose() - chol.inverse();
    let mut grad = vec![0.0; d + 2];
    for i in 0..n {
        for j in 0..n {
            let wk = w[(i, j)] * kf[(i, j)];
            for (k, g) in grad.iter_mut().take(d).enumerate() {
                let diff = (x[i][k] - x[j][k]) / h.lengthscales[k];
                *g += wk * diff * diff;
            }
            grad[d] += wk;
        }
        grad[d + 1] += w[(i, i)] * h.noise_variance;
    }
    for g in &mut grad {
        *g *= 0.5;
    }
    Ok((lml, grad))
}

/// Box in log space plus the squashing map used by the optimizer.
struct Bounds {
    lo: Vec<f64>,
    hi: Vec<f64>,
}

impl Bounds {
    fn new(d: usize, noise_floor: f64) -> Self {
        let noise_lo = noise_floor.max(NOISE_MIN);
        let noise_hi = NOISE_MAX.max(noise_lo * 10.0);
        let mut lo = vec![LENGTHSCALE_RANGE.0.ln(); d];
        let mut hi = vec![LENGTHSCALE_RANGE.1.ln(); d];
        lo.extend([SIGNAL_RANGE.0.ln(), noise_lo.ln()]);
        hi.extend([SIGNAL_RANGE.1.ln(), noise_hi.ln()]);
        Self { lo, hi }
    }

    fn theta(&self, z: &[f64]) -> Vec<f64> {
        z.iter()
            .enumerate()
            .map(|(i, v)| self.lo[i] + (self.hi[i] - self.lo[i]) / (1.0 + (-v).exp()))
            .collect()
    }

    fn dtheta_dz(&self, z: &[f64]) -> Vec<f64> {
        z.iter()
            .enumerate()
            .map(|(i, v)| {
                let s = 1.0 / (1.0 + (-v).exp());
                (self.hi[i] - self.lo[i]) * s * (1.0 - s)
            })
            .collect()
    }

    fn z(&self, theta: &[f64]) -> Vec<f64> {
        theta
            .iter()
            .enumerate()
            .map(|(i, t)| {
                let p = ((t - self.lo[i]) / (self.hi[i] - self.lo[i])).clamp(1e-6, 1.0 - 1e-6);
                (p / (1.0 - p)).ln()
            })
            .collect()
    }
}

/// Minimizes `f` with BFGS and a backtracking line search. `f` returns
/// `None` where it is undefined.
fn bfgs(f: impl Fn(&[f64]) -> Option<(f64, Vec<f64>)>, z0: Vec<f64>) -> Option<(Vec<f64>, f64)> {
    let n = z0.len();
    let (mut fz, mut g) = f(&z0)?;
    let mut z = z0;
    let mut hinv = DMatrix::<f64>::identity(n, n);
    for _ in 0..MAX_ITERATIONS {
        if g.iter().all(|v| v.abs() < 1e-6) {
            break;
        }
        let gv = DVector::from_column_slice(&g);
        let mut dir = -(&hinv * &gv);
        if dir.dot(&gv) >= 0.0 {
            hinv = DMatrix::identity(n, n);
            dir = -gv.clone();
        }
        let slope = dir.dot(&gv);
        let mut step = 1.0;
        let mut accepted = None;
        for _ in 0..30 {
            let trial: Vec<f64> = z
                .iter()
                .zip(dir.iter())
                .map(|(a, b)| a + step * b)
                .collect();
            if let Some((ft, gt)) = f(&trial) {
                if ft <= fz + 1e-4 * step * slope {
                    accepted = Some((trial, ft, gt));
                    break;
                }
            }
            step *= 0.5;
        }
        let Some((zn, fnew, gn)) = accepted else {
            break;
        };
        let s = DVector::from_iterator(n, zn.iter().zip(&z).map(|(a, b)| a - b));
        let yv = DVector::from_iterator(n, gn.iter().zip(&g).map(|(a, b)| a - b));
        let sy = s.dot(&yv);
        if sy > 1e-12 {
            let rho = 1.0 / sy;
            let i = DMatrix::<f64>::identity(n, n);
            let a = &i - rho * &s * yv.transpose();
            let b = &i - rho * &yv * s.transpose();
            hinv = &a * &hinv * &b + rho * &s * s.transpose();
        }
        let converged = (fz - fnew).abs() <= 1e-10 * fz.abs().max(1.0);
        z = zn;
        fz = fnew;
        g = gn;
        if converged {
            break;
        }
    }
    Some((z, fz))
}

/// A fitted Gaussian process for one objective.
#[derive(Debug, Clone)]
pub struct GpModel {
    bounds: Vec<Domain>,
    /// Unit-cube inputs.
    inputs: Vec<Vec<f64>>,
    y_mean: f64,
    y_scale: f64,
    hyper: GpHyperparameters,
    noise_floor: f64,
    alpha: DVector<f64>,
    chol: Cholesky<f64, Dyn>,
}

fn validate(observations: &[Observation], d: usize) -> Result<()> {
    if observations.is_empty() {
        return Err(SurrogateError::Empty);
    }
    for (i, o) in observations.iter().enumerate() {
        if o.x.len() != d {
            return Err(SurrogateError::DimensionMismatch {
                index: i,
                expected: d,
                got: o.x.len(),
            });
        }
        if !o.y.is_finite() || !o.std_error.is_finite() || o.x.iter().any(|v| !v.is_finite()) {
            return Err(SurrogateError::NonFinite(i));
        }
    }
    Ok(())
}

struct Standardized {
    x: Vec<Vec<f64>>,
    y: Vec<f64>,
    mean: f64,
    scale: f64,
    noise_floor: f64,
}

fn standardize(observations: &[Observation], bounds: &[Domain]) -> Standardized {
    let n = observations.len() as f64;
    let mean = observations.iter().map(|o| o.y).sum::<f64>() / n;
    let var = observations
        .iter()
        .map(|o| (o.y - mean).powi(2))
        .sum::<f64>()
        / n;
    let scale = if var.sqrt() > 1e-12 * mean.abs().max(1.0) {
        var.sqrt()
    } else {
        1.0
    };
    let se2 = observations
        .iter()
        .map(|o| o.std_error.powi(2))
        .sum::<f64>()
        / n;
    Standardized {
        x: observations
            .iter()
            .map(|o| {
                o.x.iter()
                    .zip(bounds)
                    .map(|(v, d)| (v - d.lo) / d.width())
                    .collect()
            })
            .collect(),
        y: observations.iter().map(|o| (o.y - mean) / scale).collect(),
        mean,
        scale,
        noise_floor: se2 / (scale * scale),
    }
}

impl GpModel {
    /// Fits hyperparameters by maximizing the log marginal likelihood from
    /// five fixed starting points. The noise variance is bounded below by
    /// the mean squared standard error (in standardized units).
    pub fn fit(observations: &[Observation], bounds: &[Domain]) -> Result<Self> {
        let d = bounds.len();
        validate(observations, d)?;
        let data = standardize(observations, bounds);
        let box_ = Bounds::new(d, data.noise_floor);
        let noise0 = (1e-4f64).clamp(box_.lo[d + 1].exp(), box_.hi[d + 1].exp());
        let objective = |z: &[f64]| {
            let theta = box_.theta(z);
            let (lml, grad) = log_marginal_likelihood(&data.x, &data.y, &theta).ok()?;
            let jac = box_.dtheta_dz(z);
            Some((-lml, grad.iter().zip(jac).map(|(g, j)| -g * j).collect()))
        };
        let mut best: Option<(Vec<f64>, f64)> = None;
        for (l, s) in STARTS {
            let start = GpHyperparameters {
                lengthscales: vec![l; d],
                signal_variance: s,
                noise_variance: noise0,
            };
            if let Some((z, f)) = bfgs(objective, box_.z(&start.to_log())) {
                if best.as_ref().map_or(true, |(_, bf)| f < *bf) {
                    best = Some((z, f));
                }
            }
        }
        let (z, _) = best.ok_or(SurrogateError::NotPositiveDefinite)?;
        let hyper = GpHyperparameters::from_log(&box_.theta(&z));
        Self::assemble(data, bounds, hyper)
    }

    /// Builds the model with fixed hyperparameters.
    pub fn with_hyperparameters(
        observations: &[Observation],
        bounds: &[Domain],
        hyper: GpHyperparameters,
    ) -> Result<Self> {
        validate(observations, bounds.len())?;
        if hyper.lengthscales.len() != bounds.len() {
            return Err(SurrogateError::DimensionMismatch {
                index: 0,
                expected: bounds.len(),
                got: hyper.lengthscales.len(),
            });
        }
        Self::assemble(standardize(observations, bounds), bounds, hyper)
    }

    fn assemble(data: Standardized, bounds: &[Domain], hyper: GpHyperparameters) -> Result<Self> {
        let chol = factorize(gram(&data.x, &hyper), hyper.noise_variance)?;
        let alpha = chol.solve(&DVector::from_column_slice(&data.y));
        Ok(Self {
            bounds: bounds.to_vec(),
            inputs: data.x,
            y_mean: data.mean,
            y_scale: data.scale,
            hyper,
            noise_floor: data.noise_floor,
            alpha,
            chol,
        })
    }

    pub fn hyperparameters(&self) -> &GpHyperparameters {
        &self.hyper
    }

    /// Noise-variance floor in standardized units.
    pub fn noise_floor(&self) -> f64 {
        self.noise_floor
    }

    pub fn len(&self) -> usize {
        self.inputs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.inputs.is_empty()
    }

    pub fn bounds(&self) -> &[Domain] {
        &self.bounds
    }

    fn cross(&self, x: &[f64]) -> DVector<f64> {
        let u: Vec<f64> = x
            .iter()
            .zip(&self.bounds)
            .map(|(v, d)| (v - d.lo) / d.width())
            .collect();
        DVector::from_iterator(
            self.inputs.len(),
            self.inputs
                .iter()
                .map(|xi| self.hyper.signal_variance * sq_exp(xi, &u, &self.hyper.lengthscales)),
        )
    }

    /// Posterior mean at `x` in objective units.
    pub fn mean(&self, x: &[f64]) -> f64 {
        self.y_mean + self.y_scale * self.cross(x).dot(&self.alpha)
    }

    /// Posterior mean and latent-function variance at `x`, in objective
    /// units. The variance is clamped at zero.
    pub fn posterior(&self, x: &[f64]) -> (f64, f64) {
        let k = self.cross(x);
        let mean = self.y_mean + self.y_scale * k.dot(&self.alpha);
        let v = self
            .chol
            .l_dirty()
            .solve_lower_triangular(&k)
            .expect("triangular factor is invertible");
        let var = (self.hyper.signal_variance - v.dot(&v)).max(0.0);
        (mean, var * self.y_scale * self.y_scale)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};

    fn unit(d: usize) -> Vec<Domain> {
        vec![Domain::new(0.0, 1.0).unwrap(); d]
    }

    fn obs(x: Vec<f64>, y: f64) -> Observation {
        Observation {
            x,
            y,
            std_error: 0.0,
        }
    }

    #[test]
    fn single_point_is_reproduced() {
        let m = GpModel::fit(&[obs(vec![0.4, 0.2], 3.5)], &unit(2)).unwrap();
        assert!((m.mean(&[0.4, 0.2]) - 3.5).abs() < 1e-6);
    }

    #[test]
    fn linear_function_is_learned() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(2);
        let f = |x: &[f64]| 2.0 * x[0] - x[1] + 0.5;
        // Corners and edge midpoints of the unit square.
        let design = [0.0, 0.5, 1.0]
            .iter()
            .flat_map(|&a| [0.0, 0.5, 1.0].map(|b| vec![a, b]))
            .filter(|x| x != &vec![0.5, 0.5]);
        let data: Vec<Observation> = design.map(|x| obs(x.clone(), f(&x))).collect();
        assert_eq!(data.len(), 8);
        let m = GpModel::fit(&data, &unit(2)).unwrap();
        for _ in 0..10 {
            let x = vec![rng.gen_range(0.2..0.8), rng.gen_range(0.2..0.8)];
            assert!(
                (m.mean(&x) - f(&x)).abs() < 1e-3,
                "{x:?} {}",
                m.mean(&x) - f(&x)
            );
        }
    }

    #[test]
    fn variance_vanishes_at_data_and_reverts_far_away() {
        let data = vec![
            obs(vec![0.1], 1.0),
            obs(vec![0.2], 2.0),
            obs(vec![0.3], 0.0),
        ];
        let h = GpHyperparameters {
            lengthscales: vec![0.05],
            signal_variance: 1.5,
            noise_variance: 1e-10,
        };
        let m = GpModel::with_hyperparameters(&data, &unit(1), h).unwrap();
        let (mu, var) = m.posterior(&[0.2]);
        assert!((mu - 2.0).abs() < 1e-6 && var < 1e-6);
        let (mu, var) = m.posterior(&[1.0]);
        let scale2 = 2.0 / 3.0; // population variance of the targets
        assert!((mu - 1.0).abs() < 1e-6);
        assert!((var / (1.5 * scale2) - 1.0).abs() < 0.01);
    }

    #[test]
    fn rejects_bad_input() {
        assert_eq!(
            GpModel::fit(&[], &unit(1)).unwrap_err(),
            SurrogateError::Empty
        );
        assert_eq!(
            GpModel::fit(&[obs(vec![0.5], f64::NAN)], &unit(1)).unwrap_err(),
            SurrogateError::NonFinite(0)
        );
    }

    #[test]
    fn noise_floor_follows_standard_errors() {
        let data: Vec<Observation> = (0..6)
            .map(|i| Observation {
                x: vec![i as f64 / 5.0],
                y: (i as f64).sin(),
                std_error: 0.1,
            })
            .collect();
        let m = GpModel::fit(&data, &unit(1)).unwrap();
        assert!(m.hyperparameters().noise_variance >= m.noise_floor() * (1.0 - 1e-9));
        assert!(m.noise_floor() > 0.0);
    }

    #[test]
    fn duplicate_inputs_with_conflicting_targets_still_fit() {
        let data = vec![
            obs(vec![0.5], 1.0),
            obs(vec![0.5], 2.0),
            obs(vec![0.1], 0.0),
        ];
        let m = GpModel::fit(&data, &unit(1)).unwrap();
        assert!(m.mean(&[0.5]).is_finite());
    }
}
