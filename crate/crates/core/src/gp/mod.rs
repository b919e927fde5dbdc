//! Gaussian-process regression surrogate.
//!
//! Inputs are min-max normalized by the search box to `[0,1]^d`, targets are
//! standardized, and the kernel is Matérn 5/2 with per-dimension
//! lengthscales. Hyperparameters maximize the exact log marginal likelihood
//! using seeded multi-start Nelder-Mead in log-parameter space.

mod kernel;
mod nelder_mead;

pub use kernel::{matern52, scaled_distance};

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::bbob::{LOWER_BOUND, UPPER_BOUND};
use crate::error::{Error, Result};
use crate::rng::StreamKey;

const LN_2PI: f64 = 1.837_877_066_409_345_5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GpConfig {
    pub lengthscale_bounds: (f64, f64),
    pub signal_variance_bounds: (f64, f64),
    pub restarts: usize,
    pub evals_per_restart: usize,
    /// Diagonal jitter values tried in order until Cholesky succeeds.
    pub jitter_ladder: Vec<f64>,
}

impl Default for GpConfig {
    fn default() -> Self {
        GpConfig {
            lengthscale_bounds: (1e-3, 1e3),
            signal_variance_bounds: (1e-3, 1e3),
            restarts: 3,
            evals_per_restart: 200,
            jitter_ladder: vec![1e-10, 1e-8, 1e-6, 1e-4],
        }
    }
}

impl GpConfig {
    pub fn validate(&self) -> Result<()> {
        let (lo, hi) = self.lengthscale_bounds;
        let (slo, shi) = self.signal_variance_bounds;
        if !(lo > 0.0 && lo < hi && slo > 0.0 && slo < shi) {
            return Err(Error::Config("GP bounds must be positive, ordered intervals".into()));
        }
        if self.restarts == 0 || self.evals_per_restart == 0 {
            return Err(Error::Config("GP restarts and evals_per_restart must be >= 1".into()));
        }
        if self.jitter_ladder.is_empty() || self.jitter_ladder.iter().any(|&j| j < 1e-10) {
            return Err(Error::Config("jitter ladder must be non-empty with entries >= 1e-10".into()));
        }
        Ok(())
    }
}

/// Kernel hyperparameters in the normalized input space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KernelParams {
    pub signal_variance: f64,
    pub lengthscales: Vec<f64>,
    pub jitter: f64,
}

impl KernelParams {
    pub fn new(signal_variance: f64, lengthscales: Vec<f64>, jitter: f64) -> Self {
        KernelParams {
            signal_variance,
            lengthscales,
            jitter,
        }
    }

    /// `[log σ², log l_1, …, log l_d]`.
    pub fn to_log(&self) -> Vec<f64> {
        std::iter::once(self.signal_variance.ln())
            .chain(self.lengthscales.iter().map(|l| l.ln()))
            .collect()
    }

    pub fn from_log(theta: &[f64], jitter: f64) -> Self {
        KernelParams {
            signal_variance: theta[0].exp(),
            lengthscales: theta[1..].iter().map(|t| t.exp()).collect(),
            jitter,
        }
    }

    fn validate(&self, dim: usize) -> Result<()> {
        if self.lengthscales.len() != dim {
            return Err(Error::invalid(format!(
                "{} lengthscales for {dim} input dimensions",
                self.lengthscales.len()
            )));
        }
        if !(self.signal_variance > 0.0) || self.lengthscales.iter().any(|l| !(*l > 0.0)) {
            return Err(Error::invalid("kernel parameters must be positive"));
        }
        if !(self.jitter >= 1e-10) {
            return Err(Error::invalid("jitter must be >= 1e-10"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TargetScaling {
    pub mean: f64,
    pub scale: f64,
}

/// Normalized inputs and standardized targets, the space the kernel and the
/// likelihood live in.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainingData {
    dim: usize,
    inputs: Vec<Vec<f64>>,
    targets: Vec<f64>,
    scaling: TargetScaling,
}

pub fn normalize_point(x: &[f64]) -> Vec<f64> {
    let width = UPPER_BOUND - LOWER_BOUND;
    x.iter().map(|v| (v - LOWER_BOUND) / width).collect()
}

impl TrainingData {
    pub fn new(points: &[Vec<f64>], values: &[f64]) -> Result<Self> {
        if points.len() != values.len() {
            return Err(Error::invalid("points and values differ in length"));
        }
        if points.len() < 2 {
            return Err(Error::invalid("GP needs at least 2 observations"));
        }
        let dim = points[0].len();
        if dim == 0 || points.iter().any(|p| p.len() != dim) {
            return Err(Error::invalid("inconsistent point dimension"));
        }
        if points.iter().flatten().chain(values).any(|v| !v.is_finite()) {
            return Err(Error::invalid("non-finite observation"));
        }
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
        let sd = var.sqrt();
        // Constant targets: keep unit scale so the model predicts the constant.
        let scale = if sd > 1e-12 * mean.abs().max(1.0) { sd } else { 1.0 };
        Ok(TrainingData {
            dim,
            inputs: points.iter().map(|p| normalize_point(p)).collect(),
            targets: values.iter().map(|v| (v - mean) / scale).collect(),
            scaling: TargetScaling { mean, scale },
        })
    }

    pub fn len(&self) -> usize {
        self.targets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.targets.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn targets(&self) -> &[f64] {
        &self.targets
    }

    pub fn scaling(&self) -> TargetScaling {
        self.scaling
    }

    fn covariance(&self, params: &KernelParams, jitter: f64) -> DMatrix<f64> {
        let inv: Vec<f64> = params.lengthscales.iter().map(|l| 1.0 / l).collect();
        let n = self.len();
        let mut k = DMatrix::zeros(n, n);
        for i in 0..n {
            k[(i, i)] = params.signal_variance + jitter;
            for j in 0..i {
                let v = params.signal_variance
                    * matern52(scaled_distance(&self.inputs[i], &self.inputs[j], &inv));
                k[(i, j)] = v;
                k[(j, i)] = v;
            }
        }
        k
    }
}

type Factor = Cholesky<f64, Dyn>;

fn factorize(data: &TrainingData, params: &KernelParams, ladder: &[f64]) -> Option<(Factor, f64)> {
    std::iter::once(params.jitter)
        .chain(ladder.iter().copied().filter(|&j| j > params.jitter))
        .find_map(|j| data.covariance(params, j).cholesky().map(|c| (c, j)))
}

fn lml_from_factor(factor: &Factor, targets: &[f64]) -> f64 {
    let y = DVector::from_column_slice(targets);
    let alpha = factor.solve(&y);
    let n = targets.len() as f64;
    let log_det_half: f64 = factor.l_dirty().diagonal().iter().map(|d| d.ln()).sum();
    -0.5 * y.dot(&alpha) - log_det_half - 0.5 * n * LN_2PI
}

/// Exact Gaussian log marginal likelihood of the standardized targets under
/// `params`, using exactly `params.jitter` on the diagonal.
pub fn log_marginal_likelihood(params: &KernelParams, data: &TrainingData) -> Result<f64> {
    params.validate(data.dim())?;
    let factor = data
        .covariance(params, params.jitter)
        .cholesky()
        .ok_or_else(|| Error::SurrogateFailure("kernel matrix not positive definite".into()))?;
    Ok(lml_from_factor(&factor, &data.targets))
}

/// Gradient of [`log_marginal_likelihood`] with respect to
/// `[log σ², log l_1, …, log l_d]`.
pub fn log_marginal_likelihood_gradient(params: &KernelParams, data: &TrainingData) -> Result<Vec<f64>> {
    params.validate(data.dim())?;
    let factor = data
        .covariance(params, params.jitter)
        .cholesky()
        .ok_or_else(|| Error::SurrogateFailure("kernel matrix not positive definite".into()))?;
    let y = DVector::from_column_slice(&data.targets);
    let alpha = factor.solve(&y);
    let k_inv = factor.inverse();
    let n = data.len();
    let inv: Vec<f64> = params.lengthscales.iter().map(|l| 1.0 / l).collect();
    let mut grad = vec![0.0; data.dim() + 1];
    for i in 0..n {
        for j in 0..n {
            let w = alpha[i] * alpha[j] - k_inv[(i, j)];
            let r = scaled_distance(&data.inputs[i], &data.inputs[j], &inv);
            grad[0] += w * params.signal_variance * matern52(r);
            if i != j {
                for (p, g) in grad[1..].iter_mut().enumerate() {
                    let t = ((data.inputs[i][p] - data.inputs[j][p]) * inv[p]).powi(2);
                    *g += w * params.signal_variance * kernel::matern52_dlog_lengthscale(r, t);
                }
            }
        }
    }
    Ok(grad.into_iter().map(|g| 0.5 * g).collect())
}

#[derive(Debug, Clone)]
pub struct GpModel {
    data: TrainingData,
    params: KernelParams,
    factor: Factor,
    alpha: DVector<f64>,
    log_likelihood: f64,
}

impl GpModel {
    /// Fits hyperparameters by maximizing the log marginal likelihood.
    pub fn fit(points: &[Vec<f64>], values: &[f64], config: &GpConfig, key: StreamKey) -> Result<Self> {
        config.validate()?;
        let data = TrainingData::new(points, values)?;
        let dim = data.dim();
        let base_jitter = config.jitter_ladder[0];
        let (llo, lhi) = config.lengthscale_bounds;
        let (slo, shi) = config.signal_variance_bounds;
        let lower: Vec<f64> = std::iter::once(slo.ln())
            .chain(std::iter::repeat_n(llo.ln(), dim))
            .collect();
        let upper: Vec<f64> = std::iter::once(shi.ln())
            .chain(std::iter::repeat_n(lhi.ln(), dim))
            .collect();

        let objective = |theta: &[f64]| {
            let params = KernelParams::from_log(theta, base_jitter);
            match factorize(&data, &params, &config.jitter_ladder) {
                Some((factor, _)) => -lml_from_factor(&factor, &data.targets),
                None => f64::INFINITY,
            }
        };

        let mut rng = key.rng();
        let mut best: Option<(Vec<f64>, f64)> = None;
        for restart in 0..config.restarts {
            let start: Vec<f64> = if restart == 0 {
                std::iter::once(0.0)
                    .chain(std::iter::repeat_n(0.3f64.ln(), dim))
                    .collect()
            } else {
                std::iter::once(rng.random_range(0.5f64.ln()..2f64.ln()))
                    .chain((0..dim).map(|_| rng.random_range(0.03f64.ln()..2f64.ln())))
                    .collect()
            };
            let m = nelder_mead::minimize(objective, &start, 0.7, &lower, &upper, config.evals_per_restart);
            log::trace!("restart {restart}: -lml {} after {} evaluations", m.value, m.evaluations);
            if best.as_ref().is_none_or(|b| m.value < b.1) {
                best = Some((m.point, m.value));
            }
        }
        let (theta, value) = best.expect("at least one restart");
        if !value.is_finite() {
            return Err(Error::SurrogateFailure(
                "no hyperparameters with a positive-definite kernel matrix".into(),
            ));
        }
        Self::factorized(data, KernelParams::from_log(&theta, base_jitter), &config.jitter_ladder)
    }

    /// Conditions on the data with fixed hyperparameters. The jitter ladder
    /// starts at `params.jitter`.
    pub fn with_params(points: &[Vec<f64>], values: &[f64], params: KernelParams) -> Result<Self> {
        let data = TrainingData::new(points, values)?;
        params.validate(data.dim())?;
        let ladder = GpConfig::default().jitter_ladder;
        Self::factorized(data, params, &ladder)
    }

    fn factorized(data: TrainingData, mut params: KernelParams, ladder: &[f64]) -> Result<Self> {
        let (factor, jitter) = factorize(&data, &params, ladder).ok_or_else(|| {
            Error::SurrogateFailure(format!(
                "Cholesky failed up to jitter {:e}",
                ladder.last().copied().unwrap_or(params.jitter)
            ))
        })?;
        params.jitter = jitter;
        let alpha = factor.solve(&DVector::from_column_slice(&data.targets));
        let log_likelihood = lml_from_factor(&factor, &data.targets);
        Ok(GpModel {
            data,
            params,
            factor,
            alpha,
            log_likelihood,
        })
    }

    pub fn params(&self) -> &KernelParams {
        &self.params
    }

    pub fn training_data(&self) -> &TrainingData {
        &self.data
    }

    pub fn log_likelihood(&self) -> f64 {
        self.log_likelihood
    }

    pub fn dim(&self) -> usize {
        self.data.dim
    }

    /// Standardized-scale mean and variance at a normalized input.
    fn latent(&self, u: &[f64]) -> (f64, f64) {
        let inv: Vec<f64> = self.params.lengthscales.iter().map(|l| 1.0 / l).collect();
        let s2 = self.params.signal_variance;
        let kstar = DVector::from_iterator(
            self.data.len(),
            self.data
                .inputs
                .iter()
                .map(|xi| s2 * matern52(scaled_distance(xi, u, &inv))),
        );
        let mean = kstar.dot(&self.alpha);
        let v = self
            .factor
            .l_dirty()
            .solve_lower_triangular(&kstar)
            .expect("Cholesky factor has a positive diagonal");
        (mean, (s2 - v.norm_squared()).max(0.0))
    }

    /// Predictive mean and standard deviation on the original scale.
    pub fn predict(&self, x: &[f64]) -> Result<(f64, f64)> {
        if x.len() != self.dim() {
            return Err(Error::invalid(format!(
                "query has {} coordinates, model has {}",
                x.len(),
                self.dim()
            )));
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("non-finite query"));
        }
        Ok(self.predict_unchecked(x))
    }

    pub(crate) fn predict_unchecked(&self, x: &[f64]) -> (f64, f64) {
        let (mean, var) = self.latent(&normalize_point(x));
        let TargetScaling { mean: m, scale } = self.data.scaling;
        (m + scale * mean, scale * var.sqrt())
    }

    /// Posterior variance in standardized units; independent of the targets.
    pub fn latent_variance(&self, x: &[f64]) -> f64 {
        self.latent(&normalize_point(x)).1
    }

    /// Prior standard deviation on the original scale.
    pub fn prior_sd(&self) -> f64 {
        self.data.scaling.scale * self.params.signal_variance.sqrt()
    }
}
