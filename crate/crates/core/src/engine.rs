//! The BO loop: initial design, then one GP refit and one acquisition-driven
//! proposal per surrogate iteration.

use std::time::Instant;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::acquisition::{ei_unchecked, pi_unchecked, AfKind};
use crate::bbob::{Problem, ProblemKey, LOWER_BOUND, UPPER_BOUND};
use crate::doe::{design_key, sample_design, Design};
use crate::ela::FeatureVector;
use crate::error::{Error, Result};
use crate::gp::{GpConfig, GpModel};
use crate::rng::{phase, StreamKey};
use crate::schedule::Schedule;

pub const RECORD_SCHEMA_VERSION: u32 = 1;
/// Regret floor applied before taking log10.
pub const REGRET_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BudgetConfig {
    pub doe_size: usize,
    pub surrogate_evals: usize,
}

impl BudgetConfig {
    /// `10·dim` initial points and 100 surrogate-based evaluations.
    pub fn for_dim(dim: usize) -> Self {
        BudgetConfig {
            doe_size: 10 * dim,
            surrogate_evals: 100,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.doe_size < 2 {
            return Err(Error::Config(format!("doe_size {} < 2", self.doe_size)));
        }
        if self.surrogate_evals < 1 {
            return Err(Error::Config("surrogate_evals must be >= 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AfOptimizerConfig {
    pub candidates: usize,
    pub local_starts: usize,
    pub local_steps: usize,
    /// Initial perturbation scale as a fraction of the box width.
    pub initial_step: f64,
    /// Exploration offset ξ shared by EI and PI.
    pub xi: f64,
}

impl Default for AfOptimizerConfig {
    fn default() -> Self {
        AfOptimizerConfig {
            candidates: 1000,
            local_starts: 10,
            local_steps: 20,
            initial_step: 0.1,
            xi: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct EngineConfig {
    pub gp: GpConfig,
    pub af_optimizer: AfOptimizerConfig,
}

#[derive(Debug, Clone, Copy)]
pub struct Bounds {
    pub lower: f64,
    pub upper: f64,
}

impl Default for Bounds {
    fn default() -> Self {
        Bounds {
            lower: LOWER_BOUND,
            upper: UPPER_BOUND,
        }
    }
}

fn af_value(model: &GpModel, kind: AfKind, f_min: f64, xi: f64, x: &[f64]) -> f64 {
    let (mu, sigma) = model.predict_unchecked(x);
    match kind {
        AfKind::Ei => ei_unchecked(mu, sigma, f_min, xi),
        AfKind::Pi => pi_unchecked(mu, sigma, f_min, xi),
    }
}

/// Maximizes the acquisition function: uniform candidates, then
/// step-halving Gaussian perturbation from the best few. Ties resolve to the
/// lowest candidate index.
pub fn maximize_af(
    model: &GpModel,
    kind: AfKind,
    f_min: f64,
    bounds: Bounds,
    config: &AfOptimizerConfig,
    key: StreamKey,
) -> Vec<f64> {
    let dim = model.dim();
    let width = bounds.upper - bounds.lower;
    let mut rng = key.rng();
    let candidates: Vec<Vec<f64>> = (0..config.candidates.max(1))
        .map(|_| {
            (0..dim)
                .map(|_| rng.random_range(bounds.lower..bounds.upper))
                .collect()
        })
        .collect();
    let values: Vec<f64> = candidates
        .iter()
        .map(|x| af_value(model, kind, f_min, config.xi, x))
        .collect();

    let mut order: Vec<usize> = (0..candidates.len()).collect();
    // Stable sort keeps index order among equal values.
    order.sort_by(|&a, &b| values[b].total_cmp(&values[a]));

    let mut best_x = candidates[order[0]].clone();
    let mut best_v = values[order[0]];
    for &start in order.iter().take(config.local_starts) {
        let mut x = candidates[start].clone();
        let mut v = values[start];
        let mut step = config.initial_step * width;
        for _ in 0..config.local_steps {
            let trial: Vec<f64> = x
                .iter()
                .map(|&xi| {
                    let z: f64 = rng.sample(StandardNormal);
                    (xi + step * z).clamp(bounds.lower, bounds.upper)
                })
                .collect();
            let tv = af_value(model, kind, f_min, config.xi, &trial);
            if tv > v {
                x = trial;
                v = tv;
            } else {
                step *= 0.5;
            }
        }
        if v > best_v {
            best_v = v;
            best_x = x;
        }
    }
    for v in &mut best_x {
        *v = v.clamp(bounds.lower, bounds.upper);
    }
    best_x
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalRecord {
    pub iteration: usize,
    pub point: Vec<f64>,
    pub value: f64,
    pub af: AfKind,
    /// The GP could not be fitted; `point` is a uniform random fallback.
    #[serde(default)]
    pub fallback: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Timing {
    pub wall_seconds: f64,
}

/// Everything recorded about one BO run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub schema_version: u32,
    pub function_id: u8,
    pub instance_id: u32,
    pub dim: usize,
    pub seed: u64,
    #[serde(rename = "schedule_id")]
    pub schedule: Schedule,
    pub f_opt: f64,
    pub design: Design,
    pub evals: Vec<EvalRecord>,
    pub incumbent_regret: Vec<f64>,
    pub features: Option<FeatureVector>,
    pub final_log_regret: f64,
    #[serde(default)]
    pub timing: Timing,
    #[serde(default)]
    pub flags: Vec<String>,
}

/// `(function, instance, dim, seed, schedule)`, unique per record directory.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct RunKey {
    pub problem: ProblemKey,
    pub seed: u64,
    pub schedule: Schedule,
}

impl RunRecord {
    pub fn problem_key(&self) -> ProblemKey {
        ProblemKey {
            function_id: self.function_id,
            instance_id: self.instance_id,
            dim: self.dim,
        }
    }

    pub fn key(&self) -> RunKey {
        RunKey {
            problem: self.problem_key(),
            seed: self.seed,
            schedule: self.schedule,
        }
    }

    pub fn log_regrets(&self) -> Vec<f64> {
        self.incumbent_regret.iter().map(|&r| log_regret(r)).collect()
    }
}

pub fn log_regret(regret: f64) -> f64 {
    regret.max(REGRET_FLOOR).log10()
}

/// `(iteration, log10(max(regret, 1e-12)))` for every surrogate evaluation.
pub fn incumbent_trajectory(record: &RunRecord) -> Vec<(usize, f64)> {
    record
        .incumbent_regret
        .iter()
        .enumerate()
        .map(|(i, &r)| (i, log_regret(r)))
        .collect()
}

pub fn run_key(problem: ProblemKey, seed: u64, schedule: Schedule) -> StreamKey {
    StreamKey::ROOT
        .derive(phase::RUN)
        .derive(u64::from(problem.function_id))
        .derive(u64::from(problem.instance_id))
        .derive(problem.dim as u64)
        .derive(seed)
        .derive(schedule.index() as u64)
}

pub fn run(
    problem: &Problem,
    schedule: Schedule,
    budget: BudgetConfig,
    seed: u64,
    config: &EngineConfig,
) -> Result<RunRecord> {
    budget.validate()?;
    config.gp.validate()?;
    let started = Instant::now();
    let key = run_key(problem.key(), seed, schedule);
    let schedule_key = key.derive(phase::SCHEDULE);
    let design = sample_design(
        problem,
        budget.doe_size,
        design_key(problem.function_id(), problem.instance_id(), seed),
        seed,
    )?;

    let mut points = design.points.clone();
    let mut values = design.values.clone();
    let mut best = design.best_value();
    let mut evals = Vec::with_capacity(budget.surrogate_evals);
    let mut incumbent_regret = Vec::with_capacity(budget.surrogate_evals);
    let mut flags = Vec::new();
    let bounds = Bounds::default();

    for i in 0..budget.surrogate_evals {
        let af = schedule.af_at(i, budget.surrogate_evals, schedule_key)?;
        let (x, fallback) = match GpModel::fit(&points, &values, &config.gp, key.derive(phase::GP_FIT).derive(i as u64)) {
            Ok(model) => (
                maximize_af(&model, af, best, bounds, &config.af_optimizer, key.derive(phase::AF_SEARCH).derive(i as u64)),
                false,
            ),
            Err(Error::SurrogateFailure(msg)) => {
                log::warn!(
                    "f{} i{} seed {seed} {schedule}: iteration {i} falls back to random search ({msg})",
                    problem.function_id(),
                    problem.instance_id()
                );
                flags.push(format!("surrogate_fallback:{i}"));
                let mut rng = key.derive(phase::FALLBACK).derive(i as u64).rng();
                let x = (0..problem.dim())
                    .map(|_| rng.random_range(bounds.lower..bounds.upper))
                    .collect();
                (x, true)
            }
            Err(e) => return Err(e),
        };
        let y = problem.evaluate(&x)?;
        best = best.min(y);
        incumbent_regret.push(problem.regret(best));
        points.push(x.clone());
        values.push(y);
        evals.push(EvalRecord {
            iteration: i,
            point: x,
            value: y,
            af,
            fallback,
        });
    }

    let final_log_regret = log_regret(*incumbent_regret.last().expect("surrogate_evals >= 1"));
    Ok(RunRecord {
        schema_version: RECORD_SCHEMA_VERSION,
        function_id: problem.function_id(),
        instance_id: problem.instance_id(),
        dim: problem.dim(),
        seed,
        schedule,
        f_opt: problem.f_opt(),
        design,
        evals,
        incumbent_regret,
        features: None,
        final_log_regret,
        timing: Timing {
            wall_seconds: started.elapsed().as_secs_f64(),
        },
        flags,
    })
}
