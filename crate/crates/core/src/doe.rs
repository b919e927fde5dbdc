//! Latin-hypercube initial designs.

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::bbob::{Problem, LOWER_BOUND, UPPER_BOUND};
use crate::error::{Error, Result};
use crate::rng::{phase, StreamKey};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct DesignMeta {
    pub function_id: u8,
    pub instance_id: u32,
    pub dim: usize,
    pub seed: u64,
    pub size: usize,
}

/// An evaluated sample: points and their objective values, index-aligned.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Design {
    pub points: Vec<Vec<f64>>,
    pub values: Vec<f64>,
    #[serde(default)]
    pub meta: DesignMeta,
}

impl Design {
    /// Wraps already-evaluated observations. Checks shape and finiteness
    /// only; designs produced by [`sample_design`] additionally satisfy the
    /// box and distinctness invariants.
    pub fn new(points: Vec<Vec<f64>>, values: Vec<f64>) -> Result<Self> {
        if points.len() != values.len() {
            return Err(Error::invalid(format!(
                "{} points but {} values",
                points.len(),
                values.len()
            )));
        }
        if points.len() < 2 {
            return Err(Error::invalid("a design needs at least 2 observations"));
        }
        let dim = points[0].len();
        if dim == 0 || points.iter().any(|p| p.len() != dim) {
            return Err(Error::invalid("points have inconsistent dimension"));
        }
        if points.iter().flatten().chain(&values).any(|v| !v.is_finite()) {
            return Err(Error::invalid("non-finite coordinate or value"));
        }
        let size = points.len();
        Ok(Design {
            points,
            values,
            meta: DesignMeta {
                dim,
                size,
                ..DesignMeta::default()
            },
        })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.points.first().map_or(0, Vec::len)
    }

    pub fn best_value(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }
}

/// Stream key for the initial design. Independent of the schedule, so every
/// schedule run on `(function_id, instance_id, seed)` sees the same design.
pub fn design_key(function_id: u8, instance_id: u32, seed: u64) -> StreamKey {
    StreamKey::ROOT
        .derive(phase::DESIGN)
        .derive(u64::from(function_id))
        .derive(u64::from(instance_id))
        .derive(seed)
}

/// Unevaluated Latin-hypercube sample over `[lower, upper]^dim`: one point
/// per stratum in every coordinate, uniform within the stratum.
pub fn latin_hypercube(n: usize, dim: usize, lower: f64, upper: f64, key: StreamKey) -> Vec<Vec<f64>> {
    let mut rng = key.rng();
    let width = (upper - lower) / n as f64;
    let mut points = vec![vec![0.0; dim]; n];
    let mut strata: Vec<usize> = (0..n).collect();
    for j in 0..dim {
        strata.shuffle(&mut rng);
        for (point, &s) in points.iter_mut().zip(&strata) {
            let u: f64 = rng.random();
            point[j] = lower + width * (s as f64 + u);
        }
    }
    points
}

pub fn sample_design(problem: &Problem, n: usize, key: StreamKey, seed: u64) -> Result<Design> {
    if n < 2 {
        return Err(Error::invalid(format!("design size {n} < 2")));
    }
    let points = latin_hypercube(n, problem.dim(), LOWER_BOUND, UPPER_BOUND, key);
    let values = points
        .iter()
        .map(|x| problem.evaluate(x))
        .collect::<Result<Vec<_>>>()?;
    Ok(Design {
        points,
        values,
        meta: DesignMeta {
            function_id: problem.function_id(),
            instance_id: problem.instance_id(),
            dim: problem.dim(),
            seed,
            size: n,
        },
    })
}
