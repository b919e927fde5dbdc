//! Multi-output regression forest with flattened tree storage.

use rand::seq::SliceRandom;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::ela::stats::median;
use crate::error::{Error, Result};
use crate::rng::{phase, StreamKey};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct ForestConfig {
    pub trees: usize,
    /// `None` grows trees until leaves are pure or hit `min_leaf`.
    pub max_depth: Option<usize>,
    pub min_leaf: usize,
    /// Features tried per split; `None` means ceil(sqrt(features)).
    pub features_per_split: Option<usize>,
}

impl Default for ForestConfig {
    fn default() -> Self {
        ForestConfig {
            trees: 100,
            max_depth: None,
            min_leaf: 1,
            features_per_split: None,
        }
    }
}

impl ForestConfig {
    pub fn validate(&self) -> Result<()> {
        if self.trees == 0 || self.min_leaf == 0 {
            return Err(Error::Config("forest needs trees >= 1 and min_leaf >= 1".into()));
        }
        if self.features_per_split == Some(0) {
            return Err(Error::Config("features_per_split must be positive".into()));
        }
        Ok(())
    }

    pub fn mtry(&self, features: usize) -> usize {
        self.features_per_split
            .unwrap_or_else(|| (features as f64).sqrt().ceil() as usize)
            .clamp(1, features)
    }
}

const LEAF: i64 = -1;

/// Parallel node arrays; node 0 is the root. Leaves have `feature == -1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tree {
    pub feature: Vec<i64>,
    pub threshold: Vec<f64>,
    pub left: Vec<u32>,
    pub right: Vec<u32>,
    /// Mean target vector of the training rows reaching each node.
    pub value: Vec<Vec<f64>>,
}

impl Tree {
    pub fn len(&self) -> usize {
        self.feature.len()
    }

    pub fn is_empty(&self) -> bool {
        self.feature.is_empty()
    }

    fn push(&mut self, value: Vec<f64>) -> usize {
        self.feature.push(LEAF);
        self.threshold.push(0.0);
        self.left.push(0);
        self.right.push(0);
        self.value.push(value);
        self.feature.len() - 1
    }

    /// Leaf vector reached by an already imputed input.
    pub fn predict(&self, x: &[f64]) -> &[f64] {
        let mut node = 0;
        while self.feature[node] != LEAF {
            node = if x[self.feature[node] as usize] <= self.threshold[node] {
                self.left[node] as usize
            } else {
                self.right[node] as usize
            };
        }
        &self.value[node]
    }
}

struct Split {
    feature: usize,
    threshold: f64,
    score: f64,
}

fn mean_vector(y: &[Vec<f64>], idx: &[usize]) -> Vec<f64> {
    let k = y[idx[0]].len();
    let mut m = vec![0.0; k];
    for (c, &i) in idx.iter().enumerate() {
        running_mean(&mut m, &y[i], c);
    }
    m
}

/// Incremental mean update; exact when every input is identical.
fn running_mean(mean: &mut [f64], x: &[f64], count: usize) {
    for (a, b) in mean.iter_mut().zip(x) {
        *a += (b - *a) / (count + 1) as f64;
    }
}

fn is_pure(y: &[Vec<f64>], idx: &[usize]) -> bool {
    idx.iter().all(|&i| y[i] == y[idx[0]])
}

/// Best split of `idx` on `feature` by summed per-output SSE, or `None`
/// when the feature is constant on the node.
fn best_split_on(
    x: &[Vec<f64>],
    y: &[Vec<f64>],
    idx: &mut [usize],
    feature: usize,
    min_leaf: usize,
    total: &[f64],
) -> Option<Option<Split>> {
    idx.sort_by(|&a, &b| x[a][feature].total_cmp(&x[b][feature]).then(a.cmp(&b)));
    let first = x[idx[0]][feature];
    let last = x[idx[idx.len() - 1]][feature];
    if first == last {
        return None;
    }
    let n = idx.len();
    let k = total.len();
    let mut left = vec![0.0; k];
    let mut best: Option<Split> = None;
    for pos in 0..n - 1 {
        for (a, b) in left.iter_mut().zip(&y[idx[pos]]) {
            *a += b;
        }
        let nl = pos + 1;
        let nr = n - nl;
        let (lo, hi) = (x[idx[pos]][feature], x[idx[pos + 1]][feature]);
        if lo == hi || nl < min_leaf || nr < min_leaf {
            continue;
        }
        // Maximizing Σ_k (L_k²/n_l + R_k²/n_r) minimizes the summed SSE.
        let score: f64 = (0..k)
            .map(|j| left[j].powi(2) / nl as f64 + (total[j] - left[j]).powi(2) / nr as f64)
            .sum();
        if best.as_ref().is_none_or(|b| score > b.score) {
            let mid = lo + (hi - lo) / 2.0;
            best = Some(Split {
                feature,
                threshold: if mid < hi { mid } else { lo },
                score,
            });
        }
    }
    Some(best)
}

fn grow(x: &[Vec<f64>], y: &[Vec<f64>], rows: Vec<usize>, config: &ForestConfig, key: StreamKey) -> Tree {
    let p = x[0].len();
    let mtry = config.mtry(p);
    let mut rng = key.rng();
    let mut tree = Tree {
        feature: Vec::new(),
        threshold: Vec::new(),
        left: Vec::new(),
        right: Vec::new(),
        value: Vec::new(),
    };
    let root = tree.push(mean_vector(y, &rows));
    let mut stack = vec![(root, rows, 0usize)];
    let mut features: Vec<usize> = (0..p).collect();

    while let Some((node, mut idx, depth)) = stack.pop() {
        let at_limit = config.max_depth.is_some_and(|d| depth >= d);
        if at_limit || idx.len() < 2 * config.min_leaf || is_pure(y, &idx) {
            continue;
        }
        let total = {
            let mut t = vec![0.0; y[idx[0]].len()];
            for &i in &idx {
                for (a, b) in t.iter_mut().zip(&y[i]) {
                    *a += b;
                }
            }
            t
        };
        // Features are visited in random order until `mtry` non-constant
        // ones have been examined.
        features.shuffle(&mut rng);
        let mut tried = 0;
        let mut best: Option<Split> = None;
        for &f in &features {
            if tried == mtry {
                break;
            }
            if let Some(candidate) = best_split_on(x, y, &mut idx, f, config.min_leaf, &total) {
                tried += 1;
                if let Some(c) = candidate {
                    if best.as_ref().is_none_or(|b| c.score > b.score) {
                        best = Some(c);
                    }
                }
            }
        }
        let Some(split) = best else { continue };
        let (l, r): (Vec<usize>, Vec<usize>) = idx
            .iter()
            .partition(|&&i| x[i][split.feature] <= split.threshold);
        let li = tree.push(mean_vector(y, &l));
        let ri = tree.push(mean_vector(y, &r));
        tree.feature[node] = split.feature as i64;
        tree.threshold[node] = split.threshold;
        tree.left[node] = li as u32;
        tree.right[node] = ri as u32;
        stack.push((ri, r, depth + 1));
        stack.push((li, l, depth + 1));
    }
    tree
}

/// Trees plus the per-feature medians used to impute missing inputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RandomForest {
    pub config: ForestConfig,
    pub seed: u64,
    pub imputation: Vec<f64>,
    pub outputs: usize,
    pub trees: Vec<Tree>,
}

/// Median of the finite entries of each column; 0 for all-missing columns.
pub fn column_medians(x: &[Vec<f64>]) -> Vec<f64> {
    let p = x.first().map_or(0, Vec::len);
    (0..p)
        .map(|j| {
            let col: Vec<f64> = x.iter().map(|r| r[j]).filter(|v| v.is_finite()).collect();
            if col.is_empty() {
                0.0
            } else {
                median(&col)
            }
        })
        .collect()
}

pub fn impute(x: &[f64], medians: &[f64]) -> Vec<f64> {
    x.iter()
        .zip(medians)
        .map(|(v, m)| if v.is_finite() { *v } else { *m })
        .collect()
}

impl RandomForest {
    /// Fits on rows in the given order; tree `t` draws its bootstrap sample
    /// from a stream keyed by `seed` and `t`.
    pub fn fit(x: &[Vec<f64>], y: &[Vec<f64>], config: ForestConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        if x.is_empty() || x.len() != y.len() {
            return Err(Error::invalid("feature and target row counts differ or are zero"));
        }
        let p = x[0].len();
        let k = y[0].len();
        if p == 0 || k == 0 || x.iter().any(|r| r.len() != p) || y.iter().any(|r| r.len() != k) {
            return Err(Error::invalid("ragged feature or target rows"));
        }
        if y.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::invalid("targets must be finite"));
        }
        let imputation = column_medians(x);
        let xi: Vec<Vec<f64>> = x.iter().map(|r| impute(r, &imputation)).collect();
        let n = xi.len();
        let base = StreamKey::new(seed).derive(phase::FOREST);
        let trees = (0..config.trees)
            .into_par_iter()
            .map(|t| {
                let key = base.derive(t as u64);
                let mut rng = key.derive(0).rng();
                let rows: Vec<usize> = (0..n).map(|_| rng.random_range(0..n)).collect();
                grow(&xi, y, rows, &config, key.derive(1))
            })
            .collect();
        Ok(RandomForest {
            config,
            seed,
            imputation,
            outputs: k,
            trees,
        })
    }

    pub fn num_features(&self) -> usize {
        self.imputation.len()
    }

    /// Per-output mean over trees. Missing inputs are imputed.
    pub fn predict(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.num_features() {
            return Err(Error::invalid(format!(
                "expected {} features, got {}",
                self.num_features(),
                x.len()
            )));
        }
        let xi = impute(x, &self.imputation);
        let mut out = vec![0.0; self.outputs];
        for (c, t) in self.trees.iter().enumerate() {
            running_mean(&mut out, t.predict(&xi), c);
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn synthetic(n: usize, seed: u64) -> (Vec<Vec<f64>>, Vec<Vec<f64>>) {
        let mut rng = StreamKey::new(seed).rng();
        let x: Vec<Vec<f64>> = (0..n)
            .map(|_| (0..5).map(|_| rng.random_range(-1.0..1.0)).collect())
            .collect();
        let y = x
            .iter()
            .map(|r| vec![if r[0] > 0.0 { 0.0 } else { 1.0 }, 0.5])
            .collect();
        (x, y)
    }

    #[test]
    fn single_tree_without_bootstrap_noise_fits_training_data() {
        let (x, y) = synthetic(50, 1);
        let cfg = ForestConfig {
            trees: 1,
            features_per_split: Some(5),
            ..Default::default()
        };
        let f = RandomForest::fit(&x, &y, cfg, 3).unwrap();
        let leaf = f.trees[0].predict(&x[0]).to_vec();
        assert_eq!(f.predict(&x[0]).unwrap(), leaf);
    }

    #[test]
    fn threshold_is_learned() {
        let (x, y) = synthetic(200, 2);
        let f = RandomForest::fit(&x, &y, ForestConfig::default(), 9).unwrap();
        let (xt, yt) = synthetic(100, 3);
        let mae: f64 = xt
            .iter()
            .zip(&yt)
            .map(|(a, b)| (f.predict(a).unwrap()[0] - b[0]).abs())
            .sum::<f64>()
            / 100.0;
        assert!(mae < 0.1, "mae {mae}");
    }

    #[test]
    fn constant_targets_predict_constant() {
        let (x, _) = synthetic(30, 4);
        let y = vec![vec![0.3, 0.7]; 30];
        let f = RandomForest::fit(&x, &y, ForestConfig::default(), 1).unwrap();
        assert_eq!(f.predict(&[0.9, -0.2, 0.0, 0.1, 0.5]).unwrap(), vec![0.3, 0.7]);
    }

    #[test]
    fn two_trees_average() {
        let (x, y) = synthetic(40, 5);
        let f = RandomForest::fit(&x, &y, ForestConfig { trees: 2, ..Default::default() }, 1).unwrap();
        let probe = [0.1, 0.2, -0.3, 0.4, 0.0];
        let a = f.trees[0].predict(&probe);
        let b = f.trees[1].predict(&probe);
        let p = f.predict(&probe).unwrap();
        for j in 0..2 {
            assert!((p[j] - (a[j] + b[j]) / 2.0).abs() < 1e-15);
        }
    }

    #[test]
    fn deterministic_and_imputes_nan() {
        let (mut x, y) = synthetic(40, 6);
        x[3][2] = f64::NAN;
        let a = RandomForest::fit(&x, &y, ForestConfig::default(), 7).unwrap();
        let b = RandomForest::fit(&x, &y, ForestConfig::default(), 7).unwrap();
        assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
        let p = a.predict(&[f64::NAN; 5]).unwrap();
        assert!(p.iter().all(|v| v.is_finite()));
    }

    #[test]
    fn depth_limit_and_min_leaf() {
        let (x, y) = synthetic(60, 8);
        let stump = ForestConfig {
            trees: 3,
            max_depth: Some(1),
            ..Default::default()
        };
        let f = RandomForest::fit(&x, &y, stump, 1).unwrap();
        assert!(f.trees.iter().all(|t| t.len() <= 3));
        let big_leaves = ForestConfig {
            trees: 3,
            min_leaf: 20,
            ..Default::default()
        };
        let f = RandomForest::fit(&x, &y, big_leaves, 1).unwrap();
        assert!(f.trees.iter().all(|t| t.len() <= 5));
    }

    #[test]
    fn wrong_length_rejected() {
        let (x, y) = synthetic(20, 9);
        let f = RandomForest::fit(&x, &y, ForestConfig { trees: 2, ..Default::default() }, 1).unwrap();
        assert!(f.predict(&[0.0; 4]).is_err());
    }
}
