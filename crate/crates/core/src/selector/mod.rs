//! Per-run schedule selection from landscape features.
//!
//! [`build_dataset`] turns run records into one row per
//! `(function, instance, dim, seed)` with seven normalized targets,
//! [`train_forest`] fits a multi-output random forest on the training rows
//! and [`select`] picks the schedule with the lowest prediction.

mod forest;

pub use forest::{column_medians, impute, ForestConfig, RandomForest, Tree};

use std::collections::BTreeMap;
use std::path::Path;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::analytics::{argmin, normalize_per_function, PerformanceTable, RowKey};
use crate::ela::{feature_vector, FeatureVector, FEATURE_NAMES, NUM_FEATURES};
use crate::engine::RunRecord;
use crate::error::{Error, Result};
use crate::rng::{phase, StreamKey};
use crate::schedule::{Schedule, PORTFOLIO, PORTFOLIO_SIZE};

pub const DATASET_SCHEMA_VERSION: u32 = 1;
pub const MODEL_SCHEMA_VERSION: u32 = 1;
pub const TEST_FRACTION: f64 = 0.3;
pub const MIN_TRAINING_ROWS: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Split {
    Train,
    Test,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetRow {
    pub key: RowKey,
    pub features: FeatureVector,
    /// Normalized final log-regret per schedule, portfolio order.
    pub targets: Vec<f64>,
    /// Unnormalized final log-regret per schedule.
    pub raw: Vec<f64>,
    pub split: Split,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    pub schema_version: u32,
    pub feature_names: Vec<String>,
    pub target_order: Vec<Schedule>,
    pub split_seed: u64,
    pub rows: Vec<DatasetRow>,
    pub table: PerformanceTable,
    /// Keys dropped for missing schedules.
    #[serde(default)]
    pub dropped: Vec<RowKey>,
}

impl Dataset {
    pub fn train_rows(&self) -> impl Iterator<Item = &DatasetRow> {
        self.rows.iter().filter(|r| r.split == Split::Train)
    }

    pub fn test_rows(&self) -> impl Iterator<Item = &DatasetRow> {
        self.rows.iter().filter(|r| r.split == Split::Test)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        write_json(self, path, "dataset")
    }

    pub fn load(path: &Path) -> Result<Self> {
        let ds: Dataset = read_json(path, "dataset")?;
        if ds.schema_version != DATASET_SCHEMA_VERSION {
            return Err(Error::invalid(format!(
                "unsupported dataset schema version {}",
                ds.schema_version
            )));
        }
        Ok(ds)
    }
}

fn write_json<T: Serialize>(value: &T, path: &Path, what: &str) -> Result<()> {
    let text = serde_json::to_string(value).map_err(|e| Error::json(what, e))?;
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path, what: &str) -> Result<T> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::json(what, e))
}

/// Assigns round(30%) of each `(function, instance)` stratum to the test
/// split. Strata are shuffled from a stream keyed by `seed` and the stratum,
/// so the assignment does not depend on input order.
pub fn stratified_split(keys: &[RowKey], seed: u64) -> Vec<Split> {
    let mut strata: BTreeMap<(u8, u32), Vec<usize>> = BTreeMap::new();
    for (i, k) in keys.iter().enumerate() {
        strata.entry((k.function_id, k.instance_id)).or_default().push(i);
    }
    let mut out = vec![Split::Train; keys.len()];
    let base = StreamKey::new(seed).derive(phase::SPLIT);
    for ((f, inst), mut members) in strata {
        members.sort_by_key(|&i| keys[i]);
        let mut rng = base.derive(u64::from(f)).derive(u64::from(inst)).rng();
        members.shuffle(&mut rng);
        let n_test = (members.len() as f64 * TEST_FRACTION).round() as usize;
        for &i in &members[..n_test] {
            out[i] = Split::Test;
        }
    }
    out
}

fn row_key(r: &RunRecord) -> RowKey {
    RowKey {
        function_id: r.function_id,
        instance_id: r.instance_id,
        dim: r.dim,
        seed: r.seed,
    }
}

/// Groups records into rows, normalizes per function and splits 70/30.
/// Incomplete rows are dropped with a warning.
pub fn build_dataset(records: &[RunRecord], split_seed: u64) -> Result<Dataset> {
    let mut grouped: BTreeMap<RowKey, Vec<Option<&RunRecord>>> = BTreeMap::new();
    for r in records {
        let slot = &mut grouped.entry(row_key(r)).or_insert_with(|| vec![None; PORTFOLIO_SIZE])
            [r.schedule.index()];
        if slot.is_some() {
            return Err(Error::invalid(format!("duplicate record for {:?}", r.key())));
        }
        *slot = Some(r);
    }

    let mut complete = Vec::new();
    let mut dropped = Vec::new();
    for (key, slots) in grouped {
        if slots.iter().all(Option::is_some) {
            complete.push((key, slots.into_iter().flatten().collect::<Vec<_>>()));
        } else {
            log::warn!("dropping {key:?}: not all schedules present");
            dropped.push(key);
        }
    }
    if complete.is_empty() {
        return Err(Error::InsufficientData("no complete (function, instance, seed) rows".into()));
    }

    let raw: Vec<(RowKey, Vec<f64>)> = complete
        .iter()
        .map(|(k, recs)| (*k, recs.iter().map(|r| r.final_log_regret).collect()))
        .collect();
    let table = normalize_per_function(&raw)?;
    let keys: Vec<RowKey> = complete.iter().map(|(k, _)| *k).collect();
    let splits = stratified_split(&keys, split_seed);

    let rows = complete
        .iter()
        .zip(&table.rows)
        .zip(splits)
        .map(|(((key, recs), perf), split)| DatasetRow {
            key: *key,
            features: recs[0]
                .features
                .clone()
                .unwrap_or_else(|| feature_vector(&recs[0].design)),
            targets: perf.normalized.clone(),
            raw: perf.raw.clone(),
            split,
        })
        .collect();
    Ok(Dataset {
        schema_version: DATASET_SCHEMA_VERSION,
        feature_names: FEATURE_NAMES.iter().map(|s| s.to_string()).collect(),
        target_order: PORTFOLIO.to_vec(),
        split_seed,
        rows,
        table,
        dropped,
    })
}

/// A trained selector: forest plus the metadata needed to apply it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Forest {
    pub schema_version: u32,
    pub feature_names: Vec<String>,
    pub target_order: Vec<Schedule>,
    pub split_seed: Option<u64>,
    pub model: RandomForest,
}

impl Forest {
    pub fn save(&self, path: &Path) -> Result<()> {
        write_json(self, path, "model")
    }

    pub fn load(path: &Path) -> Result<Self> {
        let f: Forest = read_json(path, "model")?;
        if f.schema_version != MODEL_SCHEMA_VERSION {
            return Err(Error::invalid(format!(
                "unsupported model schema version {}",
                f.schema_version
            )));
        }
        if f.target_order != PORTFOLIO || f.model.num_features() != NUM_FEATURES {
            return Err(Error::invalid("model does not match the feature set or portfolio"));
        }
        Ok(f)
    }
}

/// Fits on training rows only, taken in key order.
pub fn train_forest(ds: &Dataset, config: ForestConfig, seed: u64) -> Result<Forest> {
    let mut rows: Vec<&DatasetRow> = ds.train_rows().collect();
    rows.sort_by_key(|r| r.key);
    train_on_rows(&rows, config, seed, Some(ds.split_seed))
}

pub(crate) fn train_on_rows(
    rows: &[&DatasetRow],
    config: ForestConfig,
    seed: u64,
    split_seed: Option<u64>,
) -> Result<Forest> {
    if rows.len() < MIN_TRAINING_ROWS {
        return Err(Error::InsufficientData(format!(
            "need at least {MIN_TRAINING_ROWS} training rows, got {}",
            rows.len()
        )));
    }
    let x: Vec<Vec<f64>> = rows.iter().map(|r| r.features.values.clone()).collect();
    let y: Vec<Vec<f64>> = rows.iter().map(|r| r.targets.clone()).collect();
    if x.iter().any(|v| v.len() != NUM_FEATURES) || y.iter().any(|t| t.len() != PORTFOLIO_SIZE) {
        return Err(Error::invalid("dataset rows must have 38 features and 7 targets"));
    }
    Ok(Forest {
        schema_version: MODEL_SCHEMA_VERSION,
        feature_names: FEATURE_NAMES.iter().map(|s| s.to_string()).collect(),
        target_order: PORTFOLIO.to_vec(),
        split_seed,
        model: RandomForest::fit(&x, &y, config, seed)?,
    })
}

pub fn predict_forest(forest: &Forest, x: &FeatureVector) -> Result<Vec<f64>> {
    if x.len() != NUM_FEATURES {
        return Err(Error::invalid(format!(
            "expected {NUM_FEATURES} features, got {}",
            x.len()
        )));
    }
    forest.model.predict(&x.values)
}

/// Schedule with the lowest predicted normalized log-regret, plus all seven
/// predictions.
pub fn select(forest: &Forest, x: &FeatureVector) -> Result<(Schedule, Vec<f64>)> {
    let pred = predict_forest(forest, x)?;
    Ok((choose(&pred)?, pred))
}

/// Argmin with ties broken by portfolio order.
pub fn choose(values: &[f64]) -> Result<Schedule> {
    if values.len() != PORTFOLIO_SIZE || values.iter().any(|v| v.is_nan()) {
        return Err(Error::invalid("need 7 comparable values"));
    }
    Ok(PORTFOLIO[argmin(values)])
}

/// The virtual best schedule for one row of true performances.
pub fn vbs(targets: &[f64]) -> Result<Schedule> {
    if targets.iter().any(|v| !v.is_finite()) {
        return Err(Error::invalid("vbs needs finite targets"));
    }
    choose(targets)
}
