//! Per-function normalization, per-run ranks, convergence summaries and
//! the CSV tables built from them.

use std::collections::BTreeMap;
use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{phase, StreamKey};
use crate::schedule::{Schedule, PORTFOLIO, PORTFOLIO_SIZE};

pub const TABLE_SCHEMA_VERSION: u32 = 1;

/// One row of the experiment matrix: all seven schedules share it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct RowKey {
    pub function_id: u8,
    pub instance_id: u32,
    pub dim: usize,
    pub seed: u64,
}

impl RowKey {
    /// Normalization group: one BBOB function at one dimension.
    pub fn group(&self) -> (u8, usize) {
        (self.function_id, self.dim)
    }
}

/// Min-max scaling for one function group.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Normalization {
    pub min: f64,
    pub max: f64,
    /// Fewer than two distinct values; everything maps to 0.5.
    pub degenerate: bool,
}

impl Normalization {
    pub fn fit<'a>(values: impl IntoIterator<Item = &'a f64>) -> Self {
        let (min, max) = values
            .into_iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(*v), hi.max(*v)));
        Normalization {
            min,
            max,
            degenerate: !(max > min),
        }
    }

    pub fn apply(&self, v: f64) -> f64 {
        if self.degenerate {
            0.5
        } else {
            ((v - self.min) / (self.max - self.min)).clamp(0.0, 1.0)
        }
    }
}

/// Index of the smallest entry; ties go to the earliest position.
pub fn argmin(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, v) in values.iter().enumerate() {
        if *v < values[best] {
            best = i;
        }
    }
    best
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerformanceRow {
    pub key: RowKey,
    /// Final log-regret per schedule, portfolio order.
    pub raw: Vec<f64>,
    pub normalized: Vec<f64>,
    pub afs: Option<Schedule>,
    pub vbs: Schedule,
}

impl PerformanceRow {
    pub fn vbs_value(&self) -> f64 {
        self.normalized[self.vbs.index()]
    }

    pub fn afs_value(&self) -> Option<f64> {
        self.afs.map(|s| self.normalized[s.index()])
    }

    pub fn worst_value(&self) -> f64 {
        self.normalized.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FunctionNormalization {
    pub function_id: u8,
    pub dim: usize,
    #[serde(flatten)]
    pub normalization: Normalization,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct PerformanceTable {
    pub rows: Vec<PerformanceRow>,
    pub normalization: Vec<FunctionNormalization>,
}

impl PerformanceTable {
    pub fn normalization_for(&self, function_id: u8, dim: usize) -> Option<Normalization> {
        self.normalization
            .iter()
            .find(|n| n.function_id == function_id && n.dim == dim)
            .map(|n| n.normalization)
    }

    /// Records the selector's choice for every row it covers.
    pub fn set_afs(&mut self, mut choice: impl FnMut(&RowKey) -> Option<Schedule>) {
        for row in &mut self.rows {
            row.afs = choice(&row.key);
        }
    }
}

fn check_row(values: &[f64]) -> Result<()> {
    if values.len() != PORTFOLIO_SIZE {
        return Err(Error::invalid(format!(
            "expected {PORTFOLIO_SIZE} schedule values, got {}",
            values.len()
        )));
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::invalid("schedule values must be finite"));
    }
    Ok(())
}

/// Min-max normalizes final log-regrets over every run and schedule of each
/// function group and marks the per-row VBS.
pub fn normalize_per_function(rows: &[(RowKey, Vec<f64>)]) -> Result<PerformanceTable> {
    let mut groups: BTreeMap<(u8, usize), Vec<f64>> = BTreeMap::new();
    for (key, values) in rows {
        check_row(values)?;
        groups.entry(key.group()).or_default().extend(values);
    }
    let norms: BTreeMap<(u8, usize), Normalization> = groups
        .iter()
        .map(|(g, v)| (*g, Normalization::fit(v)))
        .collect();
    for ((f, d), n) in &norms {
        if n.degenerate {
            log::warn!("function {f} (dim {d}) has no regret spread; targets set to 0.5");
        }
    }
    let rows = rows
        .iter()
        .map(|(key, raw)| {
            let n = norms[&key.group()];
            let normalized: Vec<f64> = raw.iter().map(|v| n.apply(*v)).collect();
            PerformanceRow {
                key: *key,
                vbs: PORTFOLIO[argmin(&normalized)],
                raw: raw.clone(),
                normalized,
                afs: None,
            }
        })
        .collect();
    Ok(PerformanceTable {
        rows,
        normalization: norms
            .into_iter()
            .map(|((function_id, dim), normalization)| FunctionNormalization {
                function_id,
                dim,
                normalization,
            })
            .collect(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankRow {
    pub key: RowKey,
    /// Ascending ranks, ties averaged; sums to 28.
    pub ranks: Vec<f64>,
    pub afs: Option<f64>,
    pub vbs: f64,
}

/// Ascending average ranks (1 = lowest value).
pub fn average_ranks(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0.0; values.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && values[order[j + 1]] == values[order[i]] {
            j += 1;
        }
        let avg = (i + j) as f64 / 2.0 + 1.0;
        for k in &order[i..=j] {
            ranks[*k] = avg;
        }
        i = j + 1;
    }
    ranks
}

pub fn rank_per_run(key: RowKey, values: &[f64], afs: Option<Schedule>) -> Result<RankRow> {
    check_row(values)?;
    let ranks = average_ranks(values);
    let vbs = ranks.iter().copied().fold(f64::INFINITY, f64::min);
    Ok(RankRow {
        key,
        afs: afs.map(|s| ranks[s.index()]),
        vbs,
        ranks,
    })
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct RankTable {
    pub rows: Vec<RankRow>,
}

impl RankTable {
    pub fn from_performance(table: &PerformanceTable) -> Result<Self> {
        let rows = table
            .rows
            .iter()
            .map(|r| rank_per_run(r.key, &r.normalized, r.afs))
            .collect::<Result<_>>()?;
        Ok(RankTable { rows })
    }

    /// Mean rank per schedule (portfolio order), then AFS, then VBS.
    pub fn mean_ranks(&self) -> MeanRanks {
        let n = self.rows.len() as f64;
        let mut schedules = vec![0.0; PORTFOLIO_SIZE];
        let mut vbs = 0.0;
        let mut afs = 0.0;
        let mut afs_n = 0usize;
        for r in &self.rows {
            for (s, v) in schedules.iter_mut().zip(&r.ranks) {
                *s += v / n;
            }
            vbs += r.vbs / n;
            if let Some(a) = r.afs {
                afs += a;
                afs_n += 1;
            }
        }
        MeanRanks {
            schedules,
            afs: (afs_n > 0).then(|| afs / afs_n as f64),
            vbs,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeanRanks {
    pub schedules: Vec<f64>,
    pub afs: Option<f64>,
    pub vbs: f64,
}

impl MeanRanks {
    pub fn best_schedule(&self) -> (Schedule, f64) {
        let i = argmin(&self.schedules);
        (PORTFOLIO[i], self.schedules[i])
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "snake_case")]
pub enum CiMethod {
    /// mean ± 1.96·sd/√n
    #[default]
    Normal,
    /// Percentile interval of resampled means.
    Bootstrap { resamples: usize, seed: u64 },
}

/// One incumbent log-regret trajectory tagged with the series it belongs to.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub function_id: u8,
    pub dim: usize,
    pub series: String,
    pub log_regrets: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergencePoint {
    pub function_id: u8,
    pub dim: usize,
    pub series: String,
    pub iteration: usize,
    pub n: usize,
    pub mean: f64,
    pub ci_low: Option<f64>,
    pub ci_high: Option<f64>,
}

fn interval(values: &[f64], mean: f64, method: CiMethod, key: StreamKey) -> Option<(f64, f64)> {
    let n = values.len();
    if n < 2 {
        return None;
    }
    match method {
        CiMethod::Normal => {
            let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
            let half = 1.96 * var.sqrt() / (n as f64).sqrt();
            Some((mean - half, mean + half))
        }
        CiMethod::Bootstrap { resamples, .. } => {
            let mut rng = key.rng();
            let mut means: Vec<f64> = (0..resamples.max(1))
                .map(|_| (0..n).map(|_| values[rng.random_range(0..n)]).sum::<f64>() / n as f64)
                .collect();
            means.sort_by(f64::total_cmp);
            Some((
                crate::ela::stats::quantile_sorted(&means, 0.025),
                crate::ela::stats::quantile_sorted(&means, 0.975),
            ))
        }
    }
}

/// Normalizes log-regrets per function over all trajectories and
/// iterations, then averages per series and iteration.
pub fn convergence_summary(trajectories: &[Trajectory], method: CiMethod) -> Vec<ConvergencePoint> {
    let mut norms: BTreeMap<(u8, usize), Vec<f64>> = BTreeMap::new();
    for t in trajectories {
        norms.entry((t.function_id, t.dim)).or_default().extend(&t.log_regrets);
    }
    let norms: BTreeMap<(u8, usize), Normalization> =
        norms.iter().map(|(k, v)| (*k, Normalization::fit(v))).collect();

    let mut grouped: BTreeMap<(u8, usize, &str), Vec<Vec<f64>>> = BTreeMap::new();
    for t in trajectories {
        let n = norms[&(t.function_id, t.dim)];
        grouped
            .entry((t.function_id, t.dim, t.series.as_str()))
            .or_default()
            .push(t.log_regrets.iter().map(|v| n.apply(*v)).collect());
    }

    let base = match method {
        CiMethod::Bootstrap { seed, .. } => StreamKey::new(seed).derive(phase::BOOTSTRAP_CI),
        CiMethod::Normal => StreamKey::ROOT,
    };
    let mut out = Vec::new();
    for ((function_id, dim, series), runs) in grouped {
        let len = runs.iter().map(Vec::len).max().unwrap_or(0);
        for it in 0..len {
            let column: Vec<f64> = runs.iter().filter_map(|r| r.get(it).copied()).collect();
            let mean = column.iter().sum::<f64>() / column.len() as f64;
            let key = base
                .derive(u64::from(function_id))
                .derive(dim as u64)
                .derive(it as u64);
            let ci = interval(&column, mean, method, key);
            out.push(ConvergencePoint {
                function_id,
                dim,
                series: series.to_string(),
                iteration: it,
                n: column.len(),
                mean,
                ci_low: ci.map(|c| c.0),
                ci_high: ci.map(|c| c.1),
            });
        }
    }
    out
}

fn csv_writer(path: &Path) -> Result<csv::Writer<std::fs::File>> {
    csv::Writer::from_path(path).map_err(|source| Error::Csv {
        path: path.to_path_buf(),
        source,
    })
}

fn csv_err(path: &Path) -> impl Fn(csv::Error) -> Error + '_ {
    move |source| Error::Csv {
        path: path.to_path_buf(),
        source,
    }
}

fn key_fields(key: &RowKey) -> Vec<String> {
    vec![
        TABLE_SCHEMA_VERSION.to_string(),
        key.function_id.to_string(),
        key.instance_id.to_string(),
        key.dim.to_string(),
        key.seed.to_string(),
    ]
}

fn header(tail: &[&str]) -> Vec<String> {
    ["schema_version", "function_id", "instance_id", "dim", "seed"]
        .iter()
        .map(|s| s.to_string())
        .chain(PORTFOLIO.iter().map(|s| s.id().to_string()))
        .chain(tail.iter().map(|s| s.to_string()))
        .collect()
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// Normalized final log-regret per schedule with AFS and VBS appended.
pub fn write_final_regret_csv(table: &PerformanceTable, path: &Path) -> Result<()> {
    let mut w = csv_writer(path)?;
    let err = csv_err(path);
    w.write_record(header(&["afs", "vbs", "afs_schedule", "vbs_schedule"]))
        .map_err(&err)?;
    for r in &table.rows {
        let mut rec = key_fields(&r.key);
        rec.extend(r.normalized.iter().map(f64::to_string));
        rec.push(opt(r.afs_value()));
        rec.push(r.vbs_value().to_string());
        rec.push(r.afs.map(|s| s.id().to_string()).unwrap_or_default());
        rec.push(r.vbs.id().to_string());
        w.write_record(rec).map_err(&err)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn write_ranks_csv(table: &RankTable, path: &Path) -> Result<()> {
    let mut w = csv_writer(path)?;
    let err = csv_err(path);
    w.write_record(header(&["afs", "vbs"])).map_err(&err)?;
    for r in &table.rows {
        let mut rec = key_fields(&r.key);
        rec.extend(r.ranks.iter().map(f64::to_string));
        rec.push(opt(r.afs));
        rec.push(r.vbs.to_string());
        w.write_record(rec).map_err(&err)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn write_convergence_csv(points: &[ConvergencePoint], path: &Path) -> Result<()> {
    let mut w = csv_writer(path)?;
    let err = csv_err(path);
    w.write_record([
        "schema_version",
        "function_id",
        "dim",
        "series",
        "iteration",
        "n",
        "mean",
        "ci_low",
        "ci_high",
    ])
    .map_err(&err)?;
    for p in points {
        w.write_record([
            TABLE_SCHEMA_VERSION.to_string(),
            p.function_id.to_string(),
            p.dim.to_string(),
            p.series.clone(),
            p.iteration.to_string(),
            p.n.to_string(),
            p.mean.to_string(),
            opt(p.ci_low),
            opt(p.ci_high),
        ])
        .map_err(&err)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}
