//! Experiment configuration, the resumable run matrix, record persistence
//! and the train-and-report pipeline.
//!
//! Records live in `records.jsonl` inside the output directory, one
//! [`RunRecord`] per line. While a matrix runs, each worker appends to its
//! own `records.worker-N.jsonl`; these are merged into `records.jsonl` when
//! the matrix finishes, or on the next start if the process was interrupted.
//! Runs that fail are listed in `failures.jsonl` and retried next time.

use std::collections::{BTreeMap, BTreeSet};
use std::fs::{self, File, OpenOptions};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};

use crate::analytics::{
    convergence_summary, write_convergence_csv, write_final_regret_csv, write_ranks_csv, CiMethod,
    MeanRanks, RankTable, RowKey, Trajectory,
};
use crate::bbob::{Problem, ProblemKey, NUM_FUNCTIONS};
use crate::ela::{feature_vector, FEATURE_NAMES};
use crate::engine::{run, AfOptimizerConfig, BudgetConfig, EngineConfig, RunKey, RunRecord};
use crate::error::{Error, Result};
use crate::gp::GpConfig;
use crate::schedule::{Schedule, PORTFOLIO};
use crate::selector::{build_dataset, select, train_forest, Dataset, Forest, ForestConfig, Split};

pub const RECORDS_FILE: &str = "records.jsonl";
pub const FAILURES_FILE: &str = "failures.jsonl";
pub const OUTPUT_DIR_ENV: &str = "AFS_OUTPUT_DIR";
pub const PARALLELISM_ENV: &str = "AFS_PARALLELISM";

/// A seed count (`seeds = 10` means 0..10) or an explicit list.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Seeds {
    Count(u64),
    List(Vec<u64>),
}

impl Seeds {
    pub fn to_vec(&self) -> Vec<u64> {
        match self {
            Seeds::Count(n) => (0..*n).collect(),
            Seeds::List(v) => v.clone(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BudgetSpec {
    /// Defaults to 10·dim.
    #[serde(default)]
    pub doe_size: Option<usize>,
    #[serde(default = "default_surrogate_evals")]
    pub surrogate_evals: usize,
}

fn default_surrogate_evals() -> usize {
    100
}

impl Default for BudgetSpec {
    fn default() -> Self {
        BudgetSpec {
            doe_size: None,
            surrogate_evals: default_surrogate_evals(),
        }
    }
}

impl BudgetSpec {
    pub fn for_dim(&self, dim: usize) -> BudgetConfig {
        BudgetConfig {
            doe_size: self.doe_size.unwrap_or(10 * dim),
            surrogate_evals: self.surrogate_evals,
        }
    }
}

fn default_instances() -> Vec<u32> {
    (0..5).collect()
}

fn default_dims() -> Vec<usize> {
    vec![5]
}

fn default_seeds() -> Seeds {
    Seeds::Count(60)
}

fn default_schedules() -> Vec<Schedule> {
    PORTFOLIO.to_vec()
}

fn default_parallelism() -> usize {
    1
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("runs")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub functions: Vec<u8>,
    #[serde(default = "default_instances")]
    pub instances: Vec<u32>,
    #[serde(default = "default_dims")]
    pub dims: Vec<usize>,
    #[serde(default = "default_seeds")]
    pub seeds: Seeds,
    #[serde(default = "default_schedules")]
    pub schedules: Vec<Schedule>,
    #[serde(default)]
    pub budget: BudgetSpec,
    #[serde(default)]
    pub gp: GpConfig,
    #[serde(default)]
    pub af_optimizer: AfOptimizerConfig,
    /// Maximum concurrent runs; 0 uses every core.
    #[serde(default = "default_parallelism")]
    pub parallelism: usize,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    /// Reads a TOML file, then applies environment overrides.
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg = Self::from_toml_str(&text)?;
        cfg.apply_env_overrides()?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn apply_env_overrides(&mut self) -> Result<()> {
        if let Some(dir) = std::env::var_os(OUTPUT_DIR_ENV) {
            self.output_dir = PathBuf::from(dir);
        }
        if let Ok(p) = std::env::var(PARALLELISM_ENV) {
            self.parallelism = p
                .trim()
                .parse()
                .map_err(|_| Error::Config(format!("{PARALLELISM_ENV}={p} is not a count")))?;
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        let seeds = self.seeds.to_vec();
        if self.functions.is_empty()
            || self.instances.is_empty()
            || self.dims.is_empty()
            || seeds.is_empty()
            || self.schedules.is_empty()
        {
            return Err(Error::Config(
                "functions, instances, dims, seeds and schedules must be non-empty".into(),
            ));
        }
        if let Some(f) = self.functions.iter().find(|f| !(1..=NUM_FUNCTIONS).contains(*f)) {
            return Err(Error::Config(format!("function id {f} outside 1..=24")));
        }
        if self.dims.iter().any(|d| *d < 2) {
            return Err(Error::Config("dims must be at least 2".into()));
        }
        for dim in &self.dims {
            self.budget.for_dim(*dim).validate()?;
        }
        self.gp.validate()?;
        Ok(())
    }

    pub fn engine(&self) -> EngineConfig {
        EngineConfig {
            gp: self.gp.clone(),
            af_optimizer: self.af_optimizer.clone(),
        }
    }

    /// Every run key in the cross product, in deterministic order.
    pub fn matrix(&self) -> Vec<RunKey> {
        let seeds = self.seeds.to_vec();
        let mut keys = Vec::new();
        for &function_id in &self.functions {
            for &instance_id in &self.instances {
                for &dim in &self.dims {
                    for &seed in &seeds {
                        for &schedule in &self.schedules {
                            keys.push(RunKey {
                                problem: ProblemKey {
                                    function_id,
                                    instance_id,
                                    dim,
                                },
                                seed,
                                schedule,
                            });
                        }
                    }
                }
            }
        }
        keys.sort();
        keys.dedup();
        keys
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FailureRecord {
    pub key: RunKey,
    pub error: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct RunSummary {
    pub planned: usize,
    pub skipped: usize,
    pub completed: usize,
    pub failed: usize,
}

fn ensure_writable(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let probe = dir.join(".write-probe");
    fs::write(&probe, b"").map_err(|e| Error::io(&probe, e))?;
    fs::remove_file(&probe).map_err(|e| Error::io(&probe, e))
}

fn worker_files(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut out = Vec::new();
    for entry in fs::read_dir(dir).map_err(|e| Error::io(dir, e))? {
        let path = entry.map_err(|e| Error::io(dir, e))?.path();
        let name = path.file_name().and_then(|n| n.to_str()).unwrap_or("");
        if name.starts_with("records.worker-") && name.ends_with(".jsonl") {
            out.push(path);
        }
    }
    out.sort();
    Ok(out)
}

/// Parses JSON lines; a truncated final line from an interrupted writer is
/// ignored, any other malformed line is an error.
fn read_jsonl<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<Vec<T>> {
    let file = match File::open(path) {
        Ok(f) => f,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(Vec::new()),
        Err(e) => return Err(Error::io(path, e)),
    };
    let lines: Vec<String> = BufReader::new(file)
        .lines()
        .collect::<std::io::Result<_>>()
        .map_err(|e| Error::io(path, e))?;
    let mut out = Vec::with_capacity(lines.len());
    let last = lines.len().saturating_sub(1);
    for (i, line) in lines.iter().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        match serde_json::from_str(line) {
            Ok(v) => out.push(v),
            Err(e) if i == last => log::warn!("{}: ignoring truncated last line ({e})", path.display()),
            Err(e) => return Err(Error::json(format!("{} line {}", path.display(), i + 1), e)),
        }
    }
    Ok(out)
}

fn append_jsonl<T: Serialize>(path: &Path, items: &[T]) -> Result<()> {
    if items.is_empty() {
        return Ok(());
    }
    let file = OpenOptions::new()
        .create(true)
        .append(true)
        .open(path)
        .map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    for item in items {
        serde_json::to_writer(&mut w, item).map_err(|e| Error::json("record", e))?;
        w.write_all(b"\n").map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Moves records from leftover worker files into `records.jsonl`,
/// skipping keys already present.
fn merge_worker_files(dir: &Path) -> Result<()> {
    let main = dir.join(RECORDS_FILE);
    let mut known: BTreeSet<RunKey> = read_jsonl::<RunRecord>(&main)?.iter().map(RunRecord::key).collect();
    let mut fresh: Vec<RunRecord> = Vec::new();
    let files = worker_files(dir)?;
    for path in &files {
        for r in read_jsonl::<RunRecord>(path)? {
            if known.insert(r.key()) {
                fresh.push(r);
            }
        }
    }
    fresh.sort_by_key(RunRecord::key);
    append_jsonl(&main, &fresh)?;
    for path in files {
        fs::remove_file(&path).map_err(|e| Error::io(&path, e))?;
    }
    Ok(())
}

/// All records in a run directory, including unmerged worker output.
pub fn load_records(dir: &Path) -> Result<Vec<RunRecord>> {
    let mut records = read_jsonl::<RunRecord>(&dir.join(RECORDS_FILE))?;
    let mut known: BTreeSet<RunKey> = records.iter().map(RunRecord::key).collect();
    for path in worker_files(dir)? {
        for r in read_jsonl::<RunRecord>(&path)? {
            if known.insert(r.key()) {
                records.push(r);
            }
        }
    }
    records.sort_by_key(RunRecord::key);
    Ok(records)
}

/// Runs one BO run and attaches the design's features.
pub fn execute(key: RunKey, budget: BudgetSpec, engine: &EngineConfig) -> Result<RunRecord> {
    let problem = Problem::instantiate(key.problem.function_id, key.problem.instance_id, key.problem.dim)?;
    let mut record = run(&problem, key.schedule, budget.for_dim(key.problem.dim), key.seed, engine)?;
    record.features = Some(feature_vector(&record.design));
    Ok(record)
}

/// Executes every run of the matrix not already recorded in the output
/// directory.
pub fn run_experiments(cfg: &ExperimentConfig) -> Result<RunSummary> {
    cfg.validate()?;
    let dir = &cfg.output_dir;
    ensure_writable(dir)?;
    merge_worker_files(dir)?;

    let done: BTreeSet<RunKey> = read_jsonl::<RunRecord>(&dir.join(RECORDS_FILE))?
        .iter()
        .map(RunRecord::key)
        .collect();
    let matrix = cfg.matrix();
    let todo: Vec<RunKey> = matrix.iter().filter(|k| !done.contains(k)).copied().collect();
    let mut summary = RunSummary {
        planned: matrix.len(),
        skipped: matrix.len() - todo.len(),
        ..Default::default()
    };
    log::info!("{} runs planned, {} already recorded", summary.planned, summary.skipped);
    if todo.is_empty() {
        return Ok(summary);
    }

    let threads = if cfg.parallelism == 0 {
        rayon::current_num_threads()
    } else {
        cfg.parallelism
    };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))?;

    let writers: Vec<Mutex<Option<BufWriter<File>>>> = (0..threads).map(|_| Mutex::new(None)).collect();
    let engine = cfg.engine();
    let outcomes: Vec<std::result::Result<RunKey, FailureRecord>> = pool.install(|| {
        use rayon::prelude::*;
        todo.par_iter()
            .map(|&key| {
                let record = execute(key, cfg.budget, &engine).map_err(|e| FailureRecord {
                    key,
                    error: e.to_string(),
                })?;
                let worker = rayon::current_thread_index().unwrap_or(0);
                let path = dir.join(format!("records.worker-{worker}.jsonl"));
                let write = || -> Result<()> {
                    let mut slot = writers[worker].lock().expect("writer lock");
                    if slot.is_none() {
                        let f = OpenOptions::new()
                            .create(true)
                            .append(true)
                            .open(&path)
                            .map_err(|e| Error::io(&path, e))?;
                        *slot = Some(BufWriter::new(f));
                    }
                    let w = slot.as_mut().expect("writer opened");
                    serde_json::to_writer(&mut *w, &record).map_err(|e| Error::json("record", e))?;
                    w.write_all(b"\n").map_err(|e| Error::io(&path, e))?;
                    w.flush().map_err(|e| Error::io(&path, e))
                };
                write().map_err(|e| FailureRecord {
                    key,
                    error: e.to_string(),
                })?;
                log::debug!("finished {key:?}");
                Ok(key)
            })
            .collect()
    });
    drop(writers);

    let failures: Vec<FailureRecord> = outcomes.into_iter().filter_map(|o| o.err()).collect();
    for f in &failures {
        log::error!("run {:?} failed: {}", f.key, f.error);
    }
    summary.failed = failures.len();
    summary.completed = todo.len() - failures.len();
    append_jsonl(&dir.join(FAILURES_FILE), &failures)?;
    merge_worker_files(dir)?;
    Ok(summary)
}

/// One CSV row per record: key columns, schedule and the 38 features.
pub fn write_features_csv(records: &[RunRecord], path: &Path) -> Result<()> {
    let err = |source| Error::Csv {
        path: path.to_path_buf(),
        source,
    };
    let mut w = csv::Writer::from_path(path).map_err(err)?;
    let mut header: Vec<&str> = vec!["function_id", "instance_id", "dim", "seed", "schedule_id"];
    header.extend(FEATURE_NAMES);
    w.write_record(&header).map_err(err)?;
    for r in records {
        let features = r.features.clone().unwrap_or_else(|| feature_vector(&r.design));
        let mut row = vec![
            r.function_id.to_string(),
            r.instance_id.to_string(),
            r.dim.to_string(),
            r.seed.to_string(),
            r.schedule.id().to_string(),
        ];
        row.extend(
            features
                .values
                .iter()
                .map(|v| if v.is_nan() { String::new() } else { v.to_string() }),
        );
        w.write_record(&row).map_err(err)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub split_seed: u64,
    pub forest_seed: u64,
    pub forest: ForestConfig,
    pub ci: CiMethod,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            split_seed: 0,
            forest_seed: 0,
            forest: ForestConfig::default(),
            ci: CiMethod::Normal,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub schema_version: u32,
    pub train_rows: usize,
    pub test_rows: usize,
    pub dropped_rows: usize,
    pub mean_ranks: MeanRanks,
    /// Mean normalized final log-regret per schedule on test rows.
    pub mean_normalized: Vec<f64>,
    pub afs_mean_normalized: f64,
    pub vbs_mean_normalized: f64,
    /// How often the AFS picked each schedule.
    pub afs_choices: BTreeMap<Schedule, usize>,
}

impl Report {
    pub fn best_schedule_rank(&self) -> (Schedule, f64) {
        self.mean_ranks.best_schedule()
    }
}

/// Builds the dataset, trains the forest and writes all report files.
pub fn pipeline(runs_dir: &Path, out_dir: &Path, cfg: &PipelineConfig) -> Result<Report> {
    let records = load_records(runs_dir)?;
    let ds = build_dataset(&records, cfg.split_seed)?;
    let forest = train_forest(&ds, cfg.forest, cfg.forest_seed)?;
    ensure_writable(out_dir)?;
    forest.save(&out_dir.join("model.json"))?;
    analyze(&records, &ds, &forest, out_dir, cfg.ci)
}

/// Evaluates a trained forest on the test rows of `ds` and writes
/// final_regret.csv, ranks.csv, convergence.csv and summary.json.
pub fn analyze(
    records: &[RunRecord],
    ds: &Dataset,
    forest: &Forest,
    out_dir: &Path,
    ci: CiMethod,
) -> Result<Report> {
    ensure_writable(out_dir)?;
    let mut choices: BTreeMap<RowKey, Schedule> = BTreeMap::new();
    for row in ds.test_rows() {
        choices.insert(row.key, select(forest, &row.features)?.0);
    }
    let mut table = ds.table.clone();
    table.rows.retain(|r| choices.contains_key(&r.key));
    table.set_afs(|k| choices.get(k).copied());
    if table.rows.is_empty() {
        return Err(Error::InsufficientData("no test rows to evaluate".into()));
    }

    let ranks = RankTable::from_performance(&table)?;
    write_final_regret_csv(&table, &out_dir.join("final_regret.csv"))?;
    write_ranks_csv(&ranks, &out_dir.join("ranks.csv"))?;

    let vbs: BTreeMap<RowKey, Schedule> = table.rows.iter().map(|r| (r.key, r.vbs)).collect();
    let mut trajectories = Vec::new();
    for r in records {
        let key = RowKey {
            function_id: r.function_id,
            instance_id: r.instance_id,
            dim: r.dim,
            seed: r.seed,
        };
        let Some(choice) = choices.get(&key) else { continue };
        let lr = r.log_regrets();
        let mut push = |series: &str| {
            trajectories.push(Trajectory {
                function_id: r.function_id,
                dim: r.dim,
                series: series.to_string(),
                log_regrets: lr.clone(),
            })
        };
        push(r.schedule.id());
        if *choice == r.schedule {
            push("afs");
        }
        if vbs[&key] == r.schedule {
            push("vbs");
        }
    }
    write_convergence_csv(&convergence_summary(&trajectories, ci), &out_dir.join("convergence.csv"))?;

    let n = table.rows.len() as f64;
    let mut mean_normalized = vec![0.0; PORTFOLIO.len()];
    let mut afs_choices: BTreeMap<Schedule, usize> = BTreeMap::new();
    for r in &table.rows {
        for (m, v) in mean_normalized.iter_mut().zip(&r.normalized) {
            *m += v / n;
        }
        if let Some(a) = r.afs {
            *afs_choices.entry(a).or_default() += 1;
        }
    }
    let report = Report {
        schema_version: 1,
        train_rows: ds.rows.iter().filter(|r| r.split == Split::Train).count(),
        test_rows: table.rows.len(),
        dropped_rows: ds.dropped.len(),
        mean_ranks: ranks.mean_ranks(),
        mean_normalized,
        afs_mean_normalized: table.rows.iter().filter_map(|r| r.afs_value()).sum::<f64>() / n,
        vbs_mean_normalized: table.rows.iter().map(|r| r.vbs_value()).sum::<f64>() / n,
        afs_choices,
    };
    let path = out_dir.join("summary.json");
    let text = serde_json::to_string_pretty(&report).map_err(|e| Error::json("summary", e))?;
    fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
    Ok(report)
}
