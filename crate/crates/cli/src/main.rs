use std::fs;
use std::io::{ErrorKind, Write};
use std::path::{Path, PathBuf};

use afs_core::analytics::CiMethod;
use afs_core::bbob::suite;
use afs_core::harness::{self, ExperimentConfig, PipelineConfig};
use afs_core::selector::{self, Dataset, Forest, ForestConfig};
use afs_core::{feature_vector, Design, RunRecord};
use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};

#[derive(Parser)]
#[command(name = "afs", version, about = "Acquisition-function schedule selection for Bayesian optimization")]
struct Cli {
    /// Log more (repeatable).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Benchmark suite information.
    Suite {
        #[command(subcommand)]
        action: SuiteAction,
    },
    /// Execute (or resume) the experiment matrix of a TOML config.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Overrides the config's output_dir.
        #[arg(long, env = "AFS_OUTPUT_DIR")]
        output_dir: Option<PathBuf>,
        /// Overrides the config's parallelism.
        #[arg(long, env = "AFS_PARALLELISM")]
        parallelism: Option<usize>,
    },
    /// Write one CSV row of landscape features per run record.
    Features {
        #[arg(long)]
        runs: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Build the normalized, split training dataset from run records.
    Dataset {
        #[arg(long)]
        runs: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 0)]
        split_seed: u64,
    },
    /// Train the selector forest on a dataset's training rows.
    Train {
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 100)]
        trees: usize,
    },
    /// Pick a schedule for an evaluated initial design.
    Select {
        #[arg(long)]
        model: PathBuf,
        /// JSON design ({"points": [...], "values": [...]}) or run record.
        #[arg(long)]
        design: PathBuf,
    },
    /// Evaluate a trained model on the test rows and write the report tables.
    Analyze {
        #[arg(long)]
        runs: PathBuf,
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Bootstrap resamples for confidence intervals (normal approximation if absent).
        #[arg(long)]
        bootstrap: Option<usize>,
    },
    /// Dataset, training and analysis in one step.
    Pipeline {
        #[arg(long)]
        runs: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 0)]
        split_seed: u64,
        #[arg(long, default_value_t = 0)]
        forest_seed: u64,
        #[arg(long)]
        bootstrap: Option<usize>,
    },
}

#[derive(Subcommand)]
enum SuiteAction {
    /// List the 24 functions.
    List,
}

fn ci_method(bootstrap: Option<usize>, seed: u64) -> CiMethod {
    match bootstrap {
        Some(resamples) => CiMethod::Bootstrap { resamples, seed },
        None => CiMethod::Normal,
    }
}

fn read_design(path: &Path) -> Result<Design> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let design = match serde_json::from_str::<Design>(&text) {
        Ok(d) => d,
        Err(_) => {
            let record: RunRecord = serde_json::from_str(&text)
                .with_context(|| format!("{} is neither a design nor a run record", path.display()))?;
            record.design
        }
    };
    Ok(Design::new(design.points, design.values)?)
}

/// Writes to stdout, treating a closed pipe (`afs ... | head`) as success.
fn write_stdout(text: &str) -> Result<()> {
    let mut out = std::io::stdout().lock();
    match out.write_all(text.as_bytes()).and_then(|_| out.flush()) {
        Err(e) if e.kind() != ErrorKind::BrokenPipe => Err(e.into()),
        _ => Ok(()),
    }
}

fn print_json<T: serde::Serialize>(value: &T) -> Result<()> {
    write_stdout(&(serde_json::to_string_pretty(value)? + "\n"))
}

fn main() -> Result<()> {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();

    match cli.command {
        Command::Suite { action: SuiteAction::List } => {
            let mut text = format!("{:>3}  {:<36} {:<34} modality\n", "id", "name", "group");
            for f in suite() {
                text += &format!("{:>3}  {:<36} {:<34} {}\n", f.id, f.name, f.group, f.modality.as_str());
            }
            write_stdout(&text)?;
        }
        Command::Run {
            config,
            output_dir,
            parallelism,
        } => {
            let mut cfg = ExperimentConfig::load(&config)?;
            if let Some(dir) = output_dir {
                cfg.output_dir = dir;
            }
            if let Some(p) = parallelism {
                cfg.parallelism = p;
            }
            let summary = harness::run_experiments(&cfg)?;
            print_json(&summary)?;
            if summary.failed > 0 {
                bail!(
                    "{} runs failed; see {}",
                    summary.failed,
                    cfg.output_dir.join(harness::FAILURES_FILE).display()
                );
            }
        }
        Command::Features { runs, out } => {
            let records = harness::load_records(&runs)?;
            if records.is_empty() {
                bail!("no run records in {}", runs.display());
            }
            harness::write_features_csv(&records, &out)?;
            eprintln!("wrote {} rows to {}", records.len(), out.display());
        }
        Command::Dataset { runs, out, split_seed } => {
            let records = harness::load_records(&runs)?;
            let ds = selector::build_dataset(&records, split_seed)?;
            ds.save(&out)?;
            eprintln!(
                "wrote {} rows ({} train, {} dropped) to {}",
                ds.rows.len(),
                ds.train_rows().count(),
                ds.dropped.len(),
                out.display()
            );
        }
        Command::Train {
            dataset,
            seed,
            out,
            trees,
        } => {
            let ds = Dataset::load(&dataset)?;
            let config = ForestConfig {
                trees,
                ..ForestConfig::default()
            };
            let forest = selector::train_forest(&ds, config, seed)?;
            forest.save(&out)?;
            eprintln!("trained {trees} trees on {} rows", ds.train_rows().count());
        }
        Command::Select { model, design } => {
            let forest = Forest::load(&model)?;
            let design = read_design(&design)?;
            let (choice, predictions) = selector::select(&forest, &feature_vector(&design))?;
            let predicted: serde_json::Map<String, serde_json::Value> = forest
                .target_order
                .iter()
                .zip(&predictions)
                .map(|(s, v)| (s.id().to_string(), serde_json::json!(v)))
                .collect();
            print_json(&serde_json::json!({
                "schema_version": 1,
                "schedule_id": choice.id(),
                "predictions": predicted,
            }))?;
        }
        Command::Analyze {
            runs,
            model,
            out,
            bootstrap,
        } => {
            let forest = Forest::load(&model)?;
            let split_seed = forest.split_seed.unwrap_or(0);
            let records = harness::load_records(&runs)?;
            let ds = selector::build_dataset(&records, split_seed)?;
            let report = harness::analyze(&records, &ds, &forest, &out, ci_method(bootstrap, split_seed))?;
            print_json(&report)?;
        }
        Command::Pipeline {
            runs,
            out,
            split_seed,
            forest_seed,
            bootstrap,
        } => {
            let cfg = PipelineConfig {
                split_seed,
                forest_seed,
                forest: ForestConfig::default(),
                ci: ci_method(bootstrap, split_seed),
            };
            let report = harness::pipeline(&runs, &out, &cfg)?;
            print_json(&report)?;
        }
    }
    Ok(())
}
