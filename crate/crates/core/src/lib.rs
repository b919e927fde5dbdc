//! Bayesian optimization with acquisition-function schedules on the
//! noiseless BBOB suite, landscape features of the initial design, and a
//! random-forest selector that picks a schedule per run.
//!
//! Randomness is drawn from keyed streams ([`rng::StreamKey`]), so every
//! run, design, split and forest is reproducible from its key alone.

pub mod acquisition;
pub mod analytics;
pub mod bbob;
pub mod doe;
pub mod ela;
pub mod engine;
pub mod error;
pub mod gp;
pub mod harness;
pub mod rng;
pub mod schedule;
pub mod selector;

pub use acquisition::AfKind;
pub use analytics::{PerformanceTable, RankTable, RowKey};
pub use bbob::{Problem, ProblemKey};
pub use doe::Design;
pub use ela::{feature_vector, FeatureVector, FEATURE_NAMES, NUM_FEATURES};
pub use engine::{BudgetConfig, EngineConfig, RunKey, RunRecord};
pub use error::{Error, Result};
pub use gp::{GpConfig, GpModel};
pub use harness::{ExperimentConfig, PipelineConfig, Report};
pub use schedule::{Schedule, PORTFOLIO};
pub use selector::{Dataset, Forest, ForestConfig};
