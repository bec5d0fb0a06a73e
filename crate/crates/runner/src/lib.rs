//! Experiment orchestration for the walker co-evolution lab: run
//! configuration, the generation-by-generation run engine, append-only run
//! logs, resumable checkpoints, worker pools, post-hoc analysis suites, and
//! episode replay. The `walker-lab` binary is a thin CLI over this crate.

pub mod analyze;
pub mod checkpoint;
pub mod config;
pub mod experiment;
pub mod replay;
pub mod runlog;
pub mod svg;
pub mod workers;

pub use analyze::{analyze, AnalyzeError, Suite};
pub use checkpoint::{
    load_checkpoint, save_checkpoint, Checkpoint, CheckpointError, ConditionState,
    CHECKPOINT_FILE,
};
pub use config::{Condition, ConfigError, ExperimentConfig};
pub use experiment::{
    read_meta, resume_experiment, run_experiment, RunError, RunMeta, RunSummary,
    BEST_GENOTYPE_FILE, CONFIG_FILE, META_FILE,
};
pub use replay::{replay_to, ReplayError};
pub use runlog::{read_log, GenerationRecord, LogRecord, PairRecord, RunLogWriter, RUN_LOG_FILE};
pub use workers::PoolEvaluator;
