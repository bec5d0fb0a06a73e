//! Experiment configuration: TOML file, CLI overrides, validation, and the
//! provenance hash that ties artifacts to the settings that produced them.

use std::fmt;
use std::path::{Path, PathBuf};

use physics2d::EngineConfig;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;
use walker::{GaConfig, PoetConfig, RriSchedule};

/// Which curriculum drives the run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Condition {
    /// Flat terrain for the whole run.
    Static,
    /// Round-robin rotation over five environment slots with fitness-gated
    /// escalation.
    Rri,
    /// Open-ended co-evolution of environments and populations.
    Poet,
}

impl Condition {
    pub fn name(self) -> &'static str {
        match self {
            Condition::Static => "static",
            Condition::Rri => "rri",
            Condition::Poet => "poet",
        }
    }
}

impl fmt::Display for Condition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Everything a run needs, serialized verbatim into its output artifacts.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentConfig {
    pub condition: Condition,
    pub master_seed: u64,
    /// Total evaluations the run may charge.
    pub evaluation_budget: u64,
    /// Evaluation worker threads. Results are identical for any count.
    pub worker_count: usize,
    /// Generations between checkpoint snapshots.
    pub checkpoint_every: u64,
    /// Run output directory; set from the command line, not the file.
    pub out_dir: PathBuf,
    pub ga: GaConfig,
    pub poet: PoetConfig,
    /// Initial round-robin schedule (ignored by the other conditions).
    pub rri: RriSchedule,
    pub engine: EngineConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            condition: Condition::Static,
            master_seed: 0,
            evaluation_budget: 384_000,
            worker_count: 1,
            checkpoint_every: 25,
            out_dir: PathBuf::new(),
            ga: GaConfig::default(),
            poet: PoetConfig::default(),
            rri: RriSchedule::default(),
            engine: EngineConfig::default(),
        }
    }
}

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("failed to read config file {path}: {source}")]
    Read {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("failed to parse config file {path}: {source}")]
    Parse {
        path: PathBuf,
        source: toml::de::Error,
    },
    #[error("invalid config: {0}")]
    Invalid(String),
}

impl ExperimentConfig {
    /// Loads a TOML file over the defaults. Missing keys keep their default
    /// values, so files only need to state what they change.
    pub fn from_file(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Read {
            path: path.to_path_buf(),
            source,
        })?;
        toml::from_str(&text).map_err(|source| ConfigError::Parse {
            path: path.to_path_buf(),
            source,
        })
    }

    /// Rejects configurations no run should start from. Called before any
    /// evaluation is charged.
    pub fn validate(&self) -> Result<(), ConfigError> {
        fn fail(msg: impl Into<String>) -> Result<(), ConfigError> {
            Err(ConfigError::Invalid(msg.into()))
        }
        if self.evaluation_budget == 0 {
            return fail("evaluation_budget must be positive");
        }
        if self.worker_count == 0 {
            return fail("worker_count must be at least 1");
        }
        if self.checkpoint_every == 0 {
            return fail("checkpoint_every must be at least 1");
        }
        if self.ga.population_size == 0 || self.ga.population_size % 2 != 0 {
            return fail("ga.population_size must be positive and even");
        }
        if self.ga.tournament_size == 0 {
            return fail("ga.tournament_size must be at least 1");
        }
        if !(0.0..=1.0).contains(&self.ga.crossover_rate) {
            return fail("ga.crossover_rate must lie in [0, 1]");
        }
        let m = &self.ga.mutation;
        for (name, rate) in [
            ("replacement_rate", m.replacement_rate),
            ("modification_rate", m.modification_rate),
        ] {
            if !(0.0..=1.0).contains(&rate) {
                return fail(format!("ga.mutation.{name} must lie in [0, 1]"));
            }
        }
        if !(m.weight_offset >= 0.0) || !(m.morph_offset_fraction >= 0.0) {
            return fail("ga.mutation offsets must be non-negative");
        }
        if self.poet.pair_capacity == 0 {
            return fail("poet.pair_capacity must be at least 1");
        }
        if self.poet.transfer_every == 0 || self.poet.create_every == 0 {
            return fail("poet cadences must be at least 1");
        }
        let (lo, hi) = self.poet.difficulty_range;
        if !(lo.is_finite() && hi.is_finite() && lo <= hi) {
            return fail("poet.difficulty_range must be a finite, ordered interval");
        }
        for (i, env) in self.rri.envs.iter().enumerate() {
            if let Err(e) = env.validate() {
                return fail(format!("rri.envs[{i}]: {e}"));
            }
        }
        Ok(())
    }

    /// Hash of the physics and operator settings. Artifacts carry it so
    /// analysis can refuse to pool runs produced under different rules;
    /// seed, budget, worker count, and paths deliberately stay out of it.
    pub fn config_hash(&self) -> String {
        #[derive(Serialize)]
        struct Hashed<'a> {
            ga: &'a GaConfig,
            poet: &'a PoetConfig,
            rri: &'a RriSchedule,
            engine: &'a EngineConfig,
        }
        let canonical = serde_json::to_vec(&Hashed {
            ga: &self.ga,
            poet: &self.poet,
            rri: &self.rri,
            engine: &self.engine,
        })
        .expect("config serialization is infallible");
        let digest = Sha256::digest(&canonical);
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }
}
