//! Binary checkpoints with a versioned header and a human-readable JSON
//! sidecar. A checkpoint captures everything needed to continue a run so
//! that the continuation is indistinguishable from never having stopped.

use std::fs::File;
use std::io::{self, Read, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;
use walker::poet::PoetState;
use walker::{EvalLedger, Genotype, RriSchedule};

use crate::config::ExperimentConfig;

/// File identifier; changing the layout bumps the trailing digit.
pub const CHECKPOINT_MAGIC: [u8; 8] = *b"WLKCKPT1";
/// Payload schema version.
pub const CHECKPOINT_VERSION: u32 = 1;
/// Name of the checkpoint inside a run directory.
pub const CHECKPOINT_FILE: &str = "checkpoint.bin";

/// Condition-specific evolutionary state.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub enum ConditionState {
    Static {
        population: Vec<Genotype>,
    },
    Rri {
        population: Vec<Genotype>,
        schedule: RriSchedule,
    },
    Poet(PoetState),
}

/// A resumable snapshot of a run between generations.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Checkpoint {
    pub config: ExperimentConfig,
    pub state: ConditionState,
    pub ledger: EvalLedger,
    /// Next generation to run.
    pub generation: u64,
    /// Run-log lines covered by this snapshot; later lines are stale.
    pub log_lines: u64,
}

#[derive(Debug, Error)]
pub enum CheckpointError {
    #[error("checkpoint i/o failed: {0}")]
    Io(#[from] io::Error),
    #[error("not a checkpoint file (bad magic)")]
    BadMagic,
    #[error("unsupported checkpoint version {0}")]
    UnsupportedVersion(u32),
    #[error("corrupt checkpoint payload: {0}")]
    Corrupt(#[from] bincode::Error),
}

/// Writes `MAGIC ++ version ++ bincode(checkpoint)` atomically (temp file
/// then rename) plus a small JSON sidecar for humans, at
/// `<path>` and `<path with .json extension>`.
pub fn save_checkpoint(path: &Path, ck: &Checkpoint) -> Result<(), CheckpointError> {
    let tmp = tmp_path(path);
    {
        let mut f = File::create(&tmp)?;
        f.write_all(&CHECKPOINT_MAGIC)?;
        f.write_all(&CHECKPOINT_VERSION.to_le_bytes())?;
        bincode::serialize_into(&mut f, ck)?;
        f.sync_all()?;
    }
    std::fs::rename(&tmp, path)?;

    let sidecar = Sidecar {
        version: CHECKPOINT_VERSION,
        condition: ck.config.condition.name().to_string(),
        master_seed: ck.config.master_seed,
        config_hash: ck.config.config_hash(),
        generation: ck.generation,
        evaluations: ck.ledger.used(),
        evaluation_budget: ck.config.evaluation_budget,
        log_lines: ck.log_lines,
    };
    let json = serde_json::to_vec_pretty(&sidecar).expect("sidecar serialization is infallible");
    std::fs::write(path.with_extension("json"), json)?;
    Ok(())
}

/// Reads a checkpoint back, verifying magic and version first.
pub fn load_checkpoint(path: &Path) -> Result<Checkpoint, CheckpointError> {
    let mut f = File::open(path)?;
    let mut magic = [0u8; 8];
    f.read_exact(&mut magic)?;
    if magic != CHECKPOINT_MAGIC {
        return Err(CheckpointError::BadMagic);
    }
    let mut version = [0u8; 4];
    f.read_exact(&mut version)?;
    let version = u32::from_le_bytes(version);
    if version != CHECKPOINT_VERSION {
        return Err(CheckpointError::UnsupportedVersion(version));
    }
    Ok(bincode::deserialize_from(&mut f)?)
}

#[derive(Serialize, Deserialize)]
struct Sidecar {
    version: u32,
    condition: String,
    master_seed: u64,
    config_hash: String,
    generation: u64,
    evaluations: u64,
    evaluation_budget: u64,
    log_lines: u64,
}

fn tmp_path(path: &Path) -> PathBuf {
    let mut name = path.file_name().unwrap_or_default().to_os_string();
    name.push(".tmp");
    path.with_file_name(name)
}
