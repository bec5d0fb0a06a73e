//! Deterministic episode replay: one JSON line per simulation step, then a
//! summary line, written to stdout. Replaying the same genotype on the same
//! course always prints the same bytes.

use std::io::{self, Write};
use std::path::Path;

use serde::Serialize;
use thiserror::Error;
use walker::{run_episode_traced, EnvParams, Genotype, StepTrace, Termination};

#[derive(Debug, Error)]
pub enum ReplayError {
    #[error("failed to read genotype file {path}: {source}")]
    Read {
        path: String,
        source: io::Error,
    },
    #[error("invalid genotype: {0}")]
    Genotype(String),
    #[error("invalid environment vector: {0}")]
    Env(String),
    #[error("i/o failure: {0}")]
    Io(#[from] io::Error),
}

#[derive(Serialize)]
#[serde(tag = "record", rename_all = "snake_case")]
enum ReplayLine<'a> {
    Step(&'a StepTrace),
    Summary {
        steps: u32,
        total_reward: f64,
        termination: Termination,
        start_x: f64,
        final_x: f64,
        displacement: f64,
    },
}

/// Replays one episode and streams it to `out`. Returns the episode's
/// total reward.
pub fn replay_to(
    out: &mut dyn Write,
    genotype_path: &Path,
    env: [f64; 8],
    seed: u64,
) -> Result<f64, ReplayError> {
    let bytes = std::fs::read(genotype_path).map_err(|source| ReplayError::Read {
        path: genotype_path.display().to_string(),
        source,
    })?;
    let genotype =
        Genotype::from_bytes(&bytes).map_err(|e| ReplayError::Genotype(e.to_string()))?;
    let env = EnvParams::decode(&env).map_err(|e| ReplayError::Env(e.to_string()))?;

    let mut trace = Vec::new();
    let result = run_episode_traced(&genotype, &env, seed, &mut trace)
        .map_err(|e| ReplayError::Genotype(e.to_string()))?;

    let mut out = io::BufWriter::new(out);
    for step in &trace {
        serde_json::to_writer(&mut out, &ReplayLine::Step(step)).map_err(io::Error::other)?;
        out.write_all(b"\n")?;
    }
    serde_json::to_writer(
        &mut out,
        &ReplayLine::Summary {
            steps: result.steps,
            total_reward: result.total_reward,
            termination: result.termination,
            start_x: result.start_x,
            final_x: result.final_x,
            displacement: result.displacement(),
        },
    )
    .map_err(io::Error::other)?;
    out.write_all(b"\n")?;
    out.flush()?;
    Ok(result.total_reward)
}
