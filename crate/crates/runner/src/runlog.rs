//! The append-only run log: one JSON record per line, no timestamps, no
//! host-dependent fields. Two runs with the same config and seed produce
//! byte-identical logs regardless of worker count, and a resumed run
//! extends its log exactly as the uninterrupted run would have.

use std::fs::{File, OpenOptions};
use std::io::{self, BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use walker::poet::PoetEvent;

use crate::config::Condition;

/// Name of the log file inside a run directory.
pub const RUN_LOG_FILE: &str = "runlog.jsonl";

/// One line of the run log.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "record", rename_all = "snake_case")]
pub enum LogRecord {
    /// End-of-generation summary across all live pairs.
    Generation(GenerationRecord),
    /// An outer-loop event: transfer, admission, or eviction.
    Poet { event: PoetEvent },
    /// A round-robin slot escalated after clearing its fitness gate.
    Escalation {
        generation: u64,
        slot: usize,
        env: [f64; 8],
    },
}

/// Summary of one committed generation.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GenerationRecord {
    pub condition: Condition,
    pub generation: u64,
    /// Total evaluations charged once this generation committed.
    pub evaluations: u64,
    /// Live pairs after the generation, in pair order.
    pub pairs: Vec<PairRecord>,
}

/// End-of-generation state of one environment/population pair.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PairRecord {
    pub pair_id: u64,
    /// Generation at which the pair was created.
    pub created_at: u64,
    /// Marks the pair whose lineage stayed closest to flat ground; the
    /// single pair under the static and round-robin conditions.
    pub flat_lineage: bool,
    pub env: [f64; 8],
    /// Best and mean stored fitness over the population.
    pub best: f64,
    pub mean: f64,
    /// Mean pairwise morphology distance over the population.
    pub diversity: f64,
    /// One `(total leg length, total leg width, fitness)` triple per
    /// individual, for feature-map and coverage analysis.
    pub points: Vec<(f64, f64, f64)>,
}

/// Appends records as single JSON lines and tracks how many were written.
pub struct RunLogWriter {
    out: BufWriter<File>,
    lines: u64,
}

impl RunLogWriter {
    /// Creates (or truncates) the log file.
    pub fn create(path: &Path) -> io::Result<Self> {
        let file = File::create(path)?;
        Ok(Self {
            out: BufWriter::new(file),
            lines: 0,
        })
    }

    /// Reopens an existing log for appending after discarding every line
    /// past `keep_lines`. Used on resume: records written after the
    /// checkpoint was taken are regenerated, not trusted.
    pub fn resume(path: &Path, keep_lines: u64) -> io::Result<Self> {
        let bytes = std::fs::read(path)?;
        let mut kept = 0u64;
        let mut cut = 0usize;
        for (i, b) in bytes.iter().enumerate() {
            if *b == b'\n' {
                kept += 1;
                if kept == keep_lines {
                    cut = i + 1;
                    break;
                }
            }
        }
        if kept < keep_lines {
            return Err(io::Error::new(
                io::ErrorKind::InvalidData,
                format!("log has {kept} lines, checkpoint expects {keep_lines}"),
            ));
        }
        let file = OpenOptions::new().write(true).append(true).open(path)?;
        file.set_len(cut as u64)?;
        Ok(Self {
            out: BufWriter::new(file),
            lines: keep_lines,
        })
    }

    pub fn write(&mut self, record: &LogRecord) -> io::Result<()> {
        serde_json::to_writer(&mut self.out, record)?;
        self.out.write_all(b"\n")?;
        self.lines += 1;
        Ok(())
    }

    /// Lines written so far, counting any kept on resume.
    pub fn lines(&self) -> u64 {
        self.lines
    }

    pub fn flush(&mut self) -> io::Result<()> {
        self.out.flush()
    }
}

/// Reads a whole log back. Fails on any malformed line.
pub fn read_log(path: &Path) -> io::Result<Vec<LogRecord>> {
    let file = File::open(path)?;
    let mut records = Vec::new();
    for line in BufReader::new(file).lines() {
        let line = line?;
        if line.is_empty() {
            continue;
        }
        let record = serde_json::from_str(&line)
            .map_err(|e| io::Error::new(io::ErrorKind::InvalidData, e))?;
        records.push(record);
    }
    Ok(records)
}
