//! The run engine: a single coordinator drives one condition from founding
//! to budget exhaustion, logging every generation and event, checkpointing
//! on a fixed cadence, and committing each generation transactionally so a
//! run always stops exactly at the last generation it could afford.

use std::io;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;
use walker::analysis::{feature_projection, population_diversity};
use walker::eval::EvalLedger;
use walker::ga::{evaluate_founding, ga_generation};
use walker::poet::{founding_population, poet_generation, Pair, PoetState};
use walker::{static_env, EnvParams, Genotype};

use crate::checkpoint::{
    load_checkpoint, save_checkpoint, Checkpoint, CheckpointError, ConditionState, CHECKPOINT_FILE,
};
use crate::config::{Condition, ConfigError, ExperimentConfig};
use crate::runlog::{GenerationRecord, LogRecord, PairRecord, RunLogWriter, RUN_LOG_FILE};
use crate::workers::{PoolError, PoolEvaluator};

/// Name of the run metadata file inside a run directory.
pub const META_FILE: &str = "meta.json";
/// Copy of the effective config inside a run directory.
pub const CONFIG_FILE: &str = "config.toml";
/// Serialized best genotype inside a run directory.
pub const BEST_GENOTYPE_FILE: &str = "best.genotype";

#[derive(Debug, Error)]
pub enum RunError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("i/o failure: {0}")]
    Io(#[from] io::Error),
    #[error(transparent)]
    Checkpoint(#[from] CheckpointError),
    #[error(transparent)]
    Pool(#[from] PoolError),
}

/// Run-level metadata, written when a run starts and finalized when it
/// stops. Carries the full config so artifacts are self-describing.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunMeta {
    pub schema_version: u32,
    pub condition: Condition,
    pub master_seed: u64,
    pub evaluation_budget: u64,
    pub config_hash: String,
    /// Generations committed so far.
    pub generations: u64,
    /// Evaluations charged so far.
    pub evaluations: u64,
    /// True once the remaining budget cannot afford another generation.
    pub finished: bool,
    pub best: Option<BestInfo>,
    pub config: ExperimentConfig,
}

/// Where the best stored fitness lives.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BestInfo {
    pub pair_id: u64,
    pub fitness: f64,
    /// Environment the fitness was measured on.
    pub env: [f64; 8],
}

/// What a finished (or budget-stopped) drive reports back.
#[derive(Debug, Clone)]
pub struct RunSummary {
    pub out_dir: PathBuf,
    pub condition: Condition,
    pub generations: u64,
    pub evaluations: u64,
    pub best_fitness: Option<f64>,
    pub config_hash: String,
}

/// Starts a fresh run in `config.out_dir`.
pub fn run_experiment(config: ExperimentConfig) -> Result<RunSummary, RunError> {
    config.validate()?;
    if config.out_dir.as_os_str().is_empty() {
        return Err(ConfigError::Invalid("output directory must be set".into()).into());
    }
    std::fs::create_dir_all(&config.out_dir)?;
    write_artifacts(&config, 0, 0, false, None)?;

    let state = founding_state(&config);
    let ledger = EvalLedger::new(config.evaluation_budget);
    let log = RunLogWriter::create(&config.out_dir.join(RUN_LOG_FILE))?;
    drive(config, state, ledger, 0, log)
}

/// Continues a checkpointed run. The run directory is the checkpoint's
/// directory; the log is truncated to the lines the snapshot covers, so the
/// continuation extends it exactly as an uninterrupted run would have. A
/// raised `evaluation_budget` in the stored config extends the run; if the
/// budget cannot afford another generation the resume is a no-op.
pub fn resume_experiment(checkpoint_path: &Path) -> Result<RunSummary, RunError> {
    let ck = load_checkpoint(checkpoint_path)?;
    let mut config = ck.config;
    config.out_dir = match checkpoint_path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p.to_path_buf(),
        _ => PathBuf::from("."),
    };
    config.validate()?;

    // Carry the spend over to the (possibly altered) budget.
    let limit = config.evaluation_budget.max(ck.ledger.used());
    let ledger = EvalLedger::with_used(limit, ck.ledger.used());
    let log = RunLogWriter::resume(&config.out_dir.join(RUN_LOG_FILE), ck.log_lines)?;
    drive(config, ck.state, ledger, ck.generation, log)
}

/// Every condition founds from the same seed-derived population, so any
/// divergence between conditions is the curriculum's doing.
fn founding_state(config: &ExperimentConfig) -> ConditionState {
    let n = config.ga.population_size;
    match config.condition {
        Condition::Static => ConditionState::Static {
            population: founding_population(config.master_seed, n),
        },
        Condition::Rri => ConditionState::Rri {
            population: founding_population(config.master_seed, n),
            schedule: config.rri.clone(),
        },
        Condition::Poet => {
            ConditionState::Poet(PoetState::new(config.master_seed, config.poet.clone(), n))
        }
    }
}

fn drive(
    config: ExperimentConfig,
    mut state: ConditionState,
    mut ledger: EvalLedger,
    mut generation: u64,
    mut log: RunLogWriter,
) -> Result<RunSummary, RunError> {
    let evaluator = PoolEvaluator::new(config.worker_count, config.engine.clone())?;
    let checkpoint_path = config.out_dir.join(CHECKPOINT_FILE);

    loop {
        // Snapshot, attempt, and either commit or roll back: a generation
        // that cannot pay for itself leaves no trace.
        let snapshot = (state.clone(), ledger.clone());
        match step_generation(&config, &mut state, &mut ledger, generation, &evaluator) {
            Ok(records) => {
                for record in &records {
                    log.write(record)?;
                }
                generation += 1;
                if generation % config.checkpoint_every == 0 {
                    log.flush()?;
                    save_checkpoint(
                        &checkpoint_path,
                        &Checkpoint {
                            config: config.clone(),
                            state: state.clone(),
                            ledger: ledger.clone(),
                            generation,
                            log_lines: log.lines(),
                        },
                    )?;
                }
            }
            Err(_) => {
                (state, ledger) = snapshot;
                break;
            }
        }
    }

    log.flush()?;
    save_checkpoint(
        &checkpoint_path,
        &Checkpoint {
            config: config.clone(),
            state: state.clone(),
            ledger: ledger.clone(),
            generation,
            log_lines: log.lines(),
        },
    )?;

    let best = best_member(&state, generation);
    if let Some((_, _, _, genotype)) = &best {
        std::fs::write(
            config.out_dir.join(BEST_GENOTYPE_FILE),
            genotype.to_bytes(),
        )?;
    }
    let best_info = best.as_ref().map(|(pair_id, fitness, env, _)| BestInfo {
        pair_id: *pair_id,
        fitness: *fitness,
        env: env.encode(),
    });
    write_artifacts(&config, generation, ledger.used(), true, best_info)?;

    Ok(RunSummary {
        out_dir: config.out_dir.clone(),
        condition: config.condition,
        generations: generation,
        evaluations: ledger.used(),
        best_fitness: best.map(|(_, f, _, _)| f),
        config_hash: config.config_hash(),
    })
}

/// Runs generation `g` for whichever condition `state` holds and returns
/// the log records it produced: events first, then the summary.
///
/// On `Err` the budget could not cover the generation; `state` and `ledger`
/// may hold partial work and the caller must restore its snapshot.
fn step_generation(
    config: &ExperimentConfig,
    state: &mut ConditionState,
    ledger: &mut EvalLedger,
    g: u64,
    evaluator: &PoolEvaluator,
) -> Result<Vec<LogRecord>, walker::BudgetExhausted> {
    let seed = config.master_seed;
    match state {
        ConditionState::Static { population } => {
            ledger.try_reserve(config.ga.population_size as u64)?;
            let env = static_env();
            if g == 0 {
                evaluate_founding(population, &env, seed, 0, evaluator);
            } else {
                ga_generation(population, &env, seed, 0, g, &config.ga, evaluator);
            }
            Ok(vec![single_pair_record(
                Condition::Static,
                g,
                ledger.used(),
                &env,
                population,
            )])
        }
        ConditionState::Rri { population, schedule } => {
            ledger.try_reserve(config.ga.population_size as u64)?;
            let env = *schedule.current(g);
            let stats = if g == 0 {
                evaluate_founding(population, &env, seed, 0, evaluator)
            } else {
                ga_generation(population, &env, seed, 0, g, &config.ga, evaluator)
            };
            let mut records = Vec::new();
            // An escalated slot changes from its next visit on; this
            // generation trained on `env` as recorded below.
            if let Some(esc) = schedule.maybe_escalate(g, stats.child_best) {
                records.push(LogRecord::Escalation {
                    generation: g,
                    slot: esc.slot,
                    env: esc.env.encode(),
                });
            }
            records.push(single_pair_record(
                Condition::Rri,
                g,
                ledger.used(),
                &env,
                population,
            ));
            Ok(records)
        }
        ConditionState::Poet(poet) => {
            let output = poet_generation(poet, seed, &config.ga, evaluator, ledger)?;
            let mut records: Vec<LogRecord> = output
                .events
                .into_iter()
                .map(|event| LogRecord::Poet { event })
                .collect();
            let flat = flat_lineage_index(&poet.pairs);
            records.push(LogRecord::Generation(GenerationRecord {
                condition: Condition::Poet,
                generation: g,
                evaluations: ledger.used(),
                pairs: poet
                    .pairs
                    .iter()
                    .enumerate()
                    .map(|(i, pair)| {
                        pair_record(
                            pair.id,
                            pair.created_at,
                            i == flat,
                            &pair.env,
                            &pair.population,
                        )
                    })
                    .collect(),
            }));
            Ok(records)
        }
    }
}

fn single_pair_record(
    condition: Condition,
    g: u64,
    evaluations: u64,
    env: &EnvParams,
    population: &[Genotype],
) -> LogRecord {
    LogRecord::Generation(GenerationRecord {
        condition,
        generation: g,
        evaluations,
        pairs: vec![pair_record(0, 0, true, env, population)],
    })
}

fn pair_record(
    pair_id: u64,
    created_at: u64,
    flat_lineage: bool,
    env: &EnvParams,
    population: &[Genotype],
) -> PairRecord {
    let fitness =
        |g: &Genotype| g.fitness.expect("logged populations are fully evaluated");
    let best = population.iter().map(&fitness).fold(f64::NEG_INFINITY, f64::max);
    let mean = population.iter().map(&fitness).sum::<f64>() / population.len() as f64;
    let diversity =
        population_diversity(population).expect("populations hold at least two members");
    let points = population
        .iter()
        .map(|g| {
            let (length, width) = feature_projection(&g.morphology);
            (length, width, fitness(g))
        })
        .collect();
    PairRecord {
        pair_id,
        created_at,
        flat_lineage,
        env: env.encode(),
        best,
        mean,
        diversity,
        points,
    }
}

/// The pair whose environment sits closest to flat ground; ties go to the
/// oldest pair, then the lowest id.
fn flat_lineage_index(pairs: &[Pair]) -> usize {
    let flat = EnvParams::flat();
    let mut best = 0;
    for (i, pair) in pairs.iter().enumerate().skip(1) {
        let d = pair.env.distance(&flat);
        let incumbent = &pairs[best];
        let d_best = incumbent.env.distance(&flat);
        if d < d_best
            || (d == d_best
                && (pair.created_at, pair.id) < (incumbent.created_at, incumbent.id))
        {
            best = i;
        }
    }
    best
}

/// Best evaluated individual across the whole state, if any: its pair id,
/// stored fitness, the environment that fitness was measured on, and the
/// genotype itself. Ties go to the earliest position.
fn best_member(
    state: &ConditionState,
    generation: u64,
) -> Option<(u64, f64, EnvParams, &Genotype)> {
    fn best_in(pop: &[Genotype]) -> Option<(f64, &Genotype)> {
        let mut best: Option<(f64, &Genotype)> = None;
        for g in pop {
            let Some(f) = g.fitness else { continue };
            if best.map_or(true, |(fb, _)| f > fb) {
                best = Some((f, g));
            }
        }
        best
    }
    match state {
        ConditionState::Static { population } => {
            best_in(population).map(|(f, g)| (0, f, static_env(), g))
        }
        ConditionState::Rri { population, schedule } => best_in(population).map(|(f, g)| {
            // Stored fitness comes from the last committed generation.
            let env = *schedule.current(generation.saturating_sub(1));
            (0, f, env, g)
        }),
        ConditionState::Poet(poet) => {
            let mut out: Option<(u64, f64, EnvParams, &Genotype)> = None;
            for pair in &poet.pairs {
                let Some((f, g)) = best_in(&pair.population) else {
                    continue;
                };
                if out.as_ref().map_or(true, |(_, fb, _, _)| f > *fb) {
                    out = Some((pair.id, f, pair.env, g));
                }
            }
            out
        }
    }
}

fn write_artifacts(
    config: &ExperimentConfig,
    generations: u64,
    evaluations: u64,
    finished: bool,
    best: Option<BestInfo>,
) -> Result<(), RunError> {
    let meta = RunMeta {
        schema_version: 1,
        condition: config.condition,
        master_seed: config.master_seed,
        evaluation_budget: config.evaluation_budget,
        config_hash: config.config_hash(),
        generations,
        evaluations,
        finished,
        best,
        config: config.clone(),
    };
    let json = serde_json::to_vec_pretty(&meta).map_err(io::Error::other)?;
    std::fs::write(config.out_dir.join(META_FILE), json)?;
    let toml = toml::to_string_pretty(config).map_err(io::Error::other)?;
    std::fs::write(config.out_dir.join(CONFIG_FILE), toml)?;
    Ok(())
}

/// Reads a run directory's metadata.
pub fn read_meta(dir: &Path) -> Result<RunMeta, RunError> {
    let bytes = std::fs::read(dir.join(META_FILE))?;
    Ok(serde_json::from_slice(&bytes).map_err(io::Error::other)?)
}
