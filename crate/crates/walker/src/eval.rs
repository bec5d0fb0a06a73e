//! Fitness evaluation and the evaluation budget.
//!
//! One evaluation is the mean total reward over a fixed number of episodes
//! with consecutive seeds, and costs exactly one budget unit. Batches are
//! the parallelism boundary: jobs are self-contained and their results are
//! returned in job order, so scheduling cannot affect results.

use physics2d::EngineConfig;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::episode::run_episode_with;
use crate::genome::Genotype;
use crate::params::EnvParams;

/// Episodes averaged per evaluation.
pub const EPISODES_PER_EVAL: u64 = 4;

/// A self-contained evaluation request.
#[derive(Debug, Clone)]
pub struct EvalJob {
    pub genotype: Genotype,
    pub env: EnvParams,
    /// Episode `k` uses seed `base_seed + k`.
    pub base_seed: u64,
}

/// Runs one evaluation: the mean total reward over
/// [`EPISODES_PER_EVAL`] episodes, under the default solver settings.
pub fn evaluate(job: &EvalJob) -> f64 {
    evaluate_with(&EngineConfig::default(), job)
}

/// As [`evaluate`], but under explicit solver settings.
pub fn evaluate_with(engine: &EngineConfig, job: &EvalJob) -> f64 {
    let mut sum = 0.0;
    for k in 0..EPISODES_PER_EVAL {
        let result = run_episode_with(
            engine,
            &job.genotype,
            &job.env,
            job.base_seed.wrapping_add(k),
        )
        .expect("evaluation pipeline only produces in-bounds morphologies");
        sum += result.total_reward;
    }
    sum / EPISODES_PER_EVAL as f64
}

/// Evaluation backend. Implementations must return one fitness per job, in
/// job order, and must produce results independent of scheduling.
pub trait Evaluator {
    fn eval_batch(&self, jobs: &[EvalJob]) -> Vec<f64>;
}

/// Evaluates jobs one after another on the calling thread.
pub struct SequentialEvaluator;

impl Evaluator for SequentialEvaluator {
    fn eval_batch(&self, jobs: &[EvalJob]) -> Vec<f64> {
        jobs.iter().map(evaluate).collect()
    }
}

/// Raised when a phase would overrun the evaluation budget. The phase must
/// not be committed.
#[derive(Debug, Clone, Error, PartialEq, Eq)]
#[error("evaluation budget exhausted: {needed} evaluations needed, {remaining} remaining")]
pub struct BudgetExhausted {
    pub needed: u64,
    pub remaining: u64,
}

/// Counts evaluations against a fixed budget.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq, Eq)]
pub struct EvalLedger {
    used: u64,
    limit: u64,
}

impl EvalLedger {
    pub fn new(limit: u64) -> Self {
        Self { used: 0, limit }
    }

    /// Rebuilds a ledger at a known position. Used when a checkpointed run
    /// resumes under a raised budget: the spend so far carries over.
    pub fn with_used(limit: u64, used: u64) -> Self {
        Self { limit, used }
    }

    /// Reserves `n` evaluations, or fails without reserving anything.
    pub fn try_reserve(&mut self, n: u64) -> Result<(), BudgetExhausted> {
        let remaining = self.limit - self.used;
        if n > remaining {
            return Err(BudgetExhausted {
                needed: n,
                remaining,
            });
        }
        self.used += n;
        Ok(())
    }

    pub fn used(&self) -> u64 {
        self.used
    }

    pub fn limit(&self) -> u64 {
        self.limit
    }

    pub fn remaining(&self) -> u64 {
        self.limit - self.used
    }
}
