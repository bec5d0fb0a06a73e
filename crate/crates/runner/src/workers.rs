//! Evaluation backends. The coordinator owns all evolutionary state; the
//! workers are stateless functions from job to fitness, so the only thing
//! a pool changes is wall-clock time.

use physics2d::EngineConfig;
use rayon::prelude::*;
use thiserror::Error;
use walker::eval::{evaluate_with, EvalJob, Evaluator};

/// Evaluator backed by a private thread pool, or by the calling thread for
/// `worker_count <= 1`. Results are returned in job order either way, and
/// every episode runs under the experiment's solver settings.
pub struct PoolEvaluator {
    engine: EngineConfig,
    pool: Option<rayon::ThreadPool>,
}

#[derive(Debug, Error)]
#[error("failed to start worker pool: {0}")]
pub struct PoolError(#[from] rayon::ThreadPoolBuildError);

impl PoolEvaluator {
    pub fn new(worker_count: usize, engine: EngineConfig) -> Result<Self, PoolError> {
        let pool = if worker_count <= 1 {
            None
        } else {
            Some(
                rayon::ThreadPoolBuilder::new()
                    .num_threads(worker_count)
                    .build()?,
            )
        };
        Ok(Self { engine, pool })
    }
}

impl Evaluator for PoolEvaluator {
    fn eval_batch(&self, jobs: &[EvalJob]) -> Vec<f64> {
        let engine = &self.engine;
        match &self.pool {
            None => jobs.iter().map(|j| evaluate_with(engine, j)).collect(),
            Some(pool) => {
                pool.install(|| jobs.par_iter().map(|j| evaluate_with(engine, j)).collect())
            }
        }
    }
}
