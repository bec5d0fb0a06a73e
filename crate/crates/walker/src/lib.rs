//! A bipedal walker whose body and brain evolve together.
//!
//! The crate couples a deterministic 2D physics simulation of a two-legged
//! walker (built on `physics2d`) with the evolutionary machinery that
//! optimises it: a genetic algorithm over controller weights and leg
//! morphology, parameterised terrain generation, curriculum schedules, a
//! paired environment/population open-ended loop, and the analysis tooling
//! used to compare the resulting populations.
//!
//! Modules:
//! - [`params`]: terrain feature parameters and their bounds.
//! - [`terrain`]: procedural terrain built from those parameters.
//! - [`genome`]: genotypes (2720 controller weights + 8 morphology values).
//! - [`rig`]: assembling a walker body in the physics world.
//! - [`episode`]: running one controller episode and scoring it.
//! - [`eval`]: evaluation jobs, budget ledger and the evaluator trait.
//! - [`ga`]: tournament selection, crossover, mutation, crowding survival.
//! - [`poet`]: the paired environment/population open-ended loop.
//! - [`curricula`]: static and round-robin incremental schedules.
//! - [`analysis`]: diversity, feature maps, difficulty suites, statistics.
//! - [`rng`]: named deterministic random streams.

pub mod analysis;
pub mod curricula;
pub mod episode;
pub mod eval;
pub mod ga;
pub mod genome;
pub mod params;
pub mod poet;
pub mod rig;
pub mod rng;
pub mod terrain;

pub use analysis::{
    bonferroni, difficulty_category, feature_projection, generate_robustness_suite,
    local_generalisation_suite, mann_whitney_u, population_diversity, AnalysisError,
    DifficultyCategory, QdGrid,
};
pub use curricula::{static_env, RriEscalation, RriSchedule};
pub use episode::{run_episode, run_episode_traced, run_episode_with, EpisodeResult, StepTrace, Termination};
pub use eval::{
    evaluate, evaluate_with, BudgetExhausted, EvalJob, EvalLedger, Evaluator, SequentialEvaluator,
    EPISODES_PER_EVAL,
};
pub use ga::{ga_generation, GaConfig, GenStats};
pub use genome::{crossover_uniform, Genotype, Morphology, MutationConfig, N_WEIGHTS};
pub use params::{EnvParams, EnvParamsError};
pub use poet::{
    environment_novelty, mutate_env, poet_generation, Pair, PoetConfig, PoetEvent,
    PoetGenerationOutput, PoetState,
};
pub use rng::{derive_rng, derive_seed};
pub use terrain::{generate_terrain, TerrainLayout};
