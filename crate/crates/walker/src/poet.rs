//! Open-ended co-evolution of environments and populations.
//!
//! The state is a set of (environment, population) pairs plus an append-only
//! archive of every environment ever created. Each outer-loop generation
//! advances every pair's population by one GA generation; on fixed schedules
//! it additionally attempts cross-pair transfers (a pair's population is
//! replaced by a copy of another pair's when that pair's representative
//! strictly beats the incumbent in the target environment) and creates new
//! environments by mutating the environments of sufficiently successful
//! pairs, admitting only children of appropriate difficulty that are novel
//! against the archive.

use serde::{Deserialize, Serialize};

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::eval::{BudgetExhausted, EvalJob, EvalLedger, Evaluator};
use crate::ga::{evaluate_founding, ga_generation, GaConfig, GenStats};
use crate::genome::Genotype;
use crate::params::{
    EnvParams, PIT_GAP_MAX, ROUGHNESS_MAX, STAIR_HEIGHT_MAX, STAIR_STEPS_MAX, STUMP_HEIGHT_MAX,
};
use crate::rng::{
    derive_rng, derive_seed, STREAM_CREATE_EVAL, STREAM_INIT, STREAM_POET_CREATE,
    STREAM_TRANSFER_EVAL,
};

/// Archive neighbours considered by the novelty score.
pub const NOVELTY_NEIGHBORS: usize = 5;

/// Outer-loop settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PoetConfig {
    /// Maximum number of live pairs.
    pub pair_capacity: usize,
    /// Transfers run when `generation % transfer_every == 0` (after the
    /// founding generation).
    pub transfer_every: u64,
    /// Environment creation runs when `generation % create_every == 0`
    /// (after the founding generation).
    pub create_every: u64,
    /// A pair may parent new environments only while its best stored
    /// fitness strictly exceeds this.
    pub reproduction_threshold: f64,
    /// Closed interval the best representative score must fall in for a
    /// child environment to be admissible.
    pub difficulty_range: (f64, f64),
    /// Child environments generated per creation event.
    pub children_per_creation: usize,
    /// Maximum admissions per creation event.
    pub max_admissions: usize,
}

impl Default for PoetConfig {
    fn default() -> Self {
        Self {
            pair_capacity: 20,
            transfer_every: 5,
            create_every: 40,
            reproduction_threshold: 200.0,
            difficulty_range: (50.0, 300.0),
            children_per_creation: 20,
            max_admissions: 2,
        }
    }
}

/// One environment/population pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Pair {
    pub id: u64,
    /// Generation at which the pair entered the state.
    pub created_at: u64,
    pub env: EnvParams,
    pub population: Vec<Genotype>,
}

/// Full outer-loop state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PoetState {
    pub config: PoetConfig,
    pub pairs: Vec<Pair>,
    /// Every environment ever created, in creation order, never pruned.
    pub archive: Vec<EnvParams>,
    /// Next generation to run.
    pub generation: u64,
    pub next_pair_id: u64,
}

/// Outer-loop events, in the order they occurred.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PoetEvent {
    Transfer {
        generation: u64,
        target_pair: u64,
        source_pair: u64,
        incumbent_score: f64,
        incoming_score: f64,
    },
    Admission {
        generation: u64,
        pair_id: u64,
        /// Pair whose environment was mutated.
        env_parent: u64,
        /// Pair whose population was copied in.
        population_source: u64,
        env: EnvParams,
        /// Best representative score on the child environment.
        score: f64,
        novelty: f64,
    },
    Eviction {
        generation: u64,
        pair_id: u64,
        created_at: u64,
    },
}

/// Per-generation output for logging.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PoetGenerationOutput {
    pub generation: u64,
    /// `(pair id, stats)` per live pair, in pair order.
    pub pair_stats: Vec<(u64, GenStats)>,
    pub events: Vec<PoetEvent>,
}

/// The shared founding population every condition starts from.
pub fn founding_population(master_seed: u64, n: usize) -> Vec<Genotype> {
    let mut rng = derive_rng(master_seed, &[STREAM_INIT]);
    (0..n).map(|_| Genotype::init_random(&mut rng)).collect()
}

impl PoetState {
    /// Fresh state: one pair on the flat environment with an unevaluated
    /// founding population, and the flat environment in the archive.
    pub fn new(master_seed: u64, config: PoetConfig, population_size: usize) -> Self {
        let population = founding_population(master_seed, population_size);
        Self {
            config,
            pairs: vec![Pair {
                id: 0,
                created_at: 0,
                env: EnvParams::flat(),
                population,
            }],
            archive: vec![EnvParams::flat()],
            generation: 0,
            next_pair_id: 1,
        }
    }
}

/// Best stored fitness in the pair's population.
pub fn pair_fitness(pair: &Pair) -> f64 {
    pair.population
        .iter()
        .map(|g| g.fitness.expect("pair population must be evaluated"))
        .fold(f64::NEG_INFINITY, f64::max)
}

/// The pair's representative: its highest-fitness member, ties resolved
/// toward the lowest index.
pub fn representative(pair: &Pair) -> &Genotype {
    let mut best = &pair.population[0];
    let mut best_fit = best.fitness.expect("pair population must be evaluated");
    for g in &pair.population[1..] {
        let f = g.fitness.expect("pair population must be evaluated");
        if f > best_fit {
            best = g;
            best_fit = f;
        }
    }
    best
}

/// Mutates an environment parameter vector.
///
/// Roughness gains a uniform positive increment; every interval endpoint
/// moves by its feature's fixed magnitude with an independent random sign;
/// the step count moves by one either way. Everything clamps to its bounds
/// and inverted intervals are repaired by swapping.
pub fn mutate_env(env: &EnvParams, rng: &mut ChaCha8Rng) -> EnvParams {
    fn bump(value: f64, magnitude: f64, max: f64, rng: &mut ChaCha8Rng) -> f64 {
        let sign = if rng.gen::<bool>() { 1.0 } else { -1.0 };
        (value + sign * magnitude).clamp(0.0, max)
    }
    fn repair((lo, hi): (f64, f64)) -> (f64, f64) {
        if lo > hi {
            (hi, lo)
        } else {
            (lo, hi)
        }
    }

    let mut out = *env;
    out.roughness = (out.roughness + rng.gen_range(0.0..0.6)).clamp(0.0, ROUGHNESS_MAX);
    out.pit_gap = repair((
        bump(out.pit_gap.0, 0.4, PIT_GAP_MAX, rng),
        bump(out.pit_gap.1, 0.4, PIT_GAP_MAX, rng),
    ));
    out.stump_height = repair((
        bump(out.stump_height.0, 0.2, STUMP_HEIGHT_MAX, rng),
        bump(out.stump_height.1, 0.2, STUMP_HEIGHT_MAX, rng),
    ));
    out.stair_height = repair((
        bump(out.stair_height.0, 0.2, STAIR_HEIGHT_MAX, rng),
        bump(out.stair_height.1, 0.2, STAIR_HEIGHT_MAX, rng),
    ));
    out.stair_steps = if rng.gen::<bool>() {
        (out.stair_steps + 1).min(STAIR_STEPS_MAX)
    } else {
        out.stair_steps.saturating_sub(1)
    };
    out
}

/// Mean Euclidean distance (on 8-vector encodings) from `env` to its
/// [`NOVELTY_NEIGHBORS`] nearest archive entries. With a smaller archive,
/// all entries count.
pub fn environment_novelty(env: &EnvParams, archive: &[EnvParams]) -> f64 {
    if archive.is_empty() {
        return 0.0;
    }
    let mut dists: Vec<f64> = archive.iter().map(|e| env.distance(e)).collect();
    dists.sort_by(|a, b| a.partial_cmp(b).expect("distances are finite"));
    let k = NOVELTY_NEIGHBORS.min(dists.len());
    dists[..k].iter().sum::<f64>() / k as f64
}

/// Attempts one transfer round. The caller reserves `pairs^2` evaluations.
///
/// Every pair's representative is evaluated in every pair's environment —
/// including each incumbent in its own, which defines the score to beat.
/// All replacement decisions are taken against this pre-transfer state and
/// applied atomically; a replaced pair receives a full copy of the source
/// pair's population with stored fitness intact.
pub fn transfer_step(
    state: &mut PoetState,
    master_seed: u64,
    evaluator: &dyn Evaluator,
) -> Vec<PoetEvent> {
    let g = state.generation;
    let n = state.pairs.len();
    let reps: Vec<Genotype> = state.pairs.iter().map(|p| representative(p).clone()).collect();
    let mut jobs = Vec::with_capacity(n * n);
    for target in &state.pairs {
        for (s, source) in state.pairs.iter().enumerate() {
            jobs.push(EvalJob {
                genotype: reps[s].clone(),
                env: target.env,
                base_seed: derive_seed(
                    master_seed,
                    &[STREAM_TRANSFER_EVAL, g, target.id, source.id],
                ),
            });
        }
    }
    let scores = evaluator.eval_batch(&jobs);
    assert_eq!(scores.len(), n * n);
    let score = |t: usize, s: usize| scores[t * n + s];

    // Decide all replacements against the pre-transfer state.
    let mut decisions: Vec<(usize, usize, f64, f64)> = Vec::new();
    for t in 0..n {
        let incumbent = score(t, t);
        let mut best_s = usize::MAX;
        let mut best = f64::NEG_INFINITY;
        for s in 0..n {
            if s != t && score(t, s) > best {
                best = score(t, s);
                best_s = s;
            }
        }
        if best_s != usize::MAX && best > incumbent {
            decisions.push((t, best_s, incumbent, best));
        }
    }

    // Clone every incoming population before any assignment so simultaneous
    // swaps see pre-transfer contents.
    let incoming: Vec<Vec<Genotype>> = decisions
        .iter()
        .map(|&(_, s, _, _)| state.pairs[s].population.clone())
        .collect();
    let mut events = Vec::with_capacity(decisions.len());
    for (&(t, s, incumbent_score, incoming_score), population) in
        decisions.iter().zip(incoming.into_iter())
    {
        events.push(PoetEvent::Transfer {
            generation: g,
            target_pair: state.pairs[t].id,
            source_pair: state.pairs[s].id,
            incumbent_score,
            incoming_score,
        });
        state.pairs[t].population = population;
    }
    events
}

/// Screens already-generated child environments and admits the best.
///
/// `children` are `(env parent pair id, env)` in creation order and must
/// already be appended to the archive; `fits` holds one score per
/// (child, pair) combination, child-major. `archive_len_before` marks the
/// archive length before this creation event for the duplicate filter.
fn screen_and_admit(
    state: &mut PoetState,
    children: &[(u64, EnvParams)],
    fits: &[f64],
    archive_len_before: usize,
) -> Vec<PoetEvent> {
    let g = state.generation;
    let n_pairs = state.pairs.len();

    struct Candidate {
        child_idx: usize,
        env_parent: u64,
        env: EnvParams,
        donor_index: usize,
        score: f64,
        novelty: f64,
    }
    let mut candidates: Vec<Candidate> = Vec::new();
    for (c, (env_parent, env)) in children.iter().enumerate() {
        let row = &fits[c * n_pairs..(c + 1) * n_pairs];
        let mut donor_index = 0;
        let mut best = row[0];
        for (i, &f) in row.iter().enumerate().skip(1) {
            if f > best {
                best = f;
                donor_index = i;
            }
        }
        let (lo, hi) = state.config.difficulty_range;
        if !(best >= lo && best <= hi) {
            continue;
        }
        let enc = env.encode();
        if state.archive[..archive_len_before]
            .iter()
            .any(|e| e.encode() == enc)
        {
            continue;
        }
        candidates.push(Candidate {
            child_idx: c,
            env_parent: *env_parent,
            env: *env,
            donor_index,
            score: best,
            novelty: environment_novelty(env, &state.archive),
        });
    }

    candidates.sort_by(|a, b| {
        b.novelty
            .partial_cmp(&a.novelty)
            .expect("novelty is finite")
            .then(a.child_idx.cmp(&b.child_idx))
    });

    let mut events = Vec::new();
    for cand in candidates.into_iter().take(state.config.max_admissions) {
        let id = state.next_pair_id;
        state.next_pair_id += 1;
        let population = state.pairs[cand.donor_index].population.clone();
        events.push(PoetEvent::Admission {
            generation: g,
            pair_id: id,
            env_parent: cand.env_parent,
            population_source: state.pairs[cand.donor_index].id,
            env: cand.env,
            score: cand.score,
            novelty: cand.novelty,
        });
        state.pairs.push(Pair {
            id,
            created_at: g,
            env: cand.env,
            population,
        });
    }

    while state.pairs.len() > state.config.pair_capacity {
        let idx = state
            .pairs
            .iter()
            .enumerate()
            .min_by_key(|(_, p)| (p.created_at, p.id))
            .map(|(i, _)| i)
            .expect("pairs is non-empty");
        let removed = state.pairs.remove(idx);
        events.push(PoetEvent::Eviction {
            generation: g,
            pair_id: removed.id,
            created_at: removed.created_at,
        });
    }
    events
}

/// Attempts one environment-creation round.
///
/// No-ops (and charges nothing) when no pair passes the reproduction
/// threshold. Otherwise reserves `children * pairs` evaluations, generates
/// children by mutating uniformly drawn eligible parents, appends all of
/// them to the archive before any evaluation, scores each child with every
/// pair's representative, and admits the most novel qualifying children,
/// evicting the oldest pairs beyond capacity.
pub fn creation_step(
    state: &mut PoetState,
    master_seed: u64,
    evaluator: &dyn Evaluator,
    ledger: &mut EvalLedger,
) -> Result<Vec<PoetEvent>, BudgetExhausted> {
    let g = state.generation;
    let eligible: Vec<usize> = (0..state.pairs.len())
        .filter(|&i| pair_fitness(&state.pairs[i]) > state.config.reproduction_threshold)
        .collect();
    if eligible.is_empty() {
        return Ok(Vec::new());
    }

    let n_children = state.config.children_per_creation;
    let n_pairs = state.pairs.len();
    ledger.try_reserve((n_children * n_pairs) as u64)?;

    let mut rng = derive_rng(master_seed, &[STREAM_POET_CREATE, g]);
    let archive_len_before = state.archive.len();
    let mut children: Vec<(u64, EnvParams)> = Vec::with_capacity(n_children);
    for _ in 0..n_children {
        let parent = &state.pairs[eligible[rng.gen_range(0..eligible.len())]];
        children.push((parent.id, mutate_env(&parent.env, &mut rng)));
    }
    state.archive.extend(children.iter().map(|(_, e)| *e));

    let mut jobs = Vec::with_capacity(n_children * n_pairs);
    for (c, (_, env)) in children.iter().enumerate() {
        for pair in &state.pairs {
            jobs.push(EvalJob {
                genotype: representative(pair).clone(),
                env: *env,
                base_seed: derive_seed(
                    master_seed,
                    &[STREAM_CREATE_EVAL, g, c as u64, pair.id],
                ),
            });
        }
    }
    let fits = evaluator.eval_batch(&jobs);
    assert_eq!(fits.len(), n_children * n_pairs);

    Ok(screen_and_admit(state, &children, &fits, archive_len_before))
}

/// Runs one full outer-loop generation: GA (or the founding evaluation at
/// generation zero) for every pair, then scheduled transfer and creation.
///
/// The ledger is charged per phase; on budget exhaustion the state may be
/// partially advanced, so callers that need transactional semantics run this
/// on a snapshot and discard it on error.
pub fn poet_generation(
    state: &mut PoetState,
    master_seed: u64,
    ga: &GaConfig,
    evaluator: &dyn Evaluator,
    ledger: &mut EvalLedger,
) -> Result<PoetGenerationOutput, BudgetExhausted> {
    let g = state.generation;
    ledger.try_reserve((ga.population_size * state.pairs.len()) as u64)?;
    let mut pair_stats = Vec::with_capacity(state.pairs.len());
    for i in 0..state.pairs.len() {
        let pair = &mut state.pairs[i];
        let env = pair.env;
        let id = pair.id;
        let stats = if g == 0 {
            evaluate_founding(&mut pair.population, &env, master_seed, id, evaluator)
        } else {
            ga_generation(&mut pair.population, &env, master_seed, id, g, ga, evaluator)
        };
        pair_stats.push((id, stats));
    }

    let mut events = Vec::new();
    if g > 0 && g % state.config.transfer_every == 0 && state.pairs.len() >= 2 {
        ledger.try_reserve((state.pairs.len() * state.pairs.len()) as u64)?;
        events.extend(transfer_step(state, master_seed, evaluator));
    }
    if g > 0 && g % state.config.create_every == 0 {
        events.extend(creation_step(state, master_seed, evaluator, ledger)?);
    }

    state.generation += 1;
    Ok(PoetGenerationOutput {
        generation: g,
        pair_stats,
        events,
    })
}
