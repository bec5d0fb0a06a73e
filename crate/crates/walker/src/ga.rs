//! Steady-state genetic algorithm with deterministic crowding.
//!
//! Each generation selects parents by tournament, produces children by
//! uniform crossover and mutation, evaluates every child, and then holds one
//! parent-versus-child contest per slot: the child replaces its paired
//! parent only when its fitness is at least the parent's. Pairing follows
//! deterministic crowding on morphological distance, which preserves diverse
//! body plans without any explicit niching radius.

use serde::{Deserialize, Serialize};

use crate::eval::{EvalJob, Evaluator};
use crate::genome::{crossover_uniform, Genotype, Morphology, MutationConfig};
use crate::params::EnvParams;
use crate::rng::{derive_rng, derive_seed, STREAM_EVAL, STREAM_GA};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

/// GA operator settings.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct GaConfig {
    /// Number of individuals per population; also evaluations per generation.
    pub population_size: usize,
    /// Individuals drawn (with replacement) per tournament.
    pub tournament_size: usize,
    /// Probability that a parent pair recombines; otherwise the children are
    /// clones of their parents.
    pub crossover_rate: f64,
    pub mutation: MutationConfig,
}

impl Default for GaConfig {
    fn default() -> Self {
        Self {
            population_size: 192,
            tournament_size: 5,
            crossover_rate: 1.0,
            mutation: MutationConfig::default(),
        }
    }
}

/// Summary of one generation.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct GenStats {
    /// Best and mean stored fitness of the post-generation population.
    pub best: f64,
    pub mean: f64,
    /// Best and mean fitness among this generation's freshly evaluated
    /// individuals.
    pub child_best: f64,
    pub child_mean: f64,
    /// Evaluations charged by this generation.
    pub evaluations: u64,
}

fn fitness(g: &Genotype) -> f64 {
    g.fitness.expect("population member missing stored fitness")
}

fn stats_of(values: impl Iterator<Item = f64> + Clone) -> (f64, f64) {
    let mut best = f64::NEG_INFINITY;
    let mut sum = 0.0;
    let mut n = 0usize;
    for v in values {
        best = best.max(v);
        sum += v;
        n += 1;
    }
    (best, sum / n as f64)
}

/// Tournament selection: draws `k` members with replacement and returns the
/// index of the fittest; ties go to the lowest population index.
pub fn tournament_select(pop: &[Genotype], k: usize, rng: &mut ChaCha8Rng) -> usize {
    let mut best_idx = usize::MAX;
    let mut best_fit = f64::NEG_INFINITY;
    for _ in 0..k {
        let i = rng.gen_range(0..pop.len());
        let f = fitness(&pop[i]);
        if best_idx == usize::MAX || f > best_fit || (f == best_fit && i < best_idx) {
            best_idx = i;
            best_fit = f;
        }
    }
    best_idx
}

/// L1 distance between morphology vectors.
pub fn l1_morphology_distance(a: &Morphology, b: &Morphology) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| (x - y).abs()).sum()
}

/// Deterministic crowding contest for one family.
///
/// Children are paired with their morphologically closest parents: the
/// straight pairing `(p1,c1),(p2,c2)` is used when its total distance does
/// not exceed the crossed pairing, and each child replaces its paired parent
/// exactly when the child's fitness is at least the parent's. Survivors are
/// returned in parent-slot order.
pub fn crowding_contest(
    p1: &Genotype,
    p2: &Genotype,
    c1: &Genotype,
    c2: &Genotype,
) -> (Genotype, Genotype) {
    let d = |a: &Genotype, b: &Genotype| l1_morphology_distance(&a.morphology, &b.morphology);
    let straight = d(p1, c1) + d(p2, c2);
    let crossed = d(p1, c2) + d(p2, c1);
    let (a1, a2) = if straight <= crossed { (c1, c2) } else { (c2, c1) };
    let s1 = if fitness(a1) >= fitness(p1) { a1 } else { p1 };
    let s2 = if fitness(a2) >= fitness(p2) { a2 } else { p2 };
    (s1.clone(), s2.clone())
}

/// Evaluates an unevaluated founding population in place.
///
/// Charges one evaluation per member, with the same seed layout later
/// generations use, and returns the resulting stats.
pub fn evaluate_founding(
    pop: &mut [Genotype],
    env: &EnvParams,
    master_seed: u64,
    pair_id: u64,
    evaluator: &dyn Evaluator,
) -> GenStats {
    let jobs: Vec<EvalJob> = pop
        .iter()
        .enumerate()
        .map(|(k, g)| EvalJob {
            genotype: g.clone(),
            env: *env,
            base_seed: derive_seed(master_seed, &[STREAM_EVAL, pair_id, 0, k as u64]),
        })
        .collect();
    let fits = evaluator.eval_batch(&jobs);
    assert_eq!(fits.len(), pop.len(), "evaluator must return one fitness per job");
    for (g, f) in pop.iter_mut().zip(fits.iter()) {
        g.fitness = Some(*f);
    }
    let (best, mean) = stats_of(pop.iter().map(fitness));
    GenStats {
        best,
        mean,
        child_best: best,
        child_mean: mean,
        evaluations: pop.len() as u64,
    }
}

/// Advances `pop` by one generation in `env`.
///
/// The caller reserves the budget (one evaluation per population member)
/// before committing the result. All randomness comes from streams derived
/// from `(master_seed, pair_id, generation)`.
pub fn ga_generation(
    pop: &mut Vec<Genotype>,
    env: &EnvParams,
    master_seed: u64,
    pair_id: u64,
    generation: u64,
    cfg: &GaConfig,
    evaluator: &dyn Evaluator,
) -> GenStats {
    let n = cfg.population_size;
    assert_eq!(pop.len(), n, "population size is fixed");
    assert_eq!(n % 2, 0, "population pairs off parents");
    let mut rng = derive_rng(master_seed, &[STREAM_GA, pair_id, generation]);

    let parents: Vec<usize> = (0..n)
        .map(|_| tournament_select(pop, cfg.tournament_size, &mut rng))
        .collect();

    let mut children: Vec<Genotype> = Vec::with_capacity(n);
    for pair in 0..n / 2 {
        let p1 = &pop[parents[2 * pair]];
        let p2 = &pop[parents[2 * pair + 1]];
        let (mut c1, mut c2) = if rng.gen::<f64>() < cfg.crossover_rate {
            crossover_uniform(p1, p2, &mut rng)
        } else {
            let mut c1 = p1.clone();
            let mut c2 = p2.clone();
            c1.fitness = None;
            c2.fitness = None;
            (c1, c2)
        };
        c1.mutate(&cfg.mutation, &mut rng);
        c2.mutate(&cfg.mutation, &mut rng);
        children.push(c1);
        children.push(c2);
    }

    let jobs: Vec<EvalJob> = children
        .iter()
        .enumerate()
        .map(|(k, g)| EvalJob {
            genotype: g.clone(),
            env: *env,
            base_seed: derive_seed(master_seed, &[STREAM_EVAL, pair_id, generation, k as u64]),
        })
        .collect();
    let fits = evaluator.eval_batch(&jobs);
    assert_eq!(fits.len(), n, "evaluator must return one fitness per job");
    for (c, f) in children.iter_mut().zip(fits.iter()) {
        c.fitness = Some(*f);
    }
    let (child_best, child_mean) = stats_of(children.iter().map(fitness));

    let mut next: Vec<Genotype> = Vec::with_capacity(n);
    for pair in 0..n / 2 {
        let (s1, s2) = crowding_contest(
            &pop[parents[2 * pair]],
            &pop[parents[2 * pair + 1]],
            &children[2 * pair],
            &children[2 * pair + 1],
        );
        next.push(s1);
        next.push(s2);
    }
    *pop = next;

    let (best, mean) = stats_of(pop.iter().map(fitness));
    GenStats {
        best,
        mean,
        child_best,
        child_mean,
        evaluations: n as u64,
    }
}
