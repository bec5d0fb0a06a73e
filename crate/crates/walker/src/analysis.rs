//! Post-hoc analysis: population diversity, morphology feature maps,
//! difficulty-graded evaluation suites and rank statistics.
//!
//! Everything here is pure: functions take populations, morphologies or
//! samples and return numbers, so they can run over live state or over
//! reloaded checkpoints alike.

use std::collections::BTreeMap;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ga::l1_morphology_distance;
use crate::genome::{morph_bounds, Genotype, Morphology, N_MORPH};
use crate::params::{
    EnvParams, PIT_GAP_MAX, ROUGHNESS_MAX, STAIR_HEIGHT_MAX, STAIR_STEPS_MAX, STUMP_HEIGHT_MAX,
};

/// Roughness above this value counts as a difficult feature.
pub const ROUGHNESS_THRESHOLD: f64 = 3.0;
/// Pit gap (high endpoint) above this value counts as a difficult feature.
pub const PIT_THRESHOLD: f64 = 2.5;
/// Stump height (high endpoint) above this value counts as a difficult feature.
pub const STUMP_THRESHOLD: f64 = 1.5;

/// Number of environments per difficulty category in the robustness suite.
pub const SUITE_ENVS_PER_CATEGORY: usize = 10;

#[derive(Debug, Error, PartialEq)]
pub enum AnalysisError {
    /// Diversity averages over ordered pairs, so it needs at least two
    /// individuals.
    #[error("population diversity is undefined for {0} individuals (need at least 2)")]
    UndefinedDiversity(usize),
    /// The difficulty categories cover roughness, pits and stumps only.
    #[error("difficulty categories require zero stairs (got height {height:?}, steps {steps})")]
    StairsOutsideSuite { height: (f64, f64), steps: u32 },
}

/// Mean L1 morphology distance over ordered pairs `i != j`; equivalently the
/// mean over individuals of their mean distance to everyone else.
pub fn population_diversity(population: &[Genotype]) -> Result<f64, AnalysisError> {
    let n = population.len();
    if n < 2 {
        return Err(AnalysisError::UndefinedDiversity(n));
    }
    let mut total = 0.0;
    for (i, a) in population.iter().enumerate() {
        for (j, b) in population.iter().enumerate() {
            if i != j {
                total += l1_morphology_distance(&a.morphology, &b.morphology);
            }
        }
    }
    Ok(total / (n * (n - 1)) as f64)
}

/// Projects a morphology onto (total leg length, total leg width): the sum of
/// the four segment heights and the sum of the four segment widths.
pub fn feature_projection(morphology: &Morphology) -> (f64, f64) {
    let mut total_length = 0.0;
    let mut total_width = 0.0;
    for (dim, &value) in morphology.iter().enumerate() {
        if dim % 2 == 1 {
            total_length += value;
        } else {
            total_width += value;
        }
    }
    (total_length, total_width)
}

/// The (total length, total width) box reachable under the morphology bounds.
pub fn reachable_projection_bounds() -> ((f64, f64), (f64, f64)) {
    let mut length = (0.0, 0.0);
    let mut width = (0.0, 0.0);
    for dim in 0..N_MORPH {
        let (lo, hi) = morph_bounds(dim);
        if dim % 2 == 1 {
            length.0 += lo;
            length.1 += hi;
        } else {
            width.0 += lo;
            width.1 += hi;
        }
    }
    (length, width)
}

/// A best-fitness grid over the (total length, total width) morphology
/// projection. Cell values only ever increase.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct QdGrid {
    bounds: ((f64, f64), (f64, f64)),
    resolution: (usize, usize),
    cells: BTreeMap<(usize, usize), f64>,
}

impl QdGrid {
    /// Default resolution of the feature map along each axis.
    pub const DEFAULT_RESOLUTION: usize = 30;

    pub fn new(bounds: ((f64, f64), (f64, f64)), resolution: (usize, usize)) -> Self {
        assert!(
            bounds.0 .0 < bounds.0 .1 && bounds.1 .0 < bounds.1 .1,
            "grid bounds must span a non-empty box"
        );
        assert!(
            resolution.0 >= 1 && resolution.1 >= 1,
            "grid needs at least one cell per axis"
        );
        QdGrid { bounds, resolution, cells: BTreeMap::new() }
    }

    /// A 30x30 grid over the projection box reachable under morphology bounds.
    pub fn reachable() -> Self {
        QdGrid::new(
            reachable_projection_bounds(),
            (Self::DEFAULT_RESOLUTION, Self::DEFAULT_RESOLUTION),
        )
    }

    pub fn bounds(&self) -> ((f64, f64), (f64, f64)) {
        self.bounds
    }

    pub fn resolution(&self) -> (usize, usize) {
        self.resolution
    }

    /// The cell containing a projection; projections outside the bounds clamp
    /// to the border cells.
    pub fn cell_index(&self, projection: (f64, f64)) -> (usize, usize) {
        let axis = |value: f64, (lo, hi): (f64, f64), cells: usize| -> usize {
            let fraction = ((value - lo) / (hi - lo)).clamp(0.0, 1.0);
            ((fraction * cells as f64) as usize).min(cells - 1)
        };
        (
            axis(projection.0, self.bounds.0, self.resolution.0),
            axis(projection.1, self.bounds.1, self.resolution.1),
        )
    }

    /// Lower corner of a cell, for plotting and CSV export.
    pub fn cell_origin(&self, cell: (usize, usize)) -> (f64, f64) {
        let axis = |index: usize, (lo, hi): (f64, f64), cells: usize| -> f64 {
            lo + (hi - lo) * index as f64 / cells as f64
        };
        (
            axis(cell.0, self.bounds.0, self.resolution.0),
            axis(cell.1, self.bounds.1, self.resolution.1),
        )
    }

    /// Records one individual, keeping the best fitness seen per cell.
    pub fn record(&mut self, morphology: &Morphology, fitness: f64) {
        self.record_point(feature_projection(morphology), fitness);
    }

    /// Records a projection directly, for callers that only kept the
    /// projected coordinates (e.g. when rebuilding maps from run logs).
    pub fn record_point(&mut self, projection: (f64, f64), fitness: f64) {
        let cell = self.cell_index(projection);
        let slot = self.cells.entry(cell).or_insert(f64::NEG_INFINITY);
        if fitness > *slot {
            *slot = fitness;
        }
    }

    /// Best fitness recorded anywhere in the grid.
    pub fn best(&self) -> Option<f64> {
        self.cells.values().cloned().fold(None, |acc, v| match acc {
            Some(best) if best >= v => Some(best),
            _ => Some(v),
        })
    }

    /// Fraction of cells that have been visited.
    pub fn coverage(&self) -> f64 {
        self.cells.len() as f64 / (self.resolution.0 * self.resolution.1) as f64
    }

    /// Visited cells and their best fitness, in deterministic order.
    pub fn cells(&self) -> impl Iterator<Item = ((usize, usize), f64)> + '_ {
        self.cells.iter().map(|(&cell, &fitness)| (cell, fitness))
    }
}

impl Default for QdGrid {
    fn default() -> Self {
        QdGrid::reachable()
    }
}

/// Difficulty grade of a roughness/pit/stump environment, counting features
/// strictly above their thresholds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DifficultyCategory {
    Flat,
    Simple,
    OneFeature,
    TwoFeatures,
    ThreeFeatures,
}

impl DifficultyCategory {
    pub const ALL: [DifficultyCategory; 5] = [
        DifficultyCategory::Flat,
        DifficultyCategory::Simple,
        DifficultyCategory::OneFeature,
        DifficultyCategory::TwoFeatures,
        DifficultyCategory::ThreeFeatures,
    ];

    /// Stable lowercase name, used in CSV output.
    pub fn name(&self) -> &'static str {
        match self {
            DifficultyCategory::Flat => "flat",
            DifficultyCategory::Simple => "simple",
            DifficultyCategory::OneFeature => "one_feature",
            DifficultyCategory::TwoFeatures => "two_features",
            DifficultyCategory::ThreeFeatures => "three_features",
        }
    }
}

/// Classifies an environment by how many of its features exceed the
/// difficulty thresholds. Pair features are judged by their high endpoint.
/// Environments with stairs fall outside the category scheme and are
/// rejected.
pub fn difficulty_category(env: &EnvParams) -> Result<DifficultyCategory, AnalysisError> {
    if env.stair_height != (0.0, 0.0) || env.stair_steps != 0 {
        return Err(AnalysisError::StairsOutsideSuite {
            height: env.stair_height,
            steps: env.stair_steps,
        });
    }
    if env.roughness == 0.0 && env.pit_gap == (0.0, 0.0) && env.stump_height == (0.0, 0.0) {
        return Ok(DifficultyCategory::Flat);
    }
    let mut above = 0;
    if env.roughness > ROUGHNESS_THRESHOLD {
        above += 1;
    }
    if env.pit_gap.1 > PIT_THRESHOLD {
        above += 1;
    }
    if env.stump_height.1 > STUMP_THRESHOLD {
        above += 1;
    }
    Ok(match above {
        0 => DifficultyCategory::Simple,
        1 => DifficultyCategory::OneFeature,
        2 => DifficultyCategory::TwoFeatures,
        _ => DifficultyCategory::ThreeFeatures,
    })
}

/// Draws one environment of the requested category. Features flagged as
/// difficult draw uniformly between their threshold and their maximum; the
/// rest draw uniformly below the threshold. Pair features draw the high
/// endpoint first and the low endpoint uniformly underneath it.
fn sample_category_env(category: DifficultyCategory, rng: &mut ChaCha8Rng) -> EnvParams {
    if category == DifficultyCategory::Flat {
        return EnvParams::flat();
    }
    // Which of (roughness, pit, stump) must exceed its threshold.
    let hot: [bool; 3] = match category {
        DifficultyCategory::Flat => unreachable!(),
        DifficultyCategory::Simple => [false; 3],
        DifficultyCategory::OneFeature => {
            let mut hot = [false; 3];
            hot[rng.gen_range(0..3)] = true;
            hot
        }
        DifficultyCategory::TwoFeatures => {
            let mut hot = [true; 3];
            hot[rng.gen_range(0..3)] = false;
            hot
        }
        DifficultyCategory::ThreeFeatures => [true; 3],
    };
    let scalar = |rng: &mut ChaCha8Rng, above: bool, threshold: f64, max: f64| -> f64 {
        if above {
            rng.gen_range(threshold..max)
        } else {
            rng.gen_range(0.0..threshold)
        }
    };
    let pair = |rng: &mut ChaCha8Rng, above: bool, threshold: f64, max: f64| -> (f64, f64) {
        let high = scalar(rng, above, threshold, max);
        let low = high * rng.gen::<f64>();
        (low, high)
    };
    let mut env = EnvParams::flat();
    env.roughness = scalar(rng, hot[0], ROUGHNESS_THRESHOLD, ROUGHNESS_MAX);
    env.pit_gap = pair(rng, hot[1], PIT_THRESHOLD, PIT_GAP_MAX);
    env.stump_height = pair(rng, hot[2], STUMP_THRESHOLD, STUMP_HEIGHT_MAX);
    env
}

/// Generates the 50-environment robustness suite: 10 environments for each
/// difficulty category, each verified to classify back to its category.
pub fn generate_robustness_suite(rng: &mut ChaCha8Rng) -> Vec<(DifficultyCategory, EnvParams)> {
    let mut suite = Vec::with_capacity(DifficultyCategory::ALL.len() * SUITE_ENVS_PER_CATEGORY);
    for category in DifficultyCategory::ALL {
        for _ in 0..SUITE_ENVS_PER_CATEGORY {
            // Rejection sampling: boundary draws that land on the wrong side
            // of a threshold (or an all-zero "simple" draw) are redrawn.
            let env = loop {
                let candidate = sample_category_env(category, rng);
                if difficulty_category(&candidate) == Ok(category) {
                    break candidate;
                }
            };
            suite.push((category, env));
        }
    }
    suite
}

/// Offset added to roughness by one local-generalisation mutation.
pub const LOCAL_ROUGHNESS_OFFSET: f64 = 2.4;
/// Offset added to both endpoints of a pair feature by one mutation.
pub const LOCAL_PAIR_OFFSET: f64 = 0.8;

/// Applies `n_mutations` difficulty-increasing mutations to an environment.
/// Each step picks one feature uniformly at random and adds its offset:
/// +2.4 roughness, +0.8 to both endpoints of a pair feature, +1 stair step
/// (the +0.8 offset rounded up to the integer grid). Values clamp to their
/// maxima, so the result never leaves the parameter bounds.
pub fn local_generalisation_suite(
    env: &EnvParams,
    rng: &mut ChaCha8Rng,
    n_mutations: u32,
) -> EnvParams {
    let bump = |(lo, hi): (f64, f64), max: f64| -> (f64, f64) {
        ((lo + LOCAL_PAIR_OFFSET).min(max), (hi + LOCAL_PAIR_OFFSET).min(max))
    };
    let mut out = *env;
    for _ in 0..n_mutations {
        match rng.gen_range(0..5u32) {
            0 => out.roughness = (out.roughness + LOCAL_ROUGHNESS_OFFSET).min(ROUGHNESS_MAX),
            1 => out.pit_gap = bump(out.pit_gap, PIT_GAP_MAX),
            2 => out.stump_height = bump(out.stump_height, STUMP_HEIGHT_MAX),
            3 => out.stair_height = bump(out.stair_height, STAIR_HEIGHT_MAX),
            _ => out.stair_steps = (out.stair_steps + 1).min(STAIR_STEPS_MAX),
        }
    }
    out
}

/// Two-sided Mann-Whitney U test with midrank tie handling. Returns
/// `(U, p)` where `U` is the smaller of the two rank-sum statistics. Small
/// pooled samples (`n_a + n_b <= 16`) get an exact p by enumerating every
/// rank assignment; larger samples use the normal approximation with tie
/// correction and continuity correction.
pub fn mann_whitney_u(a: &[f64], b: &[f64]) -> (f64, f64) {
    assert!(!a.is_empty() && !b.is_empty(), "both samples must be non-empty");
    let n_a = a.len();
    let n_b = b.len();
    let n = n_a + n_b;

    let mut pooled: Vec<(f64, bool)> = a
        .iter()
        .map(|&v| (v, true))
        .chain(b.iter().map(|&v| (v, false)))
        .collect();
    pooled.sort_by(|x, y| x.0.partial_cmp(&y.0).expect("samples must not contain NaN"));

    // Midranks plus the tie term sum(t^3 - t) for the variance correction.
    let mut ranks = vec![0.0; n];
    let mut tie_term = 0.0;
    let mut i = 0;
    while i < n {
        let mut j = i;
        while j < n && pooled[j].0 == pooled[i].0 {
            j += 1;
        }
        let midrank = (i + 1 + j) as f64 / 2.0;
        for rank in ranks.iter_mut().take(j).skip(i) {
            *rank = midrank;
        }
        let ties = (j - i) as f64;
        tie_term += ties * ties * ties - ties;
        i = j;
    }

    let rank_sum_a: f64 = ranks
        .iter()
        .zip(pooled.iter())
        .filter(|(_, &(_, from_a))| from_a)
        .map(|(&rank, _)| rank)
        .sum();
    let u_a = rank_sum_a - (n_a * (n_a + 1)) as f64 / 2.0;
    let u_b = (n_a * n_b) as f64 - u_a;
    let u = u_a.min(u_b);

    let p = if n <= 16 {
        exact_two_sided_p(&ranks, n_a, u)
    } else {
        approx_two_sided_p(u, n_a, n_b, tie_term)
    };
    (u, p)
}

/// Exact two-sided p: the probability, over all equally likely assignments of
/// the pooled midranks to sample a, of a U at least as extreme as observed in
/// either direction.
fn exact_two_sided_p(ranks: &[f64], n_a: usize, u_observed: f64) -> f64 {
    let n = ranks.len();
    let products = (n_a * (n - n_a)) as f64;
    let offset = (n_a * (n_a + 1)) as f64 / 2.0;
    let mut favourable = 0u64;
    let mut total = 0u64;
    // Iterate every n_a-subset of rank positions (Gosper's hack). Midranks
    // are multiples of 1/2, so the comparisons below are exact in f64.
    let mut mask: u32 = (1 << n_a) - 1;
    let limit: u32 = 1 << n;
    while mask < limit {
        let mut rank_sum = 0.0;
        let mut bits = mask;
        while bits != 0 {
            rank_sum += ranks[bits.trailing_zeros() as usize];
            bits &= bits - 1;
        }
        let u_1 = rank_sum - offset;
        if u_1 <= u_observed || u_1 >= products - u_observed {
            favourable += 1;
        }
        total += 1;
        let carry = mask & mask.wrapping_neg();
        let ripple = mask + carry;
        mask = ripple | (((mask ^ ripple) / carry) >> 2);
    }
    (favourable as f64 / total as f64).min(1.0)
}

/// Normal approximation with tie-corrected variance and continuity
/// correction. `u` is the smaller statistic, so the correction moves it
/// toward the mean.
fn approx_two_sided_p(u: f64, n_a: usize, n_b: usize, tie_term: f64) -> f64 {
    let n = (n_a + n_b) as f64;
    let products = (n_a * n_b) as f64;
    let mean = products / 2.0;
    let variance = products / 12.0 * ((n + 1.0) - tie_term / (n * (n - 1.0)));
    if variance <= 0.0 {
        return 1.0;
    }
    let z = (u - mean + 0.5) / variance.sqrt();
    (2.0 * std_normal_cdf(z)).min(1.0)
}

fn std_normal_cdf(z: f64) -> f64 {
    0.5 * erfc(-z / std::f64::consts::SQRT_2)
}

/// Complementary error function (Abramowitz & Stegun 7.1.26, absolute error
/// below 1.5e-7 - far inside the tolerance of the approximate branch).
fn erfc(x: f64) -> f64 {
    let t = 1.0 / (1.0 + 0.327_591_1 * x.abs());
    let poly = t * (0.254_829_592
        + t * (-0.284_496_736 + t * (1.421_413_741 + t * (-1.453_152_027 + t * 1.061_405_429))));
    let tail = poly * (-x * x).exp();
    if x >= 0.0 {
        tail
    } else {
        2.0 - tail
    }
}

/// Bonferroni correction: multiply each p-value by the number of comparisons
/// and cap at 1.
pub fn bonferroni(p_values: &[f64], m: usize) -> Vec<f64> {
    assert!(m >= p_values.len(), "m must cover every comparison");
    p_values.iter().map(|&p| (p * m as f64).min(1.0)).collect()
}
