//! Walker genotypes: controller weights plus leg morphology.
//!
//! The controller is a linear three-layer network (24 -> 40 -> 40 -> 4, no
//! biases); actions are the raw outputs clipped to [-1, 1]. The morphology
//! holds the width and height of all four leg segments in world units.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::terrain::SCALE;

/// Observation vector length.
pub const N_INPUT: usize = 24;
/// Width of both hidden layers.
pub const N_HIDDEN: usize = 40;
/// Action vector length (hip and knee motors, left then right).
pub const N_OUTPUT: usize = 4;
/// Total controller weight count.
pub const N_WEIGHTS: usize = N_INPUT * N_HIDDEN + N_HIDDEN * N_HIDDEN + N_HIDDEN * N_OUTPUT;
/// Controller weights are clamped to this magnitude.
pub const WEIGHT_CLAMP: f64 = 30.0;
/// Morphology dimension count: (width, height) for four leg segments.
pub const N_MORPH: usize = 8;

const W2_OFFSET: usize = N_INPUT * N_HIDDEN;
const W3_OFFSET: usize = W2_OFFSET + N_HIDDEN * N_HIDDEN;

/// Leg segment sizes, flattened as
/// `[upper-left w, upper-left h, lower-left w, lower-left h,
///   upper-right w, upper-right h, lower-right w, lower-right h]`.
pub type Morphology = [f64; N_MORPH];

/// Baseline morphology: 8x34 upper and 6.4x34 lower segments, in pixels
/// before world scaling.
pub fn morph_baseline() -> Morphology {
    let upper_w = 8.0 / SCALE;
    let lower_w = 6.4 / SCALE;
    let h = 34.0 / SCALE;
    [upper_w, h, lower_w, h, upper_w, h, lower_w, h]
}

/// Per-dimension search bounds: +/-75% around the baseline.
pub fn morph_bounds(dim: usize) -> (f64, f64) {
    let b = morph_baseline()[dim];
    (0.25 * b, 1.75 * b)
}

/// True when every dimension lies within its bounds.
pub fn morph_in_bounds(m: &Morphology) -> bool {
    m.iter().enumerate().all(|(d, &v)| {
        let (lo, hi) = morph_bounds(d);
        v.is_finite() && v >= lo && v <= hi
    })
}

/// Mutation operator rates and magnitudes.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(default)]
pub struct MutationConfig {
    /// Per-gene probability of redrawing the gene from its init distribution.
    pub replacement_rate: f64,
    /// Per-gene probability of adding a bounded uniform offset.
    pub modification_rate: f64,
    /// Half-width of the weight offset distribution.
    pub weight_offset: f64,
    /// Morphology offset half-width, as a fraction of each dimension's range.
    pub morph_offset_fraction: f64,
}

impl Default for MutationConfig {
    fn default() -> Self {
        Self {
            replacement_rate: 0.0075,
            modification_rate: 0.075,
            weight_offset: 0.2,
            morph_offset_fraction: 0.16,
        }
    }
}

#[derive(Debug, Error)]
pub enum GenomeError {
    #[error("genotype blob is {got} bytes, expected {expected}")]
    BadLength { got: usize, expected: usize },
    #[error("genotype blob contains a non-finite value at index {index}")]
    NotFinite { index: usize },
    #[error("weight {index} has magnitude {value} beyond {WEIGHT_CLAMP}")]
    WeightOutOfRange { index: usize, value: f64 },
    #[error("morphology dimension {dim} = {value} outside [{lo}, {hi}]")]
    MorphOutOfRange {
        dim: usize,
        value: f64,
        lo: f64,
        hi: f64,
    },
}

/// One individual: controller weights, morphology, and (if evaluated) the
/// stored fitness. Any genetic change clears the fitness.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Genotype {
    /// `N_WEIGHTS` values: layer 1 then 2 then 3, each row-major
    /// `[input][output]`.
    pub weights: Vec<f64>,
    pub morphology: Morphology,
    pub fitness: Option<f64>,
}

impl Genotype {
    /// Draws a fresh individual: weights uniform on (-1, 1), morphology
    /// uniform within its bounds.
    pub fn init_random(rng: &mut ChaCha8Rng) -> Self {
        let weights = (0..N_WEIGHTS).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let mut morphology = [0.0; N_MORPH];
        for (d, m) in morphology.iter_mut().enumerate() {
            let (lo, hi) = morph_bounds(d);
            *m = rng.gen_range(lo..hi);
        }
        Self {
            weights,
            morphology,
            fitness: None,
        }
    }

    /// The all-zero controller with baseline morphology.
    pub fn zeroed() -> Self {
        Self {
            weights: vec![0.0; N_WEIGHTS],
            morphology: morph_baseline(),
            fitness: None,
        }
    }

    /// Network output before action clipping.
    pub fn forward_raw(&self, obs: &[f64; N_INPUT]) -> [f64; N_OUTPUT] {
        let w = &self.weights;
        let mut h1 = [0.0; N_HIDDEN];
        for (i, &o) in obs.iter().enumerate() {
            let row = &w[i * N_HIDDEN..(i + 1) * N_HIDDEN];
            for (j, h) in h1.iter_mut().enumerate() {
                *h += o * row[j];
            }
        }
        let mut h2 = [0.0; N_HIDDEN];
        for (i, &o) in h1.iter().enumerate() {
            let row = &w[W2_OFFSET + i * N_HIDDEN..W2_OFFSET + (i + 1) * N_HIDDEN];
            for (j, h) in h2.iter_mut().enumerate() {
                *h += o * row[j];
            }
        }
        let mut out = [0.0; N_OUTPUT];
        for (i, &o) in h2.iter().enumerate() {
            let row = &w[W3_OFFSET + i * N_OUTPUT..W3_OFFSET + (i + 1) * N_OUTPUT];
            for (k, a) in out.iter_mut().enumerate() {
                *a += o * row[k];
            }
        }
        out
    }

    /// Motor commands: raw network output clipped to [-1, 1].
    pub fn forward(&self, obs: &[f64; N_INPUT]) -> [f64; N_OUTPUT] {
        let mut out = self.forward_raw(obs);
        for a in &mut out {
            *a = a.clamp(-1.0, 1.0);
        }
        out
    }

    /// In-place mutation: each gene is independently redrawn with
    /// `replacement_rate`, then offset with `modification_rate`. Weights are
    /// clamped to `+/-WEIGHT_CLAMP`, morphology to its bounds. Fitness is
    /// cleared.
    pub fn mutate(&mut self, cfg: &MutationConfig, rng: &mut ChaCha8Rng) {
        for w in &mut self.weights {
            if rng.gen::<f64>() < cfg.replacement_rate {
                *w = rng.gen_range(-1.0..1.0);
            }
            if rng.gen::<f64>() < cfg.modification_rate {
                *w += rng.gen_range(-cfg.weight_offset..cfg.weight_offset);
            }
            *w = w.clamp(-WEIGHT_CLAMP, WEIGHT_CLAMP);
        }
        for (d, m) in self.morphology.iter_mut().enumerate() {
            let (lo, hi) = morph_bounds(d);
            if rng.gen::<f64>() < cfg.replacement_rate {
                *m = rng.gen_range(lo..hi);
            }
            if rng.gen::<f64>() < cfg.modification_rate {
                let half = cfg.morph_offset_fraction * (hi - lo);
                *m += rng.gen_range(-half..half);
            }
            *m = m.clamp(lo, hi);
        }
        self.fitness = None;
    }

    /// Serializes to the flat binary layout: all weights, then the eight
    /// morphology values, little-endian f64.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut buf = Vec::with_capacity((N_WEIGHTS + N_MORPH) * 8);
        for w in &self.weights {
            buf.extend_from_slice(&w.to_le_bytes());
        }
        for m in &self.morphology {
            buf.extend_from_slice(&m.to_le_bytes());
        }
        buf
    }

    /// Parses and validates the flat binary layout. The result carries no
    /// fitness.
    pub fn from_bytes(bytes: &[u8]) -> Result<Self, GenomeError> {
        let expected = (N_WEIGHTS + N_MORPH) * 8;
        if bytes.len() != expected {
            return Err(GenomeError::BadLength {
                got: bytes.len(),
                expected,
            });
        }
        let values: Vec<f64> = bytes
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect();
        for (index, v) in values.iter().enumerate() {
            if !v.is_finite() {
                return Err(GenomeError::NotFinite { index });
            }
        }
        let weights = values[..N_WEIGHTS].to_vec();
        for (index, &value) in weights.iter().enumerate() {
            if value.abs() > WEIGHT_CLAMP {
                return Err(GenomeError::WeightOutOfRange { index, value });
            }
        }
        let mut morphology = [0.0; N_MORPH];
        morphology.copy_from_slice(&values[N_WEIGHTS..]);
        for (dim, &value) in morphology.iter().enumerate() {
            let (lo, hi) = morph_bounds(dim);
            if !(lo..=hi).contains(&value) {
                return Err(GenomeError::MorphOutOfRange { dim, value, lo, hi });
            }
        }
        Ok(Self {
            weights,
            morphology,
            fitness: None,
        })
    }
}

/// Uniform crossover: each gene comes from one uniformly chosen parent, and
/// the two children take complementary choices. Both children carry no
/// fitness.
pub fn crossover_uniform(a: &Genotype, b: &Genotype, rng: &mut ChaCha8Rng) -> (Genotype, Genotype) {
    let mut c1 = a.clone();
    let mut c2 = b.clone();
    c1.fitness = None;
    c2.fitness = None;
    for i in 0..N_WEIGHTS {
        if rng.gen::<bool>() {
            c1.weights[i] = b.weights[i];
            c2.weights[i] = a.weights[i];
        }
    }
    for d in 0..N_MORPH {
        if rng.gen::<bool>() {
            c1.morphology[d] = b.morphology[d];
            c2.morphology[d] = a.morphology[d];
        }
    }
    (c1, c2)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::derive_rng;

    #[test]
    fn weight_count_and_layout_offsets() {
        assert_eq!(N_WEIGHTS, 2720);
        assert_eq!(W2_OFFSET, 960);
        assert_eq!(W3_OFFSET, 2560);
    }

    #[test]
    fn init_respects_bounds_and_is_reproducible() {
        let g1 = Genotype::init_random(&mut derive_rng(1, &[9]));
        let g2 = Genotype::init_random(&mut derive_rng(1, &[9]));
        assert_eq!(g1, g2);
        assert!(g1.weights.iter().all(|w| w.abs() < 1.0));
        assert!(morph_in_bounds(&g1.morphology));
        assert!(g1.fitness.is_none());
    }

    #[test]
    fn zero_controller_outputs_zero() {
        let g = Genotype::zeroed();
        let obs = [0.7; N_INPUT];
        assert_eq!(g.forward(&obs), [0.0; N_OUTPUT]);
    }

    #[test]
    fn forward_raw_matches_composed_matrix() {
        let g = Genotype::init_random(&mut derive_rng(3, &[1]));
        let mut obs = [0.0; N_INPUT];
        let mut rng = derive_rng(3, &[2]);
        for o in &mut obs {
            *o = rng.gen_range(-1.0..1.0);
        }
        // Compose M = W1 * W2 * W3 explicitly (inputs index rows).
        let w = &g.weights;
        let mut m12 = vec![0.0; N_INPUT * N_HIDDEN]; // [input][h2]
        for i in 0..N_INPUT {
            for j in 0..N_HIDDEN {
                let mut acc = 0.0;
                for k in 0..N_HIDDEN {
                    acc += w[i * N_HIDDEN + k] * w[W2_OFFSET + k * N_HIDDEN + j];
                }
                m12[i * N_HIDDEN + j] = acc;
            }
        }
        let mut composed = vec![0.0; N_INPUT * N_OUTPUT];
        for i in 0..N_INPUT {
            for j in 0..N_OUTPUT {
                let mut acc = 0.0;
                for k in 0..N_HIDDEN {
                    acc += m12[i * N_HIDDEN + k] * w[W3_OFFSET + k * N_OUTPUT + j];
                }
                composed[i * N_OUTPUT + j] = acc;
            }
        }
        let mut expect = [0.0; N_OUTPUT];
        for j in 0..N_OUTPUT {
            for i in 0..N_INPUT {
                expect[j] += obs[i] * composed[i * N_OUTPUT + j];
            }
        }
        let got = g.forward_raw(&obs);
        for j in 0..N_OUTPUT {
            assert!((got[j] - expect[j]).abs() < 1e-9);
        }
    }

    #[test]
    fn crossover_children_are_complementary() {
        let mut rng = derive_rng(5, &[1]);
        let a = Genotype::init_random(&mut rng);
        let b = Genotype::init_random(&mut rng);
        let (c1, c2) = crossover_uniform(&a, &b, &mut rng);
        assert!(c1.fitness.is_none() && c2.fitness.is_none());
        let mut swapped = 0usize;
        for i in 0..N_WEIGHTS {
            let straight = c1.weights[i] == a.weights[i] && c2.weights[i] == b.weights[i];
            let crossed = c1.weights[i] == b.weights[i] && c2.weights[i] == a.weights[i];
            assert!(straight || crossed);
            if crossed {
                swapped += 1;
            }
        }
        for d in 0..N_MORPH {
            let straight = c1.morphology[d] == a.morphology[d] && c2.morphology[d] == b.morphology[d];
            let crossed = c1.morphology[d] == b.morphology[d] && c2.morphology[d] == a.morphology[d];
            assert!(straight || crossed);
        }
        // Roughly half the genes should swap.
        assert!(swapped > N_WEIGHTS / 3 && swapped < 2 * N_WEIGHTS / 3);
    }

    #[test]
    fn mutation_touches_expected_gene_fraction_and_respects_bounds() {
        let cfg = MutationConfig::default();
        let mut changed = 0usize;
        let mut total = 0usize;
        for rep in 0..50u64 {
            let mut rng = derive_rng(rep, &[7]);
            let parent = Genotype::init_random(&mut rng);
            let mut child = parent.clone();
            child.mutate(&cfg, &mut rng);
            assert!(child.fitness.is_none());
            assert!(child.weights.iter().all(|w| w.abs() <= WEIGHT_CLAMP));
            assert!(morph_in_bounds(&child.morphology));
            for i in 0..N_WEIGHTS {
                total += 1;
                if child.weights[i] != parent.weights[i] {
                    changed += 1;
                }
            }
        }
        // Per-gene change probability is 1 - (1-0.0075)(1-0.075) ~ 0.0819.
        let fraction = changed as f64 / total as f64;
        assert!(
            (0.070..0.095).contains(&fraction),
            "observed change fraction {fraction}"
        );
    }

    #[test]
    fn bytes_roundtrip_is_exact() {
        let g = Genotype::init_random(&mut derive_rng(11, &[4]));
        let bytes = g.to_bytes();
        assert_eq!(bytes.len(), (N_WEIGHTS + N_MORPH) * 8);
        let back = Genotype::from_bytes(&bytes).unwrap();
        assert_eq!(back.weights, g.weights);
        assert_eq!(back.morphology, g.morphology);
        assert!(back.fitness.is_none());
    }

    #[test]
    fn from_bytes_rejects_bad_blobs() {
        let g = Genotype::init_random(&mut derive_rng(12, &[4]));
        let mut bytes = g.to_bytes();
        assert!(Genotype::from_bytes(&bytes[..100]).is_err());
        let nan = f64::NAN.to_le_bytes();
        bytes[0..8].copy_from_slice(&nan);
        assert!(matches!(
            Genotype::from_bytes(&bytes),
            Err(GenomeError::NotFinite { index: 0 })
        ));
        let mut bytes = g.to_bytes();
        let big = 31.0f64.to_le_bytes();
        bytes[8..16].copy_from_slice(&big);
        assert!(matches!(
            Genotype::from_bytes(&bytes),
            Err(GenomeError::WeightOutOfRange { index: 1, .. })
        ));
        let mut bytes = g.to_bytes();
        let tiny = 1e-6f64.to_le_bytes();
        bytes[N_WEIGHTS * 8..N_WEIGHTS * 8 + 8].copy_from_slice(&tiny);
        assert!(matches!(
            Genotype::from_bytes(&bytes),
            Err(GenomeError::MorphOutOfRange { dim: 0, .. })
        ));
    }
}
