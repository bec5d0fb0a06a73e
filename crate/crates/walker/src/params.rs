//! Environment parameter vectors and their bounds.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Upper bound on the terrain roughness gain.
pub const ROUGHNESS_MAX: f64 = 10.0;
/// Upper bound on pit gap endpoints (in terrain-step units).
pub const PIT_GAP_MAX: f64 = 10.0;
/// Upper bound on stump height endpoints (in terrain-step units).
pub const STUMP_HEIGHT_MAX: f64 = 5.0;
/// Upper bound on stair height endpoints (in terrain-step units).
pub const STAIR_HEIGHT_MAX: f64 = 5.0;
/// Upper bound on the stair step count.
pub const STAIR_STEPS_MAX: u32 = 9;

/// Parameters of one terrain distribution.
///
/// Interval features are (low, high) pairs sampled uniformly per occurrence;
/// a zero high endpoint disables the feature. Stairs additionally require a
/// non-zero step count to be active.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnvParams {
    /// Gain on the smoothed random walk that shapes the ground profile.
    pub roughness: f64,
    /// Pit gap width range, in terrain-step units.
    pub pit_gap: (f64, f64),
    /// Stump height range, in terrain-step units.
    pub stump_height: (f64, f64),
    /// Stair rise-per-step range, in terrain-step units.
    pub stair_height: (f64, f64),
    /// Number of steps per staircase.
    pub stair_steps: u32,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EnvParamsError {
    #[error("{field} = {value} outside [0, {max}]")]
    OutOfBounds {
        field: &'static str,
        value: f64,
        max: f64,
    },
    #[error("{field} range is inverted: low {low} > high {high}")]
    InvertedRange {
        field: &'static str,
        low: f64,
        high: f64,
    },
    #[error("{field} = {value} is not finite")]
    NotFinite { field: &'static str, value: f64 },
}

impl EnvParams {
    /// The featureless flat environment.
    pub fn flat() -> Self {
        Self {
            roughness: 0.0,
            pit_gap: (0.0, 0.0),
            stump_height: (0.0, 0.0),
            stair_height: (0.0, 0.0),
            stair_steps: 0,
        }
    }

    /// True when every parameter is exactly zero.
    pub fn is_flat(&self) -> bool {
        *self == Self::flat()
    }

    /// Fixed 8-vector encoding: `[roughness, pit lo, pit hi, stump lo,
    /// stump hi, stair lo, stair hi, stair_steps]`.
    pub fn encode(&self) -> [f64; 8] {
        [
            self.roughness,
            self.pit_gap.0,
            self.pit_gap.1,
            self.stump_height.0,
            self.stump_height.1,
            self.stair_height.0,
            self.stair_height.1,
            f64::from(self.stair_steps),
        ]
    }

    /// Inverse of [`encode`](Self::encode); validates the result.
    pub fn decode(v: &[f64; 8]) -> Result<Self, EnvParamsError> {
        if !v[7].is_finite() || v[7] < 0.0 || v[7].fract() != 0.0 {
            return Err(EnvParamsError::NotFinite {
                field: "stair_steps",
                value: v[7],
            });
        }
        let params = Self {
            roughness: v[0],
            pit_gap: (v[1], v[2]),
            stump_height: (v[3], v[4]),
            stair_height: (v[5], v[6]),
            stair_steps: v[7] as u32,
        };
        params.validate()?;
        Ok(params)
    }

    /// Checks bounds, range ordering, and finiteness.
    pub fn validate(&self) -> Result<(), EnvParamsError> {
        let scalars: [(&'static str, f64, f64); 7] = [
            ("roughness", self.roughness, ROUGHNESS_MAX),
            ("pit_gap.low", self.pit_gap.0, PIT_GAP_MAX),
            ("pit_gap.high", self.pit_gap.1, PIT_GAP_MAX),
            ("stump_height.low", self.stump_height.0, STUMP_HEIGHT_MAX),
            ("stump_height.high", self.stump_height.1, STUMP_HEIGHT_MAX),
            ("stair_height.low", self.stair_height.0, STAIR_HEIGHT_MAX),
            ("stair_height.high", self.stair_height.1, STAIR_HEIGHT_MAX),
        ];
        for (field, value, max) in scalars {
            if !value.is_finite() {
                return Err(EnvParamsError::NotFinite { field, value });
            }
            if !(0.0..=max).contains(&value) {
                return Err(EnvParamsError::OutOfBounds { field, value, max });
            }
        }
        let ranges = [
            ("pit_gap", self.pit_gap),
            ("stump_height", self.stump_height),
            ("stair_height", self.stair_height),
        ];
        for (field, (low, high)) in ranges {
            if low > high {
                return Err(EnvParamsError::InvertedRange { field, low, high });
            }
        }
        if self.stair_steps > STAIR_STEPS_MAX {
            return Err(EnvParamsError::OutOfBounds {
                field: "stair_steps",
                value: f64::from(self.stair_steps),
                max: f64::from(STAIR_STEPS_MAX),
            });
        }
        Ok(())
    }

    /// Euclidean distance between the 8-vector encodings.
    pub fn distance(&self, other: &Self) -> f64 {
        let a = self.encode();
        let b = other.encode();
        a.iter()
            .zip(b.iter())
            .map(|(x, y)| (x - y) * (x - y))
            .sum::<f64>()
            .sqrt()
    }
}

impl Default for EnvParams {
    fn default() -> Self {
        Self::flat()
    }
}
