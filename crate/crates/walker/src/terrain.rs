//! Procedural terrain courses.
//!
//! A course is a single left-to-right polyline: a flat start pad, then a
//! smoothed random-walk ground profile with obstacle features (pits, stumps,
//! staircases) injected at fixed column intervals. All randomness comes from
//! one RNG derived from the episode seed, so a `(params, seed)` pair names
//! exactly one course.

use physics2d::Vec2;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::params::EnvParams;
use crate::rng::{derive_rng, STREAM_TERRAIN};

/// World scale: world units are pixels / SCALE.
pub const SCALE: f64 = 30.0;
/// Horizontal extent of one terrain column.
pub const TERRAIN_STEP: f64 = 14.0 / SCALE;
/// Number of terrain columns in a course.
pub const TERRAIN_LENGTH: usize = 200;
/// Columns of perfectly flat ground at the start of every course.
pub const TERRAIN_STARTPAD: usize = 20;
/// Nominal ground height the random walk reverts toward.
pub const TERRAIN_HEIGHT: f64 = 400.0 / SCALE / 4.0;
/// Course friction used for every ground segment.
pub const TERRAIN_FRICTION: f64 = 2.5;
/// Column interval between obstacle sites after the start pad.
pub const FEATURE_INTERVAL: usize = 12;
/// Column of the course-complete flag.
pub const FLAG_SEGMENT: usize = TERRAIN_LENGTH - 10;
/// Pit depth in columns.
const PIT_DEPTH_COLUMNS: f64 = 4.0;

/// A generated course.
#[derive(Debug, Clone)]
pub struct TerrainLayout {
    /// Ground polyline, strictly left to right (vertical walls repeat an x).
    pub points: Vec<Vec2>,
    /// Walker spawn x, in the middle of the start pad.
    pub start_x: f64,
    /// Reaching this x completes the course.
    pub flag_x: f64,
    /// Ground height at the spawn point.
    pub ground_height: f64,
}

#[derive(Clone, Copy)]
enum Feature {
    Pit,
    Stump,
    Stairs,
}

fn uniform_in(rng: &mut ChaCha8Rng, (lo, hi): (f64, f64)) -> f64 {
    if hi > lo {
        rng.gen_range(lo..hi)
    } else {
        lo
    }
}

fn revert_sign(value: f64) -> f64 {
    if value > 0.0 {
        1.0
    } else if value < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// Generates the course named by `(params, seed)`.
///
/// `params` must already be validated; out-of-range values are the caller's
/// bug, not a sampling outcome.
pub fn generate_terrain(params: &EnvParams, seed: u64) -> TerrainLayout {
    let mut rng = derive_rng(seed, &[STREAM_TERRAIN]);
    let step = TERRAIN_STEP;

    let pit_active = params.pit_gap.1 > 0.0;
    let stump_active = params.stump_height.1 > 0.0;
    let stairs_active = params.stair_height.1 > 0.0 && params.stair_steps >= 1;
    let mut active: Vec<Feature> = Vec::with_capacity(3);
    if pit_active {
        active.push(Feature::Pit);
    }
    if stump_active {
        active.push(Feature::Stump);
    }
    if stairs_active {
        active.push(Feature::Stairs);
    }

    let mut points: Vec<Vec2> = Vec::with_capacity(TERRAIN_LENGTH + 64);
    let mut y = TERRAIN_HEIGHT;
    let mut velocity = 0.0_f64;
    let mut stairs_ascend = true;
    points.push(Vec2::new(0.0, y));

    // `i` is the column of the most recently placed grid point.
    let mut i: usize = 0;
    while i < TERRAIN_LENGTH {
        let at_site = !active.is_empty()
            && i >= TERRAIN_STARTPAD + FEATURE_INTERVAL
            && (i - TERRAIN_STARTPAD) % FEATURE_INTERVAL == 0
            && i + FEATURE_INTERVAL <= FLAG_SEGMENT;
        if at_site {
            let x = i as f64 * step;
            let feature = active[rng.gen_range(0..active.len())];
            match feature {
                Feature::Pit => {
                    let gap = uniform_in(&mut rng, params.pit_gap);
                    let floor = y - PIT_DEPTH_COLUMNS * step;
                    let far = x + gap * step;
                    points.push(Vec2::new(x, floor));
                    points.push(Vec2::new(far, floor));
                    points.push(Vec2::new(far, y));
                    // Resume the grid at the first column strictly past the
                    // far wall.
                    i += gap.floor() as usize + 1;
                }
                Feature::Stump => {
                    let h = uniform_in(&mut rng, params.stump_height);
                    let top = y + h * step;
                    points.push(Vec2::new(x, top));
                    points.push(Vec2::new(x + step, top));
                    points.push(Vec2::new(x + step, y));
                    i += 1;
                }
                Feature::Stairs => {
                    let rise = uniform_in(&mut rng, params.stair_height) * step;
                    let rise = if stairs_ascend { rise } else { -rise };
                    stairs_ascend = !stairs_ascend;
                    for s in 1..=params.stair_steps as usize {
                        let tread = y + s as f64 * rise;
                        points.push(Vec2::new(x + (s - 1) as f64 * step, tread));
                        points.push(Vec2::new(x + s as f64 * step, tread));
                    }
                    y += params.stair_steps as f64 * rise;
                    i += params.stair_steps as usize;
                }
            }
        } else {
            velocity = 0.8 * velocity + 0.01 * revert_sign(TERRAIN_HEIGHT - y);
            if i + 1 > TERRAIN_STARTPAD {
                velocity += rng.gen_range(-1.0..1.0) / SCALE;
            }
            y += params.roughness * velocity;
            i += 1;
            points.push(Vec2::new(i as f64 * step, y));
        }
    }

    TerrainLayout {
        points,
        start_x: step * TERRAIN_STARTPAD as f64 / 2.0,
        flag_x: step * FLAG_SEGMENT as f64,
        ground_height: TERRAIN_HEIGHT,
    }
}
