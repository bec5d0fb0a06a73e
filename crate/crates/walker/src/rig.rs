//! Walker body construction.
//!
//! The walker is a hull plus two legs of two segments each, connected by
//! motorised revolute joints with hard angle limits. Segment sizes come from
//! the morphology vector; everything else (densities, frictions, joint
//! limits, motor strength) is fixed.

use physics2d::{Body, BodyId, JointId, Polygon, RevoluteJointDef, Vec2, World};

use crate::genome::{morph_bounds, GenomeError, Morphology};
use crate::terrain::SCALE;

/// Peak torque of every joint motor.
pub const MOTORS_TORQUE: f64 = 80.0;
/// Commanded hip speed at full action magnitude, rad/s.
pub const SPEED_HIP: f64 = 4.0;
/// Commanded knee speed at full action magnitude, rad/s.
pub const SPEED_KNEE: f64 = 6.0;
/// Hip anchor offset below the hull origin, hull frame.
pub const LEG_DOWN: f64 = -8.0 / SCALE;
/// Hip joint angle limits, radians.
pub const HIP_LIMITS: (f64, f64) = (-0.8, 1.1);
/// Knee joint angle limits, radians.
pub const KNEE_LIMITS: (f64, f64) = (-1.6, -0.1);
/// Collision group shared by all walker parts: the walker never collides
/// with itself and its lidar ignores its own body.
pub const WALKER_GROUP: i32 = 1;

const HULL_DENSITY: f64 = 5.0;
const HULL_FRICTION: f64 = 0.1;
const LEG_DENSITY: f64 = 1.0;
const LEG_FRICTION: f64 = 0.2;
/// Initial outward lean of each leg, radians (left negative).
const INITIAL_LEG_SPLAY: f64 = 0.05;
/// Initial gap between the lowest foot point and the ground.
const SPAWN_CLEARANCE: f64 = 0.01;

/// Handles to the five bodies and four joints of one walker.
///
/// `legs` and `joints` are ordered left upper, left lower, right upper,
/// right lower and hip-left, knee-left, hip-right, knee-right respectively —
/// the same order the observation and action vectors use.
#[derive(Debug, Clone, Copy)]
pub struct WalkerRig {
    pub hull: BodyId,
    pub legs: [BodyId; 4],
    pub joints: [JointId; 4],
}

/// Hull outline in its original pixel frame, scaled to world units.
pub fn hull_polygon() -> Polygon {
    let px = [
        (-30.0, 9.0),
        (6.0, 9.0),
        (34.0, 1.0),
        (34.0, -8.0),
        (-30.0, -8.0),
    ];
    Polygon::new(
        px.iter()
            .map(|&(x, y)| Vec2::new(x / SCALE, y / SCALE))
            .collect(),
    )
}

/// Builds a walker standing at `start_x` with its feet just above
/// `ground_y`. Rejects morphologies outside the search bounds.
pub fn build_walker(
    world: &mut World,
    morph: &Morphology,
    start_x: f64,
    ground_y: f64,
) -> Result<WalkerRig, GenomeError> {
    for (dim, &value) in morph.iter().enumerate() {
        let (lo, hi) = morph_bounds(dim);
        if !value.is_finite() || !(lo..=hi).contains(&value) {
            return Err(GenomeError::MorphOutOfRange { dim, value, lo, hi });
        }
    }

    let hull_shape = hull_polygon();
    let hull_shift = hull_shape.centroid_shift();
    // Hull origin height: both feet must clear the ground when the legs hang
    // straight down from the hip anchor.
    let max_leg_extent = (morph[1] + morph[3]).max(morph[5] + morph[7]);
    let origin = Vec2::new(
        start_x,
        ground_y - LEG_DOWN + max_leg_extent + SPAWN_CLEARANCE,
    );
    let hull = world.add_body(
        Body::new(hull_shape, origin + hull_shift, 0.0, HULL_DENSITY, HULL_FRICTION)
            .with_group(WALKER_GROUP),
    );
    // Anchors below are in centre-of-mass frames; the hull's original frame
    // is offset by its centroid.
    let hip_anchor_local = Vec2::new(0.0, LEG_DOWN) - hull_shift;
    let hip_anchor_world = origin + Vec2::new(0.0, LEG_DOWN);

    let mut legs = [0; 4];
    let mut joints = [0; 4];
    for (side, splay) in [(0usize, -INITIAL_LEG_SPLAY), (1, INITIAL_LEG_SPLAY)] {
        let m = &morph[4 * side..4 * side + 4];
        let (upper_w, upper_h, lower_w, lower_h) = (m[0], m[1], m[2], m[3]);
        // A leg frame hangs straight down, rotated by the splay angle:
        // local (0, -d) maps to (d sin a, -d cos a).
        let down = |d: f64| Vec2::new(d * splay.sin(), -d * splay.cos());

        let upper = world.add_body(
            Body::new(
                Polygon::rect(upper_w, upper_h),
                hip_anchor_world + down(upper_h / 2.0),
                splay,
                LEG_DENSITY,
                LEG_FRICTION,
            )
            .with_group(WALKER_GROUP),
        );
        let hip = world.add_joint(
            RevoluteJointDef::new(hull, upper, hip_anchor_local, Vec2::new(0.0, upper_h / 2.0))
                .with_motor(0.0, MOTORS_TORQUE)
                .with_limits(HIP_LIMITS.0, HIP_LIMITS.1),
        );

        let knee_anchor_world = hip_anchor_world + down(upper_h);
        let lower = world.add_body(
            Body::new(
                Polygon::rect(lower_w, lower_h),
                knee_anchor_world + down(lower_h / 2.0),
                splay,
                LEG_DENSITY,
                LEG_FRICTION,
            )
            .with_group(WALKER_GROUP),
        );
        let knee = world.add_joint(
            RevoluteJointDef::new(
                upper,
                lower,
                Vec2::new(0.0, -upper_h / 2.0),
                Vec2::new(0.0, lower_h / 2.0),
            )
            .with_motor(0.0, MOTORS_TORQUE)
            .with_limits(KNEE_LIMITS.0, KNEE_LIMITS.1),
        );

        legs[2 * side] = upper;
        legs[2 * side + 1] = lower;
        joints[2 * side] = hip;
        joints[2 * side + 1] = knee;
    }

    Ok(WalkerRig {
        hull,
        legs,
        joints,
    })
}

/// Lowest foot point (lower-leg vertices) of the rig in world coordinates.
pub fn lowest_foot_y(world: &World, rig: &WalkerRig) -> f64 {
    let mut lowest = f64::INFINITY;
    for &leg in &[rig.legs[1], rig.legs[3]] {
        let body = world.body(leg);
        let t = body.transform();
        for v in body.shape.verts() {
            lowest = lowest.min(t.apply(*v).y);
        }
    }
    lowest
}
