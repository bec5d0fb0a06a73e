//! Revolute joints with optional angular motors and angle limits, solved by
//! sequential impulses. Motor torque accumulates per step and is clamped so
//! the applied torque magnitude never exceeds `max_motor_torque`.

use crate::body::BodyId;
use crate::math::Vec2;
use serde::{Deserialize, Serialize};

pub type JointId = usize;

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct RevoluteJointDef {
    pub body_a: BodyId,
    pub body_b: BodyId,
    /// Anchor in body A's centre-of-mass frame.
    pub local_anchor_a: Vec2,
    pub local_anchor_b: Vec2,
    /// Joint angle is `angle_b - angle_a - reference_angle`.
    pub reference_angle: f64,
    pub enable_motor: bool,
    pub motor_speed: f64,
    pub max_motor_torque: f64,
    pub enable_limit: bool,
    pub lower_limit: f64,
    pub upper_limit: f64,
}

impl RevoluteJointDef {
    pub fn new(body_a: BodyId, body_b: BodyId, local_anchor_a: Vec2, local_anchor_b: Vec2) -> Self {
        RevoluteJointDef {
            body_a,
            body_b,
            local_anchor_a,
            local_anchor_b,
            reference_angle: 0.0,
            enable_motor: false,
            motor_speed: 0.0,
            max_motor_torque: 0.0,
            enable_limit: false,
            lower_limit: 0.0,
            upper_limit: 0.0,
        }
    }

    pub fn with_motor(mut self, speed: f64, max_torque: f64) -> Self {
        self.enable_motor = true;
        self.motor_speed = speed;
        self.max_motor_torque = max_torque;
        self
    }

    pub fn with_limits(mut self, lower: f64, upper: f64) -> Self {
        assert!(lower <= upper, "joint limits out of order");
        self.enable_limit = true;
        self.lower_limit = lower;
        self.upper_limit = upper;
        self
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RevoluteJoint {
    pub def: RevoluteJointDef,
    // Per-step solver state.
    pub(crate) r_a: Vec2,
    pub(crate) r_b: Vec2,
    pub(crate) axial_mass: f64,
    pub(crate) pivot_impulse: Vec2,
    pub(crate) motor_impulse: f64,
    pub(crate) lower_impulse: f64,
    pub(crate) upper_impulse: f64,
    /// Motor torque actually applied during the most recent step.
    pub(crate) applied_motor_torque: f64,
}

impl RevoluteJoint {
    pub fn new(def: RevoluteJointDef) -> RevoluteJoint {
        RevoluteJoint {
            def,
            r_a: Vec2::ZERO,
            r_b: Vec2::ZERO,
            axial_mass: 0.0,
            pivot_impulse: Vec2::ZERO,
            motor_impulse: 0.0,
            lower_impulse: 0.0,
            upper_impulse: 0.0,
            applied_motor_torque: 0.0,
        }
    }

    pub fn set_motor(&mut self, speed: f64, max_torque: f64) {
        self.def.enable_motor = true;
        self.def.motor_speed = speed;
        self.def.max_motor_torque = max_torque;
    }

    /// Torque magnitude the motor exerted last step; bounded by
    /// `max_motor_torque` at every step.
    pub fn applied_motor_torque(&self) -> f64 {
        self.applied_motor_torque
    }
}
