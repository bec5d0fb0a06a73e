//! Rigid bodies: a convex polygon plus kinematic state and mass data.

use crate::math::{Transform, Vec2};
use crate::shape::Polygon;
use serde::{Deserialize, Serialize};

pub type BodyId = usize;

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Body {
    /// World position of the centre of mass.
    pub position: Vec2,
    pub angle: f64,
    pub linear_velocity: Vec2,
    pub angular_velocity: f64,
    pub shape: Polygon,
    pub friction: f64,
    pub density: f64,
    /// Bodies sharing the same non-zero group neither collide with each other
    /// nor block each other's rays.
    pub collision_group: i32,
    pub is_static: bool,
    pub(crate) inv_mass: f64,
    pub(crate) inv_inertia: f64,
    pub(crate) force: Vec2,
    pub(crate) torque: f64,
    /// True when any contact with the terrain was generated this step.
    pub(crate) terrain_contact: bool,
}

impl Body {
    pub fn new(shape: Polygon, position: Vec2, angle: f64, density: f64, friction: f64) -> Body {
        assert!(density > 0.0, "density must be positive");
        let mass = density * shape.area();
        let inertia = density * shape.second_moment();
        Body {
            position,
            angle,
            linear_velocity: Vec2::ZERO,
            angular_velocity: 0.0,
            shape,
            friction,
            density,
            collision_group: 0,
            is_static: false,
            inv_mass: 1.0 / mass,
            inv_inertia: 1.0 / inertia,
            force: Vec2::ZERO,
            torque: 0.0,
            terrain_contact: false,
        }
    }

    pub fn new_static(shape: Polygon, position: Vec2, angle: f64, friction: f64) -> Body {
        let mut body = Body::new(shape, position, angle, 1.0, friction);
        body.is_static = true;
        body.inv_mass = 0.0;
        body.inv_inertia = 0.0;
        body
    }

    pub fn with_group(mut self, group: i32) -> Body {
        self.collision_group = group;
        self
    }

    pub fn mass(&self) -> f64 {
        if self.is_static {
            f64::INFINITY
        } else {
            1.0 / self.inv_mass
        }
    }

    pub fn transform(&self) -> Transform {
        Transform::new(self.position, self.angle)
    }

    pub fn apply_force_to_center(&mut self, force: Vec2) {
        self.force += force;
    }

    pub fn apply_torque(&mut self, torque: f64) {
        self.torque += torque;
    }

    /// Velocity of the world-space point `p` as carried by this body.
    pub fn velocity_at(&self, p: Vec2) -> Vec2 {
        self.linear_velocity + crate::math::cross_sv(self.angular_velocity, p - self.position)
    }

    pub fn touching_terrain(&self) -> bool {
        self.terrain_contact
    }

    pub fn kinetic_energy(&self) -> f64 {
        if self.is_static {
            return 0.0;
        }
        let m = 1.0 / self.inv_mass;
        let i = 1.0 / self.inv_inertia;
        0.5 * m * self.linear_velocity.length_squared()
            + 0.5 * i * self.angular_velocity * self.angular_velocity
    }
}
