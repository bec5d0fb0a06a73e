//! A small deterministic 2D rigid-body engine tailored to articulated
//! walkers on a static terrain polyline.
//!
//! Scope and guarantees:
//!
//! * convex polygon bodies, revolute joints with motors and angle limits;
//! * sequential-impulse velocity solving with accumulated clamping, and
//!   non-linear Gauss-Seidel position correction (no warm starting, fully
//!   inelastic contacts);
//! * semi-implicit Euler integration under constant gravity;
//! * bitwise deterministic stepping: results depend only on the world state
//!   and the timestep, never on thread count or platform scheduling;
//! * ray casts against terrain and bodies with collision-group filtering.

mod body;
mod contact;
mod joint;
mod math;
mod shape;
mod world;

pub use body::{Body, BodyId};
pub use joint::{JointId, RevoluteJoint, RevoluteJointDef};
pub use math::{segment_intersection, Rot, Transform, Vec2};
pub use shape::Polygon;
pub use world::{EngineConfig, Terrain, World};
