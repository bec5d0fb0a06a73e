//! The simulation world: bodies, revolute joints and a static terrain
//! polyline, advanced by symplectic (semi-implicit) Euler with sequential
//! impulse velocity solving and non-linear Gauss-Seidel position correction.
//!
//! Determinism contract: stepping is a pure function of the world state and
//! `dt`. All iteration happens in insertion order over plain vectors, no
//! warm starting is carried between steps, and no global state is consulted,
//! so identical worlds stepped with identical timesteps produce bitwise
//! identical results regardless of scheduling around them.

use crate::body::{Body, BodyId};
use crate::contact::{collide_polygon_segment, collide_polygons, Contact, RefFace};
use crate::joint::{JointId, RevoluteJoint, RevoluteJointDef};
use crate::math::{cross_sv, segment_intersection, solve22, Vec2};
use serde::{Deserialize, Serialize};

/// Solver tuning. The defaults are the values every simulation in this
/// project runs with; they are serialized alongside run artifacts so results
/// stay attributable to the exact solver settings.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default)]
pub struct EngineConfig {
    pub gravity: Vec2,
    pub velocity_iterations: u32,
    pub position_iterations: u32,
    /// Penetration tolerated at rest; the position solver corrects towards
    /// half this value so settled bodies stay strictly below it.
    pub slop: f64,
    /// Fraction of remaining penetration removed per position iteration.
    pub baumgarte: f64,
    /// Largest positional correction applied in a single iteration.
    pub max_correction: f64,
    /// Largest angular limit correction (radians) per position iteration.
    pub max_angular_correction: f64,
}

impl Default for EngineConfig {
    fn default() -> EngineConfig {
        EngineConfig {
            gravity: Vec2::new(0.0, -10.0),
            velocity_iterations: 8,
            position_iterations: 3,
            slop: 0.005,
            baumgarte: 0.2,
            max_correction: 0.2,
            max_angular_correction: 8.0 * std::f64::consts::PI / 180.0,
        }
    }
}

#[derive(Clone, Debug)]
struct TerrainSegment {
    p1: Vec2,
    p2: Vec2,
    normal: Vec2,
}

/// Static ground geometry: an ordered polyline whose outward normals are the
/// left-hand perpendiculars of its segments (up, for ground laid out with
/// increasing x). Segments are bucketed along x for broad-phase queries.
#[derive(Clone, Debug)]
pub struct Terrain {
    points: Vec<Vec2>,
    segments: Vec<TerrainSegment>,
    friction: f64,
    x_min: f64,
    inv_bucket_width: f64,
    buckets: Vec<Vec<u32>>,
}

impl Terrain {
    pub fn new(points: Vec<Vec2>, friction: f64) -> Terrain {
        assert!(points.len() >= 2, "terrain needs at least one segment");
        let mut segments = Vec::with_capacity(points.len() - 1);
        for w in points.windows(2) {
            let (p1, p2) = (w[0], w[1]);
            let d = p2 - p1;
            let len = d.length();
            if len < 1e-9 {
                continue;
            }
            segments.push(TerrainSegment {
                p1,
                p2,
                normal: Vec2::new(-d.y, d.x) * (1.0 / len),
            });
        }
        assert!(!segments.is_empty(), "terrain has no usable segments");

        let x_min = points.iter().map(|p| p.x).fold(f64::INFINITY, f64::min);
        let x_max = points.iter().map(|p| p.x).fold(f64::NEG_INFINITY, f64::max);
        let bucket_width = ((x_max - x_min) / 256.0).max(0.25);
        let n_buckets = (((x_max - x_min) / bucket_width).ceil() as usize + 1).max(1);
        let mut buckets = vec![Vec::new(); n_buckets];
        let inv_bucket_width = 1.0 / bucket_width;
        for (i, seg) in segments.iter().enumerate() {
            let lo = ((seg.p1.x.min(seg.p2.x) - x_min) * inv_bucket_width) as usize;
            let hi = (((seg.p1.x.max(seg.p2.x) - x_min) * inv_bucket_width) as usize)
                .min(n_buckets - 1);
            for bucket in &mut buckets[lo..=hi] {
                bucket.push(i as u32);
            }
        }
        Terrain {
            points,
            segments,
            friction,
            x_min,
            inv_bucket_width,
            buckets,
        }
    }

    pub fn points(&self) -> &[Vec2] {
        &self.points
    }

    pub fn friction(&self) -> f64 {
        self.friction
    }

    /// Ground height directly below/above `x` (highest segment surface at
    /// that abscissa); `None` outside the terrain's x extent.
    pub fn height_at(&self, x: f64) -> Option<f64> {
        let mut best: Option<f64> = None;
        for seg in &self.segments {
            let (lo, hi) = (seg.p1.x.min(seg.p2.x), seg.p1.x.max(seg.p2.x));
            if x < lo || x > hi || (hi - lo) < 1e-12 {
                continue;
            }
            let t = (x - seg.p1.x) / (seg.p2.x - seg.p1.x);
            let y = seg.p1.y + t * (seg.p2.y - seg.p1.y);
            best = Some(best.map_or(y, |b: f64| b.max(y)));
        }
        best
    }

    fn candidates(&self, x_lo: f64, x_hi: f64, out: &mut Vec<u32>) {
        out.clear();
        for bucket in self.bucket_range(x_lo, x_hi) {
            out.extend_from_slice(bucket);
        }
        out.sort_unstable();
        out.dedup();
    }

    /// Buckets overlapping `[x_lo, x_hi]`. Segment ids may repeat across
    /// buckets; callers that cannot tolerate duplicates should go through
    /// `candidates`.
    fn bucket_range(&self, x_lo: f64, x_hi: f64) -> &[Vec<u32>] {
        if self.buckets.is_empty() {
            return &[];
        }
        let last = self.buckets.len() - 1;
        let lo = (((x_lo - self.x_min) * self.inv_bucket_width).floor().max(0.0) as usize).min(last);
        let hi = (((x_hi - self.x_min) * self.inv_bucket_width).floor().max(0.0) as usize).min(last);
        &self.buckets[lo..=hi]
    }
}

/// Upper bound on the joint-only refinement passes appended to position
/// correction (the loop exits as soon as anchors are coincident).
const MAX_JOINT_REFINE_PASSES: usize = 50;

#[derive(Debug, Default)]
pub struct World {
    pub config: EngineConfig,
    bodies: Vec<Body>,
    joints: Vec<RevoluteJoint>,
    terrain: Option<Terrain>,
    step_count: u64,
    // Scratch buffers reused across steps to keep the hot loop allocation-free.
    contacts: Vec<Contact>,
    scratch_segments: Vec<u32>,
    scratch_verts: Vec<Vec2>,
}

impl World {
    pub fn new(config: EngineConfig) -> World {
        World {
            config,
            ..World::default()
        }
    }

    pub fn add_body(&mut self, body: Body) -> BodyId {
        self.bodies.push(body);
        self.bodies.len() - 1
    }

    pub fn add_joint(&mut self, def: RevoluteJointDef) -> JointId {
        assert!(def.body_a < self.bodies.len() && def.body_b < self.bodies.len());
        assert_ne!(def.body_a, def.body_b, "joint must connect distinct bodies");
        self.joints.push(RevoluteJoint::new(def));
        self.joints.len() - 1
    }

    pub fn set_terrain(&mut self, points: Vec<Vec2>, friction: f64) {
        self.terrain = Some(Terrain::new(points, friction));
    }

    pub fn terrain(&self) -> Option<&Terrain> {
        self.terrain.as_ref()
    }

    pub fn body(&self, id: BodyId) -> &Body {
        &self.bodies[id]
    }

    pub fn body_mut(&mut self, id: BodyId) -> &mut Body {
        &mut self.bodies[id]
    }

    pub fn bodies(&self) -> &[Body] {
        &self.bodies
    }

    pub fn joint(&self, id: JointId) -> &RevoluteJoint {
        &self.joints[id]
    }

    pub fn joint_mut(&mut self, id: JointId) -> &mut RevoluteJoint {
        &mut self.joints[id]
    }

    pub fn step_count(&self) -> u64 {
        self.step_count
    }

    /// Current joint angle (`angle_b - angle_a - reference_angle`).
    pub fn joint_angle(&self, id: JointId) -> f64 {
        let j = &self.joints[id];
        self.bodies[j.def.body_b].angle - self.bodies[j.def.body_a].angle - j.def.reference_angle
    }

    /// Current joint angular speed.
    pub fn joint_speed(&self, id: JointId) -> f64 {
        let j = &self.joints[id];
        self.bodies[j.def.body_b].angular_velocity - self.bodies[j.def.body_a].angular_velocity
    }

    /// World positions of the two joint anchors (coincident up to solver
    /// tolerance while the simulation is healthy).
    pub fn joint_anchors(&self, id: JointId) -> (Vec2, Vec2) {
        let j = &self.joints[id];
        let a = self.bodies[j.def.body_a].transform().apply(j.def.local_anchor_a);
        let b = self.bodies[j.def.body_b].transform().apply(j.def.local_anchor_b);
        (a, b)
    }

    /// Sum of kinetic and gravitational potential energy, with heights
    /// measured from `reference_y`.
    pub fn mechanical_energy(&self, reference_y: f64) -> f64 {
        let g = self.config.gravity.length();
        self.bodies
            .iter()
            .filter(|b| !b.is_static)
            .map(|b| b.kinetic_energy() + b.mass() * g * (b.position.y - reference_y))
            .sum()
    }

    /// Casts a ray of `max_length` from `origin` along `dir` and returns the
    /// fraction [0, 1] of the distance to the first hit (1.0 on a miss).
    /// Terrain always blocks; bodies block unless they share the caster's
    /// non-zero collision group.
    pub fn raycast(&self, origin: Vec2, dir: Vec2, max_length: f64, caster_group: i32) -> f64 {
        assert!(max_length > 0.0, "raycast needs a positive length");
        let end = origin + dir.normalized() * max_length;
        let mut best: f64 = 1.0;

        if let Some(terrain) = &self.terrain {
            for bucket in terrain.bucket_range(origin.x.min(end.x), origin.x.max(end.x)) {
                for &i in bucket {
                    let seg = &terrain.segments[i as usize];
                    if let Some(t) = segment_intersection(origin, end, seg.p1, seg.p2) {
                        best = best.min(t);
                    }
                }
            }
        }

        for body in &self.bodies {
            if body.collision_group != 0 && body.collision_group == caster_group {
                continue;
            }
            let xf = body.transform();
            let verts = body.shape.verts();
            for i in 0..verts.len() {
                let p1 = xf.apply(verts[i]);
                let p2 = xf.apply(verts[(i + 1) % verts.len()]);
                if let Some(t) = segment_intersection(origin, end, p1, p2) {
                    best = best.min(t);
                }
            }
        }
        best
    }

    /// Advances the simulation by `dt` seconds.
    pub fn step(&mut self, dt: f64) {
        assert!(dt > 0.0, "timestep must be positive");
        let inv_dt = 1.0 / dt;
        let gravity = self.config.gravity;

        // 1. Integrate forces into velocities (semi-implicit Euler).
        for body in &mut self.bodies {
            if body.is_static {
                body.force = Vec2::ZERO;
                body.torque = 0.0;
                continue;
            }
            body.linear_velocity += (gravity + body.force * body.inv_mass) * dt;
            body.angular_velocity += body.torque * body.inv_inertia * dt;
            body.force = Vec2::ZERO;
            body.torque = 0.0;
        }

        // 2. Narrow phase at current positions; rebuilt every step.
        self.generate_contacts();

        // 3. Initialise solver state.
        self.init_contact_masses();
        for joint in &mut self.joints {
            let a = &self.bodies[joint.def.body_a];
            let b = &self.bodies[joint.def.body_b];
            joint.r_a = a.transform().rot.apply(joint.def.local_anchor_a);
            joint.r_b = b.transform().rot.apply(joint.def.local_anchor_b);
            let k = a.inv_inertia + b.inv_inertia;
            joint.axial_mass = if k > 0.0 { 1.0 / k } else { 0.0 };
            joint.pivot_impulse = Vec2::ZERO;
            joint.motor_impulse = 0.0;
            joint.lower_impulse = 0.0;
            joint.upper_impulse = 0.0;
        }

        // 4. Velocity iterations.
        for _ in 0..self.config.velocity_iterations {
            self.solve_joint_velocities(dt, inv_dt);
            self.solve_contact_velocities();
        }

        // 5. Integrate velocities into positions.
        for body in &mut self.bodies {
            if body.is_static {
                continue;
            }
            body.position += body.linear_velocity * dt;
            body.angle += body.angular_velocity * dt;
        }

        // 6. Position correction (does not touch velocities).
        for _ in 0..self.config.position_iterations {
            self.solve_contact_positions();
            let _ = self.solve_joint_positions();
        }
        // Articulated chains converge slowly under Gauss-Seidel right after
        // impacts; refine joint coincidence alone until anchors are tight and
        // limit overshoot is negligible (it converges geometrically, and the
        // velocity-level speculative limit stops it accumulating, so a few
        // milliradians is already invisible next to the solver slop). Stop
        // early if a pass makes no progress.
        let mut prev_limit = f64::INFINITY;
        for _ in 0..MAX_JOINT_REFINE_PASSES {
            let (pivot_error, limit_error) = self.solve_joint_positions();
            if pivot_error <= 0.5 * self.config.slop
                && (limit_error <= 5e-3 || limit_error >= 0.95 * prev_limit)
            {
                break;
            }
            prev_limit = limit_error;
        }

        // 7. Bookkeeping.
        for joint in &mut self.joints {
            joint.applied_motor_torque = joint.motor_impulse * inv_dt;
        }
        self.step_count += 1;
    }

    fn generate_contacts(&mut self) {
        let mut contacts = std::mem::take(&mut self.contacts);
        let mut candidates = std::mem::take(&mut self.scratch_segments);
        contacts.clear();

        for body in &mut self.bodies {
            body.terrain_contact = false;
        }

        if let Some(terrain) = &self.terrain {
            let mut world_verts = std::mem::take(&mut self.scratch_verts);
            for id in 0..self.bodies.len() {
                let body = &self.bodies[id];
                if body.is_static {
                    continue;
                }
                let r = body.shape.radius();
                terrain.candidates(body.position.x - r, body.position.x + r, &mut candidates);
                let xf = body.transform();
                world_verts.clear();
                world_verts.extend(body.shape.verts().iter().map(|&v| xf.apply(v)));
                let mut touched = false;
                for &si in candidates.iter() {
                    let seg = &terrain.segments[si as usize];
                    if let Some(c) = collide_polygon_segment(
                        id,
                        body,
                        &world_verts,
                        seg.p1,
                        seg.p2,
                        seg.normal,
                        terrain.friction,
                    ) {
                        touched = true;
                        contacts.push(c);
                    }
                }
                if touched {
                    self.bodies[id].terrain_contact = true;
                }
            }
            self.scratch_verts = world_verts;
        }

        for i in 0..self.bodies.len() {
            for j in (i + 1)..self.bodies.len() {
                let (a, b) = (&self.bodies[i], &self.bodies[j]);
                if a.is_static && b.is_static {
                    continue;
                }
                if a.collision_group != 0 && a.collision_group == b.collision_group {
                    continue;
                }
                let dist = b.position - a.position;
                let reach = a.shape.radius() + b.shape.radius();
                if dist.length_squared() > reach * reach {
                    continue;
                }
                if let Some(c) = collide_polygons(i, a, j, b) {
                    contacts.push(c);
                }
            }
        }

        self.contacts = contacts;
        self.scratch_segments = candidates;
    }

    fn init_contact_masses(&mut self) {
        for contact in &mut self.contacts {
            let n = contact.normal;
            let t = n.perp();
            let (inv_mass_a, inv_i_a, pos_a) = match contact.a {
                Some(a) => {
                    let body = &self.bodies[a];
                    (body.inv_mass, body.inv_inertia, body.position)
                }
                None => (0.0, 0.0, Vec2::ZERO),
            };
            let body_b = &self.bodies[contact.b];
            let xf_inc = self.bodies[contact.incident].transform();
            for point in contact.points.iter_mut().take(contact.count) {
                let p = xf_inc.apply(point.anchor_local);
                point.r_a = p - pos_a;
                point.r_b = p - body_b.position;
                let rn_a = point.r_a.cross(n);
                let rn_b = point.r_b.cross(n);
                let kn = inv_mass_a
                    + body_b.inv_mass
                    + inv_i_a * rn_a * rn_a
                    + body_b.inv_inertia * rn_b * rn_b;
                point.normal_mass = if kn > 0.0 { 1.0 / kn } else { 0.0 };
                let rt_a = point.r_a.cross(t);
                let rt_b = point.r_b.cross(t);
                let kt = inv_mass_a
                    + body_b.inv_mass
                    + inv_i_a * rt_a * rt_a
                    + body_b.inv_inertia * rt_b * rt_b;
                point.tangent_mass = if kt > 0.0 { 1.0 / kt } else { 0.0 };
                point.normal_impulse = 0.0;
                point.tangent_impulse = 0.0;
            }
        }
    }

    fn solve_joint_velocities(&mut self, dt: f64, inv_dt: f64) {
        for ji in 0..self.joints.len() {
            let (ia, ib, def, r_a, r_b, axial_mass) = {
                let j = &self.joints[ji];
                (j.def.body_a, j.def.body_b, j.def, j.r_a, j.r_b, j.axial_mass)
            };
            let inv_m_a = self.bodies[ia].inv_mass;
            let inv_i_a = self.bodies[ia].inv_inertia;
            let inv_m_b = self.bodies[ib].inv_mass;
            let inv_i_b = self.bodies[ib].inv_inertia;

            // Motor.
            if def.enable_motor && axial_mass > 0.0 {
                let w_a = self.bodies[ia].angular_velocity;
                let w_b = self.bodies[ib].angular_velocity;
                let cdot = w_b - w_a - def.motor_speed;
                let impulse = -axial_mass * cdot;
                let max_impulse = def.max_motor_torque * dt;
                let j = &mut self.joints[ji];
                let old = j.motor_impulse;
                j.motor_impulse = (old + impulse).clamp(-max_impulse, max_impulse);
                let delta = j.motor_impulse - old;
                self.bodies[ia].angular_velocity -= inv_i_a * delta;
                self.bodies[ib].angular_velocity += inv_i_b * delta;
            }

            // Limits, with a speculative term so fast joints do not blow
            // through the limit within a single step.
            if def.enable_limit && axial_mass > 0.0 {
                let angle =
                    self.bodies[ib].angle - self.bodies[ia].angle - def.reference_angle;
                {
                    let c = angle - def.lower_limit;
                    let cdot = self.bodies[ib].angular_velocity
                        - self.bodies[ia].angular_velocity;
                    let impulse = -axial_mass * (cdot + c.max(0.0) * inv_dt);
                    let j = &mut self.joints[ji];
                    let old = j.lower_impulse;
                    j.lower_impulse = (old + impulse).max(0.0);
                    let delta = j.lower_impulse - old;
                    self.bodies[ia].angular_velocity -= inv_i_a * delta;
                    self.bodies[ib].angular_velocity += inv_i_b * delta;
                }
                {
                    let c = def.upper_limit - angle;
                    let cdot = self.bodies[ia].angular_velocity
                        - self.bodies[ib].angular_velocity;
                    let impulse = -axial_mass * (cdot + c.max(0.0) * inv_dt);
                    let j = &mut self.joints[ji];
                    let old = j.upper_impulse;
                    j.upper_impulse = (old + impulse).max(0.0);
                    let delta = j.upper_impulse - old;
                    self.bodies[ia].angular_velocity += inv_i_a * delta;
                    self.bodies[ib].angular_velocity -= inv_i_b * delta;
                }
            }

            // Point-to-point pivot.
            {
                let va = self.bodies[ia].linear_velocity;
                let wa = self.bodies[ia].angular_velocity;
                let vb = self.bodies[ib].linear_velocity;
                let wb = self.bodies[ib].angular_velocity;
                let cdot = vb + cross_sv(wb, r_b) - va - cross_sv(wa, r_a);
                let k11 = inv_m_a + inv_m_b + inv_i_a * r_a.y * r_a.y + inv_i_b * r_b.y * r_b.y;
                let k12 = -inv_i_a * r_a.x * r_a.y - inv_i_b * r_b.x * r_b.y;
                let k22 = inv_m_a + inv_m_b + inv_i_a * r_a.x * r_a.x + inv_i_b * r_b.x * r_b.x;
                let impulse = solve22(k11, k12, k22, -cdot);
                self.joints[ji].pivot_impulse += impulse;
                self.bodies[ia].linear_velocity -= impulse * inv_m_a;
                self.bodies[ia].angular_velocity -= inv_i_a * r_a.cross(impulse);
                self.bodies[ib].linear_velocity += impulse * inv_m_b;
                self.bodies[ib].angular_velocity += inv_i_b * r_b.cross(impulse);
            }
        }
    }

    fn solve_contact_velocities(&mut self) {
        for ci in 0..self.contacts.len() {
            let (a, b, n, friction, count) = {
                let c = &self.contacts[ci];
                (c.a, c.b, c.normal, c.friction, c.count)
            };
            let t = n.perp();
            let (inv_m_a, inv_i_a) = match a {
                Some(a) => (self.bodies[a].inv_mass, self.bodies[a].inv_inertia),
                None => (0.0, 0.0),
            };
            let inv_m_b = self.bodies[b].inv_mass;
            let inv_i_b = self.bodies[b].inv_inertia;

            // Normal impulses first, then friction bounded by them.
            for pi in 0..count {
                let (r_a, r_b, normal_mass, old) = {
                    let p = &self.contacts[ci].points[pi];
                    (p.r_a, p.r_b, p.normal_mass, p.normal_impulse)
                };
                let dv = self.relative_velocity(a, b, r_a, r_b);
                let vn = dv.dot(n);
                let new = (old - normal_mass * vn).max(0.0);
                self.contacts[ci].points[pi].normal_impulse = new;
                let p = n * (new - old);
                self.apply_contact_impulse(a, b, r_a, r_b, p, inv_m_a, inv_i_a, inv_m_b, inv_i_b);
            }
            for pi in 0..count {
                let (r_a, r_b, tangent_mass, normal_impulse, old) = {
                    let p = &self.contacts[ci].points[pi];
                    (p.r_a, p.r_b, p.tangent_mass, p.normal_impulse, p.tangent_impulse)
                };
                let dv = self.relative_velocity(a, b, r_a, r_b);
                let vt = dv.dot(t);
                let bound = friction * normal_impulse;
                let new = (old - tangent_mass * vt).clamp(-bound, bound);
                self.contacts[ci].points[pi].tangent_impulse = new;
                let p = t * (new - old);
                self.apply_contact_impulse(a, b, r_a, r_b, p, inv_m_a, inv_i_a, inv_m_b, inv_i_b);
            }
        }
    }

    fn relative_velocity(&self, a: Option<BodyId>, b: BodyId, r_a: Vec2, r_b: Vec2) -> Vec2 {
        let vb = self.bodies[b].linear_velocity + cross_sv(self.bodies[b].angular_velocity, r_b);
        match a {
            Some(a) => {
                let va =
                    self.bodies[a].linear_velocity + cross_sv(self.bodies[a].angular_velocity, r_a);
                vb - va
            }
            None => vb,
        }
    }

    #[allow(clippy::too_many_arguments)]
    fn apply_contact_impulse(
        &mut self,
        a: Option<BodyId>,
        b: BodyId,
        r_a: Vec2,
        r_b: Vec2,
        p: Vec2,
        inv_m_a: f64,
        inv_i_a: f64,
        inv_m_b: f64,
        inv_i_b: f64,
    ) {
        if let Some(a) = a {
            self.bodies[a].linear_velocity -= p * inv_m_a;
            self.bodies[a].angular_velocity -= inv_i_a * r_a.cross(p);
        }
        self.bodies[b].linear_velocity += p * inv_m_b;
        self.bodies[b].angular_velocity += inv_i_b * r_b.cross(p);
    }

    fn solve_contact_positions(&mut self) {
        let slop_target = 0.5 * self.config.slop;
        let baumgarte = self.config.baumgarte;
        let max_correction = self.config.max_correction;

        for ci in 0..self.contacts.len() {
            let (face, incident, count) = {
                let c = &self.contacts[ci];
                (c.face, c.incident, c.count)
            };
            // Reference body (terrain: none) and its outward face in world
            // coordinates at the *current* positions.
            let (ref_body, n, face_origin) = match face {
                RefFace::Terrain { origin, normal } => (None, normal, origin),
                RefFace::Body { body, origin, normal } => {
                    let xf = self.bodies[body].transform();
                    (Some(body), xf.rot.apply(normal), xf.apply(origin))
                }
            };
            let (inv_m_r, inv_i_r, pos_r) = match ref_body {
                Some(r) => {
                    let body = &self.bodies[r];
                    (body.inv_mass, body.inv_inertia, body.position)
                }
                None => (0.0, 0.0, Vec2::ZERO),
            };

            for pi in 0..count {
                let anchor_local = self.contacts[ci].points[pi].anchor_local;
                let xf_inc = self.bodies[incident].transform();
                let p = xf_inc.apply(anchor_local);
                let separation = (p - face_origin).dot(n);
                let c = (baumgarte * (separation + slop_target)).clamp(-max_correction, 0.0);
                if c >= 0.0 {
                    continue;
                }
                let inc = &self.bodies[incident];
                let r_inc = p - inc.position;
                let r_ref = p - pos_r;
                let rn_inc = r_inc.cross(n);
                let rn_ref = r_ref.cross(n);
                let k = inc.inv_mass
                    + inv_m_r
                    + inc.inv_inertia * rn_inc * rn_inc
                    + inv_i_r * rn_ref * rn_ref;
                if k <= 0.0 {
                    continue;
                }
                let impulse = n * (-c / k);
                {
                    let inc = &mut self.bodies[incident];
                    let inv_m = inc.inv_mass;
                    let inv_i = inc.inv_inertia;
                    inc.position += impulse * inv_m;
                    inc.angle += inv_i * r_inc.cross(impulse);
                }
                if let Some(r) = ref_body {
                    let rb = &mut self.bodies[r];
                    let inv_m = rb.inv_mass;
                    let inv_i = rb.inv_inertia;
                    rb.position -= impulse * inv_m;
                    rb.angle -= inv_i * r_ref.cross(impulse);
                }
            }
        }
    }

    /// One position pass over all joints; returns the worst pivot separation
    /// and the worst limit violation observed before correction.
    fn solve_joint_positions(&mut self) -> (f64, f64) {
        let max_ang = self.config.max_angular_correction;
        let mut worst_error: f64 = 0.0;
        let mut worst_limit: f64 = 0.0;
        for ji in 0..self.joints.len() {
            let def = &self.joints[ji].def;
            let (ia, ib) = (def.body_a, def.body_b);
            let (enable_limit, lower_limit, upper_limit, reference_angle) =
                (def.enable_limit, def.lower_limit, def.upper_limit, def.reference_angle);
            let (anchor_a, anchor_b) = (def.local_anchor_a, def.local_anchor_b);

            // Angle limits.
            if enable_limit {
                let inv_i_a = self.bodies[ia].inv_inertia;
                let inv_i_b = self.bodies[ib].inv_inertia;
                let k = inv_i_a + inv_i_b;
                if k > 0.0 {
                    let angle = self.bodies[ib].angle - self.bodies[ia].angle - reference_angle;
                    let violation = if angle < lower_limit {
                        angle - lower_limit
                    } else if angle > upper_limit {
                        angle - upper_limit
                    } else {
                        0.0
                    };
                    worst_limit = worst_limit.max(violation.abs());
                    let c = violation.clamp(-max_ang, max_ang);
                    if c != 0.0 {
                        let impulse = -c / k;
                        self.bodies[ia].angle -= inv_i_a * impulse;
                        self.bodies[ib].angle += inv_i_b * impulse;
                    }
                }
            }

            // Pivot coincidence.
            let xf_a = self.bodies[ia].transform();
            let xf_b = self.bodies[ib].transform();
            let r_a = xf_a.rot.apply(anchor_a);
            let r_b = xf_b.rot.apply(anchor_b);
            let c = (self.bodies[ib].position + r_b) - (self.bodies[ia].position + r_a);
            worst_error = worst_error.max(c.length());
            let inv_m_a = self.bodies[ia].inv_mass;
            let inv_i_a = self.bodies[ia].inv_inertia;
            let inv_m_b = self.bodies[ib].inv_mass;
            let inv_i_b = self.bodies[ib].inv_inertia;
            let k11 = inv_m_a + inv_m_b + inv_i_a * r_a.y * r_a.y + inv_i_b * r_b.y * r_b.y;
            let k12 = -inv_i_a * r_a.x * r_a.y - inv_i_b * r_b.x * r_b.y;
            let k22 = inv_m_a + inv_m_b + inv_i_a * r_a.x * r_a.x + inv_i_b * r_b.x * r_b.x;
            let impulse = solve22(k11, k12, k22, -c);
            self.bodies[ia].position -= impulse * inv_m_a;
            self.bodies[ia].angle -= inv_i_a * r_a.cross(impulse);
            self.bodies[ib].position += impulse * inv_m_b;
            self.bodies[ib].angle += inv_i_b * r_b.cross(impulse);
        }
        (worst_error, worst_limit)
    }

    /// Deepest current penetration of `body` into the terrain (0 when clear);
    /// intended for settling diagnostics and tests.
    pub fn terrain_penetration(&self, id: BodyId) -> f64 {
        let Some(terrain) = &self.terrain else {
            return 0.0;
        };
        let body = &self.bodies[id];
        let xf = body.transform();
        let r = body.shape.radius();
        let mut candidates = Vec::new();
        terrain.candidates(body.position.x - r, body.position.x + r, &mut candidates);
        let mut deepest: f64 = 0.0;
        for &si in &candidates {
            let seg = &terrain.segments[si as usize];
            let span = (seg.p2 - seg.p1).length();
            let tangent = (seg.p2 - seg.p1) * (1.0 / span);
            for &v_local in body.shape.verts() {
                let v = xf.apply(v_local);
                let t = (v - seg.p1).dot(tangent);
                if !(0.0..=span).contains(&t) {
                    continue;
                }
                let sep = (v - seg.p1).dot(seg.normal);
                if sep < 0.0 {
                    deepest = deepest.max(-sep);
                }
            }
        }
        deepest
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::shape::Polygon;

    fn flat_world() -> World {
        let mut w = World::new(EngineConfig::default());
        w.set_terrain(vec![Vec2::new(-50.0, 0.0), Vec2::new(50.0, 0.0)], 2.5);
        w
    }

    #[test]
    fn static_body_never_moves() {
        let mut w = flat_world();
        let id = w.add_body(Body::new_static(
            Polygon::rect(1.0, 1.0),
            Vec2::new(0.0, 3.0),
            0.0,
            0.5,
        ));
        for _ in 0..100 {
            w.step(1.0 / 50.0);
        }
        assert_eq!(w.body(id).position, Vec2::new(0.0, 3.0));
        assert_eq!(w.body(id).linear_velocity, Vec2::ZERO);
    }

    #[test]
    fn free_fall_matches_symplectic_euler() {
        let mut w = World::new(EngineConfig::default());
        let id = w.add_body(Body::new(
            Polygon::rect(1.0, 1.0),
            Vec2::new(0.0, 10.0),
            0.0,
            1.0,
            0.5,
        ));
        let dt = 1.0 / 50.0;
        w.step(dt);
        // v1 = g*dt, y1 = y0 + v1*dt.
        let b = w.body(id);
        assert!((b.linear_velocity.y + 10.0 * dt).abs() < 1e-12);
        assert!((b.position.y - (10.0 - 10.0 * dt * dt)).abs() < 1e-12);
    }

    #[test]
    fn dropped_box_settles_within_slop() {
        let mut w = flat_world();
        let id = w.add_body(Body::new(
            Polygon::rect(1.0, 1.0),
            Vec2::new(0.0, 1.0),
            0.0,
            1.0,
            0.5,
        ));
        for _ in 0..500 {
            w.step(1.0 / 50.0);
        }
        let b = w.body(id);
        assert!(b.linear_velocity.length() < 1e-3, "box still moving");
        let penetration = w.terrain_penetration(id);
        assert!(
            penetration < w.config.slop,
            "resting penetration {penetration} exceeds slop"
        );
        // Resting height: half extents minus the tolerated overlap.
        assert!((b.position.y - 0.5).abs() < w.config.slop);
    }

    #[test]
    fn raycast_hits_flat_ground() {
        let w = flat_world();
        let frac = w.raycast(Vec2::new(0.0, 1.0), Vec2::new(0.0, -1.0), 2.0, 0);
        assert!((frac - 0.5).abs() < 1e-12);
    }

    #[test]
    fn raycast_miss_returns_one() {
        let w = flat_world();
        let frac = w.raycast(Vec2::new(0.0, 5.0), Vec2::new(0.0, 1.0), 3.0, 0);
        assert_eq!(frac, 1.0);
    }

    #[test]
    fn raycast_ignores_same_group_bodies() {
        let mut w = flat_world();
        w.add_body(
            Body::new(Polygon::rect(1.0, 1.0), Vec2::new(0.0, 2.0), 0.0, 1.0, 0.5)
                .with_group(7),
        );
        let hit_own = w.raycast(Vec2::new(0.0, 4.0), Vec2::new(0.0, -1.0), 4.0, 7);
        assert!((hit_own - 1.0).abs() < 1e-9, "own group should not block");
        let hit_other = w.raycast(Vec2::new(0.0, 4.0), Vec2::new(0.0, -1.0), 4.0, 0);
        assert!(hit_other < 0.5, "foreign ray should hit the box");
    }

    #[test]
    fn stepping_is_deterministic() {
        let build = || {
            let mut w = flat_world();
            let a = w.add_body(Body::new(
                Polygon::rect(0.4, 1.2),
                Vec2::new(0.0, 2.0),
                0.3,
                1.0,
                0.5,
            ));
            let b = w.add_body(Body::new(
                Polygon::rect(0.4, 1.2),
                Vec2::new(0.1, 3.2),
                -0.2,
                1.0,
                0.5,
            ));
            let jd = RevoluteJointDef::new(a, b, Vec2::new(0.0, 0.6), Vec2::new(0.0, -0.6))
                .with_motor(2.0, 40.0)
                .with_limits(-1.0, 1.0);
            w.add_joint(jd);
            w
        };
        let mut w1 = build();
        let mut w2 = build();
        for _ in 0..300 {
            w1.step(1.0 / 50.0);
            w2.step(1.0 / 50.0);
        }
        for (b1, b2) in w1.bodies().iter().zip(w2.bodies()) {
            assert_eq!(b1.position.x.to_bits(), b2.position.x.to_bits());
            assert_eq!(b1.position.y.to_bits(), b2.position.y.to_bits());
            assert_eq!(b1.angle.to_bits(), b2.angle.to_bits());
            assert_eq!(b1.linear_velocity.x.to_bits(), b2.linear_velocity.x.to_bits());
            assert_eq!(b1.linear_velocity.y.to_bits(), b2.linear_velocity.y.to_bits());
            assert_eq!(b1.angular_velocity.to_bits(), b2.angular_velocity.to_bits());
        }
    }

    #[test]
    fn motor_torque_stays_clamped() {
        let mut w = flat_world();
        let a = w.add_body(Body::new(
            Polygon::rect(2.0, 0.4),
            Vec2::new(0.0, 3.0),
            0.0,
            5.0,
            0.5,
        ));
        let b = w.add_body(Body::new(
            Polygon::rect(0.3, 1.5),
            Vec2::new(0.0, 2.0),
            0.0,
            1.0,
            0.5,
        ));
        let jid = w.add_joint(
            RevoluteJointDef::new(a, b, Vec2::new(0.0, -0.2), Vec2::new(0.0, 0.75))
                .with_motor(6.0, 25.0),
        );
        for _ in 0..200 {
            w.step(1.0 / 50.0);
            assert!(w.joint(jid).applied_motor_torque().abs() <= 25.0 + 1e-9);
        }
    }

    #[test]
    fn joint_limits_are_respected() {
        let mut w = World::new(EngineConfig::default());
        let anchor = w.add_body(Body::new_static(
            Polygon::rect(0.5, 0.5),
            Vec2::new(0.0, 5.0),
            0.0,
            0.5,
        ));
        let arm = w.add_body(Body::new(
            Polygon::rect(0.2, 2.0),
            Vec2::new(0.0, 4.0),
            0.0,
            1.0,
            0.5,
        ));
        let jid = w.add_joint(
            RevoluteJointDef::new(anchor, arm, Vec2::ZERO, Vec2::new(0.0, 1.0))
                .with_motor(10.0, 500.0)
                .with_limits(-0.5, 0.5),
        );
        for _ in 0..400 {
            w.step(1.0 / 50.0);
        }
        let angle = w.joint_angle(jid);
        assert!(
            angle <= 0.5 + 0.02 && angle >= -0.5 - 0.02,
            "angle {angle} violated limits"
        );
    }

    #[test]
    fn joint_anchors_stay_coincident_under_load() {
        let mut w = flat_world();
        let a = w.add_body(Body::new(
            Polygon::rect(0.4, 1.2),
            Vec2::new(0.0, 1.8),
            0.0,
            5.0,
            0.5,
        ));
        let b = w.add_body(Body::new(
            Polygon::rect(0.3, 1.2),
            Vec2::new(0.0, 0.6),
            0.0,
            1.0,
            0.5,
        ));
        let jid = w.add_joint(
            RevoluteJointDef::new(a, b, Vec2::new(0.0, -0.6), Vec2::new(0.0, 0.6))
                .with_motor(-3.0, 80.0),
        );
        for _ in 0..300 {
            w.step(1.0 / 50.0);
            let (pa, pb) = w.joint_anchors(jid);
            assert!(
                (pa - pb).length() <= 1e-2,
                "anchors drifted apart: {}",
                (pa - pb).length()
            );
        }
    }

    #[test]
    fn boxes_stack_without_sinking() {
        let mut w = flat_world();
        let lower = w.add_body(Body::new(
            Polygon::rect(1.0, 1.0),
            Vec2::new(0.0, 0.51),
            0.0,
            1.0,
            0.5,
        ));
        let upper = w.add_body(Body::new(
            Polygon::rect(1.0, 1.0),
            Vec2::new(0.05, 1.6),
            0.0,
            1.0,
            0.5,
        ));
        for _ in 0..400 {
            w.step(1.0 / 50.0);
        }
        assert!((w.body(lower).position.y - 0.5).abs() < 0.02);
        assert!((w.body(upper).position.y - 1.5).abs() < 0.05);
    }
}
