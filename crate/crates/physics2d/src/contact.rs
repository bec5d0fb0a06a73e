//! Contact manifold generation.
//!
//! Terrain contacts are one-sided: body vertices are tested against each
//! ground segment's outward face and clipped to the segment span. Body-body
//! contacts use SAT over both polygons' face normals with reference-face
//! clipping. Manifolds are rebuilt from scratch every step (no warm
//! starting), which trades a little solver convergence for schedule
//! independence.

use crate::body::{Body, BodyId};
use crate::math::Vec2;

/// Allow contact points slightly beyond a segment's span so a vertex sliding
/// across a terrain junction never falls into the seam between segments.
const SEGMENT_SPAN_TOLERANCE: f64 = 0.02;
/// Ignore absurdly deep vertex penetrations: they mean the vertex belongs to
/// a neighbouring face (for example a foot next to a stump wall), not this one.
const MAX_PENETRATION: f64 = 1.0;

#[derive(Clone, Copy, Debug)]
pub(crate) struct ContactPoint {
    /// Contact point in the incident body's centre-of-mass frame.
    pub anchor_local: Vec2,
    pub r_a: Vec2,
    pub r_b: Vec2,
    pub normal_mass: f64,
    pub tangent_mass: f64,
    pub normal_impulse: f64,
    pub tangent_impulse: f64,
}

impl ContactPoint {
    fn new(anchor_local: Vec2) -> ContactPoint {
        ContactPoint {
            anchor_local,
            r_a: Vec2::ZERO,
            r_b: Vec2::ZERO,
            normal_mass: 0.0,
            tangent_mass: 0.0,
            normal_impulse: 0.0,
            tangent_impulse: 0.0,
        }
    }
}

/// The reference face the position solver measures separation against.
#[derive(Clone, Copy, Debug)]
pub(crate) enum RefFace {
    /// Terrain segment: fixed world-space plane.
    Terrain { origin: Vec2, normal: Vec2 },
    /// Face on a body, stored in that body's local frame.
    Body {
        body: BodyId,
        origin: Vec2,
        normal: Vec2,
    },
}

#[derive(Clone, Debug)]
pub(crate) struct Contact {
    /// `None` means the terrain plays the role of body A.
    pub a: Option<BodyId>,
    pub b: BodyId,
    /// World normal pointing from A towards B at generation time.
    pub normal: Vec2,
    pub friction: f64,
    pub face: RefFace,
    /// Body whose frame `anchor_local` points live in (the incident body).
    pub incident: BodyId,
    pub points: [ContactPoint; 2],
    pub count: usize,
}

/// One-sided collision of a polygon body against a terrain segment with
/// outward normal `normal`. Returns up to two deepest penetrating vertices.
/// `world_verts` are the body's vertices in world space (hoisted out so one
/// transform serves every candidate segment).
pub(crate) fn collide_polygon_segment(
    b_id: BodyId,
    body: &Body,
    world_verts: &[Vec2],
    p1: Vec2,
    p2: Vec2,
    normal: Vec2,
    terrain_friction: f64,
) -> Option<Contact> {
    let span = (p2 - p1).length();
    let tangent = (p2 - p1) * (1.0 / span);

    // (separation, along-segment coordinate, vertex index)
    let mut best: [(f64, usize); 2] = [(f64::INFINITY, usize::MAX); 2];
    let mut found = 0usize;
    for (i, &v) in world_verts.iter().enumerate() {
        let sep = (v - p1).dot(normal);
        if sep >= 0.0 || sep < -MAX_PENETRATION {
            continue;
        }
        let t = (v - p1).dot(tangent);
        if !(-SEGMENT_SPAN_TOLERANCE..=span + SEGMENT_SPAN_TOLERANCE).contains(&t) {
            continue;
        }
        found += 1;
        if sep < best[0].0 {
            best[1] = best[0];
            best[0] = (sep, i);
        } else if sep < best[1].0 {
            best[1] = (sep, i);
        }
    }
    if found == 0 {
        return None;
    }

    let count = found.min(2);
    let mut points = [ContactPoint::new(Vec2::ZERO); 2];
    for k in 0..count {
        points[k] = ContactPoint::new(body.shape.verts()[best[k].1]);
    }
    Some(Contact {
        a: None,
        b: b_id,
        normal,
        friction: (body.friction * terrain_friction).sqrt(),
        face: RefFace::Terrain { origin: p1, normal },
        incident: b_id,
        points,
        count,
    })
}

/// SAT collision between two convex polygons with reference-face clipping.
pub(crate) fn collide_polygons(a_id: BodyId, a: &Body, b_id: BodyId, b: &Body) -> Option<Contact> {
    let (sep_a, face_a) = max_separation(a, b);
    if sep_a > 0.0 {
        return None;
    }
    let (sep_b, face_b) = max_separation(b, a);
    if sep_b > 0.0 {
        return None;
    }

    // Prefer A's face as reference unless B's axis is clearly shallower.
    let (ref_body, ref_id, inc_body, inc_id, ref_face, flip) = if sep_b > sep_a + 1e-4 {
        (b, b_id, a, a_id, face_b, true)
    } else {
        (a, a_id, b, b_id, face_a, false)
    };

    let xf_ref = ref_body.transform();
    let xf_inc = inc_body.transform();
    let ref_verts = ref_body.shape.verts();
    let n_ref = ref_body.shape.normals()[ref_face];
    let n_world = xf_ref.rot.apply(n_ref);
    let v1 = xf_ref.apply(ref_verts[ref_face]);
    let v2 = xf_ref.apply(ref_verts[(ref_face + 1) % ref_verts.len()]);

    // Incident face: most anti-parallel face of the other polygon.
    let inc_normals = inc_body.shape.normals();
    let mut inc_face = 0;
    let mut min_dot = f64::INFINITY;
    for (i, n) in inc_normals.iter().enumerate() {
        let d = xf_inc.rot.apply(*n).dot(n_world);
        if d < min_dot {
            min_dot = d;
            inc_face = i;
        }
    }
    let inc_verts = inc_body.shape.verts();
    let i1 = xf_inc.apply(inc_verts[inc_face]);
    let i2 = xf_inc.apply(inc_verts[(inc_face + 1) % inc_verts.len()]);

    // Clip the incident edge to the reference face's side planes.
    let tangent = (v2 - v1).normalized();
    let clipped = clip_to_halfplane([i1, i2], -tangent, -tangent.dot(v1))
        .and_then(|pts| clip_to_halfplane(pts, tangent, tangent.dot(v2)))?;

    let mut points = [ContactPoint::new(Vec2::ZERO); 2];
    let mut count = 0;
    for p in clipped {
        let sep = (p - v1).dot(n_world);
        if sep <= 0.0 {
            points[count] = ContactPoint::new(xf_inc.apply_inv(p));
            count += 1;
        }
    }
    if count == 0 {
        return None;
    }

    // Contact normal must point A -> B regardless of which body is reference.
    let normal = if flip { -n_world } else { n_world };
    Some(Contact {
        a: Some(a_id),
        b: b_id,
        normal,
        friction: (a.friction * b.friction).sqrt(),
        face: RefFace::Body {
            body: ref_id,
            origin: ref_body.shape.verts()[ref_face],
            normal: n_ref,
        },
        incident: inc_id,
        points,
        count,
    })
}

/// Largest separation of `b` over all of `a`'s face axes.
fn max_separation(a: &Body, b: &Body) -> (f64, usize) {
    let xf_a = a.transform();
    let xf_b = b.transform();
    let mut best = f64::NEG_INFINITY;
    let mut best_face = 0;
    for (i, &n_local) in a.shape.normals().iter().enumerate() {
        let n = xf_a.rot.apply(n_local);
        let v = xf_a.apply(a.shape.verts()[i]);
        let mut min_proj = f64::INFINITY;
        for &w_local in b.shape.verts() {
            let proj = (xf_b.apply(w_local) - v).dot(n);
            if proj < min_proj {
                min_proj = proj;
            }
        }
        if min_proj > best {
            best = min_proj;
            best_face = i;
        }
    }
    (best, best_face)
}

/// Keeps the part of a segment on the side where `n . p <= offset`,
/// interpolating the crossing point. Returns `None` when fewer than two
/// points survive.
fn clip_to_halfplane(pts: [Vec2; 2], n: Vec2, offset: f64) -> Option<[Vec2; 2]> {
    let d0 = n.dot(pts[0]) - offset;
    let d1 = n.dot(pts[1]) - offset;
    match (d0 <= 0.0, d1 <= 0.0) {
        (true, true) => Some(pts),
        (false, false) => None,
        (keep0, _) => {
            let t = d0 / (d0 - d1);
            let crossing = pts[0] + (pts[1] - pts[0]) * t;
            if keep0 {
                Some([pts[0], crossing])
            } else {
                Some([crossing, pts[1]])
            }
        }
    }
}
