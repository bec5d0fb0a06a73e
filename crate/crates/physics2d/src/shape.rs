//! Convex polygon shapes. Vertices are stored counter-clockwise in the body
//! frame with the centroid at the origin, so a body's position is always its
//! centre of mass.

use crate::math::Vec2;
use serde::{Deserialize, Serialize};

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Polygon {
    verts: Vec<Vec2>,
    normals: Vec<Vec2>,
    /// Offset from the originally supplied vertex frame to the centroid
    /// frame; callers that specify anchors in the original frame subtract it.
    centroid_shift: Vec2,
    area: f64,
    /// Second moment of area about the centroid (multiply by density for
    /// rotational inertia).
    second_moment: f64,
}

impl Polygon {
    /// Builds a polygon from vertices in either winding order. The input must
    /// describe a convex polygon with non-zero area; that is an invariant of
    /// every caller, so violations panic rather than propagate.
    pub fn new(mut verts: Vec<Vec2>) -> Polygon {
        assert!(verts.len() >= 3, "polygon needs at least 3 vertices");
        let twice_area: f64 = signed_area2(&verts);
        assert!(
            twice_area.abs() > 1e-12,
            "degenerate polygon with zero area"
        );
        if twice_area < 0.0 {
            verts.reverse();
        }

        let (centroid, area, second_moment) = mass_properties(&verts);
        for v in &mut verts {
            *v -= centroid;
        }

        let n = verts.len();
        let mut normals = Vec::with_capacity(n);
        for i in 0..n {
            let edge = verts[(i + 1) % n] - verts[i];
            assert!(
                edge.length_squared() > 1e-18,
                "repeated polygon vertices"
            );
            // CCW winding puts the outward normal at the clockwise
            // perpendicular of each edge.
            normals.push(Vec2::new(edge.y, -edge.x).normalized());
        }
        for i in 0..n {
            let a = verts[i];
            let b = verts[(i + 1) % n];
            let c = verts[(i + 2) % n];
            assert!(
                (b - a).cross(c - b) > -1e-12,
                "polygon is not convex"
            );
        }

        Polygon {
            verts,
            normals,
            centroid_shift: centroid,
            area,
            second_moment,
        }
    }

    /// Axis-aligned box of the given full extents, centred on the origin.
    pub fn rect(width: f64, height: f64) -> Polygon {
        let (hw, hh) = (width / 2.0, height / 2.0);
        Polygon::new(vec![
            Vec2::new(-hw, -hh),
            Vec2::new(hw, -hh),
            Vec2::new(hw, hh),
            Vec2::new(-hw, hh),
        ])
    }

    pub fn verts(&self) -> &[Vec2] {
        &self.verts
    }

    pub fn normals(&self) -> &[Vec2] {
        &self.normals
    }

    pub fn centroid_shift(&self) -> Vec2 {
        self.centroid_shift
    }

    pub fn area(&self) -> f64 {
        self.area
    }

    pub fn second_moment(&self) -> f64 {
        self.second_moment
    }

    /// Radius of the bounding circle around the centroid.
    pub fn radius(&self) -> f64 {
        self.verts
            .iter()
            .map(|v| v.length())
            .fold(0.0, f64::max)
    }
}

fn signed_area2(verts: &[Vec2]) -> f64 {
    let n = verts.len();
    let mut sum = 0.0;
    for i in 0..n {
        sum += verts[i].cross(verts[(i + 1) % n]);
    }
    sum
}

/// Centroid, area and second moment of area about the centroid, via the
/// standard polygon decomposition into origin-anchored triangles.
fn mass_properties(verts: &[Vec2]) -> (Vec2, f64, f64) {
    let n = verts.len();
    let mut area = 0.0;
    let mut centroid = Vec2::ZERO;
    let mut moment_origin = 0.0;
    for i in 0..n {
        let a = verts[i];
        let b = verts[(i + 1) % n];
        let cross = a.cross(b);
        area += cross / 2.0;
        centroid += (a + b) * (cross / 6.0);
        moment_origin += cross * (a.dot(a) + a.dot(b) + b.dot(b)) / 12.0;
    }
    centroid = centroid * (1.0 / area);
    // Parallel axis shift from the origin to the centroid.
    let moment_centroid = moment_origin - area * centroid.length_squared();
    (centroid, area, moment_centroid)
}
