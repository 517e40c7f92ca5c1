//! Triangle-triangle and mesh-mesh overlap tests by separating axes.

use super::mesh::TriangleMesh;
use super::vec3::{Aabb, Vec3};

/// Gap below which two surfaces count as touching (and therefore intersecting).
pub const CONTACT_TOL: f64 = 1e-6;

fn project(tri: &[Vec3; 3], axis: Vec3) -> (f64, f64) {
    let a = tri[0].dot(axis);
    let b = tri[1].dot(axis);
    let c = tri[2].dot(axis);
    (a.min(b).min(c), a.max(b).max(c))
}

/// Largest signed separation of the two triangles over the candidate axes.
///
/// Positive values are a gap, negative values the smallest overlap depth found. The axis
/// set (both face normals, the nine edge-edge cross products and the in-plane edge normals
/// of both triangles) is complete for coplanar and non-coplanar pairs alike.
pub fn triangle_separation(a: &[Vec3; 3], b: &[Vec3; 3]) -> f64 {
    let ea = [a[1] - a[0], a[2] - a[1], a[0] - a[2]];
    let eb = [b[1] - b[0], b[2] - b[1], b[0] - b[2]];
    let na = ea[0].cross(ea[1]);
    let nb = eb[0].cross(eb[1]);

    let mut best = f64::NEG_INFINITY;
    let mut test = |axis: Vec3| {
        let len = axis.norm();
        if len < 1e-12 {
            return;
        }
        let axis = axis / len;
        let (a0, a1) = project(a, axis);
        let (b0, b1) = project(b, axis);
        let s = (b0 - a1).max(a0 - b1);
        if s > best {
            best = s;
        }
    };
    test(na);
    test(nb);
    for x in &ea {
        for y in &eb {
            test(x.cross(*y));
        }
    }
    for e in &ea {
        test(na.cross(*e));
    }
    for e in &eb {
        test(nb.cross(*e));
    }
    best
}

/// Overlap test with an explicit slack: the triangles are reported as overlapping when no
/// axis separates them by more than `slack`. `slack > 0` counts near-contact as overlap;
/// `slack < 0` demands a penetration deeper than `-slack`.
pub fn triangles_overlap(a: &[Vec3; 3], b: &[Vec3; 3], slack: f64) -> bool {
    triangle_separation(a, b) <= slack
}

fn mesh_pairs_overlap(a: &TriangleMesh, b: &TriangleMesh, slack: f64) -> bool {
    // iterate the smaller mesh, query the larger one's hierarchy
    let (small, large) = if a.triangle_count() <= b.triangle_count() { (a, b) } else { (b, a) };
    let pad = slack.max(0.0) + 1e-9;
    let bvh = large.bvh();
    for i in 0..small.triangle_count() {
        if small.is_degenerate(i) {
            continue;
        }
        let ta = small.triangle(i);
        let q = Aabb::from_points(ta).expanded(pad);
        let hit = bvh.for_each_overlap(&q, |j| triangles_overlap(&ta, &large.triangle(j), slack));
        if hit {
            return true;
        }
    }
    false
}

/// True iff some triangle of `a` touches or crosses some triangle of `b`
/// (gaps up to [`CONTACT_TOL`] count as contact).
pub fn meshes_intersect(a: &TriangleMesh, b: &TriangleMesh) -> bool {
    mesh_pairs_overlap(a, b, CONTACT_TOL)
}

/// True iff the surfaces interpenetrate by more than `depth_tol`; resting contact is allowed.
pub fn meshes_penetrate(a: &TriangleMesh, b: &TriangleMesh, depth_tol: f64) -> bool {
    mesh_pairs_overlap(a, b, -depth_tol)
}
