use std::f64::consts::TAU;

use serde::{Deserialize, Serialize};

use super::mesh::TriangleMesh;
use super::polygon::ConvexPolygon;
use super::vec3::{Aabb, Vec3};
use crate::error::{Error, Result};

/// Box rotated about +Z only.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Obb {
    pub center: Vec3,
    pub half_extents: Vec3,
    /// Radians in `[0, 2π)`.
    pub yaw: f64,
}

/// Wraps an angle into `[0, 2π)`.
pub fn normalize_yaw(yaw: f64) -> f64 {
    let y = yaw.rem_euclid(TAU);
    if y >= TAU {
        0.0
    } else {
        y
    }
}

impl Obb {
    pub fn new(center: Vec3, half_extents: Vec3, yaw: f64) -> Result<Obb> {
        if !center.is_finite() || !half_extents.is_finite() || !yaw.is_finite() {
            return Err(Error::validation("box parameters must be finite"));
        }
        if half_extents.min_element() <= 0.0 {
            return Err(Error::validation(format!(
                "box half extents must be strictly positive, got {:?}",
                half_extents.to_array()
            )));
        }
        Ok(Obb {
            center,
            half_extents,
            yaw: normalize_yaw(yaw),
        })
    }

    /// Local +X and +Y axes in world xy.
    pub fn axes_xy(&self) -> ([f64; 2], [f64; 2]) {
        let (s, c) = self.yaw.sin_cos();
        ([c, s], [-s, c])
    }

    pub fn footprint(&self) -> ConvexPolygon {
        let (u, v) = self.axes_xy();
        let (hx, hy) = (self.half_extents.x, self.half_extents.y);
        let c = [self.center.x, self.center.y];
        let corner = |sx: f64, sy: f64| [c[0] + sx * hx * u[0] + sy * hy * v[0], c[1] + sx * hx * u[1] + sy * hy * v[1]];
        ConvexPolygon::new(vec![corner(-1.0, -1.0), corner(1.0, -1.0), corner(1.0, 1.0), corner(-1.0, 1.0)])
    }

    pub fn footprint_area(&self) -> f64 {
        4.0 * self.half_extents.x * self.half_extents.y
    }

    pub fn bottom(&self) -> f64 {
        self.center.z - self.half_extents.z
    }

    pub fn top(&self) -> f64 {
        self.center.z + self.half_extents.z
    }

    pub fn z_range(&self) -> [f64; 2] {
        [self.bottom(), self.top()]
    }

    pub fn volume(&self) -> f64 {
        8.0 * self.half_extents.x * self.half_extents.y * self.half_extents.z
    }

    pub fn corners(&self) -> [Vec3; 8] {
        let mut out = [Vec3::ZERO; 8];
        for (k, o) in out.iter_mut().enumerate() {
            let sx = if k & 1 == 0 { -1.0 } else { 1.0 };
            let sy = if k & 2 == 0 { -1.0 } else { 1.0 };
            let sz = if k & 4 == 0 { -1.0 } else { 1.0 };
            let h = self.half_extents;
            *o = Vec3::new(sx * h.x, sy * h.y, sz * h.z).rotate_z(self.yaw) + self.center;
        }
        out
    }

    pub fn aabb(&self) -> Aabb {
        Aabb::from_points(self.corners())
    }

    pub fn to_mesh(&self) -> TriangleMesh {
        TriangleMesh::cuboid(self.center, self.half_extents, self.yaw, None)
    }

    /// World point expressed in the box frame.
    pub fn to_local(&self, p: Vec3) -> Vec3 {
        (p - self.center).rotate_z(-self.yaw)
    }

    pub fn contains(&self, p: Vec3, tol: f64) -> bool {
        let l = self.to_local(p);
        let h = self.half_extents;
        l.x.abs() <= h.x + tol && l.y.abs() <= h.y + tol && l.z.abs() <= h.z + tol
    }
}

/// Minimum Euclidean distance between two solid yawed boxes.
///
/// Both boxes are prisms `footprint × [bottom, top]`, so their Minkowski difference is the
/// product of the footprint difference and the z-interval difference, and the distance
/// splits into an xy part and a z part.
pub fn obb_min_distance(a: &Obb, b: &Obb) -> f64 {
    let dxy = a.footprint().distance(&b.footprint());
    let dz = (b.bottom() - a.top()).max(a.bottom() - b.top()).max(0.0);
    (dxy * dxy + dz * dz).sqrt()
}

/// Intersection-over-minimum of the two xy footprints.
pub fn footprint_iom(a: &Obb, b: &Obb) -> f64 {
    polygon_iom(&a.footprint(), &b.footprint())
}

pub fn polygon_iom(a: &ConvexPolygon, b: &ConvexPolygon) -> f64 {
    let min_area = a.area().min(b.area());
    if min_area <= 0.0 {
        return 0.0;
    }
    (a.clip(b).area() / min_area).clamp(0.0, 1.0)
}

/// Intersection-over-minimum of two closed intervals `[lo, hi]`.
pub fn interval_iom(a: [f64; 2], b: [f64; 2]) -> f64 {
    let la = a[1] - a[0];
    let lb = b[1] - b[0];
    let min_len = la.min(lb);
    if min_len <= 0.0 {
        if la <= 0.0 && lb <= 0.0 {
            return if a[0] == b[0] { 1.0 } else { 0.0 };
        }
        // a point inside the other interval is fully covered
        let (p, iv) = if la <= 0.0 { (a[0], b) } else { (b[0], a) };
        return if p >= iv[0] && p <= iv[1] { 1.0 } else { 0.0 };
    }
    let overlap = (a[1].min(b[1]) - a[0].max(b[0])).max(0.0);
    (overlap / min_len).clamp(0.0, 1.0)
}
