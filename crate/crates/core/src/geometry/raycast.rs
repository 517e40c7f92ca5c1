use serde::{Deserialize, Serialize};

use super::mesh::TriangleMesh;
use super::vec3::Vec3;
use crate::error::{Error, Result};

/// Tolerance on barycentric coordinates; rays grazing an edge count as hits.
pub const BARYCENTRIC_EPS: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Ray {
    pub origin: Vec3,
    direction: Vec3,
}

impl Ray {
    /// Normalizes `direction`; fails for zero or non-finite input.
    pub fn new(origin: Vec3, direction: Vec3) -> Result<Ray> {
        if !origin.is_finite() {
            return Err(Error::validation("ray origin is not finite"));
        }
        let direction = direction
            .normalized()
            .ok_or_else(|| Error::validation("ray direction must be non-zero and finite"))?;
        Ok(Ray { origin, direction })
    }

    pub fn down(origin: Vec3) -> Ray {
        Ray {
            origin,
            direction: -Vec3::Z,
        }
    }

    pub fn up(origin: Vec3) -> Ray {
        Ray {
            origin,
            direction: Vec3::Z,
        }
    }

    pub fn direction(&self) -> Vec3 {
        self.direction
    }

    pub fn at(&self, t: f64) -> Vec3 {
        self.origin + self.direction * t
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Hit {
    pub t: f64,
    pub point: Vec3,
    pub triangle: usize,
}

/// Hits sorted ascending by `t`, ties broken by triangle index.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct HitList {
    pub hits: Vec<Hit>,
}

impl HitList {
    pub fn len(&self) -> usize {
        self.hits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.hits.is_empty()
    }

    pub fn iter(&self) -> std::slice::Iter<'_, Hit> {
        self.hits.iter()
    }
}

/// Möller-Trumbore intersection returning the ray parameter, or `None` for a miss or a
/// ray parallel to the triangle plane.
#[inline]
pub fn ray_triangle(origin: Vec3, dir: Vec3, tri: &[Vec3; 3]) -> Option<f64> {
    let e1 = tri[1] - tri[0];
    let e2 = tri[2] - tri[0];
    let p = dir.cross(e2);
    let det = e1.dot(p);
    let scale = e1.norm() * e2.norm();
    if det.abs() <= 1e-12 * scale || scale == 0.0 {
        return None;
    }
    let inv = 1.0 / det;
    let s = origin - tri[0];
    let u = s.dot(p) * inv;
    if !(-BARYCENTRIC_EPS..=1.0 + BARYCENTRIC_EPS).contains(&u) {
        return None;
    }
    let q = s.cross(e1);
    let v = dir.dot(q) * inv;
    if v < -BARYCENTRIC_EPS || u + v > 1.0 + BARYCENTRIC_EPS {
        return None;
    }
    Some(e2.dot(q) * inv)
}

/// Every intersection of `ray` with `mesh` at `t >= 0`, sorted by `(t, triangle)`.
pub fn raycast_all(mesh: &TriangleMesh, ray: &Ray) -> HitList {
    raycast_all_range(mesh, ray, 0.0, f64::INFINITY)
}

pub fn raycast_all_range(mesh: &TriangleMesh, ray: &Ray, t_min: f64, t_max: f64) -> HitList {
    let mut hits = Vec::new();
    let (o, d) = (ray.origin, ray.direction);
    mesh.bvh().for_each_ray_candidate(o, d, t_min, t_max, |i| {
        if let Some(t) = ray_triangle(o, d, &mesh.triangle(i)) {
            if t >= t_min && t <= t_max {
                hits.push(Hit {
                    t,
                    point: ray.at(t),
                    triangle: i,
                });
            }
        }
    });
    hits.sort_by(|a, b| a.t.total_cmp(&b.t).then(a.triangle.cmp(&b.triangle)));
    HitList { hits }
}

/// Nearest hit with `t` in `[t_min, t_max]`; ties go to the lowest triangle index.
pub fn raycast_first(mesh: &TriangleMesh, origin: Vec3, dir: Vec3, t_min: f64, t_max: f64) -> Option<(f64, usize)> {
    mesh.bvh()
        .closest(origin, dir, t_min, t_max, |i| ray_triangle(origin, dir, &mesh.triangle(i)))
}
