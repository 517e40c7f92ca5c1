use std::fmt;
use std::sync::OnceLock;

use super::bvh::Bvh;
use super::vec3::{Aabb, Vec3};
use crate::error::{Error, Result};

/// Triangles with area below this (m²) are treated as slivers and ignored by queries.
pub const DEGENERATE_AREA: f64 = 1e-14;

/// Indexed triangle mesh with optional per-vertex RGB in `[0, 1]`.
///
/// The ray-casting acceleration structure is built lazily on first query and
/// shared read-only afterwards.
pub struct TriangleMesh {
    vertices: Vec<Vec3>,
    triangles: Vec<[u32; 3]>,
    colors: Option<Vec<[f32; 3]>>,
    bvh: OnceLock<Bvh>,
}

impl TriangleMesh {
    pub fn new(vertices: Vec<Vec3>, triangles: Vec<[u32; 3]>, colors: Option<Vec<[f32; 3]>>) -> Result<Self> {
        if triangles.is_empty() {
            return Err(Error::validation("mesh has no triangles"));
        }
        if let Some(i) = vertices.iter().position(|v| !v.is_finite()) {
            return Err(Error::validation(format!("vertex {i} is not finite")));
        }
        let n = vertices.len() as u64;
        if let Some(t) = triangles.iter().position(|t| t.iter().any(|&i| i as u64 >= n)) {
            return Err(Error::validation(format!("triangle {t} references a vertex out of range (vertex count {n})")));
        }
        if let Some(c) = &colors {
            if c.len() != vertices.len() {
                return Err(Error::validation("color count does not match vertex count"));
            }
            if c.iter().flatten().any(|v| !(0.0..=1.0).contains(v)) {
                return Err(Error::validation("vertex colors must lie in [0, 1]"));
            }
        }
        Ok(TriangleMesh {
            vertices,
            triangles,
            colors,
            bvh: OnceLock::new(),
        })
    }

    /// Closed box mesh with outward-facing triangles (12 triangles, 8 vertices).
    pub fn cuboid(center: Vec3, half: Vec3, yaw: f64, color: Option<[f32; 3]>) -> TriangleMesh {
        let mut verts = Vec::with_capacity(8);
        for k in 0..8 {
            let sx = if k & 1 == 0 { -1.0 } else { 1.0 };
            let sy = if k & 2 == 0 { -1.0 } else { 1.0 };
            let sz = if k & 4 == 0 { -1.0 } else { 1.0 };
            let local = Vec3::new(sx * half.x, sy * half.y, sz * half.z);
            verts.push(local.rotate_z(yaw) + center);
        }
        let tris: Vec<[u32; 3]> = vec![
            [0, 2, 3], [0, 3, 1], // -z
            [4, 5, 7], [4, 7, 6], // +z
            [0, 1, 5], [0, 5, 4], // -y
            [2, 6, 7], [2, 7, 3], // +y
            [0, 4, 6], [0, 6, 2], // -x
            [1, 3, 7], [1, 7, 5], // +x
        ];
        let colors = color.map(|c| vec![c; 8]);
        TriangleMesh::new(verts, tris, colors).expect("cuboid mesh is valid")
    }

    /// Concatenates meshes; colors are kept only if every part has them.
    pub fn merge(parts: &[TriangleMesh]) -> Result<TriangleMesh> {
        let mut vertices = Vec::new();
        let mut triangles = Vec::new();
        let keep_colors = parts.iter().all(|p| p.colors.is_some());
        let mut colors = Vec::new();
        for p in parts {
            let base = vertices.len() as u32;
            vertices.extend_from_slice(&p.vertices);
            triangles.extend(p.triangles.iter().map(|t| [t[0] + base, t[1] + base, t[2] + base]));
            if keep_colors {
                colors.extend_from_slice(p.colors.as_ref().unwrap());
            }
        }
        TriangleMesh::new(vertices, triangles, keep_colors.then_some(colors))
    }

    pub fn vertices(&self) -> &[Vec3] {
        &self.vertices
    }

    pub fn triangles(&self) -> &[[u32; 3]] {
        &self.triangles
    }

    pub fn colors(&self) -> Option<&[[f32; 3]]> {
        self.colors.as_deref()
    }

    pub fn triangle_count(&self) -> usize {
        self.triangles.len()
    }

    pub fn triangle(&self, i: usize) -> [Vec3; 3] {
        let t = self.triangles[i];
        [
            self.vertices[t[0] as usize],
            self.vertices[t[1] as usize],
            self.vertices[t[2] as usize],
        ]
    }

    /// Unnormalized geometric normal (right-hand winding); its length is twice the area.
    pub fn triangle_normal(&self, i: usize) -> Vec3 {
        let [a, b, c] = self.triangle(i);
        (b - a).cross(c - a)
    }

    pub fn triangle_area(&self, i: usize) -> f64 {
        0.5 * self.triangle_normal(i).norm()
    }

    pub fn is_degenerate(&self, i: usize) -> bool {
        self.triangle_area(i) < DEGENERATE_AREA
    }

    pub fn surface_area(&self) -> f64 {
        (0..self.triangles.len()).map(|i| self.triangle_area(i)).sum()
    }

    pub fn aabb(&self) -> Aabb {
        Aabb::from_points(self.vertices.iter().copied())
    }

    /// Applies `f` to every vertex; topology and colors are kept.
    pub fn map_vertices(&self, f: impl Fn(Vec3) -> Vec3) -> TriangleMesh {
        TriangleMesh {
            vertices: self.vertices.iter().map(|&v| f(v)).collect(),
            triangles: self.triangles.clone(),
            colors: self.colors.clone(),
            bvh: OnceLock::new(),
        }
    }

    /// Rotation about +Z by `yaw`, then translation by `t`.
    pub fn transformed(&self, yaw: f64, t: Vec3) -> TriangleMesh {
        self.map_vertices(|v| v.rotate_z(yaw) + t)
    }

    pub(crate) fn bvh(&self) -> &Bvh {
        self.bvh.get_or_init(|| Bvh::build(self))
    }
}

impl Clone for TriangleMesh {
    fn clone(&self) -> Self {
        TriangleMesh {
            vertices: self.vertices.clone(),
            triangles: self.triangles.clone(),
            colors: self.colors.clone(),
            bvh: OnceLock::new(),
        }
    }
}

impl PartialEq for TriangleMesh {
    fn eq(&self, other: &Self) -> bool {
        self.vertices == other.vertices && self.triangles == other.triangles && self.colors == other.colors
    }
}

impl fmt::Debug for TriangleMesh {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("TriangleMesh")
            .field("vertices", &self.vertices.len())
            .field("triangles", &self.triangles.len())
            .field("colors", &self.colors.is_some())
            .finish()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_out_of_range_index() {
        let err = TriangleMesh::new(vec![Vec3::ZERO; 2], vec![[0, 1, 2]], None).unwrap_err();
        assert!(matches!(err, Error::Validation(_)));
    }

    #[test]
    fn rejects_empty_and_non_finite() {
        assert!(TriangleMesh::new(vec![Vec3::ZERO; 3], vec![], None).is_err());
        let v = vec![Vec3::ZERO, Vec3::X, Vec3::new(f64::NAN, 0.0, 0.0)];
        assert!(TriangleMesh::new(v, vec![[0, 1, 2]], None).is_err());
    }

    #[test]
    fn cuboid_normals_point_outward() {
        let m = TriangleMesh::cuboid(Vec3::new(1.0, 2.0, 3.0), Vec3::new(0.5, 0.25, 0.1), 0.3, None);
        let c = Vec3::new(1.0, 2.0, 3.0);
        for i in 0..m.triangle_count() {
            let [a, b, cc] = m.triangle(i);
            let centroid = (a + b + cc) / 3.0;
            assert!(m.triangle_normal(i).dot(centroid - c) > 0.0, "triangle {i}");
        }
        assert!((m.surface_area() - 2.0 * (1.0 * 0.5 + 0.5 * 0.2 + 1.0 * 0.2)).abs() < 1e-12);
    }
}
