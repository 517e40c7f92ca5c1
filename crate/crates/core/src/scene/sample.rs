use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::ply::quantize_color;
use crate::error::{Error, Result};
use crate::geometry::{TriangleMesh, Vec3};

const DEFAULT_GRAY: [f32; 3] = [0.5, 0.5, 0.5];

/// One row of the scene point cloud: position plus RGB in `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScenePoint {
    pub position: Vec3,
    pub color: [f32; 3],
}

/// Area-weighted uniform surface samples; `round(area × density)` points, colors
/// interpolated from the vertices and snapped to 8 bits.
pub fn sample_point_cloud(mesh: &TriangleMesh, density: f64, seed: u64) -> Result<Vec<ScenePoint>> {
    if !(density > 0.0 && density.is_finite()) {
        return Err(Error::validation(format!("point density must be positive, got {density}")));
    }
    let mut cumulative = Vec::with_capacity(mesh.triangle_count());
    let mut total = 0.0;
    for i in 0..mesh.triangle_count() {
        if !mesh.is_degenerate(i) {
            total += mesh.triangle_area(i);
        }
        cumulative.push(total);
    }
    let count = (total * density).round() as usize;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(count);
    for _ in 0..count {
        let r = rng.gen_range(0.0..total);
        let tri = cumulative.partition_point(|&c| c <= r).min(cumulative.len() - 1);
        let [a, b, c] = mesh.triangle(tri);
        let (r1, r2): (f64, f64) = (rng.gen(), rng.gen());
        let s = r1.sqrt();
        let (wa, wb, wc) = (1.0 - s, s * (1.0 - r2), s * r2);
        let position = a * wa + b * wb + c * wc;
        let color = match mesh.colors() {
            Some(cols) => {
                let t = mesh.triangles()[tri];
                let [ca, cb, cc] = [cols[t[0] as usize], cols[t[1] as usize], cols[t[2] as usize]];
                let mix = |k: usize| (ca[k] as f64 * wa + cb[k] as f64 * wb + cc[k] as f64 * wc) as f32;
                quantize_color([mix(0), mix(1), mix(2)])
            }
            None => quantize_color(DEFAULT_GRAY),
        };
        out.push(ScenePoint { position, color });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit_floor() -> TriangleMesh {
        TriangleMesh::new(
            vec![Vec3::new(0.0, 0.0, 0.0), Vec3::new(1.0, 0.0, 0.0), Vec3::new(1.0, 1.0, 0.0), Vec3::new(0.0, 1.0, 0.0)],
            vec![[0, 1, 2], [0, 2, 3]],
            None,
        )
        .unwrap()
    }

    #[test]
    fn unit_floor_density_100() {
        let pts = sample_point_cloud(&unit_floor(), 100.0, 1).unwrap();
        assert_eq!(pts.len(), 100);
        assert!(pts.iter().all(|p| p.position.z == 0.0));
        assert!(pts.iter().all(|p| (0.0..=1.0).contains(&p.position.x) && (0.0..=1.0).contains(&p.position.y)));
    }

    #[test]
    fn zero_density_is_rejected() {
        assert!(sample_point_cloud(&unit_floor(), 0.0, 1).is_err());
    }

    #[test]
    fn deterministic_per_seed() {
        let a = sample_point_cloud(&unit_floor(), 50.0, 9).unwrap();
        let b = sample_point_cloud(&unit_floor(), 50.0, 9).unwrap();
        assert_eq!(a, b);
    }
}
