//! Anchor-camera visibility by per-pixel first-hit ray casting.

use crate::error::{Error, Result};
use crate::geometry::{raycast_first, Obb, TriangleMesh, Vec3};
use crate::scene::Anchor;

/// Scene surfaces inside the anchor's own box (grown by this much) never occlude.
const SELF_MARGIN: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AnchorCamera {
    pub position: Vec3,
    pub forward: Vec3,
    pub up: Vec3,
    /// Full field of view in degrees, same horizontally and vertically.
    pub fov: f64,
    pub resolution: u32,
}

impl AnchorCamera {
    pub fn look_at(position: Vec3, target: Vec3, fov: f64, resolution: u32) -> Result<AnchorCamera> {
        if !(fov > 0.0 && fov < 180.0) || resolution == 0 {
            return Err(Error::validation("camera needs fov in (0, 180) and a positive resolution"));
        }
        let forward = (target - position)
            .normalized()
            .ok_or_else(|| Error::validation("camera target coincides with camera position"))?;
        let world_up = if forward.dot(Vec3::Z).abs() > 0.999 { Vec3::X } else { Vec3::Z };
        let right = forward.cross(world_up).normalized().expect("up is not parallel to forward");
        let up = right.cross(forward);
        Ok(AnchorCamera {
            position,
            forward,
            up,
            fov,
            resolution,
        })
    }

    fn right(&self) -> Vec3 {
        self.forward.cross(self.up)
    }

    fn tan_half(&self) -> f64 {
        (self.fov.to_radians() / 2.0).tan()
    }

    /// Unnormalized ray direction through the center of pixel (col, row); row 0 is the top.
    pub fn pixel_dir(&self, col: u32, row: u32) -> Vec3 {
        let res = self.resolution as f64;
        let th = self.tan_half();
        let x = ((col as f64 + 0.5) / res * 2.0 - 1.0) * th;
        let y = (1.0 - (row as f64 + 0.5) / res * 2.0) * th;
        self.forward + self.right() * x + self.up * y
    }

    /// Image-plane coordinates in `[0, 1]²` (col, row) of a point in front of the camera.
    fn project(&self, p: Vec3) -> Option<(f64, f64)> {
        let d = p - self.position;
        let z = d.dot(self.forward);
        if z <= 0.0 {
            return None;
        }
        let th = self.tan_half();
        let x = d.dot(self.right()) / z / th;
        let y = d.dot(self.up) / z / th;
        Some(((x + 1.0) / 2.0, (1.0 - y) / 2.0))
    }

    /// Inclusive pixel ranges that can see anything inside `corners`.
    fn pixel_window(&self, corners: &[Vec3], near: f64) -> (u32, u32, u32, u32) {
        let n = self.resolution;
        let full = (0, n - 1, 0, n - 1);
        let (mut u0, mut u1, mut v0, mut v1) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
        for &c in corners {
            if (c - self.position).dot(self.forward) <= near {
                return full;
            }
            let Some((u, v)) = self.project(c) else { return full };
            u0 = u0.min(u);
            u1 = u1.max(u);
            v0 = v0.min(v);
            v1 = v1.max(v);
        }
        let res = n as f64;
        // pixel i is sampled at (i + 0.5) / res; keep one pixel of slack for roundoff
        let lo = |a: f64| ((a * res - 0.5).ceil() - 1.0).clamp(0.0, res - 1.0) as u32;
        let hi = |b: f64| ((b * res - 0.5).floor() + 1.0).clamp(0.0, res - 1.0) as u32;
        if u1 < 0.0 || v1 < 0.0 || u0 > 1.0 || v0 > 1.0 {
            return (1, 0, 1, 0);
        }
        (lo(u0), hi(u1), lo(v0), hi(v1))
    }
}

/// Camera origin for an anchor: the scene vertex inside the anchor box nearest to the
/// centroid of all such vertices (lowest index on ties), or the box center if none.
pub fn anchor_camera_position(scene_mesh: &TriangleMesh, anchor: &Anchor) -> Vec3 {
    let inside: Vec<(usize, Vec3)> = scene_mesh
        .vertices()
        .iter()
        .copied()
        .enumerate()
        .filter(|(_, v)| anchor.obb.contains(*v, 1e-9))
        .collect();
    if inside.is_empty() {
        return anchor.obb.center;
    }
    let centroid = inside.iter().fold(Vec3::ZERO, |s, (_, v)| s + *v) * (1.0 / inside.len() as f64);
    let mut best = inside[0];
    for &(i, v) in &inside[1..] {
        if v.distance(centroid) < best.1.distance(centroid) {
            best = (i, v);
        }
    }
    best.1
}

pub fn build_anchor_camera(scene_mesh: &TriangleMesh, anchor: &Anchor, target: Vec3, fov: f64, resolution: u32) -> Result<AnchorCamera> {
    AnchorCamera::look_at(anchor_camera_position(scene_mesh, anchor), target, fov, resolution)
}

/// Distance along the ray at which it leaves `obb`, if the origin is inside it.
fn exit_distance(obb: &Obb, origin: Vec3, dir: Vec3) -> Option<f64> {
    let h = obb.half_extents + Vec3::splat(SELF_MARGIN);
    let o = obb.to_local(origin);
    if o.x.abs() > h.x || o.y.abs() > h.y || o.z.abs() > h.z {
        return None;
    }
    let d = dir.rotate_z(-obb.yaw);
    let mut t = f64::INFINITY;
    for k in 0..3 {
        if d[k] != 0.0 {
            let bound = if d[k] > 0.0 { h[k] } else { -h[k] };
            t = t.min((bound - o[k]) / d[k]);
        }
    }
    Some(t.max(0.0))
}

/// Renderer for one (scene, anchor, asset geometry, camera) combination.
pub struct VisibilityQuery<'a> {
    pub scene_mesh: &'a TriangleMesh,
    pub anchor_obb: Option<&'a Obb>,
    pub target_mesh: &'a TriangleMesh,
    pub camera: AnchorCamera,
    pub near_clip: f64,
}

impl VisibilityQuery<'_> {
    /// Whether pixel (col, row) sees the target before any scene surface.
    pub fn pixel_sees_target(&self, col: u32, row: u32) -> bool {
        let dir = self.camera.pixel_dir(col, row).normalized().expect("pixel direction is non-zero");
        let o = self.camera.position;
        let Some((ta, _)) = raycast_first(self.target_mesh, o, dir, self.near_clip, f64::INFINITY) else {
            return false;
        };
        let t0 = self
            .anchor_obb
            .and_then(|b| exit_distance(b, o, dir))
            .map_or(self.near_clip, |t| t.max(self.near_clip));
        if t0 > ta {
            return true;
        }
        match raycast_first(self.scene_mesh, o, dir, t0, ta) {
            Some((ts, _)) => ts >= ta,
            None => true,
        }
    }

    fn window(&self) -> (u32, u32, u32, u32) {
        let bb = self.target_mesh.aabb();
        let corners: Vec<Vec3> = (0..8)
            .map(|k| {
                Vec3::new(
                    if k & 1 == 0 { bb.min.x } else { bb.max.x },
                    if k & 2 == 0 { bb.min.y } else { bb.max.y },
                    if k & 4 == 0 { bb.min.z } else { bb.max.z },
                )
            })
            .collect();
        self.camera.pixel_window(&corners, self.near_clip)
    }

    /// True iff at least one pixel sees the target. Only pixels whose centers can fall on
    /// the target's bounding box are cast.
    pub fn any_visible(&self) -> bool {
        let (c0, c1, r0, r1) = self.window();
        for row in r0..=r1 {
            for col in c0..=c1 {
                if self.pixel_sees_target(col, row) {
                    return true;
                }
            }
        }
        false
    }

    /// Full-resolution mask of target pixels, row-major.
    pub fn render_mask(&self) -> Vec<bool> {
        let n = self.camera.resolution;
        let mut out = vec![false; (n * n) as usize];
        let (c0, c1, r0, r1) = self.window();
        for row in r0..=r1 {
            for col in c0..=c1 {
                out[(row * n + col) as usize] = self.pixel_sees_target(col, row);
            }
        }
        out
    }
}

/// Visibility of `target_mesh` from `anchor`, looking at `target_center`.
pub fn visibility_test(
    scene_mesh: &TriangleMesh,
    anchor: &Anchor,
    target_mesh: &TriangleMesh,
    target_center: Vec3,
    fov: f64,
    resolution: u32,
    near_clip: f64,
) -> Result<bool> {
    let camera = build_anchor_camera(scene_mesh, anchor, target_center, fov, resolution)?;
    Ok(VisibilityQuery {
        scene_mesh,
        anchor_obb: Some(&anchor.obb),
        target_mesh,
        camera,
        near_clip,
    }
    .any_visible())
}

/// Binary PGM (P5) of a boolean mask; true pixels are white.
pub fn mask_to_pgm(mask: &[bool], resolution: u32) -> Vec<u8> {
    let mut out = format!("P5\n{resolution} {resolution}\n255\n").into_bytes();
    out.extend(mask.iter().map(|&m| if m { 255u8 } else { 0 }));
    out
}
