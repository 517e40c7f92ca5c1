//! Scenes, anchors, assets and yaw-only posing.

pub mod io;
pub mod ply;
pub mod sample;
pub mod synth;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{normalize_yaw, Obb, TriangleMesh, Vec3};

pub use io::{export_asset, export_scene, ingest_asset, ingest_scene, load_asset_dir, load_scene_dir, IngestOptions};
pub use sample::{sample_point_cloud, ScenePoint};
pub use synth::{generate_synthetic_scene, FurnitureSpec, OpeningKind, OpeningSpec, PositionPolicy, SynthSceneSpec};

/// A named object instance a constraint can refer to.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Anchor {
    pub instance_id: u32,
    pub class_label: String,
    pub obb: Obb,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SceneModel {
    pub scene_id: String,
    pub mesh: TriangleMesh,
    pub points: Vec<ScenePoint>,
    pub anchors: Vec<Anchor>,
}

impl SceneModel {
    pub fn new(scene_id: impl Into<String>, mesh: TriangleMesh, points: Vec<ScenePoint>, anchors: Vec<Anchor>) -> Result<Self> {
        let scene = SceneModel {
            scene_id: scene_id.into(),
            mesh,
            points,
            anchors,
        };
        scene.validate()?;
        Ok(scene)
    }

    pub fn validate(&self) -> Result<()> {
        if self.scene_id.is_empty() {
            return Err(Error::validation("scene_id is empty"));
        }
        if self.points.is_empty() {
            return Err(Error::validation("scene point cloud is empty"));
        }
        for (i, p) in self.points.iter().enumerate() {
            if !p.position.is_finite() || p.color.iter().any(|c| !(0.0..=1.0).contains(c)) {
                return Err(Error::validation(format!("point {i} has a non-finite position or out-of-range color")));
            }
        }
        let mut ids = std::collections::BTreeSet::new();
        for a in &self.anchors {
            if a.class_label.is_empty() {
                return Err(Error::validation(format!("anchor {} has an empty class label", a.instance_id)));
            }
            if !ids.insert(a.instance_id) {
                return Err(Error::validation(format!("duplicate anchor id {}", a.instance_id)));
            }
            // re-run box validation for anchors built by hand
            Obb::new(a.obb.center, a.obb.half_extents, a.obb.yaw)?;
        }
        Ok(())
    }

    pub fn anchor(&self, instance_id: u32) -> Option<&Anchor> {
        self.anchors.iter().find(|a| a.instance_id == instance_id)
    }

    /// All instances of a class, in annotation order.
    pub fn anchors_of_class<'a>(&'a self, class: &'a str) -> impl Iterator<Item = &'a Anchor> + 'a {
        self.anchors.iter().filter(move |a| a.class_label == class)
    }

    /// Sorted, de-duplicated class labels present in the scene.
    pub fn anchor_vocabulary(&self) -> Vec<String> {
        let mut v: Vec<String> = self.anchors.iter().map(|a| a.class_label.clone()).collect();
        v.sort();
        v.dedup();
        v
    }

    /// Largest xy extent of the mesh bounding box; the reference length for `near`.
    pub fn room_size(&self) -> f64 {
        let s = self.mesh.aabb().size();
        s.x.max(s.y)
    }
}

/// The object being placed, in its canonical frame: bounding box centered at the origin,
/// up = +Z, front = +Y.
#[derive(Debug, Clone, PartialEq)]
pub struct Asset {
    pub asset_id: String,
    pub mesh: TriangleMesh,
    pub extents: Vec3,
}

impl Asset {
    /// Recenters the mesh bounding box on the origin and records its sizes.
    pub fn from_mesh(asset_id: impl Into<String>, mesh: TriangleMesh) -> Result<Asset> {
        let bb = mesh.aabb();
        let c = bb.center();
        let mesh = mesh.map_vertices(|v| v - c);
        let extents = bb.size();
        if extents.min_element() <= 0.0 {
            return Err(Error::validation(format!("asset mesh is flat: extents {:?}", extents.to_array())));
        }
        Ok(Asset {
            asset_id: asset_id.into(),
            mesh,
            extents,
        })
    }

    pub fn cuboid(asset_id: impl Into<String>, extents: Vec3) -> Result<Asset> {
        if extents.min_element() <= 0.0 || !extents.is_finite() {
            return Err(Error::validation("asset extents must be positive"));
        }
        Asset::from_mesh(asset_id, TriangleMesh::cuboid(Vec3::ZERO, extents * 0.5, 0.0, Some([0.8, 0.3, 0.2])))
    }

    pub fn height(&self) -> f64 {
        self.extents.z
    }

    /// Posed bounding box.
    pub fn obb_at(&self, p: &Placement) -> Obb {
        Obb {
            center: p.t,
            half_extents: self.extents * 0.5,
            yaw: normalize_yaw(p.yaw),
        }
    }
}

/// Asset-center translation plus yaw about +Z.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Placement {
    pub t: Vec3,
    pub yaw: f64,
}

impl Placement {
    pub fn new(t: Vec3, yaw: f64) -> Result<Placement> {
        if !t.is_finite() || !yaw.is_finite() {
            return Err(Error::validation("placement must be finite"));
        }
        Ok(Placement { t, yaw: normalize_yaw(yaw) })
    }
}

/// World-space mesh and box of the asset under `p`: every vertex maps to `R_z(yaw)·v + t`.
pub fn pose_asset(asset: &Asset, p: &Placement) -> (TriangleMesh, Obb) {
    (asset.mesh.transformed(p.yaw, p.t), asset.obb_at(p))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_pose() {
        let a = Asset::cuboid("box", Vec3::new(0.2, 0.4, 0.3)).unwrap();
        let (m, obb) = pose_asset(&a, &Placement::new(Vec3::ZERO, 0.0).unwrap());
        assert_eq!(m.vertices(), a.mesh.vertices());
        assert_eq!(obb.center, Vec3::ZERO);
    }

    #[test]
    fn quarter_turn_swaps_axes() {
        let a = Asset::cuboid("box", Vec3::new(0.2, 0.4, 0.3)).unwrap();
        let (m, obb) = pose_asset(&a, &Placement::new(Vec3::new(1.0, 2.0, 0.15), std::f64::consts::FRAC_PI_2).unwrap());
        let s = m.aabb().size();
        assert!((s.x - 0.4).abs() < 1e-12 && (s.y - 0.2).abs() < 1e-12 && (s.z - 0.3).abs() < 1e-12);
        let s = obb.aabb().size();
        assert!((s.x - 0.4).abs() < 1e-12 && (s.y - 0.2).abs() < 1e-12);
    }

    #[test]
    fn asset_is_recentered() {
        let m = TriangleMesh::cuboid(Vec3::new(3.0, 1.0, 0.5), Vec3::new(0.1, 0.2, 0.5), 0.0, None);
        let a = Asset::from_mesh("x", m).unwrap();
        assert!(a.mesh.aabb().center().norm() < 1e-12);
        assert!((a.extents.z - 1.0).abs() < 1e-12);
    }
}
