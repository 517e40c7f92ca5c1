//! Scene and asset ingestion/export.
//!
//! A scene is a PLY mesh plus a JSON annotation file:
//!
//! ```json
//! {"scene_id": "room0", "anchors": [{"id": 1, "class": "table", "center": [x, y, z],
//!   "half_extents": [hx, hy, hz], "yaw": 0.0}], "points_file": "room0_points.ply"}
//! ```
//!
//! An asset is a PLY mesh plus a sidecar `{"asset_id", "up": "+z", "frontal": "+y", "extents"}`.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::ply::{read_ply, write_ply};
use super::sample::{sample_point_cloud, ScenePoint};
use super::{Anchor, Asset, SceneModel};
use crate::error::{Error, Result};
use crate::geometry::{Obb, TriangleMesh, Vec3};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnchorRecord {
    pub id: u32,
    pub class: String,
    pub center: [f64; 3],
    pub half_extents: [f64; 3],
    pub yaw: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnnotationFile {
    pub scene_id: String,
    pub anchors: Vec<AnchorRecord>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub points_file: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssetSidecar {
    pub asset_id: String,
    pub up: String,
    pub frontal: String,
    pub extents: [f64; 3],
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IngestOptions {
    /// Surface density (points/m²) used when the annotation has no point file.
    pub point_density: f64,
    /// Base seed for point sampling; mixed with the scene id.
    pub seed: u64,
}

impl Default for IngestOptions {
    fn default() -> Self {
        IngestOptions {
            point_density: 100.0,
            seed: 0,
        }
    }
}

/// Stable 64-bit digest of a string (first 8 bytes of SHA-256).
pub fn stable_hash(s: &str) -> u64 {
    let d = Sha256::digest(s.as_bytes());
    u64::from_le_bytes(d[..8].try_into().unwrap())
}

fn read_file(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).map_err(|e| Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display()))))
}

pub fn mesh_from_ply(bytes: &[u8]) -> Result<TriangleMesh> {
    let d = read_ply(bytes)?;
    TriangleMesh::new(d.vertices, d.triangles, d.colors)
}

fn anchors_from_records(records: &[AnchorRecord]) -> Result<Vec<Anchor>> {
    records
        .iter()
        .map(|r| {
            let obb = Obb::new(Vec3::from(r.center), Vec3::from(r.half_extents), r.yaw)
                .map_err(|e| Error::validation(format!("anchor {} ({}): {e}", r.id, r.class)))?;
            Ok(Anchor {
                instance_id: r.id,
                class_label: r.class.clone(),
                obb,
            })
        })
        .collect()
}

/// Builds a scene from in-memory sources. `points` is the decoded point file, if any.
pub fn ingest_scene_from_parts(mesh_ply: &[u8], annotation_json: &str, points: Option<&[u8]>, opts: &IngestOptions) -> Result<SceneModel> {
    let mesh = mesh_from_ply(mesh_ply)?;
    let anno: AnnotationFile = serde_json::from_str(annotation_json)?;
    let anchors = anchors_from_records(&anno.anchors)?;
    let points = match points {
        Some(bytes) => {
            let d = read_ply(bytes)?;
            let colors = d.colors.unwrap_or_else(|| vec![[0.5; 3]; d.vertices.len()]);
            d.vertices
                .into_iter()
                .zip(colors)
                .map(|(position, color)| ScenePoint { position, color })
                .collect()
        }
        None => sample_point_cloud(&mesh, opts.point_density, opts.seed ^ stable_hash(&anno.scene_id))?,
    };
    SceneModel::new(anno.scene_id, mesh, points, anchors)
}

pub fn ingest_scene(mesh_path: &Path, annotation_path: &Path, opts: &IngestOptions) -> Result<SceneModel> {
    let mesh = read_file(mesh_path)?;
    let anno_text = String::from_utf8(read_file(annotation_path)?).map_err(|e| Error::parse(e.utf8_error().valid_up_to(), "annotation is not UTF-8"))?;
    let anno: AnnotationFile = serde_json::from_str(&anno_text)?;
    let points = match &anno.points_file {
        Some(p) => {
            let base = annotation_path.parent().unwrap_or(Path::new("."));
            Some(read_file(&base.join(p))?)
        }
        None => None,
    };
    ingest_scene_from_parts(&mesh, &anno_text, points.as_deref(), opts)
}

pub fn annotation_of(scene: &SceneModel, points_file: Option<String>) -> AnnotationFile {
    AnnotationFile {
        scene_id: scene.scene_id.clone(),
        anchors: scene
            .anchors
            .iter()
            .map(|a| AnchorRecord {
                id: a.instance_id,
                class: a.class_label.clone(),
                center: a.obb.center.to_array(),
                half_extents: a.obb.half_extents.to_array(),
                yaw: a.obb.yaw,
            })
            .collect(),
        points_file,
    }
}

/// Writes `<id>.ply`, `<id>.json` and `<id>_points.ply` into `dir`; returns the mesh and annotation paths.
pub fn export_scene(scene: &SceneModel, dir: &Path) -> Result<(PathBuf, PathBuf)> {
    fs::create_dir_all(dir)?;
    let id = &scene.scene_id;
    let mesh_path = dir.join(format!("{id}.ply"));
    let anno_path = dir.join(format!("{id}.json"));
    let points_name = format!("{id}_points.ply");
    fs::write(&mesh_path, write_ply(scene.mesh.vertices(), scene.mesh.colors(), scene.mesh.triangles()))?;
    let pos: Vec<Vec3> = scene.points.iter().map(|p| p.position).collect();
    let col: Vec<[f32; 3]> = scene.points.iter().map(|p| p.color).collect();
    fs::write(dir.join(&points_name), write_ply(&pos, Some(&col), &[]))?;
    let anno = annotation_of(scene, Some(points_name));
    fs::write(&anno_path, serde_json::to_string_pretty(&anno)? + "\n")?;
    Ok((mesh_path, anno_path))
}

fn frontal_to_yaw(frontal: &str) -> Result<f64> {
    use std::f64::consts::{FRAC_PI_2, PI};
    // rotation that maps the declared frontal axis onto +Y
    Ok(match frontal {
        "+y" => 0.0,
        "+x" => FRAC_PI_2,
        "-x" => -FRAC_PI_2,
        "-y" => PI,
        other => return Err(Error::validation(format!("unsupported frontal axis `{other}`"))),
    })
}

/// Builds an asset from a PLY mesh and its sidecar, re-axing so the front faces +Y.
pub fn ingest_asset_from_parts(mesh_ply: &[u8], sidecar_json: &str) -> Result<Asset> {
    let side: AssetSidecar = serde_json::from_str(sidecar_json)?;
    if side.up != "+z" {
        return Err(Error::validation(format!("unsupported up axis `{}` (only +z)", side.up)));
    }
    let yaw = frontal_to_yaw(&side.frontal)?;
    let mesh = mesh_from_ply(mesh_ply)?;
    let mesh = if yaw == 0.0 { mesh } else { mesh.transformed(yaw, Vec3::ZERO) };
    let asset = Asset::from_mesh(side.asset_id, mesh)?;
    let declared = Vec3::from(side.extents);
    if (asset.extents - declared).to_array().iter().any(|d| d.abs() > 1e-6) {
        return Err(Error::validation(format!(
            "asset `{}` extents {:?} disagree with mesh bounds {:?}",
            asset.asset_id,
            side.extents,
            asset.extents.to_array()
        )));
    }
    Ok(asset)
}

pub fn ingest_asset(mesh_path: &Path, sidecar_path: &Path) -> Result<Asset> {
    let mesh = read_file(mesh_path)?;
    let side = String::from_utf8(read_file(sidecar_path)?).map_err(|_| Error::parse(0, "sidecar is not UTF-8"))?;
    ingest_asset_from_parts(&mesh, &side)
}

pub fn export_asset(asset: &Asset, dir: &Path) -> Result<(PathBuf, PathBuf)> {
    fs::create_dir_all(dir)?;
    let mesh_path = dir.join(format!("{}.ply", asset.asset_id));
    let side_path = dir.join(format!("{}.json", asset.asset_id));
    fs::write(&mesh_path, write_ply(asset.mesh.vertices(), asset.mesh.colors(), asset.mesh.triangles()))?;
    let side = AssetSidecar {
        asset_id: asset.asset_id.clone(),
        up: "+z".into(),
        frontal: "+y".into(),
        extents: asset.extents.to_array(),
    };
    fs::write(&side_path, serde_json::to_string_pretty(&side)? + "\n")?;
    Ok((mesh_path, side_path))
}

fn json_stems(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut out = Vec::new();
    for entry in fs::read_dir(dir)? {
        let p = entry?.path();
        if p.extension().is_some_and(|e| e == "json") {
            out.push(p);
        }
    }
    out.sort();
    Ok(out)
}

/// Loads every `<id>.json` + `<id>.ply` scene pair in `dir`, sorted by file name.
pub fn load_scene_dir(dir: &Path, opts: &IngestOptions) -> Result<Vec<SceneModel>> {
    json_stems(dir)?
        .into_iter()
        .map(|anno| ingest_scene(&anno.with_extension("ply"), &anno, opts))
        .collect()
}

/// Loads every `<id>.json` + `<id>.ply` asset pair in `dir`, sorted by file name.
pub fn load_asset_dir(dir: &Path) -> Result<Vec<Asset>> {
    json_stems(dir)?
        .into_iter()
        .map(|side| ingest_asset(&side.with_extension("ply"), &side))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scene::ply::write_ply;

    fn floor_ply() -> Vec<u8> {
        let v = [Vec3::new(0.0, 0.0, 0.0), Vec3::new(2.0, 0.0, 0.0), Vec3::new(2.0, 2.0, 0.0), Vec3::new(0.0, 2.0, 0.0), Vec3::new(1.0, 1.0, 0.0)];
        write_ply(&v, None, &[[0, 1, 4], [1, 2, 4], [2, 3, 4], [3, 0, 4]])
    }

    #[test]
    fn floor_with_one_table() {
        let anno = r#"{"scene_id": "s", "anchors": [{"id": 3, "class": "table", "center": [1, 1, 0.375], "half_extents": [0.5, 0.3, 0.375], "yaw": 0.0}]}"#;
        let s = ingest_scene_from_parts(&floor_ply(), anno, None, &IngestOptions::default()).unwrap();
        assert_eq!(s.anchors.len(), 1);
        assert_eq!(s.anchors[0].class_label, "table");
        assert_eq!(s.points.len(), 400);
    }

    #[test]
    fn zero_half_extent_is_rejected() {
        let anno = r#"{"scene_id": "s", "anchors": [{"id": 3, "class": "table", "center": [1, 1, 0.375], "half_extents": [0.0, 0.3, 0.375], "yaw": 0.0}]}"#;
        let err = ingest_scene_from_parts(&floor_ply(), anno, None, &IngestOptions::default()).unwrap_err();
        assert!(matches!(err, Error::Validation(_)), "{err}");
    }

    #[test]
    fn malformed_mesh_is_a_parse_error() {
        let anno = r#"{"scene_id": "s", "anchors": []}"#;
        let err = ingest_scene_from_parts(b"ply\nformat ascii 1.0\nelement vertex 1\n", anno, None, &IngestOptions::default()).unwrap_err();
        assert!(matches!(err, Error::Parse { .. }));
    }

    #[test]
    fn asset_frontal_is_reaxed() {
        let m = TriangleMesh::cuboid(Vec3::ZERO, Vec3::new(0.3, 0.1, 0.2), 0.0, None);
        let ply = write_ply(m.vertices(), None, m.triangles());
        // front along +x: after re-axing the long side lies along y
        let side = r#"{"asset_id": "a", "up": "+z", "frontal": "+x", "extents": [0.2, 0.6, 0.4]}"#;
        let a = ingest_asset_from_parts(&ply, side).unwrap();
        assert!((a.extents.y - 0.6).abs() < 1e-9);
        let bad = r#"{"asset_id": "a", "up": "+z", "frontal": "+y", "extents": [0.2, 0.6, 0.4]}"#;
        assert!(ingest_asset_from_parts(&ply, bad).is_err());
    }
}
