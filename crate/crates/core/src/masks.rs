//! Per-point placement masks: physical plausibility, per-constraint masks and their intersection.

use std::io::{Read, Write};
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::constraints::{evaluate_constraint, Constraint, ThresholdConfig, VisibilityMode};
use crate::error::{Error, Result};
use crate::geometry::Vec3;
use crate::plausibility::{bin_yaw, build_heightmap_stack, compute_asset_footprints, compute_physical_grid, grid_to_point_mask, BINS};
use crate::scene::{Asset, Placement, SceneModel};

const MAGIC: &[u8; 4] = b"PLMK";
pub const FORMAT_VERSION: u16 = 1;

/// Hex SHA-256 of the prompt text.
pub fn prompt_hash(prompt: &str) -> String {
    Sha256::digest(prompt.as_bytes()).iter().map(|b| format!("{b:02x}")).collect()
}

/// Validity plus 8 rotation bits per scene point. A point is valid exactly when at least one
/// rotation bit is set.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PlacementMask {
    pub scene_id: String,
    pub asset_id: String,
    pub prompt_hash: String,
    rotations: Vec<u8>,
}

/// JSON sidecar describing a stored mask.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MaskDescriptor {
    pub scene_id: String,
    pub asset_id: String,
    pub prompt_hash: String,
    pub points: usize,
    pub valid_points: usize,
    pub format_version: u16,
}

impl PlacementMask {
    pub fn from_rotations(scene_id: impl Into<String>, asset_id: impl Into<String>, rotations: Vec<u8>) -> PlacementMask {
        PlacementMask {
            scene_id: scene_id.into(),
            asset_id: asset_id.into(),
            prompt_hash: String::new(),
            rotations,
        }
    }

    /// Every point valid at every rotation.
    pub fn full(scene_id: impl Into<String>, asset_id: impl Into<String>, n: usize) -> PlacementMask {
        PlacementMask::from_rotations(scene_id, asset_id, vec![0xFF; n])
    }

    pub fn len(&self) -> usize {
        self.rotations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rotations.is_empty()
    }

    pub fn is_valid(&self, i: usize) -> bool {
        self.rotations[i] != 0
    }

    pub fn rotation_bits(&self, i: usize) -> u8 {
        self.rotations[i]
    }

    pub fn rotations(&self) -> &[u8] {
        &self.rotations
    }

    pub fn validity(&self) -> Vec<bool> {
        self.rotations.iter().map(|&r| r != 0).collect()
    }

    pub fn valid_count(&self) -> usize {
        self.rotations.iter().filter(|&&r| r != 0).count()
    }

    pub fn valid_indices(&self) -> Vec<usize> {
        (0..self.len()).filter(|&i| self.is_valid(i)).collect()
    }

    /// Valid (point, bin) pairs.
    pub fn valid_pairs(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        for (i, &r) in self.rotations.iter().enumerate() {
            out.extend((0..BINS).filter(|b| r >> b & 1 == 1).map(|b| (i, b)));
        }
        out
    }

    pub fn descriptor(&self) -> MaskDescriptor {
        MaskDescriptor {
            scene_id: self.scene_id.clone(),
            asset_id: self.asset_id.clone(),
            prompt_hash: self.prompt_hash.clone(),
            points: self.len(),
            valid_points: self.valid_count(),
            format_version: FORMAT_VERSION,
        }
    }

    /// Binary form: magic, version, point count, validity bytes, rotation bytes.
    pub fn to_bytes(&self) -> Vec<u8> {
        let n = self.len();
        let mut out = Vec::with_capacity(10 + 2 * n);
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
        out.extend_from_slice(&(n as u32).to_le_bytes());
        out.extend(self.rotations.iter().map(|&r| (r != 0) as u8));
        out.extend_from_slice(&self.rotations);
        out
    }

    /// Parses the binary form; ids come from the descriptor.
    pub fn from_bytes(bytes: &[u8], desc: &MaskDescriptor) -> Result<PlacementMask> {
        if bytes.len() < 10 || &bytes[..4] != MAGIC {
            return Err(Error::parse(0, "not a placement mask (bad magic)"));
        }
        let version = u16::from_le_bytes([bytes[4], bytes[5]]);
        if version != FORMAT_VERSION {
            return Err(Error::parse(4, format!("unsupported mask version {version}")));
        }
        let n = u32::from_le_bytes(bytes[6..10].try_into().unwrap()) as usize;
        if bytes.len() != 10 + 2 * n {
            return Err(Error::parse(10, format!("expected {} bytes for {n} points, found {}", 10 + 2 * n, bytes.len())));
        }
        if n != desc.points {
            return Err(Error::validation(format!("descriptor lists {} points, mask holds {n}", desc.points)));
        }
        let (valid, rot) = bytes[10..].split_at(n);
        for (i, (&v, &r)) in valid.iter().zip(rot).enumerate() {
            if v > 1 || (v == 1) != (r != 0) {
                return Err(Error::parse(10 + i, format!("point {i}: validity byte {v} disagrees with rotation bits {r:#04x}")));
            }
        }
        Ok(PlacementMask {
            scene_id: desc.scene_id.clone(),
            asset_id: desc.asset_id.clone(),
            prompt_hash: desc.prompt_hash.clone(),
            rotations: rot.to_vec(),
        })
    }

    /// Writes `<stem>.plmk` and `<stem>.json`.
    pub fn save(&self, dir: &Path, stem: &str) -> Result<()> {
        std::fs::File::create(dir.join(format!("{stem}.plmk")))?.write_all(&self.to_bytes())?;
        let mut json = serde_json::to_string_pretty(&self.descriptor())?;
        json.push('\n');
        std::fs::write(dir.join(format!("{stem}.json")), json)?;
        Ok(())
    }

    pub fn load(dir: &Path, stem: &str) -> Result<PlacementMask> {
        let desc: MaskDescriptor = serde_json::from_slice(&std::fs::read(dir.join(format!("{stem}.json")))?)?;
        let mut bytes = Vec::new();
        std::fs::File::open(dir.join(format!("{stem}.plmk")))?.read_to_end(&mut bytes)?;
        PlacementMask::from_bytes(&bytes, &desc)
    }
}

/// Asset center for a contact point on the supporting surface.
pub fn lift_to_center_frame(contact: Vec3, asset: &Asset, yaw: f64) -> Placement {
    Placement {
        t: contact + Vec3::new(0.0, 0.0, asset.extents.z / 2.0),
        yaw,
    }
}

/// Physical plausibility per scene point from the heightmap grid.
pub fn physical_mask(scene: &SceneModel, asset: &Asset, cfg: &ThresholdConfig) -> Result<PlacementMask> {
    if scene.points.is_empty() {
        return Err(Error::validation(format!("scene `{}` has no points", scene.scene_id)));
    }
    let stack = build_heightmap_stack(&scene.mesh, cfg.cell_size, cfg.max_layers)?;
    let fp = compute_asset_footprints(asset, cfg.cell_size, cfg.footprint_margin + cfg.point_snap_margin)?;
    let grid = compute_physical_grid(&stack, &fp, cfg)?;
    let points: Vec<Vec3> = scene.points.iter().map(|p| p.position).collect();
    let rot = grid_to_point_mask(&grid, &stack, &points);
    Ok(PlacementMask::from_rotations(&scene.scene_id, &asset.asset_id, rot))
}

fn check_ids(a: &PlacementMask, b: &PlacementMask) -> Result<()> {
    if a.len() != b.len() {
        return Err(Error::validation(format!("masks cover {} and {} points", a.len(), b.len())));
    }
    if a.scene_id != b.scene_id || a.asset_id != b.asset_id {
        return Err(Error::validation(format!(
            "masks belong to different scene/asset pairs: {}/{} vs {}/{}",
            a.scene_id, a.asset_id, b.scene_id, b.asset_id
        )));
    }
    Ok(())
}

/// Restricts `prior` to the points and rotations where `c` holds.
///
/// Visibility is rotation-independent (bounding cuboid at yaw 0), so it runs once per point;
/// every other constraint is checked at each still-valid bin center.
pub fn constraint_point_mask(
    scene: &SceneModel,
    asset: &Asset,
    c: &Constraint,
    prior: &PlacementMask,
    cfg: &ThresholdConfig,
) -> Result<PlacementMask> {
    if prior.len() != scene.points.len() {
        return Err(Error::validation(format!("mask covers {} points, scene has {}", prior.len(), scene.points.len())));
    }
    if *c == Constraint::Plausible {
        return Ok(prior.clone());
    }
    for class in c.anchors() {
        if scene.anchors_of_class(class).next().is_none() {
            return Err(Error::UnknownAnchor(class.to_string()));
        }
    }
    let per_point = matches!(c, Constraint::Visible { .. } | Constraint::NotVisible { .. });
    let rotations = (0..prior.len())
        .into_par_iter()
        .map(|i| {
            let bits = prior.rotations[i];
            if bits == 0 {
                return Ok(0);
            }
            let contact = scene.points[i].position;
            if per_point {
                let p = lift_to_center_frame(contact, asset, 0.0);
                let ok = evaluate_constraint(scene, asset, &p, c, cfg, VisibilityMode::Approx)?;
                return Ok(if ok { bits } else { 0 });
            }
            let mut out = 0u8;
            for b in (0..BINS).filter(|b| bits >> b & 1 == 1) {
                let p = lift_to_center_frame(contact, asset, bin_yaw(b));
                if evaluate_constraint(scene, asset, &p, c, cfg, VisibilityMode::Approx)? {
                    out |= 1 << b;
                }
            }
            Ok(out)
        })
        .collect::<Result<Vec<u8>>>()?;
    Ok(PlacementMask {
        rotations,
        ..prior.clone()
    })
}

/// Pointwise AND of validity and rotation bits.
pub fn combine_masks(masks: &[PlacementMask]) -> Result<PlacementMask> {
    let (first, rest) = masks.split_first().ok_or_else(|| Error::validation("no masks to combine"))?;
    let mut out = first.clone();
    for m in rest {
        check_ids(&out, m)?;
        for (a, b) in out.rotations.iter_mut().zip(&m.rotations) {
            *a &= b;
        }
    }
    Ok(out)
}

/// Mask of every point and rotation satisfying physical plausibility and all constraints.
/// Each constraint only inspects points that survived the previous ones.
pub fn prompt_mask(scene: &SceneModel, asset: &Asset, constraints: &[Constraint], prompt: &str, cfg: &ThresholdConfig) -> Result<PlacementMask> {
    let physical = physical_mask(scene, asset, cfg)?;
    apply_constraints(scene, asset, constraints, physical, prompt, cfg)
}

/// Like [`prompt_mask`], starting from an already computed physical mask.
pub fn apply_constraints(
    scene: &SceneModel,
    asset: &Asset,
    constraints: &[Constraint],
    physical: PlacementMask,
    prompt: &str,
    cfg: &ThresholdConfig,
) -> Result<PlacementMask> {
    let mut mask = physical;
    for c in constraints {
        if mask.valid_count() == 0 {
            break;
        }
        mask = constraint_point_mask(scene, asset, c, &mask, cfg)?;
    }
    mask.prompt_hash = prompt_hash(prompt);
    Ok(mask)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lift_offsets_half_height() {
        let a = Asset::cuboid("a", Vec3::new(0.3, 0.3, 0.4)).unwrap();
        let p = lift_to_center_frame(Vec3::new(1.0, 2.0, 0.0), &a, 0.5);
        assert_eq!(p.t, Vec3::new(1.0, 2.0, 0.2));
        assert_eq!(p.yaw, 0.5);
        assert_eq!(p.t.z - a.extents.z / 2.0, 0.0);
    }

    #[test]
    fn binary_roundtrip_and_rejects() {
        let mut m = PlacementMask::from_rotations("s", "a", vec![0, 0xFF, 0b101, 0]);
        m.prompt_hash = prompt_hash("Place the asset near the table");
        let bytes = m.to_bytes();
        assert_eq!(&bytes[..4], b"PLMK");
        assert_eq!(&bytes[10..14], &[0, 1, 1, 0]);
        assert_eq!(PlacementMask::from_bytes(&bytes, &m.descriptor()).unwrap(), m);
        let mut bad = bytes.clone();
        bad[10] = 1;
        assert!(PlacementMask::from_bytes(&bad, &m.descriptor()).is_err());
        assert!(PlacementMask::from_bytes(&bytes[..12], &m.descriptor()).is_err());
    }

    #[test]
    fn combine_identity_and_complement() {
        let m = PlacementMask::from_rotations("s", "a", vec![0, 0x0F, 0xFF, 0x80]);
        let full = PlacementMask::full("s", "a", 4);
        assert_eq!(combine_masks(&[m.clone(), full]).unwrap(), m);
        let comp = PlacementMask::from_rotations("s", "a", m.rotations().iter().map(|r| !r).collect());
        assert_eq!(combine_masks(&[m.clone(), comp]).unwrap().valid_count(), 0);
        let other = PlacementMask::full("s", "a", 3);
        assert!(combine_masks(&[m, other]).is_err());
    }
}
