use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// How `between` is judged.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum BetweenMode {
    /// Footprint IoM against the hull of both anchors plus a vertical IoM.
    #[default]
    Iom,
    /// Asset center close to the segment joining the anchor centers.
    Line,
}

/// Every tolerance used by the validators and the mask pipeline. Lengths in meters,
/// angles in degrees.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ThresholdConfig {
    pub near_room_fraction: f64,
    pub adjacent_tol: f64,
    pub vertical_iom_min: f64,
    pub on_gap_tol: f64,
    pub above_below_min_gap: f64,
    pub between_iom_min: f64,
    pub between_overlap_max: f64,
    pub between_anchor_max_dist: f64,
    pub facing_max_dist: f64,
    pub facing_half_angle: f64,
    pub facing_lateral_iom_min: f64,
    pub support_gap_tol: f64,
    pub heightmap_range_tol: f64,
    pub vis_fov: f64,
    pub vis_res_bench: u32,
    pub vis_res_dataset: u32,

    /// Overlap depth below which asset and scene surfaces count as resting contact.
    pub penetration_tol: f64,
    /// Heightmap cell edge.
    pub cell_size: f64,
    /// Cap on heightmap layers.
    pub max_layers: usize,
    /// Extra radius added around the asset outline when rasterizing footprints.
    pub footprint_margin: f64,
    /// Further radius used when grid verdicts are transferred to scene points, covering the
    /// offset between a point and the lattice position it snaps to.
    pub point_snap_margin: f64,
    pub between_mode: BetweenMode,
    /// Max distance from the anchor-center segment in `Line` mode.
    pub between_line_tol: f64,
    /// Camera near plane for visibility rays.
    pub vis_near_clip: f64,
    /// Anchor classes eligible for visibility constraints.
    pub visibility_classes: Vec<String>,
}

impl Default for ThresholdConfig {
    fn default() -> Self {
        ThresholdConfig {
            near_room_fraction: 0.01,
            adjacent_tol: 0.03,
            vertical_iom_min: 0.5,
            on_gap_tol: 0.01,
            above_below_min_gap: 0.01,
            between_iom_min: 0.5,
            between_overlap_max: 0.3,
            between_anchor_max_dist: 1.5,
            facing_max_dist: 2.0,
            facing_half_angle: 30.0,
            facing_lateral_iom_min: 0.5,
            support_gap_tol: 0.01,
            heightmap_range_tol: 0.10,
            vis_fov: 60.0,
            vis_res_bench: 256,
            vis_res_dataset: 64,

            penetration_tol: 1e-3,
            cell_size: 0.025,
            max_layers: 8,
            footprint_margin: 0.0,
            point_snap_margin: 0.02,
            between_mode: BetweenMode::Iom,
            between_line_tol: 0.25,
            vis_near_clip: 1e-3,
            visibility_classes: vec!["tv".into(), "door".into(), "window".into()],
        }
    }
}

impl ThresholdConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("near_room_fraction", self.near_room_fraction),
            ("adjacent_tol", self.adjacent_tol),
            ("vertical_iom_min", self.vertical_iom_min),
            ("on_gap_tol", self.on_gap_tol),
            ("above_below_min_gap", self.above_below_min_gap),
            ("between_iom_min", self.between_iom_min),
            ("between_overlap_max", self.between_overlap_max),
            ("between_anchor_max_dist", self.between_anchor_max_dist),
            ("facing_max_dist", self.facing_max_dist),
            ("facing_lateral_iom_min", self.facing_lateral_iom_min),
            ("support_gap_tol", self.support_gap_tol),
            ("heightmap_range_tol", self.heightmap_range_tol),
            ("penetration_tol", self.penetration_tol),
            ("cell_size", self.cell_size),
            ("between_line_tol", self.between_line_tol),
            ("vis_near_clip", self.vis_near_clip),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::validation(format!("{name} must be positive, got {v}")));
            }
        }
        for (name, v) in [("facing_half_angle", self.facing_half_angle), ("vis_fov", self.vis_fov)] {
            if !(v > 0.0 && v < 90.0) {
                return Err(Error::validation(format!("{name} must lie in (0, 90) degrees, got {v}")));
            }
        }
        if self.vis_res_bench == 0 || self.vis_res_dataset == 0 || self.max_layers == 0 {
            return Err(Error::validation("resolutions and max_layers must be positive"));
        }
        for (name, v) in [("footprint_margin", self.footprint_margin), ("point_snap_margin", self.point_snap_margin)] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::validation(format!("{name} must be non-negative, got {v}")));
            }
        }
        Ok(())
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: ThresholdConfig = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn json_roundtrip_and_partial_files() {
        let c = ThresholdConfig::default();
        assert_eq!(ThresholdConfig::from_json(&c.to_json()).unwrap(), c);
        let partial = ThresholdConfig::from_json(r#"{"adjacent_tol": 0.05}"#).unwrap();
        assert_eq!(partial.adjacent_tol, 0.05);
        assert_eq!(partial.near_room_fraction, 0.01);
    }

    #[test]
    fn rejects_bad_values() {
        assert!(ThresholdConfig::from_json(r#"{"facing_half_angle": 95}"#).is_err());
        assert!(ThresholdConfig::from_json(r#"{"adjacent_tol": 0}"#).is_err());
        assert!(ThresholdConfig::from_json(r#"{"adjacent_tolerance": 0.1}"#).is_err());
    }
}
