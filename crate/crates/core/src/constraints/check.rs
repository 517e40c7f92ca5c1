use super::{BetweenMode, Constraint, ThresholdConfig, ValidityReport, Verdict};
use crate::error::{Error, Result};
use crate::geometry::{
    footprint_iom, interval_iom, meshes_penetrate, obb_min_distance, polygon_iom, raycast::raycast_all_range, ConvexPolygon, Obb, Ray,
    TriangleMesh, Vec3,
};
use crate::scene::{pose_asset, Anchor, Asset, Placement, SceneModel};
use crate::visibility::{anchor_camera_position, AnchorCamera, VisibilityQuery};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Proximity {
    Near,
    Adjacent,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Vertical {
    On,
    Above,
    Below,
}

/// `Exact` renders the posed asset mesh at the benchmark resolution; `Approx` renders the
/// asset's bounding cuboid at yaw 0 and the dataset resolution.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VisibilityMode {
    Exact,
    Approx,
}

/// Hits closer than this along a ray are treated as the same surface point.
const SAME_HIT: f64 = 1e-6;

/// Height of `bottom` above the first surface under `(x, y)`, or `None` when that surface
/// is missing, not up-facing, or doubles as the underside of something.
pub fn support_gap(mesh: &TriangleMesh, x: f64, y: f64, bottom: f64, cfg: &ThresholdConfig) -> Option<f64> {
    let start = bottom + cfg.penetration_tol;
    let ray = Ray::down(Vec3::new(x, y, start));
    let reach = 2.0 * cfg.penetration_tol + cfg.support_gap_tol + SAME_HIT;
    let hits = raycast_all_range(mesh, &ray, 0.0, reach);
    let first = hits.hits.first()?;
    let normal_z = |tri: usize| mesh.triangle_normal(tri).z;
    if normal_z(first.triangle) <= 0.0 {
        return None;
    }
    if hits.iter().any(|h| h.t - first.t <= SAME_HIT && normal_z(h.triangle) < 0.0) {
        return None;
    }
    let gap = bottom - first.point.z;
    (gap >= -cfg.penetration_tol && gap <= cfg.support_gap_tol).then_some(gap)
}

/// Resting on a surface below the footprint center, and not interpenetrating the scene.
pub fn check_physical(scene: &SceneModel, asset: &Asset, p: &Placement, cfg: &ThresholdConfig) -> bool {
    let (posed, obb) = pose_asset(asset, p);
    if support_gap(&scene.mesh, p.t.x, p.t.y, obb.bottom(), cfg).is_none() {
        return false;
    }
    !meshes_penetrate(&posed, &scene.mesh, cfg.penetration_tol)
}

pub fn proximity_ok(kind: Proximity, asset: &Obb, anchor: &Obb, room_size: f64, cfg: &ThresholdConfig) -> bool {
    let d = obb_min_distance(asset, anchor);
    match kind {
        Proximity::Adjacent => d <= cfg.adjacent_tol,
        Proximity::Near => d <= cfg.near_room_fraction * room_size,
    }
}

pub fn vertical_ok(kind: Vertical, asset: &Obb, anchor: &Obb, cfg: &ThresholdConfig) -> bool {
    let gap_ok = match kind {
        Vertical::On => (asset.bottom() - anchor.top()).abs() <= cfg.on_gap_tol,
        Vertical::Above => asset.bottom() - anchor.top() > cfg.above_below_min_gap,
        Vertical::Below => anchor.bottom() - asset.top() > cfg.above_below_min_gap,
    };
    gap_ok && footprint_iom(asset, anchor) >= cfg.vertical_iom_min
}

fn segment_distance_xy(p: [f64; 2], a: [f64; 2], b: [f64; 2]) -> (f64, f64) {
    let ab = [b[0] - a[0], b[1] - a[1]];
    let len2 = ab[0] * ab[0] + ab[1] * ab[1];
    let s = if len2 > 0.0 {
        ((p[0] - a[0]) * ab[0] + (p[1] - a[1]) * ab[1]) / len2
    } else {
        0.0
    };
    let q = [a[0] + ab[0] * s.clamp(0.0, 1.0), a[1] + ab[1] * s.clamp(0.0, 1.0)];
    ((p[0] - q[0]).hypot(p[1] - q[1]), s)
}

pub fn between_ok(asset: &Obb, a1: &Obb, a2: &Obb, cfg: &ThresholdConfig) -> bool {
    if obb_min_distance(a1, a2) > cfg.between_anchor_max_dist {
        return false;
    }
    if footprint_iom(asset, a1) > cfg.between_overlap_max || footprint_iom(asset, a2) > cfg.between_overlap_max {
        return false;
    }
    match cfg.between_mode {
        BetweenMode::Iom => {
            let mut pts = a1.footprint().points().to_vec();
            pts.extend_from_slice(a2.footprint().points());
            let hull = ConvexPolygon::hull(&pts);
            if polygon_iom(&asset.footprint(), &hull) < cfg.between_iom_min {
                return false;
            }
            let band = [a1.bottom().min(a2.bottom()), a1.top().max(a2.top())];
            interval_iom(asset.z_range(), band) >= cfg.between_iom_min
        }
        BetweenMode::Line => {
            let (d, s) = segment_distance_xy(asset.center.xy(), a1.center.xy(), a2.center.xy());
            d <= cfg.between_line_tol && s > 0.0 && s < 1.0
        }
    }
}

pub fn facing_ok(asset: &Obb, anchor: &Obb, cfg: &ThresholdConfig) -> bool {
    let f = Vec3::Y.rotate_z(asset.yaw);
    let d = Vec3::new(anchor.center.x - asset.center.x, anchor.center.y - asset.center.y, 0.0);
    let dist = d.norm();
    if dist > cfg.facing_max_dist || dist == 0.0 {
        return false;
    }
    let cos = (f.dot(d) / dist).clamp(-1.0, 1.0);
    if cos.acos() > cfg.facing_half_angle.to_radians() {
        return false;
    }
    let lateral = [f.y, -f.x];
    let span = |o: &Obb| {
        let (lo, hi) = o.footprint().project(lateral);
        [lo, hi]
    };
    interval_iom(span(asset), span(anchor)) >= cfg.facing_lateral_iom_min
}

fn instances<'a>(scene: &'a SceneModel, class: &str) -> Result<Vec<&'a Anchor>> {
    let v: Vec<&Anchor> = scene.anchors.iter().filter(|a| a.class_label == class).collect();
    if v.is_empty() {
        return Err(Error::UnknownAnchor(class.to_string()));
    }
    Ok(v)
}

/// Largest instance of a class by box volume; ties go to the earlier annotation.
pub fn largest_instance<'a>(scene: &'a SceneModel, class: &str) -> Result<&'a Anchor> {
    let v = instances(scene, class)?;
    let mut best = v[0];
    for a in &v[1..] {
        if a.obb.volume() > best.obb.volume() {
            best = a;
        }
    }
    Ok(best)
}

pub fn check_proximity(kind: Proximity, scene: &SceneModel, asset: &Asset, p: &Placement, class: &str, cfg: &ThresholdConfig) -> Result<bool> {
    let obb = asset.obb_at(p);
    let room = scene.room_size();
    Ok(instances(scene, class)?.iter().any(|a| proximity_ok(kind, &obb, &a.obb, room, cfg)))
}

pub fn check_vertical(kind: Vertical, scene: &SceneModel, asset: &Asset, p: &Placement, class: &str, cfg: &ThresholdConfig) -> Result<bool> {
    let obb = asset.obb_at(p);
    Ok(instances(scene, class)?.iter().any(|a| vertical_ok(kind, &obb, &a.obb, cfg)))
}

pub fn check_between(scene: &SceneModel, asset: &Asset, p: &Placement, class1: &str, class2: &str, cfg: &ThresholdConfig) -> Result<bool> {
    if class1 == class2 {
        return Err(Error::validation(format!("between needs two different anchor classes, got `{class1}` twice")));
    }
    let obb = asset.obb_at(p);
    let (i1, i2) = (instances(scene, class1)?, instances(scene, class2)?);
    Ok(i1.iter().any(|a| i2.iter().any(|b| between_ok(&obb, &a.obb, &b.obb, cfg))))
}

pub fn check_facing(scene: &SceneModel, asset: &Asset, p: &Placement, class: &str, cfg: &ThresholdConfig) -> Result<bool> {
    let obb = asset.obb_at(p);
    Ok(instances(scene, class)?.iter().any(|a| facing_ok(&obb, &a.obb, cfg)))
}

/// `visible = true` asks whether any pixel sees the asset; `false` is its negation.
pub fn check_visibility(
    visible: bool,
    scene: &SceneModel,
    asset: &Asset,
    p: &Placement,
    class: &str,
    cfg: &ThresholdConfig,
    mode: VisibilityMode,
) -> Result<bool> {
    let anchor = largest_instance(scene, class)?;
    let (target, res) = match mode {
        VisibilityMode::Exact => (pose_asset(asset, p).0, cfg.vis_res_bench),
        VisibilityMode::Approx => (Obb::new(p.t, asset.extents * 0.5, 0.0)?.to_mesh(), cfg.vis_res_dataset),
    };
    let camera = AnchorCamera::look_at(anchor_camera_position(&scene.mesh, anchor), p.t, cfg.vis_fov, res)?;
    let seen = VisibilityQuery {
        scene_mesh: &scene.mesh,
        anchor_obb: Some(&anchor.obb),
        target_mesh: &target,
        camera,
        near_clip: cfg.vis_near_clip,
    }
    .any_visible();
    Ok(seen == visible)
}

pub fn evaluate_constraint(
    scene: &SceneModel,
    asset: &Asset,
    p: &Placement,
    c: &Constraint,
    cfg: &ThresholdConfig,
    mode: VisibilityMode,
) -> Result<bool> {
    use Constraint::*;
    match c {
        Plausible => Ok(check_physical(scene, asset, p, cfg)),
        Near { anchor } => check_proximity(Proximity::Near, scene, asset, p, anchor, cfg),
        Adjacent { anchor } => check_proximity(Proximity::Adjacent, scene, asset, p, anchor, cfg),
        On { anchor } => check_vertical(Vertical::On, scene, asset, p, anchor, cfg),
        Above { anchor } => check_vertical(Vertical::Above, scene, asset, p, anchor, cfg),
        Below { anchor } => check_vertical(Vertical::Below, scene, asset, p, anchor, cfg),
        Between { anchor1, anchor2 } => check_between(scene, asset, p, anchor1, anchor2, cfg),
        Facing { anchor } => check_facing(scene, asset, p, anchor, cfg),
        Visible { anchor } => check_visibility(true, scene, asset, p, anchor, cfg, mode),
        NotVisible { anchor } => check_visibility(false, scene, asset, p, anchor, cfg, mode),
    }
}

/// Benchmark-exact evaluation. Physical plausibility is always reported once, first;
/// checker errors mark that constraint unsatisfied and are kept in the verdict.
pub fn evaluate_prompt(scene: &SceneModel, asset: &Asset, p: &Placement, constraints: &[Constraint], cfg: &ThresholdConfig) -> ValidityReport {
    let mut list = vec![Constraint::Plausible];
    list.extend(constraints.iter().filter(|c| **c != Constraint::Plausible).cloned());
    let verdicts = list
        .into_iter()
        .map(|c| {
            let (satisfied, error) = match evaluate_constraint(scene, asset, p, &c, cfg, VisibilityMode::Exact) {
                Ok(s) => (s, None),
                Err(e) => (false, Some(e.to_string())),
            };
            Verdict {
                group: c.group(),
                constraint: c,
                satisfied,
                error,
            }
        })
        .collect();
    ValidityReport::from_verdicts(verdicts)
}
