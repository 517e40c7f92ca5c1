//! Procedural test rooms: a floor, four single-sided walls with door/window holes,
//! and cuboid furniture placed by simple policies.

use std::f64::consts::{FRAC_PI_2, TAU};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::ply::quantize_color;
use super::sample::sample_point_cloud;
use super::{Anchor, SceneModel};
use crate::error::{Error, Result};
use crate::geometry::{obb_min_distance, Obb, TriangleMesh, Vec3};

const MAX_ATTEMPTS: usize = 200;
/// Minimum clearance between furniture items, and between items and openings.
const ITEM_GAP: f64 = 0.05;
/// Gap left between a wall-backed item and the wall plane.
const WALL_GAP: f64 = 0.005;
const OPENING_DEPTH: f64 = 0.1;
const LEG_SIZE: f64 = 0.05;
const TOP_THICKNESS: f64 = 0.04;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PositionPolicy {
    /// Anywhere on the floor, any yaw.
    Random,
    /// Back against a random wall, front facing into the room.
    AgainstWall,
    /// Footprint center and yaw given explicitly.
    Fixed { x: f64, y: f64, yaw: f64 },
    /// Wall-mounted with the bottom at `elevation` (TVs, shelves).
    OnWall { elevation: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FurnitureSpec {
    pub class: String,
    /// Footprint sizes along the item's local x (width) and y (depth), meters.
    pub size: [f64; 2],
    pub height: f64,
    pub policy: PositionPolicy,
}

impl FurnitureSpec {
    pub fn new(class: impl Into<String>, size: [f64; 2], height: f64, policy: PositionPolicy) -> Self {
        FurnitureSpec {
            class: class.into(),
            size,
            height,
            policy,
        }
    }

    /// Typical dimensions and placement policy for the built-in classes.
    pub fn default_for(class: &str) -> Option<FurnitureSpec> {
        use PositionPolicy::*;
        let (size, height, policy) = match class {
            "table" => ([1.2, 0.8], 0.75, Random),
            "desk" => ([1.4, 0.7], 0.75, AgainstWall),
            "bed" => ([1.6, 2.0], 0.5, AgainstWall),
            "sofa" => ([2.0, 0.9], 0.8, AgainstWall),
            "chair" => ([0.5, 0.5], 0.9, Random),
            "tv" => ([1.0, 0.1], 0.6, OnWall { elevation: 1.1 }),
            "shelf" => ([1.0, 0.3], 0.04, OnWall { elevation: 1.0 }),
            _ => return None,
        };
        Some(FurnitureSpec::new(class, size, height, policy))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OpeningKind {
    Door,
    Window,
}

impl OpeningKind {
    pub fn label(self) -> &'static str {
        match self {
            OpeningKind::Door => "door",
            OpeningKind::Window => "window",
        }
    }

    /// (width, sill, height)
    fn default_dims(self) -> (f64, f64, f64) {
        match self {
            OpeningKind::Door => (0.9, 0.0, 2.0),
            OpeningKind::Window => (1.0, 0.9, 1.2),
        }
    }
}

/// A rectangular hole in one wall. Walls are numbered counter-clockwise from the
/// `y = 0` wall; `offset` is the hole center measured along the wall.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OpeningSpec {
    pub kind: OpeningKind,
    pub wall: u8,
    pub offset: f64,
    #[serde(default)]
    pub width: Option<f64>,
    #[serde(default)]
    pub sill: Option<f64>,
    #[serde(default)]
    pub height: Option<f64>,
}

impl OpeningSpec {
    pub fn new(kind: OpeningKind, wall: u8, offset: f64) -> Self {
        OpeningSpec {
            kind,
            wall,
            offset,
            width: None,
            sill: None,
            height: None,
        }
    }

    fn dims(&self) -> (f64, f64, f64) {
        let (w, s, h) = self.kind.default_dims();
        (self.width.unwrap_or(w), self.sill.unwrap_or(s), self.height.unwrap_or(h))
    }
}

fn default_wall_height() -> f64 {
    2.5
}

fn default_density() -> f64 {
    100.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthSceneSpec {
    #[serde(default)]
    pub scene_id: Option<String>,
    /// Room interior is `[0, width] × [0, depth]`.
    pub width: f64,
    pub depth: f64,
    #[serde(default = "default_wall_height")]
    pub wall_height: f64,
    #[serde(default)]
    pub furniture: Vec<FurnitureSpec>,
    #[serde(default)]
    pub openings: Vec<OpeningSpec>,
    pub seed: u64,
    #[serde(default = "default_density")]
    pub point_density: f64,
    /// Drop items that cannot be placed instead of failing.
    #[serde(default)]
    pub skip_unplaceable: bool,
}

impl SynthSceneSpec {
    pub fn empty(width: f64, depth: f64, seed: u64) -> Self {
        SynthSceneSpec {
            scene_id: None,
            width,
            depth,
            wall_height: default_wall_height(),
            furniture: Vec::new(),
            openings: Vec::new(),
            seed,
            point_density: default_density(),
            skip_unplaceable: false,
        }
    }

    /// A random furnished room no larger than `max_extent` on a side with at most
    /// `max_items` furniture pieces, one door and up to two windows.
    pub fn random(seed: u64, max_extent: f64, max_items: usize) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed_0f_5ce4e);
        let lo = 3.0f64.min(max_extent);
        let width = rng.gen_range(lo..=max_extent);
        let depth = rng.gen_range(lo..=max_extent);
        let mut spec = SynthSceneSpec::empty(width, depth, seed);
        spec.skip_unplaceable = true;
        let door_wall = rng.gen_range(0..4u8);
        let len = |w: u8| if w % 2 == 0 { width } else { depth };
        spec.openings.push(OpeningSpec::new(OpeningKind::Door, door_wall, rng.gen_range(0.6..len(door_wall) - 0.6)));
        for _ in 0..rng.gen_range(0..=2) {
            let wall = (door_wall + rng.gen_range(1..4u8)) % 4;
            let offset = rng.gen_range(0.7..len(wall) - 0.7);
            let taken = spec.openings.iter().any(|o| o.wall == wall && (o.offset - offset).abs() < 1.1);
            if !taken {
                spec.openings.push(OpeningSpec::new(OpeningKind::Window, wall, offset));
            }
        }
        const CLASSES: [&str; 7] = ["table", "desk", "bed", "sofa", "chair", "tv", "shelf"];
        let n = rng.gen_range(0..=max_items);
        for _ in 0..n {
            let class = CLASSES[rng.gen_range(0..CLASSES.len())];
            let mut f = FurnitureSpec::default_for(class).unwrap();
            let s = rng.gen_range(0.8..1.2);
            f.size = [f.size[0] * s, f.size[1] * s];
            if class != "shelf" && class != "tv" {
                f.height *= rng.gen_range(0.85..1.15);
            }
            spec.furniture.push(f);
        }
        spec
    }

    fn validate(&self) -> Result<()> {
        let pos = |v: f64| v > 0.0 && v.is_finite();
        if !(pos(self.width) && pos(self.depth) && pos(self.wall_height) && pos(self.point_density)) {
            return Err(Error::validation("room sizes and point density must be positive"));
        }
        for f in &self.furniture {
            if f.class.is_empty() || !(pos(f.size[0]) && pos(f.size[1]) && pos(f.height)) {
                return Err(Error::validation(format!("furniture `{}` needs a class and positive sizes", f.class)));
            }
        }
        for o in &self.openings {
            let (w, s, h) = o.dims();
            if o.wall > 3 {
                return Err(Error::validation(format!("wall index {} out of range 0..4", o.wall)));
            }
            let len = self.wall_length(o.wall);
            if !(pos(w) && pos(h)) || s < 0.0 || o.offset - w / 2.0 < 0.0 || o.offset + w / 2.0 > len || s + h > self.wall_height {
                return Err(Error::validation(format!("{} opening does not fit in wall {}", o.kind.label(), o.wall)));
            }
        }
        for w in 0..4u8 {
            let mut spans: Vec<(f64, f64)> = self.openings_on(w).map(|(u0, u1, _, _)| (u0, u1)).collect();
            spans.sort_by(|a, b| a.0.total_cmp(&b.0));
            if spans.windows(2).any(|p| p[1].0 < p[0].1) {
                return Err(Error::validation(format!("openings overlap on wall {w}")));
            }
        }
        Ok(())
    }

    fn wall_length(&self, wall: u8) -> f64 {
        if wall % 2 == 0 {
            self.width
        } else {
            self.depth
        }
    }

    /// Start point and unit direction of a wall, running counter-clockwise.
    fn wall_frame(&self, wall: u8) -> (Vec3, Vec3) {
        let (w, d) = (self.width, self.depth);
        match wall {
            0 => (Vec3::ZERO, Vec3::X),
            1 => (Vec3::new(w, 0.0, 0.0), Vec3::Y),
            2 => (Vec3::new(w, d, 0.0), -Vec3::X),
            _ => (Vec3::new(0.0, d, 0.0), -Vec3::Y),
        }
    }

    /// (u0, u1, v0, v1) rectangles of the openings on `wall`.
    fn openings_on(&self, wall: u8) -> impl Iterator<Item = (f64, f64, f64, f64)> + '_ {
        self.openings.iter().filter(move |o| o.wall == wall).map(|o| {
            let (w, s, h) = o.dims();
            (o.offset - w / 2.0, o.offset + w / 2.0, s, s + h)
        })
    }
}

fn color_of(class: &str) -> [f32; 3] {
    quantize_color(match class {
        "table" => [0.55, 0.35, 0.2],
        "desk" => [0.45, 0.3, 0.2],
        "bed" => [0.8, 0.8, 0.9],
        "sofa" => [0.3, 0.4, 0.6],
        "chair" => [0.6, 0.45, 0.3],
        "tv" => [0.1, 0.1, 0.1],
        "shelf" => [0.7, 0.6, 0.4],
        "floor" => [0.6, 0.55, 0.5],
        "wall" => [0.9, 0.9, 0.85],
        _ => [0.5, 0.5, 0.5],
    })
}

/// Mesh pieces for one furniture item; tables and desks get a top and four legs.
fn furniture_mesh(class: &str, obb: &Obb) -> Vec<TriangleMesh> {
    let color = Some(color_of(class));
    let h = obb.half_extents;
    let legged = matches!(class, "table" | "desk") && h.x > LEG_SIZE * 2.0 && h.y > LEG_SIZE * 2.0 && h.z * 2.0 > TOP_THICKNESS * 2.0;
    if !legged {
        return vec![TriangleMesh::cuboid(obb.center, h, obb.yaw, color)];
    }
    let top_c = obb.center + Vec3::new(0.0, 0.0, h.z - TOP_THICKNESS / 2.0);
    let mut parts = vec![TriangleMesh::cuboid(top_c, Vec3::new(h.x, h.y, TOP_THICKNESS / 2.0), obb.yaw, color)];
    let leg_h = h.z - TOP_THICKNESS / 2.0;
    for (sx, sy) in [(-1.0, -1.0), (1.0, -1.0), (-1.0, 1.0), (1.0, 1.0)] {
        let local = Vec3::new(sx * (h.x - LEG_SIZE / 2.0), sy * (h.y - LEG_SIZE / 2.0), -TOP_THICKNESS / 2.0);
        let c = obb.center + local.rotate_z(obb.yaw);
        parts.push(TriangleMesh::cuboid(c, Vec3::new(LEG_SIZE / 2.0, LEG_SIZE / 2.0, leg_h), obb.yaw, color));
    }
    parts
}

struct MeshBuilder {
    vertices: Vec<Vec3>,
    triangles: Vec<[u32; 3]>,
    colors: Vec<[f32; 3]>,
}

impl MeshBuilder {
    /// Quad with corners `p00, p10, p11, p01`; normal = (p10 − p00) × (p01 − p00).
    fn quad(&mut self, p00: Vec3, p10: Vec3, p11: Vec3, p01: Vec3, color: [f32; 3]) {
        let b = self.vertices.len() as u32;
        self.vertices.extend([p00, p10, p11, p01]);
        self.colors.extend([color; 4]);
        self.triangles.push([b, b + 1, b + 2]);
        self.triangles.push([b, b + 2, b + 3]);
    }
}

/// Splits a wall rectangle `[0, len] × [0, h]` around the given holes.
fn wall_rects(len: f64, h: f64, mut holes: Vec<(f64, f64, f64, f64)>) -> Vec<(f64, f64, f64, f64)> {
    holes.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut out = Vec::new();
    let mut u = 0.0;
    for (u0, u1, v0, v1) in holes {
        if u0 > u {
            out.push((u, u0, 0.0, h));
        }
        if v0 > 0.0 {
            out.push((u0, u1, 0.0, v0));
        }
        if v1 < h {
            out.push((u0, u1, v1, h));
        }
        u = u1;
    }
    if u < len {
        out.push((u, len, 0.0, h));
    }
    out
}

fn inside_room(obb: &Obb, spec: &SynthSceneSpec) -> bool {
    obb.top() <= spec.wall_height
        && obb
            .corners()
            .iter()
            .all(|c| c.x >= -1e-9 && c.y >= -1e-9 && c.x <= spec.width + 1e-9 && c.y <= spec.depth + 1e-9)
}

/// Proposes a box for `f`; `None` when the policy cannot fit the item at all.
fn propose(f: &FurnitureSpec, spec: &SynthSceneSpec, rng: &mut ChaCha8Rng) -> Option<Obb> {
    let half = Vec3::new(f.size[0] / 2.0, f.size[1] / 2.0, f.height / 2.0);
    let against_wall = |rng: &mut ChaCha8Rng, bottom: f64| {
        let wall = rng.gen_range(0..4u8);
        let len = spec.wall_length(wall);
        if f.size[0] > len {
            return None;
        }
        let (start, dir) = spec.wall_frame(wall);
        let inward = Vec3::Z.cross(dir);
        let u = rng.gen_range(half.x..=len - half.x);
        let c = start + dir * u + inward * (WALL_GAP + half.y) + Vec3::new(0.0, 0.0, bottom + half.z);
        Obb::new(c, half, yaw_facing(inward)).ok()
    };
    match f.policy {
        PositionPolicy::Random => {
            let yaw = rng.gen_range(0.0..TAU);
            let r = Vec3::new(half.x, half.y, 0.0).rotate_z(yaw);
            let r2 = Vec3::new(half.x, -half.y, 0.0).rotate_z(yaw);
            let (ex, ey) = (r.x.abs().max(r2.x.abs()), r.y.abs().max(r2.y.abs()));
            if 2.0 * ex > spec.width || 2.0 * ey > spec.depth {
                return None;
            }
            let x = rng.gen_range(ex..=spec.width - ex);
            let y = rng.gen_range(ey..=spec.depth - ey);
            Obb::new(Vec3::new(x, y, half.z), half, yaw).ok()
        }
        PositionPolicy::AgainstWall => against_wall(rng, 0.0),
        PositionPolicy::OnWall { elevation } => against_wall(rng, elevation),
        PositionPolicy::Fixed { x, y, yaw } => Obb::new(Vec3::new(x, y, half.z), half, yaw).ok(),
    }
}

/// Builds the room mesh, anchors and point cloud. Deterministic in `spec`.
pub fn generate_synthetic_scene(spec: &SynthSceneSpec) -> Result<SceneModel> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut b = MeshBuilder {
        vertices: Vec::new(),
        triangles: Vec::new(),
        colors: Vec::new(),
    };
    let (w, d, h) = (spec.width, spec.depth, spec.wall_height);
    b.quad(Vec3::ZERO, Vec3::new(w, 0.0, 0.0), Vec3::new(w, d, 0.0), Vec3::new(0.0, d, 0.0), color_of("floor"));

    let mut opening_anchors = Vec::new();
    for wall in 0..4u8 {
        let (start, dir) = spec.wall_frame(wall);
        let at = |u: f64, v: f64| start + dir * u + Vec3::new(0.0, 0.0, v);
        let holes: Vec<_> = spec.openings_on(wall).collect();
        for (u0, u1, v0, v1) in wall_rects(spec.wall_length(wall), h, holes) {
            // (p00, p01, p11, p10) winding puts the normal on the room side
            b.quad(at(u0, v0), at(u0, v1), at(u1, v1), at(u1, v0), color_of("wall"));
        }
    }
    for o in &spec.openings {
        let (start, dir) = spec.wall_frame(o.wall);
        let (ow, sill, oh) = o.dims();
        let center = start + dir * o.offset + Vec3::new(0.0, 0.0, sill + oh / 2.0);
        let obb = Obb::new(center, Vec3::new(ow / 2.0, OPENING_DEPTH / 2.0, oh / 2.0), dir.y.atan2(dir.x))?;
        opening_anchors.push((o.kind.label().to_string(), obb));
    }

    let mut placed: Vec<(String, Obb)> = Vec::new();
    let mut parts = Vec::new();
    for f in &spec.furniture {
        let mut found = None;
        for _ in 0..MAX_ATTEMPTS {
            let Some(obb) = propose(f, spec, &mut rng) else { continue };
            let clear = |other: &Obb| obb_min_distance(&obb, other) >= ITEM_GAP;
            if inside_room(&obb, spec) && placed.iter().all(|(_, o)| clear(o)) && opening_anchors.iter().all(|(_, o)| clear(o)) {
                found = Some(obb);
                break;
            }
            if matches!(f.policy, PositionPolicy::Fixed { .. }) {
                break;
            }
        }
        match found {
            Some(obb) => {
                parts.extend(furniture_mesh(&f.class, &obb));
                placed.push((f.class.clone(), obb));
            }
            None if spec.skip_unplaceable => log::debug!("skipping unplaceable {}", f.class),
            None => return Err(Error::Generation(format!("could not place `{}` after {MAX_ATTEMPTS} attempts", f.class))),
        }
    }

    let room = TriangleMesh::new(b.vertices, b.triangles, Some(b.colors))?;
    parts.insert(0, room);
    let mesh = TriangleMesh::merge(&parts)?;
    let anchors = placed
        .into_iter()
        .chain(opening_anchors)
        .enumerate()
        .map(|(i, (class_label, obb))| Anchor {
            instance_id: i as u32 + 1,
            class_label,
            obb,
        })
        .collect();
    let points = sample_point_cloud(&mesh, spec.point_density, spec.seed.wrapping_mul(0x9e37_79b9_7f4a_7c15) ^ 0x7013)?;
    let scene_id = spec.scene_id.clone().unwrap_or_else(|| format!("synth_{}", spec.seed));
    SceneModel::new(scene_id, mesh, points, anchors)
}

/// Yaw of a box whose local front (+Y) points along `dir` in the xy-plane.
pub fn yaw_facing(dir: Vec3) -> f64 {
    (dir.y.atan2(dir.x) - FRAC_PI_2).rem_euclid(TAU)
}
