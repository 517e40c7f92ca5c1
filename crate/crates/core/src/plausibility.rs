//! Layered heightmaps, per-rotation asset footprints and the dense physical-validity grid.
//!
//! Placement lattice: grid entry `(i, j)` stands for an asset centered (in xy) on the
//! upper-right corner of heightmap cell `(i, j)`, i.e. at `origin + ((i + 1)·s, (j + 1)·s)`.
//! Putting the asset center on a cell corner lets footprints with an even cell count
//! line up with the heightmap cells exactly.

use std::f64::consts::FRAC_PI_4;
use std::fmt::Write as _;

use rayon::prelude::*;

use crate::constraints::ThresholdConfig;
use crate::error::{Error, Result};
use crate::geometry::{raycast_all, Ray, TriangleMesh, Vec3};
use crate::scene::Asset;

/// Height stored for cells no ray hit.
pub const NO_HIT: f64 = f64::NEG_INFINITY;
/// Hits within this height of each other describe the same surface point.
const SAME_HEIGHT: f64 = 1e-6;
pub const BINS: usize = 8;

/// Yaw (radians) at the center of rotation bin `b`.
pub fn bin_yaw(b: usize) -> f64 {
    b as f64 * FRAC_PI_4
}

/// Surfaces met by a vertical line, bottom to top, as `(height, up_facing)`.
///
/// Vertical triangles are ignored. Hits at the same height collapse to one entry; if
/// both an up- and a down-facing surface meet there (two solids touching, or a box
/// standing on a floor sheet) they cancel and leave no entry.
pub fn merge_column(mut hits: Vec<(f64, bool)>) -> Vec<(f64, bool)> {
    hits.sort_by(|a, b| a.0.total_cmp(&b.0).then(b.1.cmp(&a.1)));
    let mut out = Vec::new();
    let mut k = 0;
    while k < hits.len() {
        let start = hits[k].0;
        let (mut up, mut down) = (false, false);
        while k < hits.len() && hits[k].0 - start <= SAME_HEIGHT {
            if hits[k].1 {
                up = true;
            } else {
                down = true;
            }
            k += 1;
        }
        if up != down {
            out.push((start, up));
        }
    }
    out
}

/// Height of a non-vertical triangle's plane at `(x, y)`; exact for horizontal triangles.
fn plane_height(tri: &[Vec3; 3], n: Vec3, x: f64, y: f64) -> f64 {
    let a = tri[0];
    a.z - (n.x * (x - a.x) + n.y * (y - a.y)) / n.z
}

#[derive(Debug, Clone, PartialEq)]
pub struct HeightmapStack {
    pub origin: [f64; 2],
    pub cell_size: f64,
    /// (W, H): cells along x, cells along y.
    pub dims: (usize, usize),
    pub layers: usize,
    counts: Vec<u8>,
    /// Layer-major: `heights[l * W * H + cell]`.
    heights: Vec<f64>,
    up: Vec<bool>,
}

impl HeightmapStack {
    pub fn cell_count(&self) -> usize {
        self.dims.0 * self.dims.1
    }

    pub fn index(&self, i: usize, j: usize) -> usize {
        j * self.dims.0 + i
    }

    pub fn cell_center(&self, i: usize, j: usize) -> [f64; 2] {
        [
            self.origin[0] + (i as f64 + 0.5) * self.cell_size,
            self.origin[1] + (j as f64 + 0.5) * self.cell_size,
        ]
    }

    /// Number of distinct surfaces in the cell's column (before capping at `layers`).
    pub fn count(&self, cell: usize) -> usize {
        self.counts[cell] as usize
    }

    /// Layer height; layers past the cell's count repeat its highest surface.
    pub fn height(&self, l: usize, cell: usize) -> f64 {
        self.heights[l * self.cell_count() + cell]
    }

    pub fn is_up(&self, l: usize, cell: usize) -> bool {
        self.up[l * self.cell_count() + cell]
    }

    /// Height of the next surface above layer `l`, or +∞.
    pub fn next_height(&self, l: usize, cell: usize) -> f64 {
        if l + 1 < self.count(cell) {
            self.height(l + 1, cell)
        } else {
            f64::INFINITY
        }
    }

    /// The distinct layer entries of a cell, bottom to top.
    pub fn column(&self, cell: usize) -> Vec<(f64, bool)> {
        (0..self.count(cell)).map(|l| (self.height(l, cell), self.is_up(l, cell))).collect()
    }

    /// Binary PGM of one layer, heights scaled linearly to 1..=255 (0 = no hit); row 0 is max y.
    pub fn layer_pgm(&self, l: usize) -> Vec<u8> {
        let (w, h) = self.dims;
        let vals: Vec<f64> = (0..self.cell_count()).map(|c| self.height(l.min(self.layers.saturating_sub(1)), c)).collect();
        let finite = vals.iter().copied().filter(|v| v.is_finite());
        let lo = finite.clone().fold(f64::INFINITY, f64::min);
        let hi = finite.fold(f64::NEG_INFINITY, f64::max);
        let mut out = format!("P5\n{w} {h}\n255\n").into_bytes();
        for j in (0..h).rev() {
            for i in 0..w {
                let v = vals[self.index(i, j)];
                out.push(if !v.is_finite() {
                    0
                } else if hi > lo {
                    (1.0 + 254.0 * (v - lo) / (hi - lo)).round() as u8
                } else {
                    255
                });
            }
        }
        out
    }
}

/// Casts one downward ray per cell center over the mesh's xy bounding box.
pub fn build_heightmap_stack(mesh: &TriangleMesh, cell_size: f64, max_layers: usize) -> Result<HeightmapStack> {
    if !(cell_size > 0.0 && cell_size.is_finite()) || max_layers == 0 {
        return Err(Error::validation("cell size and layer cap must be positive"));
    }
    let bb = mesh.aabb();
    if bb.is_empty() || !bb.min.is_finite() || !bb.max.is_finite() {
        return Err(Error::validation("mesh has no finite bounding box"));
    }
    let size = bb.size();
    let w = ((size.x / cell_size - 1e-9).ceil() as usize).max(1);
    let h = ((size.y / cell_size - 1e-9).ceil() as usize).max(1);
    let origin = [bb.min.x, bb.min.y];
    let top = bb.max.z + 1.0;
    let columns: Vec<Vec<(f64, bool)>> = (0..w * h)
        .into_par_iter()
        .map(|cell| {
            let (i, j) = (cell % w, cell / w);
            let x = origin[0] + (i as f64 + 0.5) * cell_size;
            let y = origin[1] + (j as f64 + 0.5) * cell_size;
            let hits = raycast_all(mesh, &Ray::down(Vec3::new(x, y, top)));
            let raw = hits
                .iter()
                .filter_map(|hit| {
                    let n = mesh.triangle_normal(hit.triangle);
                    (n.z != 0.0).then(|| (plane_height(&mesh.triangle(hit.triangle), n, x, y), n.z > 0.0))
                })
                .collect();
            merge_column(raw)
        })
        .collect();
    let deepest = columns.iter().map(Vec::len).max().unwrap_or(0);
    if deepest > max_layers {
        log::warn!("heightmap columns hold up to {deepest} surfaces; keeping the lowest {max_layers}");
    }
    let layers = deepest.min(max_layers);
    let n = w * h;
    let mut heights = vec![NO_HIT; layers * n];
    let mut up = vec![false; layers * n];
    let mut counts = vec![0u8; n];
    for (cell, col) in columns.iter().enumerate() {
        let col = &col[..col.len().min(layers)];
        counts[cell] = col.len() as u8;
        for l in 0..layers {
            if let Some(&(z, u)) = col.get(l).or(col.last()) {
                heights[l * n + cell] = z;
                up[l * n + cell] = u;
            }
        }
    }
    Ok(HeightmapStack {
        origin,
        cell_size,
        dims: (w, h),
        layers,
        counts,
        heights,
        up,
    })
}

/// Footprint of the asset at one rotation bin: occupied cell offsets relative to the
/// placement corner, each with the asset's top height above its bottom in that column.
#[derive(Debug, Clone, PartialEq)]
pub struct BinFootprint {
    pub yaw: f64,
    /// `(di, dj, top)`: heightmap cell `(i + di, j + dj)` for placement `(i, j)`.
    pub cells: Vec<(i32, i32, f64)>,
    /// `(min di, max di, min dj, max dj)`.
    pub bbox: (i32, i32, i32, i32),
}

impl BinFootprint {
    pub fn size(&self) -> (usize, usize) {
        ((self.bbox.1 - self.bbox.0 + 1) as usize, (self.bbox.3 - self.bbox.2 + 1) as usize)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AssetFootprint {
    pub cell_size: f64,
    pub margin: f64,
    pub height: f64,
    pub bins: Vec<BinFootprint>,
}

/// Whether the triangle's xy projection overlaps the open square `[x0, x1] × [y0, y1]`.
fn tri_overlaps_square(t: &[[f64; 2]; 3], x0: f64, x1: f64, y0: f64, y1: f64) -> bool {
    const EPS: f64 = 1e-9;
    let sep = |amin: f64, amax: f64, bmin: f64, bmax: f64| amax <= bmin + EPS || bmax <= amin + EPS;
    let (txmin, txmax) = (t[0][0].min(t[1][0]).min(t[2][0]), t[0][0].max(t[1][0]).max(t[2][0]));
    let (tymin, tymax) = (t[0][1].min(t[1][1]).min(t[2][1]), t[0][1].max(t[1][1]).max(t[2][1]));
    if sep(txmin, txmax, x0, x1) || sep(tymin, tymax, y0, y1) {
        return false;
    }
    let corners = [[x0, y0], [x1, y0], [x1, y1], [x0, y1]];
    for k in 0..3 {
        let (a, b) = (t[k], t[(k + 1) % 3]);
        let n = [b[1] - a[1], a[0] - b[0]];
        let len = n[0].hypot(n[1]);
        if len < 1e-15 {
            continue;
        }
        let n = [n[0] / len, n[1] / len];
        let proj = |p: [f64; 2]| p[0] * n[0] + p[1] * n[1];
        let tp = t.map(proj);
        let (tmin, tmax) = (tp[0].min(tp[1]).min(tp[2]), tp[0].max(tp[1]).max(tp[2]));
        let sp = corners.map(proj);
        let (smin, smax) = (sp.iter().copied().fold(f64::INFINITY, f64::min), sp.iter().copied().fold(f64::NEG_INFINITY, f64::max));
        if sep(tmin, tmax, smin, smax) {
            return false;
        }
    }
    true
}

/// Rasterizes the asset for each of the 8 yaw bins. A cell is occupied when the asset's
/// top-down projection overlaps the cell square grown by `margin`.
pub fn compute_asset_footprints(asset: &Asset, cell_size: f64, margin: f64) -> Result<AssetFootprint> {
    if !(cell_size > 0.0) || !(margin >= 0.0) {
        return Err(Error::validation("footprint needs a positive cell size and a non-negative margin"));
    }
    let half_h = asset.extents.z / 2.0;
    let bins = (0..BINS)
        .map(|b| {
            let yaw = bin_yaw(b);
            let mesh = asset.mesh.transformed(yaw, Vec3::ZERO);
            let tris: Vec<([[f64; 2]; 3], f64)> = (0..mesh.triangle_count())
                .map(|k| {
                    let t = mesh.triangle(k);
                    (t.map(|v| v.xy()), t[0].z.max(t[1].z).max(t[2].z) + half_h)
                })
                .collect();
            let bb = mesh.aabb();
            let reach = |v: f64| (v / cell_size).ceil() as i32 + (margin / cell_size).ceil() as i32 + 1;
            let (lo_i, hi_i) = (-reach(-bb.min.x), reach(bb.max.x) + 1);
            let (lo_j, hi_j) = (-reach(-bb.min.y), reach(bb.max.y) + 1);
            let mut cells = Vec::new();
            for dj in lo_j..=hi_j {
                for di in lo_i..=hi_i {
                    // heightmap cell (i + di) is centered (di - 0.5) cells from the placement corner
                    let (cx, cy) = ((di as f64 - 0.5) * cell_size, (dj as f64 - 0.5) * cell_size);
                    let r = cell_size / 2.0 + margin;
                    let top = tris
                        .iter()
                        .filter(|(t, _)| tri_overlaps_square(t, cx - r, cx + r, cy - r, cy + r))
                        .map(|(_, z)| *z)
                        .fold(f64::NEG_INFINITY, f64::max);
                    if top > f64::NEG_INFINITY {
                        cells.push((di, dj, top));
                    }
                }
            }
            let bbox = cells.iter().fold((i32::MAX, i32::MIN, i32::MAX, i32::MIN), |b, &(i, j, _)| {
                (b.0.min(i), b.1.max(i), b.2.min(j), b.3.max(j))
            });
            BinFootprint { yaw, cells, bbox }
        })
        .collect();
    Ok(AssetFootprint {
        cell_size,
        margin,
        height: asset.extents.z,
        bins,
    })
}

/// Valid bits per (layer, placement cell): bit `b` set when the asset fits at rotation bin `b`.
#[derive(Debug, Clone, PartialEq)]
pub struct PhysicalGrid {
    pub dims: (usize, usize),
    pub layers: usize,
    pub origin: [f64; 2],
    pub cell_size: f64,
    bits: Vec<u8>,
}

impl PhysicalGrid {
    pub fn bits(&self, l: usize, cell: usize) -> u8 {
        self.bits[l * self.dims.0 * self.dims.1 + cell]
    }

    pub fn is_valid(&self, l: usize, cell: usize, bin: usize) -> bool {
        self.bits(l, cell) >> bin & 1 == 1
    }

    /// xy position of the asset center for placement cell `(i, j)`.
    pub fn placement_xy(&self, i: usize, j: usize) -> [f64; 2] {
        [
            self.origin[0] + (i + 1) as f64 * self.cell_size,
            self.origin[1] + (j + 1) as f64 * self.cell_size,
        ]
    }

    pub fn valid_count(&self) -> usize {
        self.bits.iter().map(|b| b.count_ones() as usize).sum()
    }

    /// CSV of one (layer, bin) slice: `i,j,valid` per cell.
    pub fn slice_csv(&self, l: usize, bin: usize) -> String {
        let mut s = String::from("i,j,valid\n");
        for j in 0..self.dims.1 {
            for i in 0..self.dims.0 {
                let _ = writeln!(s, "{i},{j},{}", self.is_valid(l, j * self.dims.0 + i, bin) as u8);
            }
        }
        s
    }
}

/// Support height for placement cell `(i, j)` on layer `l` at one bin, or `None` if the
/// asset does not fit there.
///
/// Every footprint cell must exist, be up-facing on layer `l` (its top surface if it has
/// fewer layers), and lie within the height-range tolerance; the asset then rests on the
/// highest of them and must clear the next layer in every column.
pub fn fit_at(stack: &HeightmapStack, fp: &BinFootprint, i: usize, j: usize, l: usize, cfg: &ThresholdConfig) -> Option<f64> {
    let (w, h) = (stack.dims.0 as i64, stack.dims.1 as i64);
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    let cell_of = |di: i32, dj: i32| {
        let (ci, cj) = (i as i64 + di as i64, j as i64 + dj as i64);
        (ci >= 0 && cj >= 0 && ci < w && cj < h).then(|| (cj * w + ci) as usize)
    };
    for &(di, dj, _) in &fp.cells {
        let cell = cell_of(di, dj)?;
        let count = stack.count(cell);
        if count == 0 {
            return None;
        }
        let ll = l.min(count - 1);
        if !stack.is_up(ll, cell) {
            return None;
        }
        let z = stack.height(ll, cell);
        lo = lo.min(z);
        hi = hi.max(z);
        if hi - lo > cfg.heightmap_range_tol {
            return None;
        }
    }
    if fp.cells.is_empty() {
        return None;
    }
    for &(di, dj, top) in &fp.cells {
        let cell = cell_of(di, dj)?;
        if hi + top >= stack.next_height(l, cell) + cfg.penetration_tol {
            return None;
        }
    }
    Some(hi)
}

pub fn compute_physical_grid(stack: &HeightmapStack, fp: &AssetFootprint, cfg: &ThresholdConfig) -> Result<PhysicalGrid> {
    if (stack.cell_size - fp.cell_size).abs() > 1e-12 {
        return Err(Error::validation("heightmap and footprint cell sizes differ"));
    }
    let (w, h) = stack.dims;
    let n = w * h;
    let largest = fp.bins.iter().map(|b| b.size()).fold((0, 0), |a, s| (a.0.max(s.0), a.1.max(s.1)));
    if largest.0 > w || largest.1 > h {
        log::warn!("asset footprint {largest:?} exceeds the {w}×{h} grid; every placement is invalid");
    }
    let mut bits = vec![0u8; stack.layers * n];
    bits.par_chunks_mut(n).enumerate().for_each(|(l, slice)| {
        for (cell, out) in slice.iter_mut().enumerate() {
            if l >= stack.count(cell) || !stack.is_up(l, cell) {
                continue;
            }
            let (i, j) = (cell % w, cell / w);
            for (b, bin) in fp.bins.iter().enumerate() {
                if fit_at(stack, bin, i, j, l, cfg).is_some() {
                    *out |= 1 << b;
                }
            }
        }
    });
    Ok(PhysicalGrid {
        dims: stack.dims,
        layers: stack.layers,
        origin: stack.origin,
        cell_size: stack.cell_size,
        bits,
    })
}

/// Placement cell and layer a surface point maps to: the nearest lattice corner, and the
/// layer whose height is closest to the point within two cells (lowest layer on ties).
pub fn point_to_cell(stack: &HeightmapStack, p: Vec3) -> Option<(usize, usize)> {
    let s = stack.cell_size;
    let i = ((p.x - stack.origin[0]) / s).round() as i64 - 1;
    let j = ((p.y - stack.origin[1]) / s).round() as i64 - 1;
    if i < 0 || j < 0 || i >= stack.dims.0 as i64 || j >= stack.dims.1 as i64 {
        return None;
    }
    let cell = stack.index(i as usize, j as usize);
    let mut best: Option<(usize, f64)> = None;
    for l in 0..stack.count(cell) {
        let d = (stack.height(l, cell) - p.z).abs();
        if d <= 2.0 * s && best.is_none_or(|(_, bd)| d < bd) {
            best = Some((l, d));
        }
    }
    best.map(|(l, _)| (cell, l))
}

/// Rotation bits for every point (0 = invalid).
pub fn grid_to_point_mask(grid: &PhysicalGrid, stack: &HeightmapStack, points: &[Vec3]) -> Vec<u8> {
    points
        .iter()
        .map(|&p| point_to_cell(stack, p).map_or(0, |(cell, l)| grid.bits(l, cell)))
        .collect()
}
