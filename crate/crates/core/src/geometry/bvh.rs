//! Bounding volume hierarchy over mesh triangles.

use super::mesh::TriangleMesh;
use super::vec3::{Aabb, Vec3};

const LEAF_SIZE: usize = 4;
/// Node boxes are padded so rays grazing a shared edge still reach both triangles.
const BOX_PAD: f64 = 1e-7;

#[derive(Debug, Clone)]
struct Node {
    bounds: Aabb,
    /// Leaf: `count > 0`, triangles `order[start..start + count]`.
    /// Inner: `count == 0`, children at `start` and `start + 1`.
    start: u32,
    count: u32,
}

#[derive(Debug, Clone)]
pub struct Bvh {
    nodes: Vec<Node>,
    order: Vec<u32>,
    tri_bounds: Vec<Aabb>,
}

impl Bvh {
    pub fn build(mesh: &TriangleMesh) -> Bvh {
        let n = mesh.triangle_count();
        let mut tri_bounds = Vec::with_capacity(n);
        let mut centroids = Vec::with_capacity(n);
        let mut order = Vec::new();
        for i in 0..n {
            let t = mesh.triangle(i);
            tri_bounds.push(Aabb::from_points(t).expanded(BOX_PAD));
            centroids.push((t[0] + t[1] + t[2]) / 3.0);
            if !mesh.is_degenerate(i) {
                order.push(i as u32);
            }
        }
        let mut bvh = Bvh {
            nodes: Vec::with_capacity(2 * order.len() / LEAF_SIZE + 1),
            order,
            tri_bounds,
        };
        bvh.nodes.push(Node {
            bounds: Aabb::EMPTY,
            start: 0,
            count: 0,
        });
        let len = bvh.order.len();
        bvh.split(0, 0, len, &centroids);
        bvh
    }

    fn split(&mut self, node: usize, start: usize, end: usize, centroids: &[Vec3]) {
        let mut bounds = Aabb::EMPTY;
        let mut cbounds = Aabb::EMPTY;
        for &t in &self.order[start..end] {
            bounds = bounds.union(self.tri_bounds[t as usize]);
            cbounds.grow(centroids[t as usize]);
        }
        self.nodes[node].bounds = bounds;
        let count = end - start;
        let extent = cbounds.size();
        if count <= LEAF_SIZE || extent.max_element() <= 0.0 {
            self.nodes[node].start = start as u32;
            self.nodes[node].count = count as u32;
            return;
        }
        let axis = if extent.x >= extent.y && extent.x >= extent.z {
            0
        } else if extent.y >= extent.z {
            1
        } else {
            2
        };
        let mid = start + count / 2;
        self.order[start..end].select_nth_unstable_by(count / 2, |&a, &b| {
            centroids[a as usize][axis]
                .total_cmp(&centroids[b as usize][axis])
                .then(a.cmp(&b))
        });
        let left = self.nodes.len();
        for _ in 0..2 {
            self.nodes.push(Node {
                bounds: Aabb::EMPTY,
                start: 0,
                count: 0,
            });
        }
        self.nodes[node].start = left as u32;
        self.nodes[node].count = 0;
        self.split(left, start, mid, centroids);
        self.split(left + 1, mid, end, centroids);
    }

    /// Visits every non-degenerate triangle whose padded box is pierced by the ray within `[t_min, t_max]`.
    pub fn for_each_ray_candidate(&self, origin: Vec3, dir: Vec3, t_min: f64, t_max: f64, mut f: impl FnMut(usize)) {
        if self.order.is_empty() {
            return;
        }
        let inv = Vec3::new(1.0 / dir.x, 1.0 / dir.y, 1.0 / dir.z);
        let mut stack = Vec::with_capacity(64);
        stack.push(0usize);
        while let Some(i) = stack.pop() {
            let node = &self.nodes[i];
            if node.bounds.ray_interval(origin, inv, t_min, t_max).is_none() {
                continue;
            }
            if node.count > 0 {
                let s = node.start as usize;
                for &t in &self.order[s..s + node.count as usize] {
                    f(t as usize);
                }
            } else {
                stack.push(node.start as usize);
                stack.push(node.start as usize + 1);
            }
        }
    }

    /// Closest-hit traversal; `hit(tri, t_max)` returns the hit distance if any.
    pub fn closest(&self, origin: Vec3, dir: Vec3, t_min: f64, mut t_max: f64, mut hit: impl FnMut(usize) -> Option<f64>) -> Option<(f64, usize)> {
        if self.order.is_empty() {
            return None;
        }
        let inv = Vec3::new(1.0 / dir.x, 1.0 / dir.y, 1.0 / dir.z);
        let mut best: Option<(f64, usize)> = None;
        let mut stack: Vec<(usize, f64)> = Vec::with_capacity(64);
        if let Some((lo, _)) = self.nodes[0].bounds.ray_interval(origin, inv, t_min, t_max) {
            stack.push((0, lo));
        }
        while let Some((i, entry)) = stack.pop() {
            if entry > t_max {
                continue;
            }
            let node = &self.nodes[i];
            if node.count > 0 {
                let s = node.start as usize;
                for &t in &self.order[s..s + node.count as usize] {
                    let t = t as usize;
                    if let Some(d) = hit(t) {
                        if d >= t_min && d <= t_max {
                            let better = match best {
                                None => true,
                                Some((bd, bt)) => d < bd || (d == bd && t < bt),
                            };
                            if better {
                                best = Some((d, t));
                                t_max = d;
                            }
                        }
                    }
                }
            } else {
                let a = node.start as usize;
                let b = a + 1;
                let ia = self.nodes[a].bounds.ray_interval(origin, inv, t_min, t_max);
                let ib = self.nodes[b].bounds.ray_interval(origin, inv, t_min, t_max);
                match (ia, ib) {
                    (Some((la, _)), Some((lb, _))) => {
                        // push farther first so the nearer child is popped first
                        if la <= lb {
                            stack.push((b, lb));
                            stack.push((a, la));
                        } else {
                            stack.push((a, la));
                            stack.push((b, lb));
                        }
                    }
                    (Some((la, _)), None) => stack.push((a, la)),
                    (None, Some((lb, _))) => stack.push((b, lb)),
                    (None, None) => {}
                }
            }
        }
        best
    }

    /// Visits every non-degenerate triangle whose padded box overlaps `query`.
    pub fn for_each_overlap(&self, query: &Aabb, mut f: impl FnMut(usize) -> bool) -> bool {
        if self.order.is_empty() {
            return false;
        }
        let mut stack = vec![0usize];
        while let Some(i) = stack.pop() {
            let node = &self.nodes[i];
            if !node.bounds.overlaps(query) {
                continue;
            }
            if node.count > 0 {
                let s = node.start as usize;
                for &t in &self.order[s..s + node.count as usize] {
                    if self.tri_bounds[t as usize].overlaps(query) && f(t as usize) {
                        return true;
                    }
                }
            } else {
                stack.push(node.start as usize);
                stack.push(node.start as usize + 1);
            }
        }
        false
    }
}
