//! Convex polygons in the xy-plane: clipping, hulls, areas and distances.

pub type Point2 = [f64; 2];

fn sub(a: Point2, b: Point2) -> Point2 {
    [a[0] - b[0], a[1] - b[1]]
}

fn cross(a: Point2, b: Point2) -> f64 {
    a[0] * b[1] - a[1] * b[0]
}

fn dot(a: Point2, b: Point2) -> f64 {
    a[0] * b[0] + a[1] * b[1]
}

/// Convex polygon with counter-clockwise vertex order.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvexPolygon {
    pts: Vec<Point2>,
}

impl ConvexPolygon {
    /// Builds a polygon from points that are already convex; clockwise input is reversed.
    pub fn new(mut pts: Vec<Point2>) -> Self {
        if signed_area(&pts) < 0.0 {
            pts.reverse();
        }
        ConvexPolygon { pts }
    }

    /// Convex hull (Andrew's monotone chain). Collinear points are dropped.
    pub fn hull(points: &[Point2]) -> Self {
        let mut p: Vec<Point2> = points.to_vec();
        p.sort_by(|a, b| a[0].total_cmp(&b[0]).then(a[1].total_cmp(&b[1])));
        p.dedup();
        if p.len() < 3 {
            return ConvexPolygon { pts: p };
        }
        let mut lower: Vec<Point2> = Vec::with_capacity(p.len());
        for &q in &p {
            while lower.len() >= 2 && cross(sub(lower[lower.len() - 1], lower[lower.len() - 2]), sub(q, lower[lower.len() - 2])) <= 0.0 {
                lower.pop();
            }
            lower.push(q);
        }
        let mut upper: Vec<Point2> = Vec::with_capacity(p.len());
        for &q in p.iter().rev() {
            while upper.len() >= 2 && cross(sub(upper[upper.len() - 1], upper[upper.len() - 2]), sub(q, upper[upper.len() - 2])) <= 0.0 {
                upper.pop();
            }
            upper.push(q);
        }
        lower.pop();
        upper.pop();
        lower.extend(upper);
        ConvexPolygon { pts: lower }
    }

    pub fn points(&self) -> &[Point2] {
        &self.pts
    }

    pub fn is_empty(&self) -> bool {
        self.pts.len() < 3
    }

    pub fn area(&self) -> f64 {
        signed_area(&self.pts).abs()
    }

    /// Intersection with another convex polygon (Sutherland-Hodgman).
    pub fn clip(&self, clipper: &ConvexPolygon) -> ConvexPolygon {
        if self.is_empty() || clipper.is_empty() {
            return ConvexPolygon { pts: Vec::new() };
        }
        let mut output = self.pts.clone();
        let n = clipper.pts.len();
        for i in 0..n {
            if output.is_empty() {
                break;
            }
            let a = clipper.pts[i];
            let b = clipper.pts[(i + 1) % n];
            let edge = sub(b, a);
            let input = std::mem::take(&mut output);
            let side = |p: Point2| cross(edge, sub(p, a));
            for j in 0..input.len() {
                let cur = input[j];
                let prev = input[(j + input.len() - 1) % input.len()];
                let (sc, sp) = (side(cur), side(prev));
                if sc >= 0.0 {
                    if sp < 0.0 {
                        output.push(lerp_at_zero(prev, cur, sp, sc));
                    }
                    output.push(cur);
                } else if sp >= 0.0 {
                    output.push(lerp_at_zero(prev, cur, sp, sc));
                }
            }
        }
        ConvexPolygon { pts: output }
    }

    /// Projection interval onto `axis` (not necessarily unit).
    pub fn project(&self, axis: Point2) -> (f64, f64) {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for &p in &self.pts {
            let d = dot(p, axis);
            lo = lo.min(d);
            hi = hi.max(d);
        }
        (lo, hi)
    }

    /// Closed-set overlap test by separating axes.
    pub fn intersects(&self, other: &ConvexPolygon) -> bool {
        for poly in [self, other] {
            let n = poly.pts.len();
            for i in 0..n {
                let e = sub(poly.pts[(i + 1) % n], poly.pts[i]);
                let axis = [-e[1], e[0]];
                let len = (axis[0] * axis[0] + axis[1] * axis[1]).sqrt();
                if len == 0.0 {
                    continue;
                }
                let axis = [axis[0] / len, axis[1] / len];
                let (a0, a1) = self.project(axis);
                let (b0, b1) = other.project(axis);
                if a1 < b0 || b1 < a0 {
                    return false;
                }
            }
        }
        true
    }

    /// Euclidean distance between the two closed regions; zero when they touch or overlap.
    pub fn distance(&self, other: &ConvexPolygon) -> f64 {
        if self.intersects(other) {
            return 0.0;
        }
        let mut best = f64::INFINITY;
        let (n, m) = (self.pts.len(), other.pts.len());
        for i in 0..n {
            let (a0, a1) = (self.pts[i], self.pts[(i + 1) % n]);
            for j in 0..m {
                let (b0, b1) = (other.pts[j], other.pts[(j + 1) % m]);
                best = best.min(segment_distance(a0, a1, b0, b1));
            }
        }
        best
    }

    pub fn contains(&self, p: Point2, tol: f64) -> bool {
        let n = self.pts.len();
        if n < 3 {
            return false;
        }
        (0..n).all(|i| {
            let a = self.pts[i];
            let e = sub(self.pts[(i + 1) % n], a);
            let len = (e[0] * e[0] + e[1] * e[1]).sqrt();
            cross(e, sub(p, a)) >= -tol * len
        })
    }

    /// Distance from a point to the closed polygon region (zero inside).
    pub fn point_distance(&self, p: Point2) -> f64 {
        if self.contains(p, 0.0) {
            return 0.0;
        }
        let n = self.pts.len();
        (0..n)
            .map(|i| point_segment_distance(p, self.pts[i], self.pts[(i + 1) % n]))
            .fold(f64::INFINITY, f64::min)
    }
}

fn lerp_at_zero(p: Point2, q: Point2, sp: f64, sq: f64) -> Point2 {
    let t = sp / (sp - sq);
    [p[0] + t * (q[0] - p[0]), p[1] + t * (q[1] - p[1])]
}

fn signed_area(pts: &[Point2]) -> f64 {
    let n = pts.len();
    if n < 3 {
        return 0.0;
    }
    let mut s = 0.0;
    for i in 0..n {
        s += cross(pts[i], pts[(i + 1) % n]);
    }
    0.5 * s
}

pub fn point_segment_distance(p: Point2, a: Point2, b: Point2) -> f64 {
    let ab = sub(b, a);
    let len2 = dot(ab, ab);
    let t = if len2 > 0.0 {
        (dot(sub(p, a), ab) / len2).clamp(0.0, 1.0)
    } else {
        0.0
    };
    let c = [a[0] + t * ab[0], a[1] + t * ab[1]];
    let d = sub(p, c);
    dot(d, d).sqrt()
}

fn segment_distance(a0: Point2, a1: Point2, b0: Point2, b1: Point2) -> f64 {
    // Non-intersecting segments attain their minimum at an endpoint.
    point_segment_distance(a0, b0, b1)
        .min(point_segment_distance(a1, b0, b1))
        .min(point_segment_distance(b0, a0, a1))
        .min(point_segment_distance(b1, a0, a1))
}
