//! Geometry kernels checked against brute-force and Monte Carlo oracles.

use placekit_core::geometry::raycast::ray_triangle;
use placekit_core::geometry::{
    footprint_iom, interval_iom, meshes_intersect, obb_min_distance, raycast_all, Obb, Ray, TriangleMesh, Vec3,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_obb(rng: &mut ChaCha8Rng, spread: f64) -> Obb {
    Obb::new(
        Vec3::new(rng.gen_range(-spread..spread), rng.gen_range(-spread..spread), rng.gen_range(-spread..spread)),
        Vec3::new(rng.gen_range(0.1..0.6), rng.gen_range(0.1..0.6), rng.gen_range(0.1..0.6)),
        rng.gen_range(0.0..std::f64::consts::TAU),
    )
    .unwrap()
}

/// Uniform point on the box surface, in local coordinates.
fn surface_point_local(rng: &mut ChaCha8Rng, h: Vec3) -> Vec3 {
    let areas = [h.y * h.z, h.y * h.z, h.x * h.z, h.x * h.z, h.x * h.y, h.x * h.y];
    let total: f64 = areas.iter().sum();
    let mut pick = rng.gen_range(0.0..total);
    let mut face = 0;
    while pick > areas[face] && face < 5 {
        pick -= areas[face];
        face += 1;
    }
    let mut p = Vec3::new(rng.gen_range(-h.x..h.x), rng.gen_range(-h.y..h.y), rng.gen_range(-h.z..h.z));
    let s = if face % 2 == 0 { -1.0 } else { 1.0 };
    match face / 2 {
        0 => p.x = s * h.x,
        1 => p.y = s * h.y,
        _ => p.z = s * h.z,
    }
    p
}

/// Nearest surface point to a local point (clamp into the box, then push to the closest face).
fn project_to_surface(p: Vec3, h: Vec3) -> Vec3 {
    let mut q = Vec3::new(p.x.clamp(-h.x, h.x), p.y.clamp(-h.y, h.y), p.z.clamp(-h.z, h.z));
    let margins = [h.x - q.x.abs(), h.y - q.y.abs(), h.z - q.z.abs()];
    let axis = (0..3).min_by(|&a, &b| margins[a].total_cmp(&margins[b])).unwrap();
    match axis {
        0 => q.x = if q.x < 0.0 { -h.x } else { h.x },
        1 => q.y = if q.y < 0.0 { -h.y } else { h.y },
        _ => q.z = if q.z < 0.0 { -h.z } else { h.z },
    }
    q
}

fn to_world(b: &Obb, p: Vec3) -> Vec3 {
    p.rotate_z(b.yaw) + b.center
}

/// Minimum over sampled surface-point pairs: a coarse global round followed by shrinking
/// local rounds around the best pair, 10⁶ pairs per round.
fn monte_carlo_distance(a: &Obb, b: &Obb, rng: &mut ChaCha8Rng) -> f64 {
    const K: usize = 1000;
    let mut pa: Vec<Vec3> = (0..K).map(|_| surface_point_local(rng, a.half_extents)).collect();
    let mut pb: Vec<Vec3> = (0..K).map(|_| surface_point_local(rng, b.half_extents)).collect();
    let mut best = (f64::INFINITY, Vec3::ZERO, Vec3::ZERO);
    let mut radius = 0.2;
    for _round in 0..6 {
        let wa: Vec<Vec3> = pa.iter().map(|&p| to_world(a, p)).collect();
        let wb: Vec<Vec3> = pb.iter().map(|&p| to_world(b, p)).collect();
        for (i, x) in wa.iter().enumerate() {
            for (j, y) in wb.iter().enumerate() {
                let d = x.distance(*y);
                if d < best.0 {
                    best = (d, pa[i], pb[j]);
                }
            }
        }
        let (ca, cb) = (best.1, best.2);
        let jitter = |rng: &mut ChaCha8Rng, c: Vec3, h: Vec3, r: f64| {
            project_to_surface(c + Vec3::new(rng.gen_range(-r..r), rng.gen_range(-r..r), rng.gen_range(-r..r)), h)
        };
        pa = (0..K).map(|_| jitter(rng, ca, a.half_extents, radius)).collect();
        pb = (0..K).map(|_| jitter(rng, cb, b.half_extents, radius)).collect();
        pa[0] = ca;
        pb[0] = cb;
        radius *= 0.3;
    }
    best.0
}

#[test]
fn obb_distance_matches_surface_sampling() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut checked = 0;
    while checked < 12 {
        let a = random_obb(&mut rng, 1.5);
        let b = random_obb(&mut rng, 1.5);
        let exact = obb_min_distance(&a, &b);
        if exact == 0.0 {
            continue;
        }
        let mc = monte_carlo_distance(&a, &b, &mut rng);
        assert!(mc >= exact - 1e-9, "sampled pair closer than exact distance: {mc} < {exact}");
        assert!((mc - exact).abs() <= 2e-3, "exact {exact} vs sampled {mc}");
        checked += 1;
    }
}

#[test]
fn footprint_iom_matches_monte_carlo_area() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut checked = 0;
    while checked < 8 {
        let a = random_obb(&mut rng, 0.3);
        let b = random_obb(&mut rng, 0.3);
        let exact = footprint_iom(&a, &b);
        if exact == 0.0 {
            continue;
        }
        // rejection estimate of |A ∩ B| using samples drawn uniformly in A's footprint
        const N: usize = 1_000_000;
        let (u, v) = a.axes_xy();
        let (hx, hy) = (a.half_extents.x, a.half_extents.y);
        let mut inside = 0usize;
        for _ in 0..N {
            let (s, t) = (rng.gen_range(-hx..hx), rng.gen_range(-hy..hy));
            let p = Vec3::new(a.center.x + s * u[0] + t * v[0], a.center.y + s * u[1] + t * v[1], b.center.z);
            let l = b.to_local(p);
            if l.x.abs() <= b.half_extents.x && l.y.abs() <= b.half_extents.y {
                inside += 1;
            }
        }
        let inter = a.footprint_area() * inside as f64 / N as f64;
        let mc = inter / a.footprint_area().min(b.footprint_area());
        assert!((mc - exact).abs() <= 0.01, "exact {exact} vs monte carlo {mc}");
        checked += 1;
    }
}

#[test]
fn interval_iom_exhaustive_integer_cases() {
    // overlap counted cell by cell on the integer lattice, lengths by subtraction
    for a0 in 0..6i64 {
        for a1 in a0..7 {
            for b0 in 0..6i64 {
                for b1 in b0..7 {
                    let got = interval_iom([a0 as f64, a1 as f64], [b0 as f64, b1 as f64]);
                    let (la, lb) = (a1 - a0, b1 - b0);
                    let expected = if la == 0 && lb == 0 {
                        if a0 == b0 { 1.0 } else { 0.0 }
                    } else if la == 0 || lb == 0 {
                        let (p, lo, hi) = if la == 0 { (a0, b0, b1) } else { (b0, a0, a1) };
                        if lo <= p && p <= hi { 1.0 } else { 0.0 }
                    } else {
                        let shared = (0..7).filter(|&c| c >= a0 && c < a1 && c >= b0 && c < b1).count() as i64;
                        shared as f64 / la.min(lb) as f64
                    };
                    assert_eq!(got, expected, "[{a0},{a1}] vs [{b0},{b1}]");
                }
            }
        }
    }
}

fn three_cuboid_scene() -> TriangleMesh {
    TriangleMesh::merge(&[
        TriangleMesh::cuboid(Vec3::new(0.0, 0.0, -0.05), Vec3::new(3.0, 3.0, 0.05), 0.0, None),
        TriangleMesh::cuboid(Vec3::new(0.5, 0.4, 0.4), Vec3::new(0.6, 0.4, 0.4), 0.3, None),
        TriangleMesh::cuboid(Vec3::new(-1.0, -0.8, 0.9), Vec3::new(0.3, 0.5, 0.9), 1.1, None),
    ])
    .unwrap()
}

#[test]
fn raycast_all_matches_brute_force() {
    let mesh = three_cuboid_scene();
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let mut total_hits = 0;
    for _ in 0..10_000 {
        let origin = Vec3::new(rng.gen_range(-3.5..3.5), rng.gen_range(-3.5..3.5), rng.gen_range(-0.5..2.5));
        let dir = Vec3::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
        let Ok(ray) = Ray::new(origin, dir) else { continue };
        let got = raycast_all(&mesh, &ray);
        let mut expected: Vec<(f64, usize)> = (0..mesh.triangle_count())
            .filter_map(|i| ray_triangle(ray.origin, ray.direction(), &mesh.triangle(i)).filter(|&t| t >= 0.0).map(|t| (t, i)))
            .collect();
        expected.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        let got: Vec<(f64, usize)> = got.iter().map(|h| (h.t, h.triangle)).collect();
        assert_eq!(got, expected);
        total_hits += got.len();
    }
    assert!(total_hits > 1000, "oracle exercised too few hits: {total_hits}");
}

/// Segment-triangle crossing via barycentric ray test restricted to the segment.
fn segment_hits_triangle(p: Vec3, q: Vec3, tri: &[Vec3; 3]) -> bool {
    let d = q - p;
    let len = d.norm();
    match ray_triangle(p, d / len, tri) {
        Some(t) => (0.0..=len).contains(&t),
        None => false,
    }
}

fn edges_cross(a: &TriangleMesh, b: &TriangleMesh) -> bool {
    for i in 0..a.triangle_count() {
        let t = a.triangle(i);
        for (p, q) in [(t[0], t[1]), (t[1], t[2]), (t[2], t[0])] {
            for j in 0..b.triangle_count() {
                if segment_hits_triangle(p, q, &b.triangle(j)) {
                    return true;
                }
            }
        }
    }
    false
}

#[test]
fn meshes_intersect_matches_all_pairs_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut positives = 0;
    for _ in 0..100 {
        let a = random_obb(&mut rng, 0.6).to_mesh();
        let b = random_obb(&mut rng, 0.6).to_mesh();
        let expected = edges_cross(&a, &b) || edges_cross(&b, &a);
        assert_eq!(meshes_intersect(&a, &b), expected);
        positives += expected as usize;
    }
    assert!(positives > 10 && positives < 90, "degenerate sample: {positives} intersecting pairs");
}
