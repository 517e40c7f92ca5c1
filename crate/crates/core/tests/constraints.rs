use placekit_core::constraints::{
    check_physical, evaluate_constraint, evaluate_prompt, facing_ok, support_gap, vertical_ok, Constraint, ThresholdConfig, Vertical,
    VisibilityMode,
};
use placekit_core::geometry::{footprint_iom, interval_iom, Obb, TriangleMesh, Vec3};
use placekit_core::scene::{sample_point_cloud, Anchor, Asset, Placement, SceneModel};
use proptest::prelude::*;

fn floor(w: f64) -> TriangleMesh {
    TriangleMesh::new(
        vec![Vec3::new(0.0, 0.0, 0.0), Vec3::new(w, 0.0, 0.0), Vec3::new(w, w, 0.0), Vec3::new(0.0, w, 0.0)],
        vec![[0, 1, 2], [0, 2, 3]],
        None,
    )
    .unwrap()
}

/// Square room of side `w` whose anchors are solid boxes in the mesh.
fn room(w: f64, anchors: &[(&str, Obb)]) -> SceneModel {
    let mut parts = vec![floor(w)];
    parts.extend(anchors.iter().map(|(_, o)| o.to_mesh()));
    let mesh = TriangleMesh::merge(&parts).unwrap();
    let points = sample_point_cloud(&mesh, 10.0, 1).unwrap();
    let anchors = anchors
        .iter()
        .enumerate()
        .map(|(i, (c, o))| Anchor {
            instance_id: i as u32 + 1,
            class_label: c.to_string(),
            obb: *o,
        })
        .collect();
    SceneModel::new("t", mesh, points, anchors).unwrap()
}

fn obb(c: [f64; 3], h: [f64; 3], yaw: f64) -> Obb {
    Obb::new(Vec3::from(c), Vec3::from(h), yaw).unwrap()
}

fn cube(side: f64) -> Asset {
    Asset::cuboid("cube", Vec3::splat(side)).unwrap()
}

fn at(x: f64, y: f64, z: f64, yaw: f64) -> Placement {
    Placement::new(Vec3::new(x, y, z), yaw).unwrap()
}

fn eval(scene: &SceneModel, asset: &Asset, p: &Placement, c: Constraint) -> bool {
    evaluate_constraint(scene, asset, p, &c, &ThresholdConfig::default(), VisibilityMode::Exact).unwrap()
}

fn near(a: &str) -> Constraint {
    Constraint::Near { anchor: a.into() }
}

fn adjacent(a: &str) -> Constraint {
    Constraint::Adjacent { anchor: a.into() }
}

#[test]
fn physical_rest_sink_and_hover() {
    let s = room(4.0, &[]);
    let a = cube(0.3);
    let cfg = ThresholdConfig::default();
    assert!(check_physical(&s, &a, &at(2.0, 2.0, 0.15, 0.3), &cfg));
    assert!(!check_physical(&s, &a, &at(2.0, 2.0, 0.14, 0.3), &cfg));
    assert!(check_physical(&s, &a, &at(2.0, 2.0, 0.155, 0.0), &cfg));
    assert!(!check_physical(&s, &a, &at(2.0, 2.0, 0.2, 0.0), &cfg));
    // exact gap oracle: the support gap is the hover height
    for hover in [0.0, 0.001, 0.004, 0.0099] {
        let g = support_gap(&s.mesh, 2.0, 2.0, hover, &cfg).unwrap();
        assert!((g - hover).abs() < 1e-12, "hover {hover}: gap {g}");
    }
    assert!(support_gap(&s.mesh, 2.0, 2.0, 0.0101, &cfg).is_none());
    // outside the room there is nothing to stand on
    assert!(!check_physical(&s, &a, &at(5.0, 2.0, 0.15, 0.0), &cfg));
}

#[test]
fn physical_rejects_boxes_inside_furniture() {
    let bed = obb([2.0, 2.0, 0.25], [0.8, 1.0, 0.25], 0.0);
    let s = room(4.0, &[("bed", bed)]);
    let cfg = ThresholdConfig::default();
    // wholly inside the bed: no surface crossing, but the floor under it is also the bed's underside
    assert!(!check_physical(&s, &cube(0.1), &at(2.0, 2.0, 0.05, 0.0), &cfg));
    assert!(check_physical(&s, &cube(0.1), &at(2.0, 2.0, 0.55, 0.0), &cfg));
    // half on, half off the bed edge: penetrates the side
    assert!(!check_physical(&s, &cube(0.4), &at(2.8, 2.0, 0.2, 0.0), &cfg));
}

#[test]
fn proximity_thresholds() {
    // room side 10 m ⇒ near threshold 0.10 m
    let table = obb([5.0, 5.0, 0.4], [0.5, 0.5, 0.4], 0.0);
    let s = room(10.0, &[("table", table)]);
    let a = cube(0.2);
    let x_at_gap = |g: f64| 5.5 + g + 0.1;
    assert!(eval(&s, &a, &at(x_at_gap(0.0), 5.0, 0.1, 0.0), adjacent("table")));
    assert!(eval(&s, &a, &at(x_at_gap(0.0), 5.0, 0.1, 0.0), near("table")));
    assert!(eval(&s, &a, &at(x_at_gap(0.02), 5.0, 0.1, 0.0), adjacent("table")));
    assert!(!eval(&s, &a, &at(x_at_gap(0.05), 5.0, 0.1, 0.0), adjacent("table")));
    assert!(eval(&s, &a, &at(x_at_gap(0.08), 5.0, 0.1, 0.0), near("table")));
    assert!(!eval(&s, &a, &at(x_at_gap(0.12), 5.0, 0.1, 0.0), near("table")));
    let err = evaluate_constraint(&s, &a, &at(1.0, 1.0, 0.1, 0.0), &near("piano"), &ThresholdConfig::default(), VisibilityMode::Exact);
    assert!(err.is_err());
}

#[test]
fn vertical_gaps_and_overlap() {
    let cfg = ThresholdConfig::default();
    let anchor = obb([0.0, 0.0, 0.5], [0.5, 0.5, 0.5], 0.0);
    // 0.4 × 0.4 asset with `frac` of its width over the anchor's +x edge
    let asset_at = |frac: f64, gap: f64| obb([0.7 - 0.4 * frac, 0.0, 1.0 + gap + 0.1], [0.2, 0.2, 0.1], 0.0);
    let iom = |o: &Obb| footprint_iom(o, &anchor);
    let a = asset_at(0.8, 0.005);
    assert!((iom(&a) - 0.8).abs() < 1e-12);
    assert!(vertical_ok(Vertical::On, &a, &anchor, &cfg));
    let a = asset_at(0.6, 0.05);
    assert!((iom(&a) - 0.6).abs() < 1e-12);
    assert!(vertical_ok(Vertical::Above, &a, &anchor, &cfg));
    let a = asset_at(0.4, 0.05);
    assert!((iom(&a) - 0.4).abs() < 1e-12);
    assert!(!vertical_ok(Vertical::Above, &a, &anchor, &cfg));
    let a = asset_at(1.0, 0.0);
    assert!(vertical_ok(Vertical::On, &a, &anchor, &cfg));
    assert!(!vertical_ok(Vertical::Above, &a, &anchor, &cfg));
    // below: asset under a raised box
    let shelf = obb([0.0, 0.0, 1.5], [0.5, 0.5, 0.02], 0.0);
    let under = obb([0.0, 0.0, 0.5], [0.2, 0.2, 0.5], 0.0);
    assert!(vertical_ok(Vertical::Below, &under, &shelf, &cfg));
}

#[test]
fn between_cases() {
    let chair = obb([2.0, 3.0, 0.25], [0.25, 0.25, 0.25], 0.0);
    let table = obb([3.0, 3.0, 0.25], [0.25, 0.25, 0.25], 0.0);
    let s = room(6.0, &[("chair", chair), ("table", table)]);
    let a = cube(0.2);
    let c = Constraint::Between {
        anchor1: "chair".into(),
        anchor2: "table".into(),
    };
    let swapped = Constraint::Between {
        anchor1: "table".into(),
        anchor2: "chair".into(),
    };
    assert!(eval(&s, &a, &at(2.5, 3.0, 0.1, 0.0), c.clone()));
    assert!(eval(&s, &a, &at(2.5, 3.0, 0.1, 0.0), swapped.clone()));
    // off to the side of the hull
    assert!(!eval(&s, &a, &at(2.5, 3.6, 0.1, 0.0), c.clone()));
    // overlapping the chair footprint: 0.07 × 0.2 of a 0.2 × 0.2 asset = IoM 0.35
    let p = at(2.25 + 0.1 - 0.07, 3.0, 0.6, 0.0);
    let o = a.obb_at(&p);
    let mc = mc_iom(&o, &chair);
    assert!((footprint_iom(&o, &chair) - 0.35).abs() < 1e-9 && (mc - 0.35).abs() < 0.01);
    assert!(!eval(&s, &a, &p, c.clone()));
    // anchors 2 m apart
    let far = room(6.0, &[("chair", chair), ("table", obb([4.5, 3.0, 0.25], [0.25, 0.25, 0.25], 0.0))]);
    for x in [2.5, 3.0, 3.375, 4.0] {
        assert!(!eval(&far, &a, &at(x, 3.0, 0.1, 0.0), c.clone()));
    }
    let same = Constraint::Between {
        anchor1: "chair".into(),
        anchor2: "chair".into(),
    };
    assert!(evaluate_constraint(&s, &a, &at(2.5, 3.0, 0.1, 0.0), &same, &ThresholdConfig::default(), VisibilityMode::Exact).is_err());
}

/// Monte Carlo footprint IoM on a 400 × 400 grid over the union bounding box.
fn mc_iom(a: &Obb, b: &Obb) -> f64 {
    let bb = a.aabb().union(b.aabb());
    let (mut ia, mut ib, mut both) = (0u64, 0u64, 0u64);
    let n = 400;
    for i in 0..n {
        for j in 0..n {
            let x = bb.min.x + (i as f64 + 0.5) / n as f64 * (bb.max.x - bb.min.x);
            let y = bb.min.y + (j as f64 + 0.5) / n as f64 * (bb.max.y - bb.min.y);
            let ina = a.contains(Vec3::new(x, y, a.center.z), 0.0);
            let inb = b.contains(Vec3::new(x, y, b.center.z), 0.0);
            ia += ina as u64;
            ib += inb as u64;
            both += (ina && inb) as u64;
        }
    }
    both as f64 / ia.min(ib) as f64
}

#[test]
fn facing_cases() {
    let cfg = ThresholdConfig::default();
    let tv = |x: f64, y: f64| obb([x, y, 1.0], [0.5, 0.05, 0.3], 0.0);
    let asset = obb([0.0, 0.0, 0.3], [0.3, 0.3, 0.3], 0.0);
    assert!(facing_ok(&asset, &tv(0.0, 1.0), &cfg));
    assert!(!facing_ok(&asset, &tv(0.0, 2.5), &cfg));
    let bearing = |deg: f64| {
        let r = deg.to_radians();
        tv(r.sin(), r.cos())
    };
    assert!(!facing_ok(&asset, &bearing(40.0), &cfg));
    let t25 = bearing(25.0);
    // lateral spans on the x axis: asset [-0.3, 0.3], tv [sin25 - 0.5, sin25 + 0.5]
    let lat = interval_iom([-0.3, 0.3], [t25.center.x - 0.5, t25.center.x + 0.5]);
    assert!(lat >= 0.5);
    assert!(facing_ok(&asset, &t25, &cfg));
    // turning the asset away breaks it
    let turned = obb([0.0, 0.0, 0.3], [0.3, 0.3, 0.3], std::f64::consts::PI);
    assert!(!facing_ok(&turned, &tv(0.0, 1.0), &cfg));
}

#[test]
fn visibility_is_a_partition() {
    let tv = obb([0.5, 3.0, 1.2], [0.05, 0.5, 0.3], 0.0);
    let wall = obb([2.0, 3.0, 1.25], [0.05, 3.0, 1.25], 0.0);
    let open = room(6.0, &[("tv", tv)]);
    let blocked = room(6.0, &[("tv", tv), ("wall", wall)]);
    let a = cube(0.4);
    let p = at(3.5, 3.0, 0.2, 0.0);
    for s in [&open, &blocked] {
        for mode in [VisibilityMode::Exact, VisibilityMode::Approx] {
            let cfg = ThresholdConfig::default();
            let v = evaluate_constraint(s, &a, &p, &Constraint::Visible { anchor: "tv".into() }, &cfg, mode).unwrap();
            let nv = evaluate_constraint(s, &a, &p, &Constraint::NotVisible { anchor: "tv".into() }, &cfg, mode).unwrap();
            assert!(v ^ nv);
        }
    }
    assert!(eval(&open, &a, &p, Constraint::Visible { anchor: "tv".into() }));
    assert!(eval(&blocked, &a, &p, Constraint::NotVisible { anchor: "tv".into() }));
}

#[test]
fn prompt_reports() {
    let chair = obb([2.0, 3.0, 0.25], [0.25, 0.25, 0.25], 0.0);
    let table = obb([3.0, 3.0, 0.4], [0.3, 0.3, 0.4], 0.0);
    let tv = obb([2.5, 4.6, 1.2], [0.5, 0.05, 0.3], 0.0);
    let s = room(6.0, &[("chair", chair), ("table", table), ("tv", tv)]);
    let cfg = ThresholdConfig::default();
    let a = cube(0.2);
    let report = evaluate_prompt(&s, &a, &at(1.0, 1.0, 0.1, 0.0), &[Constraint::Plausible], &cfg);
    assert_eq!(report.verdicts.len(), 1);
    assert!(report.complete_ok && report.language_ok && report.physical);

    // hand-scored: between chair and table, facing away from the tv, adjacent to the table
    let prompt = vec![
        Constraint::Between {
            anchor1: "chair".into(),
            anchor2: "table".into(),
        },
        Constraint::Facing { anchor: "tv".into() },
        adjacent("table"),
        near("chair"),
    ];
    let p = at(2.45, 3.0, 0.1, std::f64::consts::PI);
    let r = evaluate_prompt(&s, &a, &p, &prompt, &cfg);
    let got: Vec<bool> = r.verdicts.iter().map(|v| v.satisfied).collect();
    // gap to chair = 2.45 - 0.1 - 2.25 = 0.1 (near threshold 0.06) ; gap to table = 2.7 - 2.55 = 0.15
    assert_eq!(got, vec![true, true, false, false, false]);
    assert!(r.physical && !r.spatial && !r.rotational && r.visibility);
    assert!(!r.language_ok && !r.complete_ok);

    // failing only facing
    let r = evaluate_prompt(&s, &a, &p, &prompt[..2], &cfg);
    assert!(r.physical && r.spatial && !r.rotational && !r.language_ok && !r.complete_ok);
    let r = evaluate_prompt(&s, &a, &at(2.45, 3.0, 0.1, 0.0), &prompt[..2], &cfg);
    assert!(r.complete_ok);
}

fn obb_strategy() -> impl Strategy<Value = Obb> {
    ((0.5..5.5f64, 0.5..5.5f64, 0.0..2.0f64), (0.05..0.6f64, 0.05..0.6f64, 0.05..0.6f64), 0.0..6.28f64)
        .prop_map(|((x, y, z), (hx, hy, hz), yaw)| Obb::new(Vec3::new(x, y, z + hz), Vec3::new(hx, hy, hz), yaw).unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn on_and_above_are_disjoint(a in obb_strategy(), b in obb_strategy()) {
        let cfg = ThresholdConfig::default();
        prop_assert!(!(vertical_ok(Vertical::On, &a, &b, &cfg) && vertical_ok(Vertical::Above, &a, &b, &cfg)));
    }

    #[test]
    fn between_symmetric_and_translation_invariant(
        a1 in obb_strategy(), a2 in obb_strategy(), x in 0.5..5.5f64, y in 0.5..5.5f64, yaw in 0.0..6.28f64,
        dx in -3.0..3.0f64, dy in -3.0..3.0f64,
    ) {
        let s = room(6.0, &[("chair", a1), ("table", a2)]);
        let asset = cube(0.3);
        let p = at(x, y, 0.15, yaw);
        let c = |a: &str, b: &str| Constraint::Between { anchor1: a.into(), anchor2: b.into() };
        let fwd = eval(&s, &asset, &p, c("chair", "table"));
        prop_assert_eq!(fwd, eval(&s, &asset, &p, c("table", "chair")));
        let shift = Vec3::new(dx, dy, 0.0);
        let moved = |o: &Obb| Obb::new(o.center + shift, o.half_extents, o.yaw).unwrap();
        let t = SceneModel::new(
            "t",
            s.mesh.transformed(0.0, shift),
            s.points.clone(),
            s.anchors.iter().map(|a| Anchor { obb: moved(&a.obb), ..a.clone() }).collect(),
        ).unwrap();
        let q = at(x + dx, y + dy, 0.15, yaw);
        for con in [c("chair", "table"), near("chair"), adjacent("table"), Constraint::Facing { anchor: "table".into() },
                    Constraint::On { anchor: "chair".into() }, Constraint::Below { anchor: "table".into() }] {
            prop_assert_eq!(eval(&s, &asset, &p, con.clone()), eval(&t, &asset, &q, con));
        }
    }

    #[test]
    fn larger_adjacent_tol_never_hurts(a in obb_strategy(), b in obb_strategy(), extra in 0.0..0.5f64) {
        let cfg = ThresholdConfig::default();
        let looser = ThresholdConfig { adjacent_tol: cfg.adjacent_tol + extra, ..cfg.clone() };
        use placekit_core::constraints::{proximity_ok, Proximity};
        if proximity_ok(Proximity::Adjacent, &a, &b, 6.0, &cfg) {
            prop_assert!(proximity_ok(Proximity::Adjacent, &a, &b, 6.0, &looser));
        }
    }
}
