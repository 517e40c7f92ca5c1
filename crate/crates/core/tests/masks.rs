use std::f64::consts::FRAC_PI_4;
use std::time::Instant;

use placekit_core::constraints::{check_facing, check_proximity, evaluate_prompt, Constraint, Proximity, ThresholdConfig};
use placekit_core::geometry::{Obb, TriangleMesh, Vec3};
use placekit_core::masks::*;
use placekit_core::plausibility::bin_yaw;
use placekit_core::scene::{generate_synthetic_scene, Anchor, Asset, FurnitureSpec, PositionPolicy, SceneModel, ScenePoint, SynthSceneSpec};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn tv_room(points: &[[f64; 2]]) -> SceneModel {
    let floor = TriangleMesh::new(
        vec![Vec3::new(0.0, 0.0, 0.0), Vec3::new(4.0, 0.0, 0.0), Vec3::new(4.0, 4.0, 0.0), Vec3::new(0.0, 4.0, 0.0)],
        vec![[0, 1, 2], [0, 2, 3]],
        None,
    )
    .unwrap();
    let tv = Obb::new(Vec3::new(2.0, 3.9, 1.1), Vec3::new(0.5, 0.05, 0.3), 0.0).unwrap();
    let mesh = TriangleMesh::merge(&[floor, tv.to_mesh()]).unwrap();
    let pts = points
        .iter()
        .map(|&[x, y]| ScenePoint {
            position: Vec3::new(x, y, 0.0),
            color: [0.5; 3],
        })
        .collect();
    let anchors = vec![Anchor {
        instance_id: 1,
        class_label: "tv".into(),
        obb: tv,
    }];
    SceneModel::new("tvroom", mesh, pts, anchors).unwrap()
}

/// Angle between the frontal direction at `yaw` and the bearing from `p` to `target`, degrees.
fn off_axis(yaw: f64, p: [f64; 2], target: [f64; 2]) -> f64 {
    let f = [-yaw.sin(), yaw.cos()];
    let d = [target[0] - p[0], target[1] - p[1]];
    let cos = (f[0] * d[0] + f[1] * d[1]) / d[0].hypot(d[1]);
    cos.clamp(-1.0, 1.0).acos().to_degrees()
}

#[test]
fn facing_keeps_bins_within_half_angle() {
    let cfg = ThresholdConfig::default();
    let pts = [[2.0, 2.5], [2.5, 2.5], [1.7, 2.9]];
    let scene = tv_room(&pts);
    let asset = Asset::cuboid("a", Vec3::new(0.3, 0.3, 0.3)).unwrap();
    let full = PlacementMask::full("tvroom", "a", pts.len());
    let m = constraint_point_mask(&scene, &asset, &Constraint::Facing { anchor: "tv".into() }, &full, &cfg).unwrap();
    assert_eq!(m.rotation_bits(0), 0b1);
    // bin 1 is 25° off the bearing but its lateral span misses the screen
    assert_eq!(m.rotation_bits(1), 0b1);
    for (i, p) in pts.iter().enumerate() {
        for b in 0..8 {
            let within = off_axis(bin_yaw(b), *p, [2.0, 3.9]) <= 30.0;
            if m.rotation_bits(i) >> b & 1 == 1 {
                assert!(within, "point {i} bin {b}");
            }
        }
    }
}

#[test]
fn plausible_is_identity() {
    let cfg = ThresholdConfig::default();
    let scene = tv_room(&[[1.0, 1.0], [2.0, 2.0]]);
    let asset = Asset::cuboid("a", Vec3::new(0.3, 0.3, 0.3)).unwrap();
    let m = PlacementMask::from_rotations("tvroom", "a", vec![0x12, 0]);
    assert_eq!(constraint_point_mask(&scene, &asset, &Constraint::Plausible, &m, &cfg).unwrap(), m);
}

#[test]
fn unknown_anchor_is_an_error() {
    let cfg = ThresholdConfig::default();
    let scene = tv_room(&[[1.0, 1.0]]);
    let asset = Asset::cuboid("a", Vec3::new(0.3, 0.3, 0.3)).unwrap();
    let m = PlacementMask::full("tvroom", "a", 1);
    assert!(constraint_point_mask(&scene, &asset, &Constraint::Near { anchor: "piano".into() }, &m, &cfg).is_err());
}

fn room_with_table(seed: u64) -> SceneModel {
    let mut spec = SynthSceneSpec::random(seed, 6.0, 5);
    spec.furniture.insert(0, FurnitureSpec::default_for("table").unwrap());
    spec.furniture[0].policy = PositionPolicy::Random;
    generate_synthetic_scene(&spec).unwrap()
}

#[test]
fn near_mask_points_pass_the_exact_check() {
    let cfg = ThresholdConfig::default();
    let scene = room_with_table(4);
    let asset = Asset::cuboid("a", Vec3::new(0.4, 0.3, 0.5)).unwrap();
    let phys = physical_mask(&scene, &asset, &cfg).unwrap();
    assert!(phys.valid_count() > 100);
    let c = Constraint::Near { anchor: "table".into() };
    let m = constraint_point_mask(&scene, &asset, &c, &phys, &cfg).unwrap();
    assert!(m.valid_count() > 0 && m.valid_count() < phys.valid_count());
    for (i, b) in m.valid_pairs() {
        let p = lift_to_center_frame(scene.points[i].position, &asset, bin_yaw(b));
        assert!(check_proximity(Proximity::Near, &scene, &asset, &p, "table", &cfg).unwrap());
    }
    // pruned pairs fail it
    for (i, b) in phys.valid_pairs() {
        if m.rotation_bits(i) >> b & 1 == 0 {
            let p = lift_to_center_frame(scene.points[i].position, &asset, bin_yaw(b));
            assert!(!check_proximity(Proximity::Near, &scene, &asset, &p, "table", &cfg).unwrap());
        }
    }
    let f = constraint_point_mask(&scene, &asset, &Constraint::Facing { anchor: "table".into() }, &phys, &cfg).unwrap();
    for (i, b) in f.valid_pairs().into_iter().step_by(5) {
        let p = lift_to_center_frame(scene.points[i].position, &asset, bin_yaw(b));
        assert!(check_facing(&scene, &asset, &p, "table", &cfg).unwrap());
    }
}

#[test]
fn prompt_mask_samples_pass_the_benchmark_evaluator() {
    let cfg = ThresholdConfig::default();
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let (mut total, mut ok) = (0, 0);
    let start = Instant::now();
    for seed in 0..3 {
        let scene = room_with_table(seed);
        let asset = Asset::cuboid("a", Vec3::new(0.35, 0.3, 0.4)).unwrap();
        let classes = scene.anchor_vocabulary();
        let cs = vec![
            Constraint::Near { anchor: "table".into() },
            Constraint::Visible { anchor: classes.iter().find(|c| *c == "door").cloned().unwrap_or("table".into()) },
        ];
        let m = prompt_mask(&scene, &asset, &cs, "prompt", &cfg).unwrap();
        assert_eq!(m.prompt_hash, prompt_hash("prompt"));
        let pairs = m.valid_pairs();
        for _ in 0..pairs.len().min(100) {
            let (i, b) = pairs[rng.gen_range(0..pairs.len())];
            let p = lift_to_center_frame(scene.points[i].position, &asset, bin_yaw(b));
            total += 1;
            ok += evaluate_prompt(&scene, &asset, &p, &cs, &cfg).complete_ok as usize;
        }
    }
    assert!(total > 0);
    assert!(ok as f64 >= 0.99 * total as f64, "{ok}/{total}");
    eprintln!("prompt masks: {ok}/{total} pass, {:?}", start.elapsed());
}

#[test]
fn files_roundtrip() {
    let dir = tempfile::tempdir().unwrap();
    let mut m = PlacementMask::from_rotations("s", "a", vec![3, 0, 0xFF]);
    m.prompt_hash = prompt_hash("x");
    m.save(dir.path(), "ex0").unwrap();
    assert_eq!(PlacementMask::load(dir.path(), "ex0").unwrap(), m);
    let desc: MaskDescriptor = serde_json::from_str(&std::fs::read_to_string(dir.path().join("ex0.json")).unwrap()).unwrap();
    assert_eq!((desc.points, desc.valid_points), (3, 2));
}

#[test]
fn lift_examples() {
    let a = Asset::cuboid("a", Vec3::new(0.5, 0.5, 0.4)).unwrap();
    let p = lift_to_center_frame(Vec3::new(1.0, 2.0, 0.0), &a, FRAC_PI_4);
    assert_eq!(p.t, Vec3::new(1.0, 2.0, 0.2));
    assert_eq!(p.yaw, FRAC_PI_4);
}

fn mask_from(bits: Vec<u8>) -> PlacementMask {
    PlacementMask::from_rotations("s", "a", bits)
}

proptest! {
    #[test]
    fn combine_laws(a in proptest::collection::vec(any::<u8>(), 16), b in proptest::collection::vec(any::<u8>(), 16), c in proptest::collection::vec(any::<u8>(), 16)) {
        let (ma, mb, mc) = (mask_from(a.clone()), mask_from(b.clone()), mask_from(c.clone()));
        let abc = combine_masks(&[ma.clone(), mb.clone(), mc.clone()]).unwrap();
        let mut naive = vec![0u8; 16];
        for i in 0..16 {
            naive[i] = a[i] & b[i] & c[i];
        }
        prop_assert_eq!(abc.rotations(), &naive[..]);
        for i in 0..16 {
            prop_assert_eq!(abc.is_valid(i), naive[i] != 0);
            if abc.is_valid(i) {
                prop_assert!(ma.is_valid(i) && mb.is_valid(i) && mc.is_valid(i));
            }
        }
        prop_assert_eq!(combine_masks(&[ma.clone(), mb.clone()]).unwrap(), combine_masks(&[mb.clone(), ma.clone()]).unwrap());
        let left = combine_masks(&[combine_masks(&[ma.clone(), mb.clone()]).unwrap(), mc.clone()]).unwrap();
        let right = combine_masks(&[ma.clone(), combine_masks(&[mb, mc]).unwrap()]).unwrap();
        prop_assert_eq!(left, right);
        prop_assert_eq!(combine_masks(&[ma.clone(), ma.clone()]).unwrap(), ma);
    }

    #[test]
    fn binary_format_roundtrip(bits in proptest::collection::vec(any::<u8>(), 0..64)) {
        let m = mask_from(bits);
        prop_assert_eq!(PlacementMask::from_bytes(&m.to_bytes(), &m.descriptor()).unwrap(), m);
    }
}
