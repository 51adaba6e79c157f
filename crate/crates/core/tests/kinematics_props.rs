mod common;

use common::sampled_collision;
use glovekit::geometry::Point2;
use glovekit::handmodel::{
    attachment_point, builtin_specs, forward_kinematics, forward_kinematics_unchecked, AttachmentMode, FingerSpec,
    JointAngles,
};
use glovekit::linksearch::{
    collides, evaluate_config, ik_two_link, ik_two_link_both, linkage_polyline, scenarios, search, Scenario,
    SearchOptions, Verdict,
};
use glovekit::handmodel::Finger;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn spec(i: usize) -> FingerSpec<f64> {
    builtin_specs::<f64>()[i % 6].clone()
}

fn angles_in(spec: &FingerSpec<f64>, u: [f64; 3]) -> JointAngles<f64> {
    let q: Vec<f64> = spec.joint_ranges.iter().zip(u).map(|(r, t)| r.min + t * (r.max - r.min)).collect();
    JointAngles::new(q[0], q[1], q[2])
}

// Independent forward kinematics: accumulate rotation matrices in degrees-to-radians.
fn fk_oracle(spec: &FingerSpec<f64>, q: &JointAngles<f64>) -> [(f64, f64); 4] {
    let mut pts = [(0.0, -spec.start_offset); 4];
    let (mut c, mut s) = (1.0f64, 0.0f64);
    for (i, (len, deg)) in spec.phalanx_lengths.iter().zip(q.as_array()).enumerate() {
        let (rs, rc) = (-deg).to_radians().sin_cos();
        let (nc, ns) = (c * rc - s * rs, s * rc + c * rs);
        c = nc;
        s = ns;
        pts[i + 1] = (pts[i].0 + len * c, pts[i].1 + len * s);
    }
    pts
}

#[test]
fn collision_checker_agrees_with_sampling_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let (mut checked, mut hits) = (0, 0);
    while checked < 1000 {
        let sp = spec(rng.random_range(0..6));
        let q = angles_in(&sp, [rng.random(), rng.random(), rng.random()]);
        let mode = AttachmentMode::ALL[rng.random_range(0..2)];
        let sc = Scenario::new(&sp, q, mode).unwrap();
        let l1 = 60.0 + 10.0 * rng.random_range(0..15) as f64;
        let l2 = 60.0 + 10.0 * rng.random_range(0..15) as f64;
        let arch = 5.0 * rng.random_range(0..7) as f64;
        let Some(elbows) = ik_two_link_both(Point2::origin(), sc.target, l1, l2) else { continue };
        let elbow = elbows[rng.random_range(0..2)];
        let poly = linkage_polyline(Point2::origin(), elbow, sc.target, arch).unwrap();
        let expected = sampled_collision(&poly, &sc.pose.joints);
        assert_eq!(collides(&poly, &sc.pose), expected, "l1 {l1} l2 {l2} arch {arch} q {q:?} {mode}");
        hits += expected as usize;
        checked += 1;
    }
    assert!(hits > 100 && hits < 900, "oracle cases should mix outcomes, got {hits} collisions");
}

#[test]
fn medium_index_straight_down_case() {
    let sp = FingerSpec::builtin(Finger::Index, glovekit::handmodel::HandSize::Medium);
    for mode in AttachmentMode::ALL {
        let sc = Scenario::new(&sp, JointAngles::new(90.0, 0.0, 0.0), mode).unwrap();
        let elbow = ik_two_link(Point2::origin(), sc.target, 60.0, 130.0).unwrap();
        let poly = linkage_polyline(Point2::origin(), elbow, sc.target, 0.0).unwrap();
        assert_eq!(collides(&poly, &sc.pose), sampled_collision(&poly, &sc.pose.joints));
    }
}

#[test]
fn search_is_schedule_independent() {
    let specs = builtin_specs::<f64>();
    let opts = SearchOptions { angle_step: 30.0, ..SearchOptions::default() };
    let run = |threads| {
        let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
        let grid = pool.install(|| search(Finger::Thumb, &specs, &opts)).unwrap();
        let mut buf = Vec::new();
        grid.write_csv(&mut buf).unwrap();
        (grid, buf)
    };
    let (grid, one) = run(1);
    let (_, four) = run(4);
    assert_eq!(one, four);
    assert_eq!(grid.cells.len(), 225);
    let sc = scenarios(&specs.iter().filter(|s| s.finger == Finger::Thumb).cloned().collect::<Vec<_>>(), 30.0).unwrap();
    for cell in grid.feasible().take(20) {
        let again = evaluate_config(cell.l1, cell.l2, &sc, &opts);
        assert_eq!(again.verdict, cell.verdict);
        let h = cell.verdict.min_arch().unwrap();
        for s in &sc {
            let e = ik_two_link(Point2::origin(), s.target, cell.l1, cell.l2).unwrap();
            assert!(!collides(&linkage_polyline(Point2::origin(), e, s.target, h).unwrap(), &s.pose));
        }
    }
}

proptest! {
    #[test]
    fn fk_preserves_phalanx_lengths(i in 0usize..6, u in prop::array::uniform3(0.0f64..=1.0)) {
        let sp = spec(i);
        let pose = forward_kinematics(&sp, &angles_in(&sp, u)).unwrap();
        for (k, len) in sp.phalanx_lengths.iter().enumerate() {
            let (a, b) = pose.segment(k);
            prop_assert!((a.distance(b) - len).abs() < 1e-9);
        }
    }

    #[test]
    fn fk_matches_rotation_oracle(i in 0usize..6, u in prop::array::uniform3(0.0f64..=1.0)) {
        let sp = spec(i);
        let q = angles_in(&sp, u);
        let pose = forward_kinematics(&sp, &q).unwrap();
        for (p, o) in pose.joints.iter().zip(fk_oracle(&sp, &q)) {
            prop_assert!((p.x - o.0).abs() < 1e-9 && (p.y - o.1).abs() < 1e-9);
        }
    }

    #[test]
    fn fk_f32_tracks_f64(i in 0usize..6, u in prop::array::uniform3(0.0f64..=1.0)) {
        let sp = spec(i);
        let q = angles_in(&sp, u);
        let sp32 = builtin_specs::<f32>()[i].clone();
        let q32 = JointAngles::new(q.q1 as f32, q.q2 as f32, q.q3 as f32);
        let a = forward_kinematics_unchecked(&sp, &q).tip();
        let b = forward_kinematics_unchecked(&sp32, &q32).tip();
        prop_assert!((a.x - b.x as f64).abs() < 1e-3 && (a.y - b.y as f64).abs() < 1e-3);
    }

    #[test]
    fn attachment_sits_offset_from_its_phalanx(i in 0usize..6, u in prop::array::uniform3(0.0f64..=1.0), m in 0usize..2) {
        let sp = spec(i);
        let pose = forward_kinematics(&sp, &angles_in(&sp, u)).unwrap();
        let mode = AttachmentMode::ALL[m];
        let (a, b) = pose.segment(mode.segment());
        let at = attachment_point(&pose, mode).point;
        prop_assert!((at.distance(a.midpoint(b)) - 20.0).abs() < 1e-9);
        prop_assert!((b - a).cross(at - a) > 0.0);
    }

    #[test]
    fn ik_elbows_satisfy_link_lengths(x in -250.0f64..250.0, y in -250.0f64..250.0, l1 in 10.0f64..200.0, l2 in 10.0f64..200.0) {
        let target = Point2::new(x, y);
        let d = target.norm();
        match ik_two_link_both(Point2::origin(), target, l1, l2) {
            Some(elbows) => {
                prop_assert!(d <= l1 + l2 + 1e-9 && d >= (l1 - l2).abs() - 1e-9);
                for e in elbows {
                    prop_assert!((e.norm() - l1).abs() < 1e-6);
                    prop_assert!((e.distance(target) - l2).abs() < 1e-6);
                }
                prop_assert!(target.cross(elbows[0]) >= -1e-6);
            }
            None => prop_assert!(d > l1 + l2 - 1e-9 || d < (l1 - l2).abs() + 1e-9),
        }
    }

    #[test]
    fn reach_is_monotone_in_first_link(x in -250.0f64..250.0, y in -250.0f64..250.0, k1 in 0u32..14, k2 in 0u32..15) {
        let (l1, l2) = (60.0 + 10.0 * k1 as f64, 60.0 + 10.0 * k2 as f64);
        let target = Point2::new(x, y);
        let d = target.norm();
        if ik_two_link(Point2::origin(), target, l1, l2).is_some() && (l1 + 10.0 - l2).abs() <= d {
            prop_assert!(ik_two_link(Point2::origin(), target, l1 + 10.0, l2).is_some());
        }
    }

    #[test]
    fn arch_never_changes_reach(i in 0usize..6, u in prop::array::uniform3(0.0f64..=1.0), k1 in 0u32..15, k2 in 0u32..15) {
        let sp = spec(i);
        let sc = vec![Scenario::new(&sp, angles_in(&sp, u), AttachmentMode::Fingertip).unwrap()];
        let (l1, l2) = (60.0 + 10.0 * k1 as f64, 60.0 + 10.0 * k2 as f64);
        let base = SearchOptions::<f64>::default();
        let unreachable = |o: &SearchOptions<f64>| evaluate_config(l1, l2, &sc, o).verdict == Verdict::Unreachable;
        let straight = SearchOptions { arch_max: 0.0, ..base };
        prop_assert_eq!(unreachable(&straight), unreachable(&base));
        for h in [5.0, 15.0, 30.0] {
            let target = sc[0].target;
            if let Some(e) = ik_two_link(Point2::origin(), target, l1, l2) {
                let poly = linkage_polyline(Point2::origin(), e, target, h).unwrap();
                prop_assert!(poly.last().unwrap().distance(target) < 1e-12);
                prop_assert!((poly[1].distance(target) - l2).abs() < 1e-6);
            }
        }
    }
}
