mod common;

use common::*;
use packroute::boundary::{soft_max, soft_min};
use packroute::constraints::{pair_count, segment_segment_clearance, segment_sphere_clearance, sphere_clearance};
use packroute::geometry::{rotation_matrix, Mat3, Pose, Sphere, Vec3};
use packroute::objectives::boltzmann;
use packroute::physics::{mass_state, parallel_axis};
use packroute::problem::ProblemSpec;
use proptest::prelude::*;

fn angle() -> impl Strategy<Value = f64> {
    -std::f64::consts::PI..std::f64::consts::PI
}

fn point() -> impl Strategy<Value = Vec3> {
    (-5.0..5.0f64, -5.0..5.0f64, -5.0..5.0f64).prop_map(|(x, y, z)| Vec3::new(x, y, z))
}

fn rigid() -> impl Strategy<Value = (Mat3, Vec3)> {
    (angle(), angle(), angle(), point()).prop_map(|(a, b, c, t)| (rotation_matrix(a, b, c), t))
}

/// ZYX angles of a proper rotation.
fn euler_zyx(r: &Mat3) -> (f64, f64, f64) {
    let pitch = (-r[(2, 0)]).clamp(-1.0, 1.0).asin();
    let yaw = r[(1, 0)].atan2(r[(0, 0)]);
    let roll = r[(2, 1)].atan2(r[(2, 2)]);
    (yaw, pitch, roll)
}

/// Applies `x -> q x` to every body of a placement design.
fn rotate_design(spec: &ProblemSpec, x: &[f64], q: &Mat3) -> Vec<f64> {
    let layout = spec.layout();
    let mut out = x.to_vec();
    for b in 0..layout.n_bodies {
        let o = layout.pose_offset(b);
        let r = q * rotation_matrix(x[o], x[o + 1], x[o + 2]);
        let (yaw, pitch, roll) = euler_zyx(&r);
        let t = q * Vec3::new(x[o + 3], x[o + 4], x[o + 5]);
        out[o..o + 6].copy_from_slice(&[yaw, pitch, roll, t.x, t.y, t.z]);
    }
    out
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn rotations_are_proper_and_orthonormal(a in angle(), b in angle(), c in angle()) {
        let r = rotation_matrix(a, b, c);
        prop_assert!((r.transpose() * r - Mat3::identity()).abs().max() < 1e-12);
        prop_assert!((r.determinant() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn euler_round_trip(a in angle(), b in -1.5..1.5f64, c in angle()) {
        let r = rotation_matrix(a, b, c);
        let (y, p, q) = euler_zyx(&r);
        prop_assert!((rotation_matrix(y, p, q) - r).abs().max() < 1e-10);
    }

    #[test]
    fn pack_then_unpack_is_identity(seed in 0u64..1000) {
        let spec = mixed_spec(seed % 7);
        let mut r = rng(seed);
        let x = random_point(&spec, &mut r);
        let layout = spec.layout();
        let (poses, cps) = layout.unpack(&x).unwrap();
        prop_assert_eq!(layout.pack(&poses, &cps).unwrap(), x);
    }

    #[test]
    fn pose_transform_matches_matrix_form(a in angle(), b in angle(), c in angle(), t in point(), p in point()) {
        let pose = Pose::new(a, b, c, t);
        let expected = rotation_matrix(a, b, c) * p + t;
        prop_assert!((pose.transform_point(&p) - expected).norm() < 1e-12);
    }

    #[test]
    fn sphere_clearance_is_symmetric_and_rigid(c1 in point(), c2 in point(), r1 in 0.01..2.0f64, r2 in 0.01..2.0f64, (q, t) in rigid()) {
        let (a, b) = (Sphere::new(c1, r1), Sphere::new(c2, r2));
        let d = sphere_clearance(&a, &b);
        prop_assert_eq!(d, sphere_clearance(&b, &a));
        let (qa, qb) = (Sphere::new(q * c1 + t, r1), Sphere::new(q * c2 + t, r2));
        prop_assert!((sphere_clearance(&qa, &qb) - d).abs() < 1e-9);
    }

    #[test]
    fn segment_clearances_are_symmetric_and_rigid(
        p0 in point(), p1 in point(), s0 in point(), s1 in point(),
        r in 0.01..1.0f64, ta in 0.0..0.3f64, tb in 0.0..0.3f64, (q, t) in rigid()
    ) {
        let s = Sphere::new(s0, r);
        let d = segment_sphere_clearance(&p0, &p1, &s, ta);
        let moved = Sphere::new(q * s0 + t, r);
        prop_assert!((segment_sphere_clearance(&(q * p0 + t), &(q * p1 + t), &moved, ta) - d).abs() < 1e-7);
        prop_assert!((segment_sphere_clearance(&p1, &p0, &s, ta) - d).abs() < 1e-7);

        let e = segment_segment_clearance(&p0, &p1, &s0, &s1, ta, tb);
        prop_assert!((segment_segment_clearance(&s0, &s1, &p0, &p1, tb, ta) - e).abs() < 1e-7);
        let m = |v: &Vec3| q * v + t;
        prop_assert!((segment_segment_clearance(&m(&p0), &m(&p1), &m(&s0), &m(&s1), ta, tb) - e).abs() < 1e-7);
    }

    #[test]
    fn segment_clearance_never_exceeds_endpoint_distances(p0 in point(), p1 in point(), c in point(), r in 0.01..1.0f64) {
        let s = Sphere::new(c, r);
        let d = segment_sphere_clearance(&p0, &p1, &s, 0.0);
        let sampled = (0..=64)
            .map(|k| (p0 + (p1 - p0) * (k as f64 / 64.0) - c).norm() - r)
            .fold(f64::INFINITY, f64::min);
        prop_assert!(d <= sampled + 1e-7);
        prop_assert!(d >= sampled - (p1 - p0).norm() / 64.0 - 1e-7);
    }

    #[test]
    fn soft_extrema_bracket_the_true_ones(v in prop::collection::vec(-50.0..50.0f64, 1..40), alpha in 0.5..200.0f64) {
        let n = v.len() as f64;
        let max = v.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let min = v.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = soft_max(&v, alpha).unwrap();
        prop_assert!(max - 1e-12 <= hi && hi <= max + n.ln() / alpha + 1e-12);
        let lo = soft_min(&v, alpha).unwrap();
        prop_assert!(min - n.ln() / alpha - 1e-12 <= lo && lo <= min + 1e-12);
        let (b, _) = boltzmann(&v, alpha).unwrap();
        prop_assert!(b <= max + 1e-12 && b >= min - 1e-12);
    }

    #[test]
    fn inertia_is_equivariant_under_global_rotation(seed in 0u64..500, (q, _) in rigid()) {
        let spec = placement_instance(seed, 3, 3);
        let mut r = rng(seed);
        let x = random_point(&spec, &mut r);
        let a = mass_state(&spec.posed(&x).unwrap()).unwrap();
        let b = mass_state(&spec.posed(&rotate_design(&spec, &x, &q)).unwrap()).unwrap();
        prop_assert!((b.inertia - q * a.inertia * q.transpose()).abs().max() < 1e-8);
        prop_assert!((b.inertia.trace() - a.inertia.trace()).abs() < 1e-8);
        prop_assert!((b.cog - q * a.cog).norm() < 1e-9);
    }

    #[test]
    fn pair_count_matches_brute_force(counts in prop::collection::vec(0usize..40, 0..7)) {
        let mut brute = 0u64;
        for i in 0..counts.len() {
            for j in i + 1..counts.len() {
                for _ in 0..counts[i] {
                    for _ in 0..counts[j] {
                        brute += 1;
                    }
                }
            }
        }
        prop_assert_eq!(pair_count(&counts), brute);
    }
}

#[test]
fn parallel_axis_of_a_point_mass() {
    let i = parallel_axis(2.0, &Vec3::new(3.0, 0.0, 0.0));
    assert_eq!(i, Mat3::from_diagonal(&Vec3::new(0.0, 18.0, 18.0)));
    let j = parallel_axis(1.0, &Vec3::new(1.0, 1.0, 0.0));
    let expected = Mat3::new(1.0, -1.0, 0.0, -1.0, 1.0, 0.0, 0.0, 0.0, 2.0);
    assert_eq!(j, expected);
}

#[test]
fn uniform_pair_count_formula() {
    assert_eq!(pair_count(&[100, 100, 100]), 30_000);
    for (n_o, n_s) in [(2usize, 5usize), (4, 20), (6, 14)] {
        let expected = (n_o * (n_o - 1) / 2 * n_s * n_s) as u64;
        assert_eq!(pair_count(&vec![n_s; n_o]), expected);
    }
}
