mod common;

use common::*;
use packroute::bench::generators::generate;
use packroute::bench::run::{run_benchmark, warm_start_run, Framework, RunConfig, SeedChoice};
use packroute::constraints::{enclosing_sphere, full_violation, sphere_clearance, PairSelection};
use packroute::frameworks::{atc_solve, nested_solve, soi_solve, solve_from, AtcOptions, InitMethod};
use packroute::geometry::{PortRef, Route, Vec3};
use packroute::problem::{Bounds, ProblemSpec};
use packroute::solver::SolverOptions;
use packroute::Error;

fn two_balls_on_a_line() -> ProblemSpec {
    let mut spec = ProblemSpec::new("line", vec![ball_body("p", 1.0, 1.0), ball_body("q", 1.0, 1.0)], vec![]);
    spec.weights.volume = 1.0;
    spec.bounds = Bounds {
        lower: Vec3::new(-5.0, 0.0, 0.0),
        upper: Vec3::new(5.0, 1e-9, 1e-9),
    };
    spec
}

fn line_start() -> Vec<f64> {
    vec![0.0, 0.0, 0.0, -3.0, 0.0, 0.0, 0.0, 0.0, 0.0, 2.5, 0.0, 0.0]
}

#[test]
fn atc_two_balls_reach_consistency() {
    let spec = two_balls_on_a_line();
    let rep = atc_solve(&spec, &line_start(), &AtcOptions::default(), &SolverOptions::default()).unwrap();
    let atc = rep.atc.as_ref().unwrap();
    assert!(atc.converged, "{atc:?}");
    assert!(atc.final_gap <= 1e-4, "gap {}", atc.final_gap);
    assert!(rep.max_violation <= 1e-6);
    let d = (rep.x[9] - rep.x[3]).abs();
    assert!((d - 2.0).abs() < 1e-3, "centers {d} apart");
}

#[test]
fn atc_coupling_weight_grows_until_capped() {
    let spec = two_balls_on_a_line();
    let opts = AtcOptions::default();
    let rep = atc_solve(&spec, &line_start(), &opts, &SolverOptions::default()).unwrap();
    let pis = &rep.atc.unwrap().pi_history;
    for w in pis.windows(2) {
        assert!(w[1] > w[0] || w[1] == opts.pi_max, "{pis:?}");
    }
}

#[test]
fn atc_single_object_matches_nested() {
    let mut spec = ProblemSpec::new("one", vec![ball_body("p", 0.5, 1.0)], vec![]);
    spec.weights.cog = 1.0;
    spec.cog_target = Vec3::new(0.3, -0.2, 0.1);
    let x0 = vec![0.1, 0.2, 0.3, 1.0, 1.0, 1.0];
    let atc = atc_solve(&spec, &x0, &AtcOptions::default(), &SolverOptions::default()).unwrap();
    let nested = solve_from(&spec, &x0, &SolverOptions::default(), &PairSelection::All).unwrap();
    let summary = atc.atc.as_ref().unwrap();
    assert_eq!(summary.gap_history.first().copied(), Some(0.0));
    assert!((atc.f - nested.f).abs() <= 1e-4, "{} vs {}", atc.f, nested.f);
}

#[test]
fn atc_and_soi_reject_routes() {
    let spec = generate("cuboid2", 6).unwrap();
    let x0 = spec.certificate.clone().unwrap();
    assert!(matches!(
        atc_solve(&spec, &x0, &AtcOptions::default(), &SolverOptions::default()),
        Err(Error::Unsupported(_))
    ));
    assert!(matches!(soi_solve(&spec, &x0, &SolverOptions::default()), Err(Error::Unsupported(_))));
}

#[test]
fn soi_engaged_five_sphere_pair_uses_25_rows() {
    let mut r = rng(5);
    let bodies = vec![random_body(&mut r, "a", 5), random_body(&mut r, "b", 5)];
    let mut spec = ProblemSpec::new("pair", bodies, vec![]);
    spec.weights.volume = 1.0;
    spec.bounds = Bounds::cube(3.0);
    // Parallel rows 0.4 apart: enclosing spheres overlap from the start.
    let x0 = vec![0.0, 0.0, 0.0, -1.0, 0.0, 0.0, 0.0, 0.0, 0.0, -1.0, 0.4, 0.0];
    let rep = soi_solve(&spec, &x0, &SolverOptions::default()).unwrap();
    let soi = rep.soi.as_ref().unwrap();
    assert_eq!(soi.active_pairs, vec![(0, 1)]);
    assert_eq!(soi.detailed_rows, vec![25]);
    assert!(rep.feasible, "violation {}", rep.max_violation);
}

#[test]
fn soi_far_apart_bodies_stay_on_enclosing_rows() {
    let mut r = rng(9);
    let bodies = vec![random_body(&mut r, "a", 3), random_body(&mut r, "b", 3)];
    let mut spec = ProblemSpec::new("far", bodies, vec![]);
    spec.weights.cog = 1.0;
    spec.bodies[0].mass = 1.0;
    spec.bodies[1].mass = 1.0;
    // Targets keep the bodies where they start.
    let x0 = vec![0.0, 0.0, 0.0, -3.0, 0.0, 0.0, 0.0, 0.0, 0.0, 2.0, 0.0, 0.0];
    let target = packroute::physics::global_cog(&spec.posed(&x0).unwrap()).unwrap();
    spec.cog_target = target;
    let rep = soi_solve(&spec, &x0, &SolverOptions::default()).unwrap();
    let soi = rep.soi.as_ref().unwrap();
    assert!(soi.active_pairs.is_empty(), "{:?}", soi.active_pairs);
    assert!(soi.active_history.iter().all(|&n| n == 0));
    assert!(full_violation(&spec, &rep.x).unwrap() <= 1e-6);
}

#[test]
fn soi_active_set_never_shrinks_and_result_is_feasible() {
    for seed in 0..4 {
        let spec = placement_instance(seed, 4, 3);
        let mut r = rng(seed + 100);
        let x0 = random_point(&spec, &mut r);
        let rep = soi_solve(&spec, &x0, &SolverOptions::default()).unwrap();
        let soi = rep.soi.as_ref().unwrap();
        for w in soi.active_history.windows(2) {
            assert!(w[1] >= w[0], "{:?}", soi.active_history);
        }
        assert_eq!(rep.max_violation, full_violation(&spec, &rep.x).unwrap());
        assert!(rep.feasible, "seed {seed}: violation {}", rep.max_violation);
    }
}

#[test]
fn enclosing_spheres_enclose() {
    let mut r = rng(3);
    for n in 1..8 {
        let b = random_body(&mut r, "b", n);
        let e = enclosing_sphere(&b);
        for s in &b.spheres {
            assert!((s.center - e.center).norm() + s.radius <= e.radius + 1e-9);
        }
    }
}

#[test]
fn best_restart_is_no_worse_than_any_other() {
    let spec = generate("cuboid2", 10).unwrap();
    let res = nested_solve(&spec, &InitMethod::Random, 6, 4, 1, &SolverOptions::default()).unwrap();
    assert!(res.best.feasible);
    for rec in res.restarts.iter().filter(|r| r.feasible) {
        assert!(res.best.f <= rec.f, "{} > {}", res.best.f, rec.f);
    }
    assert_eq!(res.restarts[res.best_index].f, res.best.f);
}

#[test]
fn restarts_do_not_depend_on_the_job_count() {
    let spec = generate("lshape2", 8).unwrap();
    let one = nested_solve(&spec, &InitMethod::Random, 4, 2, 1, &SolverOptions::default()).unwrap();
    let two = nested_solve(&spec, &InitMethod::Random, 4, 2, 2, &SolverOptions::default()).unwrap();
    assert_eq!(one.best.x, two.best.x);
    assert_eq!(one.best_index, two.best_index);
}

#[test]
fn manual_start_at_a_stationary_feasible_point_is_returned() {
    // Two balls whose ports coincide: zero routing, no contact.
    let mut a = ball_body("a", 0.5, 1.0);
    let mut b = ball_body("b", 0.5, 1.0);
    a.ports = vec![Vec3::new(0.75, 0.0, 0.0)];
    b.ports = vec![Vec3::new(-0.75, 0.0, 0.0)];
    let route = Route::new("ab", PortRef { body: 0, port: 0 }, PortRef { body: 1, port: 0 }, 0);
    let mut spec = ProblemSpec::new("touch", vec![a, b], vec![route]);
    spec.weights.routing = 1.0;
    let x = vec![0.0, 0.0, 0.0, -0.75, 0.0, 0.0, 0.0, 0.0, 0.0, 0.75, 0.0, 0.0];
    let res = nested_solve(&spec, &InitMethod::Manual { x0: x.clone() }, 1, 0, 1, &SolverOptions::default()).unwrap();
    assert!(res.best.f.abs() <= 1e-9);
    for (p, q) in res.best.x.iter().zip(&x) {
        assert!((p - q).abs() <= 1e-9);
    }
}

#[test]
fn framework_choice_reaches_run_benchmark() {
    let mut spec = placement_instance(2, 3, 2);
    spec.bounds = Bounds::cube(2.0);
    for fw in [Framework::Nested, Framework::Atc, Framework::Soi] {
        let cfg = RunConfig {
            framework: fw,
            restarts: 2,
            seed: 1,
            ..RunConfig::default()
        };
        let res = run_benchmark(&spec, &cfg).unwrap();
        assert!(res.best.feasible, "{fw:?}: {}", res.best.max_violation);
        assert_eq!(res.restarts.len(), 2);
        assert_eq!(res.best.atc.is_some(), fw == Framework::Atc);
        assert_eq!(res.best.soi.is_some(), fw == Framework::Soi);
    }
}

#[test]
fn warm_start_refines_a_cuboid_solution() {
    let spec = generate("cuboid2", 20).unwrap();
    let cfg = RunConfig {
        restarts: 8,
        seed: 3,
        ..RunConfig::default()
    };
    let base = run_benchmark(&spec, &cfg).unwrap();
    assert!(base.best.feasible);
    for target in [30, 40] {
        let (fine, res) = warm_start_run(&spec, &base, target, SeedChoice::XOptBest, &SolverOptions::default()).unwrap();
        assert_eq!(fine.sphere_counts(), vec![target, target]);
        assert_eq!(res.seed_choice, Some(SeedChoice::XOptBest));
        assert!(res.best.feasible);
        let rel = (res.best_volume - base.best_volume).abs() / base.best_volume;
        assert!(rel <= 0.05, "target {target}: {} vs {}", res.best_volume, base.best_volume);
    }
    let (_, res) = warm_start_run(&spec, &base, 30, SeedChoice::X0Best, &SolverOptions::default()).unwrap();
    assert_eq!(res.seed_choice, Some(SeedChoice::X0Best));
}

#[test]
fn gap_stays_non_negative_on_analytical_benchmarks() {
    for name in ["cuboid2", "lshape2"] {
        let spec = generate(name, 12).unwrap();
        let cfg = RunConfig {
            restarts: 6,
            seed: 5,
            ..RunConfig::default()
        };
        let res = run_benchmark(&spec, &cfg).unwrap();
        let gap = res.gap.unwrap();
        assert!(!gap.beats_optimum(), "{name}: {gap:?}");
        // Volume alone cannot drop below the optimum: the certificate box is tight.
        assert!(gap.volume >= -1e-6, "{name}: {gap:?}");
    }
}

#[test]
fn clearance_of_separated_balls_is_their_gap() {
    let a = packroute::Sphere::new(Vec3::zeros(), 1.0);
    let b = packroute::Sphere::new(Vec3::new(3.0, 0.0, 0.0), 0.5);
    assert!((sphere_clearance(&a, &b) - 1.5).abs() < 1e-12);
}
