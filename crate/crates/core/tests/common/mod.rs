#![allow(dead_code)]

use std::collections::BTreeSet;

use packroute::boundary::Fixture;
use packroute::constraints::{enclosing_sphere, ConstraintPlan, PairSelection};
use packroute::geometry::{Body, Mat3, PortRef, Route, Sphere, Vec3};
use packroute::objectives::evaluate;
use packroute::problem::{Bounds, ConstraintMode, ObjectiveWeights, ProblemSpec, RoutingVariant};
use packroute::solver::check_gradient;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const FD_STEP: f64 = 1e-6;
pub const GRAD_TOL: f64 = 1e-5;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn vec3(rng: &mut impl Rng, half: f64) -> Vec3 {
    Vec3::new(
        rng.random_range(-half..half),
        rng.random_range(-half..half),
        rng.random_range(-half..half),
    )
}

/// Disjoint spheres on a jittered row along x, with ports at both ends.
pub fn random_body(rng: &mut impl Rng, id: &str, n_spheres: usize) -> Body {
    let spheres: Vec<Sphere> = (0..n_spheres)
        .map(|k| {
            let c = Vec3::new(0.5 * k as f64, rng.random_range(-0.05..0.05), rng.random_range(-0.05..0.05));
            Sphere::new(c, rng.random_range(0.1..0.2))
        })
        .collect();
    let span = 0.5 * (n_spheres.max(1) - 1) as f64;
    let mass = rng.random_range(0.5..2.0);
    let inertia = Mat3::from_diagonal(&Vec3::new(
        rng.random_range(0.1..1.0),
        rng.random_range(0.1..1.0),
        rng.random_range(0.1..1.0),
    ));
    Body {
        id: id.into(),
        spheres,
        ports: vec![Vec3::new(-0.3, 0.0, 0.0), Vec3::new(span + 0.3, 0.0, 0.0)],
        mass,
        cog_local: Vec3::new(0.5 * span, 0.0, 0.0),
        inertia_local: inertia,
        shape: None,
    }
}

pub fn ball_body(id: &str, r: f64, mass: f64) -> Body {
    Body {
        id: id.into(),
        spheres: vec![Sphere::new(Vec3::zeros(), r)],
        ports: vec![],
        mass,
        cog_local: Vec3::zeros(),
        inertia_local: Mat3::zeros(),
        shape: None,
    }
}

/// Three bodies, two tube routes with control points and a box boundary:
/// every objective term and every constraint kind has rows.
pub fn mixed_spec(seed: u64) -> ProblemSpec {
    let mut r = rng(seed);
    let bodies = vec![
        random_body(&mut r, "a", 3),
        random_body(&mut r, "b", 2),
        random_body(&mut r, "c", 4),
    ];
    let mut r1 = Route::new("ab", PortRef { body: 0, port: 1 }, PortRef { body: 1, port: 0 }, 2);
    r1.radius = 0.05;
    let mut r2 = Route::new("bc", PortRef { body: 1, port: 1 }, PortRef { body: 2, port: 0 }, 1);
    r2.radius = 0.08;
    let mut spec = ProblemSpec::new("mixed", bodies, vec![r1, r2]);
    let (bm, _) = Fixture::Box { size: [4.0, 3.0, 3.0] }.build(12, 200, seed);
    spec.boundary = Some(bm);
    spec.bounds = Bounds::cube(2.0);
    spec.cog_target = Vec3::new(0.2, -0.1, 0.3);
    spec
}

pub fn random_point(spec: &ProblemSpec, rng: &mut impl Rng) -> Vec<f64> {
    let layout = spec.layout();
    let mut x = vec![0.0; layout.dim()];
    for b in 0..layout.n_bodies {
        let o = layout.pose_offset(b);
        for k in 0..3 {
            x[o + k] = rng.random_range(-3.0..3.0);
            x[o + 3 + k] = rng.random_range(-1.5..1.5);
        }
    }
    for (ri, route) in spec.routes.iter().enumerate() {
        for k in 0..route.n_control_points {
            let o = layout.control_offset(ri, k);
            for d in 0..3 {
                x[o + d] = rng.random_range(-1.5..1.5);
            }
        }
    }
    x
}

/// Only the named term switched on.
pub fn single_term(name: &str) -> ObjectiveWeights {
    let mut w = ObjectiveWeights::default();
    match name {
        "routing_quadratic" => w.routing = 1.0,
        "routing_exponential" => {
            w.routing = 1.0;
            w.routing_variant = RoutingVariant::Exponential;
            w.gamma_exp = 0.2;
        }
        "volume" => w.volume = 1.0,
        "boundary" => w.boundary = 1.0,
        "cog" => w.cog = 1.0,
        "inertia" => {
            w.inertia = 1.0;
            w.inertia_axes = [1.0, 0.5, 2.0];
        }
        "mean_distance" => w.mean_distance = 1.0,
        "all" => {
            w.routing = 1.0;
            w.volume = 0.7;
            w.boundary = 1.3;
            w.cog = 0.4;
            w.inertia = 0.2;
            w.mean_distance = 0.5;
        }
        other => panic!("unknown term {other}"),
    }
    w
}

pub const OBJECTIVE_TERMS: [&str; 8] = [
    "routing_quadratic",
    "routing_exponential",
    "volume",
    "boundary",
    "cog",
    "inertia",
    "mean_distance",
    "all",
];

fn objective_value(spec: &ProblemSpec, x: &[f64]) -> f64 {
    evaluate(spec, &spec.posed(x).unwrap(), false, None).unwrap().0
}

/// Worst relative gradient error of one objective term over `points`
/// random designs.
pub fn objective_gradient_error(term: &str, points: usize, seed: u64) -> f64 {
    let mut spec = mixed_spec(seed);
    spec.weights = single_term(term);
    let mut r = rng(seed ^ 0x9e37);
    let mut worst = 0.0f64;
    for _ in 0..points {
        let x = random_point(&spec, &mut r);
        let mut g = vec![0.0; x.len()];
        evaluate(&spec, &spec.posed(&x).unwrap(), false, Some(&mut g)).unwrap();
        worst = worst.max(check_gradient(|y| objective_value(&spec, y), &g, &x, FD_STEP));
    }
    worst
}

pub const CONSTRAINT_KINDS: [&str; 5] = ["obj_obj", "enclosing", "route_obj", "route_route", "soft_sum"];

fn plan_for(spec: &ProblemSpec, kind: &str) -> ConstraintPlan {
    match kind {
        "enclosing" => {
            let enclosing = spec.bodies.iter().map(enclosing_sphere).collect();
            ConstraintPlan::new(
                spec,
                &PairSelection::Soi {
                    active: BTreeSet::new(),
                    enclosing,
                },
            )
        }
        "soft_sum" => ConstraintPlan::with_mode(spec, &PairSelection::All, ConstraintMode::soft_sum()),
        _ => ConstraintPlan::new(spec, &PairSelection::All),
    }
}

/// Worst relative error of `sum_i w_i grad g_i` for the rows of one kind,
/// with random row weights.
pub fn constraint_gradient_error(kind: &str, points: usize, seed: u64) -> f64 {
    use packroute::constraints::ConstraintKind as K;
    let spec = mixed_spec(seed);
    let plan = plan_for(&spec, kind);
    let want = match kind {
        "obj_obj" => Some(K::ObjObj),
        "enclosing" => Some(K::Enclosing),
        "route_obj" => Some(K::RouteObj),
        "route_route" => Some(K::RouteRoute),
        _ => None,
    };
    let mut r = rng(seed ^ 0x51ed);
    let mut worst = 0.0f64;
    for _ in 0..points {
        let x = random_point(&spec, &mut r);
        let posed = spec.posed(&x).unwrap();
        let mut g = vec![0.0; x.len()];
        if kind == "soft_sum" {
            let n = plan.evaluate(&posed).values.len();
            let w: Vec<f64> = (0..n).map(|_| r.random_range(0.1..1.0)).collect();
            plan.vjp(&posed, &w, &mut g);
            let f = |y: &[f64]| {
                let v = plan.evaluate(&spec.posed(y).unwrap()).values;
                v.iter().zip(&w).map(|(a, b)| a * b).sum::<f64>()
            };
            worst = worst.max(check_gradient(f, &g, &x, FD_STEP));
        } else {
            let (_, labels) = plan.raw_values(&posed);
            let w: Vec<f64> = labels
                .iter()
                .map(|l| if Some(l.kind()) == want { r.random_range(0.1..1.0) } else { 0.0 })
                .collect();
            assert!(w.iter().any(|&v| v > 0.0), "no {kind} rows");
            plan.raw_vjp(&posed, &w, &mut g);
            let f = |y: &[f64]| {
                let (v, _) = plan.raw_values(&spec.posed(y).unwrap());
                v.iter().zip(&w).map(|(a, b)| a * b).sum::<f64>()
            };
            worst = worst.max(check_gradient(f, &g, &x, FD_STEP));
        }
    }
    worst
}

/// Random placement-only instance with `n_bodies` bodies of `n_spheres`
/// each, packed by volume.
pub fn placement_instance(seed: u64, n_bodies: usize, n_spheres: usize) -> ProblemSpec {
    let mut r = rng(seed);
    let bodies = (0..n_bodies)
        .map(|i| random_body(&mut r, &format!("b{i}"), n_spheres))
        .collect();
    let mut spec = ProblemSpec::new(format!("placement{seed}"), bodies, vec![]);
    spec.weights.volume = 1.0;
    spec.bounds = Bounds::cube(3.0);
    spec
}
