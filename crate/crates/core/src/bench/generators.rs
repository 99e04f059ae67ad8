//! Benchmark problems. Shapes are described in design coordinates (the
//! primitive lattice frame); each body's local frame is the design frame
//! shifted to the shape centroid. Every analytical benchmark carries an
//! explicit optimal layout as its certificate.

use std::collections::HashMap;
use std::f64::consts::{FRAC_PI_2, PI};

use crate::bench::decompose::decompose_primitive;
use crate::bench::shapes::Primitive;
use crate::boundary::Fixture;
use crate::error::{Error, Result};
use crate::geometry::{Body, DesignLayout, Pose, PortRef, Route, Vec3};
use crate::problem::{Bounds, KnownOptimum, ObjectiveWeights, ProblemSpec};

/// A rigid placement of a design-coordinate shape: rotation then offset.
#[derive(Clone, Copy, Debug)]
struct Placement {
    yaw: f64,
    pitch: f64,
    roll: f64,
    offset: Vec3,
}

impl Placement {
    fn shifted(offset: Vec3) -> Self {
        Self {
            yaw: 0.0,
            pitch: 0.0,
            roll: 0.0,
            offset,
        }
    }

    fn yawed(yaw: f64, offset: Vec3) -> Self {
        Self {
            yaw,
            ..Self::shifted(offset)
        }
    }

    /// Pose of the body whose local origin is the shape centroid.
    fn pose(&self, shape: &Primitive) -> Pose {
        let q = crate::geometry::rotation_matrix(self.yaw, self.pitch, self.roll);
        Pose::new(self.yaw, self.pitch, self.roll, q * shape.centroid() + self.offset)
    }
}

/// Decomposes each distinct shape once and attaches ports given in design
/// coordinates.
struct BodyFactory {
    n_spheres: usize,
    cache: HashMap<String, Body>,
}

impl BodyFactory {
    fn new(n_spheres: usize) -> Self {
        Self {
            n_spheres,
            cache: HashMap::new(),
        }
    }

    fn body(&mut self, id: &str, shape: Primitive, ports: &[[f64; 3]]) -> Result<Body> {
        let key = shape.name();
        if !self.cache.contains_key(&key) {
            let b = decompose_primitive(key.clone(), shape, self.n_spheres)?;
            self.cache.insert(key.clone(), b);
        }
        let mut b = self.cache[&key].clone();
        let c = shape.centroid();
        b.id = id.to_string();
        b.ports = ports.iter().map(|p| Vec3::from(*p) - c).collect();
        Ok(b)
    }
}

fn port(body: usize, port: usize) -> PortRef {
    PortRef { body, port }
}

/// Bounds centered on the optimal box `[lo, hi]`, reaching one unit past its
/// largest half-extent on every axis.
fn bounds_around(lo: Vec3, hi: Vec3) -> Bounds {
    let c = (lo + hi) * 0.5;
    let half = 0.5 * (hi - lo).max() + 1.0;
    Bounds {
        lower: c.add_scalar(-half),
        upper: c.add_scalar(half),
    }
}

/// Certificate vector with control points spaced evenly on the straight
/// port-to-port line.
fn certificate(bodies: &[Body], routes: &[Route], poses: &[Pose]) -> Result<Vec<f64>> {
    let cps: Vec<Vec<Vec3>> = routes
        .iter()
        .map(|r| {
            let a = poses[r.from.body].transform_point(&bodies[r.from.body].ports[r.from.port]);
            let b = poses[r.to.body].transform_point(&bodies[r.to.body].ports[r.to.port]);
            let n = r.n_control_points;
            (1..=n).map(|k| a + (b - a) * (k as f64 / (n + 1) as f64)).collect()
        })
        .collect();
    DesignLayout::new(bodies.len(), routes).pack(poses, &cps)
}

fn check_n(n_obj: usize, allowed: &[usize]) -> Result<()> {
    if allowed.contains(&n_obj) {
        Ok(())
    } else {
        Err(Error::invalid("n_obj", format!("must be one of {allowed:?}, got {n_obj}")))
    }
}

fn analytical_spec(
    name: String,
    bodies: Vec<Body>,
    routes: Vec<Route>,
    poses: &[Pose],
    box_hi: Vec3,
    optimum: (f64, f64),
) -> Result<ProblemSpec> {
    let cert = certificate(&bodies, &routes, poses)?;
    let mut spec = ProblemSpec::new(name, bodies, routes);
    spec.weights = ObjectiveWeights::preset("f1")?;
    spec.bounds = bounds_around(Vec3::zeros(), box_hi);
    spec.known_optimum = Some(KnownOptimum {
        volume: optimum.0,
        routing_length: optimum.1,
    });
    spec.certificate = Some(cert);
    spec.validate()?;
    Ok(spec)
}

/// Upright 1x1x2 cuboids with a port at the center of each end face, linked
/// in a ring. Route `k` joins port `k mod 2` of bodies `k` and `k + 1`. The
/// optimum packs the cuboids side by side on a 1x2 or 2xm grid.
pub fn gen_cuboid_benchmark(n_obj: usize, n_spheres: usize) -> Result<ProblemSpec> {
    check_n(n_obj, &[2, 4, 6])?;
    let shape = Primitive::Cuboid { w: 1.0, h: 1.0, d: 2.0 };
    let mut factory = BodyFactory::new(n_spheres);
    let ports = [[0.5, 0.5, 2.0], [0.5, 0.5, 0.0]];
    let grid: &[(f64, f64)] = match n_obj {
        2 => &[(0.0, 0.0), (1.0, 0.0)],
        4 => &[(0.0, 0.0), (1.0, 0.0), (1.0, 1.0), (0.0, 1.0)],
        _ => &[(0.0, 0.0), (1.0, 0.0), (2.0, 0.0), (2.0, 1.0), (1.0, 1.0), (0.0, 1.0)],
    };
    let mut bodies = Vec::new();
    let mut poses = Vec::new();
    for (i, &(gx, gy)) in grid.iter().enumerate() {
        bodies.push(factory.body(&format!("cuboid{}", i + 1), shape, &ports)?);
        poses.push(Placement::shifted(Vec3::new(gx, gy, 0.0)).pose(&shape));
    }
    let routes: Vec<Route> = if n_obj == 2 {
        vec![
            Route::new("r1", port(0, 0), port(1, 0), 0),
            Route::new("r2", port(0, 1), port(1, 1), 0),
        ]
    } else {
        (0..n_obj)
            .map(|k| Route::new(format!("r{}", k + 1), port(k, k % 2), port((k + 1) % n_obj, k % 2), 0))
            .collect()
    };
    let box_hi = match n_obj {
        2 => Vec3::new(2.0, 1.0, 2.0),
        4 => Vec3::new(2.0, 2.0, 2.0),
        _ => Vec3::new(3.0, 2.0, 2.0),
    };
    let opt = match n_obj {
        2 => (4.0, 2.0),
        4 => (8.0, 4.0),
        _ => (12.0, 6.0),
    };
    analytical_spec(format!("cuboid{n_obj}"), bodies, routes, &poses, box_hi, opt)
}

/// Ports of the L-shape in design coordinates: west face of cell (0,1) and
/// east face of cell (1,0).
const L_PORTS: [[f64; 3]; 2] = [[0.0, 1.5, 0.5], [2.0, 0.5, 0.5]];

/// L-shapes interlocked in pairs: the second of each pair is turned half a
/// turn about z and fills the 2x3 footprint. Pairs stack along z. Port 1 of
/// one body connects to port 2 of its partner and vice versa.
pub fn gen_lshape_benchmark(n_obj: usize, n_spheres: usize) -> Result<ProblemSpec> {
    check_n(n_obj, &[2, 4, 6])?;
    let shape = Primitive::LShape;
    let mut factory = BodyFactory::new(n_spheres);
    let mut bodies = Vec::new();
    let mut poses = Vec::new();
    let mut routes = Vec::new();
    for p in 0..n_obj / 2 {
        let z = p as f64;
        let (a, b) = (2 * p, 2 * p + 1);
        bodies.push(factory.body(&format!("lshape{}", a + 1), shape, &L_PORTS)?);
        bodies.push(factory.body(&format!("lshape{}", b + 1), shape, &L_PORTS)?);
        poses.push(Placement::shifted(Vec3::new(0.0, 0.0, z)).pose(&shape));
        poses.push(Placement::yawed(PI, Vec3::new(2.0, 3.0, z)).pose(&shape));
        routes.push(Route::new(format!("r{}", a + 1), port(a, 0), port(b, 1), 0));
        routes.push(Route::new(format!("r{}", b + 1), port(a, 1), port(b, 0), 0));
    }
    let layers = (n_obj / 2) as f64;
    let opt = (6.0 * layers, 2.0 * layers);
    analytical_spec(format!("lshape{n_obj}"), bodies, routes, &poses, Vec3::new(2.0, 3.0, layers), opt)
}

/// Double-L base, two L-shapes and a cuboid filling a 2x3x2 box with five
/// unit-length routes, two of them on the underside.
///
/// World layout (unit cells `(x, y)` per layer):
/// - base, layer 0: (0,0), (1,0), (0,1), (0,2)
/// - cuboid, layer 0: (1,1), (1,2), lying along y
/// - first L, layer 1: (0,0), (1,0), (0,1)
/// - second L, layer 1: (1,1), (1,2), (0,2), half a turn about z
///
/// Routes: base to cuboid twice along the bottom face, L to L along x = 0,
/// each L down to the base along y = 0 and y = 3.
pub fn gen_unique_benchmark(n_spheres: usize) -> Result<ProblemSpec> {
    let mut factory = BodyFactory::new(n_spheres);
    let base = Primitive::DoubleLShape;
    let l = Primitive::LShape;
    let cub = Primitive::Cuboid { w: 1.0, h: 1.0, d: 2.0 };
    let bodies = vec![
        factory.body(
            "base",
            base,
            &[[0.5, 1.5, 0.0], [0.5, 2.5, 0.0], [0.5, 0.0, 0.5], [0.5, 3.0, 0.5]],
        )?,
        factory.body("l1", l, &[[0.0, 1.5, 0.5], [0.5, 0.0, 0.5]])?,
        factory.body("l2", l, &[[2.0, 0.5, 0.5], [1.5, 0.0, 0.5]])?,
        factory.body("cuboid", cub, &[[0.5, 1.0, 0.5], [0.5, 1.0, 1.5]])?,
    ];
    let cuboid_place = Placement {
        yaw: 0.0,
        pitch: 0.0,
        roll: -FRAC_PI_2,
        offset: Vec3::new(1.0, 1.0, 1.0),
    };
    let poses = vec![
        Placement::shifted(Vec3::zeros()).pose(&base),
        Placement::shifted(Vec3::new(0.0, 0.0, 1.0)).pose(&l),
        Placement::yawed(PI, Vec3::new(2.0, 3.0, 1.0)).pose(&l),
        cuboid_place.pose(&cub),
    ];
    let routes = vec![
        Route::new("under1", port(0, 0), port(3, 0), 0),
        Route::new("under2", port(0, 1), port(3, 1), 0),
        Route::new("l1_l2", port(1, 0), port(2, 0), 0),
        Route::new("l1_base", port(1, 1), port(0, 2), 0),
        Route::new("l2_base", port(2, 1), port(0, 3), 0),
    ];
    analytical_spec("unique".into(), bodies, routes, &poses, Vec3::new(2.0, 3.0, 2.0), (12.0, 5.0))
}

/// Sphere counts available for the prior-work comparison.
pub const PRIORWORK_SPHERES: [usize; 4] = [14, 25, 50, 100];

/// Objective presets run for a prior-work configuration; the exponential
/// variant only at 25 spheres.
pub fn priorwork_presets(n_spheres: usize) -> &'static [&'static str] {
    if n_spheres == 25 {
        &["f1", "f2"]
    } else {
        &["f1"]
    }
}

/// Cubes of side 1.5 joined in a ring by routes that start and end at the
/// cube centers, each with two control points. No known optimum.
pub fn gen_priorwork_benchmark(n_obj: usize, n_spheres: usize) -> Result<ProblemSpec> {
    check_n(n_obj, &[3, 4, 6])?;
    if !PRIORWORK_SPHERES.contains(&n_spheres) {
        return Err(Error::invalid(
            "n_spheres",
            format!("must be one of {PRIORWORK_SPHERES:?}, got {n_spheres}"),
        ));
    }
    let shape = Primitive::Cube { side: 1.5 };
    let mut factory = BodyFactory::new(n_spheres);
    let bodies = (0..n_obj)
        .map(|i| factory.body(&format!("cube{}", i + 1), shape, &[[0.75, 0.75, 0.75]]))
        .collect::<Result<Vec<_>>>()?;
    let routes = (0..n_obj)
        .map(|k| {
            let mut r = Route::new(format!("r{}", k + 1), port(k, 0), port((k + 1) % n_obj, 0), 2);
            r.through_endpoints = true;
            r
        })
        .collect();
    let mut spec = ProblemSpec::new(format!("priorwork{n_obj}_{n_spheres}"), bodies, routes);
    spec.weights = ObjectiveWeights::preset("f1")?;
    spec.bounds = Bounds::cube(0.75 * n_obj as f64 + 1.0);
    spec.validate()?;
    Ok(spec)
}

/// Sets the number of control points on every route, re-spacing the
/// certificate and dropping any stored initial point.
pub fn with_control_points(mut spec: ProblemSpec, n_control_points: usize) -> Result<ProblemSpec> {
    let poses = match &spec.certificate {
        Some(c) => Some(spec.layout().unpack(c)?.0),
        None => None,
    };
    for r in &mut spec.routes {
        r.n_control_points = n_control_points;
    }
    spec.initial = None;
    spec.certificate = match poses {
        Some(p) => Some(certificate(&spec.bodies, &spec.routes, &p)?),
        None => None,
    };
    spec.validate()?;
    Ok(spec)
}

/// Stylized tail-cone packaging problem: five boxes (three light packs, one
/// heavy pack, one electrical load) chained by tube routes inside a
/// frustum, with routing, boundary, center-of-gravity and inertia weights
/// all set to one.
pub fn gen_aircraft_demo(n_spheres: usize, seed: u64) -> Result<ProblemSpec> {
    let fixture = Fixture::Frustum {
        length: 8.0,
        r0: 2.4,
        r1: 1.4,
    };
    let (boundary, coverage) = fixture.build(24, 600, seed);
    log::debug!("aircraft boundary: {coverage:?}");
    let mut factory = BodyFactory::new(n_spheres);
    let parts: [(&str, Primitive, f64); 5] = [
        ("light1", Primitive::Cuboid { w: 0.8, h: 0.6, d: 0.5 }, 1.0),
        ("light2", Primitive::Cuboid { w: 0.8, h: 0.6, d: 0.5 }, 1.0),
        ("light3", Primitive::Cuboid { w: 0.8, h: 0.6, d: 0.5 }, 1.0),
        ("heavy", Primitive::Cuboid { w: 1.0, h: 0.8, d: 0.7 }, 4.0),
        ("load", Primitive::Cube { side: 0.6 }, 2.0),
    ];
    let mut bodies = Vec::new();
    for (id, shape, mass) in parts {
        let Primitive::Cuboid { w, h, d } = (match shape {
            Primitive::Cube { side } => Primitive::Cuboid { w: side, h: side, d: side },
            s => s,
        }) else {
            unreachable!()
        };
        // Ports at the centers of the two x faces.
        let mut b = factory.body(id, shape, &[[0.0, h / 2.0, d / 2.0], [w, h / 2.0, d / 2.0]])?;
        let scale = mass / b.mass;
        b.mass = mass;
        b.inertia_local *= scale;
        bodies.push(b);
    }
    let routes = (0..4)
        .map(|k| {
            let mut r = Route::new(format!("r{}", k + 1), port(k, 1), port(k + 1, 0), 2);
            r.radius = 0.05;
            r
        })
        .collect();
    let mut spec = ProblemSpec::new("aircraft", bodies, routes);
    spec.weights = ObjectiveWeights {
        routing: 1.0,
        boundary: 1.0,
        cog: 1.0,
        inertia: 1.0,
        ..ObjectiveWeights::default()
    };
    spec.boundary = Some(boundary);
    spec.cog_target = Vec3::new(3.0, 0.0, 0.0);
    spec.bounds = Bounds {
        lower: Vec3::new(0.0, -2.4, -2.4),
        upper: Vec3::new(8.0, 2.4, 2.4),
    };
    spec.validate()?;
    Ok(spec)
}

/// Benchmark names understood by [`generate`].
pub const SUITE: [&str; 7] = ["cuboid2", "cuboid4", "cuboid6", "lshape2", "lshape4", "lshape6", "unique"];

/// Builds a benchmark by name: `cuboid{2,4,6}`, `lshape{2,4,6}`, `unique`,
/// `priorwork{3,4,6}` or `aircraft`.
pub fn generate(name: &str, n_spheres: usize) -> Result<ProblemSpec> {
    let num = |prefix: &str| name.strip_prefix(prefix).and_then(|s| s.parse::<usize>().ok());
    if let Some(n) = num("cuboid") {
        return gen_cuboid_benchmark(n, n_spheres);
    }
    if let Some(n) = num("lshape") {
        return gen_lshape_benchmark(n, n_spheres);
    }
    if let Some(n) = num("priorwork") {
        return gen_priorwork_benchmark(n, n_spheres);
    }
    match name {
        "unique" => gen_unique_benchmark(n_spheres),
        "aircraft" => gen_aircraft_demo(n_spheres, 0),
        _ => Err(Error::invalid("benchmark", format!("unknown benchmark `{name}`"))),
    }
}
