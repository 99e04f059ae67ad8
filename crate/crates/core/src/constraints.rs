//! Clearance constraints between body spheres and route segments, assembled
//! into `g(x) <= 0`.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::geometry::{Body, Posed, PortRef, Route, Sphere, Vec3};
use crate::problem::{ConstraintMode, ProblemSpec};

const NORM_GUARD: f64 = 1e-16;

#[inline]
fn guarded_norm(v: &Vec3) -> f64 {
    (v.norm_squared() + NORM_GUARD).sqrt()
}

/// Signed clearance between two spheres; negative when they overlap.
pub fn sphere_clearance(a: &Sphere, b: &Sphere) -> f64 {
    (a.center - b.center).norm() - (a.radius + b.radius)
}

/// Number of sphere pairs between different objects, `sum_{i<j} n_i n_j`.
pub fn pair_count(counts: &[usize]) -> u64 {
    let mut total = 0u64;
    let mut before = 0u64;
    for &n in counts {
        total += before * n as u64;
        before += n as u64;
    }
    total
}

/// Closest point on segment `[p0, p1]` to `c`, as the segment parameter.
fn segment_param(p0: &Vec3, p1: &Vec3, c: &Vec3) -> f64 {
    let d = p1 - p0;
    let l2 = d.norm_squared();
    if l2 <= f64::EPSILON * f64::EPSILON {
        return 0.0;
    }
    ((c - p0).dot(&d) / l2).clamp(0.0, 1.0)
}

/// Distance from the sphere center to the segment minus the sphere radius
/// and the tube radius.
pub fn segment_sphere_clearance(p0: &Vec3, p1: &Vec3, s: &Sphere, tube_radius: f64) -> f64 {
    let t = segment_param(p0, p1, &s.center);
    let q = p0 + (p1 - p0) * t;
    (s.center - q).norm() - (s.radius + tube_radius)
}

/// Gradients of a point-segment distance with respect to `p0`, `p1`, `c`.
struct PointSegmentGrad {
    value: f64,
    p0: Vec3,
    p1: Vec3,
    c: Vec3,
}

fn point_segment_grad(p0: &Vec3, p1: &Vec3, c: &Vec3) -> PointSegmentGrad {
    let t = segment_param(p0, p1, c);
    let v = c - (p0 + (p1 - p0) * t);
    let d = guarded_norm(&v);
    let n = v / d;
    PointSegmentGrad {
        value: d,
        p0: -n * (1.0 - t),
        p1: -n * t,
        c: n,
    }
}

/// Closest-point parameters `(s, t)` between segments `p1 + s d1` and
/// `p2 + t d2`, both in `[0, 1]`.
fn closest_params(p1: &Vec3, q1: &Vec3, p2: &Vec3, q2: &Vec3) -> (f64, f64) {
    let eps = f64::EPSILON * f64::EPSILON;
    let d1 = q1 - p1;
    let d2 = q2 - p2;
    let r = p1 - p2;
    let a = d1.norm_squared();
    let e = d2.norm_squared();
    let f = d2.dot(&r);
    if a <= eps && e <= eps {
        return (0.0, 0.0);
    }
    if a <= eps {
        return (0.0, (f / e).clamp(0.0, 1.0));
    }
    let c = d1.dot(&r);
    if e <= eps {
        return ((-c / a).clamp(0.0, 1.0), 0.0);
    }
    let b = d1.dot(&d2);
    let denom = a * e - b * b;
    let mut s = if denom > 0.0 {
        ((b * f - c * e) / denom).clamp(0.0, 1.0)
    } else {
        0.0
    };
    let mut t = (b * s + f) / e;
    if t < 0.0 {
        t = 0.0;
        s = (-c / a).clamp(0.0, 1.0);
    } else if t > 1.0 {
        t = 1.0;
        s = ((b - c) / a).clamp(0.0, 1.0);
    }
    (s, t)
}

/// Minimum distance between two closed segments minus both tube radii.
pub fn segment_segment_clearance(a0: &Vec3, a1: &Vec3, b0: &Vec3, b1: &Vec3, tube_a: f64, tube_b: f64) -> f64 {
    let (s, t) = closest_params(a0, a1, b0, b1);
    let pa = a0 + (a1 - a0) * s;
    let pb = b0 + (b1 - b0) * t;
    (pa - pb).norm() - (tube_a + tube_b)
}

struct SegSegGrad {
    value: f64,
    g: [Vec3; 4],
}

fn segment_segment_grad(a0: &Vec3, a1: &Vec3, b0: &Vec3, b1: &Vec3) -> SegSegGrad {
    let (s, t) = closest_params(a0, a1, b0, b1);
    let v = (a0 + (a1 - a0) * s) - (b0 + (b1 - b0) * t);
    let d = guarded_norm(&v);
    let n = v / d;
    SegSegGrad {
        value: d,
        g: [n * (1.0 - s), n * s, -n * (1.0 - t), -n * t],
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConstraintKind {
    ObjObj,
    Enclosing,
    RouteObj,
    RouteRoute,
}

/// What a row of the constraint vector measures.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum RowLabel {
    ObjObj {
        body_a: usize,
        sphere_a: usize,
        body_b: usize,
        sphere_b: usize,
    },
    Enclosing {
        body_a: usize,
        body_b: usize,
    },
    RouteObj {
        route: usize,
        segment: usize,
        body: usize,
        sphere: usize,
    },
    RouteRoute {
        route_a: usize,
        segment_a: usize,
        route_b: usize,
        segment_b: usize,
    },
    /// Soft-sum aggregate of all rows of one kind.
    SoftSum {
        of: ConstraintKind,
        rows: usize,
    },
}

impl RowLabel {
    pub fn kind(&self) -> ConstraintKind {
        match self {
            RowLabel::ObjObj { .. } => ConstraintKind::ObjObj,
            RowLabel::Enclosing { .. } => ConstraintKind::Enclosing,
            RowLabel::RouteObj { .. } => ConstraintKind::RouteObj,
            RowLabel::RouteRoute { .. } => ConstraintKind::RouteRoute,
            RowLabel::SoftSum { of, .. } => *of,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ConstraintVector {
    pub values: Vec<f64>,
    pub labels: Vec<RowLabel>,
}

impl ConstraintVector {
    pub fn max_violation(&self) -> f64 {
        self.values.iter().fold(0.0f64, |m, &v| m.max(v))
    }
}

/// Which object pairs get detailed sphere-sphere rows.
#[derive(Clone, Debug, PartialEq)]
pub enum PairSelection {
    /// Every pair, detailed.
    All,
    /// Only the listed pairs `(i, j)` with `i < j`; other pairs are
    /// unconstrained.
    Only(BTreeSet<(usize, usize)>),
    /// Listed pairs detailed, all remaining pairs get one row on their
    /// enclosing spheres (given per body, local frame).
    Soi {
        active: BTreeSet<(usize, usize)>,
        enclosing: Vec<Sphere>,
    },
}

#[derive(Clone, Debug)]
struct RouteObjRow {
    route: usize,
    segment: usize,
    body: usize,
    sphere: usize,
}

#[derive(Clone, Debug)]
struct RouteRouteRow {
    route_a: usize,
    segment_a: usize,
    route_b: usize,
    segment_b: usize,
}

/// Precomputed row structure for one problem and pair selection.
#[derive(Clone, Debug)]
pub struct ConstraintPlan {
    detailed: Vec<(usize, usize)>,
    enclosing_pairs: Vec<(usize, usize)>,
    enclosing: Vec<Sphere>,
    route_obj: Vec<RouteObjRow>,
    route_route: Vec<RouteRouteRow>,
    mode: ConstraintMode,
    n_raw: usize,
}

/// Whether a body sphere is exempt from clearance against a segment that
/// starts or ends at `port`: the port lies within twice the tube radius of
/// the sphere surface, `|c - port| - r <= 2 tube`.
fn port_exempt(body: &Body, port: usize, sphere: usize, tube: f64) -> bool {
    let s = &body.spheres[sphere];
    (s.center - body.ports[port]).norm() - s.radius <= 2.0 * tube + 1e-9
}

fn segment_ports(route: &Route, segment: usize) -> Vec<PortRef> {
    let mut v = Vec::new();
    if segment == 0 {
        v.push(route.from);
    }
    if segment + 1 == route.n_segments() {
        v.push(route.to);
    }
    v
}

impl ConstraintPlan {
    pub fn new(spec: &ProblemSpec, selection: &PairSelection) -> Self {
        Self::with_mode(spec, selection, spec.constraint_mode)
    }

    pub fn with_mode(spec: &ProblemSpec, selection: &PairSelection, mode: ConstraintMode) -> Self {
        let n = spec.bodies.len();
        let mut detailed = Vec::new();
        let mut enclosing_pairs = Vec::new();
        let mut enclosing = Vec::new();
        for i in 0..n {
            for j in i + 1..n {
                match selection {
                    PairSelection::All => detailed.push((i, j)),
                    PairSelection::Only(set) => {
                        if set.contains(&(i, j)) {
                            detailed.push((i, j));
                        }
                    }
                    PairSelection::Soi { active, .. } => {
                        if active.contains(&(i, j)) {
                            detailed.push((i, j));
                        } else {
                            enclosing_pairs.push((i, j));
                        }
                    }
                }
            }
        }
        if let PairSelection::Soi { enclosing: e, .. } = selection {
            enclosing = e.clone();
        }

        let mut route_obj = Vec::new();
        for (ri, r) in spec.routes.iter().enumerate() {
            for m in 0..r.n_segments() {
                let ports = segment_ports(r, m);
                for (b, body) in spec.bodies.iter().enumerate() {
                    for k in 0..body.spheres.len() {
                        let exempt = ports
                            .iter()
                            .any(|p| p.body == b && (r.through_endpoints || port_exempt(body, p.port, k, r.radius)));
                        if !exempt {
                            route_obj.push(RouteObjRow {
                                route: ri,
                                segment: m,
                                body: b,
                                sphere: k,
                            });
                        }
                    }
                }
            }
        }

        let mut segs = Vec::new();
        for (ri, r) in spec.routes.iter().enumerate() {
            for m in 0..r.n_segments() {
                segs.push((ri, m));
            }
        }
        let mut route_route = Vec::new();
        for (a, &(ra, sa)) in segs.iter().enumerate() {
            for &(rb, sb) in &segs[a + 1..] {
                if ra == rb && sb <= sa + 1 {
                    continue;
                }
                let pa = segment_ports(&spec.routes[ra], sa);
                let pb = segment_ports(&spec.routes[rb], sb);
                if pa.iter().any(|p| pb.contains(p)) {
                    continue;
                }
                route_route.push(RouteRouteRow {
                    route_a: ra,
                    segment_a: sa,
                    route_b: rb,
                    segment_b: sb,
                });
            }
        }

        let counts = spec.sphere_counts();
        let n_obj: usize = detailed.iter().map(|&(i, j)| counts[i] * counts[j]).sum();
        let n_raw = n_obj + enclosing_pairs.len() + route_obj.len() + route_route.len();
        Self {
            detailed,
            enclosing_pairs,
            enclosing,
            route_obj,
            route_route,
            mode,
            n_raw,
        }
    }

    /// Number of per-clearance rows before any aggregation.
    pub fn n_raw(&self) -> usize {
        self.n_raw
    }

    pub fn n_route_obj(&self) -> usize {
        self.route_obj.len()
    }

    pub fn n_route_route(&self) -> usize {
        self.route_route.len()
    }

    pub fn detailed_pairs(&self) -> &[(usize, usize)] {
        &self.detailed
    }

    pub fn enclosing_pairs(&self) -> &[(usize, usize)] {
        &self.enclosing_pairs
    }

    fn kind_sizes(&self, posed: &Posed) -> [(ConstraintKind, usize); 4] {
        let n_obj: usize = self
            .detailed
            .iter()
            .map(|&(i, j)| posed.bodies[i].spheres.len() * posed.bodies[j].spheres.len())
            .sum();
        [
            (ConstraintKind::ObjObj, n_obj),
            (ConstraintKind::Enclosing, self.enclosing_pairs.len()),
            (ConstraintKind::RouteObj, self.route_obj.len()),
            (ConstraintKind::RouteRoute, self.route_route.len()),
        ]
    }

    /// Number of rows the NLP sees.
    pub fn n_rows(&self, spec: &ProblemSpec) -> usize {
        match self.mode {
            ConstraintMode::Absolute => self.n_raw,
            ConstraintMode::SoftSum { .. } => {
                let counts = spec.sphere_counts();
                let n_obj: usize = self.detailed.iter().map(|&(i, j)| counts[i] * counts[j]).sum();
                [n_obj, self.enclosing_pairs.len(), self.route_obj.len(), self.route_route.len()]
                    .iter()
                    .filter(|&&n| n > 0)
                    .count()
            }
        }
    }

    fn enclosing_world(&self, posed: &Posed, b: usize) -> Sphere {
        let e = &self.enclosing[b];
        Sphere::new(posed.world_point(b, &e.center), e.radius)
    }

    /// Per-clearance values `g = -clearance` in row order.
    pub fn raw_values(&self, posed: &Posed) -> (Vec<f64>, Vec<RowLabel>) {
        let mut values = Vec::with_capacity(self.n_raw);
        let mut labels = Vec::with_capacity(self.n_raw);
        for &(i, j) in &self.detailed {
            for (mu, sa) in posed.bodies[i].spheres.iter().enumerate() {
                let ca = posed.centers[i][mu];
                for (nu, sb) in posed.bodies[j].spheres.iter().enumerate() {
                    let cb = posed.centers[j][nu];
                    values.push(sa.radius + sb.radius - guarded_norm(&(ca - cb)));
                    labels.push(RowLabel::ObjObj {
                        body_a: i,
                        sphere_a: mu,
                        body_b: j,
                        sphere_b: nu,
                    });
                }
            }
        }
        for &(i, j) in &self.enclosing_pairs {
            let a = self.enclosing_world(posed, i);
            let b = self.enclosing_world(posed, j);
            values.push(a.radius + b.radius - guarded_norm(&(a.center - b.center)));
            labels.push(RowLabel::Enclosing { body_a: i, body_b: j });
        }
        for row in &self.route_obj {
            let nodes = &posed.nodes[row.route];
            let tube = posed.routes[row.route].radius;
            let c = posed.centers[row.body][row.sphere];
            let r = posed.bodies[row.body].spheres[row.sphere].radius;
            let d = point_segment_grad(&nodes[row.segment], &nodes[row.segment + 1], &c).value;
            values.push(r + tube - d);
            labels.push(RowLabel::RouteObj {
                route: row.route,
                segment: row.segment,
                body: row.body,
                sphere: row.sphere,
            });
        }
        for row in &self.route_route {
            let na = &posed.nodes[row.route_a];
            let nb = &posed.nodes[row.route_b];
            let tubes = posed.routes[row.route_a].radius + posed.routes[row.route_b].radius;
            let d = segment_segment_grad(
                &na[row.segment_a],
                &na[row.segment_a + 1],
                &nb[row.segment_b],
                &nb[row.segment_b + 1],
            )
            .value;
            values.push(tubes - d);
            labels.push(RowLabel::RouteRoute {
                route_a: row.route_a,
                segment_a: row.segment_a,
                route_b: row.route_b,
                segment_b: row.segment_b,
            });
        }
        (values, labels)
    }

    /// Adds `sum_k w_k grad g_k` (raw rows) into `grad`.
    pub fn raw_vjp(&self, posed: &Posed, weights: &[f64], grad: &mut [f64]) {
        let mut pg = posed.new_grad();
        let mut row = 0;
        for &(i, j) in &self.detailed {
            let (bi, bj) = (&posed.bodies[i], &posed.bodies[j]);
            for (mu, sa) in bi.spheres.iter().enumerate() {
                let ca = posed.centers[i][mu];
                for (nu, sb) in bj.spheres.iter().enumerate() {
                    let w = weights[row];
                    row += 1;
                    if w == 0.0 {
                        continue;
                    }
                    let v = ca - posed.centers[j][nu];
                    // g = r - |v|, so dg/dca = -v/|v|.
                    let n = v * (w / guarded_norm(&v));
                    pg.add_point(i, &sa.center, &-n);
                    pg.add_point(j, &sb.center, &n);
                }
            }
        }
        for &(i, j) in &self.enclosing_pairs {
            let w = weights[row];
            row += 1;
            if w == 0.0 {
                continue;
            }
            let a = self.enclosing_world(posed, i);
            let b = self.enclosing_world(posed, j);
            let v = a.center - b.center;
            let n = v * (w / guarded_norm(&v));
            pg.add_point(i, &self.enclosing[i].center, &-n);
            pg.add_point(j, &self.enclosing[j].center, &n);
        }
        for r in &self.route_obj {
            let w = weights[row];
            row += 1;
            if w == 0.0 {
                continue;
            }
            let nodes = &posed.nodes[r.route];
            let c = posed.centers[r.body][r.sphere];
            let g = point_segment_grad(&nodes[r.segment], &nodes[r.segment + 1], &c);
            let src = &posed.sources[r.route];
            pg.add_node(posed, src[r.segment], &(g.p0 * -w), grad);
            pg.add_node(posed, src[r.segment + 1], &(g.p1 * -w), grad);
            let local = posed.bodies[r.body].spheres[r.sphere].center;
            pg.add_point(r.body, &local, &(g.c * -w));
        }
        for r in &self.route_route {
            let w = weights[row];
            row += 1;
            if w == 0.0 {
                continue;
            }
            let na = &posed.nodes[r.route_a];
            let nb = &posed.nodes[r.route_b];
            let g = segment_segment_grad(
                &na[r.segment_a],
                &na[r.segment_a + 1],
                &nb[r.segment_b],
                &nb[r.segment_b + 1],
            );
            let sa = &posed.sources[r.route_a];
            let sb = &posed.sources[r.route_b];
            pg.add_node(posed, sa[r.segment_a], &(g.g[0] * -w), grad);
            pg.add_node(posed, sa[r.segment_a + 1], &(g.g[1] * -w), grad);
            pg.add_node(posed, sb[r.segment_b], &(g.g[2] * -w), grad);
            pg.add_node(posed, sb[r.segment_b + 1], &(g.g[3] * -w), grad);
        }
        pg.scatter(posed, grad);
    }

    /// Constraint rows in the plan's mode.
    pub fn evaluate(&self, posed: &Posed) -> ConstraintVector {
        let (raw, labels) = self.raw_values(posed);
        match self.mode {
            ConstraintMode::Absolute => ConstraintVector { values: raw, labels },
            ConstraintMode::SoftSum { beta, epsilon } => {
                let mut values = Vec::new();
                let mut out_labels = Vec::new();
                let mut start = 0;
                for (kind, n) in self.kind_sizes(posed) {
                    if n == 0 {
                        continue;
                    }
                    let s: f64 = raw[start..start + n].iter().map(|&g| softplus(beta * g)).sum();
                    values.push(s / beta - epsilon);
                    out_labels.push(RowLabel::SoftSum { of: kind, rows: n });
                    start += n;
                }
                ConstraintVector {
                    values,
                    labels: out_labels,
                }
            }
        }
    }

    /// Adds `sum_k w_k grad c_k` over the plan's rows into `grad`.
    pub fn vjp(&self, posed: &Posed, weights: &[f64], grad: &mut [f64]) {
        match self.mode {
            ConstraintMode::Absolute => self.raw_vjp(posed, weights, grad),
            ConstraintMode::SoftSum { beta, .. } => {
                let (raw, _) = self.raw_values(posed);
                let mut raw_w = vec![0.0; raw.len()];
                let mut start = 0;
                let mut row = 0;
                for (_, n) in self.kind_sizes(posed) {
                    if n == 0 {
                        continue;
                    }
                    let w = weights[row];
                    row += 1;
                    for k in start..start + n {
                        raw_w[k] = w * logistic(beta * raw[k]);
                    }
                    start += n;
                }
                self.raw_vjp(posed, &raw_w, grad);
            }
        }
    }
}

/// `log(1 + e^z)`, stable for large `|z|`.
pub fn softplus(z: f64) -> f64 {
    z.max(0.0) + (-z.abs()).exp().ln_1p()
}

fn logistic(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// Assembles the constraint vector of `spec` at `x`.
pub fn assemble(
    spec: &ProblemSpec,
    x: &[f64],
    selection: &PairSelection,
    mode: ConstraintMode,
) -> crate::error::Result<ConstraintVector> {
    let posed = spec.posed(x)?;
    Ok(ConstraintPlan::with_mode(spec, selection, mode).evaluate(&posed))
}

/// Largest violation over the full absolute constraint set.
pub fn full_violation(spec: &ProblemSpec, x: &[f64]) -> crate::error::Result<f64> {
    Ok(assemble(spec, x, &PairSelection::All, ConstraintMode::Absolute)?.max_violation())
}

/// Smallest clearance over every row of the full absolute constraint set
/// (`+inf` if there are none).
pub fn min_clearance(spec: &ProblemSpec, x: &[f64]) -> crate::error::Result<f64> {
    let cv = assemble(spec, x, &PairSelection::All, ConstraintMode::Absolute)?;
    Ok(cv.values.iter().fold(f64::INFINITY, |m, &v| m.min(-v)))
}

/// Bounding sphere of a body's spheres in its local frame: Ritter's
/// approximate ball over the centers, then the radius is grown to cover every
/// member sphere.
pub fn enclosing_sphere(body: &Body) -> Sphere {
    let pts: Vec<Vec3> = body.spheres.iter().map(|s| s.center).collect();
    let far = |from: &Vec3| {
        *pts.iter()
            .max_by(|a, b| (*a - from).norm().total_cmp(&(*b - from).norm()))
            .unwrap()
    };
    let y = far(&pts[0]);
    let z = far(&y);
    let mut c = (y + z) * 0.5;
    let mut r = (y - z).norm() * 0.5;
    for p in &pts {
        let d = (p - c).norm();
        if d > r {
            let nr = 0.5 * (r + d);
            c += (p - c) * ((nr - r) / d);
            r = nr;
        }
    }
    let radius = body
        .spheres
        .iter()
        .map(|s| (s.center - c).norm() + s.radius)
        .fold(0.0, f64::max);
    Sphere::new(c, radius)
}
