//! Bodies, spheres, ports, routes and the packed design vector.
//!
//! A body lives in its own local frame and is placed in the workspace by a
//! pose `[yaw, pitch, roll, x, y, z]`. The rotation is `Rz(yaw) Ry(pitch) Rx(roll)`
//! and a local point maps to `R p + t`.

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use crate::bench::shapes::Primitive;
use crate::error::{Error, Result};

pub type Vec3 = Vector3<f64>;
pub type Mat3 = Matrix3<f64>;

/// Number of design variables per body pose.
pub const POSE_DIM: usize = 6;

/// Tolerance for the pairwise disjointness check on a body's own spheres.
pub const DISJOINT_TOL: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Sphere {
    pub center: Vec3,
    pub radius: f64,
}

impl Sphere {
    pub fn new(center: Vec3, radius: f64) -> Self {
        Self { center, radius }
    }

    pub fn volume(&self) -> f64 {
        4.0 / 3.0 * std::f64::consts::PI * self.radius.powi(3)
    }
}

/// A rigid object: a disjoint sphere set plus ports and mass properties, all
/// expressed in the body's local frame.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Body {
    pub id: String,
    pub spheres: Vec<Sphere>,
    #[serde(default)]
    pub ports: Vec<Vec3>,
    pub mass: f64,
    pub cog_local: Vec3,
    /// Inertia tensor about `cog_local`, local axes.
    pub inertia_local: Mat3,
    /// Primitive the spheres were generated from, when known. Used to
    /// re-decompose at a different resolution.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub shape: Option<Primitive>,
}

impl Body {
    /// Smallest signed clearance between two of the body's own spheres, or
    /// `+inf` for a single sphere.
    pub fn min_internal_clearance(&self) -> f64 {
        let mut best = f64::INFINITY;
        for (i, a) in self.spheres.iter().enumerate() {
            for b in &self.spheres[i + 1..] {
                let d = (a.center - b.center).norm() - (a.radius + b.radius);
                best = best.min(d);
            }
        }
        best
    }

    /// Checks the structural invariants of a body. `field` prefixes error
    /// messages so that scene diagnostics can name the offending entry.
    pub fn validate(&self, field: &str) -> Result<()> {
        if self.spheres.is_empty() {
            return Err(Error::invalid(format!("{field}.spheres"), "needs at least one sphere"));
        }
        for (k, s) in self.spheres.iter().enumerate() {
            if !(s.radius > 0.0 && s.radius.is_finite()) {
                return Err(Error::invalid(
                    format!("{field}.spheres[{k}].radius"),
                    format!("must be positive and finite, got {}", s.radius),
                ));
            }
            if !s.center.iter().all(|c| c.is_finite()) {
                return Err(Error::invalid(format!("{field}.spheres[{k}].center"), "must be finite"));
            }
        }
        let clearance = self.min_internal_clearance();
        if clearance < -DISJOINT_TOL {
            return Err(Error::invalid(
                format!("{field}.spheres"),
                format!("spheres overlap (min clearance {clearance:e})"),
            ));
        }
        if !(self.mass > 0.0 && self.mass.is_finite()) {
            return Err(Error::invalid(format!("{field}.mass"), "must be positive"));
        }
        let asym = (self.inertia_local - self.inertia_local.transpose()).amax();
        if asym > 1e-9 * (1.0 + self.inertia_local.amax()) {
            return Err(Error::invalid(format!("{field}.inertia_local"), "must be symmetric"));
        }
        let eig = self.inertia_local.symmetric_eigenvalues();
        if eig.min() < -1e-9 * (1.0 + self.inertia_local.amax()) {
            return Err(Error::invalid(
                format!("{field}.inertia_local"),
                "must be positive semi-definite",
            ));
        }
        Ok(())
    }
}

/// Placement of one body.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Pose {
    pub yaw: f64,
    pub pitch: f64,
    pub roll: f64,
    pub translation: Vec3,
}

impl Pose {
    pub fn identity() -> Self {
        Self::new(0.0, 0.0, 0.0, Vec3::zeros())
    }

    pub fn new(yaw: f64, pitch: f64, roll: f64, translation: Vec3) -> Self {
        Self {
            yaw,
            pitch,
            roll,
            translation,
        }
    }

    pub fn from_slice(v: &[f64]) -> Self {
        Self::new(v[0], v[1], v[2], Vec3::new(v[3], v[4], v[5]))
    }

    pub fn to_array(&self) -> [f64; POSE_DIM] {
        let t = &self.translation;
        [self.yaw, self.pitch, self.roll, t.x, t.y, t.z]
    }

    pub fn rotation(&self) -> Mat3 {
        rotation_matrix(self.yaw, self.pitch, self.roll)
    }

    pub fn transform_point(&self, p_local: &Vec3) -> Vec3 {
        transform_point(self, p_local)
    }
}

/// `Rz(yaw) * Ry(pitch) * Rx(roll)`.
pub fn rotation_matrix(yaw: f64, pitch: f64, roll: f64) -> Mat3 {
    rot_z(yaw) * rot_y(pitch) * rot_x(roll)
}

pub fn transform_point(pose: &Pose, p_local: &Vec3) -> Vec3 {
    pose.rotation() * p_local + pose.translation
}

fn rot_z(a: f64) -> Mat3 {
    let (s, c) = a.sin_cos();
    Mat3::new(c, -s, 0.0, s, c, 0.0, 0.0, 0.0, 1.0)
}

fn rot_y(a: f64) -> Mat3 {
    let (s, c) = a.sin_cos();
    Mat3::new(c, 0.0, s, 0.0, 1.0, 0.0, -s, 0.0, c)
}

fn rot_x(a: f64) -> Mat3 {
    let (s, c) = a.sin_cos();
    Mat3::new(1.0, 0.0, 0.0, 0.0, c, -s, 0.0, s, c)
}

fn drot_z(a: f64) -> Mat3 {
    let (s, c) = a.sin_cos();
    Mat3::new(-s, -c, 0.0, c, -s, 0.0, 0.0, 0.0, 0.0)
}

fn drot_y(a: f64) -> Mat3 {
    let (s, c) = a.sin_cos();
    Mat3::new(-s, 0.0, c, 0.0, 0.0, 0.0, -c, 0.0, -s)
}

fn drot_x(a: f64) -> Mat3 {
    let (s, c) = a.sin_cos();
    Mat3::new(0.0, 0.0, 0.0, 0.0, -s, -c, 0.0, c, -s)
}

/// Rotation matrix together with its partial derivatives with respect to
/// yaw, pitch and roll.
#[derive(Clone, Debug)]
pub struct RotationJet {
    pub r: Mat3,
    pub d: [Mat3; 3],
}

impl RotationJet {
    pub fn new(yaw: f64, pitch: f64, roll: f64) -> Self {
        let (z, y, x) = (rot_z(yaw), rot_y(pitch), rot_x(roll));
        let (dz, dy, dx) = (drot_z(yaw), drot_y(pitch), drot_x(roll));
        Self {
            r: z * y * x,
            d: [dz * y * x, z * dy * x, z * y * dx],
        }
    }
}

/// Reference to one end of a route.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct PortRef {
    pub body: usize,
    pub port: usize,
}

/// A piecewise-linear connection between two ports through free control points.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Route {
    pub id: String,
    pub from: PortRef,
    pub to: PortRef,
    #[serde(default)]
    pub n_control_points: usize,
    /// Tube radius; 0 for line routes.
    #[serde(default)]
    pub radius: f64,
    /// End segments ignore the bodies they start or end on entirely, for
    /// ports placed inside a body.
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub through_endpoints: bool,
}

impl Route {
    pub fn new(id: impl Into<String>, from: PortRef, to: PortRef, n_control_points: usize) -> Self {
        Self {
            id: id.into(),
            from,
            to,
            n_control_points,
            radius: 0.0,
            through_endpoints: false,
        }
    }

    pub fn n_segments(&self) -> usize {
        self.n_control_points + 1
    }

    pub fn n_nodes(&self) -> usize {
        self.n_control_points + 2
    }
}

/// Layout of the flat design vector: body poses in body order, then control
/// points route by route.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DesignLayout {
    pub n_bodies: usize,
    cp_offsets: Vec<usize>,
    cp_counts: Vec<usize>,
    dim: usize,
}

impl DesignLayout {
    pub fn new(n_bodies: usize, routes: &[Route]) -> Self {
        let mut offset = POSE_DIM * n_bodies;
        let mut cp_offsets = Vec::with_capacity(routes.len());
        let mut cp_counts = Vec::with_capacity(routes.len());
        for r in routes {
            cp_offsets.push(offset);
            cp_counts.push(r.n_control_points);
            offset += 3 * r.n_control_points;
        }
        Self {
            n_bodies,
            cp_offsets,
            cp_counts,
            dim: offset,
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn n_routes(&self) -> usize {
        self.cp_counts.len()
    }

    pub fn pose_offset(&self, body: usize) -> usize {
        POSE_DIM * body
    }

    pub fn control_offset(&self, route: usize, k: usize) -> usize {
        self.cp_offsets[route] + 3 * k
    }

    pub fn control_count(&self, route: usize) -> usize {
        self.cp_counts[route]
    }

    pub fn check(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.dim {
            return Err(Error::Dimension {
                expected: self.dim,
                got: x.len(),
            });
        }
        Ok(())
    }

    pub fn pack(&self, poses: &[Pose], control_points: &[Vec<Vec3>]) -> Result<Vec<f64>> {
        if poses.len() != self.n_bodies {
            return Err(Error::Dimension {
                expected: self.n_bodies,
                got: poses.len(),
            });
        }
        if control_points.len() != self.n_routes() {
            return Err(Error::Dimension {
                expected: self.n_routes(),
                got: control_points.len(),
            });
        }
        let mut x = Vec::with_capacity(self.dim);
        for p in poses {
            x.extend_from_slice(&p.to_array());
        }
        for (r, cps) in control_points.iter().enumerate() {
            if cps.len() != self.cp_counts[r] {
                return Err(Error::Dimension {
                    expected: self.cp_counts[r],
                    got: cps.len(),
                });
            }
            for c in cps {
                x.extend_from_slice(c.as_slice());
            }
        }
        Ok(x)
    }

    pub fn unpack(&self, x: &[f64]) -> Result<(Vec<Pose>, Vec<Vec<Vec3>>)> {
        self.check(x)?;
        let poses = (0..self.n_bodies)
            .map(|b| Pose::from_slice(&x[self.pose_offset(b)..]))
            .collect();
        let cps = (0..self.n_routes())
            .map(|r| {
                (0..self.cp_counts[r])
                    .map(|k| {
                        let o = self.control_offset(r, k);
                        Vec3::new(x[o], x[o + 1], x[o + 2])
                    })
                    .collect()
            })
            .collect();
        Ok((poses, cps))
    }
}

/// Checks that every route endpoint names an existing port.
pub fn check_routes(bodies: &[Body], routes: &[Route]) -> Result<()> {
    for (ri, r) in routes.iter().enumerate() {
        for end in [r.from, r.to] {
            let ok = bodies.get(end.body).is_some_and(|b| end.port < b.ports.len());
            if !ok {
                return Err(Error::DanglingPort {
                    route: ri,
                    body: end.body,
                    port: end.port,
                });
            }
        }
    }
    Ok(())
}

/// Where a route node comes from, for chaining gradients.
#[derive(Clone, Copy, Debug)]
pub enum NodeSource {
    Port { body: usize, port: usize },
    Control { offset: usize },
}

/// World-frame evaluation of a design vector: rotations (with derivatives),
/// sphere centers, ports and route nodes.
pub struct Posed<'a> {
    pub bodies: &'a [Body],
    pub routes: &'a [Route],
    pub layout: DesignLayout,
    pub jets: Vec<RotationJet>,
    pub translations: Vec<Vec3>,
    pub centers: Vec<Vec<Vec3>>,
    pub nodes: Vec<Vec<Vec3>>,
    pub sources: Vec<Vec<NodeSource>>,
}

impl<'a> Posed<'a> {
    pub fn new(bodies: &'a [Body], routes: &'a [Route], x: &[f64]) -> Result<Self> {
        check_routes(bodies, routes)?;
        let layout = DesignLayout::new(bodies.len(), routes);
        layout.check(x)?;
        let mut jets = Vec::with_capacity(bodies.len());
        let mut translations = Vec::with_capacity(bodies.len());
        let mut centers = Vec::with_capacity(bodies.len());
        for (b, body) in bodies.iter().enumerate() {
            let o = layout.pose_offset(b);
            let jet = RotationJet::new(x[o], x[o + 1], x[o + 2]);
            let t = Vec3::new(x[o + 3], x[o + 4], x[o + 5]);
            centers.push(body.spheres.iter().map(|s| jet.r * s.center + t).collect());
            jets.push(jet);
            translations.push(t);
        }
        let mut nodes = Vec::with_capacity(routes.len());
        let mut sources = Vec::with_capacity(routes.len());
        for (ri, r) in routes.iter().enumerate() {
            let mut n = Vec::with_capacity(r.n_nodes());
            let mut s = Vec::with_capacity(r.n_nodes());
            let port_world = |p: PortRef| jets[p.body].r * bodies[p.body].ports[p.port] + translations[p.body];
            n.push(port_world(r.from));
            s.push(NodeSource::Port {
                body: r.from.body,
                port: r.from.port,
            });
            for k in 0..r.n_control_points {
                let o = layout.control_offset(ri, k);
                n.push(Vec3::new(x[o], x[o + 1], x[o + 2]));
                s.push(NodeSource::Control { offset: o });
            }
            n.push(port_world(r.to));
            s.push(NodeSource::Port {
                body: r.to.body,
                port: r.to.port,
            });
            nodes.push(n);
            sources.push(s);
        }
        Ok(Self {
            bodies,
            routes,
            layout,
            jets,
            translations,
            centers,
            nodes,
            sources,
        })
    }

    pub fn world_point(&self, body: usize, local: &Vec3) -> Vec3 {
        self.jets[body].r * local + self.translations[body]
    }

    pub fn world_sphere(&self, body: usize, k: usize) -> Sphere {
        Sphere::new(self.centers[body][k], self.bodies[body].spheres[k].radius)
    }

    pub fn new_grad(&self) -> PoseGrad {
        PoseGrad::new(self.bodies.len())
    }
}

/// World-frame route nodes `[port, control points..., port]`.
pub fn route_nodes(bodies: &[Body], routes: &[Route], route: usize, x: &[f64]) -> Result<Vec<Vec3>> {
    let posed = Posed::new(bodies, routes, x)?;
    posed
        .nodes
        .get(route)
        .cloned()
        .ok_or_else(|| Error::invalid("route", format!("no route with index {route}")))
}

/// Accumulates gradients with respect to world points of rigid bodies and
/// converts them into pose gradients.
///
/// For a world point `R c + t` with upstream gradient `g`, the translation
/// receives `g` and angle `k` receives `<dR_k, g c^T>`, so per body we only
/// need `sum g` and `sum g c^T`.
pub struct PoseGrad {
    force: Vec<Vec3>,
    moment: Vec<Mat3>,
    angle: Vec<[f64; 3]>,
}

impl PoseGrad {
    pub fn new(n_bodies: usize) -> Self {
        Self {
            force: vec![Vec3::zeros(); n_bodies],
            moment: vec![Mat3::zeros(); n_bodies],
            angle: vec![[0.0; 3]; n_bodies],
        }
    }

    #[inline]
    pub fn add_point(&mut self, body: usize, local: &Vec3, g: &Vec3) {
        self.force[body] += g;
        self.moment[body] += g * local.transpose();
    }

    #[inline]
    pub fn add_angle(&mut self, body: usize, k: usize, v: f64) {
        self.angle[body][k] += v;
    }

    /// Routes a node gradient to the owning body or straight into `grad`.
    #[inline]
    pub fn add_node(&mut self, posed: &Posed, src: NodeSource, g: &Vec3, grad: &mut [f64]) {
        match src {
            NodeSource::Port { body, port } => {
                let local = posed.bodies[body].ports[port];
                self.add_point(body, &local, g);
            }
            NodeSource::Control { offset } => {
                grad[offset] += g.x;
                grad[offset + 1] += g.y;
                grad[offset + 2] += g.z;
            }
        }
    }

    /// Adds the accumulated pose gradients into `grad`.
    pub fn scatter(&self, posed: &Posed, grad: &mut [f64]) {
        for (b, jet) in posed.jets.iter().enumerate() {
            let o = posed.layout.pose_offset(b);
            let m = &self.moment[b];
            for k in 0..3 {
                grad[o + k] += jet.d[k].component_mul(m).sum() + self.angle[b][k];
            }
            let f = &self.force[b];
            grad[o + 3] += f.x;
            grad[o + 4] += f.y;
            grad[o + 5] += f.z;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use std::f64::consts::PI;

    fn unit_body(ports: Vec<Vec3>) -> Body {
        Body {
            id: "b".into(),
            spheres: vec![Sphere::new(Vec3::zeros(), 0.5)],
            ports,
            mass: 1.0,
            cog_local: Vec3::zeros(),
            inertia_local: Mat3::identity() * 0.1,
            shape: None,
        }
    }

    #[test]
    fn identity_rotation() {
        assert_eq!(rotation_matrix(0.0, 0.0, 0.0), Mat3::identity());
    }

    #[test]
    fn quarter_turn_about_z() {
        let p = rotation_matrix(PI / 2.0, 0.0, 0.0) * Vec3::x();
        assert_relative_eq!(p, Vec3::y(), epsilon = 1e-15);
    }

    #[test]
    fn half_turn_plus_translation() {
        let pose = Pose::new(PI, 0.0, 0.0, Vec3::x());
        assert_relative_eq!(pose.transform_point(&Vec3::x()), Vec3::zeros(), epsilon = 1e-15);
        assert_eq!(
            Pose::identity().transform_point(&Vec3::new(1.0, 2.0, 3.0)),
            Vec3::new(1.0, 2.0, 3.0)
        );
    }

    #[test]
    fn rotation_jet_matches_finite_differences() {
        let (a, b, c) = (0.3, -1.1, 2.0);
        let jet = RotationJet::new(a, b, c);
        let h = 1e-6;
        let fd = [
            (rotation_matrix(a + h, b, c) - rotation_matrix(a - h, b, c)) / (2.0 * h),
            (rotation_matrix(a, b + h, c) - rotation_matrix(a, b - h, c)) / (2.0 * h),
            (rotation_matrix(a, b, c + h) - rotation_matrix(a, b, c - h)) / (2.0 * h),
        ];
        for k in 0..3 {
            assert!((jet.d[k] - fd[k]).amax() < 1e-9);
        }
    }

    #[test]
    fn layout_lengths() {
        let route = |n| Route::new("r", PortRef { body: 0, port: 0 }, PortRef { body: 1, port: 0 }, n);
        assert_eq!(DesignLayout::new(2, &[route(2)]).dim(), 18);
        assert_eq!(DesignLayout::new(3, &[route(2), route(2), route(2)]).dim(), 36);
        let layout = DesignLayout::new(2, &[route(2)]);
        assert!(matches!(layout.unpack(&[0.0; 17]), Err(Error::Dimension { expected: 18, got: 17 })));
    }

    #[test]
    fn route_node_counts_and_port_rotation() {
        let bodies = vec![unit_body(vec![Vec3::x()]), unit_body(vec![Vec3::x()])];
        for n_cp in [0usize, 2] {
            let routes = vec![Route::new("r", PortRef { body: 0, port: 0 }, PortRef { body: 1, port: 0 }, n_cp)];
            let layout = DesignLayout::new(2, &routes);
            let mut x = vec![0.0; layout.dim()];
            x[0] = PI;
            x[9] = 5.0;
            let nodes = route_nodes(&bodies, &routes, 0, &x).unwrap();
            assert_eq!(nodes.len(), n_cp + 2);
            assert_eq!(routes[0].n_segments(), n_cp + 1);
            assert_relative_eq!(nodes[0], Vec3::new(-1.0, 0.0, 0.0), epsilon = 1e-15);
            assert_relative_eq!(nodes[n_cp + 1], Vec3::new(6.0, 0.0, 0.0), epsilon = 1e-15);
        }
    }

    #[test]
    fn dangling_port_is_reported() {
        let bodies = vec![unit_body(vec![Vec3::x()]), unit_body(vec![])];
        let routes = vec![Route::new("r", PortRef { body: 0, port: 0 }, PortRef { body: 1, port: 0 }, 0)];
        let x = vec![0.0; 12];
        assert!(matches!(
            route_nodes(&bodies, &routes, 0, &x),
            Err(Error::DanglingPort { route: 0, body: 1, port: 0 })
        ));
    }

    #[test]
    fn overlapping_body_spheres_rejected() {
        let mut b = unit_body(vec![]);
        b.spheres.push(Sphere::new(Vec3::new(0.5, 0.0, 0.0), 0.5));
        assert!(b.validate("bodies[0]").is_err());
        b.spheres[1].center.x = 1.0;
        assert!(b.validate("bodies[0]").is_ok());
    }
}
