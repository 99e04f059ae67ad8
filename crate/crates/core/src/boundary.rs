//! Smooth inside/outside evaluation against a non-convex design boundary.
//!
//! The boundary is a union of interior spheres plus a cloud of points sampled
//! on its surface. An object sphere is inside when its center lies in some
//! boundary sphere and no surface point lies within its radius.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::bench::decompose::{greedy_fill, Region};
use crate::error::{Error, Result};
use crate::geometry::{PoseGrad, Posed, Sphere, Vec3};

const NORM_GUARD: f64 = 1e-16;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundaryModel {
    pub boundary_spheres: Vec<Sphere>,
    pub surface_points: Vec<Vec3>,
    #[serde(default = "default_alpha")]
    pub alpha_union: f64,
    #[serde(default = "default_alpha")]
    pub alpha_points: f64,
    #[serde(default = "default_beta")]
    pub beta: f64,
    #[serde(default = "default_delta")]
    pub delta_union: f64,
    #[serde(default = "default_delta")]
    pub delta_points: f64,
    #[serde(default = "default_weight")]
    pub w_union: f64,
    #[serde(default = "default_weight")]
    pub w_points: f64,
}

fn default_alpha() -> f64 {
    50.0
}
fn default_beta() -> f64 {
    20.0
}
fn default_delta() -> f64 {
    0.01
}
fn default_weight() -> f64 {
    1.0
}

impl BoundaryModel {
    pub fn new(boundary_spheres: Vec<Sphere>, surface_points: Vec<Vec3>) -> Self {
        Self {
            boundary_spheres,
            surface_points,
            alpha_union: default_alpha(),
            alpha_points: default_alpha(),
            beta: default_beta(),
            delta_union: default_delta(),
            delta_points: default_delta(),
            w_union: default_weight(),
            w_points: default_weight(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.boundary_spheres.is_empty() {
            return Err(Error::invalid("boundary.boundary_spheres", "needs at least one sphere"));
        }
        if self.surface_points.is_empty() {
            return Err(Error::invalid("boundary.surface_points", "needs at least one point"));
        }
        for (name, v) in [
            ("boundary.alpha_union", self.alpha_union),
            ("boundary.alpha_points", self.alpha_points),
            ("boundary.beta", self.beta),
        ] {
            if !(v > 0.0) {
                return Err(Error::invalid(name, "must be positive"));
            }
        }
        for (name, v) in [
            ("boundary.delta_union", self.delta_union),
            ("boundary.delta_points", self.delta_points),
            ("boundary.w_union", self.w_union),
            ("boundary.w_points", self.w_points),
        ] {
            if !(v >= 0.0) {
                return Err(Error::invalid(name, "must be non-negative"));
            }
        }
        Ok(())
    }
}

/// Signed distance of `center` to the shell of a boundary sphere, negative
/// inside.
pub fn phi(boundary_sphere: &Sphere, center: &Vec3) -> f64 {
    (boundary_sphere.center - center).norm() - boundary_sphere.radius
}

/// Clearance between a surface point and an object sphere, positive when the
/// point lies outside the sphere.
pub fn rho(surface_point: &Vec3, s: &Sphere) -> f64 {
    (surface_point - s.center).norm() - s.radius
}

/// Log-sum-exp soft maximum `(1/a) log sum exp(a v_k)`.
pub fn soft_max(values: &[f64], alpha: f64) -> Result<f64> {
    let m = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if values.is_empty() {
        return Err(Error::Empty);
    }
    let s: f64 = values.iter().map(|v| (alpha * (v - m)).exp()).sum();
    Ok(m + s.ln() / alpha)
}

/// Log-sum-exp soft minimum `-(1/a) log sum exp(-a v_k)`.
pub fn soft_min(values: &[f64], alpha: f64) -> Result<f64> {
    let m = values.iter().copied().fold(f64::INFINITY, f64::min);
    if values.is_empty() {
        return Err(Error::Empty);
    }
    let s: f64 = values.iter().map(|v| (-alpha * (v - m)).exp()).sum();
    Ok(m - s.ln() / alpha)
}

/// Smooth hinge `(1/b) log(1 + exp(b v))`.
pub fn hinge(v: f64, beta: f64) -> f64 {
    let z = beta * v;
    (z.max(0.0) + (-z.abs()).exp().ln_1p()) / beta
}

/// Derivative of [`hinge`] with respect to `v` (the logistic function).
pub fn hinge_slope(v: f64, beta: f64) -> f64 {
    let z = beta * v;
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// Soft minimum of `|c_k - p| - r_k` over `items`, together with its gradient
/// with respect to `p`.
fn soft_min_distance<'a>(
    p: &Vec3,
    items: impl Iterator<Item = (&'a Vec3, f64)> + Clone,
    alpha: f64,
) -> (f64, Vec3) {
    let m = items
        .clone()
        .map(|(c, r)| guarded_norm(&(p - c)) - r)
        .fold(f64::INFINITY, f64::min);
    let mut s = 0.0;
    let mut g = Vec3::zeros();
    for (c, r) in items {
        let v = p - c;
        let n = guarded_norm(&v);
        let w = (-alpha * (n - r - m)).exp();
        s += w;
        g += v * (w / n);
    }
    (m - s.ln() / alpha, g / s)
}

fn guarded_norm(v: &Vec3) -> f64 {
    (v.norm_squared() + NORM_GUARD).sqrt()
}

/// Per-sphere smooth union distance and surface clearance.
fn sphere_terms(bm: &BoundaryModel, center: &Vec3, radius: f64) -> (f64, Vec3, f64, Vec3) {
    let (phi_s, dphi) = soft_min_distance(
        center,
        bm.boundary_spheres.iter().map(|b| (&b.center, b.radius)),
        bm.alpha_union,
    );
    let (rho_s, drho) = soft_min_distance(center, bm.surface_points.iter().map(|q| (q, 0.0)), bm.alpha_points);
    (phi_s, dphi, rho_s - radius, drho)
}

/// Boundary objective: sum over object spheres of the union and surface
/// penalties. Accumulates the gradient into `grad` when given.
pub fn boundary_objective(posed: &Posed, bm: &BoundaryModel, mut grad: Option<&mut PoseGrad>) -> f64 {
    let mut total = 0.0;
    for (b, body) in posed.bodies.iter().enumerate() {
        for (k, s) in body.spheres.iter().enumerate() {
            let c = posed.centers[b][k];
            let (phi_s, dphi, rho_s, drho) = sphere_terms(bm, &c, s.radius);
            let u = phi_s + bm.delta_union;
            let q = -rho_s - bm.delta_points;
            total += bm.w_union * hinge(u, bm.beta) + bm.w_points * hinge(q, bm.beta);
            if let Some(pg) = grad.as_deref_mut() {
                let g = dphi * (bm.w_union * hinge_slope(u, bm.beta)) - drho * (bm.w_points * hinge_slope(q, bm.beta));
                pg.add_point(b, &s.center, &g);
            }
        }
    }
    total
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InclusionReport {
    /// Largest over object spheres of the distance from the center to the
    /// nearest boundary-sphere shell (negative inside).
    pub phi_max: f64,
    pub rho_min: f64,
    pub inside: bool,
    /// Per object sphere, body-major.
    pub per_sphere: Vec<bool>,
}

impl InclusionReport {
    pub fn inside_fraction(&self) -> f64 {
        if self.per_sphere.is_empty() {
            return 1.0;
        }
        self.per_sphere.iter().filter(|&&b| b).count() as f64 / self.per_sphere.len() as f64
    }
}

/// Exact (non-smooth) inclusion check.
pub fn hard_inclusion_check(posed: &Posed, bm: &BoundaryModel) -> InclusionReport {
    let mut phi_max = f64::NEG_INFINITY;
    let mut rho_min = f64::INFINITY;
    let mut per_sphere = Vec::new();
    for (b, body) in posed.bodies.iter().enumerate() {
        for k in 0..body.spheres.len() {
            let s = posed.world_sphere(b, k);
            let ph = bm
                .boundary_spheres
                .iter()
                .map(|bs| phi(bs, &s.center))
                .fold(f64::INFINITY, f64::min);
            let rh = bm.surface_points.iter().map(|q| rho(q, &s)).fold(f64::INFINITY, f64::min);
            phi_max = phi_max.max(ph);
            rho_min = rho_min.min(rh);
            per_sphere.push(ph <= 0.0 && rh >= 0.0);
        }
    }
    InclusionReport {
        phi_max,
        rho_min,
        inside: phi_max <= 0.0 && rho_min >= 0.0,
        per_sphere,
    }
}

/// Shapes available as boundary fixtures.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Fixture {
    /// Axis-aligned box centered at the origin.
    Box { size: [f64; 3] },
    /// Truncated cone along +x from `x = 0` (radius `r0`) to `x = length`
    /// (radius `r1`).
    Frustum { length: f64, r0: f64, r1: f64 },
}

impl Region for Fixture {
    fn bbox(&self) -> (Vec3, Vec3) {
        match *self {
            Fixture::Box { size } => {
                let h = Vec3::from(size) * 0.5;
                (-h, h)
            }
            Fixture::Frustum { length, r0, r1 } => {
                let r = r0.max(r1);
                (Vec3::new(0.0, -r, -r), Vec3::new(length, r, r))
            }
        }
    }

    fn inner_distance(&self, p: &Vec3) -> f64 {
        match *self {
            Fixture::Box { size } => {
                let h = Vec3::from(size) * 0.5;
                (0..3).map(|k| h[k] - p[k].abs()).fold(f64::INFINITY, f64::min)
            }
            Fixture::Frustum { length, r0, r1 } => {
                let x = p.x;
                let r = (p.y * p.y + p.z * p.z).sqrt();
                let radius_at = r0 + (r1 - r0) * x / length;
                if x < 0.0 || x > length || r > radius_at {
                    return 0.0;
                }
                // Meridian-plane distance to the two caps and the slanted side.
                let side = {
                    let a = nalgebra::Vector2::new(0.0, r0);
                    let b = nalgebra::Vector2::new(length, r1);
                    let q = nalgebra::Vector2::new(x, r);
                    let ab = b - a;
                    let t = ((q - a).dot(&ab) / ab.norm_squared()).clamp(0.0, 1.0);
                    (q - (a + ab * t)).norm()
                };
                x.min(length - x).min(side)
            }
        }
    }
}

/// Coverage statistics of a generated fixture.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CoverageReport {
    pub n_spheres: usize,
    pub interior_voxels: usize,
    /// Interior voxel centers covered by no boundary sphere.
    pub uncovered_voxels: usize,
}

impl Fixture {
    /// Builds a boundary model by greedy disjoint-ball filling on a voxel
    /// grid with `resolution` cells along the longest axis, plus `n_points`
    /// uniform surface samples.
    pub fn build(&self, resolution: usize, n_points: usize, seed: u64) -> (BoundaryModel, CoverageReport) {
        let (lo, hi) = self.bbox();
        let h = (hi - lo).max() / resolution as f64;
        let spheres = greedy_fill(self, h, usize::MAX, 0.5 * h);
        let points = self.sample_surface(n_points, seed);

        let n = ((hi - lo) / h).map(|v| v.round().max(1.0) as usize);
        let mut interior = 0;
        let mut uncovered = 0;
        for i in 0..n.x {
            for j in 0..n.y {
                for k in 0..n.z {
                    let p = lo + Vec3::new(i as f64 + 0.5, j as f64 + 0.5, k as f64 + 0.5) * h;
                    if self.inner_distance(&p) <= 0.0 {
                        continue;
                    }
                    interior += 1;
                    if !spheres.iter().any(|s| (s.center - p).norm() <= s.radius) {
                        uncovered += 1;
                    }
                }
            }
        }
        if uncovered > 0 {
            log::warn!(
                "boundary fixture leaves {uncovered} of {interior} interior voxels outside every boundary sphere"
            );
        }
        let report = CoverageReport {
            n_spheres: spheres.len(),
            interior_voxels: interior,
            uncovered_voxels: uncovered,
        };
        (BoundaryModel::new(spheres, points), report)
    }

    /// Area-weighted uniform samples on the surface.
    pub fn sample_surface(&self, n: usize, seed: u64) -> Vec<Vec3> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut out = Vec::with_capacity(n);
        match *self {
            Fixture::Box { size } => {
                let [a, b, c] = size;
                let areas = [b * c, b * c, a * c, a * c, a * b, a * b];
                let total: f64 = areas.iter().sum();
                for _ in 0..n {
                    let mut pick = rng.random::<f64>() * total;
                    let mut face = 5;
                    for (f, area) in areas.iter().enumerate() {
                        if pick < *area {
                            face = f;
                            break;
                        }
                        pick -= area;
                    }
                    let axis = face / 2;
                    let sign = if face % 2 == 0 { -1.0 } else { 1.0 };
                    let mut p = Vec3::zeros();
                    for k in 0..3 {
                        p[k] = if k == axis {
                            sign * size[k] * 0.5
                        } else {
                            (rng.random::<f64>() - 0.5) * size[k]
                        };
                    }
                    out.push(p);
                }
            }
            Fixture::Frustum { length, r0, r1 } => {
                let slant = (length * length + (r1 - r0).powi(2)).sqrt();
                let lateral = std::f64::consts::PI * (r0 + r1) * slant;
                let cap0 = std::f64::consts::PI * r0 * r0;
                let cap1 = std::f64::consts::PI * r1 * r1;
                let total = lateral + cap0 + cap1;
                for _ in 0..n {
                    let pick = rng.random::<f64>() * total;
                    let angle = rng.random::<f64>() * std::f64::consts::TAU;
                    let (x, r) = if pick < cap0 {
                        (0.0, r0 * rng.random::<f64>().sqrt())
                    } else if pick < cap0 + cap1 {
                        (length, r1 * rng.random::<f64>().sqrt())
                    } else {
                        // Density along the axis is proportional to the local radius.
                        let u: f64 = rng.random();
                        let t = if (r1 - r0).abs() < 1e-12 {
                            u
                        } else {
                            let (a, b) = (r0, r1 - r0);
                            ((a * a + u * (2.0 * a * b + b * b)).sqrt() - a) / b
                        };
                        (t * length, r0 + (r1 - r0) * t)
                    };
                    out.push(Vec3::new(x, r * angle.cos(), r * angle.sin()));
                }
            }
        }
        out
    }
}
