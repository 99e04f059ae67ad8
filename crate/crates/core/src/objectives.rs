//! Scalar objectives and their weighted sum.
//!
//! Functions taking `grad` accumulate body-point gradients into the
//! [`PoseGrad`] and control-point gradients straight into the slice.

use serde::{Deserialize, Serialize};

use crate::boundary::boundary_objective;
use crate::error::{Error, Result};
use crate::geometry::{PoseGrad, Posed, Vec3};
use crate::physics::{f_cog, f_inertia};
use crate::problem::{ObjectiveWeights, ProblemSpec, RoutingVariant};

/// Exponent cap for the exponential routing term; beyond it the term
/// continues linearly with the slope it has at the cap.
pub const EXP_CAP: f64 = 60.0;

pub type GradSink<'g> = Option<(&'g mut PoseGrad, &'g mut [f64])>;

fn for_each_segment(posed: &Posed, mut f: impl FnMut(usize, usize, Vec3)) {
    for (r, nodes) in posed.nodes.iter().enumerate() {
        for m in 0..nodes.len() - 1 {
            f(r, m, nodes[m + 1] - nodes[m]);
        }
    }
}

/// Pushes `g` onto node `m + 1` and `-g` onto node `m` of route `r`.
fn add_segment_grad(posed: &Posed, pg: &mut PoseGrad, grad: &mut [f64], r: usize, m: usize, g: &Vec3) {
    let src = &posed.sources[r];
    pg.add_node(posed, src[m + 1], g, grad);
    pg.add_node(posed, src[m], &-g, grad);
}

/// Sum of squared segment lengths.
pub fn routing_length_sq(posed: &Posed, mut grad: GradSink) -> f64 {
    let mut total = 0.0;
    for_each_segment(posed, |r, m, d| {
        total += d.norm_squared();
        if let Some((pg, g)) = grad.as_mut() {
            add_segment_grad(posed, pg, g, r, m, &(d * 2.0));
        }
    });
    total
}

/// Sum of segment lengths (reporting metric).
pub fn routing_length_linear(posed: &Posed) -> f64 {
    let mut total = 0.0;
    for_each_segment(posed, |_, _, d| total += d.norm());
    total
}

/// `exp(e) - 1` for `e <= EXP_CAP`, continued linearly above, with slope.
fn capped_expm1(e: f64) -> (f64, f64) {
    if e <= EXP_CAP {
        let v = e.exp();
        (e.exp_m1(), v)
    } else {
        let s = EXP_CAP.exp();
        (s * (1.0 + e - EXP_CAP) - 1.0, s)
    }
}

/// Sum over segments of `exp(gamma |seg|^2) - 1`.
pub fn routing_exponential(posed: &Posed, gamma: f64, mut grad: GradSink) -> f64 {
    let mut total = 0.0;
    for_each_segment(posed, |r, m, d| {
        let (v, slope) = capped_expm1(gamma * d.norm_squared());
        total += v;
        if let Some((pg, g)) = grad.as_mut() {
            add_segment_grad(posed, pg, g, r, m, &(d * (2.0 * gamma * slope)));
        }
    });
    total
}

/// Boltzmann operator `sum v e^{a v} / sum e^{a v}` and its partial
/// derivatives. A negative `alpha` gives the soft minimum.
pub fn boltzmann(values: &[f64], alpha: f64) -> Result<(f64, Vec<f64>)> {
    if values.is_empty() {
        return Err(Error::Empty);
    }
    let m = if alpha >= 0.0 {
        values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    } else {
        values.iter().copied().fold(f64::INFINITY, f64::min)
    };
    let w: Vec<f64> = values.iter().map(|v| (alpha * (v - m)).exp()).collect();
    let s: f64 = w.iter().sum();
    let b = values.iter().zip(&w).map(|(v, w)| v * w).sum::<f64>() / s;
    let d = values
        .iter()
        .zip(&w)
        .map(|(v, w)| w / s * (1.0 + alpha * (v - b)))
        .collect();
    Ok((b, d))
}

/// Smooth bounding-box volume: per axis, Boltzmann max of `c + r` minus
/// Boltzmann min of `c - r` over all body spheres.
pub fn smooth_aabb_volume(posed: &Posed, alpha: f64, grad: Option<&mut PoseGrad>) -> f64 {
    let mut spheres = Vec::new();
    for (b, body) in posed.bodies.iter().enumerate() {
        for (k, s) in body.spheres.iter().enumerate() {
            spheres.push((b, k, posed.centers[b][k], s.radius));
        }
    }
    if spheres.is_empty() {
        return 0.0;
    }
    let mut extent = [0.0; 3];
    let mut partials = Vec::with_capacity(3);
    for axis in 0..3 {
        let hi: Vec<f64> = spheres.iter().map(|s| s.2[axis] + s.3).collect();
        let lo: Vec<f64> = spheres.iter().map(|s| s.2[axis] - s.3).collect();
        let (bh, dh) = boltzmann(&hi, alpha).expect("non-empty");
        let (bl, dl) = boltzmann(&lo, -alpha).expect("non-empty");
        extent[axis] = bh - bl;
        partials.push((dh, dl));
    }
    let vol = extent[0] * extent[1] * extent[2];
    if let Some(pg) = grad {
        for axis in 0..3 {
            let others = extent[(axis + 1) % 3] * extent[(axis + 2) % 3];
            let (dh, dl) = &partials[axis];
            for (i, s) in spheres.iter().enumerate() {
                let mut g = Vec3::zeros();
                g[axis] = others * (dh[i] - dl[i]);
                pg.add_point(s.0, &posed.bodies[s.0].spheres[s.1].center, &g);
            }
        }
    }
    vol
}

/// Exact axis-aligned bounding box `(min, max)` of all body spheres.
pub fn exact_aabb(posed: &Posed) -> (Vec3, Vec3) {
    let mut lo = Vec3::repeat(f64::INFINITY);
    let mut hi = Vec3::repeat(f64::NEG_INFINITY);
    for (b, body) in posed.bodies.iter().enumerate() {
        for (k, s) in body.spheres.iter().enumerate() {
            let c = posed.centers[b][k];
            lo = lo.inf(&(c - Vec3::repeat(s.radius)));
            hi = hi.sup(&(c + Vec3::repeat(s.radius)));
        }
    }
    (lo, hi)
}

pub fn exact_aabb_volume(posed: &Posed) -> f64 {
    let (lo, hi) = exact_aabb(posed);
    (hi - lo).product()
}

/// Bounding box of the underlying primitive shapes when every body carries
/// one, otherwise of the spheres. Analytical optima refer to the shapes.
pub fn shape_aabb(posed: &Posed) -> (Vec3, Vec3) {
    if posed.bodies.iter().any(|b| b.shape.is_none()) {
        return exact_aabb(posed);
    }
    let mut lo = Vec3::repeat(f64::INFINITY);
    let mut hi = Vec3::repeat(f64::NEG_INFINITY);
    for (b, body) in posed.bodies.iter().enumerate() {
        let shape = body.shape.expect("checked");
        let c = shape.centroid();
        for cell in &shape.lattice().filled {
            for corner in 0..8 {
                let p = Vec3::from_fn(|k, _| if corner >> k & 1 == 0 { cell.lo[k] } else { cell.hi[k] });
                let w = posed.world_point(b, &(p - c));
                lo = lo.inf(&w);
                hi = hi.sup(&w);
            }
        }
    }
    (lo, hi)
}

pub fn shape_aabb_volume(posed: &Posed) -> f64 {
    let (lo, hi) = shape_aabb(posed);
    (hi - lo).product()
}

/// Mean distance over sphere-center pairs on different objects.
pub fn mean_pairwise_distance(posed: &Posed, grad: Option<&mut PoseGrad>) -> Result<f64> {
    let n = posed.bodies.len();
    if n < 2 {
        return Err(Error::TooFewObjects(n));
    }
    let counts: Vec<usize> = posed.bodies.iter().map(|b| b.spheres.len()).collect();
    let s = crate::constraints::pair_count(&counts) as f64;
    let mut total = 0.0;
    let mut pg = grad;
    for i in 0..n {
        for j in i + 1..n {
            for (mu, ca) in posed.centers[i].iter().enumerate() {
                for (nu, cb) in posed.centers[j].iter().enumerate() {
                    let v = ca - cb;
                    let d = (v.norm_squared() + 1e-16).sqrt();
                    total += d;
                    if let Some(pg) = pg.as_deref_mut() {
                        let u = v / (d * s);
                        pg.add_point(i, &posed.bodies[i].spheres[mu].center, &u);
                        pg.add_point(j, &posed.bodies[j].spheres[nu].center, &-u);
                    }
                }
            }
        }
    }
    Ok(total / s)
}

/// Unweighted objective terms.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Breakdown {
    pub routing: f64,
    pub boundary: f64,
    pub cog: f64,
    pub inertia: f64,
    pub volume: f64,
    pub mean_distance: f64,
}

impl Breakdown {
    /// Weighted sum; terms with zero weight are skipped.
    pub fn weighted_sum(&self, w: &ObjectiveWeights) -> f64 {
        let mut total = 0.0;
        for (wi, t) in [
            (w.routing, self.routing),
            (w.boundary, self.boundary),
            (w.cog, self.cog),
            (w.inertia, self.inertia),
            (w.volume, self.volume),
            (w.mean_distance, self.mean_distance),
        ] {
            if wi != 0.0 {
                total += wi * t;
            }
        }
        total
    }
}

/// Weighted objective of `spec` at a posed configuration. Terms with zero
/// weight are evaluated only when `all_terms` is set (for reporting). When
/// `grad` is given it receives the full gradient.
pub fn evaluate(spec: &ProblemSpec, posed: &Posed, all_terms: bool, grad: Option<&mut [f64]>) -> Result<(f64, Breakdown)> {
    let w = &spec.weights;
    let mut br = Breakdown::default();
    let want = |wi: f64| all_terms || wi != 0.0;
    let mut pg = posed.new_grad();
    let with_grad = grad.is_some();
    let n = if with_grad { posed.layout.dim() } else { 0 };
    let mut tmp = vec![0.0; n];
    let mut acc = vec![0.0; n];

    if want(w.routing) {
        let g_on = with_grad && w.routing != 0.0;
        let sink = if g_on { Some((&mut pg, &mut tmp[..])) } else { None };
        br.routing = match w.routing_variant {
            RoutingVariant::Quadratic => routing_length_sq(posed, sink),
            RoutingVariant::Exponential => routing_exponential(posed, w.gamma_exp, sink),
        };
        if g_on {
            scale_into(&mut pg, &mut tmp, &mut acc, posed, w.routing);
        }
    }
    if let Some(bm) = &spec.boundary {
        if want(w.boundary) {
            let g_on = with_grad && w.boundary != 0.0;
            br.boundary = boundary_objective(posed, bm, if g_on { Some(&mut pg) } else { None });
            if g_on {
                scale_into(&mut pg, &mut tmp, &mut acc, posed, w.boundary);
            }
        }
    }
    if want(w.cog) {
        let g_on = with_grad && w.cog != 0.0;
        br.cog = f_cog(posed, &spec.cog_target, if g_on { Some(&mut pg) } else { None })?;
        if g_on {
            scale_into(&mut pg, &mut tmp, &mut acc, posed, w.cog);
        }
    }
    if want(w.inertia) {
        let g_on = with_grad && w.inertia != 0.0;
        br.inertia = f_inertia(posed, &w.inertia_axes, if g_on { Some(&mut pg) } else { None })?;
        if g_on {
            scale_into(&mut pg, &mut tmp, &mut acc, posed, w.inertia);
        }
    }
    if want(w.volume) {
        let g_on = with_grad && w.volume != 0.0;
        br.volume = smooth_aabb_volume(posed, w.alpha_volume, if g_on { Some(&mut pg) } else { None });
        if g_on {
            scale_into(&mut pg, &mut tmp, &mut acc, posed, w.volume);
        }
    }
    if want(w.mean_distance) && posed.bodies.len() >= 2 {
        let g_on = with_grad && w.mean_distance != 0.0;
        br.mean_distance = mean_pairwise_distance(posed, if g_on { Some(&mut pg) } else { None })?;
        if g_on {
            scale_into(&mut pg, &mut tmp, &mut acc, posed, w.mean_distance);
        }
    } else if w.mean_distance != 0.0 {
        return Err(Error::TooFewObjects(posed.bodies.len()));
    }
    if let Some(g) = grad {
        for (o, a) in g.iter_mut().zip(&acc) {
            *o += a;
        }
    }
    Ok((br.weighted_sum(w), br))
}

/// Flushes one term's accumulated gradient into `out` with weight `w` and
/// resets the accumulators.
fn scale_into(pg: &mut PoseGrad, tmp: &mut [f64], out: &mut [f64], posed: &Posed, w: f64) {
    pg.scatter(posed, tmp);
    for (o, t) in out.iter_mut().zip(tmp.iter_mut()) {
        *o += w * *t;
        *t = 0.0;
    }
    *pg = posed.new_grad();
}

/// Weighted objective and breakdown with every term evaluated.
pub fn total_objective(spec: &ProblemSpec, x: &[f64]) -> Result<(f64, Breakdown)> {
    let posed = spec.posed(x)?;
    evaluate(spec, &posed, true, None)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{Body, Mat3, PortRef, Route, Sphere};
    use approx::assert_relative_eq;

    fn ball(r: f64, ports: Vec<Vec3>) -> Body {
        Body {
            id: "b".into(),
            spheres: vec![Sphere::new(Vec3::zeros(), r)],
            ports,
            mass: 1.0,
            cog_local: Vec3::zeros(),
            inertia_local: Mat3::zeros(),
            shape: None,
        }
    }

    fn at(xs: &[[f64; 3]]) -> Vec<f64> {
        xs.iter().flat_map(|p| [0.0, 0.0, 0.0, p[0], p[1], p[2]]).collect()
    }

    fn route(n_cp: usize) -> Route {
        Route::new("r", PortRef { body: 0, port: 0 }, PortRef { body: 1, port: 0 }, n_cp)
    }

    #[test]
    fn routing_examples() {
        let bodies = [ball(0.1, vec![Vec3::zeros()]), ball(0.1, vec![Vec3::zeros()])];
        let routes = [route(0)];
        let x = at(&[[0.0, 0.0, 0.0], [2.0, 0.0, 0.0]]);
        let p = Posed::new(&bodies, &routes, &x).unwrap();
        assert_eq!(routing_length_sq(&p, None), 4.0);
        assert_eq!(routing_length_linear(&p), 2.0);

        let routes = [route(1)];
        let mut x = at(&[[0.0, 0.0, 0.0], [2.0, 0.0, 0.0]]);
        x.extend([1.0, 0.0, 0.0]);
        let p = Posed::new(&bodies, &routes, &x).unwrap();
        assert_eq!(routing_length_sq(&p, None), 2.0);
        assert_relative_eq!(routing_exponential(&p, 1.0, None), 2.0 * (1f64.exp() - 1.0), epsilon = 1e-14);

        let x = at(&[[0.0, 0.0, 0.0], [0.0, 0.0, 0.0]]);
        let routes = [route(0)];
        let p = Posed::new(&bodies, &routes, &x).unwrap();
        assert_eq!(routing_exponential(&p, 1.0, None), 0.0);
    }

    #[test]
    fn exponential_cap_continues_linearly() {
        let (v, s) = capped_expm1(EXP_CAP + 2.0);
        assert!(v.is_finite());
        assert_relative_eq!(v, EXP_CAP.exp() * 3.0 - 1.0, max_relative = 1e-14);
        assert_eq!(s, EXP_CAP.exp());
    }

    #[test]
    fn aabb_examples() {
        let bodies = [ball(0.5, vec![])];
        let p = Posed::new(&bodies, &[], &at(&[[3.0, -1.0, 2.0]])).unwrap();
        assert_relative_eq!(smooth_aabb_volume(&p, 50.0, None), 1.0, epsilon = 1e-15);

        let bodies = [ball(0.5, vec![]), ball(0.5, vec![])];
        let p = Posed::new(&bodies, &[], &at(&[[0.0; 3], [1.0, 0.0, 0.0]])).unwrap();
        assert_relative_eq!(exact_aabb_volume(&p), 2.0, epsilon = 1e-15);
        assert!((smooth_aabb_volume(&p, 50.0, None) - 2.0).abs() <= 1e-3);
    }

    #[test]
    fn boltzmann_is_a_convex_combination() {
        let v = [0.3, -1.0, 2.5, 2.4];
        let (b, _) = boltzmann(&v, 10.0).unwrap();
        assert!(b <= 2.5 && b >= -1.0);
        let (b, _) = boltzmann(&v, -10.0).unwrap();
        assert!(b >= -1.0);
    }

    #[test]
    fn mean_distance_examples() {
        let bodies = [ball(0.5, vec![]), ball(0.5, vec![])];
        let p = Posed::new(&bodies, &[], &at(&[[0.0; 3], [0.0, 5.0, 0.0]])).unwrap();
        assert_relative_eq!(mean_pairwise_distance(&p, None).unwrap(), 5.0, epsilon = 1e-12);
        let one = [ball(0.5, vec![])];
        let p = Posed::new(&one, &[], &at(&[[0.0; 3]])).unwrap();
        assert!(matches!(mean_pairwise_distance(&p, None), Err(Error::TooFewObjects(1))));
    }

    #[test]
    fn total_with_zero_weights_is_zero() {
        let bodies = vec![ball(0.5, vec![Vec3::zeros()]), ball(0.5, vec![Vec3::zeros()])];
        let spec = ProblemSpec::new("t", bodies, vec![route(0)]);
        let x = at(&[[0.0; 3], [2.0, 0.0, 0.0]]);
        let (f, br) = total_objective(&spec, &x).unwrap();
        assert_eq!(f, 0.0);
        assert_eq!(br.routing, 4.0);

        let mut spec = spec;
        spec.weights.routing = 1.0;
        let (f, _) = total_objective(&spec, &x).unwrap();
        assert_eq!(f, 4.0);
    }
}
