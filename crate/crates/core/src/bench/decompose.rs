//! Greedy disjoint-ball decomposition of solids.

use rayon::prelude::*;

use crate::bench::shapes::Primitive;
use crate::error::{Error, Result};
use crate::geometry::{Body, Mat3, Sphere, Vec3};

/// Grid points per unit length used when decomposing primitives.
pub const RESOLUTION_PER_UNIT: f64 = 48.0;

/// A solid that can report how far an interior point is from its surface.
pub trait Region: Sync {
    fn bbox(&self) -> (Vec3, Vec3);
    /// Distance from `p` to the complement of the region; zero outside.
    fn inner_distance(&self, p: &Vec3) -> f64;
}

/// Repeatedly places the largest ball centered on a grid node (spacing `h`,
/// anchored at the region's minimum corner) that fits inside the region and
/// is disjoint from the balls already placed. Stops after `max_n` balls or
/// when no ball of radius at least `min_radius` fits. Ties go to the lowest
/// grid index (x-major), which keeps the result deterministic.
pub fn greedy_fill<R: Region + ?Sized>(region: &R, h: f64, max_n: usize, min_radius: f64) -> Vec<Sphere> {
    let (lo, hi) = region.bbox();
    let n: Vec<usize> = (0..3).map(|k| ((hi[k] - lo[k]) / h).round() as usize + 1).collect();
    let point = |idx: usize| {
        let iz = idx % n[2];
        let iy = (idx / n[2]) % n[1];
        let ix = idx / (n[1] * n[2]);
        lo + Vec3::new(ix as f64, iy as f64, iz as f64) * h
    };
    let total = n[0] * n[1] * n[2];
    let mut cap: Vec<f64> = (0..total).into_par_iter().map(|i| region.inner_distance(&point(i))).collect();
    let mut out = Vec::new();
    while out.len() < max_n {
        let mut best = 0;
        for (i, &c) in cap.iter().enumerate() {
            if c > cap[best] {
                best = i;
            }
        }
        let r = cap[best];
        if !(r >= min_radius) || r <= 0.0 {
            break;
        }
        let c = point(best);
        cap.par_iter_mut().enumerate().for_each(|(i, v)| {
            if *v > 0.0 {
                *v = v.min((point(i) - c).norm() - r);
            }
        });
        out.push(Sphere::new(c, r));
    }
    out
}

/// Decomposes a primitive into `n_spheres` disjoint balls expressed in the
/// body's local frame (origin at the shape centroid). Returns fewer balls,
/// with a warning, when the grid runs out of room.
pub fn decompose_spheres(shape: &Primitive, n_spheres: usize) -> Result<Vec<Sphere>> {
    if n_spheres == 0 {
        return Err(Error::invalid("n_spheres", "must be at least 1"));
    }
    let lattice = shape.lattice();
    let (lo, hi) = lattice.bbox();
    let h = 1.0 / RESOLUTION_PER_UNIT;
    if (hi - lo).min() < 2.0 * h {
        return Err(Error::invalid("shape", "too small for the decomposition grid"));
    }
    let centroid = lattice.centroid();
    let mut balls = greedy_fill(&lattice, h, n_spheres, 0.0);
    if balls.len() < n_spheres {
        log::warn!(
            "{} fits only {} of {} requested spheres at the grid resolution",
            shape.name(),
            balls.len(),
            n_spheres
        );
    }
    for b in &mut balls {
        b.center -= centroid;
    }
    Ok(balls)
}

/// Mass properties of a sphere cloud of total mass `mass` with uniform
/// density: center of gravity and inertia tensor about it.
pub fn sphere_cloud_mass_properties(spheres: &[Sphere], mass: f64) -> (Vec3, Mat3) {
    let vol: f64 = spheres.iter().map(Sphere::volume).sum();
    let density = mass / vol;
    let mut cog = Vec3::zeros();
    for s in spheres {
        cog += s.center * (density * s.volume());
    }
    cog /= mass;
    let mut inertia = Mat3::zeros();
    for s in spheres {
        let m = density * s.volume();
        let d = s.center - cog;
        inertia += Mat3::identity() * (0.4 * m * s.radius * s.radius);
        inertia += (Mat3::identity() * d.norm_squared() - d * d.transpose()) * m;
    }
    (cog, inertia)
}

/// Builds a body with unit density (mass equals the shape volume) and no
/// ports.
pub fn decompose_primitive(id: impl Into<String>, shape: Primitive, n_spheres: usize) -> Result<Body> {
    let spheres = decompose_spheres(&shape, n_spheres)?;
    let mass = shape.volume();
    let (cog_local, inertia_local) = sphere_cloud_mass_properties(&spheres, mass);
    Ok(Body {
        id: id.into(),
        spheres,
        ports: Vec::new(),
        mass,
        cog_local,
        inertia_local,
        shape: Some(shape),
    })
}

/// Fraction of the shape volume occupied by the balls.
pub fn fill_ratio(shape: &Primitive, spheres: &[Sphere]) -> f64 {
    spheres.iter().map(Sphere::volume).sum::<f64>() / shape.volume()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn cube_single_ball_is_inscribed() {
        let s = decompose_spheres(&Primitive::Cube { side: 2.0 }, 1).unwrap();
        assert_eq!(s.len(), 1);
        assert_relative_eq!(s[0].radius, 1.0, epsilon = 1e-12);
        assert!(s[0].center.norm() < 1e-12);
    }

    #[test]
    fn cuboid_fill_ratio() {
        let shape = Primitive::Cuboid { w: 1.0, h: 1.0, d: 2.0 };
        let s = decompose_spheres(&shape, 20).unwrap();
        assert_eq!(s.len(), 20);
        assert!(fill_ratio(&shape, &s) >= 0.35);
        // The first two balls are the two inscribed unit-diameter balls.
        assert_relative_eq!(s[0].radius, 0.5, epsilon = 1e-12);
        assert_relative_eq!(s[1].radius, 0.5, epsilon = 1e-12);
    }

    #[test]
    fn balls_are_disjoint_and_inside() {
        for shape in [Primitive::LShape, Primitive::DoubleLShape, Primitive::Cube { side: 1.5 }] {
            let lattice = shape.lattice();
            let c = shape.centroid();
            let s = decompose_spheres(&shape, 25).unwrap();
            for (i, a) in s.iter().enumerate() {
                assert!(lattice.inner_distance(&(a.center + c)) >= a.radius - 1e-9);
                for b in &s[i + 1..] {
                    assert!((a.center - b.center).norm() - a.radius - b.radius >= -1e-9);
                }
            }
        }
    }

    #[test]
    fn point_masses_parallel_axis() {
        // Two tiny equal spheres at +-y approach the point-mass tensor.
        let r = 1e-4;
        let s = [Sphere::new(Vec3::new(0.0, 1.0, 0.0), r), Sphere::new(Vec3::new(0.0, -1.0, 0.0), r)];
        let (cog, i) = sphere_cloud_mass_properties(&s, 2.0);
        assert!(cog.norm() < 1e-15);
        assert_relative_eq!(i, Mat3::from_diagonal(&Vec3::new(2.0, 0.0, 2.0)), epsilon = 1e-7);
    }
}
