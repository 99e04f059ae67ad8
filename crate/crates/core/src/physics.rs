//! Global center of gravity and inertia about it.

use crate::error::{Error, Result};
use crate::geometry::{Mat3, PoseGrad, Posed, Vec3};

#[derive(Clone, Debug, PartialEq)]
pub struct MassState {
    pub total_mass: f64,
    pub cog: Vec3,
    /// World-frame CoG of each body.
    pub body_cogs: Vec<Vec3>,
    /// Inertia about `cog`, world axes.
    pub inertia: Mat3,
}

pub fn mass_state(posed: &Posed) -> Result<MassState> {
    let total_mass: f64 = posed.bodies.iter().map(|b| b.mass).sum();
    if !(total_mass > 0.0) {
        return Err(Error::ZeroMass);
    }
    let body_cogs: Vec<Vec3> = posed
        .bodies
        .iter()
        .enumerate()
        .map(|(i, b)| posed.world_point(i, &b.cog_local))
        .collect();
    let mut cog = Vec3::zeros();
    for (b, p) in posed.bodies.iter().zip(&body_cogs) {
        cog += p * b.mass;
    }
    cog /= total_mass;
    let mut inertia = Mat3::zeros();
    for (i, b) in posed.bodies.iter().enumerate() {
        let r = &posed.jets[i].r;
        let d = body_cogs[i] - cog;
        inertia += r * b.inertia_local * r.transpose();
        inertia += parallel_axis(b.mass, &d);
    }
    Ok(MassState {
        total_mass,
        cog,
        body_cogs,
        inertia,
    })
}

/// Inertia of a point mass at offset `d`: `m (|d|^2 I - d d^T)`.
pub fn parallel_axis(mass: f64, d: &Vec3) -> Mat3 {
    (Mat3::identity() * d.norm_squared() - d * d.transpose()) * mass
}

pub fn global_cog(posed: &Posed) -> Result<Vec3> {
    Ok(mass_state(posed)?.cog)
}

pub fn inertia_about_global_cog(posed: &Posed) -> Result<Mat3> {
    Ok(mass_state(posed)?.inertia)
}

/// `|p_G - target|^2`, with its gradient accumulated into `grad`.
pub fn f_cog(posed: &Posed, target: &Vec3, grad: Option<&mut PoseGrad>) -> Result<f64> {
    let ms = mass_state(posed)?;
    let e = ms.cog - target;
    if let Some(pg) = grad {
        for (i, b) in posed.bodies.iter().enumerate() {
            pg.add_point(i, &b.cog_local, &(e * (2.0 * b.mass / ms.total_mass)));
        }
    }
    Ok(e.norm_squared())
}

/// `w_x I_xx + w_y I_yy + w_z I_zz`, with its gradient accumulated into
/// `grad`.
pub fn f_inertia(posed: &Posed, w: &[f64; 3], grad: Option<&mut PoseGrad>) -> Result<f64> {
    let ms = mass_state(posed)?;
    let value = w[0] * ms.inertia[(0, 0)] + w[1] * ms.inertia[(1, 1)] + w[2] * ms.inertia[(2, 2)];
    if let Some(pg) = grad {
        let wsum = w[0] + w[1] + w[2];
        let wv = Vec3::new(w[0], w[1], w[2]);
        for (i, b) in posed.bodies.iter().enumerate() {
            // Parallel-axis part: d/dp_i of sum_a w_a m_j (|d_j|^2 - d_ja^2)
            // reduces to 2 m_i (wsum - w_a) d_ia because sum_j m_j d_j = 0.
            let d = ms.body_cogs[i] - ms.cog;
            let g = Vec3::from_fn(|a, _| 2.0 * b.mass * (wsum - wv[a]) * d[a]);
            pg.add_point(i, &b.cog_local, &g);
            // Rotated body tensor: d/dangle_k of sum_a w_a (R I R^T)_aa.
            let jet = &posed.jets[i];
            let ib = &b.inertia_local;
            for k in 0..3 {
                let m = jet.d[k] * ib * jet.r.transpose();
                let s = 2.0 * (w[0] * m[(0, 0)] + w[1] * m[(1, 1)] + w[2] * m[(2, 2)]);
                pg.add_angle(i, k, s);
            }
        }
    }
    Ok(value)
}
