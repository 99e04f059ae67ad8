//! Analytical target cascading for placement-only problems.
//!
//! The system level optimizes all poses `x_u` with the packing objective,
//! the full constraint set and a coupling term `(pi/2) |x_u - x_L|^2`. Each
//! subsystem moves one body's pose `x_L,i` against targets `gamma_i = x_u,i`
//! with the other bodies held at their targets, minimizing
//! `lambda^T (x_L - gamma) + (rho/2) |x_L - gamma|^2 + 1e-4 |x_L|^2` subject
//! to the constraints involving that body.

use std::collections::BTreeSet;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{finalize, jitter_coincident, PackingNlp, SolveReport};
use crate::constraints::PairSelection;
use crate::error::{Error, Result};
use crate::geometry::POSE_DIM;
use crate::problem::ProblemSpec;
use crate::solver::{minimize, SolverOptions, Termination};

/// Weight of the subsystem regularizer `|x_L|^2`.
pub const SUBSYSTEM_REG: f64 = 1e-4;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AtcOptions {
    pub pi0: f64,
    pub pi_growth: f64,
    pub pi_max: f64,
    pub rho0: f64,
    pub rho_growth: f64,
    pub rho_max: f64,
    pub tol: f64,
    pub max_iterations: usize,
    pub jobs: usize,
}

impl Default for AtcOptions {
    fn default() -> Self {
        Self {
            pi0: 1.0,
            pi_growth: 1.5,
            pi_max: 1e4,
            rho0: 1.0,
            rho_growth: 2.0,
            rho_max: 1e5,
            tol: 1e-4,
            max_iterations: 50,
            jobs: 1,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct AtcSummary {
    pub iterations: usize,
    /// `|x_u - x_L|_inf` after each iteration.
    pub gap_history: Vec<f64>,
    /// Coupling weight used in each system solve.
    pub pi_history: Vec<f64>,
    pub final_gap: f64,
    pub converged: bool,
}

fn gap(xu: &[f64], xl: &[f64]) -> f64 {
    xu.iter().zip(xl).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
}

pub fn atc_solve(spec: &ProblemSpec, x0: &[f64], opts: &AtcOptions, solver: &SolverOptions) -> Result<SolveReport> {
    if !spec.routes.is_empty() {
        return Err(Error::Unsupported("analytical target cascading handles placement-only problems".into()));
    }
    spec.validate()?;
    spec.layout().check(x0)?;
    let n = spec.bodies.len();
    let dim = spec.dim();
    let mut xu = x0.to_vec();
    let jitter = jitter_coincident(spec, &mut xu);
    let mut xl = xu.clone();
    let mut lambda = vec![0.0; dim];
    let mut pi = opts.pi0;
    let mut rho = opts.rho0;
    let mut summary = AtcSummary::default();
    let mut last = None;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(opts.jobs.max(1))
        .build()
        .map_err(|e| Error::Unsupported(format!("thread pool: {e}")))?;

    for it in 0..opts.max_iterations.max(1) {
        // System level.
        let xl_fixed = xl.clone();
        let coupling = move |x: &[f64], grad: Option<&mut [f64]>| -> f64 {
            let mut s = 0.0;
            let mut grad = grad;
            for i in 0..x.len() {
                let d = x[i] - xl_fixed[i];
                s += d * d;
                if let Some(g) = grad.as_deref_mut() {
                    g[i] += pi * d;
                }
            }
            0.5 * pi * s
        };
        let nlp = if n > 1 {
            PackingNlp::new(spec, &PairSelection::All).with_extra(&coupling, true)
        } else {
            PackingNlp::new(spec, &PairSelection::All)
        };
        let r = minimize(&nlp, &xu, solver);
        xu = r.x.clone();
        last = Some(r);
        summary.pi_history.push(pi);

        // Subsystems.
        if n > 1 {
            let gamma = xu.clone();
            let solve_sub = |i: usize| -> Vec<f64> {
                let o = i * POSE_DIM;
                let free: Vec<usize> = (o..o + POSE_DIM).collect();
                let pairs: BTreeSet<(usize, usize)> = (0..n).filter(|&j| j != i).map(|j| (i.min(j), i.max(j))).collect();
                let lam = &lambda[o..o + POSE_DIM];
                let g = &gamma[o..o + POSE_DIM];
                let term = |x: &[f64], grad: Option<&mut [f64]>| -> f64 {
                    let mut s = 0.0;
                    let mut grad = grad;
                    for k in 0..POSE_DIM {
                        let v = x[o + k];
                        let d = v - g[k];
                        s += lam[k] * d + 0.5 * rho * d * d + SUBSYSTEM_REG * v * v;
                        if let Some(gr) = grad.as_deref_mut() {
                            gr[o + k] += lam[k] + rho * d + 2.0 * SUBSYSTEM_REG * v;
                        }
                    }
                    s
                };
                let sub = PackingNlp::restricted(spec, &PairSelection::Only(pairs), free, gamma.clone())
                    .with_extra(&term, false);
                let start = sub.reduce(&xl);
                let r = minimize(&sub, &start, solver);
                r.x
            };
            let parts: Vec<Vec<f64>> = pool.install(|| (0..n).into_par_iter().map(solve_sub).collect());
            for (i, p) in parts.into_iter().enumerate() {
                xl[i * POSE_DIM..(i + 1) * POSE_DIM].copy_from_slice(&p);
            }
            for k in 0..dim {
                lambda[k] += rho * (xl[k] - gamma[k]);
            }
        } else {
            xl.copy_from_slice(&xu);
        }

        let g = gap(&xu, &xl);
        summary.gap_history.push(g);
        summary.iterations = it + 1;
        log::debug!("atc iteration {}: gap {g:.3e}, pi {pi:.3e}, rho {rho:.3e}", it + 1);
        if g <= opts.tol {
            summary.converged = true;
            break;
        }
        pi = (pi * opts.pi_growth).min(opts.pi_max);
        rho = (rho * opts.rho_growth).min(opts.rho_max);
    }
    summary.final_gap = *summary.gap_history.last().unwrap_or(&0.0);
    let r = last.expect("at least one iteration");
    let mut rep = finalize(spec, xu, Some(&r), solver.tol_feas)?;
    rep.converged = summary.converged && rep.feasible;
    rep.termination = if rep.converged {
        Termination::Converged
    } else {
        Termination::OuterLimit
    };
    rep.jitter_events = jitter;
    rep.atc = Some(summary);
    Ok(rep)
}
