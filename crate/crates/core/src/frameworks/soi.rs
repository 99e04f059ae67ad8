//! Sphere-of-influence active set: pairs start with one row on their
//! enclosing spheres and switch to detailed sphere-sphere rows once their
//! enclosing spheres touch.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use super::{finalize, jitter_coincident, PackingNlp, SolveReport};
use crate::constraints::{enclosing_sphere, sphere_clearance, PairSelection};
use crate::error::{Error, Result};
use crate::geometry::{Posed, Sphere};
use crate::problem::ProblemSpec;
use crate::solver::{minimize, SolverOptions};

/// Enclosing-sphere clearance below which a pair counts as engaged.
pub const ENGAGE_MARGIN: f64 = 1e-3;

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SoiSummary {
    /// Per body, local frame.
    pub enclosing: Vec<Sphere>,
    pub active_pairs: Vec<(usize, usize)>,
    /// Detailed rows per active pair, in `active_pairs` order.
    pub detailed_rows: Vec<usize>,
    /// Size of the active set after each solve.
    pub active_history: Vec<usize>,
    /// Largest number of constraint rows used in any solve.
    pub max_rows: usize,
}

/// Pairs whose enclosing spheres are within the engagement margin or whose
/// detailed clearance is violated.
fn engaged_pairs(posed: &Posed, enclosing: &[Sphere], tol: f64) -> BTreeSet<(usize, usize)> {
    let n = posed.bodies.len();
    let world: Vec<Sphere> = (0..n)
        .map(|b| Sphere::new(posed.world_point(b, &enclosing[b].center), enclosing[b].radius))
        .collect();
    let mut out = BTreeSet::new();
    for i in 0..n {
        for j in i + 1..n {
            if sphere_clearance(&world[i], &world[j]) <= ENGAGE_MARGIN {
                out.insert((i, j));
                continue;
            }
            let violated = (0..posed.bodies[i].spheres.len()).any(|mu| {
                (0..posed.bodies[j].spheres.len())
                    .any(|nu| sphere_clearance(&posed.world_sphere(i, mu), &posed.world_sphere(j, nu)) < -tol)
            });
            if violated {
                out.insert((i, j));
            }
        }
    }
    out
}

pub fn soi_solve(spec: &ProblemSpec, x0: &[f64], solver: &SolverOptions) -> Result<SolveReport> {
    if !spec.routes.is_empty() {
        return Err(Error::Unsupported("sphere-of-influence solving handles placement-only problems".into()));
    }
    spec.validate()?;
    spec.layout().check(x0)?;
    let n = spec.bodies.len();
    let enclosing: Vec<Sphere> = spec.bodies.iter().map(enclosing_sphere).collect();
    let mut x = x0.to_vec();
    let jitter = jitter_coincident(spec, &mut x);
    let mut active: BTreeSet<(usize, usize)> = BTreeSet::new();
    let mut summary = SoiSummary {
        enclosing: enclosing.clone(),
        ..SoiSummary::default()
    };
    let n_pairs = n * (n.saturating_sub(1)) / 2;
    let r = loop {
        let selection = PairSelection::Soi {
            active: active.clone(),
            enclosing: enclosing.clone(),
        };
        let nlp = PackingNlp::new(spec, &selection);
        summary.max_rows = summary.max_rows.max(nlp.plan().n_raw());
        let r = minimize(&nlp, &x, solver);
        x = r.x.clone();
        summary.active_history.push(active.len());

        let posed = spec.posed(&x)?;
        let engaged = engaged_pairs(&posed, &enclosing, solver.tol_feas);
        let before = active.len();
        active.extend(engaged);
        log::debug!("soi: {} of {n_pairs} pairs active", active.len());
        if active.len() == before || before == n_pairs {
            break r;
        }
    };
    let counts = spec.sphere_counts();
    summary.active_pairs = active.iter().copied().collect();
    summary.detailed_rows = active.iter().map(|&(i, j)| counts[i] * counts[j]).collect();
    let mut rep = finalize(spec, x, Some(&r), solver.tol_feas)?;
    rep.converged = r.converged && rep.feasible;
    rep.jitter_events = jitter;
    rep.soi = Some(summary);
    Ok(rep)
}
