//! Multi-start loop: sample a starting point, refine it with the NLP solver,
//! keep the best.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::init::{restart_rng, InitMethod};
use super::{solve_from, SolveReport};
use crate::constraints::PairSelection;
use crate::error::{Error, Result};
use crate::problem::ProblemSpec;
use crate::solver::SolverOptions;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RestartRecord {
    pub index: usize,
    pub x0: Vec<f64>,
    pub f: f64,
    pub max_violation: f64,
    pub feasible: bool,
    pub converged: bool,
    pub aabb_volume: f64,
    pub routing_length: f64,
    #[serde(skip)]
    pub wall_time: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NestedResult {
    pub best: SolveReport,
    pub best_index: usize,
    pub restarts: Vec<RestartRecord>,
}

/// Orders reports by feasibility first, then objective (feasible ones) or
/// violation (infeasible ones), then restart index.
fn better(a: (&SolveReport, usize), b: (&SolveReport, usize)) -> bool {
    let (ra, ia) = a;
    let (rb, ib) = b;
    if ra.feasible != rb.feasible {
        return ra.feasible;
    }
    let (ka, kb) = if ra.feasible {
        (ra.f, rb.f)
    } else {
        (ra.max_violation, rb.max_violation)
    };
    match ka.total_cmp(&kb) {
        std::cmp::Ordering::Less => true,
        std::cmp::Ordering::Greater => false,
        std::cmp::Ordering::Equal => ia < ib,
    }
}

/// Runs `n_restarts` independent solves on `jobs` threads. Restart `i`
/// draws its starting point from a stream derived from `(seed, i)`, so the
/// result does not depend on `jobs`.
pub fn nested_solve(
    spec: &ProblemSpec,
    init: &InitMethod,
    n_restarts: usize,
    seed: u64,
    jobs: usize,
    opts: &SolverOptions,
) -> Result<NestedResult> {
    nested_solve_with(spec, init, n_restarts, seed, jobs, |x0| {
        solve_from(spec, x0, opts, &PairSelection::All)
    })
}

/// Multi-start loop around an arbitrary local solve.
pub fn nested_solve_with<F>(
    spec: &ProblemSpec,
    init: &InitMethod,
    n_restarts: usize,
    seed: u64,
    jobs: usize,
    local: F,
) -> Result<NestedResult>
where
    F: Fn(&[f64]) -> Result<SolveReport> + Sync,
{
    if n_restarts == 0 {
        return Err(Error::invalid("restarts", "must be at least 1"));
    }
    spec.validate()?;
    let run = |i: usize| -> Result<(SolveReport, Vec<f64>)> {
        let mut rng = restart_rng(seed, i);
        let x0 = init.sample(spec, &mut rng);
        let rep = local(&x0)?;
        log::info!(
            "restart {i}: f = {:.6e}, violation = {:.2e}, converged = {}",
            rep.f,
            rep.max_violation,
            rep.converged
        );
        Ok((rep, x0))
    };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| Error::Unsupported(format!("thread pool: {e}")))?;
    let results: Vec<Result<(SolveReport, Vec<f64>)>> = pool.install(|| (0..n_restarts).into_par_iter().map(run).collect());

    let mut restarts = Vec::with_capacity(n_restarts);
    let mut reports = Vec::with_capacity(n_restarts);
    for (i, r) in results.into_iter().enumerate() {
        let (rep, x0) = r?;
        restarts.push(RestartRecord {
            index: i,
            x0,
            f: rep.f,
            max_violation: rep.max_violation,
            feasible: rep.feasible,
            converged: rep.converged,
            aabb_volume: rep.metrics.aabb_volume,
            routing_length: rep.metrics.routing_length,
            wall_time: rep.wall_time,
        });
        reports.push(rep);
    }
    let mut best = 0;
    for i in 1..reports.len() {
        if better((&reports[i], i), (&reports[best], best)) {
            best = i;
        }
    }
    Ok(NestedResult {
        best: reports.swap_remove(best),
        best_index: best,
        restarts,
    })
}
