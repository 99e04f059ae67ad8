//! Solution strategies built on the NLP solver: nested restarts, analytical
//! target cascading and sphere-of-influence active sets.

pub mod atc;
pub mod init;
pub mod nested;
pub mod soi;

use serde::{Deserialize, Serialize};

use crate::constraints::{full_violation, ConstraintPlan, PairSelection};
use crate::error::Result;
use crate::geometry::POSE_DIM;
use crate::objectives::{evaluate, exact_aabb_volume, routing_length_linear, shape_aabb_volume, Breakdown};
use crate::problem::ProblemSpec;
use crate::solver::{minimize, NlpProblem, NlpReport, SolverOptions, Termination};

pub use atc::{atc_solve, AtcOptions, AtcSummary};
pub use init::{init_equally_spaced, init_genetic, init_random, FitnessMode, GaOptions, InitMethod};
pub use nested::{nested_solve, nested_solve_with, NestedResult, RestartRecord};
pub use soi::{soi_solve, SoiSummary};

/// Extra smooth objective on the full design vector, used by decomposition
/// schemes for coupling terms.
pub type ExtraTerm<'a> = &'a (dyn Fn(&[f64], Option<&mut [f64]>) -> f64 + Sync);

/// The packing problem as an NLP over a subset of the design variables; the
/// remaining ones stay at `base`.
pub struct PackingNlp<'a> {
    spec: &'a ProblemSpec,
    plan: ConstraintPlan,
    free: Vec<usize>,
    base: Vec<f64>,
    extra: Option<ExtraTerm<'a>>,
    use_objective: bool,
    lo: Vec<f64>,
    hi: Vec<f64>,
}

impl<'a> PackingNlp<'a> {
    pub fn new(spec: &'a ProblemSpec, selection: &PairSelection) -> Self {
        let dim = spec.dim();
        Self::restricted(spec, selection, (0..dim).collect(), vec![0.0; dim])
    }

    /// Only the variables in `free` move; the others are read from `base`.
    pub fn restricted(spec: &'a ProblemSpec, selection: &PairSelection, free: Vec<usize>, base: Vec<f64>) -> Self {
        let layout = spec.layout();
        let n_pose = layout.n_bodies * POSE_DIM;
        let (mut lo, mut hi) = (Vec::with_capacity(free.len()), Vec::with_capacity(free.len()));
        for &i in &free {
            let axis = if i < n_pose { i % POSE_DIM } else { 3 + (i - n_pose) % 3 };
            if axis < 3 {
                lo.push(f64::NEG_INFINITY);
                hi.push(f64::INFINITY);
            } else {
                lo.push(spec.bounds.lower[axis - 3]);
                hi.push(spec.bounds.upper[axis - 3]);
            }
        }
        Self {
            spec,
            plan: ConstraintPlan::new(spec, selection),
            free,
            base,
            extra: None,
            use_objective: true,
            lo,
            hi,
        }
    }

    pub fn with_extra(mut self, extra: ExtraTerm<'a>, use_objective: bool) -> Self {
        self.extra = Some(extra);
        self.use_objective = use_objective;
        self
    }

    pub fn plan(&self) -> &ConstraintPlan {
        &self.plan
    }

    pub fn full(&self, x: &[f64]) -> Vec<f64> {
        let mut v = self.base.clone();
        for (k, &i) in self.free.iter().enumerate() {
            v[i] = x[k];
        }
        v
    }

    pub fn reduce(&self, full: &[f64]) -> Vec<f64> {
        self.free.iter().map(|&i| full[i]).collect()
    }

    fn gather(&self, full: &[f64], out: &mut [f64]) {
        for (k, &i) in self.free.iter().enumerate() {
            out[k] += full[i];
        }
    }
}

impl NlpProblem for PackingNlp<'_> {
    fn dim(&self) -> usize {
        self.free.len()
    }

    fn n_constraints(&self) -> usize {
        self.plan.n_rows(self.spec)
    }

    fn bounds(&self) -> (Vec<f64>, Vec<f64>) {
        (self.lo.clone(), self.hi.clone())
    }

    fn objective(&self, x: &[f64], grad: Option<&mut [f64]>) -> f64 {
        let full = self.full(x);
        let Ok(posed) = self.spec.posed(&full) else {
            return f64::NAN;
        };
        let mut gfull = grad.as_ref().map(|_| vec![0.0; full.len()]);
        let mut f = 0.0;
        if self.use_objective {
            match evaluate(self.spec, &posed, false, gfull.as_deref_mut()) {
                Ok((v, _)) => f += v,
                Err(_) => return f64::NAN,
            }
        }
        if let Some(extra) = self.extra {
            f += extra(&full, gfull.as_deref_mut());
        }
        if let (Some(g), Some(gf)) = (grad, gfull) {
            g.iter_mut().for_each(|v| *v = 0.0);
            self.gather(&gf, g);
        }
        f
    }

    fn constraints(&self, x: &[f64], out: &mut [f64]) {
        let full = self.full(x);
        match self.spec.posed(&full) {
            Ok(posed) => out.copy_from_slice(&self.plan.evaluate(&posed).values),
            Err(_) => out.iter_mut().for_each(|v| *v = f64::NAN),
        }
    }

    fn constraint_vjp(&self, x: &[f64], weights: &[f64], grad: &mut [f64]) {
        let full = self.full(x);
        if let Ok(posed) = self.spec.posed(&full) {
            let mut gf = vec![0.0; full.len()];
            self.plan.vjp(&posed, weights, &mut gf);
            self.gather(&gf, grad);
        }
    }
}

/// Reporting metrics of a layout.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    /// Bounding box of all body spheres.
    pub aabb_volume: f64,
    /// Bounding box of the primitive shapes (equals `aabb_volume` for
    /// bodies without a primitive).
    pub shape_aabb_volume: f64,
    pub routing_length: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolveReport {
    pub x: Vec<f64>,
    pub f: f64,
    pub breakdown: Breakdown,
    /// Largest violation over the full absolute constraint set.
    pub max_violation: f64,
    pub feasible: bool,
    pub converged: bool,
    pub termination: Termination,
    pub outer_iterations: usize,
    pub inner_iterations: usize,
    pub metrics: Metrics,
    /// Coincident body positions nudged before solving.
    pub jitter_events: usize,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub violation_history: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub atc: Option<AtcSummary>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub soi: Option<SoiSummary>,
    #[serde(skip)]
    pub wall_time: f64,
}

/// Re-evaluates `x` against the full problem and fills a report.
pub fn finalize(spec: &ProblemSpec, x: Vec<f64>, nlp: Option<&NlpReport>, tol_feas: f64) -> Result<SolveReport> {
    let posed = spec.posed(&x)?;
    let (f, breakdown) = evaluate(spec, &posed, true, None)?;
    let metrics = Metrics {
        aabb_volume: exact_aabb_volume(&posed),
        shape_aabb_volume: shape_aabb_volume(&posed),
        routing_length: routing_length_linear(&posed),
    };
    drop(posed);
    let max_violation = full_violation(spec, &x)?;
    let (converged, termination, outer, inner, hist, wall) = match nlp {
        Some(r) => (
            r.converged,
            r.termination,
            r.outer_iterations,
            r.inner_iterations,
            r.violation_history.clone(),
            r.wall_time,
        ),
        None => (true, Termination::Converged, 0, 0, Vec::new(), 0.0),
    };
    Ok(SolveReport {
        x,
        f,
        breakdown,
        max_violation,
        feasible: max_violation <= tol_feas,
        converged,
        termination,
        outer_iterations: outer,
        inner_iterations: inner,
        metrics,
        jitter_events: 0,
        violation_history: hist,
        atc: None,
        soi: None,
        wall_time: wall,
    })
}

/// Separates bodies whose positions coincide by a tiny deterministic offset,
/// so that center-to-center distances stay away from zero. Returns the
/// number of adjusted bodies.
pub fn jitter_coincident(spec: &ProblemSpec, x: &mut [f64]) -> usize {
    let layout = spec.layout();
    let mut events = 0;
    for j in 1..layout.n_bodies {
        for i in 0..j {
            let (oi, oj) = (layout.pose_offset(i) + 3, layout.pose_offset(j) + 3);
            let d2: f64 = (0..3).map(|k| (x[oi + k] - x[oj + k]).powi(2)).sum();
            if d2 < 1e-24 {
                x[oj] += 1e-10 * (1 + j) as f64;
                x[oj + 1] += 1e-10;
                events += 1;
                log::debug!("bodies {i} and {j} coincide; nudged body {j}");
                break;
            }
        }
    }
    events
}

/// One NLP solve of the full problem from `x0`.
pub fn solve_from(spec: &ProblemSpec, x0: &[f64], opts: &SolverOptions, selection: &PairSelection) -> Result<SolveReport> {
    spec.layout().check(x0)?;
    let mut x = x0.to_vec();
    let jitter = jitter_coincident(spec, &mut x);
    let nlp = PackingNlp::new(spec, selection);
    let r = minimize(&nlp, &x, opts);
    let mut rep = finalize(spec, r.x.clone(), Some(&r), opts.tol_feas)?;
    rep.jitter_events = jitter;
    Ok(rep)
}
