//! Smooth inequality-constrained minimization: an augmented-Lagrangian
//! outer loop around a projected L-BFGS inner solver on box bounds.

use std::collections::VecDeque;
use std::time::Instant;

use serde::{Deserialize, Serialize};

/// A smooth NLP `min f(x) s.t. c(x) <= 0, lo <= x <= hi`.
pub trait NlpProblem {
    fn dim(&self) -> usize;
    fn n_constraints(&self) -> usize;
    /// Per-coordinate bounds; infinite entries are unbounded.
    fn bounds(&self) -> (Vec<f64>, Vec<f64>);
    /// Objective value; writes the gradient into `grad` when given.
    fn objective(&self, x: &[f64], grad: Option<&mut [f64]>) -> f64;
    fn constraints(&self, x: &[f64], out: &mut [f64]);
    /// Adds `sum_k w_k grad c_k(x)` into `grad`.
    fn constraint_vjp(&self, x: &[f64], weights: &[f64], grad: &mut [f64]);
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverOptions {
    pub rho0: f64,
    pub rho_growth: f64,
    pub rho_max: f64,
    pub tol_feas: f64,
    pub tol_grad: f64,
    pub max_inner: usize,
    pub max_outer: usize,
    pub lbfgs_memory: usize,
    /// Wall-clock limit in seconds. Results stop being reproducible when a
    /// limit is hit, so it is off by default.
    pub time_limit: Option<f64>,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            rho0: 10.0,
            rho_growth: 5.0,
            rho_max: 1e6,
            tol_feas: 1e-6,
            tol_grad: 1e-6,
            max_inner: 500,
            max_outer: 30,
            lbfgs_memory: 10,
            time_limit: None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    Converged,
    OuterLimit,
    TimeLimit,
    /// The inner solver made no further progress while still infeasible.
    Stalled,
    NonFinite,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NlpReport {
    pub x: Vec<f64>,
    pub f: f64,
    pub max_violation: f64,
    pub kkt_residual: f64,
    pub outer_iterations: usize,
    pub inner_iterations: usize,
    pub converged: bool,
    pub termination: Termination,
    /// Violation after each accepted outer iteration.
    pub violation_history: Vec<f64>,
    pub multipliers: Vec<f64>,
    #[serde(skip)]
    pub wall_time: f64,
}

fn project(x: &mut [f64], lo: &[f64], hi: &[f64]) {
    for i in 0..x.len() {
        x[i] = x[i].clamp(lo[i], hi[i]);
    }
}

fn max_violation(c: &[f64]) -> f64 {
    c.iter().fold(0.0f64, |m, &v| m.max(v))
}

/// Infinity norm of the projected gradient step `P(x - g) - x`.
fn projected_grad_norm(x: &[f64], g: &[f64], lo: &[f64], hi: &[f64]) -> f64 {
    let mut m = 0.0f64;
    for i in 0..x.len() {
        let p = (x[i] - g[i]).clamp(lo[i], hi[i]) - x[i];
        m = m.max(p.abs());
    }
    m
}

struct Augmented<'a, P: NlpProblem + ?Sized> {
    p: &'a P,
    lambda: Vec<f64>,
    rho: f64,
    c: Vec<f64>,
    w: Vec<f64>,
}

impl<P: NlpProblem + ?Sized> Augmented<'_, P> {
    /// `f + (1/2 rho) sum (max(0, l + rho c)^2 - l^2)` and its gradient.
    fn eval(&mut self, x: &[f64], grad: &mut [f64]) -> f64 {
        grad.iter_mut().for_each(|g| *g = 0.0);
        let f = self.p.objective(x, Some(grad));
        if self.c.is_empty() {
            return f;
        }
        self.p.constraints(x, &mut self.c);
        let mut pen = 0.0;
        for k in 0..self.c.len() {
            let s = (self.lambda[k] + self.rho * self.c[k]).max(0.0);
            pen += s * s - self.lambda[k] * self.lambda[k];
            self.w[k] = s;
        }
        self.p.constraint_vjp(x, &self.w, grad);
        f + pen / (2.0 * self.rho)
    }
}

struct InnerResult {
    iterations: usize,
    pg_norm: f64,
    finite: bool,
}

/// Projected L-BFGS on the augmented Lagrangian.
fn inner_solve<P: NlpProblem + ?Sized>(
    al: &mut Augmented<P>,
    x: &mut Vec<f64>,
    lo: &[f64],
    hi: &[f64],
    tol: f64,
    opts: &SolverOptions,
    deadline: Option<Instant>,
) -> InnerResult {
    let n = x.len();
    let mut g = vec![0.0; n];
    let mut fx = al.eval(x, &mut g);
    if !fx.is_finite() || g.iter().any(|v| !v.is_finite()) {
        return InnerResult {
            iterations: 0,
            pg_norm: f64::INFINITY,
            finite: false,
        };
    }
    let mut mem: VecDeque<(Vec<f64>, Vec<f64>, f64)> = VecDeque::new();
    let mut xt = vec![0.0; n];
    let mut gt = vec![0.0; n];
    let mut d = vec![0.0; n];
    let mut stalls = 0;
    let mut it = 0;
    let mut pg = projected_grad_norm(x, &g, lo, hi);
    while it < opts.max_inner && pg > tol {
        if deadline.is_some_and(|t| Instant::now() >= t) {
            break;
        }
        it += 1;
        let free: Vec<bool> = (0..n)
            .map(|i| !((x[i] <= lo[i] && g[i] > 0.0) || (x[i] >= hi[i] && g[i] < 0.0)))
            .collect();
        // Two-loop recursion on the free-variable gradient.
        for i in 0..n {
            d[i] = if free[i] { -g[i] } else { 0.0 };
        }
        let mut alphas = Vec::with_capacity(mem.len());
        for (s, y, rho) in mem.iter().rev() {
            let a = rho * dot(s, &d);
            axpy(-a, y, &mut d);
            alphas.push(a);
        }
        if let Some((s, y, _)) = mem.back() {
            let gamma = dot(s, y) / dot(y, y);
            d.iter_mut().for_each(|v| *v *= gamma);
        }
        for ((s, y, rho), a) in mem.iter().zip(alphas.iter().rev()) {
            let b = rho * dot(y, &d);
            axpy(a - b, s, &mut d);
        }
        for i in 0..n {
            if !free[i] {
                d[i] = 0.0;
            }
        }
        if !(dot(&g, &d) < 0.0) {
            mem.clear();
            for i in 0..n {
                d[i] = if free[i] { -g[i] } else { 0.0 };
            }
        }
        let mut step = if mem.is_empty() {
            let dn = d.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            (1.0 / dn.max(1e-300)).min(1.0)
        } else {
            1.0
        };
        let mut accepted = false;
        let mut ft = fx;
        for _ in 0..60 {
            for i in 0..n {
                xt[i] = x[i] + step * d[i];
            }
            project(&mut xt, lo, hi);
            let decrease: f64 = (0..n).map(|i| g[i] * (xt[i] - x[i])).sum();
            ft = al.eval(&xt, &mut gt);
            if ft.is_finite() && ft <= fx + 1e-4 * decrease.min(0.0) && decrease <= 0.0 {
                accepted = true;
                break;
            }
            step *= 0.5;
        }
        if !accepted {
            if mem.is_empty() {
                break;
            }
            mem.clear();
            continue;
        }
        let s: Vec<f64> = (0..n).map(|i| xt[i] - x[i]).collect();
        let y: Vec<f64> = (0..n).map(|i| gt[i] - g[i]).collect();
        let sy = dot(&s, &y);
        if sy > 1e-12 * norm(&s) * norm(&y) && sy > 0.0 {
            if mem.len() == opts.lbfgs_memory {
                mem.pop_front();
            }
            mem.push_back((s, y, 1.0 / sy));
        }
        let progress = fx - ft;
        std::mem::swap(x, &mut xt);
        std::mem::swap(&mut g, &mut gt);
        fx = ft;
        pg = projected_grad_norm(x, &g, lo, hi);
        if progress <= 1e-15 * fx.abs().max(1.0) {
            stalls += 1;
            if stalls >= 5 {
                break;
            }
        } else {
            stalls = 0;
        }
    }
    InnerResult {
        iterations: it,
        pg_norm: pg,
        finite: true,
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

fn axpy(a: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += a * xi;
    }
}

/// Lagrangian gradient `grad f + sum l_k grad c_k` at `x`.
fn lagrangian_grad<P: NlpProblem + ?Sized>(p: &P, x: &[f64], lambda: &[f64]) -> (f64, Vec<f64>) {
    let mut g = vec![0.0; x.len()];
    let f = p.objective(x, Some(&mut g));
    if !lambda.is_empty() {
        p.constraint_vjp(x, lambda, &mut g);
    }
    (f, g)
}

/// Minimizes `p` from `x0` (clamped into the bounds).
pub fn minimize<P: NlpProblem + ?Sized>(p: &P, x0: &[f64], opts: &SolverOptions) -> NlpReport {
    let start = Instant::now();
    let deadline = opts.time_limit.map(|s| start + std::time::Duration::from_secs_f64(s));
    let (lo, hi) = p.bounds();
    let m = p.n_constraints();
    let mut x = x0.to_vec();
    project(&mut x, &lo, &hi);

    let mut al = Augmented {
        p,
        lambda: vec![0.0; m],
        rho: opts.rho0,
        c: vec![0.0; m],
        w: vec![0.0; m],
    };
    let finish = |x: Vec<f64>, al: &Augmented<P>, outer, inner, termination, hist: Vec<f64>, kkt: f64| {
        let f = p.objective(&x, None);
        let mut c = vec![0.0; m];
        p.constraints(&x, &mut c);
        let v = max_violation(&c);
        NlpReport {
            x,
            f,
            max_violation: v,
            kkt_residual: kkt,
            outer_iterations: outer,
            inner_iterations: inner,
            converged: termination == Termination::Converged,
            termination,
            violation_history: hist,
            multipliers: al.lambda.clone(),
            wall_time: start.elapsed().as_secs_f64(),
        }
    };

    let f0 = p.objective(&x, None);
    let mut c0 = vec![0.0; m];
    p.constraints(&x, &mut c0);
    if !f0.is_finite() || c0.iter().any(|v| !v.is_finite()) {
        return finish(x, &al, 0, 0, Termination::NonFinite, Vec::new(), f64::INFINITY);
    }

    let mut inner_total = 0;
    let mut history: Vec<f64> = Vec::new();
    let mut omega = 1e-3f64.max(opts.tol_grad);
    let mut c = vec![0.0; m];
    let mut termination = Termination::OuterLimit;
    let mut kkt = f64::INFINITY;
    let mut outer = 0;
    while outer < opts.max_outer {
        outer += 1;
        let x_prev = x.clone();
        let mut retries = 0;
        let (v, res) = loop {
            let res = inner_solve(&mut al, &mut x, &lo, &hi, omega, opts, deadline);
            inner_total += res.iterations;
            if !res.finite {
                return finish(x_prev, &al, outer, inner_total, Termination::NonFinite, history, kkt);
            }
            p.constraints(&x, &mut c);
            let v = max_violation(&c);
            let worse = history.last().is_some_and(|&last| v > last.max(opts.tol_feas) + 1e-12);
            if worse && retries < 4 && al.rho < opts.rho_max {
                retries += 1;
                al.rho = (al.rho * opts.rho_growth).min(opts.rho_max);
                x.copy_from_slice(&x_prev);
                continue;
            }
            if worse {
                // Keep the last accepted iterate; the multipliers still move.
                x.copy_from_slice(&x_prev);
                p.constraints(&x, &mut c);
                break (max_violation(&c), res);
            }
            break (v, res);
        };
        let prev_v = history.last().copied();
        history.push(v);

        for k in 0..m {
            al.lambda[k] = (al.lambda[k] + al.rho * c[k]).max(0.0);
        }
        // Stationarity of the Lagrangian and complementarity.
        let (fx, lg) = lagrangian_grad(p, &x, &al.lambda);
        let comp = (0..m).fold(0.0f64, |acc, k| acc.max(al.lambda[k].min(-c[k]).abs()));
        kkt = projected_grad_norm(&x, &lg, &lo, &hi).max(comp);
        let scale = 1.0 + fx.abs();
        log::debug!(
            "outer {outer}: f = {fx:.6e}, violation = {v:.2e}, kkt = {kkt:.2e}, inner = {}, rho = {:.1e}",
            res.iterations,
            al.rho
        );
        if v <= opts.tol_feas && kkt <= opts.tol_grad * scale && res.pg_norm <= omega.max(opts.tol_grad * scale) {
            termination = Termination::Converged;
            break;
        }
        if deadline.is_some_and(|t| Instant::now() >= t) {
            termination = Termination::TimeLimit;
            break;
        }
        if prev_v.is_some_and(|pv| v > 0.25 * pv) && v > opts.tol_feas {
            al.rho = (al.rho * opts.rho_growth).min(opts.rho_max);
        }
        if res.iterations == 0 && v > opts.tol_feas && al.rho >= opts.rho_max {
            termination = Termination::Stalled;
            break;
        }
        omega = (omega * 0.1).max(opts.tol_grad);
    }
    finish(x, &al, outer, inner_total, termination, history, kkt)
}

/// Central-difference gradient.
pub fn gradient(f: impl Fn(&[f64]) -> f64, x: &[f64], h: f64) -> Vec<f64> {
    let mut xp = x.to_vec();
    (0..x.len())
        .map(|i| {
            let xi = x[i];
            xp[i] = xi + h;
            let fp = f(&xp);
            xp[i] = xi - h;
            let fm = f(&xp);
            xp[i] = xi;
            (fp - fm) / (2.0 * h)
        })
        .collect()
}

/// Largest relative error between an analytic gradient and central
/// differences, with denominator `max(1, |analytic|)`.
pub fn check_gradient(f: impl Fn(&[f64]) -> f64, analytic: &[f64], x: &[f64], h: f64) -> f64 {
    let numeric = gradient(f, x, h);
    analytic
        .iter()
        .zip(&numeric)
        .map(|(a, n)| (a - n).abs() / a.abs().max(1.0))
        .fold(0.0, f64::max)
}
