//! Starting points: uniform random, equally spaced, genetic algorithm and
//! manual.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::constraints::{ConstraintPlan, PairSelection};
use crate::geometry::{Posed, Vec3, POSE_DIM};
use crate::objectives::evaluate;
use crate::problem::{ConstraintMode, ProblemSpec};
use crate::solver::SolverOptions;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum FitnessMode {
    /// Objective plus a quadratic violation penalty.
    #[default]
    Cheap,
    /// Objective after a full NLP solve from the individual.
    Refined,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GaOptions {
    pub population: usize,
    pub generations: usize,
    pub crossover_rate: f64,
    /// Mutation standard deviation as a fraction of each gene's range.
    pub mutation_sigma: f64,
    pub tournament: usize,
    pub fitness: FitnessMode,
    /// Penalty factor on the squared violation in cheap mode.
    pub penalty: f64,
}

impl Default for GaOptions {
    fn default() -> Self {
        Self {
            population: 30,
            generations: 40,
            crossover_rate: 0.9,
            mutation_sigma: 0.1,
            tournament: 3,
            fitness: FitnessMode::Cheap,
            penalty: 1e3,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum InitMethod {
    Random,
    EquallySpaced,
    Genetic(GaOptions),
    Manual { x0: Vec<f64> },
}

impl InitMethod {
    pub fn name(&self) -> &'static str {
        match self {
            InitMethod::Random => "random",
            InitMethod::EquallySpaced => "es",
            InitMethod::Genetic(_) => "ga",
            InitMethod::Manual { .. } => "manual",
        }
    }

    pub fn sample(&self, spec: &ProblemSpec, rng: &mut ChaCha8Rng) -> Vec<f64> {
        match self {
            InitMethod::Random => init_random(spec, rng),
            InitMethod::EquallySpaced => init_equally_spaced(spec, rng, 0.05),
            InitMethod::Genetic(opts) => init_genetic(spec, opts, rng),
            InitMethod::Manual { x0 } => x0.clone(),
        }
    }
}

/// Per-coordinate sampling box: angles in `[-pi, pi]`, positions in the
/// spec bounds.
pub fn gene_bounds(spec: &ProblemSpec) -> (Vec<f64>, Vec<f64>) {
    let layout = spec.layout();
    let n_pose = layout.n_bodies * POSE_DIM;
    let mut lo = Vec::with_capacity(layout.dim());
    let mut hi = Vec::with_capacity(layout.dim());
    for i in 0..layout.dim() {
        let axis = if i < n_pose { i % POSE_DIM } else { 3 + (i - n_pose) % 3 };
        if axis < 3 {
            lo.push(-PI);
            hi.push(PI);
        } else {
            lo.push(spec.bounds.lower[axis - 3]);
            hi.push(spec.bounds.upper[axis - 3]);
        }
    }
    (lo, hi)
}

pub fn init_random(spec: &ProblemSpec, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let (lo, hi) = gene_bounds(spec);
    lo.iter().zip(&hi).map(|(l, h)| rng.random_range(*l..=*h)).collect()
}

/// Corners first (in opposite pairs), then face midpoints.
fn anchors(lo: &Vec3, hi: &Vec3) -> Vec<Vec3> {
    let c = |a: bool, b: bool, d: bool| {
        Vec3::new(if a { hi.x } else { lo.x }, if b { hi.y } else { lo.y }, if d { hi.z } else { lo.z })
    };
    let m = (lo + hi) * 0.5;
    vec![
        c(false, false, false),
        c(true, true, true),
        c(true, false, false),
        c(false, true, true),
        c(false, true, false),
        c(true, false, true),
        c(false, false, true),
        c(true, true, false),
        Vec3::new(lo.x, m.y, m.z),
        Vec3::new(hi.x, m.y, m.z),
        Vec3::new(m.x, lo.y, m.z),
        Vec3::new(m.x, hi.y, m.z),
        Vec3::new(m.x, m.y, lo.z),
        Vec3::new(m.x, m.y, hi.z),
    ]
}

/// Bodies go round-robin to the corners and face midpoints of the bounds,
/// each jittered by up to `jitter` times the box extent; orientations are
/// uniform. Control points are spread along the straight line between
/// their route's ports, plus jitter.
pub fn init_equally_spaced(spec: &ProblemSpec, rng: &mut ChaCha8Rng, jitter: f64) -> Vec<f64> {
    let layout = spec.layout();
    let b = &spec.bounds;
    let ext = b.extent();
    let spots = anchors(&b.lower, &b.upper);
    let mut x = vec![0.0; layout.dim()];
    let jit = |rng: &mut ChaCha8Rng, k: usize| {
        if jitter > 0.0 {
            rng.random_range(-1.0..=1.0) * jitter * ext[k]
        } else {
            0.0
        }
    };
    for i in 0..layout.n_bodies {
        let o = layout.pose_offset(i);
        for k in 0..3 {
            x[o + k] = rng.random_range(-PI..=PI);
        }
        let p = spots[i % spots.len()];
        for k in 0..3 {
            x[o + 3 + k] = (p[k] + jit(rng, k)).clamp(b.lower[k], b.upper[k]);
        }
    }
    if let Ok(posed) = Posed::new(&spec.bodies, &spec.routes, &x) {
        let ends: Vec<(Vec3, Vec3)> = posed.nodes.iter().map(|n| (n[0], n[n.len() - 1])).collect();
        drop(posed);
        for (r, route) in spec.routes.iter().enumerate() {
            let (a, e) = ends[r];
            let n = route.n_control_points;
            for k in 0..n {
                let t = (k + 1) as f64 / (n + 1) as f64;
                let p = a + (e - a) * t;
                let o = layout.control_offset(r, k);
                for d in 0..3 {
                    x[o + d] = (p[d] + jit(rng, d)).clamp(b.lower[d], b.upper[d]);
                }
            }
        }
    }
    x
}

/// Result of a GA run.
#[derive(Clone, Debug)]
pub struct GaResult {
    pub best: Vec<f64>,
    pub best_fitness: f64,
    /// Best fitness after each generation.
    pub history: Vec<f64>,
    pub population: Vec<Vec<f64>>,
}

/// Real-coded GA: tournament selection, blend crossover (alpha 0.5),
/// Gaussian mutation, one elite.
pub fn ga_minimize(
    fitness: &dyn Fn(&[f64]) -> f64,
    lo: &[f64],
    hi: &[f64],
    opts: &GaOptions,
    rng: &mut ChaCha8Rng,
) -> GaResult {
    let n = lo.len();
    let pop_size = opts.population.max(4);
    let score = |v: f64| if v.is_finite() { v } else { f64::INFINITY };
    let mut pop: Vec<Vec<f64>> = (0..pop_size)
        .map(|_| (0..n).map(|i| rng.random_range(lo[i]..=hi[i])).collect())
        .collect();
    let mut fit: Vec<f64> = pop.iter().map(|p| score(fitness(p))).collect();
    let argmin = |fit: &[f64]| (0..fit.len()).fold(0, |b, i| if fit[i] < fit[b] { i } else { b });
    let mut history = Vec::with_capacity(opts.generations);
    let unit = Normal::new(0.0, 1.0).expect("valid normal");
    let mutation_p = 1.0 / n.max(1) as f64;
    for _ in 0..opts.generations {
        let elite = argmin(&fit);
        let mut next = vec![pop[elite].clone()];
        let mut next_fit = vec![fit[elite]];
        let pick = |rng: &mut ChaCha8Rng| {
            let mut best = rng.random_range(0..pop_size);
            for _ in 1..opts.tournament.max(1) {
                let c = rng.random_range(0..pop_size);
                if fit[c] < fit[best] {
                    best = c;
                }
            }
            best
        };
        while next.len() < pop_size {
            let (a, b) = (pick(rng), pick(rng));
            let mut child = pop[a].clone();
            if rng.random::<f64>() < opts.crossover_rate {
                for i in 0..n {
                    let (x, y) = (pop[a][i], pop[b][i]);
                    let (l, h) = (x.min(y), x.max(y));
                    let span = h - l;
                    child[i] = rng.random_range((l - 0.5 * span)..=(h + 0.5 * span));
                }
            }
            for i in 0..n {
                if rng.random::<f64>() < mutation_p {
                    child[i] += opts.mutation_sigma * (hi[i] - lo[i]) * unit.sample(rng);
                }
                child[i] = child[i].clamp(lo[i], hi[i]);
            }
            next_fit.push(score(fitness(&child)));
            next.push(child);
        }
        pop = next;
        fit = next_fit;
        history.push(fit[argmin(&fit)]);
    }
    let b = argmin(&fit);
    GaResult {
        best: pop[b].clone(),
        best_fitness: fit[b],
        history,
        population: pop,
    }
}

/// Best individual of a GA over the design space.
pub fn init_genetic(spec: &ProblemSpec, opts: &GaOptions, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let (lo, hi) = gene_bounds(spec);
    let plan = ConstraintPlan::with_mode(spec, &PairSelection::All, ConstraintMode::Absolute);
    let penalty = opts.penalty;
    let cheap = |x: &[f64]| -> f64 {
        let Ok(posed) = spec.posed(x) else {
            return f64::INFINITY;
        };
        let f = evaluate(spec, &posed, false, None).map(|r| r.0).unwrap_or(f64::INFINITY);
        let v: f64 = plan.raw_values(&posed).0.iter().map(|g| g.max(0.0).powi(2)).sum();
        f + penalty * v
    };
    let res = match opts.fitness {
        FitnessMode::Cheap => ga_minimize(&cheap, &lo, &hi, opts, rng),
        FitnessMode::Refined => {
            let solver = SolverOptions {
                max_outer: 10,
                max_inner: 100,
                ..SolverOptions::default()
            };
            let refined = |x: &[f64]| -> f64 {
                match super::solve_from(spec, x, &solver, &PairSelection::All) {
                    Ok(r) => r.f + penalty * r.max_violation.powi(2),
                    Err(_) => f64::INFINITY,
                }
            };
            ga_minimize(&refined, &lo, &hi, opts, rng)
        }
    };
    res.best
}

/// RNG for restart `index` under `seed`.
pub fn restart_rng(seed: u64, index: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index as u64);
    rng
}
