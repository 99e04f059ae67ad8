//! Benchmark runs and warm starts across decomposition resolutions.

use serde::{Deserialize, Serialize};

use crate::bench::decompose::{decompose_spheres, sphere_cloud_mass_properties};
use crate::constraints::PairSelection;
use crate::error::{Error, Result};
use crate::frameworks::{atc_solve, nested_solve_with, soi_solve, solve_from, AtcOptions, InitMethod, RestartRecord, SolveReport};
use crate::problem::ProblemSpec;
use crate::solver::SolverOptions;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Framework {
    #[default]
    Nested,
    Atc,
    Soi,
}

impl Framework {
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "nested" => Some(Framework::Nested),
            "atc" => Some(Framework::Atc),
            "soi" => Some(Framework::Soi),
            _ => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub framework: Framework,
    pub init: InitMethod,
    pub restarts: usize,
    pub seed: u64,
    #[serde(skip, default = "one")]
    pub jobs: usize,
    pub solver: SolverOptions,
    pub atc: AtcOptions,
}

fn one() -> usize {
    1
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            framework: Framework::Nested,
            init: InitMethod::Random,
            restarts: 1,
            seed: 0,
            jobs: 1,
            solver: SolverOptions::default(),
            atc: AtcOptions::default(),
        }
    }
}

/// Which vector of a base run seeds a warm start.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SeedChoice {
    /// Starting point of the best restart.
    X0Best,
    /// Converged solution of the best restart.
    XOptBest,
}

/// Distance of the best layout's metrics above the known optimum.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Gap {
    pub volume: f64,
    pub routing_length: f64,
}

impl Gap {
    /// A layout below the optimum in both metrics would mean the
    /// constraints admit something they should not.
    pub fn beats_optimum(&self) -> bool {
        self.volume < -1e-6 && self.routing_length < -1e-6
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkResult {
    pub spec_id: String,
    pub config: RunConfig,
    /// Spheres per body, when all bodies share one count.
    pub n_spheres: Option<usize>,
    pub restarts: Vec<RestartRecord>,
    pub best_index: usize,
    pub best: SolveReport,
    /// Exact bounding-box volume of the best layout's spheres.
    pub best_volume: f64,
    pub best_routing_length: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gap: Option<Gap>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed_choice: Option<SeedChoice>,
}

fn common_sphere_count(spec: &ProblemSpec) -> Option<usize> {
    let counts = spec.sphere_counts();
    counts.first().copied().filter(|c| counts.iter().all(|v| v == c))
}

/// Runs the configured framework from `restarts` starting points and keeps
/// the best result.
pub fn run_benchmark(spec: &ProblemSpec, cfg: &RunConfig) -> Result<BenchmarkResult> {
    let local = |x0: &[f64]| -> Result<SolveReport> {
        match cfg.framework {
            Framework::Nested => solve_from(spec, x0, &cfg.solver, &PairSelection::All),
            Framework::Atc => atc_solve(spec, x0, &cfg.atc, &cfg.solver),
            Framework::Soi => soi_solve(spec, x0, &cfg.solver),
        }
    };
    let res = nested_solve_with(spec, &cfg.init, cfg.restarts, cfg.seed, cfg.jobs, local)?;
    let best_volume = res.best.metrics.aabb_volume;
    let best_routing_length = res.best.metrics.routing_length;
    let gap = spec.known_optimum.map(|o| Gap {
        volume: best_volume - o.volume,
        routing_length: best_routing_length - o.routing_length,
    });
    if let Some(g) = gap {
        if g.beats_optimum() {
            log::warn!("{}: result beats the known optimum in both metrics ({g:?})", spec.name);
        }
    }
    Ok(BenchmarkResult {
        spec_id: spec.name.clone(),
        config: cfg.clone(),
        n_spheres: common_sphere_count(spec),
        restarts: res.restarts,
        best_index: res.best_index,
        best: res.best,
        best_volume,
        best_routing_length,
        gap,
        seed_choice: None,
    })
}

/// Copy of `spec` with every body re-decomposed into `n_spheres` balls.
/// Ports, masses and ids are kept.
pub fn redecompose(spec: &ProblemSpec, n_spheres: usize) -> Result<ProblemSpec> {
    let mut out = spec.clone();
    for (i, b) in out.bodies.iter_mut().enumerate() {
        let shape = b
            .shape
            .ok_or_else(|| Error::Unsupported(format!("body {i} has no primitive shape to re-decompose")))?;
        b.spheres = decompose_spheres(&shape, n_spheres)?;
        let (cog, inertia) = sphere_cloud_mass_properties(&b.spheres, b.mass);
        b.cog_local = cog;
        b.inertia_local = inertia;
    }
    out.name = format!("{}@{n_spheres}", spec.name);
    out.validate()?;
    Ok(out)
}

/// Re-solves `base_spec` at a finer decomposition from one vector of a
/// previous run, with a single manual-init restart.
pub fn warm_start_run(
    base_spec: &ProblemSpec,
    base: &BenchmarkResult,
    target_n_spheres: usize,
    choice: SeedChoice,
    solver: &SolverOptions,
) -> Result<(ProblemSpec, BenchmarkResult)> {
    let record = base
        .restarts
        .get(base.best_index)
        .ok_or_else(|| Error::invalid("base.restarts", "missing the best restart record"))?;
    let x0 = match choice {
        SeedChoice::X0Best => record.x0.clone(),
        SeedChoice::XOptBest => base.best.x.clone(),
    };
    let spec = redecompose(base_spec, target_n_spheres)?;
    spec.layout().check(&x0)?;
    let cfg = RunConfig {
        framework: Framework::Nested,
        init: InitMethod::Manual { x0 },
        restarts: 1,
        seed: base.config.seed,
        jobs: 1,
        solver: solver.clone(),
        atc: base.config.atc.clone(),
    };
    let mut result = run_benchmark(&spec, &cfg)?;
    result.seed_choice = Some(choice);
    Ok((spec, result))
}
