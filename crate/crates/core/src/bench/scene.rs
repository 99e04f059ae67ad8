//! Scene and result files (JSON). Floats are written in shortest
//! round-trip form, so a saved design vector reloads bit for bit.

use std::fs;
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::bench::run::BenchmarkResult;
use crate::constraints::full_violation;
use crate::error::{Error, Result};
use crate::frameworks::SolveReport;
use crate::geometry::{Sphere, Vec3};
use crate::objectives::total_objective;
use crate::problem::ProblemSpec;

fn io_error(path: &Path, source: std::io::Error) -> Error {
    Error::Io {
        path: path.display().to_string(),
        source,
    }
}

/// Parses JSON text, reporting the path of the offending field.
pub fn from_json_str<T: DeserializeOwned>(text: &str) -> Result<T> {
    let de = &mut serde_json::Deserializer::from_str(text);
    serde_path_to_error::deserialize(de).map_err(|e| {
        let field = e.path().to_string();
        let inner = e.into_inner();
        Error::Parse {
            field,
            line: inner.line(),
            column: inner.column(),
            message: inner.to_string(),
        }
    })
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|e| io_error(path, e))?;
    from_json_str(&text)
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| Error::invalid("result", e.to_string()))?;
    text.push('\n');
    fs::write(path, text).map_err(|e| io_error(path, e))
}

pub fn load_scene(path: &Path) -> Result<ProblemSpec> {
    let spec: ProblemSpec = read_json(path)?;
    spec.validate()?;
    Ok(spec)
}

pub fn save_scene(path: &Path, spec: &ProblemSpec) -> Result<()> {
    write_json(path, spec)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BodySnapshot {
    pub id: String,
    pub spheres: Vec<Sphere>,
    pub ports: Vec<Vec3>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RouteSnapshot {
    pub id: String,
    pub nodes: Vec<Vec3>,
    pub radius: f64,
}

/// World-frame geometry of a layout, for external viewers.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GeometrySnapshot {
    pub bodies: Vec<BodySnapshot>,
    pub routes: Vec<RouteSnapshot>,
}

pub fn snapshot(spec: &ProblemSpec, x: &[f64]) -> Result<GeometrySnapshot> {
    let posed = spec.posed(x)?;
    let bodies = spec
        .bodies
        .iter()
        .enumerate()
        .map(|(i, b)| BodySnapshot {
            id: b.id.clone(),
            spheres: (0..b.spheres.len()).map(|k| posed.world_sphere(i, k)).collect(),
            ports: b.ports.iter().map(|p| posed.world_point(i, p)).collect(),
        })
        .collect();
    let routes = spec
        .routes
        .iter()
        .enumerate()
        .map(|(r, route)| RouteSnapshot {
            id: route.id.clone(),
            nodes: posed.nodes[r].clone(),
            radius: route.radius,
        })
        .collect();
    Ok(GeometrySnapshot { bodies, routes })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ResultPayload {
    Solve(SolveReport),
    Benchmark(Box<BenchmarkResult>),
}

impl ResultPayload {
    pub fn report(&self) -> &SolveReport {
        match self {
            ResultPayload::Solve(r) => r,
            ResultPayload::Benchmark(b) => &b.best,
        }
    }
}

/// A self-contained result: the problem, the outcome and the geometry of
/// the best layout.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResultFile {
    pub spec: ProblemSpec,
    pub result: ResultPayload,
    pub geometry: GeometrySnapshot,
}

impl ResultFile {
    pub fn new(spec: ProblemSpec, result: ResultPayload) -> Result<Self> {
        let geometry = snapshot(&spec, &result.report().x)?;
        Ok(Self { spec, result, geometry })
    }
}

pub fn save_result(path: &Path, file: &ResultFile) -> Result<()> {
    write_json(path, file)
}

pub fn load_result(path: &Path) -> Result<ResultFile> {
    let file: ResultFile = read_json(path)?;
    file.spec.validate()?;
    Ok(file)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Replay {
    pub stored_f: f64,
    pub replayed_f: f64,
    pub max_violation: f64,
    pub feasible: bool,
    /// Replayed objective equals the stored one bit for bit.
    pub identical: bool,
}

/// Re-evaluates the stored best layout against the stored problem.
pub fn replay(file: &ResultFile, tol_feas: f64) -> Result<Replay> {
    let rep = file.result.report();
    let (f, _) = total_objective(&file.spec, &rep.x)?;
    let v = full_violation(&file.spec, &rep.x)?;
    Ok(Replay {
        stored_f: rep.f,
        replayed_f: f,
        max_violation: v,
        feasible: v <= tol_feas,
        identical: f.to_bits() == rep.f.to_bits(),
    })
}
