//! Problem description shared by every module: bodies, routes, optional
//! design boundary, objective weights and variable bounds.

use serde::{Deserialize, Serialize};

use crate::boundary::BoundaryModel;
use crate::error::{Error, Result};
use crate::geometry::{check_routes, Body, DesignLayout, Posed, Route, Vec3};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum RoutingVariant {
    #[default]
    Quadratic,
    Exponential,
}

/// Weights of the aggregate objective. Each term is reported unweighted in
/// the breakdown.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ObjectiveWeights {
    pub routing: f64,
    pub boundary: f64,
    pub cog: f64,
    pub inertia: f64,
    pub volume: f64,
    pub mean_distance: f64,
    pub routing_variant: RoutingVariant,
    /// Scale inside `exp(gamma * |seg|^2) - 1`.
    pub gamma_exp: f64,
    /// Sharpness of the Boltzmann operator in the smooth bounding box.
    pub alpha_volume: f64,
    /// Weights on `I_xx, I_yy, I_zz`.
    pub inertia_axes: [f64; 3],
}

impl Default for ObjectiveWeights {
    fn default() -> Self {
        Self {
            routing: 0.0,
            boundary: 0.0,
            cog: 0.0,
            inertia: 0.0,
            volume: 0.0,
            mean_distance: 0.0,
            routing_variant: RoutingVariant::Quadratic,
            gamma_exp: 1.0,
            alpha_volume: 50.0,
            inertia_axes: [1.0; 3],
        }
    }
}

impl ObjectiveWeights {
    /// Named objective presets. `f1`/`f3` combine bounding-box volume with
    /// quadratic routing, `f2`/`f4` with exponential routing.
    pub fn preset(name: &str) -> Result<Self> {
        let variant = match name {
            "f1" | "f3" => RoutingVariant::Quadratic,
            "f2" | "f4" => RoutingVariant::Exponential,
            _ => return Err(Error::invalid("preset", format!("unknown preset `{name}` (f1..f4)"))),
        };
        Ok(Self {
            volume: 1.0,
            routing: 1.0,
            routing_variant: variant,
            ..Self::default()
        })
    }

    pub fn validate(&self) -> Result<()> {
        let named = [
            ("weights.routing", self.routing),
            ("weights.boundary", self.boundary),
            ("weights.cog", self.cog),
            ("weights.inertia", self.inertia),
            ("weights.volume", self.volume),
            ("weights.mean_distance", self.mean_distance),
            ("weights.inertia_axes[0]", self.inertia_axes[0]),
            ("weights.inertia_axes[1]", self.inertia_axes[1]),
            ("weights.inertia_axes[2]", self.inertia_axes[2]),
        ];
        for (field, w) in named {
            if !(w >= 0.0 && w.is_finite()) {
                return Err(Error::invalid(field, format!("must be non-negative, got {w}")));
            }
        }
        if !(self.gamma_exp > 0.0) {
            return Err(Error::invalid("weights.gamma_exp", "must be positive"));
        }
        if !(self.alpha_volume > 0.0) {
            return Err(Error::invalid("weights.alpha_volume", "must be positive"));
        }
        Ok(())
    }
}

/// How clearance rows enter the NLP.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ConstraintMode {
    /// One row per clearance.
    #[default]
    Absolute,
    /// One row per constraint kind: `(1/beta) sum softplus(beta g_k) - epsilon`.
    SoftSum { beta: f64, epsilon: f64 },
}

impl ConstraintMode {
    pub fn soft_sum() -> Self {
        ConstraintMode::SoftSum {
            beta: 50.0,
            epsilon: 1e-3,
        }
    }
}

/// Axis-aligned box bounding body translations and control points.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Bounds {
    pub lower: Vec3,
    pub upper: Vec3,
}

impl Bounds {
    pub fn cube(half: f64) -> Self {
        Self {
            lower: Vec3::repeat(-half),
            upper: Vec3::repeat(half),
        }
    }

    pub fn extent(&self) -> Vec3 {
        self.upper - self.lower
    }

    pub fn midpoint(&self) -> Vec3 {
        (self.upper + self.lower) * 0.5
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct KnownOptimum {
    pub volume: f64,
    pub routing_length: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProblemSpec {
    pub name: String,
    pub bodies: Vec<Body>,
    #[serde(default)]
    pub routes: Vec<Route>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub boundary: Option<BoundaryModel>,
    pub weights: ObjectiveWeights,
    pub bounds: Bounds,
    #[serde(default)]
    pub constraint_mode: ConstraintMode,
    #[serde(default = "Vec3::zeros")]
    pub cog_target: Vec3,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub known_optimum: Option<KnownOptimum>,
    /// Starting point for manual initialization.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub initial: Option<Vec<f64>>,
    /// Explicit optimal layout for analytical benchmarks.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub certificate: Option<Vec<f64>>,
}

impl ProblemSpec {
    pub fn new(name: impl Into<String>, bodies: Vec<Body>, routes: Vec<Route>) -> Self {
        Self {
            name: name.into(),
            bodies,
            routes,
            boundary: None,
            weights: ObjectiveWeights::default(),
            bounds: Bounds::cube(5.0),
            constraint_mode: ConstraintMode::Absolute,
            cog_target: Vec3::zeros(),
            known_optimum: None,
            initial: None,
            certificate: None,
        }
    }

    pub fn layout(&self) -> DesignLayout {
        DesignLayout::new(self.bodies.len(), &self.routes)
    }

    pub fn dim(&self) -> usize {
        self.layout().dim()
    }

    pub fn posed(&self, x: &[f64]) -> Result<Posed<'_>> {
        Posed::new(&self.bodies, &self.routes, x)
    }

    pub fn sphere_counts(&self) -> Vec<usize> {
        self.bodies.iter().map(|b| b.spheres.len()).collect()
    }

    pub fn total_mass(&self) -> f64 {
        self.bodies.iter().map(|b| b.mass).sum()
    }

    pub fn validate(&self) -> Result<()> {
        if self.bodies.is_empty() {
            return Err(Error::invalid("bodies", "needs at least one body"));
        }
        for (i, b) in self.bodies.iter().enumerate() {
            b.validate(&format!("bodies[{i}]"))?;
        }
        check_routes(&self.bodies, &self.routes)?;
        for (i, r) in self.routes.iter().enumerate() {
            if !(r.radius >= 0.0 && r.radius.is_finite()) {
                return Err(Error::invalid(format!("routes[{i}].radius"), "must be non-negative"));
            }
        }
        self.weights.validate()?;
        for k in 0..3 {
            if !(self.bounds.lower[k] < self.bounds.upper[k]) || !self.bounds.extent()[k].is_finite() {
                return Err(Error::invalid("bounds", "lower must be below upper and finite"));
            }
        }
        if let ConstraintMode::SoftSum { beta, epsilon } = self.constraint_mode {
            if !(beta > 0.0) || !(epsilon >= 0.0) {
                return Err(Error::invalid("constraint_mode", "beta must be > 0 and epsilon >= 0"));
            }
        }
        if let Some(bm) = &self.boundary {
            bm.validate()?;
        }
        let dim = self.dim();
        for (field, v) in [("initial", &self.initial), ("certificate", &self.certificate)] {
            if let Some(v) = v {
                if v.len() != dim {
                    return Err(Error::invalid(field, format!("expected {dim} values, got {}", v.len())));
                }
            }
        }
        Ok(())
    }

    /// Whether the spec is placement-only (no routes).
    pub fn is_placement_only(&self) -> bool {
        self.routes.is_empty()
    }
}
