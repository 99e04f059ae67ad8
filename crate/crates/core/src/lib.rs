//! Placement and routing of sphere-decomposed rigid bodies.
//!
//! Bodies are sets of disjoint spheres with ports; routes are polylines
//! between ports through free control points. A design vector holds one
//! pose per body followed by the route control points.

pub mod bench;
pub mod boundary;
pub mod constraints;
pub mod error;
pub mod frameworks;
pub mod geometry;
pub mod objectives;
pub mod physics;
pub mod problem;
pub mod solver;

pub use error::{Error, Result};
pub use geometry::{Body, Pose, PortRef, Route, Sphere, Vec3};
pub use problem::ProblemSpec;
