//! Benchmarks with known optima, primitive decomposition, enumeration of
//! discrete optima, benchmark runs and scene files.

pub mod decompose;
pub mod enumerate;
pub mod generators;
pub mod run;
pub mod scene;
pub mod shapes;
