//! Discrete Dirichlet problems on planar conductance networks, their level
//! curves, and the rectangle tilings of the flat surfaces they induce.

pub mod audit;
pub mod cli;
pub mod error;
pub mod fixtures;
pub mod geometry;
pub mod io;
pub mod level;
pub mod network;
pub mod solver;
pub mod surgery;
pub mod svg;
pub mod tiler;

pub use error::{Error, Result};
pub use network::{PlanarComplex, Rules, ValidationReport, Violation};
pub use solver::{solve, solve_with, HarmonicField, VertexSet};
