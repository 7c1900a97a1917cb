//! Bloch-wave enriched finite elements for time-harmonic scattering at the
//! interface of periodic media in a vertically periodic wave guide.

pub mod analysis;
pub mod assembly;
pub mod cell;
pub mod config;
pub mod enrichment;
pub mod error;
pub mod export;
pub mod grid;
pub mod medium;
pub mod pipeline;
pub mod select;
pub mod solve;
pub mod sparse;

pub use faer::c64;

pub use analysis::{homogenized_a, snell_fresnel, RTReport};
pub use assembly::{EnrichedSystem, IncomingWave};
pub use cell::{BlochMode, CellGrid, CellProblem};
pub use config::{J2Policy, RunConfig, Source};
pub use enrichment::{BoxOperator, RadiationBasis};
pub use error::{Error, Result};
pub use grid::{build_grid, Grid, GridSpec, Side};
pub use medium::{DiscArray, Material, Medium};
pub use pipeline::{prepare, Prepared, SolveReport};
pub use select::{IndexEntry, IndexSet, SelectionParams};
pub use solve::{solve, SolutionField, SolverStats};
