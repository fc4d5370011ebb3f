//! Graded cellular structures from TPMS unit cells.
//!
//! The pipeline voxelizes merged TPMS cells, homogenizes them, learns the
//! inverse property-to-shape mapping with a conditional generative model,
//! optimizes macro-scale `(E, ν)` fields, and assembles the matching lattice.

pub mod assembly;
pub mod dataset;
pub mod error;
pub mod generative;
pub mod geometry;
pub mod homogenization;
pub mod io;
pub mod nn;
pub mod rng;
pub mod topopt;

pub use error::{Error, Result};
