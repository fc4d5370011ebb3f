//! Independent reference computations for checking `gradcell` end to end.
//!
//! Nothing here calls into the solvers it checks: the homogenization oracle
//! assembles and factors a dense system, the hull oracle tests every point pair,
//! and the STL reader parses the binary format directly.

pub mod dense;
pub mod fd;
pub mod hull;
pub mod stl;
