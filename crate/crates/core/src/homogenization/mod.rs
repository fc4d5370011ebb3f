//! Periodic voxel homogenization under six unit macroscopic strains.

mod hex8;
mod material;
mod periodic;

pub use hex8::{
    hex8_stiffness, node_offset, rigid_body_modes, strain_matrix, unit_strain_displacement,
    ElementMatrix, ElementVector,
};
pub use material::{
    effective_properties, isotropic_constitutive, lame_parameters, ConstitutiveMatrix,
    EffectiveProps, MaterialConstants, BASE_E, BASE_NU,
};
pub use periodic::{
    assemble_loads, element_nodes, homogenized_constitutive, solve_case, solve_cases, NodeBlock,
    PeriodicSystem, SolverSettings,
};

use crate::error::{HomogenizationError, Result};
use crate::geometry::{validity_check, voxelize, ShapeParams, ValidityCriteria, VoxelGrid};

/// Default analysis resolution (voxels per cell edge).
pub const DEFAULT_RESOLUTION: usize = 40;

/// Homogenization pipeline with a fixed base material and solver settings.
#[derive(Debug, Clone, Copy)]
pub struct Homogenizer {
    pub material: MaterialConstants,
    pub solver: SolverSettings,
    pub criteria: ValidityCriteria,
}

impl Default for Homogenizer {
    fn default() -> Self {
        Self {
            material: MaterialConstants::base(),
            solver: SolverSettings::default(),
            criteria: ValidityCriteria::default(),
        }
    }
}

impl Homogenizer {
    /// `C^H` of a voxel grid; all-void grids give the zero matrix.
    pub fn constitutive(&self, grid: &VoxelGrid) -> Result<ConstitutiveMatrix> {
        if grid.solid_count() == 0 {
            return Ok(ConstitutiveMatrix::zeros());
        }
        let edge = 1.0 / grid.resolution() as f64;
        let k_e = hex8_stiffness(&self.material.constitutive(), edge);
        let loads = assemble_loads(grid, &k_e, edge)?;
        let chi = solve_cases(grid, &k_e, &loads, &self.solver)?;
        Ok(homogenized_constitutive(grid, &k_e, &chi, edge))
    }

    /// Full properties of a grid, without the validity filter.
    pub fn homogenize_grid(&self, grid: &VoxelGrid) -> Result<EffectiveProps> {
        let c_h = self.constitutive(grid)?;
        let (e_h, nu_h) = effective_properties(&c_h)?;
        Ok(EffectiveProps { c_h, e_h, nu_h })
    }

    /// Voxelizes, checks validity, and homogenizes one cell.
    pub fn homogenize(&self, params: &ShapeParams, resolution: usize) -> Result<EffectiveProps> {
        params.validate()?;
        let grid = voxelize(params, resolution)?;
        let validity = validity_check(&grid, &self.criteria);
        if !validity.is_valid() {
            return Err(HomogenizationError::InvalidCell(validity.reason()).into());
        }
        self.homogenize_grid(&grid)
    }
}

/// Homogenizes `params` at `resolution` with the default base material.
pub fn homogenize(params: &ShapeParams, resolution: usize) -> Result<EffectiveProps> {
    Homogenizer::default().homogenize(params, resolution)
}
