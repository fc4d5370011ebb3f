//! Unit-cell geometry: TPMS fields, voxelization, face masks, validity, blending, meshes.

mod blend;
mod mesh;
mod tpms;
mod voxel;

pub(crate) use blend::blend_trig;
pub use blend::{blend_cells, TransitionCell};
pub use mesh::{
    export_mesh, marching_tetrahedra, read_stl, voxel_surface, write_vtk_voxels, SampledField,
    TriangleMesh,
};
pub(crate) use tpms::Trig;
pub use tpms::{eval_basis, eval_merged, ShapeParams, TpmsKind, PD_WEIGHT, T_MAX, T_MIN};
pub use voxel::{
    extract_face, face_overlap, periodic_components, sample_face, validity_check, volume_fraction,
    voxelize, Axis, Face, FaceMask, Validity, ValidityCriteria, VoxelGrid,
};
