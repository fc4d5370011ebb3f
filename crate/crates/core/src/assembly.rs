//! Turning an optimized `(E, ν)` field into a lattice of generated unit cells.
//!
//! Cell `(ex, ey)` of the macro grid occupies `[ex, ex+1] × [ey, ey+1] × [0, 1]`
//! in cell units (1 mm per cell). The blended field interpolates the cell fields
//! bilinearly between cell centers, so every internal face lies inside a
//! transition band one cell wide. Outside the outermost centers the nearest
//! cells are used unchanged.

use std::path::Path;

use rand::Rng as _;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::PropertyHull;
use crate::error::{AssemblyError, Result};
use crate::generative::GenerativeModel;
use crate::geometry::{
    blend_trig, eval_merged, face_overlap, marching_tetrahedra, sample_face, validity_check,
    voxelize, write_vtk_voxels, Face, SampledField, ShapeParams, TriangleMesh, Trig,
    ValidityCriteria,
};
use crate::homogenization::Homogenizer;
use crate::io::{fmt_f64, read_csv, write_csv_rows};
use crate::rng::stream;
use crate::topopt::DesignField;

/// Offset of the per-element noise streams.
const ASSIGN_STREAM: u64 = 3_000_000;

/// Chosen unit cell of one macro element.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CellAssignment {
    pub element: usize,
    pub params: ShapeParams,
    pub vf: f64,
    /// Requested condition `(E, ν)`.
    pub e: f64,
    pub nu: f64,
    /// Candidates that passed the validity filter.
    pub valid_candidates: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AssignmentConfig {
    pub candidates: usize,
    pub seed: u64,
    /// Voxels per cell edge for the density comparison and validity filter.
    pub resolution: usize,
    pub criteria: ValidityCriteria,
}

impl Default for AssignmentConfig {
    fn default() -> Self {
        Self {
            candidates: 10,
            seed: 7,
            resolution: 40,
            criteria: ValidityCriteria::default(),
        }
    }
}

fn assign_one(
    model: &GenerativeModel,
    element: usize,
    y: [f64; 2],
    config: &AssignmentConfig,
) -> Result<CellAssignment> {
    let mut rng = stream(config.seed, ASSIGN_STREAM + element as u64);
    let noise_dim = model.config.noise_dim;
    let mut best: Option<(ShapeParams, f64)> = None;
    let mut valid = 0;
    for _ in 0..config.candidates {
        let z: Vec<f64> = (0..noise_dim).map(|_| rng.sample(StandardNormal)).collect();
        let params = model.generate(y, &z)?;
        let grid = voxelize(&params, config.resolution)?;
        if !validity_check(&grid, &config.criteria).is_valid() {
            continue;
        }
        valid += 1;
        let vf = grid.volume_fraction();
        if best.is_none_or(|(_, b)| vf < b) {
            best = Some((params, vf));
        }
    }
    let (params, vf) = best.ok_or(AssemblyError::AssignmentFailure {
        element,
        candidates: config.candidates,
    })?;
    Ok(CellAssignment {
        element,
        params,
        vf,
        e: y[0],
        nu: y[1],
        valid_candidates: valid,
    })
}

/// Generates `candidates` cells per element and keeps the valid one with the lowest volume fraction.
pub fn assign_cells(
    field: &DesignField,
    model: &GenerativeModel,
    hull: Option<&PropertyHull>,
    config: &AssignmentConfig,
) -> Result<Vec<CellAssignment>> {
    if let Some(hull) = hull {
        let outside = field
            .e
            .iter()
            .zip(&field.nu)
            .filter(|(e, nu)| !hull.contains(**e, **nu, 1e-9))
            .count();
        if outside > 0 {
            log::warn!("{outside} element conditions lie outside the property hull; fidelity is not guaranteed there");
        }
    }
    (0..field.len())
        .into_par_iter()
        .map(|i| assign_one(model, i, [field.e[i], field.nu[i]], config))
        .collect()
}

/// Row-major grid of unit cells with its bilinearly blended global field.
#[derive(Debug, Clone, PartialEq)]
pub struct AssembledStructure {
    pub nx: usize,
    pub ny: usize,
    pub cells: Vec<ShapeParams>,
    /// Volume fraction of each cell on its own.
    pub vfs: Vec<f64>,
}

/// Bracketing cell indices and weight along one axis for center-to-center interpolation.
fn bracket(x: f64, n: usize) -> (usize, usize, f64) {
    let u = x - 0.5;
    if n == 1 || u <= 0.0 {
        return (0, 0, 0.0);
    }
    if u >= (n - 1) as f64 {
        return (n - 1, n - 1, 0.0);
    }
    let i = u.floor() as usize;
    (i, i + 1, u - i as f64)
}

/// Validates an assignment grid and builds the structure.
pub fn synthesize(
    assignments: &[CellAssignment],
    nx: usize,
    ny: usize,
) -> Result<AssembledStructure> {
    if assignments.len() != nx * ny || nx == 0 || ny == 0 {
        return Err(AssemblyError::Incomplete {
            expected: nx * ny,
            got: assignments.len(),
        }
        .into());
    }
    let mut sorted = assignments.to_vec();
    sorted.sort_by_key(|a| a.element);
    if sorted.iter().enumerate().any(|(i, a)| a.element != i) {
        return Err(AssemblyError::Incomplete {
            expected: nx * ny,
            got: assignments.len(),
        }
        .into());
    }
    Ok(AssembledStructure {
        nx,
        ny,
        cells: sorted.iter().map(|a| a.params).collect(),
        vfs: sorted.iter().map(|a| a.vf).collect(),
    })
}

impl AssembledStructure {
    pub fn cell(&self, ex: usize, ey: usize) -> &ShapeParams {
        &self.cells[ey * self.nx + ex]
    }

    /// Mean cell volume fraction (all cells have equal volume).
    pub fn density(&self) -> f64 {
        self.vfs.iter().sum::<f64>() / self.vfs.len() as f64
    }

    /// Blended field at a global point.
    pub fn eval_blended(&self, p: [f64; 3]) -> f64 {
        let trig = Trig::at(p);
        let (i0, i1, s) = bracket(p[0], self.nx);
        let (j0, j1, t) = bracket(p[1], self.ny);
        let low = blend_trig(self.cell(i0, j0), self.cell(i1, j0), s, &trig);
        if t == 0.0 {
            return low;
        }
        let high = blend_trig(self.cell(i0, j1), self.cell(i1, j1), s, &trig);
        (1.0 - t) * low + t * high
    }

    /// Each cell's own field inside its box, without transitions.
    pub fn eval_unblended(&self, p: [f64; 3]) -> f64 {
        let ex = (p[0].floor().max(0.0) as usize).min(self.nx - 1);
        let ey = (p[1].floor().max(0.0) as usize).min(self.ny - 1);
        eval_merged(self.cell(ex, ey), p)
    }

    /// Samples the structure box at `per_cell` points per cell edge, z-slices in parallel.
    pub fn sample(&self, per_cell: usize, blended: bool) -> SampledField {
        let dims = [self.nx * per_cell, self.ny * per_cell, per_cell];
        let h = 1.0 / per_cell as f64;
        let values: Vec<f64> = (0..dims[2])
            .into_par_iter()
            .flat_map_iter(|k| {
                let mut slice = Vec::with_capacity(dims[0] * dims[1]);
                for j in 0..dims[1] {
                    for i in 0..dims[0] {
                        let p = [
                            (i as f64 + 0.5) * h,
                            (j as f64 + 0.5) * h,
                            (k as f64 + 0.5) * h,
                        ];
                        slice.push(if blended {
                            self.eval_blended(p)
                        } else {
                            self.eval_unblended(p)
                        });
                    }
                }
                slice
            })
            .collect();
        SampledField {
            dims,
            origin: [0.0; 3],
            spacing: [h; 3],
            values,
        }
    }
}

/// Overlap across one internal face, on the unblended and blended geometry.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InterfaceOverlap {
    pub a: usize,
    pub b: usize,
    /// 0 for faces normal to x, 1 for faces normal to y.
    pub axis: usize,
    /// Percent; `None` when neither side has material on the face.
    pub unblended: Option<f64>,
    pub blended: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OverlapSummary {
    pub interfaces: usize,
    pub undefined: usize,
    pub min: f64,
    pub mean: f64,
    /// Counts per 10% bin; the last bin includes 100%.
    pub histogram: [usize; 10],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConnectivityReport {
    pub rows: Vec<InterfaceOverlap>,
    pub unblended: OverlapSummary,
    pub blended: OverlapSummary,
}

fn summarize(values: impl Iterator<Item = Option<f64>>) -> OverlapSummary {
    let mut s = OverlapSummary {
        interfaces: 0,
        undefined: 0,
        min: f64::NAN,
        mean: f64::NAN,
        histogram: [0; 10],
    };
    let mut defined = Vec::new();
    for v in values {
        s.interfaces += 1;
        match v {
            Some(v) => defined.push(v),
            None => s.undefined += 1,
        }
    }
    if !defined.is_empty() {
        s.min = defined.iter().copied().fold(f64::INFINITY, f64::min);
        s.mean = defined.iter().sum::<f64>() / defined.len() as f64;
        for v in &defined {
            s.histogram[((v / 10.0).floor() as usize).min(9)] += 1;
        }
    }
    s
}

/// Face overlap on every internal interface, sampling both sides' fields on the shared plane.
pub fn connectivity_report(
    structure: &AssembledStructure,
    resolution: usize,
) -> ConnectivityReport {
    let (nx, ny) = (structure.nx, structure.ny);
    let mut pairs = Vec::new();
    for ey in 0..ny {
        for ex in 0..nx {
            if ex + 1 < nx {
                pairs.push((ex, ey, 0));
            }
            if ey + 1 < ny {
                pairs.push((ex, ey, 1));
            }
        }
    }
    let rows: Vec<InterfaceOverlap> = pairs
        .par_iter()
        .map(|&(ex, ey, axis)| {
            let (bx, by, pos, neg) = if axis == 0 {
                (ex + 1, ey, Face::XPos, Face::XNeg)
            } else {
                (ex, ey + 1, Face::YPos, Face::YNeg)
            };
            let (a, b) = (structure.cell(ex, ey), structure.cell(bx, by));
            let oa = [ex as f64, ey as f64, 0.0];
            let ob = [bx as f64, by as f64, 0.0];
            let own = |c: &ShapeParams| {
                let c = *c;
                move |p: [f64; 3]| eval_merged(&c, p)
            };
            let unblended = face_overlap(
                &sample_face(own(a), pos, resolution, oa),
                &sample_face(own(b), neg, resolution, ob),
            )
            .ok();
            let blend = |p: [f64; 3]| structure.eval_blended(p);
            let blended = face_overlap(
                &sample_face(blend, pos, resolution, oa),
                &sample_face(blend, neg, resolution, ob),
            )
            .ok();
            InterfaceOverlap {
                a: ey * nx + ex,
                b: by * nx + bx,
                axis,
                unblended,
                blended,
            }
        })
        .collect();
    ConnectivityReport {
        unblended: summarize(rows.iter().map(|r| r.unblended)),
        blended: summarize(rows.iter().map(|r| r.blended)),
        rows,
    }
}

pub const OVERLAP_HEADER: [&str; 5] = [
    "cell_a",
    "cell_b",
    "axis",
    "overlap_unblended",
    "overlap_blended",
];

pub fn write_overlap_report(path: &Path, report: &ConnectivityReport) -> Result<()> {
    let opt = |v: Option<f64>| v.map(fmt_f64).unwrap_or_default();
    let rows: Vec<Vec<String>> = report
        .rows
        .iter()
        .map(|r| {
            vec![
                r.a.to_string(),
                r.b.to_string(),
                ["x", "y"][r.axis].to_string(),
                opt(r.unblended),
                opt(r.blended),
            ]
        })
        .collect();
    write_csv_rows(path, &OVERLAP_HEADER, &rows)
}

pub const ASSIGNMENT_HEADER: [&str; 11] = [
    "element",
    "alpha1",
    "alpha2",
    "alpha3",
    "t1",
    "t2",
    "t3",
    "vf",
    "E",
    "nu",
    "valid_candidates",
];

pub fn write_assignments(path: &Path, assignments: &[CellAssignment]) -> Result<()> {
    let rows: Vec<Vec<String>> = assignments
        .iter()
        .map(|a| {
            let mut row = vec![a.element.to_string()];
            row.extend(a.params.to_array().iter().map(|v| fmt_f64(*v)));
            row.extend([
                fmt_f64(a.vf),
                fmt_f64(a.e),
                fmt_f64(a.nu),
                a.valid_candidates.to_string(),
            ]);
            row
        })
        .collect();
    write_csv_rows(path, &ASSIGNMENT_HEADER, &rows)
}

pub fn read_assignments(path: &Path) -> Result<Vec<CellAssignment>> {
    let (header, rows) = read_csv(path)?;
    let malformed =
        |m: String| crate::error::DatasetError::Malformed(format!("{}: {m}", path.display()));
    if header != ASSIGNMENT_HEADER {
        return Err(malformed(format!("unexpected header {header:?}")).into());
    }
    rows.iter()
        .map(|row| {
            let num = |k: usize| {
                row[k]
                    .parse::<f64>()
                    .map_err(|e| malformed(format!("column {}: {e}", ASSIGNMENT_HEADER[k])))
            };
            let int = |k: usize| {
                row[k]
                    .parse::<usize>()
                    .map_err(|e| malformed(format!("column {}: {e}", ASSIGNMENT_HEADER[k])))
            };
            let params =
                ShapeParams::from_array([num(1)?, num(2)?, num(3)?, num(4)?, num(5)?, num(6)?])?;
            Ok(CellAssignment {
                element: int(0)?,
                params,
                vf: num(7)?,
                e: num(8)?,
                nu: num(9)?,
                valid_candidates: int(10)?,
            })
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExportFormat {
    Stl,
    Vtk,
}

/// Result of an export with the volume cross-check.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExportSummary {
    pub triangles: usize,
    /// Sampled solid fraction times the box volume (mm³).
    pub voxel_volume: f64,
    /// Divergence-theorem volume of the mesh (mm³); `None` for voxel output.
    pub mesh_volume: Option<f64>,
}

/// Writes the blended structure as an STL surface or a VTK voxel grid.
pub fn export_structure(
    structure: &AssembledStructure,
    format: ExportFormat,
    per_cell: usize,
    path: &Path,
) -> Result<ExportSummary> {
    let field = structure.sample(per_cell, true);
    let voxel_volume = field.solid_fraction() * field.box_volume();
    match format {
        ExportFormat::Stl => {
            let mesh: TriangleMesh = marching_tetrahedra(&field);
            mesh.write_stl(path)?;
            Ok(ExportSummary {
                triangles: mesh.triangle_count(),
                voxel_volume,
                mesh_volume: Some(mesh.signed_volume()),
            })
        }
        ExportFormat::Vtk => {
            write_vtk_voxels(&field, path)?;
            Ok(ExportSummary {
                triangles: 0,
                voxel_volume,
                mesh_volume: None,
            })
        }
    }
}

/// Homogenized properties actually delivered by each chosen cell, as a macro field.
pub fn achieved_field(
    structure: &AssembledStructure,
    homogenizer: &Homogenizer,
    resolution: usize,
) -> Result<DesignField> {
    let props: Vec<(f64, f64)> = structure
        .cells
        .par_iter()
        .map(|c| {
            homogenizer
                .homogenize(c, resolution)
                .map(|p| (p.e_h, p.nu_h))
        })
        .collect::<Result<_, _>>()?;
    Ok(DesignField {
        nx: structure.nx,
        ny: structure.ny,
        e: props.iter().map(|p| p.0).collect(),
        nu: props.iter().map(|p| p.1).collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cells() -> (ShapeParams, ShapeParams) {
        (
            ShapeParams::new([0.7, 0.2, 0.1], [0.1, 0.0, -0.2]).unwrap(),
            ShapeParams::new([0.1, 0.1, 0.8], [-0.3, 0.2, 0.35]).unwrap(),
        )
    }

    fn structure(
        nx: usize,
        ny: usize,
        f: impl Fn(usize, usize) -> ShapeParams,
    ) -> AssembledStructure {
        let cells: Vec<_> = (0..nx * ny).map(|i| f(i % nx, i / nx)).collect();
        AssembledStructure {
            nx,
            ny,
            vfs: vec![0.5; cells.len()],
            cells,
        }
    }

    #[test]
    fn uniform_structure_tiles_one_cell() {
        let (a, _) = cells();
        let s = structure(3, 2, |_, _| a);
        for p in [[0.3f64, 0.2, 0.1], [1.7, 1.4, 0.6], [2.95, 0.5, 0.9]] {
            let local = [p[0].fract(), p[1].fract(), p[2]];
            assert!((s.eval_blended(p) - eval_merged(&a, local)).abs() < 1e-12);
            assert!((s.eval_unblended(p) - eval_merged(&a, local)).abs() < 1e-12);
        }
        let report = connectivity_report(&s, 16);
        assert_eq!(report.rows.len(), 2 * 2 + 3);
        assert!(report
            .rows
            .iter()
            .all(|r| r.unblended == Some(100.0) && r.blended == Some(100.0)));
    }

    #[test]
    fn blended_field_keeps_outer_cells_at_their_centers() {
        let (a, b) = cells();
        let s = structure(2, 1, |x, _| if x == 0 { a } else { b });
        for p in [[0.5, 0.3, 0.2], [0.1, 0.7, 0.4]] {
            assert_eq!(s.eval_blended(p), s.eval_unblended(p));
        }
        let p = [1.0, 0.4, 0.6];
        let expect = 0.5 * eval_merged(&a, p) + 0.5 * eval_merged(&b, p);
        assert!((s.eval_blended(p) - expect).abs() < 1e-12);
    }

    #[test]
    fn two_cell_interface_is_fully_overlapping_after_blending() {
        let (a, b) = cells();
        let s = structure(2, 1, |x, _| if x == 0 { a } else { b });
        let report = connectivity_report(&s, 40);
        assert_eq!(report.rows.len(), 1);
        assert_eq!(report.rows[0].blended, Some(100.0));
        assert!(report.rows[0].unblended.unwrap() < 100.0);
    }

    #[test]
    fn incomplete_grid_is_rejected() {
        let (a, _) = cells();
        let one = CellAssignment {
            element: 0,
            params: a,
            vf: 0.4,
            e: 50.0,
            nu: 0.3,
            valid_candidates: 1,
        };
        assert!(synthesize(&[one], 2, 1).is_err());
        assert!(synthesize(&[one, one], 2, 1).is_err());
        let two = CellAssignment { element: 1, ..one };
        assert_eq!(synthesize(&[two, one], 2, 1).unwrap().density(), 0.4);
    }

    #[test]
    fn assignments_csv_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("a.csv");
        let (a, b) = cells();
        let rows = vec![
            CellAssignment {
                element: 0,
                params: a,
                vf: 0.41,
                e: 55.5,
                nu: 0.281,
                valid_candidates: 9,
            },
            CellAssignment {
                element: 1,
                params: b,
                vf: 0.52,
                e: 90.0,
                nu: 0.25,
                valid_candidates: 10,
            },
        ];
        write_assignments(&p, &rows).unwrap();
        assert_eq!(read_assignments(&p).unwrap(), rows);
    }

    #[test]
    fn histogram_puts_full_overlap_in_the_last_bin() {
        let s = summarize([Some(100.0), Some(95.0), Some(37.0), None].into_iter());
        assert_eq!(s.interfaces, 4);
        assert_eq!(s.undefined, 1);
        assert_eq!(s.histogram[9], 2);
        assert_eq!(s.histogram[3], 1);
        assert_eq!(s.min, 37.0);
    }
}
