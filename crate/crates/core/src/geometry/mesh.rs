//! Surface extraction and mesh/voxel file export.
//!
//! Fields are sampled at the centers of a regular box grid. The zero isosurface
//! is extracted by marching tetrahedra on a six-tetrahedron split of each grid
//! cube, which gives a closed, consistently oriented surface. Samples outside
//! the box are treated as void, so solids touching the box are capped exactly on
//! the box faces.

use std::collections::HashMap;
use std::io::Write;
use std::path::Path;

use crate::error::Result;
use crate::io::write_atomic;

/// Scalar samples at the cell centers of a box grid, ordered x-fastest.
#[derive(Debug, Clone, PartialEq)]
pub struct SampledField {
    pub dims: [usize; 3],
    pub origin: [f64; 3],
    pub spacing: [f64; 3],
    pub values: Vec<f64>,
}

impl SampledField {
    /// Samples `f` on a `dims` grid covering the box `[origin, origin + size]`.
    pub fn sample(
        f: impl Fn([f64; 3]) -> f64,
        dims: [usize; 3],
        origin: [f64; 3],
        size: [f64; 3],
    ) -> Self {
        let spacing = [
            size[0] / dims[0] as f64,
            size[1] / dims[1] as f64,
            size[2] / dims[2] as f64,
        ];
        let mut values = Vec::with_capacity(dims[0] * dims[1] * dims[2]);
        for k in 0..dims[2] {
            for j in 0..dims[1] {
                for i in 0..dims[0] {
                    values.push(f([
                        origin[0] + (i as f64 + 0.5) * spacing[0],
                        origin[1] + (j as f64 + 0.5) * spacing[1],
                        origin[2] + (k as f64 + 0.5) * spacing[2],
                    ]));
                }
            }
        }
        Self {
            dims,
            origin,
            spacing,
            values,
        }
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize, k: usize) -> f64 {
        self.values[i + self.dims[0] * (j + self.dims[1] * k)]
    }

    pub fn is_solid(&self, i: usize, j: usize, k: usize) -> bool {
        self.get(i, j, k) >= 0.0
    }

    /// Fraction of samples with `f ≥ 0`.
    pub fn solid_fraction(&self) -> f64 {
        let solid = self.values.iter().filter(|&&v| v >= 0.0).count();
        solid as f64 / self.values.len() as f64
    }

    pub fn box_volume(&self) -> f64 {
        (0..3)
            .map(|a| self.dims[a] as f64 * self.spacing[a])
            .product()
    }

    /// Value at padded index `p` (shifted by one), mirroring the nearest inside
    /// sample with a strictly negative value outside the box.
    fn padded(&self, p: [usize; 3]) -> f64 {
        let mut q = [0usize; 3];
        let mut outside = false;
        for a in 0..3 {
            if p[a] == 0 {
                q[a] = 0;
                outside = true;
            } else if p[a] > self.dims[a] {
                q[a] = self.dims[a] - 1;
                outside = true;
            } else {
                q[a] = p[a] - 1;
            }
        }
        let v = self.get(q[0], q[1], q[2]);
        if outside {
            -(v.abs()) - f64::MIN_POSITIVE
        } else {
            v
        }
    }

    /// Position of padded index `p`. Outside samples mirror the boundary samples
    /// across the box faces.
    fn padded_position(&self, p: [usize; 3]) -> [f64; 3] {
        let mut out = [0.0; 3];
        for a in 0..3 {
            out[a] = self.origin[a] + (p[a] as f64 - 0.5) * self.spacing[a];
        }
        out
    }
}

/// Indexed triangle mesh.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct TriangleMesh {
    pub vertices: Vec<[f64; 3]>,
    pub triangles: Vec<[u32; 3]>,
}

impl TriangleMesh {
    pub fn triangle_count(&self) -> usize {
        self.triangles.len()
    }

    /// Enclosed volume by the divergence theorem (positive for outward normals).
    pub fn signed_volume(&self) -> f64 {
        self.triangles
            .iter()
            .map(|t| {
                let [a, b, c] = t.map(|i| self.vertices[i as usize]);
                dot(a, cross(b, c)) / 6.0
            })
            .sum()
    }

    /// True when every directed edge is matched by its reverse exactly as often,
    /// so the triangles bound closed, consistently oriented surfaces.
    pub fn is_watertight(&self) -> bool {
        let mut count: HashMap<(u32, u32), i64> = HashMap::new();
        for t in &self.triangles {
            for e in 0..3 {
                let (a, b) = (t[e], t[(e + 1) % 3]);
                if a < b {
                    *count.entry((a, b)).or_default() += 1;
                } else {
                    *count.entry((b, a)).or_default() -= 1;
                }
            }
        }
        count.values().all(|&c| c == 0)
    }

    pub fn normal(&self, t: usize) -> [f64; 3] {
        let [a, b, c] = self.triangles[t].map(|i| self.vertices[i as usize]);
        let n = cross(sub(b, a), sub(c, a));
        let len = dot(n, n).sqrt();
        if len > 0.0 {
            [n[0] / len, n[1] / len, n[2] / len]
        } else {
            [0.0; 3]
        }
    }

    pub fn write_stl(&self, path: &Path) -> Result<()> {
        write_atomic(path, |w| self.write_stl_to(w))
    }

    /// Binary STL with an 80-byte header and little-endian `f32` records.
    pub fn write_stl_to(&self, w: &mut dyn Write) -> std::io::Result<()> {
        let mut header = [b' '; 80];
        let title = b"binary STL";
        header[..title.len()].copy_from_slice(title);
        w.write_all(&header)?;
        w.write_all(&(self.triangles.len() as u32).to_le_bytes())?;
        for t in 0..self.triangles.len() {
            for v in self.normal(t) {
                w.write_all(&(v as f32).to_le_bytes())?;
            }
            for &i in &self.triangles[t] {
                for v in self.vertices[i as usize] {
                    w.write_all(&(v as f32).to_le_bytes())?;
                }
            }
            w.write_all(&0u16.to_le_bytes())?;
        }
        Ok(())
    }
}

/// Reads a binary STL back into an unindexed mesh (three vertices per triangle).
pub fn read_stl(bytes: &[u8]) -> Option<TriangleMesh> {
    if bytes.len() < 84 {
        return None;
    }
    let n = u32::from_le_bytes(bytes[80..84].try_into().ok()?) as usize;
    if bytes.len() != 84 + 50 * n {
        return None;
    }
    let mut mesh = TriangleMesh::default();
    for t in 0..n {
        let rec = &bytes[84 + 50 * t..84 + 50 * (t + 1)];
        let f = |o: usize| f32::from_le_bytes(rec[o..o + 4].try_into().unwrap()) as f64;
        let base = mesh.vertices.len() as u32;
        for v in 0..3 {
            let o = 12 + 12 * v;
            mesh.vertices.push([f(o), f(o + 4), f(o + 8)]);
        }
        mesh.triangles.push([base, base + 1, base + 2]);
    }
    Some(mesh)
}

// Six tetrahedra sharing the cube diagonal 0–7; corners use bits (x, y, z).
const TETS: [[usize; 4]; 6] = [
    [0, 1, 3, 7],
    [0, 1, 5, 7],
    [0, 2, 3, 7],
    [0, 2, 6, 7],
    [0, 4, 5, 7],
    [0, 4, 6, 7],
];

/// Zero isosurface of `field` (solid where `f ≥ 0`), closed at the box faces.
pub fn marching_tetrahedra(field: &SampledField) -> TriangleMesh {
    let [nx, ny, nz] = field.dims;
    let pd = [nx + 2, ny + 2, nz + 2];
    let flat = |p: [usize; 3]| p[0] + pd[0] * (p[1] + pd[1] * p[2]);

    let mut mesh = TriangleMesh::default();
    let mut edge_vertex: HashMap<(usize, usize), u32> = HashMap::new();

    let mut vertex = |mesh: &mut TriangleMesh, a: ([usize; 3], f64), b: ([usize; 3], f64)| -> u32 {
        // `a` inside, `b` outside.
        let key = (flat(a.0).min(flat(b.0)), flat(a.0).max(flat(b.0)));
        *edge_vertex.entry(key).or_insert_with(|| {
            let t = a.1 / (a.1 - b.1);
            let pa = field.padded_position(a.0);
            let pb = field.padded_position(b.0);
            mesh.vertices.push([
                pa[0] + t * (pb[0] - pa[0]),
                pa[1] + t * (pb[1] - pa[1]),
                pa[2] + t * (pb[2] - pa[2]),
            ]);
            (mesh.vertices.len() - 1) as u32
        })
    };

    for k in 0..pd[2] - 1 {
        for j in 0..pd[1] - 1 {
            for i in 0..pd[0] - 1 {
                let corners: [([usize; 3], f64); 8] = std::array::from_fn(|c| {
                    let p = [i + (c & 1), j + ((c >> 1) & 1), k + ((c >> 2) & 1)];
                    (p, field.padded(p))
                });
                let solid = corners.iter().filter(|c| c.1 >= 0.0).count();
                if solid == 0 || solid == 8 {
                    continue;
                }
                for tet in TETS {
                    let v = tet.map(|c| corners[c]);
                    let inside: Vec<_> = v.iter().copied().filter(|c| c.1 >= 0.0).collect();
                    let outside: Vec<_> = v.iter().copied().filter(|c| c.1 < 0.0).collect();
                    let pos = |c: ([usize; 3], f64)| field.padded_position(c.0);
                    let orient = |a, b, c, d| {
                        det(
                            sub(pos(b), pos(a)),
                            sub(pos(c), pos(a)),
                            sub(pos(d), pos(a)),
                        )
                    };
                    // Winding follows the sign of the tetrahedron spanned by the labeled corners.
                    match inside.len() {
                        1 => {
                            let mut t = [
                                vertex(&mut mesh, inside[0], outside[0]),
                                vertex(&mut mesh, inside[0], outside[1]),
                                vertex(&mut mesh, inside[0], outside[2]),
                            ];
                            if orient(inside[0], outside[0], outside[1], outside[2]) < 0.0 {
                                t.swap(1, 2);
                            }
                            mesh.triangles.push(t);
                        }
                        3 => {
                            let mut t = [
                                vertex(&mut mesh, inside[0], outside[0]),
                                vertex(&mut mesh, inside[1], outside[0]),
                                vertex(&mut mesh, inside[2], outside[0]),
                            ];
                            if orient(outside[0], inside[0], inside[1], inside[2]) > 0.0 {
                                t.swap(1, 2);
                            }
                            mesh.triangles.push(t);
                        }
                        2 => {
                            let a = vertex(&mut mesh, inside[0], outside[0]);
                            let b = vertex(&mut mesh, inside[0], outside[1]);
                            let c = vertex(&mut mesh, inside[1], outside[1]);
                            let d = vertex(&mut mesh, inside[1], outside[0]);
                            if orient(inside[0], inside[1], outside[0], outside[1]) > 0.0 {
                                mesh.triangles.push([a, b, c]);
                                mesh.triangles.push([a, c, d]);
                            } else {
                                mesh.triangles.push([a, c, b]);
                                mesh.triangles.push([a, d, c]);
                            }
                        }
                        _ => {}
                    }
                }
            }
        }
    }
    mesh
}

/// Boundary faces of the solid samples, each voxel drawn as an axis-aligned cube.
pub fn voxel_surface(field: &SampledField) -> TriangleMesh {
    let [nx, ny, nz] = field.dims;
    let solid = |i: isize, j: isize, k: isize| {
        i >= 0
            && j >= 0
            && k >= 0
            && (i as usize) < nx
            && (j as usize) < ny
            && (k as usize) < nz
            && field.is_solid(i as usize, j as usize, k as usize)
    };
    let mut mesh = TriangleMesh::default();
    let mut ids: HashMap<[usize; 3], u32> = HashMap::new();
    let mut corner = |mesh: &mut TriangleMesh, p: [usize; 3]| -> u32 {
        *ids.entry(p).or_insert_with(|| {
            mesh.vertices.push([
                field.origin[0] + p[0] as f64 * field.spacing[0],
                field.origin[1] + p[1] as f64 * field.spacing[1],
                field.origin[2] + p[2] as f64 * field.spacing[2],
            ]);
            (mesh.vertices.len() - 1) as u32
        })
    };
    for k in 0..nz {
        for j in 0..ny {
            for i in 0..nx {
                if !field.is_solid(i, j, k) {
                    continue;
                }
                let (ii, jj, kk) = (i as isize, j as isize, k as isize);
                for axis in 0..3 {
                    for positive in [false, true] {
                        let step = if positive { 1 } else { -1 };
                        let mut n = [ii, jj, kk];
                        n[axis] += step;
                        if solid(n[0], n[1], n[2]) {
                            continue;
                        }
                        let (u, v) = ((axis + 1) % 3, (axis + 2) % 3);
                        let mut base = [i, j, k];
                        if positive {
                            base[axis] += 1;
                        }
                        let quad: [[usize; 3]; 4] = std::array::from_fn(|q| {
                            let mut p = base;
                            let (du, dv) = [(0, 0), (1, 0), (1, 1), (0, 1)][q];
                            p[u] += du;
                            p[v] += dv;
                            p
                        });
                        let mut idx = quad.map(|p| corner(&mut mesh, p));
                        // (u, v, axis) is right-handed, so this winding faces +axis.
                        if !positive {
                            idx.reverse();
                        }
                        mesh.triangles.push([idx[0], idx[1], idx[2]]);
                        mesh.triangles.push([idx[0], idx[2], idx[3]]);
                    }
                }
            }
        }
    }
    mesh
}

/// Samples `f` on the unit cube at `resolution³` and writes the isosurface as binary STL.
pub fn export_mesh(
    f: impl Fn([f64; 3]) -> f64,
    resolution: usize,
    path: &Path,
) -> Result<TriangleMesh> {
    let field = SampledField::sample(f, [resolution; 3], [0.0; 3], [1.0; 3]);
    let mesh = marching_tetrahedra(&field);
    mesh.write_stl(path)?;
    Ok(mesh)
}

/// Writes solid/void samples as a legacy VTK structured-points file with cell data.
pub fn write_vtk_voxels(field: &SampledField, path: &Path) -> Result<()> {
    write_atomic(path, |w| {
        let [nx, ny, nz] = field.dims;
        writeln!(w, "# vtk DataFile Version 3.0")?;
        writeln!(w, "voxel occupancy")?;
        writeln!(w, "ASCII")?;
        writeln!(w, "DATASET STRUCTURED_POINTS")?;
        writeln!(w, "DIMENSIONS {} {} {}", nx + 1, ny + 1, nz + 1)?;
        writeln!(
            w,
            "ORIGIN {} {} {}",
            field.origin[0], field.origin[1], field.origin[2]
        )?;
        writeln!(
            w,
            "SPACING {} {} {}",
            field.spacing[0], field.spacing[1], field.spacing[2]
        )?;
        writeln!(w, "CELL_DATA {}", nx * ny * nz)?;
        writeln!(w, "SCALARS solid unsigned_char 1")?;
        writeln!(w, "LOOKUP_TABLE default")?;
        for chunk in field.values.chunks(nx) {
            let line: Vec<&str> = chunk
                .iter()
                .map(|&v| if v >= 0.0 { "1" } else { "0" })
                .collect();
            writeln!(w, "{}", line.join(" "))?;
        }
        Ok(())
    })
}

fn sub(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

fn dot(a: [f64; 3], b: [f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

fn det(a: [f64; 3], b: [f64; 3], c: [f64; 3]) -> f64 {
    dot(a, cross(b, c))
}

fn cross(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{eval_merged, ShapeParams, TpmsKind};

    #[test]
    fn single_voxel_is_a_twelve_triangle_box() {
        let field = SampledField::sample(|_| 1.0, [1, 1, 1], [0.0; 3], [2.0, 3.0, 4.0]);
        let mesh = voxel_surface(&field);
        assert_eq!(mesh.triangle_count(), 12);
        assert_eq!(mesh.vertices.len(), 8);
        assert!(mesh.is_watertight());
        assert!((mesh.signed_volume() - 24.0).abs() < 1e-12);
    }

    #[test]
    fn full_field_isosurface_is_the_box() {
        // Faces land exactly on the box; edges and corners are chamfered within
        // half a sample spacing.
        let field = SampledField::sample(|_| 1.0, [24, 16, 32], [1.0, 0.0, -1.0], [3.0, 2.0, 4.0]);
        let mesh = marching_tetrahedra(&field);
        assert!(mesh.is_watertight());
        let v = mesh.signed_volume();
        assert!(v <= 24.0 + 1e-9 && v > 24.0 * 0.98, "{v}");
        for p in &mesh.vertices {
            assert!(p[0] >= 1.0 - 1e-12 && p[0] <= 4.0 + 1e-12);
            assert!(p[2] >= -1.0 - 1e-12 && p[2] <= 3.0 + 1e-12);
        }
    }

    #[test]
    fn empty_field_has_no_triangles() {
        let field = SampledField::sample(|_| -1.0, [4; 3], [0.0; 3], [1.0; 3]);
        assert_eq!(marching_tetrahedra(&field).triangle_count(), 0);
    }

    #[test]
    fn sphere_volume_is_close() {
        let r = 0.3;
        let f = |p: [f64; 3]| {
            r - ((p[0] - 0.5).powi(2) + (p[1] - 0.5).powi(2) + (p[2] - 0.5).powi(2)).sqrt()
        };
        let field = SampledField::sample(f, [40; 3], [0.0; 3], [1.0; 3]);
        let mesh = marching_tetrahedra(&field);
        assert!(mesh.is_watertight());
        let exact = 4.0 / 3.0 * std::f64::consts::PI * r.powi(3);
        assert!((mesh.signed_volume() - exact).abs() / exact < 0.01);
    }

    #[test]
    fn tpms_mesh_matches_voxel_density() {
        for kind in [TpmsKind::P, TpmsKind::D, TpmsKind::Frd] {
            let params = ShapeParams::pure(kind, 0.1).unwrap();
            let field =
                SampledField::sample(|p| eval_merged(&params, p), [24; 3], [0.0; 3], [1.0; 3]);
            let mesh = marching_tetrahedra(&field);
            assert!(mesh.is_watertight(), "{kind:?}");
            let want = field.solid_fraction();
            let got = mesh.signed_volume();
            assert!(
                (got - want).abs() / want < 0.05,
                "{kind:?}: {got} vs {want}"
            );
        }
    }

    #[test]
    fn stl_round_trip() {
        let field = SampledField::sample(|_| 1.0, [1, 1, 1], [0.0; 3], [1.0; 3]);
        let mesh = voxel_surface(&field);
        let mut bytes = Vec::new();
        mesh.write_stl_to(&mut bytes).unwrap();
        assert_eq!(bytes.len(), 84 + 50 * 12);
        let back = read_stl(&bytes).unwrap();
        assert_eq!(back.triangle_count(), 12);
        assert!((back.signed_volume() - 1.0).abs() < 1e-6);
    }

    #[test]
    fn vtk_header_and_size() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("v.vtk");
        let field = SampledField::sample(|x| x[0] - 0.5, [2, 2, 2], [0.0; 3], [1.0; 3]);
        write_vtk_voxels(&field, &p).unwrap();
        let text = std::fs::read_to_string(&p).unwrap();
        assert!(text.contains("DIMENSIONS 3 3 3"));
        assert!(text.contains("CELL_DATA 8"));
        assert!(text.trim_end().ends_with("0 1"));
    }
}
