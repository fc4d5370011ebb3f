use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use super::tpms::{ShapeParams, Trig};
use crate::error::GeometryError;

/// Cubic binary occupancy grid over the unit cube, ordered x-fastest, then y, then z.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VoxelGrid {
    resolution: usize,
    occupancy: Vec<bool>,
}

impl VoxelGrid {
    pub fn new(resolution: usize, occupancy: Vec<bool>) -> Result<Self, GeometryError> {
        if resolution == 0 {
            return Err(GeometryError::Resolution { min: 1, got: 0 });
        }
        if occupancy.len() != resolution.pow(3) {
            return Err(GeometryError::InvalidParams(format!(
                "occupancy length {} does not match resolution {resolution}",
                occupancy.len()
            )));
        }
        Ok(Self {
            resolution,
            occupancy,
        })
    }

    pub fn filled(resolution: usize, solid: bool) -> Self {
        Self {
            resolution,
            occupancy: vec![solid; resolution.pow(3)],
        }
    }

    pub fn from_fn(resolution: usize, mut f: impl FnMut(usize, usize, usize) -> bool) -> Self {
        let n = resolution;
        let mut occupancy = Vec::with_capacity(n * n * n);
        for k in 0..n {
            for j in 0..n {
                for i in 0..n {
                    occupancy.push(f(i, j, k));
                }
            }
        }
        Self {
            resolution,
            occupancy,
        }
    }

    #[inline]
    pub fn resolution(&self) -> usize {
        self.resolution
    }

    pub fn occupancy(&self) -> &[bool] {
        &self.occupancy
    }

    #[inline]
    pub fn index(&self, i: usize, j: usize, k: usize) -> usize {
        i + self.resolution * (j + self.resolution * k)
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize, k: usize) -> bool {
        self.occupancy[self.index(i, j, k)]
    }

    pub fn set(&mut self, i: usize, j: usize, k: usize, solid: bool) {
        let idx = self.index(i, j, k);
        self.occupancy[idx] = solid;
    }

    pub fn solid_count(&self) -> usize {
        self.occupancy.iter().filter(|&&s| s).count()
    }

    pub fn volume_fraction(&self) -> f64 {
        self.solid_count() as f64 / self.occupancy.len() as f64
    }

    /// Center of voxel `(i, j, k)` in unit-cube coordinates.
    pub fn center(&self, i: usize, j: usize, k: usize) -> [f64; 3] {
        let n = self.resolution as f64;
        [
            (i as f64 + 0.5) / n,
            (j as f64 + 0.5) / n,
            (k as f64 + 0.5) / n,
        ]
    }
}

/// Voxel-center membership test of the merged field (`solid = f >= 0`).
pub fn voxelize(params: &ShapeParams, resolution: usize) -> Result<VoxelGrid, GeometryError> {
    if resolution < 2 {
        return Err(GeometryError::Resolution {
            min: 2,
            got: resolution,
        });
    }
    let n = resolution;
    let axis: Vec<_> = (0..n)
        .map(|i| Trig::axis((i as f64 + 0.5) / n as f64))
        .collect();
    let mut occupancy = Vec::with_capacity(n * n * n);
    for k in 0..n {
        for j in 0..n {
            for i in 0..n {
                let trig = Trig::compose(axis[i], axis[j], axis[k]);
                occupancy.push(params.eval_trig(&trig) >= 0.0);
            }
        }
    }
    Ok(VoxelGrid {
        resolution,
        occupancy,
    })
}

pub fn volume_fraction(grid: &VoxelGrid) -> f64 {
    grid.volume_fraction()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Axis {
    X,
    Y,
    Z,
}

impl Axis {
    pub const ALL: [Axis; 3] = [Axis::X, Axis::Y, Axis::Z];

    pub fn index(self) -> usize {
        match self {
            Axis::X => 0,
            Axis::Y => 1,
            Axis::Z => 2,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Face {
    XNeg,
    XPos,
    YNeg,
    YPos,
    ZNeg,
    ZPos,
}

impl Face {
    pub const ALL: [Face; 6] = [
        Face::XNeg,
        Face::XPos,
        Face::YNeg,
        Face::YPos,
        Face::ZNeg,
        Face::ZPos,
    ];

    pub fn axis(self) -> Axis {
        match self {
            Face::XNeg | Face::XPos => Axis::X,
            Face::YNeg | Face::YPos => Axis::Y,
            Face::ZNeg | Face::ZPos => Axis::Z,
        }
    }

    pub fn is_positive(self) -> bool {
        matches!(self, Face::XPos | Face::YPos | Face::ZPos)
    }

    pub fn opposite(self) -> Face {
        match self {
            Face::XNeg => Face::XPos,
            Face::XPos => Face::XNeg,
            Face::YNeg => Face::YPos,
            Face::YPos => Face::YNeg,
            Face::ZNeg => Face::ZPos,
            Face::ZPos => Face::ZNeg,
        }
    }

    /// In-plane axes `(u, v)` of the face; pixel `(a, b)` sits at index `a + n·b`.
    pub fn plane_axes(self) -> (usize, usize) {
        match self.axis() {
            Axis::X => (1, 2),
            Axis::Y => (0, 2),
            Axis::Z => (0, 1),
        }
    }
}

/// Solid pattern on one boundary face of a cell.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FaceMask {
    resolution: usize,
    pixels: Vec<bool>,
}

impl FaceMask {
    pub fn new(resolution: usize, pixels: Vec<bool>) -> Result<Self, GeometryError> {
        if pixels.len() != resolution * resolution {
            return Err(GeometryError::InvalidParams(format!(
                "mask length {} does not match resolution {resolution}",
                pixels.len()
            )));
        }
        Ok(Self { resolution, pixels })
    }

    pub fn resolution(&self) -> usize {
        self.resolution
    }

    pub fn pixels(&self) -> &[bool] {
        &self.pixels
    }

    pub fn get(&self, a: usize, b: usize) -> bool {
        self.pixels[a + self.resolution * b]
    }

    pub fn count(&self) -> usize {
        self.pixels.iter().filter(|&&p| p).count()
    }

    pub fn is_empty(&self) -> bool {
        self.count() == 0
    }

    fn remap(&self, f: impl Fn(usize, usize) -> (usize, usize)) -> Self {
        let n = self.resolution;
        let mut pixels = vec![false; n * n];
        for b in 0..n {
            for a in 0..n {
                let (sa, sb) = f(a, b);
                pixels[a + n * b] = self.get(sa, sb);
            }
        }
        Self {
            resolution: n,
            pixels,
        }
    }

    pub fn transposed(&self) -> Self {
        self.remap(|a, b| (b, a))
    }

    pub fn flipped_u(&self) -> Self {
        let n = self.resolution;
        self.remap(|a, b| (n - 1 - a, b))
    }

    pub fn flipped_v(&self) -> Self {
        let n = self.resolution;
        self.remap(|a, b| (a, n - 1 - b))
    }

    /// The eight images of the mask under the square's symmetry group.
    pub fn symmetry_images(&self) -> Vec<FaceMask> {
        let mut out = Vec::with_capacity(8);
        for base in [self.clone(), self.transposed()] {
            let fu = base.flipped_u();
            let fv = base.flipped_v();
            let fuv = fu.flipped_v();
            out.extend([base, fu, fv, fuv]);
        }
        out
    }
}

/// Boundary voxel layer of `grid` on `face`, projected onto the face plane.
pub fn extract_face(grid: &VoxelGrid, face: Face) -> FaceMask {
    let n = grid.resolution();
    let layer = if face.is_positive() { n - 1 } else { 0 };
    let mut pixels = Vec::with_capacity(n * n);
    for b in 0..n {
        for a in 0..n {
            let solid = match face.axis() {
                Axis::X => grid.get(layer, a, b),
                Axis::Y => grid.get(a, layer, b),
                Axis::Z => grid.get(a, b, layer),
            };
            pixels.push(solid);
        }
    }
    FaceMask {
        resolution: n,
        pixels,
    }
}

/// Samples `field >= 0` at the pixel centers of a face plane of the unit cell.
///
/// The plane sits at coordinate 0 for negative faces and 1 for positive faces.
/// `origin` offsets every sample, so a cell at integer offset in a larger
/// structure can be sampled in global coordinates.
pub fn sample_face(
    field: impl Fn([f64; 3]) -> f64,
    face: Face,
    resolution: usize,
    origin: [f64; 3],
) -> FaceMask {
    let n = resolution;
    let (ua, va) = face.plane_axes();
    let normal = face.axis().index();
    let mut pixels = Vec::with_capacity(n * n);
    for b in 0..n {
        for a in 0..n {
            let mut p = origin;
            p[ua] += (a as f64 + 0.5) / n as f64;
            p[va] += (b as f64 + 0.5) / n as f64;
            if face.is_positive() {
                p[normal] += 1.0;
            }
            pixels.push(field(p) >= 0.0);
        }
    }
    FaceMask {
        resolution: n,
        pixels,
    }
}

/// Overlap percentage `|A ∩ B| / min(|A|, |B|) · 100`.
///
/// Exactly one empty mask means no contact and gives 0; two empty masks are an error.
pub fn face_overlap(a: &FaceMask, b: &FaceMask) -> Result<f64, GeometryError> {
    if a.resolution != b.resolution {
        return Err(GeometryError::ResolutionMismatch(
            a.resolution,
            b.resolution,
        ));
    }
    let (ca, cb) = (a.count(), b.count());
    if ca == 0 && cb == 0 {
        return Err(GeometryError::UndefinedOverlap);
    }
    let smaller = ca.min(cb);
    if smaller == 0 {
        return Ok(0.0);
    }
    let both = a
        .pixels
        .iter()
        .zip(&b.pixels)
        .filter(|(&p, &q)| p && q)
        .count();
    Ok(both as f64 / smaller as f64 * 100.0)
}

/// Thresholds of the unit-cell validity filter.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ValidityCriteria {
    /// Minimum solid fraction of every axis-aligned voxel slice.
    pub min_section_fraction: f64,
}

impl Default for ValidityCriteria {
    fn default() -> Self {
        Self {
            min_section_fraction: 0.02,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Validity {
    Valid,
    EmptyFace(Face),
    Disconnected {
        components: usize,
    },
    ThinSection {
        axis: Axis,
        slice: usize,
        fraction: f64,
    },
}

impl Validity {
    pub fn is_valid(&self) -> bool {
        matches!(self, Validity::Valid)
    }

    pub fn reason(&self) -> String {
        match self {
            Validity::Valid => "valid".to_string(),
            Validity::EmptyFace(face) => format!("empty boundary face {face:?}"),
            Validity::Disconnected { components } => {
                format!("solid phase has {components} components")
            }
            Validity::ThinSection {
                axis,
                slice,
                fraction,
            } => format!("slice {slice} along {axis:?} has solid fraction {fraction:.4}"),
        }
    }
}

/// Number of 6-connected solid components, with periodic wrap-around on all axes.
pub fn periodic_components(grid: &VoxelGrid) -> usize {
    let n = grid.resolution();
    let mut seen = vec![false; grid.occupancy.len()];
    let mut components = 0;
    let mut queue = VecDeque::new();
    for start in 0..grid.occupancy.len() {
        if !grid.occupancy[start] || seen[start] {
            continue;
        }
        components += 1;
        seen[start] = true;
        queue.push_back(start);
        while let Some(idx) = queue.pop_front() {
            let i = idx % n;
            let j = (idx / n) % n;
            let k = idx / (n * n);
            let neighbors = [
                ((i + 1) % n, j, k),
                ((i + n - 1) % n, j, k),
                (i, (j + 1) % n, k),
                (i, (j + n - 1) % n, k),
                (i, j, (k + 1) % n),
                (i, j, (k + n - 1) % n),
            ];
            for (a, b, c) in neighbors {
                let nidx = grid.index(a, b, c);
                if grid.occupancy[nidx] && !seen[nidx] {
                    seen[nidx] = true;
                    queue.push_back(nidx);
                }
            }
        }
    }
    components
}

/// Rejects cells with an empty boundary face, a split solid phase, or a thin slice.
pub fn validity_check(grid: &VoxelGrid, criteria: &ValidityCriteria) -> Validity {
    for face in Face::ALL {
        if extract_face(grid, face).is_empty() {
            return Validity::EmptyFace(face);
        }
    }
    let components = periodic_components(grid);
    if components != 1 {
        return Validity::Disconnected { components };
    }
    let n = grid.resolution();
    let mut counts = [vec![0usize; n], vec![0usize; n], vec![0usize; n]];
    for k in 0..n {
        for j in 0..n {
            for i in 0..n {
                if grid.get(i, j, k) {
                    counts[0][i] += 1;
                    counts[1][j] += 1;
                    counts[2][k] += 1;
                }
            }
        }
    }
    let area = (n * n) as f64;
    for axis in Axis::ALL {
        for (slice, &c) in counts[axis.index()].iter().enumerate() {
            let fraction = c as f64 / area;
            if fraction < criteria.min_section_fraction {
                return Validity::ThinSection {
                    axis,
                    slice,
                    fraction,
                };
            }
        }
    }
    Validity::Valid
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::tpms::{eval_merged, TpmsKind};

    #[test]
    fn schwarz_p_half_volume() {
        let p = ShapeParams::pure(TpmsKind::P, 0.0).unwrap();
        let grid = voxelize(&p, 40).unwrap();
        assert_eq!(grid.solid_count() * 2, 40 * 40 * 40);
        assert_eq!(grid.volume_fraction(), 0.5);
    }

    #[test]
    fn offset_thickens_solid() {
        let thin = voxelize(&ShapeParams::pure(TpmsKind::P, 0.0).unwrap(), 40).unwrap();
        let thick = voxelize(&ShapeParams::pure(TpmsKind::P, 0.4).unwrap(), 40).unwrap();
        assert!(thick.volume_fraction() > thin.volume_fraction());
    }

    #[test]
    fn tiny_grid_shape() {
        let p = ShapeParams::new([0.2, 0.3, 0.5], [0.1, -0.1, 0.0]).unwrap();
        let grid = voxelize(&p, 2).unwrap();
        assert_eq!(grid.occupancy().len(), 8);
        assert!(voxelize(&p, 1).is_err());
    }

    #[test]
    fn voxelize_matches_pointwise_evaluation() {
        let p = ShapeParams::new([0.3, 0.3, 0.4], [0.2, -0.3, 0.1]).unwrap();
        let grid = voxelize(&p, 9).unwrap();
        for k in 0..9 {
            for j in 0..9 {
                for i in 0..9 {
                    let f = eval_merged(&p, grid.center(i, j, k));
                    assert_eq!(grid.get(i, j, k), f >= 0.0);
                }
            }
        }
    }

    #[test]
    fn filled_grids() {
        let solid = VoxelGrid::filled(5, true);
        let void = VoxelGrid::filled(5, false);
        assert_eq!(solid.volume_fraction(), 1.0);
        assert_eq!(void.volume_fraction(), 0.0);
        for face in Face::ALL {
            assert!(extract_face(&solid, face).pixels().iter().all(|&p| p));
            assert!(extract_face(&void, face).is_empty());
        }
        assert!(validity_check(&solid, &ValidityCriteria::default()).is_valid());
        assert!(matches!(
            validity_check(&void, &ValidityCriteria::default()),
            Validity::EmptyFace(_)
        ));
    }

    #[test]
    fn cubic_cell_faces_agree_up_to_symmetry() {
        for kind in [TpmsKind::P, TpmsKind::D, TpmsKind::Frd] {
            let grid = voxelize(&ShapeParams::pure(kind, 0.1).unwrap(), 16).unwrap();
            let x = extract_face(&grid, Face::XPos);
            let y = extract_face(&grid, Face::YPos);
            assert!(
                x.symmetry_images().contains(&y),
                "{kind:?}: +x and +y faces are not symmetry images"
            );
        }
    }

    #[test]
    fn two_blobs_are_disconnected() {
        let grid = VoxelGrid::from_fn(8, |i, j, k| {
            let a = (1..3).contains(&i) && (1..3).contains(&j) && (1..3).contains(&k);
            let b = (5..7).contains(&i) && (5..7).contains(&j) && (5..7).contains(&k);
            a || b
        });
        assert_eq!(periodic_components(&grid), 2);
        // Touching all faces so that only connectivity can fail.
        let mut bars = VoxelGrid::filled(8, false);
        for t in 0..8 {
            bars.set(t, 1, 1, true);
            bars.set(1, t, 1, true);
            bars.set(1, 1, t, true);
            bars.set(t, 5, 5, true);
            bars.set(5, t, 5, true);
            bars.set(5, 5, t, true);
        }
        let criteria = ValidityCriteria {
            min_section_fraction: 0.0,
        };
        assert_eq!(
            validity_check(&bars, &criteria),
            Validity::Disconnected { components: 2 }
        );
    }

    #[test]
    fn periodic_wrap_connects() {
        // A bar crossing the periodic boundary in x is one component.
        let grid = VoxelGrid::from_fn(6, |i, j, k| (i == 0 || i == 5) && j == 2 && k == 2);
        assert_eq!(periodic_components(&grid), 1);
    }

    #[test]
    fn thin_slice_fails() {
        let mut grid = VoxelGrid::filled(10, true);
        for j in 0..10 {
            for k in 0..10 {
                if !(j == 0 && k == 0) {
                    grid.set(4, j, k, false);
                }
            }
        }
        match validity_check(&grid, &ValidityCriteria::default()) {
            Validity::ThinSection { axis, slice, .. } => {
                assert_eq!((axis, slice), (Axis::X, 4));
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn overlap_basics() {
        let a = FaceMask::new(2, vec![true, true, false, false]).unwrap();
        let b = FaceMask::new(2, vec![false, false, true, true]).unwrap();
        let c = FaceMask::new(2, vec![true, false, false, false]).unwrap();
        let empty = FaceMask::new(2, vec![false; 4]).unwrap();
        assert_eq!(face_overlap(&a, &a).unwrap(), 100.0);
        assert_eq!(face_overlap(&a, &b).unwrap(), 0.0);
        assert_eq!(face_overlap(&a, &c).unwrap(), 100.0);
        assert_eq!(face_overlap(&a, &empty).unwrap(), 0.0);
        assert!(matches!(
            face_overlap(&empty, &empty),
            Err(GeometryError::UndefinedOverlap)
        ));
        let big = FaceMask::new(3, vec![true; 9]).unwrap();
        assert!(face_overlap(&a, &big).is_err());
    }

    #[test]
    fn sampled_faces_of_periodic_cell_match() {
        let p = ShapeParams::new([0.2, 0.5, 0.3], [0.1, -0.2, 0.3]).unwrap();
        let f = |q: [f64; 3]| eval_merged(&p, q);
        for axis_faces in [(Face::XNeg, Face::XPos), (Face::YNeg, Face::YPos)] {
            let lo = sample_face(f, axis_faces.0, 20, [0.0; 3]);
            let hi = sample_face(f, axis_faces.1, 20, [0.0; 3]);
            assert!(face_overlap(&lo, &hi).unwrap() > 99.0);
        }
    }
}
