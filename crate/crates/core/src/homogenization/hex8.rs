//! Trilinear 8-node hexahedron for cubic voxels.
//!
//! Local node `l` sits at offsets `(l & 1, (l >> 1) & 1, (l >> 2) & 1)` from the
//! element's lower corner. DOFs are node-major: `[u0x, u0y, u0z, u1x, ...]`.

use nalgebra::{SMatrix, SVector};

use super::material::ConstitutiveMatrix;

pub type ElementMatrix = SMatrix<f64, 24, 24>;
pub type ElementVector = SVector<f64, 24>;
pub type StrainMatrix = SMatrix<f64, 6, 24>;

#[inline]
pub fn node_offset(l: usize) -> [usize; 3] {
    [l & 1, (l >> 1) & 1, (l >> 2) & 1]
}

/// Strain-displacement matrix at natural coordinates `xi ∈ [-1, 1]³`.
pub fn strain_matrix(xi: [f64; 3], edge: f64) -> StrainMatrix {
    let mut b = StrainMatrix::zeros();
    let scale = 2.0 / edge;
    for l in 0..8 {
        let o = node_offset(l);
        let s = [
            2.0 * o[0] as f64 - 1.0,
            2.0 * o[1] as f64 - 1.0,
            2.0 * o[2] as f64 - 1.0,
        ];
        let f = [
            0.5 * (1.0 + s[0] * xi[0]),
            0.5 * (1.0 + s[1] * xi[1]),
            0.5 * (1.0 + s[2] * xi[2]),
        ];
        let nx = 0.5 * s[0] * f[1] * f[2] * scale;
        let ny = 0.5 * s[1] * f[0] * f[2] * scale;
        let nz = 0.5 * s[2] * f[0] * f[1] * scale;
        let c = 3 * l;
        b[(0, c)] = nx;
        b[(1, c + 1)] = ny;
        b[(2, c + 2)] = nz;
        b[(3, c + 1)] = nz;
        b[(3, c + 2)] = ny;
        b[(4, c)] = nz;
        b[(4, c + 2)] = nx;
        b[(5, c)] = ny;
        b[(5, c + 1)] = nx;
    }
    b
}

fn gauss_points() -> [[f64; 3]; 8] {
    let g = 1.0 / 3f64.sqrt();
    let mut pts = [[0.0; 3]; 8];
    for (l, p) in pts.iter_mut().enumerate() {
        let o = node_offset(l);
        *p = [
            g * (2.0 * o[0] as f64 - 1.0),
            g * (2.0 * o[1] as f64 - 1.0),
            g * (2.0 * o[2] as f64 - 1.0),
        ];
    }
    pts
}

/// `k_e = ∫ Bᵀ C B dV` with full 2×2×2 Gauss quadrature on a cube of side `edge`.
pub fn hex8_stiffness(c: &ConstitutiveMatrix, edge: f64) -> ElementMatrix {
    let det_j = (edge / 2.0).powi(3);
    let mut k = ElementMatrix::zeros();
    for xi in gauss_points() {
        let b = strain_matrix(xi, edge);
        k += b.transpose() * c.matrix() * b * det_j;
    }
    k
}

/// Nodal displacements of the homogeneous field `u = ε·x` for unit strain `case`.
pub fn unit_strain_displacement(case: usize, edge: f64) -> ElementVector {
    let mut eps = [0.0; 6];
    eps[case] = 1.0;
    let [exx, eyy, ezz, gyz, gxz, gxy] = eps;
    let mut u = ElementVector::zeros();
    for l in 0..8 {
        let o = node_offset(l);
        let (x, y, z) = (o[0] as f64 * edge, o[1] as f64 * edge, o[2] as f64 * edge);
        u[3 * l] = exx * x + 0.5 * gxy * y + 0.5 * gxz * z;
        u[3 * l + 1] = 0.5 * gxy * x + eyy * y + 0.5 * gyz * z;
        u[3 * l + 2] = 0.5 * gxz * x + 0.5 * gyz * y + ezz * z;
    }
    u
}

/// The six rigid-body modes (three translations, three rotations) of one element.
pub fn rigid_body_modes(edge: f64) -> [ElementVector; 6] {
    let mut modes = [ElementVector::zeros(); 6];
    for l in 0..8 {
        let o = node_offset(l);
        let p = [o[0] as f64 * edge, o[1] as f64 * edge, o[2] as f64 * edge];
        for d in 0..3 {
            modes[d][3 * l + d] = 1.0;
        }
        // rotations about x, y, z: ω × p
        modes[3][3 * l + 1] = -p[2];
        modes[3][3 * l + 2] = p[1];
        modes[4][3 * l] = p[2];
        modes[4][3 * l + 2] = -p[0];
        modes[5][3 * l] = -p[1];
        modes[5][3 * l + 1] = p[0];
    }
    modes
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::homogenization::material::{isotropic_constitutive, MaterialConstants};

    #[test]
    fn stiffness_is_symmetric() {
        for (e, nu, h) in [(200.0, 0.3, 0.025), (1.0, 0.0, 1.0), (3.0, -0.4, 0.5)] {
            let k = hex8_stiffness(&MaterialConstants::new(e, nu).unwrap().constitutive(), h);
            let asym = (k - k.transpose()).amax();
            assert!(asym <= 1e-10 * k.amax(), "asymmetry {asym}");
        }
    }

    #[test]
    fn rigid_modes_are_in_null_space() {
        let k = hex8_stiffness(&MaterialConstants::base().constitutive(), 0.1);
        let norm = k.norm();
        for mode in rigid_body_modes(0.1) {
            assert!((k * mode).amax() <= 1e-8 * norm);
        }
    }

    #[test]
    fn translational_row_sums_vanish() {
        let k = hex8_stiffness(&isotropic_constitutive(1.2, 0.7), 1.0);
        for row in 0..24 {
            for d in 0..3 {
                let s: f64 = (0..8).map(|l| k[(row, 3 * l + d)]).sum();
                assert!(s.abs() < 1e-12, "row {row} dir {d}: {s}");
            }
        }
    }

    #[test]
    fn unit_strain_field_reproduces_strain() {
        let h = 0.3;
        for case in 0..6 {
            let u = unit_strain_displacement(case, h);
            for xi in [[0.1, -0.4, 0.8], [0.0; 3], [-1.0, 1.0, 0.5]] {
                let eps = strain_matrix(xi, h) * u;
                for r in 0..6 {
                    let want = if r == case { 1.0 } else { 0.0 };
                    assert!((eps[r] - want).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn stiffness_has_exactly_six_zero_modes() {
        let k = hex8_stiffness(&MaterialConstants::base().constitutive(), 1.0);
        let eig = k.symmetric_eigenvalues();
        let tol = 1e-9 * eig.amax();
        let zero = eig.iter().filter(|&&v| v.abs() < tol).count();
        assert_eq!(zero, 6);
        assert!(eig.iter().all(|&v| v > -tol));
    }
}
