use nalgebra::Matrix6;
use serde::{Deserialize, Serialize};

use crate::error::HomogenizationError;

/// Base material of the printed solid: 200 GPa, ν = 0.3.
pub const BASE_E: f64 = 200.0;
pub const BASE_NU: f64 = 0.3;

/// Isotropic elastic constants (GPa).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MaterialConstants {
    pub e: f64,
    pub nu: f64,
    pub lambda: f64,
    pub mu: f64,
}

impl MaterialConstants {
    pub fn new(e: f64, nu: f64) -> Result<Self, HomogenizationError> {
        let (lambda, mu) = lame_parameters(e, nu)?;
        Ok(Self { e, nu, lambda, mu })
    }

    pub fn base() -> Self {
        Self::new(BASE_E, BASE_NU).expect("base material is valid")
    }

    pub fn constitutive(&self) -> ConstitutiveMatrix {
        isotropic_constitutive(self.lambda, self.mu)
    }
}

/// Lamé parameters `(λ, μ)` from Young's modulus and Poisson's ratio.
pub fn lame_parameters(e: f64, nu: f64) -> Result<(f64, f64), HomogenizationError> {
    if !(e.is_finite() && e > 0.0 && nu > -1.0 && nu < 0.5) {
        return Err(HomogenizationError::InvalidMaterial { e, nu });
    }
    let lambda = nu * e / ((1.0 + nu) * (1.0 - 2.0 * nu));
    let mu = e / (2.0 * (1.0 + nu));
    Ok((lambda, mu))
}

/// 6×6 stiffness in Voigt order (xx, yy, zz, yz, xz, xy) with engineering shear strains.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConstitutiveMatrix(pub Matrix6<f64>);

impl ConstitutiveMatrix {
    pub fn zeros() -> Self {
        Self(Matrix6::zeros())
    }

    pub fn matrix(&self) -> &Matrix6<f64> {
        &self.0
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.0[(i, j)]
    }

    /// Largest `|C_ij - C_ji|` relative to the largest entry.
    pub fn asymmetry(&self) -> f64 {
        let scale = self.0.amax();
        if scale == 0.0 {
            return 0.0;
        }
        (self.0 - self.0.transpose()).amax() / scale
    }

    pub fn symmetrized(&self) -> Self {
        Self((self.0 + self.0.transpose()) * 0.5)
    }

    pub fn to_rows(&self) -> [[f64; 6]; 6] {
        let mut out = [[0.0; 6]; 6];
        for (i, row) in out.iter_mut().enumerate() {
            for (j, v) in row.iter_mut().enumerate() {
                *v = self.0[(i, j)];
            }
        }
        out
    }
}

pub fn isotropic_constitutive(lambda: f64, mu: f64) -> ConstitutiveMatrix {
    let mut c = Matrix6::zeros();
    for i in 0..3 {
        for j in 0..3 {
            c[(i, j)] = lambda;
        }
        c[(i, i)] = lambda + 2.0 * mu;
        c[(i + 3, i + 3)] = mu;
    }
    ConstitutiveMatrix(c)
}

/// Homogenized constitutive matrix with the extracted axial modulus and Poisson's ratio.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EffectiveProps {
    pub c_h: ConstitutiveMatrix,
    pub e_h: f64,
    pub nu_h: f64,
}

/// Extracts `(E_H, ν_H)` from `S = C⁻¹`, averaging the three axial and six
/// normal-coupling entries.
pub fn effective_properties(c_h: &ConstitutiveMatrix) -> Result<(f64, f64), HomogenizationError> {
    let sym = c_h.symmetrized().0;
    if sym.amax() == 0.0 || !sym.iter().all(|v| v.is_finite()) {
        return Err(HomogenizationError::DegenerateCell(
            "constitutive matrix is zero or non-finite".into(),
        ));
    }
    let chol = sym.cholesky().ok_or_else(|| {
        HomogenizationError::DegenerateCell("constitutive matrix is not positive definite".into())
    })?;
    let s = chol.inverse();
    let e_h = (0..3).map(|i| 1.0 / s[(i, i)]).sum::<f64>() / 3.0;
    let mut nu_sum = 0.0;
    for i in 0..3 {
        for j in 0..3 {
            if i != j {
                nu_sum += -s[(i, j)] * e_h;
            }
        }
    }
    let nu_h = nu_sum / 6.0;
    if !(e_h.is_finite() && e_h > 0.0 && nu_h.is_finite()) {
        return Err(HomogenizationError::DegenerateCell(format!(
            "extracted E_H = {e_h}, nu_H = {nu_h}"
        )));
    }
    Ok((e_h, nu_h))
}
