//! Plane-stress Q4 finite elements on a structured macro grid.

use crate::error::TopOptError;

/// GPa to MPa (N/mm²): field moduli are in GPa, the FE system in N and mm.
pub const GPA_TO_MPA: f64 = 1000.0;

pub type Q4Matrix = [[f64; 8]; 8];

const GAUSS: f64 = 0.577_350_269_189_625_8;

/// Local node `k` sits at corner `(NODE_X[k], NODE_Y[k])` of the unit square, counterclockwise from the origin.
const NODE_X: [f64; 4] = [0.0, 1.0, 1.0, 0.0];
const NODE_Y: [f64; 4] = [0.0, 0.0, 1.0, 1.0];

/// Strain-displacement rows `(ε_xx, ε_yy, γ_xy)` at natural point `(ξ, η) ∈ [-1, 1]²`.
fn strain_matrix(xi: f64, eta: f64, size: f64) -> [[f64; 8]; 3] {
    let mut b = [[0.0; 8]; 3];
    for k in 0..4 {
        let sx = 2.0 * NODE_X[k] - 1.0;
        let sy = 2.0 * NODE_Y[k] - 1.0;
        // d/dx = (2/size) d/dξ on a square element.
        let dx = 0.25 * sx * (1.0 + sy * eta) * 2.0 / size;
        let dy = 0.25 * sy * (1.0 + sx * xi) * 2.0 / size;
        b[0][2 * k] = dx;
        b[1][2 * k + 1] = dy;
        b[2][2 * k] = dy;
        b[2][2 * k + 1] = dx;
    }
    b
}

fn integrate(d: &[[f64; 3]; 3], size: f64, thickness: f64) -> Q4Matrix {
    let det_j = size * size / 4.0;
    let mut k = [[0.0; 8]; 8];
    for &xi in &[-GAUSS, GAUSS] {
        for &eta in &[-GAUSS, GAUSS] {
            let b = strain_matrix(xi, eta, size);
            for p in 0..8 {
                for q in 0..8 {
                    let mut s = 0.0;
                    for a in 0..3 {
                        for c in 0..3 {
                            s += b[a][p] * d[a][c] * b[c][q];
                        }
                    }
                    k[p][q] += s * det_j * thickness;
                }
            }
        }
    }
    k
}

fn plane_stress_d(e: f64, nu: f64) -> [[f64; 3]; 3] {
    let c = e / (1.0 - nu * nu);
    [
        [c, c * nu, 0.0],
        [c * nu, c, 0.0],
        [0.0, 0.0, c * (1.0 - nu) / 2.0],
    ]
}

/// Bilinear quad stiffness (2×2 Gauss) for plane stress, square element of edge `size`.
///
/// Node order is counterclockwise from the lower-left corner; DOFs are `(u_x, u_y)` per node.
pub fn q4_plane_stress_stiffness(e: f64, nu: f64, size: f64, thickness: f64) -> Q4Matrix {
    integrate(&plane_stress_d(e, nu), size, thickness)
}

/// `k(E, ν) = E/(1-ν²)·(k1 + ν·k2 + (1-ν)/2·k3)`, which gives closed-form derivatives.
#[derive(Debug, Clone)]
pub struct Q4Basis {
    k1: Q4Matrix,
    k2: Q4Matrix,
    k3: Q4Matrix,
}

impl Q4Basis {
    pub fn new(size: f64, thickness: f64) -> Self {
        let unit = |d: [[f64; 3]; 3]| integrate(&d, size, thickness);
        Self {
            k1: unit([[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 0.0]]),
            k2: unit([[0.0, 1.0, 0.0], [1.0, 0.0, 0.0], [0.0, 0.0, 0.0]]),
            k3: unit([[0.0, 0.0, 0.0], [0.0, 0.0, 0.0], [0.0, 0.0, 1.0]]),
        }
    }

    fn combine(&self, a: f64, b: f64, c: f64) -> Q4Matrix {
        let mut k = [[0.0; 8]; 8];
        for p in 0..8 {
            for q in 0..8 {
                k[p][q] = a * self.k1[p][q] + b * self.k2[p][q] + c * self.k3[p][q];
            }
        }
        k
    }

    pub fn stiffness(&self, e: f64, nu: f64) -> Q4Matrix {
        let c = e / (1.0 - nu * nu);
        self.combine(c, c * nu, c * (1.0 - nu) / 2.0)
    }

    /// The stiffness is linear in `E`, so this is `k(1, ν)`.
    pub fn d_stiffness_d_e(&self, nu: f64) -> Q4Matrix {
        self.stiffness(1.0, nu)
    }

    pub fn d_stiffness_d_nu(&self, e: f64, nu: f64) -> Q4Matrix {
        let s = 1.0 - nu * nu;
        let c = e / s;
        let dc = 2.0 * e * nu / (s * s);
        self.combine(dc, dc * nu + c, dc * (1.0 - nu) / 2.0 - c / 2.0)
    }
}

/// Symmetric positive definite band matrix holding `K[i][i + k]` for `k ≤ bw`.
#[derive(Debug, Clone)]
pub struct BandMatrix {
    n: usize,
    bw: usize,
    data: Vec<f64>,
}

impl BandMatrix {
    pub fn zeros(n: usize, bw: usize) -> Self {
        Self {
            n,
            bw,
            data: vec![0.0; n * (bw + 1)],
        }
    }

    pub fn size(&self) -> usize {
        self.n
    }

    pub fn bandwidth(&self) -> usize {
        self.bw
    }

    /// Adds `v` at `(i, j)`; entries below the diagonal are ignored.
    pub fn add(&mut self, i: usize, j: usize, v: f64) {
        if j >= i {
            debug_assert!(j - i <= self.bw);
            self.data[i * (self.bw + 1) + (j - i)] += v;
        }
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let (i, j) = if i <= j { (i, j) } else { (j, i) };
        if j - i > self.bw {
            0.0
        } else {
            self.data[i * (self.bw + 1) + (j - i)]
        }
    }

    /// In-place Cholesky `K = UᵀU`; fails on a non-positive pivot.
    pub fn factor(mut self) -> Result<BandCholesky, TopOptError> {
        let (n, w) = (self.n, self.bw + 1);
        for i in 0..n {
            let diag = self.data[i * w];
            let mut d = diag;
            for k in i.saturating_sub(self.bw)..i {
                let u = self.data[k * w + (i - k)];
                d -= u * u;
            }
            if !(d > 1e-12 * diag.abs().max(f64::MIN_POSITIVE)) {
                return Err(TopOptError::IllPosed(format!(
                    "stiffness matrix is singular at equation {i}"
                )));
            }
            let uii = d.sqrt();
            self.data[i * w] = uii;
            for j in i + 1..n.min(i + w) {
                let mut s = self.data[i * w + (j - i)];
                for k in j.saturating_sub(self.bw)..i {
                    s -= self.data[k * w + (i - k)] * self.data[k * w + (j - k)];
                }
                self.data[i * w + (j - i)] = s / uii;
            }
        }
        Ok(BandCholesky(self))
    }
}

#[derive(Debug, Clone)]
pub struct BandCholesky(BandMatrix);

impl BandCholesky {
    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let m = &self.0;
        let (n, w) = (m.n, m.bw + 1);
        let mut x = b.to_vec();
        for i in 0..n {
            let mut s = x[i];
            for k in i.saturating_sub(m.bw)..i {
                s -= m.data[k * w + (i - k)] * x[k];
            }
            x[i] = s / m.data[i * w];
        }
        for i in (0..n).rev() {
            let mut s = x[i];
            for j in i + 1..n.min(i + w) {
                s -= m.data[i * w + (j - i)] * x[j];
            }
            x[i] = s / m.data[i * w];
        }
        x
    }
}
