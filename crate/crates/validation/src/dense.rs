//! Dense periodic homogenization and random connected test patterns.

use gradcell::geometry::VoxelGrid;
use nalgebra::{DMatrix, DVector, Matrix6, SMatrix};
use rand::Rng;

type B = SMatrix<f64, 6, 24>;

/// Trilinear strain-displacement matrix at point `(x, y, z) ∈ [0, h]³`, nodes ordered
/// `(0,0,0), (1,0,0), (0,1,0), (1,1,0), (0,0,1), ...`.
fn b_matrix(p: [f64; 3], h: f64) -> B {
    let mut b = B::zeros();
    for l in 0..8 {
        let o = [(l & 1) as f64, ((l >> 1) & 1) as f64, ((l >> 2) & 1) as f64];
        let w: Vec<f64> = (0..3)
            .map(|d| {
                if o[d] == 1.0 {
                    p[d] / h
                } else {
                    1.0 - p[d] / h
                }
            })
            .collect();
        let dw: Vec<f64> = (0..3)
            .map(|d| if o[d] == 1.0 { 1.0 / h } else { -1.0 / h })
            .collect();
        let g = [
            dw[0] * w[1] * w[2],
            w[0] * dw[1] * w[2],
            w[0] * w[1] * dw[2],
        ];
        let c = 3 * l;
        b[(0, c)] = g[0];
        b[(1, c + 1)] = g[1];
        b[(2, c + 2)] = g[2];
        b[(3, c + 1)] = g[2];
        b[(3, c + 2)] = g[1];
        b[(4, c)] = g[2];
        b[(4, c + 2)] = g[0];
        b[(5, c)] = g[1];
        b[(5, c + 1)] = g[0];
    }
    b
}

pub fn isotropic(e: f64, nu: f64) -> Matrix6<f64> {
    let lambda = e * nu / ((1.0 + nu) * (1.0 - 2.0 * nu));
    let mu = e / (2.0 * (1.0 + nu));
    let mut c = Matrix6::zeros();
    for i in 0..3 {
        for j in 0..3 {
            c[(i, j)] = lambda;
        }
        c[(i, i)] += 2.0 * mu;
        c[(i + 3, i + 3)] = mu;
    }
    c
}

/// Dense periodic homogenization: Gauss-integrated element terms, one node pinned,
/// LU solve of the six cell problems, energy-based `C^H`.
pub fn dense_c_h(grid: &VoxelGrid, c: &Matrix6<f64>) -> Matrix6<f64> {
    let n = grid.resolution();
    let h = 1.0 / n as f64;
    let g = 0.5 * h / 3f64.sqrt();
    let pts: Vec<[f64; 3]> = (0..8)
        .map(|l| {
            let s = |bit: usize| {
                if (l >> bit) & 1 == 1 {
                    0.5 * h + g
                } else {
                    0.5 * h - g
                }
            };
            [s(0), s(1), s(2)]
        })
        .collect();
    let wq = h * h * h / 8.0;
    let ke: SMatrix<f64, 24, 24> = pts
        .iter()
        .map(|&p| b_matrix(p, h).transpose() * c * b_matrix(p, h) * wq)
        .sum();
    let fe: SMatrix<f64, 24, 6> = pts
        .iter()
        .map(|&p| b_matrix(p, h).transpose() * c * wq)
        .sum();

    let node = |i: usize, j: usize, k: usize| (i % n) + n * ((j % n) + n * (k % n));
    let mut elems = Vec::new();
    for k in 0..n {
        for j in 0..n {
            for i in 0..n {
                if grid.get(i, j, k) {
                    let nodes: Vec<usize> = (0..8)
                        .map(|l| node(i + (l & 1), j + ((l >> 1) & 1), k + ((l >> 2) & 1)))
                        .collect();
                    elems.push(nodes);
                }
            }
        }
    }
    let ndof = 3 * n * n * n;
    let mut kg = DMatrix::<f64>::zeros(ndof, ndof);
    let mut fg = DMatrix::<f64>::zeros(ndof, 6);
    let mut used = vec![false; n * n * n];
    for nodes in &elems {
        for (a, &na) in nodes.iter().enumerate() {
            used[na] = true;
            for da in 0..3 {
                for (b, &nb) in nodes.iter().enumerate() {
                    for db in 0..3 {
                        kg[(3 * na + da, 3 * nb + db)] += ke[(3 * a + da, 3 * b + db)];
                    }
                }
                for case in 0..6 {
                    fg[(3 * na + da, case)] += fe[(3 * a + da, case)];
                }
            }
        }
    }
    let active: Vec<usize> = (0..n * n * n).filter(|&v| used[v]).collect();
    let dofs: Vec<usize> = active[1..]
        .iter()
        .flat_map(|&v| (0..3).map(move |d| 3 * v + d))
        .collect();
    let kr = DMatrix::from_fn(dofs.len(), dofs.len(), |a, b| kg[(dofs[a], dofs[b])]);
    let lu = kr.lu();
    let mut chi = DMatrix::<f64>::zeros(ndof, 6);
    for case in 0..6 {
        let rhs = DVector::from_fn(dofs.len(), |a, _| fg[(dofs[a], case)]);
        let x = lu.solve(&rhs).expect("pinned system is nonsingular");
        for (a, &d) in dofs.iter().enumerate() {
            chi[(d, case)] = x[a];
        }
    }
    let mut c_h = Matrix6::zeros();
    for nodes in &elems {
        let chi_e = SMatrix::<f64, 24, 6>::from_fn(|r, case| chi[(3 * nodes[r / 3] + r % 3, case)]);
        for &p in &pts {
            let strain = Matrix6::identity() - b_matrix(p, h) * chi_e;
            c_h += strain.transpose() * c * strain * wq;
        }
    }
    c_h
}

pub fn connected_component(n: usize, occ: &[bool], seed: usize) -> Vec<bool> {
    let idx = |i: usize, j: usize, k: usize| i + n * (j + n * k);
    let mut out = vec![false; occ.len()];
    let mut stack = vec![seed];
    out[seed] = true;
    while let Some(v) = stack.pop() {
        let (i, j, k) = (v % n, (v / n) % n, v / (n * n));
        let nbrs = [
            idx((i + 1) % n, j, k),
            idx((i + n - 1) % n, j, k),
            idx(i, (j + 1) % n, k),
            idx(i, (j + n - 1) % n, k),
            idx(i, j, (k + 1) % n),
            idx(i, j, (k + n - 1) % n),
        ];
        for w in nbrs {
            if occ[w] && !out[w] {
                out[w] = true;
                stack.push(w);
            }
        }
    }
    out
}

/// Random fill around three orthogonal rods through one voxel, so the solid spans the
/// cell along every axis; voxels not face-connected to the rods are dropped.
pub fn random_pattern(n: usize, rng: &mut impl Rng) -> VoxelGrid {
    let (ci, cj, ck) = (
        rng.random_range(0..n),
        rng.random_range(0..n),
        rng.random_range(0..n),
    );
    let fill = rng.random_range(0.2..0.7);
    let mut occ: Vec<bool> = (0..n * n * n).map(|_| rng.random_bool(fill)).collect();
    for t in 0..n {
        occ[t + n * (cj + n * ck)] = true;
        occ[ci + n * (t + n * ck)] = true;
        occ[ci + n * (cj + n * t)] = true;
    }
    let occ = connected_component(n, &occ, ci + n * (cj + n * ck));
    VoxelGrid::new(n, occ).unwrap()
}
