//! Periodic voxel FE system: assembly, six-case loads, lockstep PCG, and `C^H`.
//!
//! Periodic node `(i, j, k)` has index `i + n·(j + n·k)`; the node at the upper
//! face of the cell wraps to index 0 along that axis. Void elements are left out,
//! so nodes touched only by void elements carry no DOFs.

use crate::error::HomogenizationError;
use crate::geometry::VoxelGrid;

use super::hex8::{node_offset, unit_strain_displacement, ElementMatrix};
use super::material::ConstitutiveMatrix;

/// Three displacement components for each of the six load cases.
pub type NodeBlock = [[f64; 6]; 3];

const ZERO_BLOCK: NodeBlock = [[0.0; 6]; 3];
const INACTIVE: u32 = u32::MAX;

/// Iterative solver settings.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverSettings {
    pub rel_tol: f64,
    /// Iteration cap is `max_iter_factor · sqrt(dof count)`.
    pub max_iter_factor: f64,
}

impl Default for SolverSettings {
    fn default() -> Self {
        Self {
            rel_tol: 1e-8,
            max_iter_factor: 1000.0,
        }
    }
}

/// Periodic node indices of the eight corners of element `(i, j, k)`.
pub fn element_nodes(n: usize, i: usize, j: usize, k: usize) -> [usize; 8] {
    let mut out = [0; 8];
    for (l, slot) in out.iter_mut().enumerate() {
        let [dx, dy, dz] = node_offset(l);
        *slot = (i + dx) % n + n * ((j + dy) % n + n * ((k + dz) % n));
    }
    out
}

fn solid_elements(grid: &VoxelGrid) -> Vec<[usize; 8]> {
    let n = grid.resolution();
    let mut out = Vec::with_capacity(grid.solid_count());
    for k in 0..n {
        for j in 0..n {
            for i in 0..n {
                if grid.get(i, j, k) {
                    out.push(element_nodes(n, i, j, k));
                }
            }
        }
    }
    out
}

/// The six right-hand sides `fⁱ = Σ_e k_e χ⁰⁽ⁱ⁾` on the periodic mesh.
///
/// Indexed by periodic node; nodes without solid neighbors stay zero.
pub fn assemble_loads(
    grid: &VoxelGrid,
    k_e: &ElementMatrix,
    edge: f64,
) -> Result<Vec<NodeBlock>, HomogenizationError> {
    if grid.solid_count() == 0 {
        return Err(HomogenizationError::EmptyStructure);
    }
    let n = grid.resolution();
    let f_e = element_loads(k_e, edge);
    let mut f = vec![ZERO_BLOCK; n * n * n];
    for nodes in solid_elements(grid) {
        for (l, &node) in nodes.iter().enumerate() {
            for d in 0..3 {
                for c in 0..6 {
                    f[node][d][c] += f_e[3 * l + d][c];
                }
            }
        }
    }
    Ok(f)
}

/// `k_e χ⁰` for all six unit strains, as 24 rows of six columns.
fn element_loads(k_e: &ElementMatrix, edge: f64) -> [[f64; 6]; 24] {
    let mut out = [[0.0; 6]; 24];
    for c in 0..6 {
        let v = k_e * unit_strain_displacement(c, edge);
        for r in 0..24 {
            out[r][c] = v[r];
        }
    }
    out
}

/// Reduced stiffness on the active periodic nodes in 3×3 block-CSR form.
///
/// The first active node is pinned: its row and column are replaced by identity.
#[derive(Debug, Clone)]
pub struct PeriodicSystem {
    resolution: usize,
    active: Vec<u32>,
    nodes: Vec<usize>,
    row_ptr: Vec<usize>,
    cols: Vec<u32>,
    blocks: Vec<[f64; 9]>,
    diag_inv: Vec<[f64; 9]>,
    load_floor: [f64; 6],
}

impl PeriodicSystem {
    pub fn assemble(grid: &VoxelGrid, k_e: &ElementMatrix) -> Result<Self, HomogenizationError> {
        let n = grid.resolution();
        let total = n * n * n;
        let elements = solid_elements(grid);
        if elements.is_empty() {
            return Err(HomogenizationError::EmptyStructure);
        }

        // Elements touching each node, with the node's local index in that element.
        let mut incident: Vec<Vec<(u32, u8)>> = vec![Vec::new(); total];
        for (e, nodes) in elements.iter().enumerate() {
            for (l, &node) in nodes.iter().enumerate() {
                incident[node].push((e as u32, l as u8));
            }
        }
        let mut active = vec![INACTIVE; total];
        let mut nodes = Vec::new();
        for (node, inc) in incident.iter().enumerate() {
            if !inc.is_empty() {
                active[node] = nodes.len() as u32;
                nodes.push(node);
            }
        }

        let mut row_ptr = Vec::with_capacity(nodes.len() + 1);
        let mut cols = Vec::with_capacity(nodes.len() * 27);
        let mut blocks = Vec::with_capacity(nodes.len() * 27);
        let mut row: Vec<(u32, [f64; 9])> = Vec::with_capacity(27);
        row_ptr.push(0);
        for (a, &node) in nodes.iter().enumerate() {
            row.clear();
            for &(e, la) in &incident[node] {
                let la = la as usize;
                for (lb, &other) in elements[e as usize].iter().enumerate() {
                    let b = active[other];
                    let slot = match row.iter().position(|(c, _)| *c == b) {
                        Some(p) => p,
                        None => {
                            row.push((b, [0.0; 9]));
                            row.len() - 1
                        }
                    };
                    let blk = &mut row[slot].1;
                    for r in 0..3 {
                        for c in 0..3 {
                            blk[3 * r + c] += k_e[(3 * la + r, 3 * lb + c)];
                        }
                    }
                }
            }
            row.sort_by_key(|(c, _)| *c);
            for (c, blk) in &row {
                // Pinning active node 0.
                let blk = if a == 0 || *c == 0 {
                    if a == 0 && *c == 0 {
                        identity9()
                    } else {
                        [0.0; 9]
                    }
                } else {
                    *blk
                };
                cols.push(*c);
                blocks.push(blk);
            }
            row_ptr.push(cols.len());
        }

        let mut diag_inv = Vec::with_capacity(nodes.len());
        for a in 0..nodes.len() {
            let range = row_ptr[a]..row_ptr[a + 1];
            let pos = cols[range.clone()]
                .iter()
                .position(|&c| c as usize == a)
                .expect("diagonal block present");
            let inv = invert3(&blocks[range.start + pos]).ok_or_else(|| {
                HomogenizationError::DegenerateCell(format!("singular diagonal block at node {a}"))
            })?;
            diag_inv.push(inv);
        }

        // Net loads below this are round-off from a homogeneous neighborhood.
        let edge = 1.0 / n as f64;
        let f_e = element_loads(k_e, edge);
        let mut load_floor = [0.0; 6];
        for (c, floor) in load_floor.iter_mut().enumerate() {
            let norm = f_e.iter().map(|row| row[c] * row[c]).sum::<f64>().sqrt();
            *floor = 1e-10 * norm * (elements.len() as f64).sqrt();
        }

        Ok(Self {
            resolution: n,
            active,
            nodes,
            row_ptr,
            cols,
            blocks,
            diag_inv,
            load_floor,
        })
    }

    pub fn resolution(&self) -> usize {
        self.resolution
    }

    pub fn active_nodes(&self) -> &[usize] {
        &self.nodes
    }

    /// Active index of a periodic node, if it carries DOFs.
    pub fn active_index(&self, node: usize) -> Option<usize> {
        match self.active[node] {
            INACTIVE => None,
            a => Some(a as usize),
        }
    }

    pub fn dof_count(&self) -> usize {
        3 * self.nodes.len()
    }

    pub fn multiply(&self, x: &[NodeBlock], y: &mut [NodeBlock]) {
        for (a, out) in y.iter_mut().enumerate() {
            let mut acc = ZERO_BLOCK;
            for idx in self.row_ptr[a]..self.row_ptr[a + 1] {
                let blk = &self.blocks[idx];
                let xb = &x[self.cols[idx] as usize];
                for r in 0..3 {
                    for c in 0..3 {
                        let w = blk[3 * r + c];
                        for k in 0..6 {
                            acc[r][k] += w * xb[c][k];
                        }
                    }
                }
            }
            *out = acc;
        }
    }

    fn precondition(&self, r: &[NodeBlock], z: &mut [NodeBlock]) {
        for ((out, rb), m) in z.iter_mut().zip(r).zip(&self.diag_inv) {
            *out = block_apply(m, rb);
        }
    }

    /// Solves the six cases in lockstep with block-Jacobi PCG.
    ///
    /// `loads` is indexed by periodic node. The solution is returned the same way,
    /// with zeros on inactive and pinned nodes.
    pub fn solve(
        &self,
        loads: &[NodeBlock],
        settings: &SolverSettings,
    ) -> Result<Vec<NodeBlock>, HomogenizationError> {
        let m = self.nodes.len();
        let mut b: Vec<NodeBlock> = self.nodes.iter().map(|&node| loads[node]).collect();
        b[0] = ZERO_BLOCK;

        let b_norm = column_norms(&b);
        let mut done = [false; 6];
        for c in 0..6 {
            if b_norm[c] <= self.load_floor[c] || b_norm[c] == 0.0 {
                done[c] = true;
            }
        }

        let mut x = vec![ZERO_BLOCK; m];
        let mut r = b.clone();
        let mut z = vec![ZERO_BLOCK; m];
        let mut q = vec![ZERO_BLOCK; m];
        self.precondition(&r, &mut z);
        let mut p = z.clone();
        let mut rz = column_dots(&r, &z);

        let max_iter =
            (settings.max_iter_factor * (self.dof_count() as f64).sqrt()).ceil() as usize;
        let mut iter = 0;
        while !done.iter().all(|&d| d) {
            if iter >= max_iter {
                let rn = column_norms(&r);
                let worst = (0..6)
                    .filter(|&c| !done[c])
                    .map(|c| rn[c] / b_norm[c])
                    .fold(0.0, f64::max);
                return Err(HomogenizationError::SolverFailure {
                    iterations: iter,
                    residual: worst,
                });
            }
            iter += 1;
            self.multiply(&p, &mut q);
            let pq = column_dots(&p, &q);
            let mut alpha = [0.0; 6];
            for c in 0..6 {
                if !done[c] {
                    if !(pq[c] > 0.0) {
                        return Err(HomogenizationError::DegenerateCell(
                            "stiffness is not positive definite on the solid phase".into(),
                        ));
                    }
                    alpha[c] = rz[c] / pq[c];
                }
            }
            for a in 0..m {
                for d in 0..3 {
                    for c in 0..6 {
                        x[a][d][c] += alpha[c] * p[a][d][c];
                        r[a][d][c] -= alpha[c] * q[a][d][c];
                    }
                }
            }
            let rn = column_norms(&r);
            for c in 0..6 {
                if !done[c] && rn[c] <= settings.rel_tol * b_norm[c] {
                    done[c] = true;
                }
            }
            self.precondition(&r, &mut z);
            let rz_new = column_dots(&r, &z);
            let mut beta = [0.0; 6];
            for c in 0..6 {
                if !done[c] {
                    beta[c] = rz_new[c] / rz[c];
                }
            }
            rz = rz_new;
            for a in 0..m {
                for d in 0..3 {
                    for c in 0..6 {
                        p[a][d][c] = if done[c] {
                            0.0
                        } else {
                            z[a][d][c] + beta[c] * p[a][d][c]
                        };
                    }
                }
            }
        }
        log::debug!(
            "periodic PCG converged in {iter} iterations ({} DOFs)",
            self.dof_count()
        );

        let n = self.resolution;
        let mut out = vec![ZERO_BLOCK; n * n * n];
        for (a, &node) in self.nodes.iter().enumerate() {
            out[node] = x[a];
        }
        Ok(out)
    }
}

/// Solves the six periodic cell problems for `grid`.
pub fn solve_cases(
    grid: &VoxelGrid,
    k_e: &ElementMatrix,
    loads: &[NodeBlock],
    settings: &SolverSettings,
) -> Result<Vec<NodeBlock>, HomogenizationError> {
    PeriodicSystem::assemble(grid, k_e)?.solve(loads, settings)
}

/// Solves a single load case given as a flat periodic DOF vector (`3·node + d`).
pub fn solve_case(
    grid: &VoxelGrid,
    k_e: &ElementMatrix,
    f: &[f64],
    settings: &SolverSettings,
) -> Result<Vec<f64>, HomogenizationError> {
    let n = grid.resolution();
    let mut loads = vec![ZERO_BLOCK; n * n * n];
    for (node, blk) in loads.iter_mut().enumerate() {
        for d in 0..3 {
            blk[d][0] = f[3 * node + d];
        }
    }
    let chi = solve_cases(grid, k_e, &loads, settings)?;
    Ok(chi
        .iter()
        .flat_map(|blk| (0..3).map(move |d| blk[d][0]))
        .collect())
}

/// `C^H_ij = Σ_e (χ⁰⁽ⁱ⁾ − χ⁽ⁱ⁾)ᵀ k_e (χ⁰⁽ʲ⁾ − χ⁽ʲ⁾)` over solid elements of a unit-volume cell.
pub fn homogenized_constitutive(
    grid: &VoxelGrid,
    k_e: &ElementMatrix,
    chi: &[NodeBlock],
    edge: f64,
) -> ConstitutiveMatrix {
    let chi0: Vec<_> = (0..6).map(|c| unit_strain_displacement(c, edge)).collect();
    let mut c_h = nalgebra::Matrix6::<f64>::zeros();
    let mut d = nalgebra::SMatrix::<f64, 24, 6>::zeros();
    for nodes in solid_elements(grid) {
        for (l, &node) in nodes.iter().enumerate() {
            for dim in 0..3 {
                for c in 0..6 {
                    d[(3 * l + dim, c)] = chi0[c][3 * l + dim] - chi[node][dim][c];
                }
            }
        }
        c_h += d.transpose() * (k_e * d);
    }
    ConstitutiveMatrix(c_h)
}

fn identity9() -> [f64; 9] {
    [1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0]
}

fn invert3(m: &[f64; 9]) -> Option<[f64; 9]> {
    let mat = nalgebra::Matrix3::from_row_slice(m);
    let inv = mat.try_inverse()?;
    let mut out = [0.0; 9];
    for r in 0..3 {
        for c in 0..3 {
            out[3 * r + c] = inv[(r, c)];
        }
    }
    Some(out)
}

#[inline]
fn block_apply(m: &[f64; 9], x: &NodeBlock) -> NodeBlock {
    let mut out = ZERO_BLOCK;
    for r in 0..3 {
        for c in 0..3 {
            let w = m[3 * r + c];
            for k in 0..6 {
                out[r][k] += w * x[c][k];
            }
        }
    }
    out
}

fn column_dots(a: &[NodeBlock], b: &[NodeBlock]) -> [f64; 6] {
    let mut out = [0.0; 6];
    for (x, y) in a.iter().zip(b) {
        for d in 0..3 {
            for c in 0..6 {
                out[c] += x[d][c] * y[d][c];
            }
        }
    }
    out
}

fn column_norms(a: &[NodeBlock]) -> [f64; 6] {
    column_dots(a, a).map(f64::sqrt)
}
