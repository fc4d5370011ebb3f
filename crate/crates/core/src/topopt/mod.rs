//! Macro-scale optimization of per-element `(E, ν)` fields on a plane-stress grid.
//!
//! Nodes are numbered column by column, `node = i·(ny+1) + j` for grid point
//! `(i, j)`, with DOFs `2·node` (x) and `2·node + 1` (y). Elements are row-major,
//! `e = ey·nx + ex`. Field moduli are in GPa; the FE system works in N and mm.

mod fe;
mod feasible;
mod filter;
mod problem;

use std::path::Path;

use serde::{Deserialize, Serialize};

pub use fe::{q4_plane_stress_stiffness, BandCholesky, BandMatrix, Q4Basis, Q4Matrix, GPA_TO_MPA};
pub use feasible::{clip_polygon, clip_to_box, project_onto_polygon, Bounds, FeasibleRegion};
pub use filter::{filter_field, ConeFilter};
pub use problem::{
    cantilever, sine_target, Edge, Load, NodeSelector, ObjectiveSpec, ProblemSpec, SineKind,
    Support, TargetPoint,
};

use crate::error::{Result, TopOptError};
use crate::io::{fmt_f64, write_atomic, write_csv_rows};

/// Structured grid of square plane-stress elements with supports and loads.
#[derive(Debug, Clone, PartialEq)]
pub struct MacroModel {
    pub nx: usize,
    pub ny: usize,
    /// Element edge length (mm).
    pub element_size: f64,
    /// Out-of-plane thickness (mm).
    pub thickness: f64,
    prescribed: Vec<(usize, f64)>,
    loads: Vec<f64>,
}

impl MacroModel {
    pub fn new(
        nx: usize,
        ny: usize,
        element_size: f64,
        thickness: f64,
    ) -> Result<Self, TopOptError> {
        if nx == 0 || ny == 0 {
            return Err(TopOptError::InvalidProblem(format!(
                "grid {nx}×{ny} is empty"
            )));
        }
        if !(element_size > 0.0
            && thickness > 0.0
            && element_size.is_finite()
            && thickness.is_finite())
        {
            return Err(TopOptError::InvalidProblem(
                "element size and thickness must be positive".into(),
            ));
        }
        Ok(Self {
            nx,
            ny,
            element_size,
            thickness,
            prescribed: Vec::new(),
            loads: vec![0.0; 2 * (nx + 1) * (ny + 1)],
        })
    }

    pub fn node(&self, i: usize, j: usize) -> usize {
        i * (self.ny + 1) + j
    }

    pub fn node_count(&self) -> usize {
        (self.nx + 1) * (self.ny + 1)
    }

    pub fn dof_count(&self) -> usize {
        2 * self.node_count()
    }

    pub fn element_count(&self) -> usize {
        self.nx * self.ny
    }

    /// Global DOFs of element `(ex, ey)`, counterclockwise from its lower-left node.
    pub fn element_dofs(&self, ex: usize, ey: usize) -> [usize; 8] {
        let n = [
            self.node(ex, ey),
            self.node(ex + 1, ey),
            self.node(ex + 1, ey + 1),
            self.node(ex, ey + 1),
        ];
        let mut d = [0; 8];
        for k in 0..4 {
            d[2 * k] = 2 * n[k];
            d[2 * k + 1] = 2 * n[k] + 1;
        }
        d
    }

    /// Prescribes `u[dof] = value`, replacing any earlier value.
    pub fn prescribe(&mut self, dof: usize, value: f64) -> Result<(), TopOptError> {
        if dof >= self.dof_count() || !value.is_finite() {
            return Err(TopOptError::InvalidProblem(format!(
                "bad prescribed dof {dof} = {value}"
            )));
        }
        match self.prescribed.binary_search_by_key(&dof, |p| p.0) {
            Ok(k) => self.prescribed[k].1 = value,
            Err(k) => self.prescribed.insert(k, (dof, value)),
        }
        Ok(())
    }

    pub fn add_load(&mut self, dof: usize, force: f64) -> Result<(), TopOptError> {
        if dof >= self.dof_count() || !force.is_finite() {
            return Err(TopOptError::InvalidProblem(format!(
                "bad load on dof {dof}: {force}"
            )));
        }
        self.loads[dof] += force;
        Ok(())
    }

    /// Prescribed `(dof, value)` pairs sorted by DOF.
    pub fn prescribed(&self) -> &[(usize, f64)] {
        &self.prescribed
    }

    pub fn loads(&self) -> &[f64] {
        &self.loads
    }

    pub fn validate(&self) -> Result<(), TopOptError> {
        if self.prescribed.is_empty() {
            return Err(TopOptError::IllPosed("no fixed degree of freedom".into()));
        }
        if self.loads.iter().any(|f| !f.is_finite()) {
            return Err(TopOptError::InvalidProblem("non-finite load".into()));
        }
        Ok(())
    }
}

/// Per-element Young's modulus (GPa) and Poisson's ratio, row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DesignField {
    pub nx: usize,
    pub ny: usize,
    pub e: Vec<f64>,
    pub nu: Vec<f64>,
}

impl DesignField {
    pub fn uniform(nx: usize, ny: usize, e: f64, nu: f64) -> Self {
        Self {
            nx,
            ny,
            e: vec![e; nx * ny],
            nu: vec![nu; nx * ny],
        }
    }

    pub fn len(&self) -> usize {
        self.e.len()
    }

    pub fn is_empty(&self) -> bool {
        self.e.is_empty()
    }

    pub fn sum_e(&self) -> f64 {
        self.e.iter().sum()
    }

    fn check(&self, model: &MacroModel) -> Result<(), TopOptError> {
        let n = model.element_count();
        if self.nx != model.nx || self.ny != model.ny || self.e.len() != n || self.nu.len() != n {
            return Err(TopOptError::InvalidProblem(format!(
                "field is {}×{} with {} values, model is {}×{}",
                self.nx,
                self.ny,
                self.e.len(),
                model.nx,
                model.ny
            )));
        }
        for (e, nu) in self.e.iter().zip(&self.nu) {
            if !(*e > 0.0 && e.is_finite() && *nu > -1.0 && *nu < 0.5) {
                return Err(TopOptError::InvalidProblem(format!(
                    "bad element material ({e}, {nu})"
                )));
            }
        }
        Ok(())
    }
}

/// What the optimizer minimizes.
#[derive(Debug, Clone, PartialEq)]
pub enum Objective {
    /// `C_c = uᵀ K u`.
    Compliance,
    /// `C_d = Σ (u_d - û_d)²` over the listed `(dof, û_d)` query DOFs.
    TargetDeformation { targets: Vec<(usize, f64)> },
}

/// Factored reduced system `K_FF` for one field.
struct System {
    /// Reduced index of each DOF, `None` when prescribed.
    free: Vec<Option<usize>>,
    chol: BandCholesky,
}

impl System {
    fn solve_full(&self, rhs_free: &[f64], fill: &[(usize, f64)]) -> Vec<f64> {
        let x = self.chol.solve(rhs_free);
        let mut u = vec![0.0; self.free.len()];
        for (d, f) in self.free.iter().enumerate() {
            if let Some(k) = f {
                u[d] = x[*k];
            }
        }
        for &(d, v) in fill {
            u[d] = v;
        }
        u
    }
}

fn element_stiffness(basis: &Q4Basis, field: &DesignField, e: usize) -> Q4Matrix {
    basis.stiffness(field.e[e] * GPA_TO_MPA, field.nu[e])
}

fn elements(model: &MacroModel) -> impl Iterator<Item = (usize, [usize; 8])> + '_ {
    (0..model.ny).flat_map(move |ey| {
        (0..model.nx).map(move |ex| (ey * model.nx + ex, model.element_dofs(ex, ey)))
    })
}

/// Assembles and factors `K_FF`, and the reduced right-hand side `f_F - K_FP u_P`.
fn assemble(model: &MacroModel, field: &DesignField) -> Result<(System, Vec<f64>)> {
    model.validate()?;
    field.check(model)?;
    let basis = Q4Basis::new(model.element_size, model.thickness);
    let ndof = model.dof_count();
    let mut free = vec![None; ndof];
    let mut prescribed_value = vec![None; ndof];
    for &(d, v) in model.prescribed() {
        prescribed_value[d] = Some(v);
    }
    let mut count = 0;
    for d in 0..ndof {
        if prescribed_value[d].is_none() {
            free[d] = Some(count);
            count += 1;
        }
    }
    if count == 0 {
        return Err(TopOptError::IllPosed("every degree of freedom is prescribed".into()).into());
    }
    let mut bw = 0;
    for (_, dofs) in elements(model) {
        let idx: Vec<usize> = dofs.iter().filter_map(|&d| free[d]).collect();
        if let (Some(lo), Some(hi)) = (idx.iter().min(), idx.iter().max()) {
            bw = bw.max(hi - lo);
        }
    }
    let mut k = BandMatrix::zeros(count, bw);
    let mut rhs: Vec<f64> = (0..ndof)
        .filter(|&d| free[d].is_some())
        .map(|d| model.loads()[d])
        .collect();
    for (e, dofs) in elements(model) {
        let ke = element_stiffness(&basis, field, e);
        for p in 0..8 {
            let Some(fp) = free[dofs[p]] else { continue };
            for q in 0..8 {
                match (free[dofs[q]], prescribed_value[dofs[q]]) {
                    (Some(fq), _) => k.add(fp, fq, ke[p][q]),
                    (None, Some(v)) => rhs[fp] -= ke[p][q] * v,
                    (None, None) => unreachable!(),
                }
            }
        }
    }
    let chol = k.factor()?;
    Ok((System { free, chol }, rhs))
}

/// Solved state: full displacement vector plus the factorization for adjoint solves.
struct State {
    u: Vec<f64>,
    system: System,
}

fn solve_state(model: &MacroModel, field: &DesignField) -> Result<State> {
    let (system, rhs) = assemble(model, field)?;
    let u = system.solve_full(&rhs, model.prescribed());
    Ok(State { u, system })
}

/// Static equilibrium `K(E, ν) u = f` with prescribed DOFs eliminated.
pub fn solve_macro(model: &MacroModel, field: &DesignField) -> Result<Vec<f64>> {
    Ok(solve_state(model, field)?.u)
}

fn gather(u: &[f64], dofs: &[usize; 8]) -> [f64; 8] {
    dofs.map(|d| u[d])
}

fn quad(a: &[f64; 8], k: &Q4Matrix, b: &[f64; 8]) -> f64 {
    let mut s = 0.0;
    for p in 0..8 {
        for q in 0..8 {
            s += a[p] * k[p][q] * b[q];
        }
    }
    s
}

/// `uᵀ K u` (N·mm).
pub fn compliance(model: &MacroModel, field: &DesignField, u: &[f64]) -> Result<f64> {
    field.check(model)?;
    if u.len() != model.dof_count() {
        return Err(TopOptError::InvalidProblem("displacement length mismatch".into()).into());
    }
    let basis = Q4Basis::new(model.element_size, model.thickness);
    Ok(elements(model)
        .map(|(e, dofs)| {
            let ue = gather(u, &dofs);
            quad(&ue, &element_stiffness(&basis, field, e), &ue)
        })
        .sum())
}

/// `Σ (u_d - û_d)²` over the query DOFs.
pub fn deformation_objective(u: &[f64], targets: &[(usize, f64)]) -> Result<f64, TopOptError> {
    let mut s = 0.0;
    for &(d, t) in targets {
        let v = u
            .get(d)
            .ok_or_else(|| TopOptError::QueryOutsideMesh(format!("dof {d} of {}", u.len())))?;
        s += (v - t).powi(2);
    }
    Ok(s)
}

fn objective_value(
    model: &MacroModel,
    field: &DesignField,
    u: &[f64],
    objective: &Objective,
) -> Result<f64> {
    match objective {
        Objective::Compliance => compliance(model, field, u),
        Objective::TargetDeformation { targets } => Ok(deformation_objective(u, targets)?),
    }
}

fn state_sensitivities(
    model: &MacroModel,
    field: &DesignField,
    state: &State,
    objective: &Objective,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let u = &state.u;
    let free = &state.system.free;
    let n_free = free.iter().flatten().count();
    let mut rhs = vec![0.0; n_free];
    let explicit = match objective {
        Objective::Compliance => {
            for (d, f) in free.iter().enumerate() {
                if let Some(k) = f {
                    rhs[*k] = 2.0 * model.loads()[d];
                }
            }
            true
        }
        Objective::TargetDeformation { targets } => {
            for &(d, t) in targets {
                let v = u.get(d).ok_or_else(|| {
                    TopOptError::QueryOutsideMesh(format!("dof {d} of {}", u.len()))
                })?;
                if let Some(k) = free[d] {
                    rhs[k] += 2.0 * (v - t);
                }
            }
            false
        }
    };
    let lambda = state.system.solve_full(&rhs, &[]);
    let basis = Q4Basis::new(model.element_size, model.thickness);
    let n = model.element_count();
    let (mut de, mut dnu) = (vec![0.0; n], vec![0.0; n]);
    for (e, dofs) in elements(model) {
        let ue = gather(u, &dofs);
        let le = gather(&lambda, &dofs);
        let nu = field.nu[e];
        let ke_e = basis.d_stiffness_d_e(nu).map(|r| r.map(|v| v * GPA_TO_MPA));
        let ke_nu = basis.d_stiffness_d_nu(field.e[e] * GPA_TO_MPA, nu);
        let mut ge = -quad(&le, &ke_e, &ue);
        let mut gnu = -quad(&le, &ke_nu, &ue);
        if explicit {
            ge += quad(&ue, &ke_e, &ue);
            gnu += quad(&ue, &ke_nu, &ue);
        }
        de[e] = ge;
        dnu[e] = gnu;
    }
    Ok((de, dnu))
}

/// Adjoint gradients of the objective with respect to each element's `E` (per GPa) and `ν`.
pub fn sensitivities(
    model: &MacroModel,
    field: &DesignField,
    u: &[f64],
    objective: &Objective,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let mut state = solve_state(model, field)?;
    if u.len() != state.u.len() {
        return Err(TopOptError::InvalidProblem("displacement length mismatch".into()).into());
    }
    state.u = u.to_vec();
    state_sensitivities(model, field, &state, objective)
}

/// Optimizer settings. Step sizes and move limits are in normalized units, where
/// the `E` and `ν` box ranges both have length one.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OptimizerConfig {
    /// Target average modulus; `ΣE = e_avg·N_e` (GPa).
    pub e_avg: f64,
    pub nu_init: f64,
    pub max_iterations: usize,
    pub move_limit: f64,
    /// Cone filter radius in elements.
    pub filter_radius: f64,
    /// Stop when an accepted step lowers the objective by less than this fraction.
    pub tolerance: f64,
    /// Step-halving attempts before the run stops as stalled.
    pub max_halvings: usize,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        Self {
            e_avg: 55.0,
            nu_init: 0.28,
            max_iterations: 200,
            move_limit: 0.1,
            filter_radius: 1.5,
            tolerance: 1e-6,
            max_halvings: 12,
        }
    }
}

impl OptimizerConfig {
    pub fn validate(&self, bounds: &Bounds) -> Result<(), TopOptError> {
        if !(self.e_avg >= bounds.e_min && self.e_avg <= bounds.e_max) {
            return Err(TopOptError::Infeasible(format!(
                "average modulus {} outside [{}, {}]",
                self.e_avg, bounds.e_min, bounds.e_max
            )));
        }
        if !(self.move_limit > 0.0 && self.filter_radius >= 0.0 && self.tolerance >= 0.0) {
            return Err(TopOptError::InvalidProblem(format!(
                "bad optimizer settings {self:?}"
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HistoryRecord {
    pub iteration: usize,
    pub objective: f64,
    pub sum_e: f64,
    /// `ΣE / E_c - 1`.
    pub constraint: f64,
    /// Step length of the accepted update (0 for the initial field).
    pub step: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    Converged,
    MaxIterations,
    /// Step halving could not find a non-increasing step.
    Stalled,
    /// Zero gradient.
    Stationary,
}

#[derive(Debug, Clone)]
pub struct Optimized {
    /// Filtered physical field.
    pub field: DesignField,
    pub history: Vec<HistoryRecord>,
    pub termination: Termination,
}

/// Design variables in normalized coordinates, one point per element.
type Design = Vec<[f64; 2]>;

fn physical(
    region: &FeasibleRegion,
    filter: &ConeFilter,
    x: &Design,
    nx: usize,
    ny: usize,
) -> DesignField {
    let e = filter.apply(&x.iter().map(|p| p[0]).collect::<Vec<_>>());
    let nu = filter.apply(&x.iter().map(|p| p[1]).collect::<Vec<_>>());
    let scale = region.bounds().scale();
    DesignField {
        nx,
        ny,
        e: e.iter().map(|v| v * scale[0]).collect(),
        nu: nu.iter().map(|v| v * scale[1]).collect(),
    }
}

/// Moves every element along `-step·dir`, shifted in `E` by a common `λ` chosen
/// by bisection so the filtered `ΣE` equals the target, then projected onto its
/// local feasible polygon.
fn constrained_step(
    x: &Design,
    dir: &[[f64; 2]],
    step: f64,
    locals: &[Vec<[f64; 2]>],
    weights: &[f64],
    target: f64,
) -> Design {
    let trial = |lambda: f64| -> Design {
        x.iter()
            .zip(dir)
            .zip(locals)
            .map(|((p, d), poly)| {
                project_onto_polygon([p[0] - step * d[0] + lambda, p[1] - step * d[1]], poly)
            })
            .collect()
    };
    let total = |y: &Design| -> f64 { y.iter().zip(weights).map(|(p, w)| p[0] * w).sum() };
    let (mut lo, mut hi) = (-4.0, 4.0);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if total(&trial(mid)) < target {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-15 {
            break;
        }
    }
    trial(0.5 * (lo + hi))
}

/// Projected-gradient descent on the filtered field under hull, box and `ΣE` constraints.
pub fn optimize(
    model: &MacroModel,
    objective: &Objective,
    region: &FeasibleRegion,
    config: &OptimizerConfig,
) -> Result<Optimized> {
    config.validate(region.bounds())?;
    model.validate()?;
    let (nx, ny) = (model.nx, model.ny);
    let n = model.element_count();
    if !region.contains(config.e_avg, config.nu_init, 1e-12) {
        return Err(TopOptError::Infeasible(format!(
            "initial point ({}, {}) is outside the feasible region",
            config.e_avg, config.nu_init
        ))
        .into());
    }
    let filter = ConeFilter::new(nx, ny, config.filter_radius);
    let weights = filter.column_sums();
    let scale = region.bounds().scale();
    let e_total = config.e_avg * n as f64;
    let target = e_total / scale[0];

    let mut x: Design = vec![region.to_normalized(config.e_avg, config.nu_init); n];
    let mut field = physical(region, &filter, &x, nx, ny);
    let mut state = solve_state(model, &field)?;
    let mut value = objective_value(model, &field, &state.u, objective)?;
    let record = |iteration, value, field: &DesignField, step| HistoryRecord {
        iteration,
        objective: value,
        sum_e: field.sum_e(),
        constraint: field.sum_e() / e_total - 1.0,
        step,
    };
    let mut history = vec![record(0, value, &field, 0.0)];
    let mut step = config.move_limit;
    let mut termination = Termination::MaxIterations;

    for iteration in 1..=config.max_iterations {
        let (ge, gnu) = state_sensitivities(model, &field, &state, objective)?;
        let ge = filter.apply_transpose(&ge);
        let gnu = filter.apply_transpose(&gnu);
        let mut dir: Vec<[f64; 2]> = ge
            .iter()
            .zip(&gnu)
            .map(|(a, b)| [a * scale[0], b * scale[1]])
            .collect();
        let norm = dir.iter().flatten().fold(0.0f64, |m, v| m.max(v.abs()));
        if norm == 0.0 || !norm.is_finite() {
            termination = Termination::Stationary;
            break;
        }
        dir.iter_mut().flatten().for_each(|v| *v /= norm);
        let locals: Vec<Vec<[f64; 2]>> = x
            .iter()
            .map(|p| region.local_polygon(*p, config.move_limit))
            .collect();

        let mut accepted = None;
        for _ in 0..=config.max_halvings {
            let x_new = constrained_step(&x, &dir, step, &locals, &weights, target);
            let f_new = physical(region, &filter, &x_new, nx, ny);
            let s_new = solve_state(model, &f_new)?;
            let v_new = objective_value(model, &f_new, &s_new.u, objective)?;
            if v_new <= value {
                accepted = Some((x_new, f_new, s_new, v_new));
                break;
            }
            step *= 0.5;
        }
        let Some((x_new, f_new, s_new, v_new)) = accepted else {
            termination = Termination::Stalled;
            break;
        };
        let drop = (value - v_new) / value.abs().max(f64::MIN_POSITIVE);
        x = x_new;
        field = f_new;
        state = s_new;
        value = v_new;
        history.push(record(iteration, value, &field, step));
        log::debug!("iteration {iteration}: objective {value:.6e}, step {step:.3e}");
        step = (2.0 * step).min(config.move_limit);
        if drop < config.tolerance {
            termination = Termination::Converged;
            break;
        }
    }
    Ok(Optimized {
        field,
        history,
        termination,
    })
}

/// Writes one map as `ny` lines of `nx` values; line `k` is element row `ey = k` (bottom first).
pub fn write_field_csv(path: &Path, values: &[f64], nx: usize, ny: usize) -> Result<()> {
    if values.len() != nx * ny {
        return Err(TopOptError::InvalidProblem("field size mismatch".into()).into());
    }
    write_atomic(path, |w| {
        for row in values.chunks(nx) {
            let line: Vec<String> = row.iter().map(|v| fmt_f64(*v)).collect();
            writeln!(w, "{}", line.join(","))?;
        }
        Ok(())
    })
}

/// Reads a map written by [`write_field_csv`], returning `(values, nx, ny)`.
pub fn read_field_csv(path: &Path) -> Result<(Vec<f64>, usize, usize)> {
    let text = std::fs::read_to_string(path).map_err(|source| crate::Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let mut values = Vec::new();
    let mut nx = None;
    let mut ny = 0;
    for line in text.lines().filter(|l| !l.trim().is_empty()) {
        let row: Vec<f64> = line
            .split(',')
            .map(|s| s.trim().parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| TopOptError::InvalidProblem(format!("{}: {e}", path.display())))?;
        if *nx.get_or_insert(row.len()) != row.len() {
            return Err(
                TopOptError::InvalidProblem(format!("{}: ragged rows", path.display())).into(),
            );
        }
        values.extend(row);
        ny += 1;
    }
    let nx =
        nx.ok_or_else(|| TopOptError::InvalidProblem(format!("{}: empty field", path.display())))?;
    Ok((values, nx, ny))
}

pub const HISTORY_HEADER: [&str; 5] = ["iteration", "objective", "sum_e", "constraint", "step"];

pub fn write_history(path: &Path, history: &[HistoryRecord]) -> Result<()> {
    let rows: Vec<Vec<String>> = history
        .iter()
        .map(|h| {
            vec![
                h.iteration.to_string(),
                fmt_f64(h.objective),
                fmt_f64(h.sum_e),
                fmt_f64(h.constraint),
                fmt_f64(h.step),
            ]
        })
        .collect();
    write_csv_rows(path, &HISTORY_HEADER, &rows)
}
