//! Problem files: grid, supports, loads, objective and optimizer settings.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use super::{Bounds, MacroModel, Objective, OptimizerConfig};
use crate::error::TopOptError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Edge {
    Left,
    Right,
    Bottom,
    Top,
}

/// A set of grid nodes: a whole boundary edge or one node `[i, j]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NodeSelector {
    Edge(Edge),
    Node([usize; 2]),
}

impl NodeSelector {
    fn nodes(&self, model: &MacroModel) -> Result<Vec<usize>, TopOptError> {
        let (nx, ny) = (model.nx, model.ny);
        Ok(match *self {
            NodeSelector::Edge(Edge::Left) => (0..=ny).map(|j| model.node(0, j)).collect(),
            NodeSelector::Edge(Edge::Right) => (0..=ny).map(|j| model.node(nx, j)).collect(),
            NodeSelector::Edge(Edge::Bottom) => (0..=nx).map(|i| model.node(i, 0)).collect(),
            NodeSelector::Edge(Edge::Top) => (0..=nx).map(|i| model.node(i, ny)).collect(),
            NodeSelector::Node([i, j]) => {
                if i > nx || j > ny {
                    return Err(TopOptError::InvalidProblem(format!(
                        "node [{i}, {j}] outside the {nx}×{ny} grid"
                    )));
                }
                vec![model.node(i, j)]
            }
        })
    }
}

/// Prescribed displacements (mm) on every selected node; omitted components stay free.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Support {
    pub at: NodeSelector,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ux: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub uy: Option<f64>,
}

/// Nodal force (N) applied at every selected node.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Load {
    pub at: NodeSelector,
    #[serde(default)]
    pub fx: f64,
    #[serde(default)]
    pub fy: f64,
}

/// Target displacement (mm) at the node located at `(x, y)` (mm).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TargetPoint {
    pub x: f64,
    pub y: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ux: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub uy: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ObjectiveSpec {
    Compliance,
    TargetDeformation { targets: Vec<TargetPoint> },
}

fn one() -> f64 {
    1.0
}

/// Contents of a `problem.json` file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProblemSpec {
    pub nx: usize,
    pub ny: usize,
    #[serde(default = "one")]
    pub element_size: f64,
    #[serde(default = "one")]
    pub thickness: f64,
    pub supports: Vec<Support>,
    #[serde(default)]
    pub loads: Vec<Load>,
    pub objective: ObjectiveSpec,
    #[serde(default)]
    pub optimizer: OptimizerConfig,
    #[serde(default)]
    pub bounds: Bounds,
}

impl ProblemSpec {
    pub fn build(&self) -> Result<(MacroModel, Objective), TopOptError> {
        let mut model = MacroModel::new(self.nx, self.ny, self.element_size, self.thickness)?;
        for s in &self.supports {
            for n in s.at.nodes(&model)? {
                if let Some(v) = s.ux {
                    model.prescribe(2 * n, v)?;
                }
                if let Some(v) = s.uy {
                    model.prescribe(2 * n + 1, v)?;
                }
            }
        }
        for l in &self.loads {
            for n in l.at.nodes(&model)? {
                model.add_load(2 * n, l.fx)?;
                model.add_load(2 * n + 1, l.fy)?;
            }
        }
        model.validate()?;
        let objective = match &self.objective {
            ObjectiveSpec::Compliance => Objective::Compliance,
            ObjectiveSpec::TargetDeformation { targets } => {
                let mut out = Vec::new();
                for t in targets {
                    let n = self.locate(&model, t.x, t.y)?;
                    if let Some(v) = t.ux {
                        out.push((2 * n, v));
                    }
                    if let Some(v) = t.uy {
                        out.push((2 * n + 1, v));
                    }
                }
                if out.is_empty() {
                    return Err(TopOptError::InvalidProblem(
                        "no target displacements".into(),
                    ));
                }
                Objective::TargetDeformation { targets: out }
            }
        };
        Ok((model, objective))
    }

    fn locate(&self, model: &MacroModel, x: f64, y: f64) -> Result<usize, TopOptError> {
        let (fi, fj) = (x / self.element_size, y / self.element_size);
        let (i, j) = (fi.round(), fj.round());
        let on_node = (fi - i).abs() < 1e-6 && (fj - j).abs() < 1e-6;
        if !on_node || i < 0.0 || j < 0.0 || i > self.nx as f64 || j > self.ny as f64 {
            return Err(TopOptError::QueryOutsideMesh(format!(
                "({x}, {y}) is not a grid node"
            )));
        }
        Ok(model.node(i as usize, j as usize))
    }
}

/// Cantilever: left edge clamped, downward point load at mid-height of the right edge.
pub fn cantilever(nx: usize, ny: usize, force: f64) -> ProblemSpec {
    ProblemSpec {
        nx,
        ny,
        element_size: 1.0,
        thickness: 1.0,
        supports: vec![Support {
            at: NodeSelector::Edge(Edge::Left),
            ux: Some(0.0),
            uy: Some(0.0),
        }],
        loads: vec![Load {
            at: NodeSelector::Node([nx, ny / 2]),
            fx: 0.0,
            fy: -force,
        }],
        objective: ObjectiveSpec::Compliance,
        optimizer: OptimizerConfig::default(),
        bounds: Bounds::default(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SineKind {
    Half,
    Full,
}

/// Left edge clamped; right edge pushed by `shortening` mm along -x with `u_y = 0`.
/// Every bottom-edge node targets `u_y = amplitude·sin(kπx/L)`, `k` = 1 (half) or 2 (full).
pub fn sine_target(
    nx: usize,
    ny: usize,
    shortening: f64,
    kind: SineKind,
    amplitude: f64,
) -> ProblemSpec {
    let waves = match kind {
        SineKind::Half => 1.0,
        SineKind::Full => 2.0,
    };
    let length = nx as f64;
    let targets = (0..=nx)
        .map(|i| {
            let x = i as f64;
            TargetPoint {
                x,
                y: 0.0,
                ux: None,
                uy: Some(amplitude * (waves * PI * x / length).sin()),
            }
        })
        .collect();
    ProblemSpec {
        nx,
        ny,
        element_size: 1.0,
        thickness: 1.0,
        supports: vec![
            Support {
                at: NodeSelector::Edge(Edge::Left),
                ux: Some(0.0),
                uy: Some(0.0),
            },
            Support {
                at: NodeSelector::Edge(Edge::Right),
                ux: Some(-shortening),
                uy: Some(0.0),
            },
        ],
        loads: Vec::new(),
        objective: ObjectiveSpec::TargetDeformation { targets },
        optimizer: OptimizerConfig::default(),
        bounds: Bounds::default(),
    }
}
