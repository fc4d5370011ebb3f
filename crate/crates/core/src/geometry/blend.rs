//! Linear transition blending between two adjacent unit cells.
//!
//! The transition cell spans from the center of cell `a` to the center of
//! cell `b` along `axis`; the blend weight is the normalized coordinate along
//! that span.

use super::tpms::{ShapeParams, Trig};
use super::voxel::Axis;

/// `(1 - s)·f_a(p) + s·f_b(p)` with `s` clamped to `[0, 1]`.
pub fn blend_cells(a: &ShapeParams, b: &ShapeParams, s: f64, point: [f64; 3]) -> f64 {
    let trig = Trig::at(point);
    blend_trig(a, b, s, &trig)
}

#[inline]
pub(crate) fn blend_trig(a: &ShapeParams, b: &ShapeParams, s: f64, trig: &Trig) -> f64 {
    let w = s.clamp(0.0, 1.0);
    (1.0 - w) * a.eval_trig(trig) + w * b.eval_trig(trig)
}

/// A transition cell whose blend coordinate is its own local coordinate along `axis`.
#[derive(Debug, Clone, Copy)]
pub struct TransitionCell {
    pub a: ShapeParams,
    pub b: ShapeParams,
    pub axis: Axis,
}

impl TransitionCell {
    pub fn eval(&self, local: [f64; 3]) -> f64 {
        blend_cells(&self.a, &self.b, local[self.axis.index()], local)
    }
}
