//! Feasible `(E, ν)` region: property hull intersected with the box bounds.

use serde::{Deserialize, Serialize};

use crate::dataset::PropertyHull;
use crate::error::TopOptError;

/// Box bounds on the design field.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bounds {
    pub e_min: f64,
    pub e_max: f64,
    pub nu_min: f64,
    pub nu_max: f64,
}

impl Default for Bounds {
    fn default() -> Self {
        Self {
            e_min: 20.0,
            e_max: 128.11,
            nu_min: 0.23,
            nu_max: 0.33,
        }
    }
}

impl Bounds {
    pub fn validate(&self) -> Result<(), TopOptError> {
        let finite = [self.e_min, self.e_max, self.nu_min, self.nu_max]
            .iter()
            .all(|v| v.is_finite());
        if !finite || self.e_min <= 0.0 || self.e_max <= self.e_min || self.nu_max <= self.nu_min {
            return Err(TopOptError::InvalidProblem(format!("bad bounds {self:?}")));
        }
        if self.nu_min <= -1.0 || self.nu_max >= 0.5 {
            return Err(TopOptError::InvalidProblem(
                "Poisson bounds must lie inside (-1, 0.5)".into(),
            ));
        }
        Ok(())
    }

    /// Scale that maps `(E, ν)` to unit-range normalized coordinates.
    pub fn scale(&self) -> [f64; 2] {
        [self.e_max - self.e_min, self.nu_max - self.nu_min]
    }
}

/// Keeps the part of convex polygon `poly` with `n·p ≤ c`.
pub fn clip_polygon(poly: &[[f64; 2]], n: [f64; 2], c: f64) -> Vec<[f64; 2]> {
    let side = |p: &[f64; 2]| n[0] * p[0] + n[1] * p[1] - c;
    let mut out = Vec::with_capacity(poly.len() + 1);
    for k in 0..poly.len() {
        let a = poly[k];
        let b = poly[(k + 1) % poly.len()];
        let (sa, sb) = (side(&a), side(&b));
        if sa <= 0.0 {
            out.push(a);
        }
        if (sa < 0.0 && sb > 0.0) || (sa > 0.0 && sb < 0.0) {
            let t = sa / (sa - sb);
            out.push([a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1])]);
        }
    }
    out
}

/// Clips `poly` to the axis-aligned box `[lo, hi]`.
pub fn clip_to_box(poly: &[[f64; 2]], lo: [f64; 2], hi: [f64; 2]) -> Vec<[f64; 2]> {
    let mut p = clip_polygon(poly, [1.0, 0.0], hi[0]);
    p = clip_polygon(&p, [-1.0, 0.0], -lo[0]);
    p = clip_polygon(&p, [0.0, 1.0], hi[1]);
    clip_polygon(&p, [0.0, -1.0], -lo[1])
}

fn nearest_on_segment(p: [f64; 2], a: [f64; 2], b: [f64; 2]) -> [f64; 2] {
    let d = [b[0] - a[0], b[1] - a[1]];
    let len2 = d[0] * d[0] + d[1] * d[1];
    if len2 == 0.0 {
        return a;
    }
    let t = (((p[0] - a[0]) * d[0] + (p[1] - a[1]) * d[1]) / len2).clamp(0.0, 1.0);
    [a[0] + t * d[0], a[1] + t * d[1]]
}

/// Euclidean projection of `p` onto a nonempty counterclockwise convex polygon.
pub fn project_onto_polygon(p: [f64; 2], poly: &[[f64; 2]]) -> [f64; 2] {
    let m = poly.len();
    if m == 1 {
        return poly[0];
    }
    let inside = m >= 3
        && (0..m).all(|k| {
            let a = poly[k];
            let b = poly[(k + 1) % m];
            (b[0] - a[0]) * (p[1] - a[1]) - (b[1] - a[1]) * (p[0] - a[0]) >= 0.0
        });
    if inside {
        return p;
    }
    let mut best = poly[0];
    let mut best_d = f64::INFINITY;
    for k in 0..m {
        let q = nearest_on_segment(p, poly[k], poly[(k + 1) % m]);
        let d = (q[0] - p[0]).powi(2) + (q[1] - p[1]).powi(2);
        if d < best_d {
            best_d = d;
            best = q;
        }
    }
    best
}

/// Hull ∩ box as a polygon in normalized coordinates `(E/ΔE, ν/Δν)`.
#[derive(Debug, Clone)]
pub struct FeasibleRegion {
    bounds: Bounds,
    scale: [f64; 2],
    polygon: Vec<[f64; 2]>,
}

impl FeasibleRegion {
    pub fn new(hull: &PropertyHull, bounds: Bounds) -> Result<Self, TopOptError> {
        bounds.validate()?;
        let clipped = clip_to_box(
            &hull.vertices(),
            [bounds.e_min, bounds.nu_min],
            [bounds.e_max, bounds.nu_max],
        );
        if clipped.is_empty() {
            return Err(TopOptError::Infeasible(
                "property hull does not intersect the design bounds".into(),
            ));
        }
        let scale = bounds.scale();
        let polygon = clipped
            .iter()
            .map(|v| [v[0] / scale[0], v[1] / scale[1]])
            .collect();
        Ok(Self {
            bounds,
            scale,
            polygon,
        })
    }

    pub fn bounds(&self) -> &Bounds {
        &self.bounds
    }

    pub fn to_normalized(&self, e: f64, nu: f64) -> [f64; 2] {
        [e / self.scale[0], nu / self.scale[1]]
    }

    pub fn from_normalized(&self, p: [f64; 2]) -> (f64, f64) {
        (p[0] * self.scale[0], p[1] * self.scale[1])
    }

    /// Corners of the feasible polygon in normalized coordinates.
    pub fn polygon(&self) -> &[[f64; 2]] {
        &self.polygon
    }

    /// Feasible polygon further restricted to a box of half-width `half` around `center`.
    pub fn local_polygon(&self, center: [f64; 2], half: f64) -> Vec<[f64; 2]> {
        let local = clip_to_box(
            &self.polygon,
            [center[0] - half, center[1] - half],
            [center[0] + half, center[1] + half],
        );
        if local.is_empty() {
            vec![project_onto_polygon(center, &self.polygon)]
        } else {
            local
        }
    }

    /// Nearest feasible point in normalized coordinates, returned in physical units.
    pub fn project(&self, e: f64, nu: f64) -> (f64, f64) {
        self.from_normalized(project_onto_polygon(
            self.to_normalized(e, nu),
            &self.polygon,
        ))
    }

    /// Membership with a tolerance in normalized units.
    pub fn contains(&self, e: f64, nu: f64, tol: f64) -> bool {
        let p = self.to_normalized(e, nu);
        let q = project_onto_polygon(p, &self.polygon);
        (p[0] - q[0]).hypot(p[1] - q[1]) <= tol
    }
}
