//! Implicit TPMS basis functions (Schwarz P, Diamond, F-RD) and their
//! weighted merge into a single unit-cell field.
//!
//! All functions use unit-cell coordinates: one period spans `[0, 1]` along
//! each axis, so the trigonometric arguments are `X = 2πx` etc. A point is
//! solid when the merged field is `>= 0`.

use std::f64::consts::TAU;

use serde::{Deserialize, Serialize};

use crate::error::GeometryError;

/// Lower bound of the level-set offsets.
pub const T_MIN: f64 = -0.4;
/// Upper bound of the level-set offsets.
pub const T_MAX: f64 = 0.4;
/// Multiplier applied to the P and D terms of the merged field.
pub const PD_WEIGHT: f64 = 4.0;

const ALPHA_SUM_TOL: f64 = 1e-9;
const BOUND_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum TpmsKind {
    /// Schwarz P.
    P,
    /// Schwarz Diamond.
    D,
    /// Schoen F-RD.
    Frd,
}

/// Precomputed trigonometric terms of a point.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Trig {
    pub c: [f64; 3],
    pub s: [f64; 3],
    pub c2: [f64; 3],
}

impl Trig {
    pub fn at(p: [f64; 3]) -> Self {
        let mut c = [0.0; 3];
        let mut s = [0.0; 3];
        let mut c2 = [0.0; 3];
        for a in 0..3 {
            let (sa, ca) = (TAU * p[a]).sin_cos();
            c[a] = ca;
            s[a] = sa;
            c2[a] = (2.0 * TAU * p[a]).cos();
        }
        Self { c, s, c2 }
    }

    /// Per-axis values at one coordinate; `Trig::compose` combines three of them.
    pub fn axis(x: f64) -> (f64, f64, f64) {
        let (s, c) = (TAU * x).sin_cos();
        (c, s, (2.0 * TAU * x).cos())
    }

    pub fn compose(x: (f64, f64, f64), y: (f64, f64, f64), z: (f64, f64, f64)) -> Self {
        Self {
            c: [x.0, y.0, z.0],
            s: [x.1, y.1, z.1],
            c2: [x.2, y.2, z.2],
        }
    }

    #[inline]
    pub fn p(&self) -> f64 {
        self.c[0] + self.c[1] + self.c[2]
    }

    #[inline]
    pub fn d(&self) -> f64 {
        self.c[0] * self.c[1] * self.c[2] - self.s[0] * self.s[1] * self.s[2]
    }

    #[inline]
    pub fn frd(&self) -> f64 {
        let [c2x, c2y, c2z] = self.c2;
        8.0 * self.c[0] * self.c[1] * self.c[2] + c2x * c2y * c2z
            - (c2x * c2y + c2y * c2z + c2z * c2x)
    }
}

/// Evaluates one TPMS basis function including its additive level offset `t`.
pub fn eval_basis(kind: TpmsKind, point: [f64; 3], t: f64) -> f64 {
    let trig = Trig::at(point);
    let base = match kind {
        TpmsKind::P => trig.p(),
        TpmsKind::D => trig.d(),
        TpmsKind::Frd => trig.frd(),
    };
    base + t
}

/// Six-dimensional shape vector of a merged unit cell.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ShapeParams {
    pub alpha: [f64; 3],
    pub t: [f64; 3],
}

impl ShapeParams {
    /// Builds validated parameters: weights on the simplex, offsets in `[T_MIN, T_MAX]`.
    pub fn new(alpha: [f64; 3], t: [f64; 3]) -> Result<Self, GeometryError> {
        let params = Self { alpha, t };
        params.validate()?;
        Ok(params)
    }

    /// Pure single-family cell with zero offsets on the other families.
    pub fn pure(kind: TpmsKind, t: f64) -> Result<Self, GeometryError> {
        let (alpha, offsets) = match kind {
            TpmsKind::P => ([1.0, 0.0, 0.0], [t, 0.0, 0.0]),
            TpmsKind::D => ([0.0, 1.0, 0.0], [0.0, t, 0.0]),
            TpmsKind::Frd => ([0.0, 0.0, 1.0], [0.0, 0.0, t]),
        };
        Self::new(alpha, offsets)
    }

    pub fn from_array(v: [f64; 6]) -> Result<Self, GeometryError> {
        Self::new([v[0], v[1], v[2]], [v[3], v[4], v[5]])
    }

    pub fn to_array(&self) -> [f64; 6] {
        [
            self.alpha[0],
            self.alpha[1],
            self.alpha[2],
            self.t[0],
            self.t[1],
            self.t[2],
        ]
    }

    pub fn validate(&self) -> Result<(), GeometryError> {
        let all = self.to_array();
        if all.iter().any(|v| !v.is_finite()) {
            return Err(GeometryError::InvalidParams(format!(
                "non-finite component in {all:?}"
            )));
        }
        for (i, &a) in self.alpha.iter().enumerate() {
            if !(-BOUND_TOL..=1.0 + BOUND_TOL).contains(&a) {
                return Err(GeometryError::InvalidParams(format!(
                    "alpha{} = {a} outside [0, 1]",
                    i + 1
                )));
            }
        }
        let sum: f64 = self.alpha.iter().sum();
        if (sum - 1.0).abs() > ALPHA_SUM_TOL {
            return Err(GeometryError::InvalidParams(format!(
                "alpha weights sum to {sum}, expected 1"
            )));
        }
        for (i, &t) in self.t.iter().enumerate() {
            if !(T_MIN - BOUND_TOL..=T_MAX + BOUND_TOL).contains(&t) {
                return Err(GeometryError::InvalidParams(format!(
                    "t{} = {t} outside [{T_MIN}, {T_MAX}]",
                    i + 1
                )));
            }
        }
        Ok(())
    }

    /// CSV row `alpha1,alpha2,alpha3,t1,t2,t3` with round-trip decimal formatting.
    pub fn to_csv_row(&self) -> String {
        self.to_array()
            .iter()
            .map(|v| format!("{v:?}"))
            .collect::<Vec<_>>()
            .join(",")
    }

    pub fn from_csv_row(row: &str) -> Result<Self, GeometryError> {
        let values: Vec<f64> = row
            .trim()
            .split(',')
            .map(|s| s.trim().parse::<f64>())
            .collect::<Result<_, _>>()
            .map_err(|e| GeometryError::InvalidParams(format!("unparsable row {row:?}: {e}")))?;
        let arr: [f64; 6] = values.try_into().map_err(|v: Vec<f64>| {
            GeometryError::InvalidParams(format!("expected 6 columns, got {}", v.len()))
        })?;
        Self::from_array(arr)
    }

    #[inline]
    pub(crate) fn eval_trig(&self, trig: &Trig) -> f64 {
        let [a1, a2, a3] = self.alpha;
        let [t1, t2, t3] = self.t;
        a1 * (PD_WEIGHT * (trig.p() + t1))
            + a2 * (PD_WEIGHT * (trig.d() + t2))
            + a3 * (trig.frd() + t3)
    }
}

/// Merged field `α₁·4·f_P + α₂·4·f_D + α₃·f_FRD` at a unit-cell point.
pub fn eval_merged(params: &ShapeParams, point: [f64; 3]) -> f64 {
    params.eval_trig(&Trig::at(point))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn basis_values_at_known_points() {
        assert!((eval_basis(TpmsKind::P, [0.0; 3], 0.0) - 3.0).abs() < 1e-15);
        assert!((eval_basis(TpmsKind::D, [0.0; 3], 0.4) - 1.4).abs() < 1e-15);
        let frd = eval_basis(TpmsKind::Frd, [0.25; 3], 0.0);
        assert!((frd + 4.0).abs() < 1e-12, "{frd}");
    }

    #[test]
    fn merged_values() {
        let p = ShapeParams::new([1.0, 0.0, 0.0], [0.0; 3]).unwrap();
        assert!((eval_merged(&p, [0.0; 3]) - 12.0).abs() < 1e-14);

        let third = 1.0 / 3.0;
        let mix = ShapeParams::new([third; 3], [0.0; 3]).unwrap();
        assert!((eval_merged(&mix, [0.0; 3]) - 22.0 / 3.0).abs() < 1e-12);

        let frd = ShapeParams::new([0.0, 0.0, 1.0], [0.3, -0.2, 0.0]).unwrap();
        for pt in [[0.1, 0.7, 0.3], [0.5, 0.5, 0.5], [0.9, 0.05, 0.6]] {
            assert_eq!(eval_merged(&frd, pt), eval_basis(TpmsKind::Frd, pt, 0.0));
        }
    }

    #[test]
    fn rejects_bad_params() {
        assert!(ShapeParams::new([0.5, 0.6, 0.0], [0.0; 3]).is_err());
        assert!(ShapeParams::new([1.2, -0.2, 0.0], [0.0; 3]).is_err());
        assert!(ShapeParams::new([1.0, 0.0, 0.0], [0.5, 0.0, 0.0]).is_err());
        assert!(ShapeParams::new([1.0, 0.0, 0.0], [f64::NAN, 0.0, 0.0]).is_err());
    }

    #[test]
    fn csv_row_round_trips() {
        let p = ShapeParams::new([0.1, 0.2, 0.7], [-0.123456789, 0.4, 1e-17]).unwrap();
        let back = ShapeParams::from_csv_row(&p.to_csv_row()).unwrap();
        assert_eq!(p, back);
        assert!(ShapeParams::from_csv_row("1,0,0,0,0").is_err());
    }
}
