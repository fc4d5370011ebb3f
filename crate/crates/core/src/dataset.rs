//! Shape sampling, property database, train/test split, property hull and scaling.

use std::path::Path;

use rand::seq::SliceRandom;
use rand::Rng as _;
use rand_distr::{Distribution, Exp1};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{DatasetError, Error, Result};
use crate::geometry::{validity_check, voxelize, ShapeParams, T_MAX, T_MIN};
use crate::homogenization::Homogenizer;
use crate::io::{fmt_f64, read_csv, write_csv_rows};
use crate::rng::stream;

pub const DATASET_HEADER: [&str; 10] = [
    "id", "alpha1", "alpha2", "alpha3", "t1", "t2", "t3", "E_H", "nu_H", "vf",
];

/// `n` points uniformly distributed on the 2-simplex (normalized exponential spacings).
pub fn sample_alphas(n: usize, seed: u64) -> Vec<[f64; 3]> {
    let mut rng = stream(seed, 1);
    (0..n)
        .map(|_| {
            let e: [f64; 3] = std::array::from_fn(|_| Exp1.sample(&mut rng));
            let s = e[0] + e[1] + e[2];
            let a0 = e[0] / s;
            let a1 = e[1] / s;
            [a0, a1, 1.0 - a0 - a1]
        })
        .collect()
}

/// Latin hypercube design in `[lo, hi]³`: in each dimension every one of the `n`
/// equal strata holds exactly one sample.
pub fn latin_hypercube_t(n: usize, lo: f64, hi: f64, seed: u64) -> Vec<[f64; 3]> {
    let mut rng = stream(seed, 2);
    let width = (hi - lo) / n as f64;
    let mut out = vec![[0.0; 3]; n];
    for d in 0..3 {
        let mut strata: Vec<usize> = (0..n).collect();
        strata.shuffle(&mut rng);
        for (row, s) in out.iter_mut().zip(strata) {
            let u: f64 = rng.random();
            row[d] = (lo + (s as f64 + u) * width).clamp(lo, hi);
        }
    }
    out
}

/// One homogenized unit cell.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DatasetRecord {
    pub id: usize,
    pub params: ShapeParams,
    pub e_h: f64,
    pub nu_h: f64,
    pub vf: f64,
}

impl DatasetRecord {
    pub fn property(&self) -> [f64; 2] {
        [self.e_h, self.nu_h]
    }

    pub fn check(&self) -> Result<(), DatasetError> {
        let ok = self.params.validate().is_ok()
            && self.e_h.is_finite()
            && self.e_h > 0.0
            && self.nu_h > -1.0
            && self.nu_h < 0.5
            && self.vf > 0.0
            && self.vf < 1.0;
        if ok {
            Ok(())
        } else {
            Err(DatasetError::Malformed(format!(
                "record {} violates invariants",
                self.id
            )))
        }
    }

    fn to_row(self) -> Vec<String> {
        let mut row = vec![self.id.to_string()];
        row.extend(self.params.to_array().iter().map(|&v| fmt_f64(v)));
        row.extend([self.e_h, self.nu_h, self.vf].iter().map(|&v| fmt_f64(v)));
        row
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DatasetConfig {
    pub n_target: usize,
    pub seed: u64,
    pub resolution: usize,
    /// Candidates drawn per requested record.
    pub oversample: f64,
}

impl Default for DatasetConfig {
    fn default() -> Self {
        Self {
            n_target: 924,
            seed: 7,
            resolution: 40,
            oversample: 2.0,
        }
    }
}

/// Generated records plus bookkeeping of the filter.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetSummary {
    pub seed: u64,
    pub resolution: usize,
    pub candidates: usize,
    pub valid: usize,
    pub records: usize,
    pub failed: usize,
}

/// Samples candidates, filters them by validity, and homogenizes survivors in id
/// order until `n_target` records are collected.
pub fn generate_dataset(
    config: &DatasetConfig,
    homogenizer: &Homogenizer,
) -> Result<(Vec<DatasetRecord>, DatasetSummary)> {
    if config.n_target == 0 {
        return Err(DatasetError::Empty("n_target must be at least 1".into()).into());
    }
    let candidates = ((config.n_target as f64 * config.oversample).ceil() as usize).max(1);
    let alphas = sample_alphas(candidates, config.seed);
    let ts = latin_hypercube_t(candidates, T_MIN, T_MAX, config.seed);

    let screened: Vec<(usize, ShapeParams, f64)> = (0..candidates)
        .into_par_iter()
        .filter_map(|id| {
            let params = ShapeParams::new(alphas[id], ts[id]).ok()?;
            let grid = voxelize(&params, config.resolution).ok()?;
            let validity = validity_check(&grid, &homogenizer.criteria);
            if validity.is_valid() {
                Some((id, params, grid.volume_fraction()))
            } else {
                log::debug!("candidate {id} rejected: {}", validity.reason());
                None
            }
        })
        .collect();
    let valid = screened.len();
    if (valid as f64) < 0.1 * candidates as f64 {
        return Err(DatasetError::LowYield { valid, candidates }.into());
    }

    let mut records = Vec::with_capacity(config.n_target);
    let mut failed = 0;
    let mut next = 0;
    while records.len() < config.n_target && next < screened.len() {
        let take = (config.n_target - records.len()).min(screened.len() - next);
        let batch = &screened[next..next + take];
        next += take;
        let results: Vec<_> = batch
            .par_iter()
            .map(|&(id, params, vf)| {
                homogenizer
                    .homogenize(&params, config.resolution)
                    .map(|p| DatasetRecord {
                        id,
                        params,
                        e_h: p.e_h,
                        nu_h: p.nu_h,
                        vf,
                    })
            })
            .collect();
        for (r, &(id, ..)) in results.into_iter().zip(batch) {
            match r.and_then(|rec| rec.check().map(|_| rec).map_err(Error::from))
            {
                Ok(rec) => records.push(rec),
                Err(e) => {
                    failed += 1;
                    log::warn!("candidate {id} skipped: {e}");
                }
            }
        }
    }
    if records.len() < config.n_target {
        log::warn!(
            "dataset shortfall: {} of {} requested records ({valid} valid of {candidates} candidates)",
            records.len(),
            config.n_target
        );
    }
    let summary = DatasetSummary {
        seed: config.seed,
        resolution: config.resolution,
        candidates,
        valid,
        records: records.len(),
        failed,
    };
    Ok((records, summary))
}

/// Seeded shuffle into `round(ratio·n)` training records (at least one) and the rest.
pub fn split(
    records: &[DatasetRecord],
    ratio: f64,
    seed: u64,
) -> Result<(Vec<DatasetRecord>, Vec<DatasetRecord>), DatasetError> {
    if records.is_empty() {
        return Err(DatasetError::Empty("cannot split an empty dataset".into()));
    }
    let n = records.len();
    let n_train = ((ratio * n as f64).round() as usize).clamp(1, n);
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut stream(seed, 3));
    let train = order[..n_train].iter().map(|&i| records[i]).collect();
    let test = order[n_train..].iter().map(|&i| records[i]).collect();
    Ok((train, test))
}

pub fn write_dataset(path: &Path, records: &[DatasetRecord]) -> Result<()> {
    let rows: Vec<_> = records.iter().map(|r| r.to_row()).collect();
    write_csv_rows(path, &DATASET_HEADER, &rows)
}

pub fn read_dataset(path: &Path) -> Result<Vec<DatasetRecord>> {
    let (header, rows) = read_csv(path)?;
    if header != DATASET_HEADER {
        return Err(DatasetError::Malformed(format!("unexpected header {header:?}")).into());
    }
    let mut out = Vec::with_capacity(rows.len());
    for (line, row) in rows.iter().enumerate() {
        let bad = |what: &str| DatasetError::Malformed(format!("row {}: {what}", line + 1));
        let id = row[0].parse::<usize>().map_err(|_| bad("id"))?;
        let nums = row[1..]
            .iter()
            .map(|s| s.parse::<f64>())
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|_| bad("number"))?;
        let params = ShapeParams::from_array(nums[..6].try_into().unwrap())
            .map_err(|e| bad(&e.to_string()))?;
        let rec = DatasetRecord {
            id,
            params,
            e_h: nums[6],
            nu_h: nums[7],
            vf: nums[8],
        };
        rec.check()?;
        out.push(rec);
    }
    Ok(out)
}

/// Convex polygon in the `(E, ν)` plane as half-planes `a·E + b·ν + c ≤ 0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct PropertyHull {
    rows: Vec<[f64; 3]>,
}

impl PropertyHull {
    /// Builds the hull from half-plane rows listed in counterclockwise edge order.
    pub fn from_rows(rows: Vec<[f64; 3]>) -> Result<Self, DatasetError> {
        if rows.len() < 3 {
            return Err(DatasetError::Degenerate(format!(
                "{} hull rows",
                rows.len()
            )));
        }
        let hull = Self { rows };
        for v in hull.vertices() {
            if !(v[0].is_finite() && v[1].is_finite()) {
                return Err(DatasetError::Degenerate(
                    "parallel consecutive hull rows".into(),
                ));
            }
        }
        Ok(hull)
    }

    pub fn rows(&self) -> &[[f64; 3]] {
        &self.rows
    }

    /// `max_k (a_k E + b_k ν + c_k)`: nonpositive inside.
    pub fn phi(&self, e: f64, nu: f64) -> f64 {
        self.rows
            .iter()
            .map(|r| r[0] * e + r[1] * nu + r[2])
            .fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn contains(&self, e: f64, nu: f64, tol: f64) -> bool {
        self.phi(e, nu) <= tol
    }

    /// Polygon corners, counterclockwise; corner `k` joins rows `k - 1` and `k`.
    pub fn vertices(&self) -> Vec<[f64; 2]> {
        let m = self.rows.len();
        (0..m)
            .map(|k| {
                let p = self.rows[(k + m - 1) % m];
                let q = self.rows[k];
                let det = p[0] * q[1] - p[1] * q[0];
                [
                    (-p[2] * q[1] + q[2] * p[1]) / det,
                    (-p[0] * q[2] + q[0] * p[2]) / det,
                ]
            })
            .collect()
    }
}

/// 2-D convex hull (monotone chain) as inward-feasible half-planes.
pub fn convex_hull(points: &[[f64; 2]]) -> Result<PropertyHull, DatasetError> {
    let mut pts: Vec<[f64; 2]> = points.to_vec();
    if pts.iter().any(|p| !(p[0].is_finite() && p[1].is_finite())) {
        return Err(DatasetError::Degenerate("non-finite point".into()));
    }
    pts.sort_by(|a, b| a.partial_cmp(b).unwrap());
    pts.dedup();
    if pts.len() < 3 {
        return Err(DatasetError::Degenerate(format!(
            "{} distinct points",
            pts.len()
        )));
    }
    let cross = |o: [f64; 2], a: [f64; 2], b: [f64; 2]| {
        (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])
    };
    let mut lower: Vec<[f64; 2]> = Vec::new();
    for &p in &pts {
        while lower.len() >= 2 && cross(lower[lower.len() - 2], lower[lower.len() - 1], p) <= 0.0 {
            lower.pop();
        }
        lower.push(p);
    }
    let mut upper: Vec<[f64; 2]> = Vec::new();
    for &p in pts.iter().rev() {
        while upper.len() >= 2 && cross(upper[upper.len() - 2], upper[upper.len() - 1], p) <= 0.0 {
            upper.pop();
        }
        upper.push(p);
    }
    lower.pop();
    upper.pop();
    lower.extend(upper);
    let ring = lower;
    if ring.len() < 3 {
        return Err(DatasetError::Degenerate("points are collinear".into()));
    }
    let rows = (0..ring.len())
        .map(|k| {
            let p = ring[k];
            let q = ring[(k + 1) % ring.len()];
            // Outward normal of a counterclockwise edge p→q.
            let (nx, ny) = (q[1] - p[1], p[0] - q[0]);
            let len = nx.hypot(ny);
            let (a, b) = (nx / len, ny / len);
            [a, b, -(a * p[0] + b * p[1])]
        })
        .collect();
    PropertyHull::from_rows(rows)
}

/// Min-max map of `(ln E, ν)` onto `[-1, 1]²`.
///
/// Working in `ln E` makes an L1 error on the first component a relative error
/// in `E`, which is how generated cells are judged.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PropertyScaling {
    pub e_min: f64,
    pub e_max: f64,
    pub nu_min: f64,
    pub nu_max: f64,
}

impl PropertyScaling {
    pub fn fit(records: &[DatasetRecord]) -> Result<Self, DatasetError> {
        if records.is_empty() {
            return Err(DatasetError::Empty("no records to fit scaling".into()));
        }
        let mut s = Self {
            e_min: f64::INFINITY,
            e_max: f64::NEG_INFINITY,
            nu_min: f64::INFINITY,
            nu_max: f64::NEG_INFINITY,
        };
        for r in records {
            s.e_min = s.e_min.min(r.e_h);
            s.e_max = s.e_max.max(r.e_h);
            s.nu_min = s.nu_min.min(r.nu_h);
            s.nu_max = s.nu_max.max(r.nu_h);
        }
        if s.e_min <= 0.0 {
            return Err(DatasetError::Degenerate("non-positive modulus".into()));
        }
        if s.e_max <= s.e_min || s.nu_max <= s.nu_min {
            return Err(DatasetError::Degenerate(
                "properties have zero spread".into(),
            ));
        }
        Ok(s)
    }

    pub fn normalize(&self, y: [f64; 2]) -> [f64; 2] {
        let (lo, hi) = (self.e_min.ln(), self.e_max.ln());
        [
            2.0 * (y[0].ln() - lo) / (hi - lo) - 1.0,
            2.0 * (y[1] - self.nu_min) / (self.nu_max - self.nu_min) - 1.0,
        ]
    }

    pub fn denormalize(&self, z: [f64; 2]) -> [f64; 2] {
        let (lo, hi) = (self.e_min.ln(), self.e_max.ln());
        [
            (lo + (z[0] + 1.0) * 0.5 * (hi - lo)).exp(),
            self.nu_min + (z[1] + 1.0) * 0.5 * (self.nu_max - self.nu_min),
        ]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn alphas_lie_on_simplex_and_repeat() {
        let a = sample_alphas(1000, 3);
        assert_eq!(a, sample_alphas(1000, 3));
        for t in &a {
            assert!(t.iter().all(|&v| v >= 0.0));
            assert!((t.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn alpha_mean_is_one_third() {
        let a = sample_alphas(100_000, 11);
        for d in 0..3 {
            let m = a.iter().map(|t| t[d]).sum::<f64>() / a.len() as f64;
            assert!((m - 1.0 / 3.0).abs() < 0.01, "{m}");
        }
    }

    #[test]
    fn lhs_strata_are_each_hit_once() {
        for n in [1, 10, 1000] {
            let t = latin_hypercube_t(n, -0.4, 0.4, 5);
            for d in 0..3 {
                let mut hits = vec![0; n];
                for row in &t {
                    assert!((-0.4..=0.4).contains(&row[d]));
                    let s = (((row[d] + 0.4) / 0.8) * n as f64).floor() as usize;
                    hits[s.min(n - 1)] += 1;
                }
                assert!(hits.iter().all(|&h| h == 1), "n = {n}");
            }
        }
    }

    #[test]
    fn lhs_histogram_is_flat() {
        let t = latin_hypercube_t(1000, -0.4, 0.4, 9);
        for d in 0..3 {
            let mut bins = [0; 10];
            for row in &t {
                bins[(((row[d] + 0.4) / 0.08).floor() as usize).min(9)] += 1;
            }
            assert_eq!(bins, [100; 10]);
        }
    }

    fn rec(id: usize) -> DatasetRecord {
        DatasetRecord {
            id,
            params: ShapeParams::new([1.0, 0.0, 0.0], [0.0; 3]).unwrap(),
            e_h: 50.0 + id as f64,
            nu_h: 0.25,
            vf: 0.5,
        }
    }

    #[test]
    fn split_sizes_and_partition() {
        let recs: Vec<_> = (0..924).map(rec).collect();
        let (tr, te) = split(&recs, 0.8, 1).unwrap();
        assert_eq!((tr.len(), te.len()), (739, 185));
        let (tr, te) = split(&recs[..10], 0.8, 1).unwrap();
        assert_eq!((tr.len(), te.len()), (8, 2));
        let mut ids: Vec<_> = tr.iter().chain(&te).map(|r| r.id).collect();
        ids.sort();
        assert_eq!(ids, (0..10).collect::<Vec<_>>());
        assert!(split(&[], 0.8, 1).is_err());
    }

    #[test]
    fn unit_square_hull() {
        let h = convex_hull(&[[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0], [0.5, 0.5]]).unwrap();
        assert_eq!(h.rows().len(), 4);
        assert!(h.contains(0.5, 0.5, 0.0));
        assert!(!h.contains(2.0, 2.0, 0.0));
        let mut v = h.vertices();
        v.sort_by(|a, b| a.partial_cmp(b).unwrap());
        for (got, want) in v
            .iter()
            .zip([[0.0, 0.0], [0.0, 1.0], [1.0, 0.0], [1.0, 1.0]])
        {
            assert!((got[0] - want[0]).abs() < 1e-12 && (got[1] - want[1]).abs() < 1e-12);
        }
    }

    #[test]
    fn collinear_points_are_degenerate() {
        assert!(convex_hull(&[[0.0, 0.0], [1.0, 1.0], [2.0, 2.0]]).is_err());
        assert!(convex_hull(&[[0.0, 0.0], [1.0, 1.0]]).is_err());
    }

    #[test]
    fn scaling_round_trip() {
        let recs: Vec<_> = (0..5).map(rec).collect();
        let mut recs = recs;
        recs[2].nu_h = 0.3;
        let s = PropertyScaling::fit(&recs).unwrap();
        assert_eq!(s.normalize([50.0, 0.25]), [-1.0, -1.0]);
        assert_eq!(s.normalize([54.0, 0.3]), [1.0, 1.0]);
        assert!(s.normalize([(50.0f64 * 54.0).sqrt(), 0.275])[0].abs() < 1e-12);
        let y = [52.5, 0.27];
        let back = s.denormalize(s.normalize(y));
        assert!((back[0] - y[0]).abs() < 1e-12 && (back[1] - y[1]).abs() < 1e-12);
    }

    #[test]
    fn dataset_csv_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("d.csv");
        let mut recs: Vec<_> = (0..3).map(rec).collect();
        recs[1].params = ShapeParams::new([0.2, 0.3, 0.5], [0.1, -0.3, 0.123456789]).unwrap();
        recs[1].e_h = 1.0 / 3.0;
        write_dataset(&p, &recs).unwrap();
        assert_eq!(read_dataset(&p).unwrap(), recs);
        let text = std::fs::read_to_string(&p).unwrap();
        assert!(text.starts_with("id,alpha1,alpha2,alpha3,t1,t2,t3,E_H,nu_H,vf\n"));
    }
}
