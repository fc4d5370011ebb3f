//! Linear cone filter over the element grid.

/// Normalized cone weights `max(0, r - dist)` between element centers.
///
/// Elements are indexed row-major, `e = ey·nx + ex`.
#[derive(Debug, Clone)]
pub struct ConeFilter {
    rows: Vec<Vec<(usize, f64)>>,
}

impl ConeFilter {
    pub fn new(nx: usize, ny: usize, radius: f64) -> Self {
        let n = nx * ny;
        if radius <= 1.0 {
            return Self {
                rows: (0..n).map(|e| vec![(e, 1.0)]).collect(),
            };
        }
        let reach = radius.ceil() as isize;
        let mut rows = Vec::with_capacity(n);
        for ey in 0..ny as isize {
            for ex in 0..nx as isize {
                let mut row = Vec::new();
                for dy in -reach..=reach {
                    for dx in -reach..=reach {
                        let (x, y) = (ex + dx, ey + dy);
                        if x < 0 || y < 0 || x >= nx as isize || y >= ny as isize {
                            continue;
                        }
                        let w = radius - ((dx * dx + dy * dy) as f64).sqrt();
                        if w > 0.0 {
                            row.push((y as usize * nx + x as usize, w));
                        }
                    }
                }
                let total: f64 = row.iter().map(|(_, w)| w).sum();
                row.iter_mut().for_each(|(_, w)| *w /= total);
                rows.push(row);
            }
        }
        Self { rows }
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        self.rows
            .iter()
            .map(|row| row.iter().map(|&(j, w)| w * x[j]).sum())
            .collect()
    }

    /// `Fᵀ g`, the chain rule through [`apply`](Self::apply).
    pub fn apply_transpose(&self, g: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.rows.len()];
        for (i, row) in self.rows.iter().enumerate() {
            for &(j, w) in row {
                out[j] += w * g[i];
            }
        }
        out
    }

    /// Column sums `Fᵀ 1`: the weight each design value carries in a filtered total.
    pub fn column_sums(&self) -> Vec<f64> {
        self.apply_transpose(&vec![1.0; self.rows.len()])
    }
}

/// Cone-filtered copy of a row-major `nx × ny` map.
pub fn filter_field(values: &[f64], nx: usize, ny: usize, radius: f64) -> Vec<f64> {
    ConeFilter::new(nx, ny, radius).apply(values)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn radius_zero_is_identity() {
        let v: Vec<f64> = (0..12).map(|i| i as f64 * 0.7).collect();
        assert_eq!(filter_field(&v, 4, 3, 0.0), v);
    }

    #[test]
    fn constant_field_is_unchanged() {
        let v = vec![3.5; 20];
        for x in filter_field(&v, 5, 4, 2.3) {
            assert!((x - 3.5).abs() < 1e-14);
        }
    }

    #[test]
    fn spike_spreads_with_cone_weights() {
        let mut v = vec![0.0; 9];
        v[4] = 1.0;
        let out = filter_field(&v, 3, 3, 1.5);
        let diag = 1.5 - 2f64.sqrt();
        let center_total = 1.5 + 4.0 * 0.5 + 4.0 * diag;
        assert!((out[4] - 1.5 / center_total).abs() < 1e-15);
        let corner_total = 1.5 + 2.0 * 0.5 + diag;
        assert!((out[0] - diag / corner_total).abs() < 1e-15);
        let edge_total = 1.5 + 3.0 * 0.5 + 2.0 * diag;
        assert!((out[1] - 0.5 / edge_total).abs() < 1e-15);
    }

    #[test]
    fn transpose_is_adjoint() {
        let f = ConeFilter::new(6, 4, 2.2);
        let x: Vec<f64> = (0..24).map(|i| ((i * 7) % 5) as f64 - 2.0).collect();
        let g: Vec<f64> = (0..24).map(|i| ((i * 3) % 7) as f64 * 0.3).collect();
        let lhs: f64 = f.apply(&x).iter().zip(&g).map(|(a, b)| a * b).sum();
        let rhs: f64 = x
            .iter()
            .zip(f.apply_transpose(&g))
            .map(|(a, b)| a * b)
            .sum();
        assert!((lhs - rhs).abs() < 1e-12);
    }
}
