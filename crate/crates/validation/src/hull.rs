//! Convex hull by exhaustive edge testing.

/// Hull vertices of `pts`, sorted lexicographically. A directed pair `(a, b)` is a
/// hull edge when no point lies strictly to its right or beyond its ends on the line.
pub fn brute_hull_vertices(pts: &[[f64; 2]]) -> Vec<[f64; 2]> {
    let mut out: Vec<[f64; 2]> = Vec::new();
    for (i, &a) in pts.iter().enumerate() {
        for (j, &b) in pts.iter().enumerate() {
            if i == j || a == b {
                continue;
            }
            let edge = pts.iter().all(|&p| {
                let c = (b[0] - a[0]) * (p[1] - a[1]) - (b[1] - a[1]) * (p[0] - a[0]);
                c > 1e-12
                    || (c.abs() <= 1e-12
                        && (p[0] - a[0]) * (p[0] - b[0]) + (p[1] - a[1]) * (p[1] - b[1]) <= 1e-12)
            });
            if edge {
                for v in [a, b] {
                    if !out.contains(&v) {
                        out.push(v);
                    }
                }
            }
        }
    }
    out.sort_by(|a, b| a.partial_cmp(b).unwrap());
    out
}

/// Point-in-polygon by angular order around the centroid and edge side tests.
pub fn inside(vertices: &[[f64; 2]], p: [f64; 2]) -> bool {
    let n = vertices.len() as f64;
    let c = vertices
        .iter()
        .fold([0.0, 0.0], |acc, v| [acc[0] + v[0] / n, acc[1] + v[1] / n]);
    let mut ring = vertices.to_vec();
    ring.sort_by(|a, b| {
        let ta = (a[1] - c[1]).atan2(a[0] - c[0]);
        let tb = (b[1] - c[1]).atan2(b[0] - c[0]);
        ta.partial_cmp(&tb).unwrap()
    });
    (0..ring.len()).all(|k| {
        let (a, b) = (ring[k], ring[(k + 1) % ring.len()]);
        (b[0] - a[0]) * (p[1] - a[1]) - (b[1] - a[1]) * (p[0] - a[0]) >= 0.0
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn square_with_interior_and_edge_points() {
        let pts = [
            [0.0, 0.0],
            [1.0, 0.0],
            [1.0, 1.0],
            [0.0, 1.0],
            [0.5, 0.5],
            [0.5, 0.0],
        ];
        assert_eq!(
            brute_hull_vertices(&pts),
            vec![[0.0, 0.0], [0.0, 1.0], [1.0, 0.0], [1.0, 1.0]]
        );
        let v = brute_hull_vertices(&pts);
        assert!(inside(&v, [0.3, 0.9]));
        assert!(!inside(&v, [1.1, 0.5]));
    }
}
