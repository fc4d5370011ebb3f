use gradcell::dataset::{
    convex_hull, generate_dataset, latin_hypercube_t, read_dataset, sample_alphas, split,
    write_dataset, DatasetConfig, PropertyScaling,
};
use gradcell::geometry::{validity_check, voxelize, ValidityCriteria};
use gradcell::homogenization::Homogenizer;
use proptest::prelude::*;

/// Brute-force hull: a pair of points is an edge when every other point lies on
/// its left or on it; returns the edge endpoints' set.
fn brute_hull_vertices(pts: &[[f64; 2]]) -> Vec<[f64; 2]> {
    let mut out: Vec<[f64; 2]> = Vec::new();
    for (i, &a) in pts.iter().enumerate() {
        for (j, &b) in pts.iter().enumerate() {
            if i == j || a == b {
                continue;
            }
            let left = pts.iter().all(|&p| {
                let c = (b[0] - a[0]) * (p[1] - a[1]) - (b[1] - a[1]) * (p[0] - a[0]);
                
                c > 1e-12
                    || (c.abs() <= 1e-12
                        && (p[0] - a[0]) * (p[0] - b[0]) + (p[1] - a[1]) * (p[1] - b[1]) <= 1e-12)
            });
            if left {
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

fn same_vertices(mut hull: Vec<[f64; 2]>, oracle: &[[f64; 2]]) -> bool {
    hull.sort_by(|a, b| a.partial_cmp(b).unwrap());
    hull.len() == oracle.len()
        && hull.iter().zip(oracle).all(|(h, o)| {
            (h[0] - o[0]).abs() <= 1e-9 * o[0].abs().max(1.0) && (h[1] - o[1]).abs() <= 1e-9
        })
}

#[test]
fn small_dataset_records_satisfy_invariants() {
    let config = DatasetConfig {
        n_target: 12,
        seed: 7,
        resolution: 10,
        oversample: 2.0,
    };
    let h = Homogenizer::default();
    let (recs, summary) = generate_dataset(&config, &h).unwrap();
    assert_eq!(recs.len(), 12);
    assert_eq!(summary.records, 12);
    assert!(summary.valid <= summary.candidates);
    assert!(recs.windows(2).all(|w| w[0].id < w[1].id));
    for r in &recs {
        r.check().unwrap();
        let grid = voxelize(&r.params, 10).unwrap();
        assert!(validity_check(&grid, &ValidityCriteria::default()).is_valid());
        assert_eq!(grid.volume_fraction(), r.vf);
        assert!(r.e_h > 0.0 && r.e_h < 200.0 * r.vf + 1e-9);
        assert!(r.nu_h > -1.0 && r.nu_h < 0.5);
    }
    let (again, _) = generate_dataset(&config, &h).unwrap();
    assert_eq!(recs, again);

    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("d.csv");
    write_dataset(&path, &recs).unwrap();
    assert_eq!(read_dataset(&path).unwrap(), recs);
}

#[test]
fn hull_of_sampled_properties_matches_brute_force() {
    let recs: Vec<[f64; 2]> = sample_alphas(60, 3)
        .iter()
        .zip(latin_hypercube_t(60, -0.4, 0.4, 3))
        .map(|(a, t)| {
            [
                20.0 + 100.0 * a[0] + 10.0 * t[0],
                0.2 + 0.1 * a[1] + 0.05 * t[1],
            ]
        })
        .collect();
    let hull = convex_hull(&recs).unwrap();
    assert!(same_vertices(hull.vertices(), &brute_hull_vertices(&recs)));
    for p in &recs {
        assert!(hull.contains(p[0], p[1], 1e-9));
    }
}

#[test]
fn split_is_seeded_partition() {
    let config = DatasetConfig {
        n_target: 5,
        seed: 1,
        resolution: 8,
        oversample: 3.0,
    };
    let (recs, _) = generate_dataset(&config, &Homogenizer::default()).unwrap();
    let (a, b) = split(&recs, 0.8, 4).unwrap();
    assert_eq!((a.len(), b.len()), (4, 1));
    let mut ids: Vec<usize> = a.iter().chain(&b).map(|r| r.id).collect();
    ids.sort();
    assert_eq!(ids, recs.iter().map(|r| r.id).collect::<Vec<_>>());
    assert_eq!(split(&recs, 0.8, 4).unwrap(), (a, b));
}

fn points() -> impl Strategy<Value = Vec<[f64; 2]>> {
    proptest::collection::vec(
        (5.0f64..150.0, 0.05f64..0.45).prop_map(|(e, n)| [e, n]),
        3..40,
    )
}

proptest! {
    #[test]
    fn hull_matches_brute_force_oracle(pts in points()) {
        let oracle = brute_hull_vertices(&pts);
        match convex_hull(&pts) {
            Ok(h) => {
                prop_assert!(same_vertices(h.vertices(), &oracle));
                for p in &pts {
                    prop_assert!(h.contains(p[0], p[1], 1e-9));
                }
            }
            Err(_) => {
                let collinear = oracle.len() <= 2 || {
                    let (a, b) = (oracle[0], oracle[oracle.len() - 1]);
                    pts.iter().all(|p| ((b[0] - a[0]) * (p[1] - a[1]) - (b[1] - a[1]) * (p[0] - a[0])).abs() < 1e-9)
                };
                prop_assert!(collinear);
            }
        }
    }

    #[test]
    fn scaling_round_trips_inside_its_range(e in 10.0f64..120.0, nu in 0.15f64..0.33) {
        let s = PropertyScaling { e_min: 10.0, e_max: 120.0, nu_min: 0.15, nu_max: 0.33 };
        let z = s.normalize([e, nu]);
        prop_assert!(z.iter().all(|v| (-1.0 - 1e-12..=1.0 + 1e-12).contains(v)));
        let back = s.denormalize(z);
        prop_assert!((back[0] - e).abs() <= 1e-10 * e && (back[1] - nu).abs() <= 1e-12);
    }
}
