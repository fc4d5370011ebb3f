use gradcell::assembly::{
    assign_cells, connectivity_report, export_structure, read_assignments, synthesize,
    write_assignments, AssignmentConfig, CellAssignment, ExportFormat,
};
use gradcell::dataset::PropertyScaling;
use gradcell::generative::{GenerativeModel, TrainingConfig};
use gradcell::geometry::{read_stl, validity_check, voxelize, ShapeParams, ValidityCriteria};
use gradcell::rng::stream;
use gradcell::topopt::DesignField;
use proptest::prelude::*;
use rand::Rng;

fn model() -> GenerativeModel {
    let scaling = PropertyScaling {
        e_min: 10.0,
        e_max: 120.0,
        nu_min: 0.15,
        nu_max: 0.33,
    };
    GenerativeModel::init(
        &TrainingConfig {
            hidden: 16,
            ..Default::default()
        },
        scaling,
    )
}

fn field(nx: usize, ny: usize) -> DesignField {
    let mut rng = stream(4, 0);
    DesignField {
        nx,
        ny,
        e: (0..nx * ny).map(|_| rng.random_range(30.0..90.0)).collect(),
        nu: (0..nx * ny).map(|_| rng.random_range(0.24..0.3)).collect(),
    }
}

fn config() -> AssignmentConfig {
    AssignmentConfig {
        candidates: 10,
        seed: 3,
        resolution: 12,
        criteria: ValidityCriteria::default(),
    }
}

/// Regenerates every candidate of one element from its noise stream.
fn candidate_vfs(
    model: &GenerativeModel,
    element: usize,
    y: [f64; 2],
    c: &AssignmentConfig,
) -> Vec<Option<f64>> {
    let mut rng = stream(c.seed, 3_000_000 + element as u64);
    (0..c.candidates)
        .map(|_| {
            let z: Vec<f64> = (0..model.config.noise_dim)
                .map(|_| rng.sample(rand_distr::StandardNormal))
                .collect();
            let g = voxelize(&model.generate(y, &z).unwrap(), c.resolution).unwrap();
            validity_check(&g, &c.criteria)
                .is_valid()
                .then(|| g.volume_fraction())
        })
        .collect()
}

#[test]
fn assignment_keeps_the_lightest_valid_candidate() {
    let (m, f, c) = (model(), field(4, 2), config());
    let out = assign_cells(&f, &m, None, &c).unwrap();
    assert_eq!(out.len(), 8);
    for a in &out {
        let vfs = candidate_vfs(&m, a.element, [f.e[a.element], f.nu[a.element]], &c);
        let valid: Vec<f64> = vfs.iter().flatten().copied().collect();
        assert_eq!(a.valid_candidates, valid.len());
        assert_eq!(a.vf, valid.iter().copied().fold(f64::INFINITY, f64::min));
        assert_eq!((a.e, a.nu), (f.e[a.element], f.nu[a.element]));
    }
    assert_eq!(assign_cells(&f, &m, None, &c).unwrap(), out);
    let other = assign_cells(&f, &m, None, &AssignmentConfig { seed: 4, ..c }).unwrap();
    assert_ne!(other, out);

    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("a.csv");
    write_assignments(&p, &out).unwrap();
    assert_eq!(read_assignments(&p).unwrap(), out);
}

#[test]
fn incomplete_grids_are_rejected() {
    let p = ShapeParams::pure(gradcell::geometry::TpmsKind::P, 0.0).unwrap();
    let cell = |element| CellAssignment {
        element,
        params: p,
        vf: 0.5,
        e: 50.0,
        nu: 0.3,
        valid_candidates: 1,
    };
    assert!(synthesize(&[cell(0), cell(1), cell(2)], 2, 2).is_err());
    assert!(synthesize(&[cell(0), cell(1), cell(1), cell(3)], 2, 2).is_err());
    assert!(synthesize(&[cell(3), cell(1), cell(2), cell(0)], 2, 2).is_ok());
}

fn shape() -> impl Strategy<Value = ShapeParams> {
    (
        proptest::array::uniform3(0.05f64..1.0),
        proptest::array::uniform3(-0.2f64..0.2),
    )
        .prop_map(|(w, t)| {
            let s: f64 = w.iter().sum();
            ShapeParams::new([w[0] / s, w[1] / s, 1.0 - w[0] / s - w[1] / s], t).unwrap()
        })
}

fn assignments(cells: &[ShapeParams]) -> Vec<CellAssignment> {
    cells
        .iter()
        .enumerate()
        .map(|(element, &params)| CellAssignment {
            element,
            params,
            vf: voxelize(&params, 16).unwrap().volume_fraction(),
            e: 50.0,
            nu: 0.28,
            valid_candidates: 1,
        })
        .collect()
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 8, ..ProptestConfig::default() })]

    #[test]
    fn blended_interfaces_overlap_completely(cells in proptest::collection::vec(shape(), 6)) {
        let s = synthesize(&assignments(&cells), 3, 2).unwrap();
        let report = connectivity_report(&s, 16);
        prop_assert_eq!(report.rows.len(), 7);
        for r in &report.rows {
            if let Some(v) = r.blended {
                prop_assert_eq!(v, 100.0);
            }
            if let Some(v) = r.unblended {
                prop_assert!((0.0..=100.0).contains(&v));
            }
        }
    }

    #[test]
    fn stl_volume_matches_sampled_density(cells in proptest::collection::vec(shape(), 2)) {
        let s = synthesize(&assignments(&cells), 2, 1).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("s.stl");
        let summary = export_structure(&s, ExportFormat::Stl, 12, &path).unwrap();
        let mesh = read_stl(&std::fs::read(&path).unwrap()).unwrap();
        prop_assert_eq!(mesh.triangle_count(), summary.triangles);
        let v = summary.mesh_volume.unwrap();
        prop_assert!((v - summary.voxel_volume).abs() <= 0.05 * summary.voxel_volume);
        prop_assert!((mesh.signed_volume() - v).abs() <= 1e-3 * v);
    }
}

#[test]
fn uniform_structure_density_equals_cell_fraction() {
    let p = ShapeParams::new([0.4, 0.3, 0.3], [0.05, -0.1, 0.0]).unwrap();
    let s = synthesize(&assignments(&[p; 6]), 3, 2).unwrap();
    let blended = s.sample(16, true).solid_fraction();
    let cell = voxelize(&p, 16).unwrap().volume_fraction();
    assert!((blended - cell).abs() < 1e-12);
    assert!((s.density() - cell).abs() < 1e-12);
}
