use gradcell::dataset::PropertyScaling;
use gradcell::generative::{
    discriminator_loss, generator_heads, generator_loss, regressor_loss, GenerativeModel,
    TrainingConfig, COND_DIM, SHAPE_DIM,
};
use gradcell::geometry::{T_MAX, T_MIN};
use gradcell::nn::Mlp;
use gradcell::rng::stream;
use nalgebra::DMatrix;
use proptest::prelude::*;
use rand::Rng;
use rand_distr::StandardNormal;

fn normal(rows: usize, cols: usize, rng: &mut impl Rng) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |_, _| rng.sample(StandardNormal))
}

/// Central differences on `coords` random parameters; returns the worst relative error.
fn fd_worst(
    net: &Mlp,
    analytic: &[f64],
    loss: impl Fn(&Mlp) -> f64,
    coords: usize,
    seed: u64,
) -> f64 {
    let mut rng = stream(seed, 0);
    let base = net.params_flat();
    let gmax = analytic.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    assert!(gmax > 0.0);
    let mut worst = 0.0f64;
    for _ in 0..coords {
        let k = rng.random_range(0..base.len());
        let h = 1e-5 * base[k].abs().max(1.0);
        let eval = |delta: f64| {
            let mut p = base.clone();
            p[k] += delta;
            let mut n = net.clone();
            n.set_params_flat(&p);
            loss(&n)
        };
        let fd = (eval(h) - eval(-h)) / (2.0 * h);
        let err = (fd - analytic[k]).abs() / fd.abs().max(analytic[k].abs()).max(1e-6 * gmax);
        assert!(err.is_finite());
        worst = worst.max(err);
    }
    worst
}

fn nets() -> (Mlp, Mlp, Mlp) {
    let h = 16;
    (
        Mlp::new(&[3 + COND_DIM, h, h, SHAPE_DIM], &mut stream(5, 1)),
        Mlp::new(&[SHAPE_DIM + COND_DIM, h, h, 1], &mut stream(5, 2)),
        Mlp::new(&[SHAPE_DIM, h, h, COND_DIM], &mut stream(5, 3)),
    )
}

fn batch(b: usize) -> (DMatrix<f64>, DMatrix<f64>, DMatrix<f64>) {
    let mut rng = stream(5, 4);
    let real = generator_heads(&normal(SHAPE_DIM, b, &mut rng));
    let y = DMatrix::from_fn(COND_DIM, b, |_, _| rng.random_range(-1.0..1.0));
    let z = normal(3, b, &mut rng);
    (real, y, z)
}

#[test]
fn discriminator_gradient_matches_finite_differences() {
    let (g, d, _) = nets();
    let (real, y, z) = batch(8);
    let fake = generator_heads(
        &g.predict(&DMatrix::from_fn(5, 8, |r, c| {
            if r < 3 {
                z[(r, c)]
            } else {
                y[(r - 3, c)]
            }
        }))
        .unwrap(),
    );
    let (_, grads) = discriminator_loss(&d, &real, &fake, &y).unwrap();
    let worst = fd_worst(
        &d,
        &grads.flat(),
        |n| discriminator_loss(n, &real, &fake, &y).unwrap().0,
        100,
        1,
    );
    assert!(worst <= 1e-5, "{worst:e}");
}

#[test]
fn regressor_gradient_matches_finite_differences() {
    let (_, _, r) = nets();
    let (real, y, _) = batch(8);
    let (_, grads) = regressor_loss(&r, &real, &y).unwrap();
    let worst = fd_worst(
        &r,
        &grads.flat(),
        |n| regressor_loss(n, &real, &y).unwrap().0,
        100,
        2,
    );
    assert!(worst <= 1e-5, "{worst:e}");
}

#[test]
fn generator_gradient_matches_finite_differences() {
    let (g, d, r) = nets();
    let (_, y, z) = batch(8);
    for (reg, gamma) in [(Some(&r), 20.0), (None, 0.0)] {
        let (_, grads) = generator_loss(&g, &d, reg, &z, &y, gamma).unwrap();
        let worst = fd_worst(
            &g,
            &grads.flat(),
            |n| generator_loss(n, &d, reg, &z, &y, gamma).unwrap().0.total,
            100,
            3,
        );
        assert!(worst <= 1e-5, "gamma {gamma}: {worst:e}");
    }
}

fn check_shape(p: &gradcell::geometry::ShapeParams) -> bool {
    let a = p.alpha;
    let sum_ok = (a.iter().sum::<f64>() - 1.0).abs() <= 1e-12;
    sum_ok && a.iter().all(|&v| v >= 0.0) && p.t.iter().all(|&t| (T_MIN..=T_MAX).contains(&t))
}

#[test]
fn generated_shapes_always_satisfy_constraints() {
    let scaling = PropertyScaling {
        e_min: 5.0,
        e_max: 130.0,
        nu_min: 0.1,
        nu_max: 0.35,
    };
    let config = TrainingConfig {
        hidden: 32,
        ..Default::default()
    };
    let model = GenerativeModel::init(&config, scaling);
    let mut rng = stream(9, 0);
    let mut violations = 0;
    for i in 0..10_000 {
        let spread = if i % 10 == 0 { 50.0 } else { 1.0 };
        let e = (rng.random_range(0.0f64..6.0)).exp();
        let nu = rng.random_range(-0.5..0.6);
        let z: Vec<f64> = (0..config.noise_dim)
            .map(|_| spread * rng.sample::<f64, _>(StandardNormal))
            .collect();
        match model.generate([e, nu], &z) {
            Ok(p) if check_shape(&p) => {}
            _ => violations += 1,
        }
    }
    assert_eq!(violations, 0);
}

#[test]
fn training_is_reproducible_for_a_seed() {
    let recs: Vec<_> = (0..12)
        .map(|i| {
            let a = 0.1 + 0.05 * i as f64;
            gradcell::dataset::DatasetRecord {
                id: i,
                params: gradcell::geometry::ShapeParams::new([a, 0.9 - a, 0.1], [0.0, 0.1, -0.1])
                    .unwrap(),
                e_h: 20.0 + 5.0 * i as f64,
                nu_h: 0.2 + 0.005 * i as f64,
                vf: 0.5,
            }
        })
        .collect();
    let config = TrainingConfig {
        iterations: 20,
        hidden: 16,
        ..Default::default()
    };
    let (a, la) = GenerativeModel::train(&recs, &config).unwrap();
    let (b, lb) = GenerativeModel::train(&recs, &config).unwrap();
    assert_eq!(a, b);
    assert_eq!(la, lb);
    let (c, _) = GenerativeModel::train(&recs, &TrainingConfig { seed: 8, ..config }).unwrap();
    assert_ne!(a.generator, c.generator);
}

proptest! {
    #[test]
    fn heads_map_any_input_into_the_design_box(raw in proptest::collection::vec(-1e3f64..1e3, SHAPE_DIM * 4)) {
        let out = generator_heads(&DMatrix::from_vec(SHAPE_DIM, 4, raw));
        for c in 0..4 {
            let s: f64 = (0..3).map(|i| out[(i, c)]).sum();
            prop_assert!((s - 1.0).abs() <= 1e-12);
            for i in 0..3 {
                prop_assert!(out[(i, c)] >= 0.0);
            }
            for i in 3..SHAPE_DIM {
                prop_assert!(out[(i, c)].abs() <= 1.0);
            }
        }
    }
}
