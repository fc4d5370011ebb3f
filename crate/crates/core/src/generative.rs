//! Conditional generator, discriminator, and property regressor for inverse design.
//!
//! Shapes enter the networks as features `[α₁, α₂, α₃, t₁/0.4, t₂/0.4, t₃/0.4]`.
//! The generator's raw output passes through a softmax on the first three rows
//! and `tanh` on the last three, so every generated shape satisfies the simplex
//! and offset bounds. Conditions `(ln E, ν)` are min-max scaled to `[-1, 1]`.

use std::path::Path;

use nalgebra::DMatrix;
use rand::Rng as _;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::{DatasetRecord, PropertyScaling};
use crate::error::{ModelError, Result};
use crate::geometry::{ShapeParams, T_MAX, T_MIN};
use crate::homogenization::Homogenizer;
use crate::io::{fmt_f64, read_json, write_csv_rows, write_json};
use crate::nn::{Adam, Mlp, MlpGrads, MlpRecord};
use crate::rng::{stream, Rng};

pub const SHAPE_DIM: usize = 6;
pub const COND_DIM: usize = 2;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainingConfig {
    pub iterations: usize,
    pub batch: usize,
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    /// Weight of the regressor terms in the generator loss.
    pub gamma: f64,
    pub noise_dim: usize,
    pub hidden: usize,
    pub seed: u64,
    /// Train and use the auxiliary regressor.
    pub use_regressor: bool,
}

impl Default for TrainingConfig {
    fn default() -> Self {
        Self {
            iterations: 5000,
            batch: 32,
            lr: 2e-4,
            beta1: 0.5,
            beta2: 0.999,
            gamma: 20.0,
            noise_dim: 3,
            hidden: 128,
            seed: 7,
            use_regressor: true,
        }
    }
}

impl TrainingConfig {
    pub fn validate(&self) -> Result<(), ModelError> {
        let ok = self.iterations > 0
            && self.batch > 0
            && self.lr > 0.0
            && self.noise_dim > 0
            && self.hidden > 0
            && self.gamma >= 0.0
            && (0.0..1.0).contains(&self.beta1)
            && (0.0..1.0).contains(&self.beta2);
        if ok {
            Ok(())
        } else {
            Err(ModelError::Invalid(format!(
                "invalid training config {self:?}"
            )))
        }
    }
}

/// Network features of a shape.
pub fn shape_features(p: &ShapeParams) -> [f64; SHAPE_DIM] {
    [
        p.alpha[0],
        p.alpha[1],
        p.alpha[2],
        p.t[0] / T_MAX,
        p.t[1] / T_MAX,
        p.t[2] / T_MAX,
    ]
}

/// Shape from features; offsets are clamped to the admissible range.
pub fn shape_from_features(f: &[f64]) -> Result<ShapeParams, ModelError> {
    let t = |v: f64| (v * T_MAX).clamp(T_MIN, T_MAX);
    ShapeParams::new([f[0], f[1], f[2]], [t(f[3]), t(f[4]), t(f[5])])
        .map_err(|e| ModelError::Invalid(e.to_string()))
}

/// Output heads: softmax on rows 0..3, `tanh` on rows 3..6.
pub fn generator_heads(raw: &DMatrix<f64>) -> DMatrix<f64> {
    let mut out = raw.clone();
    for mut col in out.column_iter_mut() {
        let m = col[0].max(col[1]).max(col[2]);
        let e = [(col[0] - m).exp(), (col[1] - m).exp(), (col[2] - m).exp()];
        let s = e[0] + e[1] + e[2];
        for i in 0..3 {
            col[i] = e[i] / s;
        }
        for i in 3..SHAPE_DIM {
            col[i] = col[i].tanh();
        }
    }
    out
}

/// Gradient through the heads, given their output and the gradient at the output.
pub fn heads_backward(feats: &DMatrix<f64>, grad: &DMatrix<f64>) -> DMatrix<f64> {
    let mut out = grad.clone();
    for c in 0..feats.ncols() {
        let dot: f64 = (0..3).map(|i| feats[(i, c)] * grad[(i, c)]).sum();
        for i in 0..3 {
            out[(i, c)] = feats[(i, c)] * (grad[(i, c)] - dot);
        }
        for i in 3..SHAPE_DIM {
            out[(i, c)] = grad[(i, c)] * (1.0 - feats[(i, c)] * feats[(i, c)]);
        }
    }
    out
}

fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

fn stack(top: &DMatrix<f64>, bottom: &DMatrix<f64>) -> DMatrix<f64> {
    let mut out = DMatrix::zeros(top.nrows() + bottom.nrows(), top.ncols());
    out.rows_mut(0, top.nrows()).copy_from(top);
    out.rows_mut(top.nrows(), bottom.nrows()).copy_from(bottom);
    out
}

/// `−E[log D(x|y)] − E[log(1 − D(x̂|y))]` with `D` producing logits; returns the
/// loss and discriminator gradients.
pub fn discriminator_loss(
    d: &Mlp,
    real: &DMatrix<f64>,
    fake: &DMatrix<f64>,
    y: &DMatrix<f64>,
) -> Result<(f64, MlpGrads), ModelError> {
    let b = real.ncols() as f64;
    let (lr, cache_r) = d.forward(&stack(real, y))?;
    let (lf, cache_f) = d.forward(&stack(fake, y))?;
    let loss = lr.iter().map(|&l| softplus(-l)).sum::<f64>() / b
        + lf.iter().map(|&l| softplus(l)).sum::<f64>() / fake.ncols() as f64;
    let gr = lr.map(|l| -sigmoid(-l) / b);
    let gf = lf.map(|l| sigmoid(l) / fake.ncols() as f64);
    let (g1, _) = d.backward(&cache_r, &gr);
    let (g2, _) = d.backward(&cache_f, &gf);
    Ok((loss, add_grads(g1, &g2)))
}

/// Mean absolute error over batch and both property components.
pub fn regressor_loss(
    r: &Mlp,
    x: &DMatrix<f64>,
    y: &DMatrix<f64>,
) -> Result<(f64, MlpGrads), ModelError> {
    let (pred, cache) = r.forward(x)?;
    let n = pred.len() as f64;
    let diff = &pred - y;
    let loss = diff.iter().map(|v| v.abs()).sum::<f64>() / n;
    let (g, _) = r.backward(&cache, &diff.map(|v| v.signum_or_zero() / n));
    Ok((loss, g))
}

trait SignumOrZero {
    fn signum_or_zero(self) -> f64;
}

impl SignumOrZero for f64 {
    fn signum_or_zero(self) -> f64 {
        if self > 0.0 {
            1.0
        } else if self < 0.0 {
            -1.0
        } else {
            0.0
        }
    }
}

/// Generator loss pieces.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GeneratorLoss {
    pub total: f64,
    pub adversarial: f64,
    pub property: f64,
}

/// Non-saturating adversarial loss plus `γ` times the regressor L1 penalty.
/// `D` and `R` are held fixed; gradients are returned for `G` only.
pub fn generator_loss(
    g: &Mlp,
    d: &Mlp,
    r: Option<&Mlp>,
    z: &DMatrix<f64>,
    y: &DMatrix<f64>,
    gamma: f64,
) -> Result<(GeneratorLoss, MlpGrads), ModelError> {
    let b = z.ncols() as f64;
    let (raw, cache_g) = g.forward(&stack(z, y))?;
    let feats = generator_heads(&raw);
    let (logits, cache_d) = d.forward(&stack(&feats, y))?;
    let adversarial = logits.iter().map(|&l| softplus(-l)).sum::<f64>() / b;
    let (_, gin) = d.backward(&cache_d, &logits.map(|l| -sigmoid(-l) / b));
    let mut grad_feats = gin.rows(0, SHAPE_DIM).into_owned();

    let mut property = 0.0;
    if let Some(r) = r {
        if gamma != 0.0 {
            let (pred, cache_r) = r.forward(&feats)?;
            let diff = &pred - y;
            let n = diff.len() as f64;
            property = diff.iter().map(|v| v.abs()).sum::<f64>() / n;
            let (_, gr) = r.backward(&cache_r, &diff.map(|v| gamma * v.signum_or_zero() / n));
            grad_feats += gr;
        }
    }
    let grad_raw = heads_backward(&feats, &grad_feats);
    let (grads, _) = g.backward(&cache_g, &grad_raw);
    let loss = GeneratorLoss {
        total: adversarial + gamma * property,
        adversarial,
        property,
    };
    Ok((loss, grads))
}

fn add_grads(mut a: MlpGrads, b: &MlpGrads) -> MlpGrads {
    for (x, y) in a.layers.iter_mut().zip(&b.layers) {
        x.weight += &y.weight;
        x.bias += &y.bias;
    }
    a
}

/// Losses of one training iteration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossRecord {
    pub iteration: usize,
    pub d_loss: f64,
    pub g_loss: f64,
    pub r_loss: f64,
}

/// Trained generator, discriminator and regressor with their property scaling.
#[derive(Debug, Clone, PartialEq)]
pub struct GenerativeModel {
    pub generator: Mlp,
    pub discriminator: Mlp,
    pub regressor: Mlp,
    pub scaling: PropertyScaling,
    pub config: TrainingConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct WeightsFile {
    generator: MlpRecord,
    discriminator: MlpRecord,
    regressor: MlpRecord,
    scaling: PropertyScaling,
    config: TrainingConfig,
}

fn normal_matrix(rows: usize, cols: usize, rng: &mut Rng) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |_, _| rng.sample(StandardNormal))
}

impl GenerativeModel {
    /// Freshly initialized networks.
    pub fn init(config: &TrainingConfig, scaling: PropertyScaling) -> Self {
        let h = config.hidden;
        Self {
            generator: Mlp::new(
                &[config.noise_dim + COND_DIM, h, h, h, SHAPE_DIM],
                &mut stream(config.seed, 11),
            ),
            discriminator: Mlp::new(
                &[SHAPE_DIM + COND_DIM, h, h, 1],
                &mut stream(config.seed, 12),
            ),
            regressor: Mlp::new(&[SHAPE_DIM, h, h, COND_DIM], &mut stream(config.seed, 13)),
            scaling,
            config: *config,
        }
    }

    /// Alternating training: per iteration one discriminator step, one regressor
    /// step on real data, and one generator step with both held fixed.
    pub fn train(
        records: &[DatasetRecord],
        config: &TrainingConfig,
    ) -> Result<(Self, Vec<LossRecord>)> {
        config.validate()?;
        if records.is_empty() {
            return Err(ModelError::EmptyTrainingSet.into());
        }
        let scaling = PropertyScaling::fit(records)?;
        let mut model = Self::init(config, scaling);
        let feats: Vec<[f64; SHAPE_DIM]> =
            records.iter().map(|r| shape_features(&r.params)).collect();
        let conds: Vec<[f64; 2]> = records
            .iter()
            .map(|r| scaling.normalize(r.property()))
            .collect();

        let (b1, b2) = (config.beta1, config.beta2);
        let mut opt_g = Adam::new(&model.generator, config.lr, b1, b2);
        let mut opt_d = Adam::new(&model.discriminator, config.lr, b1, b2);
        let mut opt_r = Adam::new(&model.regressor, config.lr, b1, b2);
        let mut rng = stream(config.seed, 10);
        let bsz = config.batch;
        let mut history = Vec::with_capacity(config.iterations);

        for iteration in 0..config.iterations {
            let idx: Vec<usize> = (0..bsz)
                .map(|_| rng.random_range(0..records.len()))
                .collect();
            let x = DMatrix::from_fn(SHAPE_DIM, bsz, |r, c| feats[idx[c]][r]);
            let y = DMatrix::from_fn(COND_DIM, bsz, |r, c| conds[idx[c]][r]);

            let z = normal_matrix(config.noise_dim, bsz, &mut rng);
            let fake = generator_heads(&model.generator.predict(&stack(&z, &y))?);
            let (d_loss, gd) = discriminator_loss(&model.discriminator, &x, &fake, &y)?;
            opt_d.step(&mut model.discriminator, &gd);

            let r_loss = if config.use_regressor {
                let (r_loss, gr) = regressor_loss(&model.regressor, &x, &y)?;
                opt_r.step(&mut model.regressor, &gr);
                r_loss
            } else {
                0.0
            };

            let z = normal_matrix(config.noise_dim, bsz, &mut rng);
            let r = config.use_regressor.then_some(&model.regressor);
            let (g_loss, gg) = generator_loss(
                &model.generator,
                &model.discriminator,
                r,
                &z,
                &y,
                config.gamma,
            )?;
            opt_g.step(&mut model.generator, &gg);

            if !(d_loss.is_finite() && g_loss.total.is_finite() && r_loss.is_finite()) {
                return Err(ModelError::Diverged { iteration }.into());
            }
            history.push(LossRecord {
                iteration,
                d_loss,
                g_loss: g_loss.total,
                r_loss,
            });
        }
        Ok((model, history))
    }

    /// Shape for physical condition `(E, ν)` and noise `z`.
    pub fn generate(&self, y: [f64; 2], z: &[f64]) -> Result<ShapeParams, ModelError> {
        if z.len() != self.config.noise_dim {
            return Err(ModelError::DimensionMismatch {
                expected: self.config.noise_dim,
                got: z.len(),
            });
        }
        let yn = self.scaling.normalize(y);
        let mut input = DMatrix::zeros(z.len() + COND_DIM, 1);
        for (i, &v) in z.iter().chain(yn.iter()).enumerate() {
            input[(i, 0)] = v;
        }
        let feats = generator_heads(&self.generator.predict(&input)?);
        shape_from_features(feats.column(0).as_slice())
    }

    /// `count` shapes for one condition with noise drawn from `rng`.
    pub fn sample(
        &self,
        y: [f64; 2],
        count: usize,
        rng: &mut Rng,
    ) -> Result<Vec<ShapeParams>, ModelError> {
        (0..count)
            .map(|_| {
                let z: Vec<f64> = (0..self.config.noise_dim)
                    .map(|_| rng.sample(StandardNormal))
                    .collect();
                self.generate(y, &z)
            })
            .collect()
    }

    /// Regressor prediction of physical `(E, ν)` for a shape.
    pub fn predict_properties(&self, p: &ShapeParams) -> Result<[f64; 2], ModelError> {
        let f = shape_features(p);
        let out = self
            .regressor
            .predict(&DMatrix::from_column_slice(SHAPE_DIM, 1, &f))?;
        Ok(self.scaling.denormalize([out[0], out[1]]))
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let file = WeightsFile {
            generator: self.generator.to_record(),
            discriminator: self.discriminator.to_record(),
            regressor: self.regressor.to_record(),
            scaling: self.scaling,
            config: self.config,
        };
        write_json(path, &file)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let file: WeightsFile = read_json(path)?;
        let model = Self {
            generator: Mlp::from_record(&file.generator)?,
            discriminator: Mlp::from_record(&file.discriminator)?,
            regressor: Mlp::from_record(&file.regressor)?,
            scaling: file.scaling,
            config: file.config,
        };
        let c = &model.config;
        let dims = [
            (model.generator.input_dim(), c.noise_dim + COND_DIM),
            (model.generator.output_dim(), SHAPE_DIM),
            (model.discriminator.input_dim(), SHAPE_DIM + COND_DIM),
            (model.discriminator.output_dim(), 1),
            (model.regressor.input_dim(), SHAPE_DIM),
            (model.regressor.output_dim(), COND_DIM),
        ];
        for (got, expected) in dims {
            if got != expected {
                return Err(ModelError::DimensionMismatch { expected, got }.into());
            }
        }
        Ok(model)
    }
}

pub fn write_losses(path: &Path, history: &[LossRecord]) -> Result<()> {
    let rows: Vec<_> = history
        .iter()
        .map(|h| {
            vec![
                h.iteration.to_string(),
                fmt_f64(h.d_loss),
                fmt_f64(h.g_loss),
                fmt_f64(h.r_loss),
            ]
        })
        .collect();
    write_csv_rows(path, &["iteration", "d_loss", "g_loss", "r_loss"], &rows)
}

/// Signed relative errors `((E' − E)/E, (ν' − ν)/ν)` of a generated cell.
pub fn property_error(
    target: [f64; 2],
    params: &ShapeParams,
    homogenizer: &Homogenizer,
    resolution: usize,
) -> Result<([f64; 2], [f64; 2])> {
    let p = homogenizer.homogenize(params, resolution)?;
    let achieved = [p.e_h, p.nu_h];
    Ok((
        [
            (achieved[0] - target[0]) / target[0],
            (achieved[1] - target[1]) / target[1],
        ],
        achieved,
    ))
}

/// One generated cell evaluated against its target condition.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorRow {
    pub id: usize,
    pub e_target: f64,
    pub nu_target: f64,
    pub params: Option<ShapeParams>,
    pub e_achieved: f64,
    pub nu_achieved: f64,
    pub eps_e: f64,
    pub eps_nu: f64,
    /// Set when the generated cell could not be homogenized.
    pub failure: Option<String>,
}

/// Generates one cell per test record (noise from stream `(seed, id)`) and measures
/// its property error.
pub fn evaluate(
    model: &GenerativeModel,
    records: &[DatasetRecord],
    homogenizer: &Homogenizer,
    resolution: usize,
    seed: u64,
) -> Vec<ErrorRow> {
    records
        .par_iter()
        .map(|rec| {
            let target = rec.property();
            let mut rng = stream(seed, 1_000_000 + rec.id as u64);
            let generated = model
                .sample(target, 1, &mut rng)
                .map_err(crate::Error::from)
                .map(|v| v[0]);
            let outcome = generated.and_then(|p| {
                property_error(target, &p, homogenizer, resolution).map(|(eps, ach)| (p, eps, ach))
            });
            match outcome {
                Ok((p, eps, ach)) => ErrorRow {
                    id: rec.id,
                    e_target: target[0],
                    nu_target: target[1],
                    params: Some(p),
                    e_achieved: ach[0],
                    nu_achieved: ach[1],
                    eps_e: eps[0],
                    eps_nu: eps[1],
                    failure: None,
                },
                Err(e) => ErrorRow {
                    id: rec.id,
                    e_target: target[0],
                    nu_target: target[1],
                    params: None,
                    e_achieved: f64::NAN,
                    nu_achieved: f64::NAN,
                    eps_e: f64::NAN,
                    eps_nu: f64::NAN,
                    failure: Some(e.to_string()),
                },
            }
        })
        .collect()
}

/// Aggregate error statistics. Failed cells count as unbounded errors in the
/// medians and fractions and are left out of the means.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ErrorSummary {
    pub count: usize,
    pub failures: usize,
    pub median_abs_e: f64,
    pub median_abs_nu: f64,
    pub mean_abs_e: f64,
    pub mean_abs_nu: f64,
    pub p90_abs_e: f64,
    pub p90_abs_nu: f64,
    pub frac_e_within_5pct: f64,
    pub frac_nu_within_5pct: f64,
}

fn percentile(sorted: &[f64], q: f64) -> f64 {
    if sorted.is_empty() {
        return f64::NAN;
    }
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    if sorted[lo].is_infinite() || sorted[hi].is_infinite() {
        return f64::INFINITY;
    }
    sorted[lo] + (pos - lo as f64) * (sorted[hi] - sorted[lo])
}

pub fn summarize(rows: &[ErrorRow]) -> ErrorSummary {
    let stats = |get: fn(&ErrorRow) -> f64| {
        let mut abs: Vec<f64> = rows
            .iter()
            .map(|r| {
                if r.failure.is_some() {
                    f64::INFINITY
                } else {
                    get(r).abs()
                }
            })
            .collect();
        abs.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let finite: Vec<f64> = abs.iter().copied().filter(|v| v.is_finite()).collect();
        let mean = finite.iter().sum::<f64>() / finite.len().max(1) as f64;
        let within = abs.iter().filter(|&&v| v <= 0.05).count() as f64 / abs.len().max(1) as f64;
        (percentile(&abs, 0.5), mean, percentile(&abs, 0.9), within)
    };
    let (me, ae, pe, we) = stats(|r| r.eps_e);
    let (mn, an, pn, wn) = stats(|r| r.eps_nu);
    ErrorSummary {
        count: rows.len(),
        failures: rows.iter().filter(|r| r.failure.is_some()).count(),
        median_abs_e: me,
        median_abs_nu: mn,
        mean_abs_e: ae,
        mean_abs_nu: an,
        p90_abs_e: pe,
        p90_abs_nu: pn,
        frac_e_within_5pct: we,
        frac_nu_within_5pct: wn,
    }
}

pub fn write_errors(path: &Path, rows: &[ErrorRow]) -> Result<()> {
    let header = [
        "id",
        "E_target",
        "nu_target",
        "alpha1",
        "alpha2",
        "alpha3",
        "t1",
        "t2",
        "t3",
        "E_achieved",
        "nu_achieved",
        "eps_E",
        "eps_nu",
        "status",
    ];
    let out: Vec<Vec<String>> = rows
        .iter()
        .map(|r| {
            let mut row = vec![r.id.to_string(), fmt_f64(r.e_target), fmt_f64(r.nu_target)];
            match &r.params {
                Some(p) => row.extend(p.to_array().iter().map(|&v| fmt_f64(v))),
                None => row.extend(std::iter::repeat_n(String::new(), 6)),
            }
            for v in [r.e_achieved, r.nu_achieved, r.eps_e, r.eps_nu] {
                row.push(if v.is_finite() {
                    fmt_f64(v)
                } else {
                    String::new()
                });
            }
            row.push(match &r.failure {
                None => "ok".to_string(),
                Some(msg) => format!("\"failed: {}\"", msg.replace('"', "'")),
            });
            row
        })
        .collect();
    write_csv_rows(path, &header, &out)
}

/// Mean and standard deviation of the errors over many noise draws per condition.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseRow {
    pub condition: usize,
    pub e: f64,
    pub nu: f64,
    pub mean_eps_e: f64,
    pub std_eps_e: f64,
    pub mean_eps_nu: f64,
    pub std_eps_nu: f64,
    pub failures: usize,
}

pub fn noise_robustness_report(
    model: &GenerativeModel,
    conditions: &[[f64; 2]],
    draws: usize,
    homogenizer: &Homogenizer,
    resolution: usize,
    seed: u64,
) -> Vec<NoiseRow> {
    conditions
        .iter()
        .enumerate()
        .map(|(ci, &y)| {
            let mut rng = stream(seed, 2_000_000 + ci as u64);
            let shapes = model.sample(y, draws, &mut rng).unwrap_or_default();
            let errs: Vec<Option<[f64; 2]>> = shapes
                .par_iter()
                .map(|p| {
                    property_error(y, p, homogenizer, resolution)
                        .ok()
                        .map(|(e, _)| e)
                })
                .collect();
            let ok: Vec<[f64; 2]> = errs.iter().flatten().copied().collect();
            let moments = |k: usize| {
                if ok.is_empty() {
                    return (f64::NAN, f64::NAN);
                }
                let n = ok.len() as f64;
                let m = ok.iter().map(|e| e[k]).sum::<f64>() / n;
                let v = ok.iter().map(|e| (e[k] - m).powi(2)).sum::<f64>() / n;
                (m, v.sqrt())
            };
            let (me, se) = moments(0);
            let (mn, sn) = moments(1);
            NoiseRow {
                condition: ci,
                e: y[0],
                nu: y[1],
                mean_eps_e: me,
                std_eps_e: se,
                mean_eps_nu: mn,
                std_eps_nu: sn,
                failures: draws - ok.len(),
            }
        })
        .collect()
}

pub fn write_noise_report(path: &Path, rows: &[NoiseRow]) -> Result<()> {
    let out: Vec<Vec<String>> = rows
        .iter()
        .map(|r| {
            vec![
                r.condition.to_string(),
                fmt_f64(r.e),
                fmt_f64(r.nu),
                fmt_f64(r.mean_eps_e),
                fmt_f64(r.std_eps_e),
                fmt_f64(r.mean_eps_nu),
                fmt_f64(r.std_eps_nu),
                r.failures.to_string(),
            ]
        })
        .collect();
    write_csv_rows(
        path,
        &[
            "condition",
            "E",
            "nu",
            "mean_eps_E",
            "std_eps_E",
            "mean_eps_nu",
            "std_eps_nu",
            "failures",
        ],
        &out,
    )
}
