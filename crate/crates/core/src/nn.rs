//! Fully connected networks with explicit backpropagation and Adam.
//!
//! Batches are stored column-wise: an input batch is `in_dim × batch`.

use nalgebra::{DMatrix, DVector};
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::error::ModelError;
use crate::rng::Rng;

pub const LEAKY_SLOPE: f64 = 0.2;

#[derive(Debug, Clone, PartialEq)]
pub struct Layer {
    pub weight: DMatrix<f64>,
    pub bias: DVector<f64>,
}

/// LeakyReLU hidden layers and a linear output layer.
#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    pub layers: Vec<Layer>,
}

/// Per-layer inputs and pre-activations saved by the forward pass.
#[derive(Debug, Clone)]
pub struct MlpCache {
    inputs: Vec<DMatrix<f64>>,
    pre: Vec<DMatrix<f64>>,
}

/// Gradients with the same layout as the network parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct MlpGrads {
    pub layers: Vec<Layer>,
}

fn leaky(v: f64) -> f64 {
    if v > 0.0 {
        v
    } else {
        LEAKY_SLOPE * v
    }
}

fn leaky_grad(v: f64) -> f64 {
    if v > 0.0 {
        1.0
    } else {
        LEAKY_SLOPE
    }
}

impl Mlp {
    /// He-style uniform initialization with zero biases.
    pub fn new(sizes: &[usize], rng: &mut Rng) -> Self {
        assert!(sizes.len() >= 2, "an MLP needs input and output sizes");
        let layers = sizes
            .windows(2)
            .map(|w| {
                let bound = (6.0 / ((1.0 + LEAKY_SLOPE * LEAKY_SLOPE) * w[0] as f64)).sqrt();
                Layer {
                    weight: DMatrix::from_fn(w[1], w[0], |_, _| rng.random_range(-bound..bound)),
                    bias: DVector::zeros(w[1]),
                }
            })
            .collect();
        Self { layers }
    }

    pub fn zeros(sizes: &[usize]) -> Self {
        let layers = sizes
            .windows(2)
            .map(|w| Layer {
                weight: DMatrix::zeros(w[1], w[0]),
                bias: DVector::zeros(w[1]),
            })
            .collect();
        Self { layers }
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].weight.ncols()
    }

    pub fn output_dim(&self) -> usize {
        self.layers.last().unwrap().weight.nrows()
    }

    pub fn sizes(&self) -> Vec<usize> {
        let mut s = vec![self.input_dim()];
        s.extend(self.layers.iter().map(|l| l.weight.nrows()));
        s
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        if self.layers.is_empty() {
            return Err(ModelError::Invalid("network has no layers".into()));
        }
        for (i, l) in self.layers.iter().enumerate() {
            if l.bias.len() != l.weight.nrows() {
                return Err(ModelError::Invalid(format!(
                    "layer {i}: bias length mismatch"
                )));
            }
            if i > 0 && self.layers[i - 1].weight.nrows() != l.weight.ncols() {
                return Err(ModelError::Invalid(format!(
                    "layer {i}: dimensions do not chain"
                )));
            }
            if l.weight.iter().chain(l.bias.iter()).any(|v| !v.is_finite()) {
                return Err(ModelError::Invalid(format!(
                    "layer {i}: non-finite parameter"
                )));
            }
        }
        Ok(())
    }

    pub fn forward(&self, x: &DMatrix<f64>) -> Result<(DMatrix<f64>, MlpCache), ModelError> {
        if x.nrows() != self.input_dim() {
            return Err(ModelError::DimensionMismatch {
                expected: self.input_dim(),
                got: x.nrows(),
            });
        }
        let last = self.layers.len() - 1;
        let mut inputs = Vec::with_capacity(self.layers.len());
        let mut pre = Vec::with_capacity(self.layers.len());
        let mut a = x.clone();
        for (i, layer) in self.layers.iter().enumerate() {
            let mut z = &layer.weight * &a;
            for mut col in z.column_iter_mut() {
                col += &layer.bias;
            }
            let next = if i == last { z.clone() } else { z.map(leaky) };
            inputs.push(a);
            pre.push(z);
            a = next;
        }
        Ok((a, MlpCache { inputs, pre }))
    }

    /// Output only.
    pub fn predict(&self, x: &DMatrix<f64>) -> Result<DMatrix<f64>, ModelError> {
        Ok(self.forward(x)?.0)
    }

    /// Parameter gradients and the gradient with respect to the input batch.
    pub fn backward(&self, cache: &MlpCache, grad_out: &DMatrix<f64>) -> (MlpGrads, DMatrix<f64>) {
        let last = self.layers.len() - 1;
        let mut grads: Vec<Layer> = Vec::with_capacity(self.layers.len());
        let mut delta = grad_out.clone();
        for i in (0..self.layers.len()).rev() {
            if i != last {
                delta.zip_apply(&cache.pre[i], |d, z| *d *= leaky_grad(z));
            }
            let gw = &delta * cache.inputs[i].transpose();
            let gb = delta.column_sum();
            let next = self.layers[i].weight.transpose() * &delta;
            grads.push(Layer {
                weight: gw,
                bias: gb,
            });
            delta = next;
        }
        grads.reverse();
        (MlpGrads { layers: grads }, delta)
    }

    pub fn num_params(&self) -> usize {
        self.layers
            .iter()
            .map(|l| l.weight.len() + l.bias.len())
            .sum()
    }

    /// All parameters, layer by layer: weights row-major, then biases.
    pub fn params_flat(&self) -> Vec<f64> {
        flatten(&self.layers)
    }

    pub fn set_params_flat(&mut self, flat: &[f64]) {
        let mut k = 0;
        for l in &mut self.layers {
            for r in 0..l.weight.nrows() {
                for c in 0..l.weight.ncols() {
                    l.weight[(r, c)] = flat[k];
                    k += 1;
                }
            }
            for v in l.bias.iter_mut() {
                *v = flat[k];
                k += 1;
            }
        }
    }

    pub fn to_record(&self) -> MlpRecord {
        MlpRecord {
            layers: self
                .layers
                .iter()
                .map(|l| LayerRecord {
                    rows: l.weight.nrows(),
                    cols: l.weight.ncols(),
                    weight: l.weight.transpose().as_slice().to_vec(),
                    bias: l.bias.as_slice().to_vec(),
                })
                .collect(),
        }
    }

    pub fn from_record(rec: &MlpRecord) -> Result<Self, ModelError> {
        let mut layers = Vec::with_capacity(rec.layers.len());
        for (i, l) in rec.layers.iter().enumerate() {
            if l.weight.len() != l.rows * l.cols || l.bias.len() != l.rows {
                return Err(ModelError::Invalid(format!(
                    "layer {i}: parameter count mismatch"
                )));
            }
            layers.push(Layer {
                weight: DMatrix::from_row_slice(l.rows, l.cols, &l.weight),
                bias: DVector::from_column_slice(&l.bias),
            });
        }
        let net = Self { layers };
        net.validate()?;
        Ok(net)
    }
}

impl MlpGrads {
    pub fn flat(&self) -> Vec<f64> {
        flatten(&self.layers)
    }
}

fn flatten(layers: &[Layer]) -> Vec<f64> {
    let mut out = Vec::new();
    for l in layers {
        for r in 0..l.weight.nrows() {
            for c in 0..l.weight.ncols() {
                out.push(l.weight[(r, c)]);
            }
        }
        out.extend(l.bias.iter());
    }
    out
}

/// Serialized layer: shape header and row-major weights.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerRecord {
    pub rows: usize,
    pub cols: usize,
    pub weight: Vec<f64>,
    pub bias: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlpRecord {
    pub layers: Vec<LayerRecord>,
}

/// Adam with per-parameter first and second moments.
#[derive(Debug, Clone)]
pub struct Adam {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    step: i32,
    m: Vec<Layer>,
    v: Vec<Layer>,
}

impl Adam {
    pub fn new(net: &Mlp, lr: f64, beta1: f64, beta2: f64) -> Self {
        let zero = Mlp::zeros(&net.sizes()).layers;
        Self {
            lr,
            beta1,
            beta2,
            eps: 1e-8,
            step: 0,
            m: zero.clone(),
            v: zero,
        }
    }

    pub fn step(&mut self, net: &mut Mlp, grads: &MlpGrads) {
        self.step += 1;
        let c1 = 1.0 - self.beta1.powi(self.step);
        let c2 = 1.0 - self.beta2.powi(self.step);
        let (b1, b2, lr, eps) = (self.beta1, self.beta2, self.lr, self.eps);
        let update = |p: &mut f64, g: f64, m: &mut f64, v: &mut f64| {
            *m = b1 * *m + (1.0 - b1) * g;
            *v = b2 * *v + (1.0 - b2) * g * g;
            *p -= lr * (*m / c1) / ((*v / c2).sqrt() + eps);
        };
        for (((layer, g), m), v) in net
            .layers
            .iter_mut()
            .zip(&grads.layers)
            .zip(&mut self.m)
            .zip(&mut self.v)
        {
            for (((p, &gv), mv), vv) in layer
                .weight
                .iter_mut()
                .zip(g.weight.iter())
                .zip(m.weight.iter_mut())
                .zip(v.weight.iter_mut())
            {
                update(p, gv, mv, vv);
            }
            for (((p, &gv), mv), vv) in layer
                .bias
                .iter_mut()
                .zip(g.bias.iter())
                .zip(m.bias.iter_mut())
                .zip(v.bias.iter_mut())
            {
                update(p, gv, mv, vv);
            }
        }
    }
}
