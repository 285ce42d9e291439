//! Floating-point reference trainer.
//!
//! Plain mini-batch SGD with momentum and softmax cross-entropy. The float
//! forward pass mirrors the fixed-point one: inputs are the quantized pixel
//! values, hidden activations are clipped to `[0, 127/128]` (the saturating
//! ReLU of the Q1.7 datapath) and parameters are projected back into the
//! Q1.7 range after every step, so quantization only adds rounding error.

use ndarray::{Array1, Array2, ArrayView2, Axis};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{argmax_lowest, quantize_model, MlpModel, ModelError, Topology};
use crate::fxp::{self, FixedPointFormat};
use crate::mnist::{Dataset, IMAGE_PIXELS};

const ACT_MAX: f32 = 127.0 / 128.0;
const PARAM_MIN: f32 = -1.0;
const PARAM_MAX: f32 = 127.0 / 128.0;
/// Accuracy below which a trained model indicates a broken trainer.
const ACCURACY_FLOOR: f64 = 0.90;

#[derive(Debug, Error)]
pub enum TrainError {
    #[error("training set is empty")]
    EmptyDataset,
    #[error("topology must take {IMAGE_PIXELS} inputs and produce 10 classes, got {0:?}")]
    Topology(Vec<usize>),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("trained model reaches only {accuracy:.4} accuracy (floor {ACCURACY_FLOOR})")]
    BelowFloor { accuracy: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainParams {
    pub epochs: usize,
    pub learning_rate: f32,
    /// Multiplies the learning rate after every epoch.
    pub lr_decay: f32,
    pub momentum: f32,
    pub batch_size: usize,
    /// Softmax temperature applied to the output accumulators during training.
    pub logit_scale: f32,
    pub seed: u64,
}

impl Default for TrainParams {
    fn default() -> Self {
        Self {
            epochs: 4,
            learning_rate: 0.01,
            lr_decay: 0.75,
            momentum: 0.9,
            batch_size: 64,
            logit_scale: 4.0,
            seed: 1,
        }
    }
}

/// Float parameters, row-major `inputs x outputs` per layer.
#[derive(Debug, Clone, PartialEq)]
pub struct FloatModel {
    pub topology: Topology,
    pub weights: Vec<Vec<f32>>,
    pub biases: Vec<Vec<f32>>,
}

fn pixel_table() -> [f32; 256] {
    let mut t = [0f32; 256];
    for (p, v) in t.iter_mut().enumerate() {
        *v = fxp::quantize_pixel(p as u8, FixedPointFormat::Q1_7).to_f64() as f32;
    }
    t
}

fn input_batch(data: &Dataset, idx: &[usize], table: &[f32; 256]) -> Array2<f32> {
    let mut x = Array2::<f32>::zeros((idx.len(), IMAGE_PIXELS));
    for (row, &i) in x.outer_iter_mut().zip(idx) {
        for (v, &p) in row.into_iter().zip(data.image(i)) {
            *v = table[p as usize];
        }
    }
    x
}

struct Net {
    w: Vec<Array2<f32>>,
    b: Vec<Array1<f32>>,
}

impl Net {
    fn init(topo: &Topology, rng: &mut ChaCha8Rng) -> Self {
        let mut w = Vec::new();
        let mut b = Vec::new();
        for s in topo.layer_sizes().windows(2) {
            let normal = Normal::new(0.0f32, (2.0 / s[0] as f32).sqrt()).unwrap();
            let vals: Vec<f32> = (0..s[0] * s[1])
                .map(|_| normal.sample(rng).clamp(PARAM_MIN, PARAM_MAX))
                .collect();
            w.push(Array2::from_shape_vec((s[0], s[1]), vals).unwrap());
            b.push(Array1::zeros(s[1]));
        }
        Self { w, b }
    }

    /// Returns the input of every layer plus the final output accumulators.
    fn forward(&self, x: Array2<f32>) -> Vec<Array2<f32>> {
        let last = self.w.len() - 1;
        let mut acts = vec![x];
        for (l, (w, b)) in self.w.iter().zip(&self.b).enumerate() {
            let mut z = acts[l].dot(w) + b;
            if l != last {
                z.mapv_inplace(|v| v.clamp(0.0, ACT_MAX));
            }
            acts.push(z);
        }
        acts
    }

    fn predict(&self, x: Array2<f32>) -> Vec<usize> {
        let out = self.forward(x).pop().unwrap();
        out.outer_iter()
            .map(|row| argmax_lowest(row.as_slice().unwrap()))
            .collect()
    }
}

fn softmax_grad(out: ArrayView2<f32>, labels: &[u8], scale: f32) -> Array2<f32> {
    let batch = out.nrows() as f32;
    let mut g = out.to_owned();
    for (mut row, &y) in g.outer_iter_mut().zip(labels) {
        let max = row.fold(f32::MIN, |m, &v| m.max(v * scale));
        row.mapv_inplace(|v| (v * scale - max).exp());
        let sum = row.sum();
        row.mapv_inplace(|v| v / sum);
        row[y as usize] -= 1.0;
        row.mapv_inplace(|v| v * scale / batch);
    }
    g
}

fn check_topology(topo: &Topology) -> Result<(), TrainError> {
    if topo.inputs() != IMAGE_PIXELS || topo.outputs() != 10 {
        return Err(TrainError::Topology(topo.layer_sizes().to_vec()));
    }
    Ok(())
}

pub fn train_float(data: &Dataset, topo: &Topology, params: &TrainParams) -> Result<FloatModel, TrainError> {
    if data.is_empty() {
        return Err(TrainError::EmptyDataset);
    }
    check_topology(topo)?;
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let mut net = Net::init(topo, &mut rng);
    let mut vel_w: Vec<Array2<f32>> = net.w.iter().map(|w| Array2::zeros(w.raw_dim())).collect();
    let mut vel_b: Vec<Array1<f32>> = net.b.iter().map(|b| Array1::zeros(b.raw_dim())).collect();
    let table = pixel_table();
    let mut order: Vec<usize> = (0..data.len()).collect();
    let mut lr = params.learning_rate;
    let last = net.w.len() - 1;

    for epoch in 0..params.epochs {
        order.shuffle(&mut rng);
        for batch in order.chunks(params.batch_size.max(1)) {
            let x = input_batch(data, batch, &table);
            let labels: Vec<u8> = batch.iter().map(|&i| data.label(i)).collect();
            let acts = net.forward(x);
            let mut delta = softmax_grad(acts[last + 1].view(), &labels, params.logit_scale);
            for l in (0..=last).rev() {
                let grad_w = acts[l].t().dot(&delta);
                let grad_b = delta.sum_axis(Axis(0));
                if l > 0 {
                    let mut next = delta.dot(&net.w[l].t());
                    // gradient of the clip: only where 0 < a < max
                    ndarray::Zip::from(&mut next)
                        .and(&acts[l])
                        .for_each(|g, &a| {
                            if a <= 0.0 || a >= ACT_MAX {
                                *g = 0.0
                            }
                        });
                    delta = next;
                }
                let mu = params.momentum;
                ndarray::Zip::from(&mut vel_w[l])
                    .and(&mut net.w[l])
                    .and(&grad_w)
                    .for_each(|v, w, &g| {
                        *v = mu * *v - lr * g;
                        *w = (*w + *v).clamp(PARAM_MIN, PARAM_MAX);
                    });
                ndarray::Zip::from(&mut vel_b[l])
                    .and(&mut net.b[l])
                    .and(&grad_b)
                    .for_each(|v, b, &g| {
                        *v = mu * *v - lr * g;
                        *b = (*b + *v).clamp(PARAM_MIN, PARAM_MAX);
                    });
            }
        }
        lr *= params.lr_decay;
        log::info!("epoch {} done, next lr {lr:.5}", epoch + 1);
    }

    Ok(FloatModel {
        topology: topo.clone(),
        weights: net.w.iter().map(|w| w.iter().copied().collect()).collect(),
        biases: net.b.iter().map(|b| b.to_vec()).collect(),
    })
}

/// Accuracy of the float model under the same clipped forward pass.
pub fn evaluate_float(model: &FloatModel, data: &Dataset) -> f64 {
    let sizes = model.topology.layer_sizes();
    let net = Net {
        w: model
            .weights
            .iter()
            .zip(sizes.windows(2))
            .map(|(w, s)| Array2::from_shape_vec((s[0], s[1]), w.clone()).unwrap())
            .collect(),
        b: model.biases.iter().map(|b| Array1::from(b.clone())).collect(),
    };
    let table = pixel_table();
    let idx: Vec<usize> = (0..data.len()).collect();
    let correct: usize = idx
        .chunks(500)
        .map(|chunk| {
            net.predict(input_batch(data, chunk, &table))
                .iter()
                .zip(chunk)
                .filter(|(&p, &i)| p == data.label(i) as usize)
                .count()
        })
        .sum();
    correct as f64 / data.len() as f64
}

/// Trains in float, quantizes to `format`, and records the quantized
/// accuracy on `holdout` as the model's clean accuracy.
///
/// Fails when a model trained for at least one epoch stays below 90%.
pub fn train_reference(
    train: &Dataset,
    holdout: &Dataset,
    topo: &Topology,
    format: FixedPointFormat,
    params: &TrainParams,
) -> Result<MlpModel, TrainError> {
    let float = train_float(train, topo, params)?;
    let model = quantize_model(&float, format, Some(holdout))?;
    let accuracy = model.clean_accuracy.unwrap_or(0.0);
    if params.epochs > 0 && accuracy < ACCURACY_FLOOR {
        return Err(TrainError::BelowFloor { accuracy });
    }
    Ok(model)
}
