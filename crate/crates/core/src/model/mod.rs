//! Fixed-point multi-layer perceptron.
//!
//! Weights of layer `l` form a `layer_sizes[l] x layer_sizes[l + 1]` matrix
//! stored row-major (input-major). Hidden layers apply a saturating ReLU at
//! the activation format; the output layer returns raw accumulators.

mod io;
mod train;

pub use io::{load_model, read_model, save_model, write_model, ModelFileError, MODEL_MAGIC, MODEL_VERSION};
pub use train::{evaluate_float, train_float, train_reference, FloatModel, TrainError, TrainParams};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::fxp::{self, FixedPointFormat, FixedValue};
use crate::mnist::{Dataset, IMAGE_PIXELS};

pub const NUM_CLASSES: usize = 10;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("topology needs at least two layers with non-zero sizes, got {0:?}")]
    BadTopology(Vec<usize>),
    #[error("layer {layer}: expected {expected} {what}, got {got}")]
    Shape {
        layer: usize,
        what: &'static str,
        expected: usize,
        got: usize,
    },
    #[error("fan-in {fan_in} at {total_bits} bits can overflow a 32-bit accumulator")]
    AccumulatorOverflow { fan_in: usize, total_bits: u8 },
    #[error("raw value {raw} out of range for the format")]
    RawOutOfRange { raw: i32 },
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Topology {
    layer_sizes: Vec<usize>,
}

impl Topology {
    pub fn new(layer_sizes: Vec<usize>) -> Result<Self, ModelError> {
        if layer_sizes.len() < 2 || layer_sizes.contains(&0) {
            return Err(ModelError::BadTopology(layer_sizes));
        }
        Ok(Self { layer_sizes })
    }

    pub fn layer_sizes(&self) -> &[usize] {
        &self.layer_sizes
    }

    pub fn num_layers(&self) -> usize {
        self.layer_sizes.len() - 1
    }

    pub fn inputs(&self) -> usize {
        self.layer_sizes[0]
    }

    pub fn outputs(&self) -> usize {
        *self.layer_sizes.last().unwrap()
    }

    pub fn weight_count(&self) -> usize {
        self.layer_sizes.windows(2).map(|w| w[0] * w[1]).sum()
    }

    pub fn bias_count(&self) -> usize {
        self.layer_sizes[1..].iter().sum()
    }

    pub fn param_count(&self) -> usize {
        self.weight_count() + self.bias_count()
    }
}

impl Default for Topology {
    fn default() -> Self {
        Self {
            layer_sizes: vec![784, 1024, 512, 256, 128, 10],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    #[default]
    Relu,
    Sigmoid,
}

/// One fully connected layer, raw two's-complement values.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Layer {
    inputs: usize,
    outputs: usize,
    weights: Vec<i16>,
    biases: Vec<i16>,
}

impl Layer {
    pub fn inputs(&self) -> usize {
        self.inputs
    }

    pub fn outputs(&self) -> usize {
        self.outputs
    }

    /// Row-major `inputs x outputs` raw weights.
    pub fn weights(&self) -> &[i16] {
        &self.weights
    }

    pub fn biases(&self) -> &[i16] {
        &self.biases
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MlpModel {
    topology: Topology,
    format: FixedPointFormat,
    activation: Activation,
    layers: Vec<Layer>,
    /// Accuracy measured right after training/quantization, if known.
    pub clean_accuracy: Option<f64>,
}

/// Result of a single forward pass.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Inference {
    pub label: usize,
    pub scores: Vec<i64>,
}

impl MlpModel {
    /// Builds a model from per-layer raw weights (row-major) and biases.
    pub fn from_raw(
        topology: Topology,
        format: FixedPointFormat,
        activation: Activation,
        params: Vec<(Vec<i16>, Vec<i16>)>,
    ) -> Result<Self, ModelError> {
        let sizes = topology.layer_sizes();
        if params.len() != topology.num_layers() {
            return Err(ModelError::Shape {
                layer: params.len(),
                what: "layers",
                expected: topology.num_layers(),
                got: params.len(),
            });
        }
        let mut layers = Vec::with_capacity(params.len());
        for (l, (weights, biases)) in params.into_iter().enumerate() {
            let (inputs, outputs) = (sizes[l], sizes[l + 1]);
            if weights.len() != inputs * outputs {
                return Err(ModelError::Shape {
                    layer: l,
                    what: "weights",
                    expected: inputs * outputs,
                    got: weights.len(),
                });
            }
            if biases.len() != outputs {
                return Err(ModelError::Shape {
                    layer: l,
                    what: "biases",
                    expected: outputs,
                    got: biases.len(),
                });
            }
            if fxp::max_accumulator_magnitude(inputs, format) > i32::MAX as i64 {
                return Err(ModelError::AccumulatorOverflow {
                    fan_in: inputs,
                    total_bits: format.total_bits(),
                });
            }
            if let Some(&bad) = weights
                .iter()
                .chain(&biases)
                .find(|&&r| (r as i32) < format.min_raw() || (r as i32) > format.max_raw())
            {
                return Err(ModelError::RawOutOfRange { raw: bad as i32 });
            }
            layers.push(Layer {
                inputs,
                outputs,
                weights,
                biases,
            });
        }
        Ok(Self {
            topology,
            format,
            activation,
            layers,
            clean_accuracy: None,
        })
    }

    /// All-zero model of the given shape.
    pub fn zeros(topology: Topology, format: FixedPointFormat) -> Result<Self, ModelError> {
        let params = topology
            .layer_sizes()
            .windows(2)
            .map(|w| (vec![0i16; w[0] * w[1]], vec![0i16; w[1]]))
            .collect();
        Self::from_raw(topology, format, Activation::Relu, params)
    }

    pub fn topology(&self) -> &Topology {
        &self.topology
    }

    pub fn format(&self) -> FixedPointFormat {
        self.format
    }

    pub fn activation(&self) -> Activation {
        self.activation
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn weight(&self, layer: usize, input: usize, output: usize) -> FixedValue {
        let l = &self.layers[layer];
        FixedValue::from_raw(l.weights[input * l.outputs + output] as i32, self.format)
    }

    pub fn bias(&self, layer: usize, output: usize) -> FixedValue {
        FixedValue::from_raw(self.layers[layer].biases[output] as i32, self.format)
    }

    pub fn set_weight(&mut self, layer: usize, input: usize, output: usize, value: FixedValue) {
        let l = &mut self.layers[layer];
        l.weights[input * l.outputs + output] = value.raw() as i16;
    }

    pub fn set_bias(&mut self, layer: usize, output: usize, value: FixedValue) {
        self.layers[layer].biases[output] = value.raw() as i16;
    }

    pub fn param_count(&self) -> usize {
        self.topology.param_count()
    }

    /// Locates parameter `index` of the storage stream: layer 0 weights,
    /// layer 0 biases, layer 1 weights, and so on.
    fn locate(&self, mut index: usize) -> Option<(usize, bool, usize)> {
        for (l, layer) in self.layers.iter().enumerate() {
            if index < layer.weights.len() {
                return Some((l, false, index));
            }
            index -= layer.weights.len();
            if index < layer.biases.len() {
                return Some((l, true, index));
            }
            index -= layer.biases.len();
        }
        None
    }

    /// Raw value of parameter `index` in storage-stream order.
    pub fn param_raw(&self, index: usize) -> Option<i32> {
        self.locate(index).map(|(l, is_bias, i)| {
            let layer = &self.layers[l];
            if is_bias {
                layer.biases[i] as i32
            } else {
                layer.weights[i] as i32
            }
        })
    }

    /// Overwrites parameter `index`; `raw` is saturated into the format.
    pub fn set_param_raw(&mut self, index: usize, raw: i32) {
        let raw = self.format.saturate(raw as i64) as i16;
        if let Some((l, is_bias, i)) = self.locate(index) {
            let layer = &mut self.layers[l];
            if is_bias {
                layer.biases[i] = raw;
            } else {
                layer.weights[i] = raw;
            }
        }
    }

    /// All parameters in storage-stream order.
    pub fn params_raw(&self) -> impl Iterator<Item = i32> + '_ {
        self.layers.iter().flat_map(|l| {
            l.weights
                .iter()
                .chain(l.biases.iter())
                .map(|&r| r as i32)
        })
    }

    /// Same topology, format and parameters; ignores `clean_accuracy`.
    pub fn same_parameters(&self, other: &MlpModel) -> bool {
        self.topology == other.topology
            && self.format == other.format
            && self.activation == other.activation
            && self.layers == other.layers
    }

    pub fn infer(&self, image: &[u8]) -> Inference {
        let mut scratch = Scratch::default();
        let label = self.infer_into(image, &mut scratch);
        Inference {
            label,
            scores: scratch.current.iter().map(|&s| s as i64).collect(),
        }
    }

    fn infer_into(&self, image: &[u8], scratch: &mut Scratch) -> usize {
        debug_assert_eq!(image.len(), self.topology.inputs());
        let fmt = self.format;
        let frac = fmt.frac_bits() as u32;
        scratch.current.clear();
        scratch
            .current
            .extend(image.iter().map(|&p| fxp::quantize_pixel(p, fmt).raw()));

        let last = self.layers.len() - 1;
        for (l, layer) in self.layers.iter().enumerate() {
            let acc = &mut scratch.next;
            acc.clear();
            acc.extend(layer.biases.iter().map(|&b| (b as i32) << frac));
            for (i, &x) in scratch.current.iter().enumerate() {
                if x == 0 {
                    continue;
                }
                let row = &layer.weights[i * layer.outputs..(i + 1) * layer.outputs];
                for (a, &w) in acc.iter_mut().zip(row) {
                    *a += x * w as i32;
                }
            }
            if l != last {
                for a in acc.iter_mut() {
                    *a = activate(*a as i64, fmt, self.activation);
                }
            }
            std::mem::swap(&mut scratch.current, &mut scratch.next);
        }
        argmax_lowest(&scratch.current)
    }

    pub fn predict(&self, image: &[u8]) -> usize {
        self.infer_into(image, &mut Scratch::default())
    }
}

#[derive(Default)]
struct Scratch {
    current: Vec<i32>,
    next: Vec<i32>,
}

fn activate(acc: i64, fmt: FixedPointFormat, activation: Activation) -> i32 {
    let v = fxp::requantize(acc, fmt);
    match activation {
        Activation::Relu => v.raw().max(0),
        Activation::Sigmoid => {
            let x = v.to_f64();
            fxp::quantize(1.0 / (1.0 + (-x).exp()), fmt).raw()
        }
    }
}

/// Index of the maximum; ties go to the lowest index.
pub fn argmax_lowest<T: PartialOrd + Copy>(values: &[T]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
        }
    }
    best
}

/// Number of images whose predicted label matches the ground truth.
pub fn count_correct(model: &MlpModel, data: &Dataset) -> usize {
    const SHARD: usize = 256;
    (0..data.len())
        .into_par_iter()
        .step_by(SHARD)
        .map(|start| {
            let mut scratch = Scratch::default();
            (start..(start + SHARD).min(data.len()))
                .filter(|&i| model.infer_into(data.image(i), &mut scratch) == data.label(i) as usize)
                .count()
        })
        .sum()
}

/// Fraction of correctly classified images. Panics on an empty dataset.
pub fn evaluate(model: &MlpModel, data: &Dataset) -> f64 {
    assert!(!data.is_empty(), "evaluate needs a non-empty dataset");
    assert_eq!(model.topology().inputs(), IMAGE_PIXELS);
    count_correct(model, data) as f64 / data.len() as f64
}

/// Elementwise quantization of a float model. Records the accuracy on
/// `holdout` when one is given.
pub fn quantize_model(
    float: &FloatModel,
    format: FixedPointFormat,
    holdout: Option<&Dataset>,
) -> Result<MlpModel, ModelError> {
    let q = |v: &f32| fxp::quantize(*v as f64, format).raw() as i16;
    let params = float
        .weights
        .iter()
        .zip(&float.biases)
        .map(|(w, b)| (w.iter().map(q).collect(), b.iter().map(q).collect()))
        .collect();
    let mut model = MlpModel::from_raw(float.topology.clone(), format, Activation::Relu, params)?;
    if let Some(data) = holdout {
        model.clean_accuracy = Some(evaluate(&model, data));
    }
    Ok(model)
}

#[cfg(test)]
mod tests {
    use super::*;

    const Q17: FixedPointFormat = FixedPointFormat::Q1_7;

    fn tiny(sizes: Vec<usize>) -> MlpModel {
        MlpModel::zeros(Topology::new(sizes).unwrap(), Q17).unwrap()
    }

    #[test]
    fn default_topology_counts() {
        let t = Topology::default();
        assert_eq!(t.layer_sizes(), &[784, 1024, 512, 256, 128, 10]);
        assert_eq!(t.weight_count(), 1_492_224);
        assert_eq!(t.bias_count(), 1_930);
        assert!(Topology::new(vec![784]).is_err());
        assert!(Topology::new(vec![784, 0, 10]).is_err());
    }

    #[test]
    fn zero_network_ties_to_class_zero() {
        let m = tiny(vec![784, 16, 10]);
        let out = m.infer(&[0u8; 784]);
        assert_eq!(out.label, 0);
        assert!(out.scores.iter().all(|&s| s == 0));
        assert_eq!(m.predict(&[200u8; 784]), 0);
    }

    #[test]
    fn bias_only_network_picks_biased_class() {
        let mut m = tiny(vec![784, 8, 10]);
        m.set_bias(1, 7, FixedValue::from_raw(5, Q17));
        m.set_bias(1, 3, FixedValue::from_raw(4, Q17));
        assert_eq!(m.predict(&[0u8; 784]), 7);
        assert_eq!(m.predict(&[255u8; 784]), 7);
    }

    #[test]
    fn shape_errors() {
        let t = Topology::new(vec![4, 2]).unwrap();
        let err = MlpModel::from_raw(t.clone(), Q17, Activation::Relu, vec![(vec![0; 7], vec![0; 2])]);
        assert!(matches!(err, Err(ModelError::Shape { what: "weights", .. })));
        let err = MlpModel::from_raw(t, Q17, Activation::Relu, vec![(vec![0; 8], vec![0; 3])]);
        assert!(matches!(err, Err(ModelError::Shape { what: "biases", .. })));
        let wide = FixedPointFormat::new(16, 8).unwrap();
        let err = MlpModel::zeros(Topology::new(vec![784, 10]).unwrap(), wide);
        assert!(matches!(err, Err(ModelError::AccumulatorOverflow { .. })));
    }

    #[test]
    fn stream_order_is_weights_then_biases_per_layer() {
        let mut m = tiny(vec![2, 2, 2]);
        for i in 0..m.param_count() {
            m.set_param_raw(i, i as i32 + 1);
        }
        assert_eq!(m.layers()[0].weights(), &[1, 2, 3, 4]);
        assert_eq!(m.layers()[0].biases(), &[5, 6]);
        assert_eq!(m.layers()[1].weights(), &[7, 8, 9, 10]);
        assert_eq!(m.layers()[1].biases(), &[11, 12]);
        assert_eq!(m.params_raw().collect::<Vec<_>>(), (1..=12).collect::<Vec<_>>());
        assert_eq!(m.param_raw(12), None);
        m.set_param_raw(0, 1000);
        assert_eq!(m.param_raw(0), Some(127));
    }

    /// Straightforward f64 forward pass of a fixed-point network, used as an
    /// oracle for the integer kernel.
    fn reference_forward(m: &MlpModel, x: &[f64]) -> Vec<f64> {
        let mut act = x.to_vec();
        for (l, layer) in m.layers().iter().enumerate() {
            let mut out = vec![0.0; layer.outputs()];
            for (j, o) in out.iter_mut().enumerate() {
                *o = m.bias(l, j).to_f64();
                for (i, a) in act.iter().enumerate() {
                    *o += a * m.weight(l, i, j).to_f64();
                }
            }
            if l + 1 < m.layers().len() {
                for o in out.iter_mut() {
                    // Requantize: multiples of 2^-14 rounded half away to 2^-7.
                    *o = fxp::quantize(*o, m.format()).to_f64().max(0.0);
                }
            }
            act = out;
        }
        act
    }

    #[test]
    fn single_bit_flip_stays_local() {
        // 2-2-2 network: flipping a bit of a second-layer weight can only move
        // the output it feeds.
        let topo = Topology::new(vec![2, 2, 2]).unwrap();
        let params = vec![(vec![40, -20, 30, 50], vec![3, -4]), (vec![60, -70, 25, 45], vec![1, 2])];
        let base = MlpModel::from_raw(topo, Q17, Activation::Relu, params).unwrap();
        let x = [0.5, 0.25];
        let clean = reference_forward(&base, &x);
        for param in [0usize, 1, 2, 3, 6, 7, 8, 9] {
            for bit in 0..8 {
                let mut m = base.clone();
                let raw = m.param_raw(param).unwrap();
                m.set_param_raw(param, Q17.sign_extend(Q17.to_bits(raw) ^ (1 << bit)));
                let out = reference_forward(&m, &x);
                if param >= 6 {
                    // second-layer weight (i, j) only reaches output j
                    let j = (param - 6) % 2;
                    assert_eq!(out[1 - j], clean[1 - j], "param {param} bit {bit}");
                }
            }
        }
    }

    #[test]
    fn integer_kernel_matches_reference_forward() {
        let topo = Topology::new(vec![784, 6, 3, 10]).unwrap();
        let mut state = 0x1234_5678u32;
        let mut next = || {
            state ^= state << 13;
            state ^= state >> 17;
            state ^= state << 5;
            state
        };
        let params = topo
            .layer_sizes()
            .windows(2)
            .map(|w| {
                let ws = (0..w[0] * w[1]).map(|_| (next() % 256) as i16 - 128).collect();
                let bs = (0..w[1]).map(|_| (next() % 64) as i16 - 32).collect();
                (ws, bs)
            })
            .collect();
        let m = MlpModel::from_raw(topo, Q17, Activation::Relu, params).unwrap();
        for _ in 0..20 {
            let img: Vec<u8> = (0..784).map(|_| if next() % 4 == 0 { (next() % 256) as u8 } else { 0 }).collect();
            let x: Vec<f64> = img.iter().map(|&p| fxp::quantize_pixel(p, Q17).to_f64()).collect();
            let expected = reference_forward(&m, &x);
            let got = m.infer(&img);
            let scale = (1u64 << 14) as f64;
            let got_f: Vec<f64> = got.scores.iter().map(|&s| s as f64 / scale).collect();
            for (a, b) in got_f.iter().zip(&expected) {
                assert!((a - b).abs() < 1e-12, "{a} vs {b}");
            }
            assert_eq!(got.label, argmax_lowest(&expected));
        }
    }

    #[test]
    fn argmax_ties() {
        assert_eq!(argmax_lowest(&[1, 3, 3, 2]), 1);
        assert_eq!(argmax_lowest(&[0, 0]), 0);
    }
}
