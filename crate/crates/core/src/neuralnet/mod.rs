//! Feedforward selector network with hand-written backpropagation.
//!
//! Shared trunk of dense → ReLU → (inverted) dropout blocks feeding two heads:
//! a softmax over agents and an optional sigmoid scalar confidence.

mod checkpoint;
mod optim;

pub use checkpoint::{deserialize, serialize, CHECKPOINT_MAGIC, CHECKPOINT_VERSION};
pub use optim::{sgd_step, Adam, Optimizer, OptimizerKind};

use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis, Zip};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{keyed_rng, Stream};
use crate::scalar::Scalar;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NetworkConfig {
    pub input_dim: usize,
    pub hidden_dims: Vec<usize>,
    pub n_agents: usize,
    pub dropout_rate: f64,
    pub confidence_head: bool,
}

impl NetworkConfig {
    pub fn validate(&self) -> Result<()> {
        if self.input_dim == 0 || self.n_agents == 0 || self.hidden_dims.contains(&0) {
            return Err(Error::Config(format!("network dimensions must be positive: {self:?}")));
        }
        if !(0.0..1.0).contains(&self.dropout_rate) {
            return Err(Error::Config(format!("dropout rate {} outside [0, 1)", self.dropout_rate)));
        }
        Ok(())
    }

    fn trunk_width(&self) -> usize {
        self.hidden_dims.last().copied().unwrap_or(self.input_dim)
    }
}

/// Affine layer `x · W + b` with `W` stored as fan_in × fan_out.
#[derive(Clone, Debug, PartialEq)]
pub struct Dense<T: Scalar = f64> {
    pub weights: Array2<T>,
    pub bias: Array1<T>,
}

impl<T: Scalar> Dense<T> {
    pub fn zeros(fan_in: usize, fan_out: usize) -> Self {
        Self {
            weights: Array2::zeros((fan_in, fan_out)),
            bias: Array1::zeros(fan_out),
        }
    }

    fn uniform(fan_in: usize, fan_out: usize, seed: u64, layer: u64) -> Self {
        let bound = 1.0 / (fan_in as f64).sqrt();
        let mut rng = keyed_rng(seed, Stream::Init, &[layer]);
        let weights = Array2::from_shape_simple_fn((fan_in, fan_out), || T::of(rng.random_range(-bound..bound)));
        Self {
            weights,
            bias: Array1::zeros(fan_out),
        }
    }

    fn apply(&self, x: &Array2<T>) -> Array2<T> {
        x.dot(&self.weights) + &self.bias
    }

    pub fn fan_in(&self) -> usize {
        self.weights.nrows()
    }

    pub fn fan_out(&self) -> usize {
        self.weights.ncols()
    }
}

/// All trainable tensors. Gradients use the same type.
#[derive(Clone, Debug, PartialEq)]
pub struct Parameters<T: Scalar = f64> {
    pub trunk: Vec<Dense<T>>,
    pub selection: Dense<T>,
    pub confidence: Option<Dense<T>>,
}

impl<T: Scalar> Parameters<T> {
    pub fn zeros(config: &NetworkConfig) -> Self {
        let mut trunk = Vec::with_capacity(config.hidden_dims.len());
        let mut width = config.input_dim;
        for &h in &config.hidden_dims {
            trunk.push(Dense::zeros(width, h));
            width = h;
        }
        Self {
            trunk,
            selection: Dense::zeros(width, config.n_agents),
            confidence: config.confidence_head.then(|| Dense::zeros(width, 1)),
        }
    }

    pub fn zeros_like(&self) -> Self {
        let z = |d: &Dense<T>| Dense::zeros(d.fan_in(), d.fan_out());
        Self {
            trunk: self.trunk.iter().map(z).collect(),
            selection: z(&self.selection),
            confidence: self.confidence.as_ref().map(z),
        }
    }

    fn layers(&self) -> impl Iterator<Item = &Dense<T>> {
        self.trunk.iter().chain(std::iter::once(&self.selection)).chain(self.confidence.iter())
    }

    fn layers_mut(&mut self) -> impl Iterator<Item = &mut Dense<T>> {
        self.trunk
            .iter_mut()
            .chain(std::iter::once(&mut self.selection))
            .chain(self.confidence.iter_mut())
    }

    /// Flat views of every tensor, in checkpoint order (weights then bias per layer).
    pub fn tensors(&self) -> Vec<&[T]> {
        self.layers()
            .flat_map(|d| {
                [
                    d.weights.as_slice().expect("standard layout"),
                    d.bias.as_slice().expect("standard layout"),
                ]
            })
            .collect()
    }

    pub fn tensors_mut(&mut self) -> Vec<&mut [T]> {
        self.layers_mut()
            .flat_map(|d| {
                [
                    d.weights.as_slice_mut().expect("standard layout"),
                    d.bias.as_slice_mut().expect("standard layout"),
                ]
            })
            .collect()
    }

    /// Shapes matching [`Parameters::tensors`].
    pub fn shapes(&self) -> Vec<Vec<usize>> {
        self.layers()
            .flat_map(|d| [vec![d.fan_in(), d.fan_out()], vec![d.fan_out()]])
            .collect()
    }

    pub fn n_params(&self) -> usize {
        self.tensors().iter().map(|t| t.len()).sum()
    }

    /// First non-finite entry as (tensor index, element index).
    pub fn first_non_finite(&self) -> Option<(usize, usize)> {
        self.tensors()
            .iter()
            .enumerate()
            .find_map(|(ti, t)| t.iter().position(|v| !v.is_finite()).map(|ei| (ti, ei)))
    }

    pub fn same_shape(&self, other: &Self) -> bool {
        self.shapes() == other.shapes()
    }

    /// `self += scale * other`.
    pub fn add_scaled(&mut self, other: &Self, scale: T) -> Result<()> {
        if !self.same_shape(other) {
            return Err(Error::Shape("parameter sets have different shapes".into()));
        }
        for (dst, src) in self.tensors_mut().into_iter().zip(other.tensors()) {
            for (d, &s) in dst.iter_mut().zip(src) {
                *d = *d + scale * s;
            }
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Train,
    Infer,
}

/// Cached intermediate values of one forward pass.
#[derive(Clone, Debug)]
pub struct ForwardTrace<T: Scalar = f64> {
    pub mode: Mode,
    pub input: Array2<T>,
    /// Pre-activation of each trunk layer.
    pub pre_activations: Vec<Array2<T>>,
    /// Output of each trunk block after ReLU and dropout.
    pub activations: Vec<Array2<T>>,
    /// Scaled keep-masks (`0` or `1/(1-p)`); `None` in inference or when p = 0.
    pub dropout_masks: Vec<Option<Array2<T>>>,
}

impl<T: Scalar> ForwardTrace<T> {
    pub fn batch_size(&self) -> usize {
        self.input.nrows()
    }

    fn trunk_output(&self) -> &Array2<T> {
        self.activations.last().unwrap_or(&self.input)
    }
}

#[derive(Clone, Debug)]
pub struct ForwardOutput<T: Scalar = f64> {
    pub selection_logits: Array2<T>,
    pub selection_probs: Array2<T>,
    pub confidence_logits: Option<Array1<T>>,
    pub confidence: Option<Array1<T>>,
    pub trace: ForwardTrace<T>,
}

pub fn relu<T: Scalar>(x: T) -> T {
    if x > T::zero() {
        x
    } else {
        T::zero()
    }
}

pub fn sigmoid<T: Scalar>(z: T) -> T {
    if z >= T::zero() {
        T::one() / (T::one() + (-z).exp())
    } else {
        let e = z.exp();
        e / (T::one() + e)
    }
}

/// Row-wise softmax with max subtraction.
pub fn softmax_rows<T: Scalar>(logits: ArrayView2<T>) -> Array2<T> {
    let mut out = logits.to_owned();
    for mut row in out.rows_mut() {
        let max = row.iter().fold(T::neg_infinity(), |m, &v| m.max(v));
        row.mapv_inplace(|v| (v - max).exp());
        let sum = row.sum();
        row.mapv_inplace(|v| v / sum);
    }
    out
}

fn dropout_mask<T: Scalar>(shape: (usize, usize), rate: f64, seed: u64, layer: usize) -> Array2<T> {
    let mut rng = keyed_rng(seed, Stream::Dropout, &[layer as u64]);
    let keep = T::of(1.0 / (1.0 - rate));
    Array2::from_shape_simple_fn(shape, || if rng.random::<f64>() < rate { T::zero() } else { keep })
}

/// Selector network: configuration plus parameters.
#[derive(Clone, Debug, PartialEq)]
pub struct Mlp<T: Scalar = f64> {
    config: NetworkConfig,
    params: Parameters<T>,
}

impl<T: Scalar> Mlp<T> {
    /// Uniform weights in `[-1/sqrt(fan_in), 1/sqrt(fan_in))`, zero biases.
    pub fn init(config: NetworkConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let mut trunk = Vec::new();
        let mut width = config.input_dim;
        for (l, &h) in config.hidden_dims.iter().enumerate() {
            trunk.push(Dense::uniform(width, h, seed, l as u64));
            width = h;
        }
        let n = config.hidden_dims.len() as u64;
        let params = Parameters {
            trunk,
            selection: Dense::uniform(width, config.n_agents, seed, n),
            confidence: config.confidence_head.then(|| Dense::uniform(width, 1, seed, n + 1)),
        };
        Ok(Self { config, params })
    }

    pub fn zeros(config: NetworkConfig) -> Result<Self> {
        config.validate()?;
        let params = Parameters::zeros(&config);
        Ok(Self { config, params })
    }

    pub fn from_parts(config: NetworkConfig, params: Parameters<T>) -> Result<Self> {
        config.validate()?;
        if !Parameters::<T>::zeros(&config).same_shape(&params) {
            return Err(Error::Shape("parameters do not match the network config".into()));
        }
        if let Some((t, e)) = params.first_non_finite() {
            return Err(Error::NonFinite(format!("parameter tensor {t} element {e}")));
        }
        Ok(Self { config, params })
    }

    pub fn config(&self) -> &NetworkConfig {
        &self.config
    }

    pub fn params(&self) -> &Parameters<T> {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut Parameters<T> {
        &mut self.params
    }

    pub fn forward(&self, inputs: ArrayView2<T>, mode: Mode, dropout_seed: u64) -> Result<ForwardOutput<T>> {
        if inputs.ncols() != self.config.input_dim {
            return Err(Error::Shape(format!(
                "input width {} != network input_dim {}",
                inputs.ncols(),
                self.config.input_dim
            )));
        }
        if let Some(pos) = inputs.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!("network input element {pos}")));
        }
        let rate = self.config.dropout_rate;
        let mut act = inputs.to_owned();
        let input = act.clone();
        let mut pre_activations = Vec::with_capacity(self.params.trunk.len());
        let mut activations = Vec::with_capacity(self.params.trunk.len());
        let mut dropout_masks = Vec::with_capacity(self.params.trunk.len());
        for (l, layer) in self.params.trunk.iter().enumerate() {
            let pre = layer.apply(&act);
            let mut post = pre.mapv(relu);
            let mask = (mode == Mode::Train && rate > 0.0).then(|| dropout_mask(post.dim(), rate, dropout_seed, l));
            if let Some(m) = &mask {
                post *= m;
            }
            pre_activations.push(pre);
            dropout_masks.push(mask);
            activations.push(post.clone());
            act = post;
        }
        let selection_logits = self.params.selection.apply(&act);
        let selection_probs = softmax_rows(selection_logits.view());
        let confidence_logits = self
            .params
            .confidence
            .as_ref()
            .map(|head| head.apply(&act).column(0).to_owned());
        let confidence = confidence_logits.as_ref().map(|z| z.mapv(sigmoid));
        Ok(ForwardOutput {
            selection_logits,
            selection_probs,
            confidence_logits,
            confidence,
            trace: ForwardTrace {
                mode,
                input,
                pre_activations,
                activations,
                dropout_masks,
            },
        })
    }

    /// Inference-mode forward of a single input row.
    pub fn predict(&self, input: &[T]) -> Result<(Vec<T>, Option<T>)> {
        let view = ArrayView2::from_shape((1, input.len()), input).map_err(|e| Error::Shape(e.to_string()))?;
        let out = self.forward(view, Mode::Infer, 0)?;
        let probs = out.selection_probs.row(0).to_vec();
        Ok((probs, out.confidence.map(|c| c[0])))
    }

    /// Gradients of a scalar loss given its derivatives with respect to the
    /// selection logits (batch × agents) and the confidence logits (batch).
    pub fn backward(
        &self,
        trace: &ForwardTrace<T>,
        d_selection_logits: ArrayView2<T>,
        d_confidence_logits: Option<ArrayView1<T>>,
    ) -> Result<Parameters<T>> {
        let batch = trace.batch_size();
        if trace.pre_activations.len() != self.params.trunk.len()
            || trace.activations.len() != self.params.trunk.len()
            || trace.dropout_masks.len() != self.params.trunk.len()
        {
            return Err(Error::Shape("trace depth does not match the network".into()));
        }
        for (layer, pre) in self.params.trunk.iter().zip(&trace.pre_activations) {
            if pre.ncols() != layer.fan_out() || pre.nrows() != batch {
                return Err(Error::Shape("trace layer widths do not match the network".into()));
            }
        }
        if trace.input.ncols() != self.config.input_dim {
            return Err(Error::Shape("trace input width does not match the network".into()));
        }
        if d_selection_logits.dim() != (batch, self.config.n_agents) {
            return Err(Error::Shape(format!(
                "selection gradient shape {:?} != ({batch}, {})",
                d_selection_logits.dim(),
                self.config.n_agents
            )));
        }
        if let Some(dc) = &d_confidence_logits {
            if self.params.confidence.is_none() {
                return Err(Error::Shape("confidence gradient given for a network without confidence head".into()));
            }
            if dc.len() != batch {
                return Err(Error::Shape(format!("confidence gradient length {} != batch {batch}", dc.len())));
            }
        }

        let mut grads = self.params.zeros_like();
        let h = trace.trunk_output();

        grads.selection.weights = h.t().dot(&d_selection_logits);
        grads.selection.bias = d_selection_logits.sum_axis(Axis(0));
        let mut d_act = d_selection_logits.dot(&self.params.selection.weights.t());

        if let (Some(head), Some(dc), Some(g)) = (&self.params.confidence, d_confidence_logits, grads.confidence.as_mut()) {
            let dz = dc.insert_axis(Axis(1));
            g.weights = h.t().dot(&dz);
            g.bias = dz.sum_axis(Axis(0));
            d_act = d_act + dz.dot(&head.weights.t());
        }

        for l in (0..self.params.trunk.len()).rev() {
            if let Some(mask) = &trace.dropout_masks[l] {
                d_act *= mask;
            }
            Zip::from(&mut d_act)
                .and(&trace.pre_activations[l])
                .for_each(|d, &z| {
                    if z <= T::zero() {
                        *d = T::zero();
                    }
                });
            let below = if l == 0 { &trace.input } else { &trace.activations[l - 1] };
            grads.trunk[l].weights = below.t().dot(&d_act);
            grads.trunk[l].bias = d_act.sum_axis(Axis(0));
            if l > 0 {
                d_act = d_act.dot(&self.params.trunk[l].weights.t());
            }
        }
        Ok(grads)
    }

    pub fn trunk_width(&self) -> usize {
        self.config.trunk_width()
    }
}
