//! Fully-connected feedforward network with batched forward and backward passes.
//!
//! Batches are stored column-wise: an `N_in x B` matrix holds `B` samples.

use nalgebra::{DMatrix, DVector, RealField};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Scalar type a network can be trained in.
pub trait Real: RealField + Copy + Default + Send + Sync {
    fn of(x: f64) -> Self;
    fn to_f64(self) -> f64;
}

impl Real for f32 {
    fn of(x: f64) -> Self {
        x as f32
    }

    fn to_f64(self) -> f64 {
        self as f64
    }
}

impl Real for f64 {
    fn of(x: f64) -> Self {
        x
    }

    fn to_f64(self) -> f64 {
        self
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Relu,
    Linear,
}

impl Activation {
    fn apply<T: Real>(self, z: &mut DMatrix<T>) {
        if self == Activation::Relu {
            z.apply(|v| {
                if *v < T::zero() {
                    *v = T::zero()
                }
            });
        }
    }

    /// Multiplies `delta` by the derivative evaluated at pre-activation `z`.
    fn backprop<T: Real>(self, z: &DMatrix<T>, delta: &mut DMatrix<T>) {
        if self == Activation::Relu {
            delta.zip_apply(z, |d, z| {
                if z <= T::zero() {
                    *d = T::zero()
                }
            });
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Layer<T: Real> {
    /// `N_out x N_in`.
    pub weights: DMatrix<T>,
    pub bias: DVector<T>,
    pub activation: Activation,
}

impl<T: Real> Layer<T> {
    pub fn inputs(&self) -> usize {
        self.weights.ncols()
    }

    pub fn outputs(&self) -> usize {
        self.weights.nrows()
    }

    fn pre_activation(&self, x: &DMatrix<T>) -> DMatrix<T> {
        let mut z = &self.weights * x;
        for mut col in z.column_iter_mut() {
            col += &self.bias;
        }
        z
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Mlp<T: Real> {
    pub layers: Vec<Layer<T>>,
}

/// Per-layer inputs and pre-activations kept for the backward pass.
pub struct ForwardCache<T: Real> {
    inputs: Vec<DMatrix<T>>,
    pre: Vec<DMatrix<T>>,
    pub output: DMatrix<T>,
}

/// Gradients with the same shapes as the network parameters.
#[derive(Clone, Debug, PartialEq)]
pub struct Gradients<T: Real> {
    pub weights: Vec<DMatrix<T>>,
    pub bias: Vec<DVector<T>>,
}

impl<T: Real> ForwardCache<T> {
    /// Pre-activations of every layer, one column per sample.
    pub fn pre_activations(&self) -> &[DMatrix<T>] {
        &self.pre
    }
}

impl<T: Real> Gradients<T> {
    /// Parameter slices in the order used by [`Mlp::params_mut`].
    pub fn slices(&self) -> Vec<&[T]> {
        self.weights.iter().zip(&self.bias).flat_map(|(w, b)| [w.as_slice(), b.as_slice()]).collect()
    }
}

impl<T: Real> Mlp<T> {
    pub fn new(layers: Vec<Layer<T>>) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::Dimension("network without layers".into()));
        }
        for (i, l) in layers.iter().enumerate() {
            if l.bias.len() != l.outputs() {
                return Err(Error::Dimension(format!("layer {i}: bias length {} for {} outputs", l.bias.len(), l.outputs())));
            }
        }
        for (i, pair) in layers.windows(2).enumerate() {
            if pair[0].outputs() != pair[1].inputs() {
                return Err(Error::Dimension(format!(
                    "layer {i} emits {} values but layer {} expects {}",
                    pair[0].outputs(),
                    i + 1,
                    pair[1].inputs()
                )));
            }
        }
        Ok(Self { layers })
    }

    /// Glorot-uniform weights and zero biases for layer widths `dims`.
    pub fn init<R: Rng + ?Sized>(dims: &[usize], hidden: Activation, output: Activation, rng: &mut R) -> Result<Self> {
        if dims.len() < 2 || dims.contains(&0) {
            return Err(Error::Dimension(format!("invalid layer widths {dims:?}")));
        }
        let n = dims.len() - 1;
        let layers = dims
            .windows(2)
            .enumerate()
            .map(|(i, w)| {
                let limit = (6.0 / (w[0] + w[1]) as f64).sqrt();
                Layer {
                    weights: DMatrix::from_fn(w[1], w[0], |_, _| T::of(rng.random_range(-limit..limit))),
                    bias: DVector::zeros(w[1]),
                    activation: if i + 1 == n { output } else { hidden },
                }
            })
            .collect();
        Self::new(layers)
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].inputs()
    }

    pub fn output_dim(&self) -> usize {
        self.layers.last().map_or(0, |l| l.outputs())
    }

    pub fn widths(&self) -> Vec<usize> {
        std::iter::once(self.input_dim()).chain(self.layers.iter().map(|l| l.outputs())).collect()
    }

    fn check_input(&self, rows: usize) -> Result<()> {
        if rows != self.input_dim() {
            return Err(Error::Dimension(format!("input of length {rows}, network expects {}", self.input_dim())));
        }
        Ok(())
    }

    pub fn forward(&self, x: &[T]) -> Result<Vec<T>> {
        let out = self.forward_batch(&DMatrix::from_column_slice(x.len(), 1, x))?;
        Ok(out.as_slice().to_vec())
    }

    pub fn forward_batch(&self, x: &DMatrix<T>) -> Result<DMatrix<T>> {
        self.check_input(x.nrows())?;
        let mut a = x.clone();
        for l in &self.layers {
            a = l.pre_activation(&a);
            l.activation.apply(&mut a);
        }
        Ok(a)
    }

    pub fn forward_cached(&self, x: &DMatrix<T>) -> Result<ForwardCache<T>> {
        self.check_input(x.nrows())?;
        let mut inputs = Vec::with_capacity(self.layers.len());
        let mut pre = Vec::with_capacity(self.layers.len());
        let mut a = x.clone();
        for l in &self.layers {
            let z = l.pre_activation(&a);
            inputs.push(a);
            a = z.clone();
            l.activation.apply(&mut a);
            pre.push(z);
        }
        Ok(ForwardCache { inputs, pre, output: a })
    }

    /// Mean squared error over all batch entries and outputs, and its gradients.
    pub fn backward(&self, cache: &ForwardCache<T>, targets: &DMatrix<T>) -> Result<(T, Gradients<T>)> {
        if targets.shape() != cache.output.shape() {
            return Err(Error::Dimension(format!("targets {:?} for outputs {:?}", targets.shape(), cache.output.shape())));
        }
        let count = T::of((targets.nrows() * targets.ncols()) as f64);
        let err = &cache.output - targets;
        let loss = err.norm_squared() / count;
        let mut delta = err * (T::of(2.0) / count);
        let n = self.layers.len();
        let mut weights = Vec::with_capacity(n);
        let mut bias = Vec::with_capacity(n);
        for p in (0..n).rev() {
            let layer = &self.layers[p];
            layer.activation.backprop(&cache.pre[p], &mut delta);
            weights.push(&delta * cache.inputs[p].transpose());
            bias.push(delta.column_sum());
            if p > 0 {
                delta = layer.weights.transpose() * &delta;
            }
        }
        weights.reverse();
        bias.reverse();
        Ok((loss, Gradients { weights, bias }))
    }

    pub fn loss_and_gradients(&self, x: &DMatrix<T>, targets: &DMatrix<T>) -> Result<(T, Gradients<T>)> {
        let cache = self.forward_cached(x)?;
        self.backward(&cache, targets)
    }

    pub fn loss(&self, x: &DMatrix<T>, targets: &DMatrix<T>) -> Result<T> {
        let out = self.forward_batch(x)?;
        if out.shape() != targets.shape() {
            return Err(Error::Dimension(format!("targets {:?} for outputs {:?}", targets.shape(), out.shape())));
        }
        Ok((out - targets).norm_squared() / T::of((targets.nrows() * targets.ncols()) as f64))
    }

    /// Weight and bias slices, layer by layer.
    pub fn params_mut(&mut self) -> Vec<&mut [T]> {
        self.layers
            .iter_mut()
            .flat_map(|l| [l.weights.as_mut_slice(), l.bias.as_mut_slice()])
            .collect()
    }

    pub fn param_sizes(&self) -> Vec<usize> {
        self.layers.iter().flat_map(|l| [l.weights.len(), l.bias.len()]).collect()
    }

    pub fn cast<U: Real>(&self) -> Mlp<U> {
        Mlp {
            layers: self
                .layers
                .iter()
                .map(|l| Layer {
                    weights: l.weights.map(|v| U::of(v.to_f64())),
                    bias: l.bias.map(|v| U::of(v.to_f64())),
                    activation: l.activation,
                })
                .collect(),
        }
    }
}
