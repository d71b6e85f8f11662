use rand::Rng;
use serde::{Deserialize, Serialize};

use super::matrix::{axpy, dot, Matrix};
use crate::error::{Error, Result};
use crate::scalar::{sigmoid, Scalar};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Relu,
    Sigmoid,
    Identity,
}

impl Activation {
    #[inline]
    fn apply<T: Scalar>(self, z: T) -> T {
        match self {
            Activation::Relu => z.max(T::zero()),
            Activation::Sigmoid => sigmoid(z),
            Activation::Identity => z,
        }
    }

    /// Derivative expressed through the pre-activation `z` and output `a`.
    #[inline]
    fn derivative<T: Scalar>(self, z: T, a: T) -> T {
        match self {
            Activation::Relu => {
                if z > T::zero() {
                    T::one()
                } else {
                    T::zero()
                }
            }
            Activation::Sigmoid => a * (T::one() - a),
            Activation::Identity => T::one(),
        }
    }
}

/// Fully connected layer computing `act(W·x + b)` with `W` stored out × in.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DenseLayer<T> {
    pub weights: Matrix<T>,
    pub bias: Vec<T>,
    pub activation: Activation,
}

impl<T: Scalar> DenseLayer<T> {
    pub fn new(weights: Matrix<T>, bias: Vec<T>, activation: Activation) -> Result<Self> {
        if bias.len() != weights.rows() {
            return Err(Error::Shape(format!(
                "bias of length {} for {} output units",
                bias.len(),
                weights.rows()
            )));
        }
        Ok(DenseLayer {
            weights,
            bias,
            activation,
        })
    }

    #[inline]
    pub fn input_dim(&self) -> usize {
        self.weights.cols()
    }

    #[inline]
    pub fn output_dim(&self) -> usize {
        self.weights.rows()
    }

    /// Returns (pre-activation, activation).
    fn forward(&self, input: &Matrix<T>) -> (Matrix<T>, Matrix<T>) {
        let (n, out) = (input.rows(), self.output_dim());
        let mut z = Matrix::zeros(n, out);
        for r in 0..n {
            let x = input.row(r);
            let zr = z.row_mut(r);
            for (o, zo) in zr.iter_mut().enumerate() {
                *zo = self.bias[o] + dot(self.weights.row(o), x);
            }
        }
        let mut a = z.clone();
        if self.activation != Activation::Identity {
            for v in a.values_mut() {
                *v = self.activation.apply(*v);
            }
        }
        (z, a)
    }
}

/// Gradient of one dense layer.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LayerGrad<T> {
    pub weights: Matrix<T>,
    pub bias: Vec<T>,
}

/// Gradients for every parameter tensor of a [`Network`], the input batch,
/// and optionally a scalar skip parameter.
#[derive(Clone, Debug, PartialEq)]
pub struct GradientSet<T> {
    pub layers: Vec<LayerGrad<T>>,
    pub input: Matrix<T>,
    pub skip: Option<T>,
}

impl<T: Scalar> GradientSet<T> {
    pub fn zeros_like(net: &Network<T>, batch_rows: usize) -> Self {
        GradientSet {
            layers: net
                .layers
                .iter()
                .map(|l| LayerGrad {
                    weights: Matrix::zeros(l.output_dim(), l.input_dim()),
                    bias: vec![T::zero(); l.output_dim()],
                })
                .collect(),
            input: Matrix::zeros(batch_rows, net.input_dim()),
            skip: None,
        }
    }

    /// Parameter gradients flattened in the same order as
    /// [`Network::param_slices_mut`].
    pub fn param_slices(&self) -> Vec<&[T]> {
        self.layers
            .iter()
            .flat_map(|g| [g.weights.values(), g.bias.as_slice()])
            .collect()
    }

    /// Accumulates `other` into `self`.
    pub fn add_assign(&mut self, other: &GradientSet<T>) -> Result<()> {
        if self.layers.len() != other.layers.len() {
            return Err(Error::Shape("gradient sets of different depth".into()));
        }
        for (a, b) in self.layers.iter_mut().zip(&other.layers) {
            if a.weights.shape() != b.weights.shape() {
                return Err(Error::Shape("gradient tensors differ in shape".into()));
            }
            axpy(T::one(), b.weights.values(), a.weights.values_mut());
            axpy(T::one(), &b.bias, &mut a.bias);
        }
        self.skip = match (self.skip, other.skip) {
            (Some(a), Some(b)) => Some(a + b),
            (a, b) => a.or(b),
        };
        Ok(())
    }

    pub fn is_zero(&self) -> bool {
        self.param_slices()
            .iter()
            .all(|s| s.iter().all(|v| *v == T::zero()))
            && self.input.values().iter().all(|v| *v == T::zero())
            && self.skip.is_none_or(|s| s == T::zero())
    }
}

/// Activations retained from a forward pass for reuse in [`Network::backward_cached`].
#[derive(Clone, Debug)]
pub struct ForwardCache<T> {
    /// Input to every layer; `inputs[0]` is the batch.
    inputs: Vec<Matrix<T>>,
    pre_activations: Vec<Matrix<T>>,
    output: Matrix<T>,
}

impl<T> ForwardCache<T> {
    pub fn output(&self) -> &Matrix<T> {
        &self.output
    }

    /// Input to each layer, starting with the batch itself.
    pub fn layer_inputs(&self) -> &[Matrix<T>] {
        &self.inputs
    }
}

/// Ordered chain of dense layers.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Network<T> {
    pub layers: Vec<DenseLayer<T>>,
}

impl<T: Scalar> Network<T> {
    pub fn new(layers: Vec<DenseLayer<T>>) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::EmptyNetwork);
        }
        for (i, pair) in layers.windows(2).enumerate() {
            if pair[0].output_dim() != pair[1].input_dim() {
                return Err(Error::LayerDimension {
                    layer: i + 1,
                    expected: pair[1].input_dim(),
                    got: pair[0].output_dim(),
                });
            }
        }
        Ok(Network { layers })
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].input_dim()
    }

    pub fn output_dim(&self) -> usize {
        self.layers[self.layers.len() - 1].output_dim()
    }

    /// Widths from input to output, e.g. `[4, 50, 1]`.
    pub fn dims(&self) -> Vec<usize> {
        std::iter::once(self.input_dim())
            .chain(self.layers.iter().map(|l| l.output_dim()))
            .collect()
    }

    pub fn output_activation(&self) -> Activation {
        self.layers[self.layers.len() - 1].activation
    }

    pub fn num_params(&self) -> usize {
        self.layers
            .iter()
            .map(|l| l.weights.values().len() + l.bias.len())
            .sum()
    }

    fn check_input(&self, batch: &Matrix<T>) -> Result<()> {
        if batch.cols() != self.input_dim() {
            return Err(Error::LayerDimension {
                layer: 0,
                expected: self.input_dim(),
                got: batch.cols(),
            });
        }
        Ok(())
    }

    pub fn forward(&self, batch: &Matrix<T>) -> Result<Matrix<T>> {
        self.check_input(batch)?;
        let mut act = batch.clone();
        for layer in &self.layers {
            act = layer.forward(&act).1;
        }
        Ok(act)
    }

    pub fn forward_cached(&self, batch: &Matrix<T>) -> Result<ForwardCache<T>> {
        self.check_input(batch)?;
        let mut inputs = Vec::with_capacity(self.layers.len());
        let mut pre_activations = Vec::with_capacity(self.layers.len());
        let mut act = batch.clone();
        for layer in &self.layers {
            let (z, a) = layer.forward(&act);
            inputs.push(act);
            pre_activations.push(z);
            act = a;
        }
        Ok(ForwardCache {
            inputs,
            pre_activations,
            output: act,
        })
    }

    /// Reverse-mode gradients of a scalar loss whose gradient with respect to
    /// the network output is `upstream`.
    pub fn backward(&self, batch: &Matrix<T>, upstream: &Matrix<T>) -> Result<GradientSet<T>> {
        let cache = self.forward_cached(batch)?;
        self.backward_cached(&cache, upstream)
    }

    pub fn backward_cached(
        &self,
        cache: &ForwardCache<T>,
        upstream: &Matrix<T>,
    ) -> Result<GradientSet<T>> {
        if upstream.shape() != cache.output.shape() {
            return Err(Error::Shape(format!(
                "upstream gradient {:?} does not match network output {:?}",
                upstream.shape(),
                cache.output.shape()
            )));
        }
        let n = upstream.rows();
        let mut grads: Vec<LayerGrad<T>> = Vec::with_capacity(self.layers.len());
        // Gradient with respect to the current layer's output activation.
        let mut delta = upstream.clone();
        for (li, layer) in self.layers.iter().enumerate().rev() {
            let z = &cache.pre_activations[li];
            let a = if li + 1 < self.layers.len() {
                &cache.inputs[li + 1]
            } else {
                &cache.output
            };
            if layer.activation != Activation::Identity {
                for ((d, &zv), &av) in delta
                    .values_mut()
                    .iter_mut()
                    .zip(z.values())
                    .zip(a.values())
                {
                    *d = *d * layer.activation.derivative(zv, av);
                }
            }
            let input = &cache.inputs[li];
            let mut gw = Matrix::zeros(layer.output_dim(), layer.input_dim());
            let mut gb = vec![T::zero(); layer.output_dim()];
            let mut gin = Matrix::zeros(n, layer.input_dim());
            for r in 0..n {
                let dr = delta.row(r);
                let xr = input.row(r);
                for (o, &d) in dr.iter().enumerate() {
                    if d == T::zero() {
                        continue;
                    }
                    gb[o] = gb[o] + d;
                    axpy(d, xr, gw.row_mut(o));
                    axpy(d, layer.weights.row(o), gin.row_mut(r));
                }
            }
            grads.push(LayerGrad {
                weights: gw,
                bias: gb,
            });
            delta = gin;
        }
        grads.reverse();
        Ok(GradientSet {
            layers: grads,
            input: delta,
            skip: None,
        })
    }

    /// Mutable parameter tensors: weights then bias for each layer in order.
    pub fn param_slices_mut(&mut self) -> Vec<&mut [T]> {
        self.layers
            .iter_mut()
            .flat_map(|l| [l.weights.values_mut(), l.bias.as_mut_slice()])
            .collect()
    }

    pub fn is_finite(&self) -> bool {
        self.layers
            .iter()
            .all(|l| l.weights.is_finite() && l.bias.iter().all(|b| b.is_finite()))
    }
}

/// Builds a network with weights drawn uniformly from
/// `±sqrt(6 / (fan_in + fan_out))` and zero biases.
///
/// `dims` lists widths from input to output, so `dims.len() == activations.len() + 1`.
pub fn init_network<T: Scalar, R: Rng + ?Sized>(
    dims: &[usize],
    activations: &[Activation],
    rng: &mut R,
) -> Result<Network<T>> {
    if dims.len() < 2 || activations.is_empty() {
        return Err(Error::EmptyNetwork);
    }
    if activations.len() + 1 != dims.len() {
        return Err(Error::InvalidArgument(format!(
            "{} widths need {} activations, got {}",
            dims.len(),
            dims.len() - 1,
            activations.len()
        )));
    }
    let mut layers = Vec::with_capacity(activations.len());
    for (w, &act) in dims.windows(2).zip(activations) {
        let (fan_in, fan_out) = (w[0], w[1]);
        if fan_in == 0 || fan_out == 0 {
            return Err(Error::InvalidArgument("layer width must be positive".into()));
        }
        let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
        let values = (0..fan_in * fan_out)
            .map(|_| T::lit(rng.random_range(-limit..limit)))
            .collect();
        let weights = Matrix::from_vec(fan_out, fan_in, values)?;
        layers.push(DenseLayer::new(weights, vec![T::zero(); fan_out], act)?);
    }
    Network::new(layers)
}
