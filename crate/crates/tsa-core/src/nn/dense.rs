//! Fully connected layer with a tagged activation.

use ndarray::{Array1, Array2};
use rand::Rng;

use super::activation::Activation;
use super::add_outer;
use crate::error::{CoreError, Result};

#[derive(Debug, Clone)]
pub struct DenseLayer {
    /// out × in.
    pub weight: Array2<f64>,
    pub bias: Array1<f64>,
    pub activation: Activation,
}

/// Forward cache for one input vector.
#[derive(Debug, Clone)]
pub struct DenseTape {
    x: Array1<f64>,
    pub y: Array1<f64>,
    fingerprint: f64,
}

#[derive(Debug, Clone)]
pub struct DenseGrads {
    pub weight: Array2<f64>,
    pub bias: Array1<f64>,
}

impl DenseLayer {
    pub fn zeros(input: usize, output: usize, activation: Activation) -> Self {
        DenseLayer {
            weight: Array2::zeros((output, input)),
            bias: Array1::zeros(output),
            activation,
        }
    }

    /// Uniform ±(6/(fan_in+fan_out))^1/2 weights, zero biases.
    pub fn glorot(input: usize, output: usize, activation: Activation, rng: &mut impl Rng) -> Self {
        let s = (6.0 / (input + output) as f64).sqrt();
        DenseLayer {
            weight: Array2::from_shape_fn((output, input), |_| rng.gen_range(-s..s)),
            bias: Array1::zeros(output),
            activation,
        }
    }

    pub fn input_dim(&self) -> usize {
        self.weight.ncols()
    }

    pub fn output_dim(&self) -> usize {
        self.weight.nrows()
    }

    pub(crate) fn fingerprint(&self) -> f64 {
        self.weight.sum() + self.bias.sum()
    }

    pub fn forward(&self, x: &Array1<f64>) -> Result<DenseTape> {
        if x.len() != self.input_dim() {
            return Err(CoreError::shape(
                "dense_forward",
                format!("input has length {}, weight expects {}", x.len(), self.input_dim()),
            ));
        }
        let a = self.weight.dot(x) + &self.bias;
        let y = self.activation.apply(a);
        Ok(DenseTape {
            x: x.clone(),
            y,
            fingerprint: self.fingerprint(),
        })
    }

    /// Gradient of a scalar loss w.r.t. parameters and input, given the
    /// gradient `dy` on the activation output.
    pub fn backward(&self, tape: &DenseTape, dy: &Array1<f64>) -> Result<(DenseGrads, Array1<f64>)> {
        if tape.fingerprint != self.fingerprint() {
            return Err(CoreError::TapeMismatch);
        }
        if dy.len() != self.output_dim() {
            return Err(CoreError::shape(
                "dense_backward",
                format!("upstream has length {}, layer outputs {}", dy.len(), self.output_dim()),
            ));
        }
        let da = self.activation.backprop(&tape.y, dy);
        let mut grads = DenseGrads {
            weight: Array2::zeros(self.weight.raw_dim()),
            bias: da.clone(),
        };
        add_outer(&mut grads.weight, &da, &tape.x);
        let dx = self.weight.t().dot(&da);
        Ok((grads, dx))
    }

    /// θ ← θ − scale·g. Callers fold learning rate and clipping into `scale`.
    pub fn apply_update(&mut self, grads: &DenseGrads, scale: f64) {
        self.weight.scaled_add(-scale, &grads.weight);
        self.bias.scaled_add(-scale, &grads.bias);
    }

    pub fn param_count(&self) -> usize {
        self.weight.len() + self.bias.len()
    }

    /// Parameters as one flat vector (weight row-major, then bias).
    pub fn flatten_into(&self, out: &mut Vec<f64>) {
        out.extend(self.weight.iter());
        out.extend(self.bias.iter());
    }

    /// Inverse of [`flatten_into`]; returns the unconsumed tail of `flat`.
    pub fn assign_flat<'a>(&mut self, flat: &'a [f64]) -> &'a [f64] {
        let nw = self.weight.len();
        for (dst, src) in self.weight.iter_mut().zip(&flat[..nw]) {
            *dst = *src;
        }
        let rest = &flat[nw..];
        let nb = self.bias.len();
        for (dst, src) in self.bias.iter_mut().zip(&rest[..nb]) {
            *dst = *src;
        }
        &rest[nb..]
    }
}

impl DenseGrads {
    pub fn zeros_like(layer: &DenseLayer) -> Self {
        DenseGrads {
            weight: Array2::zeros(layer.weight.raw_dim()),
            bias: Array1::zeros(layer.bias.raw_dim()),
        }
    }

    pub fn add(&mut self, other: &DenseGrads) {
        self.weight += &other.weight;
        self.bias += &other.bias;
    }

    pub fn scale(&mut self, s: f64) {
        self.weight *= s;
        self.bias *= s;
    }

    pub fn norm_sq(&self) -> f64 {
        self.weight.iter().map(|v| v * v).sum::<f64>() + self.bias.iter().map(|v| v * v).sum::<f64>()
    }

    /// Same fixed order as [`DenseLayer::flatten_into`].
    pub fn flatten_into(&self, out: &mut Vec<f64>) {
        out.extend(self.weight.iter());
        out.extend(self.bias.iter());
    }
}
