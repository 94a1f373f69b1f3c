//! Elementwise activations and their backward rules.

use ndarray::Array1;
use serde::{Deserialize, Serialize};

pub fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Numerically safe softmax (max-subtracted).
pub fn softmax(z: &Array1<f64>) -> Array1<f64> {
    let m = z.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let e = z.mapv(|v| (v - m).exp());
    let s = e.sum();
    e / s
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    Identity,
    Sigmoid,
    Tanh,
    Softmax,
}

impl Activation {
    pub fn apply(self, a: Array1<f64>) -> Array1<f64> {
        match self {
            Activation::Identity => a,
            Activation::Sigmoid => a.mapv(sigmoid),
            Activation::Tanh => a.mapv(f64::tanh),
            Activation::Softmax => softmax(&a),
        }
    }

    /// Pull a gradient on the activation output back to the pre-activation,
    /// using only the cached output `y`.
    pub fn backprop(self, y: &Array1<f64>, dy: &Array1<f64>) -> Array1<f64> {
        match self {
            Activation::Identity => dy.clone(),
            Activation::Sigmoid => y * &(1.0 - y) * dy,
            Activation::Tanh => (1.0 - y * y) * dy,
            Activation::Softmax => {
                let dot = dy.dot(y);
                y * &(dy - dot)
            }
        }
    }

    pub fn tag(self) -> &'static str {
        match self {
            Activation::Identity => "identity",
            Activation::Sigmoid => "sigmoid",
            Activation::Tanh => "tanh",
            Activation::Softmax => "softmax",
        }
    }

    pub fn from_tag(tag: &str) -> Option<Self> {
        match tag {
            "identity" => Some(Activation::Identity),
            "sigmoid" => Some(Activation::Sigmoid),
            "tanh" => Some(Activation::Tanh),
            "softmax" => Some(Activation::Softmax),
            _ => None,
        }
    }
}
