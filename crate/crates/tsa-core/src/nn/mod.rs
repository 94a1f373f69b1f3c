//! Minimal differentiable kernel: dense and GRU layers with hand-derived
//! backpropagation, losses, a plain-SGD update with global-norm clipping,
//! and a finite-difference gradient checker. Everything is `f64`.

pub mod activation;
pub mod dense;
pub mod gradcheck;
pub mod gru;
pub mod loss;
pub mod sgd;
pub mod tensor_file;

pub use activation::Activation;
pub use dense::{DenseGrads, DenseLayer, DenseTape};
pub use gradcheck::{central_diff, grad_check, GradCheckReport};
pub use gru::{GruGrads, GruLayer, GruTape};
pub use loss::{bce_loss, mse_loss, PROB_EPS};
pub use sgd::{clip_scale, SgdOutcome};
pub use tensor_file::{read_tensors, write_tensors, TensorData};

use ndarray::{Array1, Array2};

/// g += a ⊗ b (rank-one update), accumulated in place.
pub(crate) fn add_outer(g: &mut Array2<f64>, a: &Array1<f64>, b: &Array1<f64>) {
    for (i, &ai) in a.iter().enumerate() {
        if ai == 0.0 {
            continue;
        }
        let mut row = g.row_mut(i);
        for (j, &bj) in b.iter().enumerate() {
            row[j] += ai * bj;
        }
    }
}
