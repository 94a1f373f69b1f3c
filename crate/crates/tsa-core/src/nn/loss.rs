//! Scalar losses with their gradients.

use ndarray::Array1;

use crate::error::{CoreError, Result};

/// Probabilities are clamped to [PROB_EPS, 1 − PROB_EPS] before any log.
pub const PROB_EPS: f64 = 1e-12;

pub fn clamp_prob(p: f64) -> f64 {
    p.clamp(PROB_EPS, 1.0 - PROB_EPS)
}

/// ln with the argument clamped away from zero.
pub fn ln_clamped(x: f64) -> f64 {
    x.max(PROB_EPS).ln()
}

/// Binary cross-entropy −[y ln p + (1−y) ln(1−p)] and its gradient in p.
pub fn bce_loss(p: f64, y: f64) -> (f64, f64) {
    let pc = clamp_prob(p);
    let loss = -(y * pc.ln() + (1.0 - y) * (1.0 - pc).ln());
    let grad = (pc - y) / (pc * (1.0 - pc));
    (loss, grad)
}

/// Mean squared error over elements and its gradient in `x_hat`.
pub fn mse_loss(x_hat: &Array1<f64>, x: &Array1<f64>) -> Result<(f64, Array1<f64>)> {
    if x_hat.len() != x.len() {
        return Err(CoreError::shape(
            "mse_loss",
            format!("x_hat has length {}, x has length {}", x_hat.len(), x.len()),
        ));
    }
    let n = x_hat.len() as f64;
    let diff = x_hat - x;
    let loss = diff.iter().map(|d| d * d).sum::<f64>() / n;
    let grad = diff.mapv(|d| 2.0 * d / n);
    Ok((loss, grad))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use ndarray::array;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha20Rng;

    #[test]
    fn bce_is_zero_on_confident_correct() {
        let (loss, _) = bce_loss(1.0, 1.0);
        assert_abs_diff_eq!(loss, 0.0, epsilon = 1e-11);
    }

    #[test]
    fn bce_at_half_is_ln_two() {
        let (loss, _) = bce_loss(0.5, 1.0);
        assert_abs_diff_eq!(loss, std::f64::consts::LN_2, epsilon = 1e-12);
        let (loss0, _) = bce_loss(0.5, 0.0);
        assert_abs_diff_eq!(loss0, std::f64::consts::LN_2, epsilon = 1e-12);
    }

    #[test]
    fn bce_clamp_keeps_loss_finite() {
        let (loss, grad) = bce_loss(1e-12, 1.0);
        assert!(loss.is_finite());
        assert!(grad.is_finite());
        let (loss, grad) = bce_loss(0.0, 1.0);
        assert!(loss.is_finite() && grad.is_finite());
    }

    #[test]
    fn mse_zero_on_equal_inputs() {
        let x = array![0.1, 0.9, 0.4];
        let (loss, grad) = mse_loss(&x, &x).unwrap();
        assert_eq!(loss, 0.0);
        assert_eq!(grad.sum(), 0.0);
    }

    #[test]
    fn mse_constant_offset_matches_square() {
        // uniform offset of 0.443 on every channel
        let x = array![0.2, 0.5, 0.7, 0.1];
        let x_hat = x.mapv(|v| v + 0.443);
        let (loss, _) = mse_loss(&x_hat, &x).unwrap();
        assert_abs_diff_eq!(loss, 0.443 * 0.443, epsilon = 1e-15);
        assert_abs_diff_eq!(loss, 0.1965, epsilon = 3e-4);
    }

    #[test]
    fn mse_matches_scalar_loop() {
        let mut rng = ChaCha20Rng::seed_from_u64(5);
        for _ in 0..20 {
            let a: Vec<f64> = (0..7).map(|_| rng.gen_range(-2.0..2.0)).collect();
            let b: Vec<f64> = (0..7).map(|_| rng.gen_range(-2.0..2.0)).collect();
            let (loss, _) = mse_loss(&Array1::from(a.clone()), &Array1::from(b.clone())).unwrap();
            let mut acc = 0.0;
            for i in 0..7 {
                acc += (a[i] - b[i]) * (a[i] - b[i]);
            }
            assert_abs_diff_eq!(loss, acc / 7.0, epsilon = 1e-14);
        }
    }

    #[test]
    fn mse_shape_mismatch_errors() {
        let err = mse_loss(&array![1.0], &array![1.0, 2.0]).unwrap_err();
        assert!(err.to_string().contains("length"));
    }
}
