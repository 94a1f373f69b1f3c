//! Adversarial loss bookkeeping.
//!
//! The discriminator minimizes −[ln D(x) + ln(1 − D(x̂))], the negation of
//! the value it maximizes in the minimax game. The generator total is the
//! adversarial term plus the squared prediction error plus the (negated,
//! minimized) classification cross-entropy; each component is reported
//! separately for the training curves.

use ndarray::Array1;

use crate::error::Result;
use crate::nn::loss::{bce_loss, ln_clamped, mse_loss};

pub fn discriminator_loss(d_real: f64, d_fake: f64) -> f64 {
    -(ln_clamped(d_real) + ln_clamped(1.0 - d_fake))
}

#[derive(Debug, Clone, Copy)]
pub struct GeneratorLossBreakdown {
    /// ln(1 − D(x̂)), or −ln D(x̂) in non-saturating mode.
    pub adversarial: f64,
    pub squared_error: f64,
    pub cross_entropy: f64,
    pub total: f64,
}

pub fn adversarial_term(d_fake: f64, non_saturating: bool) -> f64 {
    if non_saturating {
        -ln_clamped(d_fake)
    } else {
        ln_clamped(1.0 - d_fake)
    }
}

/// d(adversarial)/d(d_fake), matching [`adversarial_term`].
pub fn adversarial_grad(d_fake: f64, non_saturating: bool) -> f64 {
    let eps = crate::nn::loss::PROB_EPS;
    if non_saturating {
        -1.0 / d_fake.max(eps)
    } else {
        -1.0 / (1.0 - d_fake).max(eps)
    }
}

pub fn generator_loss(
    d_fake: f64,
    x_hat: &Array1<f64>,
    x_true: &Array1<f64>,
    p_stable: f64,
    y: u8,
    non_saturating: bool,
) -> Result<GeneratorLossBreakdown> {
    let adversarial = adversarial_term(d_fake, non_saturating);
    let (squared_error, _) = mse_loss(x_hat, x_true)?;
    let (cross_entropy, _) = bce_loss(p_stable, f64::from(y));
    Ok(GeneratorLossBreakdown {
        adversarial,
        squared_error,
        cross_entropy,
        total: adversarial + squared_error + cross_entropy,
    })
}
