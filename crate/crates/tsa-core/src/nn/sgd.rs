//! Plain gradient-descent bookkeeping shared by the networks.
//!
//! The actual parameter updates live on the layer types
//! (`apply_update`); this module supplies global-norm clipping and the
//! skip-on-nonfinite policy.

/// Result of one attempted update.
#[derive(Debug, Clone, Copy)]
pub struct SgdOutcome {
    /// False when the gradient was non-finite and the update was skipped.
    pub applied: bool,
    pub grad_norm: f64,
    /// Factor in (0, 1] applied to the gradient; 1 when no clipping fired.
    pub clip_scale: f64,
}

/// Scale factor so the global gradient norm does not exceed `clip_norm`.
pub fn clip_scale(norm_sq: f64, clip_norm: Option<f64>) -> f64 {
    match clip_norm {
        Some(c) if norm_sq > c * c => c / norm_sq.sqrt(),
        _ => 1.0,
    }
}

/// Decide an update from a global gradient norm. Non-finite gradients are
/// skipped rather than applied.
pub fn plan_update(norm_sq: f64, clip_norm: Option<f64>) -> SgdOutcome {
    if !norm_sq.is_finite() {
        return SgdOutcome {
            applied: false,
            grad_norm: f64::NAN,
            clip_scale: 0.0,
        };
    }
    let scale = clip_scale(norm_sq, clip_norm);
    SgdOutcome {
        applied: true,
        grad_norm: norm_sq.sqrt(),
        clip_scale: scale,
    }
}
