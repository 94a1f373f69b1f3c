//! Rotor-angle stability index and binary labeling.

use ndarray::ArrayView2;

use crate::error::{CoreError, Result};

/// Integration aborts once any |δ| exceeds this many degrees; the event is
/// marked unstable.
pub const ANGLE_GUARD_DEG: f64 = 1e4;

/// Maximum over time and machine pairs of |δ_i − δ_j| (degrees).
/// Rows are time samples of the post-fault window, columns machines.
pub fn max_angle_spread(angles_deg: ArrayView2<f64>) -> Result<f64> {
    if angles_deg.ncols() < 2 {
        return Err(CoreError::UndefinedIndex(angles_deg.ncols()));
    }
    if angles_deg.nrows() == 0 {
        return Err(CoreError::EmptyWindow);
    }
    let mut spread: f64 = 0.0;
    for row in angles_deg.rows() {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for &a in row {
            lo = lo.min(a);
            hi = hi.max(a);
        }
        spread = spread.max(hi - lo);
    }
    Ok(spread)
}

/// η = (360° − Δσ_max) / (360° + Δσ_max), in (−1, 1].
pub fn stability_index(post_fault_angles_deg: ArrayView2<f64>) -> Result<f64> {
    let spread = max_angle_spread(post_fault_angles_deg)?;
    Ok(eta_from_spread(spread))
}

pub fn eta_from_spread(spread_deg: f64) -> f64 {
    (360.0 - spread_deg) / (360.0 + spread_deg)
}

/// 1 = stable (η > 0), 0 = unstable (η ≤ 0).
pub fn label(eta: f64) -> u8 {
    u8::from(eta > 0.0)
}
