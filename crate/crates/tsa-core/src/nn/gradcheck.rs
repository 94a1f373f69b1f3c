//! Central-finite-difference gradient checking.

/// Outcome of comparing an analytic gradient against central differences.
#[derive(Debug, Clone)]
pub struct GradCheckReport {
    pub max_rel_err: f64,
    pub worst_index: Option<usize>,
    pub checked: usize,
    pub tolerance: f64,
}

impl GradCheckReport {
    pub fn pass(&self) -> bool {
        self.max_rel_err <= self.tolerance
    }
}

/// Central difference (f(x+ε) − f(x−ε)) / 2ε for every coordinate.
pub fn central_diff<F: FnMut(&[f64]) -> f64>(mut f: F, x0: &[f64], eps: f64) -> Vec<f64> {
    let mut x = x0.to_vec();
    let mut grad = vec![0.0; x0.len()];
    for i in 0..x0.len() {
        let orig = x[i];
        x[i] = orig + eps;
        let plus = f(&x);
        x[i] = orig - eps;
        let minus = f(&x);
        x[i] = orig;
        grad[i] = (plus - minus) / (2.0 * eps);
    }
    grad
}

/// Relative error |a − n| / max(1e-6, |a| + |n|), elementwise max.
pub fn compare(analytic: &[f64], numeric: &[f64], tolerance: f64) -> GradCheckReport {
    assert_eq!(analytic.len(), numeric.len(), "gradient lengths differ");
    let mut max_rel = 0.0;
    let mut worst = None;
    for (i, (&a, &n)) in analytic.iter().zip(numeric.iter()).enumerate() {
        let rel = (a - n).abs() / (a.abs() + n.abs()).max(1e-6);
        if rel > max_rel {
            max_rel = rel;
            worst = Some(i);
        }
    }
    GradCheckReport {
        max_rel_err: max_rel,
        worst_index: worst,
        checked: analytic.len(),
        tolerance,
    }
}

/// Evaluate `f` by central differences around `x0` and compare with the
/// analytic gradient.
pub fn grad_check<F: FnMut(&[f64]) -> f64>(
    f: F,
    x0: &[f64],
    analytic: &[f64],
    eps: f64,
    tolerance: f64,
) -> GradCheckReport {
    let numeric = central_diff(f, x0, eps);
    compare(analytic, &numeric, tolerance)
}
