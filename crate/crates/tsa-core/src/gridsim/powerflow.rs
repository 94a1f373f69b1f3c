//! Newton–Raphson AC power flow in polar form. Sized for the desk-scale
//! cases in this crate (tens of buses), not for production grids.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{CoreError, Result};

type C64 = Complex64;

#[derive(Debug, Clone, Copy)]
pub enum BusKind {
    /// Fixes voltage magnitude and angle (reference).
    Slack { v: f64 },
    /// Fixes net active injection and voltage magnitude.
    Pv { p: f64, v: f64 },
    /// Fixes net active and reactive injection (loads enter negative).
    Pq { p: f64, q: f64 },
}

#[derive(Debug, Clone)]
pub struct PowerFlowSolution {
    pub v: DVector<C64>,
    pub iterations: usize,
    /// Net calculated injections at the solution, per bus.
    pub p: Vec<f64>,
    pub q: Vec<f64>,
}

fn injections(y: &DMatrix<C64>, vm: &[f64], th: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let n = vm.len();
    let mut p = vec![0.0; n];
    let mut q = vec![0.0; n];
    for i in 0..n {
        let mut pi = 0.0;
        let mut qi = 0.0;
        for j in 0..n {
            let g = y[(i, j)].re;
            let b = y[(i, j)].im;
            let t = th[i] - th[j];
            pi += vm[j] * (g * t.cos() + b * t.sin());
            qi += vm[j] * (g * t.sin() - b * t.cos());
        }
        p[i] = vm[i] * pi;
        q[i] = vm[i] * qi;
    }
    (p, q)
}

/// Solve the power flow; `y` must not contain the constant-impedance load
/// models (loads enter as PQ injections here and are folded into the
/// admittance matrix afterwards by the caller).
pub fn solve_power_flow(
    y: &DMatrix<C64>,
    kinds: &[BusKind],
    tol: f64,
    max_iter: usize,
) -> Result<PowerFlowSolution> {
    let n = kinds.len();
    if y.nrows() != n || y.ncols() != n {
        return Err(CoreError::shape(
            "power_flow",
            format!("Y is {}x{}, expected {n}x{n}", y.nrows(), y.ncols()),
        ));
    }
    let slack_count = kinds.iter().filter(|k| matches!(k, BusKind::Slack { .. })).count();
    if slack_count != 1 {
        return Err(CoreError::Config(format!(
            "power flow needs exactly one slack bus, got {slack_count}"
        )));
    }

    let mut vm = vec![1.0; n];
    let mut th = vec![0.0; n];
    for (i, k) in kinds.iter().enumerate() {
        match *k {
            BusKind::Slack { v } | BusKind::Pv { v, .. } => vm[i] = v,
            BusKind::Pq { .. } => {}
        }
    }
    let ang_idx: Vec<usize> = (0..n)
        .filter(|&i| !matches!(kinds[i], BusKind::Slack { .. }))
        .collect();
    let mag_idx: Vec<usize> = (0..n)
        .filter(|&i| matches!(kinds[i], BusKind::Pq { .. }))
        .collect();
    let unknowns = ang_idx.len() + mag_idx.len();

    let spec_p = |i: usize| match kinds[i] {
        BusKind::Pv { p, .. } => p,
        BusKind::Pq { p, .. } => p,
        BusKind::Slack { .. } => 0.0,
    };
    let spec_q = |i: usize| match kinds[i] {
        BusKind::Pq { q, .. } => q,
        _ => 0.0,
    };

    let mut mismatch_max = f64::INFINITY;
    for iter in 0..max_iter {
        let (p, q) = injections(y, &vm, &th);
        let mut rhs = DVector::<f64>::zeros(unknowns);
        for (r, &i) in ang_idx.iter().enumerate() {
            rhs[r] = spec_p(i) - p[i];
        }
        for (r, &i) in mag_idx.iter().enumerate() {
            rhs[ang_idx.len() + r] = spec_q(i) - q[i];
        }
        mismatch_max = rhs.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
        if mismatch_max < tol {
            let v = DVector::from_iterator(
                n,
                (0..n).map(|i| C64::from_polar(vm[i], th[i])),
            );
            return Ok(PowerFlowSolution {
                v,
                iterations: iter,
                p,
                q,
            });
        }

        let mut jac = DMatrix::<f64>::zeros(unknowns, unknowns);
        for (r, &i) in ang_idx.iter().enumerate() {
            // dP_i/dθ_j and dP_i/dV_j
            for (cidx, &j) in ang_idx.iter().enumerate() {
                jac[(r, cidx)] = if i == j {
                    -q[i] - y[(i, i)].im * vm[i] * vm[i]
                } else {
                    let t = th[i] - th[j];
                    vm[i] * vm[j] * (y[(i, j)].re * t.sin() - y[(i, j)].im * t.cos())
                };
            }
            for (cidx, &j) in mag_idx.iter().enumerate() {
                jac[(r, ang_idx.len() + cidx)] = if i == j {
                    p[i] / vm[i] + y[(i, i)].re * vm[i]
                } else {
                    let t = th[i] - th[j];
                    vm[i] * (y[(i, j)].re * t.cos() + y[(i, j)].im * t.sin())
                };
            }
        }
        for (ridx, &i) in mag_idx.iter().enumerate() {
            let r = ang_idx.len() + ridx;
            // dQ_i/dθ_j and dQ_i/dV_j
            for (cidx, &j) in ang_idx.iter().enumerate() {
                jac[(r, cidx)] = if i == j {
                    p[i] - y[(i, i)].re * vm[i] * vm[i]
                } else {
                    let t = th[i] - th[j];
                    -vm[i] * vm[j] * (y[(i, j)].re * t.cos() + y[(i, j)].im * t.sin())
                };
            }
            for (cidx, &j) in mag_idx.iter().enumerate() {
                jac[(r, ang_idx.len() + cidx)] = if i == j {
                    q[i] / vm[i] - y[(i, i)].im * vm[i]
                } else {
                    let t = th[i] - th[j];
                    vm[i] * (y[(i, j)].re * t.sin() - y[(i, j)].im * t.cos())
                };
            }
        }

        let step = jac
            .lu()
            .solve(&rhs)
            .ok_or(CoreError::DegenerateNetwork)?;
        for (r, &i) in ang_idx.iter().enumerate() {
            th[i] += step[r];
        }
        for (r, &i) in mag_idx.iter().enumerate() {
            vm[i] += step[ang_idx.len() + r];
        }
    }
    Err(CoreError::PowerFlowDiverged {
        iterations: max_iter,
        mismatch: mismatch_max,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn line(y: &mut DMatrix<C64>, a: usize, b: usize, r: f64, x: f64) {
        let yl = 1.0 / C64::new(r, x);
        y[(a, a)] += yl;
        y[(b, b)] += yl;
        y[(a, b)] -= yl;
        y[(b, a)] -= yl;
    }

    #[test]
    fn two_bus_case_matches_hand_solution() {
        // slack at 1.0∠0 feeding a PQ load through jx = j0.1
        let mut y = DMatrix::<C64>::zeros(2, 2);
        line(&mut y, 0, 1, 0.0, 0.1);
        let kinds = [
            BusKind::Slack { v: 1.0 },
            BusKind::Pq { p: -0.5, q: -0.2 },
        ];
        let sol = solve_power_flow(&y, &kinds, 1e-12, 30).unwrap();

        // hand phasor solution: the current into the load bus is
        // I = conj(S_load/V2) and V2 = V1 − jx·I; iterate the fixed point
        // to high precision as an oracle
        let s_load = C64::new(0.5, 0.2);
        let mut v2 = C64::new(1.0, 0.0);
        for _ in 0..200 {
            let i = (s_load / v2).conj();
            v2 = C64::new(1.0, 0.0) - C64::new(0.0, 0.1) * i;
        }
        assert_abs_diff_eq!(sol.v[1].re, v2.re, epsilon = 1e-9);
        assert_abs_diff_eq!(sol.v[1].im, v2.im, epsilon = 1e-9);
    }

    #[test]
    fn injections_balance_at_solution() {
        let mut y = DMatrix::<C64>::zeros(3, 3);
        line(&mut y, 0, 1, 0.01, 0.08);
        line(&mut y, 1, 2, 0.02, 0.15);
        line(&mut y, 0, 2, 0.015, 0.12);
        let kinds = [
            BusKind::Slack { v: 1.02 },
            BusKind::Pv { p: 0.4, v: 1.01 },
            BusKind::Pq { p: -0.9, q: -0.3 },
        ];
        let sol = solve_power_flow(&y, &kinds, 1e-11, 30).unwrap();
        // PV and PQ injections honored
        assert_abs_diff_eq!(sol.p[1], 0.4, epsilon = 1e-9);
        assert_abs_diff_eq!(sol.p[2], -0.9, epsilon = 1e-9);
        assert_abs_diff_eq!(sol.q[2], -0.3, epsilon = 1e-9);
        // total generation covers load plus losses (losses are positive here)
        let losses: f64 = sol.p.iter().sum();
        assert!(losses > 0.0 && losses < 0.05, "losses {losses}");
    }

    #[test]
    fn two_slacks_rejected() {
        let y = DMatrix::<C64>::zeros(2, 2);
        let kinds = [BusKind::Slack { v: 1.0 }, BusKind::Slack { v: 1.0 }];
        assert!(solve_power_flow(&y, &kinds, 1e-9, 10).is_err());
    }
}
