//! Swing dynamics on the reduced network and a fixed-step RK4 integrator.
//!
//! State layout: `[δ_0..δ_{m−1}, ω_0..ω_{m−1}]` with δ in radians and ω the
//! speed deviation in rad/s. Per machine:
//!
//! ```text
//! dδ_i/dt = ω_i
//! (2H_i/ω_s) dω_i/dt = Pm_i − Pe_i − D_i ω_i/ω_s
//! ```
//!
//! with Pe_i = Re(E_i · conj((Y_red E)_i)) from the reduced admittances.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use super::machine::MachineParams;

type C64 = Complex64;

pub struct SwingDynamics<'a> {
    pub machines: &'a [MachineParams],
    pub y_red: &'a DMatrix<C64>,
    /// Synchronous speed ω_s = 2π f_nominal, rad/s.
    pub omega_sync: f64,
}

impl<'a> SwingDynamics<'a> {
    pub fn machine_count(&self) -> usize {
        self.machines.len()
    }

    /// Electrical air-gap power per machine at the given rotor angles.
    pub fn electrical_power(&self, delta: &[f64]) -> Vec<f64> {
        let emf = DVector::from_iterator(
            self.machines.len(),
            self.machines
                .iter()
                .zip(delta)
                .map(|(m, &d)| C64::from_polar(m.internal_emf_magnitude, d)),
        );
        let current = self.y_red * &emf;
        emf.iter()
            .zip(current.iter())
            .map(|(e, i)| (e * i.conj()).re)
            .collect()
    }

    /// Time derivative of the full state vector.
    pub fn derivative(&self, state: &[f64], out: &mut [f64]) {
        let m = self.machines.len();
        debug_assert_eq!(state.len(), 2 * m);
        debug_assert_eq!(out.len(), 2 * m);
        let (delta, omega) = state.split_at(m);
        let pe = self.electrical_power(delta);
        for i in 0..m {
            out[i] = omega[i];
            let mach = &self.machines[i];
            let accel_power =
                mach.mechanical_power - pe[i] - mach.damping * omega[i] / self.omega_sync;
            out[m + i] = self.omega_sync / (2.0 * mach.inertia_constant) * accel_power;
        }
    }
}

/// One classical Runge–Kutta step of size `h`, in place.
pub fn rk4_step(f: &dyn Fn(&[f64], &mut [f64]), state: &mut [f64], h: f64) {
    let n = state.len();
    let mut k1 = vec![0.0; n];
    let mut k2 = vec![0.0; n];
    let mut k3 = vec![0.0; n];
    let mut k4 = vec![0.0; n];
    let mut tmp = vec![0.0; n];

    f(state, &mut k1);
    for i in 0..n {
        tmp[i] = state[i] + 0.5 * h * k1[i];
    }
    f(&tmp, &mut k2);
    for i in 0..n {
        tmp[i] = state[i] + 0.5 * h * k2[i];
    }
    f(&tmp, &mut k3);
    for i in 0..n {
        tmp[i] = state[i] + h * k3[i];
    }
    f(&tmp, &mut k4);
    for i in 0..n {
        state[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
    }
}
