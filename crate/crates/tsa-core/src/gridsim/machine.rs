//! Classical second-order machine model: constant EMF magnitude behind a
//! transient reactance.

use crate::error::{CoreError, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct MachineParams {
    /// H, seconds on system base.
    pub inertia_constant: f64,
    /// D, per-unit torque per per-unit speed deviation.
    pub damping: f64,
    /// x'd, per-unit.
    pub transient_reactance: f64,
    /// Pm, per-unit; set so the pre-fault state is an exact equilibrium.
    pub mechanical_power: f64,
    /// |E|, per-unit.
    pub internal_emf_magnitude: f64,
}

impl MachineParams {
    pub fn new(
        inertia_constant: f64,
        damping: f64,
        transient_reactance: f64,
        mechanical_power: f64,
        internal_emf_magnitude: f64,
    ) -> Result<Self> {
        if !(inertia_constant > 0.0) {
            return Err(CoreError::Config(format!(
                "machine inertia must be positive, got {inertia_constant}"
            )));
        }
        if !(transient_reactance > 0.0) {
            return Err(CoreError::Config(format!(
                "machine transient reactance must be positive, got {transient_reactance}"
            )));
        }
        if !(mechanical_power >= 0.0) {
            return Err(CoreError::Config(format!(
                "machine mechanical power must be non-negative, got {mechanical_power}"
            )));
        }
        Ok(MachineParams {
            inertia_constant,
            damping,
            transient_reactance,
            mechanical_power,
            internal_emf_magnitude,
        })
    }
}
