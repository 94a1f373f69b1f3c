//! Shared helpers for the integration and acceptance suites.

#![allow(dead_code)]

use std::path::PathBuf;

use tsa_core::gridsim::{prepare_scenario, CaseFile, FaultLocation, ScenarioSpec};

pub fn cases_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../cases")
}

pub fn load_case(name: &str) -> CaseFile {
    CaseFile::load(&cases_dir().join(name)).expect("bundled case loads")
}

/// Equal-area construction for the bundled single-machine case: lossless,
/// undamped, bolted fault at the machine terminal (fault-on power is zero),
/// post-fault network equal to pre-fault.
pub struct EqualAreaOracle {
    pub p_max: f64,
    pub p_m: f64,
    pub delta_0: f64,
    pub delta_critical: f64,
    /// Critical clearing time, seconds after fault inception.
    pub t_critical: f64,
}

pub fn equal_area_oracle(case: &CaseFile) -> EqualAreaOracle {
    assert_eq!(case.machines.len(), 2, "oracle expects machine + fixed source");
    let spec = ScenarioSpec::from_case(case, 1.0, FaultLocation::Bus(1), 1.0);
    let prep = prepare_scenario(case, &spec).expect("prepare");

    let study = &prep.machines[0];
    let source = &prep.machines[1];
    assert!(source.inertia_constant.is_infinite());
    assert_eq!(study.damping, 0.0, "oracle requires an undamped machine");

    // series reactance between the internal EMFs, straight from the case
    let x_total: f64 = study.transient_reactance
        + case.branches.iter().map(|b| b.x).sum::<f64>()
        + source.transient_reactance;
    let p_max = study.internal_emf_magnitude * source.internal_emf_magnitude / x_total;
    let delta_0 = prep.delta0[0] - prep.delta0[1];
    let p_m = p_max * delta_0.sin();

    let delta_u = std::f64::consts::PI - (p_m / p_max).asin();
    let cos_dc = p_m / p_max * (delta_u - delta_0) + delta_u.cos();
    let delta_critical = cos_dc.acos();

    // fault-on: Pe = 0, so δ(t) = δ0 + ω_s·Pm·t²/(4H)
    let omega_s = 2.0 * std::f64::consts::PI * case.f_nominal_hz;
    let t_critical =
        ((delta_critical - delta_0) * 4.0 * study.inertia_constant / (omega_s * p_m)).sqrt();

    EqualAreaOracle {
        p_max,
        p_m,
        delta_0,
        delta_critical,
        t_critical,
    }
}
