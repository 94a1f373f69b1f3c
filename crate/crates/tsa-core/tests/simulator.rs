//! Simulator-level oracles on the bundled cases: equal-area agreement,
//! RK4 order of convergence, and reduction consistency.

mod common;

use nalgebra::DVector;
use num_complex::Complex64;
use tsa_core::gridsim::{
    prepare_scenario, run_transient, FaultLocation, ScenarioSpec, TopologyPhase,
};

use common::{equal_area_oracle, load_case};

#[test]
fn smib_labels_agree_with_equal_area_sweep() {
    let case = load_case("smib.toml");
    let oracle = equal_area_oracle(&case);
    assert!(
        oracle.t_critical > 0.05 && oracle.t_critical < 0.6,
        "unexpected critical time {}",
        oracle.t_critical
    );

    let mut spec = ScenarioSpec::from_case(&case, 1.0, FaultLocation::Bus(1), 1.0);
    let prep = prepare_scenario(&case, &spec).unwrap();

    let mut disagreements = Vec::new();
    for k in 0..20 {
        let t_clear = oracle.t_critical * (0.4 + 1.2 * k as f64 / 19.0);
        spec.fault_duration_cycles = t_clear * case.f_nominal_hz;
        let traj = run_transient(&prep, &spec, false).unwrap();
        let expect_stable = t_clear <= oracle.t_critical;
        if (traj.label == 1) != expect_stable {
            disagreements.push((t_clear, traj.label, traj.eta));
        }
    }
    assert!(
        disagreements.is_empty(),
        "equal-area disagreements at {disagreements:?} (t_cr = {})",
        oracle.t_critical
    );
}

#[test]
fn smib_stable_case_swings_bounded_unstable_runs_away() {
    let case = load_case("smib.toml");
    let oracle = equal_area_oracle(&case);
    let mut spec = ScenarioSpec::from_case(&case, 1.0, FaultLocation::Bus(1), 1.0);
    let prep = prepare_scenario(&case, &spec).unwrap();

    spec.fault_duration_cycles = 0.8 * oracle.t_critical * case.f_nominal_hz;
    let stable = run_transient(&prep, &spec, false).unwrap();
    assert_eq!(stable.label, 1);
    // bounded swing: the machine never passes the unstable equilibrium
    let max_rel = stable
        .angles_rel_deg
        .column(1)
        .iter()
        .fold(0.0_f64, |m, &a| m.max(a.abs()));
    assert!(max_rel < 180.0, "stable swing reached {max_rel} deg");

    spec.fault_duration_cycles = 1.2 * oracle.t_critical * case.f_nominal_hz;
    let unstable = run_transient(&prep, &spec, false).unwrap();
    assert_eq!(unstable.label, 0);
    // monotone runaway after clearing: relative angle keeps growing
    let col = unstable.angles_rel_deg.column(0);
    let rel: Vec<f64> = unstable
        .angles_rel_deg
        .rows()
        .into_iter()
        .map(|r| r[0] - r[1])
        .collect();
    let late = &rel[unstable.measured_row..];
    assert!(late.last().unwrap().abs() > 360.0);
    let _ = col;
}

#[test]
fn rk4_halving_shows_fourth_order_convergence() {
    // boundaries and samples aligned to every step size under test
    let case = load_case("nine_bus.toml");
    let mut spec = ScenarioSpec::from_case(&case, 1.0, FaultLocation::Bus(7), 6.0);
    spec.fault_start = 0.1;
    spec.horizon = 0.5;
    spec.sample_rate = 100.0;

    let final_angles = |h: f64| {
        let mut s = spec.clone();
        s.time_step = h;
        let prep = prepare_scenario(&case, &s).unwrap();
        let traj = run_transient(&prep, &s, false).unwrap();
        traj.angles_rel_deg.row(traj.angles_rel_deg.nrows() - 1).to_owned()
    };

    let reference = final_angles(1e-5);
    let err = |h: f64| {
        let a = final_angles(h);
        a.iter()
            .zip(reference.iter())
            .fold(0.0_f64, |m, (x, r)| m.max((x - r).abs()))
    };
    let e2 = err(2e-3);
    let e1 = err(1e-3);
    let ratio = e2 / e1;
    assert!(
        (12.0..=20.0).contains(&ratio),
        "error ratio {ratio} outside O(h^4) band (e2 = {e2:.3e}, e1 = {e1:.3e})"
    );
}

#[test]
fn reduction_and_recovery_match_direct_full_solution() {
    let case = load_case("nine_bus.toml");
    let spec = ScenarioSpec::from_case(&case, 1.0, FaultLocation::Bus(8), 5.0);
    let prep = prepare_scenario(&case, &spec).unwrap();

    // arbitrary off-equilibrium angles
    let delta: Vec<f64> = prep
        .delta0
        .iter()
        .enumerate()
        .map(|(i, d)| d + 0.1 * (i as f64 + 1.0))
        .collect();
    let emf = DVector::from_iterator(
        prep.machines.len(),
        prep.machines
            .iter()
            .zip(&delta)
            .map(|(m, &d)| Complex64::from_polar(m.internal_emf_magnitude, d)),
    );

    let v_recovered = prep.pre.bus_voltages(&emf).unwrap();

    // direct route: assemble the bus equations independently and solve dense
    let n = prep.network.bus_count;
    let mut y_bb = prep.network.matrix(TopologyPhase::PreFault).clone();
    let mut rhs = DVector::<Complex64>::zeros(n);
    for (i, mach) in prep.machines.iter().enumerate() {
        let g = prep.network.generator_buses[i];
        let y = Complex64::new(0.0, -1.0 / mach.transient_reactance);
        y_bb[(g, g)] += y;
        rhs[g] += y * emf[i];
    }
    let v_direct = y_bb.lu().solve(&rhs).unwrap();

    for i in 0..n {
        assert!(
            (v_recovered[i] - v_direct[i]).norm() < 1e-9,
            "bus {i}: {} vs {}",
            v_recovered[i],
            v_direct[i]
        );
    }
}
