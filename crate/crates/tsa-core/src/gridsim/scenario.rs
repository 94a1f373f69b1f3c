//! Scenario preparation (pre-fault power flow, load folding, internal EMFs)
//! and fixed-step RK4 integration across the three topology phases.

use nalgebra::{DMatrix, DVector};
use ndarray::Array2;
use num_complex::Complex64;

use super::case::CaseFile;
use super::machine::MachineParams;
use super::network::{reduce_phase, NetworkModel, PhaseSolution, TopologyPhase};
use super::powerflow::{solve_power_flow, BusKind};
use super::stability::{eta_from_spread, label, max_angle_spread, ANGLE_GUARD_DEG};
use super::swing::{rk4_step, SwingDynamics};
use crate::error::{CoreError, Result};

type C64 = Complex64;

const POWER_FLOW_TOL: f64 = 1e-10;
const POWER_FLOW_MAX_ITER: usize = 50;

#[derive(Debug, Clone, PartialEq)]
pub enum FaultLocation {
    /// Bolted three-phase fault at a bus (1-based id).
    Bus(usize),
    /// Bolted fault at a fractional position along a line, measured from
    /// `from` (1-based ids).
    Line { from: usize, to: usize, position: f64 },
}

impl FaultLocation {
    pub fn describe(&self) -> String {
        match self {
            FaultLocation::Bus(id) => format!("bus{id}"),
            FaultLocation::Line { from, to, position } => {
                format!("ln{from}-{to}p{:02}", (position * 100.0).round() as u32)
            }
        }
    }
}

#[derive(Debug, Clone)]
pub struct ScenarioSpec {
    pub loading_factor: f64,
    pub fault: FaultLocation,
    /// Seconds from simulation start.
    pub fault_start: f64,
    /// Cycles at nominal frequency.
    pub fault_duration_cycles: f64,
    pub time_step: f64,
    pub horizon: f64,
    /// 1-based bus ids.
    pub pmu_buses: Vec<usize>,
    /// Frames per second.
    pub sample_rate: f64,
}

impl ScenarioSpec {
    pub fn from_case(case: &CaseFile, loading_factor: f64, fault: FaultLocation, duration_cycles: f64) -> Self {
        ScenarioSpec {
            loading_factor,
            fault,
            fault_start: case.defaults.fault_start,
            fault_duration_cycles: duration_cycles,
            time_step: case.defaults.time_step,
            horizon: case.defaults.horizon,
            pmu_buses: case.pmu_bus_ids(),
            sample_rate: case.defaults.sample_rate,
        }
    }

    pub fn validate(&self, case: &CaseFile) -> Result<()> {
        if !(self.fault_start >= 0.0) {
            return Err(CoreError::Config("fault_start must be >= 0".into()));
        }
        if !(self.fault_duration_cycles > 0.0) {
            return Err(CoreError::Config("fault_duration must be positive".into()));
        }
        if !(self.sample_rate > 0.0) {
            return Err(CoreError::Config("sample_rate must be positive".into()));
        }
        if !(self.time_step > 0.0 && self.horizon > self.time_step) {
            return Err(CoreError::Config("time_step/horizon are inconsistent".into()));
        }
        if self.pmu_buses.is_empty() {
            return Err(CoreError::Config("pmu_buses must be nonempty".into()));
        }
        for &id in &self.pmu_buses {
            case.bus_index(id)?;
        }
        match &self.fault {
            FaultLocation::Bus(id) => {
                case.bus_index(*id)?;
            }
            FaultLocation::Line { from, to, position } => {
                case.bus_index(*from)?;
                case.bus_index(*to)?;
                if !(*position > 0.0 && *position < 1.0) {
                    return Err(CoreError::Config(format!(
                        "line fault position {position} must lie strictly inside (0, 1)"
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn clear_time(&self, f_nominal_hz: f64) -> f64 {
        self.fault_start + self.fault_duration_cycles / f_nominal_hz
    }
}

/// Everything about a (loading, fault location) pair that does not depend on
/// the fault duration, so duration sweeps reuse one preparation.
pub struct PreparedScenario {
    pub machines: Vec<MachineParams>,
    pub network: NetworkModel,
    pub delta0: Vec<f64>,
    pub pre: PhaseSolution,
    pub fault_on: PhaseSolution,
    pub post: PhaseSolution,
    /// 0-based bus indices for the PMU channels, in `pmu_buses` order.
    pub pmu_channels: Vec<usize>,
    pub omega_sync: f64,
    pub f_nominal_hz: f64,
}

struct EffBranch {
    from: usize,
    to: usize,
    r: f64,
    x: f64,
    b: f64,
}

fn admittance_from_branches(n: usize, branches: &[EffBranch]) -> DMatrix<C64> {
    let mut y = DMatrix::<C64>::zeros(n, n);
    for br in branches {
        let ys = 1.0 / C64::new(br.r, br.x);
        let ysh = C64::new(0.0, br.b / 2.0);
        y[(br.from, br.from)] += ys + ysh;
        y[(br.to, br.to)] += ys + ysh;
        y[(br.from, br.to)] -= ys;
        y[(br.to, br.from)] -= ys;
    }
    y
}

pub fn prepare_scenario(case: &CaseFile, spec: &ScenarioSpec) -> Result<PreparedScenario> {
    spec.validate(case)?;
    let n_base = case.bus_count();
    let lambda = spec.loading_factor;

    // Effective topology: a line fault splits the branch at the fault
    // position with a virtual midpoint bus that is grounded while the fault
    // is on. Pre- and post-fault matrices are electrically identical to the
    // original line.
    let mut branches: Vec<EffBranch> = Vec::with_capacity(case.branches.len() + 1);
    let faulted_bus;
    let mut bus_count = n_base;
    match &spec.fault {
        FaultLocation::Bus(id) => {
            faulted_bus = Some(case.bus_index(*id)?);
            for br in &case.branches {
                branches.push(EffBranch {
                    from: case.bus_index(br.from)?,
                    to: case.bus_index(br.to)?,
                    r: br.r,
                    x: br.x,
                    b: br.b,
                });
            }
        }
        FaultLocation::Line { from, to, position } => {
            let fi = case.bus_index(*from)?;
            let ti = case.bus_index(*to)?;
            let mut split_done = false;
            for br in &case.branches {
                let bf = case.bus_index(br.from)?;
                let bt = case.bus_index(br.to)?;
                let forward = bf == fi && bt == ti;
                let reverse = bf == ti && bt == fi;
                if !split_done && (forward || reverse) {
                    let p = if forward { *position } else { 1.0 - *position };
                    let mid = n_base;
                    branches.push(EffBranch { from: bf, to: mid, r: br.r * p, x: br.x * p, b: br.b * p });
                    branches.push(EffBranch { from: mid, to: bt, r: br.r * (1.0 - p), x: br.x * (1.0 - p), b: br.b * (1.0 - p) });
                    split_done = true;
                } else {
                    branches.push(EffBranch { from: bf, to: bt, r: br.r, x: br.x, b: br.b });
                }
            }
            if !split_done {
                return Err(CoreError::Config(format!(
                    "fault line {from}-{to} is not a branch of the case"
                )));
            }
            bus_count = n_base + 1;
            faulted_bus = Some(n_base);
        }
    }

    let y_branch = admittance_from_branches(bus_count, &branches);

    // pre-fault power flow: loads as PQ injections, machines PV, one slack
    let mut kinds = vec![BusKind::Pq { p: 0.0, q: 0.0 }; bus_count];
    for (i, bus) in case.buses.iter().enumerate() {
        kinds[i] = BusKind::Pq {
            p: -lambda * bus.load_p,
            q: -lambda * bus.load_q,
        };
    }
    for m in &case.machines {
        let b = case.bus_index(m.bus)?;
        let load = &case.buses[b];
        let p_inj = lambda * (m.dispatch_p - load.load_p);
        kinds[b] = if m.slack {
            BusKind::Slack { v: m.voltage_setpoint }
        } else {
            BusKind::Pv { p: p_inj, v: m.voltage_setpoint }
        };
    }
    let pf = solve_power_flow(&y_branch, &kinds, POWER_FLOW_TOL, POWER_FLOW_MAX_ITER)?;

    // fold constant-impedance loads into the bus diagonals
    let mut load_admittances = vec![C64::new(0.0, 0.0); bus_count];
    let mut y_loaded = y_branch.clone();
    for (i, bus) in case.buses.iter().enumerate() {
        if bus.load_p != 0.0 || bus.load_q != 0.0 {
            let vm2 = pf.v[i].norm_sqr();
            let y = C64::new(lambda * bus.load_p, -lambda * bus.load_q) / vm2;
            load_admittances[i] = y;
            y_loaded[(i, i)] += y;
        }
    }

    // internal EMFs behind the transient reactances
    let mut machines = Vec::with_capacity(case.machines.len());
    let mut delta0 = Vec::with_capacity(case.machines.len());
    let mut generator_buses = Vec::with_capacity(case.machines.len());
    for m in &case.machines {
        let b = case.bus_index(m.bus)?;
        let load = &case.buses[b];
        let s_gen = C64::new(
            pf.p[b] + lambda * load.load_p,
            pf.q[b] + lambda * load.load_q,
        );
        let v = pf.v[b];
        let current = (s_gen / v).conj();
        let emf = v + C64::new(0.0, m.xd_transient) * current;
        machines.push(MachineParams::new(
            m.inertia,
            m.damping,
            m.xd_transient,
            0.0, // provisional; replaced by the reduced-network equilibrium value
            emf.norm(),
        )?);
        delta0.push(emf.arg());
        generator_buses.push(b);
    }

    let network = NetworkModel {
        bus_count,
        y_pre: y_loaded.clone(),
        y_fault: y_loaded.clone(),
        y_post: y_loaded,
        faulted_bus,
        generator_buses,
        load_admittances,
    };

    let pre = reduce_phase(&network, &machines, TopologyPhase::PreFault)?;
    let fault_on = reduce_phase(&network, &machines, TopologyPhase::FaultOn)?;
    let post = reduce_phase(&network, &machines, TopologyPhase::PostFault)?;

    // Pm from the reduced pre-fault network so the initial derivative is
    // exactly zero.
    let omega_sync = 2.0 * std::f64::consts::PI * case.f_nominal_hz;
    let pe0 = SwingDynamics {
        machines: &machines,
        y_red: &pre.y_red,
        omega_sync,
    }
    .electrical_power(&delta0);
    for (machine, pe) in machines.iter_mut().zip(&pe0) {
        if machine.inertia_constant.is_infinite() {
            // fixed source: the swing equation is inert (1/2H = 0), so the
            // mechanical power never enters the dynamics
            machine.mechanical_power = 0.0;
            continue;
        }
        if *pe < -1e-9 {
            return Err(CoreError::Config(format!(
                "machine equilibrium requires negative mechanical power {pe:.4}; motoring is unsupported"
            )));
        }
        machine.mechanical_power = pe.max(0.0);
    }

    let pmu_channels = spec
        .pmu_buses
        .iter()
        .map(|&id| case.bus_index(id))
        .collect::<Result<Vec<_>>>()?;

    Ok(PreparedScenario {
        machines,
        network,
        delta0,
        pre,
        fault_on,
        post,
        pmu_channels,
        omega_sync,
        f_nominal_hz: case.f_nominal_hz,
    })
}

/// Post-fault trajectory sampled at the PMU rate.
pub struct Trajectory {
    /// Rotor angles in degrees relative to machine 1, samples × machines.
    pub angles_rel_deg: Array2<f64>,
    /// |V| per PMU channel, samples × channels; `None` for label-only runs.
    pub voltages: Option<Array2<f64>>,
    /// First sample index at or after fault clearing.
    pub measured_row: usize,
    /// True when the angle guard stopped the run early.
    pub truncated: bool,
    pub eta: f64,
    pub label: u8,
}

fn phase_at(t: f64, fault_start: f64, clear: f64) -> TopologyPhase {
    if t < fault_start - 1e-12 {
        TopologyPhase::PreFault
    } else if t < clear - 1e-12 {
        TopologyPhase::FaultOn
    } else {
        TopologyPhase::PostFault
    }
}

/// Integrate one prepared scenario. Fault duration and sampling come from
/// `spec`; everything else was baked into `prep`.
pub fn run_transient(prep: &PreparedScenario, spec: &ScenarioSpec, with_voltages: bool) -> Result<Trajectory> {
    let m = prep.machines.len();
    let clear = spec.clear_time(prep.f_nominal_hz);
    let guard_rad = ANGLE_GUARD_DEG.to_radians();

    let sample_count = (spec.horizon * spec.sample_rate).floor() as usize + 1;
    let measured_row = (clear * spec.sample_rate - 1e-9).ceil() as usize;

    let mut state: Vec<f64> = prep.delta0.iter().cloned().chain(std::iter::repeat(0.0).take(m)).collect();
    let mut angles: Vec<f64> = Vec::with_capacity(sample_count * m);
    let mut volts: Vec<f64> = Vec::with_capacity(if with_voltages {
        sample_count * prep.pmu_channels.len()
    } else {
        0
    });
    let mut truncated = false;
    let mut rows = 0usize;

    let record = |state: &[f64], t: f64, volts: &mut Vec<f64>, angles: &mut Vec<f64>| -> Result<()> {
        let delta = &state[..m];
        let ref0 = delta[0];
        for &d in delta {
            angles.push((d - ref0).to_degrees());
        }
        if with_voltages {
            let phase = phase_at(t, spec.fault_start, clear);
            let sol = match phase {
                TopologyPhase::PreFault => &prep.pre,
                TopologyPhase::FaultOn => &prep.fault_on,
                TopologyPhase::PostFault => &prep.post,
            };
            let emf = DVector::from_iterator(
                m,
                prep.machines
                    .iter()
                    .zip(delta)
                    .map(|(mc, &d)| C64::from_polar(mc.internal_emf_magnitude, d)),
            );
            let v = sol.bus_voltages(&emf)?;
            for &ch in &prep.pmu_channels {
                volts.push(v[ch].norm());
            }
        }
        Ok(())
    };

    record(&state, 0.0, &mut volts, &mut angles)?;
    rows += 1;

    let mut t = 0.0_f64;
    'samples: for k in 1..sample_count {
        let target = k as f64 / spec.sample_rate;
        while t < target - 1e-12 {
            // segments never cross a topology boundary
            let mut seg_end = target;
            if t < spec.fault_start - 1e-12 && spec.fault_start < seg_end {
                seg_end = spec.fault_start;
            }
            if t < clear - 1e-12 && clear < seg_end && t >= spec.fault_start - 1e-12 {
                seg_end = clear;
            }
            let phase = phase_at(t, spec.fault_start, clear);
            let sol = match phase {
                TopologyPhase::PreFault => &prep.pre,
                TopologyPhase::FaultOn => &prep.fault_on,
                TopologyPhase::PostFault => &prep.post,
            };
            let dynamics = SwingDynamics {
                machines: &prep.machines,
                y_red: &sol.y_red,
                omega_sync: prep.omega_sync,
            };
            let f = |s: &[f64], out: &mut [f64]| dynamics.derivative(s, out);
            let span = seg_end - t;
            let n_steps = (span / spec.time_step - 1e-9).ceil().max(1.0) as usize;
            let h = span / n_steps as f64;
            for _ in 0..n_steps {
                rk4_step(&f, &mut state, h);
            }
            if state[..m].iter().any(|d| d.abs() > guard_rad) {
                truncated = true;
                break 'samples;
            }
            t = seg_end;
        }
        record(&state, t, &mut volts, &mut angles)?;
        rows += 1;
    }

    let angles_rel_deg = Array2::from_shape_vec((rows, m), angles)
        .expect("row-major angle buffer matches recorded rows");
    let voltages = if with_voltages {
        Some(
            Array2::from_shape_vec((rows, prep.pmu_channels.len()), volts)
                .expect("row-major voltage buffer matches recorded rows"),
        )
    } else {
        None
    };

    // Post-fault observation window: fault clearing to end of horizon. When
    // no fault occurs inside the horizon the whole run is the window.
    let window_start = measured_row.min(rows.saturating_sub(1));
    let mut spread = if rows > window_start {
        max_angle_spread(angles_rel_deg.slice(ndarray::s![window_start.., ..]).view())?
    } else {
        0.0
    };
    if truncated {
        spread = spread.max(ANGLE_GUARD_DEG);
    }
    let eta = eta_from_spread(spread);

    Ok(Trajectory {
        angles_rel_deg,
        voltages,
        measured_row,
        truncated,
        eta,
        label: label(eta),
    })
}

/// Convenience wrapper: prepare, integrate, and recover PMU voltages.
pub fn integrate_transient(case: &CaseFile, spec: &ScenarioSpec) -> Result<(PreparedScenario, Trajectory)> {
    let prep = prepare_scenario(case, spec)?;
    let traj = run_transient(&prep, spec, true)?;
    Ok((prep, traj))
}
