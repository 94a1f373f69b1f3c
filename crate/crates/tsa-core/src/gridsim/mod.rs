//! Classical-model multi-machine transient simulator: network reduction,
//! pre-fault power flow, swing-equation integration under scripted
//! three-phase faults, stability labeling, and dataset assembly.

pub mod case;
pub mod dataset;
pub mod machine;
pub mod network;
pub mod powerflow;
pub mod scenario;
pub mod stability;
pub mod swing;

pub use case::{BranchDecl, BusDecl, CaseFile, FaultGrid, MachineDecl, ScenarioDefaults};
pub use dataset::{generate_dataset, inject_noise, load_dataset, save_dataset, Dataset, TransientSample};
pub use machine::MachineParams;
pub use network::{kron_reduce, KronReduced, NetworkModel, PhaseSolution, TopologyPhase};
pub use scenario::{
    integrate_transient, prepare_scenario, run_transient, FaultLocation, PreparedScenario,
    ScenarioSpec, Trajectory,
};
pub use stability::{label, stability_index, ANGLE_GUARD_DEG};
pub use swing::{rk4_step, SwingDynamics};
