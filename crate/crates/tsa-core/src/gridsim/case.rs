//! Case files: machines, branches, fault grid, and scenario defaults in one
//! TOML document. Bus ids are 1-based in the file and converted to 0-based
//! indices at load time.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{CoreError, Result};

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CaseFile {
    #[serde(default)]
    pub name: String,
    pub f_nominal_hz: f64,
    #[serde(rename = "bus")]
    pub buses: Vec<BusDecl>,
    #[serde(rename = "branch")]
    pub branches: Vec<BranchDecl>,
    #[serde(rename = "machine")]
    pub machines: Vec<MachineDecl>,
    #[serde(default)]
    pub defaults: ScenarioDefaults,
    pub grid: FaultGrid,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BusDecl {
    pub id: usize,
    #[serde(default)]
    pub load_p: f64,
    #[serde(default)]
    pub load_q: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BranchDecl {
    pub from: usize,
    pub to: usize,
    #[serde(default)]
    pub r: f64,
    pub x: f64,
    /// Total line-charging susceptance, split between the two ends.
    #[serde(default)]
    pub b: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MachineDecl {
    pub bus: usize,
    /// H, seconds.
    pub inertia: f64,
    #[serde(default)]
    pub damping: f64,
    pub xd_transient: f64,
    /// Active dispatch at nominal loading; ignored for the slack machine.
    #[serde(default)]
    pub dispatch_p: f64,
    pub voltage_setpoint: f64,
    #[serde(default)]
    pub slack: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScenarioDefaults {
    pub time_step: f64,
    pub horizon: f64,
    pub sample_rate: f64,
    pub fault_start: f64,
    /// 1-based bus ids; empty means "all load buses".
    pub pmu_buses: Vec<usize>,
}

impl Default for ScenarioDefaults {
    fn default() -> Self {
        ScenarioDefaults {
            time_step: 1e-3,
            horizon: 5.0,
            sample_rate: 120.0,
            fault_start: 0.1,
            pmu_buses: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FaultGrid {
    pub loadings: Vec<f64>,
    #[serde(default)]
    pub fault_buses: Vec<usize>,
    #[serde(default)]
    pub fault_lines: Vec<LineRef>,
    #[serde(default = "default_line_positions")]
    pub line_positions: Vec<f64>,
    #[serde(default = "default_duration_min")]
    pub duration_min_cycles: f64,
    #[serde(default = "default_duration_max")]
    pub duration_max_cycles: f64,
    /// Fault durations emitted per scenario, as fractions of the critical
    /// clearing duration found by bisection.
    #[serde(default = "default_stable_fractions")]
    pub stable_fractions: Vec<f64>,
    #[serde(default = "default_unstable_fractions")]
    pub unstable_fractions: Vec<f64>,
    /// Events requested per class.
    pub per_class: usize,
    #[serde(default = "default_train_fraction")]
    pub train_fraction: f64,
    /// Events must provide at least this many post-clearing samples.
    #[serde(default = "default_min_post_rows")]
    pub min_post_rows: usize,
    #[serde(default)]
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LineRef {
    pub from: usize,
    pub to: usize,
}

fn default_line_positions() -> Vec<f64> {
    vec![0.3, 0.5, 0.8]
}

fn default_duration_min() -> f64 {
    1.0
}

fn default_duration_max() -> f64 {
    60.0
}

fn default_stable_fractions() -> Vec<f64> {
    vec![0.5, 0.7, 0.85, 0.95]
}

fn default_unstable_fractions() -> Vec<f64> {
    vec![1.05, 1.15, 1.3, 1.5]
}

fn default_train_fraction() -> f64 {
    0.8
}

fn default_min_post_rows() -> usize {
    16
}

impl CaseFile {
    pub fn from_str_validated(text: &str, origin: &str) -> Result<CaseFile> {
        let case: CaseFile = toml::from_str(text)
            .map_err(|e| CoreError::Config(format!("{origin}: {e}")))?;
        case.validate(origin)?;
        Ok(case)
    }

    pub fn load(path: &Path) -> Result<CaseFile> {
        let text = std::fs::read_to_string(path)?;
        Self::from_str_validated(&text, &path.display().to_string())
    }

    pub fn bus_count(&self) -> usize {
        self.buses.len()
    }

    /// 0-based index for a 1-based bus id from the file.
    pub fn bus_index(&self, id: usize) -> Result<usize> {
        if id >= 1 && id <= self.buses.len() {
            Ok(id - 1)
        } else {
            Err(CoreError::Config(format!(
                "bus id {id} out of range 1..={}",
                self.buses.len()
            )))
        }
    }

    pub fn slack_machine(&self) -> usize {
        self.machines
            .iter()
            .position(|m| m.slack)
            .expect("validated case has a slack machine")
    }

    /// Effective PMU bus ids (1-based): the declared list, or all load buses.
    pub fn pmu_bus_ids(&self) -> Vec<usize> {
        if !self.defaults.pmu_buses.is_empty() {
            return self.defaults.pmu_buses.clone();
        }
        self.buses
            .iter()
            .filter(|b| b.load_p != 0.0 || b.load_q != 0.0)
            .map(|b| b.id)
            .collect()
    }

    fn validate(&self, origin: &str) -> Result<()> {
        let cfg = |msg: String| CoreError::Config(format!("{origin}: {msg}"));
        if self.buses.is_empty() {
            return Err(cfg("case has no buses".into()));
        }
        for (i, b) in self.buses.iter().enumerate() {
            if b.id != i + 1 {
                return Err(cfg(format!(
                    "bus ids must be 1..=n in order; entry {} has id {}",
                    i + 1,
                    b.id
                )));
            }
        }
        if !(self.f_nominal_hz > 0.0) {
            return Err(cfg("f_nominal_hz must be positive".into()));
        }
        for br in &self.branches {
            self.bus_index(br.from).map_err(|e| cfg(e.to_string()))?;
            self.bus_index(br.to).map_err(|e| cfg(e.to_string()))?;
            if br.from == br.to {
                return Err(cfg(format!("branch {}-{} is a self-loop", br.from, br.to)));
            }
            if !(br.x != 0.0) {
                return Err(cfg(format!("branch {}-{} has zero reactance", br.from, br.to)));
            }
        }
        if self.machines.is_empty() {
            return Err(cfg("case has no machines".into()));
        }
        let slack_count = self.machines.iter().filter(|m| m.slack).count();
        if slack_count != 1 {
            return Err(cfg(format!("need exactly one slack machine, got {slack_count}")));
        }
        for m in &self.machines {
            self.bus_index(m.bus).map_err(|e| cfg(e.to_string()))?;
            if !(m.inertia > 0.0) {
                return Err(cfg(format!("machine at bus {} has non-positive inertia", m.bus)));
            }
            if !(m.xd_transient > 0.0) {
                return Err(cfg(format!(
                    "machine at bus {} has non-positive transient reactance",
                    m.bus
                )));
            }
        }
        let d = &self.defaults;
        if !(d.time_step > 0.0 && d.horizon > 0.0 && d.sample_rate > 0.0 && d.fault_start >= 0.0) {
            return Err(cfg("defaults: time_step/horizon/sample_rate must be positive".into()));
        }
        for &id in &d.pmu_buses {
            self.bus_index(id).map_err(|e| cfg(e.to_string()))?;
        }
        if self.pmu_bus_ids().is_empty() {
            return Err(cfg("no PMU buses: declare defaults.pmu_buses or add loads".into()));
        }
        let g = &self.grid;
        if g.loadings.is_empty() {
            return Err(cfg("grid.loadings is empty".into()));
        }
        if g.fault_buses.is_empty() && g.fault_lines.is_empty() {
            return Err(cfg("grid has neither fault_buses nor fault_lines".into()));
        }
        for &id in &g.fault_buses {
            self.bus_index(id).map_err(|e| cfg(e.to_string()))?;
        }
        for lr in &g.fault_lines {
            if !self
                .branches
                .iter()
                .any(|b| (b.from == lr.from && b.to == lr.to) || (b.from == lr.to && b.to == lr.from))
            {
                return Err(cfg(format!("fault line {}-{} is not a branch", lr.from, lr.to)));
            }
        }
        for &p in &g.line_positions {
            if !(p > 0.0 && p < 1.0) {
                return Err(cfg(format!("line position {p} must lie strictly inside (0, 1)")));
            }
        }
        if !(g.duration_min_cycles > 0.0 && g.duration_max_cycles > g.duration_min_cycles) {
            return Err(cfg("grid duration range is invalid".into()));
        }
        if g.per_class == 0 {
            return Err(cfg("grid.per_class must be at least 1".into()));
        }
        if !(g.train_fraction > 0.0 && g.train_fraction < 1.0) {
            return Err(cfg("grid.train_fraction must lie in (0, 1)".into()));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
f_nominal_hz = 60.0

[[bus]]
id = 1

[[bus]]
id = 2
load_p = 0.5
load_q = 0.2

[[branch]]
from = 1
to = 2
x = 0.1

[[machine]]
bus = 1
inertia = 5.0
xd_transient = 0.1
voltage_setpoint = 1.0
slack = true

[[machine]]
bus = 2
inertia = 4.0
xd_transient = 0.1
dispatch_p = 0.3
voltage_setpoint = 1.0

[grid]
loadings = [1.0]
fault_buses = [2]
per_class = 4
"#;

    #[test]
    fn minimal_case_parses_with_defaults() {
        let case = CaseFile::from_str_validated(MINIMAL, "inline").unwrap();
        assert_eq!(case.bus_count(), 2);
        assert_eq!(case.defaults.sample_rate, 120.0);
        assert_eq!(case.pmu_bus_ids(), vec![2]);
        assert_eq!(case.slack_machine(), 0);
        assert_eq!(case.grid.train_fraction, 0.8);
    }

    #[test]
    fn unknown_keys_rejected() {
        let text = MINIMAL.replace("[grid]", "frobnicate = 3\n[grid]");
        let err = CaseFile::from_str_validated(&text, "inline").unwrap_err();
        assert!(err.to_string().contains("frobnicate"));
    }

    #[test]
    fn missing_slack_rejected() {
        let text = MINIMAL.replace("slack = true", "slack = false");
        let err = CaseFile::from_str_validated(&text, "inline").unwrap_err();
        assert!(err.to_string().contains("slack"));
    }

    #[test]
    fn fault_line_must_be_a_branch() {
        let text = MINIMAL.replace(
            "fault_buses = [2]",
            "fault_buses = [2]\nfault_lines = [{ from = 1, to = 9 }]",
        );
        assert!(CaseFile::from_str_validated(&text, "inline").is_err());
    }
}
