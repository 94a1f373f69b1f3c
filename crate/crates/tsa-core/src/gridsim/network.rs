//! Bus admittance matrices per topology phase, Schur-complement (Kron)
//! reduction to generator internal nodes, and bus-voltage recovery.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use super::machine::MachineParams;
use crate::error::{CoreError, Result};

pub type C64 = Complex64;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TopologyPhase {
    PreFault,
    FaultOn,
    PostFault,
}

/// Bus-level network for one scenario. Constant-impedance loads are already
/// folded into the diagonals. A bolted three-phase fault is represented by
/// grounding `faulted_bus` during the fault-on phase (its row and column are
/// dropped from the algebraic equations and its voltage is pinned to zero).
#[derive(Debug, Clone)]
pub struct NetworkModel {
    pub bus_count: usize,
    pub y_pre: DMatrix<C64>,
    pub y_fault: DMatrix<C64>,
    pub y_post: DMatrix<C64>,
    pub faulted_bus: Option<usize>,
    pub generator_buses: Vec<usize>,
    pub load_admittances: Vec<C64>,
}

impl NetworkModel {
    pub fn matrix(&self, phase: TopologyPhase) -> &DMatrix<C64> {
        match phase {
            TopologyPhase::PreFault => &self.y_pre,
            TopologyPhase::FaultOn => &self.y_fault,
            TopologyPhase::PostFault => &self.y_post,
        }
    }

    pub fn grounded_bus(&self, phase: TopologyPhase) -> Option<usize> {
        match phase {
            TopologyPhase::FaultOn => self.faulted_bus,
            _ => None,
        }
    }
}

/// Outcome of eliminating a node set by Schur complement:
/// `y_red = Y_kk − Y_ke · Y_ee⁻¹ · Y_ek`.
#[derive(Debug)]
pub struct KronReduced {
    pub y_red: DMatrix<C64>,
    pub keep: Vec<usize>,
    pub eliminated: Vec<usize>,
    lu: nalgebra::LU<C64, nalgebra::Dyn, nalgebra::Dyn>,
    y_ek: DMatrix<C64>,
}

impl KronReduced {
    /// Voltages at the eliminated nodes implied by voltages at the kept
    /// nodes (zero net injection at eliminated nodes).
    pub fn eliminated_voltages(&self, v_keep: &DVector<C64>) -> Result<DVector<C64>> {
        let rhs = -(&self.y_ek * v_keep);
        self.lu.solve(&rhs).ok_or(CoreError::DegenerateNetwork)
    }
}

/// Schur-complement elimination of every node not listed in `keep`.
pub fn kron_reduce(y: &DMatrix<C64>, keep: &[usize]) -> Result<KronReduced> {
    let n = y.nrows();
    if y.ncols() != n {
        return Err(CoreError::shape(
            "kron_reduce",
            format!("admittance matrix is {}x{}", y.nrows(), y.ncols()),
        ));
    }
    let mut is_kept = vec![false; n];
    for &k in keep {
        if k >= n {
            return Err(CoreError::shape(
                "kron_reduce",
                format!("keep index {k} out of range for {n} nodes"),
            ));
        }
        is_kept[k] = true;
    }
    let eliminated: Vec<usize> = (0..n).filter(|&i| !is_kept[i]).collect();

    let y_kk = y.select_rows(keep.iter()).select_columns(keep.iter());
    if eliminated.is_empty() {
        // nothing to eliminate: the reduced matrix is the kept submatrix
        let lu = DMatrix::<C64>::zeros(0, 0).lu();
        return Ok(KronReduced {
            y_red: y_kk,
            keep: keep.to_vec(),
            eliminated,
            lu,
            y_ek: DMatrix::zeros(0, keep.len()),
        });
    }

    let y_ke = y.select_rows(keep.iter()).select_columns(eliminated.iter());
    let y_ek = y.select_rows(eliminated.iter()).select_columns(keep.iter());
    let y_ee = y
        .select_rows(eliminated.iter())
        .select_columns(eliminated.iter());

    let lu = y_ee.lu();
    let x = lu.solve(&y_ek).ok_or(CoreError::DegenerateNetwork)?;
    let y_red = &y_kk - &y_ke * x;
    Ok(KronReduced {
        y_red,
        keep: keep.to_vec(),
        eliminated,
        lu,
        y_ek,
    })
}

/// Reduction of one topology phase to the machine internal nodes, plus the
/// recovery operator for PMU bus voltages.
pub struct PhaseSolution {
    pub phase: TopologyPhase,
    pub y_red: DMatrix<C64>,
    reduced: KronReduced,
    /// bus index → position in the eliminated-node ordering (None when the
    /// bus is grounded this phase).
    bus_slot: Vec<Option<usize>>,
    bus_count: usize,
}

impl PhaseSolution {
    /// Solve the algebraic network equations for all bus voltages given the
    /// machine internal EMF phasors. A grounded (faulted) bus reads zero.
    pub fn bus_voltages(&self, emf: &DVector<C64>) -> Result<DVector<C64>> {
        let v_elim = self.reduced.eliminated_voltages(emf)?;
        let mut out = DVector::zeros(self.bus_count);
        for (bus, slot) in self.bus_slot.iter().enumerate() {
            if let Some(s) = slot {
                out[bus] = v_elim[*s];
            }
        }
        Ok(out)
    }
}

/// Append machine internal nodes to the bus network of `phase` and reduce
/// onto them. Buses grounded by the fault are removed before elimination.
pub fn reduce_phase(
    net: &NetworkModel,
    machines: &[MachineParams],
    phase: TopologyPhase,
) -> Result<PhaseSolution> {
    let n = net.bus_count;
    let m = machines.len();
    if net.generator_buses.len() != m {
        return Err(CoreError::shape(
            "reduce_phase",
            format!("{m} machines but {} generator buses", net.generator_buses.len()),
        ));
    }
    let grounded = net.grounded_bus(phase);

    // augmented matrix: buses 0..n, internal nodes n..n+m
    let mut aug = DMatrix::<C64>::zeros(n + m, n + m);
    aug.view_mut((0, 0), (n, n)).copy_from(net.matrix(phase));
    for (i, machine) in machines.iter().enumerate() {
        let g = net.generator_buses[i];
        let y = C64::new(0.0, -1.0 / machine.transient_reactance); // 1/(j x'd)
        aug[(g, g)] += y;
        aug[(n + i, n + i)] += y;
        aug[(g, n + i)] -= y;
        aug[(n + i, g)] -= y;
    }

    // drop the grounded bus (voltage pinned to zero), keep internal nodes
    let retained: Vec<usize> = (0..n + m).filter(|&i| Some(i) != grounded).collect();
    let aug = aug
        .select_rows(retained.iter())
        .select_columns(retained.iter());

    // positions of internal nodes inside the retained ordering
    let keep: Vec<usize> = retained
        .iter()
        .enumerate()
        .filter(|(_, &orig)| orig >= n)
        .map(|(pos, _)| pos)
        .collect();

    let reduced = kron_reduce(&aug, &keep)?;

    // eliminated ordering maps back to original bus ids
    let mut bus_slot = vec![None; n];
    for (slot, &pos) in reduced.eliminated.iter().enumerate() {
        let orig = retained[pos];
        if orig < n {
            bus_slot[orig] = Some(slot);
        }
    }

    Ok(PhaseSolution {
        phase,
        y_red: reduced.y_red.clone(),
        reduced,
        bus_slot,
        bus_count: n,
    })
}
