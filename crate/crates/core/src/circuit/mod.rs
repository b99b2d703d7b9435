//! Circuit IR: gates, bond-rank classification, file format and generators.

mod generators;
pub mod gates;
mod io;

pub use generators::{
    gen_lattice, gen_random, gen_treelike, lattice_pattern_edges, with_hadamard_layer,
};
pub use io::{load_circuit, parse_circuit, save_circuit, write_circuit};

use num_complex::Complex64;

use crate::error::{Result, SimError};
use crate::linalg::{isometry_defect, svd_econ};
use crate::tensor::ComplexTensor;

/// Singular values below this fraction of the largest one do not count
/// towards a gate's bond rank.
pub const GATE_RANK_THRESHOLD: f64 = 1e-10;

const UNITARITY_TOL: f64 = 1e-10;

/// A one- or two-qubit unitary. Two-qubit matrices use the basis
/// `|q_a q_b⟩` with `q_a = qubits[0]` the more significant bit.
#[derive(Debug, Clone, PartialEq)]
pub struct Gate {
    label: String,
    qubits: Vec<usize>,
    matrix: ComplexTensor,
}

impl Gate {
    pub fn new(label: impl Into<String>, qubits: Vec<usize>, matrix: ComplexTensor) -> Result<Self> {
        let dim = match qubits.len() {
            1 => 2,
            2 => 4,
            n => return Err(SimError::invalid(format!("gates act on 1 or 2 qubits, got {n}"))),
        };
        if qubits.len() == 2 && qubits[0] == qubits[1] {
            return Err(SimError::invalid(format!(
                "two-qubit gate on repeated qubit {}",
                qubits[0]
            )));
        }
        if matrix.shape() != [dim, dim] {
            return Err(SimError::invalid(format!(
                "gate matrix has shape {:?}, expected [{dim}, {dim}]",
                matrix.shape()
            )));
        }
        let defect = isometry_defect(&matrix)?;
        if !(defect <= UNITARITY_TOL) {
            return Err(SimError::invalid(format!(
                "gate matrix is not unitary (deviation {defect:.3e})"
            )));
        }
        Ok(Self {
            label: label.into(),
            qubits,
            matrix,
        })
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn qubits(&self) -> &[usize] {
        &self.qubits
    }

    pub fn matrix(&self) -> &ComplexTensor {
        &self.matrix
    }

    pub fn is_two_qubit(&self) -> bool {
        self.qubits.len() == 2
    }

    /// Same gate acting on other qubits.
    pub fn on(&self, qubits: Vec<usize>) -> Result<Self> {
        Gate::new(self.label.clone(), qubits, self.matrix.clone())
    }

    /// Inverse gate (conjugate transpose) on the same qubits.
    pub fn inverse(&self) -> Self {
        Self {
            label: format!("{}_dg", self.label),
            qubits: self.qubits.clone(),
            matrix: self.matrix.dagger().expect("gate matrices are square"),
        }
    }

    /// The 4x4 matrix regrouped as `((out_a, in_a), (out_b, in_b))`.
    pub fn operator_schmidt_matrix(&self) -> Result<ComplexTensor> {
        if !self.is_two_qubit() {
            return Err(SimError::invalid(format!(
                "{} is a single-qubit gate",
                self.label
            )));
        }
        let t = self.matrix.clone().reshape(&[2, 2, 2, 2])?;
        Ok(t.merge_axes(&[0, 2], &[1, 3])?)
    }
}

/// Operator Schmidt rank of a two-qubit gate: the factor by which threading
/// it multiplies every bond on its path.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct GateRank(pub usize);

pub fn gate_rank(g: &Gate) -> Result<GateRank> {
    let m = g.operator_schmidt_matrix()?;
    let f = svd_econ(&m, GATE_RANK_THRESHOLD, None)?;
    Ok(GateRank(f.rank()))
}

#[derive(Debug, Clone, PartialEq)]
pub struct Circuit {
    num_qubits: usize,
    gates: Vec<Gate>,
}

impl Circuit {
    pub fn new(num_qubits: usize) -> Result<Self> {
        if num_qubits == 0 {
            return Err(SimError::invalid("a circuit needs at least one qubit"));
        }
        Ok(Self {
            num_qubits,
            gates: Vec::new(),
        })
    }

    pub fn with_gates(num_qubits: usize, gates: Vec<Gate>) -> Result<Self> {
        let mut c = Self::new(num_qubits)?;
        for g in gates {
            c.push(g)?;
        }
        Ok(c)
    }

    pub fn push(&mut self, gate: Gate) -> Result<()> {
        if let Some(&q) = gate.qubits().iter().find(|&&q| q >= self.num_qubits) {
            return Err(SimError::invalid(format!(
                "gate {} touches qubit {q} but the circuit has {} qubits",
                gate.label(),
                self.num_qubits
            )));
        }
        self.gates.push(gate);
        Ok(())
    }

    pub fn num_qubits(&self) -> usize {
        self.num_qubits
    }

    pub fn gates(&self) -> &[Gate] {
        &self.gates
    }

    pub fn two_qubit_gates(&self) -> impl Iterator<Item = &Gate> {
        self.gates.iter().filter(|g| g.is_two_qubit())
    }
}

pub(crate) fn c64(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}
