//! Running a circuit on one engine and collecting what the commands report.

use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use clap::ValueEnum;
use serde::Serialize;
use ttnsim_core::circuit::Circuit;
use ttnsim_core::dryrun::EdgeDim;
use ttnsim_core::mps::MpsState;
use ttnsim_core::reference::{sv_simulate, DenseState, STATEVECTOR_QUBIT_CAP};
use ttnsim_core::tree::TreeTopology;
use ttnsim_core::ttn::TtnState;
use ttnsim_core::{Result, SimError, TruncationPolicy};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Engine {
    Ttn,
    Mps,
    Statevector,
}

impl fmt::Display for Engine {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Engine::Ttn => "ttn",
            Engine::Mps => "mps",
            Engine::Statevector => "statevector",
        })
    }
}

/// `engine` or `engine:policy`, e.g. `ttn:threshold:1e-4`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RunSpec {
    pub engine: Engine,
    pub policy: TruncationPolicy,
}

impl FromStr for RunSpec {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        let (engine, policy) = s.split_once(':').unwrap_or((s, "exact"));
        let engine = Engine::from_str(engine, true)?;
        let policy = policy.parse::<TruncationPolicy>().map_err(|e| e.to_string())?;
        Ok(Self { engine, policy })
    }
}

impl fmt::Display for RunSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.engine, self.policy)
    }
}

#[derive(Debug, Clone)]
pub enum Network {
    Tree(TreeTopology),
    Chain(Vec<usize>),
    Dense,
}

#[derive(Debug, Clone)]
pub struct Outcome {
    pub d_max_observed: usize,
    pub m_entries: usize,
    pub truncation_events: usize,
    pub discarded_weight: f64,
    pub edges: Vec<EdgeDim>,
    pub gate_seconds: Vec<f64>,
    pub total_seconds: f64,
    /// Final amplitudes, present when the qubit count allows a dense contraction.
    pub state: Option<DenseState>,
}

enum Engines {
    Tree(TtnState),
    Chain(MpsState),
    Dense(DenseState),
}

impl Engines {
    fn apply(&mut self, g: &ttnsim_core::circuit::Gate, policy: TruncationPolicy) -> Result<()> {
        match self {
            Engines::Tree(s) => s.apply_gate(g, policy),
            Engines::Chain(s) => s.apply_gate(g, policy),
            Engines::Dense(s) => s.apply(g),
        }
    }
}

pub fn run(
    c: &Circuit,
    network: &Network,
    policy: TruncationPolicy,
    bits: &[u8],
    memory_cap: Option<usize>,
) -> Result<Outcome> {
    policy.validate()?;
    let mut engine = match network {
        Network::Tree(t) => {
            let s = TtnState::init_basis_state(t, bits)?;
            Engines::Tree(match memory_cap {
                Some(cap) => s.with_memory_cap(cap),
                None => s,
            })
        }
        Network::Chain(order) => {
            let s = MpsState::init_with_order(order, bits)?;
            Engines::Chain(match memory_cap {
                Some(cap) => s.with_memory_cap(cap),
                None => s,
            })
        }
        Network::Dense => {
            if policy != TruncationPolicy::Exact {
                return Err(SimError::invalid("the statevector engine only runs exactly"));
            }
            let n = c.num_qubits();
            if let Some(cap) = memory_cap.filter(|&cap| n < usize::BITS as usize && cap < 1 << n) {
                return Err(SimError::MemoryCapExceeded { requested: 1 << n, cap });
            }
            Engines::Dense(DenseState::basis(n, bits)?)
        }
    };

    let mut gate_seconds = Vec::with_capacity(c.gates().len());
    let start = Instant::now();
    for g in c.gates() {
        let t = Instant::now();
        engine.apply(g, policy)?;
        gate_seconds.push(t.elapsed().as_secs_f64());
    }
    let total_seconds = start.elapsed().as_secs_f64();

    let dense_ok = c.num_qubits() <= STATEVECTOR_QUBIT_CAP;
    let outcome = match engine {
        Engines::Tree(s) => {
            let layout = s.layout();
            let edges = layout
                .edges()
                .map(|id| EdgeDim {
                    edge: id,
                    level: layout.node(layout.node(id).parent.expect("edges have parents")).level,
                    dim: s.edge_dim(id) as u64,
                })
                .collect();
            let m = s.metrics();
            Outcome {
                d_max_observed: m.d_max_observed,
                m_entries: m.m_entries,
                truncation_events: s.truncation_events(),
                discarded_weight: s.discarded_weight(),
                edges,
                gate_seconds,
                total_seconds,
                state: if dense_ok { Some(s.contract_to_statevector()?) } else { None },
            }
        }
        Engines::Chain(s) => {
            let m = s.metrics();
            let edges = m
                .bond_dims
                .iter()
                .enumerate()
                .map(|(edge, &d)| EdgeDim { edge, level: 0, dim: d as u64 })
                .collect();
            Outcome {
                d_max_observed: m.d_max_observed,
                m_entries: m.m_entries,
                truncation_events: s.truncation_events(),
                discarded_weight: s.discarded_weight(),
                edges,
                gate_seconds,
                total_seconds,
                state: if dense_ok { Some(s.contract_to_statevector()?) } else { None },
            }
        }
        Engines::Dense(s) => Outcome {
            d_max_observed: 2,
            m_entries: s.amplitudes().len(),
            truncation_events: 0,
            discarded_weight: 0.0,
            edges: Vec::new(),
            gate_seconds,
            total_seconds,
            state: Some(s),
        },
    };
    Ok(outcome)
}

/// Fidelity `|⟨oracle|ψ⟩|²` against the dense oracle, when both exist.
pub fn fidelity(c: &Circuit, bits: &[u8], outcome: &Outcome) -> Result<Option<f64>> {
    let Some(state) = &outcome.state else {
        return Ok(None);
    };
    let oracle = sv_simulate(c, bits)?;
    Ok(Some(oracle.inner(state)?.norm_sqr().min(1.0)))
}
