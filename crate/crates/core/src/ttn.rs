//! Tree tensor network state.
//!
//! Leaf tensors have axes `(physical, parent)`, internal tensors
//! `(child_1, ..., child_m, parent)`, and the root's parent axis has
//! dimension 1. In canonical form every non-root tensor is an isometry from
//! its downstream axes onto its parent axis, so the root carries the norm.

use std::collections::BTreeMap;

use serde::Serialize;

use crate::circuit::{Gate, GATE_RANK_THRESHOLD};
use crate::error::{Result, SimError};
use crate::linalg::{isometry_defect, svd_econ};
use crate::reference::{check_bits, DenseState, STATEVECTOR_QUBIT_CAP};
use crate::tensor::{contract, ComplexTensor, ONE, ZERO};
use crate::tree::{TreeLayout, TreeTopology};
use crate::truncation::{factorize, TruncationPolicy};

/// Default limit on the total number of stored complex entries.
pub const DEFAULT_MEMORY_CAP: usize = 1 << 31;

/// A two-qubit gate split into two three-axis factors `(out, in, bond)`:
/// `Σ_a left[.., a] ⊗ right[.., a] = √k · G`.
#[derive(Debug, Clone)]
pub struct SplitGate {
    pub left: ComplexTensor,
    pub right: ComplexTensor,
    pub k: usize,
}

pub fn split_gate(g: &Gate) -> Result<SplitGate> {
    let m = g.operator_schmidt_matrix()?;
    let f = svd_econ(&m, GATE_RANK_THRESHOLD, None)?;
    let k = f.rank();
    let quarter = (k as f64).powf(0.25);
    let left = ComplexTensor::from_fn(&[2, 2, k], |ix| {
        f.u.get(&[2 * ix[0] + ix[1], ix[2]]) * (f.s[ix[2]].sqrt() * quarter)
    })?;
    let right = ComplexTensor::from_fn(&[2, 2, k], |ix| {
        f.v_dag.get(&[ix[2], 2 * ix[0] + ix[1]]) * (f.s[ix[2]].sqrt() * quarter)
    })?;
    Ok(SplitGate { left, right, k })
}

/// Applies a gate factor `g (out, in, bond)` to axis `phys` of `t`, fusing the
/// new bond into `bond_axis` as its minor part.
pub(crate) fn absorb_factor(
    t: &ComplexTensor,
    phys: usize,
    bond_axis: usize,
    g: &ComplexTensor,
) -> Result<ComplexTensor> {
    let k = g.shape()[2];
    // Result axes: (out, bond, t axes without phys).
    let c = contract(g, &[1], t, &[phys])?;
    let rank = t.rank();
    let others: Vec<usize> = (0..rank).filter(|&a| a != phys).collect();
    // Position of each original axis of t inside c.
    let pos = |a: usize| 2 + others.iter().position(|&o| o == a).expect("axis kept");
    let mut order = Vec::with_capacity(rank + 1);
    let mut shape = Vec::with_capacity(rank);
    for a in 0..rank {
        if a == phys {
            order.push(0);
            shape.push(2);
        } else {
            order.push(pos(a));
            if a == bond_axis {
                order.push(1);
                shape.push(t.shape()[a] * k);
            } else {
                shape.push(t.shape()[a]);
            }
        }
    }
    Ok(c.permute(&order)?.reshape(&shape)?)
}

/// Tensors `t` with `scale · δ(a, a')` where `a` is fused into `axis_a` and
/// `a'` into `axis_b`, each as the minor part.
pub(crate) fn thread_axes(
    t: &ComplexTensor,
    axis_a: usize,
    axis_b: usize,
    k: usize,
    scale: f64,
) -> ComplexTensor {
    let old = t.shape();
    let rank = old.len();
    let mut shape = old.to_vec();
    shape[axis_a] *= k;
    shape[axis_b] *= k;
    let mut strides = vec![1usize; rank];
    for a in (0..rank.saturating_sub(1)).rev() {
        strides[a] = strides[a + 1] * shape[a + 1];
    }
    let total: usize = shape.iter().product();
    let mut data = vec![ZERO; total];
    let diag_step = strides[axis_a] + strides[axis_b];
    let mut index = vec![0usize; rank];
    for &v in t.data() {
        let mut base = 0;
        for a in 0..rank {
            let i = if a == axis_a || a == axis_b { index[a] * k } else { index[a] };
            base += i * strides[a];
        }
        if v != ZERO {
            for j in 0..k {
                data[base + j * diag_step] = v * scale;
            }
        }
        for a in (0..rank).rev() {
            index[a] += 1;
            if index[a] < old[a] {
                break;
            }
            index[a] = 0;
        }
    }
    ComplexTensor::new(shape, data).expect("shape and data agree")
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TtnMetrics {
    /// Largest axis dimension over all tensors, physical axes included.
    pub d_max_observed: usize,
    /// Total stored entries.
    pub m_entries: usize,
    /// Bond dimension keyed by `(parent node, child index)`.
    pub edge_dims: BTreeMap<(usize, usize), usize>,
}

#[derive(Debug, Clone)]
pub struct TtnState {
    topology: TreeTopology,
    layout: TreeLayout,
    tensors: Vec<ComplexTensor>,
    dirty: Vec<bool>,
    memory_cap: usize,
    truncation_events: usize,
    discarded_weight: f64,
}

impl TtnState {
    /// Product state `|bits⟩` with every bond of dimension 1.
    pub fn init_basis_state(topology: &TreeTopology, bits: &[u8]) -> Result<Self> {
        check_bits(topology.num_qubits(), bits)?;
        let layout = topology.layout();
        let tensors = layout
            .nodes()
            .iter()
            .map(|node| match node.qubit {
                Some(q) => {
                    let b = bits[q];
                    ComplexTensor::new(
                        vec![2, 1],
                        vec![if b == 0 { ONE } else { ZERO }, if b == 1 { ONE } else { ZERO }],
                    )
                }
                None => ComplexTensor::new(vec![1; node.children.len() + 1], vec![ONE]),
            })
            .collect::<Result<Vec<_>, _>>()?;
        Ok(Self {
            topology: topology.clone(),
            dirty: vec![false; layout.len()],
            layout,
            tensors,
            memory_cap: DEFAULT_MEMORY_CAP,
            truncation_events: 0,
            discarded_weight: 0.0,
        })
    }

    pub fn with_memory_cap(mut self, cap: usize) -> Self {
        self.memory_cap = cap;
        self
    }

    pub fn topology(&self) -> &TreeTopology {
        &self.topology
    }

    pub fn layout(&self) -> &TreeLayout {
        &self.layout
    }

    pub fn tensor(&self, node: usize) -> &ComplexTensor {
        &self.tensors[node]
    }

    pub fn num_qubits(&self) -> usize {
        self.layout.num_qubits()
    }

    /// Dimension of the bond above `node`.
    pub fn edge_dim(&self, node: usize) -> usize {
        *self.tensors[node].shape().last().expect("tensors have a parent axis")
    }

    /// Number of sweep steps in which the policy discarded a singular value
    /// above the numerical cutoff.
    pub fn truncation_events(&self) -> usize {
        self.truncation_events
    }

    /// Total squared weight of singular values discarded by the policy.
    pub fn discarded_weight(&self) -> f64 {
        self.discarded_weight
    }

    pub fn total_entries(&self) -> usize {
        self.tensors.iter().map(|t| t.len()).sum()
    }

    pub fn apply_gate(&mut self, g: &Gate, policy: TruncationPolicy) -> Result<()> {
        if g.is_two_qubit() {
            self.apply_two_qubit(g, policy)
        } else {
            self.apply_single_qubit(g)
        }
    }

    pub fn apply_single_qubit(&mut self, g: &Gate) -> Result<()> {
        let &[q] = g.qubits() else {
            return Err(SimError::invalid(format!("{} is not a single-qubit gate", g.label())));
        };
        self.check_qubit(q)?;
        let leaf = self.layout.leaf(q);
        self.tensors[leaf] = self.tensors[leaf].apply_on_axis(0, g.matrix())?;
        Ok(())
    }

    fn check_qubit(&self, q: usize) -> Result<()> {
        if q >= self.num_qubits() {
            return Err(SimError::invalid(format!(
                "qubit {q} outside a {}-qubit state",
                self.num_qubits()
            )));
        }
        Ok(())
    }

    /// Splits a two-qubit gate, absorbs its factors into the two leaves and
    /// threads the bond through every node on the path between them. The
    /// state is exactly `G|ψ⟩` afterwards but leaves and bonds are not yet
    /// compressed; internal tensors stay isometric.
    pub fn thread_gate(&mut self, g: &Gate) -> Result<()> {
        let &[qa, qb] = g.qubits() else {
            return Err(SimError::invalid(format!("{} is not a two-qubit gate", g.label())));
        };
        self.check_qubit(qa)?;
        self.check_qubit(qb)?;
        let split = split_gate(g)?;
        let k = split.k;
        let path = self.layout.path(qa, qb);
        let turning = path.turning;

        let mut updates: Vec<(usize, Vec<usize>)> = Vec::new();
        for up in [&path.up_a, &path.up_b] {
            for &id in up {
                let mut shape = self.tensors[id].shape().to_vec();
                *shape.last_mut().expect("parent axis") *= k;
                if let Some(&prev) = up.iter().take_while(|&&x| x != id).last() {
                    shape[self.layout.node(prev).child_index] *= k;
                }
                updates.push((id, shape));
            }
        }
        let mut turning_shape = self.tensors[turning].shape().to_vec();
        for up in [&path.up_a, &path.up_b] {
            let last = *up.last().expect("distinct leaves");
            turning_shape[self.layout.node(last).child_index] *= k;
        }
        updates.push((turning, turning_shape));

        let current = self.total_entries();
        let removed: usize = updates.iter().map(|(id, _)| self.tensors[*id].len()).sum();
        let added = updates
            .iter()
            .map(|(_, s)| s.iter().try_fold(1usize, |acc, &d| acc.checked_mul(d)))
            .try_fold(0usize, |acc, x| x.and_then(|x| acc.checked_add(x)));
        let requested = added.and_then(|a| (current - removed).checked_add(a));
        match requested {
            Some(r) if r <= self.memory_cap => {}
            _ => {
                return Err(SimError::MemoryCapExceeded {
                    requested: requested.unwrap_or(usize::MAX),
                    cap: self.memory_cap,
                })
            }
        }

        for (up, factor) in [(&path.up_a, &split.left), (&path.up_b, &split.right)] {
            let leaf = up[0];
            self.tensors[leaf] = absorb_factor(&self.tensors[leaf], 0, 1, factor)?;
            for w in up.windows(2) {
                let (below, id) = (w[0], w[1]);
                let t = &self.tensors[id];
                let axis = self.layout.node(below).child_index;
                self.tensors[id] = thread_axes(t, axis, t.rank() - 1, k, 1.0);
            }
        }
        let ca = self.layout.node(*path.up_a.last().expect("nonempty")).child_index;
        let cb = self.layout.node(*path.up_b.last().expect("nonempty")).child_index;
        let scale = 1.0 / (k as f64).sqrt();
        self.tensors[turning] = thread_axes(&self.tensors[turning], ca, cb, k, scale);

        for id in path.edges().chain([turning]) {
            self.dirty[id] = true;
        }
        Ok(())
    }

    pub fn apply_two_qubit(&mut self, g: &Gate, policy: TruncationPolicy) -> Result<()> {
        policy.validate()?;
        self.thread_gate(g)?;
        self.orthonormalize(policy)
    }

    /// Restores canonical form over every node touched since the last sweep
    /// and their ancestors: a bottom-up pass makes each node an isometry, then
    /// a depth-first pass from the root compresses every touched bond to its
    /// Schmidt rank while applying `policy`, and the root is rescaled to norm 1.
    pub fn orthonormalize(&mut self, policy: TruncationPolicy) -> Result<()> {
        policy.validate()?;
        let mut active = self.dirty.clone();
        for id in 0..self.layout.len() {
            if self.dirty[id] {
                for a in self.layout.ancestors(id).collect::<Vec<_>>() {
                    active[a] = true;
                }
            }
        }
        let root = self.layout.root();
        for id in self.layout.post_order() {
            if id == root || !active[id] {
                continue;
            }
            let (f, _) = self.factor_towards_parent(id, TruncationPolicy::Exact)?;
            let node = self.layout.node(id);
            let (parent, ci) = (node.parent.expect("non-root"), node.child_index);
            self.tensors[parent] = self.tensors[parent].apply_on_axis(ci, &f.s_vdag())?;
        }
        self.compress(root, &active, policy)?;

        let norm = self.tensors[root].norm();
        if !(norm.is_finite() && norm > 0.0) {
            return Err(SimError::NonConvergence {
                location: format!("node {root} (norm {norm})"),
            });
        }
        self.tensors[root].scale_mut(1.0 / norm);
        self.dirty.iter_mut().for_each(|d| *d = false);
        Ok(())
    }

    /// Replaces node `id` by the isometric factor of its
    /// (downstream × parent) matricization and returns the factorization.
    fn factor_towards_parent(
        &mut self,
        id: usize,
        policy: TruncationPolicy,
    ) -> Result<(crate::linalg::SvdFactors, bool)> {
        let t = &self.tensors[id];
        let dp = *t.shape().last().expect("parent axis");
        let m = t.clone().reshape(&[t.len() / dp, dp])?;
        let (f, cut) = factorize(&m, policy, format!("node {id}"))?;
        let mut shape = t.shape().to_vec();
        *shape.last_mut().expect("parent axis") = f.rank();
        self.tensors[id] = f.u.clone().reshape(&shape)?;
        if cut {
            self.truncation_events += 1;
            self.discarded_weight += f.discarded_weight;
        }
        Ok((f, cut))
    }

    fn compress(&mut self, id: usize, active: &[bool], policy: TruncationPolicy) -> Result<()> {
        let children = self.layout.node(id).children.clone();
        for (ci, child) in children.into_iter().enumerate() {
            if !active[child] {
                continue;
            }
            // Move the orthogonality centre down to `child`.
            let t = &self.tensors[id];
            let last = t.rank() - 1;
            let moved = t.move_axis(ci, last)?;
            let dc = moved.shape()[last];
            let mut shape = moved.shape().to_vec();
            let m = moved.reshape(&[t.len() / dc, dc])?;
            let (f, cut) = factorize(&m, policy, format!("node {id}"))?;
            if cut {
                self.truncation_events += 1;
                self.discarded_weight += f.discarded_weight;
            }
            shape[last] = f.rank();
            self.tensors[id] = f.u.clone().reshape(&shape)?.move_axis(last, ci)?;
            let ct = &self.tensors[child];
            self.tensors[child] = ct.apply_on_axis(ct.rank() - 1, &f.s_vdag())?;

            self.compress(child, active, policy)?;

            // And back up to `id`.
            let (f, _) = self.factor_towards_parent(child, policy)?;
            self.tensors[id] = self.tensors[id].apply_on_axis(ci, &f.s_vdag())?;
        }
        Ok(())
    }

    /// Marks every node for the next sweep.
    pub fn mark_all_dirty(&mut self) {
        self.dirty.iter_mut().for_each(|d| *d = true);
    }

    /// `max |A†A − I|` for node `id` matricized as (downstream × parent).
    pub fn node_isometry_defect(&self, id: usize) -> f64 {
        let t = &self.tensors[id];
        let dp = *t.shape().last().expect("parent axis");
        let m = t.clone().reshape(&[t.len() / dp, dp]).expect("same size");
        isometry_defect(&m).expect("matrix")
    }

    /// Largest isometry defect over all non-root nodes.
    pub fn canonical_deviation(&self) -> f64 {
        self.layout
            .edges()
            .map(|id| self.node_isometry_defect(id))
            .fold(0.0, f64::max)
    }

    /// Norm of the root tensor, which is the state norm in canonical form.
    pub fn root_norm(&self) -> f64 {
        self.tensors[self.layout.root()].norm()
    }

    pub fn metrics(&self) -> TtnMetrics {
        let d_max_observed = self
            .tensors
            .iter()
            .flat_map(|t| t.shape().iter().copied())
            .max()
            .unwrap_or(1);
        let edge_dims = self
            .layout
            .edges()
            .map(|id| {
                let node = self.layout.node(id);
                ((node.parent.expect("non-root"), node.child_index), self.edge_dim(id))
            })
            .collect();
        TtnMetrics {
            d_max_observed,
            m_entries: self.total_entries(),
            edge_dims,
        }
    }

    /// Dense amplitudes, qubit 0 most significant.
    pub fn contract_to_statevector(&self) -> Result<DenseState> {
        let n = self.num_qubits();
        if n > STATEVECTOR_QUBIT_CAP {
            return Err(SimError::TooManyQubits {
                qubits: n,
                cap: STATEVECTOR_QUBIT_CAP,
            });
        }
        let (t, order) = self.contract_subtree(self.layout.root())?;
        let mut pos = vec![0; n];
        for (i, &q) in order.iter().enumerate() {
            pos[q] = i;
        }
        let v = t.reshape(&vec![2; n])?.permute(&pos)?;
        DenseState::from_amplitudes(v.into_data())
    }

    /// Returns the subtree contracted to `(2^L, parent)` and its qubit order.
    fn contract_subtree(&self, id: usize) -> Result<(ComplexTensor, Vec<usize>)> {
        let node = self.layout.node(id);
        if let Some(q) = node.qubit {
            return Ok((self.tensors[id].clone(), vec![q]));
        }
        let mut acc = self.tensors[id].clone();
        let mut order = Vec::new();
        for (i, &c) in node.children.iter().enumerate() {
            let (sub, qubits) = self.contract_subtree(c)?;
            acc = contract(&acc, &[i], &sub, &[1])?;
            let last = acc.rank() - 1;
            acc = acc.move_axis(last, i)?;
            order.extend(qubits);
        }
        let dp = *acc.shape().last().expect("parent axis");
        let len = acc.len();
        Ok((acc.reshape(&[len / dp, dp])?, order))
    }

    /// Per-node shapes and bond dimensions as a JSON value.
    pub fn dump(&self) -> serde_json::Value {
        let nodes: Vec<_> = self
            .layout
            .nodes()
            .iter()
            .enumerate()
            .map(|(id, n)| {
                serde_json::json!({
                    "id": id,
                    "parent": n.parent,
                    "qubit": n.qubit,
                    "level": n.level,
                    "shape": self.tensors[id].shape(),
                })
            })
            .collect();
        let edges: Vec<_> = self
            .layout
            .edges()
            .map(|id| {
                let n = self.layout.node(id);
                serde_json::json!({
                    "edge": id,
                    "parent": n.parent,
                    "child_index": n.child_index,
                    "dim": self.edge_dim(id),
                })
            })
            .collect();
        serde_json::json!({ "nodes": nodes, "edges": edges })
    }
}
