//! Symbolic simulation of bond dimensions ("dry-runs") and admissibility
//! analysis. No amplitudes are computed: each two-qubit gate multiplies the
//! bonds on its path by its Schmidt rank, and a reduction pass then clamps
//! every bond to the smaller product of the bonds on either side of it.

use std::fmt::Write as _;

use serde::Serialize;

use crate::circuit::{gate_rank, gates::fsim, Circuit};
use crate::error::{Result, SimError};
use crate::tree::{l_cluster, TreeLayout, TreeNodeSpec, TreeTopology};

/// Network shape a dry-run is performed on.
#[derive(Debug, Clone)]
pub enum DryRunTarget {
    Tree(TreeTopology),
    /// Chain with `order[site]` the qubit held by each site.
    Chain(Vec<usize>),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct EdgeDim {
    /// Child node id for trees, left site index for chains.
    pub edge: usize,
    /// Height of the upper endpoint for trees, 0 for chains.
    pub level: usize,
    pub dim: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct GateEvent {
    pub gate: usize,
    pub qubits: [usize; 2],
    pub k: usize,
    pub path_len: usize,
    /// `(edge, dim)` for every edge on the path after the reduction pass.
    pub touched: Vec<(usize, u64)>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct DryRunReport {
    pub network: &'static str,
    pub edges: Vec<EdgeDim>,
    pub d_max_observed: u64,
    pub m_entries: u64,
    pub cap: Option<u64>,
    /// Number of times a bond had to be clamped to `cap`.
    pub cap_events: usize,
    pub events: Vec<GateEvent>,
    pub d_max: Option<u64>,
    /// Whether every bond stays within `d_max`, when one is given.
    pub within_d_max: Option<bool>,
}

impl DryRunReport {
    /// Per-edge dimensions as CSV with header `edge,level,dim`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("edge,level,dim\n");
        for e in &self.edges {
            let _ = writeln!(out, "{},{},{}", e.edge, e.level, e.dim);
        }
        out
    }

    pub fn max_dim(&self) -> u64 {
        self.edges.iter().map(|e| e.dim).max().unwrap_or(1)
    }
}

/// One side of a bond: a constant factor times the product of other bonds.
#[derive(Debug, Clone)]
struct Side {
    factor: u64,
    bonds: Vec<usize>,
}

impl Side {
    fn bound(&self, dims: &[u64]) -> u64 {
        self.bonds
            .iter()
            .fold(self.factor, |acc, &b| acc.saturating_mul(dims[b]))
    }
}

struct Ledger {
    dims: Vec<u64>,
    sides: Vec<(Side, Side)>,
}

impl Ledger {
    fn reduce(&mut self) -> bool {
        let mut changed_any = false;
        loop {
            let mut changed = false;
            for e in 0..self.dims.len() {
                let (a, b) = &self.sides[e];
                let d = self.dims[e].min(a.bound(&self.dims)).min(b.bound(&self.dims));
                if d < self.dims[e] {
                    self.dims[e] = d;
                    changed = true;
                }
            }
            if !changed {
                return changed_any;
            }
            changed_any = true;
        }
    }

    fn clamp(&mut self, cap: u64) -> usize {
        let mut events = 0;
        for d in &mut self.dims {
            if *d > cap {
                *d = cap;
                events += 1;
            }
        }
        events
    }
}

struct Network {
    ledger: Ledger,
    /// External edge id and level for every ledger slot.
    labels: Vec<(usize, usize)>,
    kind: Kind,
}

enum Kind {
    Tree(TreeLayout),
    Chain { site_of: Vec<usize> },
}

impl Network {
    fn new(target: &DryRunTarget) -> Result<Self> {
        match target {
            DryRunTarget::Tree(t) => {
                let layout = t.layout();
                // Ledger slot of edge `x` is `x - 1`; the root has no edge.
                let slot = |x: usize| x - 1;
                let mut sides = Vec::new();
                let mut labels = Vec::new();
                for x in layout.edges() {
                    let node = layout.node(x);
                    let parent = node.parent.expect("non-root");
                    let below = if node.is_leaf() {
                        Side { factor: 2, bonds: vec![] }
                    } else {
                        Side {
                            factor: 1,
                            bonds: node.children.iter().map(|&c| slot(c)).collect(),
                        }
                    };
                    let mut above: Vec<usize> = layout
                        .node(parent)
                        .children
                        .iter()
                        .filter(|&&c| c != x)
                        .map(|&c| slot(c))
                        .collect();
                    if layout.node(parent).parent.is_some() {
                        above.push(slot(parent));
                    }
                    sides.push((below, Side { factor: 1, bonds: above }));
                    labels.push((x, layout.node(parent).level));
                }
                Ok(Self {
                    ledger: Ledger {
                        dims: vec![1; sides.len()],
                        sides,
                    },
                    labels,
                    kind: Kind::Tree(layout),
                })
            }
            DryRunTarget::Chain(order) => {
                let n = order.len();
                let mut site_of = vec![usize::MAX; n];
                for (s, &q) in order.iter().enumerate() {
                    if q >= n || site_of[q] != usize::MAX {
                        return Err(SimError::invalid(format!(
                            "qubit order must be a permutation of 0..{n}"
                        )));
                    }
                    site_of[q] = s;
                }
                let bonds = n.saturating_sub(1);
                let sides = (0..bonds)
                    .map(|i| {
                        let left = Side {
                            factor: 2,
                            bonds: if i > 0 { vec![i - 1] } else { vec![] },
                        };
                        let right = Side {
                            factor: 2,
                            bonds: if i + 1 < bonds { vec![i + 1] } else { vec![] },
                        };
                        (left, right)
                    })
                    .collect();
                Ok(Self {
                    ledger: Ledger {
                        dims: vec![1; bonds],
                        sides,
                    },
                    labels: (0..bonds).map(|i| (i, 0)).collect(),
                    kind: Kind::Chain { site_of },
                })
            }
        }
    }

    fn num_qubits(&self) -> usize {
        match &self.kind {
            Kind::Tree(l) => l.num_qubits(),
            Kind::Chain { site_of } => site_of.len(),
        }
    }

    fn path_slots(&self, qa: usize, qb: usize) -> Vec<usize> {
        match &self.kind {
            Kind::Tree(l) => l.path(qa, qb).edges().map(|x| x - 1).collect(),
            Kind::Chain { site_of } => {
                let (a, b) = (site_of[qa], site_of[qb]);
                (a.min(b)..a.max(b)).collect()
            }
        }
    }

    fn m_entries(&self) -> u64 {
        let dims = &self.ledger.dims;
        match &self.kind {
            Kind::Tree(l) => l
                .nodes()
                .iter()
                .enumerate()
                .map(|(x, node)| {
                    let up = if x == 0 { 1 } else { dims[x - 1] };
                    let down = if node.is_leaf() {
                        2
                    } else {
                        node.children
                            .iter()
                            .fold(1u64, |acc, &c| acc.saturating_mul(dims[c - 1]))
                    };
                    up.saturating_mul(down)
                })
                .fold(0u64, u64::saturating_add),
            Kind::Chain { site_of } => {
                let n = site_of.len();
                (0..n)
                    .map(|s| {
                        let l = if s > 0 { dims[s - 1] } else { 1 };
                        let r = if s + 1 < n { dims[s] } else { 1 };
                        l.saturating_mul(2).saturating_mul(r)
                    })
                    .fold(0u64, u64::saturating_add)
            }
        }
    }
}

/// Tracks bond dimensions through the circuit on the given network, starting
/// from a product state. With `cap`, bonds are clamped and each clamp is
/// counted; `d_max` only sets the reported verdict.
pub fn dryrun(
    c: &Circuit,
    target: &DryRunTarget,
    cap: Option<u64>,
    d_max: Option<u64>,
) -> Result<DryRunReport> {
    let mut net = Network::new(target)?;
    if net.num_qubits() != c.num_qubits() {
        return Err(SimError::invalid(format!(
            "network has {} qubits but the circuit has {}",
            net.num_qubits(),
            c.num_qubits()
        )));
    }
    if cap == Some(0) {
        return Err(SimError::invalid("cap must be at least 1"));
    }
    let mut events = Vec::new();
    let mut cap_events = 0;
    for (i, g) in c.gates().iter().enumerate() {
        if !g.is_two_qubit() {
            continue;
        }
        let k = gate_rank(g)?.0;
        let (qa, qb) = (g.qubits()[0], g.qubits()[1]);
        let path = net.path_slots(qa, qb);
        for &e in &path {
            net.ledger.dims[e] = net.ledger.dims[e].saturating_mul(k as u64);
        }
        net.ledger.reduce();
        if let Some(cap) = cap {
            loop {
                let clamped = net.ledger.clamp(cap);
                cap_events += clamped;
                if clamped == 0 || !net.ledger.reduce() {
                    break;
                }
            }
        }
        events.push(GateEvent {
            gate: i,
            qubits: [qa, qb],
            k,
            path_len: path.len(),
            touched: path
                .iter()
                .map(|&e| (net.labels[e].0, net.ledger.dims[e]))
                .collect(),
        });
    }
    let edges: Vec<EdgeDim> = net
        .labels
        .iter()
        .zip(&net.ledger.dims)
        .map(|(&(edge, level), &dim)| EdgeDim { edge, level, dim })
        .collect();
    let d_max_observed = edges.iter().map(|e| e.dim).max().unwrap_or(1).max(2);
    let within_d_max = d_max.map(|d| edges.iter().all(|e| e.dim <= d));
    Ok(DryRunReport {
        network: match target {
            DryRunTarget::Tree(_) => "tree",
            DryRunTarget::Chain(_) => "chain",
        },
        m_entries: net.m_entries(),
        edges,
        d_max_observed,
        cap,
        cap_events,
        events,
        d_max,
        within_d_max,
    })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct EdgeCrossing {
    pub edge: usize,
    pub level: usize,
    pub crossings: usize,
    /// Product of the Schmidt ranks of the crossing gates (saturating).
    pub rank_product: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct NodeCrossing {
    pub node: usize,
    pub level: usize,
    pub crossings: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AdmissibilityReport {
    pub arity: usize,
    pub d_max: u64,
    pub l_cluster: usize,
    /// Edges whose lower node sits at or above `l_cluster`.
    pub edges: Vec<EdgeCrossing>,
    /// Edges whose rank product exceeds `d_max`.
    pub violations: Vec<usize>,
    pub admissible: bool,
    /// `floor(log2(d_max) / 2)`: rank-4 gates allowed across one checked edge.
    pub edge_crossing_bound: usize,
    pub edge_crossings_ok: bool,
    /// `(m + 1)/4 · log2(d_max)`: rank-4 gates allowed through one node.
    pub node_crossing_bound: f64,
    /// Nodes at or above `l_cluster`. A gate counts for a node when its path
    /// passes through the node over at least one checked edge.
    pub nodes: Vec<NodeCrossing>,
    pub node_crossings_ok: bool,
}

pub fn edge_crossing_bound(d_max: u64) -> usize {
    ((63 - d_max.max(1).leading_zeros()) / 2) as usize
}

pub fn node_crossing_bound(m: usize, d_max: u64) -> f64 {
    (m as f64 + 1.0) / 4.0 * (d_max as f64).log2()
}

/// Checks that the gates crossing each edge above the cluster level have a
/// rank product of at most `d_max`.
pub fn admissible(c: &Circuit, t: &TreeTopology, d_max: u64) -> Result<AdmissibilityReport> {
    if t.num_qubits() != c.num_qubits() {
        return Err(SimError::invalid(format!(
            "topology has {} qubits but the circuit has {}",
            t.num_qubits(),
            c.num_qubits()
        )));
    }
    if d_max < 2 {
        return Err(SimError::invalid("d_max must be at least 2"));
    }
    let layout = t.layout();
    let arity = layout.max_arity().max(2);
    let lc = l_cluster(arity, d_max);
    let checked = |x: usize| x != 0 && layout.node(x).level >= lc;

    let mut crossings = vec![0usize; layout.len()];
    let mut products = vec![1u64; layout.len()];
    let mut node_counts = vec![0usize; layout.len()];
    for g in c.two_qubit_gates() {
        let k = gate_rank(g)?.0 as u64;
        let path = layout.path(g.qubits()[0], g.qubits()[1]);
        for x in path.edges() {
            crossings[x] += 1;
            products[x] = products[x].saturating_mul(k);
        }
        // Interior path nodes with their two path edges.
        for up in [&path.up_a, &path.up_b] {
            for w in up.windows(2) {
                if checked(w[0]) || checked(w[1]) {
                    node_counts[w[1]] += 1;
                }
            }
        }
        let (ea, eb) = (*path.up_a.last().expect("path"), *path.up_b.last().expect("path"));
        if checked(ea) || checked(eb) {
            node_counts[path.turning] += 1;
        }
    }

    let edges: Vec<EdgeCrossing> = layout
        .edges()
        .filter(|&x| checked(x))
        .map(|x| EdgeCrossing {
            edge: x,
            level: layout.node(layout.node(x).parent.expect("non-root")).level,
            crossings: crossings[x],
            rank_product: products[x],
        })
        .collect();
    let violations: Vec<usize> = edges
        .iter()
        .filter(|e| e.rank_product > d_max)
        .map(|e| e.edge)
        .collect();
    let edge_bound = edge_crossing_bound(d_max);
    let node_bound = node_crossing_bound(arity, d_max);
    let nodes: Vec<NodeCrossing> = (0..layout.len())
        .filter(|&x| !layout.node(x).is_leaf() && layout.node(x).level >= lc)
        .map(|x| NodeCrossing {
            node: x,
            level: layout.node(x).level,
            crossings: node_counts[x],
        })
        .collect();
    Ok(AdmissibilityReport {
        arity,
        d_max,
        l_cluster: lc,
        admissible: violations.is_empty(),
        edge_crossings_ok: edges.iter().all(|e| e.crossings <= edge_bound),
        node_crossings_ok: nodes.iter().all(|n| n.crossings as f64 <= node_bound),
        edges,
        violations,
        edge_crossing_bound: edge_bound,
        node_crossing_bound: node_bound,
        nodes,
    })
}

/// Fixed generic angles for the triangle pattern's gates.
const TRIANGLE_THETA: f64 = 0.7;
const TRIANGLE_PHI: f64 = 1.3;

/// Nested triangle pattern on `9·3^(levels−1)` qubits, returned with its
/// perfect 3-ary tree. Qubits are numbered by base-3 digit strings, most
/// significant digit first.
///
/// Every 9-qubit cluster gets a gate on each pair of its qubits, once before
/// and once after the links between clusters. Above the clusters, every node
/// links pairs of its children: `(0,1)` and `(1,2)` for `d_max = 16`, all
/// three pairs for `d_max = 64`. A link from child `a` to child `b` enters
/// `a` and keeps descending through one fixed child index: for `d_max = 64`
/// that index is `b`, for `d_max = 16` it is the end child facing `b`
/// (0 if `b < a`, else 2). Either way no edge above the clusters is crossed
/// by more than `log4(d_max)` links.
pub fn gen_triangle_pattern(levels: usize, d_max: u64) -> Result<(Circuit, TreeTopology)> {
    if levels == 0 {
        return Err(SimError::invalid("levels must be at least 1"));
    }
    let pairs: &[(usize, usize)] = match d_max {
        16 => &[(0, 1), (1, 2)],
        64 => &[(0, 1), (1, 2), (0, 2)],
        other => {
            return Err(SimError::invalid(format!(
                "triangle pattern defined for d_max 16 or 64, got {other}"
            )))
        }
    };
    let descend = |a: usize, b: usize| match d_max {
        64 => b,
        _ if b < a => 0,
        _ => 2,
    };
    let digits = levels + 1;
    let n = 3usize.pow(digits as u32);
    let qubit = |ds: &[usize]| ds.iter().fold(0, |acc, &d| acc * 3 + d);
    let gate = |a: usize, b: usize| fsim(a, b, TRIANGLE_THETA, TRIANGLE_PHI);
    let mut c = Circuit::new(n)?;

    let intra = |c: &mut Circuit| -> Result<()> {
        for cluster in 0..n / 9 {
            let base = cluster * 9;
            for i in 0..9 {
                for j in i + 1..9 {
                    c.push(gate(base + i, base + j))?;
                }
            }
        }
        Ok(())
    };
    intra(&mut c)?;
    // Nodes whose children are clusters or larger have prefixes of length
    // 0..=levels-2.
    for plen in 0..levels.saturating_sub(1) {
        for p in 0..3usize.pow(plen as u32) {
            let mut prefix = Vec::with_capacity(plen);
            let mut x = p;
            for _ in 0..plen {
                prefix.push(x % 3);
                x /= 3;
            }
            prefix.reverse();
            for &(a, b) in pairs {
                let end = |from: usize, to: usize| {
                    let mut ds = prefix.clone();
                    ds.push(from);
                    ds.resize(digits, descend(from, to));
                    qubit(&ds)
                };
                c.push(gate(end(a, b), end(b, a)))?;
            }
        }
    }
    if levels > 1 {
        intra(&mut c)?;
    }
    let topology = TreeTopology::perfect(3, digits)?;
    Ok((c, topology))
}

/// The natural chain order for a topology: leaves from left to right.
pub fn leaf_order(t: &TreeTopology) -> Vec<usize> {
    fn walk(n: &TreeNodeSpec, out: &mut Vec<usize>) {
        match n {
            TreeNodeSpec::Leaf(q) => out.push(*q),
            TreeNodeSpec::Internal(ch) => ch.iter().for_each(|c| walk(c, out)),
        }
    }
    let mut out = Vec::new();
    walk(t.root(), &mut out);
    out
}
