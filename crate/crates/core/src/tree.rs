//! Tree topologies: qubit similarity, clustering, subtree construction and
//! the arena layout the engines and dry-runs walk.

use std::cmp::Ordering;
use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::circuit::Circuit;
use crate::error::{Result, SimError};

/// Exact similarity `count + 1/den` stored as the fraction `(count·den + 1)/den`.
/// A zero denominator (no gates on either qubit) means similarity 0.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Similarity {
    num: u64,
    den: u64,
}

impl Similarity {
    pub const ZERO: Similarity = Similarity { num: 0, den: 1 };

    pub fn new(shared: u64, degree_sum: u64) -> Self {
        if degree_sum == 0 {
            return Self::ZERO;
        }
        Similarity {
            num: shared * degree_sum + 1,
            den: degree_sum,
        }
    }

    pub fn numerator(&self) -> u64 {
        self.num
    }

    pub fn denominator(&self) -> u64 {
        self.den
    }

    pub fn value(&self) -> f64 {
        self.num as f64 / self.den as f64
    }
}

impl Ord for Similarity {
    fn cmp(&self, other: &Self) -> Ordering {
        (self.num as u128 * other.den as u128).cmp(&(other.num as u128 * self.den as u128))
    }
}

impl PartialOrd for Similarity {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Display for Similarity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.num, self.den)
    }
}

/// Pairwise qubit similarity: the number of two-qubit gates shared by the
/// pair plus the reciprocal of their combined two-qubit gate count.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SimilarityMatrix {
    n: usize,
    values: Vec<Similarity>,
}

impl SimilarityMatrix {
    pub fn from_circuit(c: &Circuit) -> Self {
        let n = c.num_qubits();
        let mut degree = vec![0u64; n];
        let mut shared = vec![0u64; n * n];
        for g in c.two_qubit_gates() {
            let (a, b) = (g.qubits()[0], g.qubits()[1]);
            degree[a] += 1;
            degree[b] += 1;
            shared[a * n + b] += 1;
            shared[b * n + a] += 1;
        }
        let mut values = vec![Similarity::ZERO; n * n];
        for i in 0..n {
            for j in 0..n {
                if i != j {
                    values[i * n + j] = Similarity::new(shared[i * n + j], degree[i] + degree[j]);
                }
            }
        }
        Self { n, values }
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn get(&self, i: usize, j: usize) -> Similarity {
        self.values[i * self.n + j]
    }

    pub fn value(&self, i: usize, j: usize) -> f64 {
        self.get(i, j).value()
    }
}

pub fn similarity_matrix(c: &Circuit) -> SimilarityMatrix {
    SimilarityMatrix::from_circuit(c)
}

/// Tree node as written in topology files: `{"leaf": q}` or `{"children": [...]}`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TreeNodeSpec {
    Leaf(usize),
    #[serde(rename = "children")]
    Internal(Vec<TreeNodeSpec>),
}

impl TreeNodeSpec {
    pub fn leaves(&self) -> Vec<usize> {
        let mut out = Vec::new();
        self.collect_leaves(&mut out);
        out
    }

    fn collect_leaves(&self, out: &mut Vec<usize>) {
        match self {
            TreeNodeSpec::Leaf(q) => out.push(*q),
            TreeNodeSpec::Internal(ch) => ch.iter().for_each(|c| c.collect_leaves(out)),
        }
    }

    /// Height: leaves have height 0.
    pub fn height(&self) -> usize {
        match self {
            TreeNodeSpec::Leaf(_) => 0,
            TreeNodeSpec::Internal(ch) => 1 + ch.iter().map(|c| c.height()).max().unwrap_or(0),
        }
    }

    pub fn max_arity(&self) -> usize {
        match self {
            TreeNodeSpec::Leaf(_) => 0,
            TreeNodeSpec::Internal(ch) => ch
                .iter()
                .map(|c| c.max_arity())
                .max()
                .unwrap_or(0)
                .max(ch.len()),
        }
    }
}

/// Rooted tree whose leaves are exactly the qubits `0..N`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TreeTopology {
    root: TreeNodeSpec,
    num_qubits: usize,
}

impl TreeTopology {
    pub fn new(root: TreeNodeSpec) -> Result<Self> {
        fn check_arity(node: &TreeNodeSpec) -> Result<()> {
            if let TreeNodeSpec::Internal(ch) = node {
                if ch.len() < 2 {
                    return Err(SimError::invalid(format!(
                        "internal node with {} children; at least 2 required",
                        ch.len()
                    )));
                }
                ch.iter().try_for_each(check_arity)?;
            }
            Ok(())
        }
        check_arity(&root)?;
        let leaves = root.leaves();
        let n = leaves.len();
        let mut seen = vec![false; n];
        for &q in &leaves {
            if q >= n || seen[q] {
                return Err(SimError::invalid(format!(
                    "leaves must be a permutation of 0..{n}; found qubit {q}"
                )));
            }
            seen[q] = true;
        }
        Ok(Self {
            root,
            num_qubits: n,
        })
    }

    pub fn root(&self) -> &TreeNodeSpec {
        &self.root
    }

    pub fn num_qubits(&self) -> usize {
        self.num_qubits
    }

    pub fn height(&self) -> usize {
        self.root.height()
    }

    pub fn max_arity(&self) -> usize {
        self.root.max_arity()
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(&self.root).expect("tree serializes");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let root: TreeNodeSpec = serde_json::from_str(text)?;
        Self::new(root)
    }

    /// Perfect `m`-ary tree of the given height over qubits `0..m^height` in order.
    pub fn perfect(m: usize, height: usize) -> Result<Self> {
        if m < 2 {
            return Err(SimError::invalid("arity must be at least 2"));
        }
        fn build(m: usize, height: usize, next: &mut usize) -> TreeNodeSpec {
            if height == 0 {
                *next += 1;
                return TreeNodeSpec::Leaf(*next - 1);
            }
            TreeNodeSpec::Internal((0..m).map(|_| build(m, height - 1, next)).collect())
        }
        let mut next = 0;
        Self::new(build(m, height, &mut next))
    }

    pub fn layout(&self) -> TreeLayout {
        TreeLayout::new(self)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LayoutNode {
    pub parent: Option<usize>,
    pub children: Vec<usize>,
    pub qubit: Option<usize>,
    /// Position among the parent's children.
    pub child_index: usize,
    /// Height above the deepest leaf below; leaves are level 0.
    pub level: usize,
    pub depth: usize,
}

impl LayoutNode {
    pub fn is_leaf(&self) -> bool {
        self.qubit.is_some()
    }
}

/// Path between two leaves: the nodes climbed from each leaf (leaf first,
/// excluding the turning node) and the turning node itself.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TreePath {
    pub up_a: Vec<usize>,
    pub up_b: Vec<usize>,
    pub turning: usize,
}

impl TreePath {
    /// Edges on the path, identified by their child node.
    pub fn edges(&self) -> impl Iterator<Item = usize> + '_ {
        self.up_a.iter().chain(&self.up_b).copied()
    }

    pub fn len(&self) -> usize {
        self.up_a.len() + self.up_b.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Arena view of a topology with nodes numbered in pre-order (root = 0).
/// Every non-root node `x` owns the edge to its parent, so edge ids are node ids.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TreeLayout {
    nodes: Vec<LayoutNode>,
    leaf_of_qubit: Vec<usize>,
}

impl TreeLayout {
    pub fn new(t: &TreeTopology) -> Self {
        fn visit(
            spec: &TreeNodeSpec,
            parent: Option<usize>,
            child_index: usize,
            depth: usize,
            nodes: &mut Vec<LayoutNode>,
            leaf_of_qubit: &mut [usize],
        ) -> usize {
            let id = nodes.len();
            nodes.push(LayoutNode {
                parent,
                children: Vec::new(),
                qubit: None,
                child_index,
                level: 0,
                depth,
            });
            match spec {
                TreeNodeSpec::Leaf(q) => {
                    nodes[id].qubit = Some(*q);
                    leaf_of_qubit[*q] = id;
                }
                TreeNodeSpec::Internal(ch) => {
                    let mut level = 0;
                    for (i, c) in ch.iter().enumerate() {
                        let cid = visit(c, Some(id), i, depth + 1, nodes, leaf_of_qubit);
                        nodes[id].children.push(cid);
                        level = level.max(nodes[cid].level + 1);
                    }
                    nodes[id].level = level;
                }
            }
            id
        }
        let mut nodes = Vec::new();
        let mut leaf_of_qubit = vec![0; t.num_qubits()];
        visit(t.root(), None, 0, 0, &mut nodes, &mut leaf_of_qubit);
        Self {
            nodes,
            leaf_of_qubit,
        }
    }

    pub fn root(&self) -> usize {
        0
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn node(&self, id: usize) -> &LayoutNode {
        &self.nodes[id]
    }

    pub fn nodes(&self) -> &[LayoutNode] {
        &self.nodes
    }

    pub fn num_qubits(&self) -> usize {
        self.leaf_of_qubit.len()
    }

    pub fn leaf(&self, qubit: usize) -> usize {
        self.leaf_of_qubit[qubit]
    }

    /// Non-root nodes, i.e. edge ids, in pre-order.
    pub fn edges(&self) -> impl Iterator<Item = usize> {
        1..self.nodes.len()
    }

    /// Children before parents.
    pub fn post_order(&self) -> Vec<usize> {
        let mut out = Vec::with_capacity(self.nodes.len());
        let mut stack = vec![(self.root(), false)];
        while let Some((id, expanded)) = stack.pop() {
            if expanded {
                out.push(id);
            } else {
                stack.push((id, true));
                for &c in self.nodes[id].children.iter().rev() {
                    stack.push((c, false));
                }
            }
        }
        out
    }

    pub fn ancestors(&self, id: usize) -> impl Iterator<Item = usize> + '_ {
        std::iter::successors(self.nodes[id].parent, move |&p| self.nodes[p].parent)
    }

    pub fn path(&self, qa: usize, qb: usize) -> TreePath {
        let (mut a, mut b) = (self.leaf(qa), self.leaf(qb));
        let (mut up_a, mut up_b) = (Vec::new(), Vec::new());
        while self.nodes[a].depth > self.nodes[b].depth {
            up_a.push(a);
            a = self.nodes[a].parent.expect("deeper node has a parent");
        }
        while self.nodes[b].depth > self.nodes[a].depth {
            up_b.push(b);
            b = self.nodes[b].parent.expect("deeper node has a parent");
        }
        while a != b {
            up_a.push(a);
            up_b.push(b);
            a = self.nodes[a].parent.expect("distinct nodes below root");
            b = self.nodes[b].parent.expect("distinct nodes below root");
        }
        TreePath {
            up_a,
            up_b,
            turning: a,
        }
    }

    /// Qubits in the subtree below `id`.
    pub fn qubits_below(&self, id: usize) -> Vec<usize> {
        let mut out = Vec::new();
        let mut stack = vec![id];
        while let Some(x) = stack.pop() {
            match self.nodes[x].qubit {
                Some(q) => out.push(q),
                None => stack.extend(self.nodes[x].children.iter().rev()),
            }
        }
        out
    }

    pub fn max_arity(&self) -> usize {
        self.nodes.iter().map(|n| n.children.len()).max().unwrap_or(0)
    }

    pub fn height(&self) -> usize {
        self.nodes[0].level
    }
}

/// Partitions `0..n` into `num_clusters` groups by average-linkage
/// agglomeration. No merge may produce a cluster larger than
/// `ceil(1.5·n/num_clusters)`; if every candidate merge would, the two
/// clusters with the smallest combined size are merged instead.
/// Ties (within 1e-12) go to the pair with the smallest cluster indices, where
/// clusters are ordered by their smallest qubit.
pub fn cluster(s: &SimilarityMatrix, num_clusters: usize) -> Result<Vec<Vec<usize>>> {
    let n = s.len();
    if num_clusters == 0 || num_clusters > n {
        return Err(SimError::invalid(format!(
            "cluster count {num_clusters} outside 1..={n}"
        )));
    }
    let cap = (3 * n).div_ceil(2 * num_clusters);
    let mut clusters: Vec<Vec<usize>> = (0..n).map(|q| vec![q]).collect();
    while clusters.len() > num_clusters {
        let mut best: Option<(f64, usize, usize)> = None;
        for i in 0..clusters.len() {
            for j in i + 1..clusters.len() {
                if clusters[i].len() + clusters[j].len() > cap {
                    continue;
                }
                let total: f64 = clusters[i]
                    .iter()
                    .flat_map(|&a| clusters[j].iter().map(move |&b| s.value(a, b)))
                    .sum();
                let avg = total / (clusters[i].len() * clusters[j].len()) as f64;
                if best.is_none_or(|(b, _, _)| avg > b + 1e-12) {
                    best = Some((avg, i, j));
                }
            }
        }
        let (i, j) = match best {
            Some((_, i, j)) => (i, j),
            None => {
                let mut pick = (usize::MAX, 0, 1);
                for i in 0..clusters.len() {
                    for j in i + 1..clusters.len() {
                        let size = clusters[i].len() + clusters[j].len();
                        if size < pick.0 {
                            pick = (size, i, j);
                        }
                    }
                }
                (pick.1, pick.2)
            }
        };
        let moved = clusters.remove(j);
        clusters[i].extend(moved);
        clusters[i].sort_unstable();
    }
    Ok(clusters)
}

/// Builds a subtree over `qubits` by walking qubit pairs in order of
/// decreasing similarity (ties by index). Unseen qubits of each pair join the
/// current node; whenever the similarity strictly drops, the children gathered
/// so far are wrapped into one internal node which becomes the first child of
/// the next level.
pub fn create_subtree(qubits: &[usize], s: &SimilarityMatrix) -> TreeNodeSpec {
    let mut sorted: Vec<usize> = qubits.to_vec();
    sorted.sort_unstable();
    sorted.dedup();
    if sorted.len() == 1 {
        return TreeNodeSpec::Leaf(sorted[0]);
    }
    let mut pairs: Vec<(Similarity, usize, usize)> = Vec::new();
    for (x, &a) in sorted.iter().enumerate() {
        for &b in &sorted[x + 1..] {
            pairs.push((s.get(a, b), a, b));
        }
    }
    pairs.sort_by(|x, y| y.0.cmp(&x.0).then((x.1, x.2).cmp(&(y.1, y.2))));

    let mut children: Vec<TreeNodeSpec> = Vec::new();
    let mut seen = BTreeSet::new();
    let mut running = pairs[0].0;
    for &(sim, a, b) in &pairs {
        if sim < running {
            if children.len() >= 2 {
                children = vec![TreeNodeSpec::Internal(std::mem::take(&mut children))];
            }
            running = sim;
        }
        for q in [a, b] {
            if seen.insert(q) {
                children.push(TreeNodeSpec::Leaf(q));
            }
        }
    }
    if children.len() == 1 {
        children.pop().expect("one child")
    } else {
        TreeNodeSpec::Internal(children)
    }
}

/// Clusters the qubits and places one subtree per cluster under the root.
pub fn find_tree_structure(c: &Circuit, num_clusters: usize) -> Result<TreeTopology> {
    let s = similarity_matrix(c);
    let clusters = cluster(&s, num_clusters)?;
    let mut subtrees: Vec<TreeNodeSpec> =
        clusters.iter().map(|q| create_subtree(q, &s)).collect();
    let root = if subtrees.len() == 1 {
        subtrees.pop().expect("one subtree")
    } else {
        TreeNodeSpec::Internal(subtrees)
    };
    TreeTopology::new(root)
}

/// Largest level `l` with `2^(m^(l-1)) ≤ d_max`: subtrees of that height can
/// hold any state without exceeding `d_max` on their root edge.
pub fn l_cluster(m: usize, d_max: u64) -> usize {
    assert!(m >= 2 && d_max >= 2, "arity and d_max must be at least 2");
    let bits = (63 - d_max.leading_zeros()) as u128;
    let mut level = 1;
    let mut power = m as u128;
    while power <= bits {
        level += 1;
        power = power.saturating_mul(m as u128);
    }
    level
}
