//! Benchmark circuit families: a nearest-neighbour lattice, a clustered
//! tree-like pattern, and unstructured random circuits for oracle checks.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::gates::{cz, fsim, hadamard, random_single, random_two};
use super::Circuit;
use crate::error::{Result, SimError};

const THETA_RANGE: (f64, f64) = (0.2, 1.4);
const PHI_RANGE: (f64, f64) = (0.2, 2.9);

/// Grid edges activated by one of the four layer patterns on an `n x n`
/// lattice (qubit `r*n + c`): 0 right from even columns, 1 right from odd
/// columns, 2 down from even rows, 3 down from odd rows.
pub fn lattice_pattern_edges(n: usize, pattern: usize) -> Vec<(usize, usize)> {
    let mut edges = Vec::new();
    let parity = pattern % 2;
    for r in 0..n {
        for c in 0..n {
            let q = r * n + c;
            match pattern % 4 {
                0 | 1 if c % 2 == parity && c + 1 < n => edges.push((q, q + 1)),
                2 | 3 if r % 2 == parity && r + 1 < n => edges.push((q, q + n)),
                _ => {}
            }
        }
    }
    edges
}

/// `depth` layers of fSIM gates with seeded generic angles on an `n x n` grid.
pub fn gen_lattice(n: usize, depth: usize, seed: u64) -> Result<Circuit> {
    if n < 2 {
        return Err(SimError::invalid(format!("lattice side must be at least 2, got {n}")));
    }
    if depth == 0 {
        return Err(SimError::invalid("lattice depth must be at least 1"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut c = Circuit::new(n * n)?;
    for t in 0..depth {
        for (a, b) in lattice_pattern_edges(n, t % 4) {
            let theta = rng.random_range(THETA_RANGE.0..THETA_RANGE.1);
            let phi = rng.random_range(PHI_RANGE.0..PHI_RANGE.1);
            c.push(fsim(a, b, theta, phi))?;
        }
    }
    Ok(c)
}

/// `num_clusters` chains of four qubits plus a central qubit `4c`. Each
/// repetition runs a CZ chain inside every cluster; after the first
/// repetition each cluster's last qubit is coupled to the centre once.
pub fn gen_treelike(num_clusters: usize, reps: usize) -> Result<Circuit> {
    if num_clusters == 0 {
        return Err(SimError::invalid("need at least one cluster"));
    }
    if reps == 0 {
        return Err(SimError::invalid("need at least one repetition"));
    }
    let centre = 4 * num_clusters;
    let mut c = Circuit::new(centre + 1)?;
    for rep in 0..reps {
        for j in 0..num_clusters {
            let base = 4 * j;
            for i in 0..3 {
                c.push(cz(base + i, base + i + 1))?;
            }
        }
        if rep == 0 {
            for j in 0..num_clusters {
                c.push(cz(4 * j + 3, centre))?;
            }
        }
    }
    Ok(c)
}

/// `num_gates` Haar-random gates on `n` qubits; about two thirds act on a
/// uniformly random pair of distinct qubits, the rest on a single qubit.
pub fn gen_random(n: usize, num_gates: usize, seed: u64) -> Result<Circuit> {
    if n < 2 {
        return Err(SimError::invalid(format!("random circuits need at least 2 qubits, got {n}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut c = Circuit::new(n)?;
    for _ in 0..num_gates {
        let a = rng.random_range(0..n);
        if rng.random_bool(2.0 / 3.0) {
            let b = (a + rng.random_range(1..n)) % n;
            c.push(random_two(a, b, &mut rng))?;
        } else {
            c.push(random_single(a, &mut rng))?;
        }
    }
    Ok(c)
}

/// `c` preceded by a Hadamard on every qubit.
pub fn with_hadamard_layer(c: &Circuit) -> Circuit {
    let n = c.num_qubits();
    let gates = (0..n).map(hadamard).chain(c.gates().iter().cloned()).collect();
    Circuit::with_gates(n, gates).expect("same width")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::circuit::{gate_rank, GateRank};
    use std::collections::HashSet;

    #[test]
    fn lattice_sizes_and_determinism() {
        let c = gen_lattice(4, 8, 1).unwrap();
        assert_eq!(c.num_qubits(), 16);
        assert_eq!(gen_lattice(3, 4, 7).unwrap(), gen_lattice(3, 4, 7).unwrap());
        assert_ne!(gen_lattice(3, 4, 7).unwrap(), gen_lattice(3, 4, 8).unwrap());
        assert!(gen_lattice(1, 4, 0).is_err());
    }

    #[test]
    fn lattice_single_layer() {
        let c = gen_lattice(2, 1, 3).unwrap();
        let pairs: Vec<Vec<usize>> = c.gates().iter().map(|g| g.qubits().to_vec()).collect();
        assert_eq!(pairs, vec![vec![0, 1], vec![2, 3]]);
    }

    #[test]
    fn lattice_layers_are_disjoint_and_generic() {
        for n in 2..6 {
            for p in 0..4 {
                let mut seen = HashSet::new();
                for (a, b) in lattice_pattern_edges(n, p) {
                    assert!(seen.insert(a) && seen.insert(b));
                    let (ra, ca, rb, cb) = (a / n, a % n, b / n, b % n);
                    assert_eq!(ra.abs_diff(rb) + ca.abs_diff(cb), 1);
                }
            }
        }
        for g in gen_lattice(4, 8, 11).unwrap().gates() {
            assert_eq!(gate_rank(g).unwrap(), GateRank(4));
        }
    }

    #[test]
    fn treelike_counts() {
        let c = gen_treelike(4, 2).unwrap();
        assert_eq!(c.num_qubits(), 17);
        let small = gen_treelike(1, 1).unwrap();
        assert_eq!(small.num_qubits(), 5);
        assert_eq!(small.gates().len(), 4);
        let crossing: Vec<_> = c
            .gates()
            .iter()
            .filter(|g| g.qubits()[0] / 4 != g.qubits()[1] / 4)
            .collect();
        assert_eq!(crossing.len(), 4);
        for g in crossing {
            assert_eq!(g.qubits()[1], 16);
            assert_eq!(gate_rank(g).unwrap(), GateRank(2));
        }
        assert!(gen_treelike(0, 1).is_err());
    }

    #[test]
    fn random_circuits() {
        let c = gen_random(5, 40, 9).unwrap();
        assert_eq!(c.gates().len(), 40);
        assert_eq!(c, gen_random(5, 40, 9).unwrap());
        assert!(c.gates().iter().any(|g| g.is_two_qubit()));
        assert!(c.gates().iter().any(|g| !g.is_two_qubit()));
        assert!(gen_random(1, 3, 0).is_err());
        let h = with_hadamard_layer(&c);
        assert_eq!(h.gates().len(), 45);
        assert_eq!(&h.gates()[5..], c.gates());
    }
}
