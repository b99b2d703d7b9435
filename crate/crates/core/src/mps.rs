//! Matrix product state baseline. Site tensors have axes `(left, physical, right)`
//! and the canonical form is right-canonical with the norm held by site 0.
//! Long-range gates are threaded through the intermediate sites, not swapped.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::circuit::Gate;
use crate::error::{Result, SimError};
use crate::linalg::isometry_defect;
use crate::reference::{check_bits, DenseState, STATEVECTOR_QUBIT_CAP};
use crate::tensor::{contract, ComplexTensor, ONE, ZERO};
use crate::truncation::{factorize, TruncationPolicy};
use crate::ttn::{absorb_factor, split_gate, thread_axes, DEFAULT_MEMORY_CAP};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MpsMetrics {
    pub d_max_observed: usize,
    pub m_entries: usize,
    /// Dimension of the bond between site `i` and `i + 1`.
    pub bond_dims: Vec<usize>,
}

#[derive(Debug, Clone)]
pub struct MpsState {
    sites: Vec<ComplexTensor>,
    /// `order[site]` is the qubit held by that site.
    order: Vec<usize>,
    site_of: Vec<usize>,
    memory_cap: usize,
    truncation_events: usize,
    discarded_weight: f64,
}

impl MpsState {
    /// Product state with qubits placed on sites in index order.
    pub fn init(n: usize, bits: &[u8]) -> Result<Self> {
        Self::init_with_order(&(0..n).collect::<Vec<_>>(), bits)
    }

    /// Product state where site `i` holds qubit `order[i]`.
    pub fn init_with_order(order: &[usize], bits: &[u8]) -> Result<Self> {
        let n = order.len();
        if n == 0 {
            return Err(SimError::invalid("a chain needs at least one site"));
        }
        check_bits(n, bits)?;
        let mut site_of = vec![usize::MAX; n];
        for (site, &q) in order.iter().enumerate() {
            if q >= n || site_of[q] != usize::MAX {
                return Err(SimError::invalid(format!(
                    "qubit order must be a permutation of 0..{n}"
                )));
            }
            site_of[q] = site;
        }
        let sites = order
            .iter()
            .map(|&q| {
                let b = bits[q];
                ComplexTensor::new(
                    vec![1, 2, 1],
                    vec![if b == 0 { ONE } else { ZERO }, if b == 1 { ONE } else { ZERO }],
                )
            })
            .collect::<Result<Vec<_>, _>>()?;
        Ok(Self {
            sites,
            order: order.to_vec(),
            site_of,
            memory_cap: DEFAULT_MEMORY_CAP,
            truncation_events: 0,
            discarded_weight: 0.0,
        })
    }

    pub fn with_memory_cap(mut self, cap: usize) -> Self {
        self.memory_cap = cap;
        self
    }

    pub fn num_qubits(&self) -> usize {
        self.sites.len()
    }

    pub fn order(&self) -> &[usize] {
        &self.order
    }

    pub fn site(&self, i: usize) -> &ComplexTensor {
        &self.sites[i]
    }

    pub fn truncation_events(&self) -> usize {
        self.truncation_events
    }

    pub fn discarded_weight(&self) -> f64 {
        self.discarded_weight
    }

    pub fn total_entries(&self) -> usize {
        self.sites.iter().map(|t| t.len()).sum()
    }

    fn check_qubit(&self, q: usize) -> Result<()> {
        if q >= self.num_qubits() {
            return Err(SimError::invalid(format!(
                "qubit {q} outside a {}-qubit chain",
                self.num_qubits()
            )));
        }
        Ok(())
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
        let s = self.site_of[q];
        self.sites[s] = self.sites[s].apply_on_axis(1, g.matrix())?;
        Ok(())
    }

    /// Absorbs the split gate at both sites and threads its bond through
    /// the sites in between. The lower site also takes the `1/√k` factor.
    pub fn thread_gate(&mut self, g: &Gate) -> Result<()> {
        let &[qa, qb] = g.qubits() else {
            return Err(SimError::invalid(format!("{} is not a two-qubit gate", g.label())));
        };
        self.check_qubit(qa)?;
        self.check_qubit(qb)?;
        let split = split_gate(g)?;
        let k = split.k;
        let (sa, sb) = (self.site_of[qa], self.site_of[qb]);
        let (lo, hi, f_lo, f_hi) = if sa < sb {
            (sa, sb, &split.left, &split.right)
        } else {
            (sb, sa, &split.right, &split.left)
        };

        let current = self.total_entries();
        let removed: usize = self.sites[lo..=hi].iter().map(|t| t.len()).sum();
        let added = (lo..=hi)
            .map(|i| {
                let mult = if i == lo || i == hi { k } else { k * k };
                self.sites[i].len().checked_mul(mult)
            })
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

        let mut low = absorb_factor(&self.sites[lo], 1, 2, f_lo)?;
        low.scale_mut(1.0 / (k as f64).sqrt());
        self.sites[lo] = low;
        for i in lo + 1..hi {
            self.sites[i] = thread_axes(&self.sites[i], 0, 2, k, 1.0);
        }
        self.sites[hi] = absorb_factor(&self.sites[hi], 1, 0, f_hi)?;
        Ok(())
    }

    pub fn apply_two_qubit(&mut self, g: &Gate, policy: TruncationPolicy) -> Result<()> {
        policy.validate()?;
        self.thread_gate(g)?;
        self.orthonormalize(policy)
    }

    /// Left-to-right pass dropping numerical zeros, then a right-to-left pass
    /// applying `policy`; site 0 is finally rescaled to norm 1.
    pub fn orthonormalize(&mut self, policy: TruncationPolicy) -> Result<()> {
        policy.validate()?;
        let n = self.sites.len();
        for i in 0..n - 1 {
            let t = &self.sites[i];
            let (l, r) = (t.shape()[0], t.shape()[2]);
            let m = t.clone().reshape(&[l * 2, r])?;
            let (f, _) = factorize(&m, TruncationPolicy::Exact, format!("site {i}"))?;
            self.sites[i] = f.u.clone().reshape(&[l, 2, f.rank()])?;
            self.sites[i + 1] = self.sites[i + 1].apply_on_axis(0, &f.s_vdag())?;
        }
        for i in (1..n).rev() {
            let t = &self.sites[i];
            let (l, r) = (t.shape()[0], t.shape()[2]);
            let m = t.clone().reshape(&[l, 2 * r])?;
            let (f, cut) = factorize(&m, policy, format!("site {i}"))?;
            if cut {
                self.truncation_events += 1;
                self.discarded_weight += f.discarded_weight;
            }
            self.sites[i] = f.v_dag.clone().reshape(&[f.rank(), 2, r])?;
            self.sites[i - 1] = contract(&self.sites[i - 1], &[2], &f.u_s(), &[0])?;
        }
        let norm = self.sites[0].norm();
        if !(norm.is_finite() && norm > 0.0) {
            return Err(SimError::NonConvergence {
                location: format!("site 0 (norm {norm})"),
            });
        }
        self.sites[0].scale_mut(1.0 / norm);
        Ok(())
    }

    /// `max |A A† − I|` for site `i` matricized as left × (physical, right).
    pub fn site_isometry_defect(&self, i: usize) -> f64 {
        let t = &self.sites[i];
        let l = t.shape()[0];
        let m = t.clone().reshape(&[l, t.len() / l]).expect("same size");
        isometry_defect(&m.dagger().expect("matrix")).expect("matrix")
    }

    /// Largest right-canonical defect over sites `1..n`.
    pub fn canonical_deviation(&self) -> f64 {
        (1..self.sites.len())
            .map(|i| self.site_isometry_defect(i))
            .fold(0.0, f64::max)
    }

    pub fn head_norm(&self) -> f64 {
        self.sites[0].norm()
    }

    pub fn metrics(&self) -> MpsMetrics {
        let bond_dims: Vec<usize> = self.sites[..self.sites.len() - 1]
            .iter()
            .map(|t| t.shape()[2])
            .collect();
        MpsMetrics {
            d_max_observed: bond_dims.iter().copied().max().unwrap_or(1).max(2),
            m_entries: self.total_entries(),
            bond_dims,
        }
    }

    /// Dense amplitudes, qubit 0 most significant regardless of site order.
    pub fn contract_to_statevector(&self) -> Result<DenseState> {
        let n = self.num_qubits();
        if n > STATEVECTOR_QUBIT_CAP {
            return Err(SimError::TooManyQubits {
                qubits: n,
                cap: STATEVECTOR_QUBIT_CAP,
            });
        }
        let mut acc = self.sites[0].clone();
        for site in &self.sites[1..] {
            let last = acc.rank() - 1;
            acc = contract(&acc, &[last], site, &[0])?;
        }
        // Axes: (1, phys × n, 1).
        let v = acc.reshape(&vec![2; n])?;
        let v = v.permute(&self.site_of)?;
        DenseState::from_amplitudes(v.into_data())
    }
}

/// Seeded uniform permutation of `0..n`, for use as a chain order.
pub fn random_order(n: usize, seed: u64) -> Vec<usize> {
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    order
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::circuit::gates::{cnot, hadamard, random_single, random_two};
    use crate::circuit::Circuit;
    use crate::reference::sv_simulate;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn init_states() {
        let s = MpsState::init(3, &[0, 0, 0]).unwrap();
        assert_eq!(s.contract_to_statevector().unwrap().amplitudes()[0], ONE);
        let s = MpsState::init(2, &[0, 1]).unwrap();
        assert_eq!(s.contract_to_statevector().unwrap().amplitudes()[1], ONE);
        assert!(s.canonical_deviation() < 1e-12);
        assert_eq!(MpsState::init(4, &[0; 4]).unwrap().metrics().m_entries, 8);
        assert!(MpsState::init_with_order(&[0, 0], &[0, 0]).is_err());
    }

    #[test]
    fn adjacent_cnot_bond() {
        let mut s = MpsState::init(3, &[0; 3]).unwrap();
        s.apply_single_qubit(&hadamard(0)).unwrap();
        s.apply_two_qubit(&cnot(0, 1), TruncationPolicy::Exact).unwrap();
        assert_eq!(s.metrics().bond_dims, vec![2, 1]);
    }

    #[test]
    fn long_range_threading_grows_middle_bonds() {
        let mut s = MpsState::init(3, &[0; 3]).unwrap();
        s.apply_single_qubit(&hadamard(0)).unwrap();
        s.thread_gate(&cnot(0, 2)).unwrap();
        assert_eq!(s.site(1).shape(), &[2, 2, 2]);
        s.orthonormalize(TruncationPolicy::Exact).unwrap();
        assert_eq!(s.metrics().bond_dims, vec![2, 2]);
        let v = s.contract_to_statevector().unwrap();
        let h = std::f64::consts::FRAC_1_SQRT_2;
        assert!((v.amplitudes()[0] - h).norm() < 1e-12);
        assert!((v.amplitudes()[0b101] - h).norm() < 1e-12);
    }

    #[test]
    fn random_circuit_matches_oracle_for_any_order() {
        let n = 7;
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let mut c = Circuit::new(n).unwrap();
        for _ in 0..40 {
            let a = rng.random_range(0..n);
            if rng.random_bool(0.2) {
                c.push(random_single(a, &mut rng)).unwrap();
            } else {
                let b = (a + rng.random_range(1..n)) % n;
                c.push(random_two(a, b, &mut rng)).unwrap();
            }
        }
        let reference = sv_simulate(&c, &[0; 7]).unwrap();
        for order in [vec![0, 1, 2, 3, 4, 5, 6], vec![3, 6, 0, 5, 1, 4, 2]] {
            let mut s = MpsState::init_with_order(&order, &[0; 7]).unwrap();
            for g in c.gates() {
                s.apply_gate(g, TruncationPolicy::Exact).unwrap();
                assert!(s.canonical_deviation() < 1e-10);
                assert!((s.head_norm() - 1.0).abs() < 1e-10);
            }
            let v = s.contract_to_statevector().unwrap();
            for (a, b) in v.amplitudes().iter().zip(reference.amplitudes()) {
                assert!((a - b).norm() < 1e-10);
            }
        }
    }

    #[test]
    fn canonical_state_is_stable_under_resweep() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let mut s = MpsState::init(5, &[0; 5]).unwrap();
        for _ in 0..8 {
            let a = rng.random_range(0..5);
            let b = (a + rng.random_range(1..5)) % 5;
            s.apply_two_qubit(&random_two(a, b, &mut rng), TruncationPolicy::Exact)
                .unwrap();
        }
        let before = s.contract_to_statevector().unwrap();
        let dims = s.metrics().bond_dims;
        s.orthonormalize(TruncationPolicy::Threshold(0.0)).unwrap();
        let after = s.contract_to_statevector().unwrap();
        for (a, b) in before.amplitudes().iter().zip(after.amplitudes()) {
            assert!((a - b).norm() < 1e-12);
        }
        for (x, y) in s.metrics().bond_dims.iter().zip(&dims) {
            assert!(x <= y);
        }
    }

    #[test]
    fn memory_cap() {
        let mut s = MpsState::init(4, &[0; 4]).unwrap().with_memory_cap(9);
        let before = s.metrics();
        assert!(matches!(
            s.apply_two_qubit(&cnot(0, 3), TruncationPolicy::Exact),
            Err(SimError::MemoryCapExceeded { .. })
        ));
        assert_eq!(s.metrics(), before);
    }
}
