//! Dense statevector oracle. Amplitude index bits are big-endian in qubit
//! number: qubit 0 is the most significant bit.

use std::fmt::Write as _;

use num_complex::Complex64;
use serde::Deserialize;

use crate::circuit::{Circuit, Gate};
use crate::error::{Result, SimError};
use crate::tensor::{ONE, ZERO};

pub const STATEVECTOR_QUBIT_CAP: usize = 20;

#[derive(Debug, Clone, PartialEq)]
pub struct DenseState {
    num_qubits: usize,
    amplitudes: Vec<Complex64>,
}

pub(crate) fn check_bits(n: usize, bits: &[u8]) -> Result<()> {
    if bits.len() != n {
        return Err(SimError::invalid(format!(
            "expected {n} initial bits, got {}",
            bits.len()
        )));
    }
    if let Some(b) = bits.iter().find(|&&b| b > 1) {
        return Err(SimError::invalid(format!("initial bits must be 0 or 1, got {b}")));
    }
    Ok(())
}

impl DenseState {
    pub fn basis(num_qubits: usize, bits: &[u8]) -> Result<Self> {
        if num_qubits > STATEVECTOR_QUBIT_CAP {
            return Err(SimError::TooManyQubits {
                qubits: num_qubits,
                cap: STATEVECTOR_QUBIT_CAP,
            });
        }
        check_bits(num_qubits, bits)?;
        let index = bits.iter().fold(0usize, |acc, &b| (acc << 1) | b as usize);
        let mut amplitudes = vec![ZERO; 1 << num_qubits];
        amplitudes[index] = ONE;
        Ok(Self {
            num_qubits,
            amplitudes,
        })
    }

    pub fn from_amplitudes(amplitudes: Vec<Complex64>) -> Result<Self> {
        let len = amplitudes.len();
        if !len.is_power_of_two() || len < 2 {
            return Err(SimError::invalid(format!(
                "{len} amplitudes is not a power of two of at least 2"
            )));
        }
        Ok(Self {
            num_qubits: len.trailing_zeros() as usize,
            amplitudes,
        })
    }

    pub fn num_qubits(&self) -> usize {
        self.num_qubits
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amplitudes
    }

    pub fn norm(&self) -> f64 {
        self.amplitudes.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn inner(&self, other: &Self) -> Result<Complex64> {
        if self.num_qubits != other.num_qubits {
            return Err(SimError::invalid(format!(
                "states on {} and {} qubits",
                self.num_qubits, other.num_qubits
            )));
        }
        Ok(self
            .amplitudes
            .iter()
            .zip(&other.amplitudes)
            .map(|(a, b)| a.conj() * b)
            .sum())
    }

    pub fn apply(&mut self, g: &Gate) -> Result<()> {
        let n = self.num_qubits;
        if let Some(&q) = g.qubits().iter().find(|&&q| q >= n) {
            return Err(SimError::invalid(format!("gate on qubit {q} of {n}")));
        }
        let m = g.matrix().data();
        let amps = &mut self.amplitudes;
        match *g.qubits() {
            [q] => {
                let bit = 1usize << (n - 1 - q);
                for i in 0..amps.len() {
                    if i & bit == 0 {
                        let (a0, a1) = (amps[i], amps[i | bit]);
                        amps[i] = m[0] * a0 + m[1] * a1;
                        amps[i | bit] = m[2] * a0 + m[3] * a1;
                    }
                }
            }
            [qa, qb] => {
                let ba = 1usize << (n - 1 - qa);
                let bb = 1usize << (n - 1 - qb);
                for i in 0..amps.len() {
                    if i & (ba | bb) == 0 {
                        let idx = [i, i | bb, i | ba, i | ba | bb];
                        let v = idx.map(|j| amps[j]);
                        for (r, &j) in idx.iter().enumerate() {
                            amps[j] = (0..4).map(|c| m[4 * r + c] * v[c]).sum();
                        }
                    }
                }
            }
            _ => unreachable!("gates act on one or two qubits"),
        }
        Ok(())
    }
}

/// Applies the circuit to the computational basis state `bits`.
pub fn sv_simulate(c: &Circuit, bits: &[u8]) -> Result<DenseState> {
    let mut state = DenseState::basis(c.num_qubits(), bits)?;
    for g in c.gates() {
        state.apply(g)?;
    }
    Ok(state)
}

/// `1 - |⟨a|b⟩|²`, clamped to `[0, 1]`.
pub fn overlap_error(a: &DenseState, b: &DenseState) -> Result<f64> {
    let ov = a.inner(b)?.norm_sqr();
    Ok((1.0 - ov).clamp(0.0, 1.0))
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct StateDoc {
    num_qubits: usize,
    amplitudes: Vec<[f64; 2]>,
}

/// Dense state as `{"num_qubits": N, "amplitudes": [[re, im], ...]}`, one
/// amplitude per line with 17 significant digits.
pub fn write_state(s: &DenseState) -> String {
    let mut out = String::from("{\n");
    let _ = writeln!(out, "  \"num_qubits\": {},", s.num_qubits());
    out.push_str("  \"amplitudes\": [\n");
    let len = s.amplitudes().len();
    for (i, z) in s.amplitudes().iter().enumerate() {
        let sep = if i + 1 < len { "," } else { "" };
        let _ = writeln!(out, "    [{:.16e}, {:.16e}]{sep}", z.re, z.im);
    }
    out.push_str("  ]\n}\n");
    out
}

pub fn parse_state(text: &str) -> Result<DenseState> {
    let doc: StateDoc = serde_json::from_str(text)?;
    let amplitudes: Vec<Complex64> = doc.amplitudes.iter().map(|&[re, im]| Complex64::new(re, im)).collect();
    if amplitudes.len() != 1usize.checked_shl(doc.num_qubits as u32).unwrap_or(0) {
        return Err(SimError::invalid(format!(
            "{} amplitudes do not match {} qubits",
            amplitudes.len(),
            doc.num_qubits
        )));
    }
    DenseState::from_amplitudes(amplitudes)
}
