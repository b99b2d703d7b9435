//! Circuit file format: a JSON document
//! `{"num_qubits": N, "gates": [{"label", "qubits", "matrix": [[re, im], ...]}]}`.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::Deserialize;

use super::{c64, Circuit, Gate};
use crate::error::{Result, SimError};
use crate::tensor::ComplexTensor;

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct CircuitDoc {
    num_qubits: usize,
    gates: Vec<GateDoc>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct GateDoc {
    label: String,
    qubits: Vec<usize>,
    matrix: Vec<[f64; 2]>,
}

/// Formats a float with 17 significant digits, enough to round-trip any f64.
pub(crate) fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

pub fn parse_circuit(text: &str) -> Result<Circuit> {
    let doc: CircuitDoc = serde_json::from_str(text)?;
    let mut circuit = Circuit::new(doc.num_qubits)?;
    for (i, g) in doc.gates.into_iter().enumerate() {
        let dim = match g.matrix.len() {
            4 => 2,
            16 => 4,
            n => {
                return Err(SimError::invalid(format!(
                    "gate {i} has {n} matrix entries, expected 4 or 16"
                )))
            }
        };
        if g.matrix.iter().flatten().any(|x| !x.is_finite()) {
            return Err(SimError::invalid(format!("gate {i} has non-finite entries")));
        }
        let data = g.matrix.iter().map(|&[re, im]| c64(re, im)).collect();
        let m = ComplexTensor::matrix(dim, dim, data)?;
        let gate = Gate::new(g.label, g.qubits, m)
            .map_err(|e| SimError::invalid(format!("gate {i}: {e}")))?;
        circuit.push(gate)?;
    }
    Ok(circuit)
}

/// Serializes with one gate per line so diffs stay readable.
pub fn write_circuit(c: &Circuit) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "{{");
    let _ = writeln!(out, "  \"num_qubits\": {},", c.num_qubits());
    if c.gates().is_empty() {
        let _ = writeln!(out, "  \"gates\": []");
    } else {
        let _ = writeln!(out, "  \"gates\": [");
        let n = c.gates().len();
        for (i, g) in c.gates().iter().enumerate() {
            let label = serde_json::to_string(g.label()).expect("strings serialize");
            let qubits: Vec<String> = g.qubits().iter().map(|q| q.to_string()).collect();
            let entries: Vec<String> = g
                .matrix()
                .data()
                .iter()
                .map(|z| format!("[{}, {}]", fmt_f64(z.re), fmt_f64(z.im)))
                .collect();
            let sep = if i + 1 < n { "," } else { "" };
            let _ = writeln!(
                out,
                "    {{\"label\": {label}, \"qubits\": [{}], \"matrix\": [{}]}}{sep}",
                qubits.join(", "),
                entries.join(", ")
            );
        }
        let _ = writeln!(out, "  ]");
    }
    out.push_str("}\n");
    out
}

pub fn load_circuit(path: impl AsRef<Path>) -> Result<Circuit> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|source| SimError::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_circuit(&text)
}

pub fn save_circuit(c: &Circuit, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, write_circuit(c)).map_err(|source| SimError::Io {
        path: path.display().to_string(),
        source,
    })
}
