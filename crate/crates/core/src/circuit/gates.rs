//! Gate library.

use std::f64::consts::FRAC_1_SQRT_2;

use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use super::{c64, Gate};
use crate::linalg::qr_econ;
use crate::tensor::{ComplexTensor, ONE, ZERO};

fn fixed(label: &str, qubits: Vec<usize>, rows: &[&[Complex64]]) -> Gate {
    let n = rows.len();
    let data: Vec<Complex64> = rows.iter().flat_map(|r| r.iter().copied()).collect();
    let m = ComplexTensor::matrix(n, n, data).expect("square gate matrix");
    Gate::new(label, qubits, m).expect("library gates are unitary")
}

pub fn hadamard(q: usize) -> Gate {
    let h = c64(FRAC_1_SQRT_2, 0.0);
    fixed("H", vec![q], &[&[h, h], &[h, -h]])
}

pub fn pauli_x(q: usize) -> Gate {
    fixed("X", vec![q], &[&[ZERO, ONE], &[ONE, ZERO]])
}

pub fn pauli_z(q: usize) -> Gate {
    fixed("Z", vec![q], &[&[ONE, ZERO], &[ZERO, -ONE]])
}

/// Rotation about Y: `[[cos θ/2, -sin θ/2], [sin θ/2, cos θ/2]]`.
pub fn ry(q: usize, theta: f64) -> Gate {
    let (s, c) = (theta / 2.0).sin_cos();
    fixed("RY", vec![q], &[&[c64(c, 0.0), c64(-s, 0.0)], &[c64(s, 0.0), c64(c, 0.0)]])
}

pub fn cnot(control: usize, target: usize) -> Gate {
    fixed(
        "CNOT",
        vec![control, target],
        &[
            &[ONE, ZERO, ZERO, ZERO],
            &[ZERO, ONE, ZERO, ZERO],
            &[ZERO, ZERO, ZERO, ONE],
            &[ZERO, ZERO, ONE, ZERO],
        ],
    )
}

pub fn cz(a: usize, b: usize) -> Gate {
    fixed(
        "CZ",
        vec![a, b],
        &[
            &[ONE, ZERO, ZERO, ZERO],
            &[ZERO, ONE, ZERO, ZERO],
            &[ZERO, ZERO, ONE, ZERO],
            &[ZERO, ZERO, ZERO, -ONE],
        ],
    )
}

pub fn identity2(a: usize, b: usize) -> Gate {
    Gate::new("II", vec![a, b], ComplexTensor::identity(4).unwrap()).unwrap()
}

/// The fermionic-simulation gate
/// `[[1,0,0,0],[0,cos θ,-i sin θ,0],[0,-i sin θ,cos θ,0],[0,0,0,e^{-iφ}]]`.
pub fn fsim(a: usize, b: usize, theta: f64, phi: f64) -> Gate {
    let (s, c) = theta.sin_cos();
    let cc = c64(c, 0.0);
    let ms = c64(0.0, -s);
    let ph = Complex64::from_polar(1.0, -phi);
    fixed(
        "FSIM",
        vec![a, b],
        &[
            &[ONE, ZERO, ZERO, ZERO],
            &[ZERO, cc, ms, ZERO],
            &[ZERO, ms, cc, ZERO],
            &[ZERO, ZERO, ZERO, ph],
        ],
    )
}

/// Kronecker product of two square matrices.
pub fn kron(a: &ComplexTensor, b: &ComplexTensor) -> ComplexTensor {
    let (ra, ca) = a.dims2().expect("matrix");
    let (rb, cb) = b.dims2().expect("matrix");
    ComplexTensor::from_fn(&[ra * rb, ca * cb], |ix| {
        a.get(&[ix[0] / rb, ix[1] / cb]) * b.get(&[ix[0] % rb, ix[1] % cb])
    })
    .expect("nonzero dims")
}

/// Haar-random `dim x dim` unitary (QR of a complex Gaussian matrix with the
/// phases of `R`'s diagonal divided out).
pub fn random_unitary<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> ComplexTensor {
    let g = ComplexTensor::from_fn(&[dim, dim], |_| {
        let re: f64 = StandardNormal.sample(rng);
        let im: f64 = StandardNormal.sample(rng);
        c64(re, im)
    })
    .expect("nonzero dims");
    let (q, r) = qr_econ(&g).expect("finite gaussian matrix");
    let phases: Vec<Complex64> = (0..dim)
        .map(|i| {
            let d = r.get(&[i, i]);
            if d.norm() > 0.0 {
                d / d.norm()
            } else {
                ONE
            }
        })
        .collect();
    ComplexTensor::from_fn(&[dim, dim], |ix| q.get(&[ix[0], ix[1]]) * phases[ix[1]])
        .expect("nonzero dims")
}

pub fn random_single<R: Rng + ?Sized>(q: usize, rng: &mut R) -> Gate {
    Gate::new("U1", vec![q], random_unitary(2, rng)).expect("unitary")
}

pub fn random_two<R: Rng + ?Sized>(a: usize, b: usize, rng: &mut R) -> Gate {
    Gate::new("U2", vec![a, b], random_unitary(4, rng)).expect("unitary")
}
