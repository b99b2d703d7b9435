//! Economical SVD and QR on [`ComplexTensor`] matrices.
//!
//! SVD comes from `faer` and QR from `nalgebra`; this module owns the ordering,
//! truncation and rank rules the engines rely on.

use faer::Mat;
use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::tensor::{ComplexTensor, TensorError};

/// `m ≈ u · diag(s) · v_dag` with `u` (`p x k`) and `v_dag` (`k x q`) isometric.
#[derive(Debug, Clone)]
pub struct SvdFactors {
    pub u: ComplexTensor,
    pub s: Vec<f64>,
    pub v_dag: ComplexTensor,
    /// Sum of squares of the discarded singular values.
    pub discarded_weight: f64,
    /// Number of singular values that were computed before truncation.
    pub full_rank: usize,
}

impl SvdFactors {
    pub fn rank(&self) -> usize {
        self.s.len()
    }

    /// `diag(s) · v_dag`, the factor absorbed by a neighbour after a sweep step.
    pub fn s_vdag(&self) -> ComplexTensor {
        let (k, q) = (self.s.len(), self.v_dag.shape()[1]);
        let mut out = self.v_dag.clone();
        let data = out.data_mut();
        for (a, &sigma) in self.s.iter().enumerate() {
            for z in &mut data[a * q..(a + 1) * q] {
                *z *= sigma;
            }
        }
        debug_assert_eq!(out.shape(), &[k, q]);
        out
    }

    /// `u · diag(s)`.
    pub fn u_s(&self) -> ComplexTensor {
        let k = self.s.len();
        let mut out = self.u.clone();
        for row in out.data_mut().chunks_mut(k) {
            for (z, &sigma) in row.iter_mut().zip(&self.s) {
                *z *= sigma;
            }
        }
        out
    }

    /// Keeps the leading `k` singular triplets, adding the rest to `discarded_weight`.
    pub fn truncate(mut self, k: usize) -> Self {
        let rank = self.rank();
        if k >= rank {
            return self;
        }
        let (p, q) = (self.u.shape()[0], self.v_dag.shape()[1]);
        self.discarded_weight += self.s[k..].iter().map(|x| x * x).sum::<f64>();
        self.s.truncate(k);
        let u: Vec<_> = self
            .u
            .data()
            .chunks(rank)
            .flat_map(|row| row[..k].iter().copied())
            .collect();
        let v: Vec<_> = self.v_dag.data()[..k * q].to_vec();
        self.u = ComplexTensor::matrix(p, k, u).expect("k >= 1");
        self.v_dag = ComplexTensor::matrix(k, q, v).expect("k >= 1");
        self
    }

    pub fn reconstruct(&self) -> ComplexTensor {
        self.u_s().matmul(&self.v_dag).expect("factor shapes agree")
    }
}

fn to_nalgebra(m: &ComplexTensor) -> Result<DMatrix<Complex64>, TensorError> {
    let (p, q) = m.dims2()?;
    if !m.is_finite() {
        return Err(TensorError::NonFinite);
    }
    Ok(DMatrix::from_row_slice(p, q, m.data()))
}

fn from_nalgebra(m: &DMatrix<Complex64>) -> ComplexTensor {
    let (p, q) = m.shape();
    let mut data = Vec::with_capacity(p * q);
    for i in 0..p {
        for j in 0..q {
            data.push(m[(i, j)]);
        }
    }
    ComplexTensor::matrix(p, q, data).expect("nonzero dimensions")
}

/// Number of singular values kept: those with `σ_i ≥ threshold · σ_1`, at most
/// `max_rank`, and never fewer than one.
pub fn retained_rank(s: &[f64], threshold: f64, max_rank: Option<usize>) -> usize {
    let lead = s.first().copied().unwrap_or(0.0);
    let mut k = s.iter().take_while(|&&x| x >= threshold * lead).count();
    if lead == 0.0 {
        k = 1;
    }
    if let Some(cap) = max_rank {
        k = k.min(cap);
    }
    k.clamp(1, s.len().max(1))
}

/// Economical SVD with relative-threshold and rank-cap truncation.
///
/// Singular values are returned in nonincreasing order; equal values keep
/// the order produced by the kernel, so a rank cap keeps the first ones.
pub fn svd_econ(
    m: &ComplexTensor,
    threshold: f64,
    max_rank: Option<usize>,
) -> Result<SvdFactors, TensorError> {
    let (p, q) = m.dims2()?;
    if !m.is_finite() {
        return Err(TensorError::NonFinite);
    }
    let data = m.data();
    let a = Mat::<Complex64>::from_fn(p, q, |i, j| data[i * q + j]);
    let svd = a
        .thin_svd()
        .map_err(|_| TensorError::NoConvergence { rows: p, cols: q })?;
    let kmin = p.min(q);
    let sv: Vec<f64> = (0..kmin).map(|i| svd.S()[i].re.max(0.0)).collect();
    if sv.iter().any(|x| !x.is_finite()) {
        return Err(TensorError::NoConvergence { rows: p, cols: q });
    }
    let (u, v) = (svd.U(), svd.V());
    let k = retained_rank(&sv, threshold, max_rank);
    let discarded_weight = sv[k..].iter().map(|x| x * x).sum();

    let mut u_data = Vec::with_capacity(p * k);
    for i in 0..p {
        for col in 0..k {
            u_data.push(u[(i, col)]);
        }
    }
    let mut v_data = Vec::with_capacity(k * q);
    for row in 0..k {
        for j in 0..q {
            v_data.push(v[(j, row)].conj());
        }
    }
    Ok(SvdFactors {
        u: ComplexTensor::matrix(p, k, u_data)?,
        s: sv[..k].to_vec(),
        v_dag: ComplexTensor::matrix(k, q, v_data)?,
        discarded_weight,
        full_rank: kmin,
    })
}

/// Economical QR: `q` is `p x min(p,q)` with orthonormal columns, `r` is upper triangular.
pub fn qr_econ(m: &ComplexTensor) -> Result<(ComplexTensor, ComplexTensor), TensorError> {
    let a = to_nalgebra(m)?;
    let qr = a.qr();
    let q = from_nalgebra(&qr.q());
    let r = from_nalgebra(&qr.r());
    if !q.is_finite() || !r.is_finite() {
        let (p, c) = m.dims2()?;
        return Err(TensorError::NoConvergence { rows: p, cols: c });
    }
    Ok((q, r))
}

/// Largest entrywise deviation of `m† m` from the identity.
pub fn isometry_defect(m: &ComplexTensor) -> Result<f64, TensorError> {
    let gram = m.dagger()?.matmul(m)?;
    let k = gram.shape()[0];
    let id = ComplexTensor::identity(k)?;
    Ok(gram.max_abs_diff(&id).expect("same shape"))
}
