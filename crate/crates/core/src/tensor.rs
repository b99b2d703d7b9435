//! Dense complex tensors in row-major layout (last axis fastest).
//!
//! Every node of the tree and chain engines, every gate and every
//! factorization result lives in a [`ComplexTensor`]. The layout is fixed so
//! that [`ComplexTensor::merge_axes`] is a documented bijection: the merged
//! row index of axes `(a0, a1, ..)` is `a0 * d1 * d2 ... + a1 * d2 ... + ..`.

use faer::linalg::matmul::matmul;
use faer::{Accum, MatMut, MatRef, Par};
use num_complex::Complex64;
use thiserror::Error;

pub const ZERO: Complex64 = Complex64 { re: 0.0, im: 0.0 };
pub const ONE: Complex64 = Complex64 { re: 1.0, im: 0.0 };

#[derive(Debug, Clone, PartialEq, Error)]
pub enum TensorError {
    #[error("shape {shape:?} holds {expected} entries but {actual} were supplied")]
    DataLength {
        shape: Vec<usize>,
        expected: usize,
        actual: usize,
    },
    #[error("axis dimensions must be at least 1, got shape {0:?}")]
    ZeroDimension(Vec<usize>),
    #[error("axis {axis} out of range for a rank-{rank} tensor")]
    AxisOutOfRange { axis: usize, rank: usize },
    #[error("axes {0:?} do not form a permutation of the tensor axes")]
    InvalidPermutation(Vec<usize>),
    #[error("contracted axes have different dimensions: {left} vs {right}")]
    DimensionMismatch { left: usize, right: usize },
    #[error("cannot reshape {from:?} into {to:?}")]
    Reshape { from: Vec<usize>, to: Vec<usize> },
    #[error("expected a matrix, got a rank-{0} tensor")]
    NotAMatrix(usize),
    #[error("matrix contains non-finite entries")]
    NonFinite,
    #[error("matrix factorization did not converge ({rows}x{cols})")]
    NoConvergence { rows: usize, cols: usize },
}

/// A dense multi-axis complex array.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexTensor {
    shape: Vec<usize>,
    data: Vec<Complex64>,
}

fn check_shape(shape: &[usize]) -> Result<usize, TensorError> {
    if shape.contains(&0) {
        return Err(TensorError::ZeroDimension(shape.to_vec()));
    }
    Ok(shape.iter().product())
}

fn row_major_strides(shape: &[usize]) -> Vec<usize> {
    let mut strides = vec![1; shape.len()];
    for i in (0..shape.len().saturating_sub(1)).rev() {
        strides[i] = strides[i + 1] * shape[i + 1];
    }
    strides
}

impl ComplexTensor {
    pub fn new(shape: Vec<usize>, data: Vec<Complex64>) -> Result<Self, TensorError> {
        let expected = check_shape(&shape)?;
        if expected != data.len() {
            return Err(TensorError::DataLength {
                shape,
                expected,
                actual: data.len(),
            });
        }
        Ok(Self { shape, data })
    }

    pub fn zeros(shape: &[usize]) -> Result<Self, TensorError> {
        let len = check_shape(shape)?;
        Ok(Self {
            shape: shape.to_vec(),
            data: vec![ZERO; len],
        })
    }

    /// Builds a tensor by evaluating `f` on every multi-index in row-major order.
    pub fn from_fn(
        shape: &[usize],
        mut f: impl FnMut(&[usize]) -> Complex64,
    ) -> Result<Self, TensorError> {
        let len = check_shape(shape)?;
        let mut data = Vec::with_capacity(len);
        let mut index = vec![0usize; shape.len()];
        for _ in 0..len {
            data.push(f(&index));
            for ax in (0..shape.len()).rev() {
                index[ax] += 1;
                if index[ax] < shape[ax] {
                    break;
                }
                index[ax] = 0;
            }
        }
        Ok(Self {
            shape: shape.to_vec(),
            data,
        })
    }

    pub fn identity(n: usize) -> Result<Self, TensorError> {
        Self::from_fn(&[n, n], |ix| if ix[0] == ix[1] { ONE } else { ZERO })
    }

    /// Row-major `rows x cols` matrix.
    pub fn matrix(rows: usize, cols: usize, data: Vec<Complex64>) -> Result<Self, TensorError> {
        Self::new(vec![rows, cols], data)
    }

    pub fn scalar(value: Complex64) -> Self {
        Self {
            shape: vec![1],
            data: vec![value],
        }
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn rank(&self) -> usize {
        self.shape.len()
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn data(&self) -> &[Complex64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [Complex64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<Complex64> {
        self.data
    }

    pub fn get(&self, index: &[usize]) -> Complex64 {
        debug_assert_eq!(index.len(), self.shape.len());
        let mut offset = 0;
        for (i, (&ix, &d)) in index.iter().zip(&self.shape).enumerate() {
            debug_assert!(ix < d, "index {ix} out of bounds on axis {i}");
            offset = offset * d + ix;
        }
        self.data[offset]
    }

    /// `(rows, cols)` of a rank-2 tensor.
    pub fn dims2(&self) -> Result<(usize, usize), TensorError> {
        match self.shape.as_slice() {
            &[r, c] => Ok((r, c)),
            _ => Err(TensorError::NotAMatrix(self.rank())),
        }
    }

    pub fn reshape(self, shape: &[usize]) -> Result<Self, TensorError> {
        let len = check_shape(shape)?;
        if len != self.data.len() {
            return Err(TensorError::Reshape {
                from: self.shape,
                to: shape.to_vec(),
            });
        }
        Ok(Self {
            shape: shape.to_vec(),
            data: self.data,
        })
    }

    /// Reorders axes so that output axis `i` is input axis `axes[i]`.
    pub fn permute(&self, axes: &[usize]) -> Result<Self, TensorError> {
        let rank = self.rank();
        let mut seen = vec![false; rank];
        if axes.len() != rank {
            return Err(TensorError::InvalidPermutation(axes.to_vec()));
        }
        for &a in axes {
            if a >= rank || seen[a] {
                return Err(TensorError::InvalidPermutation(axes.to_vec()));
            }
            seen[a] = true;
        }
        if axes.iter().enumerate().all(|(i, &a)| i == a) {
            return Ok(self.clone());
        }

        let in_strides = row_major_strides(&self.shape);
        let out_shape: Vec<usize> = axes.iter().map(|&a| self.shape[a]).collect();
        let strides: Vec<usize> = axes.iter().map(|&a| in_strides[a]).collect();
        let mut data = Vec::with_capacity(self.data.len());
        let mut index = vec![0usize; rank];
        let mut offset = 0usize;
        let last = rank - 1;
        // The innermost axis is walked in a tight loop; the rest is an odometer.
        let inner = out_shape[last];
        let inner_stride = strides[last];
        loop {
            let mut o = offset;
            for _ in 0..inner {
                data.push(self.data[o]);
                o += inner_stride;
            }
            let mut ax = last;
            loop {
                if ax == 0 {
                    return Ok(Self {
                        shape: out_shape,
                        data,
                    });
                }
                ax -= 1;
                index[ax] += 1;
                offset += strides[ax];
                if index[ax] < out_shape[ax] {
                    break;
                }
                offset -= strides[ax] * out_shape[ax];
                index[ax] = 0;
            }
        }
    }

    /// Moves `axis` to position `to`, keeping the relative order of the others.
    pub fn move_axis(&self, axis: usize, to: usize) -> Result<Self, TensorError> {
        let rank = self.rank();
        if axis >= rank || to >= rank {
            return Err(TensorError::AxisOutOfRange {
                axis: axis.max(to),
                rank,
            });
        }
        let mut order: Vec<usize> = (0..rank).filter(|&a| a != axis).collect();
        order.insert(to, axis);
        self.permute(&order)
    }

    /// Regroups all axes into a `p x q` matrix: rows enumerate `rows` axes,
    /// columns enumerate `cols` axes, both in the given order. No arithmetic
    /// is performed on the entries.
    pub fn merge_axes(&self, rows: &[usize], cols: &[usize]) -> Result<Self, TensorError> {
        let rank = self.rank();
        for &a in rows.iter().chain(cols) {
            if a >= rank {
                return Err(TensorError::AxisOutOfRange { axis: a, rank });
            }
        }
        let order: Vec<usize> = rows.iter().chain(cols).copied().collect();
        let permuted = self.permute(&order)?;
        let p: usize = rows.iter().map(|&a| self.shape[a]).product();
        let q: usize = cols.iter().map(|&a| self.shape[a]).product();
        permuted.reshape(&[p, q])
    }

    pub fn conj(&self) -> Self {
        Self {
            shape: self.shape.clone(),
            data: self.data.iter().map(|z| z.conj()).collect(),
        }
    }

    pub fn scale(&self, factor: Complex64) -> Self {
        Self {
            shape: self.shape.clone(),
            data: self.data.iter().map(|z| z * factor).collect(),
        }
    }

    pub fn scale_mut(&mut self, factor: f64) {
        for z in &mut self.data {
            *z *= factor;
        }
    }

    pub fn norm_sqr(&self) -> f64 {
        self.data.iter().map(|z| z.norm_sqr()).sum()
    }

    /// Frobenius norm.
    pub fn norm(&self) -> f64 {
        self.norm_sqr().sqrt()
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|z| z.re.is_finite() && z.im.is_finite())
    }

    /// Largest entrywise modulus of `self - other`; shapes must agree.
    pub fn max_abs_diff(&self, other: &Self) -> Option<f64> {
        if self.shape != other.shape {
            return None;
        }
        Some(
            self.data
                .iter()
                .zip(&other.data)
                .map(|(a, b)| (a - b).norm())
                .fold(0.0, f64::max),
        )
    }

    /// Frobenius norm of `self - other`; shapes must agree.
    pub fn distance(&self, other: &Self) -> Option<f64> {
        if self.shape != other.shape {
            return None;
        }
        Some(
            self.data
                .iter()
                .zip(&other.data)
                .map(|(a, b)| (a - b).norm_sqr())
                .sum::<f64>()
                .sqrt(),
        )
    }

    /// Conjugate transpose of a matrix.
    pub fn dagger(&self) -> Result<Self, TensorError> {
        let (r, c) = self.dims2()?;
        let mut data = Vec::with_capacity(self.len());
        for j in 0..c {
            for i in 0..r {
                data.push(self.data[i * c + j].conj());
            }
        }
        Ok(Self {
            shape: vec![c, r],
            data,
        })
    }

    /// Matrix product of two rank-2 tensors.
    pub fn matmul(&self, other: &Self) -> Result<Self, TensorError> {
        let (m, k) = self.dims2()?;
        let (k2, n) = other.dims2()?;
        if k != k2 {
            return Err(TensorError::DimensionMismatch { left: k, right: k2 });
        }
        Ok(Self {
            shape: vec![m, n],
            data: gemm(&self.data, &other.data, m, k, n),
        })
    }

    /// Replaces axis `axis` (dimension `d`) by the row index of `m` (`r x d`):
    /// `out[.., i, ..] = sum_j m[i, j] * self[.., j, ..]`. Axis order is kept.
    pub fn apply_on_axis(&self, axis: usize, m: &Self) -> Result<Self, TensorError> {
        let rank = self.rank();
        if axis >= rank {
            return Err(TensorError::AxisOutOfRange { axis, rank });
        }
        let (r, d) = m.dims2()?;
        if d != self.shape[axis] {
            return Err(TensorError::DimensionMismatch {
                left: d,
                right: self.shape[axis],
            });
        }
        let outer: usize = self.shape[..axis].iter().product();
        let inner: usize = self.shape[axis + 1..].iter().product();
        let mut data = vec![ZERO; outer * r * inner];
        if inner == 1 {
            // out (outer x r) = self (outer x d) * m^T
            let lhs = MatRef::from_row_major_slice(&self.data, outer, d);
            let rhs = MatRef::from_row_major_slice(&m.data, r, d).transpose();
            let dst = MatMut::from_row_major_slice_mut(&mut data, outer, r);
            matmul(dst, Accum::Replace, lhs, rhs, ONE, Par::Seq);
        } else {
            let lhs = MatRef::from_row_major_slice(&m.data, r, d);
            for o in 0..outer {
                let src = &self.data[o * d * inner..(o + 1) * d * inner];
                let dst = &mut data[o * r * inner..(o + 1) * r * inner];
                let rhs = MatRef::from_row_major_slice(src, d, inner);
                let dst = MatMut::from_row_major_slice_mut(dst, r, inner);
                matmul(dst, Accum::Replace, lhs, rhs, ONE, Par::Seq);
            }
        }
        let mut shape = self.shape.clone();
        shape[axis] = r;
        Ok(Self { shape, data })
    }
}

/// Row-major `m x k` times `k x n`.
pub(crate) fn gemm(a: &[Complex64], b: &[Complex64], m: usize, k: usize, n: usize) -> Vec<Complex64> {
    let mut out = vec![ZERO; m * n];
    if m * k * n >= 4096 {
        let lhs = MatRef::from_row_major_slice(a, m, k);
        let rhs = MatRef::from_row_major_slice(b, k, n);
        let dst = MatMut::from_row_major_slice_mut(&mut out, m, n);
        matmul(dst, Accum::Replace, lhs, rhs, ONE, Par::Seq);
        return out;
    }
    for i in 0..m {
        let row = &mut out[i * n..(i + 1) * n];
        for l in 0..k {
            let coef = a[i * k + l];
            if coef == ZERO {
                continue;
            }
            let brow = &b[l * n..(l + 1) * n];
            for (x, y) in row.iter_mut().zip(brow) {
                *x += coef * y;
            }
        }
    }
    out
}

/// Contracts `axes_a` of `a` with `axes_b` of `b` pairwise. The result's axes
/// are the remaining axes of `a` followed by the remaining axes of `b`.
pub fn contract(
    a: &ComplexTensor,
    axes_a: &[usize],
    b: &ComplexTensor,
    axes_b: &[usize],
) -> Result<ComplexTensor, TensorError> {
    if axes_a.len() != axes_b.len() {
        return Err(TensorError::DimensionMismatch {
            left: axes_a.len(),
            right: axes_b.len(),
        });
    }
    let check = |t: &ComplexTensor, axes: &[usize]| -> Result<Vec<usize>, TensorError> {
        let rank = t.rank();
        let mut used = vec![false; rank];
        for &ax in axes {
            if ax >= rank {
                return Err(TensorError::AxisOutOfRange { axis: ax, rank });
            }
            if used[ax] {
                return Err(TensorError::InvalidPermutation(axes.to_vec()));
            }
            used[ax] = true;
        }
        Ok((0..rank).filter(|&i| !used[i]).collect())
    };
    let free_a = check(a, axes_a)?;
    let free_b = check(b, axes_b)?;
    for (&x, &y) in axes_a.iter().zip(axes_b) {
        if a.shape[x] != b.shape[y] {
            return Err(TensorError::DimensionMismatch {
                left: a.shape[x],
                right: b.shape[y],
            });
        }
    }

    let m: usize = free_a.iter().map(|&i| a.shape[i]).product();
    let k: usize = axes_a.iter().map(|&i| a.shape[i]).product();
    let n: usize = free_b.iter().map(|&i| b.shape[i]).product();

    let mut order_a = free_a.clone();
    order_a.extend_from_slice(axes_a);
    let mut order_b = axes_b.to_vec();
    order_b.extend_from_slice(&free_b);
    let pa = a.permute(&order_a)?;
    let pb = b.permute(&order_b)?;

    let mut shape: Vec<usize> = free_a.iter().map(|&i| a.shape[i]).collect();
    shape.extend(free_b.iter().map(|&i| b.shape[i]));
    let data = gemm(&pa.data, &pb.data, m, k, n);
    if shape.is_empty() {
        shape.push(1);
    }
    ComplexTensor::new(shape, data)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn random_tensor(shape: &[usize], rng: &mut ChaCha8Rng) -> ComplexTensor {
        ComplexTensor::from_fn(shape, |_| c(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
            .unwrap()
    }

    #[test]
    fn rejects_bad_shapes() {
        assert!(matches!(
            ComplexTensor::new(vec![2, 3], vec![ZERO; 5]),
            Err(TensorError::DataLength { .. })
        ));
        assert!(matches!(
            ComplexTensor::zeros(&[2, 0]),
            Err(TensorError::ZeroDimension(_))
        ));
    }

    #[test]
    fn merge_identity_grouping() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let t = random_tensor(&[2, 3], &mut rng);
        let m = t.merge_axes(&[0], &[1]).unwrap();
        assert_eq!(m, t);
    }

    #[test]
    fn merge_row_major_index_arithmetic() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let t = random_tensor(&[2, 2, 2], &mut rng);
        let m = t.merge_axes(&[0, 1], &[2]).unwrap();
        assert_eq!(m.shape(), &[4, 2]);
        for a in 0..2 {
            for b in 0..2 {
                for cc in 0..2 {
                    assert_eq!(m.get(&[2 * a + b, cc]), t.get(&[a, b, cc]));
                }
            }
        }
    }

    #[test]
    fn merge_matches_brute_force_reindexer() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let t = random_tensor(&[2, 3, 4], &mut rng);
        let m = t.merge_axes(&[1], &[0, 2]).unwrap();
        assert_eq!(m.shape(), &[3, 8]);
        // Independent enumeration: walk the flat buffer and decode indices by division.
        for flat in 0..24 {
            let i0 = flat / 12;
            let i1 = (flat / 4) % 3;
            let i2 = flat % 4;
            let row = i1;
            let col = i0 * 4 + i2;
            assert_eq!(m.data()[row * 8 + col], t.data()[flat]);
        }
    }

    #[test]
    fn merge_rejects_out_of_range_axis() {
        let t = ComplexTensor::zeros(&[2, 2]).unwrap();
        assert!(matches!(
            t.merge_axes(&[0], &[2]),
            Err(TensorError::AxisOutOfRange { axis: 2, rank: 2 })
        ));
        assert!(t.merge_axes(&[0], &[0]).is_err());
    }

    #[test]
    fn contract_identity_with_vector() {
        let id = ComplexTensor::identity(2).unwrap();
        let v = ComplexTensor::new(vec![2], vec![c(0.3, 0.1), c(-0.5, 2.0)]).unwrap();
        let out = contract(&id, &[1], &v, &[0]).unwrap();
        assert_eq!(out, v);
    }

    #[test]
    fn full_contraction_with_conjugate_is_norm_squared() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let t = random_tensor(&[3, 2, 4], &mut rng);
        let out = contract(&t, &[0, 1, 2], &t.conj(), &[0, 1, 2]).unwrap();
        assert_eq!(out.shape(), &[1]);
        assert!((out.data()[0] - c(t.norm_sqr(), 0.0)).norm() < 1e-12);
    }

    #[test]
    fn contract_matches_naive_loops() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let a = random_tensor(&[2, 3, 4], &mut rng);
        let b = random_tensor(&[4, 3], &mut rng);
        let out = contract(&a, &[2, 1], &b, &[0, 1]).unwrap();
        assert_eq!(out.shape(), &[2]);
        for i in 0..2 {
            let mut acc = ZERO;
            for j in 0..3 {
                for k in 0..4 {
                    acc += a.get(&[i, j, k]) * b.get(&[k, j]);
                }
            }
            assert!((out.data()[i] - acc).norm() < 1e-12);
        }
    }

    #[test]
    fn contract_rejects_mismatched_dims() {
        let a = ComplexTensor::zeros(&[2, 3]).unwrap();
        let b = ComplexTensor::zeros(&[2, 3]).unwrap();
        assert!(matches!(
            contract(&a, &[1], &b, &[0]),
            Err(TensorError::DimensionMismatch { left: 3, right: 2 })
        ));
    }

    #[test]
    fn apply_on_axis_matches_contract() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let t = random_tensor(&[2, 3, 4], &mut rng);
        let m = random_tensor(&[5, 3], &mut rng);
        let direct = t.apply_on_axis(1, &m).unwrap();
        let via = contract(&m, &[1], &t, &[1]).unwrap().move_axis(0, 1).unwrap();
        assert!(direct.max_abs_diff(&via).unwrap() < 1e-12);
    }

    #[test]
    fn permute_roundtrip() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let t = random_tensor(&[2, 3, 4, 5], &mut rng);
        let p = t.permute(&[2, 0, 3, 1]).unwrap();
        assert_eq!(p.get(&[1, 0, 4, 2]), t.get(&[0, 2, 1, 4]));
        let back = p.permute(&[1, 3, 0, 2]).unwrap();
        assert_eq!(back, t);
    }
}
