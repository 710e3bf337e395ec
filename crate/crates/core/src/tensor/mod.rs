//! Dense row-major float64 tensors.
//!
//! A [`Tensor`] is an immutable value: the buffer sits behind an `Arc`, so
//! clones are cheap and tensors can be shared freely across threads. Every
//! transformation returns a new tensor.

mod broadcast;
mod gemm;

pub use broadcast::broadcast_shape;
pub(crate) use gemm::gemm;

use std::fmt;
use std::sync::Arc;

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};

#[derive(Clone, PartialEq)]
pub struct Tensor {
    shape: Vec<usize>,
    data: Arc<Vec<f64>>,
}

impl fmt::Debug for Tensor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        const PREVIEW: usize = 8;
        write!(f, "Tensor{:?} ", self.shape)?;
        if self.numel() <= PREVIEW {
            write!(f, "{:?}", self.data.as_slice())
        } else {
            write!(f, "{:?} ..", &self.data[..PREVIEW])
        }
    }
}

impl Tensor {
    pub fn new(shape: &[usize], data: Vec<f64>) -> Result<Self> {
        let expected: usize = shape.iter().product();
        if expected != data.len() {
            return Err(Error::shape(
                "tensor",
                format!(
                    "shape {shape:?} needs {expected} values, got {}",
                    data.len()
                ),
            ));
        }
        Ok(Self {
            shape: shape.to_vec(),
            data: Arc::new(data),
        })
    }

    /// Internal constructor for buffers whose length is known to match.
    pub(crate) fn from_parts(shape: Vec<usize>, data: Vec<f64>) -> Self {
        debug_assert_eq!(shape.iter().product::<usize>(), data.len());
        Self {
            shape,
            data: Arc::new(data),
        }
    }

    pub fn from_vec(data: Vec<f64>) -> Self {
        Self::from_parts(vec![data.len()], data)
    }

    pub fn scalar(value: f64) -> Self {
        Self::from_parts(Vec::new(), vec![value])
    }

    pub fn full(shape: &[usize], value: f64) -> Self {
        Self::from_parts(shape.to_vec(), vec![value; shape.iter().product()])
    }

    pub fn zeros(shape: &[usize]) -> Self {
        Self::full(shape, 0.0)
    }

    pub fn ones(shape: &[usize]) -> Self {
        Self::full(shape, 1.0)
    }

    pub fn from_fn(shape: &[usize], f: impl FnMut(usize) -> f64) -> Self {
        let n = shape.iter().product();
        Self::from_parts(shape.to_vec(), (0..n).map(f).collect())
    }

    /// Standard normal entries scaled by `std`.
    pub fn randn<R: Rng + ?Sized>(shape: &[usize], std: f64, rng: &mut R) -> Self {
        Self::from_fn(shape, |_| {
            let z: f64 = StandardNormal.sample(rng);
            z * std
        })
    }

    pub fn uniform<R: Rng + ?Sized>(shape: &[usize], lo: f64, hi: f64, rng: &mut R) -> Self {
        Self::from_fn(shape, |_| rng.random_range(lo..hi))
    }

    pub fn eye(n: usize) -> Self {
        Self::from_fn(&[n, n], |i| if i / n == i % n { 1.0 } else { 0.0 })
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn ndim(&self) -> usize {
        self.shape.len()
    }

    pub fn numel(&self) -> usize {
        self.data.len()
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn to_vec(&self) -> Vec<f64> {
        self.data.as_ref().clone()
    }

    pub fn into_vec(self) -> Vec<f64> {
        Arc::try_unwrap(self.data).unwrap_or_else(|shared| shared.as_ref().clone())
    }

    /// Value of a single-element tensor.
    pub fn item(&self) -> Result<f64> {
        if self.numel() != 1 {
            return Err(Error::shape(
                "item",
                format!("expected one element, shape is {:?}", self.shape),
            ));
        }
        Ok(self.data[0])
    }

    /// Size of the trailing axis (1 for scalars).
    pub fn last_dim(&self) -> usize {
        self.shape.last().copied().unwrap_or(1)
    }

    /// Number of trailing-axis rows.
    pub fn num_rows(&self) -> usize {
        self.numel().checked_div(self.last_dim()).unwrap_or(0)
    }

    /// Iterates over rows along the trailing axis.
    pub fn rows(&self) -> std::slice::ChunksExact<'_, f64> {
        self.data.chunks_exact(self.last_dim().max(1))
    }

    pub fn row(&self, i: usize) -> &[f64] {
        let d = self.last_dim();
        &self.data[i * d..(i + 1) * d]
    }

    /// Shape with the trailing axis removed.
    pub fn batch_shape(&self) -> &[usize] {
        &self.shape[..self.shape.len().saturating_sub(1)]
    }

    pub fn reshape(&self, shape: &[usize]) -> Result<Tensor> {
        let n: usize = shape.iter().product();
        if n != self.numel() {
            return Err(Error::shape(
                "reshape",
                format!("{:?} -> {shape:?}", self.shape),
            ));
        }
        Ok(Self {
            shape: shape.to_vec(),
            data: Arc::clone(&self.data),
        })
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Tensor {
        Self::from_parts(
            self.shape.clone(),
            self.data.iter().map(|&x| f(x)).collect(),
        )
    }

    /// Elementwise binary map with trailing-dimension broadcasting.
    pub fn zip_map(&self, other: &Tensor, f: impl Fn(f64, f64) -> f64) -> Result<Tensor> {
        broadcast::binary(self, other, f)
    }

    pub fn add(&self, other: &Tensor) -> Result<Tensor> {
        self.zip_map(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &Tensor) -> Result<Tensor> {
        self.zip_map(other, |a, b| a - b)
    }

    pub fn mul(&self, other: &Tensor) -> Result<Tensor> {
        self.zip_map(other, |a, b| a * b)
    }

    pub fn div(&self, other: &Tensor) -> Result<Tensor> {
        self.zip_map(other, |a, b| a / b)
    }

    pub fn scale(&self, s: f64) -> Tensor {
        self.map(|x| x * s)
    }

    pub fn broadcast_to(&self, shape: &[usize]) -> Result<Tensor> {
        broadcast::broadcast_to(self, shape)
    }

    /// Sums away broadcast dimensions so the result has `shape`.
    pub fn sum_to_shape(&self, shape: &[usize]) -> Result<Tensor> {
        broadcast::sum_to_shape(self, shape)
    }

    pub fn sum(&self) -> f64 {
        self.data.iter().sum()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0_f64, |m, x| m.max(x.abs()))
    }

    pub fn max_abs_diff(&self, other: &Tensor) -> Result<f64> {
        if self.shape != other.shape {
            return Err(Error::shape(
                "max_abs_diff",
                format!("{:?} vs {:?}", self.shape, other.shape),
            ));
        }
        Ok(self
            .data
            .iter()
            .zip(other.data.iter())
            .fold(0.0_f64, |m, (a, b)| m.max((a - b).abs())))
    }

    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|x| x.is_finite())
    }

    pub fn has_nan(&self) -> bool {
        self.data.iter().any(|x| x.is_nan())
    }

    fn check_axis(&self, op: &'static str, axis: usize) -> Result<()> {
        if axis >= self.ndim() {
            return Err(Error::shape(
                op,
                format!("axis {axis} out of range for shape {:?}", self.shape),
            ));
        }
        Ok(())
    }

    /// (outer, axis length, inner) decomposition around `axis`.
    pub(crate) fn axis_split(&self, axis: usize) -> (usize, usize, usize) {
        let outer = self.shape[..axis].iter().product();
        let inner = self.shape[axis + 1..].iter().product();
        (outer, self.shape[axis], inner)
    }

    pub fn sum_axis(&self, axis: usize, keepdim: bool) -> Result<Tensor> {
        self.check_axis("sum", axis)?;
        let (outer, len, inner) = self.axis_split(axis);
        let mut out = vec![0.0; outer * inner];
        for o in 0..outer {
            for a in 0..len {
                let src = &self.data[(o * len + a) * inner..(o * len + a + 1) * inner];
                let dst = &mut out[o * inner..(o + 1) * inner];
                for (d, s) in dst.iter_mut().zip(src) {
                    *d += s;
                }
            }
        }
        Ok(Self::from_parts(self.reduced_shape(axis, keepdim), out))
    }

    /// Maximum along `axis` together with the flat argmax position within the axis.
    pub fn max_axis(&self, axis: usize, keepdim: bool) -> Result<(Tensor, Vec<usize>)> {
        self.check_axis("max", axis)?;
        let (outer, len, inner) = self.axis_split(axis);
        if len == 0 {
            return Err(Error::shape("max", "empty axis"));
        }
        let mut out = vec![f64::NEG_INFINITY; outer * inner];
        let mut arg = vec![0usize; outer * inner];
        for o in 0..outer {
            for a in 0..len {
                for i in 0..inner {
                    let v = self.data[(o * len + a) * inner + i];
                    let slot = o * inner + i;
                    if v > out[slot] {
                        out[slot] = v;
                        arg[slot] = a;
                    }
                }
            }
        }
        Ok((
            Self::from_parts(self.reduced_shape(axis, keepdim), out),
            arg,
        ))
    }

    fn reduced_shape(&self, axis: usize, keepdim: bool) -> Vec<usize> {
        let mut shape = self.shape.clone();
        if keepdim {
            shape[axis] = 1;
        } else {
            shape.remove(axis);
        }
        shape
    }

    pub fn permute(&self, axes: &[usize]) -> Result<Tensor> {
        let nd = self.ndim();
        let mut seen = vec![false; nd];
        if axes.len() != nd
            || axes
                .iter()
                .any(|&a| a >= nd || std::mem::replace(&mut seen[a], true))
        {
            return Err(Error::shape(
                "permute",
                format!("{axes:?} is not a permutation of {nd} axes"),
            ));
        }
        let in_strides = strides(&self.shape);
        let out_shape: Vec<usize> = axes.iter().map(|&a| self.shape[a]).collect();
        let src_strides: Vec<usize> = axes.iter().map(|&a| in_strides[a]).collect();
        let mut out = Vec::with_capacity(self.numel());
        let mut idx = vec![0usize; nd];
        let mut offset = 0usize;
        for _ in 0..self.numel() {
            out.push(self.data[offset]);
            for d in (0..nd).rev() {
                idx[d] += 1;
                offset += src_strides[d];
                if idx[d] < out_shape[d] {
                    break;
                }
                offset -= src_strides[d] * out_shape[d];
                idx[d] = 0;
            }
        }
        Ok(Self::from_parts(out_shape, out))
    }

    /// Swaps the last two axes.
    pub fn transpose_last(&self) -> Result<Tensor> {
        let nd = self.ndim();
        if nd < 2 {
            return Err(Error::shape("transpose", "need at least two axes"));
        }
        let mut axes: Vec<usize> = (0..nd).collect();
        axes.swap(nd - 2, nd - 1);
        self.permute(&axes)
    }

    pub fn slice_axis(&self, axis: usize, start: usize, end: usize) -> Result<Tensor> {
        self.check_axis("slice", axis)?;
        if start > end || end > self.shape[axis] {
            return Err(Error::shape(
                "slice",
                format!(
                    "range {start}..{end} out of bounds for axis of length {}",
                    self.shape[axis]
                ),
            ));
        }
        let (outer, len, inner) = self.axis_split(axis);
        let width = (end - start) * inner;
        let mut out = Vec::with_capacity(outer * width);
        for o in 0..outer {
            let base = (o * len + start) * inner;
            out.extend_from_slice(&self.data[base..base + width]);
        }
        let mut shape = self.shape.clone();
        shape[axis] = end - start;
        Ok(Self::from_parts(shape, out))
    }

    pub fn concat(parts: &[&Tensor], axis: usize) -> Result<Tensor> {
        let first = parts
            .first()
            .ok_or_else(|| Error::shape("concat", "no tensors"))?;
        first.check_axis("concat", axis)?;
        for p in parts {
            let ok = p.ndim() == first.ndim()
                && p.shape
                    .iter()
                    .zip(&first.shape)
                    .enumerate()
                    .all(|(d, (a, b))| d == axis || a == b);
            if !ok {
                return Err(Error::shape(
                    "concat",
                    format!(
                        "{:?} incompatible with {:?} on axis {axis}",
                        p.shape, first.shape
                    ),
                ));
            }
        }
        let (outer, _, inner) = first.axis_split(axis);
        let total: usize = parts.iter().map(|p| p.shape[axis]).sum();
        let mut out = Vec::with_capacity(outer * total * inner);
        for o in 0..outer {
            for p in parts {
                let w = p.shape[axis] * inner;
                out.extend_from_slice(&p.data[o * w..(o + 1) * w]);
            }
        }
        let mut shape = first.shape.clone();
        shape[axis] = total;
        Ok(Self::from_parts(shape, out))
    }

    /// Selects rows along axis 0.
    pub fn index_select(&self, ids: &[usize]) -> Result<Tensor> {
        if self.ndim() == 0 {
            return Err(Error::shape("index_select", "scalar input"));
        }
        let n = self.shape[0];
        let w = self.numel() / n.max(1);
        let mut out = Vec::with_capacity(ids.len() * w);
        for &i in ids {
            if i >= n {
                return Err(Error::shape(
                    "index_select",
                    format!("index {i} out of range for {n} rows"),
                ));
            }
            out.extend_from_slice(&self.data[i * w..(i + 1) * w]);
        }
        let mut shape = self.shape.clone();
        shape[0] = ids.len();
        Ok(Self::from_parts(shape, out))
    }

    /// Matrix product over the last two axes. `other` is either a plain
    /// matrix shared by every batch entry or has the same batch shape.
    pub fn matmul(&self, other: &Tensor) -> Result<Tensor> {
        matmul_impl(self, false, other, false)
    }
}

pub(crate) fn strides(shape: &[usize]) -> Vec<usize> {
    let mut s = vec![1usize; shape.len()];
    for d in (0..shape.len().saturating_sub(1)).rev() {
        s[d] = s[d + 1] * shape[d + 1];
    }
    s
}

/// Batched product with optional transposition of either operand's last two axes.
pub(crate) fn matmul_impl(a: &Tensor, ta: bool, b: &Tensor, tb: bool) -> Result<Tensor> {
    if a.ndim() < 2 || b.ndim() < 2 {
        return Err(Error::shape("matmul", "operands need at least two axes"));
    }
    let (ar, ac) = (a.shape[a.ndim() - 2], a.shape[a.ndim() - 1]);
    let (br, bc) = (b.shape[b.ndim() - 2], b.shape[b.ndim() - 1]);
    let (m, k) = if ta { (ac, ar) } else { (ar, ac) };
    let (k2, n) = if tb { (bc, br) } else { (br, bc) };
    if k != k2 {
        return Err(Error::shape(
            "matmul",
            format!("inner dims differ: {:?} x {:?}", a.shape, b.shape),
        ));
    }
    let a_batch = &a.shape[..a.ndim() - 2];
    let b_batch = &b.shape[..b.ndim() - 2];
    let shared_b = b_batch.is_empty();
    if !shared_b && a_batch != b_batch {
        return Err(Error::shape(
            "matmul",
            format!("batch dims differ: {:?} x {:?}", a.shape, b.shape),
        ));
    }
    let batch: usize = a_batch.iter().product();
    let mut out = vec![0.0; batch * m * n];
    if shared_b && !ta {
        // fold the batch into the row dimension
        gemm(
            batch * m,
            k,
            n,
            a.data(),
            false,
            b.data(),
            tb,
            &mut out,
            false,
        );
    } else {
        for i in 0..batch {
            let a_blk = &a.data()[i * ar * ac..(i + 1) * ar * ac];
            let b_blk = if shared_b {
                b.data()
            } else {
                &b.data()[i * br * bc..(i + 1) * br * bc]
            };
            gemm(
                m,
                k,
                n,
                a_blk,
                ta,
                b_blk,
                tb,
                &mut out[i * m * n..(i + 1) * m * n],
                false,
            );
        }
    }
    let mut shape = a_batch.to_vec();
    shape.extend([m, n]);
    Ok(Tensor::from_parts(shape, out))
}
