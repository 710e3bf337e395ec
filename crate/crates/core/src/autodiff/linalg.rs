use std::sync::Arc;

use super::Var;
use crate::error::{Error, Result};
use crate::tensor::{gemm, matmul_impl, Tensor};

/// Row-compressed sparse matrix used for graph aggregation.
#[derive(Clone, Debug, PartialEq)]
pub struct SparseMatrix {
    rows: usize,
    cols: usize,
    offsets: Vec<usize>,
    indices: Vec<usize>,
    values: Vec<f64>,
}

impl SparseMatrix {
    /// Builds from `(row, col, value)` triplets; duplicates are summed.
    pub fn from_triplets(
        rows: usize,
        cols: usize,
        triplets: &[(usize, usize, f64)],
    ) -> Result<Self> {
        let mut sorted = triplets.to_vec();
        for &(r, c, _) in &sorted {
            if r >= rows || c >= cols {
                return Err(Error::shape(
                    "sparse",
                    format!("entry ({r}, {c}) outside {rows}x{cols}"),
                ));
            }
        }
        sorted.sort_by_key(|&(r, c, _)| (r, c));
        let mut offsets = vec![0usize; rows + 1];
        let mut indices = Vec::with_capacity(sorted.len());
        let mut values: Vec<f64> = Vec::with_capacity(sorted.len());
        let mut last = None;
        for (r, c, v) in sorted {
            if last == Some((r, c)) {
                *values.last_mut().expect("previous entry") += v;
                continue;
            }
            last = Some((r, c));
            indices.push(c);
            values.push(v);
            offsets[r + 1] += 1;
        }
        for r in 0..rows {
            offsets[r + 1] += offsets[r];
        }
        Ok(Self {
            rows,
            cols,
            offsets,
            indices,
            values,
        })
    }

    pub fn identity(n: usize) -> Self {
        Self {
            rows: n,
            cols: n,
            offsets: (0..=n).collect(),
            indices: (0..n).collect(),
            values: vec![1.0; n],
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    /// `(col, value)` pairs of row `r`.
    pub fn row(&self, r: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let span = self.offsets[r]..self.offsets[r + 1];
        self.indices[span.clone()]
            .iter()
            .copied()
            .zip(self.values[span].iter().copied())
    }

    pub fn transpose(&self) -> Self {
        let mut triplets = Vec::with_capacity(self.nnz());
        for r in 0..self.rows {
            for (c, v) in self.row(r) {
                triplets.push((c, r, v));
            }
        }
        Self::from_triplets(self.cols, self.rows, &triplets)
            .expect("transposed indices are in range")
    }

    /// `self * x` for a dense `x` of shape `[cols, d]`.
    pub fn matmul_dense(&self, x: &Tensor) -> Result<Tensor> {
        if x.ndim() != 2 || x.shape()[0] != self.cols {
            return Err(Error::shape(
                "spmm",
                format!("{}x{} sparse times {:?}", self.rows, self.cols, x.shape()),
            ));
        }
        let d = x.shape()[1];
        let mut out = vec![0.0; self.rows * d];
        for r in 0..self.rows {
            let dst = &mut out[r * d..(r + 1) * d];
            for (c, v) in self.row(r) {
                for (o, xv) in dst.iter_mut().zip(x.row(c)) {
                    *o += v * xv;
                }
            }
        }
        Tensor::new(&[self.rows, d], out)
    }
}

impl<'t> Var<'t> {
    /// Matrix product over the last two axes; `other` is a plain matrix or
    /// shares the batch shape of `self`.
    pub fn matmul(self, other: Var<'t>) -> Result<Var<'t>> {
        self.matmul_ext(false, other, false)
    }

    /// `self * other^T`.
    pub fn matmul_nt(self, other: Var<'t>) -> Result<Var<'t>> {
        self.matmul_ext(false, other, true)
    }

    fn matmul_ext(self, ta: bool, other: Var<'t>, tb: bool) -> Result<Var<'t>> {
        self.same_tape(&other)?;
        let (a, b) = (self.value(), other.value());
        let y = matmul_impl(&a, ta, &b, tb)?;
        self.tape.record(
            "matmul",
            y,
            &[self, other],
            Box::new(move |g| {
                // gradient of op(a): g * op(b)^T
                let ga_op = matmul_impl(g, false, &b, !tb)?;
                let ga = if ta { ga_op.transpose_last()? } else { ga_op };
                let gb = if b.ndim() == 2 && a.ndim() > 2 {
                    shared_rhs_grad(&a, ta, g, tb)?
                } else {
                    let gb_op = matmul_impl(&a, !ta, g, false)?;
                    if tb {
                        gb_op.transpose_last()?
                    } else {
                        gb_op
                    }
                };
                Ok(vec![Some(ga), Some(gb)])
            }),
        )
    }

    /// Sparse-dense product `s * self` for `self` of shape `[s.cols(), d]`.
    pub fn spmm(self, s: &Arc<SparseMatrix>) -> Result<Var<'t>> {
        let y = s.matmul_dense(&self.value())?;
        let st = Arc::new(s.transpose());
        self.tape.record(
            "spmm",
            y,
            &[self],
            Box::new(move |g| Ok(vec![Some(st.matmul_dense(g)?)])),
        )
    }
}

/// Gradient of a 2-D rhs shared across the batch of `a`, summed over the batch.
fn shared_rhs_grad(a: &Tensor, ta: bool, g: &Tensor, tb: bool) -> Result<Tensor> {
    let nd = a.ndim();
    let (ar, ac) = (a.shape()[nd - 2], a.shape()[nd - 1]);
    let batch: usize = a.shape()[..nd - 2].iter().product();
    let (m, k) = if ta { (ac, ar) } else { (ar, ac) };
    let n = g.shape()[g.ndim() - 1];
    let mut out = vec![0.0; k * n];
    if !ta {
        // fold the batch: op(b) grad = A2^T G2 with A2 [batch*m, k], G2 [batch*m, n]
        gemm(
            k,
            batch * m,
            n,
            a.data(),
            true,
            g.data(),
            false,
            &mut out,
            false,
        );
    } else {
        for i in 0..batch {
            let a_blk = &a.data()[i * ar * ac..(i + 1) * ar * ac];
            let g_blk = &g.data()[i * m * n..(i + 1) * m * n];
            gemm(k, m, n, a_blk, false, g_blk, false, &mut out, true);
        }
    }
    let gb_op = Tensor::new(&[k, n], out)?;
    if tb {
        gb_op.transpose_last()
    } else {
        Ok(gb_op)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::autodiff::{gradcheck_many, Tape};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn identity_times_x_is_x() {
        let tape = Tape::new();
        let x = Tensor::from_fn(&[3, 2], |i| i as f64 - 1.5);
        let y = tape
            .constant(Tensor::eye(3))
            .matmul(tape.constant(x.clone()))
            .unwrap();
        assert_eq!(y.value(), x);
    }

    #[test]
    fn zero_lhs_gives_zero_output_and_zero_rhs_gradient() {
        let tape = Tape::new();
        let a = tape.var(Tensor::zeros(&[2, 3]));
        let b = tape.var(Tensor::from_fn(&[3, 4], |i| i as f64));
        let c = a.matmul(b).unwrap();
        assert_eq!(c.value(), Tensor::zeros(&[2, 4]));
        tape.backward(c.sum().unwrap()).unwrap();
        assert_eq!(b.grad().unwrap(), Tensor::zeros(&[3, 4]));
    }

    #[test]
    fn random_matmul_passes_gradcheck() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let a = Tensor::randn(&[4, 5], 1.0, &mut rng);
        let b = Tensor::randn(&[5, 3], 1.0, &mut rng);
        let w = Tensor::randn(&[4, 3], 1.0, &mut rng);
        let r = gradcheck_many(
            |t, v| v[0].matmul(v[1])?.mul(t.constant(w.clone()))?.sum(),
            &[a, b],
            1e-5,
            1e-6,
        )
        .unwrap();
        assert!(r.passed, "{r:?}");
    }

    #[test]
    fn batched_and_transposed_products_pass_gradcheck() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let a = Tensor::randn(&[2, 3, 4], 1.0, &mut rng);
        let shared = Tensor::randn(&[5, 4], 1.0, &mut rng);
        let batched = Tensor::randn(&[2, 5, 4], 1.0, &mut rng);
        let r = gradcheck_many(
            |_, v| v[0].matmul_nt(v[1])?.square()?.sum(),
            &[a.clone(), shared],
            1e-5,
            1e-6,
        )
        .unwrap();
        assert!(r.passed, "shared: {r:?}");
        let r = gradcheck_many(
            |_, v| v[0].matmul_nt(v[1])?.square()?.sum(),
            &[a.clone(), batched.clone()],
            1e-5,
            1e-6,
        )
        .unwrap();
        assert!(r.passed, "batched: {r:?}");
        let bt = batched.transpose_last().unwrap();
        let r = gradcheck_many(
            |_, v| v[0].matmul(v[1])?.square()?.sum(),
            &[a, bt],
            1e-5,
            1e-6,
        )
        .unwrap();
        assert!(r.passed, "plain batched: {r:?}");
    }

    #[test]
    fn sparse_product_matches_dense_and_gradchecks() {
        let s = SparseMatrix::from_triplets(
            3,
            3,
            &[
                (0, 0, 0.5),
                (0, 2, 0.5),
                (1, 1, 1.0),
                (2, 0, 0.25),
                (2, 0, 0.25),
            ],
        )
        .unwrap();
        assert_eq!(s.nnz(), 4);
        let dense =
            Tensor::new(&[3, 3], vec![0.5, 0.0, 0.5, 0.0, 1.0, 0.0, 0.5, 0.0, 0.0]).unwrap();
        let x = Tensor::from_fn(&[3, 2], |i| i as f64 * 0.3 - 0.2);
        assert_eq!(s.matmul_dense(&x).unwrap(), dense.matmul(&x).unwrap());
        let s = Arc::new(s);
        let r = gradcheck_many(|_, v| v[0].spmm(&s)?.square()?.sum(), &[x], 1e-5, 1e-6).unwrap();
        assert!(r.passed, "{r:?}");
    }
}
