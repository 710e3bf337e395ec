use super::Var;
use crate::error::{Error, Result};
use crate::tensor::Tensor;

fn keepdim_shape(shape: &[usize], axis: usize) -> Vec<usize> {
    let mut s = shape.to_vec();
    s[axis] = 1;
    s
}

fn check_axis(op: &'static str, shape: &[usize], axis: usize) -> Result<()> {
    if axis >= shape.len() {
        return Err(Error::shape(
            op,
            format!("axis {axis} out of range for {shape:?}"),
        ));
    }
    if shape[axis] == 0 {
        return Err(Error::shape(op, "empty axis"));
    }
    Ok(())
}

/// Applies `f(row_in, row_out)` to every 1-D fiber along `axis`.
fn along_axis(x: &Tensor, axis: usize, mut f: impl FnMut(&[f64], &mut [f64])) -> Tensor {
    let (outer, len, inner) = x.axis_split(axis);
    let mut out = vec![0.0; x.numel()];
    let mut fin = vec![0.0; len];
    let mut fout = vec![0.0; len];
    for o in 0..outer {
        for i in 0..inner {
            let base = o * len * inner + i;
            if inner == 1 {
                f(&x.data()[base..base + len], &mut out[base..base + len]);
                continue;
            }
            for (a, v) in fin.iter_mut().enumerate() {
                *v = x.data()[base + a * inner];
            }
            f(&fin, &mut fout);
            for (a, &v) in fout.iter().enumerate() {
                out[base + a * inner] = v;
            }
        }
    }
    Tensor::new(x.shape(), out).expect("same shape")
}

fn softmax_row(x: &[f64], y: &mut [f64]) {
    let m = x.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut total = 0.0;
    for (yi, &xi) in y.iter_mut().zip(x) {
        *yi = (xi - m).exp();
        total += *yi;
    }
    for yi in y.iter_mut() {
        *yi /= total;
    }
}

impl<'t> Var<'t> {
    /// Sum of all entries, as a scalar.
    pub fn sum(self) -> Result<Var<'t>> {
        let x = self.value();
        let shape = x.shape().to_vec();
        self.tape.record(
            "sum",
            Tensor::scalar(x.sum()),
            &[self],
            Box::new(move |g| Ok(vec![Some(Tensor::full(&shape, g.data()[0]))])),
        )
    }

    pub fn mean(self) -> Result<Var<'t>> {
        let n = self.value().numel();
        if n == 0 {
            return Err(Error::shape("mean", "empty tensor"));
        }
        self.sum()?.scale(1.0 / n as f64)
    }

    pub fn sum_axis(self, axis: usize, keepdim: bool) -> Result<Var<'t>> {
        let x = self.value();
        if axis >= x.ndim() {
            return Err(Error::shape(
                "sum",
                format!("axis {axis} out of range for {:?}", x.shape()),
            ));
        }
        let shape = x.shape().to_vec();
        let y = x.sum_axis(axis, keepdim)?;
        self.tape.record(
            "sum_axis",
            y,
            &[self],
            Box::new(move |g| {
                let g = g.reshape(&keepdim_shape(&shape, axis))?;
                Ok(vec![Some(g.broadcast_to(&shape)?)])
            }),
        )
    }

    pub fn mean_axis(self, axis: usize, keepdim: bool) -> Result<Var<'t>> {
        let shape = self.shape();
        check_axis("mean", &shape, axis)?;
        self.sum_axis(axis, keepdim)?
            .scale(1.0 / shape[axis] as f64)
    }

    /// Maximum along `axis`; the gradient flows to the first maximal entry.
    pub fn max_axis(self, axis: usize, keepdim: bool) -> Result<Var<'t>> {
        let x = self.value();
        check_axis("max", x.shape(), axis)?;
        let (y, arg) = x.max_axis(axis, keepdim)?;
        let shape = x.shape().to_vec();
        self.tape.record(
            "max_axis",
            y,
            &[self],
            Box::new(move |g| {
                let (outer, len, inner) = (
                    shape[..axis].iter().product::<usize>(),
                    shape[axis],
                    shape[axis + 1..].iter().product::<usize>(),
                );
                let mut out = vec![0.0; outer * len * inner];
                for o in 0..outer {
                    for i in 0..inner {
                        let slot = o * inner + i;
                        out[(o * len + arg[slot]) * inner + i] = g.data()[slot];
                    }
                }
                Ok(vec![Some(Tensor::new(&shape, out)?)])
            }),
        )
    }

    /// Softmax along `axis`, computed after subtracting the maximum.
    pub fn softmax(self, axis: usize) -> Result<Var<'t>> {
        let x = self.value();
        check_axis("softmax", x.shape(), axis)?;
        let y = along_axis(&x, axis, softmax_row);
        let yc = y.clone();
        self.tape.record(
            "softmax",
            y,
            &[self],
            Box::new(move |g| {
                let gy = g.mul(&yc)?;
                let total = gy.sum_axis(axis, true)?;
                Ok(vec![Some(gy.sub(&yc.mul(&total)?)?)])
            }),
        )
    }

    pub fn log_softmax(self, axis: usize) -> Result<Var<'t>> {
        let x = self.value();
        check_axis("log_softmax", x.shape(), axis)?;
        let y = along_axis(&x, axis, |row, out| {
            let m = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let lse = m + row.iter().map(|v| (v - m).exp()).sum::<f64>().ln();
            for (o, v) in out.iter_mut().zip(row) {
                *o = v - lse;
            }
        });
        let p = y.map(f64::exp);
        self.tape.record(
            "log_softmax",
            y,
            &[self],
            Box::new(move |g| {
                let total = g.sum_axis(axis, true)?;
                Ok(vec![Some(g.sub(&p.mul(&total)?)?)])
            }),
        )
    }
}

#[cfg(test)]
mod tests {
    use crate::autodiff::{gradcheck, Tape};
    use crate::tensor::Tensor;

    #[test]
    fn softmax_of_uniform_row_is_uniform() {
        let tape = Tape::new();
        let x = tape.constant(Tensor::full(&[2, 5], 0.7));
        let y = x.softmax(1).unwrap().value();
        assert!(y.data().iter().all(|&v| (v - 0.2).abs() < 1e-15));
    }

    #[test]
    fn softmax_rows_sum_to_one_and_ignore_shifts() {
        let tape = Tape::new();
        let xv = Tensor::from_fn(&[3, 7], |i| ((i * 37) % 11) as f64 * 3.1 - 12.0);
        let y = tape.constant(xv.clone()).softmax(1).unwrap().value();
        for row in y.rows() {
            assert!((row.iter().sum::<f64>() - 1.0).abs() <= 1e-12);
        }
        let shifted = tape
            .constant(xv.map(|v| v + 123.4))
            .softmax(1)
            .unwrap()
            .value();
        assert!(y.max_abs_diff(&shifted).unwrap() <= 1e-12);
    }

    #[test]
    fn softmax_on_leading_axis_matches_transposed() {
        let xv = Tensor::from_fn(&[4, 3], |i| (i as f64 * 0.37).sin());
        let tape = Tape::new();
        let a = tape.constant(xv.clone()).softmax(0).unwrap().value();
        let b = tape
            .constant(xv.transpose_last().unwrap())
            .softmax(1)
            .unwrap()
            .value()
            .transpose_last()
            .unwrap();
        assert!(a.max_abs_diff(&b).unwrap() < 1e-15);
    }

    #[test]
    fn reductions_pass_gradcheck() {
        let x = Tensor::from_fn(&[3, 4, 2], |i| ((i * 7) % 24) as f64 * 0.21 - 1.0);
        let w = Tensor::from_fn(&[3, 4, 2], |i| ((i * 5) % 9) as f64 * 0.1 - 0.4);
        for axis in 0..3 {
            let r = gradcheck(
                |_, v| v.sum_axis(axis, false)?.square()?.sum(),
                &x,
                1e-5,
                1e-6,
            )
            .unwrap();
            assert!(r.passed, "sum_axis {axis}: {r:?}");
            let r = gradcheck(
                |_, v| v.mean_axis(axis, true)?.square()?.sum(),
                &x,
                1e-5,
                1e-6,
            )
            .unwrap();
            assert!(r.passed, "mean_axis {axis}: {r:?}");
            let r = gradcheck(
                |_, v| v.max_axis(axis, false)?.square()?.sum(),
                &x,
                1e-5,
                1e-6,
            )
            .unwrap();
            assert!(r.passed, "max_axis {axis}: {r:?}");
            let r = gradcheck(
                |t, v| v.softmax(axis)?.mul(t.constant(w.clone()))?.sum(),
                &x,
                1e-5,
                1e-6,
            )
            .unwrap();
            assert!(r.passed, "softmax {axis}: {r:?}");
            let r = gradcheck(
                |t, v| v.log_softmax(axis)?.mul(t.constant(w.clone()))?.sum(),
                &x,
                1e-5,
                1e-6,
            )
            .unwrap();
            assert!(r.passed, "log_softmax {axis}: {r:?}");
        }
        let r = gradcheck(|_, v| v.sum(), &x, 1e-5, 1e-6).unwrap();
        assert!(r.passed, "sum: {r:?}");
    }
}
