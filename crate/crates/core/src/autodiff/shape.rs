use super::{Tape, Var};
use crate::error::{Error, Result};
use crate::tensor::Tensor;

impl<'t> Var<'t> {
    pub fn reshape(self, shape: &[usize]) -> Result<Var<'t>> {
        let x = self.value();
        let y = x.reshape(shape)?;
        let orig = x.shape().to_vec();
        self.tape.record(
            "reshape",
            y,
            &[self],
            Box::new(move |g| Ok(vec![Some(g.reshape(&orig)?)])),
        )
    }

    pub fn permute(self, axes: &[usize]) -> Result<Var<'t>> {
        let y = self.value().permute(axes)?;
        let mut inverse = vec![0; axes.len()];
        for (i, &a) in axes.iter().enumerate() {
            inverse[a] = i;
        }
        self.tape.record(
            "permute",
            y,
            &[self],
            Box::new(move |g| Ok(vec![Some(g.permute(&inverse)?)])),
        )
    }

    /// Swaps the last two axes.
    pub fn transpose_last(self) -> Result<Var<'t>> {
        let nd = self.shape().len();
        if nd < 2 {
            return Err(Error::shape("transpose", "need at least two axes"));
        }
        let mut axes: Vec<usize> = (0..nd).collect();
        axes.swap(nd - 2, nd - 1);
        self.permute(&axes)
    }

    /// Entries `start..end` along `axis`.
    pub fn slice(self, axis: usize, start: usize, end: usize) -> Result<Var<'t>> {
        let x = self.value();
        let y = x.slice_axis(axis, start, end)?;
        let shape = x.shape().to_vec();
        self.tape.record(
            "slice",
            y,
            &[self],
            Box::new(move |g| {
                let (outer, len, inner) = (
                    shape[..axis].iter().product::<usize>(),
                    shape[axis],
                    shape[axis + 1..].iter().product::<usize>(),
                );
                let width = (end - start) * inner;
                let mut out = vec![0.0; outer * len * inner];
                for o in 0..outer {
                    let dst = (o * len + start) * inner;
                    out[dst..dst + width].copy_from_slice(&g.data()[o * width..(o + 1) * width]);
                }
                Ok(vec![Some(Tensor::new(&shape, out)?)])
            }),
        )
    }

    /// Slice of the trailing axis.
    pub fn narrow_last(self, start: usize, end: usize) -> Result<Var<'t>> {
        let nd = self.shape().len();
        if nd == 0 {
            return Err(Error::shape("slice", "scalar input"));
        }
        self.slice(nd - 1, start, end)
    }

    pub fn broadcast_to(self, shape: &[usize]) -> Result<Var<'t>> {
        let x = self.value();
        let y = x.broadcast_to(shape)?;
        let orig = x.shape().to_vec();
        self.tape.record(
            "broadcast_to",
            y,
            &[self],
            Box::new(move |g| Ok(vec![Some(g.sum_to_shape(&orig)?)])),
        )
    }

    /// Inserts a length-1 axis at `axis`.
    pub fn unsqueeze(self, axis: usize) -> Result<Var<'t>> {
        let mut shape = self.shape();
        if axis > shape.len() {
            return Err(Error::shape(
                "unsqueeze",
                format!("axis {axis} out of range for {shape:?}"),
            ));
        }
        shape.insert(axis, 1);
        self.reshape(&shape)
    }

    /// Rows along axis 0; the backward pass scatter-adds into the source.
    pub fn index_select(self, ids: &[usize]) -> Result<Var<'t>> {
        let x = self.value();
        let y = x.index_select(ids)?;
        let shape = x.shape().to_vec();
        let ids = ids.to_vec();
        self.tape.record(
            "index_select",
            y,
            &[self],
            Box::new(move |g| {
                let w: usize = shape[1..].iter().product();
                let mut out = vec![0.0; shape[0] * w];
                for (k, &i) in ids.iter().enumerate() {
                    let src = &g.data()[k * w..(k + 1) * w];
                    for (d, s) in out[i * w..(i + 1) * w].iter_mut().zip(src) {
                        *d += s;
                    }
                }
                Ok(vec![Some(Tensor::new(&shape, out)?)])
            }),
        )
    }
}

impl Tape {
    /// Concatenation along `axis`.
    pub fn concat<'t>(&'t self, parts: &[Var<'t>], axis: usize) -> Result<Var<'t>> {
        let first = parts
            .first()
            .ok_or_else(|| Error::shape("concat", "no inputs"))?;
        for p in parts {
            first.same_tape(p)?;
        }
        let values: Vec<Tensor> = parts.iter().map(|p| p.value()).collect();
        let refs: Vec<&Tensor> = values.iter().collect();
        let y = Tensor::concat(&refs, axis)?;
        let widths: Vec<usize> = values.iter().map(|v| v.shape()[axis]).collect();
        self.record(
            "concat",
            y,
            parts,
            Box::new(move |g| {
                let mut start = 0;
                let mut grads = Vec::with_capacity(widths.len());
                for w in &widths {
                    grads.push(Some(g.slice_axis(axis, start, start + w)?));
                    start += w;
                }
                Ok(grads)
            }),
        )
    }
}
