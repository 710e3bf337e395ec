use super::{strides, Tensor};
use crate::error::{Error, Result};

/// Output shape of broadcasting `a` against `b` with trailing-axis alignment.
pub fn broadcast_shape(a: &[usize], b: &[usize]) -> Result<Vec<usize>> {
    let nd = a.len().max(b.len());
    let mut out = vec![0; nd];
    for i in 0..nd {
        let da = if i < nd - a.len() {
            1
        } else {
            a[i - (nd - a.len())]
        };
        let db = if i < nd - b.len() {
            1
        } else {
            b[i - (nd - b.len())]
        };
        out[i] = match (da, db) {
            (x, y) if x == y => x,
            (1, y) => y,
            (x, 1) => x,
            _ => {
                return Err(Error::shape(
                    "broadcast",
                    format!("{a:?} and {b:?} are not broadcast-compatible"),
                ))
            }
        };
    }
    Ok(out)
}

/// Strides of `shape` viewed inside `out`, with zero stride on broadcast axes.
fn aligned_strides(shape: &[usize], out: &[usize]) -> Vec<usize> {
    let own = strides(shape);
    let pad = out.len() - shape.len();
    (0..out.len())
        .map(|d| {
            if d < pad || shape[d - pad] == 1 {
                0
            } else {
                own[d - pad]
            }
        })
        .collect()
}

/// Calls `f(out_flat, offset)` for every output index with the matching input offset.
fn walk(out: &[usize], st: &[usize], mut f: impl FnMut(usize, usize)) {
    let n: usize = out.iter().product();
    let nd = out.len();
    let mut idx = vec![0usize; nd];
    let mut off = 0usize;
    for flat in 0..n {
        f(flat, off);
        for d in (0..nd).rev() {
            idx[d] += 1;
            off += st[d];
            if idx[d] < out[d] {
                break;
            }
            off -= st[d] * out[d];
            idx[d] = 0;
        }
    }
}

pub(super) fn binary(a: &Tensor, b: &Tensor, f: impl Fn(f64, f64) -> f64) -> Result<Tensor> {
    if a.shape == b.shape {
        let data = a
            .data
            .iter()
            .zip(b.data.iter())
            .map(|(&x, &y)| f(x, y))
            .collect();
        return Ok(Tensor::from_parts(a.shape.clone(), data));
    }
    let out = broadcast_shape(&a.shape, &b.shape)?;
    if b.numel() == 1 && out == a.shape {
        let y = b.data[0];
        return Ok(Tensor::from_parts(
            out,
            a.data.iter().map(|&x| f(x, y)).collect(),
        ));
    }
    if a.numel() == 1 && out == b.shape {
        let x = a.data[0];
        return Ok(Tensor::from_parts(
            out,
            b.data.iter().map(|&y| f(x, y)).collect(),
        ));
    }
    // b tiles a along leading axes
    if out == a.shape && a.shape.ends_with(&b.shape) {
        let w = b.numel();
        let mut data = Vec::with_capacity(a.numel());
        for chunk in a.data.chunks_exact(w) {
            data.extend(chunk.iter().zip(b.data.iter()).map(|(&x, &y)| f(x, y)));
        }
        return Ok(Tensor::from_parts(out, data));
    }
    let sa = aligned_strides(&a.shape, &out);
    let sb = aligned_strides(&b.shape, &out);
    let n: usize = out.iter().product();
    let mut data = vec![0.0; n];
    let mut offs_a = vec![0usize; n];
    walk(&out, &sa, |flat, off| offs_a[flat] = off);
    walk(&out, &sb, |flat, off| {
        data[flat] = f(a.data[offs_a[flat]], b.data[off])
    });
    Ok(Tensor::from_parts(out, data))
}

pub(super) fn broadcast_to(t: &Tensor, shape: &[usize]) -> Result<Tensor> {
    let out = broadcast_shape(&t.shape, shape)?;
    if out != shape {
        return Err(Error::shape(
            "broadcast_to",
            format!("{:?} cannot broadcast to {shape:?}", t.shape),
        ));
    }
    if t.shape == shape {
        return Ok(t.clone());
    }
    let st = aligned_strides(&t.shape, shape);
    let mut data = vec![0.0; shape.iter().product()];
    walk(shape, &st, |flat, off| data[flat] = t.data[off]);
    Ok(Tensor::from_parts(shape.to_vec(), data))
}

pub(super) fn sum_to_shape(t: &Tensor, shape: &[usize]) -> Result<Tensor> {
    if t.shape == shape {
        return Ok(t.clone());
    }
    let out = broadcast_shape(shape, &t.shape)?;
    if out != t.shape {
        return Err(Error::shape(
            "sum_to_shape",
            format!("{:?} does not broadcast from {shape:?}", t.shape),
        ));
    }
    let mut data = vec![0.0; shape.iter().product()];
    if t.shape.ends_with(shape) {
        let w = data.len();
        for chunk in t.data.chunks_exact(w.max(1)) {
            for (d, s) in data.iter_mut().zip(chunk) {
                *d += s;
            }
        }
    } else {
        let st = aligned_strides(shape, &t.shape);
        walk(&t.shape, &st, |flat, off| data[off] += t.data[flat]);
    }
    Ok(Tensor::from_parts(shape.to_vec(), data))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shapes_align_from_the_right() {
        assert_eq!(broadcast_shape(&[4, 1, 3], &[2, 1]).unwrap(), vec![4, 2, 3]);
        assert!(broadcast_shape(&[2, 3], &[4]).is_err());
    }

    #[test]
    fn general_broadcast_matches_manual() {
        let a = Tensor::from_fn(&[2, 1, 3], |i| i as f64);
        let b = Tensor::from_fn(&[4, 1], |i| 10.0 * i as f64);
        let c = a.add(&b).unwrap();
        assert_eq!(c.shape(), &[2, 4, 3]);
        for i in 0..2 {
            for j in 0..4 {
                for k in 0..3 {
                    let expect = (i * 3 + k) as f64 + 10.0 * j as f64;
                    assert_eq!(c.data()[i * 12 + j * 3 + k], expect);
                }
            }
        }
        let back = c.sum_to_shape(&[4, 1]).unwrap();
        assert_eq!(back.shape(), &[4, 1]);
        assert_eq!(back.data()[1], 15.0 + 6.0 * 10.0);
    }

    #[test]
    fn broadcast_then_sum_scales_by_copies() {
        let t = Tensor::from_vec(vec![1.0, 2.0]);
        let b = t.broadcast_to(&[3, 2]).unwrap();
        assert_eq!(b.sum_to_shape(&[2]).unwrap().data(), &[3.0, 6.0]);
    }
}
