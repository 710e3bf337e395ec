//! Splitting and concatenation of hyperbolic coordinates.

use super::geometry::{lift, space};
use crate::autodiff::Var;
use crate::error::{Error, Result};

/// Concatenates the space parts of `points` and re-lifts.
pub fn concat<'t>(points: &[Var<'t>], c: Var<'t>) -> Result<Var<'t>> {
    let first = points
        .first()
        .ok_or_else(|| Error::shape("lorentz_concat", "no inputs"))?;
    let ax = first.shape().len() - 1;
    let parts = points
        .iter()
        .map(|p| space(*p))
        .collect::<Result<Vec<_>>>()?;
    lift(c.tape().concat(&parts, ax)?, c)
}

/// Splits space coordinates into consecutive blocks of `sizes`, lifting each.
pub fn split<'t>(x: Var<'t>, sizes: &[usize], c: Var<'t>) -> Result<Vec<Var<'t>>> {
    let n = x.shape().last().copied().unwrap_or(0);
    if sizes.contains(&0) || sizes.iter().sum::<usize>() + 1 != n {
        return Err(Error::shape(
            "lorentz_split",
            format!(
                "sizes {sizes:?} do not cover {} space coordinates",
                n.saturating_sub(1)
            ),
        ));
    }
    let mut start = 1;
    let mut out = Vec::with_capacity(sizes.len());
    for &len in sizes {
        out.push(lift(x.narrow_last(start, start + len)?, c)?);
        start += len;
    }
    Ok(out)
}

/// Keeps the first `keep` space coordinates.
pub fn truncate<'t>(x: Var<'t>, keep: usize, c: Var<'t>) -> Result<Var<'t>> {
    let n = x.shape().last().copied().unwrap_or(0);
    if keep == 0 || keep + 1 > n {
        return Err(Error::shape(
            "lorentz_truncate",
            format!("cannot keep {keep} of {}", n.saturating_sub(1)),
        ));
    }
    lift(x.narrow_last(1, keep + 1)?, c)
}
