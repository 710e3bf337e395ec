//! Central-difference verification of recorded gradients.

use super::{Tape, Var};
use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// Gradient magnitudes below this are compared absolutely rather than relatively.
pub const REL_ERR_FLOOR: f64 = 1e-2;

#[derive(Clone, Debug)]
pub struct GradReport {
    /// Largest `|analytic - numeric| / max(|analytic|, |numeric|, REL_ERR_FLOOR)`.
    pub max_rel_err: f64,
    pub max_abs_err: f64,
    /// Input index and flat element index of the worst entry.
    pub worst: (usize, usize),
    pub tol: f64,
    pub passed: bool,
}

/// Checks the gradient of a scalar-valued `f` at `x`.
pub fn gradcheck<F>(f: F, x: &Tensor, h: f64, tol: f64) -> Result<GradReport>
where
    F: for<'t> Fn(&'t Tape, Var<'t>) -> Result<Var<'t>>,
{
    gradcheck_many(
        |tape, vars| f(tape, vars[0]),
        std::slice::from_ref(x),
        h,
        tol,
    )
}

/// Checks the gradient of a scalar-valued `f` with respect to every input.
pub fn gradcheck_many<F>(f: F, inputs: &[Tensor], h: f64, tol: f64) -> Result<GradReport>
where
    F: for<'t> Fn(&'t Tape, &[Var<'t>]) -> Result<Var<'t>>,
{
    if !(h > 0.0) {
        return Err(Error::invalid(format!("step {h} must be positive")));
    }
    let eval = |values: &[Tensor]| -> Result<f64> {
        let tape = Tape::new();
        let vars: Vec<Var<'_>> = values.iter().map(|v| tape.constant(v.clone())).collect();
        let out = f(&tape, &vars)?.value().item()?;
        if !out.is_finite() {
            return Err(Error::NonFinite { op: "gradcheck" });
        }
        Ok(out)
    };
    eval(inputs)?;

    let tape = Tape::new();
    let vars: Vec<Var<'_>> = inputs.iter().map(|v| tape.var(v.clone())).collect();
    let loss = f(&tape, &vars)?;
    tape.backward(loss)?;
    let analytic: Vec<Tensor> = vars.iter().map(|v| v.grad_or_zeros()).collect();

    let mut report = GradReport {
        max_rel_err: 0.0,
        max_abs_err: 0.0,
        worst: (0, 0),
        tol,
        passed: true,
    };
    let mut probe: Vec<Tensor> = inputs.to_vec();
    for (i, input) in inputs.iter().enumerate() {
        for j in 0..input.numel() {
            let mut plus = input.to_vec();
            let mut minus = input.to_vec();
            plus[j] += h;
            minus[j] -= h;
            // the step actually taken after rounding
            let width = plus[j] - minus[j];
            probe[i] = Tensor::new(input.shape(), plus)?;
            let fp = eval(&probe)?;
            probe[i] = Tensor::new(input.shape(), minus)?;
            let fm = eval(&probe)?;
            let numeric = (fp - fm) / width;
            let a = analytic[i].data()[j];
            let abs = (a - numeric).abs();
            let rel = abs / a.abs().max(numeric.abs()).max(REL_ERR_FLOOR);
            report.max_abs_err = report.max_abs_err.max(abs);
            if rel > report.max_rel_err {
                report.max_rel_err = rel;
                report.worst = (i, j);
            }
        }
        probe[i] = input.clone();
    }
    report.passed = report.max_rel_err <= tol;
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn linear_function_matches_exactly() {
        let x = Tensor::from_fn(&[6], |i| 0.1 * i as f64 - 0.2);
        let w = Tensor::from_fn(&[6], |i| 0.05 * i as f64 + 0.025);
        let r = gradcheck(|t, v| v.mul(t.constant(w.clone()))?.sum(), &x, 1e-5, 1e-10).unwrap();
        assert!(r.passed, "{r:?}");
    }

    #[test]
    fn wrong_gradient_is_detected() {
        // the squared term is computed from a detached copy, so its gradient is lost
        let x = Tensor::from_vec(vec![-1.0, 2.0]);
        let r = gradcheck(
            |t, v| t.constant(v.value()).square()?.add(v)?.sum(),
            &x,
            1e-5,
            1e-6,
        )
        .unwrap();
        assert!(!r.passed);
        assert!((r.max_abs_err - 4.0).abs() < 1e-6);
    }

    #[test]
    fn non_finite_output_is_an_error() {
        let x = Tensor::from_vec(vec![0.0]);
        let r = gradcheck(|_, v| v.log()?.sum(), &x, 1e-5, 1e-6);
        assert!(r.is_err());
    }
}
