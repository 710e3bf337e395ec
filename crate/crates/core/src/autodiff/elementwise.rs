use super::Var;
use crate::error::{Error, Result};
use crate::manifolds::stable;
use crate::tensor::Tensor;

const GELU_C: f64 = 0.797_884_560_802_865_4; // sqrt(2 / pi)

fn reduce_to(g: Tensor, shape: &[usize]) -> Result<Tensor> {
    if g.shape() == shape {
        Ok(g)
    } else {
        g.sum_to_shape(shape)
    }
}

/// `g * d` where `d` is computed per element from the input and output values.
fn chain(g: &Tensor, x: &Tensor, y: &Tensor, df: impl Fn(f64, f64) -> f64) -> Tensor {
    let data = g
        .data()
        .iter()
        .zip(x.data().iter().zip(y.data()))
        .map(|(g, (&x, &y))| g * df(x, y))
        .collect();
    Tensor::new(g.shape(), data).expect("same shape")
}

impl<'t> Var<'t> {
    fn unary(
        self,
        op: &'static str,
        f: impl Fn(f64) -> f64,
        df: impl Fn(f64, f64) -> f64 + 'static,
    ) -> Result<Var<'t>> {
        let x = self.value();
        let y = x.map(f);
        let (xc, yc) = (x, y.clone());
        self.tape.record(
            op,
            y,
            &[self],
            Box::new(move |g| Ok(vec![Some(chain(g, &xc, &yc, df))])),
        )
    }

    pub fn add(self, other: Var<'t>) -> Result<Var<'t>> {
        self.same_tape(&other)?;
        let (a, b) = (self.value(), other.value());
        let y = a.add(&b)?;
        let (sa, sb) = (a.shape().to_vec(), b.shape().to_vec());
        self.tape.record(
            "add",
            y,
            &[self, other],
            Box::new(move |g| {
                Ok(vec![
                    Some(reduce_to(g.clone(), &sa)?),
                    Some(reduce_to(g.clone(), &sb)?),
                ])
            }),
        )
    }

    pub fn sub(self, other: Var<'t>) -> Result<Var<'t>> {
        self.same_tape(&other)?;
        let (a, b) = (self.value(), other.value());
        let y = a.sub(&b)?;
        let (sa, sb) = (a.shape().to_vec(), b.shape().to_vec());
        self.tape.record(
            "sub",
            y,
            &[self, other],
            Box::new(move |g| {
                Ok(vec![
                    Some(reduce_to(g.clone(), &sa)?),
                    Some(reduce_to(g.scale(-1.0), &sb)?),
                ])
            }),
        )
    }

    pub fn mul(self, other: Var<'t>) -> Result<Var<'t>> {
        self.same_tape(&other)?;
        let (a, b) = (self.value(), other.value());
        let y = a.mul(&b)?;
        self.tape.record(
            "mul",
            y,
            &[self, other],
            Box::new(move |g| {
                Ok(vec![
                    Some(reduce_to(g.mul(&b)?, a.shape())?),
                    Some(reduce_to(g.mul(&a)?, b.shape())?),
                ])
            }),
        )
    }

    pub fn div(self, other: Var<'t>) -> Result<Var<'t>> {
        self.same_tape(&other)?;
        let (a, b) = (self.value(), other.value());
        if b.data().contains(&0.0) {
            return Err(Error::domain("div", "division by zero"));
        }
        let y = a.div(&b)?;
        let yc = y.clone();
        self.tape.record(
            "div",
            y,
            &[self, other],
            Box::new(move |g| {
                let ga = g.div(&b)?;
                let gb = ga.mul(&yc)?.scale(-1.0);
                Ok(vec![
                    Some(reduce_to(ga, a.shape())?),
                    Some(reduce_to(gb, b.shape())?),
                ])
            }),
        )
    }

    pub fn neg(self) -> Result<Var<'t>> {
        self.scale(-1.0)
    }

    /// Multiplication by a constant.
    pub fn scale(self, s: f64) -> Result<Var<'t>> {
        let y = self.value().scale(s);
        self.tape.record(
            "scale",
            y,
            &[self],
            Box::new(move |g| Ok(vec![Some(g.scale(s))])),
        )
    }

    /// Addition of a constant.
    pub fn add_scalar(self, s: f64) -> Result<Var<'t>> {
        let y = self.value().map(|v| v + s);
        self.tape.record(
            "add_scalar",
            y,
            &[self],
            Box::new(|g| Ok(vec![Some(g.clone())])),
        )
    }

    pub fn recip(self) -> Result<Var<'t>> {
        if self.value().data().contains(&0.0) {
            return Err(Error::domain("recip", "division by zero"));
        }
        self.unary("recip", |x| 1.0 / x, |_, y| -y * y)
    }

    pub fn square(self) -> Result<Var<'t>> {
        self.unary("square", |x| x * x, |x, _| 2.0 * x)
    }

    pub fn sqrt(self) -> Result<Var<'t>> {
        self.unary("sqrt", f64::sqrt, |_, y| 0.5 / y)
    }

    pub fn exp(self) -> Result<Var<'t>> {
        self.unary("exp", f64::exp, |_, y| y)
    }

    pub fn log(self) -> Result<Var<'t>> {
        self.unary("log", f64::ln, |x, _| 1.0 / x)
    }

    pub fn tanh(self) -> Result<Var<'t>> {
        self.unary("tanh", f64::tanh, |_, y| 1.0 - y * y)
    }

    pub fn atanh(self) -> Result<Var<'t>> {
        self.unary("atanh", f64::atanh, |x, _| 1.0 / (1.0 - x * x))
    }

    pub fn cosh(self) -> Result<Var<'t>> {
        self.unary("cosh", f64::cosh, |x, _| x.sinh())
    }

    pub fn sinh(self) -> Result<Var<'t>> {
        self.unary("sinh", f64::sinh, |x, _| x.cosh())
    }

    pub fn acosh(self) -> Result<Var<'t>> {
        self.unary("acosh", f64::acosh, |x, _| 1.0 / (x * x - 1.0).sqrt())
    }

    pub fn asinh(self) -> Result<Var<'t>> {
        self.unary("asinh", f64::asinh, |x, _| 1.0 / (x * x + 1.0).sqrt())
    }

    pub fn asin(self) -> Result<Var<'t>> {
        self.unary("asin", f64::asin, |x, _| 1.0 / (1.0 - x * x).sqrt())
    }

    pub fn acos(self) -> Result<Var<'t>> {
        self.unary("acos", f64::acos, |x, _| -1.0 / (1.0 - x * x).sqrt())
    }

    pub fn sigmoid(self) -> Result<Var<'t>> {
        self.unary("sigmoid", sigmoid, |_, y| y * (1.0 - y))
    }

    /// `ln(1 + e^x)` without overflow.
    pub fn softplus(self) -> Result<Var<'t>> {
        self.unary(
            "softplus",
            |x| x.max(0.0) + (-x.abs()).exp().ln_1p(),
            |x, _| sigmoid(x),
        )
    }

    /// Clamp into `[lo, hi]`; the gradient is zero where the clamp is active.
    pub fn clamp(self, lo: f64, hi: f64) -> Result<Var<'t>> {
        if lo > hi {
            return Err(Error::invalid(format!("clamp bounds {lo} > {hi}")));
        }
        self.unary(
            "clamp",
            move |x| x.clamp(lo, hi),
            move |x, _| if x >= lo && x <= hi { 1.0 } else { 0.0 },
        )
    }

    pub fn relu(self) -> Result<Var<'t>> {
        self.unary(
            "relu",
            |x| x.max(0.0),
            |x, _| if x > 0.0 { 1.0 } else { 0.0 },
        )
    }

    /// GELU, tanh approximation.
    pub fn gelu(self) -> Result<Var<'t>> {
        self.unary("gelu", gelu, gelu_deriv)
    }

    /// `cosh(sqrt(s))`.
    pub fn cosh_sqrt(self) -> Result<Var<'t>> {
        self.unary("cosh_sqrt", stable::cosh_sqrt, |s, _| {
            0.5 * stable::sinhc_sqrt(s)
        })
    }

    /// `sinh(sqrt(s)) / sqrt(s)`.
    pub fn sinhc_sqrt(self) -> Result<Var<'t>> {
        self.unary("sinhc_sqrt", stable::sinhc_sqrt, |s, _| {
            stable::sinhc_sqrt_deriv(s)
        })
    }

    /// `tanh(sqrt(s)) / sqrt(s)`.
    pub fn tanhc_sqrt(self) -> Result<Var<'t>> {
        self.unary("tanhc_sqrt", stable::tanhc_sqrt, |s, _| {
            stable::tanhc_sqrt_deriv(s)
        })
    }

    /// `atanh(sqrt(s)) / sqrt(s)`.
    pub fn atanhc_sqrt(self) -> Result<Var<'t>> {
        self.unary("atanhc_sqrt", stable::atanhc_sqrt, |s, _| {
            stable::atanhc_sqrt_deriv(s)
        })
    }

    /// `asinh(sqrt(s)) / sqrt(s)`.
    pub fn asinhc_sqrt(self) -> Result<Var<'t>> {
        self.unary("asinhc_sqrt", stable::asinhc_sqrt, |s, _| {
            stable::asinhc_sqrt_deriv(s)
        })
    }
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

pub(crate) fn gelu(x: f64) -> f64 {
    0.5 * x * (1.0 + (GELU_C * (x + 0.044715 * x * x * x)).tanh())
}

fn gelu_deriv(x: f64, _: f64) -> f64 {
    let inner = GELU_C * (x + 0.044715 * x * x * x);
    let t = inner.tanh();
    let dinner = GELU_C * (1.0 + 3.0 * 0.044715 * x * x);
    0.5 * (1.0 + t) + 0.5 * x * (1.0 - t * t) * dinner
}
