use crate::error::{Error, Result};

/// Strictly negative sectional curvature `K`, stored as `raw` with `K = -exp(raw)`
/// so unconstrained updates can never reach zero or change sign.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Curvature {
    raw: f64,
    learnable: bool,
}

impl Curvature {
    pub fn new(k: f64) -> Result<Self> {
        if !(k.is_finite() && k < 0.0) {
            return Err(Error::invalid(format!(
                "curvature must be finite and negative, got {k}"
            )));
        }
        Ok(Self {
            raw: (-k).ln(),
            learnable: false,
        })
    }

    pub fn learnable(k: f64) -> Result<Self> {
        Ok(Self {
            learnable: true,
            ..Self::new(k)?
        })
    }

    pub fn from_raw(raw: f64, learnable: bool) -> Result<Self> {
        if !raw.is_finite() {
            return Err(Error::invalid(format!("non-finite raw curvature {raw}")));
        }
        Ok(Self { raw, learnable })
    }

    /// The curvature `K < 0`.
    pub fn value(&self) -> f64 {
        -self.raw.exp()
    }

    /// `c = -K > 0`.
    pub fn c(&self) -> f64 {
        self.raw.exp()
    }

    pub fn raw(&self) -> f64 {
        self.raw
    }

    pub fn is_learnable(&self) -> bool {
        self.learnable
    }

    pub fn set_raw(&mut self, raw: f64) -> Result<()> {
        *self = Self::from_raw(raw, self.learnable)?;
        Ok(())
    }
}

impl Default for Curvature {
    fn default() -> Self {
        Self {
            raw: 0.0,
            learnable: false,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn rejects_non_negative() {
        assert!(Curvature::new(0.0).is_err());
        assert!(Curvature::new(1.0).is_err());
        assert!(Curvature::new(f64::NAN).is_err());
    }

    proptest! {
        #[test]
        fn raw_round_trip(k in -100.0f64..-1e-6) {
            let c = Curvature::new(k).unwrap();
            prop_assert!(((c.value() - k) / k).abs() <= 1e-12);
        }

        #[test]
        fn any_raw_gives_negative_curvature(raw in -50.0f64..50.0) {
            let c = Curvature::from_raw(raw, true).unwrap();
            prop_assert!(c.value() < 0.0 && c.value().is_finite());
        }
    }
}
