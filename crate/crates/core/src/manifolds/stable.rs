//! Scalar transcendental kernels with explicit domain handling.

use super::diagnostics;

/// Largest argument passed to `atanh`.
pub const ATANH_MAX: f64 = 1.0 - 1e-15;

/// `acosh(1 + u)` for `u >= 0`, accurate when `u` is tiny.
pub fn acosh1p(u: f64) -> f64 {
    (u + (u * (2.0 + u)).sqrt()).ln_1p()
}

/// `acosh(beta)` with `beta` clamped to `>= 1`.
pub fn acosh_clamped(beta: f64) -> f64 {
    if beta < 1.0 {
        diagnostics::report_acosh(1.0 - beta);
        return 0.0;
    }
    if beta < 2.0 {
        acosh1p(beta - 1.0)
    } else {
        beta.acosh()
    }
}

/// `atanh(a)` with `a` clamped to `[-ATANH_MAX, ATANH_MAX]`.
pub fn atanh_clamped(a: f64) -> f64 {
    let mag = a.abs();
    let m = if mag > ATANH_MAX {
        diagnostics::report_atanh(mag - ATANH_MAX);
        ATANH_MAX
    } else {
        mag
    };
    (0.5 * (2.0 * m / (1.0 - m)).ln_1p()).copysign(a)
}

/// `sinh(t) / t`, equal to 1 at the origin.
pub fn sinhc(t: f64) -> f64 {
    if t.abs() < 1e-4 {
        let t2 = t * t;
        1.0 + t2 / 6.0 + t2 * t2 / 120.0
    } else {
        t.sinh() / t
    }
}

/// `tanh(t) / t`, equal to 1 at the origin.
pub fn tanhc(t: f64) -> f64 {
    if t.abs() < 1e-4 {
        let t2 = t * t;
        1.0 - t2 / 3.0 + 2.0 * t2 * t2 / 15.0
    } else {
        t.tanh() / t
    }
}

/// `acosh(beta) / sqrt(beta^2 - 1)` for `beta >= 1`, equal to 1 at `beta = 1`.
pub fn acosh_ratio(beta: f64) -> f64 {
    let u = beta - 1.0;
    if u < 1e-5 {
        let u = u.max(0.0);
        1.0 - u / 3.0 + 2.0 * u * u / 15.0
    } else {
        acosh_clamped(beta) / (u * (beta + 1.0)).sqrt()
    }
}

/// Below this squared argument the `*_sqrt` functions switch to their Taylor series.
const SQ_SERIES: f64 = 1e-3;

fn poly(s: f64, coeffs: &[f64]) -> f64 {
    coeffs.iter().rev().fold(0.0, |acc, c| acc * s + c)
}

/// `cosh(sqrt(s))` for `s >= 0`; negative rounding noise is treated as zero.
pub fn cosh_sqrt(s: f64) -> f64 {
    s.max(0.0).sqrt().cosh()
}

/// `sinh(sqrt(s)) / sqrt(s)`, analytic in `s` and equal to 1 at zero.
pub fn sinhc_sqrt(s: f64) -> f64 {
    let s = s.max(0.0);
    if s < SQ_SERIES {
        poly(
            s,
            &[1.0, 1.0 / 6.0, 1.0 / 120.0, 1.0 / 5040.0, 1.0 / 362_880.0],
        )
    } else {
        let r = s.sqrt();
        r.sinh() / r
    }
}

/// Derivative of [`sinhc_sqrt`] with respect to `s`.
pub fn sinhc_sqrt_deriv(s: f64) -> f64 {
    let s = s.max(0.0);
    if s < SQ_SERIES {
        poly(
            s,
            &[
                1.0 / 6.0,
                1.0 / 60.0,
                1.0 / 1680.0,
                1.0 / 90_720.0,
                1.0 / 7_983_360.0,
            ],
        )
    } else {
        let r = s.sqrt();
        (r * r.cosh() - r.sinh()) / (2.0 * s * r)
    }
}

/// `tanh(sqrt(s)) / sqrt(s)`.
pub fn tanhc_sqrt(s: f64) -> f64 {
    let s = s.max(0.0);
    if s < SQ_SERIES {
        poly(
            s,
            &[1.0, -1.0 / 3.0, 2.0 / 15.0, -17.0 / 315.0, 62.0 / 2835.0],
        )
    } else {
        let r = s.sqrt();
        r.tanh() / r
    }
}

pub fn tanhc_sqrt_deriv(s: f64) -> f64 {
    let s = s.max(0.0);
    if s < SQ_SERIES {
        poly(
            s,
            &[
                -1.0 / 3.0,
                4.0 / 15.0,
                -17.0 / 105.0,
                248.0 / 2835.0,
                -1382.0 / 31_185.0,
            ],
        )
    } else {
        let r = s.sqrt();
        let sech = 1.0 / r.cosh();
        (r * sech * sech - r.tanh()) / (2.0 * s * r)
    }
}

/// `atanh(sqrt(s)) / sqrt(s)` for `0 <= s < 1`; `s` is clamped to `ATANH_MAX^2`.
pub fn atanhc_sqrt(s: f64) -> f64 {
    let s = clamp_unit_sq(s);
    if s < SQ_SERIES {
        poly(
            s,
            &[1.0, 1.0 / 3.0, 1.0 / 5.0, 1.0 / 7.0, 1.0 / 9.0, 1.0 / 11.0],
        )
    } else {
        let r = s.sqrt();
        atanh_clamped(r) / r
    }
}

pub fn atanhc_sqrt_deriv(s: f64) -> f64 {
    let s = clamp_unit_sq(s);
    if s < SQ_SERIES {
        poly(s, &[1.0 / 3.0, 2.0 / 5.0, 3.0 / 7.0, 4.0 / 9.0, 5.0 / 11.0])
    } else {
        let r = s.sqrt();
        (r / (1.0 - s) - atanh_clamped(r)) / (2.0 * s * r)
    }
}

fn clamp_unit_sq(s: f64) -> f64 {
    const MAX_SQ: f64 = ATANH_MAX * ATANH_MAX;
    if s > MAX_SQ {
        diagnostics::report_atanh(s - MAX_SQ);
        MAX_SQ
    } else {
        s.max(0.0)
    }
}

/// `asinh(sqrt(s)) / sqrt(s)`. Also equals `acosh(b) / sqrt(b^2 - 1)` for `s = b^2 - 1`.
pub fn asinhc_sqrt(s: f64) -> f64 {
    let s = s.max(0.0);
    if s < SQ_SERIES {
        poly(
            s,
            &[
                1.0,
                -1.0 / 6.0,
                3.0 / 40.0,
                -5.0 / 112.0,
                35.0 / 1152.0,
                -63.0 / 2816.0,
            ],
        )
    } else {
        let r = s.sqrt();
        r.asinh() / r
    }
}

pub fn asinhc_sqrt_deriv(s: f64) -> f64 {
    let s = s.max(0.0);
    if s < SQ_SERIES {
        poly(
            s,
            &[
                -1.0 / 6.0,
                3.0 / 20.0,
                -15.0 / 112.0,
                35.0 / 288.0,
                -315.0 / 2816.0,
            ],
        )
    } else {
        let r = s.sqrt();
        (r / (1.0 + s).sqrt() - r.asinh()) / (2.0 * s * r)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    type Scalar = fn(f64) -> f64;

    #[test]
    fn acosh_matches_std_away_from_one() {
        for &x in &[1.5, 2.0, 10.0, 1e6] {
            assert!((acosh_clamped(x) - f64::acosh(x)).abs() <= 1e-14 * x.acosh());
        }
    }

    #[test]
    fn acosh_near_one_is_accurate() {
        // acosh(cosh(t)) = t; cosh(t) - 1 = 2 sinh^2(t/2) computed without cancellation
        for &t in &[1e-7, 1e-5, 1e-3, 0.1] {
            let u = 2.0 * (t / 2.0_f64).sinh().powi(2);
            assert!((acosh1p(u) - t).abs() <= 1e-14 * t, "t={t}");
        }
    }

    #[test]
    fn acosh_below_domain_clamps_to_zero() {
        assert_eq!(acosh_clamped(1.0 - 1e-12), 0.0);
        let before = diagnostics::snapshot().acosh;
        assert_eq!(acosh_clamped(0.5), 0.0);
        assert!(diagnostics::snapshot().acosh > before);
    }

    #[test]
    fn atanh_is_odd_and_clamped() {
        assert!((atanh_clamped(0.5) - 0.5_f64.atanh()).abs() < 1e-15);
        assert_eq!(atanh_clamped(-0.3), -atanh_clamped(0.3));
        assert!(atanh_clamped(1.0).is_finite());
        assert!(atanh_clamped(2.0).is_finite());
    }

    #[test]
    fn ratio_functions_are_continuous_at_switch_points() {
        // series branch vs direct formula at the same argument
        let u = 0.999e-5;
        let direct = acosh1p(u) / (u * (2.0 + u)).sqrt();
        assert!((acosh_ratio(1.0 + u) - direct).abs() < 1e-12);
        let t = 0.999e-4;
        assert!((sinhc(t) - t.sinh() / t).abs() < 1e-15);
        assert!((tanhc(t) - t.tanh() / t).abs() < 1e-15);
        assert_eq!(acosh_ratio(1.0), 1.0);
    }
    #[test]
    fn sqrt_functions_match_direct_forms_across_switch() {
        let cases: [(Scalar, Scalar); 4] = [
            (sinhc_sqrt, |s: f64| s.sqrt().sinh() / s.sqrt()),
            (tanhc_sqrt, |s: f64| s.sqrt().tanh() / s.sqrt()),
            (atanhc_sqrt, |s: f64| s.sqrt().atanh() / s.sqrt()),
            (asinhc_sqrt, |s: f64| s.sqrt().asinh() / s.sqrt()),
        ];
        for (f, direct) in cases {
            for &s in &[0.999e-3, 1.001e-3, 0.3] {
                assert!((f(s) - direct(s)).abs() < 1e-14, "s={s}");
            }
            assert_eq!(f(0.0), 1.0);
        }
    }

    #[test]
    fn sqrt_derivatives_match_central_differences() {
        let pairs: [(Scalar, Scalar); 4] = [
            (sinhc_sqrt, sinhc_sqrt_deriv),
            (tanhc_sqrt, tanhc_sqrt_deriv),
            (atanhc_sqrt, atanhc_sqrt_deriv),
            (asinhc_sqrt, asinhc_sqrt_deriv),
        ];
        let h = 1e-6;
        for (f, df) in pairs {
            for &s in &[0.0005, 0.002, 0.25, 0.8] {
                let fd = (f(s + h) - f(s - h)) / (2.0 * h);
                assert!((fd - df(s)).abs() < 1e-8, "s={s}: {fd} vs {}", df(s));
            }
        }
    }
}
