//! The logistic link and its first two derivatives.
//!
//! Every evaluation goes through `e^{-|x|}` so that arguments of any magnitude
//! produce finite results; separated data drives iterates far from the origin
//! before the solver notices.

use crate::error::{RaschError, Result};

/// Which derivative of the logistic function to evaluate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Derivative {
    Value,
    First,
    Second,
}

/// Evaluates `mu(x) = e^x / (1 + e^x)` or one of its derivatives.
pub fn logistic(x: f64, order: Derivative) -> Result<f64> {
    if !x.is_finite() {
        return Err(RaschError::NonFinite(x));
    }
    Ok(match order {
        Derivative::Value => sigmoid(x),
        Derivative::First => sigmoid_prime(x),
        Derivative::Second => sigmoid_second(x),
    })
}

#[inline]
pub(crate) fn sigmoid(x: f64) -> f64 {
    let e = (-x.abs()).exp();
    if x >= 0.0 {
        1.0 / (1.0 + e)
    } else {
        e / (1.0 + e)
    }
}

/// `mu'(x) = e^x / (1 + e^x)^2`, symmetric in `x`.
#[inline]
pub(crate) fn sigmoid_prime(x: f64) -> f64 {
    let e = (-x.abs()).exp();
    let d = 1.0 + e;
    e / (d * d)
}

/// `mu''(x) = (1 - e^x) e^x / (1 + e^x)^3`, odd in `x`.
#[inline]
pub(crate) fn sigmoid_second(x: f64) -> f64 {
    let e = (-x.abs()).exp();
    let d = 1.0 + e;
    let magnitude = e * (1.0 - e) / (d * d * d);
    if x >= 0.0 {
        -magnitude
    } else {
        magnitude
    }
}

/// `log mu(x)` without forming `mu(x)` first.
#[inline]
pub(crate) fn log_sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        -(-x).exp().ln_1p()
    } else {
        x - x.exp().ln_1p()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn known_values() {
        assert_eq!(logistic(0.0, Derivative::Value).unwrap(), 0.5);
        assert_eq!(logistic(0.0, Derivative::First).unwrap(), 0.25);
        assert!((logistic(3f64.ln(), Derivative::Value).unwrap() - 0.75).abs() < 1e-15);
        assert_eq!(logistic(0.0, Derivative::Second).unwrap(), 0.0);
    }

    #[test]
    fn rejects_non_finite() {
        assert!(matches!(
            logistic(f64::NAN, Derivative::Value),
            Err(RaschError::NonFinite(_))
        ));
        assert!(logistic(f64::INFINITY, Derivative::First).is_err());
    }

    #[test]
    fn extreme_arguments_stay_finite() {
        for &x in &[-700.0, -40.0, 40.0, 700.0] {
            for order in [Derivative::Value, Derivative::First, Derivative::Second] {
                let v = logistic(x, order).unwrap();
                assert!(v.is_finite(), "{x} {order:?}");
            }
            assert!(log_sigmoid(x).is_finite());
            assert!(log_sigmoid(-x).is_finite());
        }
        assert_eq!(sigmoid(700.0), 1.0);
        assert!((log_sigmoid(-700.0) + 700.0).abs() < 1e-12);
    }

    #[test]
    fn derivatives_match_finite_differences() {
        let h = 1e-5;
        for k in -40..=40 {
            let x = k as f64 * 0.25;
            let fd1 = (sigmoid(x + h) - sigmoid(x - h)) / (2.0 * h);
            let fd2 = (sigmoid_prime(x + h) - sigmoid_prime(x - h)) / (2.0 * h);
            assert!((fd1 - sigmoid_prime(x)).abs() < 1e-9, "x = {x}");
            assert!((fd2 - sigmoid_second(x)).abs() < 1e-9, "x = {x}");
            assert!((log_sigmoid(x) - sigmoid(x).ln()).abs() < 1e-12);
        }
    }
}
