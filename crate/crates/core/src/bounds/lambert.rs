//! Lower real branch of the Lambert W function.

use std::f64::consts::E;

use crate::error::{Error, Result};

const BRANCH_POINT: f64 = -1.0 / E;
const MAX_ITER: usize = 64;

/// `W_{-1}(x)` for `x` in `[-1/e, 0)`: the solution `w <= -1` of
/// `w * exp(w) = x`.
pub fn lambert_w_minus1(x: f64) -> Result<f64> {
    if !x.is_finite() || !(BRANCH_POINT - 4.0 * f64::EPSILON..0.0).contains(&x) {
        return Err(Error::precondition(format!(
            "lambert W_-1 is defined on [-1/e, 0), got {x}"
        )));
    }
    if x <= BRANCH_POINT {
        return Ok(-1.0);
    }
    let mut w = initial_guess(x);
    for _ in 0..MAX_ITER {
        let ew = w.exp();
        let f = w * ew - x;
        if f.abs() <= 1e-14 * x.abs() {
            break;
        }
        let wp1 = w + 1.0;
        if wp1 == 0.0 {
            break;
        }
        // Halley step
        let step = f / (ew * wp1 - (w + 2.0) * f / (2.0 * wp1));
        let mut next = w - step;
        if !next.is_finite() || next > -1.0 {
            next = 0.5 * (w - 1.0);
        }
        if next == w {
            break;
        }
        w = next;
    }
    Ok(w)
}

fn initial_guess(x: f64) -> f64 {
    if x < -0.25 {
        // series about the branch point
        let p = -(2.0 * (1.0 + E * x)).max(0.0).sqrt();
        -1.0 + p - p * p / 3.0 + 11.0 / 72.0 * p * p * p
    } else {
        let l1 = (-x).ln();
        let l2 = (-l1).ln();
        l1 - l2 + l2 / l1
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bisect(x: f64) -> f64 {
        let (mut lo, mut hi) = (-800.0f64, -1.0f64);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            // w e^w is decreasing on w < -1
            if mid * mid.exp() > x {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    }

    #[test]
    fn branch_point() {
        assert_eq!(lambert_w_minus1(-1.0 / E).unwrap(), -1.0);
    }

    #[test]
    fn matches_bisection() {
        let w = lambert_w_minus1(-0.1).unwrap();
        assert!((w + 3.577152).abs() < 1e-6);
        for &x in &[-0.3678, -0.3, -0.2, -0.05, -1e-3, -1e-10, -1e-300] {
            let w = lambert_w_minus1(x).unwrap();
            assert!((w - bisect(x)).abs() < 1e-9 * w.abs(), "x = {x}");
        }
    }

    #[test]
    fn domain_errors() {
        assert!(lambert_w_minus1(0.0).is_err());
        assert!(lambert_w_minus1(0.1).is_err());
        assert!(lambert_w_minus1(-0.5).is_err());
        assert!(lambert_w_minus1(f64::NAN).is_err());
    }
}
