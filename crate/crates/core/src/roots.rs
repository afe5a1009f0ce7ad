//! Bracketing root finders.

use crate::error::{Error, Result};

/// Bisection on a sign change of `f` over `[lo, hi]`.
///
/// Stops once the bracket is narrower than `tol` or stops shrinking in
/// floating point. Returns the final bracket `(lo, hi)`; the root lies
/// between them and `f(lo)` has the sign of the original `f(lo)`.
pub fn bisect_bracket<F: FnMut(f64) -> f64>(
    mut f: F,
    mut lo: f64,
    mut hi: f64,
    tol: f64,
    what: &str,
) -> Result<(f64, f64)> {
    let f_lo = f(lo);
    let f_hi = f(hi);
    if f_lo == 0.0 {
        return Ok((lo, lo));
    }
    if f_hi == 0.0 {
        return Ok((hi, hi));
    }
    if f_lo.signum() == f_hi.signum() || f_lo.is_nan() || f_hi.is_nan() {
        return Err(Error::NoBracket {
            what: what.to_string(),
            lo,
            hi,
        });
    }
    let lo_negative = f_lo < 0.0;
    for _ in 0..200 {
        if (hi - lo).abs() <= tol {
            break;
        }
        let mid = lo + 0.5 * (hi - lo);
        if mid == lo || mid == hi {
            break;
        }
        let fm = f(mid);
        if fm == 0.0 {
            return Ok((mid, mid));
        }
        if (fm < 0.0) == lo_negative {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok((lo, hi))
}

/// Midpoint of the final bisection bracket.
pub fn bisect<F: FnMut(f64) -> f64>(f: F, lo: f64, hi: f64, tol: f64, what: &str) -> Result<f64> {
    let (l, h) = bisect_bracket(f, lo, hi, tol, what)?;
    Ok(0.5 * (l + h))
}

/// Counts sign changes of a sampled sequence, ignoring exact zeros.
pub fn sign_changes(values: &[f64]) -> usize {
    let mut last = 0.0f64;
    let mut count = 0;
    for &v in values {
        if v == 0.0 || v.is_nan() {
            continue;
        }
        if last != 0.0 && v.signum() != last.signum() {
            count += 1;
        }
        last = v;
    }
    count
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn finds_sqrt_two() {
        let r = bisect(|x| x * x - 2.0, 0.0, 2.0, 1e-14, "x^2-2").unwrap();
        assert!((r - 2f64.sqrt()).abs() < 1e-14);
    }

    #[test]
    fn decreasing_function() {
        let r = bisect(|x| 1.0 - x, 0.0, 3.0, 1e-15, "1-x").unwrap();
        assert!((r - 1.0).abs() < 1e-14);
    }

    #[test]
    fn rejects_missing_bracket() {
        assert!(matches!(
            bisect(|x| x * x + 1.0, -1.0, 1.0, 1e-12, "x^2+1"),
            Err(Error::NoBracket { .. })
        ));
    }

    #[test]
    fn counts_sign_changes() {
        assert_eq!(sign_changes(&[1.0, 0.5, 0.0, -1.0, -2.0, 3.0]), 2);
        assert_eq!(sign_changes(&[-1.0, -0.1]), 0);
    }
}
