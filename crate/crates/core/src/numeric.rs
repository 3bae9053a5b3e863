//! Scalar root bracketing and bisection.

use crate::error::{Error, Result};

/// Bisection for a root of `f` in `[lo, hi]` where `f(lo) < 0 < f(hi)`.
///
/// Stops when the bracket width drops below `rel_tol * hi` or after
/// `max_iter` halvings, returning the bracket midpoint.
pub fn bisect<F>(f: F, mut lo: f64, mut hi: f64, rel_tol: f64, max_iter: usize) -> Result<f64>
where
    F: Fn(f64) -> Result<f64>,
{
    let f_lo = f(lo)?;
    let f_hi = f(hi)?;
    if f_lo == 0.0 {
        return Ok(lo);
    }
    if f_hi == 0.0 {
        return Ok(hi);
    }
    if f_lo > 0.0 || f_hi < 0.0 {
        return Err(Error::NoConvergence(format!(
            "bracket [{lo:e}, {hi:e}] does not straddle a root (f = {f_lo:e}, {f_hi:e})"
        )));
    }
    for _ in 0..max_iter {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi || hi - lo <= rel_tol * hi {
            break;
        }
        let f_mid = f(mid)?;
        if f_mid == 0.0 {
            return Ok(mid);
        }
        if f_mid < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Grows `hi` by doubling until `f(hi) > 0`, returning `(lo, hi)` with the
/// last non-positive point as `lo`.
pub fn expand_upper<F>(f: F, lo: f64, mut hi: f64, max_doublings: usize) -> Result<(f64, f64)>
where
    F: Fn(f64) -> Result<f64>,
{
    let mut last_neg = lo;
    for _ in 0..max_doublings {
        if f(hi)? > 0.0 {
            return Ok((last_neg, hi));
        }
        last_neg = hi;
        hi *= 2.0;
        if !hi.is_finite() {
            break;
        }
    }
    Err(Error::NoConvergence(format!(
        "no sign change found below {hi:e}"
    )))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn finds_sqrt_two() {
        let root = bisect(|x| Ok(x * x - 2.0), 0.0, 2.0, 1e-15, 200).unwrap();
        assert!((root - 2f64.sqrt()).abs() < 1e-14);
    }

    #[test]
    fn rejects_bad_bracket() {
        assert!(bisect(|x| Ok(x + 1.0), 0.0, 1.0, 1e-12, 100).is_err());
    }

    #[test]
    fn expands_until_positive() {
        let (lo, hi) = expand_upper(|x| Ok(x - 37.0), 1e-12, 1.0, 100).unwrap();
        assert_eq!((lo, hi), (32.0, 64.0));
        assert!(expand_upper(|_| Ok(-1.0), 1e-12, 1.0, 10).is_err());
    }
}
