//! Scalar root finding for monotone functions.

use crate::error::{Error, Result};

pub const ROOT_TOL: f64 = 1e-12;
pub const ROOT_MAX_ITER: usize = 200;

/// Finds the root of a nondecreasing function on `[lo, hi]` where
/// `f(lo) <= 0 <= f(hi)`.
///
/// `f` returns the value and its derivative; a non-finite or non-positive
/// derivative forces a bisection step. Newton steps that leave the current
/// bracket are also replaced by bisection.
pub fn safeguarded_newton<F>(mut f: F, mut lo: f64, mut hi: f64) -> Result<f64>
where
    F: FnMut(f64) -> (f64, f64),
{
    let (flo, _) = f(lo);
    if flo >= 0.0 {
        return Ok(lo);
    }
    let (fhi, _) = f(hi);
    if fhi <= 0.0 {
        return Ok(hi);
    }
    let mut x = 0.5 * (lo + hi);
    for _ in 0..ROOT_MAX_ITER {
        let (fx, dfx) = f(x);
        if fx == 0.0 {
            return Ok(x);
        }
        if fx < 0.0 {
            lo = x;
        } else {
            hi = x;
        }
        if hi - lo <= ROOT_TOL * (1.0 + lo.abs().max(hi.abs())) {
            return Ok(0.5 * (lo + hi));
        }
        let newton = x - fx / dfx;
        let next = if dfx.is_finite() && dfx > 0.0 && newton > lo && newton < hi {
            newton
        } else {
            0.5 * (lo + hi)
        };
        if (next - x).abs() <= ROOT_TOL * (1.0 + x.abs()) {
            return Ok(next);
        }
        x = next;
    }
    Err(Error::RootNotFound {
        lo,
        hi,
        iterations: ROOT_MAX_ITER,
    })
}

/// Bisects a nondecreasing `f` on `[lo, hi]` until the bracket is two
/// adjacent floats; returns the endpoint with the smaller `|f|`.
pub fn bisect_to_precision<F>(mut f: F, mut lo: f64, mut hi: f64) -> f64
where
    F: FnMut(f64) -> f64,
{
    let (mut flo, mut fhi) = (f(lo), f(hi));
    if flo >= 0.0 {
        return lo;
    }
    if fhi <= 0.0 {
        return hi;
    }
    loop {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            return if -flo <= fhi { lo } else { hi };
        }
        let fm = f(mid);
        if fm == 0.0 {
            return mid;
        }
        if fm < 0.0 {
            (lo, flo) = (mid, fm);
        } else {
            (hi, fhi) = (mid, fm);
        }
    }
}

/// Doubles `hi` (starting from `start > lo`) until `f(hi) > 0`.
pub fn grow_upper<F>(mut f: F, lo: f64, start: f64) -> Result<f64>
where
    F: FnMut(f64) -> f64,
{
    let mut hi = start.max(lo + 1.0);
    for _ in 0..ROOT_MAX_ITER {
        let v = f(hi);
        if v > 0.0 || v.is_nan() {
            return Ok(hi);
        }
        hi = lo + 2.0 * (hi - lo);
    }
    Err(Error::RootNotFound {
        lo,
        hi,
        iterations: ROOT_MAX_ITER,
    })
}
