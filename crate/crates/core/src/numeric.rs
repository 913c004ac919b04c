//! Small numeric helpers shared by generators, methods and checks.

use crate::error::{Error, Result};

/// Relative slack applied to the gradient termination test and to
/// admissibility intervals, absorbing last-bit rounding in quantities the
/// constructions make exactly equal to their bound.
pub const REL_SLACK: f64 = 1e-12;

/// Termination test `‖g‖ ≤ tol`, up to [`REL_SLACK`].
pub fn gradient_converged(gnorm: f64, tol: f64) -> bool {
    gnorm <= tol * (1.0 + REL_SLACK)
}

/// Interval membership up to [`REL_SLACK`] relative to the interval scale.
pub fn within(value: f64, lo: f64, hi: f64) -> bool {
    let slack = REL_SLACK * lo.abs().max(hi.abs()).max(f64::MIN_POSITIVE);
    value >= lo - slack && value <= hi + slack
}

/// `⌈eps^{-exponent}⌉`. Powers within 1e-9 relative of an integer count as
/// that integer, so `0.1^{-2}` is 100 even though it evaluates to
/// 100.00000000000001.
pub fn ceil_power(eps: f64, exponent: f64) -> usize {
    let v = eps.powf(-exponent);
    let n = v.round();
    if (v - n).abs() <= 1e-9 * n {
        n as usize
    } else {
        v.ceil() as usize
    }
}

pub fn check_eps(eps: f64) -> Result<()> {
    if eps > 0.0 && eps < 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidConfig(format!("eps must lie in (0, 1), got {eps}")))
    }
}

pub fn check_alpha(alpha: f64) -> Result<()> {
    if (0.0..=1.0).contains(&alpha) {
        Ok(())
    } else {
        Err(Error::InvalidConfig(format!("alpha must lie in [0, 1], got {alpha}")))
    }
}

/// Root of an increasing function on `[lo, hi]` by bisection, assuming
/// `phi(lo) <= 0 <= phi(hi)`. Stops when the bracket no longer shrinks.
pub fn bisect_increasing(mut lo: f64, mut hi: f64, phi: impl Fn(f64) -> f64) -> f64 {
    for _ in 0..2000 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if phi(mid) > 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    0.5 * (lo + hi)
}
