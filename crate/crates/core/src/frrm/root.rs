//! Scalar root finding for non-increasing constraint functions of `lambda`.

use crate::error::{Error, Result};

pub const MAX_ITERATIONS: usize = 200;
/// Largest penalty tried when no bracket is known.
pub const LAMBDA_CAP: f64 = 1_152_921_504_606_846_976.0; // 2^60

fn close_enough(g: f64, target: f64, tol: f64) -> bool {
    g.abs() <= tol * target.abs().max(1.0)
}

/// Midpoint that is geometric on wide positive brackets.
fn split(a: f64, b: f64) -> f64 {
    if a > 0.0 && b > 8.0 * a {
        (a * b).sqrt()
    } else {
        0.5 * (a + b)
    }
}

/// Finds `lambda` in `[lo, hi]` with `f(lambda) = target`.
///
/// `f` must be continuous and non-increasing. Regula falsi with the Illinois
/// modification, falling back to bisection whenever the bracket stalls.
/// Returns `lo` when `f(lo)` is already at or below the target and `lo = 0`.
pub fn solve_lambda<F>(mut f: F, (lo, hi): (f64, f64), target: f64, tol: f64) -> Result<f64>
where
    F: FnMut(f64) -> Result<f64>,
{
    if !(lo >= 0.0 && hi >= lo) {
        return Err(Error::invalid("bracket", format!("[{lo}, {hi}] is not an ordered non-negative interval")));
    }
    let f_lo = f(lo)?;
    let g_lo = f_lo - target;
    if close_enough(g_lo, target, tol) || (g_lo < 0.0 && lo == 0.0) {
        return Ok(lo);
    }
    let f_hi = f(hi)?;
    let g_hi = f_hi - target;
    if close_enough(g_hi, target, tol) {
        return Ok(hi);
    }
    if g_lo < 0.0 || g_hi > 0.0 {
        return Err(Error::NoSignChange {
            lo,
            hi,
            f_lo,
            f_hi,
            target,
        });
    }
    let (mut a, mut ga, mut b, mut gb) = (lo, g_lo, hi, g_hi);
    let mut side = 0i8;
    let mut stalled = 0;
    let mut last = (a, ga);
    for _ in 0..MAX_ITERATIONS {
        let width = b - a;
        let mut x = (a * gb - b * ga) / (gb - ga);
        if stalled >= 2 || !(x > a && x < b) {
            x = split(a, b);
            stalled = 0;
        }
        let gx = f(x)? - target;
        if close_enough(gx, target, tol) {
            return Ok(x);
        }
        if gx > 0.0 {
            a = x;
            ga = gx;
            if side == 1 {
                gb *= 0.5;
            }
            side = 1;
        } else {
            b = x;
            gb = gx;
            if side == -1 {
                ga *= 0.5;
            }
            side = -1;
        }
        last = (x, gx);
        if b - a > 0.5 * width {
            stalled += 1;
        } else {
            stalled = 0;
        }
        if b - a <= 4.0 * f64::EPSILON * b.abs().max(f64::MIN_POSITIVE) {
            // The bracket is as narrow as floating point allows.
            return Ok(x);
        }
    }
    Err(Error::NoConvergence {
        iterations: MAX_ITERATIONS,
        last: last.0,
    })
}

/// Doubles from `start` until `f` drops to `target` or below.
///
/// Returns the bracket and every probed `(lambda, value)` pair. `f(0)` is
/// assumed to exceed the target.
pub fn doubling_bracket<F>(mut f: F, start: f64, target: f64) -> Result<((f64, f64), Vec<(f64, f64)>)>
where
    F: FnMut(f64) -> Result<f64>,
{
    let mut probes = Vec::new();
    let mut lo = 0.0;
    let mut lambda = start.max(1.0);
    loop {
        let v = f(lambda)?;
        probes.push((lambda, v));
        if v <= target {
            return Ok(((lo, lambda), probes));
        }
        if lambda >= LAMBDA_CAP {
            return Err(Error::NoSignChange {
                lo,
                hi: lambda,
                f_lo: probes.first().map(|p| p.1).unwrap_or(v),
                f_hi: v,
                target,
            });
        }
        lo = lambda;
        lambda *= 2.0;
    }
}
