//! One-dimensional bracketing root finder and minimiser.

use crate::num::{lit, Real};

/// Bisection on a sign change of `f` in `[a, b]`.
///
/// Returns `None` when `f(a)` and `f(b)` share a sign. Stops when the bracket
/// is narrower than `tol` (absolute) or after 200 halvings.
pub fn bisect<T: Real, F: FnMut(T) -> T>(mut f: F, mut a: T, mut b: T, tol: T) -> Option<T> {
    let mut fa = f(a);
    let fb = f(b);
    if fa == T::zero() {
        return Some(a);
    }
    if fb == T::zero() {
        return Some(b);
    }
    if (fa > T::zero()) == (fb > T::zero()) || fa.is_nan() || fb.is_nan() {
        return None;
    }
    for _ in 0..200 {
        let m = (a + b) * lit(0.5);
        if (b - a).abs() <= tol || m <= a.min(b) || m >= a.max(b) {
            return Some(m);
        }
        let fm = f(m);
        if fm == T::zero() {
            return Some(m);
        }
        if (fm > T::zero()) == (fa > T::zero()) {
            a = m;
            fa = fm;
        } else {
            b = m;
        }
    }
    Some((a + b) * lit(0.5))
}

/// Golden-section search for a minimum of `f` on `[a, b]`.
///
/// Returns `(argmin, min)`; assumes `f` is unimodal on the interval.
pub fn golden_min<T: Real, F: FnMut(T) -> T>(mut f: F, mut a: T, mut b: T, tol: T) -> (T, T) {
    let inv_phi: T = lit(0.618_033_988_749_894_9);
    let mut c = b - (b - a) * inv_phi;
    let mut d = a + (b - a) * inv_phi;
    let mut fc = f(c);
    let mut fd = f(d);
    for _ in 0..200 {
        if (b - a).abs() <= tol {
            break;
        }
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - (b - a) * inv_phi;
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + (b - a) * inv_phi;
            fd = f(d);
        }
    }
    let (xa, xb) = (a, b);
    let fa = f(xa);
    let fb = f(xb);
    let mut best = if fc < fd { (c, fc) } else { (d, fd) };
    if fa < best.1 {
        best = (xa, fa);
    }
    if fb < best.1 {
        best = (xb, fb);
    }
    best
}
