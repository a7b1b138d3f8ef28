//! Bracketed scalar root finding.

use crate::error::{Error, Result};

/// Bisection on a sign-changing bracket; stops when the bracket is narrower
/// than `xtol` or after 400 halvings.
pub fn bisect<F: FnMut(f64) -> f64>(mut f: F, lo: f64, hi: f64, xtol: f64) -> Result<f64> {
    let (mut a, mut b) = (lo.min(hi), lo.max(hi));
    let mut fa = f(a);
    let fb = f(b);
    if fa == 0.0 {
        return Ok(a);
    }
    if fb == 0.0 {
        return Ok(b);
    }
    if fa.signum() == fb.signum() {
        return Err(Error::Precondition(format!(
            "no sign change on [{a}, {b}] ({fa}, {fb})"
        )));
    }
    for _ in 0..400 {
        let m = 0.5 * (a + b);
        if b - a <= xtol || m <= a || m >= b {
            return Ok(m);
        }
        let fm = f(m);
        if fm == 0.0 {
            return Ok(m);
        }
        if fm.signum() == fa.signum() {
            a = m;
            fa = fm;
        } else {
            b = m;
        }
    }
    Ok(0.5 * (a + b))
}

/// Newton's method kept inside a sign-changing bracket; falls back to a
/// bisection step whenever the Newton step leaves the bracket or stalls.
/// `fdf` returns the function value and its derivative.
pub fn newton_bracketed<F: FnMut(f64) -> (f64, f64)>(
    mut fdf: F,
    lo: f64,
    hi: f64,
    xtol: f64,
) -> Result<f64> {
    let (mut a, mut b) = (lo.min(hi), lo.max(hi));
    let (fa, _) = fdf(a);
    let (fb, _) = fdf(b);
    if fa == 0.0 {
        return Ok(a);
    }
    if fb == 0.0 {
        return Ok(b);
    }
    if fa.signum() == fb.signum() {
        return Err(Error::Precondition(format!(
            "no sign change on [{a}, {b}] ({fa}, {fb})"
        )));
    }
    // orient so that f(a) < 0 < f(b)
    let flip = fa > 0.0;
    let mut x = 0.5 * (a + b);
    let mut dx_old = b - a;
    let mut dx = dx_old;
    let (mut fx, mut dfx) = fdf(x);
    if flip {
        fx = -fx;
        dfx = -dfx;
    }
    for _ in 0..200 {
        let newton_out = ((x - b) * dfx - fx) * ((x - a) * dfx - fx) > 0.0;
        let slow = (2.0 * fx).abs() > (dx_old * dfx).abs();
        if newton_out || slow {
            dx_old = dx;
            dx = 0.5 * (b - a);
            x = a + dx;
        } else {
            dx_old = dx;
            dx = fx / dfx;
            x -= dx;
        }
        if dx.abs() <= xtol || b - a <= xtol {
            return Ok(x);
        }
        let (v, d) = fdf(x);
        fx = if flip { -v } else { v };
        dfx = if flip { -d } else { d };
        if fx == 0.0 {
            return Ok(x);
        }
        if fx < 0.0 {
            a = x;
        } else {
            b = x;
        }
    }
    Ok(x)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bisect_sqrt2() {
        let r = bisect(|x| x * x - 2.0, 0.0, 2.0, 1e-15).unwrap();
        assert!((r - 2f64.sqrt()).abs() < 1e-14);
    }

    #[test]
    fn newton_decreasing_function() {
        let r = newton_bracketed(|x| (1.0 - x.exp(), -x.exp()), -1.0, 3.0, 1e-15).unwrap();
        assert!(r.abs() < 1e-14);
    }

    #[test]
    fn rejects_missing_sign_change() {
        assert!(bisect(|x| x * x + 1.0, -1.0, 1.0, 1e-12).is_err());
        assert!(newton_bracketed(|x| (x * x + 1.0, 2.0 * x), -1.0, 1.0, 1e-12).is_err());
    }
}
