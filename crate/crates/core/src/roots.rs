//! Bracketing root finding for monotone pieces.

use crate::error::{Error, Result};

const BRACKET_WIDTH: f64 = 1e-12;
const MAX_BISECTIONS: usize = 200;

/// Solves `g(x) = y` on `[lo, hi]` where `g` is monotone there and `y` lies in
/// the closed image. Bisects to a bracket of width 1e-12, then applies one
/// Newton step that is kept only when it stays inside the bracket and
/// reduces the residual.
pub fn solve_monotone<G, D>(g: G, dg: D, lo: f64, hi: f64, y: f64, tol: f64) -> Result<f64>
where
    G: Fn(f64) -> f64,
    D: Fn(f64) -> f64,
{
    let (mut a, mut b) = (lo, hi);
    let ga = g(a) - y;
    let gb = g(b) - y;
    if ga == 0.0 {
        return Ok(a);
    }
    if gb == 0.0 {
        return Ok(b);
    }
    if ga.signum() == gb.signum() {
        // y sits on the boundary of the image up to rounding
        return if ga.abs() <= tol {
            Ok(a)
        } else if gb.abs() <= tol {
            Ok(b)
        } else {
            Err(Error::Convergence { tol, iterations: 0 })
        };
    }
    let increasing = gb > ga;
    let mut iterations = 0;
    while b - a > BRACKET_WIDTH && iterations < MAX_BISECTIONS {
        let m = 0.5 * (a + b);
        if m <= a || m >= b {
            break;
        }
        let gm = g(m) - y;
        if gm == 0.0 {
            return Ok(m);
        }
        if (gm > 0.0) == increasing {
            b = m;
        } else {
            a = m;
        }
        iterations += 1;
    }
    let mut x = 0.5 * (a + b);
    let mut r = g(x) - y;
    let d = dg(x);
    if d.is_finite() && d.abs() > 0.0 {
        let xn = x - r / d;
        if xn >= a && xn <= b {
            let rn = g(xn) - y;
            if rn.abs() < r.abs() {
                x = xn;
                r = rn;
            }
        }
    }
    if r.abs() <= tol || b - a <= BRACKET_WIDTH * 4.0 {
        Ok(x)
    } else {
        Err(Error::Convergence { tol, iterations })
    }
}

/// Plain bisection for a sign change of `h` on `[lo, hi]`.
pub fn bisect_sign_change<H: Fn(f64) -> f64>(h: H, mut lo: f64, mut hi: f64, width: f64) -> f64 {
    let hlo = h(lo);
    for _ in 0..MAX_BISECTIONS {
        if hi - lo <= width {
            break;
        }
        let m = 0.5 * (lo + hi);
        if (h(m) > 0.0) == (hlo > 0.0) {
            lo = m;
        } else {
            hi = m;
        }
    }
    0.5 * (lo + hi)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn inverts_square() {
        let x = solve_monotone(|x| x * x, |x| 2.0 * x, 0.0, 1.0, 0.25, 1e-12).unwrap();
        assert!((x - 0.5).abs() < 1e-12);
    }

    #[test]
    fn inverts_decreasing() {
        let x = solve_monotone(|x| 1.0 - x * x * x, |x| -3.0 * x * x, 0.0, 1.0, 0.875, 1e-12).unwrap();
        assert!((x - 0.5).abs() < 1e-11);
    }

    #[test]
    fn flat_endpoint_is_found() {
        // derivative vanishes at the root: Newton alone would struggle
        let x = solve_monotone(|x| (x - 0.5).powi(3), |x| 3.0 * (x - 0.5).powi(2), 0.0, 1.0, 0.0, 1e-12)
            .unwrap();
        assert!((x - 0.5).abs() < 1e-6);
    }

    #[test]
    fn out_of_image_is_an_error() {
        assert!(solve_monotone(|x| x, |_| 1.0, 0.0, 1.0, 2.0, 1e-12).is_err());
    }
}
