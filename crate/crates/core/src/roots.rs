//! Bracketed inversion of monotone functions (Brent's method).

use crate::error::{Error, Result};
use crate::radial::RadialFunction;

/// Finds `r` in `[lo, hi]` with `|f(r) - target| <= tol` for monotone `f`.
///
/// The bracket is also shrunk until it is a few ulps wide, so the returned point is
/// as precise as the function values allow.
pub fn invert_monotone_with<F>(mut f: F, target: f64, lo: f64, hi: f64, tol: f64) -> Result<f64>
where
    F: FnMut(f64) -> Result<f64>,
{
    let f_lo = f(lo)?;
    let f_hi = f(hi)?;
    if !(f_lo.is_finite() && f_hi.is_finite()) {
        return Err(Error::NonFinite {
            at: if f_lo.is_finite() { hi } else { lo },
        });
    }
    let (vmin, vmax) = if f_lo <= f_hi { (f_lo, f_hi) } else { (f_hi, f_lo) };
    if target < vmin - tol || target > vmax + tol {
        return Err(Error::NotBracketed { target, f_lo, f_hi });
    }
    if (f_lo - target).abs() <= tol && (f_lo - target).abs() <= (f_hi - target).abs() {
        return Ok(lo);
    }
    if (f_hi - target).abs() <= tol {
        return Ok(hi);
    }
    let increasing = f_hi > f_lo;

    let (mut a, mut b) = (lo, hi);
    let (mut fa, mut fb) = (f_lo - target, f_hi - target);
    let (mut c, mut fc) = (a, fa);
    let mut d = b - a;
    let mut e = d;
    for _ in 0..200 {
        if fb.signum() == fc.signum() {
            c = a;
            fc = fa;
            d = b - a;
            e = d;
        }
        if fc.abs() < fb.abs() {
            a = b;
            b = c;
            c = a;
            fa = fb;
            fb = fc;
            fc = fa;
        }
        let xtol = 2.0 * f64::EPSILON * b.abs() + 0.5 * f64::MIN_POSITIVE;
        let half = 0.5 * (c - b);
        if fb == 0.0 || (half.abs() <= xtol && fb.abs() <= tol) {
            return Ok(b);
        }
        if half.abs() <= xtol {
            // Bracket collapsed: accept roundoff-level residuals, otherwise it is a jump.
            if fb.abs() <= 1e-9 * f_lo.abs().max(f_hi.abs()) {
                return Ok(b);
            }
            return Err(Error::NotMonotone { at: b });
        }
        if e.abs() >= xtol && fa.abs() > fb.abs() {
            let s = fb / fa;
            let (mut p, mut q);
            if a == c {
                p = 2.0 * half * s;
                q = 1.0 - s;
            } else {
                let qq = fa / fc;
                let r = fb / fc;
                p = s * (2.0 * half * qq * (qq - r) - (b - a) * (r - 1.0));
                q = (qq - 1.0) * (r - 1.0) * (s - 1.0);
            }
            if p > 0.0 {
                q = -q;
            } else {
                p = -p;
            }
            if 2.0 * p < (3.0 * half * q - (xtol * q).abs()).min((e * q).abs()) {
                e = d;
                d = p / q;
            } else {
                d = half;
                e = d;
            }
        } else {
            d = half;
            e = d;
        }
        a = b;
        fa = fb;
        b += if d.abs() > xtol { d } else { xtol.copysign(half) };
        fb = f(b)? - target;
        if !fb.is_finite() {
            return Err(Error::NonFinite { at: b });
        }
        // Monotonicity check against the original endpoints.
        let v = fb + target;
        let outside = if increasing {
            v < f_lo - tol || v > f_hi + tol
        } else {
            v > f_lo + tol || v < f_hi - tol
        };
        if outside {
            return Err(Error::NotMonotone { at: b });
        }
    }
    Ok(b)
}

pub fn invert_monotone(
    f: &dyn RadialFunction,
    target: f64,
    lo: f64,
    hi: f64,
    tol: f64,
) -> Result<f64> {
    invert_monotone_with(|r| Ok(f.eval(r)), target, lo, hi, tol)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::radial::radial;
    use std::f64::consts::PI;

    #[test]
    fn square_root_and_identity() {
        let sq = radial(|x| x * x);
        let r = invert_monotone(&*sq, 4.0, 0.0, 10.0, 1e-12).unwrap();
        assert!((r - 2.0).abs() < 1e-12);
        let id = radial(|x| x);
        let r = invert_monotone(&*id, 0.3, 0.0, 1.0, 1e-14).unwrap();
        assert!((r - 0.3).abs() < 1e-14);
    }

    #[test]
    fn hyperbolic_disc_area_inverse() {
        let area = radial(|x| (x.cosh() + -1.0) * (2.0 * PI));
        let r = invert_monotone(&*area, PI, 0.0, 10.0, 1e-12).unwrap();
        // arccosh(1.5), checked by substitution
        assert!((2.0 * PI * (r.cosh() - 1.0) - PI).abs() < 1e-12);
        assert!((r - 0.962_423_7).abs() < 1e-7);
    }

    #[test]
    fn decreasing_functions_are_supported() {
        let r = invert_monotone_with(|x| Ok(1.0 - x * x), 0.75, 0.0, 1.0, 1e-13).unwrap();
        assert!((r - 0.5).abs() < 1e-12);
    }

    #[test]
    fn unbracketed_target_is_rejected() {
        let sq = radial(|x| x * x);
        assert!(matches!(
            invert_monotone(&*sq, 200.0, 0.0, 10.0, 1e-12),
            Err(Error::NotBracketed { .. })
        ));
    }

    #[test]
    fn sign_anomaly_is_reported() {
        // Bump in the middle violates monotonicity on the bracket.
        let res = invert_monotone_with(
            |x| Ok(if (0.45..0.55).contains(&x) { 10.0 } else { x }),
            0.5,
            0.0,
            1.0,
            1e-12,
        );
        assert!(matches!(res, Err(Error::NotMonotone { .. })), "{res:?}");
    }
}
