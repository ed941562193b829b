//! Second-order forward-mode derivatives.
//!
//! A [`Jet`] carries `(f, f', f'')` of a scalar function of one variable through
//! arithmetic, so user-supplied warping functions get exact derivatives without
//! finite differences.

use std::ops::{Add, Div, Mul, Neg, Sub};

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Jet {
    pub value: f64,
    pub d1: f64,
    pub d2: f64,
}

impl Jet {
    pub const fn new(value: f64, d1: f64, d2: f64) -> Self {
        Jet { value, d1, d2 }
    }

    pub const fn constant(value: f64) -> Self {
        Jet::new(value, 0.0, 0.0)
    }

    /// The independent variable at `r`.
    pub const fn variable(r: f64) -> Self {
        Jet::new(r, 1.0, 0.0)
    }

    pub fn is_finite(&self) -> bool {
        self.value.is_finite() && self.d1.is_finite() && self.d2.is_finite()
    }

    /// Applies an outer function given its value and first two derivatives at `self.value`.
    #[inline]
    pub fn chain(self, f: f64, df: f64, d2f: f64) -> Jet {
        Jet::new(f, df * self.d1, d2f * self.d1 * self.d1 + df * self.d2)
    }

    pub fn recip(self) -> Jet {
        let x = self.value;
        let inv = 1.0 / x;
        self.chain(inv, -inv * inv, 2.0 * inv * inv * inv)
    }

    pub fn sin(self) -> Jet {
        let (s, c) = self.value.sin_cos();
        self.chain(s, c, -s)
    }

    pub fn cos(self) -> Jet {
        let (s, c) = self.value.sin_cos();
        self.chain(c, -s, -c)
    }

    pub fn sinh(self) -> Jet {
        let (s, c) = (self.value.sinh(), self.value.cosh());
        self.chain(s, c, s)
    }

    pub fn cosh(self) -> Jet {
        let (s, c) = (self.value.sinh(), self.value.cosh());
        self.chain(c, s, c)
    }

    pub fn tanh(self) -> Jet {
        let t = self.value.tanh();
        let sech2 = 1.0 - t * t;
        self.chain(t, sech2, -2.0 * t * sech2)
    }

    pub fn exp(self) -> Jet {
        let e = self.value.exp();
        self.chain(e, e, e)
    }

    /// Natural logarithm; NaN components for non-positive arguments.
    pub fn ln(self) -> Jet {
        let x = self.value;
        self.chain(x.ln(), 1.0 / x, -1.0 / (x * x))
    }

    pub fn sqrt(self) -> Jet {
        let s = self.value.sqrt();
        self.chain(s, 0.5 / s, -0.25 / (s * self.value))
    }

    /// `self^n` for an integer exponent; valid for negative bases.
    pub fn powi(self, n: i32) -> Jet {
        let x = self.value;
        let nf = f64::from(n);
        let d1 = if n == 0 { 0.0 } else { nf * x.powi(n - 1) };
        let d2 = if n == 0 || n == 1 {
            0.0
        } else {
            nf * (nf - 1.0) * x.powi(n - 2)
        };
        self.chain(x.powi(n), d1, d2)
    }

    /// `self^p` for a real constant exponent.
    pub fn powf(self, p: f64) -> Jet {
        if p.fract() == 0.0 && p.abs() <= f64::from(i32::MAX) {
            return self.powi(p as i32);
        }
        let x = self.value;
        self.chain(x.powf(p), p * x.powf(p - 1.0), p * (p - 1.0) * x.powf(p - 2.0))
    }

    /// `self^other` with both sides varying: `exp(other * ln self)`.
    pub fn pow(self, other: Jet) -> Jet {
        if other.d1 == 0.0 && other.d2 == 0.0 {
            return self.powf(other.value);
        }
        (other * self.ln()).exp()
    }
}

impl Add for Jet {
    type Output = Jet;
    fn add(self, o: Jet) -> Jet {
        Jet::new(self.value + o.value, self.d1 + o.d1, self.d2 + o.d2)
    }
}

impl Sub for Jet {
    type Output = Jet;
    fn sub(self, o: Jet) -> Jet {
        Jet::new(self.value - o.value, self.d1 - o.d1, self.d2 - o.d2)
    }
}

impl Mul for Jet {
    type Output = Jet;
    fn mul(self, o: Jet) -> Jet {
        Jet::new(
            self.value * o.value,
            self.d1 * o.value + self.value * o.d1,
            self.d2 * o.value + 2.0 * self.d1 * o.d1 + self.value * o.d2,
        )
    }
}

impl Div for Jet {
    type Output = Jet;
    fn div(self, o: Jet) -> Jet {
        self * o.recip()
    }
}

impl Neg for Jet {
    type Output = Jet;
    fn neg(self) -> Jet {
        Jet::new(-self.value, -self.d1, -self.d2)
    }
}

impl Add<f64> for Jet {
    type Output = Jet;
    fn add(self, c: f64) -> Jet {
        Jet::new(self.value + c, self.d1, self.d2)
    }
}

impl Mul<f64> for Jet {
    type Output = Jet;
    fn mul(self, c: f64) -> Jet {
        Jet::new(self.value * c, self.d1 * c, self.d2 * c)
    }
}

impl Div<f64> for Jet {
    type Output = Jet;
    fn div(self, c: f64) -> Jet {
        Jet::new(self.value / c, self.d1 / c, self.d2 / c)
    }
}

impl Mul<Jet> for f64 {
    type Output = Jet;
    fn mul(self, j: Jet) -> Jet {
        j * self
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn central(f: impl Fn(f64) -> f64, x: f64) -> (f64, f64) {
        let h = 1e-4;
        let d1 = (f(x + h) - f(x - h)) / (2.0 * h);
        let d2 = (f(x + h) - 2.0 * f(x) + f(x - h)) / (h * h);
        (d1, d2)
    }

    #[test]
    fn product_and_quotient_rules() {
        let x = Jet::variable(1.3);
        let j = x.sin() * x.exp() / (x + 1.0);
        let f = |t: f64| t.sin() * t.exp() / (t + 1.0);
        let (d1, d2) = central(f, 1.3);
        assert!((j.value - f(1.3)).abs() < 1e-15);
        assert!((j.d1 - d1).abs() < 1e-7);
        assert!((j.d2 - d2).abs() < 1e-5);
    }

    #[test]
    fn integer_powers_handle_zero_and_negative_bases() {
        let j = Jet::variable(2.0).powi(3);
        assert_eq!((j.value, j.d1, j.d2), (8.0, 12.0, 12.0));
        let z = Jet::variable(0.0).powf(3.0);
        assert_eq!((z.value, z.d1, z.d2), (0.0, 0.0, 0.0));
        let n = Jet::variable(-2.0).powf(2.0);
        assert_eq!((n.value, n.d1, n.d2), (4.0, -4.0, 2.0));
    }

    #[test]
    fn variable_exponent_matches_closed_form() {
        // x^x
        let x = Jet::variable(1.7);
        let j = x.pow(x);
        let f = |t: f64| t.powf(t);
        let (d1, d2) = central(f, 1.7);
        assert!((j.d1 - d1).abs() < 1e-7);
        assert!((j.d2 - d2).abs() < 1e-5);
    }
}
