//! Oracles for the integration tests, independent of the library's numerics.
#![allow(dead_code)]

use torsion_core::dsl;
use torsion_core::Radial;

pub fn expr(src: &str) -> Radial {
    dsl::to_radial(dsl::parse(src).expect("test expression parses"))
}

/// Adaptive Simpson quadrature with Richardson correction.
pub fn simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    fn step(f: &dyn Fn(f64) -> f64, a: f64, b: f64, fa: f64, fm: f64, fb: f64, whole: f64, tol: f64, depth: u32) -> f64 {
        let m = 0.5 * (a + b);
        let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
        let (flm, frm) = (f(lm), f(rm));
        let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
        let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
        let delta = left + right - whole;
        if depth == 0 || delta.abs() <= 15.0 * tol {
            return left + right + delta / 15.0;
        }
        step(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1)
            + step(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)
    }
    let (fa, fb, fm) = (f(a), f(b), f(0.5 * (a + b)));
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    step(f, a, b, fa, fm, fb, whole, tol, 48)
}

/// Area of the unit sphere `S^{m-1}` from the Gamma-function formula.
pub fn sphere_area(m: usize) -> f64 {
    use std::f64::consts::PI;
    // 2 π^{m/2} / Γ(m/2), with Γ evaluated by its half-integer recurrence.
    let half = m as f64 / 2.0;
    let mut gamma = if m % 2 == 0 { 1.0 } else { PI.sqrt() };
    let mut x = if m % 2 == 0 { 1.0 } else { 0.5 };
    while x < half {
        gamma *= x;
        x += 1.0;
    }
    2.0 * PI.powf(half) / gamma
}

/// Torsional rigidity `V₀ ∫_0^R q² w^{m-1}` of a model ball, with `q = ∫ w^{m-1} / w^{m-1}`
/// evaluated by nested Simpson quadrature.
pub fn model_rigidity(m: usize, w: &dyn Fn(f64) -> f64, radius: f64) -> f64 {
    let k = (m - 1) as i32;
    let q = |t: f64| {
        if t == 0.0 {
            return 0.0;
        }
        simpson(&|u| w(u).powi(k), 0.0, t, 1e-15) / w(t).powi(k)
    };
    sphere_area(m) * simpson(&|t| q(t) * q(t) * w(t).powi(k), 0.0, radius, 1e-13)
}

pub fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}
