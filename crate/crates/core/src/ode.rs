//! Scalar initial value problems: adaptive Dormand–Prince 5(4) with continuous output,
//! plus a regularized start for origins where the right-hand side is singular.

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::jet::Jet;
use crate::radial::RadialFunction;

pub type Rhs = Arc<dyn Fn(f64, f64) -> f64 + Send + Sync>;
type Head = Arc<dyn Fn(f64) -> Jet + Send + Sync>;

/// Solutions larger than this are reported as blow-up.
pub const OVERFLOW_GUARD: f64 = 1e250;

/// Relative offset of the first node when the origin is singular.
pub const SINGULAR_START: f64 = 1e-6;

const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;
const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const A71: f64 = 35.0 / 384.0;
const A73: f64 = 500.0 / 1113.0;
const A74: f64 = 125.0 / 192.0;
const A75: f64 = -2187.0 / 6784.0;
const A76: f64 = 11.0 / 84.0;
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;
const D1: f64 = -12715105075.0 / 11282082432.0;
const D3: f64 = 87487479700.0 / 32700410799.0;
const D4: f64 = -10690763975.0 / 1880347072.0;
const D5: f64 = 701980252875.0 / 199316789632.0;
const D6: f64 = -1453857185.0 / 822651844.0;
const D7: f64 = 69997945.0 / 29380423.0;

#[derive(Debug, Clone, Copy)]
struct Step {
    r0: f64,
    h: f64,
    coef: [f64; 5],
}

impl Step {
    fn value(&self, r: f64) -> f64 {
        let t = (r - self.r0) / self.h;
        let t1 = 1.0 - t;
        let c = &self.coef;
        c[0] + t * (c[1] + t1 * (c[2] + t * (c[3] + t1 * c[4])))
    }
}

/// Continuous solution of a scalar IVP on `[start, end]`.
///
/// Values come from the solver's fourth-order continuous extension; the first
/// derivative is the right-hand side evaluated on the solution.
#[derive(Clone)]
pub struct DenseSolution {
    rhs: Rhs,
    steps: Vec<Step>,
    start: f64,
    end: f64,
    head: Option<Head>,
    /// `(origin, k)`: stored steps hold `y / (r - origin)^k`.
    scale: Option<(f64, f64)>,
}

impl fmt::Debug for DenseSolution {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("DenseSolution")
            .field("start", &self.start)
            .field("end", &self.end)
            .field("steps", &self.steps.len())
            .finish()
    }
}

impl DenseSolution {
    pub fn start(&self) -> f64 {
        self.start
    }

    pub fn end(&self) -> f64 {
        self.end
    }

    pub fn steps(&self) -> usize {
        self.steps.len()
    }

    /// Closed-form behaviour used below the first integration node.
    pub fn with_head(mut self, head: impl Fn(f64) -> Jet + Send + Sync + 'static) -> Self {
        self.head = Some(Arc::new(head));
        self
    }

    pub fn value(&self, r: f64) -> f64 {
        if r < self.start {
            if let Some(head) = &self.head {
                return head(r).value;
            }
        }
        let idx = self
            .steps
            .partition_point(|s| s.r0 + s.h < r)
            .min(self.steps.len() - 1);
        let r = r.clamp(self.start, self.end);
        let u = self.steps[idx].value(r);
        match self.scale {
            Some((origin, k)) => (r - origin).powf(k) * u,
            None => u,
        }
    }

    pub fn slope(&self, r: f64) -> f64 {
        if r < self.start {
            if let Some(head) = &self.head {
                return head(r).d1;
            }
        }
        (self.rhs)(r, self.value(r))
    }
}

impl RadialFunction for DenseSolution {
    fn try_jet(&self, r: f64) -> Result<Jet> {
        if r < self.start {
            if let Some(head) = &self.head {
                return Ok(head(r));
            }
        }
        let value = self.value(r);
        let d1 = (self.rhs)(r, value);
        let delta = 1e-5 * (self.end - self.start);
        let lo = (r - delta).max(self.start);
        let hi = (r + delta).min(self.end);
        let d2 = (self.slope(hi) - self.slope(lo)) / (hi - lo);
        Ok(Jet::new(value, d1, d2))
    }

    fn domain_end(&self) -> f64 {
        self.end
    }
}

/// Tolerances for [`solve_ivp`]: the local error per step is kept below
/// `abs + rel * |y|`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IvpTolerance {
    pub rel: f64,
    pub abs: f64,
}

impl IvpTolerance {
    pub fn uniform(tol: f64) -> Self {
        IvpTolerance { rel: tol, abs: tol }
    }
}

/// Integrates `y' = rhs(r, y)` from `(r0, y0)` to `r_end > r0`.
pub fn solve_ivp(rhs: Rhs, r0: f64, y0: f64, r_end: f64, tol: IvpTolerance) -> Result<DenseSolution> {
    let k1 = rhs(r0, y0);
    if !k1.is_finite() {
        return Err(Error::SingularityUnhandled { at: r0 });
    }
    if r_end <= r0 {
        let step = Step {
            r0,
            h: 1.0,
            coef: [y0, 0.0, 0.0, 0.0, 0.0],
        };
        return Ok(DenseSolution {
            rhs,
            steps: vec![step],
            start: r0,
            end: r0,
            head: None,
            scale: None,
        });
    }
    let span = r_end - r0;
    let mut steps = Vec::new();
    let mut r = r0;
    let mut y = y0;
    let mut k1 = k1;
    let mut h = initial_step(&*rhs, r0, y0, k1, span, tol);
    let h_min = 1e-14 * span.max(r0.abs());
    while r < r_end {
        if r + h >= r_end || r + 1.01 * h >= r_end {
            h = r_end - r;
        }
        let k2 = rhs(r + C2 * h, y + h * A21 * k1);
        let k3 = rhs(r + C3 * h, y + h * (A31 * k1 + A32 * k2));
        let k4 = rhs(r + C4 * h, y + h * (A41 * k1 + A42 * k2 + A43 * k3));
        let k5 = rhs(r + C5 * h, y + h * (A51 * k1 + A52 * k2 + A53 * k3 + A54 * k4));
        let r_new = if h == r_end - r { r_end } else { r + h };
        let k6 = rhs(
            r_new,
            y + h * (A61 * k1 + A62 * k2 + A63 * k3 + A64 * k4 + A65 * k5),
        );
        let y_new = y + h * (A71 * k1 + A73 * k3 + A74 * k4 + A75 * k5 + A76 * k6);
        let k7 = rhs(r_new, y_new);
        let err_est = h * (E1 * k1 + E3 * k3 + E4 * k4 + E5 * k5 + E6 * k6 + E7 * k7);
        let scale = tol.abs + tol.rel * y.abs().max(y_new.abs());
        let err = (err_est / scale).abs();
        if !err.is_finite() || !y_new.is_finite() {
            if h <= h_min {
                return Err(Error::Blowup { at: r });
            }
            h *= 0.25;
            continue;
        }
        if err <= 1.0 {
            if y_new.abs() > OVERFLOW_GUARD {
                return Err(Error::Blowup { at: r_new });
            }
            let ydiff = y_new - y;
            let bspl = h * k1 - ydiff;
            steps.push(Step {
                r0: r,
                h,
                coef: [
                    y,
                    ydiff,
                    bspl,
                    ydiff - h * k7 - bspl,
                    h * (D1 * k1 + D3 * k3 + D4 * k4 + D5 * k5 + D6 * k6 + D7 * k7),
                ],
            });
            r = r_new;
            y = y_new;
            k1 = k7;
            let factor = if err == 0.0 {
                5.0
            } else {
                (0.9 * err.powf(-0.2)).clamp(0.2, 5.0)
            };
            h *= factor;
        } else {
            if h <= h_min {
                return Err(Error::ToleranceNotMet {
                    a: r0,
                    b: r_end,
                    estimate: err,
                    intervals: steps.len(),
                });
            }
            h *= (0.9 * err.powf(-0.2)).clamp(0.2, 1.0);
        }
    }
    Ok(DenseSolution {
        rhs,
        steps,
        start: r0,
        end: r_end,
        head: None,
        scale: None,
    })
}

fn initial_step(rhs: &(dyn Fn(f64, f64) -> f64 + Send + Sync), r0: f64, y0: f64, k1: f64, span: f64, tol: IvpTolerance) -> f64 {
    let sc = tol.abs + tol.rel * y0.abs();
    let d0 = (y0 / sc).abs();
    let d1 = (k1 / sc).abs();
    let h0 = if d0 < 1e-5 || d1 < 1e-5 { 1e-6 * span } else { 0.01 * d0 / d1 };
    let h0 = h0.min(span);
    let k2 = rhs(r0 + h0, y0 + h0 * k1);
    let d2 = ((k2 - k1) / sc).abs() / h0;
    let h1 = if d1.max(d2) <= 1e-15 {
        (h0 * 1e-3).max(1e-6 * span)
    } else {
        (0.01 / d1.max(d2)).powf(0.2)
    };
    (100.0 * h0).min(h1).min(span).max(1e-12 * span)
}

/// Solves `y' = rhs(r, y)` on `[r0, r_end]`.
///
/// With `leading = Some(k)` the origin may be singular: the solution is taken to
/// behave as `y0 * (r - r0)^k` there, the problem is rewritten for the regular
/// ratio `u = y / (r - r0)^k`, and integration starts at `r0 + 1e-6 * (r_end - r0)`
/// with `u = y0`. Without a leading exponent the right-hand side must be finite at
/// `(r0, y0)`.
pub fn solve_ivp_regularized(
    rhs: Rhs,
    r0: f64,
    y0: f64,
    r_end: f64,
    tol: f64,
    leading: Option<f64>,
) -> Result<DenseSolution> {
    let Some(k) = leading else {
        if !rhs(r0, y0).is_finite() {
            return Err(Error::SingularityUnhandled { at: r0 });
        }
        return solve_ivp(rhs, r0, y0, r_end, IvpTolerance::uniform(tol));
    };
    let eps = r0 + SINGULAR_START * (r_end - r0);
    let inner = rhs.clone();
    let ratio_rhs: Rhs = Arc::new(move |r: f64, u: f64| {
        let x = r - r0;
        let xk = x.powf(k);
        (inner(r, xk * u) - k * x.powf(k - 1.0) * u) / xk
    });
    let ratio = solve_ivp(ratio_rhs, eps, y0, r_end, IvpTolerance::uniform(tol))?;
    Ok(DenseSolution {
        rhs,
        steps: ratio.steps,
        start: ratio.start,
        end: ratio.end,
        head: None,
        scale: Some((r0, k)),
    }
    .with_head(move |r| {
        let x = r - r0;
        Jet::new(
            y0 * x.powf(k),
            y0 * k * x.powf(k - 1.0),
            y0 * k * (k - 1.0) * x.powf(k - 2.0),
        )
    }))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_solution() {
        let sol = solve_ivp_regularized(Arc::new(|_, _| 0.0), 0.0, 5.0, 3.0, 1e-10, None).unwrap();
        assert_eq!(sol.value(3.0), 5.0);
        assert_eq!(sol.value(1.234), 5.0);
    }

    #[test]
    fn linear_singular_origin() {
        // y' = y / r with y ~ r: y(r) = r.
        let sol =
            solve_ivp_regularized(Arc::new(|r, y| y / r), 0.0, 1.0, 2.0, 1e-10, Some(1.0)).unwrap();
        assert!((sol.value(2.0) - 2.0).abs() < 1e-12);
        assert!((sol.value(1.0) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn cubic_singular_origin() {
        // y' = 3 y / r with y ~ r^3: y(2) = 8.
        let sol =
            solve_ivp_regularized(Arc::new(|r, y| 3.0 * y / r), 0.0, 1.0, 2.0, 1e-10, Some(3.0)).unwrap();
        assert!((sol.value(2.0) - 8.0).abs() < 1e-9);
        assert!((sol.eval(1e-8) - 1e-24).abs() < 1e-30);
    }

    #[test]
    fn singular_origin_without_exponent_is_refused() {
        let err = solve_ivp_regularized(Arc::new(|r, y| y / r), 0.0, 1.0, 2.0, 1e-10, None);
        assert!(matches!(err, Err(Error::SingularityUnhandled { .. })));
    }

    #[test]
    fn dense_output_is_accurate_between_steps() {
        let sol = solve_ivp(Arc::new(|_, y| y), 0.0, 1.0, 3.0, IvpTolerance::uniform(1e-11)).unwrap();
        for i in 0..=300 {
            let r = 3.0 * i as f64 / 300.0;
            let rel = (sol.value(r) - r.exp()).abs() / r.exp();
            assert!(rel < 1e-9, "r = {r}: rel err {rel}");
        }
        let j = sol.jet(1.5);
        assert!((j.d1 - 1.5f64.exp()).abs() < 1e-8);
        assert!((j.d2 - 1.5f64.exp()).abs() < 1e-4);
    }

    #[test]
    fn blowup_is_detected() {
        // y' = y^2, y(0) = 1 blows up at r = 1.
        let err = solve_ivp(Arc::new(|_, y| y * y), 0.0, 1.0, 2.0, IvpTolerance::uniform(1e-8));
        assert!(matches!(err, Err(Error::Blowup { .. }) | Err(Error::ToleranceNotMet { .. })), "{err:?}");
    }
}
