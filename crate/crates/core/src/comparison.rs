//! Isoperimetric comparison spaces `C^m_{w,g,h}`.
//!
//! Given the bounding data `(m, w, g, h, R)`, the comparison space is the model space
//! with warping `W(s) = Λ(r(s))^{1/(m-1)}`, where `s(r) = ∫_0^r 1/g` is the stretching
//! map and `Λ` solves
//!
//! ```text
//! (Λ w g)' = Λ w g · (m / g²)(η_w - h),      (Λ^{1/(m-1)})'(0) = 1.
//! ```
//!
//! The equation is solved for the regular remainder `ℓ̃ = ln(Λ w g) - m ln r`, which
//! vanishes at the pole under the normalization above.

use std::fmt;
use std::sync::Arc;

use serde::Deserialize;

use crate::error::{Error, Result};
use crate::jet::Jet;
use crate::model::{ModelSpace, MODEL_TOL};
use crate::ode::{self, DenseSolution, IvpTolerance, Rhs, SINGULAR_START};
use crate::quadrature::Quadrature;
use crate::radial::{Grid, HermiteTable, Radial, RadialFunction};
use crate::sum::CompensatedSum;

/// Whether the constellation bounds the submanifold from below or from above.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    Below,
    Above,
}

impl fmt::Display for Direction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Direction::Below => "below",
            Direction::Above => "above",
        })
    }
}

/// Tolerance for the `q_W` cross-check between the `W` form and the `Λ/g` form.
pub const QUOTIENT_AGREEMENT: f64 = 1e-6;

const ODE_TOL: f64 = 1e-12;
// Below this fraction of the radius, pole asymptotics replace the exact formulas.
const POLE_CUTOFF: f64 = 1e-12;
// Nodes next to the pole where η_w - h must be positive.
const POLE_NODES: usize = 8;

#[derive(Clone)]
pub struct ConstellationSpec {
    pub m: usize,
    pub w: Radial,
    pub g: Radial,
    pub h: Radial,
    pub radius: f64,
    pub direction: Direction,
}

impl fmt::Debug for ConstellationSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ConstellationSpec")
            .field("m", &self.m)
            .field("radius", &self.radius)
            .field("direction", &self.direction)
            .finish_non_exhaustive()
    }
}

impl ConstellationSpec {
    /// The constellation `g ≡ 1`, `h ≡ 0`, whose comparison space is `M^m_w` itself.
    pub fn model(m: usize, w: Radial, radius: f64, direction: Direction) -> Self {
        ConstellationSpec {
            m,
            w,
            g: crate::radial::constant(1.0),
            h: crate::radial::constant(0.0),
            radius,
            direction,
        }
    }

    /// Checks the tangency bound `g` and the convexity bound `h` on the default grid.
    /// The warping `w` is checked when the intermediary model is built.
    pub fn validate(&self) -> Result<()> {
        let g0 = self.g.try_jet(0.0).map_err(|e| inadmissible("g", e.to_string()))?;
        if (g0.value - 1.0).abs() > 1e-12 {
            return Err(inadmissible("g", format!("need g(0) = 1, got {}", g0.value)));
        }
        let nodes = Grid::table_nodes(self.radius);
        for &r in &nodes {
            let g = self.g.try_jet(r).map_err(|e| inadmissible("g", e.to_string()))?;
            if !(g.is_finite() && g.value > 0.0 && g.value <= 1.0 + 1e-12) {
                return Err(inadmissible("g", format!("need 0 < g <= 1, g({r}) = {}", g.value)));
            }
            if self.direction == Direction::Above && (g.value - 1.0).abs() > 1e-12 {
                return Err(inadmissible(
                    "g",
                    format!("upper-bounded constellations need g ≡ 1, g({r}) = {}", g.value),
                ));
            }
        }
        for &r in &nodes[1..] {
            let h = self.h.try_jet(r).map_err(|e| inadmissible("h", e.to_string()))?;
            if !h.is_finite() {
                return Err(inadmissible("h", format!("h({r}) is not finite")));
            }
        }
        Ok(())
    }
}

fn inadmissible(field: &'static str, reason: String) -> Error {
    Error::Inadmissible { field, reason }
}

/// Jets of `w`, `g`, `h` at one radius and the quantities derived from them.
#[derive(Debug, Clone, Copy)]
struct Local {
    m: f64,
    w: Jet,
    g: Jet,
    h: Jet,
}

impl Local {
    fn eta(&self) -> f64 {
        self.w.d1 / self.w.value
    }

    fn eta_slope(&self) -> f64 {
        let eta = self.eta();
        self.w.d2 / self.w.value - eta * eta
    }

    /// `(ln Λ)' = m(η - h)/g² - η - g'/g`.
    fn log_lambda_slope(&self) -> f64 {
        let g2 = self.g.value * self.g.value;
        self.m * (self.eta() - self.h.value) / g2 - self.eta() - self.g.d1 / self.g.value
    }

    fn log_lambda_curvature(&self) -> f64 {
        let (g, dg, d2g) = (self.g.value, self.g.d1, self.g.d2);
        let diff = self.eta() - self.h.value;
        let ddiff = self.eta_slope() - self.h.d1;
        self.m * (ddiff * g - 2.0 * diff * dg) / (g * g * g) - self.eta_slope()
            - (d2g / g - (dg / g) * (dg / g))
    }
}

/// `Λ` on `[0, R]` through the remainder `ℓ̃`.
struct LambdaProfile {
    m: usize,
    w: Radial,
    g: Radial,
    h: Radial,
    remainder: DenseSolution,
}

impl LambdaProfile {
    fn local(&self, r: f64) -> Result<Local> {
        Ok(Local {
            m: self.m as f64,
            w: self.w.try_jet(r)?,
            g: self.g.try_jet(r)?,
            h: self.h.try_jet(r)?,
        })
    }

    /// `ln Λ` with its first two derivatives, for `r > 0`.
    fn log_lambda(&self, r: f64) -> Result<Jet> {
        let l = self.local(r)?;
        let value = self.m as f64 * r.ln() + self.remainder.value(r) - l.w.value.ln() - l.g.value.ln();
        Ok(Jet::new(value, l.log_lambda_slope(), l.log_lambda_curvature()))
    }

    fn lambda(&self, r: f64) -> Result<f64> {
        if r < POLE_CUTOFF * self.remainder.end() {
            // Λ = r^{m-1} (1 + O(r)); avoids overflow of 1/r terms.
            return Ok(r.powi(self.m as i32 - 1));
        }
        Ok(self.log_lambda(r)?.value.exp())
    }
}

/// `W(s) = Λ(r(s))^{1/(m-1)}` as a function of the stretched radius.
struct Warping {
    profile: Arc<LambdaProfile>,
    inverse: Arc<HermiteTable>,
    curvature_at_pole: f64,
}

impl Warping {
    fn jet_positive(&self, s: f64) -> Result<Jet> {
        let r = self.inverse.interpolate(s);
        let k = (self.profile.m - 1) as f64;
        let log = self.profile.log_lambda(r.value)?;
        let in_r = Jet::new(log.value / k, log.d1 / k, log.d2 / k).exp();
        Ok(r.chain(in_r.value, in_r.d1, in_r.d2))
    }
}

impl RadialFunction for Warping {
    fn try_jet(&self, s: f64) -> Result<Jet> {
        let k = self.curvature_at_pole;
        if s < POLE_CUTOFF * self.inverse.end() {
            return Ok(Jet::new(s + 0.5 * k * s * s, 1.0 + k * s, k));
        }
        self.jet_positive(s)
    }
}

/// The stretching map `s(r) = ∫_0^r 1/g` and its inverse, both tabulated.
#[derive(Debug, Clone)]
pub struct Stretching {
    forward: Arc<HermiteTable>,
    inverse: Arc<HermiteTable>,
}

impl Stretching {
    pub fn new(g: &dyn RadialFunction, radius: f64) -> Result<Self> {
        let nodes = Grid::table_nodes(radius);
        let quad = Quadrature::relative(MODEL_TOL);
        let values = quad.cumulative(|r| Ok(1.0 / g.try_jet(r)?.value), &nodes)?;
        let mut forward = Vec::with_capacity(nodes.len());
        let mut inverse = Vec::with_capacity(nodes.len());
        for (&r, &s) in nodes.iter().zip(&values) {
            let gj = g.try_jet(r)?;
            forward.push(Jet::new(s, 1.0 / gj.value, -gj.d1 / (gj.value * gj.value)));
            inverse.push(Jet::new(r, gj.value, gj.value * gj.d1));
        }
        Ok(Stretching {
            forward: Arc::new(HermiteTable::new(nodes, forward)?),
            inverse: Arc::new(HermiteTable::new(values, inverse)?),
        })
    }

    /// `s(r)`.
    pub fn stretch(&self, r: f64) -> f64 {
        self.forward.interpolate(r).value
    }

    /// `r(s)`, the inverse map.
    pub fn unstretch(&self, s: f64) -> f64 {
        self.inverse.interpolate(s).value
    }

    /// `s(R)`.
    pub fn stretched_radius(&self) -> f64 {
        self.inverse.end()
    }
}

/// Stretching map of a constellation.
pub fn stretching(spec: &ConstellationSpec) -> Result<Stretching> {
    spec.validate()?;
    Stretching::new(&*spec.g, spec.radius)
}

#[derive(Clone)]
pub struct ComparisonSpace {
    spec: ConstellationSpec,
    intermediary: ModelSpace,
    stretching: Stretching,
    profile: Arc<LambdaProfile>,
    // ∫_0^r Λ/g
    lambda_integral: HermiteTable,
    w_model: ModelSpace,
    psi: Arc<HermiteTable>,
}

impl fmt::Debug for ComparisonSpace {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ComparisonSpace")
            .field("spec", &self.spec)
            .field("stretched_radius", &self.stretched_radius())
            .finish_non_exhaustive()
    }
}

impl ComparisonSpace {
    pub fn build(spec: &ConstellationSpec) -> Result<Self> {
        spec.validate()?;
        let m = spec.m;
        let radius = spec.radius;
        let intermediary = ModelSpace::new(m, spec.w.clone(), radius)?;
        let nodes = Grid::table_nodes(radius);

        let local = |r: f64| -> Result<Local> {
            Ok(Local {
                m: m as f64,
                w: spec.w.try_jet(r)?,
                g: spec.g.try_jet(r)?,
                h: spec.h.try_jet(r)?,
            })
        };
        for &r in nodes.iter().skip(1).take(POLE_NODES) {
            let l = local(r)?;
            if !(l.eta() - l.h.value > 0.0) {
                return Err(Error::NonPositiveLambda {
                    reason: format!(
                        "η_w - h = {} at r = {r}; it must be positive near the pole",
                        l.eta() - l.h.value
                    ),
                });
            }
        }
        let h0 = spec.h.try_jet(0.0).map_err(|e| inadmissible("h", e.to_string()))?;
        if !h0.value.is_finite() {
            return Err(inadmissible("h", "h must be bounded at the pole".into()));
        }

        let stretching = Stretching::new(&*spec.g, radius)?;
        let profile = Arc::new(solve_lambda(spec)?);

        // ∫_0^r Λ/g with slope Λ/g and curvature (Λ/g)'.
        let quad = Quadrature::relative(MODEL_TOL);
        let over_g = |r: f64| -> Result<f64> { Ok(profile.lambda(r)? / spec.g.try_jet(r)?.value) };
        let integrals = quad.cumulative(over_g, &nodes)?;
        let mut jets = Vec::with_capacity(nodes.len());
        jets.push(Jet::new(0.0, 0.0, if m == 2 { 1.0 } else { 0.0 }));
        for (&r, &v) in nodes.iter().zip(&integrals).skip(1) {
            let l = local(r)?;
            let lam = profile.lambda(r)?;
            if !(lam > 0.0 && lam.is_finite()) {
                return Err(Error::Blowup { at: r });
            }
            let g = l.g.value;
            let ratio = lam / g;
            jets.push(Jet::new(v, ratio, ratio * (l.log_lambda_slope() - l.g.d1 / g)));
        }
        let lambda_integral = HermiteTable::new(nodes.clone(), jets)?;

        let mut warping = Warping {
            profile: profile.clone(),
            inverse: stretching.inverse.clone(),
            curvature_at_pole: 0.0,
        };
        let s_max = stretching.stretched_radius();
        warping.curvature_at_pole = warping.jet_positive(1e-6 * s_max)?.d2;
        let w_model = ModelSpace::new(m, Arc::new(warping), s_max)?;

        let mut space = ComparisonSpace {
            spec: spec.clone(),
            intermediary,
            stretching,
            profile,
            lambda_integral,
            w_model,
            psi: Arc::new(HermiteTable::new(vec![0.0, 1.0], vec![Jet::default(); 2])?),
        };

        for &r in &nodes[1..] {
            let s = space.stretching.stretch(r);
            let by_lambda = space.quotient_at(r)?;
            let by_w = space.w_model.quotient(s.min(s_max))?;
            if (by_lambda - by_w).abs() > QUOTIENT_AGREEMENT * by_w.abs() {
                return Err(Error::InternalMismatch {
                    quantity: "isoperimetric quotient of the comparison space",
                    first: by_lambda,
                    second: by_w,
                });
            }
        }
        space.psi = Arc::new(space.tabulate_psi(&nodes)?);
        Ok(space)
    }

    fn tabulate_psi(&self, nodes: &[f64]) -> Result<HermiteTable> {
        let quad = Quadrature::relative(MODEL_TOL);
        let integrand = |u: f64| -> Result<f64> { Ok(self.quotient_at(u)? / self.spec.g.try_jet(u)?.value) };
        let mut pieces = Vec::with_capacity(nodes.len() - 1);
        for w in nodes.windows(2) {
            pieces.push(quad.try_integrate(integrand, w[0], w[1])?);
        }
        let mut values = vec![0.0; nodes.len()];
        let mut acc = CompensatedSum::new();
        for i in (0..pieces.len()).rev() {
            acc.add(pieces[i]);
            values[i] = acc.value();
        }
        let mut jets = Vec::with_capacity(nodes.len());
        for (&r, &v) in nodes.iter().zip(&values) {
            let (d1, d2) = self.gamma_jet(r)?;
            jets.push(Jet::new(v, d1, d2));
        }
        HermiteTable::new(nodes.to_vec(), jets)
    }

    // Γ(r) = -q_W(s(r))/g(r) and its derivative.
    fn gamma_jet(&self, r: f64) -> Result<(f64, f64)> {
        let l = self.profile.local(r)?;
        let g = l.g.value;
        if r == 0.0 {
            // q ~ r/m near the pole
            return Ok((0.0, -1.0 / self.spec.m as f64));
        }
        let q = self.quotient_at(r)?;
        let slope = -(1.0 - g * q * l.log_lambda_slope() - q * l.g.d1) / (g * g);
        Ok((-q / g, slope))
    }

    pub fn spec(&self) -> &ConstellationSpec {
        &self.spec
    }

    pub fn m(&self) -> usize {
        self.spec.m
    }

    pub fn radius(&self) -> f64 {
        self.spec.radius
    }

    /// The intermediary model `M^m_w` on `[0, R]`.
    pub fn intermediary(&self) -> &ModelSpace {
        &self.intermediary
    }

    /// The comparison space seen as the model `M^m_W` on `[0, s(R)]`.
    pub fn w_model(&self) -> &ModelSpace {
        &self.w_model
    }

    pub fn warping(&self) -> &Radial {
        self.w_model.warping()
    }

    pub fn stretching(&self) -> &Stretching {
        &self.stretching
    }

    pub fn stretched_radius(&self) -> f64 {
        self.stretching.stretched_radius()
    }

    pub fn lambda(&self, r: f64) -> Result<f64> {
        self.check(r)?;
        self.profile.lambda(r)
    }

    /// `(ln Λ)'(r)` for `r > 0`.
    pub fn log_lambda_slope(&self, r: f64) -> Result<f64> {
        self.check(r)?;
        Ok(self.profile.local(r)?.log_lambda_slope())
    }

    /// `∫_0^r Λ/g`.
    pub fn lambda_integral(&self, r: f64) -> Result<f64> {
        self.check(r)?;
        if r <= 0.0 {
            return Ok(0.0);
        }
        if r < self.lambda_integral.nodes()[1] {
            let quad = Quadrature::relative(MODEL_TOL);
            return quad.try_integrate(
                |u| Ok(self.profile.lambda(u)? / self.spec.g.try_jet(u)?.value),
                0.0,
                r,
            );
        }
        Ok(self.lambda_integral.interpolate(r).value)
    }

    fn check(&self, r: f64) -> Result<()> {
        if (0.0..=self.spec.radius * (1.0 + 1e-12)).contains(&r) {
            Ok(())
        } else {
            Err(Error::OutOfDomain {
                r,
                max: self.spec.radius,
            })
        }
    }

    /// `q_W(s(r))` in the `Λ/g` form `∫_0^r Λ/g / Λ(r)`.
    pub fn quotient_at(&self, r: f64) -> Result<f64> {
        if r == 0.0 {
            return Ok(0.0);
        }
        Ok(self.lambda_integral(r)? / self.profile.lambda(r)?)
    }

    /// `q_W(s)`, evaluated in the `W` form and cross-checked against the `Λ/g` form.
    pub fn quotient(&self, s: f64) -> Result<f64> {
        let by_w = self.w_model.quotient(s)?;
        let r = self.stretching.unstretch(s).min(self.spec.radius);
        let by_lambda = self.quotient_at(r)?;
        if (by_lambda - by_w).abs() > QUOTIENT_AGREEMENT * by_w.abs() {
            return Err(Error::InternalMismatch {
                quantity: "isoperimetric quotient of the comparison space",
                first: by_w,
                second: by_lambda,
            });
        }
        Ok(by_w)
    }

    /// The transplanted exit time `ψ(r) = ∫_r^R q_W(s(u))/g(u) du`.
    pub fn psi(&self, r: f64) -> Result<f64> {
        self.check(r)?;
        Ok(self.psi.interpolate(r).value)
    }

    /// `Γ(r) = ψ'(r) = -q_W(s(r))/g(r)`.
    pub fn gamma(&self, r: f64) -> Result<f64> {
        self.check(r)?;
        Ok(self.gamma_jet(r)?.0)
    }

    /// `ψ` and `Γ` as radial functions on `[0, R]`.
    pub fn transplanted_psi(&self) -> (Radial, Radial) {
        let psi: Radial = Arc::new(Tabulated {
            table: self.psi.clone(),
        });
        let space = self.clone();
        let gamma: Radial = Arc::new(GammaFunction { space });
        (psi, gamma)
    }
}

struct Tabulated {
    table: Arc<HermiteTable>,
}

impl RadialFunction for Tabulated {
    fn try_jet(&self, r: f64) -> Result<Jet> {
        Ok(self.table.interpolate(r))
    }

    fn domain_end(&self) -> f64 {
        f64::INFINITY
    }
}

struct GammaFunction {
    space: ComparisonSpace,
}

impl RadialFunction for GammaFunction {
    fn try_jet(&self, r: f64) -> Result<Jet> {
        let (value, d1) = self.space.gamma_jet(r)?;
        Ok(Jet::new(value, d1, f64::NAN))
    }
}

/// Solves for `ℓ̃ = ln(Λ w g) - m ln r` from just off the pole, where the value is
/// fixed by integrating its (bounded) slope from 0.
fn solve_lambda(spec: &ConstellationSpec) -> Result<LambdaProfile> {
    let m = spec.m as f64;
    let (w, g, h) = (spec.w.clone(), spec.g.clone(), spec.h.clone());
    let slope = move |r: f64| -> f64 {
        let wj = w.jet(r);
        let gv = g.eval(r);
        let eta = wj.d1 / wj.value;
        m * (eta - h.eval(r)) / (gv * gv) - m / r
    };
    let eps = SINGULAR_START * spec.radius;
    // Two-point Gauss rule on [0, ε]: the slope is smooth but its evaluation loses
    // digits to cancellation as r → 0, which would mislead adaptive refinement.
    let offset = 0.5 / 3f64.sqrt();
    let start = 0.5 * eps * (slope(eps * (0.5 - offset)) + slope(eps * (0.5 + offset)));
    if !start.is_finite() {
        return Err(Error::NonFinite { at: eps });
    }
    let rhs: Rhs = Arc::new(move |r, _| slope(r));
    let remainder = ode::solve_ivp(rhs, eps, start, spec.radius, IvpTolerance::uniform(ODE_TOL))?
        .with_head(move |r| Jet::new(start * r / eps, start / eps, 0.0));
    Ok(LambdaProfile {
        m: spec.m,
        w: spec.w.clone(),
        g: spec.g.clone(),
        h: spec.h.clone(),
        remainder,
    })
}

/// Builds the comparison space of a constellation.
pub fn build(spec: &ConstellationSpec) -> Result<ComparisonSpace> {
    ComparisonSpace::build(spec)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dsl;
    use crate::model::space_form_warping;

    fn expr(s: &str) -> Radial {
        dsl::to_radial(dsl::parse(s).unwrap())
    }

    fn spec(m: usize, w: &str, g: &str, h: &str, radius: f64) -> ConstellationSpec {
        ConstellationSpec {
            m,
            w: expr(w),
            g: expr(g),
            h: expr(h),
            radius,
            direction: Direction::Below,
        }
    }

    #[test]
    fn stretching_examples() {
        let s = stretching(&spec(2, "r", "1", "0", 1.0)).unwrap();
        assert_eq!(s.stretch(0.0), 0.0);
        assert!((s.stretch(0.7) - 0.7).abs() < 1e-15);
        let s = stretching(&spec(2, "r", "1/(1+r)", "0", 1.0)).unwrap();
        assert!((s.stretch(1.0) - 1.5).abs() < 1e-13);
        assert!((s.unstretch(1.5) - 1.0).abs() < 1e-13);
        // inverse of s(r) = r + r²/2
        let r = s.unstretch(0.6);
        assert!((r + r * r / 2.0 - 0.6).abs() < 1e-12);
    }

    #[test]
    fn trivial_bounds_reproduce_the_model() {
        for (m, w) in [(2, "r"), (3, "sinh(r)"), (5, "sin(r)")] {
            let c = build(&spec(m, w, "1", "0", 2.0)).unwrap();
            let wf = expr(w);
            for i in 0..=200 {
                let r = 2.0 * i as f64 / 200.0;
                let got = c.warping().eval(c.stretching().stretch(r));
                assert!((got - wf.eval(r)).abs() < 1e-9, "{w} m={m} r={r}: {got}");
                if r > 0.0 {
                    let lam = c.lambda(r).unwrap();
                    let want = wf.eval(r).powi(m as i32 - 1);
                    assert!((lam - want).abs() < 1e-9 * want, "{lam} vs {want}");
                }
            }
        }
    }

    #[test]
    fn constant_convexity_bound_closed_form() {
        // m = 2, w = r, h = -c: (Λ r)' = 2Λ(1 + c r) gives Λ = r e^{2cr}.
        for c in [0.1, 1.0] {
            let sp = spec(2, "r", "1", &format!("-{c}"), 2.0);
            let space = build(&sp).unwrap();
            for i in 1..=100 {
                let r = 2.0 * i as f64 / 100.0;
                let want = r * (2.0 * c * r).exp();
                let got = space.lambda(r).unwrap();
                assert!((got - want).abs() <= 1e-9 * want, "c={c} r={r}: {got} vs {want}");
            }
        }
    }

    #[test]
    fn warping_starts_with_unit_slope() {
        let sp = spec(3, "sinh(r)", "1/(1+r/4)", "-0.3", 1.5);
        let c = build(&sp).unwrap();
        let w = c.warping();
        assert_eq!(w.eval(0.0), 0.0);
        let s = 1e-7;
        assert!((w.eval(s) / s - 1.0).abs() < 1e-6);
        assert!((w.deriv(1e-5) - 1.0).abs() < 1e-4);
    }

    #[test]
    fn euclidean_quotient() {
        let c = build(&spec(2, "r", "1", "0", 1.0)).unwrap();
        assert!((c.quotient(1.0).unwrap() - 0.5).abs() < 1e-12);
        assert_eq!(c.quotient(0.0).unwrap(), 0.0);
        let c3 = build(&spec(3, "r", "1", "0", 1.0)).unwrap();
        assert!((c3.warping().eval(0.5) - 0.5).abs() < 1e-12);
    }

    #[test]
    fn lambda_equation_residual_is_small() {
        let sp = spec(3, "sinh(r)", "1/(1+r/4)", "-0.3*cos(r)", 1.5);
        let c = build(&sp).unwrap();
        let p = |r: f64| c.lambda(r).unwrap() * sp.w.eval(r) * sp.g.eval(r);
        let mut worst: f64 = 0.0;
        let mut scale: f64 = 0.0;
        for i in 1..150 {
            let r = 1.5 * i as f64 / 150.0;
            let h = 1e-5;
            let lhs = (p(r + h) - p(r - h)) / (2.0 * h);
            let lam = c.lambda(r).unwrap();
            let wj = sp.w.jet(r);
            let rhs = 3.0 * lam / sp.g.eval(r) * (wj.d1 - sp.h.eval(r) * wj.value);
            worst = worst.max((lhs - rhs).abs());
            scale = scale.max(rhs.abs());
        }
        assert!(worst <= 1e-7 * scale, "{worst} vs {scale}");
    }

    #[test]
    fn psi_reduces_to_euclidean_exit_time() {
        let c = build(&spec(2, "r", "1", "0", 1.0)).unwrap();
        assert!((c.psi(0.0).unwrap() - 0.25).abs() < 1e-12);
        assert_eq!(c.psi(1.0).unwrap(), 0.0);
        for i in 0..=20 {
            let r = i as f64 / 20.0;
            assert!((c.psi(r).unwrap() - (1.0 - r * r) / 4.0).abs() < 1e-12);
            assert!((c.gamma(r).unwrap() + r / 2.0).abs() < 1e-12);
        }
    }

    #[test]
    fn psi_equals_exit_time_of_the_comparison_model() {
        let sp = spec(3, "sinh(r)", "1/(1+r/4)", "-0.3*cos(r)", 1.5);
        let c = build(&sp).unwrap();
        let s_big = c.stretched_radius();
        let (psi, gamma) = c.transplanted_psi();
        for i in 0..=30 {
            let r = 1.5 * i as f64 / 30.0;
            let s = c.stretching().stretch(r);
            let e = c.w_model().mean_exit_time(s_big, s.min(s_big)).unwrap();
            assert!((psi.eval(r) - e).abs() < 1e-9, "r={r}: {} vs {e}", psi.eval(r));
            let g = gamma.eval(r);
            assert!((psi.deriv(r) - g).abs() < 1e-9 * g.abs().max(1e-3));
        }
    }

    #[test]
    fn hypotheses_are_enforced() {
        let on_boundary = spec(2, "r", "1", "1/r", 1.0);
        assert!(matches!(build(&on_boundary), Err(Error::NonPositiveLambda { .. })));
        let hyperbolic_eta = spec(2, "sinh(r)", "1", "cosh(r)/sinh(r)", 1.0);
        assert!(matches!(build(&hyperbolic_eta), Err(Error::NonPositiveLambda { .. })));
        let unbounded = spec(2, "r", "1", "0.5/r", 1.0);
        assert!(matches!(build(&unbounded), Err(Error::Inadmissible { field: "h", .. })));
        let bad_g = spec(2, "r", "2", "0", 1.0);
        assert!(matches!(build(&bad_g), Err(Error::Inadmissible { field: "g", .. })));
        let mut above = spec(2, "r", "1/(1+r)", "0", 1.0);
        above.direction = Direction::Above;
        assert!(matches!(build(&above), Err(Error::Inadmissible { field: "g", .. })));
        let model = ConstellationSpec::model(2, space_form_warping(-1.0), 1.0, Direction::Above);
        assert!(build(&model).is_ok());
    }
}
