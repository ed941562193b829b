//! Balance conditions of model spaces and comparison spaces, checked on a radius grid.
//!
//! Every condition is evaluated twice: in its quotient form (e.g. `q_w η_w ≥ 1/m`) and
//! in its derivative form (e.g. `(q_w/w)' ≤ 0`), the latter by finite differences of the
//! computed quotient. Both margins are normalized so they coincide analytically, and a
//! node where they have clearly opposite signs is reported as `FormDisagreement`.

use crate::comparison::ComparisonSpace;
use crate::error::{Error, Result};
use crate::model::ModelSpace;
use crate::radial::{Grid, DEFAULT_NODES};

/// Margins at or above `-SLACK` count as satisfied.
pub const SLACK: f64 = 1e-9;

/// Two forms disagree only when their margins have opposite signs beyond this band.
pub const FORM_TOL: f64 = 1e-7;

/// Verdict for one inequality on the grid.
#[derive(Debug, Clone, PartialEq)]
pub struct Criterion {
    pub holds: bool,
    /// Satisfied, but only within the tolerance band around zero somewhere.
    pub marginal: bool,
    /// Smallest radius where the inequality fails, refined by bisection.
    pub first_violation: Option<f64>,
    pub min_margin: f64,
    /// Slack of the inequality at each node.
    pub margins: Grid,
}

impl Criterion {
    pub(crate) fn from_margins(
        nodes: &[f64],
        margins: Vec<f64>,
        margin: &dyn Fn(f64) -> Result<f64>,
    ) -> Result<Self> {
        let min_margin = margins.iter().copied().fold(f64::INFINITY, f64::min);
        let holds = min_margin >= -SLACK;
        let first_violation = match margins.iter().position(|&v| v < -SLACK) {
            None => None,
            Some(0) => Some(nodes[0]),
            Some(i) => Some(localize(nodes[i - 1], nodes[i], margin)?),
        };
        Ok(Criterion {
            holds,
            marginal: holds && min_margin < SLACK,
            first_violation,
            min_margin,
            margins: Grid::new(nodes.to_vec(), margins)?,
        })
    }
}

// Bisection between a satisfied and a violated radius.
fn localize(mut ok: f64, mut bad: f64, margin: &dyn Fn(f64) -> Result<f64>) -> Result<f64> {
    for _ in 0..60 {
        let mid = 0.5 * (ok + bad);
        if mid <= ok || mid >= bad {
            break;
        }
        if margin(mid)? < -SLACK {
            bad = mid;
        } else {
            ok = mid;
        }
    }
    Ok(bad)
}

/// Fourth-order finite-difference derivative, one-sided near the ends of `[lo, hi]`.
fn derivative(f: &dyn Fn(f64) -> Result<f64>, x: f64, lo: f64, hi: f64) -> Result<f64> {
    let h = 1e-3 * x.max(1e-3 * (hi - lo)).min(0.01 * (hi - lo));
    if x - 2.0 * h >= lo && x + 2.0 * h <= hi {
        let (a, b, c, d) = (f(x - 2.0 * h)?, f(x - h)?, f(x + h)?, f(x + 2.0 * h)?);
        return Ok((a - 8.0 * b + 8.0 * c - d) / (12.0 * h));
    }
    let h = if x + 2.0 * h > hi { -h } else { h };
    let v: Vec<f64> = (0..5).map(|k| f(x + k as f64 * h)).collect::<Result<_>>()?;
    Ok((-25.0 * v[0] + 48.0 * v[1] - 36.0 * v[2] + 16.0 * v[3] - 3.0 * v[4]) / (12.0 * h))
}

fn compare_forms(criterion: &'static str, nodes: &[f64], a: &[f64], b: &[f64]) -> Result<()> {
    for ((&r, &x), &y) in nodes.iter().zip(a).zip(b) {
        if (x > FORM_TOL && y < -FORM_TOL) || (x < -FORM_TOL && y > FORM_TOL) {
            return Err(Error::FormDisagreement { criterion, at: r });
        }
    }
    Ok(())
}

fn evaluate(
    criterion: &'static str,
    nodes: &[f64],
    quotient_form: &dyn Fn(f64) -> Result<f64>,
    derivative_form: &dyn Fn(f64) -> Result<f64>,
) -> Result<Criterion> {
    let q: Vec<f64> = nodes.iter().map(|&r| quotient_form(r)).collect::<Result<_>>()?;
    let d: Vec<f64> = nodes.iter().map(|&r| derivative_form(r)).collect::<Result<_>>()?;
    compare_forms(criterion, nodes, &q, &d)?;
    Criterion::from_margins(nodes, q, quotient_form)
}

/// Grid of `(0, R]` used by the checks.
pub fn balance_nodes(radius: f64) -> Vec<f64> {
    Grid::clustered_nodes(radius, DEFAULT_NODES)[1..].to_vec()
}

/// Sufficient conditions of the two-sided lemma, each checked separately.
#[derive(Debug, Clone, PartialEq)]
pub struct DoubleBound {
    /// `m(η_w - h) - g² η_w - g g' > 0`.
    pub hypothesis: Criterion,
    /// `q_W ≥ g / (m(η_w - h))`.
    pub lower: Criterion,
    /// `q_W ≤ g / (m(η_w - h) - g² η_w - g g')`.
    pub upper: Criterion,
    /// `g η_w + g' ≥ 0`.
    pub necessary: Criterion,
}

impl DoubleBound {
    pub fn ok(&self) -> bool {
        self.hypothesis.holds && self.lower.holds && self.upper.holds && self.necessary.holds
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct BalanceReport {
    /// `q_w η_w ≥ 1/m`, equivalently `(q_w/w)' ≤ 0`.
    pub balanced_below: Option<Criterion>,
    /// `q_w η_w ≤ 1/(m-1)`, equivalently `q_w' ≥ 0`.
    pub balanced_above: Option<Criterion>,
    /// `q_W(s)(η_w - h) ≥ g/m`, equivalently `(q_W(s(r))/(g w))' ≤ 0`.
    pub w_balanced_below: Option<Criterion>,
    /// The comparison space is balanced from above as a model: `q_W' ≥ 0`.
    pub big_w_balanced_above: Option<Criterion>,
    pub double_bound: Option<DoubleBound>,
}

impl BalanceReport {
    pub fn merge(mut self, other: BalanceReport) -> Self {
        self.balanced_below = other.balanced_below.or(self.balanced_below);
        self.balanced_above = other.balanced_above.or(self.balanced_above);
        self.w_balanced_below = other.w_balanced_below.or(self.w_balanced_below);
        self.big_w_balanced_above = other.big_w_balanced_above.or(self.big_w_balanced_above);
        self.double_bound = other.double_bound.or(self.double_bound);
        self
    }

    pub fn totally_balanced(&self) -> Option<bool> {
        Some(self.balanced_below.as_ref()?.holds && self.balanced_above.as_ref()?.holds)
    }

    /// Named criteria in a fixed order, for reports.
    pub fn criteria(&self) -> Vec<(&'static str, &Criterion)> {
        let mut out = Vec::new();
        let singles = [
            ("balanced_below", &self.balanced_below),
            ("balanced_above", &self.balanced_above),
            ("w_balanced_below", &self.w_balanced_below),
            ("W_balanced_above", &self.big_w_balanced_above),
        ];
        for (name, c) in singles {
            if let Some(c) = c {
                out.push((name, c));
            }
        }
        if let Some(d) = &self.double_bound {
            out.push(("double_bound_hypothesis", &d.hypothesis));
            out.push(("double_bound_lower", &d.lower));
            out.push(("double_bound_upper", &d.upper));
            out.push(("double_bound_necessary", &d.necessary));
        }
        out
    }

    pub fn all_hold(&self) -> bool {
        self.criteria().iter().all(|(_, c)| c.holds)
    }
}

/// Balance from below and from above of `M^m_w` on `(0, R]`.
pub fn check_model_balance(model: &ModelSpace, radius: f64) -> Result<BalanceReport> {
    if radius > model.r_max() {
        return Err(Error::OutOfDomain {
            r: radius,
            max: model.r_max(),
        });
    }
    let nodes = balance_nodes(radius);
    let m = model.m() as f64;
    let w = model.warping().clone();
    let product = |r: f64| -> Result<f64> { Ok(model.quotient(r)? * model.eta(r)) };

    let below_q = |r: f64| -> Result<f64> { Ok(product(r)? - 1.0 / m) };
    let ratio = |r: f64| -> Result<f64> { Ok(model.quotient(r)? / w.eval(r)) };
    let below_d = |r: f64| -> Result<f64> {
        Ok(-w.eval(r) / m * derivative(&ratio, r, 0.0, radius)?)
    };
    let above_q = |r: f64| -> Result<f64> { Ok(1.0 / (m - 1.0) - product(r)?) };
    let quotient = |r: f64| model.quotient(r);
    let above_d = |r: f64| -> Result<f64> { Ok(derivative(&quotient, r, 0.0, radius)? / (m - 1.0)) };

    Ok(BalanceReport {
        balanced_below: Some(evaluate("balanced from below", &nodes, &below_q, &below_d)?),
        balanced_above: Some(evaluate("balanced from above", &nodes, &above_q, &above_d)?),
        ..BalanceReport::default()
    })
}

/// `w`-balance from below of a comparison space, plus balance from above of the
/// comparison space itself.
pub fn check_w_balanced_below(space: &ComparisonSpace) -> Result<BalanceReport> {
    let spec = space.spec();
    let radius = spec.radius;
    let m = spec.m as f64;
    let nodes = balance_nodes(radius);
    let s_max = space.stretched_radius();
    let stretch = |r: f64| space.stretching().stretch(r).min(s_max);

    let quotient_form = |r: f64| -> Result<f64> {
        let q = space.quotient(stretch(r))?;
        let eta = space.intermediary().eta(r);
        Ok(q * (eta - spec.h.eval(r)) - spec.g.eval(r) / m)
    };
    let ratio = |r: f64| -> Result<f64> {
        Ok(space.quotient_at(r)? / (spec.g.eval(r) * spec.w.eval(r)))
    };
    let derivative_form = |r: f64| -> Result<f64> {
        let g = spec.g.eval(r);
        Ok(-g * g * g * spec.w.eval(r) / m * derivative(&ratio, r, 0.0, radius)?)
    };
    let below = evaluate("w-balanced from below", &nodes, &quotient_form, &derivative_form)?;

    // Balance from above of M^m_W, on the stretched grid.
    let s_nodes = balance_nodes(s_max);
    let wm = space.w_model();
    let above_q = |s: f64| -> Result<f64> { Ok(1.0 / (m - 1.0) - wm.quotient(s)? * wm.eta(s)) };
    let quotient = |s: f64| wm.quotient(s);
    let above_d = |s: f64| -> Result<f64> { Ok(derivative(&quotient, s, 0.0, s_max)? / (m - 1.0)) };
    let above = evaluate("W-balanced from above", &s_nodes, &above_q, &above_d)?;

    Ok(BalanceReport {
        w_balanced_below: Some(below),
        big_w_balanced_above: Some(above),
        ..BalanceReport::default()
    })
}

/// The two-sided bound on `q_W` and its side conditions.
pub fn check_double_bound(space: &ComparisonSpace) -> Result<BalanceReport> {
    let spec = space.spec();
    let m = spec.m as f64;
    let nodes = balance_nodes(spec.radius);
    let s_max = space.stretched_radius();
    let eta = |r: f64| space.intermediary().eta(r);
    let hyp = |r: f64| -> Result<f64> {
        let g = spec.g.jet(r);
        let e = eta(r);
        Ok(m * (e - spec.h.eval(r)) - g.value * g.value * e - g.value * g.d1)
    };
    let q = |r: f64| space.quotient(space.stretching().stretch(r).min(s_max));
    let lower = |r: f64| -> Result<f64> {
        Ok(q(r)? - spec.g.eval(r) / (m * (eta(r) - spec.h.eval(r))))
    };
    let upper = |r: f64| -> Result<f64> {
        let bound = hyp(r)?;
        if bound <= 0.0 {
            // Outside the lemma's hypothesis the upper bound is void.
            return Ok(0.0);
        }
        Ok(spec.g.eval(r) / bound - q(r)?)
    };
    let necessary = |r: f64| -> Result<f64> {
        let g = spec.g.jet(r);
        Ok(g.value * eta(r) + g.d1)
    };
    let criterion = |f: &dyn Fn(f64) -> Result<f64>| -> Result<Criterion> {
        let margins = nodes.iter().map(|&r| f(r)).collect::<Result<Vec<_>>>()?;
        Criterion::from_margins(&nodes, margins, f)
    };
    Ok(BalanceReport {
        double_bound: Some(DoubleBound {
            hypothesis: criterion(&hyp)?,
            lower: criterion(&lower)?,
            upper: criterion(&upper)?,
            necessary: criterion(&necessary)?,
        }),
        ..BalanceReport::default()
    })
}

/// All balance checks that apply to a built comparison space.
pub fn check_all(space: &ComparisonSpace) -> Result<BalanceReport> {
    let model = check_model_balance(space.intermediary(), space.radius())?;
    Ok(model
        .merge(check_w_balanced_below(space)?)
        .merge(check_double_bound(space)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::comparison::{build, ConstellationSpec, Direction};
    use crate::dsl;
    use crate::radial::Radial;

    fn expr(s: &str) -> Radial {
        dsl::to_radial(dsl::parse(s).unwrap())
    }

    #[test]
    fn euclidean_sits_on_the_boundary() {
        for m in [2, 3, 4] {
            let e = ModelSpace::space_form(m, 0.0, 2.0).unwrap();
            let rep = check_model_balance(&e, 2.0).unwrap();
            let below = rep.balanced_below.as_ref().unwrap();
            assert!(below.holds && below.marginal);
            assert!(below.min_margin.abs() < 1e-12);
            assert!(rep.balanced_above.as_ref().unwrap().holds);
            assert_eq!(rep.totally_balanced(), Some(true));
        }
    }

    #[test]
    fn hyperbolic_plane_is_totally_balanced() {
        let h2 = ModelSpace::space_form(2, -1.0, 5.0).unwrap();
        let rep = check_model_balance(&h2, 5.0).unwrap();
        assert_eq!(rep.totally_balanced(), Some(true));
        let below = rep.balanced_below.unwrap();
        for (r, margin) in below.margins.iter() {
            // tanh(r/2) coth(r) - 1/2, evaluated independently
            let want = (r / 2.0).tanh() / r.tanh() - 0.5;
            assert!((margin - want).abs() < 1e-10, "r = {r}");
        }
    }

    #[test]
    fn sphere_fails_balance_from_below_immediately() {
        let s2 = ModelSpace::space_form(2, 1.0, 3.0).unwrap();
        let rep = check_model_balance(&s2, 3.0).unwrap();
        let below = rep.balanced_below.unwrap();
        assert!(!below.holds);
        let first = below.first_violation.unwrap();
        assert!(first > 0.0 && first < 1e-2, "{first}");
        // q η - 1/2 = -tan²(r/2)/2 crosses -SLACK where tan(r/2) = sqrt(2 SLACK)
        let want = 2.0 * (2.0 * SLACK).sqrt().atan();
        assert!((first - want).abs() < 1e-6 * want.max(1e-4), "{first} vs {want}");
        assert!(rep.balanced_above.unwrap().holds);
    }

    #[test]
    fn w_balance_of_trivial_constellations() {
        let spec = ConstellationSpec::model(2, expr("r"), 1.0, Direction::Below);
        let rep = check_all(&build(&spec).unwrap()).unwrap();
        let below = rep.w_balanced_below.as_ref().unwrap();
        assert!(below.holds && below.marginal);
        let d = rep.double_bound.as_ref().unwrap();
        assert!(d.ok(), "{d:?}");

        let spec = ConstellationSpec::model(2, expr("sinh(r)"), 3.0, Direction::Below);
        let rep = check_all(&build(&spec).unwrap()).unwrap();
        let below = rep.w_balanced_below.as_ref().unwrap();
        assert!(below.holds && below.min_margin > -1e-12);
        assert!(rep.double_bound.unwrap().ok());
    }

    #[test]
    fn convexity_bound_near_eta_breaks_w_balance() {
        // η_w - h = 1/r - 2 vanishes at r = 1/2, where the margin is -1/m.
        let spec = ConstellationSpec {
            h: expr("2"),
            ..ConstellationSpec::model(2, expr("r"), 1.0, Direction::Below)
        };
        let space = build(&spec).unwrap();
        let rep = check_w_balanced_below(&space).unwrap();
        let below = rep.w_balanced_below.unwrap();
        assert!(!below.holds);
        assert!(below.first_violation.unwrap() < 0.5);
    }

    #[test]
    fn double_bound_equivalence_on_a_stretched_constellation() {
        let spec = ConstellationSpec {
            m: 3,
            w: expr("sinh(r)"),
            g: expr("1/(1+r^2/10)"),
            h: expr("-0.2"),
            radius: 1.5,
            direction: Direction::Below,
        };
        let space = build(&spec).unwrap();
        let rep = check_all(&space).unwrap();
        let d = rep.double_bound.as_ref().unwrap();
        assert!(d.hypothesis.holds);
        let both = rep.w_balanced_below.as_ref().unwrap().holds
            && rep.big_w_balanced_above.as_ref().unwrap().holds;
        assert_eq!(both, d.lower.holds && d.upper.holds);
    }

    #[test]
    fn finite_difference_helper() {
        let f = |x: f64| Ok(x.sin());
        assert!((derivative(&f, 1.0, 0.0, 2.0).unwrap() - 1f64.cos()).abs() < 1e-11);
        assert!((derivative(&f, 2.0, 0.0, 2.0).unwrap() - 2f64.cos()).abs() < 1e-9);
        assert!((derivative(&f, 1e-4, 0.0, 2.0).unwrap() - 1e-4f64.cos()).abs() < 1e-9);
    }
}
