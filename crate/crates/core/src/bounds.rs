//! Reference values and verdicts for the isoperimetric, volume and torsional rigidity
//! comparisons, the intrinsic comparison between two model spaces, and the limit of
//! the average mean exit time.

use std::fmt;

use serde::Serialize;

use crate::balance::{balance_nodes, check_model_balance, BalanceReport};
use crate::comparison::{ComparisonSpace, ConstellationSpec, Direction};
use crate::error::{Error, Result};
use crate::exec::{self, Execution};
use crate::model::ModelSpace;

/// Relative size of a margin treated as equality.
pub const EQUALITY_TOL: f64 = 1e-7;

/// Relative agreement required between successive extrapolated limits.
pub const STABLE_TOL: f64 = 1e-4;

const CURVATURE_TOL: f64 = 1e-9;
const ROOM_DOUBLINGS: usize = 16;

/// Which side of `rhs` the theorem puts `lhs` on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Relation {
    #[serde(rename = "<=")]
    AtMost,
    #[serde(rename = ">=")]
    AtLeast,
}

impl fmt::Display for Relation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Relation::AtMost => "<=",
            Relation::AtLeast => ">=",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BoundVerdict {
    pub lhs: f64,
    pub rhs: f64,
    pub relation: Relation,
    /// Non-negative exactly when the inequality holds.
    pub margin: f64,
    pub equality_detected: bool,
}

impl BoundVerdict {
    pub fn new(lhs: f64, rhs: f64, relation: Relation) -> Self {
        let margin = match relation {
            Relation::AtMost => rhs - lhs,
            Relation::AtLeast => lhs - rhs,
        };
        BoundVerdict {
            lhs,
            rhs,
            relation,
            margin,
            equality_detected: margin.abs() <= EQUALITY_TOL * lhs.abs().max(rhs.abs()),
        }
    }

    /// The inequality holds, allowing equality within tolerance.
    pub fn holds(&self) -> bool {
        self.margin >= 0.0 || self.equality_detected
    }
}

impl fmt::Display for BoundVerdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} {} {} (margin {:e}{})",
            self.lhs,
            self.relation,
            self.rhs,
            self.margin,
            if self.equality_detected { ", equality" } else { "" }
        )
    }
}

/// `m (η_w(r) - h(r)) / g(r)`, the cap on the isoperimetric quotient of the comparison
/// space in the lower-bounded setting.
pub fn isoperimetric_cap(spec: &ConstellationSpec, r: f64) -> Result<f64> {
    let w = spec.w.try_jet(r)?;
    let eta = w.d1 / w.value;
    Ok(spec.m as f64 * (eta - spec.h.try_jet(r)?.value) / spec.g.try_jet(r)?.value)
}

#[derive(Debug, Clone, PartialEq)]
pub struct IsoperimetricBound {
    /// `Vol(∂B^W)/Vol(B^W)` at `s(R)` (below) or `R` (above).
    pub reference: f64,
    /// Below only: `reference ≤ m(η_w(R) - h(R))/g(R)`.
    pub chain: Option<BoundVerdict>,
    /// A measured quotient `Vol(∂D_R)/Vol(D_R)` against `reference`.
    pub measured: Option<BoundVerdict>,
}

pub fn isoperimetric_bound(space: &ComparisonSpace, measured: Option<f64>) -> Result<IsoperimetricBound> {
    let spec = space.spec();
    let reference = 1.0 / space.quotient(space.stretched_radius())?;
    Ok(match spec.direction {
        Direction::Below => IsoperimetricBound {
            reference,
            chain: Some(BoundVerdict::new(
                reference,
                isoperimetric_cap(spec, spec.radius)?,
                Relation::AtMost,
            )),
            measured: measured.map(|v| BoundVerdict::new(v, reference, Relation::AtMost)),
        },
        Direction::Above => IsoperimetricBound {
            reference,
            chain: None,
            measured: measured.map(|v| BoundVerdict::new(v, reference, Relation::AtLeast)),
        },
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct VolumeBound {
    /// `Vol(B^W_{s(r)})` (below) or `Vol(B^W_r)` (above).
    pub reference: f64,
    pub verdict: Option<BoundVerdict>,
}

pub fn volume_bound(space: &ComparisonSpace, r: f64, measured: Option<f64>) -> Result<VolumeBound> {
    let spec = space.spec();
    if !(0.0..=spec.radius).contains(&r) {
        return Err(Error::OutOfDomain { r, max: spec.radius });
    }
    let (radius, relation) = match spec.direction {
        Direction::Below => (space.stretching().stretch(r), Relation::AtMost),
        Direction::Above => (r, Relation::AtLeast),
    };
    let wm = space.w_model();
    let reference = wm.ball_volume(radius.min(wm.r_max()))?;
    Ok(VolumeBound {
        reference,
        verdict: measured.map(|v| BoundVerdict::new(v, reference, relation)),
    })
}

/// The comparison space seen as a model, extended past `R` until it holds `volume`.
pub fn model_with_room(space: &ComparisonSpace, volume: f64) -> Result<ModelSpace> {
    let mut model = space.w_model().clone();
    let mut spec = space.spec().clone();
    for _ in 0..ROOM_DOUBLINGS {
        let available = model.ball_volume(model.r_max())?;
        if available >= volume {
            return Ok(model);
        }
        spec.radius *= 2.0;
        model = match ComparisonSpace::build(&spec) {
            Ok(s) => s.w_model().clone(),
            Err(_) => {
                return Err(Error::InsufficientRoom {
                    requested: volume,
                    available,
                })
            }
        };
    }
    Err(Error::InsufficientRoom {
        requested: volume,
        available: model.ball_volume(model.r_max())?,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct TorsionalBound {
    /// `T(R)`, radius of the symmetrized ball.
    pub symmetrized_radius: f64,
    /// `A₁(B^W_{T(R)})`.
    pub reference: f64,
    pub verdict: Option<BoundVerdict>,
}

/// Rigidity of the symmetrized ball of a domain with volume `domain_volume`, against
/// a measured rigidity of the domain when one is supplied.
pub fn torsional_bound(
    space: &ComparisonSpace,
    domain_volume: f64,
    measured: Option<f64>,
) -> Result<TorsionalBound> {
    let model = model_with_room(space, domain_volume)?;
    let t = model.radius_for_volume(domain_volume)?;
    let reference = model.torsional_rigidity(t)?.value;
    let relation = match space.spec().direction {
        Direction::Below => Relation::AtLeast,
        Direction::Above => Relation::AtMost,
    };
    Ok(TorsionalBound {
        symmetrized_radius: t,
        reference,
        verdict: measured.map(|v| BoundVerdict::new(v, reference, relation)),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct IntrinsicComparison {
    pub radius: f64,
    pub symmetrized_radius: f64,
    /// `A₁(B^N_R)` on the left, `A₁(B^w_{T(R)})` on the right.
    pub verdict: BoundVerdict,
    /// Balance of `M_w` required by the theorem: from above for lower curvature bounds,
    /// total balance for upper ones.
    pub balance: BalanceReport,
    pub hypotheses_hold: bool,
}

/// Compares a geodesic ball of `M_N` with its symmetrization into `M_w`. The radial
/// curvatures must be ordered as `direction` requires: `K_N ≥ K_w` for `Below`,
/// `K_N ≤ K_w` for `Above`.
pub fn intrinsic_compare(
    n: &ModelSpace,
    w: &ModelSpace,
    radius: f64,
    direction: Direction,
) -> Result<IntrinsicComparison> {
    if n.m() != w.m() {
        return Err(Error::Inadmissible {
            field: "m",
            reason: format!("dimensions differ: {} and {}", n.m(), w.m()),
        });
    }
    for r in balance_nodes(radius) {
        let (k_n, k_w) = (n.radial_curvature(r), w.radial_curvature(r));
        let tol = CURVATURE_TOL * k_n.abs().max(k_w.abs()).max(1.0);
        let ordered = match direction {
            Direction::Below => k_n >= k_w - tol,
            Direction::Above => k_n <= k_w + tol,
        };
        if !ordered {
            return Err(Error::CurvatureOrderViolated { at: r, k_n, k_w });
        }
    }
    let volume = n.ball_volume(radius)?;
    let t = w.radius_for_volume(volume)?;
    let lhs = n.torsional_rigidity(radius)?.value;
    let rhs = w.torsional_rigidity(t)?.value;
    let balance = check_model_balance(w, t)?;
    let relation = match direction {
        Direction::Below => Relation::AtLeast,
        Direction::Above => Relation::AtMost,
    };
    let hypotheses_hold = match direction {
        Direction::Below => balance.balanced_above.as_ref().is_some_and(|c| c.holds),
        Direction::Above => balance.totally_balanced() == Some(true),
    };
    Ok(IntrinsicComparison {
        radius,
        symmetrized_radius: t,
        verdict: BoundVerdict::new(lhs, rhs, relation),
        balance,
        hypotheses_hold,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Growth {
    FiniteAverage,
    InfiniteAverage,
}

impl fmt::Display for Growth {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Growth::FiniteAverage => "finite-average",
            Growth::InfiniteAverage => "infinite-average",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LadderRung {
    pub radius: f64,
    pub volume: f64,
    pub quotient: f64,
    /// `A₁(B_R)/Vol(B_R)`.
    pub average: f64,
    /// `|A₁(B_R)/Vol(B_R) - q(R)²|`.
    pub gap: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AverageExitLimit {
    pub growth: Growth,
    /// `q(∞)`, for finite averages.
    pub q_infinity: Option<f64>,
    /// `lim A₁/Vol = q(∞)²`, infinite for infinite averages.
    pub limit: f64,
    /// `1/((m-1) η(R_probe))`, the upper bound on `q` used for finite averages.
    pub eta_bound: f64,
    /// Ball volumes grew along the whole ladder.
    pub volume_grows: bool,
    pub ladder: Vec<LadderRung>,
}

/// Radii `R_probe · 2^{-k/4}` for `k = rungs-1, ..., 0`.
pub fn radius_ladder(probe: f64, rungs: usize) -> Vec<f64> {
    (0..rungs)
        .rev()
        .map(|k| probe * 0.5f64.powf(k as f64 / 4.0))
        .collect()
}

// Aitken's Δ² extrapolation of three successive values.
fn aitken(a: f64, b: f64, c: f64) -> f64 {
    let denom = (c - b) - (b - a);
    if denom.abs() <= f64::EPSILON * c.abs() {
        c
    } else {
        c - (c - b) * (c - b) / denom
    }
}

/// Limit of `q(R)` and of the average exit time `A₁/Vol` as `R → ∞`, estimated on a
/// geometric ladder of radii ending at `probe`. For a comparison space pass its
/// [`w_model`](ComparisonSpace::w_model).
pub fn average_exit_limit(model: &ModelSpace, probe: f64, exec: Execution) -> Result<AverageExitLimit> {
    const RUNGS: usize = 16;
    let radii = radius_ladder(probe, RUNGS);
    let ladder = exec::map(exec, &radii, |&r| -> Result<LadderRung> {
        let volume = model.ball_volume(r)?;
        let quotient = model.quotient(r)?;
        let average = model.torsional_rigidity(r)?.value / volume;
        Ok(LadderRung {
            radius: r,
            volume,
            quotient,
            average,
            gap: (average - quotient * quotient).abs(),
        })
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;
    let volume_grows = ladder.windows(2).all(|p| p[1].volume > p[0].volume);
    let eta_bound = 1.0 / ((model.m() - 1) as f64 * model.eta(probe));

    let q: Vec<f64> = ladder.iter().map(|l| l.quotient).collect();
    let n = q.len();
    // Log-log slope over the last two rungs of the ladder: 1 for linear growth.
    let slope = (q[n - 1] / q[n - 3]).ln() / (radii[n - 1] / radii[n - 3]).ln();
    if slope > 0.5 {
        return Ok(AverageExitLimit {
            growth: Growth::InfiniteAverage,
            q_infinity: None,
            limit: f64::INFINITY,
            eta_bound,
            volume_grows,
            ladder,
        });
    }
    let estimates: Vec<f64> = (n - 3..n).map(|k| aitken(q[k - 2], q[k - 1], q[k])).collect();
    let last = estimates[2];
    let stable = estimates
        .iter()
        .all(|e| e.is_finite() && (e - last).abs() <= STABLE_TOL * last.abs());
    if !stable {
        return Err(Error::InconclusiveGrowth { estimates });
    }
    Ok(AverageExitLimit {
        growth: Growth::FiniteAverage,
        q_infinity: Some(last),
        limit: last * last,
        eta_bound,
        volume_grows,
        ladder,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::comparison::build;
    use crate::dsl;
    use crate::radial::Radial;
    use std::f64::consts::PI;

    fn expr(s: &str) -> Radial {
        dsl::to_radial(dsl::parse(s).unwrap())
    }

    fn model_spec(w: &str, direction: Direction) -> ConstellationSpec {
        ConstellationSpec::model(2, expr(w), 1.0, direction)
    }

    #[test]
    fn verdict_margins() {
        let v = BoundVerdict::new(1.0, 2.0, Relation::AtMost);
        assert_eq!(v.margin, 1.0);
        assert!(v.holds() && !v.equality_detected);
        let v = BoundVerdict::new(1.0, 2.0, Relation::AtLeast);
        assert!(!v.holds());
        assert!(BoundVerdict::new(0.0, 0.0, Relation::AtLeast).equality_detected);
        assert!(BoundVerdict::new(1.0, 1.0 + 1e-9, Relation::AtLeast).holds());
    }

    #[test]
    fn isoperimetric_examples() {
        let space = build(&model_spec("r", Direction::Below)).unwrap();
        let b = isoperimetric_bound(&space, None).unwrap();
        assert!((b.reference - 2.0).abs() < 1e-9);
        let chain = b.chain.unwrap();
        assert!((chain.rhs - 2.0).abs() < 1e-12);
        assert!(chain.equality_detected);

        let space = build(&model_spec("sinh(r)", Direction::Above)).unwrap();
        let b = isoperimetric_bound(&space, Some(3.0)).unwrap();
        assert!((b.reference - 1.0 / 0.5f64.tanh()).abs() < 1e-9);
        assert!(b.measured.unwrap().holds());

        let mut spec = model_spec("r", Direction::Below);
        spec.h = expr("1/(2*r)");
        assert!((isoperimetric_cap(&spec, 1.0).unwrap() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn volume_examples() {
        let space = build(&model_spec("r", Direction::Below)).unwrap();
        assert!((volume_bound(&space, 1.0, None).unwrap().reference - PI).abs() < 1e-10);
        let zero = volume_bound(&space, 0.0, Some(0.0)).unwrap();
        assert_eq!(zero.reference, 0.0);
        assert!(zero.verdict.unwrap().equality_detected);

        let space = build(&model_spec("r", Direction::Above)).unwrap();
        let hyperbolic = 2.0 * PI * (1f64.cosh() - 1.0);
        let v = volume_bound(&space, 1.0, Some(hyperbolic)).unwrap().verdict.unwrap();
        assert!(v.holds() && (v.margin - (hyperbolic - PI)).abs() < 1e-9);
    }

    #[test]
    fn torsional_examples() {
        let space = build(&model_spec("r", Direction::Below)).unwrap();
        let b = torsional_bound(&space, PI, None).unwrap();
        assert!((b.symmetrized_radius - 1.0).abs() < 1e-12);
        assert!((b.reference - PI / 8.0).abs() < 1e-10);

        // Needs room beyond R = 1.
        let space = build(&model_spec("r", Direction::Above)).unwrap();
        let hyperbolic = 2.0 * PI * (1f64.cosh() - 1.0);
        let b = torsional_bound(&space, hyperbolic, None).unwrap();
        let t = 2.0 * 0.5f64.sinh();
        assert!((b.symmetrized_radius - t).abs() < 1e-10);
        assert!((b.reference - PI * t.powi(4) / 8.0).abs() < 1e-9);

        let sphere = build(&ConstellationSpec::model(2, expr("sin(r)"), 1.0, Direction::Above)).unwrap();
        assert!(matches!(
            torsional_bound(&sphere, 100.0, None),
            Err(Error::InsufficientRoom { .. })
        ));
    }

    #[test]
    fn intrinsic_examples() {
        let e2 = ModelSpace::space_form(2, 0.0, 4.0).unwrap();
        let h2 = ModelSpace::space_form(2, -1.0, 4.0).unwrap();
        let up = intrinsic_compare(&h2, &e2, 1.0, Direction::Above).unwrap();
        assert_eq!(up.verdict.relation, Relation::AtMost);
        assert!(up.verdict.margin > 0.05);
        let down = intrinsic_compare(&e2, &h2, 1.0, Direction::Below).unwrap();
        assert!(down.verdict.margin > 0.05);
        assert!((down.verdict.lhs - PI / 8.0).abs() < 1e-10);
        assert!(down.hypotheses_hold);
        let same = intrinsic_compare(&h2, &h2, 1.0, Direction::Below).unwrap();
        assert!((same.symmetrized_radius - 1.0).abs() < 1e-8);
        assert!(same.verdict.equality_detected);
        assert!(matches!(
            intrinsic_compare(&e2, &h2, 1.0, Direction::Above),
            Err(Error::CurvatureOrderViolated { .. })
        ));
    }

    #[test]
    fn average_limits() {
        let e2 = ModelSpace::space_form(2, 0.0, 20.0).unwrap();
        let a = average_exit_limit(&e2, 20.0, Execution::Sequential).unwrap();
        assert_eq!(a.growth, Growth::InfiniteAverage);
        let h2 = ModelSpace::space_form(2, -1.0, 20.0).unwrap();
        let a = average_exit_limit(&h2, 20.0, Execution::Parallel).unwrap();
        assert_eq!(a.growth, Growth::FiniteAverage);
        assert!((a.q_infinity.unwrap() - 1.0).abs() < 1e-4);
        assert!(a.volume_grows);
        assert!(a.eta_bound >= a.ladder.last().unwrap().quotient);
    }
}
