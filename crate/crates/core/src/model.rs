//! Rotationally symmetric model spaces `M^m_w`: volumes, the isoperimetric quotient
//! `q_w`, mean exit times and torsional rigidity of geodesic balls.

use std::f64::consts::PI;
use std::fmt;

use crate::error::{Error, Result};
use crate::jet::Jet;
use crate::quadrature::Quadrature;
use crate::radial::{Grid, HermiteTable, JetFn, Radial};

/// Relative tolerance for model integrals; they are nested up to three deep downstream.
pub const MODEL_TOL: f64 = 1e-12;

/// Fraction of the conjugate radius `π/√b` used as the default end of positively
/// curved space forms.
pub const CONJUGATE_MARGIN: f64 = 0.999;

const ADMISSIBLE_TOL: f64 = 1e-8;

/// Warping function of the simply connected space form of constant curvature `b`.
pub fn space_form_warping(b: f64) -> Radial {
    if b > 0.0 {
        let k = b.sqrt();
        std::sync::Arc::new(JetFn::new(move |x: Jet| (x * k).sin() / k).with_domain_end(PI / k))
    } else if b < 0.0 {
        let k = (-b).sqrt();
        std::sync::Arc::new(JetFn::new(move |x: Jet| (x * k).sinh() / k))
    } else {
        std::sync::Arc::new(JetFn::new(|x: Jet| x))
    }
}

/// Area of the unit sphere `S^{m-1}` in `R^m`.
pub fn unit_sphere_area(m: usize) -> f64 {
    match m {
        0 => 0.0,
        1 => 2.0,
        2 => 2.0 * PI,
        _ => unit_sphere_area(m - 2) * 2.0 * PI / (m - 2) as f64,
    }
}

/// Both evaluations of the torsional rigidity of a model ball.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rigidity {
    /// `∫_{B_R} q_w² dσ`, the primary value.
    pub value: f64,
    /// `V₀ ∫_0^R w^{m-1}(r) E_R(r) dr`.
    pub double_integral: f64,
}

#[derive(Clone)]
pub struct ModelSpace {
    m: usize,
    w: Radial,
    r_max: f64,
    v0: f64,
    // ∫_0^r w^{m-1}, tabulated with exact slope and curvature at the nodes.
    volume: HermiteTable,
    quad: Quadrature,
}

impl fmt::Debug for ModelSpace {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ModelSpace")
            .field("m", &self.m)
            .field("r_max", &self.r_max)
            .finish()
    }
}

impl ModelSpace {
    /// Checks `w(0) = 0`, `w'(0) = 1` and `w > 0` on `(0, r_max]`, then tabulates volumes.
    pub fn new(m: usize, w: Radial, r_max: f64) -> Result<Self> {
        if m < 2 {
            return Err(Error::Inadmissible {
                field: "m",
                reason: format!("dimension must be at least 2, got {m}"),
            });
        }
        if !(r_max > 0.0 && r_max.is_finite()) {
            return Err(Error::Inadmissible {
                field: "R",
                reason: format!("radius must be positive and finite, got {r_max}"),
            });
        }
        if r_max >= w.domain_end() {
            return Err(Error::Inadmissible {
                field: "w",
                reason: format!("radius {r_max} reaches the end of the domain {}", w.domain_end()),
            });
        }
        let at_pole = w.try_jet(0.0).map_err(|e| Error::Inadmissible {
            field: "w",
            reason: format!("cannot evaluate at the pole: {e}"),
        })?;
        if at_pole.value.abs() > ADMISSIBLE_TOL || (at_pole.d1 - 1.0).abs() > ADMISSIBLE_TOL {
            return Err(Error::Inadmissible {
                field: "w",
                reason: format!(
                    "need w(0) = 0 and w'(0) = 1, got {} and {}",
                    at_pole.value, at_pole.d1
                ),
            });
        }
        let nodes = Grid::table_nodes(r_max);
        let mut jets = Vec::with_capacity(nodes.len());
        for &r in &nodes[1..] {
            let j = w.try_jet(r).map_err(|e| Error::Inadmissible {
                field: "w",
                reason: e.to_string(),
            })?;
            if !(j.value > 0.0 && j.is_finite()) {
                return Err(Error::Inadmissible {
                    field: "w",
                    reason: format!("w must be positive and finite on (0, R], w({r}) = {}", j.value),
                });
            }
            jets.push(j);
        }
        let k = (m - 1) as i32;
        let quad = Quadrature::relative(MODEL_TOL);
        let cumulative = quad.cumulative(|r| Ok(w.eval(r).powi(k)), &nodes)?;
        let mut table = Vec::with_capacity(nodes.len());
        table.push(Jet::new(0.0, 0.0, if m == 2 { 1.0 } else { 0.0 }));
        for (j, v) in jets.iter().zip(&cumulative[1..]) {
            let pow = j.value.powi(k - 1);
            table.push(Jet::new(*v, pow * j.value, f64::from(k) * pow * j.d1));
        }
        Ok(ModelSpace {
            m,
            w,
            r_max,
            v0: unit_sphere_area(m),
            volume: HermiteTable::new(nodes, table)?,
            quad,
        })
    }

    /// Space form of curvature `b`; for `b > 0` the radius is capped below the conjugate
    /// radius.
    pub fn space_form(m: usize, b: f64, r_max: f64) -> Result<Self> {
        let r_max = if b > 0.0 {
            r_max.min(CONJUGATE_MARGIN * PI / b.sqrt())
        } else {
            r_max
        };
        ModelSpace::new(m, space_form_warping(b), r_max)
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn warping(&self) -> &Radial {
        &self.w
    }

    pub fn r_max(&self) -> f64 {
        self.r_max
    }

    pub fn unit_sphere_area(&self) -> f64 {
        self.v0
    }

    fn check(&self, r: f64) -> Result<()> {
        if (0.0..=self.r_max * (1.0 + 1e-12)).contains(&r) {
            Ok(())
        } else {
            Err(Error::OutOfDomain { r, max: self.r_max })
        }
    }

    /// `η_w = w'/w`, the mean curvature of the geodesic sphere of radius `r`.
    pub fn eta(&self, r: f64) -> f64 {
        let j = self.w.jet(r);
        j.d1 / j.value
    }

    /// Radial sectional curvature `-w''/w` for `r > 0`.
    pub fn radial_curvature(&self, r: f64) -> f64 {
        let j = self.w.jet(r);
        -j.d2 / j.value
    }

    fn power(&self, r: f64) -> f64 {
        self.w.eval(r).powi(self.m as i32 - 1)
    }

    // ∫_0^r w^{m-1}
    fn integral(&self, r: f64) -> Result<f64> {
        if r <= 0.0 {
            return Ok(0.0);
        }
        if r < self.volume.nodes()[1] {
            let k = self.m as i32 - 1;
            return self.quad.integrate(|t| self.w.eval(t).powi(k), 0.0, r);
        }
        Ok(self.volume.interpolate(r.min(self.r_max)).value)
    }

    pub fn sphere_volume(&self, r: f64) -> Result<f64> {
        self.check(r)?;
        Ok(self.v0 * self.power(r))
    }

    pub fn ball_volume(&self, r: f64) -> Result<f64> {
        self.check(r)?;
        Ok(self.v0 * self.integral(r)?)
    }

    /// `q_w(r) = Vol(B_r) / Vol(S_r)`.
    pub fn quotient(&self, r: f64) -> Result<f64> {
        self.check(r)?;
        if r == 0.0 {
            return Ok(0.0);
        }
        Ok(self.integral(r)? / self.power(r))
    }

    /// `q_w'(r) = 1 - (m-1) η_w(r) q_w(r)`.
    pub fn quotient_slope(&self, r: f64) -> Result<f64> {
        if r == 0.0 {
            self.check(r)?;
            return Ok(1.0 / self.m as f64);
        }
        let q = self.quotient(r)?;
        Ok(1.0 - (self.m - 1) as f64 * self.eta(r) * q)
    }

    /// `E_R(r) = ∫_r^R q_w`, the mean exit time from `B_R` of a path started at radius `r`.
    pub fn mean_exit_time(&self, big_r: f64, r: f64) -> Result<f64> {
        self.check(big_r)?;
        if !(0.0..=big_r).contains(&r) {
            return Err(Error::OutOfDomain { r, max: big_r });
        }
        self.quad.try_integrate(|t| self.quotient(t), r, big_r)
    }

    /// Torsional rigidity of `B_R`, computed in two ways.
    pub fn torsional_rigidity(&self, big_r: f64) -> Result<Rigidity> {
        self.check(big_r)?;
        if big_r == 0.0 {
            return Ok(Rigidity {
                value: 0.0,
                double_integral: 0.0,
            });
        }
        let value = self.v0
            * self.quad.try_integrate(
                |t| {
                    let q = self.quotient(t)?;
                    Ok(q * q * self.power(t))
                },
                0.0,
                big_r,
            )?;
        let double_integral = self.v0
            * self.quad.try_integrate(
                |t| Ok(self.power(t) * self.mean_exit_time(big_r, t)?),
                0.0,
                big_r,
            )?;
        if (value - double_integral).abs() > 1e-6 * value.abs() {
            return Err(Error::InternalMismatch {
                quantity: "torsional rigidity",
                first: value,
                second: double_integral,
            });
        }
        Ok(Rigidity {
            value,
            double_integral,
        })
    }

    /// `dA₁/dR = q_w(R)² Vol(S_R)`.
    pub fn torsional_rigidity_derivative(&self, big_r: f64) -> Result<f64> {
        let q = self.quotient(big_r)?;
        Ok(q * q * self.sphere_volume(big_r)?)
    }

    /// Radius of the ball holding `volume`, or `InsufficientRoom`.
    pub fn radius_for_volume(&self, volume: f64) -> Result<f64> {
        let available = self.ball_volume(self.r_max)?;
        if volume > available * (1.0 + 1e-12) {
            return Err(Error::InsufficientRoom {
                requested: volume,
                available,
            });
        }
        if volume <= 0.0 {
            return Ok(0.0);
        }
        let tol = 1e-14 * volume;
        crate::roots::invert_monotone_with(|r| self.ball_volume(r), volume, 0.0, self.r_max, tol)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dsl;

    fn rel(a: f64, b: f64) -> f64 {
        (a - b).abs() / b.abs().max(f64::MIN_POSITIVE)
    }

    #[test]
    fn space_form_values() {
        assert_eq!(space_form_warping(0.0).eval(1.0), 1.0);
        assert!((space_form_warping(1.0).eval(PI / 2.0) - 1.0).abs() < 1e-15);
        assert!((space_form_warping(-1.0).eval(1.0) - 1.175_201_2).abs() < 1e-7);
        assert_eq!(space_form_warping(1.0).domain_end(), PI);
        let j = space_form_warping(-4.0).jet(0.0);
        assert_eq!((j.value, j.d1), (0.0, 1.0));
    }

    #[test]
    fn unit_sphere_areas() {
        assert_eq!(unit_sphere_area(2), 2.0 * PI);
        assert!((unit_sphere_area(3) - 4.0 * PI).abs() < 1e-14);
        assert!((unit_sphere_area(4) - 2.0 * PI * PI).abs() < 1e-13);
        assert!((unit_sphere_area(5) - 8.0 * PI * PI / 3.0).abs() < 1e-13);
    }

    #[test]
    fn euclidean_volumes() {
        let e2 = ModelSpace::space_form(2, 0.0, 2.0).unwrap();
        assert!(rel(e2.sphere_volume(1.0).unwrap(), 2.0 * PI) < 1e-15);
        assert!(rel(e2.ball_volume(1.0).unwrap(), PI) < 1e-13);
        let e3 = ModelSpace::space_form(3, 0.0, 2.0).unwrap();
        assert!(rel(e3.sphere_volume(1.0).unwrap(), 4.0 * PI) < 1e-15);
        assert!(rel(e3.ball_volume(1.0).unwrap(), 4.0 * PI / 3.0) < 1e-13);
        assert_eq!(e3.ball_volume(0.0).unwrap(), 0.0);
        assert_eq!(e3.sphere_volume(0.0).unwrap(), 0.0);
        assert!(matches!(e3.ball_volume(2.5), Err(Error::OutOfDomain { .. })));
    }

    #[test]
    fn quotients() {
        let e2 = ModelSpace::space_form(2, 0.0, 2.0).unwrap();
        assert!(rel(e2.quotient(1.0).unwrap(), 0.5) < 1e-13);
        let h2 = ModelSpace::space_form(2, -1.0, 2.0).unwrap();
        // (cosh r - 1)/sinh r = tanh(r/2)
        assert!(rel(h2.quotient(1.0).unwrap(), 0.5f64.tanh()) < 1e-12);
        assert!((h2.quotient(1.0).unwrap() - 0.462_117_2).abs() < 1e-7);
        assert_eq!(h2.quotient(0.0).unwrap(), 0.0);
        let tiny = h2.quotient(1e-9).unwrap();
        assert!(rel(tiny, 0.5e-9) < 1e-9);
    }

    #[test]
    fn eta_times_quotient_tends_to_one_over_m() {
        for m in [2, 3, 5] {
            let s = ModelSpace::space_form(m, -1.0, 1.0).unwrap();
            let r = 1e-5;
            let v = m as f64 * s.quotient(r).unwrap() * s.eta(r);
            assert!((v - 1.0).abs() < 1e-8, "m = {m}: {v}");
        }
    }

    #[test]
    fn exit_times() {
        let e2 = ModelSpace::space_form(2, 0.0, 1.0).unwrap();
        assert!(rel(e2.mean_exit_time(1.0, 0.0).unwrap(), 0.25) < 1e-12);
        assert_eq!(e2.mean_exit_time(1.0, 1.0).unwrap(), 0.0);
        let h2 = ModelSpace::space_form(2, -1.0, 1.0).unwrap();
        let want = 2.0 * 0.5f64.cosh().ln();
        assert!(rel(h2.mean_exit_time(1.0, 0.0).unwrap(), want) < 1e-12);
        assert!((want - 0.240_229_0).abs() < 1e-7);
    }

    #[test]
    fn exit_time_increases_with_radius() {
        let h3 = ModelSpace::space_form(3, -1.0, 3.0).unwrap();
        let mut last = 0.0;
        for big_r in [0.5, 1.0, 1.5, 2.0, 3.0] {
            let e = h3.mean_exit_time(big_r, 0.25).unwrap();
            assert!(e > last);
            last = e;
        }
    }

    #[test]
    fn euclidean_rigidity_closed_form() {
        for (m, want) in [(2, PI / 8.0), (3, 4.0 * PI / 45.0)] {
            let s = ModelSpace::space_form(m, 0.0, 1.0).unwrap();
            let a = s.torsional_rigidity(1.0).unwrap();
            assert!(rel(a.value, want) < 1e-10, "{a:?}");
            assert!(rel(a.double_integral, a.value) < 1e-10, "{a:?}");
        }
        let s = ModelSpace::space_form(2, 0.0, 1.0).unwrap();
        assert_eq!(s.torsional_rigidity(0.0).unwrap().value, 0.0);
    }

    #[test]
    fn rigidity_derivative_matches_finite_difference() {
        let e2 = ModelSpace::space_form(2, 0.0, 3.0).unwrap();
        assert!(rel(e2.torsional_rigidity_derivative(1.0).unwrap(), PI / 2.0) < 1e-12);
        assert!(rel(e2.torsional_rigidity_derivative(2.0).unwrap(), 4.0 * PI) < 1e-12);
        assert_eq!(e2.torsional_rigidity_derivative(0.0).unwrap(), 0.0);
        let w = dsl::to_radial(dsl::parse("sinh(r) + r^3/10").unwrap());
        let s = ModelSpace::new(3, w, 2.0).unwrap();
        for big_r in [0.3, 1.0, 1.7] {
            let h = 1e-4;
            let fd = (s.torsional_rigidity(big_r + h).unwrap().value
                - s.torsional_rigidity(big_r - h).unwrap().value)
                / (2.0 * h);
            let d = s.torsional_rigidity_derivative(big_r).unwrap();
            assert!(rel(fd, d) < 1e-4, "{big_r}: {fd} vs {d}");
        }
    }

    #[test]
    fn inadmissible_warpings_are_rejected() {
        let shifted = dsl::to_radial(dsl::parse("r + 1").unwrap());
        assert!(matches!(ModelSpace::new(2, shifted, 1.0), Err(Error::Inadmissible { .. })));
        let steep = dsl::to_radial(dsl::parse("2*r").unwrap());
        assert!(matches!(ModelSpace::new(2, steep, 1.0), Err(Error::Inadmissible { .. })));
        let sphere = space_form_warping(1.0);
        assert!(matches!(ModelSpace::new(2, sphere, 4.0), Err(Error::Inadmissible { .. })));
        assert!(ModelSpace::space_form(2, 1.0, 10.0).unwrap().r_max() < PI);
    }

    #[test]
    fn volume_inversion() {
        let e2 = ModelSpace::space_form(2, 0.0, 3.0).unwrap();
        assert!((e2.radius_for_volume(PI).unwrap() - 1.0).abs() < 1e-12);
        let hyp_ball = 2.0 * PI * (1f64.cosh() - 1.0);
        let t = e2.radius_for_volume(hyp_ball).unwrap();
        assert!((t - 2.0 * 0.5f64.sinh()).abs() < 1e-12);
        let h2 = ModelSpace::space_form(2, -1.0, 3.0).unwrap();
        assert!((h2.radius_for_volume(PI).unwrap() - 1.5f64.acosh()).abs() < 1e-12);
        assert!(matches!(e2.radius_for_volume(100.0), Err(Error::InsufficientRoom { .. })));
    }
}
