//! Schwarz symmetrization into a model space.
//!
//! A non-negative function on a domain is described by its superlevel volumes
//! `V(t) = Vol{ψ ≥ t}`. Its symmetrization `ψ*` lives on the centered ball `B_{T(R)}`
//! of a target model with the same total volume, and is the radial non-increasing
//! function with the same superlevel volumes.

use std::fmt;
use std::path::Path;

use crate::balance::Criterion;
use crate::comparison::Direction;
use crate::error::{Error, Result};
use crate::model::ModelSpace;
use crate::quadrature::Quadrature;
use crate::radial::{Grid, Radial, DEFAULT_NODES};
use crate::roots::invert_monotone_with;

/// Default number of levels on the `t` grid.
pub const DEFAULT_LEVELS: usize = 1024;

const QUAD_TOL: f64 = 1e-11;

/// A radial non-increasing function `ψ` on the ball of radius `radius` of a model space.
#[derive(Clone)]
pub struct RadialSource {
    pub space: ModelSpace,
    pub psi: Radial,
    pub radius: f64,
}

impl RadialSource {
    pub fn new(space: ModelSpace, psi: Radial, radius: f64) -> Result<Self> {
        if radius > space.r_max() {
            return Err(Error::OutOfDomain {
                r: radius,
                max: space.r_max(),
            });
        }
        Ok(RadialSource { space, psi, radius })
    }

    /// `a(t) = ψ⁻¹(t)`: the radius of the superlevel ball at height `t`.
    fn level_radius(&self, t: f64) -> Result<f64> {
        let top = self.psi.try_jet(0.0)?.value;
        let bottom = self.psi.try_jet(self.radius)?.value;
        if t <= bottom {
            return Ok(self.radius);
        }
        if t >= top {
            return Ok(0.0);
        }
        let tol = 1e-14 * top.abs().max(1e-300);
        invert_monotone_with(|r| Ok(self.psi.try_jet(r)?.value), t, 0.0, self.radius, tol)
    }
}

/// Superlevel volumes `t ↦ Vol{ψ ≥ t}`, non-increasing and zero at the top level.
#[derive(Clone)]
pub enum VolumeProfile {
    /// Exact superlevel balls of a radial non-increasing function.
    Radial(RadialSource),
    /// A sampled curve: levels non-decreasing (a repeated level encodes a jump, the
    /// first sample giving the value at that level), volumes non-increasing, last
    /// volume zero. Linear between samples.
    Sampled { levels: Vec<f64>, volumes: Vec<f64> },
}

impl fmt::Debug for VolumeProfile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            VolumeProfile::Radial(s) => f
                .debug_struct("Radial")
                .field("radius", &s.radius)
                .finish_non_exhaustive(),
            VolumeProfile::Sampled { levels, volumes } => f
                .debug_struct("Sampled")
                .field("levels", levels)
                .field("volumes", volumes)
                .finish(),
        }
    }
}

impl VolumeProfile {
    pub fn radial(source: RadialSource) -> Self {
        VolumeProfile::Radial(source)
    }

    pub fn sampled(levels: Vec<f64>, volumes: Vec<f64>) -> Result<Self> {
        if levels.len() < 2 || levels.len() != volumes.len() {
            return Err(Error::InvalidProfile(format!(
                "need at least two aligned samples, got {} levels and {} volumes",
                levels.len(),
                volumes.len()
            )));
        }
        if levels.iter().chain(&volumes).any(|x| !x.is_finite()) {
            return Err(Error::InvalidProfile("samples must be finite".into()));
        }
        if levels[0] < 0.0 || volumes.iter().any(|&v| v < 0.0) {
            return Err(Error::InvalidProfile("levels and volumes must be non-negative".into()));
        }
        if let Some(i) = (1..levels.len()).find(|&i| levels[i] < levels[i - 1]) {
            return Err(Error::InvalidProfile(format!("levels decrease at sample {}", i + 1)));
        }
        if let Some(i) = (1..volumes.len()).find(|&i| volumes[i] > volumes[i - 1]) {
            return Err(Error::InvalidProfile(format!("volumes increase at sample {}", i + 1)));
        }
        if *volumes.last().expect("non-empty") != 0.0 {
            return Err(Error::InvalidProfile("volume at the top level must be 0".into()));
        }
        Ok(VolumeProfile::Sampled { levels, volumes })
    }

    /// Reads whitespace- or comma-separated `(t, V)` pairs; `#` starts a comment.
    pub fn parse(text: &str) -> Result<Self> {
        let mut levels = Vec::new();
        let mut volumes = Vec::new();
        for (n, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let fields: Vec<&str> = line
                .split(|c: char| c == ',' || c.is_whitespace())
                .filter(|s| !s.is_empty())
                .collect();
            let parsed: Option<Vec<f64>> = fields.iter().map(|f| f.parse().ok()).collect();
            match parsed.as_deref() {
                Some([t, v]) => {
                    levels.push(*t);
                    volumes.push(*v);
                }
                // A header line before any data is allowed.
                None if levels.is_empty() => continue,
                _ => {
                    return Err(Error::InvalidProfile(format!(
                        "line {}: expected two numbers, got `{line}`",
                        n + 1
                    )))
                }
            }
        }
        VolumeProfile::sampled(levels, volumes)
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::InvalidProfile(format!("{}: {e}", path.display())))?;
        VolumeProfile::parse(&text)
    }

    /// The top level `max ψ`.
    pub fn peak(&self) -> Result<f64> {
        match self {
            VolumeProfile::Radial(s) => Ok(s.psi.try_jet(0.0)?.value),
            VolumeProfile::Sampled { levels, .. } => Ok(*levels.last().expect("non-empty")),
        }
    }

    pub fn total(&self) -> Result<f64> {
        self.volume(0.0)
    }

    /// `V(t)`.
    pub fn volume(&self, t: f64) -> Result<f64> {
        match self {
            VolumeProfile::Radial(s) => {
                if t > self.peak()? {
                    return Ok(0.0);
                }
                s.space.ball_volume(s.level_radius(t)?)
            }
            VolumeProfile::Sampled { levels, volumes } => {
                if t <= levels[0] {
                    return Ok(volumes[0]);
                }
                if t > *levels.last().expect("non-empty") {
                    return Ok(0.0);
                }
                let j = levels.partition_point(|&x| x < t);
                if levels[j] == t {
                    return Ok(volumes[j]);
                }
                let (t0, t1) = (levels[j - 1], levels[j]);
                let u = (t - t0) / (t1 - t0);
                Ok(volumes[j - 1] + u * (volumes[j] - volumes[j - 1]))
            }
        }
    }

    /// `∫ ψ dσ` computed on the source side.
    pub fn integral(&self) -> Result<f64> {
        match self {
            VolumeProfile::Radial(s) => Quadrature::relative(QUAD_TOL).try_integrate(
                |r| Ok(s.psi.try_jet(r)?.value * s.space.sphere_volume(r)?),
                0.0,
                s.radius,
            ),
            // Layer-cake formula, exact for the piecewise-linear curve.
            VolumeProfile::Sampled { levels, volumes } => {
                let head = levels[0] * volumes[0];
                Ok(head
                    + levels
                        .windows(2)
                        .zip(volumes.windows(2))
                        .map(|(t, v)| 0.5 * (t[1] - t[0]) * (v[0] + v[1]))
                        .sum::<f64>())
            }
        }
    }
}

/// Radius `T` of the target ball holding `volume`.
pub fn symmetrized_radius(target: &ModelSpace, volume: f64) -> Result<f64> {
    target.radius_for_volume(volume)
}

/// `ψ*` on the target ball `B_{T(R)}`.
#[derive(Clone)]
pub struct SymmetrizedFunction {
    profile: VolumeProfile,
    target: ModelSpace,
    radius: f64,
    peak: f64,
}

impl fmt::Debug for SymmetrizedFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SymmetrizedFunction")
            .field("radius", &self.radius)
            .field("peak", &self.peak)
            .finish_non_exhaustive()
    }
}

pub fn symmetrize(profile: &VolumeProfile, target: &ModelSpace) -> Result<SymmetrizedFunction> {
    let radius = symmetrized_radius(target, profile.total()?)?;
    Ok(SymmetrizedFunction {
        profile: profile.clone(),
        target: target.clone(),
        radius,
        peak: profile.peak()?,
    })
}

impl SymmetrizedFunction {
    /// `T(R)`.
    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn target(&self) -> &ModelSpace {
        &self.target
    }

    pub fn profile(&self) -> &VolumeProfile {
        &self.profile
    }

    /// Source radius whose ball has the volume of the target ball of radius `rt`.
    fn matched_radius(&self, source: &RadialSource, rt: f64) -> Result<f64> {
        let v = self.target.ball_volume(rt)?;
        let total = source.space.ball_volume(source.radius)?;
        if v >= total {
            return Ok(source.radius);
        }
        if v <= 0.0 {
            return Ok(0.0);
        }
        invert_monotone_with(|r| source.space.ball_volume(r), v, 0.0, source.radius, 1e-14 * v)
    }

    /// `r̃(t)`: radius of the target ball with volume `V(t)`.
    pub fn level_radius(&self, t: f64) -> Result<f64> {
        symmetrized_radius(&self.target, self.profile.volume(t)?)
    }

    /// `ψ*(r̃) = sup{t : V(t) ≥ Vol(B_r̃)}`.
    pub fn value(&self, rt: f64) -> Result<f64> {
        if rt > self.radius {
            return Ok(0.0);
        }
        match &self.profile {
            VolumeProfile::Radial(s) => s.psi.try_jet(self.matched_radius(s, rt)?).map(|j| j.value),
            VolumeProfile::Sampled { levels, volumes } => {
                let b = self.target.ball_volume(rt)?;
                // Largest sample index whose volume still covers the ball.
                let k = volumes.partition_point(|&v| v >= b);
                if k == 0 {
                    return Ok(0.0);
                }
                if k == volumes.len() {
                    return Ok(*levels.last().expect("non-empty"));
                }
                let (v0, v1) = (volumes[k - 1], volumes[k]);
                let (t0, t1) = (levels[k - 1], levels[k]);
                if v0 == v1 {
                    return Ok(t0);
                }
                Ok(t0 + (t1 - t0) * (v0 - b) / (v0 - v1))
            }
        }
    }

    /// `ψ*'(r̃)`.
    pub fn slope(&self, rt: f64) -> Result<f64> {
        match &self.profile {
            VolumeProfile::Radial(s) => {
                if rt <= 0.0 {
                    return Ok(0.0);
                }
                let rho = self.matched_radius(s, rt)?;
                let stretch = self.target.sphere_volume(rt)? / s.space.sphere_volume(rho)?;
                Ok(s.psi.try_jet(rho)?.d1 * stretch)
            }
            VolumeProfile::Sampled { .. } => {
                let h = 1e-6 * self.radius;
                let lo = (rt - h).max(0.0);
                let hi = (rt + h).min(self.radius);
                Ok((self.value(hi)? - self.value(lo)?) / (hi - lo))
            }
        }
    }

    /// `Vol{ψ* ≥ t}`, found by locating the edge of the superlevel ball of `ψ*`.
    pub fn superlevel_volume(&self, t: f64) -> Result<f64> {
        if t <= 0.0 {
            return self.target.ball_volume(self.radius);
        }
        if self.value(0.0)? < t {
            return Ok(0.0);
        }
        if self.value(self.radius)? >= t {
            return self.target.ball_volume(self.radius);
        }
        let (mut inside, mut outside) = (0.0, self.radius);
        for _ in 0..200 {
            let mid = 0.5 * (inside + outside);
            if mid <= inside || mid >= outside {
                break;
            }
            if self.value(mid)? >= t {
                inside = mid;
            } else {
                outside = mid;
            }
        }
        self.target.ball_volume(inside)
    }

    /// `∫_{B_{T(R)}} ψ* dσ̃`.
    pub fn integral(&self) -> Result<f64> {
        Quadrature::relative(QUAD_TOL).try_integrate(
            |rt| Ok(self.value(rt)? * self.target.sphere_volume(rt)?),
            0.0,
            self.radius,
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IdentityCheck {
    pub source_integral: f64,
    pub symmetrized_integral: f64,
    /// `|∫ψ dσ - ∫ψ* dσ̃|`.
    pub integral_residual: f64,
    /// `max_t |V(t) - Vol{ψ* ≥ t}|` over the level grid.
    pub equimeasurability_residual: f64,
    pub total_volume: f64,
}

/// Integral preservation and equimeasurability on `levels` uniform heights.
pub fn verify_integral_identity(sym: &SymmetrizedFunction, levels: usize) -> Result<IdentityCheck> {
    let source_integral = sym.profile.integral()?;
    let symmetrized_integral = sym.integral()?;
    let peak = sym.peak;
    let mut worst: f64 = 0.0;
    for i in 0..levels {
        let t = peak * i as f64 / levels as f64;
        let v = sym.profile.volume(t)?;
        worst = worst.max((v - sym.superlevel_volume(t)?).abs());
    }
    Ok(IdentityCheck {
        source_integral,
        symmetrized_integral,
        integral_residual: (source_integral - symmetrized_integral).abs(),
        equimeasurability_residual: worst,
        total_volume: sym.profile.total()?,
    })
}

/// Margins of the derivative comparison against the exit time `E_{T(R)}` of the target,
/// oriented so that the expected inequality means a non-negative margin: for
/// lower-bounded constellations `E' - ψ*'`, for upper-bounded ones `ψ*' - E'`.
pub fn derivative_comparison(sym: &SymmetrizedFunction, direction: Direction) -> Result<Criterion> {
    let target = &sym.target;
    let margin = |rt: f64| -> Result<f64> {
        let exit_slope = -target.quotient(rt)?;
        let d = exit_slope - sym.slope(rt)?;
        Ok(match direction {
            Direction::Below => d,
            Direction::Above => -d,
        })
    };
    let nodes = Grid::clustered_nodes(sym.radius, DEFAULT_NODES)[1..].to_vec();
    let margins = nodes.iter().map(|&r| margin(r)).collect::<Result<Vec<_>>>()?;
    Criterion::from_margins(&nodes, margins, &margin)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::radial::radial;
    use std::f64::consts::PI;

    fn euclidean_exit(radius: f64) -> Radial {
        radial(move |x| (x * x * -1.0 + radius * radius) / 4.0)
    }

    #[test]
    fn symmetrized_radius_examples() {
        let e2 = ModelSpace::space_form(2, 0.0, 3.0).unwrap();
        assert!((symmetrized_radius(&e2, PI).unwrap() - 1.0).abs() < 1e-12);
        let t = symmetrized_radius(&e2, 2.0 * PI * (1f64.cosh() - 1.0)).unwrap();
        assert!((t - 1.042_190_6).abs() < 1e-7);
        let h2 = ModelSpace::space_form(2, -1.0, 3.0).unwrap();
        assert!((symmetrized_radius(&h2, PI).unwrap() - 0.962_423_7).abs() < 1e-7);
        let small = ModelSpace::space_form(2, 0.0, 0.5).unwrap();
        assert!(matches!(
            symmetrized_radius(&small, PI),
            Err(Error::InsufficientRoom { .. })
        ));
    }

    #[test]
    fn symmetrization_is_idempotent_on_radial_functions() {
        let e2 = ModelSpace::space_form(2, 0.0, 2.0).unwrap();
        let src = RadialSource::new(e2.clone(), euclidean_exit(1.0), 1.0).unwrap();
        let sym = symmetrize(&VolumeProfile::radial(src), &e2).unwrap();
        assert!((sym.radius() - 1.0).abs() < 1e-12);
        for i in 0..=10 {
            let r = i as f64 / 10.0;
            assert!((sym.value(r).unwrap() - (1.0 - r * r) / 4.0).abs() < 1e-12);
        }
        let check = verify_integral_identity(&sym, 256).unwrap();
        assert!(check.integral_residual < 1e-12, "{check:?}");
        assert!(check.equimeasurability_residual < 1e-9, "{check:?}");
        let d = derivative_comparison(&sym, Direction::Below).unwrap();
        assert!(d.min_margin.abs() < 1e-9);
    }

    #[test]
    fn indicator_profile() {
        let e2 = ModelSpace::space_form(2, 0.0, 2.0).unwrap();
        let profile = VolumeProfile::sampled(vec![0.0, 1.0, 1.0], vec![PI, PI, 0.0]).unwrap();
        let sym = symmetrize(&profile, &e2).unwrap();
        assert!((sym.radius() - 1.0).abs() < 1e-12);
        assert_eq!(sym.value(0.0).unwrap(), 1.0);
        assert_eq!(sym.value(0.7).unwrap(), 1.0);
        let check = verify_integral_identity(&sym, 64).unwrap();
        assert!((check.source_integral - PI).abs() < 1e-14);
        assert!((check.symmetrized_integral - PI).abs() < 1e-9, "{check:?}");
        assert!(check.equimeasurability_residual < 1e-9, "{check:?}");
    }

    #[test]
    fn euclidean_exit_time_into_the_hyperbolic_plane() {
        let e2 = ModelSpace::space_form(2, 0.0, 2.0).unwrap();
        let h2 = ModelSpace::space_form(2, -1.0, 2.0).unwrap();
        let src = RadialSource::new(e2, euclidean_exit(1.0), 1.0).unwrap();
        let sym = symmetrize(&VolumeProfile::radial(src), &h2).unwrap();
        assert!((sym.radius() - 1.5f64.acosh()).abs() < 1e-12);
        for i in 0..=10 {
            let rt = sym.radius() * i as f64 / 10.0;
            // Same volume π r² = 2π(cosh r̃ - 1) on both sides.
            let want = (1.0 - 2.0 * (rt.cosh() - 1.0)) / 4.0;
            assert!((sym.value(rt).unwrap() - want).abs() < 1e-12, "{rt}");
        }
        let check = verify_integral_identity(&sym, 256).unwrap();
        // ∫ (1 - r²)/4 dσ over the unit disc = π/8
        assert!((check.source_integral - PI / 8.0).abs() < 1e-12);
        assert!(check.integral_residual < 1e-9, "{check:?}");
        assert!(check.equimeasurability_residual < 1e-9 * PI, "{check:?}");
    }

    #[test]
    fn profile_parsing() {
        let p = VolumeProfile::parse("t,V\n# comment\n0, 3\n0.5 1\n1 0\n").unwrap();
        assert_eq!(p.total().unwrap(), 3.0);
        assert_eq!(p.volume(0.25).unwrap(), 2.0);
        assert_eq!(p.peak().unwrap(), 1.0);
        assert!(matches!(VolumeProfile::parse("0 1\n1 2\n2 0"), Err(Error::InvalidProfile(_))));
        assert!(matches!(VolumeProfile::parse("0 1\n1 0.5"), Err(Error::InvalidProfile(_))));
        assert!(matches!(VolumeProfile::parse("0 1\nx y\n1 0"), Err(Error::InvalidProfile(_))));
    }

    #[test]
    fn radial_profile_volumes() {
        let e2 = ModelSpace::space_form(2, 0.0, 2.0).unwrap();
        let psi = euclidean_exit(1.0);
        let src = RadialSource::new(e2, psi.clone(), 1.0).unwrap();
        let p = VolumeProfile::radial(src);
        // {ψ ≥ t} is the disc of radius sqrt(1 - 4t)
        for t in [0.0, 0.05, 0.1, 0.2, 0.25] {
            let want = PI * (1.0 - 4.0 * t);
            assert!((p.volume(t).unwrap() - want).abs() < 1e-12, "{t}");
        }
        assert_eq!(p.volume(0.3).unwrap(), 0.0);
        assert!((psi.eval(0.0) - 0.25).abs() < 1e-15);
    }
}
