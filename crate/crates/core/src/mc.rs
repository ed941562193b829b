//! Monte Carlo estimates of mean exit times and torsional rigidity on model spaces.
//!
//! The diffusion has generator `Δ`, so its radial part solves
//! `dr = √2 dB + (m-1) η_w(r) dt`. Near the pole the drift behaves like `(m-1)/r`,
//! which is exactly the radial drift of an `m`-dimensional Euclidean Brownian motion.
//! Paths are therefore simulated in Cartesian coordinates of `R^m` with generator `Δ`,
//! plus the regular radial correction `(m-1)(η_w(r) - 1/r)`; the norm of the
//! position then has the required law and the pole needs no special treatment.
//! Exits between steps are caught with the Brownian-bridge crossing probability.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::exec::{self, Execution};
use crate::model::ModelSpace;
use crate::sum::CompensatedSum;

/// `dt · max |drift|` may not exceed this fraction of the exit radius.
pub const STEP_LIMIT: f64 = 0.1;

const DRIFT_NODES: usize = 4096;
// Beyond this many bridge "standard deviations" a crossing is never drawn.
const BRIDGE_CUTOFF: f64 = 40.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McConfig {
    pub paths: usize,
    pub dt: f64,
    pub seed: u64,
    pub start_radius: f64,
    pub exit_radius: f64,
    /// Below this radius the drift correction is extrapolated linearly to 0.
    pub pole_guard: f64,
}

impl McConfig {
    pub fn new(paths: usize, dt: f64, seed: u64, start_radius: f64, exit_radius: f64) -> Self {
        McConfig {
            paths,
            dt,
            seed,
            start_radius,
            exit_radius,
            pole_guard: 1e-4 * exit_radius,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidConfig(msg));
        if self.paths == 0 {
            return bad("paths must be at least 1".into());
        }
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return bad(format!("dt must be positive, got {}", self.dt));
        }
        if !(self.exit_radius > 0.0 && self.exit_radius.is_finite()) {
            return bad(format!("exit radius must be positive, got {}", self.exit_radius));
        }
        if !(0.0..=self.exit_radius).contains(&self.start_radius) {
            return bad(format!(
                "start radius {} must lie in [0, {}]",
                self.start_radius, self.exit_radius
            ));
        }
        if !(self.pole_guard > 0.0 && self.pole_guard < self.exit_radius) {
            return bad(format!("pole guard {} must lie in (0, exit radius)", self.pole_guard));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct McEstimate {
    pub mean: f64,
    pub stderr: f64,
    pub paths_used: usize,
}

impl McEstimate {
    fn from_samples(samples: &[f64], scale: f64) -> Self {
        let n = samples.len() as f64;
        let mean = samples.iter().copied().collect::<CompensatedSum>().value() / n;
        let var = if samples.len() > 1 {
            samples
                .iter()
                .map(|x| (x - mean) * (x - mean))
                .collect::<CompensatedSum>()
                .value()
                / (n - 1.0)
        } else {
            0.0
        };
        McEstimate {
            mean: scale * mean,
            stderr: scale * (var / n).sqrt(),
            paths_used: samples.len(),
        }
    }

    /// `|mean - reference| / stderr`.
    pub fn z_score(&self, reference: f64) -> f64 {
        let d = (self.mean - reference).abs();
        if d == 0.0 {
            0.0
        } else {
            d / self.stderr
        }
    }
}

// Tabulated radial correction (m-1)(η_w(r) - 1/r) on [0, R].
struct Correction {
    values: Vec<f64>,
    step: f64,
}

impl Correction {
    fn new(model: &ModelSpace, radius: f64, guard: f64) -> Result<Self> {
        let k = (model.m() - 1) as f64;
        let exact = |r: f64| k * (model.eta(r) - 1.0 / r);
        let at_guard = exact(guard);
        let step = radius / (DRIFT_NODES - 1) as f64;
        let values: Vec<f64> = (0..DRIFT_NODES)
            .map(|i| {
                let r = i as f64 * step;
                if r < guard {
                    at_guard * r / guard
                } else {
                    exact(r)
                }
            })
            .collect();
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite { at: i as f64 * step });
        }
        Ok(Correction { values, step })
    }

    fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |a, v| a.max(v.abs()))
    }

    fn at(&self, r: f64) -> f64 {
        let x = r / self.step;
        let i = (x as usize).min(DRIFT_NODES - 2);
        let u = x - i as f64;
        self.values[i] + u * (self.values[i + 1] - self.values[i])
    }
}

struct Simulator {
    correction: Correction,
    m: usize,
    dt: f64,
    exit: f64,
    seed: u64,
}

impl Simulator {
    fn new(model: &ModelSpace, cfg: &McConfig) -> Result<Self> {
        cfg.validate()?;
        if cfg.exit_radius > model.r_max() {
            return Err(Error::OutOfDomain {
                r: cfg.exit_radius,
                max: model.r_max(),
            });
        }
        let correction = Correction::new(model, cfg.exit_radius, cfg.pole_guard)?;
        let product = cfg.dt * correction.max_abs();
        if product > STEP_LIMIT * cfg.exit_radius {
            return Err(Error::StepTooLarge {
                product,
                limit: STEP_LIMIT * cfg.exit_radius,
            });
        }
        Ok(Simulator {
            correction,
            m: model.m(),
            dt: cfg.dt,
            exit: cfg.exit_radius,
            seed: cfg.seed,
        })
    }

    /// Independent stream for each path, so results do not depend on scheduling.
    fn rng(&self, path: usize) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(path as u64);
        rng
    }

    fn exit_time(&self, start: f64, rng: &mut ChaCha8Rng) -> f64 {
        if start >= self.exit {
            return 0.0;
        }
        let (dt, exit) = (self.dt, self.exit);
        let sigma = (2.0 * dt).sqrt();
        let mut x = vec![0.0; self.m];
        x[0] = start;
        let mut r = start;
        let mut t = 0.0;
        loop {
            let push = if r > 0.0 { self.correction.at(r) * dt / r } else { 0.0 };
            let mut r2 = 0.0;
            for xi in x.iter_mut() {
                let z: f64 = rng.sample(StandardNormal);
                *xi += push * *xi + sigma * z;
                r2 += *xi * *xi;
            }
            t += dt;
            let next = r2.sqrt();
            if next >= exit {
                return t;
            }
            // Probability that the bridge between the two positions touched the
            // sphere, in the half-space approximation: exp(-2 d0 d1 / (2 dt)).
            let exponent = (exit - r) * (exit - next) / dt;
            if exponent < BRIDGE_CUTOFF && rng.gen::<f64>() < (-exponent).exp() {
                return t;
            }
            r = next;
        }
    }
}

/// Mean first exit time from `B_{exit_radius}` of paths started at `start_radius`.
pub fn simulate_exit_time(model: &ModelSpace, cfg: &McConfig, exec: Execution) -> Result<McEstimate> {
    let sim = Simulator::new(model, cfg)?;
    let samples = exec::map_range(exec, cfg.paths, |i| {
        let mut rng = sim.rng(i);
        sim.exit_time(cfg.start_radius, &mut rng)
    });
    Ok(McEstimate::from_samples(&samples, 1.0))
}

/// `A₁(B_R) = Vol(B_R) · E[τ]` with start points drawn from the normalized volume
/// measure, stratified in volume: path `i` starts in the shell holding the volume
/// fraction `[i/N, (i+1)/N)`.
pub fn estimate_torsional_rigidity(
    model: &ModelSpace,
    radius: f64,
    cfg: &McConfig,
    exec: Execution,
) -> Result<McEstimate> {
    let cfg = McConfig {
        exit_radius: radius,
        start_radius: 0.0,
        pole_guard: cfg.pole_guard.min(0.5 * radius),
        ..*cfg
    };
    let volume = model.ball_volume(radius)?;
    if volume == 0.0 {
        return Ok(McEstimate {
            mean: 0.0,
            stderr: 0.0,
            paths_used: cfg.paths,
        });
    }
    let sim = Simulator::new(model, &cfg)?;
    let n = cfg.paths as f64;
    let samples = exec::map_range(exec, cfg.paths, |i| -> Result<f64> {
        let mut rng = sim.rng(i);
        let fraction = (i as f64 + rng.gen::<f64>()) / n;
        let start = model.radius_for_volume(fraction * volume)?;
        Ok(sim.exit_time(start, &mut rng))
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;
    Ok(McEstimate::from_samples(&samples, volume))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn already_exited() {
        let e2 = ModelSpace::space_form(2, 0.0, 1.0).unwrap();
        let cfg = McConfig::new(10, 1e-3, 1, 1.0, 1.0);
        let est = simulate_exit_time(&e2, &cfg, Execution::Sequential).unwrap();
        assert_eq!((est.mean, est.stderr), (0.0, 0.0));
    }

    #[test]
    fn invalid_configs() {
        let e2 = ModelSpace::space_form(2, 0.0, 1.0).unwrap();
        for cfg in [
            McConfig::new(0, 1e-3, 1, 0.0, 1.0),
            McConfig::new(1, 0.0, 1, 0.0, 1.0),
            McConfig::new(1, 1e-3, 1, 2.0, 1.0),
        ] {
            assert!(matches!(
                simulate_exit_time(&e2, &cfg, Execution::Sequential),
                Err(Error::InvalidConfig(_))
            ));
        }
    }

    #[test]
    fn large_steps_are_refused() {
        let h2 = ModelSpace::space_form(2, -1.0, 5.0).unwrap();
        let cfg = McConfig::new(10, 1.0, 1, 0.0, 5.0);
        assert!(matches!(
            simulate_exit_time(&h2, &cfg, Execution::Sequential),
            Err(Error::StepTooLarge { .. })
        ));
    }

    #[test]
    fn euclidean_exit_time_and_rigidity() {
        let e2 = ModelSpace::space_form(2, 0.0, 1.0).unwrap();
        let cfg = McConfig::new(20_000, 1e-4, 7, 0.0, 1.0);
        let est = simulate_exit_time(&e2, &cfg, Execution::Sequential).unwrap();
        assert!(est.z_score(0.25) < 4.0, "{est:?}");
        let e3 = ModelSpace::space_form(3, 0.0, 1.0).unwrap();
        let a = estimate_torsional_rigidity(&e3, 1.0, &cfg, Execution::Sequential).unwrap();
        assert!(a.z_score(4.0 * PI / 45.0) < 4.0, "{a:?}");
        let tiny = estimate_torsional_rigidity(&e3, 1e-3, &cfg, Execution::Sequential).unwrap();
        assert!(tiny.mean < 1e-12);
    }

    #[test]
    fn reproducible_across_execution_modes() {
        let h2 = ModelSpace::space_form(2, -1.0, 1.0).unwrap();
        let cfg = McConfig::new(2_000, 1e-3, 42, 0.3, 1.0);
        let a = simulate_exit_time(&h2, &cfg, Execution::Sequential).unwrap();
        let b = simulate_exit_time(&h2, &cfg, Execution::Parallel).unwrap();
        assert_eq!(a.mean.to_bits(), b.mean.to_bits());
        assert_eq!(a.stderr.to_bits(), b.stderr.to_bits());
        let c = simulate_exit_time(&h2, &McConfig { seed: 43, ..cfg }, Execution::Sequential).unwrap();
        assert_ne!(a.mean, c.mean);
    }
}
