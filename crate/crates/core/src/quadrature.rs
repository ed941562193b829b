//! Globally adaptive Gauss–Kronrod (7/15) quadrature.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::error::{Error, Result};
use crate::radial::RadialFunction;
use crate::sum::{compensated_sum, CompensatedSum};

/// Default relative tolerance for every integral in the crate.
pub const DEFAULT_TOL: f64 = 1e-10;

const XGK: [f64; 8] = [
    0.991_455_371_120_812_639_206_854_697_526_329,
    0.949_107_912_342_758_524_526_189_684_047_851,
    0.864_864_423_359_769_072_789_712_788_640_926,
    0.741_531_185_599_394_439_863_864_773_280_788,
    0.586_087_235_467_691_130_294_144_845_693_013,
    0.405_845_151_377_397_166_906_606_412_076_961,
    0.207_784_955_007_898_467_600_689_403_773_245,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_224_963_732_008_058_970,
    0.063_092_092_629_978_553_290_700_663_189_204,
    0.104_790_010_322_250_183_839_876_322_541_518,
    0.140_653_259_715_525_918_745_189_590_510_238,
    0.169_004_726_639_267_902_826_583_426_598_550,
    0.190_350_578_064_785_409_913_256_402_421_014,
    0.204_432_940_075_298_892_414_161_999_234_649,
    0.209_482_141_084_727_828_012_999_174_891_714,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_693_270_611_432_679_082,
    0.279_705_391_489_276_667_901_467_771_423_780,
    0.381_830_050_505_118_944_950_369_775_488_975,
    0.417_959_183_673_469_387_755_102_040_816_327,
];

#[derive(Debug, Clone, Copy)]
struct Segment {
    a: f64,
    b: f64,
    value: f64,
    error: f64,
    abs_mass: f64,
}

impl PartialEq for Segment {
    fn eq(&self, other: &Self) -> bool {
        self.error == other.error
    }
}
impl Eq for Segment {}
impl PartialOrd for Segment {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Segment {
    fn cmp(&self, other: &Self) -> Ordering {
        self.error.total_cmp(&other.error)
    }
}

fn kronrod<F>(f: &mut F, a: f64, b: f64) -> Result<Segment>
where
    F: FnMut(f64) -> Result<f64>,
{
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let mut eval = |x: f64| -> Result<f64> {
        let y = f(x)?;
        if y.is_finite() {
            Ok(y)
        } else {
            Err(Error::NonFinite { at: x })
        }
    };
    let fc = eval(center)?;
    let mut kronrod = fc * WGK[7];
    let mut gauss = fc * WG[3];
    let mut abs_mass = fc.abs() * WGK[7];
    let mut samples = [0.0f64; 15];
    samples[7] = fc;
    for j in 0..7 {
        let dx = half * XGK[j];
        let f1 = eval(center - dx)?;
        let f2 = eval(center + dx)?;
        samples[j] = f1;
        samples[14 - j] = f2;
        kronrod += WGK[j] * (f1 + f2);
        abs_mass += WGK[j] * (f1.abs() + f2.abs());
        if j % 2 == 1 {
            gauss += WG[j / 2] * (f1 + f2);
        }
    }
    let mean = 0.5 * kronrod;
    let mut asc = WGK[7] * (fc - mean).abs();
    for j in 0..7 {
        asc += WGK[j] * ((samples[j] - mean).abs() + (samples[14 - j] - mean).abs());
    }
    let value = kronrod * half;
    let abs_mass = abs_mass * half.abs();
    let asc = asc * half.abs();
    let mut error = ((kronrod - gauss) * half).abs();
    if asc != 0.0 && error != 0.0 {
        error = asc * (200.0 * error / asc).powf(1.5).min(1.0);
    }
    // Roundoff floor: no estimate can beat the precision of the samples themselves.
    error = error.max(50.0 * f64::EPSILON * abs_mass);
    Ok(Segment {
        a,
        b,
        value,
        error,
        abs_mass,
    })
}

/// Adaptive quadrature settings. Converged when the summed error estimate is below
/// `max(abs, rel * |I|)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Quadrature {
    pub rel: f64,
    pub abs: f64,
    pub max_intervals: usize,
}

impl Default for Quadrature {
    fn default() -> Self {
        Quadrature::relative(DEFAULT_TOL)
    }
}

impl Quadrature {
    /// Pure relative tolerance, limited only by roundoff.
    pub fn relative(rel: f64) -> Self {
        Quadrature {
            rel,
            abs: 0.0,
            max_intervals: 4000,
        }
    }

    /// The mixed criterion `tol * max(1, |I|)`.
    pub fn mixed(tol: f64) -> Self {
        Quadrature {
            rel: tol,
            abs: tol,
            max_intervals: 4000,
        }
    }

    pub fn try_integrate<F>(&self, mut f: F, a: f64, b: f64) -> Result<f64>
    where
        F: FnMut(f64) -> Result<f64>,
    {
        if a == b {
            return Ok(0.0);
        }
        if b < a {
            return self.try_integrate(f, b, a).map(|v| -v);
        }
        let first = kronrod(&mut f, a, b)?;
        let mut total = first.value;
        let mut total_err = first.error;
        let mut mass = first.abs_mass;
        let mut heap = BinaryHeap::new();
        heap.push(first);
        loop {
            let target = self.abs.max(self.rel * total.abs());
            let floor = 50.0 * f64::EPSILON * mass;
            if total_err <= target || total_err <= floor {
                return Ok(total);
            }
            if heap.len() >= self.max_intervals {
                break;
            }
            let worst = heap.pop().expect("heap is never empty here");
            let mid = 0.5 * (worst.a + worst.b);
            if mid <= worst.a || mid >= worst.b {
                heap.push(worst);
                break;
            }
            let left = kronrod(&mut f, worst.a, mid)?;
            let right = kronrod(&mut f, mid, worst.b)?;
            total += left.value + right.value - worst.value;
            total_err += left.error + right.error - worst.error;
            mass += left.abs_mass + right.abs_mass - worst.abs_mass;
            heap.push(left);
            heap.push(right);
        }
        // Re-sum to shed accumulated update drift before the final verdict.
        let total = compensated_sum(heap.iter().map(|s| s.value));
        let total_err: f64 = heap.iter().map(|s| s.error).sum();
        if total_err <= self.abs.max(self.rel * total.abs()) {
            return Ok(total);
        }
        Err(Error::ToleranceNotMet {
            a,
            b,
            estimate: total_err,
            intervals: heap.len(),
        })
    }

    pub fn integrate<F>(&self, mut f: F, a: f64, b: f64) -> Result<f64>
    where
        F: FnMut(f64) -> f64,
    {
        self.try_integrate(|x| Ok(f(x)), a, b)
    }

    /// Running integrals `∫_{nodes[0]}^{nodes[i]} f` at every node.
    pub fn cumulative<F>(&self, mut f: F, nodes: &[f64]) -> Result<Vec<f64>>
    where
        F: FnMut(f64) -> Result<f64>,
    {
        let mut acc = CompensatedSum::new();
        let mut out = Vec::with_capacity(nodes.len());
        out.push(0.0);
        for w in nodes.windows(2) {
            acc.add(self.try_integrate(&mut f, w[0], w[1])?);
            out.push(acc.value());
        }
        Ok(out)
    }
}

/// `∫_a^b f` with estimated error at most `tol * max(1, |I|)`.
pub fn integrate(f: &dyn RadialFunction, a: f64, b: f64, tol: f64) -> Result<f64> {
    Quadrature::mixed(tol).integrate(|r| f.eval(r), a, b)
}
