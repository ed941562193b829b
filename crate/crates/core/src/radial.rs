//! Radial functions of `r >= 0` and sampled grids.

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::jet::Jet;

/// A scalar function of the radius carrying exact first and second derivatives.
pub trait RadialFunction: Send + Sync {
    fn try_jet(&self, r: f64) -> Result<Jet>;

    /// Exclusive upper end of the half-open domain `[0, end)`.
    fn domain_end(&self) -> f64 {
        f64::INFINITY
    }

    /// Like [`try_jet`](Self::try_jet) but maps evaluation errors to NaN so they
    /// surface as `NonFinite` in downstream kernels.
    fn jet(&self, r: f64) -> Jet {
        self.try_jet(r)
            .unwrap_or(Jet::new(f64::NAN, f64::NAN, f64::NAN))
    }

    fn eval(&self, r: f64) -> f64 {
        self.jet(r).value
    }

    fn deriv(&self, r: f64) -> f64 {
        self.jet(r).d1
    }

    fn deriv2(&self, r: f64) -> f64 {
        self.jet(r).d2
    }
}

pub type Radial = Arc<dyn RadialFunction>;

/// Radial function defined by a closure over jets, e.g. `JetFn::new(|x| x.sinh())`.
pub struct JetFn<F> {
    f: F,
    end: f64,
}

impl<F> JetFn<F>
where
    F: Fn(Jet) -> Jet + Send + Sync,
{
    pub fn new(f: F) -> Self {
        JetFn {
            f,
            end: f64::INFINITY,
        }
    }

    pub fn with_domain_end(mut self, end: f64) -> Self {
        self.end = end;
        self
    }
}

impl<F> RadialFunction for JetFn<F>
where
    F: Fn(Jet) -> Jet + Send + Sync,
{
    fn try_jet(&self, r: f64) -> Result<Jet> {
        Ok((self.f)(Jet::variable(r)))
    }

    fn domain_end(&self) -> f64 {
        self.end
    }
}

pub fn radial<F>(f: F) -> Radial
where
    F: Fn(Jet) -> Jet + Send + Sync + 'static,
{
    Arc::new(JetFn::new(f))
}

pub fn constant(c: f64) -> Radial {
    radial(move |_| Jet::constant(c))
}

/// Default number of grid nodes.
pub const DEFAULT_NODES: usize = 512;

/// Strictly increasing nodes with aligned values.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    nodes: Vec<f64>,
    values: Vec<f64>,
}

impl Grid {
    pub fn new(nodes: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if nodes.len() < 2 || nodes.len() != values.len() {
            return Err(Error::InvalidProfile(format!(
                "grid needs at least 2 aligned nodes, got {} nodes and {} values",
                nodes.len(),
                values.len()
            )));
        }
        if let Some(w) = nodes.windows(2).find(|w| w[1] <= w[0]) {
            return Err(Error::InvalidProfile(format!(
                "grid nodes not strictly increasing at {}",
                w[1]
            )));
        }
        Ok(Grid { nodes, values })
    }

    /// `n` nodes on `[0, end]`, geometrically clustered toward the pole.
    pub fn clustered_nodes(end: f64, n: usize) -> Vec<f64> {
        const ALPHA: f64 = 10.0;
        let n = n.max(2);
        let denom = ALPHA.exp_m1();
        let mut nodes: Vec<f64> = (0..n)
            .map(|i| end * (ALPHA * i as f64 / (n - 1) as f64).exp_m1() / denom)
            .collect();
        nodes[n - 1] = end;
        nodes
    }

    /// Clustered nodes refined so that no interval is longer than `end / 20000` or
    /// `0.02`, whichever is larger. Used for interpolation tables.
    pub fn table_nodes(end: f64) -> Vec<f64> {
        let h_max = (end / 20000.0).max(0.02);
        let base = Grid::clustered_nodes(end, DEFAULT_NODES);
        let mut nodes = vec![base[0]];
        for w in base.windows(2) {
            let pieces = ((w[1] - w[0]) / h_max).ceil().max(1.0) as usize;
            for k in 1..pieces {
                nodes.push(w[0] + (w[1] - w[0]) * k as f64 / pieces as f64);
            }
            nodes.push(w[1]);
        }
        nodes
    }

    pub fn uniform_nodes(a: f64, b: f64, n: usize) -> Vec<f64> {
        let n = n.max(2);
        let mut nodes: Vec<f64> = (0..n)
            .map(|i| a + (b - a) * i as f64 / (n - 1) as f64)
            .collect();
        nodes[n - 1] = b;
        nodes
    }

    pub fn sample(nodes: Vec<f64>, mut f: impl FnMut(f64) -> Result<f64>) -> Result<Self> {
        let values = nodes.iter().map(|&r| f(r)).collect::<Result<Vec<_>>>()?;
        Grid::new(nodes, values)
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.nodes.iter().copied().zip(self.values.iter().copied())
    }
}

/// Index `i` with `nodes[i] <= x <= nodes[i+1]`, clamped to the table.
pub(crate) fn locate(nodes: &[f64], x: f64) -> usize {
    let last = nodes.len() - 2;
    match nodes.binary_search_by(|n| n.partial_cmp(&x).unwrap_or(std::cmp::Ordering::Less)) {
        Ok(i) => i.min(last),
        Err(0) => 0,
        Err(i) => (i - 1).min(last),
    }
}

// Quintic Hermite basis on [0, 1] as ascending polynomial coefficients:
// value, slope, curvature at the left node, then curvature, slope, value at the right.
const QUINTIC: [[f64; 6]; 6] = [
    [1.0, 0.0, 0.0, -10.0, 15.0, -6.0],
    [0.0, 1.0, 0.0, -6.0, 8.0, -3.0],
    [0.0, 0.0, 0.5, -1.5, 1.5, -0.5],
    [0.0, 0.0, 0.0, 0.5, -1.0, 0.5],
    [0.0, 0.0, 0.0, -4.0, 7.0, -3.0],
    [0.0, 0.0, 0.0, 10.0, -15.0, 6.0],
];

fn poly_jet(c: &[f64; 6], t: f64) -> (f64, f64, f64) {
    let mut v = 0.0;
    let mut d1 = 0.0;
    let mut d2 = 0.0;
    for k in (0..6).rev() {
        d2 = d2 * t + 2.0 * d1;
        d1 = d1 * t + v;
        v = v * t + c[k];
    }
    (v, d1, d2)
}

/// Piecewise quintic Hermite interpolant through nodal values, slopes and curvatures.
///
/// Sixth-order accurate in the node spacing, so a few hundred nodes reproduce smooth
/// profiles to near machine precision.
#[derive(Clone)]
pub struct HermiteTable {
    nodes: Vec<f64>,
    jets: Vec<Jet>,
}

impl fmt::Debug for HermiteTable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("HermiteTable")
            .field("nodes", &self.nodes.len())
            .field("start", &self.nodes.first())
            .field("end", &self.nodes.last())
            .finish()
    }
}

impl HermiteTable {
    pub fn new(nodes: Vec<f64>, jets: Vec<Jet>) -> Result<Self> {
        Grid::new(nodes.clone(), jets.iter().map(|j| j.value).collect())?;
        Ok(HermiteTable { nodes, jets })
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn start(&self) -> f64 {
        self.nodes[0]
    }

    pub fn end(&self) -> f64 {
        *self.nodes.last().expect("non-empty table")
    }

    pub fn interpolate(&self, x: f64) -> Jet {
        let i = locate(&self.nodes, x);
        let (x0, x1) = (self.nodes[i], self.nodes[i + 1]);
        let h = x1 - x0;
        let t = (x - x0) / h;
        let (a, b) = (self.jets[i], self.jets[i + 1]);
        let weights = [
            a.value,
            h * a.d1,
            h * h * a.d2,
            h * h * b.d2,
            h * b.d1,
            b.value,
        ];
        let mut out = Jet::default();
        for (c, wgt) in QUINTIC.iter().zip(weights) {
            let (v, d1, d2) = poly_jet(c, t);
            out.value += wgt * v;
            out.d1 += wgt * d1;
            out.d2 += wgt * d2;
        }
        out.d1 /= h;
        out.d2 /= h * h;
        out
    }
}

/// Natural cubic spline through a sampled table, used for tabulated warping functions.
#[derive(Debug, Clone)]
pub struct CubicSpline {
    nodes: Vec<f64>,
    values: Vec<f64>,
    second: Vec<f64>,
}

impl CubicSpline {
    pub fn new(grid: &Grid) -> Self {
        let x = grid.nodes();
        let y = grid.values();
        let n = x.len();
        let mut second = vec![0.0; n];
        let mut u = vec![0.0; n];
        for i in 1..n - 1 {
            let sig = (x[i] - x[i - 1]) / (x[i + 1] - x[i - 1]);
            let p = sig * second[i - 1] + 2.0;
            second[i] = (sig - 1.0) / p;
            let slope = (y[i + 1] - y[i]) / (x[i + 1] - x[i]) - (y[i] - y[i - 1]) / (x[i] - x[i - 1]);
            u[i] = (6.0 * slope / (x[i + 1] - x[i - 1]) - sig * u[i - 1]) / p;
        }
        second[n - 1] = 0.0;
        for k in (0..n - 1).rev() {
            second[k] = second[k] * second[k + 1] + u[k];
        }
        CubicSpline {
            nodes: x.to_vec(),
            values: y.to_vec(),
            second,
        }
    }
}

impl RadialFunction for CubicSpline {
    fn try_jet(&self, r: f64) -> Result<Jet> {
        let i = locate(&self.nodes, r);
        let (x0, x1) = (self.nodes[i], self.nodes[i + 1]);
        let h = x1 - x0;
        let a = (x1 - r) / h;
        let b = (r - x0) / h;
        let (y0, y1) = (self.values[i], self.values[i + 1]);
        let (m0, m1) = (self.second[i], self.second[i + 1]);
        let value = a * y0 + b * y1 + ((a * a * a - a) * m0 + (b * b * b - b) * m1) * h * h / 6.0;
        let d1 = (y1 - y0) / h - (3.0 * a * a - 1.0) / 6.0 * h * m0 + (3.0 * b * b - 1.0) / 6.0 * h * m1;
        let d2 = a * m0 + b * m1;
        Ok(Jet::new(value, d1, d2))
    }

    fn domain_end(&self) -> f64 {
        *self.nodes.last().expect("spline has nodes")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_rejects_unordered_or_short_input() {
        assert!(Grid::new(vec![0.0], vec![1.0]).is_err());
        assert!(Grid::new(vec![0.0, 0.0], vec![1.0, 1.0]).is_err());
        assert!(Grid::new(vec![0.0, 1.0], vec![1.0]).is_err());
        assert!(Grid::new(vec![0.0, 1.0], vec![1.0, 2.0]).is_ok());
    }

    #[test]
    fn clustered_nodes_reach_close_to_the_pole() {
        let nodes = Grid::clustered_nodes(1.0, 512);
        assert_eq!(nodes.len(), 512);
        assert_eq!(nodes[0], 0.0);
        assert_eq!(nodes[511], 1.0);
        assert!(nodes[1] < 1e-5);
        assert!(nodes.windows(2).all(|w| w[1] > w[0]));
    }

    #[test]
    fn quintic_hermite_reproduces_quintics() {
        let p = |x: f64| Jet::variable(x).powi(5) * 0.3 - Jet::variable(x).powi(2) + 1.0;
        let nodes = vec![0.0, 0.7, 1.5, 3.0];
        let jets = nodes.iter().map(|&x| p(x)).collect();
        let table = HermiteTable::new(nodes, jets).unwrap();
        for &x in &[0.1, 0.69, 1.2, 2.9] {
            let got = table.interpolate(x);
            let want = p(x);
            assert!((got.value - want.value).abs() < 1e-12);
            assert!((got.d1 - want.d1).abs() < 1e-11);
            assert!((got.d2 - want.d2).abs() < 1e-10);
        }
    }

    #[test]
    fn cubic_spline_interpolates_and_is_exact_on_lines() {
        let nodes = Grid::uniform_nodes(0.0, 2.0, 9);
        let grid = Grid::sample(nodes, |r| Ok(3.0 * r - 1.0)).unwrap();
        let s = CubicSpline::new(&grid);
        let j = s.jet(1.1);
        assert!((j.value - 2.3).abs() < 1e-12);
        assert!((j.d1 - 3.0).abs() < 1e-12);
        assert!(j.d2.abs() < 1e-12);
    }
}
