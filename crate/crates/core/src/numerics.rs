//! Scalar quadrature, bracketed root finding and grid tabulation.
//!
//! Quadrature is globally adaptive Gauss-Kronrod (7/15 points) with interval
//! bisection. The Kronrod nodes never touch the interval ends, so integrable
//! endpoint singularities such as `x^-0.5` converge without special casing.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use serde::{Deserialize, Serialize};

/// Errors raised by the numerical kernels.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum NumericsError {
    #[error("quadrature did not converge (estimate {estimate}, error bound {error})")]
    NonConvergence { estimate: f64, error: f64 },
    #[error("no sign change on [{lo}, {hi}]: f(lo)={flo}, f(hi)={fhi}")]
    NoSignChange { lo: f64, hi: f64, flo: f64, fhi: f64 },
    #[error("non-finite value {value} at x={x}")]
    NonFinite { x: f64, value: f64 },
    #[error("invalid quadrature spec: {0}")]
    InvalidSpec(String),
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
}

/// Tolerances for [`integrate`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QuadratureSpec {
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub max_depth: u32,
}

impl Default for QuadratureSpec {
    fn default() -> Self {
        Self { abs_tol: 1e-9, rel_tol: 1e-9, max_depth: 40 }
    }
}

impl QuadratureSpec {
    pub fn new(abs_tol: f64, rel_tol: f64, max_depth: u32) -> Result<Self, NumericsError> {
        let spec = Self { abs_tol, rel_tol, max_depth };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<(), NumericsError> {
        if !(self.abs_tol > 0.0) || !(self.rel_tol > 0.0) {
            return Err(NumericsError::InvalidSpec("tolerances must be positive".into()));
        }
        if self.max_depth < 10 {
            return Err(NumericsError::InvalidSpec("max_depth must be at least 10".into()));
        }
        Ok(())
    }

    /// Same spec with both tolerances replaced.
    pub fn with_tol(self, tol: f64) -> Self {
        Self { abs_tol: tol, rel_tol: tol, ..self }
    }
}

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_5,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_48,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_224,
    0.063_092_092_629_978_56,
    0.104_790_010_322_250_19,
    0.140_653_259_715_525_92,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_42,
    0.204_432_940_075_298_89,
    0.209_482_141_084_727_82,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_64,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

struct Panel {
    a: f64,
    b: f64,
    value: f64,
    error: f64,
    depth: u32,
}

impl PartialEq for Panel {
    fn eq(&self, other: &Self) -> bool {
        self.error == other.error
    }
}
impl Eq for Panel {}
impl PartialOrd for Panel {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Panel {
    fn cmp(&self, other: &Self) -> Ordering {
        self.error.total_cmp(&other.error)
    }
}

fn gauss_kronrod<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> Result<(f64, f64, f64), NumericsError> {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let eval = |x: f64| -> Result<f64, NumericsError> {
        let y = f(x);
        if y.is_finite() {
            Ok(y)
        } else {
            Err(NumericsError::NonFinite { x, value: y })
        }
    };
    let fc = eval(c)?;
    let mut kronrod = WGK[7] * fc;
    let mut gauss = WG[3] * fc;
    let mut abs_sum = WGK[7] * fc.abs();
    for j in 0..7 {
        let dx = h * XGK[j];
        let f1 = eval(c - dx)?;
        let f2 = eval(c + dx)?;
        kronrod += WGK[j] * (f1 + f2);
        abs_sum += WGK[j] * (f1.abs() + f2.abs());
        if j % 2 == 1 {
            gauss += WG[j / 2] * (f1 + f2);
        }
    }
    let value = kronrod * h;
    let error = ((kronrod - gauss) * h).abs();
    Ok((value, error, abs_sum * h.abs()))
}

/// Integrates `f` over `[a, b]` to within `max(abs_tol, rel_tol*|I|)`.
///
/// On failure the error carries the partial estimate.
pub fn integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, spec: &QuadratureSpec) -> Result<f64, NumericsError> {
    if a == b {
        return Ok(0.0);
    }
    if a > b {
        return integrate(f, b, a, spec).map(|v| -v);
    }
    let (value, error, abs_value) = gauss_kronrod(&f, a, b)?;
    let roundoff = 50.0 * f64::EPSILON;
    let mut heap = BinaryHeap::new();
    let mut total = value;
    let mut total_err = if error <= roundoff * abs_value { 0.0 } else { error };
    heap.push(Panel { a, b, value, error: total_err, depth: 0 });
    let max_panels = 20_000;
    while total_err > spec.abs_tol.max(spec.rel_tol * total.abs()) {
        let worst = heap.pop().expect("heap holds at least one panel");
        if worst.depth >= spec.max_depth || heap.len() >= max_panels {
            return Err(NumericsError::NonConvergence { estimate: total, error: total_err });
        }
        let mid = 0.5 * (worst.a + worst.b);
        let (v1, e1, s1) = gauss_kronrod(&f, worst.a, mid)?;
        let (v2, e2, s2) = gauss_kronrod(&f, mid, worst.b)?;
        let e1 = if e1 <= roundoff * s1 { 0.0 } else { e1 };
        let e2 = if e2 <= roundoff * s2 { 0.0 } else { e2 };
        total += v1 + v2 - worst.value;
        total_err += e1 + e2 - worst.error;
        heap.push(Panel { a: worst.a, b: mid, value: v1, error: e1, depth: worst.depth + 1 });
        heap.push(Panel { a: mid, b: worst.b, value: v2, error: e2, depth: worst.depth + 1 });
        if total_err < 0.0 {
            total_err = heap.iter().map(|p| p.error).sum();
        }
    }
    Ok(total)
}

/// Integrates over `[a, b]`, splitting at every break point strictly inside.
pub fn integrate_with_breaks<F: Fn(f64) -> f64>(
    f: F,
    a: f64,
    b: f64,
    breaks: &[f64],
    spec: &QuadratureSpec,
) -> Result<f64, NumericsError> {
    let mut points: Vec<f64> = breaks.iter().copied().filter(|&x| x > a && x < b).collect();
    points.sort_by(f64::total_cmp);
    points.dedup();
    let mut lo = a;
    let mut sum = 0.0;
    for hi in points.into_iter().chain(std::iter::once(b)) {
        sum += integrate(&f, lo, hi, spec)?;
        lo = hi;
    }
    Ok(sum)
}

/// Finds a root of `f` on `[lo, hi]` by Illinois false position with forced
/// bisection steps.
///
/// Stops when `|f(x)| <= tol` or the bracket is narrower than `tol`.
pub fn find_root<F: Fn(f64) -> f64>(f: F, lo: f64, hi: f64, tol: f64) -> Result<f64, NumericsError> {
    let (mut a, mut b) = if lo <= hi { (lo, hi) } else { (hi, lo) };
    let mut fa = f(a);
    let mut fb = f(b);
    for (x, y) in [(a, fa), (b, fb)] {
        if !y.is_finite() {
            return Err(NumericsError::NonFinite { x, value: y });
        }
    }
    if fa == 0.0 {
        return Ok(a);
    }
    if fb == 0.0 {
        return Ok(b);
    }
    if fa.signum() == fb.signum() {
        return Err(NumericsError::NoSignChange { lo: a, hi: b, flo: fa, fhi: fb });
    }
    let mut side = 0i8;
    for iter in 0..400 {
        let width = b - a;
        let mut x = if iter % 3 == 2 { 0.5 * (a + b) } else { (a * fb - b * fa) / (fb - fa) };
        if !(x > a && x < b) {
            x = 0.5 * (a + b);
        }
        let fx = f(x);
        if !fx.is_finite() {
            return Err(NumericsError::NonFinite { x, value: fx });
        }
        if fx.abs() <= tol || width <= tol {
            return Ok(x);
        }
        if fx.signum() == fb.signum() {
            b = x;
            fb = fx;
            if side == -1 {
                fa *= 0.5;
            }
            side = -1;
        } else {
            a = x;
            fa = fx;
            if side == 1 {
                fb *= 0.5;
            }
            side = 1;
        }
        if b - a <= tol {
            return Ok(0.5 * (a + b));
        }
    }
    Ok(0.5 * (a + b))
}

/// Grid-sampled function on `[0, 1]` with piecewise-cubic Hermite interpolation.
///
/// Node slopes are fourth-order finite differences. When the monotone flag is
/// set they are clipped so that no interval overshoots its end values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TabulatedFunction {
    grid: Vec<f64>,
    values: Vec<f64>,
    slopes: Vec<f64>,
    monotone: bool,
}

impl TabulatedFunction {
    /// Builds from explicit samples. The grid must run from 0 to 1 strictly increasing.
    pub fn from_samples(grid: Vec<f64>, values: Vec<f64>, monotone: bool) -> Result<Self, NumericsError> {
        if grid.len() != values.len() || grid.len() < 2 {
            return Err(NumericsError::InvalidGrid("grid and values must have equal length >= 2".into()));
        }
        if grid[0] != 0.0 || *grid.last().unwrap() != 1.0 {
            return Err(NumericsError::InvalidGrid("grid must start at 0 and end at 1".into()));
        }
        if grid.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(NumericsError::InvalidGrid("grid must be strictly increasing".into()));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(NumericsError::NonFinite { x: grid[i], value: values[i] });
        }
        let monotone = monotone && is_monotone(&values);
        let slopes = node_slopes(&grid, &values, monotone);
        Ok(Self { grid, values, slopes, monotone })
    }

    pub fn grid(&self) -> &[f64] {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn is_monotone(&self) -> bool {
        self.monotone
    }

    fn locate(&self, x: f64) -> (usize, f64, f64) {
        let n = self.grid.len();
        let i = self.grid.partition_point(|&g| g <= x).clamp(1, n - 1) - 1;
        let h = self.grid[i + 1] - self.grid[i];
        (i, h, (x - self.grid[i]) / h)
    }

    /// Interpolated value; arguments outside `[0, 1]` are clamped.
    pub fn eval(&self, x: f64) -> f64 {
        let x = x.clamp(0.0, 1.0);
        let (i, h, t) = self.locate(x);
        if t == 0.0 {
            return self.values[i];
        }
        if t == 1.0 {
            return self.values[i + 1];
        }
        let t2 = t * t;
        let t3 = t2 * t;
        let h00 = 2.0 * t3 - 3.0 * t2 + 1.0;
        let h10 = t3 - 2.0 * t2 + t;
        let h01 = -2.0 * t3 + 3.0 * t2;
        let h11 = t3 - t2;
        h00 * self.values[i] + h10 * h * self.slopes[i] + h01 * self.values[i + 1] + h11 * h * self.slopes[i + 1]
    }

    /// Derivative of the interpolant.
    pub fn derivative(&self, x: f64) -> f64 {
        let x = x.clamp(0.0, 1.0);
        let (i, h, t) = self.locate(x);
        let t2 = t * t;
        let d00 = 6.0 * t2 - 6.0 * t;
        let d10 = 3.0 * t2 - 4.0 * t + 1.0;
        let d01 = -6.0 * t2 + 6.0 * t;
        let d11 = 3.0 * t2 - 2.0 * t;
        (d00 * self.values[i] + d01 * self.values[i + 1]) / h + d10 * self.slopes[i] + d11 * self.slopes[i + 1]
    }
}

fn is_monotone(values: &[f64]) -> bool {
    values.windows(2).all(|w| w[1] >= w[0]) || values.windows(2).all(|w| w[1] <= w[0])
}

fn node_slopes(x: &[f64], y: &[f64], monotone: bool) -> Vec<f64> {
    let n = x.len();
    let delta: Vec<f64> = (0..n - 1).map(|i| (y[i + 1] - y[i]) / (x[i + 1] - x[i])).collect();
    if n == 2 {
        return vec![delta[0]; 2];
    }
    let mut d = vec![0.0; n];
    for i in 0..n {
        d[i] = if n >= 5 {
            // Derivative at x[i] of the quartic through five neighbouring nodes.
            let s = i.saturating_sub(2).min(n - 5);
            lagrange_derivative(&x[s..s + 5], &y[s..s + 5], x[i])
        } else {
            let s = i.saturating_sub(1).min(n - 3);
            lagrange_derivative(&x[s..s + 3], &y[s..s + 3], x[i])
        };
    }
    if monotone {
        let sign = if y[n - 1] >= y[0] { 1.0 } else { -1.0 };
        for i in 0..n {
            let left = if i > 0 { sign * delta[i - 1] } else { f64::INFINITY };
            let right = if i < n - 1 { sign * delta[i] } else { f64::INFINITY };
            let cap = 3.0 * left.min(right);
            d[i] = sign * (sign * d[i]).clamp(0.0, cap.max(0.0));
        }
    }
    d
}

fn lagrange_derivative(xs: &[f64], ys: &[f64], at: f64) -> f64 {
    let k = xs.len();
    let mut total = 0.0;
    for j in 0..k {
        let mut denom = 1.0;
        for m in 0..k {
            if m != j {
                denom *= xs[j] - xs[m];
            }
        }
        let mut numer = 0.0;
        for skip in 0..k {
            if skip == j {
                continue;
            }
            let mut prod = 1.0;
            for m in 0..k {
                if m != j && m != skip {
                    prod *= at - xs[m];
                }
            }
            numer += prod;
        }
        total += ys[j] * numer / denom;
    }
    total
}

/// Uniform grid of `npoints` abscissae on `[0, 1]`.
pub fn uniform_grid(npoints: usize) -> Vec<f64> {
    let last = (npoints - 1) as f64;
    let mut g: Vec<f64> = (0..npoints).map(|i| i as f64 / last).collect();
    g[npoints - 1] = 1.0;
    g
}

/// Samples `f` on a uniform grid and wraps the samples in a [`TabulatedFunction`].
pub fn tabulate<F: Fn(f64) -> f64>(f: F, npoints: usize, monotone: bool) -> Result<TabulatedFunction, NumericsError> {
    if npoints < 33 {
        return Err(NumericsError::InvalidGrid("tabulation needs at least 33 points".into()));
    }
    let grid = uniform_grid(npoints);
    let mut values = Vec::with_capacity(npoints);
    for &x in &grid {
        let y = f(x);
        if !y.is_finite() {
            return Err(NumericsError::NonFinite { x, value: y });
        }
        values.push(y);
    }
    TabulatedFunction::from_samples(grid, values, monotone)
}

/// Binomial coefficient as a float.
pub fn binom(n: usize, k: usize) -> f64 {
    if k > n {
        return 0.0;
    }
    let k = k.min(n - k);
    let mut r = 1.0;
    for i in 0..k {
        r = r * (n - i) as f64 / (i + 1) as f64;
    }
    r.round()
}
