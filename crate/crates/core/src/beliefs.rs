//! Admission probability, posterior normalizer, order-statistic laws and the
//! win kernel `H`/`h` of the equivalent symmetric game.
//!
//! Every quantity is a one-dimensional integral over the signal quantile
//! `u` against `dmu(u) = (m-n) u^(m-n-1) du`. Internally functions take
//! valuation quantiles `q = F1(x)`; the public methods take valuations.
//! Densities in `x` factor as `f1(x)` times a function of `q`, and the
//! `*_q` forms return that second factor.

use std::sync::{Arc, OnceLock};

use serde::{Deserialize, Serialize};

use crate::numerics::{binom, integrate, integrate_with_breaks, tabulate, uniform_grid, NumericsError, QuadratureSpec, TabulatedFunction};
use crate::predictors::Predictor;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum BeliefsError {
    #[error("need 2 <= n <= m, got m={m}, n={n}")]
    Counts { m: usize, n: usize },
    #[error("rank k={k} outside [1, {n}]")]
    Rank { k: usize, n: usize },
    #[error("closed-form backend needs a comonotonic/independence mixture copula")]
    BackendUnsupported,
    #[error("expected {expected} valuations, got {got}")]
    Dimension { expected: usize, got: usize },
    #[error("reverse hazard rate has a pole at x=0")]
    Pole,
    #[error("grid size must be at least 33, got {0}")]
    GridSize(usize),
    #[error("log win probability diverges faster than logarithmically near 0 (k={0})")]
    NonIntegrable(f64),
    #[error(transparent)]
    Numerics(#[from] NumericsError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum Backend {
    #[default]
    Generic,
    ClosedForm,
}

impl std::fmt::Display for Backend {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Backend::Generic => "generic",
            Backend::ClosedForm => "closed-form",
        })
    }
}

/// CDF of the k-th largest admitted valuation (k = 1 is the maximum).
#[derive(Debug, Clone)]
pub struct OrderStatCdf {
    pub k: usize,
    pub cdf: TabulatedFunction,
}

/// `log` of the integrated reverse hazard rate on the quantile scale,
/// stored as `k ln q + R(q)` with `R` smooth and `R(0) = 0`.
#[derive(Debug, Clone)]
pub struct CumulativeRhr {
    pub k: f64,
    pub remainder: TabulatedFunction,
}

impl CumulativeRhr {
    /// `Lambda(p) - Lambda(q)` for quantiles `p, q > 0`.
    pub fn diff(&self, p: f64, q: f64) -> f64 {
        self.remainder.eval(p) - self.remainder.eval(q) + self.k * (p / q).ln()
    }
}

#[derive(Debug, Default)]
struct Caches {
    kappa: OnceLock<Result<TabulatedFunction, BeliefsError>>,
    marginal: OnceLock<Result<TabulatedFunction, BeliefsError>>,
    largest: OnceLock<Result<TabulatedFunction, BeliefsError>>,
    second: OnceLock<Result<TabulatedFunction, BeliefsError>>,
    rhr: OnceLock<Result<CumulativeRhr, BeliefsError>>,
}

/// One prescreened auction instance: `m` bidders, top `n` admitted.
#[derive(Debug, Clone)]
pub struct GameSetup {
    pub m: usize,
    pub n: usize,
    pub predictor: Arc<Predictor>,
    pub backend: Backend,
    pub quad: QuadratureSpec,
    pub grid_size: usize,
    gamma: Option<f64>,
    kinks: bool,
    caches: Arc<Caches>,
}

/// Near-zero clamp for the own-valuation quantile where `kappa` blows up.
const P_FLOOR: f64 = 1e-12;
const RHR_EPS: f64 = 1e-6;

#[derive(Clone, Copy)]
struct Lin(f64, f64);

fn poly_mul(p: &[f64], l: Lin) -> Vec<f64> {
    let mut out = vec![0.0; p.len() + 1];
    for (i, &c) in p.iter().enumerate() {
        out[i] += c * l.0;
        out[i + 1] += c * l.1;
    }
    out
}

fn poly_integral(p: &[f64], lo: f64, hi: f64) -> f64 {
    let mut s = 0.0;
    let mut hp = hi;
    let mut lp = lo;
    for (i, &c) in p.iter().enumerate() {
        s += c * (hp - lp) / (i + 1) as f64;
        hp *= hi;
        lp *= lo;
    }
    s
}

impl GameSetup {
    pub fn new(m: usize, n: usize, predictor: Arc<Predictor>, backend: Backend) -> Result<Self, BeliefsError> {
        Self::with_options(m, n, predictor, backend, QuadratureSpec::default(), 1025)
    }

    pub fn with_options(
        m: usize,
        n: usize,
        predictor: Arc<Predictor>,
        backend: Backend,
        quad: QuadratureSpec,
        grid_size: usize,
    ) -> Result<Self, BeliefsError> {
        if n < 2 || n > m {
            return Err(BeliefsError::Counts { m, n });
        }
        if grid_size < 33 {
            return Err(BeliefsError::GridSize(grid_size));
        }
        quad.validate()?;
        let gamma = predictor.copula.hallucinatory_weight();
        if backend == Backend::ClosedForm && gamma.is_none() {
            return Err(BeliefsError::BackendUnsupported);
        }
        let kinks = predictor.copula.has_kinks();
        Ok(Self { m, n, predictor, backend, quad, grid_size, gamma, kinks, caches: Arc::default() })
    }

    /// Same predictor and options with a different admitted count.
    pub fn with_n(&self, n: usize) -> Result<Self, BeliefsError> {
        Self::with_options(self.m, n, self.predictor.clone(), self.backend, self.quad, self.grid_size)
    }

    pub fn with_backend(&self, backend: Backend) -> Result<Self, BeliefsError> {
        Self::with_options(self.m, self.n, self.predictor.clone(), backend, self.quad, self.grid_size)
    }

    fn iid(&self) -> bool {
        self.n == self.m
    }

    fn closed(&self) -> Option<f64> {
        match self.backend {
            Backend::ClosedForm => self.gamma,
            Backend::Generic => None,
        }
    }

    pub fn f1(&self, x: f64) -> f64 {
        self.predictor.f1.cdf(x)
    }

    pub fn pdf1(&self, x: f64) -> f64 {
        self.predictor.f1.pdf(x)
    }

    pub fn quantile1(&self, q: f64) -> f64 {
        self.predictor.f1.quantile(q)
    }

    // ---- kernels on the quantile scale ----

    fn small_a(&self, p: f64, u: f64) -> f64 {
        1.0 - self.predictor.copula.partials(p, u).1
    }

    fn big_a(&self, q: f64, u: f64) -> f64 {
        (q - self.predictor.copula.partials(q, u).0).max(0.0)
    }

    fn mu_integral<F: Fn(f64) -> f64>(&self, f: F, breaks: &[f64]) -> Result<f64, BeliefsError> {
        let s = (self.m - self.n) as f64;
        let e = (self.m - self.n - 1) as i32;
        let brk: &[f64] = if self.kinks { breaks } else { &[] };
        Ok(integrate_with_breaks(|u| f(u) * s * u.powi(e), 0.0, 1.0, brk, &self.quad)?)
    }

    /// Exact integral of a product of linear factors in `u` against `dmu`.
    /// `factors(u_mid)` returns the factors valid on the piece containing `u_mid`.
    fn mu_poly<F: Fn(f64) -> Vec<(Lin, usize)>>(&self, factors: F, breaks: &[f64]) -> f64 {
        let s = (self.m - self.n) as f64;
        let e = self.m - self.n - 1;
        let mut pts: Vec<f64> = breaks.iter().copied().filter(|&b| b > 0.0 && b < 1.0).collect();
        pts.push(0.0);
        pts.push(1.0);
        pts.sort_by(f64::total_cmp);
        pts.dedup();
        let mut total = 0.0;
        for w in pts.windows(2) {
            let mut poly = vec![0.0; e + 1];
            poly[e] = s;
            for (lin, power) in factors(0.5 * (w[0] + w[1])) {
                for _ in 0..power {
                    poly = poly_mul(&poly, lin);
                }
            }
            total += poly_integral(&poly, w[0], w[1]);
        }
        total
    }

    fn lin_a(gamma: f64, p: f64, u: f64) -> Lin {
        if u < p {
            Lin(1.0, -(1.0 - gamma))
        } else {
            Lin(1.0 - gamma, -(1.0 - gamma))
        }
    }

    fn lin_big_a(gamma: f64, q: f64, u: f64) -> Lin {
        if u < q {
            Lin(q, -(gamma + (1.0 - gamma) * q))
        } else {
            Lin((1.0 - gamma) * q, -(1.0 - gamma) * q)
        }
    }

    /// `1/kappa` at own quantile `p`.
    pub fn inv_kappa_q(&self, p: f64) -> Result<f64, BeliefsError> {
        if self.iid() {
            return Ok(1.0);
        }
        let (m, n) = (self.m, self.n);
        if let Some(g) = self.closed() {
            let mut s = 0.0;
            for j in 0..n {
                let sign = if j % 2 == 0 { 1.0 } else { -1.0 };
                s += sign * binom(n - 1, j) / (m - n + j) as f64 * p.powi((m - n + j) as i32);
            }
            return Ok((1.0 - g) / binom(m, n) + (m - n) as f64 * g * s);
        }
        let e = (n - 1) as i32;
        self.mu_integral(|u| self.small_a(p, u) * (1.0 - u).powi(e), &[p])
    }

    /// Admission probability for admitted quantiles `ps`.
    pub fn psi_q(&self, ps: &[f64]) -> Result<f64, BeliefsError> {
        if ps.len() != self.n {
            return Err(BeliefsError::Dimension { expected: self.n, got: ps.len() });
        }
        if self.iid() {
            return Ok(1.0);
        }
        let (m, n) = (self.m, self.n);
        if let Some(g) = self.closed() {
            let mut sorted = ps.to_vec();
            sorted.sort_by(f64::total_cmp);
            let mn = (m - n) as f64;
            let mut total = (1.0 - g).powi(n as i32) / binom(m, n);
            for k in 1..=n {
                let f = sorted[k - 1];
                let fm = f.powi((m - n) as i32);
                if k < n {
                    let mut outer = 0.0;
                    for j in 1..=n - k {
                        let mut inner = 0.0;
                        for i in 0..=n - j {
                            let sign = if i % 2 == 0 { 1.0 } else { -1.0 };
                            inner += sign * binom(n - j, i) / (m - n + i) as f64 * f.powi(i as i32);
                        }
                        outer += binom(n - k, j - 1) * g.powi(j as i32) * (1.0 - g).powi((n - j) as i32) * inner;
                    }
                    total += mn * fm * outer;
                }
                let mut inner = 0.0;
                for j in 0..k {
                    let sign = if j % 2 == 0 { 1.0 } else { -1.0 };
                    inner += sign * binom(k - 1, j) / (m - n + j) as f64 * f.powi(j as i32);
                }
                total += mn * g.powi((n - k + 1) as i32) * (1.0 - g).powi((k - 1) as i32) * fm * inner;
            }
            return Ok(total);
        }
        self.mu_integral(|u| ps.iter().map(|&p| self.small_a(p, u)).product(), ps)
    }

    /// Marginal CDF of one admitted valuation, at quantile `q`.
    pub fn marginal_q(&self, q: f64) -> Result<f64, BeliefsError> {
        if self.iid() {
            return Ok(q);
        }
        let (m, n) = (self.m, self.n);
        if let Some(g) = self.closed() {
            let mut s = 0.0;
            for i in 0..n {
                let sign = if i % 2 == 0 { 1.0 } else { -1.0 };
                let d = ((m - n + i) * (m - n + i + 1)) as f64;
                s += sign * binom(n - 1, i) / d * q.powi((m - n + i + 1) as i32);
            }
            return Ok((1.0 - g) * q + (m - n) as f64 * binom(m, n) * g * s);
        }
        let e = (n - 1) as i32;
        Ok(binom(m, n) * self.mu_integral(|u| self.big_a(q, u) * (1.0 - u).powi(e), &[q])?)
    }

    /// CDF of the k-th largest admitted valuation, at quantile `q`.
    pub fn kth_q(&self, k: usize, q: f64) -> Result<f64, BeliefsError> {
        let (m, n) = (self.m, self.n);
        if k < 1 || k > n {
            return Err(BeliefsError::Rank { k, n });
        }
        if self.iid() {
            return Ok((0..k).map(|i| binom(n, i) * q.powi((n - i) as i32) * (1.0 - q).powi(i as i32)).sum());
        }
        if let Some(g) = self.closed() {
            if k == 1 {
                let mn = (m - n) as f64;
                let lead = (1.0 - g).powi(n as i32);
                let mut s = 0.0;
                for i in 0..=n {
                    let sign = if i % 2 == 0 { 1.0 } else { -1.0 };
                    let bracket = (g + (1.0 - g) * q).powi(i as i32) - lead * q.powi(i as i32);
                    s += binom(n, i) * sign / (m - n + i) as f64 * bracket;
                }
                return Ok(lead * q.powi(n as i32) + mn * binom(m, n) * q.powi(m as i32) * s);
            }
            let mut total = 0.0;
            for i in 0..k {
                let part = self.mu_poly(
                    |u| {
                        let a = Self::lin_big_a(g, q, u);
                        vec![(a, n - i), (Lin(1.0 - a.0, -1.0 - a.1), i)]
                    },
                    &[q],
                );
                total += binom(n, i) * part;
            }
            return Ok(binom(m, n) * total);
        }
        let val = self.mu_integral(
            |u| {
                let a = self.big_a(q, u);
                let rest = (1.0 - u - a).max(0.0);
                (0..k).map(|i| binom(n, i) * a.powi((n - i) as i32) * rest.powi(i as i32)).sum::<f64>()
            },
            &[q],
        )?;
        Ok(binom(m, n) * val)
    }

    fn own_p(&self, p: f64) -> f64 {
        p.max(P_FLOOR)
    }

    /// `H(x | v)` at quantiles `q = F1(x)`, `p = F1(v)`.
    pub fn big_h_q(&self, q: f64, p: f64) -> Result<f64, BeliefsError> {
        let n = self.n;
        if self.iid() {
            return Ok(q.powi((n - 1) as i32));
        }
        let p = self.own_p(p);
        let ik = self.inv_kappa_q(p)?;
        let integral = if let Some(g) = self.closed() {
            self.mu_poly(|u| vec![(Self::lin_big_a(g, q, u), n - 1), (Self::lin_a(g, p, u), 1)], &[q, p])
        } else {
            let e = (n - 1) as i32;
            self.mu_integral(|u| self.big_a(q, u).powi(e) * self.small_a(p, u), &[q, p])?
        };
        Ok((integral / ik).clamp(0.0, 1.0))
    }

    /// `h(x | v) / f1(x)` at quantiles `q = F1(x)`, `p = F1(v)`.
    pub fn small_h_q(&self, q: f64, p: f64) -> Result<f64, BeliefsError> {
        let n = self.n;
        if self.iid() {
            return Ok((n - 1) as f64 * q.powi((n - 2) as i32));
        }
        let p = self.own_p(p);
        let ik = self.inv_kappa_q(p)?;
        let integral = if let Some(g) = self.closed() {
            self.mu_poly(
                |u| vec![(Self::lin_big_a(g, q, u), n - 2), (Self::lin_a(g, q, u), 1), (Self::lin_a(g, p, u), 1)],
                &[q, p],
            )
        } else {
            let e = (n - 2) as i32;
            self.mu_integral(|u| self.big_a(q, u).powi(e) * self.small_a(q, u) * self.small_a(p, u), &[q, p])?
        };
        Ok((n - 1) as f64 * integral / ik)
    }

    /// Reverse hazard rate with respect to the quantile `q`, i.e. `RHR(x)/f1(x)`.
    pub fn rhr_q(&self, q: f64) -> Result<f64, BeliefsError> {
        if q <= 0.0 {
            return Err(BeliefsError::Pole);
        }
        Ok(self.small_h_q(q, q)? / self.big_h_q(q, q)?)
    }

    // ---- public valuation-scale API ----

    /// `F1(x) - C(F1(x), u)`.
    pub fn a_kernel(&self, x: f64, u: f64) -> f64 {
        self.big_a(self.f1(x), u)
    }

    pub fn admission_probability(&self, v: &[f64]) -> Result<f64, BeliefsError> {
        let ps: Vec<f64> = v.iter().map(|&x| self.f1(x)).collect();
        self.psi_q(&ps)
    }

    /// Posterior normalizer; infinite where the own valuation can never be admitted.
    pub fn kappa(&self, v: f64) -> Result<f64, BeliefsError> {
        Ok(1.0 / self.inv_kappa_q(self.f1(v))?)
    }

    pub fn joint_density(&self, v: &[f64]) -> Result<f64, BeliefsError> {
        let dens: f64 = v.iter().map(|&x| self.pdf1(x)).product();
        Ok(binom(self.m, self.n) * self.admission_probability(v)? * dens)
    }

    pub fn posterior_density(&self, v_i: f64, v_rest: &[f64]) -> Result<f64, BeliefsError> {
        if v_rest.len() + 1 != self.n {
            return Err(BeliefsError::Dimension { expected: self.n - 1, got: v_rest.len() });
        }
        let mut all = vec![v_i];
        all.extend_from_slice(v_rest);
        let dens: f64 = v_rest.iter().map(|&x| self.pdf1(x)).product();
        Ok(self.kappa(v_i)? * self.admission_probability(&all)? * dens)
    }

    pub fn marginal_cdf(&self, x: f64) -> Result<f64, BeliefsError> {
        self.marginal_q(self.f1(x))
    }

    pub fn kth_cdf(&self, k: usize, x: f64) -> Result<f64, BeliefsError> {
        self.kth_q(k, self.f1(x))
    }

    /// Tabulated CDF of the k-th largest admitted valuation on the valuation grid.
    pub fn kth_order_cdf(&self, k: usize) -> Result<OrderStatCdf, BeliefsError> {
        if k < 1 || k > self.n {
            return Err(BeliefsError::Rank { k, n: self.n });
        }
        let cdf = match k {
            1 => self.cached(&self.caches.largest, |x| self.kth_cdf(1, x))?,
            2 => self.cached(&self.caches.second, |x| self.kth_cdf(2, x))?,
            _ => self.tabulate_x(|x| self.kth_cdf(k, x))?,
        };
        Ok(OrderStatCdf { k, cdf })
    }

    /// Tabulated `kappa` on the valuation grid (infinite values stored as `f64::MAX`).
    pub fn kappa_table(&self) -> Result<TabulatedFunction, BeliefsError> {
        self.cached(&self.caches.kappa, |v| self.kappa(v).map(|k| k.min(f64::MAX)))
    }

    pub fn marginal_table(&self) -> Result<TabulatedFunction, BeliefsError> {
        self.cached(&self.caches.marginal, |x| self.marginal_cdf(x))
    }

    fn cached<F: Fn(f64) -> Result<f64, BeliefsError>>(
        &self,
        cell: &OnceLock<Result<TabulatedFunction, BeliefsError>>,
        f: F,
    ) -> Result<TabulatedFunction, BeliefsError> {
        cell.get_or_init(|| self.tabulate_x(f)).clone()
    }

    fn tabulate_x<F: Fn(f64) -> Result<f64, BeliefsError>>(&self, f: F) -> Result<TabulatedFunction, BeliefsError> {
        let grid = uniform_grid(self.grid_size);
        let values = grid.iter().map(|&x| f(x)).collect::<Result<Vec<_>, _>>()?;
        Ok(TabulatedFunction::from_samples(grid, values, true)?)
    }

    pub fn win_cdf_h(&self, x: f64, v: f64) -> Result<f64, BeliefsError> {
        self.big_h_q(self.f1(x), self.f1(v))
    }

    pub fn win_pdf_h(&self, x: f64, v: f64) -> Result<f64, BeliefsError> {
        Ok(self.pdf1(x) * self.small_h_q(self.f1(x), self.f1(v))?)
    }

    /// `dH(x|v)/dv` by central differences with step `1e-4`, one-sided at the ends.
    pub fn win_cdf_dv_h2(&self, x: f64, v: f64) -> Result<f64, BeliefsError> {
        if self.iid() {
            return Ok(0.0);
        }
        let step = 1e-4;
        let lo = (v - step).max(0.0);
        let hi = (v + step).min(1.0);
        Ok((self.win_cdf_h(x, hi)? - self.win_cdf_h(x, lo)?) / (hi - lo))
    }

    pub fn reverse_hazard_rate(&self, x: f64) -> Result<f64, BeliefsError> {
        if x <= 0.0 {
            return Err(BeliefsError::Pole);
        }
        Ok(self.pdf1(x) * self.rhr_q(self.f1(x))?)
    }

    /// Integrated reverse hazard rate on the quantile grid, cached.
    pub fn cumulative_rhr(&self) -> Result<CumulativeRhr, BeliefsError> {
        self.caches.rhr.get_or_init(|| self.build_cumulative_rhr()).clone()
    }

    fn build_cumulative_rhr(&self) -> Result<CumulativeRhr, BeliefsError> {
        let quad = self.quad;
        let rhr = |q: f64| self.rhr_q(q).unwrap_or(f64::NAN);
        let k = integrate(rhr, RHR_EPS, 10.0 * RHR_EPS, &quad)? / std::f64::consts::LN_10;
        if !(k.is_finite() && k >= 0.0) {
            return Err(BeliefsError::NonIntegrable(k));
        }
        let grid = uniform_grid(self.grid_size);
        let remainder = |q: f64| self.rhr_q(q).unwrap_or(f64::NAN) - k / q;
        let cells = (0..grid.len() - 1)
            .map(|j| {
                let lo = grid[j].max(RHR_EPS);
                integrate(remainder, lo, grid[j + 1], &quad)
            })
            .collect::<Result<Vec<_>, _>>()?;
        let mut values = Vec::with_capacity(grid.len());
        let mut acc = 0.0;
        values.push(0.0);
        for c in cells {
            acc += c;
            values.push(acc);
        }
        Ok(CumulativeRhr { k, remainder: TabulatedFunction::from_samples(grid, values, false)? })
    }

    /// Samples `f` on the default tabulation grid.
    pub fn tabulate<F: Fn(f64) -> f64>(&self, f: F, monotone: bool) -> Result<TabulatedFunction, BeliefsError> {
        Ok(tabulate(f, self.grid_size, monotone)?)
    }
}
