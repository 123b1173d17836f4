//! Symmetric increasing equilibrium bid functions and the grid checks that
//! certify them.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::beliefs::{BeliefsError, GameSetup};
use crate::numerics::{binom, find_root, integrate, uniform_grid, NumericsError, TabulatedFunction};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum EquilibriumError {
    #[error("reserve {0} outside [0, 1)")]
    Reserve(f64),
    #[error("reserve {0} excludes all types")]
    ReserveExcludesAll(f64),
    #[error(transparent)]
    Beliefs(#[from] BeliefsError),
    #[error(transparent)]
    Numerics(#[from] NumericsError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Format {
    SecondPrice,
    FirstPrice,
    AllPay,
}

impl Format {
    pub const ALL: [Format; 3] = [Format::SecondPrice, Format::FirstPrice, Format::AllPay];

    pub fn name(&self) -> &'static str {
        match self {
            Format::SecondPrice => "second-price",
            Format::FirstPrice => "first-price",
            Format::AllPay => "all-pay",
        }
    }
}

impl std::fmt::Display for Format {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Grid point where an existence condition fails, with the offending value.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Witness {
    pub v_tilde: f64,
    pub v: f64,
    pub value: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "status", rename_all = "kebab-case")]
pub enum Verdict {
    Verified,
    ConditionFailed { witness: Witness },
    NotChecked,
}

impl Verdict {
    pub fn is_verified(&self) -> bool {
        matches!(self, Verdict::Verified)
    }

    pub fn label(&self) -> &'static str {
        match self {
            Verdict::Verified => "verified",
            Verdict::ConditionFailed { .. } => "condition-failed",
            Verdict::NotChecked => "not-checked",
        }
    }
}

/// A symmetric bid function. Types below `cutoff` do not bid.
///
/// `bid_fn` is tabulated on the active region `[cutoff, 1]`, rescaled to `[0, 1]`.
#[derive(Debug, Clone)]
pub struct StrategyProfile {
    pub format: Format,
    pub reserve: f64,
    pub cutoff: f64,
    pub bid_fn: TabulatedFunction,
    pub existence: Verdict,
}

impl StrategyProfile {
    /// Bid of type `v`, or `None` when the type abstains.
    pub fn bid(&self, v: f64) -> Option<f64> {
        if v < self.cutoff {
            return None;
        }
        if self.format == Format::SecondPrice {
            return Some(v);
        }
        let z = if self.cutoff >= 1.0 { 1.0 } else { (v - self.cutoff) / (1.0 - self.cutoff) };
        Some(self.bid_fn.eval(z))
    }

    /// Type at grid node `j` of the active region.
    pub fn node_type(&self, j: usize) -> f64 {
        self.cutoff + (1.0 - self.cutoff) * self.bid_fn.grid()[j]
    }

    /// `(v, bid)` pairs on the tabulation grid of `[0, 1]`; abstaining types report `None`.
    pub fn dump(&self, npoints: usize) -> Vec<(f64, Option<f64>)> {
        uniform_grid(npoints).into_iter().map(|v| (v, self.bid(v))).collect()
    }

    pub fn with_existence(mut self, existence: Verdict) -> Self {
        self.existence = existence;
        self
    }
}

/// Tabulated inflated type `theta(v) = kappa(v) v`.
#[derive(Debug, Clone)]
pub struct InflatedTypeCurve {
    pub curve: TabulatedFunction,
    pub monotone: bool,
}

fn check_reserve(r: f64) -> Result<(), EquilibriumError> {
    if r.is_finite() && (0.0..1.0).contains(&r) {
        Ok(())
    } else {
        Err(EquilibriumError::Reserve(r))
    }
}

fn active_grid(g: &GameSetup, cutoff: f64) -> (Vec<f64>, Vec<f64>) {
    let z = uniform_grid(g.grid_size);
    let v = z.iter().map(|&z| cutoff + (1.0 - cutoff) * z).collect();
    (z, v)
}

/// Truthful bidding.
pub fn sp_strategy(g: &GameSetup, reserve: f64) -> Result<StrategyProfile, EquilibriumError> {
    check_reserve(reserve)?;
    let (z, v) = active_grid(g, reserve);
    Ok(StrategyProfile {
        format: Format::SecondPrice,
        reserve,
        cutoff: reserve,
        bid_fn: TabulatedFunction::from_samples(z, v, true)?,
        existence: Verdict::Verified,
    })
}

/// `sigma(v) = v - int_r^v exp(Lambda(t) - Lambda(v)) dt` where `Lambda' = RHR`.
pub fn fp_strategy(g: &GameSetup, reserve: f64) -> Result<StrategyProfile, EquilibriumError> {
    check_reserve(reserve)?;
    let crhr = g.cumulative_rhr()?;
    let (z, vs) = active_grid(g, reserve);
    let bids = vs
        .par_iter()
        .map(|&v| {
            if v <= 0.0 {
                return Ok(0.0);
            }
            let pv = g.f1(v);
            let shade = integrate(
                |t| {
                    let pt = g.f1(t);
                    if pt <= 0.0 {
                        0.0
                    } else {
                        crhr.diff(pt, pv).min(0.0).exp()
                    }
                },
                reserve,
                v,
                &g.quad,
            )?;
            Ok((v - shade).clamp(reserve.min(v), v))
        })
        .collect::<Result<Vec<f64>, EquilibriumError>>()?;
    Ok(StrategyProfile {
        format: Format::FirstPrice,
        reserve,
        cutoff: reserve,
        bid_fn: TabulatedFunction::from_samples(z, bids, true)?,
        existence: Verdict::NotChecked,
    })
}

/// Cutoff type for an all-pay reserve: root of `x H(x|x) = r`.
pub fn ap_cutoff(g: &GameSetup, reserve: f64) -> Result<f64, EquilibriumError> {
    check_reserve(reserve)?;
    if reserve == 0.0 {
        return Ok(0.0);
    }
    let f = |x: f64| x * g.big_h_q(g.f1(x), g.f1(x)).unwrap_or(f64::NAN) - reserve;
    find_root(f, reserve, 1.0, 1e-12).map_err(|e| match e {
        NumericsError::NoSignChange { .. } => EquilibriumError::ReserveExcludesAll(reserve),
        other => other.into(),
    })
}

/// `sigma(v) = r + int_tau^v x h(x|x) dx` for `v >= tau`.
pub fn ap_strategy(g: &GameSetup, reserve: f64) -> Result<StrategyProfile, EquilibriumError> {
    let tau = ap_cutoff(g, reserve)?;
    let (z, vs) = active_grid(g, tau);
    let qs: Vec<f64> = vs.iter().map(|&v| g.f1(v)).collect();
    let integrand = |q: f64| g.quantile1(q) * g.small_h_q(q, q).unwrap_or(f64::NAN);
    let cells = (0..qs.len() - 1)
        .into_par_iter()
        .map(|j| integrate(integrand, qs[j], qs[j + 1], &g.quad))
        .collect::<Result<Vec<f64>, NumericsError>>()?;
    let mut bids = Vec::with_capacity(qs.len());
    let mut acc = reserve;
    bids.push(acc);
    for c in cells {
        acc += c;
        bids.push(acc);
    }
    Ok(StrategyProfile {
        format: Format::AllPay,
        reserve,
        cutoff: tau,
        bid_fn: TabulatedFunction::from_samples(z, bids, true)?,
        existence: Verdict::NotChecked,
    })
}

const EXISTENCE_GRID: usize = 101;
const EXISTENCE_SLACK: f64 = 1e-7;

/// Scans a sign pattern: `value(i, j) >= -slack` for `v_tilde <= v` and
/// `<= slack` for `v_tilde >= v`, over `v_tilde = i/100`, `v = j/100`, `j >= 1`.
fn sign_pattern<F>(value: F) -> Result<Verdict, EquilibriumError>
where
    F: Fn(f64, f64) -> Result<f64, EquilibriumError> + Sync,
{
    let grid = uniform_grid(EXISTENCE_GRID);
    let rows = grid
        .par_iter()
        .map(|&vt| {
            let mut worst: Option<(f64, Witness)> = None;
            for &v in grid.iter().skip(1) {
                let val = value(vt, v)?;
                let mut excess: f64 = 0.0;
                if vt <= v {
                    excess = excess.max(-val - EXISTENCE_SLACK);
                }
                if vt >= v {
                    excess = excess.max(val - EXISTENCE_SLACK);
                }
                if excess > 0.0 && worst.is_none_or(|(e, _)| excess > e) {
                    worst = Some((excess, Witness { v_tilde: vt, v, value: val }));
                }
            }
            Ok(worst)
        })
        .collect::<Result<Vec<_>, EquilibriumError>>()?;
    let worst = rows.into_iter().flatten().max_by(|a, b| a.0.total_cmp(&b.0));
    Ok(match worst {
        Some((_, witness)) => Verdict::ConditionFailed { witness },
        None => Verdict::Verified,
    })
}

/// Grid check of the first-price deviation condition for `strat` (built with no reserve).
///
/// The condition is evaluated after dividing by `f1(v_tilde) > 0`, which keeps
/// the sign pattern and avoids the density singularity at 0.
pub fn fp_existence_check(g: &GameSetup, strat: &StrategyProfile) -> Result<Verdict, EquilibriumError> {
    sign_pattern(|vt, v| {
        let (qt, p) = (g.f1(vt), g.f1(v));
        let h = g.small_h_q(qt, p)?;
        let mut val = h * (v - vt);
        if vt > 0.0 {
            let shade = vt - strat.bid(vt).unwrap_or(0.0);
            let big = g.big_h_q(qt, p)?;
            let rhr = g.small_h_q(qt, qt)? / g.big_h_q(qt, qt)?;
            val += shade * (h - big * rhr);
        }
        Ok(val)
    })
}

/// Grid check of `v h(v~|v) - v~ h(v~|v~)` (divided by `f1(v~)`).
pub fn ap_existence_check(g: &GameSetup) -> Result<Verdict, EquilibriumError> {
    sign_pattern(|vt, v| {
        let qt = g.f1(vt);
        Ok(v * g.small_h_q(qt, g.f1(v))? - vt * g.small_h_q(qt, qt)?)
    })
}

/// `theta(v) = kappa(v) v` with `theta(0) = 0`.
pub fn inflated_type(g: &GameSetup) -> Result<InflatedTypeCurve, EquilibriumError> {
    let grid = uniform_grid(g.grid_size);
    let values = grid
        .par_iter()
        .map(|&v| {
            if v == 0.0 {
                return Ok(0.0);
            }
            let inv = g.inv_kappa_q(g.f1(v))?;
            Ok(if inv > 0.0 { v / inv } else { f64::MAX })
        })
        .collect::<Result<Vec<f64>, BeliefsError>>()?;
    let monotone = values.windows(2).all(|w| w[1] >= w[0] - 1e-9 * w[0].abs().max(1.0));
    let capped: Vec<f64> = values.iter().map(|v| v.min(1e300)).collect();
    Ok(InflatedTypeCurve { curve: TabulatedFunction::from_samples(grid, capped, monotone)?, monotone })
}

/// `J(x, n, m) = C(m-1, n-1) [(n-1) int_0^x t^(m-n) (1-t)^(n-2) dt + x^(m-n) (1-x)^(n-1)]`.
pub fn j_function(x: f64, n: usize, m: usize) -> f64 {
    assert!(2 <= n && n <= m, "need 2 <= n <= m");
    let x = x.clamp(0.0, 1.0);
    let a = (m - n) as i32;
    // Expand (1-t)^(n-2) and integrate term by term.
    let mut integral = 0.0;
    for i in 0..=(n - 2) {
        let sign = if i % 2 == 0 { 1.0 } else { -1.0 };
        let e = a + i as i32 + 1;
        integral += sign * binom(n - 2, i) * x.powi(e) / e as f64;
    }
    binom(m - 1, n - 1) * ((n - 1) as f64 * integral + x.powi(a) * (1.0 - x).powi((n - 1) as i32))
}
