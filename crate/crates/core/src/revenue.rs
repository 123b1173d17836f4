//! Expected revenue and highest bid per format, sweeps over the admitted
//! number, format ranking and the joint admission/mechanism comparison.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::beliefs::{BeliefsError, GameSetup};
use crate::equilibria::{
    ap_cutoff, ap_existence_check, ap_strategy, fp_existence_check, fp_strategy, EquilibriumError, Format, StrategyProfile, Verdict,
    Witness,
};
use crate::numerics::{find_root, integrate, integrate_with_breaks, NumericsError};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum RevenueError {
    #[error("no {format} equilibrium: existence condition fails at v~={}, v={}", witness.v_tilde, witness.v)]
    Existence { format: Format, witness: Witness },
    #[error("no admitted number has a verified equilibrium")]
    NoVerifiedPoints,
    #[error("item count K={k} outside [1, {max}]")]
    ItemCount { k: usize, max: usize },
    #[error("regularity check failed at v={0}")]
    Regularity(f64),
    #[error(transparent)]
    Beliefs(#[from] BeliefsError),
    #[error(transparent)]
    Equilibrium(#[from] EquilibriumError),
    #[error(transparent)]
    Numerics(#[from] NumericsError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum Objective {
    #[default]
    Revenue,
    HighestBid,
}

impl Objective {
    pub fn name(&self) -> &'static str {
        match self {
            Objective::Revenue => "revenue",
            Objective::HighestBid => "highest-bid",
        }
    }
}

/// One admitted number on a revenue curve. `value` is the formula value and
/// is an equilibrium outcome only when `existence` is verified.
#[derive(Debug, Clone, Serialize)]
pub struct CurvePoint {
    pub n: usize,
    pub value: f64,
    pub existence: Verdict,
}

#[derive(Debug, Clone, Serialize)]
pub struct RevenueCurve {
    pub format: Format,
    pub objective: Objective,
    pub reserve: f64,
    pub points: Vec<CurvePoint>,
    pub argmax_n: usize,
}

impl RevenueCurve {
    pub fn value_at(&self, n: usize) -> Option<f64> {
        self.points.iter().find(|p| p.n == n).map(|p| p.value)
    }
}

/// `E` of the k-th largest admitted valuation.
pub fn expected_kth_value(g: &GameSetup, k: usize) -> Result<f64, RevenueError> {
    tail_integral(g, k, 0.0)
}

/// `int_r^1 (1 - CDF_k(x)) dx`.
fn tail_integral(g: &GameSetup, k: usize, r: f64) -> Result<f64, RevenueError> {
    g.kth_cdf(k, 0.5)?;
    Ok(integrate(|x| 1.0 - g.kth_cdf(k, x).unwrap_or(f64::NAN), r, 1.0, &g.quad)?)
}

fn check_reserve(r: f64) -> Result<(), RevenueError> {
    if r.is_finite() && (0.0..1.0).contains(&r) {
        Ok(())
    } else {
        Err(EquilibriumError::Reserve(r).into())
    }
}

/// Second-price revenue; the winner pays the larger of the reserve and the second bid.
pub fn revenue_sp(g: &GameSetup, reserve: f64) -> Result<f64, RevenueError> {
    check_reserve(reserve)?;
    if g.n < 2 {
        return Ok(0.0);
    }
    if reserve == 0.0 {
        return expected_kth_value(g, 2);
    }
    let c1 = g.kth_cdf(1, reserve)?;
    let c2 = g.kth_cdf(2, reserve)?;
    Ok(reserve * (c2 - c1) + reserve * (1.0 - c2) + tail_integral(g, 2, reserve)?)
}

fn require(format: Format, verdict: Verdict) -> Result<(), RevenueError> {
    match verdict {
        Verdict::ConditionFailed { witness } => Err(RevenueError::Existence { format, witness }),
        _ => Ok(()),
    }
}

/// First-price existence verdict for `g`.
pub fn fp_verdict(g: &GameSetup) -> Result<Verdict, RevenueError> {
    let base = fp_strategy(g, 0.0)?;
    Ok(fp_existence_check(g, &base)?)
}

/// `E[sigma(V1) 1{V1 >= r}]` for a first-price strategy, via
/// `sigma(r)(1-G(r)) + int_r^1 sigma'(v)(1-G(v)) dv` with `sigma' = RHR (v - sigma)`.
pub fn fp_value(g: &GameSetup, strat: &StrategyProfile) -> Result<f64, RevenueError> {
    let r = strat.reserve;
    let head = if r > 0.0 { r * (1.0 - g.kth_cdf(1, r)?) } else { 0.0 };
    let body = integrate(
        |v| {
            let rhr = g.reverse_hazard_rate(v).unwrap_or(f64::NAN);
            let shade = v - strat.bid(v).unwrap_or(v);
            rhr * shade * (1.0 - g.kth_cdf(1, v).unwrap_or(f64::NAN))
        },
        r,
        1.0,
        &g.quad,
    )?;
    Ok(head + body)
}

pub fn revenue_fp(g: &GameSetup, reserve: f64) -> Result<f64, RevenueError> {
    check_reserve(reserve)?;
    require(Format::FirstPrice, fp_verdict(g)?)?;
    fp_value(g, &fp_strategy(g, reserve)?)
}

/// `scale * [r (1 - G(tau)) + int_{F1(tau)}^1 F1^-1(q) h(q|q) (1 - G(q)) dq]`,
/// where `G` is the marginal (`largest = false`) or the maximum's CDF.
fn ap_integral(g: &GameSetup, reserve: f64, largest: bool) -> Result<f64, RevenueError> {
    let tau = ap_cutoff(g, reserve)?;
    let cdf_q = |q: f64| if largest { g.kth_q(1, q) } else { g.marginal_q(q) };
    let qt = g.f1(tau);
    let head = if reserve > 0.0 { reserve * (1.0 - cdf_q(qt)?) } else { 0.0 };
    let body = integrate_with_breaks(
        |q| g.quantile1(q) * g.small_h_q(q, q).unwrap_or(f64::NAN) * (1.0 - cdf_q(q).unwrap_or(f64::NAN)),
        qt,
        1.0,
        &[],
        &g.quad,
    )?;
    Ok(head + body)
}

pub fn ap_verdict(g: &GameSetup) -> Result<Verdict, RevenueError> {
    Ok(ap_existence_check(g)?)
}

/// All-pay revenue `n E[sigma(V)]` under the admitted-bidder marginal.
pub fn revenue_ap(g: &GameSetup, reserve: f64) -> Result<f64, RevenueError> {
    check_reserve(reserve)?;
    require(Format::AllPay, ap_verdict(g)?)?;
    Ok(g.n as f64 * ap_integral(g, reserve, false)?)
}

/// Expected highest all-pay bid with no reserve.
pub fn highest_bid_ap(g: &GameSetup) -> Result<f64, RevenueError> {
    require(Format::AllPay, ap_verdict(g)?)?;
    ap_integral(g, 0.0, true)
}

/// Formula value of `objective` for `format`, without an existence check.
pub fn objective_value(g: &GameSetup, format: Format, objective: Objective, reserve: f64) -> Result<f64, RevenueError> {
    check_reserve(reserve)?;
    match (format, objective) {
        (Format::SecondPrice, Objective::Revenue) => revenue_sp(g, reserve),
        (Format::SecondPrice, Objective::HighestBid) => {
            let head = if reserve > 0.0 { reserve * (1.0 - g.kth_cdf(1, reserve)?) } else { 0.0 };
            Ok(head + tail_integral(g, 1, reserve)?)
        }
        (Format::FirstPrice, _) => fp_value(g, &fp_strategy(g, reserve)?),
        (Format::AllPay, Objective::Revenue) => Ok(g.n as f64 * ap_integral(g, reserve, false)?),
        (Format::AllPay, Objective::HighestBid) => ap_integral(g, reserve, true),
    }
}

/// Existence verdict for `format` at `g`.
pub fn existence(g: &GameSetup, format: Format) -> Result<Verdict, RevenueError> {
    match format {
        Format::SecondPrice => Ok(Verdict::Verified),
        Format::FirstPrice => fp_verdict(g),
        Format::AllPay => ap_verdict(g),
    }
}

/// Formula value and existence verdict for every `n` in `[2, m]`.
pub fn curve_points(base: &GameSetup, format: Format, objective: Objective, reserve: f64) -> Result<Vec<CurvePoint>, RevenueError> {
    check_reserve(reserve)?;
    (2..=base.m)
        .into_par_iter()
        .map(|n| {
            let g = base.with_n(n)?;
            let existence = existence(&g, format)?;
            let value = objective_value(&g, format, objective, reserve)?;
            Ok(CurvePoint { n, value, existence })
        })
        .collect()
}

/// Evaluates every `n` in `[2, m]` and picks the best verified one (smallest on ties).
pub fn sweep_optimal_n(base: &GameSetup, format: Format, objective: Objective, reserve: f64) -> Result<RevenueCurve, RevenueError> {
    let points = curve_points(base, format, objective, reserve)?;
    let mut best: Option<&CurvePoint> = None;
    for p in points.iter().filter(|p| p.existence.is_verified()) {
        if best.is_none_or(|b| p.value > b.value) {
            best = Some(p);
        }
    }
    let argmax_n = best.ok_or(RevenueError::NoVerifiedPoints)?.n;
    Ok(RevenueCurve { format, objective, reserve, points, argmax_n })
}

/// Worst grid violation of a pointwise condition.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GridVerdict {
    pub holds: bool,
    /// `(n, x, v, excess)` at the most violating point.
    pub worst: Option<(usize, f64, f64, f64)>,
}

impl GridVerdict {
    fn from_worst(worst: Option<(usize, f64, f64, f64)>) -> Self {
        Self { holds: worst.is_none(), worst }
    }
}

fn worse(a: Option<(usize, f64, f64, f64)>, b: Option<(usize, f64, f64, f64)>) -> Option<(usize, f64, f64, f64)> {
    match (a, b) {
        (Some(x), Some(y)) => Some(if y.3 > x.3 { y } else { x }),
        (x, None) => x,
        (None, y) => y,
    }
}

/// `RHR(x; n) <= (m-1) f1(x)/F1(x)` on `x in [1e-3, 1]` for every `n`, slack `1e-6`.
///
/// Compared as `F1(x) RHR(x)/f1(x) <= m - 1`, which is scale free.
pub fn condition12_check(base: &GameSetup) -> Result<GridVerdict, RevenueError> {
    let xs: Vec<f64> = (0..=200).map(|i| 1e-3 + (1.0 - 1e-3) * i as f64 / 200.0).collect();
    let bound = (base.m - 1) as f64;
    let worst = (2..=base.m)
        .into_par_iter()
        .map(|n| {
            let g = base.with_n(n)?;
            let mut worst = None;
            for &x in &xs {
                let q = g.f1(x);
                let excess = q * g.rhr_q(q)? - bound - 1e-6;
                if excess > 0.0 {
                    worst = worse(worst, Some((n, x, x, excess)));
                }
            }
            Ok(worst)
        })
        .collect::<Result<Vec<_>, RevenueError>>()?
        .into_iter()
        .fold(None, worse);
    Ok(GridVerdict::from_worst(worst))
}

/// Sign conditions on `H/H2` at one own valuation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RankingFlags {
    pub v: f64,
    /// `d/dx (H/H2) <= 0` on `(0, v]`; `None` where `H2` vanishes.
    pub ratio_nonincreasing: Option<bool>,
    pub h2_diag_nonpositive: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct RankingRow {
    pub n: usize,
    pub sp: f64,
    pub fp: f64,
    pub ap: f64,
    pub fp_existence: Verdict,
    pub ap_existence: Verdict,
    pub flags: Vec<RankingFlags>,
}

#[derive(Debug, Clone, Serialize)]
pub struct RankingReport {
    pub reserve: f64,
    pub rows: Vec<RankingRow>,
    pub sp_star: f64,
    pub fp_star: Option<f64>,
    pub ap_star: Option<f64>,
    /// Optimal all-pay revenue is at least the optimal first-price revenue.
    pub ap_beats_fp: Option<bool>,
    /// Optimal first-price and second-price revenues agree within `2e-4`.
    pub fp_equals_sp: Option<bool>,
}

pub const FLAG_TYPES: [f64; 4] = [0.25, 0.5, 0.75, 0.95];

fn ranking_flags(g: &GameSetup, v: f64) -> Result<RankingFlags, RevenueError> {
    let mut ratios = Vec::with_capacity(20);
    let mut defined = true;
    for i in 1..=20 {
        let x = v * i as f64 / 20.0;
        let h = g.win_cdf_h(x, v)?;
        let h2 = g.win_cdf_dv_h2(x, v)?;
        if h2.abs() < 1e-9 {
            defined = false;
            break;
        }
        ratios.push(h / h2);
    }
    let ratio_nonincreasing = defined.then(|| ratios.windows(2).all(|w| w[1] <= w[0] + 1e-6 * w[0].abs().max(1.0)));
    let h2_diag_nonpositive = g.win_cdf_dv_h2(v, v)? <= 1e-7;
    Ok(RankingFlags { v, ratio_nonincreasing, h2_diag_nonpositive })
}

/// Per-`n` revenues for all formats, sign flags and the optimal-format verdicts.
pub fn ranking_report(base: &GameSetup, reserve: f64) -> Result<RankingReport, RevenueError> {
    check_reserve(reserve)?;
    let rows = (2..=base.m)
        .into_par_iter()
        .map(|n| {
            let g = base.with_n(n)?;
            let flags = FLAG_TYPES.iter().map(|&v| ranking_flags(&g, v)).collect::<Result<Vec<_>, _>>()?;
            Ok(RankingRow {
                n,
                sp: revenue_sp(&g, reserve)?,
                fp: objective_value(&g, Format::FirstPrice, Objective::Revenue, reserve)?,
                ap: objective_value(&g, Format::AllPay, Objective::Revenue, reserve)?,
                fp_existence: fp_verdict(&g)?,
                ap_existence: ap_verdict(&g)?,
                flags,
            })
        })
        .collect::<Result<Vec<_>, RevenueError>>()?;
    let best = |f: &dyn Fn(&RankingRow) -> Option<f64>| rows.iter().filter_map(f).fold(None, |a: Option<f64>, b| Some(a.map_or(b, |a| a.max(b))));
    let sp_star = best(&|r| Some(r.sp)).unwrap_or(0.0);
    let fp_star = best(&|r| r.fp_existence.is_verified().then_some(r.fp));
    let ap_star = best(&|r| r.ap_existence.is_verified().then_some(r.ap));
    let ap_beats_fp = match (ap_star, fp_star) {
        (Some(a), Some(f)) => Some(a >= f - 2e-4),
        _ => None,
    };
    let fp_equals_sp = fp_star.map(|f| (f - sp_star).abs() < 2e-4);
    Ok(RankingReport { reserve, rows, sp_star, fp_star, ap_star, ap_beats_fp, fp_equals_sp })
}

/// Smallest `m` in the range at which admitting one extra bidder into a
/// second-price auction beats the best all-pay prescreening.
pub fn negotiation_crossover(base: &GameSetup, ms: std::ops::RangeInclusive<usize>) -> Result<Option<usize>, RevenueError> {
    for m in ms {
        let g = GameSetup::with_options(m, m, base.predictor.clone(), base.backend, base.quad, base.grid_size)?;
        let ap = sweep_optimal_n(&g, Format::AllPay, Objective::Revenue, 0.0)?;
        let ap_star = ap.value_at(ap.argmax_n).unwrap_or(0.0);
        let bigger = GameSetup::with_options(m + 1, m + 1, base.predictor.clone(), base.backend, base.quad, base.grid_size)?;
        if revenue_sp(&bigger, 0.0)? >= ap_star {
            return Ok(Some(m));
        }
    }
    Ok(None)
}

/// Revenue of the uniform-price auction of `k` identical items: `k E[V_(k+1)]`.
pub fn uniform_auction_revenue(g: &GameSetup, k: usize) -> Result<f64, RevenueError> {
    if k < 1 || k + 1 > g.n {
        return Err(RevenueError::ItemCount { k, max: g.n - 1 });
    }
    Ok(k as f64 * expected_kth_value(g, k + 1)?)
}

/// Payment rule of the surplus-extracting mechanism for correlated values.
#[derive(Debug, Clone)]
pub struct MrPayment {
    g: GameSetup,
}

impl MrPayment {
    /// Charge to a bidder reporting `b`, who wins iff `wins`.
    pub fn payment(&self, b: f64, wins: bool) -> Result<f64, RevenueError> {
        let h = self.g.win_cdf_h(b, b)?;
        let h2 = self.g.win_cdf_dv_h2(b, b)?;
        let lead = h + b * h2;
        let base = b - lead * h / h2;
        Ok(if wins { base + lead / h2 } else { base })
    }
}

#[derive(Debug, Clone)]
pub struct MrReport {
    pub mrcon: GridVerdict,
    pub payment: MrPayment,
    pub revenue: Option<f64>,
}

/// Checks both clauses of the mechanism's validity condition on a 19x19 grid
/// of `(x, v)` in `[0.05, 0.95]` and, when they hold, reports `E[max]`.
///
/// `H2 < 0` is required with relative slack (`H2 < -1e-6 H`); the derivative
/// clause uses central differences in `v` with step `0.01` and slack `1e-6`.
pub fn mr_check_and_revenue(g: &GameSetup) -> Result<MrReport, RevenueError> {
    let grid: Vec<f64> = (1..=19).map(|i| i as f64 * 0.05).collect();
    let d = 0.01;
    let rows = grid
        .par_iter()
        .map(|&x| {
            let mut worst = None;
            for &v in &grid {
                let h = g.win_cdf_h(x, v)?;
                let h2 = g.win_cdf_dv_h2(x, v)?;
                let excess = h2 + 1e-6 * h;
                if excess >= 0.0 {
                    worst = worse(worst, Some((g.n, x, v, excess.max(f64::MIN_POSITIVE))));
                    continue;
                }
                let ratio = |w: f64| -> Result<f64, RevenueError> { Ok(g.win_cdf_h(x, w)? / g.win_cdf_dv_h2(x, w)?) };
                let deriv = (ratio(v + d)? - ratio(v - d)?) / (2.0 * d);
                let excess = -1.0 - 1e-6 - deriv;
                if excess > 0.0 || !deriv.is_finite() {
                    worst = worse(worst, Some((g.n, x, v, if excess.is_finite() { excess } else { f64::MAX })));
                }
            }
            Ok(worst)
        })
        .collect::<Result<Vec<_>, RevenueError>>()?;
    let mrcon = GridVerdict::from_worst(rows.into_iter().fold(None, worse));
    let revenue = if mrcon.holds { Some(expected_kth_value(g, 1)?) } else { None };
    Ok(MrReport { mrcon, payment: MrPayment { g: g.clone() }, revenue })
}

#[derive(Debug, Clone)]
pub struct JointDesign {
    pub myerson_reserve: f64,
    pub myerson_revenue: f64,
    /// Present when `m >= 3`: the mechanism check at `n = m - 1`.
    pub mr: Option<MrReport>,
    /// `true` when the mechanism at `m - 1` is verified and earns strictly more.
    pub admit_m_minus_one: bool,
}

/// Myerson reserve for the prior of `base`, its revenue with all `m` admitted,
/// and the comparison with the surplus-extracting mechanism at `m - 1`.
pub fn myerson_and_joint_design(base: &GameSetup) -> Result<JointDesign, RevenueError> {
    let f1 = &base.predictor.f1;
    let phi = |v: f64| v - (1.0 - f1.cdf(v)) / f1.pdf(v);
    let mut prev = f64::NEG_INFINITY;
    for i in 1..200 {
        let v = i as f64 / 200.0;
        let cur = phi(v);
        if cur < prev - 1e-9 {
            return Err(RevenueError::Regularity(v));
        }
        prev = cur;
    }
    let r = find_root(phi, 1e-9, 1.0, 1e-12)?;
    let full = base.with_n(base.m)?;
    let myerson_revenue = revenue_sp(&full, r)?;
    let mr = if base.m >= 3 { Some(mr_check_and_revenue(&base.with_n(base.m - 1)?)?) } else { None };
    let admit_m_minus_one = mr.as_ref().and_then(|m| m.revenue).is_some_and(|rev| rev > myerson_revenue);
    Ok(JointDesign { myerson_reserve: r, myerson_revenue, mr, admit_m_minus_one })
}

/// All-pay strategy paired with its existence verdict.
pub fn checked_ap_strategy(g: &GameSetup, reserve: f64) -> Result<StrategyProfile, RevenueError> {
    Ok(ap_strategy(g, reserve)?.with_existence(ap_verdict(g)?))
}

/// First-price strategy paired with its existence verdict.
pub fn checked_fp_strategy(g: &GameSetup, reserve: f64) -> Result<StrategyProfile, RevenueError> {
    let verdict = fp_verdict(g)?;
    Ok(fp_strategy(g, reserve)?.with_existence(verdict))
}
