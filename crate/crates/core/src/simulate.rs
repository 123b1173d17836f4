//! Monte Carlo replay of the prescreened auction.
//!
//! Every trial draws its own counter-based stream (`seed`, trial index), and
//! trials are aggregated in fixed-size chunks merged in index order, so a
//! result is bit-identical for a given seed whatever the thread count.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::beliefs::GameSetup;
use crate::equilibria::{Format, StrategyProfile, Verdict};

const CHUNK: u64 = 2048;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SimError {
    #[error("trials must be at least 1")]
    NoTrials,
    #[error("strategy is for {strategy} but the configuration asks for {config}")]
    FormatMismatch { strategy: Format, config: Format },
    #[error("strategy reserve {strategy} differs from configured reserve {config}")]
    ReserveMismatch { strategy: f64, config: f64 },
    #[error("strategy has no verified equilibrium")]
    Unverified,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimConfig {
    pub trials: u64,
    pub seed: u64,
    pub format: Format,
    #[serde(default)]
    pub reserve: f64,
    /// `(own valuation, alternative bid)` pairs to replay for the focal bidder.
    #[serde(default)]
    pub deviation_grid: Option<Vec<(f64, f64)>>,
}

impl SimConfig {
    pub fn new(trials: u64, seed: u64, format: Format) -> Self {
        Self { trials, seed, format, reserve: 0.0, deviation_grid: None }
    }

    pub fn with_reserve(mut self, reserve: f64) -> Self {
        self.reserve = reserve;
        self
    }

    fn check(&self, strat: &StrategyProfile) -> Result<(), SimError> {
        if self.trials == 0 {
            return Err(SimError::NoTrials);
        }
        if strat.format != self.format {
            return Err(SimError::FormatMismatch { strategy: strat.format, config: self.format });
        }
        if (strat.reserve - self.reserve).abs() > 1e-12 {
            return Err(SimError::ReserveMismatch { strategy: strat.reserve, config: self.reserve });
        }
        Ok(())
    }
}

/// Sorted sample with its empirical CDF.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EmpiricalCdf {
    pub samples: Vec<f64>,
}

impl EmpiricalCdf {
    pub fn new(mut samples: Vec<f64>) -> Self {
        samples.sort_by(f64::total_cmp);
        Self { samples }
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn eval(&self, x: f64) -> f64 {
        if self.samples.is_empty() {
            return f64::NAN;
        }
        self.samples.partition_point(|&s| s <= x) as f64 / self.samples.len() as f64
    }

    /// Kolmogorov-Smirnov distance to a continuous CDF.
    pub fn ks_statistic(&self, cdf: impl Fn(f64) -> f64) -> f64 {
        let n = self.samples.len() as f64;
        self.samples
            .iter()
            .enumerate()
            .map(|(i, &x)| {
                let f = cdf(x);
                (f - i as f64 / n).abs().max(((i + 1) as f64 / n - f).abs())
            })
            .fold(0.0, f64::max)
    }
}

/// Asymptotic one-sample KS critical value at level `alpha`.
pub fn ks_critical(samples: usize, alpha: f64) -> f64 {
    (-0.5 * (alpha / 2.0).ln()).sqrt() / (samples as f64).sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DeviationGain {
    pub v: f64,
    /// Type whose equilibrium bid is used as the deviation, when drawn from the grid.
    pub v_tilde: Option<f64>,
    /// `None` means staying out.
    pub bid: Option<f64>,
    pub gain: f64,
    pub stderr: f64,
    pub admitted_trials: u64,
}

impl DeviationGain {
    pub fn is_significant(&self) -> bool {
        self.gain > 3.0 * self.stderr + 1e-12
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SimResult {
    pub seed: u64,
    pub trials: u64,
    pub revenue_mean: f64,
    pub revenue_stderr: f64,
    pub highest_bid_mean: f64,
    pub highest_bid_stderr: f64,
    pub admission_freq: Vec<f64>,
    pub admission_stderr: Vec<f64>,
    /// Share of trials whose admitted set is exactly the top `n` valuations.
    pub top_n_rate: f64,
    /// One uniformly chosen admitted valuation per trial.
    pub empirical_marginal: EmpiricalCdf,
    pub empirical_max: EmpiricalCdf,
    pub deviation_gains: Vec<DeviationGain>,
}

#[derive(Default)]
struct Moments {
    sum: f64,
    sumsq: f64,
    count: u64,
}

impl Moments {
    fn push(&mut self, x: f64) {
        self.sum += x;
        self.sumsq += x * x;
        self.count += 1;
    }

    fn merge(&mut self, o: &Moments) {
        self.sum += o.sum;
        self.sumsq += o.sumsq;
        self.count += o.count;
    }

    fn mean(&self) -> f64 {
        if self.count == 0 {
            0.0
        } else {
            self.sum / self.count as f64
        }
    }

    fn stderr(&self) -> f64 {
        if self.count < 2 {
            return 0.0;
        }
        let n = self.count as f64;
        let var = ((self.sumsq - self.sum * self.sum / n) / (n - 1.0)).max(0.0);
        (var / n).sqrt()
    }
}

fn rng_for(seed: u64, trial: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(trial);
    rng
}

/// Indices of the `n` highest signals, ties broken by independent uniforms.
fn admit(signals: &[f64], ties: &[f64], n: usize) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..signals.len()).collect();
    idx.sort_by(|&a, &b| signals[b].total_cmp(&signals[a]).then(ties[b].total_cmp(&ties[a])));
    idx.truncate(n);
    idx
}

struct Outcome {
    revenue: f64,
    highest: f64,
}

/// Settles one auction among `bids` (`None` = no participation); ties among
/// top bids go to the highest `ties` entry.
fn settle(format: Format, reserve: f64, bids: &[Option<f64>], ties: &[f64]) -> Outcome {
    let mut first: Option<usize> = None;
    let mut second = f64::NEG_INFINITY;
    for (i, b) in bids.iter().enumerate() {
        let Some(b) = *b else { continue };
        match first {
            None => first = Some(i),
            Some(j) => {
                let bj = bids[j].unwrap_or(0.0);
                if b > bj || (b == bj && ties[i] > ties[j]) {
                    second = second.max(bj);
                    first = Some(i);
                } else {
                    second = second.max(b);
                }
            }
        }
    }
    let highest = first.and_then(|i| bids[i]).unwrap_or(0.0);
    let clears = first.is_some() && highest >= reserve;
    let revenue = match format {
        Format::SecondPrice if clears => reserve.max(second),
        Format::FirstPrice if clears => highest,
        Format::AllPay => bids.iter().flatten().sum(),
        _ => 0.0,
    };
    Outcome { revenue, highest }
}

struct Chunk {
    revenue: Moments,
    highest: Moments,
    admitted: Vec<u64>,
    top_n: u64,
    marginal: Vec<f64>,
    max: Vec<f64>,
}

fn run_chunk(g: &GameSetup, strat: &StrategyProfile, cfg: &SimConfig, range: std::ops::Range<u64>) -> Chunk {
    let (m, n) = (g.m, g.n);
    let p = &g.predictor;
    let mut out = Chunk {
        revenue: Moments::default(),
        highest: Moments::default(),
        admitted: vec![0; m],
        top_n: 0,
        marginal: Vec::with_capacity((range.end - range.start) as usize),
        max: Vec::with_capacity((range.end - range.start) as usize),
    };
    let mut values = vec![0.0; m];
    let mut signals = vec![0.0; m];
    let mut ties = vec![0.0; m];
    for trial in range {
        let mut rng = rng_for(cfg.seed, trial);
        for i in 0..m {
            values[i] = p.f1.quantile(rng.gen::<f64>());
            signals[i] = p.sample_signal(values[i], rng.gen::<f64>());
            ties[i] = rng.gen::<f64>();
        }
        let admitted = admit(&signals, &ties, n);
        let bid_ties: Vec<f64> = (0..n).map(|_| rng.gen::<f64>()).collect();
        let bids: Vec<Option<f64>> = admitted.iter().map(|&i| strat.bid(values[i])).collect();
        let o = settle(cfg.format, cfg.reserve, &bids, &bid_ties);
        out.revenue.push(o.revenue);
        out.highest.push(o.highest);
        for &i in &admitted {
            out.admitted[i] += 1;
        }
        let pick = admitted[rng.gen_range(0..n)];
        out.marginal.push(values[pick]);
        let vmax = admitted.iter().map(|&i| values[i]).fold(f64::NEG_INFINITY, f64::max);
        out.max.push(vmax);
        let cut = {
            let mut sorted = values.clone();
            sorted.sort_by(|a, b| b.total_cmp(a));
            sorted[n - 1]
        };
        if admitted.iter().all(|&i| values[i] >= cut) {
            out.top_n += 1;
        }
    }
    out
}

fn chunks(trials: u64) -> Vec<std::ops::Range<u64>> {
    (0..trials.div_ceil(CHUNK)).map(|c| c * CHUNK..((c + 1) * CHUNK).min(trials)).collect()
}

/// Plays `cfg.trials` independent rounds of the prescreened auction with `strat`.
pub fn run_sim(g: &GameSetup, strat: &StrategyProfile, cfg: &SimConfig) -> Result<SimResult, SimError> {
    cfg.check(strat)?;
    let parts: Vec<Chunk> = chunks(cfg.trials).into_par_iter().map(|r| run_chunk(g, strat, cfg, r)).collect();
    let mut revenue = Moments::default();
    let mut highest = Moments::default();
    let mut admitted = vec![0u64; g.m];
    let mut top_n = 0;
    let mut marginal = Vec::with_capacity(cfg.trials as usize);
    let mut max = Vec::with_capacity(cfg.trials as usize);
    for c in parts {
        revenue.merge(&c.revenue);
        highest.merge(&c.highest);
        for (a, b) in admitted.iter_mut().zip(&c.admitted) {
            *a += b;
        }
        top_n += c.top_n;
        marginal.extend(c.marginal);
        max.extend(c.max);
    }
    let t = cfg.trials as f64;
    let admission_freq: Vec<f64> = admitted.iter().map(|&a| a as f64 / t).collect();
    let admission_stderr = admission_freq.iter().map(|&p| (p * (1.0 - p) / t).sqrt()).collect();
    let deviation_gains = match &cfg.deviation_grid {
        Some(grid) => {
            let mut by_type: Vec<(f64, Vec<(Option<f64>, Option<f64>)>)> = Vec::new();
            for &(v, b) in grid {
                match by_type.iter_mut().find(|(w, _)| *w == v) {
                    Some((_, list)) => list.push((None, Some(b))),
                    None => by_type.push((v, vec![(None, Some(b))])),
                }
            }
            deviations(g, strat, cfg, &by_type)
        }
        None => Vec::new(),
    };
    Ok(SimResult {
        seed: cfg.seed,
        trials: cfg.trials,
        revenue_mean: revenue.mean(),
        revenue_stderr: revenue.stderr(),
        highest_bid_mean: highest.mean(),
        highest_bid_stderr: highest.stderr(),
        admission_freq,
        admission_stderr,
        top_n_rate: top_n as f64 / t,
        empirical_marginal: EmpiricalCdf::new(marginal),
        empirical_max: EmpiricalCdf::new(max),
        deviation_gains,
    })
}

/// Focal bidder payoff from bid `b` against the other admitted bids.
fn focal_payoff(format: Format, reserve: f64, v: f64, b: Option<f64>, others: &[Option<f64>]) -> f64 {
    let Some(b) = b else { return 0.0 };
    if b < reserve {
        return if format == Format::AllPay { -b } else { 0.0 };
    }
    let mut top = f64::NEG_INFINITY;
    let mut tied = 0usize;
    for o in others.iter().flatten() {
        if *o > top {
            top = *o;
            tied = 1;
        } else if *o == top {
            tied += 1;
        }
    }
    let share = if b > top {
        1.0
    } else if b == top {
        1.0 / (tied + 1) as f64
    } else {
        0.0
    };
    match format {
        Format::SecondPrice => share * (v - reserve.max(top)),
        Format::FirstPrice => share * (v - b),
        Format::AllPay => share * v - b,
    }
}

/// `(type on the grid, alternative bid)` entries for one focal type.
type Alternatives = Vec<(Option<f64>, Option<f64>)>;

/// Paired payoff differences for each focal type and its alternatives.
fn deviations(g: &GameSetup, strat: &StrategyProfile, cfg: &SimConfig, by_type: &[(f64, Alternatives)]) -> Vec<DeviationGain> {
    let (m, n) = (g.m, g.n);
    let p = &g.predictor;
    let mut out = Vec::new();
    for (t, (v, alts)) in by_type.iter().enumerate() {
        let seed = cfg.seed ^ 0x9e37_79b9_7f4a_7c15u64.wrapping_mul(t as u64 + 1);
        let eq = strat.bid(*v);
        let parts: Vec<Vec<Moments>> = chunks(cfg.trials)
            .into_par_iter()
            .map(|range| {
                let mut acc: Vec<Moments> = alts.iter().map(|_| Moments::default()).collect();
                let mut values = vec![0.0; m];
                let mut signals = vec![0.0; m];
                let mut ties = vec![0.0; m];
                for trial in range {
                    let mut rng = rng_for(seed, trial);
                    values[0] = *v;
                    signals[0] = p.sample_signal(*v, rng.gen::<f64>());
                    ties[0] = rng.gen::<f64>();
                    for i in 1..m {
                        values[i] = p.f1.quantile(rng.gen::<f64>());
                        signals[i] = p.sample_signal(values[i], rng.gen::<f64>());
                        ties[i] = rng.gen::<f64>();
                    }
                    let admitted = admit(&signals, &ties, n);
                    if !admitted.contains(&0) {
                        continue;
                    }
                    let others: Vec<Option<f64>> = admitted.iter().filter(|&&i| i != 0).map(|&i| strat.bid(values[i])).collect();
                    let base = focal_payoff(cfg.format, cfg.reserve, *v, eq, &others);
                    for (k, (_, b)) in alts.iter().enumerate() {
                        acc[k].push(focal_payoff(cfg.format, cfg.reserve, *v, *b, &others) - base);
                    }
                }
                acc
            })
            .collect();
        let mut total: Vec<Moments> = alts.iter().map(|_| Moments::default()).collect();
        for part in &parts {
            for (a, b) in total.iter_mut().zip(part) {
                a.merge(b);
            }
        }
        for ((v_tilde, bid), mom) in alts.iter().zip(&total) {
            out.push(DeviationGain { v: *v, v_tilde: *v_tilde, bid: *bid, gain: mom.mean(), stderr: mom.stderr(), admitted_trials: mom.count });
        }
    }
    out
}

pub const FOCAL_TYPES: [f64; 4] = [0.2, 0.4, 0.6, 0.8];

#[derive(Debug, Clone, Serialize)]
pub struct AuditTable {
    pub rows: Vec<DeviationGain>,
    /// Row with the largest gain.
    pub max_gain: DeviationGain,
    /// No deviation gains more than three standard errors.
    pub passes: bool,
}

/// Replays deviations to `sigma(j/20)`, `j = 0..=20`, for each focal type,
/// keeping only trials where the focal bidder is admitted.
pub fn best_response_audit(g: &GameSetup, strat: &StrategyProfile, cfg: &SimConfig) -> Result<AuditTable, SimError> {
    cfg.check(strat)?;
    if matches!(strat.existence, Verdict::ConditionFailed { .. }) {
        return Err(SimError::Unverified);
    }
    let by_type: Vec<(f64, Alternatives)> = FOCAL_TYPES
        .iter()
        .map(|&v| {
            let alts = (0..=20)
                .map(|j| {
                    let w = j as f64 / 20.0;
                    (Some(w), strat.bid(w))
                })
                .collect();
            (v, alts)
        })
        .collect();
    let rows = deviations(g, strat, cfg, &by_type);
    let max_gain = *rows.iter().max_by(|a, b| a.gain.total_cmp(&b.gain)).expect("audit grid is non-empty");
    let passes = rows.iter().all(|r| !r.is_significant());
    Ok(AuditTable { rows, max_gain, passes })
}
