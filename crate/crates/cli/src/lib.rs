//! Batch front end: reads a JSON run configuration, runs one command and
//! writes CSV (flat tables) or JSON (nested reports).

use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};
use serde::{Deserialize, Serialize};

use prescreen::beliefs::{Backend, BeliefsError, GameSetup};
use prescreen::equilibria::{ap_strategy, fp_strategy, sp_strategy, EquilibriumError, Format, StrategyProfile, Verdict};
use prescreen::numerics::{NumericsError, QuadratureSpec};
use prescreen::predictors::{Copula, Predictor, PredictorError, PredictorSpec, ValidationReport};
use prescreen::revenue::{
    condition12_check, curve_points, existence, mr_check_and_revenue, objective_value, ranking_report, sweep_optimal_n,
    uniform_auction_revenue, GridVerdict, Objective, RankingReport, RevenueError,
};
use prescreen::simulate::{ks_critical, run_sim, SimConfig, SimError};

pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_CONDITION: i32 = 3;
pub const EXIT_NUMERIC: i32 = 4;

/// Points in `strategy` dumps.
const STRATEGY_POINTS: usize = 1025;
const DEFAULT_TRIALS: u64 = 100_000;

#[derive(Debug, Parser)]
#[command(name = "prescreen", version, about = "Equilibrium bids, revenue and optimal prescreening for SP/FP/AP auctions")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// JSON run configuration.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output file; stdout when absent.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    #[arg(long, global = true)]
    pub trials: Option<u64>,
    #[arg(long, global = true, value_parser = parse_backend)]
    pub backend: Option<Backend>,
    /// Absolute and relative quadrature tolerance.
    #[arg(long, global = true)]
    pub tol: Option<f64>,
}

#[derive(Debug, Clone, Copy, Subcommand)]
pub enum Command {
    /// Value and existence verdict for every admitted number (CSV).
    RevenueCurve,
    /// Best verified admitted number per format (CSV).
    OptimalN,
    /// Per-n revenues of all formats with ranking verdicts (JSON).
    Compare,
    /// Equilibrium bid functions on a 1025-point grid (CSV).
    Strategy,
    /// Monte Carlo replay against the analytic values (JSON).
    Simulate,
    /// Predictor assumptions and existence conditions (JSON).
    Check,
    /// Revenue curves along a family of predictors (CSV).
    AccuracySweep,
}

fn parse_backend(s: &str) -> Result<Backend, String> {
    match s {
        "generic" => Ok(Backend::Generic),
        "closed-form" => Ok(Backend::ClosedForm),
        _ => Err(format!("unknown backend {s:?} (expected generic or closed-form)")),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CheckKind {
    Predictor,
    Condition12,
    Existence,
    Mrcon,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SweepFamily {
    Hallucinatory,
    Amh,
    Fgm,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AccuracySweep {
    pub family: SweepFamily,
    pub values: Vec<f64>,
}

fn default_formats() -> Vec<Format> {
    Format::ALL.to_vec()
}

fn default_grid() -> usize {
    1025
}

/// Validated before any computation; unknown keys are rejected.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub predictor: PredictorSpec,
    pub m: usize,
    #[serde(default)]
    pub n: Option<usize>,
    /// Inclusive range of admitted numbers to report.
    #[serde(default)]
    pub n_range: Option<(usize, usize)>,
    #[serde(default = "default_formats")]
    pub formats: Vec<Format>,
    #[serde(default)]
    pub objective: Objective,
    #[serde(default)]
    pub reserve: f64,
    /// Item count for the uniform-price auction.
    #[serde(default)]
    pub k: Option<usize>,
    #[serde(default)]
    pub quadrature: QuadratureSpec,
    #[serde(default = "default_grid")]
    pub grid_size: usize,
    #[serde(default)]
    pub backend: Backend,
    #[serde(default)]
    pub trials: Option<u64>,
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default)]
    pub output: Option<PathBuf>,
    #[serde(default)]
    pub sweep: Option<AccuracySweep>,
    #[serde(default)]
    pub checks: Option<Vec<CheckKind>>,
}

/// Error carrying its exit code.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("condition failed: {0}")]
    Condition(String),
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: RunConfig = serde_json::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |s: String| -> Result<()> { Err(CliError::Config(s).into()) };
        if self.m < 2 {
            return bad(format!("m={} must be at least 2", self.m));
        }
        if let Some(n) = self.n {
            if n < 2 || n > self.m {
                return bad(format!("n={n} outside [2, {}]", self.m));
            }
        }
        if let Some((lo, hi)) = self.n_range {
            if lo < 2 || hi > self.m || lo > hi {
                return bad(format!("n_range ({lo}, {hi}) outside [2, {}]", self.m));
            }
        }
        if self.formats.is_empty() {
            return bad("formats must not be empty".into());
        }
        if !(self.reserve.is_finite() && (0.0..1.0).contains(&self.reserve)) {
            return bad(format!("reserve={} outside [0, 1)", self.reserve));
        }
        if self.trials == Some(0) {
            return bad("trials must be at least 1".into());
        }
        self.quadrature.validate().map_err(|e| CliError::Config(e.to_string()))?;
        if let Some(s) = &self.sweep {
            if s.values.is_empty() {
                return bad("sweep.values must not be empty".into());
            }
        }
        Predictor::from_spec(&self.predictor).map_err(|e| CliError::Config(e.to_string()))?;
        Ok(())
    }

    fn apply(&mut self, cli: &Cli) -> Result<()> {
        if let Some(s) = cli.seed {
            self.seed = Some(s);
        }
        if let Some(t) = cli.trials {
            self.trials = Some(t);
        }
        if let Some(b) = cli.backend {
            self.backend = b;
        }
        if let Some(tol) = cli.tol {
            self.quadrature = self.quadrature.with_tol(tol);
        }
        if let Some(o) = &cli.out {
            self.output = Some(o.clone());
        }
        self.validate()
    }

    fn base(&self, predictor: Predictor) -> Result<GameSetup> {
        let n = self.n.unwrap_or(self.m);
        Ok(GameSetup::with_options(self.m, n, Arc::new(predictor), self.backend, self.quadrature, self.grid_size)?)
    }

    fn setup(&self) -> Result<GameSetup> {
        self.base(Predictor::from_spec(&self.predictor)?)
    }

    fn reported(&self, n: usize) -> bool {
        match (self.n_range, self.n) {
            (Some((lo, hi)), _) => (lo..=hi).contains(&n),
            _ => true,
        }
    }
}

/// Exit code for an error, walking the known error types.
pub fn exit_code(err: &anyhow::Error) -> i32 {
    fn numerics(e: &NumericsError) -> i32 {
        match e {
            NumericsError::InvalidSpec(_) | NumericsError::InvalidGrid(_) => EXIT_CONFIG,
            _ => EXIT_NUMERIC,
        }
    }
    fn beliefs(e: &BeliefsError) -> i32 {
        match e {
            BeliefsError::Numerics(e) => numerics(e),
            BeliefsError::Pole | BeliefsError::NonIntegrable(_) => EXIT_CONDITION,
            _ => EXIT_CONFIG,
        }
    }
    fn equilibrium(e: &EquilibriumError) -> i32 {
        match e {
            EquilibriumError::Beliefs(e) => beliefs(e),
            EquilibriumError::Numerics(e) => numerics(e),
            _ => EXIT_CONFIG,
        }
    }
    for cause in err.chain() {
        if let Some(e) = cause.downcast_ref::<CliError>() {
            return match e {
                CliError::Config(_) => EXIT_CONFIG,
                CliError::Condition(_) => EXIT_CONDITION,
            };
        }
        if let Some(e) = cause.downcast_ref::<RevenueError>() {
            return match e {
                RevenueError::Existence { .. } | RevenueError::NoVerifiedPoints => EXIT_CONDITION,
                RevenueError::Beliefs(e) => beliefs(e),
                RevenueError::Equilibrium(e) => equilibrium(e),
                RevenueError::Numerics(e) => numerics(e),
                _ => EXIT_CONFIG,
            };
        }
        if let Some(e) = cause.downcast_ref::<EquilibriumError>() {
            return equilibrium(e);
        }
        if let Some(e) = cause.downcast_ref::<BeliefsError>() {
            return beliefs(e);
        }
        if let Some(e) = cause.downcast_ref::<NumericsError>() {
            return numerics(e);
        }
        if let Some(e) = cause.downcast_ref::<PredictorError>() {
            return match e {
                PredictorError::Numerics(e) => numerics(e),
                _ => EXIT_CONFIG,
            };
        }
        if let Some(e) = cause.downcast_ref::<SimError>() {
            return match e {
                SimError::Unverified => EXIT_CONDITION,
                _ => EXIT_CONFIG,
            };
        }
    }
    1
}

/// Formats with 12 significant digits.
pub fn sig12(x: f64) -> String {
    if x == 0.0 || !x.is_finite() {
        return if x == 0.0 { "0".into() } else { x.to_string() };
    }
    let mag = x.abs().log10().floor() as i32;
    if !(-5..12).contains(&mag) {
        return format!("{x:.11e}");
    }
    let decimals = (11 - mag).max(0) as usize;
    let s = format!("{x:.decimals$}");
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        s
    }
}

/// Row of `revenue-curve` and `accuracy-sweep` output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurveRow {
    /// Family parameter in an accuracy sweep; empty for a single predictor.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub parameter: Option<f64>,
    pub n: usize,
    pub format: Format,
    pub objective: Objective,
    pub value: f64,
    pub existence: String,
    pub reserve: f64,
    pub backend: Backend,
}

fn csv_bytes(header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header)?;
    for r in rows {
        w.write_record(&r)?;
    }
    w.into_inner().map_err(|e| anyhow::anyhow!(e.to_string()))
}

fn curve_csv(rows: &[CurveRow], with_parameter: bool) -> Result<Vec<u8>> {
    let mut header = vec!["n", "format", "objective", "value", "existence", "reserve", "backend"];
    if with_parameter {
        header.insert(0, "parameter");
    }
    csv_bytes(
        &header,
        rows.iter().map(|r| {
            let mut rec = vec![
                r.n.to_string(),
                r.format.to_string(),
                r.objective.name().to_string(),
                sig12(r.value),
                r.existence.clone(),
                sig12(r.reserve),
                r.backend.to_string(),
            ];
            if with_parameter {
                rec.insert(0, r.parameter.map(sig12).unwrap_or_default());
            }
            rec
        }),
    )
}

/// Reads a CSV written by `revenue-curve` or `accuracy-sweep`.
pub fn read_curve_csv(path: &Path) -> Result<Vec<CurveRow>> {
    let mut r = csv::Reader::from_path(path)?;
    r.deserialize().map(|row| row.context("malformed curve row")).collect()
}

/// Writes `bytes` to `path` through a temporary file in the same directory,
/// or to stdout when `path` is `None`.
pub fn write_output(path: Option<&Path>, bytes: &[u8]) -> Result<()> {
    match path {
        None => {
            std::io::stdout().write_all(bytes)?;
            Ok(())
        }
        Some(path) => {
            let dir = path.parent().filter(|d| !d.as_os_str().is_empty()).unwrap_or(Path::new("."));
            let mut tmp = tempfile::NamedTempFile::new_in(dir).with_context(|| format!("creating temporary file in {}", dir.display()))?;
            tmp.write_all(bytes)?;
            tmp.persist(path).with_context(|| format!("writing {}", path.display()))?;
            Ok(())
        }
    }
}

fn json_bytes<T: Serialize>(value: &T) -> Result<Vec<u8>> {
    let mut v = serde_json::to_vec_pretty(value)?;
    v.push(b'\n');
    Ok(v)
}

/// Output of one command: the artifact and whether a requested condition failed.
pub struct Outcome {
    pub bytes: Vec<u8>,
    pub failure: Option<String>,
    pub messages: Vec<String>,
}

impl Outcome {
    fn ok(bytes: Vec<u8>) -> Self {
        Self { bytes, failure: None, messages: Vec::new() }
    }
}

fn curve_rows(cfg: &RunConfig, base: &GameSetup, parameter: Option<f64>) -> Result<Vec<CurveRow>> {
    let mut rows = Vec::new();
    for &format in &cfg.formats {
        for p in curve_points(base, format, cfg.objective, cfg.reserve)? {
            if cfg.reported(p.n) {
                rows.push(CurveRow {
                    parameter,
                    n: p.n,
                    format,
                    objective: cfg.objective,
                    value: p.value,
                    existence: p.existence.label().to_string(),
                    reserve: cfg.reserve,
                    backend: cfg.backend,
                });
            }
        }
    }
    Ok(rows)
}

pub fn cmd_revenue_curve(cfg: &RunConfig) -> Result<Outcome> {
    let rows = curve_rows(cfg, &cfg.setup()?, None)?;
    Ok(Outcome::ok(curve_csv(&rows, false)?))
}

pub fn cmd_accuracy_sweep(cfg: &RunConfig) -> Result<Outcome> {
    let Some(sweep) = &cfg.sweep else {
        bail!(CliError::Config("accuracy-sweep needs a `sweep` section".into()));
    };
    let template = Predictor::from_spec(&cfg.predictor)?;
    let mut rows = Vec::new();
    for &a in &sweep.values {
        let copula = match sweep.family {
            SweepFamily::Hallucinatory => Copula::hallucinatory(a),
            SweepFamily::Amh => Copula::amh(a),
            SweepFamily::Fgm => Copula::fgm(a),
        }
        .map_err(|e| CliError::Config(e.to_string()))?;
        let p = Predictor::new(copula, template.f1.clone(), template.f2.clone())?;
        rows.extend(curve_rows(cfg, &cfg.base(p)?, Some(a))?);
    }
    Ok(Outcome::ok(curve_csv(&rows, true)?))
}

pub fn cmd_optimal_n(cfg: &RunConfig) -> Result<Outcome> {
    let base = cfg.setup()?;
    let mut records = Vec::new();
    let mut messages = Vec::new();
    for &format in &cfg.formats {
        let curve = sweep_optimal_n(&base, format, cfg.objective, cfg.reserve)?;
        let value = curve.value_at(curve.argmax_n).unwrap_or(f64::NAN);
        messages.push(format!("{format}: n*={}", curve.argmax_n));
        records.push(vec![
            format.to_string(),
            cfg.objective.name().to_string(),
            curve.argmax_n.to_string(),
            sig12(value),
            sig12(cfg.reserve),
            cfg.backend.to_string(),
        ]);
    }
    let bytes = csv_bytes(&["format", "objective", "argmax_n", "value", "reserve", "backend"], records)?;
    Ok(Outcome { bytes, failure: None, messages })
}

#[derive(Serialize)]
struct UniformAuctionRow {
    n: usize,
    k: usize,
    revenue: f64,
}

#[derive(Serialize)]
struct CompareReport {
    m: usize,
    backend: Backend,
    #[serde(flatten)]
    report: RankingReport,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    uniform_auction: Vec<UniformAuctionRow>,
}

pub fn cmd_compare(cfg: &RunConfig) -> Result<Outcome> {
    let base = cfg.setup()?;
    let mut report = ranking_report(&base, cfg.reserve)?;
    if let Some(n) = cfg.n {
        report.rows.retain(|r| r.n == n);
    } else {
        report.rows.retain(|r| cfg.reported(r.n));
    }
    let mut uniform_auction = Vec::new();
    if let Some(k) = cfg.k {
        for row in &report.rows {
            if k < row.n {
                uniform_auction.push(UniformAuctionRow { n: row.n, k, revenue: uniform_auction_revenue(&base.with_n(row.n)?, k)? });
            }
        }
    }
    Ok(Outcome::ok(json_bytes(&CompareReport { m: cfg.m, backend: cfg.backend, report, uniform_auction })?))
}

fn strategy_for(g: &GameSetup, format: Format, reserve: f64) -> Result<StrategyProfile> {
    let s = match format {
        Format::SecondPrice => sp_strategy(g, reserve)?,
        Format::FirstPrice => fp_strategy(g, reserve)?,
        Format::AllPay => ap_strategy(g, reserve)?,
    };
    Ok(s.with_existence(existence(g, format)?))
}

pub fn cmd_strategy(cfg: &RunConfig) -> Result<Outcome> {
    let g = cfg.setup()?;
    let mut records = Vec::new();
    let mut failed = Vec::new();
    for &format in &cfg.formats {
        let s = strategy_for(&g, format, cfg.reserve)?;
        if !s.existence.is_verified() {
            failed.push(format.to_string());
        }
        for (v, b) in s.dump(STRATEGY_POINTS) {
            records.push(vec![
                sig12(v),
                format.to_string(),
                g.n.to_string(),
                b.map(sig12).unwrap_or_default(),
                s.existence.label().to_string(),
            ]);
        }
    }
    let bytes = csv_bytes(&["v", "format", "n", "bid", "existence"], records)?;
    let failure = (!failed.is_empty()).then(|| format!("no verified equilibrium for {}", failed.join(", ")));
    Ok(Outcome { bytes, failure, messages: Vec::new() })
}

#[derive(Serialize)]
struct SimSummary {
    format: Format,
    n: usize,
    trials: u64,
    seed: u64,
    reserve: f64,
    existence: Verdict,
    revenue_mean: f64,
    revenue_stderr: f64,
    analytic_revenue: f64,
    z_score: f64,
    highest_bid_mean: f64,
    highest_bid_stderr: f64,
    admission_freq: Vec<f64>,
    admission_stderr: Vec<f64>,
    top_n_rate: f64,
    ks_marginal: f64,
    ks_max: f64,
    ks_critical_1pct: f64,
}

pub fn cmd_simulate(cfg: &RunConfig) -> Result<Outcome> {
    let g = cfg.setup()?;
    let trials = cfg.trials.unwrap_or(DEFAULT_TRIALS);
    let seed = cfg.seed.unwrap_or(0);
    let marginal = g.marginal_table()?;
    let largest = g.kth_order_cdf(1)?.cdf;
    let mut out = Vec::new();
    for &format in &cfg.formats {
        let s = strategy_for(&g, format, cfg.reserve)?;
        let sim_cfg = SimConfig::new(trials, seed, format).with_reserve(cfg.reserve);
        let res = run_sim(&g, &s, &sim_cfg)?;
        let analytic = objective_value(&g, format, Objective::Revenue, cfg.reserve)?;
        out.push(SimSummary {
            format,
            n: g.n,
            trials,
            seed,
            reserve: cfg.reserve,
            existence: s.existence,
            revenue_mean: res.revenue_mean,
            revenue_stderr: res.revenue_stderr,
            analytic_revenue: analytic,
            z_score: (res.revenue_mean - analytic) / res.revenue_stderr,
            highest_bid_mean: res.highest_bid_mean,
            highest_bid_stderr: res.highest_bid_stderr,
            admission_freq: res.admission_freq,
            admission_stderr: res.admission_stderr,
            top_n_rate: res.top_n_rate,
            ks_marginal: res.empirical_marginal.ks_statistic(|x| marginal.eval(x)),
            ks_max: res.empirical_max.ks_statistic(|x| largest.eval(x)),
            ks_critical_1pct: ks_critical(res.empirical_marginal.len(), 0.01),
        });
    }
    Ok(Outcome::ok(json_bytes(&out)?))
}

#[derive(Serialize)]
struct ExistenceRow {
    n: usize,
    format: Format,
    verdict: Verdict,
}

#[derive(Serialize, Default)]
struct CheckReport {
    #[serde(skip_serializing_if = "Option::is_none")]
    predictor: Option<ValidationReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    condition12: Option<GridVerdict>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    existence: Vec<ExistenceRow>,
    #[serde(skip_serializing_if = "Option::is_none")]
    mrcon: Option<GridVerdict>,
    failures: Vec<String>,
}

pub fn cmd_check(cfg: &RunConfig) -> Result<Outcome> {
    let checks = cfg.checks.clone().unwrap_or_else(|| vec![CheckKind::Predictor, CheckKind::Condition12, CheckKind::Existence]);
    let base = cfg.setup()?;
    let mut rep = CheckReport::default();
    for check in checks {
        match check {
            CheckKind::Predictor => {
                let v = base.predictor.validate()?;
                for (ok, name) in [
                    (v.assumption1, "assumption1"),
                    (v.prd_v_given_s, "prd_v_given_s"),
                    (v.prd_s_given_v, "prd_s_given_v"),
                    (v.condition13, "condition13"),
                ] {
                    if !ok {
                        rep.failures.push(format!("predictor: {name} violated"));
                    }
                }
                rep.predictor = Some(v);
            }
            CheckKind::Condition12 => {
                let v = condition12_check(&base)?;
                if !v.holds {
                    rep.failures.push(format!("condition12 violated at {:?}", v.worst));
                }
                rep.condition12 = Some(v);
            }
            CheckKind::Existence => {
                let ns: Vec<usize> = match cfg.n {
                    Some(n) => vec![n],
                    None => (2..=cfg.m).filter(|&n| cfg.reported(n)).collect(),
                };
                for n in ns {
                    let g = base.with_n(n)?;
                    for &format in &cfg.formats {
                        let verdict = existence(&g, format)?;
                        if !verdict.is_verified() {
                            rep.failures.push(format!("{format} existence fails at n={n}"));
                        }
                        rep.existence.push(ExistenceRow { n, format, verdict });
                    }
                }
            }
            CheckKind::Mrcon => {
                let n = cfg.n.unwrap_or(cfg.m.saturating_sub(1).max(2));
                let r = mr_check_and_revenue(&base.with_n(n)?)?;
                if !r.mrcon.holds {
                    rep.failures.push(format!("mechanism condition fails at n={n}"));
                }
                rep.mrcon = Some(r.mrcon);
            }
        }
    }
    let failure = (!rep.failures.is_empty()).then(|| rep.failures.join("; "));
    Ok(Outcome { bytes: json_bytes(&rep)?, failure, messages: Vec::new() })
}

/// Caps the global thread pool from `PRESCREEN_THREADS`.
pub fn configure_threads() -> Result<()> {
    if let Ok(v) = std::env::var("PRESCREEN_THREADS") {
        let n: usize = v.trim().parse().map_err(|_| CliError::Config(format!("PRESCREEN_THREADS={v:?} is not a positive integer")))?;
        if n == 0 {
            bail!(CliError::Config("PRESCREEN_THREADS must be positive".into()));
        }
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global().ok();
    }
    Ok(())
}

/// Runs a parsed command line; returns the process exit code.
pub fn run(cli: Cli) -> Result<i32> {
    configure_threads()?;
    let Some(path) = &cli.config else {
        bail!(CliError::Config("--config <path> is required".into()));
    };
    let mut cfg = RunConfig::load(path)?;
    cfg.apply(&cli)?;
    let outcome = match cli.command {
        Command::RevenueCurve => cmd_revenue_curve(&cfg)?,
        Command::OptimalN => cmd_optimal_n(&cfg)?,
        Command::Compare => cmd_compare(&cfg)?,
        Command::Strategy => cmd_strategy(&cfg)?,
        Command::Simulate => cmd_simulate(&cfg)?,
        Command::Check => cmd_check(&cfg)?,
        Command::AccuracySweep => cmd_accuracy_sweep(&cfg)?,
    };
    write_output(cfg.output.as_deref(), &outcome.bytes)?;
    for m in &outcome.messages {
        eprintln!("{m}");
    }
    match outcome.failure {
        Some(f) => {
            eprintln!("error: {}", CliError::Condition(f));
            Ok(EXIT_CONDITION)
        }
        None => Ok(0),
    }
}
