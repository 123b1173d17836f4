use std::sync::Arc;

use prescreen::beliefs::{Backend, GameSetup};
use prescreen::equilibria::{ap_strategy, fp_strategy, sp_strategy, Format};
use prescreen::predictors::{Copula, MarginalDist, Predictor};
use prescreen::revenue::{revenue_ap, revenue_fp, revenue_sp};
use prescreen::simulate::{best_response_audit, ks_critical, run_sim, SimConfig, SimError};

fn setup(m: usize, n: usize, p: Predictor) -> GameSetup {
    GameSetup::new(m, n, Arc::new(p), Backend::Generic).unwrap()
}

fn power(c: f64) -> MarginalDist {
    MarginalDist::power(c).unwrap()
}

#[test]
fn null_predictor_revenue_matches_analytic() {
    let g = setup(3, 3, Predictor::null(MarginalDist::uniform()));
    let cases = [
        (sp_strategy(&g, 0.0).unwrap(), revenue_sp(&g, 0.0).unwrap()),
        (fp_strategy(&g, 0.0).unwrap(), revenue_fp(&g, 0.0).unwrap()),
        (ap_strategy(&g, 0.0).unwrap(), revenue_ap(&g, 0.0).unwrap()),
    ];
    for (strat, analytic) in cases {
        let res = run_sim(&g, &strat, &SimConfig::new(40_000, 11, strat.format)).unwrap();
        assert!((res.revenue_mean - analytic).abs() < 3.0 * res.revenue_stderr, "{:?}: {} vs {analytic}", strat.format, res.revenue_mean);
        assert!((res.revenue_mean - 0.5).abs() < 0.01);
    }
}

#[test]
fn reserve_revenue_matches_analytic() {
    let g = setup(4, 2, Predictor::hallucinatory(0.5, MarginalDist::uniform()).unwrap());
    let r = 0.3;
    let strat = sp_strategy(&g, r).unwrap();
    let res = run_sim(&g, &strat, &SimConfig::new(40_000, 5, Format::SecondPrice).with_reserve(r)).unwrap();
    let want = revenue_sp(&g, r).unwrap();
    assert!((res.revenue_mean - want).abs() < 3.0 * res.revenue_stderr);
}

#[test]
fn admission_is_symmetric_and_sums_to_n() {
    let g = setup(5, 2, Predictor::with_copula(Copula::fgm(1.0).unwrap(), power(0.5)).unwrap());
    let strat = sp_strategy(&g, 0.0).unwrap();
    let res = run_sim(&g, &strat, &SimConfig::new(30_000, 3, Format::SecondPrice)).unwrap();
    let total: f64 = res.admission_freq.iter().sum();
    assert!((total - 2.0).abs() < 1e-12);
    for (f, se) in res.admission_freq.iter().zip(&res.admission_stderr) {
        assert!((f - 0.4).abs() < 4.0 * se);
    }
}

#[test]
fn comonotonic_admits_top_valuations() {
    let g = setup(6, 3, Predictor::perfect(MarginalDist::uniform()));
    let strat = sp_strategy(&g, 0.0).unwrap();
    let res = run_sim(&g, &strat, &SimConfig::new(5_000, 1, Format::SecondPrice)).unwrap();
    assert_eq!(res.top_n_rate, 1.0);
}

#[test]
fn empirical_distributions_pass_ks() {
    let g = setup(5, 3, Predictor::hallucinatory(0.5, power(0.5)).unwrap());
    let strat = sp_strategy(&g, 0.0).unwrap();
    let res = run_sim(&g, &strat, &SimConfig::new(20_000, 9, Format::SecondPrice)).unwrap();
    let crit = ks_critical(res.empirical_marginal.len(), 0.01);
    let marginal = g.marginal_table().unwrap();
    let largest = g.kth_order_cdf(1).unwrap().cdf;
    assert!(res.empirical_marginal.ks_statistic(|x| marginal.eval(x)) < crit);
    assert!(res.empirical_max.ks_statistic(|x| largest.eval(x)) < crit);
}

#[test]
fn determinism_across_thread_counts() {
    let g = setup(4, 2, Predictor::hallucinatory(0.3, MarginalDist::uniform()).unwrap());
    let strat = fp_strategy(&g, 0.0).unwrap();
    let cfg = SimConfig::new(10_000, 42, Format::FirstPrice);
    let run = |threads| {
        let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
        pool.install(|| run_sim(&g, &strat, &cfg).unwrap())
    };
    let (a, b) = (run(1), run(4));
    assert_eq!(a.revenue_mean.to_bits(), b.revenue_mean.to_bits());
    assert_eq!(a.revenue_stderr.to_bits(), b.revenue_stderr.to_bits());
    assert_eq!(a.empirical_marginal, b.empirical_marginal);
    let c = run_sim(&g, &strat, &SimConfig::new(10_000, 43, Format::FirstPrice)).unwrap();
    assert_ne!(a.revenue_mean, c.revenue_mean);
}

#[test]
fn config_errors() {
    let g = setup(3, 2, Predictor::null(MarginalDist::uniform()));
    let strat = sp_strategy(&g, 0.0).unwrap();
    assert_eq!(run_sim(&g, &strat, &SimConfig::new(0, 1, Format::SecondPrice)).unwrap_err(), SimError::NoTrials);
    assert!(matches!(run_sim(&g, &strat, &SimConfig::new(10, 1, Format::AllPay)), Err(SimError::FormatMismatch { .. })));
    assert!(matches!(
        run_sim(&g, &strat, &SimConfig::new(10, 1, Format::SecondPrice).with_reserve(0.2)),
        Err(SimError::ReserveMismatch { .. })
    ));
}

#[test]
fn audits_find_no_profitable_deviation() {
    let g = setup(4, 2, Predictor::hallucinatory(0.5, MarginalDist::uniform()).unwrap());
    let sp = sp_strategy(&g, 0.0).unwrap();
    let table = best_response_audit(&g, &sp, &SimConfig::new(8_000, 2, Format::SecondPrice)).unwrap();
    assert_eq!(table.rows.len(), 4 * 21);
    assert!(table.passes, "{:?}", table.max_gain);

    let g = setup(3, 3, Predictor::null(MarginalDist::uniform()));
    let fp = fp_strategy(&g, 0.0).unwrap();
    let table = best_response_audit(&g, &fp, &SimConfig::new(8_000, 3, Format::FirstPrice)).unwrap();
    assert!(table.passes, "{:?}", table.max_gain);

    let g = setup(4, 2, Predictor::perfect(power(0.2)));
    let ap = ap_strategy(&g, 0.0).unwrap();
    let table = best_response_audit(&g, &ap, &SimConfig::new(8_000, 4, Format::AllPay)).unwrap();
    assert!(table.passes, "{:?}", table.max_gain);
}

#[test]
fn audit_detects_a_bad_strategy() {
    // Bidding truthfully in a first-price auction leaves money on the table.
    let g = setup(3, 3, Predictor::null(MarginalDist::uniform()));
    let truthful = sp_strategy(&g, 0.0).unwrap();
    let mut fake = fp_strategy(&g, 0.0).unwrap();
    fake.bid_fn = truthful.bid_fn.clone();
    fake.cutoff = truthful.cutoff;
    let table = best_response_audit(&g, &fake, &SimConfig::new(8_000, 5, Format::FirstPrice)).unwrap();
    assert!(!table.passes);
}

#[test]
fn explicit_deviation_grid() {
    let g = setup(3, 3, Predictor::null(MarginalDist::uniform()));
    let strat = fp_strategy(&g, 0.0).unwrap();
    let mut cfg = SimConfig::new(5_000, 8, Format::FirstPrice);
    cfg.deviation_grid = Some(vec![(0.6, 0.1), (0.6, 0.4)]);
    let res = run_sim(&g, &strat, &cfg).unwrap();
    assert_eq!(res.deviation_gains.len(), 2);
    assert!(res.deviation_gains[0].gain < 0.0);
    assert_eq!(res.deviation_gains[0].admitted_trials, 5_000);
}
