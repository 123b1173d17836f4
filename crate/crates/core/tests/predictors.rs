use prescreen::predictors::{pqd_compare, Copula, Marginal, MarginalDist, PqdOrdering, Predictor, PredictorError, PredictorSpec};

fn uniform() -> MarginalDist {
    MarginalDist::uniform()
}

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() < tol
}

#[test]
fn copula_partial_examples() {
    let (c, c1, c2) = Copula::fgm(1.0).unwrap().partials(0.5, 0.5);
    assert!(close(c, 0.3125, 1e-15) && close(c1, 0.5, 1e-15) && close(c2, 0.5, 1e-15));
    let (c, c1, c2) = Copula::Independence.partials(0.3, 0.7);
    assert!(close(c, 0.21, 1e-15) && close(c1, 0.7, 1e-15) && close(c2, 0.3, 1e-15));
    assert_eq!(Copula::Comonotonic.partials(0.2, 0.6), (0.2, 1.0, 0.0));
    assert_eq!(Copula::Comonotonic.partials(0.4, 0.4), (0.4, 1.0, 0.0));
}

#[test]
fn parameter_validation() {
    for bad in [-0.1, 1.1, f64::NAN] {
        assert!(matches!(Copula::fgm(bad), Err(PredictorError::Parameter { .. })));
        assert!(matches!(Copula::amh(bad), Err(PredictorError::Parameter { .. })));
        assert!(matches!(Copula::hallucinatory(bad), Err(PredictorError::Parameter { .. })));
    }
    assert!(Copula::custom_fgm(-0.5).is_ok());
    assert!(Copula::custom_fgm(-1.5).is_err());
    assert!(matches!(
        Copula::mixture(vec![(0.5, Copula::Comonotonic), (0.4, Copula::Independence)]),
        Err(PredictorError::MixtureWeights(_))
    ));
    assert!(MarginalDist::power(0.0).is_err());
    assert!(MarginalDist::new(Marginal::Table { grid: vec![0.0, 0.5, 1.0], cdf: vec![0.0, 0.7, 0.6] }).is_err());
}

#[test]
fn copula_boundaries_and_two_increasing() {
    let families = [
        Copula::Independence,
        Copula::Comonotonic,
        Copula::amh(0.7).unwrap(),
        Copula::fgm(0.4).unwrap(),
        Copula::hallucinatory(0.3).unwrap(),
        Copula::mixture(vec![(0.2, Copula::fgm(1.0).unwrap()), (0.8, Copula::amh(0.5).unwrap())]).unwrap(),
    ];
    let grid: Vec<f64> = (0..=40).map(|i| i as f64 / 40.0).collect();
    for c in &families {
        for &x in &grid {
            assert!(close(c.cdf(x, 0.0), 0.0, 1e-14) && close(c.cdf(0.0, x), 0.0, 1e-14));
            assert!(close(c.cdf(x, 1.0), x, 1e-14) && close(c.cdf(1.0, x), x, 1e-14));
        }
        for w in grid.windows(2) {
            for z in grid.windows(2) {
                let vol = c.cdf(w[1], z[1]) - c.cdf(w[1], z[0]) - c.cdf(w[0], z[1]) + c.cdf(w[0], z[0]);
                assert!(vol >= -1e-14, "{c:?}");
            }
        }
    }
}

#[test]
fn conditional_cdfs() {
    let ind = Predictor::null(MarginalDist::power(0.5).unwrap());
    assert!(close(ind.cond_cdf_value_given_signal(0.36, 0.9), 0.6, 1e-14));
    let perfect = Predictor::perfect(uniform());
    assert_eq!(perfect.cond_cdf_value_given_signal(0.6, 0.4), 1.0);
    assert_eq!(perfect.cond_cdf_value_given_signal(0.3, 0.4), 0.0);
    assert_eq!(perfect.cond_cdf_signal_given_value(0.4, 0.6), 0.0);
    let fgm = Predictor::with_copula(Copula::fgm(0.8).unwrap(), uniform()).unwrap();
    assert!(close(fgm.cond_cdf_value_given_signal(0.5, 0.5), 0.5, 1e-15));
    let g = 0.35;
    let hp = Predictor::hallucinatory(g, MarginalDist::power(2.0).unwrap()).unwrap();
    for (s, v) in [(0.2, 0.5), (0.3, 0.5), (0.9, 0.1)] {
        let want = g * if s >= v * v { 1.0 } else { 0.0 } + (1.0 - g) * s;
        assert!(close(hp.cond_cdf_signal_given_value(s, v), want, 1e-14));
    }
}

#[test]
fn conditional_expectation() {
    let c = 0.5;
    let ind = Predictor::null(MarginalDist::power(c).unwrap());
    assert!(close(ind.cond_expectation(0.3).unwrap(), c / (c + 1.0), 1e-9));
    let perfect = Predictor::perfect(MarginalDist::power(2.0).unwrap());
    assert!(close(perfect.cond_expectation(0.49).unwrap(), 0.7, 1e-9));
    // FGM(1) with uniform marginals at s=1: int (1 - v(1 - (1 - v))) dv = 2/3.
    let fgm = Predictor::with_copula(Copula::fgm(1.0).unwrap(), uniform()).unwrap();
    assert!(close(fgm.cond_expectation(1.0).unwrap(), 2.0 / 3.0, 1e-9));
}

#[test]
fn validation_report() {
    for a in [0.0, 0.25, 0.5, 0.75, 1.0] {
        for c in [Copula::amh(a).unwrap(), Copula::fgm(a).unwrap(), Copula::hallucinatory(a).unwrap()] {
            let p = Predictor::with_copula(c.clone(), MarginalDist::power(0.5).unwrap()).unwrap();
            assert!(p.validate().unwrap().all(), "{c:?}");
        }
    }
    assert!(Predictor::null(uniform()).validate().unwrap().all());
    assert!(Predictor::perfect(uniform()).validate().unwrap().all());
    let bad = Predictor::with_copula(Copula::custom_fgm(-0.5).unwrap(), uniform()).unwrap();
    assert!(!bad.validate().unwrap().assumption1);
}

#[test]
fn pqd_examples() {
    let f = || MarginalDist::power(0.7).unwrap();
    let perfect = Predictor::perfect(f());
    let hp = Predictor::hallucinatory(0.5, f()).unwrap();
    assert_eq!(pqd_compare(&perfect, &hp).unwrap(), PqdOrdering::ADominates);
    assert_eq!(pqd_compare(&hp, &perfect).unwrap(), PqdOrdering::BDominates);
    let amh = Predictor::with_copula(Copula::amh(0.5).unwrap(), f()).unwrap();
    assert_eq!(pqd_compare(&hp, &amh).unwrap(), PqdOrdering::ADominates);
    let fgm = Predictor::with_copula(Copula::fgm(0.3).unwrap(), f()).unwrap();
    assert_eq!(pqd_compare(&fgm, &fgm.clone()).unwrap(), PqdOrdering::Equal);
    let other = Predictor::perfect(uniform());
    assert!(matches!(pqd_compare(&perfect, &other), Err(PredictorError::MarginalMismatch { .. })));
    // Weak comonotone mass wins near the corner, FGM(1) wins in the middle.
    let weak = Predictor::hallucinatory(0.1, f()).unwrap();
    let strong_fgm = Predictor::with_copula(Copula::fgm(1.0).unwrap(), f()).unwrap();
    assert_eq!(pqd_compare(&weak, &strong_fgm).unwrap(), PqdOrdering::Incomparable);
}

#[test]
fn sampling_examples() {
    let ind = Predictor::null(MarginalDist::power(2.0).unwrap());
    assert!(close(ind.sample_signal(0.3, 0.25), 0.25, 1e-12));
    let perfect = Predictor::perfect(MarginalDist::power(2.0).unwrap());
    for u in [0.01, 0.5, 0.99] {
        assert!(close(perfect.sample_signal(0.6, u), 0.36, 1e-12));
    }
    // Component draw below gamma gives the informative signal.
    let hp = Predictor::hallucinatory(0.4, MarginalDist::power(2.0).unwrap()).unwrap();
    assert!(close(hp.sample_signal(0.5, 0.2), 0.25, 1e-12));
    let s = hp.sample_signal(0.5, 0.7);
    assert!(close(s, 0.5, 1e-12), "{s}");
}

#[test]
fn sampled_signals_follow_the_conditional_law() {
    use rand::{Rng, SeedableRng};
    let p = Predictor::with_copula(Copula::amh(0.8).unwrap(), MarginalDist::power(0.5).unwrap()).unwrap();
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(17);
    let n = 100_000;
    let mut draws: Vec<f64> = (0..n).map(|_| p.sample_signal(0.5, rng.gen::<f64>())).collect();
    draws.sort_by(f64::total_cmp);
    let ks = draws
        .iter()
        .enumerate()
        .map(|(i, &s)| {
            let f = p.cond_cdf_signal_given_value(s, 0.5);
            (f - i as f64 / n as f64).abs().max(((i + 1) as f64 / n as f64 - f).abs())
        })
        .fold(0.0, f64::max);
    assert!(ks < 1.628 / (n as f64).sqrt(), "ks={ks}");
}

#[test]
fn spec_round_trip() {
    let json = r#"{"copula":{"family":"mixture","components":[{"weight":0.3,"copula":{"family":"comonotonic"}},{"weight":0.7,"copula":{"family":"fgm","alpha":0.5}}]},"f1":{"family":"power","c":0.2},"f2":{"family":"table","grid":[0,0.5,1],"cdf":[0,0.25,1]}}"#;
    let spec: PredictorSpec = serde_json::from_str(json).unwrap();
    let p = Predictor::from_spec(&spec).unwrap();
    assert_eq!(p.to_spec(), spec);
    let again: PredictorSpec = serde_json::from_str(&serde_json::to_string(&spec).unwrap()).unwrap();
    assert_eq!(again, spec);
    assert!(serde_json::from_str::<PredictorSpec>(r#"{"copula":{"family":"independence"},"f1":{"family":"power","c":1},"f2":{"family":"power","c":1},"extra":1}"#).is_err());
    assert!(serde_json::from_str::<PredictorSpec>(r#"{"copula":{"family":"fgm","alpha":0.5,"beta":1},"f1":{"family":"power","c":1},"f2":{"family":"power","c":1}}"#).is_err());
}

#[test]
fn marginal_consistency() {
    let p = Predictor::with_copula(Copula::amh(0.6).unwrap(), MarginalDist::power(0.3).unwrap()).unwrap();
    for i in 0..=100 {
        let x = i as f64 / 100.0;
        assert!(close(p.joint_cdf(x, 1.0), p.f1.cdf(x), 1e-10));
        assert!(close(p.joint_cdf(1.0, x), p.f2.cdf(x), 1e-10));
        assert!(close(p.f1.quantile(p.f1.cdf(x)), x, 1e-8));
    }
    let t = MarginalDist::new(Marginal::Table { grid: vec![0.0, 0.25, 0.5, 0.75, 1.0], cdf: vec![0.0, 0.1, 0.4, 0.7, 1.0] }).unwrap();
    for i in 0..=100 {
        let x = i as f64 / 100.0;
        assert!(close(t.quantile(t.cdf(x)), x, 1e-8));
    }
}
