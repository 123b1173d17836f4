use std::sync::Arc;

use prescreen::beliefs::{Backend, GameSetup};
use prescreen::equilibria::{
    ap_cutoff, ap_existence_check, ap_strategy, fp_existence_check, fp_strategy, inflated_type, j_function, sp_strategy, Format,
};
use prescreen::numerics::binom;
use prescreen::predictors::{MarginalDist, Predictor};

fn setup(m: usize, n: usize, p: Predictor) -> GameSetup {
    GameSetup::new(m, n, Arc::new(p), Backend::Generic).unwrap()
}

fn power(c: f64) -> MarginalDist {
    MarginalDist::power(c).unwrap()
}

#[test]
fn second_price_is_truthful() {
    let g = setup(5, 3, Predictor::hallucinatory(0.4, power(0.5)).unwrap());
    let s = sp_strategy(&g, 0.0).unwrap();
    assert_eq!(s.bid(0.37), Some(0.37));
    assert!(s.existence.is_verified());
    let s = sp_strategy(&g, 0.3).unwrap();
    assert_eq!(s.bid(0.37), Some(0.37));
    assert_eq!(s.bid(0.2), None);
}

#[test]
fn first_price_iid_uniform() {
    let m = 4;
    let g = setup(m, m, Predictor::null(MarginalDist::uniform()));
    let s = fp_strategy(&g, 0.0).unwrap();
    assert_eq!(s.bid(0.0), Some(0.0));
    for v in [0.1, 0.35, 0.8, 1.0] {
        let want = (m - 1) as f64 * v / m as f64;
        assert!((s.bid(v).unwrap() - want).abs() < 1e-7, "v={v}");
    }
}

#[test]
fn first_price_perfect_predictor_is_linear_for_every_n() {
    let (m, c) = (7, 0.2);
    let slope = (m - 1) as f64 * c / ((m - 1) as f64 * c + 1.0);
    for n in 2..=m {
        let g = setup(m, n, Predictor::perfect(power(c)));
        let s = fp_strategy(&g, 0.0).unwrap();
        for v in [0.01, 0.2, 0.5, 0.93] {
            assert!((s.bid(v).unwrap() - slope * v).abs() < 1e-6, "n={n} v={v}");
        }
    }
}

#[test]
fn first_price_shades_and_respects_reserve() {
    let g = setup(5, 3, Predictor::hallucinatory(0.5, power(0.7)).unwrap());
    let s = fp_strategy(&g, 0.0).unwrap();
    for i in 1..=100 {
        let v = i as f64 / 100.0;
        let b = s.bid(v).unwrap();
        assert!(b >= 0.0 && b < v, "v={v} b={b}");
    }
    let r = 0.3;
    let s = fp_strategy(&g, r).unwrap();
    assert_eq!(s.bid(0.29), None);
    assert!((s.bid(r).unwrap() - r).abs() < 1e-12);
    assert!(s.bid(0.6).unwrap() > r);
    assert!(fp_strategy(&g, 1.0).is_err());
}

#[test]
fn first_price_existence_examples() {
    for p in [Predictor::null(power(0.5)), Predictor::perfect(power(0.5))] {
        for n in [2, 3, 5] {
            let g = setup(5, n, p.clone());
            let s = fp_strategy(&g, 0.0).unwrap();
            assert!(fp_existence_check(&g, &s).unwrap().is_verified());
        }
    }
    for c in [0.3, 1.0] {
        for gamma in [0.2, 0.6, 0.9] {
            for n in [2, 3] {
                let g = setup(3, n, Predictor::hallucinatory(gamma, power(c)).unwrap());
                let s = fp_strategy(&g, 0.0).unwrap();
                let v = fp_existence_check(&g, &s).unwrap();
                assert!(v.is_verified(), "c={c} gamma={gamma} n={n}: {v:?}");
            }
        }
    }
}

#[test]
fn all_pay_iid_uniform() {
    let m = 5;
    let g = setup(m, m, Predictor::null(MarginalDist::uniform()));
    let s = ap_strategy(&g, 0.0).unwrap();
    assert_eq!(s.bid(0.0), Some(0.0));
    for v in [0.2f64, 0.6, 1.0] {
        let want = (m - 1) as f64 * v.powi(m as i32) / m as f64;
        assert!((s.bid(v).unwrap() - want).abs() < 1e-9);
    }
    assert_eq!(s.format, Format::AllPay);
}

#[test]
fn all_pay_perfect_predictor_decreases_in_n() {
    let m = 7;
    let strategies: Vec<_> = (2..=m).map(|n| ap_strategy(&setup(m, n, Predictor::perfect(power(0.2))), 0.0).unwrap()).collect();
    for w in strategies.windows(2) {
        for i in 0..=100 {
            let v = i as f64 / 100.0;
            assert!(w[1].bid(v).unwrap() <= w[0].bid(v).unwrap() + 1e-7);
        }
    }
}

#[test]
fn all_pay_cutoff_solves_defining_equation() {
    for n in 2..=5 {
        let g = setup(5, n, Predictor::perfect(MarginalDist::uniform()));
        for r in [0.1, 0.3] {
            let tau = ap_cutoff(&g, r).unwrap();
            assert!((tau * g.win_cdf_h(tau, tau).unwrap() - r).abs() < 1e-9);
            let s = ap_strategy(&g, r).unwrap();
            assert_eq!(s.bid(tau - 1e-6), None);
            assert!((s.bid(tau).unwrap() - r).abs() < 1e-12);
        }
    }
}

#[test]
fn all_pay_existence_examples() {
    for n in 2..=6 {
        assert!(ap_existence_check(&setup(6, n, Predictor::null(power(2.0)))).unwrap().is_verified());
    }
    for n in 2..=7 {
        let v = ap_existence_check(&setup(7, n, Predictor::perfect(power(0.2)))).unwrap();
        assert!(v.is_verified(), "n={n}: {v:?}");
    }
    // Uniform prior with the perfect predictor: theta decreases near 0 when n is small.
    let v = ap_existence_check(&setup(5, 2, Predictor::perfect(MarginalDist::uniform()))).unwrap();
    assert!(!v.is_verified());
}

#[test]
fn inflated_type_examples() {
    let g = setup(6, 3, Predictor::null(power(0.5)));
    let t = inflated_type(&g).unwrap();
    assert!(t.monotone);
    assert_eq!(t.curve.eval(0.0), 0.0);
    assert!((t.curve.eval(0.5) - binom(6, 3) * 0.5).abs() < 1e-9);

    // Perfect predictor, m=7, n=2: compare against the closed-form 1/kappa.
    let (m, n) = (7usize, 2usize);
    for i in 1..=30 {
        let c = i as f64 / 10.0;
        let inv = |v: f64| {
            let q = v.powf(c);
            (m - n) as f64
                * (0..n)
                    .map(|j| (if j % 2 == 0 { 1.0 } else { -1.0 }) * binom(n - 1, j) * q.powi((m - n + j) as i32) / (m - n + j) as f64)
                    .sum::<f64>()
        };
        let theta: Vec<f64> = (0..=200).map(|k| k as f64 / 200.0).map(|v| if v == 0.0 { 0.0 } else { v / inv(v) }).collect();
        let want = theta.windows(2).all(|w| w[1] >= w[0] - 1e-9 * w[0].max(1.0));
        let got = inflated_type(&setup(m, n, Predictor::perfect(power(c)))).unwrap().monotone;
        assert_eq!(got, want, "c={c}");
        assert_eq!(got, c <= 0.2 + 1e-12, "c={c}");
    }
}

#[test]
fn j_function_examples() {
    for m in 2..=8 {
        assert!((j_function(0.0, m, m) - 1.0).abs() < 1e-12);
        assert!((j_function(0.4, m, m) - 1.0).abs() < 1e-12);
    }
    for x in [0.1, 0.5, 0.9] {
        assert!((j_function(x, 2, 3) - (2.0 * x - x * x)).abs() < 1e-12);
    }
    for m in 3..=9 {
        for n in 2..m {
            assert!(j_function(0.0, n, m).abs() < 1e-15);
            assert!((j_function(1.0, n, m) - 1.0).abs() < 1e-10);
            for i in 0..=50 {
                let x = i as f64 / 50.0;
                assert!(j_function(x, n + 1, m) >= j_function(x, n, m) - 1e-12);
            }
        }
    }
    // J equals C(m-1,n-1)/kappa under the perfect predictor.
    let g = setup(6, 3, Predictor::perfect(MarginalDist::uniform()));
    for v in [0.2, 0.7] {
        assert!((j_function(v, 3, 6) - binom(5, 2) / g.kappa(v).unwrap()).abs() < 1e-9);
    }
}
