use prescreen::numerics::{
    binom, find_root, integrate, integrate_with_breaks, tabulate, uniform_grid, NumericsError, QuadratureSpec, TabulatedFunction,
};

fn spec() -> QuadratureSpec {
    QuadratureSpec::default()
}

#[test]
fn integrate_examples() {
    assert!((integrate(|x| x, 0.0, 1.0, &spec()).unwrap() - 0.5).abs() < 1e-12);
    assert_eq!(integrate(|_| 1.0, 0.3, 0.3, &spec()).unwrap(), 0.0);
    assert!((integrate(|x| 6.0 * x * (1.0 - x), 0.0, 1.0, &spec()).unwrap() - 1.0).abs() < 1e-12);
    assert!((integrate(|x| x, 1.0, 0.0, &spec()).unwrap() + 0.5).abs() < 1e-12);
}

#[test]
fn integrate_handles_endpoint_singularities() {
    let v = integrate(|x| 0.5 / x.sqrt(), 0.0, 1.0, &spec().with_tol(1e-7)).unwrap();
    assert!((v - 1.0).abs() < 1e-6, "{v}");
    let v = integrate(|x| -x.ln(), 0.0, 1.0, &spec()).unwrap();
    assert!((v - 1.0).abs() < 1e-8);
}

#[test]
fn integrate_with_kinks() {
    let f = |x: f64| (x - 0.37).abs();
    let want = 0.37f64.powi(2) / 2.0 + 0.63f64.powi(2) / 2.0;
    let v = integrate_with_breaks(f, 0.0, 1.0, &[0.37], &spec()).unwrap();
    assert!((v - want).abs() < 1e-13);
    let step = |x: f64| if x < 0.4 { 1.0 } else { 3.0 };
    let v = integrate_with_breaks(step, 0.0, 1.0, &[0.4, 2.0, -1.0], &spec()).unwrap();
    assert!((v - 2.2).abs() < 1e-13);
}

#[test]
fn integrate_reports_non_convergence() {
    let tight = QuadratureSpec::new(1e-15, 1e-15, 10).unwrap();
    match integrate(|x| (1.0 / (x + 1e-6)).sin(), 0.0, 1.0, &tight) {
        Err(NumericsError::NonConvergence { estimate, .. }) => assert!(estimate.is_finite()),
        other => panic!("{other:?}"),
    }
    assert!(matches!(integrate(|_| f64::NAN, 0.0, 1.0, &spec()), Err(NumericsError::NonFinite { .. })));
    assert!(QuadratureSpec::new(-1.0, 1e-9, 10).is_err());
}

#[test]
fn root_examples() {
    assert!((find_root(|x| x - 0.25, 0.0, 1.0, 1e-12).unwrap() - 0.25).abs() < 1e-12);
    assert!((find_root(|x| x * x - 0.5, 0.0, 1.0, 1e-12).unwrap() - 0.5f64.sqrt()).abs() < 1e-10);
    assert!(matches!(find_root(|x| x - 2.0, 0.0, 1.0, 1e-12), Err(NumericsError::NoSignChange { .. })));
    assert_eq!(find_root(|x| x, 0.0, 1.0, 1e-12).unwrap(), 0.0);
    // Flat-then-steep function that defeats pure secant steps.
    let r = find_root(|x| (x - 0.9).powi(7), 0.0, 1.0, 1e-14).unwrap();
    assert!((r - 0.9).abs() < 1e-2);
}

#[test]
fn tabulation_examples() {
    let t = tabulate(|x| x * x, 129, true).unwrap();
    assert!((t.eval(0.5) - 0.25).abs() < 1e-10);
    let one = tabulate(|_| 1.0, 65, true).unwrap();
    for x in [0.0, 0.123, 0.5, 0.99, 1.0] {
        assert_eq!(one.eval(x), 1.0);
    }
    let p = tabulate(|x| x.powf(0.2), 1025, true).unwrap();
    assert!((p.eval(0.1234) - 0.1234f64.powf(0.2)).abs() < 1e-6);
}

#[test]
fn tabulation_validation() {
    assert!(TabulatedFunction::from_samples(vec![0.0, 0.5], vec![0.0, 1.0], false).is_err());
    assert!(TabulatedFunction::from_samples(vec![0.0, 0.5, 0.5, 1.0], vec![0.0; 4], false).is_err());
    assert!(TabulatedFunction::from_samples(vec![0.0, 0.5, 1.0], vec![0.0, f64::INFINITY, 1.0], false).is_err());
    assert!(tabulate(|x| if x > 0.5 { f64::NAN } else { x }, 65, false).is_err());
    assert!(tabulate(|x| x, 8, false).is_err());
}

#[test]
fn derivative_of_smooth_function() {
    let t = tabulate(|x| (2.0 * x).sin(), 1025, false).unwrap();
    for x in [0.1, 0.33, 0.7] {
        assert!((t.derivative(x) - 2.0 * (2.0 * x).cos()).abs() < 1e-6);
    }
}

#[test]
fn grid_and_binomials() {
    let g = uniform_grid(5);
    assert_eq!(g, vec![0.0, 0.25, 0.5, 0.75, 1.0]);
    assert_eq!(binom(7, 3), 35.0);
    assert_eq!(binom(10, 0), 1.0);
    assert_eq!(binom(3, 5), 0.0);
    assert_eq!(binom(30, 15), 155_117_520.0);
}
