//! Copulas, marginals and the joint valuation/signal law built from them.

use serde::{Deserialize, Serialize};

use crate::numerics::{find_root, integrate_with_breaks, NumericsError, QuadratureSpec, TabulatedFunction};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum PredictorError {
    #[error("copula parameter {name}={value} outside [{lo}, {hi}]")]
    Parameter { name: &'static str, value: f64, lo: f64, hi: f64 },
    #[error("mixture weights must be non-negative and sum to 1 (sum {0})")]
    MixtureWeights(f64),
    #[error("invalid marginal: {0}")]
    Marginal(String),
    #[error("marginals differ at x={x}")]
    MarginalMismatch { x: f64 },
    #[error(transparent)]
    Numerics(#[from] NumericsError),
}

/// Marginal distribution on `[0, 1]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "lowercase", deny_unknown_fields)]
pub enum Marginal {
    /// `F(x) = x^c`.
    Power { c: f64 },
    /// Tabulated CDF; the density is the derivative of the monotone interpolant.
    Table { grid: Vec<f64>, cdf: Vec<f64> },
}

/// Validated marginal with a prepared interpolant for tabulated CDFs.
#[derive(Debug, Clone)]
pub struct MarginalDist {
    spec: Marginal,
    table: Option<TabulatedFunction>,
}

impl MarginalDist {
    pub fn new(spec: Marginal) -> Result<Self, PredictorError> {
        match &spec {
            Marginal::Power { c } => {
                if !(c.is_finite() && *c > 0.0) {
                    return Err(PredictorError::Marginal(format!("power exponent must be positive, got {c}")));
                }
                Ok(Self { spec, table: None })
            }
            Marginal::Table { grid, cdf } => {
                if cdf.first() != Some(&0.0) || cdf.last() != Some(&1.0) {
                    return Err(PredictorError::Marginal("table cdf must run from 0 to 1".into()));
                }
                if cdf.windows(2).any(|w| !(w[1] > w[0])) {
                    return Err(PredictorError::Marginal("table cdf must be strictly increasing".into()));
                }
                let table = TabulatedFunction::from_samples(grid.clone(), cdf.clone(), true)?;
                Ok(Self { spec, table: Some(table) })
            }
        }
    }

    pub fn power(c: f64) -> Result<Self, PredictorError> {
        Self::new(Marginal::Power { c })
    }

    pub fn uniform() -> Self {
        Self::power(1.0).expect("unit exponent is valid")
    }

    pub fn spec(&self) -> &Marginal {
        &self.spec
    }

    pub fn power_exponent(&self) -> Option<f64> {
        match self.spec {
            Marginal::Power { c } => Some(c),
            Marginal::Table { .. } => None,
        }
    }

    pub fn cdf(&self, x: f64) -> f64 {
        let x = x.clamp(0.0, 1.0);
        match (&self.spec, &self.table) {
            (Marginal::Power { c }, _) => x.powf(*c),
            (_, Some(t)) => t.eval(x).clamp(0.0, 1.0),
            _ => unreachable!("table marginal without interpolant"),
        }
    }

    pub fn pdf(&self, x: f64) -> f64 {
        let x = x.clamp(0.0, 1.0);
        match (&self.spec, &self.table) {
            (Marginal::Power { c }, _) => c * x.powf(c - 1.0),
            (_, Some(t)) => t.derivative(x),
            _ => unreachable!("table marginal without interpolant"),
        }
    }

    pub fn quantile(&self, q: f64) -> f64 {
        let q = q.clamp(0.0, 1.0);
        match &self.spec {
            Marginal::Power { c } => q.powf(1.0 / c),
            Marginal::Table { .. } => {
                if q == 0.0 || q == 1.0 {
                    return q;
                }
                find_root(|x| self.cdf(x) - q, 0.0, 1.0, 1e-14).unwrap_or(q)
            }
        }
    }

    fn same_as(&self, other: &MarginalDist) -> Result<(), PredictorError> {
        for i in 0..=100 {
            let x = i as f64 / 100.0;
            if (self.cdf(x) - other.cdf(x)).abs() > 1e-9 {
                return Err(PredictorError::MarginalMismatch { x });
            }
        }
        Ok(())
    }
}

/// Bivariate copula families.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "kebab-case", deny_unknown_fields)]
pub enum Copula {
    Independence,
    Comonotonic,
    Amh { alpha: f64 },
    Fgm { alpha: f64 },
    /// FGM with a parameter in `[-1, 1]`, admitted only for assumption checks.
    CustomFgm { alpha: f64 },
    /// `gamma` weight on comonotonic, the rest on independence.
    Hallucinatory { gamma: f64 },
    Mixture { components: Vec<MixtureComponent> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MixtureComponent {
    pub weight: f64,
    pub copula: Copula,
}

fn check_unit(name: &'static str, value: f64, lo: f64) -> Result<(), PredictorError> {
    if value.is_finite() && (lo..=1.0).contains(&value) {
        Ok(())
    } else {
        Err(PredictorError::Parameter { name, value, lo, hi: 1.0 })
    }
}

impl Copula {
    pub fn amh(alpha: f64) -> Result<Self, PredictorError> {
        check_unit("alpha", alpha, 0.0)?;
        Ok(Copula::Amh { alpha })
    }

    pub fn fgm(alpha: f64) -> Result<Self, PredictorError> {
        check_unit("alpha", alpha, 0.0)?;
        Ok(Copula::Fgm { alpha })
    }

    pub fn custom_fgm(alpha: f64) -> Result<Self, PredictorError> {
        check_unit("alpha", alpha, -1.0)?;
        Ok(Copula::CustomFgm { alpha })
    }

    pub fn hallucinatory(gamma: f64) -> Result<Self, PredictorError> {
        check_unit("gamma", gamma, 0.0)?;
        Ok(Copula::Hallucinatory { gamma })
    }

    pub fn mixture(components: Vec<(f64, Copula)>) -> Result<Self, PredictorError> {
        let c = Copula::Mixture {
            components: components.into_iter().map(|(weight, copula)| MixtureComponent { weight, copula }).collect(),
        };
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<(), PredictorError> {
        match self {
            Copula::Independence | Copula::Comonotonic => Ok(()),
            Copula::Amh { alpha } | Copula::Fgm { alpha } => check_unit("alpha", *alpha, 0.0),
            Copula::CustomFgm { alpha } => check_unit("alpha", *alpha, -1.0),
            Copula::Hallucinatory { gamma } => check_unit("gamma", *gamma, 0.0),
            Copula::Mixture { components } => {
                let sum: f64 = components.iter().map(|c| c.weight).sum();
                if components.is_empty() || components.iter().any(|c| !(c.weight >= 0.0)) || (sum - 1.0).abs() > 1e-12 {
                    return Err(PredictorError::MixtureWeights(sum));
                }
                components.iter().try_for_each(|c| c.copula.validate())
            }
        }
    }

    /// Weight on the comonotonic part when the copula is a comonotonic/independence mixture.
    pub fn hallucinatory_weight(&self) -> Option<f64> {
        match self {
            Copula::Independence => Some(0.0),
            Copula::Comonotonic => Some(1.0),
            Copula::Hallucinatory { gamma } => Some(*gamma),
            Copula::Mixture { components } => {
                let mut gamma = 0.0;
                for c in components {
                    gamma += c.weight * c.copula.hallucinatory_weight()?;
                }
                Some(gamma)
            }
            _ => None,
        }
    }

    /// Whether any component is comonotonic, which puts kinks on the diagonal.
    pub fn has_kinks(&self) -> bool {
        match self {
            Copula::Comonotonic => true,
            Copula::Hallucinatory { gamma } => *gamma > 0.0,
            Copula::Mixture { components } => components.iter().any(|c| c.weight > 0.0 && c.copula.has_kinks()),
            _ => false,
        }
    }

    pub fn cdf(&self, x: f64, y: f64) -> f64 {
        self.partials(x, y).0
    }

    /// `(C, dC/dx, dC/dy)`. On the comonotonic diagonal `C1 = 1` and `C2 = 0`.
    pub fn partials(&self, x: f64, y: f64) -> (f64, f64, f64) {
        match self {
            Copula::Independence => (x * y, y, x),
            Copula::Comonotonic => {
                if x <= y {
                    (x, 1.0, 0.0)
                } else {
                    (y, 0.0, 1.0)
                }
            }
            Copula::Amh { alpha } => {
                let d = 1.0 - alpha * (1.0 - x) * (1.0 - y);
                let d2 = d * d;
                (x * y / d, y * (1.0 - alpha * (1.0 - y)) / d2, x * (1.0 - alpha * (1.0 - x)) / d2)
            }
            Copula::Fgm { alpha } | Copula::CustomFgm { alpha } => (
                x * y * (1.0 + alpha * (1.0 - x) * (1.0 - y)),
                y * (1.0 + alpha * (1.0 - 2.0 * x) * (1.0 - y)),
                x * (1.0 + alpha * (1.0 - x) * (1.0 - 2.0 * y)),
            ),
            Copula::Hallucinatory { gamma } => {
                let (c, c1, c2) = Copula::Comonotonic.partials(x, y);
                (gamma * c + (1.0 - gamma) * x * y, gamma * c1 + (1.0 - gamma) * y, gamma * c2 + (1.0 - gamma) * x)
            }
            Copula::Mixture { components } => components.iter().fold((0.0, 0.0, 0.0), |acc, c| {
                let (a, b, d) = c.copula.partials(x, y);
                (acc.0 + c.weight * a, acc.1 + c.weight * b, acc.2 + c.weight * d)
            }),
        }
    }

    /// Solves `C1(x, y) = u` for `y`, sampling mixtures by component.
    pub fn conditional_quantile(&self, x: f64, u: f64) -> f64 {
        match self {
            Copula::Independence => u,
            Copula::Comonotonic => x,
            Copula::Fgm { alpha } | Copula::CustomFgm { alpha } => {
                let b = alpha * (1.0 - 2.0 * x);
                if b.abs() < 1e-12 {
                    u
                } else {
                    let disc = ((1.0 + b) * (1.0 + b) - 4.0 * b * u).max(0.0);
                    (2.0 * u / ((1.0 + b) + disc.sqrt())).clamp(0.0, 1.0)
                }
            }
            Copula::Amh { .. } => {
                if u <= 0.0 || u >= 1.0 {
                    return u.clamp(0.0, 1.0);
                }
                find_root(|y| self.partials(x, y).1 - u, 0.0, 1.0, 1e-13).unwrap_or(u)
            }
            Copula::Hallucinatory { gamma } => {
                if u < *gamma {
                    x
                } else {
                    (u - gamma) / (1.0 - gamma)
                }
            }
            Copula::Mixture { components } => {
                let mut lo = 0.0;
                let last = components.iter().rposition(|c| c.weight > 0.0).unwrap_or(0);
                for (i, c) in components.iter().enumerate() {
                    if c.weight <= 0.0 {
                        continue;
                    }
                    let hi = lo + c.weight;
                    if u < hi || i == last {
                        let inner = ((u - lo) / c.weight).clamp(0.0, 1.0 - f64::EPSILON);
                        return c.copula.conditional_quantile(x, inner);
                    }
                    lo = hi;
                }
                u
            }
        }
    }
}

/// Joint law `F(v, s) = C(F1(v), F2(s))` of a valuation and the seller's signal.
#[derive(Debug, Clone)]
pub struct Predictor {
    pub copula: Copula,
    pub f1: MarginalDist,
    pub f2: MarginalDist,
}

/// JSON form of a predictor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PredictorSpec {
    pub copula: Copula,
    pub f1: Marginal,
    pub f2: Marginal,
}

/// Flags returned by [`Predictor::validate`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct ValidationReport {
    pub assumption1: bool,
    pub prd_v_given_s: bool,
    pub prd_s_given_v: bool,
    pub condition13: bool,
}

impl ValidationReport {
    pub fn all(&self) -> bool {
        self.assumption1 && self.prd_v_given_s && self.prd_s_given_v && self.condition13
    }
}

/// Outcome of a PQD comparison.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum PqdOrdering {
    ADominates,
    BDominates,
    Equal,
    Incomparable,
}

impl Predictor {
    pub fn new(copula: Copula, f1: MarginalDist, f2: MarginalDist) -> Result<Self, PredictorError> {
        copula.validate()?;
        Ok(Self { copula, f1, f2 })
    }

    pub fn from_spec(spec: &PredictorSpec) -> Result<Self, PredictorError> {
        Self::new(spec.copula.clone(), MarginalDist::new(spec.f1.clone())?, MarginalDist::new(spec.f2.clone())?)
    }

    pub fn to_spec(&self) -> PredictorSpec {
        PredictorSpec { copula: self.copula.clone(), f1: self.f1.spec.clone(), f2: self.f2.spec.clone() }
    }

    /// Hallucinatory predictor with uniform signal marginal.
    pub fn hallucinatory(gamma: f64, f1: MarginalDist) -> Result<Self, PredictorError> {
        Self::new(Copula::hallucinatory(gamma)?, f1, MarginalDist::uniform())
    }

    pub fn null(f1: MarginalDist) -> Self {
        Self { copula: Copula::Independence, f1, f2: MarginalDist::uniform() }
    }

    pub fn perfect(f1: MarginalDist) -> Self {
        Self { copula: Copula::Comonotonic, f1, f2: MarginalDist::uniform() }
    }

    pub fn with_copula(copula: Copula, f1: MarginalDist) -> Result<Self, PredictorError> {
        Self::new(copula, f1, MarginalDist::uniform())
    }

    pub fn joint_cdf(&self, v: f64, s: f64) -> f64 {
        self.copula.cdf(self.f1.cdf(v), self.f2.cdf(s))
    }

    /// `P(V <= v | S = s) = C2(F1(v), F2(s))`.
    pub fn cond_cdf_value_given_signal(&self, v: f64, s: f64) -> f64 {
        self.copula.partials(self.f1.cdf(v), self.f2.cdf(s)).2
    }

    /// `P(S <= s | V = v) = C1(F1(v), F2(s))`.
    pub fn cond_cdf_signal_given_value(&self, s: f64, v: f64) -> f64 {
        self.copula.partials(self.f1.cdf(v), self.f2.cdf(s)).1
    }

    /// `E[V | S = s]`.
    pub fn cond_expectation(&self, s: f64) -> Result<f64, PredictorError> {
        let y = self.f2.cdf(s);
        let kink = self.f1.quantile(y);
        let spec = QuadratureSpec::default();
        Ok(integrate_with_breaks(|v| 1.0 - self.copula.partials(self.f1.cdf(v), y).2, 0.0, 1.0, &[kink], &spec)?)
    }

    /// Grid checks of the structural assumptions on a 201x201 grid.
    pub fn validate(&self) -> Result<ValidationReport, PredictorError> {
        const N: usize = 201;
        let grid: Vec<f64> = (0..N).map(|i| i as f64 / (N - 1) as f64).collect();
        let mut expectations = Vec::with_capacity(N);
        for &s in &grid {
            expectations.push(self.cond_expectation(s)?);
        }
        let assumption1 = expectations.windows(2).all(|w| w[1] >= w[0] - 1e-9);
        let qs: Vec<f64> = grid.iter().map(|&v| self.f1.cdf(v)).collect();
        let ys: Vec<f64> = grid.iter().map(|&s| self.f2.cdf(s)).collect();
        let mut prd_v_given_s = true;
        let mut prd_s_given_v = true;
        let mut condition13 = true;
        for &x in &qs {
            for j in 0..N {
                let y = ys[j];
                let (c, c1, c2) = self.copula.partials(x, y);
                if x * c1 + y * c2 - c < -1e-9 {
                    condition13 = false;
                }
                if j + 1 < N && self.copula.partials(x, ys[j + 1]).2 > c2 + 1e-12 {
                    prd_v_given_s = false;
                }
            }
        }
        for &y in &ys {
            for i in 0..N - 1 {
                if self.copula.partials(qs[i + 1], y).1 > self.copula.partials(qs[i], y).1 + 1e-12 {
                    prd_s_given_v = false;
                }
            }
        }
        Ok(ValidationReport { assumption1, prd_v_given_s, prd_s_given_v, condition13 })
    }

    /// Inverse-CDF draw from `S | V = v` using the uniform `u`.
    pub fn sample_signal(&self, v: f64, u: f64) -> f64 {
        let y = self.copula.conditional_quantile(self.f1.cdf(v), u);
        self.f2.quantile(y)
    }
}

/// Pointwise comparison of joint CDFs on a 201x201 grid.
pub fn pqd_compare(a: &Predictor, b: &Predictor) -> Result<PqdOrdering, PredictorError> {
    a.f1.same_as(&b.f1)?;
    a.f2.same_as(&b.f2)?;
    const N: usize = 201;
    let mut a_ge = true;
    let mut b_ge = true;
    for i in 0..N {
        let v = i as f64 / (N - 1) as f64;
        for j in 0..N {
            let s = j as f64 / (N - 1) as f64;
            let d = a.joint_cdf(v, s) - b.joint_cdf(v, s);
            if d < -1e-12 {
                a_ge = false;
            }
            if d > 1e-12 {
                b_ge = false;
            }
        }
    }
    Ok(match (a_ge, b_ge) {
        (true, true) => PqdOrdering::Equal,
        (true, false) => PqdOrdering::ADominates,
        (false, true) => PqdOrdering::BDominates,
        (false, false) => PqdOrdering::Incomparable,
    })
}
