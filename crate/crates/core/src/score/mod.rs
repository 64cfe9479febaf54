//! Scoring rules evaluated on explicit predictive distributions.
//!
//! Scores are losses: smaller is better. The Hyvärinen score uses the
//! convention `S(x, Q) = 2 Δ log q(x) + |∇ log q(x)|²` (no factor ½), and all
//! densities are taken with respect to Lebesgue measure.

mod decision;
mod density;

pub use decision::{
    check_propriety, score_from_decision_problem, simplex_grid, DecisionProblem, ProprietyReport,
    Violation,
};
pub use density::{
    finite_differences, DensityWithDerivatives, Laplace, LogDensity, PowerLawKernel,
    StudentTPredictive,
};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{Cholesky, SquareMatrix};
use crate::real::Real;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RuleId {
    Log,
    Hyvarinen,
    DecisionInduced,
}

impl RuleId {
    pub fn name(self) -> &'static str {
        match self {
            RuleId::Log => "log",
            RuleId::Hyvarinen => "hyvarinen",
            RuleId::DecisionInduced => "decision_induced",
        }
    }
}

impl std::fmt::Display for RuleId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// A scoring rule together with its positive scale factor λ.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rule<T> {
    pub id: RuleId,
    pub scale: T,
}

impl<T: Real> Rule<T> {
    pub fn new(id: RuleId) -> Self {
        Self {
            id,
            scale: T::one(),
        }
    }

    pub fn log() -> Self {
        Self::new(RuleId::Log)
    }

    pub fn hyvarinen() -> Self {
        Self::new(RuleId::Hyvarinen)
    }

    pub fn rescaled(self, lambda: T) -> Result<Self> {
        if !(lambda > T::zero()) || !lambda.is_finite() {
            return Err(Error::NonPositiveScale(lambda.as_f64()));
        }
        Ok(Self {
            id: self.id,
            scale: self.scale * lambda,
        })
    }
}

/// A score together with the convention that produced it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScoreValue<T> {
    pub value: T,
    pub rule: RuleId,
    pub scale: T,
}

impl<T: Real> ScoreValue<T> {
    pub fn unit(value: T, rule: RuleId) -> Self {
        Self {
            value,
            rule,
            scale: T::one(),
        }
    }

    /// Multiplies the value by `lambda > 0`.
    pub fn rescaled(self, lambda: T) -> Result<Self> {
        if !(lambda > T::zero()) || !lambda.is_finite() {
            return Err(Error::NonPositiveScale(lambda.as_f64()));
        }
        Ok(Self {
            value: self.value * lambda,
            rule: self.rule,
            scale: self.scale * lambda,
        })
    }
}

/// One-step Gaussian predictive, or the improper uniform on the real line.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaussianPredictive<T> {
    pub mean: T,
    pub variance: T,
    pub improper_flat: bool,
}

impl<T: Real> GaussianPredictive<T> {
    pub fn new(mean: T, variance: T) -> Result<Self> {
        if !(variance > T::zero()) || !variance.is_finite() {
            return Err(Error::NonPositiveVariance(variance.as_f64()));
        }
        Ok(Self {
            mean,
            variance,
            improper_flat: false,
        })
    }

    pub fn flat() -> Self {
        Self {
            mean: T::zero(),
            variance: T::infinity(),
            improper_flat: true,
        }
    }

    fn check(&self) -> Result<()> {
        if !self.improper_flat && !(self.variance > T::zero()) {
            return Err(Error::NonPositiveVariance(self.variance.as_f64()));
        }
        Ok(())
    }
}

impl<T: Real> LogDensity<T> for GaussianPredictive<T> {
    fn logpdf(&self, x: T) -> T {
        if self.improper_flat {
            return T::zero();
        }
        let d = x - self.mean;
        let half = T::lit(0.5);
        -half * (T::TAU() * self.variance).ln() - d * d / (T::lit(2.0) * self.variance)
    }
    fn dlogpdf(&self, x: T) -> T {
        if self.improper_flat {
            return T::zero();
        }
        -(x - self.mean) / self.variance
    }
    fn d2logpdf(&self, _x: T) -> T {
        if self.improper_flat {
            return T::zero();
        }
        -T::one() / self.variance
    }
    fn is_proper(&self) -> bool {
        !self.improper_flat
    }
    fn is_smooth(&self) -> bool {
        true
    }
}

/// Negative log predictive density.
pub fn log_score<T: Real>(x: T, q: &GaussianPredictive<T>) -> Result<ScoreValue<T>> {
    if q.improper_flat {
        return Err(Error::ImproperPredictive);
    }
    q.check()?;
    let d = x - q.mean;
    let half = T::lit(0.5);
    let value = half * (T::TAU() * q.variance).ln() + d * d / (T::lit(2.0) * q.variance);
    Ok(ScoreValue::unit(value, RuleId::Log))
}

/// `-2/σ² + (x-μ)²/σ⁴`; zero for the improper flat predictive.
pub fn hyvarinen_score_gaussian<T: Real>(x: T, q: &GaussianPredictive<T>) -> Result<ScoreValue<T>> {
    if q.improper_flat {
        return Ok(ScoreValue::unit(T::zero(), RuleId::Hyvarinen));
    }
    q.check()?;
    let d = x - q.mean;
    let v = q.variance;
    let value = -T::lit(2.0) / v + d * d / (v * v);
    Ok(ScoreValue::unit(value, RuleId::Hyvarinen))
}

/// Multivariate normal Hyvärinen score `-2 tr(Σ⁻¹) + |Σ⁻¹(x-μ)|²`.
pub fn hyvarinen_score_mvn<T: Real>(
    x: &[T],
    mean: &[T],
    covariance: &[Vec<T>],
) -> Result<ScoreValue<T>> {
    let d = x.len();
    if mean.len() != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            got: mean.len(),
        });
    }
    if covariance.len() != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            got: covariance.len(),
        });
    }
    if let Some(bad) = covariance.iter().find(|r| r.len() != d) {
        return Err(Error::DimensionMismatch {
            expected: d,
            got: bad.len(),
        });
    }
    let sigma = SquareMatrix::from_rows(covariance).ok_or(Error::NonSpdCovariance)?;
    if !sigma.is_symmetric(T::epsilon() * T::lit(64.0)) {
        return Err(Error::NonSpdCovariance);
    }
    let chol = Cholesky::new(&sigma).map_err(|_| Error::NonSpdCovariance)?;
    let resid: Vec<T> = x.iter().zip(mean).map(|(&a, &b)| a - b).collect();
    let grad = chol.solve(&resid);
    let sq: T = grad.iter().map(|&g| g * g).sum();
    let value = -T::lit(2.0) * chol.inverse_trace() + sq;
    Ok(ScoreValue::unit(value, RuleId::Hyvarinen))
}

/// `2 d²/dx² log q(x) + (d/dx log q(x))²` for any smooth, possibly unnormalized density.
pub fn hyvarinen_score_generic<T: Real, D: LogDensity<T> + ?Sized>(
    x: T,
    q: &D,
) -> Result<ScoreValue<T>> {
    if !q.is_smooth() {
        return Err(Error::HyvarinenInapplicable(String::new()));
    }
    let g = q.dlogpdf(x);
    let value = T::lit(2.0) * q.d2logpdf(x) + g * g;
    if !value.is_finite() {
        return Err(Error::HyvarinenInapplicable(format!(
            " (singular at x = {x})"
        )));
    }
    Ok(ScoreValue::unit(value, RuleId::Hyvarinen))
}
