//! One-step-ahead predictive distributions for fully specified models and
//! for Gaussian models under improper priors.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::process::{OneStepPredictor, StationaryProcessSpec};
use crate::real::Real;
use crate::score::{
    hyvarinen_score_gaussian, hyvarinen_score_generic, log_score, GaussianPredictive, LogDensity,
    PowerLawKernel, Rule, RuleId, ScoreValue, StudentTPredictive,
};

/// Predictive law of the next observation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Predictive<T> {
    /// Includes the improper flat law.
    Gaussian(GaussianPredictive<T>),
    StudentT(StudentTPredictive<T>),
    /// Improper scale-model predictive after `observations` data points.
    ImproperScale {
        kernel: PowerLawKernel<T>,
        observations: usize,
    },
}

impl<T: Real> Predictive<T> {
    pub fn is_proper(&self) -> bool {
        match self {
            Predictive::Gaussian(g) => !g.improper_flat,
            Predictive::StudentT(_) => true,
            Predictive::ImproperScale { .. } => false,
        }
    }

    /// Scores `x` under `rule`, including its scale factor.
    pub fn score(&self, x: T, rule: &Rule<T>) -> Result<ScoreValue<T>> {
        let raw = match (rule.id, self) {
            (RuleId::Log, Predictive::Gaussian(g)) => log_score(x, g)?,
            (RuleId::Log, Predictive::StudentT(t)) => ScoreValue::unit(-t.logpdf(x), RuleId::Log),
            (RuleId::Log, Predictive::ImproperScale { observations, .. }) => {
                return Err(Error::InsufficientHistory {
                    have: *observations,
                })
            }
            (RuleId::Hyvarinen, Predictive::Gaussian(g)) => hyvarinen_score_gaussian(x, g)?,
            (RuleId::Hyvarinen, Predictive::StudentT(t)) => hyvarinen_score_generic(x, t)?,
            (RuleId::Hyvarinen, Predictive::ImproperScale { kernel, .. }) => {
                hyvarinen_score_generic(x, kernel)?
            }
            (RuleId::DecisionInduced, _) => {
                return Err(Error::UnsupportedRule(rule.id.to_string()))
            }
        };
        if rule.scale == T::one() {
            Ok(raw)
        } else {
            raw.rescaled(rule.scale)
        }
    }
}

#[derive(Debug, Clone)]
pub enum ModelKind<T: Real> {
    IidGaussian {
        mean: T,
        variance: T,
    },
    /// Known variance, flat prior on the mean.
    FlatLocation {
        variance: T,
    },
    /// Known mean, prior ∝ 1/σ² on the variance.
    FlatScale {
        mean: T,
    },
    Process(Arc<StationaryProcessSpec<T>>),
}

/// A named sequence of one-step predictive distributions.
#[derive(Debug, Clone)]
pub struct PredictiveModel<T: Real> {
    id: String,
    kind: ModelKind<T>,
}

fn positive<T: Real>(v: T) -> Result<T> {
    if v > T::zero() && v.is_finite() {
        Ok(v)
    } else {
        Err(Error::NonPositiveVariance(v.as_f64()))
    }
}

/// Fully specified N(mean, variance) for every observation.
pub fn iid_gaussian_model<T: Real>(mean: T, variance: T) -> Result<PredictiveModel<T>> {
    positive(variance)?;
    Ok(PredictiveModel {
        id: format!("iidnorm({mean},{variance})"),
        kind: ModelKind::IidGaussian { mean, variance },
    })
}

/// Gaussian with known variance and improper flat prior on the mean.
pub fn flat_prior_location_model<T: Real>(variance: T) -> Result<PredictiveModel<T>> {
    positive(variance)?;
    Ok(PredictiveModel {
        id: format!("flatloc({variance})"),
        kind: ModelKind::FlatLocation { variance },
    })
}

/// Gaussian with known mean and improper prior ∝ 1/σ² on the variance.
pub fn flat_prior_scale_model<T: Real>(mean: T) -> Result<PredictiveModel<T>> {
    if !mean.is_finite() {
        return Err(Error::Config(format!("mean must be finite, got {mean}")));
    }
    Ok(PredictiveModel {
        id: format!("flatscale({mean})"),
        kind: ModelKind::FlatScale { mean },
    })
}

/// Adapter from a stationary process to a predictive model.
pub fn process_model<T: Real>(spec: StationaryProcessSpec<T>) -> PredictiveModel<T> {
    process_model_shared(Arc::new(spec))
}

pub fn process_model_shared<T: Real>(spec: Arc<StationaryProcessSpec<T>>) -> PredictiveModel<T> {
    PredictiveModel {
        id: format!("process({:?})", spec),
        kind: ModelKind::Process(spec),
    }
}

fn check_history<T: Real>(history: &[T]) -> Result<()> {
    match history.iter().position(|x| !x.is_finite()) {
        Some(i) => Err(Error::Config(format!(
            "observation {} is not finite",
            i + 1
        ))),
        None => Ok(()),
    }
}

impl<T: Real> PredictiveModel<T> {
    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn with_id(mut self, id: impl Into<String>) -> Self {
        self.id = id.into();
        self
    }

    pub fn kind(&self) -> &ModelKind<T> {
        &self.kind
    }

    /// Predictive for observation `history.len() + 1`.
    pub fn predictive_at(&self, history: &[T]) -> Result<Predictive<T>> {
        check_history(history)?;
        let n = history.len();
        match &self.kind {
            ModelKind::IidGaussian { mean, variance } => Ok(Predictive::Gaussian(
                GaussianPredictive::new(*mean, *variance)?,
            )),
            ModelKind::FlatLocation { variance } => {
                let sum = history.iter().fold(T::zero(), |a, &x| a + x);
                location_predictive(*variance, sum, n)
            }
            ModelKind::FlatScale { mean } => {
                let ss = history
                    .iter()
                    .fold(T::zero(), |a, &x| a + (x - *mean) * (x - *mean));
                Ok(scale_predictive(*mean, ss, n))
            }
            ModelKind::Process(spec) => {
                let mut pred = OneStepPredictor::truncated(spec)?;
                for _ in 0..n {
                    pred.advance()?;
                }
                let st = pred.state();
                let m = st.conditional_mean(history, spec.mean());
                Ok(Predictive::Gaussian(GaussianPredictive::new(
                    m,
                    st.conditional_variance,
                )?))
            }
        }
    }

    /// Predictives for every observation of `data`, reusing sufficient
    /// statistics. Entry `i` is bit-identical to `predictive_at(&data[..i])`.
    pub fn predictives(&self, data: &[T]) -> Result<Vec<Predictive<T>>> {
        check_history(data)?;
        let mut out = Vec::with_capacity(data.len());
        match &self.kind {
            ModelKind::IidGaussian { mean, variance } => {
                let p = Predictive::Gaussian(GaussianPredictive::new(*mean, *variance)?);
                out.resize(data.len(), p);
            }
            ModelKind::FlatLocation { variance } => {
                let mut sum = T::zero();
                for (n, &x) in data.iter().enumerate() {
                    out.push(location_predictive(*variance, sum, n)?);
                    sum = sum + x;
                }
            }
            ModelKind::FlatScale { mean } => {
                let mut ss = T::zero();
                for (n, &x) in data.iter().enumerate() {
                    out.push(scale_predictive(*mean, ss, n));
                    ss = ss + (x - *mean) * (x - *mean);
                }
            }
            ModelKind::Process(spec) => {
                if data.is_empty() {
                    return Ok(out);
                }
                let mut pred = OneStepPredictor::truncated(spec)?;
                for i in 0..data.len() {
                    if i > 0 {
                        pred.advance()?;
                    }
                    let st = pred.state();
                    let m = st.conditional_mean(&data[..i], spec.mean());
                    out.push(Predictive::Gaussian(GaussianPredictive::new(
                        m,
                        st.conditional_variance,
                    )?));
                }
            }
        }
        Ok(out)
    }
}

fn location_predictive<T: Real>(variance: T, sum: T, n: usize) -> Result<Predictive<T>> {
    if n == 0 {
        return Ok(Predictive::Gaussian(GaussianPredictive::flat()));
    }
    let nn = T::from_count(n);
    Ok(Predictive::Gaussian(GaussianPredictive::new(
        sum / nn,
        variance * (T::one() + T::one() / nn),
    )?))
}

// Posterior for σ² is inverse-gamma(n/2, S/2); the predictive kernel is
// (S + (x-μ)²)^(-(n+1)/2), a Student-t with n degrees of freedom when S > 0.
fn scale_predictive<T: Real>(mean: T, ss: T, n: usize) -> Predictive<T> {
    if n == 0 || !(ss > T::zero()) {
        return Predictive::ImproperScale {
            kernel: PowerLawKernel {
                center: mean,
                exponent: T::from_count(n + 1),
            },
            observations: n,
        };
    }
    let nn = T::from_count(n);
    Predictive::StudentT(StudentTPredictive::new(mean, (ss / nn).sqrt(), nn))
}

fn spec_err(spec: &str, reason: impl Into<String>) -> Error {
    Error::ModelSpec {
        spec: spec.to_string(),
        reason: reason.into(),
    }
}

fn parse_num<T: Real>(spec: &str, s: &str) -> Result<T> {
    let v: f64 = s
        .trim()
        .parse()
        .map_err(|_| spec_err(spec, format!("`{}` is not a number", s.trim())))?;
    if !v.is_finite() {
        return Err(spec_err(spec, "parameters must be finite"));
    }
    Ok(T::lit(v))
}

fn parse_list<T: Real>(spec: &str, s: &str) -> Result<Vec<T>> {
    if s.trim().is_empty() {
        return Ok(Vec::new());
    }
    s.split(',').map(|p| parse_num(spec, p)).collect()
}

/// Parses `iidnorm(mu,var)`, `flatloc(var)`, `flatscale(mu)`,
/// `ar(phi1,...;var)` or `ma(theta1,...;var)`. The spec string becomes the model id.
pub fn parse_model_spec<T: Real>(spec: &str) -> Result<PredictiveModel<T>> {
    let s = spec.trim();
    let open = s
        .find('(')
        .ok_or_else(|| spec_err(spec, "expected name(args)"))?;
    if !s.ends_with(')') {
        return Err(spec_err(spec, "missing closing parenthesis"));
    }
    let name = s[..open].trim();
    let args = &s[open + 1..s.len() - 1];
    let fixed = |k: usize| -> Result<Vec<T>> {
        let v = parse_list(spec, args)?;
        if v.len() != k {
            return Err(spec_err(
                spec,
                format!("{name} takes {k} argument(s), got {}", v.len()),
            ));
        }
        Ok(v)
    };
    let model = match name {
        "iidnorm" => {
            let v = fixed(2)?;
            iid_gaussian_model(v[0], v[1])?
        }
        "flatloc" => flat_prior_location_model(fixed(1)?[0])?,
        "flatscale" => flat_prior_scale_model(fixed(1)?[0])?,
        "ar" | "ma" => {
            let (coefs, var) = args
                .split_once(';')
                .ok_or_else(|| spec_err(spec, "expected coefficients;variance"))?;
            let coefs = parse_list(spec, coefs)?;
            let var = parse_num(spec, var)?;
            let p = if name == "ar" {
                crate::process::ar_process(&coefs, var)?
            } else {
                crate::process::ma_process(&coefs, var)?
            };
            process_model(p)
        }
        other => return Err(spec_err(spec, format!("unknown model `{other}`"))),
    };
    Ok(model.with_id(s))
}
