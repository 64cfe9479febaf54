//! One-step prediction for covariance-stationary Gaussian processes given
//! their autocovariance sequence.
//!
//! The conditional variance `v_i = Var(X_i | X_1, …, X_{i-1})` is produced by
//! the Durbin–Levinson recursion. It is constant only once the predictor's
//! order stops growing, which for an AR(p) process happens for `i > p`; for
//! other processes `v_i` merely converges.

use std::fmt;
use std::sync::{Arc, RwLock};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::real::Real;

type AutocovFn<T> = Arc<dyn Fn(usize) -> T + Send + Sync>;

#[derive(Clone)]
enum Autocov<T> {
    WhiteNoise(T),
    /// AR coefficients; the cache is seeded with γ(0..=p).
    Ar(Vec<T>),
    Ma {
        theta: Vec<T>,
        innovation_variance: T,
    },
    /// Finite support: zero beyond the table.
    Table(Vec<T>),
    Custom(AutocovFn<T>),
}

/// Covariance-stationary Gaussian process described by mean and autocovariance.
pub struct StationaryProcessSpec<T> {
    mean: T,
    autocov: Autocov<T>,
    /// Order beyond which the optimal one-step predictor no longer changes.
    max_lag_hint: Option<usize>,
    cache: RwLock<Vec<T>>,
}

impl<T: Real> Clone for StationaryProcessSpec<T> {
    fn clone(&self) -> Self {
        Self {
            mean: self.mean,
            autocov: self.autocov.clone(),
            max_lag_hint: self.max_lag_hint,
            cache: RwLock::new(
                self.cache
                    .read()
                    .expect("autocovariance cache poisoned")
                    .clone(),
            ),
        }
    }
}

impl<T: Real> fmt::Debug for StationaryProcessSpec<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let kind = match &self.autocov {
            Autocov::WhiteNoise(_) => "white_noise",
            Autocov::Ar(_) => "ar",
            Autocov::Ma { .. } => "ma",
            Autocov::Table(_) => "table",
            Autocov::Custom(_) => "custom",
        };
        f.debug_struct("StationaryProcessSpec")
            .field("kind", &kind)
            .field("mean", &self.mean)
            .field("gamma0", &self.gamma(0))
            .field("max_lag_hint", &self.max_lag_hint)
            .finish()
    }
}

fn check_variance<T: Real>(v: T) -> Result<()> {
    if !(v > T::zero()) || !v.is_finite() {
        return Err(Error::NonPositiveVariance(v.as_f64()));
    }
    Ok(())
}

impl<T: Real> StationaryProcessSpec<T> {
    fn build(autocov: Autocov<T>, seed: Vec<T>, max_lag_hint: Option<usize>) -> Self {
        Self {
            mean: T::zero(),
            autocov,
            max_lag_hint,
            cache: RwLock::new(seed),
        }
    }

    pub fn white_noise(variance: T) -> Result<Self> {
        check_variance(variance)?;
        Ok(Self::build(
            Autocov::WhiteNoise(variance),
            Vec::new(),
            Some(0),
        ))
    }

    /// Process whose autocovariance is `gammas[k]` for `k < gammas.len()` and zero beyond.
    pub fn from_autocovariances(gammas: Vec<T>) -> Result<Self> {
        validate_gammas(&gammas)?;
        Ok(Self::build(Autocov::Table(gammas), Vec::new(), None))
    }

    /// Arbitrary autocovariance function; `max_lag_hint` is the order beyond which
    /// the one-step predictor is known not to change (e.g. `p` for AR(p)), if any.
    pub fn from_fn(
        gamma: impl Fn(usize) -> T + Send + Sync + 'static,
        max_lag_hint: Option<usize>,
    ) -> Result<Self> {
        let g0 = gamma(0);
        if !(g0 > T::zero()) || !g0.is_finite() {
            return Err(Error::InvalidAutocovariance(format!(
                "gamma(0) = {g0} must be positive"
            )));
        }
        Ok(Self::build(
            Autocov::Custom(Arc::new(gamma)),
            Vec::new(),
            max_lag_hint,
        ))
    }

    pub fn with_mean(mut self, mean: T) -> Self {
        self.mean = mean;
        self
    }

    pub fn mean(&self) -> T {
        self.mean
    }

    pub fn max_lag_hint(&self) -> Option<usize> {
        self.max_lag_hint
    }

    /// Autocovariance at lag `k`, computed lazily and cached.
    pub fn gamma(&self, k: usize) -> T {
        match &self.autocov {
            Autocov::WhiteNoise(s) => return if k == 0 { *s } else { T::zero() },
            Autocov::Table(g) => return g.get(k).copied().unwrap_or_else(T::zero),
            Autocov::Custom(f) => return f(k),
            Autocov::Ar(_) | Autocov::Ma { .. } => {}
        }
        if let Some(&g) = self
            .cache
            .read()
            .expect("autocovariance cache poisoned")
            .get(k)
        {
            return g;
        }
        let mut cache = self.cache.write().expect("autocovariance cache poisoned");
        while cache.len() <= k {
            let lag = cache.len();
            let next = match &self.autocov {
                Autocov::Ar(phi) => phi
                    .iter()
                    .enumerate()
                    .map(|(j, &p)| p * cache[lag - 1 - j])
                    .sum(),
                Autocov::Ma {
                    theta,
                    innovation_variance,
                } => ma_autocov(theta, *innovation_variance, lag),
                _ => unreachable!(),
            };
            cache.push(next);
        }
        cache[k]
    }

    /// `γ(0), …, γ(n-1)`.
    pub fn gammas(&self, n: usize) -> Vec<T> {
        (0..n).map(|k| self.gamma(k)).collect()
    }

    /// Checks `γ(0) > 0` and `|γ(k)| ≤ γ(0)` for `k < n`.
    pub fn validate(&self, n: usize) -> Result<()> {
        validate_gammas(&self.gammas(n.max(1)))
    }
}

fn validate_gammas<T: Real>(g: &[T]) -> Result<()> {
    let g0 = *g
        .first()
        .ok_or_else(|| Error::InvalidAutocovariance("empty autocovariance".into()))?;
    if !(g0 > T::zero()) || !g0.is_finite() {
        return Err(Error::InvalidAutocovariance(format!(
            "gamma(0) = {g0} must be positive"
        )));
    }
    if let Some((k, gk)) = g.iter().enumerate().find(|(_, gk)| !(gk.abs() <= g0)) {
        return Err(Error::InvalidAutocovariance(format!(
            "|gamma({k})| = {} exceeds gamma(0) = {g0}",
            gk.abs()
        )));
    }
    Ok(())
}

fn ma_autocov<T: Real>(theta: &[T], s: T, lag: usize) -> T {
    let q = theta.len();
    if lag > q {
        return T::zero();
    }
    let coef = |j: usize| if j == 0 { T::one() } else { theta[j - 1] };
    s * (0..=(q - lag)).map(|j| coef(j) * coef(j + lag)).sum::<T>()
}

/// Partial autocorrelations of a causal AR polynomial and the coefficient
/// vectors of every intermediate order (step-down recursion).
fn step_down<T: Real>(phi: &[T]) -> Result<(Vec<T>, Vec<Vec<T>>)> {
    let p = phi.len();
    let mut orders = vec![Vec::new(); p + 1];
    let mut pacf = vec![T::zero(); p];
    orders[p] = phi.to_vec();
    for k in (1..=p).rev() {
        let a = &orders[k];
        let kappa = a[k - 1];
        if !(kappa.abs() < T::one()) {
            return Err(Error::NonStationary {
                lag: k,
                pacf: kappa.as_f64(),
            });
        }
        pacf[k - 1] = kappa;
        let denom = T::one() - kappa * kappa;
        let prev = (1..k)
            .map(|j| (a[j - 1] + kappa * a[k - j - 1]) / denom)
            .collect();
        orders[k - 1] = prev;
    }
    Ok((pacf, orders))
}

/// AR(p) process `X_t = Σ φ_j X_{t-j} + ε_t` with `Var ε = innovation_variance`.
pub fn ar_process<T: Real>(
    coefficients: &[T],
    innovation_variance: T,
) -> Result<StationaryProcessSpec<T>> {
    check_variance(innovation_variance)?;
    if coefficients.iter().any(|c| !c.is_finite()) {
        return Err(Error::Config("AR coefficients must be finite".into()));
    }
    let (pacf, orders) = step_down(coefficients)?;
    let p = coefficients.len();
    // v_p = γ(0) Π (1 - κ_k²) equals the innovation variance
    let shrink: T = pacf
        .iter()
        .fold(T::one(), |acc, &k| acc * (T::one() - k * k));
    let mut gammas = vec![innovation_variance / shrink];
    for k in 1..=p {
        let gk = orders[k]
            .iter()
            .enumerate()
            .map(|(j, &c)| c * gammas[k - 1 - j])
            .sum();
        gammas.push(gk);
    }
    Ok(StationaryProcessSpec::build(
        Autocov::Ar(coefficients.to_vec()),
        gammas,
        Some(p),
    ))
}

/// MA(q) process `X_t = ε_t + Σ θ_j ε_{t-j}`.
pub fn ma_process<T: Real>(
    coefficients: &[T],
    innovation_variance: T,
) -> Result<StationaryProcessSpec<T>> {
    check_variance(innovation_variance)?;
    if coefficients.iter().any(|c| !c.is_finite()) {
        return Err(Error::Config("MA coefficients must be finite".into()));
    }
    if coefficients.is_empty() {
        return StationaryProcessSpec::white_noise(innovation_variance);
    }
    Ok(StationaryProcessSpec::build(
        Autocov::Ma {
            theta: coefficients.to_vec(),
            innovation_variance,
        },
        Vec::new(),
        None,
    ))
}

/// Best linear predictor of `X_i` from `X_1, …, X_{i-1}`.
#[derive(Debug, Clone, PartialEq)]
pub struct PredictionRecursionState<T> {
    /// 1-based index of the predicted observation.
    pub step: usize,
    /// `coefficients[j-1]` multiplies the centred `X_{i-j}`.
    pub coefficients: Vec<T>,
    pub conditional_variance: T,
}

impl<T: Real> PredictionRecursionState<T> {
    /// `μ + Σ_j φ_j (x_{i-j} - μ)` given the last observations in `history`.
    pub fn conditional_mean(&self, history: &[T], mean: T) -> T {
        let n = history.len();
        self.coefficients
            .iter()
            .enumerate()
            .fold(mean, |acc, (j, &c)| acc + c * (history[n - 1 - j] - mean))
    }
}

// Once |κ| stays below machine epsilon this many times in a row the predictor
// is treated as converged.
const CONVERGED_RUN: usize = 8;

/// Streaming Durbin–Levinson recursion.
#[derive(Debug, Clone)]
pub struct OneStepPredictor<'a, T: Real> {
    spec: &'a StationaryProcessSpec<T>,
    state: PredictionRecursionState<T>,
    truncate: bool,
    frozen: bool,
    small_run: usize,
}

impl<'a, T: Real> OneStepPredictor<'a, T> {
    /// Exact recursion: the order grows by one every step.
    pub fn exact(spec: &'a StationaryProcessSpec<T>) -> Result<Self> {
        Self::start(spec, false)
    }

    /// Stops growing the order past `max_lag_hint`, or once the partial
    /// autocorrelations have vanished to machine precision. This makes an
    /// AR(p) predictor depend on exactly the last `p` observations.
    pub fn truncated(spec: &'a StationaryProcessSpec<T>) -> Result<Self> {
        Self::start(spec, true)
    }

    fn start(spec: &'a StationaryProcessSpec<T>, truncate: bool) -> Result<Self> {
        let g0 = spec.gamma(0);
        if !(g0 > T::zero()) || !g0.is_finite() {
            return Err(Error::NotPositiveDefinite { dimension: 1 });
        }
        let state = PredictionRecursionState {
            step: 1,
            coefficients: Vec::new(),
            conditional_variance: g0,
        };
        let frozen = truncate && spec.max_lag_hint == Some(0);
        Ok(Self {
            spec,
            state,
            truncate,
            frozen,
            small_run: 0,
        })
    }

    pub fn state(&self) -> &PredictionRecursionState<T> {
        &self.state
    }

    /// Moves from the predictor of `X_i` to that of `X_{i+1}`.
    pub fn advance(&mut self) -> Result<()> {
        self.state.step += 1;
        if self.frozen {
            return Ok(());
        }
        let m = self.state.coefficients.len() + 1;
        let phi = &self.state.coefficients;
        let mut num = self.spec.gamma(m);
        for (j, &c) in phi.iter().enumerate() {
            num = num - c * self.spec.gamma(m - 1 - j);
        }
        let kappa = num / self.state.conditional_variance;
        let v = self.state.conditional_variance * (T::one() - kappa * kappa);
        if !(v > T::zero()) || !v.is_finite() {
            return Err(Error::NotPositiveDefinite { dimension: m + 1 });
        }
        let mut next: Vec<T> = (0..m - 1)
            .map(|j| phi[j] - kappa * phi[m - 2 - j])
            .collect();
        next.push(kappa);
        self.state.coefficients = next;
        self.state.conditional_variance = v;

        if self.truncate {
            if self.spec.max_lag_hint.is_some_and(|p| m >= p) {
                self.frozen = true;
            } else if kappa.abs() < T::epsilon() {
                self.small_run += 1;
                if self.small_run >= CONVERGED_RUN {
                    self.frozen = true;
                }
            } else {
                self.small_run = 0;
            }
        }
        Ok(())
    }
}

/// Predictor states for `i = 1..=n`, with the order growing every step.
pub fn innovations_recursion<T: Real>(
    spec: &StationaryProcessSpec<T>,
    n: usize,
) -> Result<Vec<PredictionRecursionState<T>>> {
    if n == 0 {
        return Ok(Vec::new());
    }
    let mut pred = OneStepPredictor::exact(spec)?;
    let mut out = Vec::with_capacity(n);
    out.push(pred.state().clone());
    for _ in 1..n {
        pred.advance()?;
        out.push(pred.state().clone());
    }
    Ok(out)
}

/// Gaussian path `x_i = E[X_i | past] + √v_i z_i` with `z_i` drawn from a
/// ChaCha8 stream keyed by `seed`.
pub fn sample_path<T: Real>(
    spec: &StationaryProcessSpec<T>,
    n: usize,
    seed: u64,
) -> Result<Vec<T>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    sample_path_with(spec, n, &mut rng)
}

/// As [`sample_path`], drawing from a caller-supplied generator.
pub fn sample_path_with<T: Real, R: rand::Rng + ?Sized>(
    spec: &StationaryProcessSpec<T>,
    n: usize,
    rng: &mut R,
) -> Result<Vec<T>> {
    let mut path = Vec::with_capacity(n);
    if n == 0 {
        return Ok(path);
    }
    let mut pred = OneStepPredictor::truncated(spec)?;
    for i in 0..n {
        if i > 0 {
            pred.advance()?;
        }
        let z: f64 = StandardNormal.sample(rng);
        let st = pred.state();
        let x = st.conditional_mean(&path, spec.mean) + st.conditional_variance.sqrt() * T::lit(z);
        path.push(x);
    }
    Ok(path)
}
