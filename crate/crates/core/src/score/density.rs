//! Log densities with analytic first and second derivatives, all taken with
//! respect to Lebesgue measure on the real line.

use std::fmt;
use std::sync::Arc;

use statrs::function::gamma::ln_gamma;

use crate::real::Real;

/// A (possibly unnormalized) univariate log density with its derivatives.
pub trait LogDensity<T: Real> {
    fn logpdf(&self, x: T) -> T;
    fn dlogpdf(&self, x: T) -> T;
    fn d2logpdf(&self, x: T) -> T;
    /// Normalizable w.r.t. Lebesgue measure.
    fn is_proper(&self) -> bool;
    /// Log density is C² on the whole real line.
    fn is_smooth(&self) -> bool;
}

type ScalarFn<T> = Arc<dyn Fn(T) -> T + Send + Sync>;

/// Log density assembled from caller-supplied closures.
///
/// The `proper` and `smooth` flags are declarations made by the constructor's
/// caller; nothing here tries to verify them.
#[derive(Clone)]
pub struct DensityWithDerivatives<T> {
    logpdf: ScalarFn<T>,
    dlogpdf: ScalarFn<T>,
    d2logpdf: ScalarFn<T>,
    pub proper: bool,
    pub smooth: bool,
}

impl<T: Real> DensityWithDerivatives<T> {
    pub fn new(
        logpdf: impl Fn(T) -> T + Send + Sync + 'static,
        dlogpdf: impl Fn(T) -> T + Send + Sync + 'static,
        d2logpdf: impl Fn(T) -> T + Send + Sync + 'static,
        proper: bool,
        smooth: bool,
    ) -> Self {
        Self {
            logpdf: Arc::new(logpdf),
            dlogpdf: Arc::new(dlogpdf),
            d2logpdf: Arc::new(d2logpdf),
            proper,
            smooth,
        }
    }

    /// Wraps any other density.
    pub fn from_density<D>(d: D) -> Self
    where
        D: LogDensity<T> + Clone + Send + Sync + 'static,
    {
        let (proper, smooth) = (d.is_proper(), d.is_smooth());
        let (d1, d2) = (d.clone(), d.clone());
        Self::new(
            move |x| d.logpdf(x),
            move |x| d1.dlogpdf(x),
            move |x| d2.d2logpdf(x),
            proper,
            smooth,
        )
    }

    /// The same density multiplied by `exp(c)`. Any `c != 0` leaves it unnormalized.
    pub fn shifted(&self, c: T) -> Self {
        let inner = self.logpdf.clone();
        Self {
            logpdf: Arc::new(move |x| inner(x) + c),
            dlogpdf: self.dlogpdf.clone(),
            d2logpdf: self.d2logpdf.clone(),
            proper: self.proper && c == T::zero(),
            smooth: self.smooth,
        }
    }
}

impl<T> fmt::Debug for DensityWithDerivatives<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("DensityWithDerivatives")
            .field("proper", &self.proper)
            .field("smooth", &self.smooth)
            .finish_non_exhaustive()
    }
}

impl<T: Real> LogDensity<T> for DensityWithDerivatives<T> {
    fn logpdf(&self, x: T) -> T {
        (self.logpdf)(x)
    }
    fn dlogpdf(&self, x: T) -> T {
        (self.dlogpdf)(x)
    }
    fn d2logpdf(&self, x: T) -> T {
        (self.d2logpdf)(x)
    }
    fn is_proper(&self) -> bool {
        self.proper
    }
    fn is_smooth(&self) -> bool {
        self.smooth
    }
}

/// Location–scale Student-t predictive.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StudentTPredictive<T> {
    pub center: T,
    pub scale: T,
    pub dof: T,
}

impl<T: Real> StudentTPredictive<T> {
    pub fn new(center: T, scale: T, dof: T) -> Self {
        Self { center, scale, dof }
    }

    fn log_normalizer(&self) -> T {
        let nu = self.dof.as_f64();
        let c = ln_gamma((nu + 1.0) / 2.0)
            - ln_gamma(nu / 2.0)
            - 0.5 * (nu * std::f64::consts::PI).ln();
        T::lit(c) - self.scale.ln()
    }

    // ν s² + d²
    #[inline]
    fn spread(&self, x: T) -> (T, T) {
        let d = x - self.center;
        (d, self.dof * self.scale * self.scale + d * d)
    }
}

impl<T: Real> LogDensity<T> for StudentTPredictive<T> {
    fn logpdf(&self, x: T) -> T {
        let z = (x - self.center) / self.scale;
        let half = T::lit(0.5);
        self.log_normalizer() - half * (self.dof + T::one()) * (z * z / self.dof).ln_1p()
    }

    fn dlogpdf(&self, x: T) -> T {
        let (d, w) = self.spread(x);
        -(self.dof + T::one()) * d / w
    }

    fn d2logpdf(&self, x: T) -> T {
        let (d, w) = self.spread(x);
        let a = self.dof * self.scale * self.scale;
        -(self.dof + T::one()) * (a - d * d) / (w * w)
    }

    fn is_proper(&self) -> bool {
        true
    }

    fn is_smooth(&self) -> bool {
        true
    }
}

/// Unnormalizable kernel `|x - center|^(-exponent)`.
///
/// This is what the flat-prior scale model predicts before the sum of squared
/// deviations becomes positive. Smooth everywhere except at `center`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PowerLawKernel<T> {
    pub center: T,
    pub exponent: T,
}

impl<T: Real> LogDensity<T> for PowerLawKernel<T> {
    fn logpdf(&self, x: T) -> T {
        -self.exponent * (x - self.center).abs().ln()
    }
    fn dlogpdf(&self, x: T) -> T {
        -self.exponent / (x - self.center)
    }
    fn d2logpdf(&self, x: T) -> T {
        let d = x - self.center;
        self.exponent / (d * d)
    }
    fn is_proper(&self) -> bool {
        false
    }
    fn is_smooth(&self) -> bool {
        // only on the punctured line; the Hyvarinen path checks finiteness
        true
    }
}

/// Laplace density. Its log density has a kink at the location.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Laplace<T> {
    pub location: T,
    pub scale: T,
}

impl<T: Real> LogDensity<T> for Laplace<T> {
    fn logpdf(&self, x: T) -> T {
        -(T::lit(2.0) * self.scale).ln() - (x - self.location).abs() / self.scale
    }
    fn dlogpdf(&self, x: T) -> T {
        -(x - self.location).signum() / self.scale
    }
    fn d2logpdf(&self, _x: T) -> T {
        T::zero()
    }
    fn is_proper(&self) -> bool {
        true
    }
    fn is_smooth(&self) -> bool {
        false
    }
}

/// Central finite-difference first and second derivatives of `f` at `x`.
pub fn finite_differences<T: Real>(f: impl Fn(T) -> T, x: T, h: T) -> (T, T) {
    let (fp, f0, fm) = (f(x + h), f(x), f(x - h));
    let two = T::lit(2.0);
    ((fp - fm) / (two * h), (fp - two * f0 + fm) / (h * h))
}
