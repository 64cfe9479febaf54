//! Smooth strictly increasing changes of variable `y = g(x)` and the induced
//! densities on the `y` scale.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::score::LogDensity;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind", content = "factor")]
pub enum Transform {
    Identity,
    /// `g(x) = x³ + x`
    Cubic,
    /// `g(x) = c x`, `c > 0`
    Affine(f64),
}

impl Transform {
    pub fn apply(&self, x: f64) -> f64 {
        match *self {
            Transform::Identity => x,
            Transform::Cubic => x * x * x + x,
            Transform::Affine(c) => c * x,
        }
    }

    pub fn derivative(&self, x: f64) -> f64 {
        match *self {
            Transform::Identity => 1.0,
            Transform::Cubic => 3.0 * x * x + 1.0,
            Transform::Affine(c) => c,
        }
    }

    pub fn second_derivative(&self, x: f64) -> f64 {
        match *self {
            Transform::Cubic => 6.0 * x,
            _ => 0.0,
        }
    }

    pub fn third_derivative(&self, _x: f64) -> f64 {
        match *self {
            Transform::Cubic => 6.0,
            _ => 0.0,
        }
    }

    pub fn inverse(&self, y: f64) -> f64 {
        match *self {
            Transform::Identity => y,
            Transform::Affine(c) => y / c,
            Transform::Cubic => {
                // Cardano for x³ + x - |y| = 0 (one real root), then Newton polish;
                // g is odd so the sign is restored at the end.
                let (sign, y) = (y.signum(), y.abs());
                let h = (y * y / 4.0 + 1.0 / 27.0).sqrt();
                let mut x = (y / 2.0 + h).cbrt() - (h - y / 2.0).cbrt();
                for _ in 0..3 {
                    let f = x * x * x + x - y;
                    x -= f / (3.0 * x * x + 1.0);
                }
                sign * x
            }
        }
    }

    /// Fails unless `g' > 0` at every point of `data`.
    pub fn check_monotone(&self, data: &[f64]) -> Result<()> {
        match data.iter().find(|&&x| !(self.derivative(x) > 0.0)) {
            Some(&x) => Err(Error::NonMonotoneTransform(x)),
            None => Ok(()),
        }
    }
}

/// Density of `Y = g(X)` with Jacobian correction:
/// `log q_Y(y) = log q_X(x) - log g'(x)`, `x = g⁻¹(y)`.
#[derive(Debug, Clone)]
pub struct TransformedDensity<D> {
    pub base: D,
    pub transform: Transform,
}

impl<D: LogDensity<f64>> TransformedDensity<D> {
    // d/dx and d²/dx² of log q_X(x) - log g'(x)
    fn x_derivatives(&self, x: f64) -> (f64, f64) {
        let g = &self.transform;
        let (g1, g2, g3) = (
            g.derivative(x),
            g.second_derivative(x),
            g.third_derivative(x),
        );
        let l1 = self.base.dlogpdf(x) - g2 / g1;
        let l2 = self.base.d2logpdf(x) - (g3 * g1 - g2 * g2) / (g1 * g1);
        (l1, l2)
    }
}

impl<D: LogDensity<f64>> LogDensity<f64> for TransformedDensity<D> {
    fn logpdf(&self, y: f64) -> f64 {
        let x = self.transform.inverse(y);
        self.base.logpdf(x) - self.transform.derivative(x).ln()
    }

    fn dlogpdf(&self, y: f64) -> f64 {
        let x = self.transform.inverse(y);
        let (l1, _) = self.x_derivatives(x);
        l1 / self.transform.derivative(x)
    }

    fn d2logpdf(&self, y: f64) -> f64 {
        let x = self.transform.inverse(y);
        let (l1, l2) = self.x_derivatives(x);
        let (g1, g2) = (
            self.transform.derivative(x),
            self.transform.second_derivative(x),
        );
        (l2 * g1 - l1 * g2) / (g1 * g1 * g1)
    }

    fn is_proper(&self) -> bool {
        self.base.is_proper()
    }

    fn is_smooth(&self) -> bool {
        self.base.is_smooth()
    }
}
