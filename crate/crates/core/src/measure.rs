//! Reference probability measures on the real line.
//!
//! Every measure here has a closed-form (or library-grade) CDF and quantile,
//! which is what the quantile-transform quadrature in [`crate::quadrature`]
//! needs.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{config, usage, Result};
use crate::scalar::Scalar;

/// A probability measure on ℝ, selected by name in configuration files:
/// `{"name": "logistic", "location": 0.5, "scale": 1.0}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "lowercase")]
pub enum MeasureSpec<T> {
    Logistic { location: T, scale: T },
    Gaussian { location: T, scale: T },
    /// Uniform on `[lower, upper]`. Only equivalent to Lebesgue measure on its
    /// support; kept for quadrature sanity checks.
    Uniform { lower: T, upper: T },
}

impl<T: Scalar> Default for MeasureSpec<T> {
    fn default() -> Self {
        MeasureSpec::Logistic {
            location: T::of(0.5),
            scale: T::one(),
        }
    }
}

impl<T: Scalar> MeasureSpec<T> {
    pub fn logistic(location: T, scale: T) -> Result<Self> {
        Self::Logistic { location, scale }.validated()
    }

    pub fn gaussian(location: T, scale: T) -> Result<Self> {
        Self::Gaussian { location, scale }.validated()
    }

    pub fn uniform(lower: T, upper: T) -> Result<Self> {
        Self::Uniform { lower, upper }.validated()
    }

    /// Checks parameters; returns the spec unchanged when they are usable.
    pub fn validated(self) -> Result<Self> {
        match self {
            Self::Logistic { location, scale } | Self::Gaussian { location, scale } => {
                if !location.is_finite() || !scale.is_finite() || scale <= T::zero() {
                    return config(format!(
                        "{}: need finite location and positive scale, got ({location}, {scale})",
                        self.name()
                    ));
                }
            }
            Self::Uniform { lower, upper } => {
                if !lower.is_finite() || !upper.is_finite() || lower >= upper {
                    return config(format!(
                        "uniform: need finite lower < upper, got ({lower}, {upper})"
                    ));
                }
            }
        }
        Ok(self)
    }

    pub fn name(&self) -> &'static str {
        match self {
            Self::Logistic { .. } => "logistic",
            Self::Gaussian { .. } => "gaussian",
            Self::Uniform { .. } => "uniform",
        }
    }

    pub fn cdf(&self, x: T) -> T {
        match *self {
            Self::Logistic { location, scale } => {
                T::one() / (T::one() + (-(x - location) / scale).exp())
            }
            Self::Gaussian { location, scale } => {
                T::of(normal(location, scale).cdf(x.as_f64()))
            }
            Self::Uniform { lower, upper } => {
                if x <= lower {
                    T::zero()
                } else if x >= upper {
                    T::one()
                } else {
                    (x - lower) / (upper - lower)
                }
            }
        }
    }

    /// Inverse CDF on the open unit interval. Returns ±∞ at 0 and 1 and NaN
    /// outside `[0, 1]`.
    pub fn quantile(&self, u: T) -> T {
        if u.is_nan() || u < T::zero() || u > T::one() {
            return T::nan();
        }
        match *self {
            Self::Logistic { location, scale } => location + scale * (u / (T::one() - u)).ln(),
            Self::Gaussian { location, scale } => {
                if u == T::zero() {
                    T::neg_infinity()
                } else if u == T::one() {
                    T::infinity()
                } else {
                    T::of(normal(location, scale).inverse_cdf(u.as_f64()))
                }
            }
            Self::Uniform { lower, upper } => lower + u * (upper - lower),
        }
    }

    pub fn density(&self, x: T) -> T {
        match *self {
            Self::Logistic { location, scale } => {
                let e = (-(x - location).abs() / scale).exp();
                e / (scale * (T::one() + e) * (T::one() + e))
            }
            Self::Gaussian { location, scale } => {
                let z = (x - location) / scale;
                let norm = scale * T::of((2.0 * std::f64::consts::PI).sqrt());
                (-(z * z) / T::of(2.0)).exp() / norm
            }
            Self::Uniform { lower, upper } => {
                if x < lower || x > upper {
                    T::zero()
                } else {
                    T::one() / (upper - lower)
                }
            }
        }
    }

    /// μ((a, b]) = cdf(b) − cdf(a). Infinite endpoints are allowed.
    pub fn mass(&self, a: T, b: T) -> Result<T> {
        if a.is_nan() || b.is_nan() || a > b {
            return usage(format!("measure_mass needs a <= b, got ({a}, {b})"));
        }
        if a == b {
            return Ok(T::zero());
        }
        Ok(self.cdf(b) - self.cdf(a))
    }
}

/// Free-function form of [`MeasureSpec::mass`].
pub fn measure_mass<T: Scalar>(measure: &MeasureSpec<T>, a: T, b: T) -> Result<T> {
    measure.mass(a, b)
}

fn normal<T: Scalar>(location: T, scale: T) -> Normal {
    Normal::new(location.as_f64(), scale.as_f64()).expect("validated gaussian parameters")
}
