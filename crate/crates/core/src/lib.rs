//! Simulation and operator estimation for conjugate processes.
//!
//! A conjugate process pairs a latent stationary sequence of random
//! probability measures `ξ_t` with a continuous-time observable process `X`
//! whose marginal law on the cycle `[t, t+1)` is `ξ_t`. This crate simulates
//! the two-point example (latent averages of uniform draws, a stationary
//! two-state CTMC inside each cycle), estimates the lag-1 covariance kernel
//! and the operator `R^μ` on L²(μ), decomposes it, computes exact ψ-mixing
//! coefficients of a finite version of the model, and drives the Monte Carlo
//! experiments that check the estimators' rates.
//!
//! The numeric core is generic over [`Scalar`] (`f32`/`f64`); the mixing
//! enumeration is generic over [`mixing::Probability`] (`f64` or exact
//! rationals). The aliases below fix the usual `f64` instantiations.

pub mod error;
pub mod estimate;
pub mod harness;
pub mod latent;
pub mod measure;
pub mod mixing;
pub mod observe;
pub mod quadrature;
pub mod rng;
pub mod scalar;
pub mod spectral;

pub use error::{Error, Result};
pub use scalar::Scalar;

pub type Measure = measure::MeasureSpec<f64>;
pub type Grid = quadrature::QuadratureGrid<f64>;
pub type GridFn = quadrature::GridFunction<f64>;
pub type Kernel = estimate::CovKernelGrid<f64>;
pub type Ecdf = estimate::EmpiricalCdf<f64>;
pub type Spectrum = spectral::Spectrum<f64>;
pub type ToyModel = mixing::FiniteConjugateModel<f64>;
pub type ExactToyModel = mixing::FiniteConjugateModel<num_rational::BigRational>;
