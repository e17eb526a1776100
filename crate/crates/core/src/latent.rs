//! The latent measure-valued sequence of the two-point example.
//!
//! `ϑ_t` are iid uniform on `[0, 1]` (or on a finite level set), `η_t` puts
//! mass `ϑ_t` on 0 and `1 - ϑ_t` on 1, and `ξ_t = (η_t + η_{t-1}) / 2`. The
//! resulting sequence is stationary and 1-dependent.

use std::io::Write;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{config, Result};
use crate::measure::MeasureSpec;
use crate::rng::{Domain, StreamKey};
use crate::scalar::Scalar;

/// `Cov(F_0(x), F_1(y))` for `x, y ∈ [0, 1)` in the two-point example.
pub const LAG1_COVARIANCE: f64 = 1.0 / 48.0;

/// A finitely supported probability measure `ξ_t`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LatentState<T = f64> {
    support: Vec<T>,
    masses: Vec<T>,
    cycle_index: i64,
}

impl<T: Scalar> LatentState<T> {
    pub fn new(support: Vec<T>, masses: Vec<T>, cycle_index: i64) -> Result<Self> {
        if support.is_empty() || support.len() != masses.len() {
            return config(format!(
                "latent state needs matching nonempty support/masses, got {} and {}",
                support.len(),
                masses.len()
            ));
        }
        if !support.windows(2).all(|w| w[0] < w[1]) {
            return config("latent support must be strictly increasing");
        }
        if masses.iter().any(|&p| p.is_nan() || p < T::zero()) {
            return config("latent masses must be nonnegative");
        }
        let total: T = masses.iter().copied().sum();
        if (total - T::one()).abs() > T::of(1e-12).max(T::epsilon() * T::of(8.0)) {
            return config(format!("latent masses sum to {total}, not 1"));
        }
        Ok(Self {
            support,
            masses,
            cycle_index,
        })
    }

    /// Measure on `{0, 1}` with mass `p0` at 0.
    pub fn two_point(p0: T, cycle_index: i64) -> Result<Self> {
        if !(T::zero()..=T::one()).contains(&p0) {
            return config(format!("mass at 0 must lie in [0, 1], got {p0}"));
        }
        Self::new(vec![T::zero(), T::one()], vec![p0, T::one() - p0], cycle_index)
    }

    pub fn support(&self) -> &[T] {
        &self.support
    }

    pub fn masses(&self) -> &[T] {
        &self.masses
    }

    pub fn cycle_index(&self) -> i64 {
        self.cycle_index
    }

    /// `ξ({x})`.
    pub fn mass_at(&self, x: T) -> T {
        self.support
            .iter()
            .position(|&s| s == x)
            .map_or(T::zero(), |i| self.masses[i])
    }

    /// `F(x) = ξ((-∞, x])`.
    pub fn cdf(&self, x: T) -> T {
        let k = self.support.partition_point(|&s| s <= x);
        if k == self.support.len() {
            return T::one();
        }
        self.masses[..k].iter().copied().sum()
    }
}

/// Configuration of the latent generator.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct TwoPointLatentConfig {
    pub seed: u64,
    /// Equiprobable finite support for `ϑ`; `None` draws `ϑ` uniformly on `[0, 1)`.
    #[serde(default)]
    pub theta_levels: Option<Vec<f64>>,
}

impl TwoPointLatentConfig {
    pub fn continuous(seed: u64) -> Self {
        Self {
            seed,
            theta_levels: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if let Some(levels) = &self.theta_levels {
            if levels.is_empty() {
                return config("theta_levels must be nonempty when present");
            }
            if let Some(bad) = levels.iter().find(|v| !(0.0..=1.0).contains(*v)) {
                return config(format!("theta level {bad} outside [0, 1]"));
            }
        }
        Ok(())
    }
}

/// `ξ_0, …, ξ_n` together with the draws `ϑ_{-1}, …, ϑ_n` they were built from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LatentSequence {
    pub states: Vec<LatentState<f64>>,
    pub theta_draws: Vec<f64>,
}

impl LatentSequence {
    /// Number of cycles after the initial one, i.e. states are `ξ_0..=ξ_n`.
    pub fn n(&self) -> usize {
        self.states.len() - 1
    }

    pub fn theta(&self, t: i64) -> f64 {
        self.theta_draws[(t + 1) as usize]
    }

    /// `ξ_t({0})`.
    pub fn xi0(&self, t: usize) -> f64 {
        self.states[t].masses()[0]
    }

    /// CSV with columns `t, theta_prev, theta, xi0`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["t", "theta_prev", "theta", "xi0"])
            .map_err(csv_err)?;
        for (t, s) in self.states.iter().enumerate() {
            let t = t as i64;
            w.serialize((t, self.theta(t - 1), self.theta(t), s.masses()[0]))
                .map_err(csv_err)?;
        }
        w.flush()?;
        Ok(())
    }
}

pub(crate) fn csv_err(e: csv::Error) -> crate::Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => crate::Error::Io(io),
        other => crate::Error::Usage(format!("csv: {other:?}")),
    }
}

pub fn generate_latent(config: &TwoPointLatentConfig, n: usize) -> Result<LatentSequence> {
    generate_latent_keyed(config, StreamKey::from(config.seed), n)
}

/// As [`generate_latent`] but with an explicit stream key (used by the
/// replication harness, whose keys carry experiment and replication ids).
pub fn generate_latent_keyed(
    config: &TwoPointLatentConfig,
    key: StreamKey,
    n: usize,
) -> Result<LatentSequence> {
    config.validate()?;
    if n == 0 {
        return crate::error::usage("generate_latent needs n >= 1");
    }
    let theta_draws: Vec<f64> = (-1..=n as i64)
        .map(|t| draw_theta(config.theta_levels.as_deref(), key, t))
        .collect();
    let states = theta_draws
        .windows(2)
        .enumerate()
        .map(|(t, w)| LatentState::two_point((w[0] + w[1]) / 2.0, t as i64))
        .collect::<Result<Vec<_>>>()?;
    Ok(LatentSequence {
        states,
        theta_draws,
    })
}

fn draw_theta(levels: Option<&[f64]>, key: StreamKey, t: i64) -> f64 {
    let mut rng = key.stream(Domain::Latent, t);
    match levels {
        Some(levels) => levels[rng.random_range(0..levels.len())],
        None => rng.random::<f64>(),
    }
}

/// True lag-1 covariance kernel `C_1(x, y)` of the example.
pub fn true_c1<T: Scalar>(x: T, y: T) -> T {
    if in_unit(x) && in_unit(y) {
        T::of(LAG1_COVARIANCE)
    } else {
        T::zero()
    }
}

/// True `R_μ(x, y) = ∫ C_1(x, z) C_1(y, z) μ(dz)`, which for the example is
/// `(1/48)² μ([0, 1))` on `[0, 1)²` and zero elsewhere.
pub fn true_r_kernel<T: Scalar>(x: T, y: T, measure: &MeasureSpec<T>) -> T {
    if in_unit(x) && in_unit(y) {
        let c = T::of(LAG1_COVARIANCE);
        c * c * (measure.cdf(T::one()) - measure.cdf(T::zero()))
    } else {
        T::zero()
    }
}

fn in_unit<T: Scalar>(x: T) -> bool {
    x >= T::zero() && x < T::one()
}
