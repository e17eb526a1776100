//! Within-cycle observable process: a stationary two-state CTMC whose
//! stationary law is the cycle's latent measure.
//!
//! Given `ξ_t = λ`, the chain starts from `(λ(0), λ(1))` and has generator
//! `[[-q0, q0], [r, -r]]` with `r = q0 λ(0) / λ(1)`, so `P(X_{t+τ} = 0) = λ(0)`
//! for every `τ ∈ [0, 1)`. Each cycle draws from its own stream, which makes
//! cycles conditionally independent given the latent sequence and dependent on
//! their own `ξ_t` only.

use rand::distr::Open01;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{config, usage, Result};
use crate::latent::{LatentSequence, LatentState};
use crate::rng::{Domain, StreamKey};

/// Probability below which a state is treated as absent.
pub const DEGENERATE_MASS: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CtmcConfig {
    /// Rate of leaving state 0; the mean holding time there is `1 / q0`.
    pub q0: f64,
}

impl Default for CtmcConfig {
    fn default() -> Self {
        Self { q0: 10.0 }
    }
}

impl CtmcConfig {
    pub fn new(q0: f64) -> Result<Self> {
        if !(q0.is_finite() && q0 > 0.0) {
            return config(format!("q0 must be positive and finite, got {q0}"));
        }
        Ok(Self { q0 })
    }
}

/// One cycle `[t, t + 1)` of the observable path, as a right-continuous step
/// function.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathSegment {
    pub cycle_index: i64,
    pub initial_state: u8,
    /// Jump instants relative to the cycle start, strictly increasing in `(0, 1)`.
    pub jump_times: Vec<f64>,
    /// State held on each interval; `states[0] == initial_state`.
    pub states: Vec<u8>,
}

impl PathSegment {
    fn constant(cycle_index: i64, state: u8) -> Self {
        Self {
            cycle_index,
            initial_state: state,
            jump_times: Vec::new(),
            states: vec![state],
        }
    }

    /// State at offset `tau`; at a jump instant the post-jump state is returned.
    pub fn state_at(&self, tau: f64) -> u8 {
        self.states[self.jump_times.partition_point(|&s| s <= tau)]
    }

    /// Holding intervals as `(state, length, censored)`; only the last one is
    /// censored by the cycle boundary.
    pub fn holdings(&self) -> impl Iterator<Item = (u8, f64, bool)> + '_ {
        let edges: Vec<f64> = std::iter::once(0.0)
            .chain(self.jump_times.iter().copied())
            .chain(std::iter::once(1.0))
            .collect();
        let last = self.states.len() - 1;
        self.states
            .iter()
            .enumerate()
            .map(move |(i, &s)| (s, edges[i + 1] - edges[i], i == last))
    }

    pub fn is_valid(&self) -> bool {
        self.states.len() == self.jump_times.len() + 1
            && self.states[0] == self.initial_state
            && self.states.iter().all(|&s| s <= 1)
            && self.states.windows(2).all(|w| w[0] != w[1])
            && self.jump_times.windows(2).all(|w| w[0] < w[1])
            && self.jump_times.iter().all(|&t| t > 0.0 && t < 1.0)
    }
}

/// Within-cycle sampling instants `(i - 1) / q`, `i = 1..=q`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SamplingScheme {
    offsets: Vec<f64>,
}

impl SamplingScheme {
    pub fn equispaced(q: usize) -> Result<Self> {
        if q == 0 {
            return config("sampling scheme needs q_t >= 1");
        }
        Ok(Self {
            offsets: (0..q).map(|i| i as f64 / q as f64).collect(),
        })
    }

    pub fn from_offsets(offsets: Vec<f64>) -> Result<Self> {
        if offsets.is_empty()
            || !offsets.iter().all(|t| (0.0..1.0).contains(t))
            || !offsets.windows(2).all(|w| w[0] < w[1])
        {
            return config("offsets must be nonempty, strictly increasing and inside [0, 1)");
        }
        Ok(Self { offsets })
    }

    pub fn offsets(&self) -> &[f64] {
        &self.offsets
    }

    pub fn q(&self) -> usize {
        self.offsets.len()
    }
}

/// Simulates one cycle of the chain given its latent two-point measure.
pub fn simulate_segment<R: Rng + ?Sized>(
    state: &LatentState<f64>,
    config: &CtmcConfig,
    rng: &mut R,
) -> Result<PathSegment> {
    if state.support() != [0.0, 1.0] {
        return usage(format!(
            "CTMC observer needs a measure supported on {{0, 1}}, got {:?}",
            state.support()
        ));
    }
    let t = state.cycle_index();
    let lambda0 = state.masses()[0];
    let lambda1 = state.masses()[1];
    if lambda1 < DEGENERATE_MASS {
        return Ok(PathSegment::constant(t, 0));
    }
    if lambda0 < DEGENERATE_MASS {
        return Ok(PathSegment::constant(t, 1));
    }
    let rates = [config.q0, config.q0 * lambda0 / lambda1];
    let initial = if rng.random::<f64>() < lambda0 { 0u8 } else { 1 };

    let mut seg = PathSegment::constant(t, initial);
    let mut current = initial;
    let mut clock = 0.0;
    loop {
        let u: f64 = rng.sample(Open01);
        let next = clock - u.ln() / rates[current as usize];
        if next >= 1.0 {
            break;
        }
        if next <= clock {
            // holding time below the resolution of the clock; redraw
            continue;
        }
        clock = next;
        current ^= 1;
        seg.jump_times.push(clock);
        seg.states.push(current);
    }
    Ok(seg)
}

/// Path values at the scheme's offsets.
pub fn sample_segment(segment: &PathSegment, scheme: &SamplingScheme) -> Vec<f64> {
    scheme
        .offsets()
        .iter()
        .map(|&tau| f64::from(segment.state_at(tau)))
        .collect()
}

/// Segments for cycles `first..=last` of `latent`, each from the stream
/// `(key, t)`. Runs on the current rayon pool; output is identical to a
/// sequential run.
pub fn simulate_paths(
    latent: &LatentSequence,
    cycles: std::ops::RangeInclusive<usize>,
    config: &CtmcConfig,
    key: StreamKey,
) -> Result<Vec<PathSegment>> {
    if *cycles.end() >= latent.states.len() {
        return usage(format!(
            "cycle {} beyond latent sequence of length {}",
            cycles.end(),
            latent.states.len()
        ));
    }
    cycles
        .into_par_iter()
        .map(|t| {
            let mut rng = key.stream(Domain::Observe, t as i64);
            simulate_segment(&latent.states[t], config, &mut rng)
        })
        .collect()
}

/// Per-cycle samples for cycles `1..=n`, the cycles entering the estimators.
pub fn simulate_conjugate(
    latent: &LatentSequence,
    config: &CtmcConfig,
    scheme: &SamplingScheme,
    key: StreamKey,
) -> Result<Vec<Vec<f64>>> {
    let n = latent.n();
    let paths = simulate_paths(latent, 1..=n, config, key)?;
    Ok(paths.iter().map(|p| sample_segment(p, scheme)).collect())
}
