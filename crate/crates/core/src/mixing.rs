//! Exact ψ-mixing coefficients of a finite-alphabet version of the two-point
//! model, by enumeration of all latent draws covering a window.
//!
//! `ϑ_t` takes finitely many values, `ξ_t({0}) = (ϑ_{t-1} + ϑ_t) / 2`, and the
//! observation of cycle `t` is a single state `X_t` with
//! `P(X_t = 0 | ξ) = ξ_t({0})`. Everything is generic over the probability
//! type, so the same code runs in `f64` and in exact rationals.

use std::collections::BTreeMap;
use std::fmt::{Debug, Display};

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{FromPrimitive, Num, Signed, ToPrimitive};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{config, usage, Error, Result};
use crate::rng::{Domain, StreamKey};

/// Field of probabilities the enumeration is carried out in.
pub trait Probability:
    Clone + PartialOrd + Num + Signed + FromPrimitive + ToPrimitive + Debug + Display + Send + Sync
{
    /// Tolerance for "sums to one"; zero for exact types.
    fn tolerance() -> Self;
}

impl Probability for f64 {
    fn tolerance() -> Self {
        1e-12
    }
}

impl Probability for BigRational {
    fn tolerance() -> Self {
        BigRational::from_integer(BigInt::from(0))
    }
}

/// Maximum number of latent draw configurations enumerated for one window
/// (2^13: a span of 12 cycles with two levels).
pub const MAX_CONFIGURATIONS: usize = 1 << 13;
/// Maximum number of (latent atom, observation pattern) pairs expanded.
pub const MAX_EXPANSION: usize = 1 << 24;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Which {
    Latent,
    Observed,
    Both,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FiniteConjugateModel<P> {
    levels: Vec<P>,
    probs: Vec<P>,
    /// Distinct values of `ξ({0})`, ascending.
    xi_values: Vec<P>,
    /// `xi_symbol[a][b]` = index in `xi_values` of `(levels[a] + levels[b]) / 2`.
    xi_symbol: Vec<Vec<u8>>,
}

impl<P: Probability> FiniteConjugateModel<P> {
    pub fn new(levels: Vec<P>, probs: Vec<P>) -> Result<Self> {
        if levels.is_empty() || levels.len() != probs.len() {
            return config("theta levels and probabilities must be nonempty and of equal length");
        }
        if levels.len() > 16 {
            return config("at most 16 theta levels are supported");
        }
        let (zero, one) = (P::zero(), P::one());
        if levels.iter().any(|l| *l < zero || *l > one) {
            return config("theta levels must lie in [0, 1]");
        }
        if probs.iter().any(|p| *p < zero) {
            return config("theta probabilities must be nonnegative");
        }
        let total = probs.iter().cloned().fold(P::zero(), |a, b| a + b);
        if (total.clone() - one).abs() > P::tolerance() {
            return config(format!("theta probabilities sum to {total}"));
        }
        let two = P::one() + P::one();
        let mut xi_values: Vec<P> = Vec::new();
        for a in &levels {
            for b in &levels {
                let v = (a.clone() + b.clone()) / two.clone();
                if !xi_values.contains(&v) {
                    xi_values.push(v);
                }
            }
        }
        xi_values.sort_by(|a, b| a.partial_cmp(b).expect("finite levels"));
        let xi_symbol = levels
            .iter()
            .map(|a| {
                levels
                    .iter()
                    .map(|b| {
                        let v = (a.clone() + b.clone()) / two.clone();
                        xi_values.iter().position(|x| *x == v).expect("value was inserted") as u8
                    })
                    .collect()
            })
            .collect();
        Ok(Self {
            levels,
            probs,
            xi_values,
            xi_symbol,
        })
    }

    pub fn from_f64(levels: &[f64], probs: &[f64]) -> Result<Self> {
        let conv = |v: &[f64]| -> Result<Vec<P>> {
            v.iter()
                .map(|&x| P::from_f64(x).ok_or_else(|| Error::Config(format!("{x} is not representable"))))
                .collect()
        };
        Self::new(conv(levels)?, conv(probs)?)
    }

    /// Equiprobable levels {1/4, 3/4}.
    pub fn toy() -> Self {
        Self::from_f64(&[0.25, 0.75], &[0.5, 0.5]).expect("toy model is valid")
    }

    pub fn levels(&self) -> &[P] {
        &self.levels
    }

    pub fn xi_values(&self) -> &[P] {
        &self.xi_values
    }

    /// Iterates every assignment of levels to `ϑ_{lo-1}..=ϑ_{hi}` with its
    /// probability, calling `visit(draws, weight)`.
    fn for_each_draw(&self, lo: i64, hi: i64, mut visit: impl FnMut(&[usize], P)) -> Result<()> {
        let count = (hi - lo + 2) as usize;
        let l = self.levels.len();
        let total = (0..count).try_fold(1usize, |acc, _| acc.checked_mul(l).filter(|&v| v <= MAX_CONFIGURATIONS));
        if total.is_none() {
            return Err(Error::Resource(format!(
                "enumerating {l}^{count} latent configurations exceeds the bound of {MAX_CONFIGURATIONS} \
                 (span {} cycles)",
                count - 1
            )));
        }
        let mut draws = vec![0usize; count];
        loop {
            let w = draws
                .iter()
                .fold(P::one(), |acc, &d| acc * self.probs[d].clone());
            if !w.is_zero() {
                visit(&draws, w);
            }
            let mut pos = 0;
            loop {
                if pos == count {
                    return Ok(());
                }
                draws[pos] += 1;
                if draws[pos] < l {
                    break;
                }
                draws[pos] = 0;
                pos += 1;
            }
        }
    }

    /// `P(X_t = x | ξ_t({0}) = xi_values[symbol])`.
    fn obs_prob(&self, symbol: u8, x: u8) -> P {
        let p0 = self.xi_values[symbol as usize].clone();
        if x == 0 {
            p0
        } else {
            P::one() - p0
        }
    }
}

/// Exact joint law of a finite set of coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct JointLawTable<P> {
    pub indices: Vec<i64>,
    pub which: Which,
    /// Atom → probability. Latent coordinates hold indices into the model's
    /// `xi_values`, observed coordinates hold the state. For `Both`, the
    /// latent coordinates come first.
    pub atoms: BTreeMap<Vec<u8>, P>,
}

impl<P: Probability> JointLawTable<P> {
    pub fn total(&self) -> P {
        self.atoms.values().cloned().fold(P::zero(), |a, b| a + b)
    }

    pub fn prob(&self, atom: &[u8]) -> P {
        self.atoms.get(atom).cloned().unwrap_or_else(P::zero)
    }

    /// Law of the sub-vector at `positions` (positions into `atom`).
    fn project(&self, positions: &[usize]) -> BTreeMap<Vec<u8>, P> {
        let mut out: BTreeMap<Vec<u8>, P> = BTreeMap::new();
        for (atom, p) in &self.atoms {
            let key: Vec<u8> = positions.iter().map(|&i| atom[i]).collect();
            let slot = out.entry(key).or_insert_with(P::zero);
            *slot = slot.clone() + p.clone();
        }
        out
    }
}

fn normalize_indices(indices: &[i64]) -> Result<Vec<i64>> {
    let mut idx = indices.to_vec();
    idx.sort_unstable();
    idx.dedup();
    if idx.is_empty() {
        return usage("joint law needs at least one index");
    }
    Ok(idx)
}

pub fn joint_law<P: Probability>(
    model: &FiniteConjugateModel<P>,
    indices: &[i64],
    which: Which,
) -> Result<JointLawTable<P>> {
    let idx = normalize_indices(indices)?;
    let (lo, hi) = (idx[0], *idx.last().expect("nonempty"));

    let mut latent: BTreeMap<Vec<u8>, P> = BTreeMap::new();
    model.for_each_draw(lo, hi, |draws, w| {
        // draws[0] is ϑ_{lo-1}
        let key: Vec<u8> = idx
            .iter()
            .map(|&t| {
                let j = (t - lo) as usize;
                model.xi_symbol[draws[j]][draws[j + 1]]
            })
            .collect();
        let slot = latent.entry(key).or_insert_with(P::zero);
        *slot = slot.clone() + w;
    })?;

    let atoms = match which {
        Which::Latent => latent,
        Which::Observed | Which::Both => {
            let d = idx.len();
            let patterns = 1usize << d.min(63);
            if d >= 63 || latent.len().saturating_mul(patterns) > MAX_EXPANSION {
                return Err(Error::Resource(format!(
                    "expanding {} latent atoms over 2^{d} observation patterns exceeds {MAX_EXPANSION}",
                    latent.len()
                )));
            }
            let mut out: BTreeMap<Vec<u8>, P> = BTreeMap::new();
            for (lat, w) in &latent {
                for pattern in 0..patterns {
                    let xs: Vec<u8> = (0..d).map(|i| ((pattern >> i) & 1) as u8).collect();
                    let p = lat
                        .iter()
                        .zip(&xs)
                        .fold(w.clone(), |acc, (&s, &x)| acc * model.obs_prob(s, x));
                    if p.is_zero() {
                        continue;
                    }
                    let key = if which == Which::Both {
                        lat.iter().chain(&xs).copied().collect()
                    } else {
                        xs
                    };
                    let slot = out.entry(key).or_insert_with(P::zero);
                    *slot = slot.clone() + p;
                }
            }
            out
        }
    };
    Ok(JointLawTable {
        indices: idx,
        which,
        atoms,
    })
}

/// Window-restricted ψ-coefficient `Ψ(k, w)`.
#[derive(Debug, Clone, PartialEq)]
pub struct PsiEstimate<P> {
    pub k: usize,
    pub w: usize,
    pub which: Which,
    pub value: P,
    /// Maximizing (past atom, future atom), as raw symbols.
    pub attained_at: Option<(Vec<u8>, Vec<u8>)>,
}

impl<P: Probability> PsiEstimate<P> {
    /// Attaining atoms as numbers: `ξ({0})` for latent coordinates, the state
    /// for observed ones.
    pub fn attained_values(&self, model: &FiniteConjugateModel<P>) -> Option<(Vec<f64>, Vec<f64>)> {
        let decode = |atom: &[u8]| -> Vec<f64> {
            atom.iter()
                .map(|&s| match self.which {
                    Which::Latent => model.xi_values[s as usize].to_f64().unwrap_or(f64::NAN),
                    _ => f64::from(s),
                })
                .collect()
        };
        self.attained_at.as_ref().map(|(a, b)| (decode(a), decode(b)))
    }
}

/// `sup |1 - P(A ∩ B) / (P(A) P(B))|` with `A` ranging over events of the
/// window `{-w+1, …, 0}` and `B` over events of `{k, …, k+w-1}`.
///
/// For events `A = ∪ a_i`, `B = ∪ b_j` built from atoms, the ratio
/// `P(A∩B) / (P(A)P(B))` is a convex combination of the atom ratios
/// `P(a_i∩b_j) / (P(a_i)P(b_j))` with weights `P(a_i)P(b_j) / (P(A)P(B))`.
/// Both its supremum and infimum, hence the supremum of `|1 - ratio|`, are
/// therefore attained at atom pairs, and only those are scanned.
pub fn psi_coefficient<P: Probability>(
    model: &FiniteConjugateModel<P>,
    k: usize,
    w: usize,
    which: Which,
) -> Result<PsiEstimate<P>> {
    if k == 0 || w == 0 {
        return usage(format!("psi_coefficient needs k >= 1 and w >= 1, got k = {k}, w = {w}"));
    }
    if which == Which::Both {
        return usage("psi_coefficient is defined for the latent or the observed sequence");
    }
    let (past, future) = windows(k, w);
    let all: Vec<i64> = past.iter().chain(&future).copied().collect();
    let law = joint_law(model, &all, which)?;
    let past_law = law.project(&(0..w).collect::<Vec<_>>());
    let future_law = law.project(&(w..2 * w).collect::<Vec<_>>());

    let mut best = P::zero();
    let mut attained_at = None;
    let mut key = Vec::with_capacity(2 * w);
    for (a, pa) in &past_law {
        for (b, pb) in &future_law {
            let denom = pa.clone() * pb.clone();
            if denom.is_zero() {
                continue;
            }
            key.clear();
            key.extend_from_slice(a);
            key.extend_from_slice(b);
            let v = (P::one() - law.prob(&key) / denom).abs();
            if attained_at.is_none() || v > best {
                best = v;
                attained_at = Some((a.clone(), b.clone()));
            }
        }
    }
    Ok(PsiEstimate {
        k,
        w,
        which,
        value: best,
        attained_at,
    })
}

fn windows(k: usize, w: usize) -> (Vec<i64>, Vec<i64>) {
    let (k, w) = (k as i64, w as i64);
    ((-w + 1..=0).collect(), (k..k + w).collect())
}

/// Cylinder event `X_t ∈ C` for a subset `C` of `{0, 1}`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ObsEvent {
    pub contains_zero: bool,
    pub contains_one: bool,
}

impl ObsEvent {
    pub const FULL: ObsEvent = ObsEvent {
        contains_zero: true,
        contains_one: true,
    };
    pub const ZERO: ObsEvent = ObsEvent {
        contains_zero: true,
        contains_one: false,
    };
    pub const ONE: ObsEvent = ObsEvent {
        contains_zero: false,
        contains_one: true,
    };

    pub fn contains(&self, x: u8) -> bool {
        if x == 0 {
            self.contains_zero
        } else {
            self.contains_one
        }
    }
}

/// Both sides of `P(∩_{t∈T} [X_t ∈ C_t]) = E ∏_{t∈T} g_t(ξ_t)` for
/// `T = T1 ∪ T2`, `T1` and `T2`.
#[derive(Debug, Clone, PartialEq)]
pub struct FactorizationCheck<P> {
    /// `(lhs, rhs)` for the union, the past set and the future set.
    pub sides: [(P, P); 3],
}

impl<P: Probability> FactorizationCheck<P> {
    pub fn max_abs_gap(&self) -> P {
        self.sides
            .iter()
            .map(|(l, r)| (l.clone() - r.clone()).abs())
            .fold(P::zero(), |a, b| if b > a { b } else { a })
    }
}

/// The left side comes from the observed joint law; the right side from a
/// separate enumeration of latent draws weighted by the conditional
/// probabilities `g_t(ξ_t) = P(X_t ∈ C_t | ξ_t)`.
pub fn verify_factorization<P: Probability>(
    model: &FiniteConjugateModel<P>,
    t1: &[i64],
    t2: &[i64],
    events: &BTreeMap<i64, ObsEvent>,
) -> Result<FactorizationCheck<P>> {
    let t1 = normalize_indices(t1)?;
    let t2 = normalize_indices(t2)?;
    if t1.last() >= t2.first() {
        return usage("factorization needs every index of T1 before every index of T2");
    }
    if let Some(t) = t1.iter().chain(&t2).find(|t| !events.contains_key(t)) {
        return usage(format!("no event given for cycle {t}"));
    }
    let union: Vec<i64> = t1.iter().chain(&t2).copied().collect();
    let side = |set: &[i64]| -> Result<(P, P)> {
        let law = joint_law(model, set, Which::Observed)?;
        let lhs = law
            .atoms
            .iter()
            .filter(|(atom, _)| atom.iter().zip(set).all(|(&x, t)| events[t].contains(x)))
            .fold(P::zero(), |a, (_, p)| a + p.clone());

        let (lo, hi) = (set[0], *set.last().expect("nonempty"));
        let mut rhs = P::zero();
        model.for_each_draw(lo, hi, |draws, weight| {
            let product = set.iter().fold(weight, |acc, &t| {
                let j = (t - lo) as usize;
                let p0 = (model.levels[draws[j]].clone() + model.levels[draws[j + 1]].clone())
                    / (P::one() + P::one());
                let c = events[&t];
                let mut g = P::zero();
                if c.contains_zero {
                    g = g + p0.clone();
                }
                if c.contains_one {
                    g = g + (P::one() - p0);
                }
                acc * g
            });
            rhs = rhs.clone() + product;
        })?;
        Ok((lhs, rhs))
    };
    Ok(FactorizationCheck {
        sides: [side(&union)?, side(&t1)?, side(&t2)?],
    })
}

/// A random cylinder configuration: nonempty `T1 ⊂ {-2, -1, 0}`,
/// `T2 ⊂ {k, k+1, k+2}` and an arbitrary subset of `{0, 1}` per cycle.
pub fn random_cylinder<R: Rng + ?Sized>(rng: &mut R, k: usize) -> (Vec<i64>, Vec<i64>, BTreeMap<i64, ObsEvent>) {
    let pick = |rng: &mut R, base: i64| -> Vec<i64> {
        let mask = rng.random_range(1u8..8);
        (0..3).filter(|i| mask >> i & 1 == 1).map(|i| base + i).collect()
    };
    let t1 = pick(rng, -2);
    let t2 = pick(rng, k as i64);
    let events = t1
        .iter()
        .chain(&t2)
        .map(|&t| {
            let e = ObsEvent {
                contains_zero: rng.random(),
                contains_one: rng.random(),
            };
            (t, e)
        })
        .collect();
    (t1, t2, events)
}

/// Largest `|lhs - rhs|` over `trials` random cylinder configurations with
/// gaps `k` cycling through 1..=3.
pub fn factorization_max_gap<P: Probability>(
    model: &FiniteConjugateModel<P>,
    trials: usize,
    seed: u64,
) -> Result<P> {
    let mut worst = P::zero();
    for trial in 0..trials {
        let mut rng = StreamKey::from(seed).stream(Domain::Mixing, trial as i64);
        let (t1, t2, events) = random_cylinder(&mut rng, 1 + trial % 3);
        let gap = verify_factorization(model, &t1, &t2, &events)?.max_abs_gap();
        if gap > worst {
            worst = gap;
        }
    }
    Ok(worst)
}
