//! Dependent (pairwise mass-shifting) and independent rounding of fractional
//! vectors, and an exact enumerator of the dependent scheme's outcome law.

use rand::Rng as _;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::negdep::JointTable;
use crate::rng::{self, Rng};
use crate::setfn::FractionalVector;

/// Coordinates this close to 0 or 1 are treated as integral.
pub const SNAP_TOL: f64 = 1e-12;

/// Largest vector [`exact_outcome_distribution`] expands.
pub const MAX_EXACT_ROUNDING: usize = 10;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "order", rename_all = "kebab-case")]
pub enum PairingPolicy {
    /// Always pair the two fractional coordinates that come first in the
    /// given permutation.
    FixedOrderSweep(Vec<usize>),
    /// Pair two fractional coordinates chosen uniformly at random.
    RandomPair,
}

impl PairingPolicy {
    /// Fixed sweep in index order.
    pub fn sweep(n: usize) -> Self {
        PairingPolicy::FixedOrderSweep((0..n).collect())
    }

    fn validate(&self, n: usize) -> Result<()> {
        if let PairingPolicy::FixedOrderSweep(order) = self {
            let mut seen = vec![false; n];
            if order.len() != n || !order.iter().all(|&i| i < n && !std::mem::replace(&mut seen[i], true)) {
                return Err(Error::input(format!("pairing order is not a permutation of 0..{n}")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Case {
    I,
    II,
    III,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Step {
    pub i: usize,
    pub j: usize,
    pub case: Case,
    /// 0 for the branch that moves mass onto `i`, 1 for the one onto `j`.
    pub branch: u8,
    pub probability: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Residual {
    pub index: usize,
    pub probability: f64,
    pub outcome: bool,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RoundingTrace {
    pub steps: Vec<Step>,
    pub residual: Option<Residual>,
}

fn snap(v: f64) -> f64 {
    if v <= SNAP_TOL {
        0.0
    } else if v >= 1.0 - SNAP_TOL {
        1.0
    } else {
        v
    }
}

fn is_fractional(v: f64) -> bool {
    v > 0.0 && v < 1.0
}

/// The two outcomes of one pairing step: `(new_i, new_j, probability)` for
/// branch 0 and branch 1. `xi`, `xj` must both be fractional.
fn branches(xi: f64, xj: f64) -> (Case, [(f64, f64, f64); 2]) {
    let s = xi + xj;
    if s < 1.0 {
        (Case::I, [(s, 0.0, xi / s), (0.0, s, xj / s)])
    } else if s == 1.0 {
        (Case::II, [(1.0, 0.0, xi), (0.0, 1.0, xj)])
    } else {
        let d = 2.0 - s;
        (Case::III, [(s - 1.0, 1.0, (1.0 - xi) / d), (1.0, s - 1.0, (1.0 - xj) / d)])
    }
}

/// The position in `order` of the first two fractional coordinates.
fn first_two(y: &[f64], order: &[usize]) -> Option<(usize, usize)> {
    let mut it = order.iter().copied().filter(|&i| is_fractional(y[i]));
    Some((it.next()?, it.next()?))
}

/// Srinivasan's dependent rounding. Marginals are preserved, and the output
/// sum is `⌊Σx⌋` or `⌈Σx⌉` (exactly `Σx` when that is an integer).
pub fn srinivasan_round_with(x: &FractionalVector, policy: &PairingPolicy, rng: &mut Rng) -> Result<(Vec<bool>, RoundingTrace)> {
    policy.validate(x.len())?;
    let mut y: Vec<f64> = x.as_slice().iter().map(|&v| snap(v)).collect();
    let mut trace = RoundingTrace::default();
    loop {
        let pair = match policy {
            PairingPolicy::FixedOrderSweep(order) => first_two(&y, order),
            PairingPolicy::RandomPair => {
                let frac: Vec<usize> = (0..y.len()).filter(|&i| is_fractional(y[i])).collect();
                if frac.len() < 2 {
                    None
                } else {
                    let a = rng.gen_range(0..frac.len());
                    let mut b = rng.gen_range(0..frac.len() - 1);
                    if b >= a {
                        b += 1;
                    }
                    Some((frac[a], frac[b]))
                }
            }
        };
        let Some((i, j)) = pair else { break };
        let (case, options) = branches(y[i], y[j]);
        let branch = if rng.gen::<f64>() < options[0].2 { 0 } else { 1 };
        let (ni, nj, probability) = options[branch];
        y[i] = snap(ni);
        y[j] = snap(nj);
        trace.steps.push(Step { i, j, case, branch: branch as u8, probability });
    }
    if let Some(index) = (0..y.len()).find(|&i| is_fractional(y[i])) {
        let probability = y[index];
        let outcome = rng.gen::<f64>() < probability;
        y[index] = if outcome { 1.0 } else { 0.0 };
        trace.residual = Some(Residual { index, probability, outcome });
    }
    Ok((y.iter().map(|&v| v == 1.0).collect(), trace))
}

pub fn srinivasan_round(x: &FractionalVector, policy: &PairingPolicy, seed: u64) -> Result<(Vec<bool>, RoundingTrace)> {
    srinivasan_round_with(x, policy, &mut rng::from_seed(seed))
}

pub fn independent_round_with(x: &FractionalVector, rng: &mut Rng) -> Vec<bool> {
    x.as_slice().iter().map(|&p| rng.gen::<f64>() < p).collect()
}

pub fn independent_round(x: &FractionalVector, seed: u64) -> Vec<bool> {
    independent_round_with(x, &mut rng::from_seed(seed))
}

/// `1 - sqrt(ln k1 / k1)`.
pub fn scale_factor(k1: usize) -> Result<f64> {
    if k1 < 2 {
        return Err(Error::input(format!("scaled rounding needs k1 >= 2, got {k1}")));
    }
    let k = k1 as f64;
    Ok(1.0 - (k.ln() / k).sqrt())
}

/// Independent rounding of `scale_factor(k1) · x`.
pub fn scaled_independent_round_with(x: &FractionalVector, k1: usize, rng: &mut Rng) -> Result<Vec<bool>> {
    let c = scale_factor(k1)?;
    Ok(x.as_slice().iter().map(|&p| rng.gen::<f64>() < c * p).collect())
}

pub fn scaled_independent_round(x: &FractionalVector, k1: usize, seed: u64) -> Result<Vec<bool>> {
    scaled_independent_round_with(x, k1, &mut rng::from_seed(seed))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "scheme", rename_all = "kebab-case")]
pub enum RoundingScheme {
    Srinivasan { policy: PairingPolicy },
    Independent,
    Scaled { k1: usize },
}

impl RoundingScheme {
    pub fn srinivasan_sweep(n: usize) -> Self {
        RoundingScheme::Srinivasan { policy: PairingPolicy::sweep(n) }
    }

    /// Parses a CLI scheme name; the dependent scheme uses the index-order sweep.
    pub fn from_name(name: &str, n: usize, k1: Option<usize>) -> Result<Self> {
        match name {
            "srinivasan" => Ok(RoundingScheme::srinivasan_sweep(n)),
            "srinivasan-random" => Ok(RoundingScheme::Srinivasan { policy: PairingPolicy::RandomPair }),
            "independent" => Ok(RoundingScheme::Independent),
            "scaled" => {
                let k1 = k1.ok_or_else(|| Error::input("scaled rounding needs k1"))?;
                scale_factor(k1)?;
                Ok(RoundingScheme::Scaled { k1 })
            }
            other => Err(Error::input(format!(
                "unknown scheme {other:?} (expected srinivasan, srinivasan-random, independent or scaled)"
            ))),
        }
    }

    pub fn round_with(&self, x: &FractionalVector, rng: &mut Rng) -> Result<Vec<bool>> {
        match self {
            RoundingScheme::Srinivasan { policy } => Ok(srinivasan_round_with(x, policy, rng)?.0),
            RoundingScheme::Independent => Ok(independent_round_with(x, rng)),
            RoundingScheme::Scaled { k1 } => scaled_independent_round_with(x, *k1, rng),
        }
    }

    fn validate(&self, n: usize) -> Result<()> {
        match self {
            RoundingScheme::Srinivasan { policy } => policy.validate(n),
            RoundingScheme::Independent => Ok(()),
            RoundingScheme::Scaled { k1 } => scale_factor(*k1).map(|_| ()),
        }
    }
}

/// Rounds `x` once per trial, trial `t` drawing from stream `t` of `seed`, and
/// maps each outcome through `f`. Results are in trial order.
pub fn sample_map<T: Send>(
    x: &FractionalVector,
    scheme: &RoundingScheme,
    trials: u64,
    seed: u64,
    f: impl Fn(&[bool]) -> T + Sync,
) -> Result<Vec<T>> {
    scheme.validate(x.len())?;
    (0..trials)
        .into_par_iter()
        .map(|t| {
            let out = scheme.round_with(x, &mut rng::stream(seed, t))?;
            Ok(f(&out))
        })
        .collect()
}

pub fn sample_batch(x: &FractionalVector, scheme: &RoundingScheme, trials: u64, seed: u64) -> Result<Vec<Vec<bool>>> {
    sample_map(x, scheme, trials, seed, |o| o.to_vec())
}

/// Per-coordinate frequency of ones.
pub fn empirical_marginals(outcomes: &[Vec<bool>]) -> Vec<f64> {
    let Some(first) = outcomes.first() else { return Vec::new() };
    let mut counts = vec![0u64; first.len()];
    for o in outcomes {
        for (c, &b) in counts.iter_mut().zip(o) {
            *c += b as u64;
        }
    }
    counts.iter().map(|&c| c as f64 / outcomes.len() as f64).collect()
}

/// The exact law of the dependent rounding under a fixed sweep, by expanding
/// every branch of the rounding tree.
pub fn exact_outcome_distribution(x: &FractionalVector, policy: &PairingPolicy) -> Result<JointTable> {
    let PairingPolicy::FixedOrderSweep(order) = policy else {
        return Err(Error::input("exact enumeration needs a fixed pairing order"));
    };
    if x.len() > MAX_EXACT_ROUNDING {
        return Err(Error::capacity(format!(
            "exact rounding enumeration supports at most {MAX_EXACT_ROUNDING} coordinates, got {}",
            x.len()
        )));
    }
    policy.validate(x.len())?;
    let y: Vec<f64> = x.as_slice().iter().map(|&v| snap(v)).collect();
    let mut leaves = Vec::new();
    expand(y, order, 1.0, &mut leaves);
    JointTable::from_outcomes(x.len(), leaves)
}

fn expand(y: Vec<f64>, order: &[usize], mass: f64, leaves: &mut Vec<(Vec<i64>, f64)>) {
    if mass == 0.0 {
        return;
    }
    if let Some((i, j)) = first_two(&y, order) {
        let (_, options) = branches(y[i], y[j]);
        for (ni, nj, p) in options {
            let mut next = y.clone();
            next[i] = snap(ni);
            next[j] = snap(nj);
            expand(next, order, mass * p, leaves);
        }
        return;
    }
    let point = |y: &[f64]| y.iter().map(|&v| (v == 1.0) as i64).collect::<Vec<i64>>();
    match (0..y.len()).find(|&i| is_fractional(y[i])) {
        Some(r) => {
            let p = y[r];
            let mut up = y.clone();
            up[r] = 1.0;
            leaves.push((point(&up), mass * p));
            up[r] = 0.0;
            leaves.push((point(&up), mass * (1.0 - p)));
        }
        None => leaves.push((point(&y), mass)),
    }
}
