//! Multi-objective monotone submodular maximization under a cardinality
//! constraint: a greedy preprocessing set, a continuous-greedy fractional
//! point for the residual problem, and dependent rounding of that point.

mod stages;

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::setfn::{
    is_monotone_bruteforce, is_submodular_bruteforce, Coverage, CoverageSpec, GroundSet, SetFunction, SharedFn, Subset,
    MAX_BRUTE_FORCE,
};

pub use stages::{
    default_steps, mc_gradient_samples, stage1_preprocess, stage2_continuous_greedy, stage3_round, DirectionLp,
    StageOneResult, StageTwoCertificate, StageTwoResult,
};

/// Largest `C(n, k)` [`brute_force_feasibility`] enumerates.
pub const MAX_BRUTE_FORCE_SETS: u64 = 1_000_000;

const ONE_MINUS_INV_E: f64 = 1.0 - 1.0 / std::f64::consts::E;

#[derive(Debug, Clone)]
pub struct MultiObjInstance {
    ground: GroundSet,
    objectives: Vec<SharedFn>,
    k: usize,
    targets: Vec<f64>,
    eps: f64,
}

impl MultiObjInstance {
    pub fn new(objectives: Vec<SharedFn>, k: usize, targets: Vec<f64>, eps: f64) -> Result<Self> {
        let Some(first) = objectives.first() else {
            return Err(Error::input("an instance needs at least one objective"));
        };
        let ground = first.ground().clone();
        let n = ground.len();
        if let Some(i) = objectives.iter().position(|f| f.n() != n) {
            return Err(Error::input(format!("objective {i} is not over the shared ground set of size {n}")));
        }
        if !(1..=n).contains(&k) {
            return Err(Error::input(format!("cardinality k = {k} must lie in 1..={n}")));
        }
        if targets.len() != objectives.len() {
            return Err(Error::input(format!("{} targets for {} objectives", targets.len(), objectives.len())));
        }
        if let Some((i, v)) = targets.iter().enumerate().find(|(_, v)| !(v.is_finite() && **v > 0.0)) {
            return Err(Error::input(format!("target {i} = {v} must be positive")));
        }
        if !(eps > 0.0 && eps < 1.0) {
            return Err(Error::input(format!("eps = {eps} must lie in (0, 1)")));
        }
        if n <= MAX_BRUTE_FORCE {
            for (i, f) in objectives.iter().enumerate() {
                if !is_monotone_bruteforce(f.as_ref())? || !is_submodular_bruteforce(f.as_ref())? {
                    return Err(Error::input(format!("objective {i} is not monotone submodular")));
                }
            }
        }
        Ok(MultiObjInstance { ground, objectives, k, targets, eps })
    }

    pub fn from_spec(spec: &InstanceSpec) -> Result<Self> {
        let cover = Coverage::from_spec(spec.coverage.clone())?;
        let u = cover.universe_size();
        let objectives = spec
            .objectives
            .iter()
            .enumerate()
            .map(|(i, o)| {
                let (group, weights) = match o {
                    ObjectiveSpec::Group(g) => (g, None),
                    ObjectiveSpec::Weighted { group, weights } => (group, weights.as_ref()),
                };
                if let Some(w) = weights {
                    if w.len() != group.len() {
                        return Err(Error::input(format!("objective {i}: {} weights for a group of {}", w.len(), group.len())));
                    }
                }
                let mut scale = vec![0.0; u];
                for (t, &e) in group.iter().enumerate() {
                    if e >= u {
                        return Err(Error::input(format!("objective {i} names universe item {e}, universe size is {u}")));
                    }
                    scale[e] = weights.map_or(1.0, |w| w[t]);
                }
                Ok(Arc::new(cover.reweighted(&scale)?) as SharedFn)
            })
            .collect::<Result<Vec<_>>>()?;
        MultiObjInstance::new(objectives, spec.k, spec.targets.clone(), spec.eps)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let spec: InstanceSpec = serde_json::from_str(text)?;
        MultiObjInstance::from_spec(&spec)
    }

    pub fn n(&self) -> usize {
        self.ground.len()
    }

    pub fn m(&self) -> usize {
        self.objectives.len()
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn eps(&self) -> f64 {
        self.eps
    }

    pub fn targets(&self) -> &[f64] {
        &self.targets
    }

    pub fn objectives(&self) -> &[SharedFn] {
        &self.objectives
    }

    pub fn values(&self, set: &Subset) -> Vec<f64> {
        self.objectives.iter().map(|f| f.value(set)).collect()
    }

    /// Same objectives and budget with different targets.
    pub fn with_targets(&self, targets: Vec<f64>) -> Result<Self> {
        MultiObjInstance::new(self.objectives.clone(), self.k, targets, self.eps)
    }

    /// `(1-ε)(1-1/e)(1 - m/(kε³))`, clamped to `[0, 1]`.
    pub fn guarantee_factor(&self) -> f64 {
        let e3 = self.eps.powi(3);
        let f = (1.0 - self.eps) * ONE_MINUS_INV_E * (1.0 - self.m() as f64 / (self.k as f64 * e3));
        f.clamp(0.0, 1.0)
    }
}

/// A fairness objective: coverage restricted to a group of universe items,
/// optionally reweighted within the group.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ObjectiveSpec {
    Group(Vec<usize>),
    Weighted {
        group: Vec<usize>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        weights: Option<Vec<f64>>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InstanceSpec {
    pub coverage: CoverageSpec,
    pub objectives: Vec<ObjectiveSpec>,
    pub k: usize,
    pub targets: Vec<f64>,
    pub eps: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "stage", rename_all = "snake_case")]
pub enum Certificate {
    /// Monotonicity caps every set: `f_i(S) ≤ f_i(N) < V_i`.
    Stage1 { objective: usize, max_value: f64, target: f64 },
    Stage2(StageTwoCertificate),
}

impl Certificate {
    /// Re-checks the certificate from its stored data alone.
    pub fn verify(&self) -> Result<bool> {
        match self {
            Certificate::Stage1 { max_value, target, .. } => Ok(max_value < target),
            Certificate::Stage2(c) => c.verify(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Solution {
    pub set: Vec<usize>,
    pub achieved: Vec<f64>,
    pub factor: f64,
    /// `f_i(S) ≥ factor · V_i` for every `i`.
    pub meets_guarantee: bool,
    pub s1: Vec<usize>,
    /// Smallest direction-LP optimum seen in the continuous greedy, if it ran.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub min_lambda: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Outcome {
    Solution(Solution),
    Infeasible { certificate: Certificate },
}

impl Outcome {
    pub fn solution(&self) -> Option<&Solution> {
        match self {
            Outcome::Solution(s) => Some(s),
            Outcome::Infeasible { .. } => None,
        }
    }

    pub fn is_infeasible(&self) -> bool {
        matches!(self, Outcome::Infeasible { .. })
    }
}

/// Runs the three stages. A certificate asserts that no set of size `k`
/// reaches every target.
pub fn solve(inst: &MultiObjInstance, steps: usize, seed: u64) -> Result<Outcome> {
    let n = inst.n();
    let full = inst.values(&Subset::full(n));
    if let Some(i) = (0..inst.m()).find(|&i| full[i] < inst.targets[i]) {
        let certificate = Certificate::Stage1 { objective: i, max_value: full[i], target: inst.targets[i] };
        return Ok(Outcome::Infeasible { certificate });
    }
    let s1 = stage1_preprocess(inst);
    let (set, min_lambda) = if s1.order.len() >= inst.k {
        // preprocessing alone used the whole budget; keep the first k picks
        (Subset::from_indices(n, &s1.order[..inst.k])?, None)
    } else if s1.satisfied.len() == inst.m() {
        // nothing left to chase; fill the budget with the lowest free indices
        let mut set = s1.set.clone();
        for e in (0..n).filter(|&e| !s1.set.contains(e)).take(inst.k - s1.set.len()) {
            set.insert(e);
        }
        (set, None)
    } else {
        match stage2_continuous_greedy(inst, &s1, steps, seed)? {
            StageTwoResult::Certificate(c) => return Ok(Outcome::Infeasible { certificate: Certificate::Stage2(c) }),
            StageTwoResult::Fractional { x, free, min_lambda } => {
                (stage3_round(&x, &free, &s1, inst.k, crate::rng::derive(seed, 3))?, min_lambda)
            }
        }
    };
    let achieved = inst.values(&set);
    let factor = inst.guarantee_factor();
    let meets_guarantee = achieved.iter().zip(&inst.targets).all(|(a, v)| *a >= factor * v * (1.0 - 1e-12));
    Ok(Outcome::Solution(Solution {
        set: set.to_vec(),
        achieved,
        factor,
        meets_guarantee,
        s1: s1.set.to_vec(),
        min_lambda,
    }))
}

fn binomial(n: usize, k: usize) -> u64 {
    let k = k.min(n - k);
    (0..k).fold(1u64, |acc, i| acc.saturating_mul((n - i) as u64) / (i as u64 + 1))
}

/// A set of size exactly `k` meeting every target, scanning combinations in
/// lexicographic order.
pub fn brute_force_feasibility(inst: &MultiObjInstance) -> Result<Option<Vec<usize>>> {
    let (n, k) = (inst.n(), inst.k());
    let count = binomial(n, k);
    if count > MAX_BRUTE_FORCE_SETS {
        return Err(Error::capacity(format!("C({n}, {k}) = {count} subsets exceeds {MAX_BRUTE_FORCE_SETS}")));
    }
    let mut idx: Vec<usize> = (0..k).collect();
    loop {
        let set = Subset::from_indices(n, &idx)?;
        if inst.objectives.iter().zip(&inst.targets).all(|(f, &v)| f.value(&set) >= v) {
            return Ok(Some(idx));
        }
        // advance to the next combination
        let Some(p) = (0..k).rev().find(|&p| idx[p] < n - k + p) else { return Ok(None) };
        idx[p] += 1;
        for q in p + 1..k {
            idx[q] = idx[q - 1] + 1;
        }
    }
}

/// Standard greedy: `k` picks of the largest marginal, lowest index on ties.
pub fn greedy_max(f: &dyn SetFunction, k: usize) -> Subset {
    let n = f.n();
    let mut s = Subset::empty(n);
    for _ in 0..k.min(n) {
        let base = f.value(&s);
        let best = (0..n)
            .filter(|&e| !s.contains(e))
            .map(|e| (e, f.value(&s.with(e)) - base))
            .fold(None, |b: Option<(usize, f64)>, (e, g)| match b {
                Some((_, bg)) if bg >= g => b,
                _ => Some((e, g)),
            });
        if let Some((e, _)) = best {
            s.insert(e);
        }
    }
    s
}
