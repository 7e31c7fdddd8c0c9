use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{MultiObjInstance, ONE_MINUS_INV_E};
use crate::error::{Error, Result};
use crate::lp::{self, LinearProgram, LpStatus, Relation, Sense};
use crate::rng;
use crate::rounding::{srinivasan_round, PairingPolicy};
use crate::setfn::{
    contract, gradient_from_table, multilinear_from_table, multilinear_mc, multilinear_partial_mc,
    tabulate, FractionalVector, SetFunction, Subset, MAX_EXACT_MULTILINEAR,
};

/// `⌈10/ε⌉`.
pub fn default_steps(eps: f64) -> usize {
    (10.0 / eps).ceil() as usize
}

/// Samples per sampled partial derivative, `⌈40/ε²⌉`.
pub fn mc_gradient_samples(eps: f64) -> usize {
    (40.0 / (eps * eps)).ceil() as usize
}

#[derive(Debug, Clone, PartialEq)]
pub struct StageOneResult {
    pub set: Subset,
    /// Elements in the order they were added.
    pub order: Vec<usize>,
    /// `f_i(S1)` for every objective.
    pub values: Vec<f64>,
    /// Objectives with `f_i(S1) ≥ (1-1/e) V_i`.
    pub satisfied: Vec<usize>,
    pub passes: usize,
}

impl StageOneResult {
    pub fn unsatisfied(&self, m: usize) -> Vec<usize> {
        (0..m).filter(|i| !self.satisfied.contains(i)).collect()
    }
}

/// Adds, in index order, every element whose marginal for some objective
/// still short of `(1-1/e) V_i` is at least `ε³ (V_i - f_i(S1))`. Passes
/// repeat until none qualifies, so on return every remaining element has
/// residual marginal below that threshold for every unsatisfied objective.
pub fn stage1_preprocess(inst: &MultiObjInstance) -> StageOneResult {
    let n = inst.n();
    let e3 = inst.eps().powi(3);
    let mut set = Subset::empty(n);
    let mut order = Vec::new();
    let mut values = inst.values(&set);
    let short = |values: &[f64], i: usize| values[i] < ONE_MINUS_INV_E * inst.targets()[i];
    let mut passes = 0;
    loop {
        passes += 1;
        let mut added = false;
        for e in 0..n {
            if set.contains(e) {
                continue;
            }
            let with = set.with(e);
            let qualifies = (0..inst.m()).any(|i| {
                short(&values, i) && inst.objectives()[i].value(&with) - values[i] >= e3 * (inst.targets()[i] - values[i])
            });
            if qualifies {
                set = with;
                order.push(e);
                values = inst.values(&set);
                added = true;
            }
        }
        if !added {
            break;
        }
    }
    let satisfied = (0..inst.m()).filter(|&i| !short(&values, i)).collect();
    StageOneResult { set, order, values, satisfied, passes }
}

/// The direction-finding LP of one continuous-greedy step: maximize `λ` over
/// `v ∈ [0,1]^{n'}`, `Σ v = budget`, subject to
/// `Σ_j v_j ∂_j G_i(x) ≥ λ (r_i - G_i(x))` for each active objective.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DirectionLp {
    pub active: Vec<usize>,
    /// One gradient row per active objective.
    pub gradients: Vec<Vec<f64>>,
    /// `r_i - G_i(x)` per active objective.
    pub gaps: Vec<f64>,
    pub budget: f64,
}

impl DirectionLp {
    pub fn to_lp(&self) -> LinearProgram {
        let d = self.gradients.first().map_or(0, |g| g.len());
        let mut obj = vec![0.0; d + 1];
        obj[d] = 1.0;
        let mut lp = LinearProgram::new(Sense::Max, obj);
        for (g, &gap) in self.gradients.iter().zip(&self.gaps) {
            let mut row = g.clone();
            row.push(-gap);
            lp = lp.constraint(row, Relation::Ge, 0.0);
        }
        let mut sum = vec![1.0; d + 1];
        sum[d] = 0.0;
        lp = lp.constraint(sum, Relation::Eq, self.budget);
        for j in 0..d {
            lp = lp.bound(j, 0.0, 1.0);
        }
        lp
    }

    /// `(λ*, v*, duals)`.
    pub fn solve(&self) -> Result<(f64, Vec<f64>, Vec<f64>)> {
        let sol = lp::solve(&self.to_lp())?;
        if sol.status != LpStatus::Optimal {
            return Err(Error::Internal(format!("direction LP ended {:?}", sol.status)));
        }
        let mut point = sol.point.expect("optimal solutions carry a point");
        let lambda = point.pop().expect("λ is the last variable");
        Ok((lambda, point, sol.duals.expect("optimal solutions carry duals")))
    }
}

/// Evidence that no set of size `k` meets every target: at step `step` the
/// best direction only achieves `lambda < threshold = (1-ε) k1/k`, while any
/// feasible set would yield a direction achieving at least `k1/k`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageTwoCertificate {
    pub step: usize,
    pub s1: Vec<usize>,
    pub free: Vec<usize>,
    pub x: Vec<f64>,
    pub lp: DirectionLp,
    pub lambda: f64,
    pub threshold: f64,
    pub direction: Vec<f64>,
    pub duals: Vec<f64>,
    /// False when gradients were sampled, in which case the bound is statistical.
    pub exact_gradients: bool,
}

impl StageTwoCertificate {
    pub fn verify(&self) -> Result<bool> {
        let (lambda, _, _) = self.lp.solve()?;
        Ok(lambda < self.threshold && (lambda - self.lambda).abs() <= 1e-9 * (1.0 + self.lambda.abs()))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum StageTwoResult {
    /// A point over the free elements `free` (original indices).
    Fractional { x: FractionalVector, free: Vec<usize>, min_lambda: Option<f64> },
    Certificate(StageTwoCertificate),
}

enum Oracle {
    Exact(Vec<f64>),
    Sampled(Box<dyn SetFunction>),
}

/// Discretized continuous greedy on the residual objectives `f_i(· | S1)`
/// over `N ∖ S1`, for objectives left unsatisfied by stage 1.
pub fn stage2_continuous_greedy(inst: &MultiObjInstance, s1: &StageOneResult, steps: usize, seed: u64) -> Result<StageTwoResult> {
    let n = inst.n();
    let k1 = inst.k().checked_sub(s1.set.len()).filter(|&k1| k1 >= 1).ok_or_else(|| {
        Error::input(format!("stage 1 used {} of the budget k = {}", s1.set.len(), inst.k()))
    })?;
    if steps == 0 {
        return Err(Error::input("continuous greedy needs at least one step"));
    }
    let free: Vec<usize> = (0..n).filter(|&e| !s1.set.contains(e)).collect();
    let d = free.len();
    let unsatisfied = s1.unsatisfied(inst.m());
    if unsatisfied.is_empty() {
        return Ok(StageTwoResult::Fractional { x: FractionalVector::zeros(d), free, min_lambda: None });
    }
    let exact = d <= MAX_EXACT_MULTILINEAR;
    let oracles: Vec<Oracle> = unsatisfied
        .iter()
        .map(|&i| {
            let g = contract(inst.objectives()[i].clone(), &s1.set)?;
            Ok(if exact { Oracle::Exact(tabulate(&g)?) } else { Oracle::Sampled(Box::new(g)) })
        })
        .collect::<Result<_>>()?;
    let residual: Vec<f64> = unsatisfied.iter().map(|&i| inst.targets()[i] - s1.values[i]).collect();
    let samples = mc_gradient_samples(inst.eps());
    let threshold = (1.0 - inst.eps()) * k1 as f64 / inst.k() as f64;

    let mut x = vec![0.0; d];
    let mut min_lambda: Option<f64> = None;
    for step in 0..steps {
        let xv = FractionalVector::new(x.clone())?;
        let step_seed = rng::derive(seed, step as u64);
        let (values, grads): (Vec<f64>, Vec<Vec<f64>>) = oracles
            .iter()
            .enumerate()
            .map(|(t, o)| match o {
                Oracle::Exact(table) => Ok((multilinear_from_table(table, &x), gradient_from_table(table, &x))),
                Oracle::Sampled(g) => {
                    let base = rng::derive(step_seed, t as u64);
                    let value = multilinear_mc(g.as_ref(), &xv, samples, base)?.estimate;
                    let grad = (0..d)
                        .into_par_iter()
                        .map(|j| {
                            multilinear_partial_mc(g.as_ref(), &xv, j, samples, rng::derive(base, j as u64 + 1))
                                .map(|e| e.estimate.max(0.0))
                        })
                        .collect::<Result<Vec<f64>>>()?;
                    Ok((value, grad))
                }
            })
            .collect::<Result<Vec<_>>>()?
            .into_iter()
            .unzip();
        let active: Vec<usize> = (0..unsatisfied.len()).filter(|&t| values[t] < residual[t]).collect();
        let v = if active.is_empty() {
            top_direction(&grads, k1)
        } else {
            let lp = DirectionLp {
                active: active.iter().map(|&t| unsatisfied[t]).collect(),
                gradients: active.iter().map(|&t| grads[t].clone()).collect(),
                gaps: active.iter().map(|&t| residual[t] - values[t]).collect(),
                budget: k1 as f64,
            };
            let (lambda, v, duals) = lp.solve()?;
            min_lambda = Some(min_lambda.map_or(lambda, |m| m.min(lambda)));
            if lambda < threshold {
                return Ok(StageTwoResult::Certificate(StageTwoCertificate {
                    step,
                    s1: s1.set.to_vec(),
                    free,
                    x,
                    lp,
                    lambda,
                    threshold,
                    direction: v,
                    duals,
                    exact_gradients: exact,
                }));
            }
            v
        };
        for (xj, vj) in x.iter_mut().zip(&v) {
            *xj = (*xj + vj.clamp(0.0, 1.0) / steps as f64).clamp(0.0, 1.0);
        }
    }
    Ok(StageTwoResult::Fractional { x: FractionalVector::new(x)?, free, min_lambda })
}

/// The `k1` coordinates with the largest summed gradient (lowest index on ties).
fn top_direction(grads: &[Vec<f64>], k1: usize) -> Vec<f64> {
    let d = grads.first().map_or(0, |g| g.len());
    let total: Vec<f64> = (0..d).map(|j| grads.iter().map(|g| g[j]).sum()).collect();
    let mut idx: Vec<usize> = (0..d).collect();
    idx.sort_by(|&a, &b| total[b].total_cmp(&total[a]).then(a.cmp(&b)));
    let mut v = vec![0.0; d];
    for &j in idx.iter().take(k1) {
        v[j] = 1.0;
    }
    v
}

/// Rounds the stage-2 point with the dependent scheme and returns `S1 ∪ S2`,
/// which has exactly `k` elements.
pub fn stage3_round(x: &FractionalVector, free: &[usize], s1: &StageOneResult, k: usize, seed: u64) -> Result<Subset> {
    if x.len() != free.len() {
        return Err(Error::input(format!("point has {} coordinates for {} free elements", x.len(), free.len())));
    }
    let k1 = k
        .checked_sub(s1.set.len())
        .ok_or_else(|| Error::input(format!("S1 has {} elements, more than k = {k}", s1.set.len())))?;
    let total = x.sum();
    if (total - k1 as f64).abs() > 1e-9 {
        return Err(Error::input(format!("stage-3 input sums to {total}, expected {k1}")));
    }
    // move the summation drift onto coordinates with room, so the sum is integral
    let mut y = x.as_slice().to_vec();
    let mut drift = k1 as f64 - y.iter().sum::<f64>();
    for v in y.iter_mut() {
        if drift == 0.0 {
            break;
        }
        let next = (*v + drift).clamp(0.0, 1.0);
        drift -= next - *v;
        *v = next;
    }
    let (out, _) = srinivasan_round(&FractionalVector::new(y)?, &PairingPolicy::sweep(free.len()), seed)?;
    let mut set = s1.set.clone();
    for (j, &b) in out.iter().enumerate() {
        if b {
            set.insert(free[j]);
        }
    }
    if set.len() != k {
        return Err(Error::Internal(format!("rounding produced {} elements instead of {k}", set.len())));
    }
    Ok(set)
}
