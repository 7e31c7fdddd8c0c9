//! Seeded generators for random tables, points, set functions, read-k
//! families and fair-coverage instances. The property suite and the tests
//! draw from these so that every run sees the same corpus.

use std::sync::Arc;

use rand::seq::SliceRandom;
use rand::Rng as _;
use rand_distr::Exp1;

use crate::concentration::{BlockFunction, ReadKFamily};
use crate::multiobj::MultiObjInstance;
use crate::negdep::JointTable;
use crate::rng::{self, Rng};
use crate::rounding::{exact_outcome_distribution, PairingPolicy};
use crate::setfn::{
    is_monotone_bruteforce, is_submodular_bruteforce, is_supermodular_bruteforce, Coverage, FractionalVector,
    SetFunction, SharedFn, Subset, TableFunction,
};

fn dirichlet(len: usize, rng: &mut Rng) -> Vec<f64> {
    let g: Vec<f64> = (0..len).map(|_| rng.sample::<f64, _>(Exp1) + 1e-12).collect();
    let total: f64 = g.iter().sum();
    g.into_iter().map(|v| v / total).collect()
}

fn bits_of(mask: usize, n: usize) -> Vec<i64> {
    (0..n).map(|i| (mask >> i & 1) as i64).collect()
}

fn table_from_weights(n: usize, weights: &[f64]) -> JointTable {
    let outcomes = weights.iter().enumerate().filter(|(_, w)| **w > 0.0).map(|(m, &w)| (bits_of(m, n), w));
    JointTable::from_outcomes(n, outcomes).expect("normalized weights form a table")
}

/// A random binary table over `n ≤ 6` variables, drawn from a mix of
/// families: full-support Dirichlet, sparse Dirichlet, product measures,
/// exact dependent-rounding tables, uniform fixed-weight slices and mixtures
/// of two product measures.
pub fn random_binary_table(n: usize, rng: &mut Rng) -> JointTable {
    assert!((1..=6).contains(&n), "random tables support 1..=6 variables");
    let full = 1usize << n;
    match rng.gen_range(0..6) {
        0 => table_from_weights(n, &dirichlet(full, rng)),
        1 => {
            let mut idx: Vec<usize> = (0..full).collect();
            idx.shuffle(rng);
            let keep = rng.gen_range(1..=full.min(4));
            let w = dirichlet(keep, rng);
            let mut weights = vec![0.0; full];
            for (t, &m) in idx[..keep].iter().enumerate() {
                weights[m] = w[t];
            }
            table_from_weights(n, &weights)
        }
        2 => {
            let means: Vec<f64> = (0..n).map(|_| rng.gen::<f64>()).collect();
            JointTable::independent_bits(&means).expect("means lie in [0, 1]")
        }
        3 => {
            let x = random_point(n, rng);
            exact_outcome_distribution(&x, &PairingPolicy::sweep(n)).expect("n is within the exact limit")
        }
        4 => {
            let r = rng.gen_range(0..=n);
            let weights: Vec<f64> = (0..full).map(|m| if m.count_ones() as usize == r { 1.0 } else { 0.0 }).collect();
            let total: f64 = weights.iter().sum();
            table_from_weights(n, &weights.iter().map(|w| w / total).collect::<Vec<_>>())
        }
        _ => {
            let a: Vec<f64> = (0..n).map(|_| rng.gen::<f64>()).collect();
            let b: Vec<f64> = (0..n).map(|_| rng.gen::<f64>()).collect();
            let t: f64 = rng.gen();
            let prod = |means: &[f64], m: usize| -> f64 {
                (0..n).map(|i| if m >> i & 1 == 1 { means[i] } else { 1.0 - means[i] }).product()
            };
            let weights: Vec<f64> = (0..full).map(|m| t * prod(&a, m) + (1.0 - t) * prod(&b, m)).collect();
            table_from_weights(n, &weights)
        }
    }
}

/// `count` random binary tables with `n` cycling through `2..=n_max`.
pub fn binary_table_corpus(count: usize, n_max: usize, seed: u64) -> Vec<JointTable> {
    (0..count)
        .map(|t| {
            let mut rng = rng::stream(seed, t as u64);
            random_binary_table(2 + t % (n_max - 1), &mut rng)
        })
        .collect()
}

/// A random point in `[0,1]^n`: uniform coordinates, a point rescaled to an
/// integral sum, or a dyadic point with some coordinates already integral.
pub fn random_point(n: usize, rng: &mut Rng) -> FractionalVector {
    let x: Vec<f64> = match rng.gen_range(0..3) {
        0 => (0..n).map(|_| rng.gen()).collect(),
        1 => {
            let raw: Vec<f64> = (0..n).map(|_| 0.05 + 0.95 * rng.gen::<f64>()).collect();
            let target = rng.gen_range(1..=n.max(1)) as f64;
            scale_to_sum(raw, target)
        }
        _ => (0..n).map(|_| rng.gen_range(0..=8) as f64 / 8.0).collect(),
    };
    FractionalVector::new(x).expect("coordinates lie in [0, 1]")
}

/// Rescales toward `target`, capping coordinates at 1 and redistributing.
fn scale_to_sum(mut x: Vec<f64>, target: f64) -> Vec<f64> {
    for _ in 0..64 {
        let free: f64 = x.iter().filter(|&&v| v < 1.0).sum();
        let fixed = x.iter().filter(|&&v| v >= 1.0).count() as f64;
        if free <= 0.0 {
            break;
        }
        let s = (target - fixed) / free;
        for v in x.iter_mut().filter(|v| **v < 1.0) {
            *v = (*v * s).min(1.0);
        }
        if (x.iter().sum::<f64>() - target).abs() < 1e-12 {
            break;
        }
    }
    x
}

/// A random point with `Σx = total` exactly up to rounding.
pub fn point_with_sum(n: usize, total: usize, rng: &mut Rng) -> FractionalVector {
    assert!(total <= n);
    let raw: Vec<f64> = (0..n).map(|_| 0.05 + 0.95 * rng.gen::<f64>()).collect();
    let mut x = scale_to_sum(raw, total as f64);
    let drift = total as f64 - x.iter().sum::<f64>();
    if let Some(v) = x.iter_mut().find(|v| **v + drift >= 0.0 && **v + drift <= 1.0) {
        *v += drift;
    }
    FractionalVector::new(x).expect("coordinates lie in [0, 1]")
}

/// A point with coordinates in multiples of 1/16 and `Σx = total` exactly,
/// built by moving dyadic mass between random pairs of an integral start.
pub fn dyadic_point_with_sum(n: usize, total: usize, rng: &mut Rng) -> FractionalVector {
    assert!(total <= n);
    let mut units: Vec<u32> = (0..n).map(|i| if i < total { 16 } else { 0 }).collect();
    units.shuffle(rng);
    for _ in 0..4 * n {
        let (i, j) = (rng.gen_range(0..n), rng.gen_range(0..n));
        if i == j || units[i] == 0 || units[j] == 16 {
            continue;
        }
        let d = rng.gen_range(1..=units[i].min(16 - units[j]));
        units[i] -= d;
        units[j] += d;
    }
    FractionalVector::new(units.iter().map(|&u| u as f64 / 16.0).collect()).expect("coordinates lie in [0, 1]")
}

/// Random coverage: `n` sets over `universe` items with positive weights.
pub fn random_coverage(n: usize, universe: usize, rng: &mut Rng) -> Coverage {
    let density = rng.gen_range(0.1..0.5);
    let sets = (0..n).map(|_| (0..universe).filter(|_| rng.gen_bool(density)).collect()).collect();
    let weights = (0..universe).map(|_| rng.gen_range(0.1..1.0)).collect();
    Coverage::new(universe, Some(weights), sets).expect("generated sets are valid")
}

/// Random coverage whose every singleton value, hence every marginal, is at most 1.
pub fn unit_coverage(n: usize, universe: usize, rng: &mut Rng) -> Coverage {
    let per_set = rng.gen_range(2..=4.min(universe));
    let sets: Vec<Vec<usize>> = (0..n)
        .map(|_| {
            let mut items: Vec<usize> = (0..universe).collect();
            items.shuffle(rng);
            items.truncate(per_set);
            items.sort_unstable();
            items
        })
        .collect();
    let weight = 1.0 / per_set as f64;
    Coverage::new(universe, Some(vec![weight; universe]), sets).expect("generated sets are valid")
}

fn modular_weights(n: usize, rng: &mut Rng) -> Vec<f64> {
    (0..n).map(|_| rng.gen_range(0.0..1.0)).collect()
}

fn weight_of(w: &[f64], mask: u64) -> f64 {
    w.iter().enumerate().filter(|(i, _)| mask >> i & 1 == 1).map(|(_, v)| v).sum()
}

fn normalized(f: TableFunction) -> TableFunction {
    let top = f.values().iter().cloned().fold(0.0, f64::max);
    if top <= 0.0 {
        return f;
    }
    TableFunction::new(f.n(), f.values().iter().map(|v| v / top).collect()).expect("scaling keeps the table valid")
}

/// A random non-negative monotone submodular function on `n ≤ 12` elements,
/// scaled so its maximum is 1:
/// weighted coverage, a concave function of a modular one, or a budget-capped
/// modular function. Each draw is checked by brute force.
pub fn random_submodular(n: usize, rng: &mut Rng) -> TableFunction {
    loop {
        let f = match rng.gen_range(0..3) {
            0 => {
                let universe = rng.gen_range(2..=8);
                TableFunction::snapshot(&random_coverage(n, universe, rng))
            }
            1 => {
                let w = modular_weights(n, rng);
                TableFunction::from_fn(n, |m| weight_of(&w, m).sqrt())
            }
            _ => {
                let w = modular_weights(n, rng);
                let cap = rng.gen_range(0.2..1.0) * w.iter().sum::<f64>();
                TableFunction::from_fn(n, |m| weight_of(&w, m).min(cap))
            }
        }
        .expect("n is within table limits");
        if is_monotone_bruteforce(&f).unwrap_or(false) && is_submodular_bruteforce(&f).unwrap_or(false) {
            return normalized(f);
        }
    }
}

/// A random non-negative monotone supermodular function on `n ≤ 12`
/// elements, scaled so its maximum is 1: `c - g(N∖S)` for a submodular `g`, a product of two modular
/// functions, or the square of a modular one. Each draw is checked by brute force.
pub fn random_supermodular(n: usize, rng: &mut Rng) -> TableFunction {
    let full = (1u64 << n) - 1;
    loop {
        let f = match rng.gen_range(0..3) {
            0 => {
                let g = random_submodular(n, rng);
                let c = g.value(&Subset::full(n));
                TableFunction::from_fn(n, |m| (c - g.values()[(full & !m) as usize]).max(0.0))
            }
            1 => {
                let (a, b) = (modular_weights(n, rng), modular_weights(n, rng));
                TableFunction::from_fn(n, |m| weight_of(&a, m) * weight_of(&b, m))
            }
            _ => {
                let w = modular_weights(n, rng);
                TableFunction::from_fn(n, |m| weight_of(&w, m).powi(2))
            }
        }
        .expect("n is within table limits");
        if is_monotone_bruteforce(&f).unwrap_or(false) && is_supermodular_bruteforce(&f).unwrap_or(false) {
            return normalized(f);
        }
    }
}

/// A random family of `count` block functions over `m` variables in which
/// each variable is read at most `k` times. Block values lie in `[0, 1]`.
pub fn random_read_k_family(m: usize, k: usize, count: usize, rng: &mut Rng) -> ReadKFamily {
    let mut reads = vec![0usize; m];
    let mut blocks = Vec::with_capacity(count);
    while blocks.len() < count {
        let size = rng.gen_range(1..=3.min(m));
        let mut open: Vec<usize> = (0..m).filter(|&v| reads[v] < k).collect();
        if open.is_empty() {
            break;
        }
        open.shuffle(rng);
        let mut vars: Vec<usize> = open.into_iter().take(size).collect();
        vars.sort_unstable();
        for &v in &vars {
            reads[v] += 1;
        }
        let table = (0..1usize << vars.len()).map(|_| rng.gen::<f64>()).collect();
        blocks.push(BlockFunction::new(vars, table).expect("values lie in [0, 1]"));
    }
    ReadKFamily::new(m, blocks).expect("generated blocks are valid")
}

/// `m` group-restricted coverage objectives over one random coverage
/// function on `n` sets, with targets equal to the values of a random
/// `k`-set scaled by `slack`.
pub fn random_instance(n: usize, m: usize, k: usize, eps: f64, slack: f64, rng: &mut Rng) -> MultiObjInstance {
    let universe = rng.gen_range(n / 2 + 2..=n + 4);
    let base = random_coverage(n, universe, rng);
    let mut groups: Vec<usize> = (0..universe).map(|_| rng.gen_range(0..m)).collect();
    for (i, g) in groups.iter_mut().enumerate().take(m) {
        *g = i;
    }
    let mut objectives: Vec<SharedFn> = (0..m)
        .map(|i| {
            let scale: Vec<f64> = groups.iter().map(|&g| if g == i { 1.0 } else { 0.0 }).collect();
            Arc::new(base.reweighted(&scale).expect("scale matches the universe")) as SharedFn
        })
        .collect();
    let mut pick: Vec<usize> = (0..n).collect();
    pick.shuffle(rng);
    let witness = Subset::from_indices(n, &pick[..k]).expect("indices are in range");
    // a group nobody in the witness covers would make the target zero
    for i in 0..m {
        if objectives[i].value(&witness) <= 0.0 {
            let w: Vec<f64> = (0..n).map(|e| if witness.contains(e) { 1.0 } else { 0.1 }).collect();
            objectives[i] = Arc::new(Coverage::modular(&w).expect("weights are positive"));
        }
    }
    let targets = objectives.iter().map(|f| f.value(&witness) * slack).collect();
    MultiObjInstance::new(objectives, k, targets, eps).expect("generated instance is valid")
}
