//! Set functions over a finite ground set and their multilinear extensions.
//!
//! A [`SetFunction`] is a deterministic value oracle. Concrete oracles are
//! weighted coverage ([`Coverage`]), explicit value tables ([`TableFunction`])
//! and residual functions `T -> f(T ∪ S) - f(S)` ([`Contracted`]).

mod contract;
mod coverage;
mod multilinear;
mod subset;
mod table;

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use contract::{contract, Contracted};
pub use coverage::{Coverage, CoverageSpec};
pub use multilinear::{
    multilinear_exact, multilinear_gradient, multilinear_mc, multilinear_partial, multilinear_partial_mc,
    multilinear_from_table, MonteCarloEstimate, MAX_EXACT_MULTILINEAR,
};
pub(crate) use multilinear::gradient_from_table;
pub use subset::Subset;
pub use table::TableFunction;

/// Largest ground set the exhaustive property checks accept.
pub const MAX_BRUTE_FORCE: usize = 16;

/// Absolute slack (relative to the function's scale) granted to the
/// brute-force property checks, absorbing floating-point summation noise.
pub const BRUTE_FORCE_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GroundSet {
    n: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    labels: Option<Vec<String>>,
}

impl GroundSet {
    pub fn new(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::input("a ground set needs at least one element"));
        }
        Ok(GroundSet { n, labels: None })
    }

    pub fn with_labels(labels: Vec<String>) -> Result<Self> {
        let mut seen = std::collections::HashSet::new();
        for l in &labels {
            if !seen.insert(l.as_str()) {
                return Err(Error::input(format!("duplicate ground-set label {l:?}")));
            }
        }
        let mut g = GroundSet::new(labels.len())?;
        g.labels = Some(labels);
        Ok(g)
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn labels(&self) -> Option<&[String]> {
        self.labels.as_deref()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FunctionKind {
    Coverage,
    WeightedCoverage,
    SyntheticTable,
    Contracted,
}

/// A deterministic oracle `2^N -> R`.
///
/// Implementations are immutable once built and may be shared across threads.
pub trait SetFunction: Send + Sync + fmt::Debug {
    fn ground(&self) -> &GroundSet;

    fn kind(&self) -> FunctionKind;

    /// Value at `set`. The subset's ground size must match; use [`eval`] for a
    /// checked entry point.
    fn value(&self, set: &Subset) -> f64;

    /// An incremental evaluator positioned at `start`, when the oracle has a
    /// cheaper update rule than re-evaluation.
    fn incremental(&self, _start: &Subset) -> Option<Box<dyn SubsetWalker + '_>> {
        None
    }

    fn n(&self) -> usize {
        self.ground().len()
    }
}

pub type SharedFn = Arc<dyn SetFunction>;

/// Walks subsets by single-element toggles, reporting the current value.
pub trait SubsetWalker {
    fn toggle(&mut self, element: usize);
    fn value(&self) -> f64;
}

struct Rescan<'a> {
    f: &'a dyn SetFunction,
    current: Subset,
    value: f64,
}

impl SubsetWalker for Rescan<'_> {
    fn toggle(&mut self, element: usize) {
        self.current.toggle(element);
        self.value = self.f.value(&self.current);
    }

    fn value(&self) -> f64 {
        self.value
    }
}

/// Incremental evaluator for `f` starting at `start`, falling back to full
/// re-evaluation for oracles without an update rule.
pub fn walker<'a>(f: &'a dyn SetFunction, start: &Subset) -> Box<dyn SubsetWalker + 'a> {
    f.incremental(start).unwrap_or_else(|| {
        Box::new(Rescan { f, current: start.clone(), value: f.value(start) })
    })
}

/// Visits every subset of `coords` (added on top of `base`) in reflected Gray-code
/// order. The callback receives the mask over positions in `coords` and the value.
pub fn gray_walk(f: &dyn SetFunction, base: &Subset, coords: &[usize], mut visit: impl FnMut(u64, f64)) {
    assert!(coords.len() < 64);
    let mut w = walker(f, base);
    let mut gray = 0u64;
    visit(0, w.value());
    for t in 1u64..(1u64 << coords.len()) {
        let bit = t.trailing_zeros() as usize;
        w.toggle(coords[bit]);
        gray ^= 1 << bit;
        visit(gray, w.value());
    }
}

/// Values of `f` on all `2^n` subsets, indexed by bitmask.
pub fn tabulate(f: &dyn SetFunction) -> Result<Vec<f64>> {
    let n = f.n();
    if n > multilinear::MAX_EXACT_MULTILINEAR {
        return Err(Error::capacity(format!("cannot tabulate a set function on {n} elements")));
    }
    let coords: Vec<usize> = (0..n).collect();
    let mut table = vec![0.0; 1 << n];
    gray_walk(f, &Subset::empty(n), &coords, |mask, v| table[mask as usize] = v);
    Ok(table)
}

fn check_ground(f: &dyn SetFunction, set: &Subset) -> Result<()> {
    if set.ground_size() != f.n() {
        return Err(Error::input(format!(
            "subset is over a ground set of size {}, function expects {}",
            set.ground_size(),
            f.n()
        )));
    }
    Ok(())
}

/// Checked evaluation.
pub fn eval(f: &dyn SetFunction, set: &Subset) -> Result<f64> {
    check_ground(f, set)?;
    Ok(f.value(set))
}

/// Checked evaluation from a list of element indices.
pub fn eval_indices(f: &dyn SetFunction, elements: &[usize]) -> Result<f64> {
    let set = Subset::from_indices(f.n(), elements)?;
    Ok(f.value(&set))
}

/// `f(S ∪ {e}) - f(S)`; `e` must lie outside `S`.
pub fn marginal(f: &dyn SetFunction, e: usize, set: &Subset) -> Result<f64> {
    check_ground(f, set)?;
    if e >= f.n() {
        return Err(Error::input(format!("element {e} is out of range")));
    }
    if set.contains(e) {
        return Err(Error::input(format!("element {e} already belongs to the set")));
    }
    Ok(f.value(&set.with(e)) - f.value(set))
}

fn brute_force_table(f: &dyn SetFunction) -> Result<(Vec<f64>, f64)> {
    let n = f.n();
    if n > MAX_BRUTE_FORCE {
        return Err(Error::capacity(format!(
            "brute-force property checks support at most {MAX_BRUTE_FORCE} elements, got {n}"
        )));
    }
    let table = tabulate(f)?;
    let scale = table.iter().fold(1.0f64, |m, v| m.max(v.abs()));
    Ok((table, BRUTE_FORCE_TOL * scale))
}

/// `f(S) <= f(S ∪ {i})` for every `S` and `i`, which chains to `f(S) <= f(T)` for `S ⊆ T`.
pub fn is_monotone_bruteforce(f: &dyn SetFunction) -> Result<bool> {
    let (t, tol) = brute_force_table(f)?;
    let n = f.n();
    Ok((0..t.len()).all(|s| (0..n).all(|i| s >> i & 1 == 1 || t[s] <= t[s | 1 << i] + tol)))
}

/// Diminishing returns, checked through the equivalent local condition
/// `f(S+i) - f(S) >= f(S+i+j) - f(S+j)`.
pub fn is_submodular_bruteforce(f: &dyn SetFunction) -> Result<bool> {
    let (t, tol) = brute_force_table(f)?;
    Ok(local_exchange_holds(&t, f.n(), |lhs, rhs| lhs + tol >= rhs))
}

/// Increasing returns: `f(S+i) - f(S) <= f(S+i+j) - f(S+j)`.
pub fn is_supermodular_bruteforce(f: &dyn SetFunction) -> Result<bool> {
    let (t, tol) = brute_force_table(f)?;
    Ok(local_exchange_holds(&t, f.n(), |lhs, rhs| lhs <= rhs + tol))
}

fn local_exchange_holds(t: &[f64], n: usize, ok: impl Fn(f64, f64) -> bool) -> bool {
    for s in 0..t.len() {
        for i in 0..n {
            if s >> i & 1 == 1 {
                continue;
            }
            for j in i + 1..n {
                if s >> j & 1 == 1 {
                    continue;
                }
                let without_j = t[s | 1 << i] - t[s];
                let with_j = t[s | 1 << i | 1 << j] - t[s | 1 << j];
                if !ok(without_j, with_j) {
                    return false;
                }
            }
        }
    }
    true
}

/// Largest single-element marginal `max f(S+e) - f(S)` and smallest, with
/// the pairs attaining them. Exhaustive; `n <= 16`.
pub fn marginal_range_bruteforce(f: &dyn SetFunction) -> Result<MarginalRange> {
    let (t, _) = brute_force_table(f)?;
    let n = f.n();
    let mut range = MarginalRange {
        min: f64::INFINITY,
        min_at: (0, Vec::new()),
        max: f64::NEG_INFINITY,
        max_at: (0, Vec::new()),
    };
    for s in 0..t.len() {
        for e in 0..n {
            if s >> e & 1 == 1 {
                continue;
            }
            let m = t[s | 1 << e] - t[s];
            if m < range.min {
                range.min = m;
                range.min_at = (e, Subset::from_mask(n, s as u64).to_vec());
            }
            if m > range.max {
                range.max = m;
                range.max_at = (e, Subset::from_mask(n, s as u64).to_vec());
            }
        }
    }
    Ok(range)
}

#[derive(Debug, Clone, PartialEq)]
pub struct MarginalRange {
    pub min: f64,
    pub min_at: (usize, Vec<usize>),
    pub max: f64,
    pub max_at: (usize, Vec<usize>),
}

/// A point of `[0,1]^n`.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(transparent)]
pub struct FractionalVector(Vec<f64>);

impl FractionalVector {
    pub fn new(x: Vec<f64>) -> Result<Self> {
        if x.is_empty() {
            return Err(Error::input("fractional vector is empty"));
        }
        if let Some((i, v)) = x.iter().enumerate().find(|(_, v)| !(0.0..=1.0).contains(*v)) {
            return Err(Error::input(format!("coordinate {i} = {v} lies outside [0, 1]")));
        }
        Ok(FractionalVector(x))
    }

    pub fn zeros(n: usize) -> Self {
        FractionalVector(vec![0.0; n])
    }

    pub fn indicator(set: &Subset) -> Self {
        FractionalVector((0..set.ground_size()).map(|i| if set.contains(i) { 1.0 } else { 0.0 }).collect())
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn sum(&self) -> f64 {
        self.0.iter().sum()
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }

    /// `Some(support)` when every coordinate is exactly 0 or 1.
    pub fn integral_support(&self) -> Option<Subset> {
        let mut s = Subset::empty(self.len());
        for (i, &v) in self.0.iter().enumerate() {
            if v == 1.0 {
                s.insert(i);
            } else if v != 0.0 {
                return None;
            }
        }
        Some(s)
    }
}

impl<'de> Deserialize<'de> for FractionalVector {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Bare(Vec<f64>),
            Wrapped { x: Vec<f64> },
        }
        let x = match Raw::deserialize(d)? {
            Raw::Bare(x) | Raw::Wrapped { x } => x,
        };
        FractionalVector::new(x).map_err(serde::de::Error::custom)
    }
}

impl std::ops::Index<usize> for FractionalVector {
    type Output = f64;

    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_set_cover() -> Coverage {
        // sets {a}, {a, b} over a unit-weight universe {a, b}
        Coverage::new(2, None, vec![vec![0], vec![0, 1]]).unwrap()
    }

    #[test]
    fn coverage_values_by_hand() {
        let f = two_set_cover();
        assert_eq!(eval_indices(&f, &[0, 1]).unwrap(), 2.0);
        assert_eq!(eval_indices(&f, &[0]).unwrap(), 1.0);
        assert_eq!(eval_indices(&f, &[]).unwrap(), 0.0);
        assert!(matches!(eval_indices(&f, &[2]), Err(Error::Input(_))));
        assert!(matches!(eval(&f, &Subset::empty(3)), Err(Error::Input(_))));
    }

    #[test]
    fn marginals() {
        let f = two_set_cover();
        let s0 = Subset::from_indices(2, &[0]).unwrap();
        assert_eq!(marginal(&f, 1, &s0).unwrap(), 1.0);
        assert_eq!(marginal(&f, 0, &Subset::empty(2)).unwrap(), 1.0);
        assert!(matches!(marginal(&f, 0, &s0), Err(Error::Input(_))));

        let modular = TableFunction::from_fn(5, |s| s.count_ones() as f64).unwrap();
        for mask in 0u64..32 {
            let s = Subset::from_mask(5, mask);
            for e in (0..5).filter(|&e| !s.contains(e)) {
                assert_eq!(marginal(&modular, e, &s).unwrap(), 1.0);
            }
        }
    }

    #[test]
    fn property_checks_on_named_functions() {
        assert!(is_monotone_bruteforce(&two_set_cover()).unwrap());
        assert!(is_submodular_bruteforce(&two_set_cover()).unwrap());

        let decreasing = TableFunction::from_fn(4, |s| -(s.count_ones() as f64)).unwrap();
        assert!(!is_monotone_bruteforce(&decreasing).unwrap());
        assert!(is_submodular_bruteforce(&decreasing).unwrap());

        let square = TableFunction::from_fn(2, |s| (s.count_ones() as f64).powi(2)).unwrap();
        assert!(!is_submodular_bruteforce(&square).unwrap());
        assert!(is_supermodular_bruteforce(&square).unwrap());

        let modular = TableFunction::from_fn(6, |s| s.count_ones() as f64 * 0.3).unwrap();
        assert!(is_submodular_bruteforce(&modular).unwrap());
        assert!(is_supermodular_bruteforce(&modular).unwrap());
    }

    #[test]
    fn brute_force_capacity() {
        let f = Coverage::new(1, None, vec![vec![0]; 17]).unwrap();
        assert!(matches!(is_monotone_bruteforce(&f), Err(Error::Capacity(_))));
        assert!(matches!(is_submodular_bruteforce(&f), Err(Error::Capacity(_))));
    }

    #[test]
    fn ground_set_validation() {
        assert!(GroundSet::new(0).is_err());
        assert!(GroundSet::with_labels(vec!["a".into(), "a".into()]).is_err());
        assert_eq!(GroundSet::with_labels(vec!["a".into(), "b".into()]).unwrap().len(), 2);
    }

    #[test]
    fn fractional_vector_rejects_out_of_range() {
        assert!(FractionalVector::new(vec![0.2, 1.5]).is_err());
        assert!(FractionalVector::new(vec![f64::NAN]).is_err());
        let x: FractionalVector = serde_json::from_str("{\"x\": [0.5, 1.0]}").unwrap();
        assert_eq!(x.as_slice(), &[0.5, 1.0]);
        let y: FractionalVector = serde_json::from_str("[0.0, 1.0]").unwrap();
        assert_eq!(y.integral_support().unwrap().to_vec(), vec![1]);
        assert!(serde_json::from_str::<FractionalVector>("[2.0]").is_err());
    }

    #[test]
    fn tabulate_matches_direct_evaluation() {
        let f = Coverage::new(4, Some(vec![1.0, 0.5, 0.25, 2.0]), vec![vec![0, 1], vec![1, 2], vec![3], vec![]]).unwrap();
        let t = tabulate(&f).unwrap();
        for (mask, v) in t.iter().enumerate() {
            assert_eq!(*v, f.value(&Subset::from_mask(4, mask as u64)));
        }
    }
}
