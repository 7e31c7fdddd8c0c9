use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Probabilities must sum to one within this slack.
pub const PROB_SUM_TOL: f64 = 1e-12;

/// An explicit finite joint distribution of an integer random vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawTable")]
pub struct JointTable {
    n: usize,
    support: Vec<Vec<i64>>,
    probs: Vec<f64>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawTable {
    n: usize,
    support: Vec<Vec<i64>>,
    probs: Vec<f64>,
}

impl TryFrom<RawTable> for JointTable {
    type Error = Error;

    fn try_from(raw: RawTable) -> Result<Self> {
        JointTable::new(raw.n, raw.support, raw.probs)
    }
}

/// The distribution of a single coordinate: distinct values in increasing
/// order, each with positive probability.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Marginal {
    pub values: Vec<i64>,
    pub probs: Vec<f64>,
}

impl Marginal {
    pub fn mean(&self) -> f64 {
        self.values.iter().zip(&self.probs).map(|(&v, p)| v as f64 * p).sum()
    }
}

impl JointTable {
    pub fn new(n: usize, support: Vec<Vec<i64>>, probs: Vec<f64>) -> Result<Self> {
        if n == 0 {
            return Err(Error::input("a joint table needs at least one variable"));
        }
        if support.is_empty() {
            return Err(Error::input("a joint table needs at least one support point"));
        }
        if support.len() != probs.len() {
            return Err(Error::input(format!(
                "{} support points but {} probabilities",
                support.len(),
                probs.len()
            )));
        }
        if let Some(p) = support.iter().find(|p| p.len() != n) {
            return Err(Error::input(format!("support point {p:?} does not have {n} coordinates")));
        }
        if let Some((i, p)) = probs.iter().enumerate().find(|(_, p)| !(p.is_finite() && **p >= 0.0)) {
            return Err(Error::input(format!("probability {i} = {p} is not a non-negative number")));
        }
        let total: f64 = probs.iter().sum();
        if (total - 1.0).abs() > PROB_SUM_TOL {
            return Err(Error::input(format!("probabilities sum to {total}, not 1")));
        }
        let mut seen = std::collections::HashSet::new();
        if let Some(p) = support.iter().find(|p| !seen.insert(p.as_slice())) {
            return Err(Error::input(format!("support point {p:?} appears twice")));
        }
        Ok(JointTable { n, support, probs })
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    /// Builds a table from (outcome, probability) pairs, merging repeated outcomes
    /// and ordering the support lexicographically.
    pub fn from_outcomes(n: usize, outcomes: impl IntoIterator<Item = (Vec<i64>, f64)>) -> Result<Self> {
        let mut merged: BTreeMap<Vec<i64>, f64> = BTreeMap::new();
        for (point, p) in outcomes {
            *merged.entry(point).or_insert(0.0) += p;
        }
        let (support, probs) = merged.into_iter().unzip();
        JointTable::new(n, support, probs)
    }

    pub fn point_mass(point: Vec<i64>) -> Result<Self> {
        JointTable::new(point.len(), vec![point], vec![1.0])
    }

    /// The product measure of the given marginals.
    pub fn product(marginals: &[Marginal]) -> Result<Self> {
        if marginals.is_empty() {
            return Err(Error::input("a product measure needs at least one factor"));
        }
        let mut support: Vec<Vec<i64>> = vec![Vec::new()];
        let mut probs = vec![1.0];
        for m in marginals {
            let mut next_s = Vec::with_capacity(support.len() * m.values.len());
            let mut next_p = Vec::with_capacity(support.len() * m.values.len());
            for (point, &p) in support.iter().zip(&probs) {
                for (&v, &q) in m.values.iter().zip(&m.probs) {
                    let mut np = point.clone();
                    np.push(v);
                    next_s.push(np);
                    next_p.push(p * q);
                }
            }
            support = next_s;
            probs = next_p;
        }
        // each factor was normalized separately; the product's sum can drift by a few ulps
        let total: f64 = probs.iter().sum();
        probs.iter_mut().for_each(|p| *p /= total);
        JointTable::new(marginals.len(), support, probs)
    }

    /// Independent Bernoulli coordinates with the given means.
    pub fn independent_bits(means: &[f64]) -> Result<Self> {
        let marginals: Result<Vec<Marginal>> = means
            .iter()
            .map(|&p| {
                if !(0.0..=1.0).contains(&p) {
                    return Err(Error::input(format!("bit mean {p} outside [0, 1]")));
                }
                let (values, probs) = [(0, 1.0 - p), (1, p)].into_iter().filter(|(_, q)| *q > 0.0).unzip();
                Ok(Marginal { values, probs })
            })
            .collect();
        JointTable::product(&marginals?)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn support(&self) -> &[Vec<i64>] {
        &self.support
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn len(&self) -> usize {
        self.support.len()
    }

    pub fn is_empty(&self) -> bool {
        self.support.is_empty()
    }

    /// Support points carrying positive probability.
    pub fn realized(&self) -> impl Iterator<Item = (&[i64], f64)> + '_ {
        self.support.iter().zip(&self.probs).filter(|(_, &p)| p > 0.0).map(|(s, &p)| (s.as_slice(), p))
    }

    pub fn is_binary(&self) -> bool {
        self.support.iter().flatten().all(|&v| v == 0 || v == 1)
    }

    /// Number of distinct realized values of each coordinate.
    pub fn value_counts(&self) -> Vec<usize> {
        (0..self.n)
            .map(|i| {
                let mut vals: Vec<i64> = self.realized().map(|(p, _)| p[i]).collect();
                vals.sort_unstable();
                vals.dedup();
                vals.len()
            })
            .collect()
    }

    /// The law of `-X`. Monotone non-increasing functions of `X` are the
    /// non-decreasing functions of `-X`.
    pub fn reflected(&self) -> JointTable {
        JointTable {
            n: self.n,
            support: self.support.iter().map(|p| p.iter().map(|v| -v).collect()).collect(),
            probs: self.probs.clone(),
        }
    }

    pub fn expectation(&self, f: impl Fn(&[i64]) -> f64) -> f64 {
        self.realized().map(|(p, q)| q * f(p)).sum()
    }

    /// Same measure (as a map from points to mass, ignoring zero-mass points), within `tol` per point.
    pub fn same_measure(&self, other: &JointTable, tol: f64) -> bool {
        if self.n != other.n {
            return false;
        }
        let collect = |t: &JointTable| -> BTreeMap<Vec<i64>, f64> {
            t.realized().map(|(p, q)| (p.to_vec(), q)).collect()
        };
        let (a, b) = (collect(self), collect(other));
        let keys: std::collections::BTreeSet<&Vec<i64>> = a.keys().chain(b.keys()).collect();
        let same = keys.into_iter().all(|k| (a.get(k).copied().unwrap_or(0.0) - b.get(k).copied().unwrap_or(0.0)).abs() <= tol);
        same
    }
}

/// Exact marginal law of each coordinate.
pub fn marginals(d: &JointTable) -> Vec<Marginal> {
    (0..d.n())
        .map(|i| {
            let mut acc: BTreeMap<i64, f64> = BTreeMap::new();
            for (p, q) in d.realized() {
                *acc.entry(p[i]).or_insert(0.0) += q;
            }
            let (values, probs) = acc.into_iter().unzip();
            Marginal { values, probs }
        })
        .collect()
}

/// The product measure with the same marginals as `d`.
pub fn product_of_marginals(d: &JointTable) -> JointTable {
    JointTable::product(&marginals(d)).expect("marginals of a valid table form a valid product")
}

/// `{(0,3), (1,1), (2,2), (3,0)}`, each with mass 1/4: a pair that is
/// 1-negatively associated but violates weak negative regression.
pub fn counterexample_distribution() -> JointTable {
    JointTable::new(2, vec![vec![0, 3], vec![1, 1], vec![2, 2], vec![3, 0]], vec![0.25; 4]).expect("static table is valid")
}
