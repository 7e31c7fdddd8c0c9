use serde::{Deserialize, Serialize};

use super::{FunctionKind, GroundSet, SetFunction, Subset, SubsetWalker};
use crate::error::{Error, Result};

/// On-disk form of a coverage instance. Element indices are 0-based.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CoverageSpec {
    pub universe_size: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub weights: Option<Vec<f64>>,
    pub sets: Vec<Vec<usize>>,
}

/// Weighted coverage: ground element `e` owns a subset of a weighted
/// universe, and `f(S)` is the total weight of the union of the owned subsets.
/// Monotone and submodular for any non-negative weights.
#[derive(Debug, Clone)]
pub struct Coverage {
    ground: GroundSet,
    weights: Vec<f64>,
    sets: Vec<Vec<usize>>,
    unit: bool,
}

impl Coverage {
    pub fn new(universe_size: usize, weights: Option<Vec<f64>>, sets: Vec<Vec<usize>>) -> Result<Self> {
        let ground = GroundSet::new(sets.len())?;
        let unit = weights.is_none();
        let weights = weights.unwrap_or_else(|| vec![1.0; universe_size]);
        if weights.len() != universe_size {
            return Err(Error::input(format!(
                "coverage has {} weights for a universe of size {universe_size}",
                weights.len()
            )));
        }
        if let Some((i, w)) = weights.iter().enumerate().find(|(_, w)| !(w.is_finite() && **w >= 0.0)) {
            return Err(Error::input(format!("universe weight {i} = {w} is not a non-negative number")));
        }
        let mut normalized = Vec::with_capacity(sets.len());
        for (e, mut set) in sets.into_iter().enumerate() {
            if let Some(&bad) = set.iter().find(|&&u| u >= universe_size) {
                return Err(Error::input(format!(
                    "set {e} references universe element {bad}, universe size is {universe_size}"
                )));
            }
            set.sort_unstable();
            set.dedup();
            normalized.push(set);
        }
        let unit = unit || weights.iter().all(|&w| w == 1.0);
        Ok(Coverage { ground, weights, sets: normalized, unit })
    }

    pub fn from_spec(spec: CoverageSpec) -> Result<Self> {
        Coverage::new(spec.universe_size, spec.weights, spec.sets)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Coverage::from_spec(serde_json::from_str(text)?)
    }

    pub fn to_spec(&self) -> CoverageSpec {
        CoverageSpec {
            universe_size: self.weights.len(),
            weights: if self.unit { None } else { Some(self.weights.clone()) },
            sets: self.sets.clone(),
        }
    }

    /// The modular function `f(S) = Σ_{e∈S} w_e`, as coverage of private universe items.
    pub fn modular(weights: &[f64]) -> Result<Self> {
        let sets = (0..weights.len()).map(|e| vec![e]).collect();
        Coverage::new(weights.len(), Some(weights.to_vec()), sets)
    }

    /// Same sets, with each universe weight multiplied by `scale[u]`. Used to
    /// restrict coverage to a demographic group (scale 0 outside it).
    pub fn reweighted(&self, scale: &[f64]) -> Result<Self> {
        if scale.len() != self.weights.len() {
            return Err(Error::input("reweighting vector does not match the universe size"));
        }
        let weights = self.weights.iter().zip(scale).map(|(w, s)| w * s).collect();
        Coverage::new(self.weights.len(), Some(weights), self.sets.clone())
    }

    pub fn universe_size(&self) -> usize {
        self.weights.len()
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn sets(&self) -> &[Vec<usize>] {
        &self.sets
    }
}

impl SetFunction for Coverage {
    fn ground(&self) -> &GroundSet {
        &self.ground
    }

    fn kind(&self) -> FunctionKind {
        if self.unit {
            FunctionKind::Coverage
        } else {
            FunctionKind::WeightedCoverage
        }
    }

    fn value(&self, set: &Subset) -> f64 {
        let mut covered = vec![false; self.weights.len()];
        for e in set.iter() {
            for &u in &self.sets[e] {
                covered[u] = true;
            }
        }
        covered.iter().zip(&self.weights).filter(|(c, _)| **c).map(|(_, w)| w).sum()
    }

    fn incremental(&self, start: &Subset) -> Option<Box<dyn SubsetWalker + '_>> {
        let mut w = CoverageWalker {
            f: self,
            current: Subset::empty(self.n()),
            counts: vec![0; self.weights.len()],
            total: 0.0,
        };
        for e in start.iter() {
            w.toggle(e);
        }
        // start from the exact value so single-subset walks agree bit-for-bit
        w.total = self.value(start);
        Some(Box::new(w))
    }
}

struct CoverageWalker<'a> {
    f: &'a Coverage,
    current: Subset,
    counts: Vec<u32>,
    total: f64,
}

impl SubsetWalker for CoverageWalker<'_> {
    fn toggle(&mut self, e: usize) {
        let adding = !self.current.contains(e);
        self.current.toggle(e);
        for &u in &self.f.sets[e] {
            if adding {
                self.counts[u] += 1;
                if self.counts[u] == 1 {
                    self.total += self.f.weights[u];
                }
            } else {
                self.counts[u] -= 1;
                if self.counts[u] == 0 {
                    self.total -= self.f.weights[u];
                }
            }
        }
        if self.f.unit {
            return;
        }
        // running sums of weights drift; snap to zero when nothing is covered
        if self.current.is_empty() {
            self.total = 0.0;
        }
    }

    fn value(&self) -> f64 {
        self.total
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::setfn::{gray_walk, is_monotone_bruteforce, is_submodular_bruteforce};

    #[test]
    fn json_round_trip_and_defaults() {
        let f = Coverage::from_json(r#"{"universe_size": 3, "sets": [[0, 1], [2], [1, 1]]}"#).unwrap();
        assert_eq!(f.kind(), FunctionKind::Coverage);
        assert_eq!(f.sets()[2], vec![1]);
        assert_eq!(f.value(&Subset::full(3)), 3.0);
        let back = Coverage::from_spec(f.to_spec()).unwrap();
        assert_eq!(back.sets(), f.sets());
    }

    #[test]
    fn rejects_bad_specs() {
        assert!(Coverage::from_json(r#"{"universe_size": 2, "sets": [[2]]}"#).is_err());
        assert!(Coverage::from_json(r#"{"universe_size": 2, "weights": [1.0], "sets": [[0]]}"#).is_err());
        assert!(Coverage::from_json(r#"{"universe_size": 1, "weights": [-1.0], "sets": [[0]]}"#).is_err());
        assert!(Coverage::from_json(r#"{"universe_size": 1, "sets": []}"#).is_err());
        assert!(Coverage::from_json(r#"{"universe_size": 1, "sets": [[0]], "extra": 1}"#).is_err());
    }

    #[test]
    fn walker_tracks_direct_values() {
        let f = Coverage::new(5, Some(vec![0.1, 0.7, 0.2, 0.3, 1.9]), vec![vec![0, 1], vec![1, 2, 3], vec![4], vec![0, 4], vec![]]).unwrap();
        let coords: Vec<usize> = (0..5).collect();
        gray_walk(&f, &Subset::empty(5), &coords, |mask, v| {
            let direct = f.value(&Subset::from_mask(5, mask));
            assert!((v - direct).abs() < 1e-12, "mask {mask}: {v} vs {direct}");
        });
    }

    #[test]
    fn modular_and_reweighted() {
        let f = Coverage::modular(&[1.0, 2.0, 4.0]).unwrap();
        assert_eq!(f.value(&Subset::from_indices(3, &[0, 2]).unwrap()), 5.0);
        let g = f.reweighted(&[1.0, 0.0, 1.0]).unwrap();
        assert_eq!(g.value(&Subset::full(3)), 5.0);
        assert!(is_monotone_bruteforce(&g).unwrap());
        assert!(is_submodular_bruteforce(&g).unwrap());
    }
}
