//! Enumeration of monotone 0/1 functions on a finite set of integer points.
//!
//! A monotone indicator on the realized points of a projection is an up-set
//! of the componentwise order restricted to those points. Its up-closure in
//! `Z^k` extends it to a monotone function everywhere, so scanning up-sets of
//! realized points covers every monotone indicator.

use std::ops::ControlFlow;

use crate::error::{Error, Result};

/// Hard cap on the number of up-sets visited for one variable set.
pub const MAX_UPSETS: usize = 1 << 18;

pub(crate) fn leq(a: &[i64], b: &[i64]) -> bool {
    a.iter().zip(b).all(|(x, y)| x <= y)
}

/// Distinct points of a projection, with a linear extension of the
/// componentwise order from the top down.
#[derive(Debug, Clone)]
pub(crate) struct Poset {
    pub points: Vec<Vec<i64>>,
    /// `order[r]` is the point processed at rank `r`; larger points come first.
    order: Vec<usize>,
    /// For each rank, the earlier ranks holding strictly larger points.
    above: Vec<Vec<usize>>,
}

impl Poset {
    pub fn new(points: Vec<Vec<i64>>) -> Self {
        let mut order: Vec<usize> = (0..points.len()).collect();
        // a strictly larger point has a strictly larger coordinate sum;
        // ties broken lexicographically (descending) keep the order deterministic
        order.sort_by(|&a, &b| {
            let (sa, sb): (i64, i64) = (points[a].iter().sum(), points[b].iter().sum());
            sb.cmp(&sa).then_with(|| points[b].cmp(&points[a]))
        });
        let above = (0..order.len())
            .map(|r| (0..r).filter(|&q| leq(&points[order[r]], &points[order[q]])).collect())
            .collect();
        Poset { points, order, above }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    /// Visits every up-set other than the empty one and the full one, as
    /// membership flags indexed like `points`. Stops early on `Break`.
    pub fn for_each_nontrivial(&self, mut visit: impl FnMut(&[bool]) -> ControlFlow<()>) -> Result<()> {
        let mut by_rank = vec![false; self.len()];
        let mut member = vec![false; self.len()];
        let mut visited = 0usize;
        self.recurse(0, &mut by_rank, &mut member, &mut visited, &mut visit).map(|_| ())
    }

    fn recurse(
        &self,
        rank: usize,
        by_rank: &mut [bool],
        member: &mut [bool],
        visited: &mut usize,
        visit: &mut impl FnMut(&[bool]) -> ControlFlow<()>,
    ) -> Result<ControlFlow<()>> {
        if rank == self.len() {
            *visited += 1;
            if *visited > MAX_UPSETS {
                return Err(Error::capacity(format!(
                    "more than {MAX_UPSETS} monotone indicators on {} points",
                    self.len()
                )));
            }
            let count = member.iter().filter(|&&m| m).count();
            if count == 0 || count == self.len() {
                return Ok(ControlFlow::Continue(()));
            }
            return Ok(visit(member));
        }
        // including a point requires every larger point to be included already
        let options: &[bool] = if self.above[rank].iter().all(|&q| by_rank[q]) { &[true, false] } else { &[false] };
        for &take in options {
            by_rank[rank] = take;
            member[self.order[rank]] = take;
            if let ControlFlow::Break(()) = self.recurse(rank + 1, by_rank, member, visited, visit)? {
                return Ok(ControlFlow::Break(()));
            }
        }
        by_rank[rank] = false;
        member[self.order[rank]] = false;
        Ok(ControlFlow::Continue(()))
    }

    /// Minimal elements of an up-set.
    pub fn minimal_elements(&self, member: &[bool]) -> Vec<Vec<i64>> {
        let ins: Vec<usize> = (0..self.len()).filter(|&i| member[i]).collect();
        let mut mins: Vec<Vec<i64>> = ins
            .iter()
            .filter(|&&i| !ins.iter().any(|&j| j != i && leq(&self.points[j], &self.points[i])))
            .map(|&i| self.points[i].clone())
            .collect();
        mins.sort();
        mins
    }
}

/// The indicator of the up-closure of `minimal`, evaluated at `point`.
#[cfg(test)]
pub(crate) fn indicator(minimal: &[Vec<i64>], point: &[i64]) -> bool {
    minimal.iter().any(|m| leq(m, point))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn count(points: Vec<Vec<i64>>) -> usize {
        let p = Poset::new(points);
        let mut c = 0;
        p.for_each_nontrivial(|_| {
            c += 1;
            ControlFlow::Continue(())
        })
        .unwrap();
        c + 2
    }

    fn cube(k: usize) -> Vec<Vec<i64>> {
        (0..1u32 << k).map(|m| (0..k).map(|i| (m >> i & 1) as i64).collect()).collect()
    }

    #[test]
    fn dedekind_numbers_on_boolean_cubes() {
        // number of up-sets of the Boolean lattice B_k
        assert_eq!(count(cube(1)), 3);
        assert_eq!(count(cube(2)), 6);
        assert_eq!(count(cube(3)), 20);
        assert_eq!(count(cube(4)), 168);
    }

    #[test]
    fn chain_has_one_more_upset_than_points() {
        assert_eq!(count((0..6).map(|v| vec![v]).collect()), 7);
    }

    #[test]
    fn antichain_has_every_subset() {
        assert_eq!(count(vec![vec![0, 3], vec![1, 2], vec![2, 1], vec![3, 0]]), 1 << 4);
    }

    #[test]
    fn every_visit_is_upward_closed() {
        let points = vec![vec![0, 0], vec![1, 0], vec![0, 2], vec![1, 1], vec![2, 2], vec![3, 0]];
        let p = Poset::new(points.clone());
        p.for_each_nontrivial(|m| {
            for i in 0..points.len() {
                for j in 0..points.len() {
                    if m[i] && leq(&points[i], &points[j]) {
                        assert!(m[j]);
                    }
                }
            }
            let mins = p.minimal_elements(m);
            for (i, pt) in points.iter().enumerate() {
                assert_eq!(indicator(&mins, pt), m[i]);
            }
            ControlFlow::Continue(())
        })
        .unwrap();
    }
}
