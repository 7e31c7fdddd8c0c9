use std::ops::ControlFlow;

use super::upsets::{leq, Poset};
use super::{CylinderSide, DependenceReport, Direction, JointTable, MonotoneIndicator, Notion, Witness, DEP_TOL};
use crate::error::{Error, Result};

pub const MAX_CYLINDER_VARS: usize = 20;
pub const MAX_ONE_NA_VARS: usize = 5;
pub const MAX_ONE_NA_VALUES: usize = 6;
pub const MAX_NA_VARS: usize = 4;
pub const MAX_NA_VALUES: usize = 4;

pub fn check(d: &JointTable, notion: Notion) -> Result<DependenceReport> {
    match notion {
        Notion::Cylinder => check_cylinder(d),
        Notion::OneNa => check_one_na(d),
        Notion::WeakNr => check_weak_nr(d),
        Notion::Na => check_na(d),
        Notion::Nr => check_nr(d),
    }
}

fn report(notion: Notion, witness: Option<Witness>, inequalities_checked: u64) -> DependenceReport {
    DependenceReport { notion, holds: witness.is_none(), witness, inequalities_checked }
}

fn within_bounds(d: &JointTable, notion: Notion, max_vars: usize, max_values: usize) -> Result<()> {
    if d.n() > max_vars {
        return Err(Error::capacity(format!("{notion} check supports at most {max_vars} variables, got {}", d.n())));
    }
    if let Some((i, c)) = d.value_counts().into_iter().enumerate().find(|(_, c)| *c > max_values) {
        return Err(Error::capacity(format!(
            "{notion} check supports at most {max_values} values per variable, X_{i} takes {c}"
        )));
    }
    Ok(())
}

/// Checks `E[Π_{i∈S} X_i] ≤ Π E[X_i]` and `E[Π_{i∈S} (1-X_i)] ≤ Π E[1-X_i]`
/// for every `S`, using superset sums over the 2^n cube.
pub fn check_cylinder(d: &JointTable) -> Result<DependenceReport> {
    if !d.is_binary() {
        return Err(Error::input("cylinder dependence is defined for binary variables only"));
    }
    let n = d.n();
    if n > MAX_CYLINDER_VARS {
        return Err(Error::capacity(format!("cylinder check supports at most {MAX_CYLINDER_VARS} variables, got {n}")));
    }
    let size = 1usize << n;
    let mut checked = 0u64;
    for side in [CylinderSide::Ones, CylinderSide::Zeros] {
        // joint[S] = Pr[all coordinates in S equal the side's value]
        let mut joint = vec![0.0; size];
        for (p, q) in d.realized() {
            let mut m = 0usize;
            for (i, &v) in p.iter().enumerate() {
                if (v == 1) == (side == CylinderSide::Ones) {
                    m |= 1 << i;
                }
            }
            joint[m] += q;
        }
        for i in 0..n {
            for m in 0..size {
                if m & (1 << i) == 0 {
                    joint[m] += joint[m | (1 << i)];
                }
            }
        }
        let mut product = vec![1.0; size];
        for m in 1..size {
            let low = m.trailing_zeros() as usize;
            product[m] = product[m & (m - 1)] * joint[1 << low];
        }
        for m in 0..size {
            checked += 1;
            let excess = joint[m] - product[m];
            if excess > DEP_TOL {
                let set = (0..n).filter(|&i| m >> i & 1 == 1).collect();
                let w = Witness::Cylinder { set, side, joint: joint[m], product: product[m], excess };
                return Ok(report(Notion::Cylinder, Some(w), checked));
            }
        }
    }
    Ok(report(Notion::Cylinder, None, checked))
}

/// The realized points of `d` projected onto `vars`.
struct Projection {
    vars: Vec<usize>,
    poset: Poset,
    /// For each realized support point, the index of its projection.
    index: Vec<usize>,
}

impl Projection {
    fn new(points: &[&[i64]], vars: &[usize]) -> Self {
        let proj: Vec<Vec<i64>> = points.iter().map(|p| vars.iter().map(|&v| p[v]).collect()).collect();
        let mut distinct = proj.clone();
        distinct.sort();
        distinct.dedup();
        let index = proj.iter().map(|p| distinct.binary_search(p).expect("projection is listed")).collect();
        Projection { vars: vars.to_vec(), poset: Poset::new(distinct), index }
    }

    fn indicator(&self, member: &[bool], reflected: bool) -> MonotoneIndicator {
        let mut generators = self.poset.minimal_elements(member);
        let direction = if reflected {
            generators.iter_mut().flatten().for_each(|v| *v = -*v);
            generators.sort();
            Direction::NonIncreasing
        } else {
            Direction::NonDecreasing
        };
        MonotoneIndicator { vars: self.vars.clone(), direction, generators }
    }

    fn upsets(&self) -> Result<Vec<Vec<bool>>> {
        let mut all = Vec::new();
        self.poset.for_each_nontrivial(|m| {
            all.push(m.to_vec());
            ControlFlow::Continue(())
        })?;
        Ok(all)
    }
}

fn complement(n: usize, vars: &[usize]) -> Vec<usize> {
    (0..n).filter(|v| !vars.contains(v)).collect()
}

/// Scans `E[f(X_I) g(X_J)] ≤ E[f] E[g]` over all monotone indicators `f`, `g`
/// for each `(I, J)` in order. With `reflected`, `d` is the reflection of the
/// table under test and the reported functions are non-increasing.
fn covariance_scan(
    d: &JointTable,
    pairs: &[(Vec<usize>, Vec<usize>)],
    reflected: bool,
    checked: &mut u64,
) -> Result<Option<Witness>> {
    let (points, probs): (Vec<&[i64]>, Vec<f64>) = d.realized().unzip();
    for (vi, vj) in pairs {
        let (pi, pj) = (Projection::new(&points, vi), Projection::new(&points, vj));
        let g_sets = pj.upsets()?;
        let g_means: Vec<f64> = g_sets
            .iter()
            .map(|g| probs.iter().zip(&pj.index).filter(|(_, &b)| g[b]).map(|(p, _)| p).sum())
            .collect();
        let mut found = None;
        pi.poset.for_each_nontrivial(|f| {
            let e_f: f64 = probs.iter().zip(&pi.index).filter(|(_, &a)| f[a]).map(|(p, _)| p).sum();
            for (g, &e_g) in g_sets.iter().zip(&g_means) {
                *checked += 1;
                let e_fg: f64 = (0..probs.len()).filter(|&s| f[pi.index[s]] && g[pj.index[s]]).map(|s| probs[s]).sum();
                let excess = e_fg - e_f * e_g;
                if excess > DEP_TOL {
                    found = Some(Witness::Covariance {
                        f: pi.indicator(f, reflected),
                        g: pj.indicator(g, reflected),
                        e_fg,
                        e_f,
                        e_g,
                        excess,
                    });
                    return ControlFlow::Break(());
                }
            }
            ControlFlow::Continue(())
        })?;
        if found.is_some() {
            return Ok(found);
        }
    }
    Ok(None)
}

/// Scans `E[f(X_I) | X_J = a] ≥ E[f(X_I) | X_J = b]` for each conditioning set
/// `J` (with `I` its complement), every monotone indicator `f` and every pair
/// of realized values `a ≤ b`, `a ≠ b`.
fn regression_scan(d: &JointTable, cond_sets: &[Vec<usize>], checked: &mut u64) -> Result<Option<Witness>> {
    let (points, probs): (Vec<&[i64]>, Vec<f64>) = d.realized().unzip();
    for vj in cond_sets {
        let vi = complement(d.n(), vj);
        let (pi, pj) = (Projection::new(&points, &vi), Projection::new(&points, vj));
        let classes = pj.poset.len();
        let mut mass = vec![0.0; classes];
        let mut sums = vec![0.0; classes];
        for (s, &p) in probs.iter().enumerate() {
            mass[pj.index[s]] += p;
            sums[pj.index[s]] += p * vi.iter().map(|&v| points[s][v] as f64).sum::<f64>();
        }
        // lexicographic order of distinct values; zero-mass values never appear
        let vals = &pj.poset.points;
        let pairs: Vec<(usize, usize)> = (0..classes)
            .flat_map(|a| (0..classes).filter(move |&b| a != b).map(move |b| (a, b)))
            .filter(|&(a, b)| leq(&vals[a], &vals[b]))
            .collect();
        let mut found = None;
        let mut cond = vec![0.0; classes];
        pi.poset.for_each_nontrivial(|f| {
            cond.iter_mut().for_each(|c| *c = 0.0);
            for (s, &p) in probs.iter().enumerate() {
                if f[pi.index[s]] {
                    cond[pj.index[s]] += p;
                }
            }
            for c in 0..classes {
                cond[c] /= mass[c];
            }
            for &(a, b) in &pairs {
                *checked += 1;
                let excess = cond[b] - cond[a];
                if excess > DEP_TOL {
                    found = Some(Witness::Regression {
                        cond_vars: vj.clone(),
                        a: vals[a].clone(),
                        b: vals[b].clone(),
                        f: pi.indicator(f, false),
                        e_f_given_a: cond[a],
                        e_f_given_b: cond[b],
                        sum_given_a: sums[a] / mass[a],
                        sum_given_b: sums[b] / mass[b],
                        excess,
                    });
                    return ControlFlow::Break(());
                }
            }
            ControlFlow::Continue(())
        })?;
        if found.is_some() {
            return Ok(found);
        }
    }
    Ok(None)
}

/// Runs the scan on `d` and then on its reflection, which covers pairs of
/// non-increasing functions.
fn both_orientations(d: &JointTable, pairs: &[(Vec<usize>, Vec<usize>)], notion: Notion) -> Result<DependenceReport> {
    let mut checked = 0;
    for (table, reflected) in [(d.clone(), false), (d.reflected(), true)] {
        if let Some(w) = covariance_scan(&table, pairs, reflected, &mut checked)? {
            return Ok(report(notion, Some(w), checked));
        }
    }
    Ok(report(notion, None, checked))
}

/// 1-negative association: `g` depends on a single coordinate `X_i`, `f` on
/// the others.
pub fn check_one_na(d: &JointTable) -> Result<DependenceReport> {
    within_bounds(d, Notion::OneNa, MAX_ONE_NA_VARS, MAX_ONE_NA_VALUES)?;
    let n = d.n();
    let pairs: Vec<_> = (0..n).filter(|_| n > 1).map(|i| (complement(n, &[i]), vec![i])).collect();
    both_orientations(d, &pairs, Notion::OneNa)
}

/// Weak negative regression: conditioning on a single coordinate.
pub fn check_weak_nr(d: &JointTable) -> Result<DependenceReport> {
    within_bounds(d, Notion::WeakNr, MAX_ONE_NA_VARS, MAX_ONE_NA_VALUES)?;
    let n = d.n();
    let conds: Vec<Vec<usize>> = (0..n).filter(|_| n > 1).map(|i| vec![i]).collect();
    let mut checked = 0;
    let w = regression_scan(d, &conds, &mut checked)?;
    Ok(report(Notion::WeakNr, w, checked))
}

/// Negative association. A monotone function of `X_J` for `J` disjoint from
/// `I` is also a monotone function of `X_{[n]∖I}`, so it suffices to take
/// `J = [n]∖I`, and by symmetry `0 ∈ I`.
pub fn check_na(d: &JointTable) -> Result<DependenceReport> {
    within_bounds(d, Notion::Na, MAX_NA_VARS, MAX_NA_VALUES)?;
    let n = d.n();
    let pairs: Vec<_> = (1..1usize << n)
        .filter(|m| m & 1 == 1 && *m != (1 << n) - 1)
        .map(|m| {
            let vi: Vec<usize> = (0..n).filter(|&i| m >> i & 1 == 1).collect();
            let vj = complement(n, &vi);
            (vi, vj)
        })
        .collect();
    both_orientations(d, &pairs, Notion::Na)
}

/// Negative regression. For a conditioning set `J`, every monotone function of
/// a subset of the remaining coordinates is a monotone function of all of
/// them, so `f` ranges over indicators of `X_{[n]∖J}`.
pub fn check_nr(d: &JointTable) -> Result<DependenceReport> {
    within_bounds(d, Notion::Nr, MAX_NA_VARS, MAX_NA_VALUES)?;
    let n = d.n();
    let conds: Vec<Vec<usize>> =
        (1..(1usize << n) - 1).map(|m| (0..n).filter(|&i| m >> i & 1 == 1).collect()).collect();
    let mut checked = 0;
    let w = regression_scan(d, &conds, &mut checked)?;
    Ok(report(Notion::Nr, w, checked))
}
