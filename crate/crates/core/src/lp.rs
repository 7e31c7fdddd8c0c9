//! Small dense linear programs: two-phase tableau simplex with Bland's rule.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const PIVOT_TOL: f64 = 1e-9;
const MAX_PIVOTS: usize = 100_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Sense {
    Max,
    Min,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Relation {
    #[serde(rename = "<=")]
    Le,
    #[serde(rename = "=")]
    Eq,
    #[serde(rename = ">=")]
    Ge,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Constraint {
    pub coeffs: Vec<f64>,
    pub relation: Relation,
    pub rhs: f64,
}

/// `sense c·x` subject to the constraints and `lo ≤ x ≤ hi` (either bound may be infinite).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearProgram {
    pub sense: Sense,
    pub objective: Vec<f64>,
    pub constraints: Vec<Constraint>,
    pub bounds: Vec<(f64, f64)>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LpSolution {
    pub status: LpStatus,
    pub point: Option<Vec<f64>>,
    pub value: Option<f64>,
    /// Shadow price of each constraint: the rate of change of the optimal
    /// value per unit increase of its right-hand side.
    pub duals: Option<Vec<f64>>,
}

impl LinearProgram {
    /// An LP over `objective.len()` variables with default bounds `[0, ∞)`.
    pub fn new(sense: Sense, objective: Vec<f64>) -> Self {
        let n = objective.len();
        LinearProgram { sense, objective, constraints: Vec::new(), bounds: vec![(0.0, f64::INFINITY); n] }
    }

    pub fn constraint(mut self, coeffs: Vec<f64>, relation: Relation, rhs: f64) -> Self {
        self.constraints.push(Constraint { coeffs, relation, rhs });
        self
    }

    pub fn bound(mut self, var: usize, lo: f64, hi: f64) -> Self {
        self.bounds[var] = (lo, hi);
        self
    }

    pub fn num_vars(&self) -> usize {
        self.objective.len()
    }

    fn validate(&self) -> Result<()> {
        let n = self.num_vars();
        if self.bounds.len() != n {
            return Err(Error::input(format!("{} bounds for {n} variables", self.bounds.len())));
        }
        if self.objective.iter().any(|c| !c.is_finite()) {
            return Err(Error::input("objective coefficients must be finite"));
        }
        for (i, c) in self.constraints.iter().enumerate() {
            if c.coeffs.len() != n {
                return Err(Error::input(format!("constraint {i} has {} coefficients for {n} variables", c.coeffs.len())));
            }
            if c.coeffs.iter().any(|a| !a.is_finite()) || !c.rhs.is_finite() {
                return Err(Error::input(format!("constraint {i} has a non-finite entry")));
            }
        }
        for (j, &(lo, hi)) in self.bounds.iter().enumerate() {
            if lo.is_nan() || hi.is_nan() || lo > hi || lo == f64::INFINITY || hi == f64::NEG_INFINITY {
                return Err(Error::input(format!("variable {j} has invalid bounds [{lo}, {hi}]")));
            }
        }
        Ok(())
    }

    /// Largest violation of any constraint or bound at `x`.
    pub fn max_violation(&self, x: &[f64]) -> f64 {
        let mut worst = 0.0f64;
        for c in &self.constraints {
            let lhs: f64 = c.coeffs.iter().zip(x).map(|(a, v)| a * v).sum();
            let v = match c.relation {
                Relation::Le => lhs - c.rhs,
                Relation::Ge => c.rhs - lhs,
                Relation::Eq => (lhs - c.rhs).abs(),
            };
            worst = worst.max(v);
        }
        for (&v, &(lo, hi)) in x.iter().zip(&self.bounds) {
            worst = worst.max(lo - v).max(v - hi);
        }
        worst
    }

    pub fn objective_value(&self, x: &[f64]) -> f64 {
        self.objective.iter().zip(x).map(|(c, v)| c * v).sum()
    }
}

/// How an original variable is expressed in non-negative columns:
/// `x = offset + sign · col` (plus `- col2` for free variables).
#[derive(Debug, Clone, Copy)]
struct VarMap {
    col: usize,
    sign: f64,
    offset: f64,
    neg_col: Option<usize>,
}

struct Tableau {
    rows: Vec<Vec<f64>>,
    basis: Vec<usize>,
    width: usize,
}

impl Tableau {
    fn rhs(&self, r: usize) -> f64 {
        self.rows[r][self.width]
    }

    fn pivot(&mut self, r: usize, c: usize, obj: &mut [f64]) {
        let p = self.rows[r][c];
        self.rows[r].iter_mut().for_each(|v| *v /= p);
        let pivot_row = self.rows[r].clone();
        for (i, row) in self.rows.iter_mut().enumerate() {
            if i != r {
                let f = row[c];
                if f != 0.0 {
                    row.iter_mut().zip(&pivot_row).for_each(|(v, pv)| *v -= f * pv);
                }
            }
        }
        let f = obj[c];
        if f != 0.0 {
            obj.iter_mut().zip(&pivot_row).for_each(|(v, pv)| *v -= f * pv);
        }
        self.basis[r] = c;
    }

    /// Minimizes the objective row (reduced costs, with `-value` in the last
    /// slot) over columns for which `allowed` holds. Returns false if unbounded.
    fn optimize(&mut self, obj: &mut [f64], allowed: impl Fn(usize) -> bool) -> Result<bool> {
        for _ in 0..MAX_PIVOTS {
            // Bland: lowest-index improving column, then lowest-index leaving basic variable
            let Some(c) = (0..self.width).find(|&j| allowed(j) && obj[j] < -PIVOT_TOL) else {
                return Ok(true);
            };
            let mut best: Option<(usize, f64)> = None;
            for r in 0..self.rows.len() {
                let a = self.rows[r][c];
                if a > PIVOT_TOL {
                    let ratio = self.rhs(r) / a;
                    let better = match best {
                        None => true,
                        Some((br, bv)) => ratio < bv - 1e-12 || (ratio <= bv + 1e-12 && self.basis[r] < self.basis[br]),
                    };
                    if better {
                        best = Some((r, ratio));
                    }
                }
            }
            let Some((r, _)) = best else { return Ok(false) };
            self.pivot(r, c, obj);
        }
        Err(Error::Internal(format!("simplex did not terminate within {MAX_PIVOTS} pivots")))
    }
}

/// Solves `lp`. Deterministic for a fixed input.
pub fn solve(lp: &LinearProgram) -> Result<LpSolution> {
    lp.validate()?;
    let n = lp.num_vars();

    // columns for the original variables
    let mut maps = Vec::with_capacity(n);
    let mut cols = 0usize;
    let mut bound_rows: Vec<(usize, f64)> = Vec::new();
    for &(lo, hi) in &lp.bounds {
        let col = cols;
        cols += 1;
        let map = if lo.is_finite() {
            if hi.is_finite() {
                bound_rows.push((col, hi - lo));
            }
            VarMap { col, sign: 1.0, offset: lo, neg_col: None }
        } else if hi.is_finite() {
            VarMap { col, sign: -1.0, offset: hi, neg_col: None }
        } else {
            cols += 1;
            VarMap { col, sign: 1.0, offset: 0.0, neg_col: Some(col + 1) }
        };
        maps.push(map);
    }
    let structural = cols;

    // constraint rows over the structural columns, as (coeffs, relation, rhs)
    let mut rows: Vec<(Vec<f64>, Relation, f64)> = Vec::new();
    for c in &lp.constraints {
        let mut a = vec![0.0; structural];
        let mut rhs = c.rhs;
        for (j, m) in maps.iter().enumerate() {
            let v = c.coeffs[j];
            a[m.col] += v * m.sign;
            if let Some(nc) = m.neg_col {
                a[nc] -= v;
            }
            rhs -= v * m.offset;
        }
        rows.push((a, c.relation, rhs));
    }
    for &(col, cap) in &bound_rows {
        let mut a = vec![0.0; structural];
        a[col] = 1.0;
        rows.push((a, Relation::Le, cap));
    }

    // make every right-hand side non-negative
    let mut flipped = vec![false; rows.len()];
    for (i, (a, rel, rhs)) in rows.iter_mut().enumerate() {
        if *rhs < 0.0 {
            a.iter_mut().for_each(|v| *v = -*v);
            *rhs = -*rhs;
            *rel = match *rel {
                Relation::Le => Relation::Ge,
                Relation::Ge => Relation::Le,
                Relation::Eq => Relation::Eq,
            };
            flipped[i] = true;
        }
    }

    // slack / surplus columns, then artificials
    let m = rows.len();
    let slack_count = rows.iter().filter(|(_, r, _)| *r != Relation::Eq).count();
    let art_count = rows.iter().filter(|(_, r, _)| *r != Relation::Le).count();
    let art_start = structural + slack_count;
    let width = art_start + art_count;
    let mut tab = Tableau { rows: Vec::with_capacity(m), basis: Vec::with_capacity(m), width };
    // the column that started as the unit vector of each row
    let mut unit_col = Vec::with_capacity(m);
    let (mut next_slack, mut next_art) = (structural, art_start);
    for (a, rel, rhs) in &rows {
        let mut row = vec![0.0; width + 1];
        row[..structural].copy_from_slice(a);
        row[width] = *rhs;
        match rel {
            Relation::Le => {
                row[next_slack] = 1.0;
                tab.basis.push(next_slack);
                unit_col.push(next_slack);
                next_slack += 1;
            }
            Relation::Ge => {
                row[next_slack] = -1.0;
                next_slack += 1;
                row[next_art] = 1.0;
                tab.basis.push(next_art);
                unit_col.push(next_art);
                next_art += 1;
            }
            Relation::Eq => {
                row[next_art] = 1.0;
                tab.basis.push(next_art);
                unit_col.push(next_art);
                next_art += 1;
            }
        }
        tab.rows.push(row);
    }

    // phase 1: minimize the sum of artificials
    if art_count > 0 {
        let mut obj = vec![0.0; width + 1];
        obj[art_start..width].iter_mut().for_each(|v| *v = 1.0);
        for r in 0..m {
            if tab.basis[r] >= art_start {
                let row = tab.rows[r].clone();
                obj.iter_mut().zip(&row).for_each(|(v, a)| *v -= a);
            }
        }
        tab.optimize(&mut obj, |_| true)?;
        let infeasibility = -obj[width];
        if infeasibility > 1e-8 * (1.0 + rows.iter().map(|r| r.2).fold(0.0, f64::max)) {
            return Ok(LpSolution { status: LpStatus::Infeasible, point: None, value: None, duals: None });
        }
        // drive zero-level artificials out of the basis where possible
        for r in 0..m {
            if tab.basis[r] >= art_start {
                if let Some(c) = (0..art_start).find(|&j| tab.rows[r][j].abs() > PIVOT_TOL) {
                    tab.pivot(r, c, &mut obj);
                }
            }
        }
    }

    // phase 2 on the minimization form
    let flip = if lp.sense == Sense::Max { -1.0 } else { 1.0 };
    let mut cost = vec![0.0; width + 1];
    for (j, mp) in maps.iter().enumerate() {
        cost[mp.col] += flip * lp.objective[j] * mp.sign;
        if let Some(nc) = mp.neg_col {
            cost[nc] -= flip * lp.objective[j];
        }
    }
    let mut obj = cost.clone();
    for r in 0..m {
        let cb = cost[tab.basis[r]];
        if cb != 0.0 {
            let row = tab.rows[r].clone();
            obj.iter_mut().zip(&row).for_each(|(v, a)| *v -= cb * a);
        }
    }
    if !tab.optimize(&mut obj, |j| j < art_start)? {
        return Ok(LpSolution { status: LpStatus::Unbounded, point: None, value: None, duals: None });
    }

    let mut colval = vec![0.0; width];
    for r in 0..m {
        colval[tab.basis[r]] = tab.rhs(r);
    }
    let point: Vec<f64> = maps
        .iter()
        .map(|mp| {
            let mut v = mp.offset + mp.sign * colval[mp.col];
            if let Some(nc) = mp.neg_col {
                v -= colval[nc];
            }
            v
        })
        .collect();
    let value = lp.objective_value(&point);
    // y = c_B B^{-1}; the unit column of row i holds B^{-1} e_i
    let duals = (0..lp.constraints.len())
        .map(|i| {
            let y: f64 = (0..m).map(|r| cost[tab.basis[r]] * tab.rows[r][unit_col[i]]).sum();
            let y = if flipped[i] { -y } else { y };
            flip * y
        })
        .collect();
    Ok(LpSolution { status: LpStatus::Optimal, point: Some(point), value: Some(value), duals: Some(duals) })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn opt(lp: &LinearProgram) -> (Vec<f64>, f64) {
        let s = solve(lp).unwrap();
        assert_eq!(s.status, LpStatus::Optimal, "{lp:?}");
        (s.point.unwrap(), s.value.unwrap())
    }

    #[test]
    fn single_constraint() {
        let lp = LinearProgram::new(Sense::Max, vec![1.0]).constraint(vec![1.0], Relation::Le, 1.0).bound(0, 0.0, 10.0);
        let (x, v) = opt(&lp);
        assert!((x[0] - 1.0).abs() < 1e-12 && (v - 1.0).abs() < 1e-12);
        assert!((solve(&lp).unwrap().duals.unwrap()[0] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn simplex_face() {
        let lp = LinearProgram::new(Sense::Max, vec![1.0, 1.0])
            .constraint(vec![1.0, 1.0], Relation::Le, 1.0)
            .bound(0, 0.0, 1.0)
            .bound(1, 0.0, 1.0);
        let (x, v) = opt(&lp);
        assert!((v - 1.0).abs() < 1e-12);
        assert!(lp.max_violation(&x) < 1e-12);
    }

    #[test]
    fn statuses() {
        let inf = LinearProgram::new(Sense::Max, vec![1.0])
            .constraint(vec![1.0], Relation::Ge, 2.0)
            .constraint(vec![1.0], Relation::Le, 1.0);
        assert_eq!(solve(&inf).unwrap().status, LpStatus::Infeasible);
        let unb = LinearProgram::new(Sense::Max, vec![1.0, -1.0]).constraint(vec![1.0, -1.0], Relation::Ge, 0.0);
        assert_eq!(solve(&unb).unwrap().status, LpStatus::Unbounded);
        let bad = LinearProgram::new(Sense::Max, vec![1.0]).constraint(vec![1.0, 2.0], Relation::Le, 1.0);
        assert!(matches!(solve(&bad), Err(Error::Input(_))));
        let bad = LinearProgram::new(Sense::Max, vec![1.0]).bound(0, 2.0, 1.0);
        assert!(matches!(solve(&bad), Err(Error::Input(_))));
    }

    #[test]
    fn equalities_negative_rhs_and_free_variables() {
        // min x - y, x + y = -1, x ∈ (-∞, ∞), y ∈ (-∞, 3]
        let lp = LinearProgram::new(Sense::Min, vec![1.0, -1.0])
            .constraint(vec![1.0, 1.0], Relation::Eq, -1.0)
            .bound(0, f64::NEG_INFINITY, f64::INFINITY)
            .bound(1, f64::NEG_INFINITY, 3.0);
        let (x, v) = opt(&lp);
        assert!((x[1] - 3.0).abs() < 1e-12 && (x[0] + 4.0).abs() < 1e-12 && (v + 7.0).abs() < 1e-12);
        let d = solve(&lp).unwrap().duals.unwrap();
        // raising the rhs by t moves x to -4 + t, the value by +t
        assert!((d[0] - 1.0).abs() < 1e-12, "{d:?}");
    }

    #[test]
    fn degenerate_lp_terminates() {
        // a classic cycling example for the textbook largest-coefficient rule
        let lp = LinearProgram::new(Sense::Max, vec![10.0, -57.0, -9.0, -24.0])
            .constraint(vec![0.5, -5.5, -2.5, 9.0], Relation::Le, 0.0)
            .constraint(vec![0.5, -1.5, -0.5, 1.0], Relation::Le, 0.0)
            .constraint(vec![1.0, 0.0, 0.0, 0.0], Relation::Le, 1.0);
        let (_, v) = opt(&lp);
        assert!((v - 1.0).abs() < 1e-9);
    }

    #[test]
    fn redundant_equalities() {
        let lp = LinearProgram::new(Sense::Max, vec![1.0, 2.0])
            .constraint(vec![1.0, 1.0], Relation::Eq, 1.0)
            .constraint(vec![2.0, 2.0], Relation::Eq, 2.0)
            .bound(0, 0.0, 1.0)
            .bound(1, 0.0, 1.0);
        let (x, v) = opt(&lp);
        assert!((v - 2.0).abs() < 1e-12 && (x[1] - 1.0).abs() < 1e-12);
    }

    proptest! {
        #[test]
        fn deterministic_and_feasible(
            c in prop::collection::vec(-3.0f64..3.0, 3),
            a in prop::collection::vec(-2.0f64..2.0, 6),
            b in prop::collection::vec(0.0f64..3.0, 2),
        ) {
            let lp = LinearProgram::new(Sense::Max, c)
                .constraint(a[0..3].to_vec(), Relation::Le, b[0])
                .constraint(a[3..6].to_vec(), Relation::Ge, -b[1])
                .bound(0, 0.0, 1.0).bound(1, -1.0, 2.0).bound(2, 0.0, 5.0);
            let s1 = solve(&lp).unwrap();
            let s2 = solve(&lp).unwrap();
            prop_assert_eq!(&s1, &s2);
            prop_assert_eq!(s1.status, LpStatus::Optimal);
            let x = s1.point.unwrap();
            prop_assert!(lp.max_violation(&x) < 1e-8);
            prop_assert!((lp.objective_value(&x) - s1.value.unwrap()).abs() < 1e-8);
        }
    }
}
