//! Finite joint distributions and exhaustive checkers for negative dependence.
//!
//! Every checker quantifies over monotone 0/1 test functions only: a monotone
//! real function is a non-negative combination of monotone indicators plus a
//! constant, and the covariance-type forms being checked are bilinear with
//! constants contributing nothing.

mod checks;
mod table;
mod upsets;

use serde::{Deserialize, Serialize};

pub use checks::{
    check, check_cylinder, check_na, check_nr, check_one_na, check_weak_nr, MAX_CYLINDER_VARS, MAX_NA_VALUES,
    MAX_NA_VARS, MAX_ONE_NA_VALUES, MAX_ONE_NA_VARS,
};
pub use table::{counterexample_distribution, marginals, product_of_marginals, JointTable, Marginal, PROB_SUM_TOL};
pub use upsets::MAX_UPSETS;

/// Absolute slack for every dependence inequality.
pub const DEP_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Notion {
    Cylinder,
    OneNa,
    WeakNr,
    Na,
    Nr,
}

impl Notion {
    pub const ALL: [Notion; 5] = [Notion::Cylinder, Notion::OneNa, Notion::WeakNr, Notion::Na, Notion::Nr];

    pub fn name(self) -> &'static str {
        match self {
            Notion::Cylinder => "cylinder",
            Notion::OneNa => "one_na",
            Notion::WeakNr => "weak_nr",
            Notion::Na => "na",
            Notion::Nr => "nr",
        }
    }
}

impl std::str::FromStr for Notion {
    type Err = crate::Error;

    fn from_str(s: &str) -> crate::Result<Self> {
        Notion::ALL
            .into_iter()
            .find(|n| n.name() == s)
            .ok_or_else(|| crate::Error::input(format!("unknown notion {s:?} (expected cylinder, one_na, weak_nr, na or nr)")))
    }
}

impl std::fmt::Display for Notion {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    NonDecreasing,
    NonIncreasing,
}

/// A monotone 0/1 function of `X_vars`.
///
/// Non-decreasing: 1 iff `X_vars` dominates some generator (the minimal
/// elements of the up-set). Non-increasing: 1 iff `X_vars` is dominated by
/// some generator (the maximal elements of the down-set).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MonotoneIndicator {
    pub vars: Vec<usize>,
    pub direction: Direction,
    pub generators: Vec<Vec<i64>>,
}

impl MonotoneIndicator {
    pub fn eval(&self, point: &[i64]) -> bool {
        let proj: Vec<i64> = self.vars.iter().map(|&v| point[v]).collect();
        match self.direction {
            Direction::NonDecreasing => self.generators.iter().any(|g| upsets::leq(g, &proj)),
            Direction::NonIncreasing => self.generators.iter().any(|g| upsets::leq(&proj, g)),
        }
    }

    pub fn is_antichain(&self) -> bool {
        let g = &self.generators;
        (0..g.len()).all(|i| (0..g.len()).all(|j| i == j || !upsets::leq(&g[i], &g[j])))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CylinderSide {
    /// `E[Π X_i] ≤ Π E[X_i]`
    Ones,
    /// `E[Π (1 - X_i)] ≤ Π E[1 - X_i]`
    Zeros,
}

/// Data exhibiting a violated inequality. `excess` is the amount by which
/// the left side exceeds the right side.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Witness {
    Cylinder {
        set: Vec<usize>,
        side: CylinderSide,
        joint: f64,
        product: f64,
        excess: f64,
    },
    /// `E[f g] > E[f] E[g]`.
    Covariance {
        f: MonotoneIndicator,
        g: MonotoneIndicator,
        e_fg: f64,
        e_f: f64,
        e_g: f64,
        excess: f64,
    },
    /// `E[f | X_J = b] > E[f | X_J = a]` for `a ≤ b`. The `sum_given_*`
    /// fields are the conditional means of `Σ_{i ∈ f.vars} X_i`, for context.
    Regression {
        cond_vars: Vec<usize>,
        a: Vec<i64>,
        b: Vec<i64>,
        f: MonotoneIndicator,
        e_f_given_a: f64,
        e_f_given_b: f64,
        sum_given_a: f64,
        sum_given_b: f64,
        excess: f64,
    },
}

impl Witness {
    pub fn excess(&self) -> f64 {
        match self {
            Witness::Cylinder { excess, .. } | Witness::Covariance { excess, .. } | Witness::Regression { excess, .. } => {
                *excess
            }
        }
    }

    /// Recomputes the violation directly from `d`, independent of the
    /// checker's bookkeeping.
    pub fn reevaluate(&self, d: &JointTable) -> f64 {
        match self {
            Witness::Cylinder { set, side, .. } => {
                let bit = |p: &[i64], i: usize| match side {
                    CylinderSide::Ones => p[i] as f64,
                    CylinderSide::Zeros => 1.0 - p[i] as f64,
                };
                let joint = d.expectation(|p| set.iter().map(|&i| bit(p, i)).product());
                let product: f64 = set.iter().map(|&i| d.expectation(|p| bit(p, i))).product();
                joint - product
            }
            Witness::Covariance { f, g, .. } => {
                let ind = |h: &MonotoneIndicator, p: &[i64]| if h.eval(p) { 1.0 } else { 0.0 };
                let e_fg = d.expectation(|p| ind(f, p) * ind(g, p));
                e_fg - d.expectation(|p| ind(f, p)) * d.expectation(|p| ind(g, p))
            }
            Witness::Regression { cond_vars, a, b, f, .. } => {
                let given = |v: &[i64]| {
                    let hit = |p: &[i64]| cond_vars.iter().zip(v).all(|(&j, &x)| p[j] == x);
                    let mass = d.expectation(|p| if hit(p) { 1.0 } else { 0.0 });
                    d.expectation(|p| if hit(p) && f.eval(p) { 1.0 } else { 0.0 }) / mass
                };
                given(b) - given(a)
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DependenceReport {
    pub notion: Notion,
    pub holds: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub witness: Option<Witness>,
    pub inequalities_checked: u64,
}
