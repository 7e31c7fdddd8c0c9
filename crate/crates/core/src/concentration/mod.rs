//! Exponential-moment domination, lower-tail experiments for submodular
//! functions under dependent rounding, and read-k family bounds.

mod readk;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::negdep::JointTable;
use crate::rounding::{sample_map, RoundingScheme};
use crate::setfn::{
    is_monotone_bruteforce, is_submodular_bruteforce, marginal_range_bruteforce, multilinear_exact, multilinear_mc,
    FractionalVector, FunctionKind, SharedFn, Subset, MAX_BRUTE_FORCE, MAX_EXACT_MULTILINEAR,
};

pub use readk::{
    holder_lemma_check, kl_divergence, read_k_bounds, read_k_factor, run_read_k_tail, BlockFunction, BlockSpec,
    HolderCheck, ReadKFamily, ReadKFamilySpec, ReadKReport, ReadKRow, ReadKSource, Tail, Tails,
};

/// Tail events are widened by this relative amount so that outcomes landing
/// on the threshold up to rounding are counted.
pub const EVENT_SLACK: f64 = 1e-9;

/// Samples used for `μ0` when the ground set is too large for exact enumeration.
pub const MU0_MC_SAMPLES: usize = 200_000;

fn check_delta(delta: f64) -> Result<()> {
    if !(delta > 0.0 && delta <= 1.0) {
        return Err(Error::input(format!("delta = {delta} must lie in (0, 1]")));
    }
    Ok(())
}

/// `exp(-μ0 δ² / 2)`.
pub fn chernoff_lower_bound(mu0: f64, delta: f64) -> Result<f64> {
    check_delta(delta)?;
    if !(mu0 >= 0.0 && mu0.is_finite()) {
        return Err(Error::input(format!("mu0 = {mu0} must be a finite non-negative number")));
    }
    Ok((-mu0 * delta * delta / 2.0).exp())
}

/// `E[exp(λ f(X))]` for the binary vector `X ~ d`, by exact summation.
pub fn exponential_moment_exact(d: &JointTable, f: &dyn crate::setfn::SetFunction, lambda: f64) -> Result<f64> {
    if d.n() != f.n() {
        return Err(Error::input(format!("table has {} variables, function has {} elements", d.n(), f.n())));
    }
    if !d.is_binary() {
        return Err(Error::input("exponential moments need a binary table"));
    }
    if lambda == 0.0 {
        return Ok(1.0);
    }
    Ok(d.realized()
        .map(|(p, q)| {
            let bits: Vec<bool> = p.iter().map(|&v| v == 1).collect();
            q * (lambda * f.value(&Subset::from_bools(&bits))).exp()
        })
        .sum())
}

#[derive(Debug, Clone)]
pub struct TailExperiment {
    pub f: SharedFn,
    pub x: FractionalVector,
    pub scheme: RoundingScheme,
    pub deltas: Vec<f64>,
    pub trials: u64,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TailRow {
    pub delta: f64,
    /// Fraction of trials with `f ≤ (1-δ) μ0`.
    pub empirical: f64,
    pub stderr: f64,
    pub bound: f64,
    /// `empirical ≤ bound + 3·stderr`.
    pub ok: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TailReport {
    /// The multilinear extension at `x`, against which tails are measured.
    pub mu0: f64,
    /// Zero when `mu0` was computed exactly.
    pub mu0_stderr: f64,
    /// Mean of `f` over the sampled outcomes, for comparison with `mu0`.
    pub empirical_mean: f64,
    pub trials: u64,
    pub rows: Vec<TailRow>,
}

/// Verifies that `f` is monotone submodular with every marginal in `[0, 1]`.
/// Exhaustive up to 16 elements; beyond that only coverage functions with
/// singleton values at most 1 are accepted, which bounds every marginal.
pub fn check_unit_marginals(f: &dyn crate::setfn::SetFunction) -> Result<()> {
    let n = f.n();
    if n <= MAX_BRUTE_FORCE {
        if !is_monotone_bruteforce(f)? {
            return Err(Error::input("tail experiments need a monotone function"));
        }
        if !is_submodular_bruteforce(f)? {
            return Err(Error::input("tail experiments need a submodular function"));
        }
        let r = marginal_range_bruteforce(f)?;
        if r.max > 1.0 + 1e-12 {
            let (e, s) = r.max_at;
            return Err(Error::input(format!("marginal f({e} | {s:?}) = {} exceeds 1", r.max)));
        }
        return Ok(());
    }
    if !matches!(f.kind(), FunctionKind::Coverage | FunctionKind::WeightedCoverage) {
        return Err(Error::input(format!(
            "cannot certify unit marginals of a {:?} function on {n} elements",
            f.kind()
        )));
    }
    let empty = f.value(&Subset::empty(n));
    for e in 0..n {
        let m = f.value(&Subset::empty(n).with(e)) - empty;
        if m > 1.0 + 1e-12 {
            return Err(Error::input(format!("marginal f({e} | []) = {m} exceeds 1")));
        }
    }
    Ok(())
}

/// `μ0 = F(x)`, exact when possible. Returns the value and its standard error.
pub fn mu0(f: &dyn crate::setfn::SetFunction, x: &FractionalVector, seed: u64) -> Result<(f64, f64)> {
    if f.n() <= MAX_EXACT_MULTILINEAR {
        Ok((multilinear_exact(f, x)?, 0.0))
    } else {
        let est = multilinear_mc(f, x, MU0_MC_SAMPLES, crate::rng::derive(seed, u64::MAX))?;
        Ok((est.estimate, est.stderr))
    }
}

pub fn binomial_stderr(p: f64, trials: u64) -> f64 {
    (p * (1.0 - p) / trials as f64).sqrt()
}

/// Rounds `x` `trials` times and compares the lower-tail frequency of `f`
/// at each `δ` with `exp(-μ0 δ² / 2)`.
pub fn run_tail_experiment(exp: &TailExperiment) -> Result<TailReport> {
    if exp.trials == 0 {
        return Err(Error::input("a tail experiment needs at least one trial"));
    }
    if exp.x.len() != exp.f.n() {
        return Err(Error::input(format!(
            "x has {} coordinates, the function has {} elements",
            exp.x.len(),
            exp.f.n()
        )));
    }
    for &d in &exp.deltas {
        check_delta(d)?;
    }
    check_unit_marginals(exp.f.as_ref())?;
    let (mu0, mu0_stderr) = mu0(exp.f.as_ref(), &exp.x, exp.seed)?;
    let f = &exp.f;
    let values = sample_map(&exp.x, &exp.scheme, exp.trials, exp.seed, |o| f.value(&Subset::from_bools(o)))?;
    let t = exp.trials as f64;
    let empirical_mean = values.iter().sum::<f64>() / t;
    let rows = exp
        .deltas
        .iter()
        .map(|&delta| {
            let threshold = (1.0 - delta) * mu0 + EVENT_SLACK * mu0.max(1.0);
            let hits = values.iter().filter(|&&v| v <= threshold).count();
            let empirical = hits as f64 / t;
            let stderr = binomial_stderr(empirical, exp.trials);
            let bound = chernoff_lower_bound(mu0, delta).expect("delta validated above");
            TailRow { delta, empirical, stderr, bound, ok: empirical <= bound + 3.0 * stderr }
        })
        .collect();
    Ok(TailReport { mu0, mu0_stderr, empirical_mean, trials: exp.trials, rows })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::negdep::product_of_marginals;
    use crate::rounding::{exact_outcome_distribution, PairingPolicy};
    use crate::setfn::{Coverage, TableFunction};
    use std::sync::Arc;

    #[test]
    fn chernoff_examples() {
        assert_eq!(chernoff_lower_bound(0.0, 0.7).unwrap(), 1.0);
        assert!((chernoff_lower_bound(1.25, 0.4).unwrap() - (-0.1f64).exp()).abs() < 1e-15);
        assert!((chernoff_lower_bound(1.25, 0.4).unwrap() - 0.904837).abs() < 1e-6);
        assert!(chernoff_lower_bound(2.0, 0.4).unwrap() < chernoff_lower_bound(1.0, 0.4).unwrap());
        assert!(chernoff_lower_bound(1.0, 0.5).unwrap() < chernoff_lower_bound(1.0, 0.4).unwrap());
        assert!(chernoff_lower_bound(1.0, 0.0).is_err());
        assert!(chernoff_lower_bound(1.0, 1.5).is_err());
        assert!(chernoff_lower_bound(1.0, 1.0).is_ok());
    }

    fn two_set_cover() -> Coverage {
        Coverage::new(2, None, vec![vec![0], vec![0, 1]]).unwrap()
    }

    #[test]
    fn exponential_moment_edges() {
        let f = two_set_cover();
        let d = JointTable::independent_bits(&[0.3, 0.6]).unwrap();
        assert_eq!(exponential_moment_exact(&d, &f, 0.0).unwrap(), 1.0);
        let pm = JointTable::point_mass(vec![1, 0]).unwrap();
        assert_eq!(exponential_moment_exact(&pm, &f, -0.7).unwrap(), (-0.7f64).exp());
        let wrong = JointTable::independent_bits(&[0.3]).unwrap();
        assert!(exponential_moment_exact(&wrong, &f, 1.0).is_err());
    }

    #[test]
    fn dependent_moment_dominated_on_a_rounding_table() {
        let f = Coverage::new(4, Some(vec![0.4, 0.3, 0.2, 0.1]), vec![vec![0, 1], vec![1, 2], vec![2, 3], vec![0, 3]])
            .unwrap();
        let x = FractionalVector::new(vec![0.3, 0.8, 0.45, 0.6]).unwrap();
        let d = exact_outcome_distribution(&x, &PairingPolicy::sweep(4)).unwrap();
        let p = product_of_marginals(&d);
        for lambda in [-2.0, -1.0, -0.5] {
            let dep = exponential_moment_exact(&d, &f, lambda).unwrap();
            let ind = exponential_moment_exact(&p, &f, lambda).unwrap();
            assert!(dep <= ind + 1e-12, "{lambda}: {dep} > {ind}");
        }
    }

    #[test]
    fn precondition_rejects_large_marginals() {
        let f: SharedFn = Arc::new(Coverage::new(2, Some(vec![2.0, 1.0]), vec![vec![0], vec![1]]).unwrap());
        let exp = TailExperiment {
            f,
            x: FractionalVector::new(vec![0.5, 0.5]).unwrap(),
            scheme: RoundingScheme::Independent,
            deltas: vec![0.5],
            trials: 10,
            seed: 0,
        };
        let err = run_tail_experiment(&exp).unwrap_err().to_string();
        assert!(err.contains("f(0 | [])"), "{err}");
        let sq = TableFunction::from_fn(2, |m| (m.count_ones() as f64).powi(2) / 4.0).unwrap();
        assert!(check_unit_marginals(&sq).is_err());
    }

    #[test]
    fn delta_one_measures_the_zero_mass() {
        // f > 0 on every nonempty set, so f ≤ 0 exactly when nothing is chosen
        let f: SharedFn = Arc::new(Coverage::modular(&[0.5, 0.5, 0.5]).unwrap());
        let x = FractionalVector::new(vec![0.5, 0.2, 0.1]).unwrap();
        let trials = 50_000;
        let exp = TailExperiment {
            f,
            x,
            scheme: RoundingScheme::Independent,
            deltas: vec![1.0],
            trials,
            seed: 3,
        };
        let r = run_tail_experiment(&exp).unwrap();
        let zero_mass = 0.5 * 0.8 * 0.9;
        assert!((r.rows[0].empirical - zero_mass).abs() < 4.0 * binomial_stderr(zero_mass, trials));
        assert!(r.rows[0].ok);
        assert!((r.mu0 - 0.4).abs() < 1e-15);
    }

    #[test]
    fn experiments_are_seed_deterministic() {
        let f: SharedFn = Arc::new(Coverage::new(2, Some(vec![0.5, 0.5]), vec![vec![0], vec![0, 1]]).unwrap());
        let exp = TailExperiment {
            f,
            x: FractionalVector::new(vec![0.5, 0.5]).unwrap(),
            scheme: RoundingScheme::srinivasan_sweep(2),
            deltas: vec![0.1, 0.5],
            trials: 1000,
            seed: 42,
        };
        assert_eq!(run_tail_experiment(&exp).unwrap(), run_tail_experiment(&exp).unwrap());
    }
}
