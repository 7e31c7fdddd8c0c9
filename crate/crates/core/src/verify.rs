//! The property suite: thirteen seeded checks covering the dependence
//! checkers, the rounding scheme, the concentration bounds, the multilinear
//! extension and the multi-objective solver. Each check reports a pass/fail
//! line with a short summary and its wall-clock time.

use std::sync::Arc;
use std::time::Instant;

use rayon::prelude::*;
use serde::Serialize;

use crate::concentration::{
    exponential_moment_exact, holder_lemma_check, run_read_k_tail, run_tail_experiment, BlockFunction, ReadKFamily,
    ReadKSource, TailExperiment, Tails,
};
use crate::corpus::{
    binary_table_corpus, dyadic_point_with_sum, random_coverage, random_instance, random_point, random_read_k_family,
    random_submodular, random_supermodular, unit_coverage,
};
use crate::error::Result;
use crate::multiobj::{brute_force_feasibility, default_steps, solve, stage1_preprocess, MultiObjInstance};
use crate::negdep::{
    check_cylinder, check_na, check_nr, check_one_na, check_weak_nr, counterexample_distribution, marginals,
    product_of_marginals, JointTable, Witness,
};
use crate::rng;
use crate::rounding::{exact_outcome_distribution, sample_map, PairingPolicy, RoundingScheme};
use crate::setfn::{multilinear_exact, multilinear_mc, Coverage, FractionalVector, SetFunction, SharedFn, Subset};

/// Seed the suite uses unless told otherwise.
pub const DEFAULT_SEED: u64 = 20_240_901;

/// `(id, title, time budget in seconds)`.
pub const CRITERIA: [(u8, &str, f64); 13] = [
    (1, "counterexample: 1-NA holds, weak NR fails", 1.0),
    (2, "binary tables: 1-NA and weak NR agree", 60.0),
    (3, "hierarchy: NA => 1-NA, NR => weak NR, 1-NA => cylinder", 60.0),
    (4, "dependent rounding: marginals, sums and NA exact", 120.0),
    (5, "exponential moments dominated by independence", 120.0),
    (6, "Chernoff lower tail under dependent rounding", 60.0),
    (7, "dependent rounding preserves an integral sum", 60.0),
    (8, "Holder inequality for read-2 families", 60.0),
    (9, "read-k tails for modular blocks", 60.0),
    (10, "stage-1 size and residual-marginal bounds", 30.0),
    (11, "certificates never contradict brute force", 600.0),
    (12, "solver meets the guarantee with constant probability", 600.0),
    (13, "multilinear extension: exact and sampled", 60.0),
];

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CriterionReport {
    pub id: u8,
    pub title: String,
    pub passed: bool,
    pub detail: String,
    pub seconds: f64,
    pub budget_seconds: f64,
}

impl CriterionReport {
    /// `PASS [ 3] title (0.42 s / 60 s): detail`
    pub fn line(&self) -> String {
        format!(
            "{} [{:>2}] {} ({:.2} s / {} s): {}",
            if self.passed { "PASS" } else { "FAIL" },
            self.id,
            self.title,
            self.seconds,
            self.budget_seconds,
            self.detail
        )
    }
}

/// Runs one criterion. Over-budget runs are reported as failures.
pub fn run_criterion(id: u8, seed: u64) -> Result<CriterionReport> {
    let &(_, title, budget) = CRITERIA
        .iter()
        .find(|c| c.0 == id)
        .ok_or_else(|| crate::Error::Input(format!("no criterion {id}; ids run 1..=13")))?;
    let start = Instant::now();
    let (ok, detail) = match id {
        1 => counterexample()?,
        2 => binary_equivalence(seed)?,
        3 => hierarchy(seed)?,
        4 => rounding_exactness(seed)?,
        5 => moment_domination(seed)?,
        6 => chernoff_tail(seed)?,
        7 => cardinality(seed)?,
        8 => holder(seed)?,
        9 => read_k_tails(seed)?,
        10 => stage_one(seed)?,
        11 => certificate_soundness(seed)?,
        12 => success_probability(seed)?,
        _ => multilinear(seed)?,
    };
    let seconds = start.elapsed().as_secs_f64();
    let detail = if seconds > budget { format!("{detail}; over the {budget} s budget") } else { detail };
    Ok(CriterionReport { id, title: title.to_string(), passed: ok && seconds <= budget, detail, seconds, budget_seconds: budget })
}

pub fn run_all(seed: u64) -> Result<Vec<CriterionReport>> {
    CRITERIA.iter().map(|c| run_criterion(c.0, seed)).collect()
}

type Outcome = Result<(bool, String)>;

fn counterexample() -> Outcome {
    let d = counterexample_distribution();
    let one_na = check_one_na(&d)?;
    let weak = check_weak_nr(&d)?;
    let witness_ok = match &weak.witness {
        Some(w @ Witness::Regression { cond_vars, a, b, sum_given_a, sum_given_b, .. }) => {
            cond_vars == &[0]
                && a == &[1]
                && b == &[2]
                && *sum_given_a == 1.0
                && *sum_given_b == 2.0
                && w.reevaluate(&d) > 0.0
        }
        _ => false,
    };
    let ok = one_na.holds && !weak.holds && witness_ok;
    Ok((ok, format!("1-NA holds = {}, weak NR holds = {}, witness matches = {witness_ok}", one_na.holds, weak.holds)))
}

fn binary_equivalence(seed: u64) -> Outcome {
    let corpus = binary_table_corpus(1000, 4, seed);
    let results: Vec<(bool, bool)> = corpus
        .par_iter()
        .map(|d| Ok((check_one_na(d)?.holds, check_weak_nr(d)?.holds)))
        .collect::<Result<_>>()?;
    let disagree = results.iter().filter(|(a, b)| a != b).count();
    let holding = results.iter().filter(|(a, _)| *a).count();
    Ok((disagree == 0, format!("{} tables, {holding} 1-NA, {disagree} disagreements", corpus.len())))
}

fn hierarchy(seed: u64) -> Outcome {
    let corpus = binary_table_corpus(1000, 4, seed);
    let flags: Vec<[bool; 5]> = corpus
        .par_iter()
        .map(|d| {
            Ok([check_na(d)?.holds, check_one_na(d)?.holds, check_nr(d)?.holds, check_weak_nr(d)?.holds, check_cylinder(d)?.holds])
        })
        .collect::<Result<_>>()?;
    let violations = flags.iter().filter(|[na, one, nr, weak, cyl]| (*na && !one) || (*nr && !weak) || (*one && !cyl)).count();
    let na = flags.iter().filter(|f| f[0]).count();
    let nr = flags.iter().filter(|f| f[2]).count();
    Ok((violations == 0, format!("{} tables, {na} NA, {nr} NR, {violations} violations", corpus.len())))
}

fn rounding_points(seed: u64) -> Vec<FractionalVector> {
    (0..200)
        .map(|t| {
            let mut r = rng::stream(rng::derive(seed, 4), t);
            random_point(1 + t as usize % 4, &mut r)
        })
        .collect()
}

fn rounding_tables(seed: u64) -> Result<Vec<JointTable>> {
    rounding_points(seed).iter().map(|x| exact_outcome_distribution(x, &PairingPolicy::sweep(x.len()))).collect()
}

fn rounding_exactness(seed: u64) -> Outcome {
    let points = rounding_points(seed);
    let mut worst: f64 = 0.0;
    let mut bad_sums = 0;
    let mut not_na = 0;
    for x in &points {
        let d = exact_outcome_distribution(x, &PairingPolicy::sweep(x.len()))?;
        for (m, &xi) in marginals(&d).iter().zip(x.as_slice()) {
            worst = worst.max((m.mean() - xi).abs());
        }
        let s = x.sum();
        let (lo, hi) = ((s + 1e-9).floor(), (s - 1e-9).ceil());
        bad_sums += d.realized().filter(|(p, _)| {
            let k = p.iter().sum::<i64>() as f64;
            k != lo && k != hi
        })
        .count();
        not_na += !check_na(&d)?.holds as usize;
    }
    let ok = worst <= 1e-12 && bad_sums == 0 && not_na == 0;
    Ok((ok, format!("{} points, max marginal error {worst:.1e}, {bad_sums} off-sum outcomes, {not_na} not NA", points.len())))
}

fn moment_domination(seed: u64) -> Outcome {
    let tables = rounding_tables(seed)?;
    let mut checked = 0;
    let mut violations = 0;
    let mut worst = f64::NEG_INFINITY;
    for (t, d) in tables.iter().enumerate() {
        let mut r = rng::stream(rng::derive(seed, 5), t as u64);
        let indep = product_of_marginals(d);
        let sub = random_submodular(d.n(), &mut r);
        let sup = random_supermodular(d.n(), &mut r);
        let cases = [(&sub, [-2.0, -1.0, -0.5]), (&sup, [0.5, 1.0, 2.0])];
        for (f, lambdas) in cases {
            for lambda in lambdas {
                let gap = exponential_moment_exact(d, f, lambda)? - exponential_moment_exact(&indep, f, lambda)?;
                worst = worst.max(gap);
                checked += 1;
                violations += (gap > 1e-12) as usize;
            }
        }
    }
    Ok((violations == 0, format!("{checked} comparisons, max excess {worst:.1e}, {violations} violations")))
}

/// The bundled 20-element coverage instance: every singleton value is at most 1.
pub fn coverage20() -> Coverage {
    unit_coverage(20, 30, &mut rng::from_seed(20))
}

/// The bundled point for the 20-element instance, with `Σx = 10` exactly.
pub fn coverage20_point() -> FractionalVector {
    dyadic_point_with_sum(20, 10, &mut rng::from_seed(10))
}

fn chernoff_tail(seed: u64) -> Outcome {
    let report = run_tail_experiment(&TailExperiment {
        f: Arc::new(coverage20()),
        x: coverage20_point(),
        scheme: RoundingScheme::srinivasan_sweep(20),
        deltas: vec![0.1, 0.2, 0.3, 0.5],
        trials: 100_000,
        seed: rng::derive(seed, 6),
    })?;
    let ok = report.rows.iter().all(|r| r.ok);
    let rows: Vec<String> = report.rows.iter().map(|r| format!("δ={} {:.4}≤{:.4}", r.delta, r.empirical, r.bound)).collect();
    Ok((ok, format!("μ0 = {:.4}; {}", report.mu0, rows.join(", "))))
}

fn cardinality(seed: u64) -> Outcome {
    let x = coverage20_point();
    let sums = sample_map(&x, &RoundingScheme::srinivasan_sweep(20), 100_000, rng::derive(seed, 7), |o| {
        o.iter().filter(|&&b| b).count()
    })?;
    let off = sums.iter().filter(|&&s| s != 10).count();
    Ok((off == 0 && x.sum() == 10.0, format!("{} outcomes, {off} without exactly 10 ones", sums.len())))
}

fn holder(seed: u64) -> Outcome {
    let results: Vec<(bool, f64)> = (0..500u64)
        .into_par_iter()
        .map(|t| {
            let mut r = rng::stream(rng::derive(seed, 8), t);
            let count = 2 + (t as usize % 5);
            let fam = random_read_k_family(6, 2, count, &mut r);
            let means = random_point(6, &mut r);
            let d = JointTable::independent_bits(means.as_slice())?;
            let mut out = Vec::new();
            for lambda in [-1.0, 0.5, 2.0] {
                let h = holder_lemma_check(&fam, &d, lambda)?;
                out.push((h.holds, h.lhs / h.rhs));
            }
            Ok(out)
        })
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .flatten()
        .collect();
    let fails = results.iter().filter(|(h, _)| !h).count();
    let worst = results.iter().map(|r| r.1).fold(0.0, f64::max);
    Ok((fails == 0, format!("{} checks, max lhs/rhs {worst:.6}, {fails} violations", results.len())))
}

/// Forty mean-of-two blocks on a cycle of forty variables, so every variable is read twice.
pub fn modular_cycle_family() -> ReadKFamily {
    let blocks = (0..40)
        .map(|j| {
            let mut vars = vec![j, (j + 1) % 40];
            vars.sort_unstable();
            BlockFunction::new(vars, vec![0.0, 0.5, 0.5, 1.0]).expect("mean table is valid")
        })
        .collect();
    ReadKFamily::new(40, blocks).expect("cycle family is valid")
}

fn read_k_tails(seed: u64) -> Outcome {
    let fam = modular_cycle_family();
    let means: Vec<f64> = (0..40).map(|i| 0.3 + 0.4 * ((i * 7) % 40) as f64 / 39.0).collect();
    let source = ReadKSource::Independent(FractionalVector::new(means)?);
    let report = run_read_k_tail(&fam, &source, &[0.05, 0.1], Tails::Both, 100_000, rng::derive(seed, 9))?;
    let ok = fam.k() == 2 && report.rows.iter().all(|r| r.ok);
    let rows: Vec<String> =
        report.rows.iter().map(|r| format!("{:?} ε={} {:.4}≤{:.4}", r.tail, r.eps, r.empirical, r.bound)).collect();
    Ok((ok, format!("p0 = {:.4}, k = {}; {}", report.p0, fam.k(), rows.join(", "))))
}

fn stage_one_violations(inst: &MultiObjInstance) -> usize {
    let s1 = stage1_preprocess(inst);
    let e3 = inst.eps().powi(3);
    let mut bad = (s1.set.len() as f64 > inst.m() as f64 / e3) as usize;
    for i in s1.unsatisfied(inst.m()) {
        let gap = inst.targets()[i] - s1.values[i];
        let f = &inst.objectives()[i];
        bad += (0..inst.n())
            .filter(|&e| !s1.set.contains(e))
            .filter(|&e| f.value(&s1.set.with(e)) - s1.values[i] >= e3 * gap)
            .count();
    }
    bad
}

fn stage_one(seed: u64) -> Outcome {
    let mut violations = 0;
    let mut largest = 0;
    for t in 0..100u64 {
        let mut r = rng::stream(rng::derive(seed, 10), t);
        let n = 10 + (t as usize % 21);
        let m = 1 + (t as usize % 3);
        let eps = if t % 2 == 0 { 0.3 } else { 0.5 };
        let k = 1 + (t as usize * 7) % n;
        let slack = 0.5 + (t % 5) as f64 * 0.25;
        let inst = random_instance(n, m, k, eps, slack, &mut r);
        largest = largest.max(stage1_preprocess(&inst).set.len());
        violations += stage_one_violations(&inst);
    }
    Ok((violations == 0, format!("100 instances, largest S1 = {largest}, {violations} violations")))
}

fn soundness_instance(seed: u64, t: u64) -> MultiObjInstance {
    let mut r = rng::stream(rng::derive(seed, 11), t);
    let n = 6 + (t as usize % 7);
    let k = 1 + (t as usize % 5).min(n - 1);
    let m = 1 + (t as usize % 2);
    let eps = if t % 3 == 0 { 0.3 } else { 0.5 };
    let slack = [1.0, 0.8, 1.05, 1.2, 0.95][t as usize % 5];
    random_instance(n, m, k, eps, slack, &mut r)
}

fn certificate_soundness(seed: u64) -> Outcome {
    let rows: Vec<(bool, bool)> = (0..50u64)
        .into_par_iter()
        .map(|t| {
            let inst = soundness_instance(seed, t);
            let feasible = brute_force_feasibility(&inst)?.is_some();
            let certified = solve(&inst, default_steps(inst.eps()), rng::derive(seed, t))?.is_infeasible();
            Ok((feasible, certified))
        })
        .collect::<Result<_>>()?;
    let wrong = rows.iter().filter(|(f, c)| *f && *c).count();
    let feasible = rows.iter().filter(|r| r.0).count();
    let certified = rows.iter().filter(|r| r.1).count();
    Ok((wrong == 0, format!("50 instances, {feasible} feasible, {certified} certified, {wrong} unsound certificates")))
}

fn success_probability(seed: u64) -> Outcome {
    let instances: Vec<MultiObjInstance> = (0..10u64)
        .map(|t| {
            let mut r = rng::stream(rng::derive(seed, 12), t);
            let m = 1 + (t as usize % 2);
            random_instance(14, m, 10, 0.6, 1.0, &mut r)
        })
        .collect();
    let mut worst = 100;
    let mut all_feasible = true;
    let mut factor: f64 = 1.0;
    for inst in &instances {
        all_feasible &= brute_force_feasibility(inst)?.is_some();
        factor = factor.min(inst.guarantee_factor());
        let steps = default_steps(inst.eps());
        let wins = (0..100u64)
            .into_par_iter()
            .map(|s| Ok(solve(inst, steps, rng::derive(seed, 1000 + s))?.solution().is_some_and(|x| x.meets_guarantee)))
            .collect::<Result<Vec<bool>>>()?
            .into_iter()
            .filter(|&w| w)
            .count();
        worst = worst.min(wins);
    }
    let ok = all_feasible && worst * 3 >= 200;
    Ok((ok, format!("10 instances (min factor {factor:.4}), worst success {worst}/100")))
}

/// `Σ_S f(S) Π_{i∈S} x_i Π_{i∉S} (1-x_i)`, one subset at a time.
fn naive_multilinear(f: &dyn SetFunction, x: &[f64]) -> f64 {
    let n = x.len();
    (0..1u64 << n)
        .map(|mask| {
            let w: f64 = (0..n).map(|i| if mask >> i & 1 == 1 { x[i] } else { 1.0 - x[i] }).product();
            w * f.value(&Subset::from_mask(n, mask))
        })
        .sum()
}

fn multilinear(seed: u64) -> Outcome {
    let cases: Vec<(SharedFn, FractionalVector)> = (0..100u64)
        .map(|t| {
            let mut r = rng::stream(rng::derive(seed, 13), t);
            let n = 1 + (t as usize % 12);
            let f: SharedFn = if t % 2 == 0 {
                let universe = 2 + n;
                Arc::new(random_coverage(n, universe, &mut r))
            } else {
                Arc::new(random_submodular(n.min(8), &mut r))
            };
            let x = random_point(f.n(), &mut r);
            (f, x)
        })
        .collect();
    let rows: Vec<(f64, usize)> = cases
        .par_iter()
        .enumerate()
        .map(|(t, (f, x))| {
            let exact = multilinear_exact(f.as_ref(), x)?;
            let naive = naive_multilinear(f.as_ref(), x.as_slice());
            let err = (exact - naive).abs() / naive.abs().max(1.0);
            let mut hits = 0;
            for s in 0..50u64 {
                let mc = multilinear_mc(f.as_ref(), x, 20_000, rng::derive(rng::derive(seed, t as u64), s))?;
                hits += ((mc.estimate - exact).abs() <= 4.0 * mc.stderr + 1e-12) as usize;
            }
            Ok((err, hits))
        })
        .collect::<Result<_>>()?;
    let worst_err = rows.iter().map(|r| r.0).fold(0.0, f64::max);
    let worst_hits = rows.iter().map(|r| r.1).min().unwrap_or(0);
    let ok = worst_err <= 1e-12 && worst_hits * 100 >= 95 * 50;
    Ok((ok, format!("100 cases, max relative error {worst_err:.1e}, worst MC coverage {worst_hits}/50")))
}
