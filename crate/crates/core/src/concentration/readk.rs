use rand::Rng as _;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{binomial_stderr, EVENT_SLACK};
use crate::error::{Error, Result};
use crate::negdep::{marginals, product_of_marginals, JointTable};
use crate::rounding::{PairingPolicy, RoundingScheme};
use crate::rng;
use crate::setfn::{
    is_submodular_bruteforce, is_supermodular_bruteforce, multilinear_from_table, Coverage, CoverageSpec,
    FractionalVector, SetFunction, Subset, TableFunction,
};

/// Largest block a read-k family function may read.
pub const MAX_BLOCK: usize = 16;

/// Largest support [`holder_lemma_check`] sums over.
pub const MAX_HOLDER_SUPPORT: usize = 1 << 12;

const RANGE_TOL: f64 = 1e-12;

/// `D(p ‖ q)` between Bernoulli laws, with `0 ln 0 = 0`. Infinite when `q`
/// is 0 or 1 and `p` differs from it.
pub fn kl_divergence(p: f64, q: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&p) || !(0.0..=1.0).contains(&q) {
        return Err(Error::input(format!("KL divergence arguments ({p}, {q}) must lie in [0, 1]")));
    }
    let term = |a: f64, b: f64| {
        if a == 0.0 {
            0.0
        } else if b == 0.0 {
            f64::INFINITY
        } else {
            a * (a / b).ln()
        }
    };
    Ok(term(p, q) + term(1.0 - p, 1.0 - q))
}

/// `(exp(-D(p0+ε ‖ p0) n/k), exp(-D(p0-ε ‖ p0) n/k))`.
pub fn read_k_bounds(p0: f64, eps: f64, n: usize, k: usize) -> Result<(f64, f64)> {
    if k == 0 {
        return Err(Error::input("read factor k must be at least 1"));
    }
    if !(eps >= 0.0) || !(0.0..=1.0).contains(&p0) || p0 + eps > 1.0 || p0 - eps < 0.0 {
        return Err(Error::input(format!("p0 ± eps = {p0} ± {eps} must stay within [0, 1]")));
    }
    let scale = n as f64 / k as f64;
    let upper = (-kl_divergence(p0 + eps, p0)? * scale).exp();
    let lower = (-kl_divergence(p0 - eps, p0)? * scale).exp();
    Ok((upper, lower))
}

/// The largest number of blocks any single variable appears in.
pub fn read_k_factor(m: usize, blocks: &[Vec<usize>]) -> usize {
    let mut count = vec![0usize; m];
    for b in blocks {
        for &i in b {
            count[i] += 1;
        }
    }
    count.into_iter().max().unwrap_or(0)
}

/// A function `f_j : {0,1}^{P_j} → [0,1]`, stored as its value table (bit `t`
/// of the index is the `t`-th variable of the block).
#[derive(Debug, Clone, PartialEq)]
pub struct BlockFunction {
    vars: Vec<usize>,
    table: Vec<f64>,
}

impl BlockFunction {
    pub fn new(vars: Vec<usize>, table: Vec<f64>) -> Result<Self> {
        if vars.is_empty() || vars.len() > MAX_BLOCK {
            return Err(Error::input(format!("blocks must read between 1 and {MAX_BLOCK} variables")));
        }
        let mut sorted = vars.clone();
        sorted.sort_unstable();
        sorted.dedup();
        if sorted.len() != vars.len() {
            return Err(Error::input(format!("block {vars:?} repeats a variable")));
        }
        if table.len() != 1 << vars.len() {
            return Err(Error::input(format!(
                "block {vars:?} needs {} values, got {}",
                1usize << vars.len(),
                table.len()
            )));
        }
        if let Some(v) = table.iter().find(|v| !(**v >= -RANGE_TOL && **v <= 1.0 + RANGE_TOL)) {
            return Err(Error::input(format!("block {vars:?} takes value {v} outside [0, 1]")));
        }
        Ok(BlockFunction { vars, table })
    }

    pub fn vars(&self) -> &[usize] {
        &self.vars
    }

    pub fn table(&self) -> &[f64] {
        &self.table
    }

    pub fn eval(&self, bits: &[bool]) -> f64 {
        let mask = self.vars.iter().enumerate().fold(0usize, |m, (t, &v)| m | (bits[v] as usize) << t);
        self.table[mask]
    }

    pub fn as_set_function(&self) -> TableFunction {
        TableFunction::new(self.vars.len(), self.table.clone()).expect("block tables are valid")
    }

    /// `E[f_j(X*_{P_j})]` for independent bits with the given means.
    pub fn independent_mean(&self, means: &[f64]) -> f64 {
        let x: Vec<f64> = self.vars.iter().map(|&v| means[v]).collect();
        multilinear_from_table(&self.table, &x)
    }
}

/// On-disk description of one block function.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum BlockSpec {
    /// Explicit values indexed by bitmask over the block's variables.
    Table { values: Vec<f64> },
    /// `Σ_t w_t X_{P_j,t}`.
    Modular { weights: Vec<f64> },
    /// Average of the block's bits.
    Mean,
    Coverage { universe_size: usize, #[serde(default)] weights: Option<Vec<f64>>, sets: Vec<Vec<usize>> },
    Constant { value: f64 },
    /// `1 - f` for the inner function.
    Complement { of: Box<BlockSpec> },
}

impl BlockSpec {
    fn tabulate(&self, size: usize) -> Result<Vec<f64>> {
        let full = 1usize << size;
        Ok(match self {
            BlockSpec::Table { values } => values.clone(),
            BlockSpec::Modular { weights } => {
                if weights.len() != size {
                    return Err(Error::input(format!("modular block needs {size} weights, got {}", weights.len())));
                }
                (0..full).map(|m| (0..size).filter(|t| m >> t & 1 == 1).map(|t| weights[t]).sum()).collect()
            }
            BlockSpec::Mean => (0..full).map(|m| m.count_ones() as f64 / size as f64).collect(),
            BlockSpec::Coverage { universe_size, weights, sets } => {
                let f = Coverage::from_spec(CoverageSpec {
                    universe_size: *universe_size,
                    weights: weights.clone(),
                    sets: sets.clone(),
                })?;
                if f.n() != size {
                    return Err(Error::input(format!("coverage block has {} sets for {size} variables", f.n())));
                }
                (0..full).map(|m| f.value(&Subset::from_mask(size, m as u64))).collect()
            }
            BlockSpec::Constant { value } => vec![*value; full],
            BlockSpec::Complement { of } => of.tabulate(size)?.into_iter().map(|v| 1.0 - v).collect(),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReadKFamilySpec {
    pub m: usize,
    pub blocks: Vec<Vec<usize>>,
    pub functions: Vec<BlockSpec>,
}

/// Functions `f_j(X_{P_j})` over `m` shared binary variables.
#[derive(Debug, Clone, PartialEq)]
pub struct ReadKFamily {
    m: usize,
    blocks: Vec<BlockFunction>,
    k: usize,
}

impl ReadKFamily {
    pub fn new(m: usize, blocks: Vec<BlockFunction>) -> Result<Self> {
        if m == 0 || blocks.is_empty() {
            return Err(Error::input("a read-k family needs at least one variable and one function"));
        }
        if let Some(b) = blocks.iter().find(|b| b.vars.iter().any(|&v| v >= m)) {
            return Err(Error::input(format!("block {:?} references a variable outside 0..{m}", b.vars)));
        }
        let vars: Vec<Vec<usize>> = blocks.iter().map(|b| b.vars.clone()).collect();
        let k = read_k_factor(m, &vars);
        Ok(ReadKFamily { m, blocks, k })
    }

    pub fn from_spec(spec: &ReadKFamilySpec) -> Result<Self> {
        if spec.blocks.len() != spec.functions.len() {
            return Err(Error::input(format!(
                "{} blocks but {} functions",
                spec.blocks.len(),
                spec.functions.len()
            )));
        }
        let blocks = spec
            .blocks
            .iter()
            .zip(&spec.functions)
            .map(|(vars, f)| {
                if vars.len() > MAX_BLOCK {
                    return Err(Error::capacity(format!("blocks may read at most {MAX_BLOCK} variables")));
                }
                BlockFunction::new(vars.clone(), f.tabulate(vars.len())?)
            })
            .collect::<Result<Vec<_>>>()?;
        ReadKFamily::new(spec.m, blocks)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let spec: ReadKFamilySpec = serde_json::from_str(text)?;
        ReadKFamily::from_spec(&spec)
    }

    pub fn m(&self) -> usize {
        self.m
    }

    /// Number of functions.
    pub fn len(&self) -> usize {
        self.blocks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.blocks.is_empty()
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn blocks(&self) -> &[BlockFunction] {
        &self.blocks
    }

    pub fn total(&self, bits: &[bool]) -> f64 {
        self.blocks.iter().map(|b| b.eval(bits)).sum()
    }

    /// `p0 = (1/n) Σ_j E[f_j(X*_{P_j})]` under independent bits with the given means.
    pub fn p0(&self, means: &[f64]) -> f64 {
        self.blocks.iter().map(|b| b.independent_mean(means)).sum::<f64>() / self.len() as f64
    }

    /// Index of the first block failing the required shape, if any.
    fn first_block_not(&self, test: impl Fn(&TableFunction) -> Result<bool>) -> Result<Option<usize>> {
        for (j, b) in self.blocks.iter().enumerate() {
            if !test(&b.as_set_function())? {
                return Ok(Some(j));
            }
        }
        Ok(None)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HolderCheck {
    /// `E[Π_j F_j]`
    pub lhs: f64,
    /// `(Π_j E[F_j^k])^{1/k}`
    pub rhs: f64,
    pub k: usize,
    pub holds: bool,
}

/// Exact check of `E[Π_j F_j] ≤ (Π_j E[F_j^k])^{1/k}` with `F_j = exp(λ f_j)`,
/// for a product measure `d`.
pub fn holder_lemma_check(family: &ReadKFamily, d: &JointTable, lambda: f64) -> Result<HolderCheck> {
    if d.n() != family.m() || !d.is_binary() {
        return Err(Error::input(format!("the table must be binary over {} variables", family.m())));
    }
    if d.len() > MAX_HOLDER_SUPPORT {
        return Err(Error::capacity(format!("support of {} points exceeds {MAX_HOLDER_SUPPORT}", d.len())));
    }
    if !product_of_marginals(d).same_measure(d, 1e-12) {
        return Err(Error::input("the Hölder inequality is checked for product measures only"));
    }
    let k = family.k();
    let outcomes: Vec<(Vec<bool>, f64)> = d.realized().map(|(p, q)| (p.iter().map(|&v| v == 1).collect(), q)).collect();
    let lhs: f64 = outcomes.iter().map(|(b, q)| q * (lambda * family.total(b)).exp()).sum();
    let log_rhs: f64 = family
        .blocks()
        .iter()
        .map(|f| outcomes.iter().map(|(b, q)| q * (k as f64 * lambda * f.eval(b)).exp()).sum::<f64>().ln())
        .sum::<f64>()
        / k as f64;
    let rhs = log_rhs.exp();
    Ok(HolderCheck { lhs, rhs, k, holds: lhs <= rhs * (1.0 + 1e-10) })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Tail {
    Upper,
    Lower,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Tails {
    Upper,
    Lower,
    Both,
}

impl Tails {
    fn includes(self, t: Tail) -> bool {
        matches!((self, t), (Tails::Both, _) | (Tails::Upper, Tail::Upper) | (Tails::Lower, Tail::Lower))
    }
}

/// Where the variables come from.
#[derive(Debug, Clone)]
pub enum ReadKSource {
    Table(JointTable),
    Independent(FractionalVector),
    Srinivasan { x: FractionalVector, policy: PairingPolicy },
}

impl ReadKSource {
    fn means(&self, m: usize) -> Result<Vec<f64>> {
        let means = match self {
            ReadKSource::Table(d) => {
                if !d.is_binary() {
                    return Err(Error::input("read-k tails need binary variables"));
                }
                marginals(d).iter().map(|mg| mg.mean()).collect()
            }
            ReadKSource::Independent(x) | ReadKSource::Srinivasan { x, .. } => x.as_slice().to_vec(),
        };
        if means.len() != m {
            return Err(Error::input(format!("source has {} variables, the family reads {m}", means.len())));
        }
        Ok(means)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReadKRow {
    pub tail: Tail,
    pub eps: f64,
    /// `(p0 ± ε) n`
    pub threshold: f64,
    pub empirical: f64,
    pub stderr: f64,
    pub bound: f64,
    pub ok: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReadKReport {
    pub p0: f64,
    pub n: usize,
    pub k: usize,
    /// Mean of `(1/n) Σ_j f_j` over the trials.
    pub empirical_mean: f64,
    pub trials: u64,
    pub rows: Vec<ReadKRow>,
}

fn tail_bound(p0: f64, target: f64, n: usize, k: usize) -> Result<f64> {
    // a target outside [0, 1] cannot be reached by an average of [0, 1] values
    if !(0.0..=1.0).contains(&target) {
        return Ok(0.0);
    }
    Ok((-kl_divergence(target, p0)? * n as f64 / k as f64).exp())
}

/// Samples `Σ_j f_j(X_{P_j})` and compares both tails with the read-k bounds.
/// The upper tail needs supermodular blocks and the lower tail submodular ones.
pub fn run_read_k_tail(
    family: &ReadKFamily,
    source: &ReadKSource,
    eps: &[f64],
    tails: Tails,
    trials: u64,
    seed: u64,
) -> Result<ReadKReport> {
    if trials == 0 {
        return Err(Error::input("a tail experiment needs at least one trial"));
    }
    if let Some(e) = eps.iter().find(|e| !(**e >= 0.0 && **e <= 1.0)) {
        return Err(Error::input(format!("eps = {e} must lie in [0, 1]")));
    }
    let means = source.means(family.m())?;
    if tails.includes(Tail::Upper) {
        if let Some(j) = family.first_block_not(|f| is_supermodular_bruteforce(f))? {
            return Err(Error::input(format!("upper-tail bound needs supermodular blocks; block {j} is not")));
        }
    }
    if tails.includes(Tail::Lower) {
        if let Some(j) = family.first_block_not(|f| is_submodular_bruteforce(f))? {
            return Err(Error::input(format!("lower-tail bound needs submodular blocks; block {j} is not")));
        }
    }
    let n = family.len();
    let p0 = family.p0(&means);
    let sums = sample_sums(family, source, trials, seed)?;
    let t = trials as f64;
    let empirical_mean = sums.iter().sum::<f64>() / (t * n as f64);
    let slack = EVENT_SLACK * (n as f64).max(1.0);
    let mut rows = Vec::new();
    for tail in [Tail::Upper, Tail::Lower].into_iter().filter(|&t| tails.includes(t)) {
        for &e in eps {
            let (target, hits) = match tail {
                Tail::Upper => {
                    let thr = (p0 + e) * n as f64;
                    (p0 + e, (thr, sums.iter().filter(|&&s| s >= thr - slack).count()))
                }
                Tail::Lower => {
                    let thr = (p0 - e) * n as f64;
                    (p0 - e, (thr, sums.iter().filter(|&&s| s <= thr + slack).count()))
                }
            };
            let (threshold, hits) = hits;
            let empirical = hits as f64 / t;
            let stderr = binomial_stderr(empirical, trials);
            let bound = tail_bound(p0, target, n, family.k())?;
            rows.push(ReadKRow { tail, eps: e, threshold, empirical, stderr, bound, ok: empirical <= bound + 3.0 * stderr });
        }
    }
    Ok(ReadKReport { p0, n, k: family.k(), empirical_mean, trials, rows })
}

fn sample_sums(family: &ReadKFamily, source: &ReadKSource, trials: u64, seed: u64) -> Result<Vec<f64>> {
    match source {
        ReadKSource::Table(d) => {
            let outcomes: Vec<Vec<bool>> = d.realized().map(|(p, _)| p.iter().map(|&v| v == 1).collect()).collect();
            let mut cdf: Vec<f64> = d
                .realized()
                .scan(0.0, |acc, (_, q)| {
                    *acc += q;
                    Some(*acc)
                })
                .collect();
            let last = cdf.len() - 1;
            cdf[last] = f64::INFINITY;
            Ok((0..trials)
                .into_par_iter()
                .map(|t| {
                    let u: f64 = rng::stream(seed, t).gen();
                    let idx = cdf.partition_point(|&c| c <= u);
                    family.total(&outcomes[idx])
                })
                .collect())
        }
        ReadKSource::Independent(x) => {
            crate::rounding::sample_map(x, &RoundingScheme::Independent, trials, seed, |o| family.total(o))
        }
        ReadKSource::Srinivasan { x, policy } => crate::rounding::sample_map(
            x,
            &RoundingScheme::Srinivasan { policy: policy.clone() },
            trials,
            seed,
            |o| family.total(o),
        ),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pairs_family(m: usize, spec: BlockSpec) -> ReadKFamily {
        let blocks = (0..m).map(|j| vec![j, (j + 1) % m]).collect();
        ReadKFamily::from_spec(&ReadKFamilySpec { m, blocks, functions: vec![spec; m] }).unwrap()
    }

    #[test]
    fn kl_examples() {
        assert_eq!(kl_divergence(0.3, 0.3).unwrap(), 0.0);
        assert!((kl_divergence(0.75, 0.5).unwrap() - 0.130_812).abs() < 1e-6);
        assert!((kl_divergence(0.75, 0.5).unwrap() - 0.130_812_035_941_137_4).abs() < 1e-15);
        assert_eq!(kl_divergence(0.5, 0.0).unwrap(), f64::INFINITY);
        assert_eq!(kl_divergence(1.0, 1.0).unwrap(), 0.0);
        assert_eq!(kl_divergence(0.0, 0.4).unwrap(), -(0.6f64.ln()));
        assert!(kl_divergence(1.2, 0.4).is_err());
    }

    #[test]
    fn kl_symmetry_on_a_grid() {
        for a in 0..=20 {
            for b in 1..20 {
                let (p, q) = (a as f64 / 20.0, b as f64 / 20.0);
                let d1 = kl_divergence(p, q).unwrap();
                let d2 = kl_divergence(1.0 - p, 1.0 - q).unwrap();
                assert!((d1 - d2).abs() < 1e-14, "{p} {q}");
            }
        }
    }

    #[test]
    fn read_k_bound_examples() {
        assert_eq!(read_k_bounds(0.4, 0.0, 10, 3).unwrap(), (1.0, 1.0));
        let (u1, l1) = read_k_bounds(0.5, 0.25, 40, 1).unwrap();
        let (u2, l2) = read_k_bounds(0.5, 0.25, 40, 2).unwrap();
        assert!((u2 - u1.sqrt()).abs() < 1e-15 && (l2 - l1.sqrt()).abs() < 1e-15);
        assert!((u2 - (-2.616_240_718_822_748_f64).exp()).abs() < 1e-15);
        assert!(read_k_bounds(0.9, 0.2, 10, 1).is_err());
        assert!(read_k_bounds(0.5, 0.1, 10, 0).is_err());
    }

    #[test]
    fn factor_counts_reads() {
        let f = pairs_family(6, BlockSpec::Mean);
        assert_eq!(f.k(), 2);
        assert_eq!(read_k_factor(4, &[vec![0], vec![0, 1], vec![0, 2, 3]]), 3);
    }

    #[test]
    fn spec_validation() {
        let bad = ReadKFamilySpec { m: 2, blocks: vec![vec![0, 2]], functions: vec![BlockSpec::Mean] };
        assert!(ReadKFamily::from_spec(&bad).is_err());
        let bad = ReadKFamilySpec { m: 2, blocks: vec![vec![0, 1]], functions: vec![BlockSpec::Constant { value: 1.5 }] };
        assert!(ReadKFamily::from_spec(&bad).is_err());
        let json = r#"{"m": 2, "blocks": [[0, 1]], "functions": [{"type": "complement", "of": {"type": "modular", "weights": [0.5, 0.25]}}]}"#;
        let f = ReadKFamily::from_json(json).unwrap();
        assert_eq!(f.blocks()[0].table(), &[1.0, 0.5, 0.75, 0.25]);
    }

    #[test]
    fn holder_degenerate_and_disjoint_cases() {
        let single = ReadKFamily::new(1, vec![BlockFunction::new(vec![0], vec![0.2, 0.9]).unwrap()]).unwrap();
        let d = JointTable::independent_bits(&[0.3]).unwrap();
        let h = holder_lemma_check(&single, &d, 1.5).unwrap();
        assert!(h.holds && (h.lhs - h.rhs).abs() < 1e-14);

        let disjoint = ReadKFamily::from_spec(&ReadKFamilySpec {
            m: 4,
            blocks: vec![vec![0, 1], vec![2, 3]],
            functions: vec![BlockSpec::Mean, BlockSpec::Table { values: vec![0.0, 0.1, 0.7, 1.0] }],
        })
        .unwrap();
        let d = JointTable::independent_bits(&[0.5, 0.2, 0.9, 0.4]).unwrap();
        for lambda in [-1.0, 0.5, 2.0] {
            let h = holder_lemma_check(&disjoint, &d, lambda).unwrap();
            assert_eq!(h.k, 1);
            assert!(h.holds && ((h.lhs - h.rhs) / h.rhs).abs() < 1e-12);
        }
        let correlated = JointTable::new(4, vec![vec![0; 4], vec![1; 4]], vec![0.5, 0.5]).unwrap();
        assert!(holder_lemma_check(&disjoint, &correlated, 1.0).is_err());
    }

    #[test]
    fn constant_blocks_have_empty_tails() {
        let f = pairs_family(8, BlockSpec::Constant { value: 0.3 });
        let src = ReadKSource::Independent(FractionalVector::new(vec![0.5; 8]).unwrap());
        let r = run_read_k_tail(&f, &src, &[0.05, 0.1], Tails::Both, 2000, 1).unwrap();
        assert!((r.p0 - 0.3).abs() < 1e-15);
        assert!(r.rows.iter().all(|row| row.empirical == 0.0 && row.ok));
    }

    #[test]
    fn shape_preconditions_name_the_block() {
        let mut spec = ReadKFamilySpec { m: 3, blocks: vec![vec![0, 1], vec![1, 2]], functions: vec![BlockSpec::Mean; 2] };
        // max(X_1, X_2) is submodular but not supermodular
        spec.functions[1] = BlockSpec::Table { values: vec![0.0, 1.0, 1.0, 1.0] };
        let f = ReadKFamily::from_spec(&spec).unwrap();
        let src = ReadKSource::Independent(FractionalVector::new(vec![0.5; 3]).unwrap());
        let err = run_read_k_tail(&f, &src, &[0.1], Tails::Upper, 10, 0).unwrap_err().to_string();
        assert!(err.contains("block 1"), "{err}");
        assert!(run_read_k_tail(&f, &src, &[0.1], Tails::Lower, 10, 0).is_ok());
    }

    #[test]
    fn table_source_samples_its_law() {
        let f = ReadKFamily::new(2, vec![BlockFunction::new(vec![0, 1], vec![0.0, 0.0, 0.0, 1.0]).unwrap()]).unwrap();
        let d = JointTable::new(2, vec![vec![0, 0], vec![1, 1]], vec![0.25, 0.75]).unwrap();
        let r = run_read_k_tail(&f, &ReadKSource::Table(d), &[0.0], Tails::Upper, 40_000, 5).unwrap();
        assert!((r.p0 - 0.5625).abs() < 1e-15);
        assert!((r.empirical_mean - 0.75).abs() < 4.0 * binomial_stderr(0.75, 40_000));
    }
}
