//! Multilinear extension `F(x) = Σ_S f(S) Π_{i∈S} x_i Π_{i∉S} (1 - x_i)`.

use rand::Rng as _;
use rayon::prelude::*;
use serde::Serialize;

use super::{gray_walk, tabulate, FractionalVector, SetFunction, Subset};
use crate::error::{Error, Result};
use crate::rng;

/// Largest ground set for exact enumeration.
pub const MAX_EXACT_MULTILINEAR: usize = 20;

const MC_CHUNK: usize = 2048;

fn check_point(f: &dyn SetFunction, x: &FractionalVector) -> Result<()> {
    if x.len() != f.n() {
        return Err(Error::input(format!(
            "point has {} coordinates, function has {} elements",
            x.len(),
            f.n()
        )));
    }
    Ok(())
}

fn check_exact(f: &dyn SetFunction) -> Result<()> {
    if f.n() > MAX_EXACT_MULTILINEAR {
        return Err(Error::capacity(format!(
            "exact multilinear extension supports at most {MAX_EXACT_MULTILINEAR} elements, got {}",
            f.n()
        )));
    }
    Ok(())
}

/// Product weights `Π x_c or (1 - x_c)` over the coordinates in `coords`,
/// indexed by a mask over positions in `coords`.
fn product_weights(coords: &[usize], x: &[f64]) -> Vec<f64> {
    let mut w = vec![0.0; 1 << coords.len()];
    w[0] = 1.0;
    for (j, &c) in coords.iter().enumerate() {
        let (p, q) = (x[c], 1.0 - x[c]);
        for m in 0..1usize << j {
            w[m | 1 << j] = w[m] * p;
            w[m] *= q;
        }
    }
    w
}

/// Exact `F(x)` by Gray-code enumeration of the fractional coordinates.
///
/// Coordinates equal to 0 or 1 are fixed rather than enumerated, so at a
/// vertex the result is exactly `f(supp(x))`.
pub fn multilinear_exact(f: &dyn SetFunction, x: &FractionalVector) -> Result<f64> {
    check_point(f, x)?;
    check_exact(f)?;
    let xs = x.as_slice();
    let mut base = Subset::empty(f.n());
    let mut frac = Vec::new();
    for (i, &v) in xs.iter().enumerate() {
        if v == 1.0 {
            base.insert(i);
        } else if v > 0.0 {
            frac.push(i);
        }
    }
    let weights = product_weights(&frac, xs);
    let mut total = 0.0;
    gray_walk(f, &base, &frac, |mask, value| total += weights[mask as usize] * value);
    Ok(total)
}

/// `F(x)` from a full value table (bit `i` of the index is element `i`),
/// by interpolating one coordinate at a time.
pub fn multilinear_from_table(table: &[f64], x: &[f64]) -> f64 {
    let mut cur = table.to_vec();
    for &xi in x {
        let half = cur.len() / 2;
        // element 0 is the lowest bit, so pair even/odd entries
        cur = (0..half).map(|m| (1.0 - xi) * cur[2 * m] + xi * cur[2 * m + 1]).collect();
    }
    debug_assert_eq!(cur.len(), 1);
    cur[0]
}

/// `∂F/∂x_i = F(x; x_i <- 1) - F(x; x_i <- 0)`, exactly.
pub fn multilinear_partial(f: &dyn SetFunction, x: &FractionalVector, i: usize) -> Result<f64> {
    check_point(f, x)?;
    if i >= f.n() {
        return Err(Error::input(format!("coordinate {i} is out of range")));
    }
    let mut hi = x.as_slice().to_vec();
    let mut lo = hi.clone();
    hi[i] = 1.0;
    lo[i] = 0.0;
    Ok(multilinear_exact(f, &FractionalVector(hi))? - multilinear_exact(f, &FractionalVector(lo))?)
}

/// The full exact gradient in one pass: tabulate `f`, then split the
/// coordinates recursively so each half is reduced once per level.
pub fn multilinear_gradient(f: &dyn SetFunction, x: &FractionalVector) -> Result<Vec<f64>> {
    check_point(f, x)?;
    check_exact(f)?;
    let table = tabulate(f)?;
    Ok(gradient_from_table(&table, x.as_slice()))
}

pub(crate) fn gradient_from_table(table: &[f64], x: &[f64]) -> Vec<f64> {
    let dims: Vec<usize> = (0..x.len()).collect();
    let mut out = vec![0.0; x.len()];
    gradient_rec(table, &dims, x, &mut out);
    out
}

fn gradient_rec(table: &[f64], dims: &[usize], x: &[f64], out: &mut [f64]) {
    let d = dims.len();
    debug_assert_eq!(table.len(), 1 << d);
    if d == 1 {
        out[dims[0]] = table[1] - table[0];
        return;
    }
    let h = d / 2;
    let (lo, hi) = dims.split_at(h);

    let w_hi = product_weights(hi, x);
    let mut t_lo = vec![0.0; 1 << h];
    for (hm, &w) in w_hi.iter().enumerate() {
        if w == 0.0 {
            continue;
        }
        let block = &table[hm << h..(hm + 1) << h];
        for (acc, v) in t_lo.iter_mut().zip(block) {
            *acc += w * v;
        }
    }
    gradient_rec(&t_lo, lo, x, out);

    let w_lo = product_weights(lo, x);
    let t_hi: Vec<f64> = (0..w_hi.len())
        .map(|hm| table[hm << h..(hm + 1) << h].iter().zip(&w_lo).map(|(v, w)| v * w).sum())
        .collect();
    gradient_rec(&t_hi, hi, x, out);
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MonteCarloEstimate {
    pub estimate: f64,
    pub stderr: f64,
    pub samples: usize,
}

/// Running mean / sum of squared deviations, merged with Chan's update.
#[derive(Debug, Clone, Copy, Default)]
struct Moments {
    count: f64,
    mean: f64,
    m2: f64,
}

impl Moments {
    fn push(&mut self, v: f64) {
        self.count += 1.0;
        let delta = v - self.mean;
        self.mean += delta / self.count;
        self.m2 += delta * (v - self.mean);
    }

    fn merge(self, other: Moments) -> Moments {
        if self.count == 0.0 {
            return other;
        }
        if other.count == 0.0 {
            return self;
        }
        let count = self.count + other.count;
        let delta = other.mean - self.mean;
        Moments {
            count,
            mean: self.mean + delta * other.count / count,
            m2: self.m2 + other.m2 + delta * delta * self.count * other.count / count,
        }
    }

    fn estimate(self, samples: usize) -> MonteCarloEstimate {
        let stderr = if self.count > 1.0 { (self.m2.max(0.0) / (self.count - 1.0) / self.count).sqrt() } else { 0.0 };
        MonteCarloEstimate { estimate: self.mean, stderr, samples }
    }
}

/// Averages `sample(rng)` over `samples` draws. Chunk `c` draws from stream
/// `c` of `seed` and chunk results merge in chunk order, so the estimate
/// does not depend on the worker count.
fn monte_carlo(samples: usize, seed: u64, sample: impl Fn(&mut rng::Rng) -> f64 + Sync) -> Result<MonteCarloEstimate> {
    if samples == 0 {
        return Err(Error::input("Monte-Carlo estimation needs at least one sample"));
    }
    let chunks = samples.div_ceil(MC_CHUNK);
    let parts: Vec<Moments> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut r = rng::stream(seed, c as u64);
            let len = MC_CHUNK.min(samples - c * MC_CHUNK);
            let mut m = Moments::default();
            for _ in 0..len {
                m.push(sample(&mut r));
            }
            m
        })
        .collect();
    Ok(parts.into_iter().fold(Moments::default(), Moments::merge).estimate(samples))
}

fn draw_set(x: &[f64], r: &mut rng::Rng) -> Subset {
    let mut s = Subset::empty(x.len());
    for (i, &p) in x.iter().enumerate() {
        // p = 1 must always fire and p = 0 never; gen::<f64>() lies in [0, 1)
        if r.gen::<f64>() < p {
            s.insert(i);
        }
    }
    s
}

/// Unbiased sample mean of `f` under independent Bernoulli(`x_i`) rounding.
pub fn multilinear_mc(f: &dyn SetFunction, x: &FractionalVector, samples: usize, seed: u64) -> Result<MonteCarloEstimate> {
    check_point(f, x)?;
    let xs = x.as_slice();
    monte_carlo(samples, seed, |r| f.value(&draw_set(xs, r)))
}

/// Sampled `∂F/∂x_i`: the mean of `f(R + i) - f(R - i)` over random `R`.
pub fn multilinear_partial_mc(
    f: &dyn SetFunction,
    x: &FractionalVector,
    i: usize,
    samples: usize,
    seed: u64,
) -> Result<MonteCarloEstimate> {
    check_point(f, x)?;
    if i >= f.n() {
        return Err(Error::input(format!("coordinate {i} is out of range")));
    }
    let xs = x.as_slice();
    monte_carlo(samples, seed, |r| {
        let mut s = draw_set(xs, r);
        s.remove(i);
        let without = f.value(&s);
        s.insert(i);
        f.value(&s) - without
    })
}
