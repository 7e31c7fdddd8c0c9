use std::sync::Arc;

use rand::seq::SliceRandom;
use rand::Rng;
use subround::concentration::{
    chernoff_lower_bound, run_read_k_tail, run_tail_experiment, BlockFunction, ReadKFamily, ReadKSource, Tail,
    TailExperiment, Tails,
};
use subround::corpus::{random_point, random_submodular};
use subround::rounding::{PairingPolicy, RoundingScheme};
use subround::rng;
use subround::setfn::{multilinear_exact, tabulate};
use subround::verify::{coverage20, coverage20_point};

#[test]
fn coverage_lower_tail_under_both_schemes() {
    let f = Arc::new(coverage20());
    let x = coverage20_point();
    let exact = multilinear_exact(f.as_ref(), &x).unwrap();
    for scheme in [RoundingScheme::Independent, RoundingScheme::srinivasan_sweep(20)] {
        let report = run_tail_experiment(&TailExperiment {
            f: f.clone(),
            x: x.clone(),
            scheme: scheme.clone(),
            deltas: vec![0.1, 0.2, 0.3],
            trials: 100_000,
            seed: 8,
        })
        .unwrap();
        assert!((report.mu0 - exact).abs() <= 1e-9, "{scheme:?}");
        assert!((report.empirical_mean - exact).abs() <= 0.02 * exact, "{scheme:?}: {}", report.empirical_mean);
        for row in &report.rows {
            assert!(row.ok, "{scheme:?}: {row:?}");
            assert_eq!(row.bound, chernoff_lower_bound(exact, row.delta).unwrap());
        }
        // tails shrink as the threshold drops
        assert!(report.rows.windows(2).all(|w| w[1].empirical <= w[0].empirical));
    }
}

fn submodular_family(m: usize, count: usize, seed: u64) -> ReadKFamily {
    let mut r = rng::from_seed(seed);
    let mut reads = vec![0usize; m];
    let mut blocks = Vec::new();
    while blocks.len() < count {
        let mut open: Vec<usize> = (0..m).filter(|&v| reads[v] < 2).collect();
        if open.len() < 3 {
            break;
        }
        open.shuffle(&mut r);
        let mut vars: Vec<usize> = open[..r.gen_range(1..=3)].to_vec();
        vars.sort_unstable();
        vars.iter().for_each(|&v| reads[v] += 1);
        let table = tabulate(&random_submodular(vars.len(), &mut r)).unwrap();
        blocks.push(BlockFunction::new(vars, table).unwrap());
    }
    ReadKFamily::new(m, blocks).unwrap()
}

#[test]
fn read_two_lower_tail_from_dependent_rounding() {
    for seed in 0..3 {
        let family = submodular_family(30, 24, seed);
        assert!(family.k() <= 2);
        let mut r = rng::from_seed(100 + seed);
        let x = random_point(30, &mut r);
        for source in [
            ReadKSource::Independent(x.clone()),
            ReadKSource::Srinivasan { policy: PairingPolicy::sweep(30), x: x.clone() },
            ReadKSource::Srinivasan { policy: PairingPolicy::RandomPair, x: x.clone() },
        ] {
            let report = run_read_k_tail(&family, &source, &[0.05, 0.1, 0.2], Tails::Lower, 50_000, seed).unwrap();
            assert_eq!(report.rows.len(), 3);
            for row in &report.rows {
                assert_eq!(row.tail, Tail::Lower);
                assert!(row.ok, "family {seed}: {row:?}");
            }
        }
    }
}

#[test]
fn upper_tail_rejects_submodular_blocks() {
    // OR of two variables is strictly submodular
    let or = BlockFunction::new(vec![0, 1], vec![0.0, 1.0, 1.0, 1.0]).unwrap();
    let family = ReadKFamily::new(2, vec![or]).unwrap();
    let x = random_point(2, &mut rng::from_seed(1));
    let err = run_read_k_tail(&family, &ReadKSource::Independent(x.clone()), &[0.1], Tails::Upper, 100, 0).unwrap_err();
    assert!(err.to_string().contains("supermodular"), "{err}");
    assert!(run_read_k_tail(&family, &ReadKSource::Independent(x), &[0.1], Tails::Lower, 100, 0).is_ok());
}
