use std::sync::Arc;

use subround::corpus::random_instance;
use subround::multiobj::{
    brute_force_feasibility, default_steps, greedy_max, solve, stage1_preprocess, stage2_continuous_greedy,
    stage3_round, MultiObjInstance, StageTwoResult,
};
use subround::rng;
use subround::setfn::{contract, multilinear_exact, Coverage, SharedFn, Subset};

const ONE_MINUS_INV_E: f64 = 1.0 - 1.0 / std::f64::consts::E;

/// Scans combinations from the lexicographically last one backwards.
fn brute_force_reverse(inst: &MultiObjInstance) -> Option<Vec<usize>> {
    let (n, k) = (inst.n(), inst.k());
    let mut idx: Vec<usize> = (n - k..n).collect();
    loop {
        let s = Subset::from_indices(n, &idx).unwrap();
        if inst.values(&s).iter().zip(inst.targets()).all(|(a, v)| a >= v) {
            return Some(idx);
        }
        let p = (0..k).rev().find(|&p| idx[p] > if p == 0 { 0 } else { idx[p - 1] + 1 })?;
        idx[p] -= 1;
        for q in p + 1..k {
            idx[q] = n - k + q;
        }
    }
}

#[test]
fn brute_force_agrees_with_reverse_scan() {
    for t in 0..60u64 {
        let mut r = rng::stream(31, t);
        let slack = [0.9, 1.0, 1.1, 1.3][t as usize % 4];
        let inst = random_instance(5 + t as usize % 6, 1 + t as usize % 2, 1 + t as usize % 4, 0.5, slack, &mut r);
        let fwd = brute_force_feasibility(&inst).unwrap();
        let rev = brute_force_reverse(&inst);
        assert_eq!(fwd.is_some(), rev.is_some(), "instance {t}");
        for s in [fwd, rev].into_iter().flatten() {
            assert_eq!(s.len(), inst.k());
            let set = Subset::from_indices(inst.n(), &s).unwrap();
            assert!(inst.values(&set).iter().zip(inst.targets()).all(|(a, v)| a >= v));
        }
    }
}

#[test]
fn stage_two_reaches_the_scaled_target_on_six_elements() {
    let f: SharedFn = Arc::new(
        Coverage::new(8, None, vec![vec![0, 1], vec![2, 3], vec![4, 5], vec![6, 7], vec![0, 2, 4], vec![1, 3]]).unwrap(),
    );
    let best = brute_force_feasibility(&MultiObjInstance::new(vec![f.clone()], 3, vec![6.0], 0.5).unwrap()).unwrap();
    assert!(best.is_some());
    let inst = MultiObjInstance::new(vec![f.clone()], 3, vec![6.0], 0.9).unwrap();
    let s1 = stage1_preprocess(&inst);
    let k1 = inst.k() - s1.set.len();
    assert!(k1 >= 1, "stage 1 took {:?}", s1.set);
    for steps in [50, 200] {
        let StageTwoResult::Fractional { x, .. } = stage2_continuous_greedy(&inst, &s1, steps, 0).unwrap() else {
            panic!("feasible instance certified")
        };
        let g = contract(f.clone(), &s1.set).unwrap();
        let value = multilinear_exact(&g, &x).unwrap();
        let need = ONE_MINUS_INV_E * k1 as f64 / inst.k() as f64 * (6.0 - s1.values[0]);
        assert!(value >= need - 4.0 / steps as f64, "steps {steps}: {value} < {need}");
    }
}

#[test]
fn stage_two_stays_in_the_budget_polytope() {
    let mut checked = 0;
    for t in 0..20u64 {
        let mut r = rng::stream(41, t);
        let inst = random_instance(10, 2, 6, 0.9, 1.0, &mut r);
        let s1 = stage1_preprocess(&inst);
        if s1.set.len() >= inst.k() || s1.satisfied.len() == inst.m() {
            continue;
        }
        let k1 = (inst.k() - s1.set.len()) as f64;
        if let StageTwoResult::Fractional { x, free, .. } = stage2_continuous_greedy(&inst, &s1, 25, t).unwrap() {
            assert!(x.as_slice().iter().all(|v| (0.0..=1.0).contains(v)));
            assert!((x.sum() - k1).abs() <= 1e-9);
            assert_eq!(free.len(), inst.n() - s1.set.len());
            for seed in 0..20 {
                assert_eq!(stage3_round(&x, &free, &s1, inst.k(), seed).unwrap().len(), inst.k());
            }
            checked += 1;
        }
    }
    assert!(checked >= 5, "only {checked} instances reached the continuous greedy");
}

#[test]
fn generous_targets_meet_the_factor() {
    for t in 0..5u64 {
        let mut r = rng::stream(51, t);
        let base = random_instance(24, 1, 12, 0.6, 1.0, &mut r);
        let greedy = greedy_max(base.objectives()[0].as_ref(), 12);
        let targets = base.values(&greedy).iter().map(|v| 0.01 * v).collect();
        let inst = base.with_targets(targets).unwrap();
        assert!(inst.guarantee_factor() > 0.0);
        let wins = (0..30)
            .filter(|&s| solve(&inst, default_steps(inst.eps()), s).unwrap().solution().is_some_and(|x| x.meets_guarantee))
            .count();
        assert!(wins > 15, "instance {t}: {wins}/30");
    }
}

#[test]
fn stage_three_meets_each_scaled_inequality_often() {
    // targets from a known 8-set of a 16-element instance
    let mut checked = 0;
    for t in 0..4u64 {
        let mut r = rng::stream(61, t);
        let inst = random_instance(16, 2, 8, 0.9, 1.0, &mut r);
        let s1 = stage1_preprocess(&inst);
        if s1.set.len() >= inst.k() || s1.satisfied.len() == inst.m() {
            continue;
        }
        let StageTwoResult::Fractional { x, free, .. } = stage2_continuous_greedy(&inst, &s1, 40, 0).unwrap() else {
            panic!("feasible instance certified")
        };
        let k1 = (inst.k() - s1.set.len()) as f64;
        for i in s1.unsatisfied(inst.m()) {
            let need = (1.0 - inst.eps()) * ONE_MINUS_INV_E * k1 / inst.k() as f64 * (inst.targets()[i] - s1.values[i]);
            let hits = (0..100u64)
                .filter(|&seed| {
                    let s = stage3_round(&x, &free, &s1, inst.k(), seed).unwrap();
                    inst.objectives()[i].value(&s) - s1.values[i] >= need
                })
                .count();
            assert!(hits >= 50, "instance {t}, objective {i}: {hits}/100");
            checked += 1;
        }
    }
    assert!(checked >= 2, "only {checked} inequalities checked");
}
