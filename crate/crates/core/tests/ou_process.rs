mod common;

use cbf_core::ou::{growth_statistic, ou_evaluate, ou_evaluate_from, shift_path, split_seed, OUState, WienerPath};
use cbf_core::Error;
use proptest::prelude::*;

/// Three standard errors of a sample variance of `n` Gaussians with variance `v`.
fn var_tol(v: f64, n: usize) -> f64 {
    3.0 * v * (2.0 / (n as f64 - 1.0)).sqrt()
}

fn sample_var(xs: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let m = xs.iter().sum::<f64>() / n;
    xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0)
}

#[test]
fn brownian_variance_at_unit_time() {
    let w1: Vec<f64> = (0..10_000)
        .map(|i| WienerPath::sample(split_seed(5, i), -0.01, 1.0, 0.01).unwrap().value_at(1.0).unwrap())
        .collect();
    let v = sample_var(&w1);
    assert!((v - 1.0).abs() < 0.05, "{v}");
}

#[test]
fn increments_are_centred() {
    let p = WienerPath::sample(3, -50.0, 50.0, 0.01).unwrap();
    let dw = p.increments();
    let n = dw.len() as f64;
    let m = dw.iter().map(|d| d / 0.01f64.sqrt()).sum::<f64>() / n;
    assert!(m.abs() < 4.0 / n.sqrt(), "{m}");
}

#[test]
fn stationary_variance_of_the_ou_marginals() {
    for (sigma, nodes) in [(0.5, [-1.0, 0.0, 2.0]), (1.0, [-1.0, 0.0, 2.0])] {
        for t in nodes {
            let ys: Vec<f64> = (0..10_000)
                .map(|i| {
                    let p = WienerPath::sample(split_seed(11, i), -1.0, 2.0, 0.05).unwrap();
                    ou_evaluate(&p, sigma).unwrap().y(t)
                })
                .collect();
            let v = sample_var(&ys);
            let target = 1.0 / (2.0 * sigma);
            assert!((v - target).abs() < var_tol(target, ys.len()), "sigma={sigma} t={t} var={v}");
        }
    }
}

#[test]
fn deterministic_recursion_and_zero_noise() {
    let s = OUState::from_recursion(1.0, 0.1, 0, 1.0, &[0.0]).unwrap();
    assert!((s.y_values()[1] - (-0.1f64).exp()).abs() < 1e-15);
    let z = OUState::from_recursion(1.0, 0.1, 0, 0.0, &[0.0; 20]).unwrap();
    assert!(z.y_values().iter().all(|&y| y == 0.0));
    let p = WienerPath::sample(1, -1.0, 1.0, 0.05).unwrap();
    let quiet = WienerPath::from_parts(1, 0.05, p.n_back(), vec![0.0; p.n_nodes() - 1], vec![0.0; p.n_nodes() - 1], 0.0).unwrap();
    let y = ou_evaluate_from(&quiet, 1.0, Some(0.0)).unwrap();
    assert!(y.y_values().iter().all(|&v| v == 0.0));
    assert!(matches!(ou_evaluate(&p, 0.0), Err(Error::Domain(_))));
}

#[test]
fn shift_group_property_and_ou_covariance() {
    let p = WienerPath::sample(9, -4.0, 4.0, 0.05).unwrap();
    assert_eq!(shift_path(&p, 0.0).unwrap().values(), p.values());
    let back = shift_path(&shift_path(&p, 1.0).unwrap(), -1.0).unwrap();
    for i in 0..p.n_nodes() {
        let t = p.node_time(i);
        assert!((back.value_at(t).unwrap() - p.value_at(t).unwrap()).abs() < 1e-14);
    }
    let a = shift_path(&shift_path(&p, 0.5).unwrap(), 0.25).unwrap();
    let b = shift_path(&p, 0.75).unwrap();
    let s = shift_path(&p, 0.5).unwrap();
    assert_eq!(s.value_at(0.0), Some(0.0));
    for k in -40..40 {
        let t = k as f64 * 0.05;
        let (x, y) = (a.value_at(t).unwrap(), b.value_at(t).unwrap());
        assert!((x - y).abs() < 1e-13, "{t}");
        assert!((s.value_at(t).unwrap() - (p.value_at(t + 0.5).unwrap() - p.value_at(0.5).unwrap())).abs() < 1e-13);
    }
    assert!(matches!(shift_path(&p, 10.0), Err(Error::Range(_))));
    // y on the shifted grid reads y at t + s.
    let ou = ou_evaluate(&p, 1.0).unwrap();
    let sh = ou.shifted_steps(10).unwrap();
    for k in -30..30 {
        let t = k as f64 * 0.05;
        assert_eq!(sh.y(t), ou.y(t + 0.5));
    }
}

#[test]
fn growth_statistics_are_small() {
    let p = WienerPath::sample(1, -200.0, 1.0, 0.05).unwrap();
    assert!(matches!(growth_statistic(&ou_evaluate(&WienerPath::sample(1, -50.0, 1.0, 0.05).unwrap(), 1.0).unwrap()), Err(Error::Range(_))));
    let zero = growth_statistic(&OUState::zero(&p, 1.0)).unwrap();
    assert_eq!((zero.ratio_tail, zero.ergodic_mean), (0.0, 0.0));
    let mut ratios: Vec<f64> = (0..100)
        .map(|i| {
            let p = WienerPath::sample(split_seed(2, i), -200.0, 1.0, 0.05).unwrap();
            growth_statistic(&ou_evaluate(&p, 1.0).unwrap()).unwrap().ratio_tail
        })
        .collect();
    ratios.sort_by(f64::total_cmp);
    assert!(ratios[50] < 0.05, "{}", ratios[50]);
    let long = WienerPath::sample(4, -500.0, 1.0, 0.05).unwrap();
    let g = growth_statistic(&ou_evaluate(&long, 1.0).unwrap()).unwrap();
    assert!(g.ergodic_mean.abs() < 3.0 * (1.0f64 / (2.0 * 500.0)).sqrt(), "{}", g.ergodic_mean);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn same_seed_same_path(seed in any::<u64>()) {
        let a = WienerPath::sample(seed, -1.0, 1.0, 0.05).unwrap();
        let b = WienerPath::sample(seed, -1.0, 1.0, 0.05).unwrap();
        prop_assert_eq!(a.values(), b.values());
        prop_assert_eq!(a.value_at(0.0), Some(0.0));
    }

    #[test]
    fn shifts_compose(seed in any::<u64>(), s in -20i64..20, u in -20i64..20) {
        let p = WienerPath::sample(seed, -3.0, 3.0, 0.05).unwrap();
        let a = p.shift_steps(s).unwrap().shift_steps(u).unwrap();
        let b = p.shift_steps(s + u).unwrap();
        for k in -10..10 {
            let t = k as f64 * 0.05;
            prop_assert!((a.value_at(t).unwrap() - b.value_at(t).unwrap()).abs() < 1e-12);
        }
    }
}
