mod common;

use cbf_core::attractor::Omega;
use cbf_core::config::RunConfig;
use cbf_core::constants::FROZEN;
use cbf_core::diagnostics::{
    absorbing_integral, absorbing_radius, absorption_time, flattening_remainder, forcing_functionals, inequality_ledger, mass_partition,
    moment_weight, spectral_remainder, tail_mass,
};
use cbf_core::dynamics::NoiseCase;
use cbf_core::experiment::simulate_run;
use cbf_core::field::Nonlinear;
use cbf_core::forcing::{ForcingMode, ForcingProfile};
use cbf_core::integrator::{evolve, EvolveOptions};
use cbf_core::{Error, Grid, SpectralField};
use common::*;
use proptest::prelude::*;

#[test]
fn concentrated_field_has_no_tail() {
    let g = grid(32);
    let u = ForcingProfile::gaussian_curl(g, 1.0, 0.9, 2, ForcingMode::Autonomous).unwrap().f_inf().clone();
    let m = tail_mass(&u, L / 3.0).unwrap();
    assert!(m <= 1e-8 * u.norm_sq(), "{m}");
    assert!(matches!(tail_mass(&u, L / 2.0), Err(Error::Range(_))));
}

#[test]
fn tiny_radius_keeps_everything_but_the_origin_node() {
    let g = grid(16);
    let u = field(g, 3, 2.0);
    let pad = Nonlinear::new(g).padded_physical(&u);
    let origin = pad.grid.index(pad.grid.dims[0] / 2, pad.grid.dims[1] / 2, pad.grid.dims[2] / 2);
    let at0: f64 = (0..3).map(|c| pad.data[c][origin].powi(2)).sum::<f64>() * pad.grid.cell_volume();
    let m = tail_mass(&u, 0.1 * pad.grid.spacing(0)).unwrap();
    assert!(rel(m, u.norm_sq() - at0) < 1e-12, "{m} {}", u.norm_sq());
}

#[test]
fn partition_is_consistent() {
    let g = grid(16);
    for s in 0..5 {
        let u = field(g, 20 + s, 1.0 + s as f64);
        for frac in [1.0 / 8.0, 1.0 / 6.0, 0.25, 1.0 / 3.0] {
            let p = mass_partition(&u, frac * L).unwrap();
            assert!(rel(p.total, u.norm_sq()) < 1e-12);
            assert!((p.total - p.tail - p.interior).abs() <= p.overlap * (1.0 + 1e-12));
        }
    }
}

#[test]
fn flattening_single_modes() {
    let g = grid(16);
    let low = SpectralField::plane_wave(g, [1, 0, 0], [0.0, 1.0, 0.0], [0.0; 3]);
    // k = 0 plus the six unit modes fill the first seven slots.
    assert!(spectral_remainder(&low, 7).unwrap().remainder < 1e-28);
    let high = SpectralField::plane_wave(g, [4, 4, 2], [1.0, -1.0, 0.0], [0.0; 3]);
    let r = spectral_remainder(&high, 7).unwrap();
    assert!(rel(r.remainder, high.norm_sq()) < 1e-14);
    assert!(matches!(spectral_remainder(&high, g.len() + 1), Err(Error::Range(_))));
}

#[test]
fn flattening_obeys_the_spectral_gap() {
    let g = grid(16);
    for s in 0..20 {
        let u = field(g, 200 + s, 1.0 + s as f64 * 0.3);
        let mut last = f64::INFINITY;
        for i in [7, 33, 123, 257] {
            let f = flattening_remainder(&u, L / 4.0, i).unwrap();
            assert!(f.remainder <= f.total * (1.0 + 1e-14));
            assert!(f.remainder <= f.gap_bound() * (1.0 + 1e-12), "i={i} {} {}", f.remainder, f.gap_bound());
            assert!(f.remainder <= last);
            last = f.remainder;
        }
    }
}

#[test]
fn uniform_integrability_at_kappa_alpha() {
    let c = cfg(16, NoiseCase::Multiplicative);
    let f = ForcingProfile::gaussian_curl(c.grid, 1.0, 1.5, 2, ForcingMode::ExpRelax).unwrap();
    let n2 = f.f_inf().norm_sq();
    let tau = -1.5;
    let rows = forcing_functionals(&f, &c, tau, [L / 8.0, L / 6.0, L / 4.0, L / 3.0]).unwrap();
    assert_eq!(rows.len(), 3);
    let at_alpha = rows.iter().find(|r| r.kappa == c.alpha).unwrap();
    let h = 1e-3;
    let num: f64 = (0..60_000)
        .map(|i| {
            let xi = tau - 60.0 + (i as f64 + 0.5) * h;
            (c.alpha * (xi - tau)).exp() * ((xi).exp() + 1.0).powi(2) * h
        })
        .sum::<f64>()
        * n2;
    assert!(rel(at_alpha.uniform_integrability, num) < 1e-6, "{} {num}", at_alpha.uniform_integrability);
    for r in &rows {
        assert!(r.tails.windows(2).all(|w| w[1] <= w[0]));
        assert!(r.tails[0] <= r.uniform_integrability);
    }
}

#[test]
fn zero_run_has_nonpositive_residuals() {
    for case in [NoiseCase::Multiplicative, NoiseCase::Additive] {
        let mut c = cfg(16, case);
        if case == NoiseCase::Additive {
            c.g = Some(SpectralField::zeros(c.grid));
        }
        let z = SpectralField::zeros(c.grid);
        let opts = EvolveOptions { ledger: true, ..Default::default() };
        let tr = evolve(&z, 0.0, 1.0, &quiet_drive(-1.0, 2.0), &c, &ForcingProfile::zero(c.grid), opts).unwrap();
        let rep = inequality_ledger(&tr.ledger, &c, &FROZEN);
        assert!(rep.max_ei1 <= 0.0 && rep.max_ei2 <= 0.0, "{rep:?}");
        assert_eq!(rep.ei1_breaches + rep.ei2_breaches, 0);
    }
}

#[test]
fn rediagnosis_is_bit_exact() {
    let mut run = RunConfig::default();
    run.simulate.horizon = 2.0;
    let res = run.resolve().unwrap();
    let a = simulate_run(&run, &res, true).unwrap();
    let b = simulate_run(&run, &res, true).unwrap();
    let ra = inequality_ledger(&a.trajectory.ledger, &res.sim, &FROZEN);
    let rb = inequality_ledger(&b.trajectory.ledger, &res.sim, &FROZEN);
    assert_eq!(serde_json::to_string(&ra).unwrap(), serde_json::to_string(&rb).unwrap());
}

#[test]
fn absorbing_radius_grows_with_tau() {
    let c = cfg(16, NoiseCase::Multiplicative);
    let f = ForcingProfile::gaussian_curl(c.grid, 1.0, 1.5, 2, ForcingMode::ExpRelax).unwrap();
    let om = Omega::sample(3, 50.0, 1.0, 0.05, 1.0).unwrap();
    let s_grid: Vec<f64> = (0..=40).map(|j| -10.0 + 0.25 * j as f64).collect();
    let mut last = 0.0;
    for tau in [-8.0, -6.0, -4.0, -2.0, 0.0] {
        let r = absorbing_radius(&om.ou, tau, &s_grid, &f, &c, 40.0, &FROZEN).unwrap();
        assert!(r.sup_k >= last);
        assert!(r.tail_bound < 1e-6 * r.sup_k);
        last = r.sup_k;
    }
    assert!(matches!(absorbing_integral(&om.ou, 0.0, &f, &c, 60.0), Err(Error::Range(_))));
    let mut a = c.clone();
    a.case = NoiseCase::Additive;
    let k = absorbing_integral(&om.ou, -1.0, &f, &a, 40.0).unwrap();
    assert!(k.value.is_finite() && k.value > 0.0);
}

#[test]
fn absorption_time_is_the_last_crossing() {
    let c = cfg(8, NoiseCase::Multiplicative);
    let om = Omega::quiet(1, 50.0, 1.0, 0.05, 1.0).unwrap();
    let t_grid: Vec<f64> = (1..=40).map(f64::from).collect();
    // e^{-t} 100 <= 2 => t >= ln 50 = 3.91
    assert_eq!(absorption_time(&om.ou, &c, 1.0, &t_grid, |_| 100.0), Some(4.0));
    assert_eq!(absorption_time(&om.ou, &c, 0.0, &t_grid, |_| 100.0), None);
}

#[test]
fn moment_weights_are_finite_and_stable_in_the_cut() {
    let c = cfg(8, NoiseCase::Multiplicative);
    let om = Omega::sample(5, 80.0, 1.0, 0.05, 1.0).unwrap();
    let a = moment_weight(&om.ou, &c, 3.0, 1.0, 60.0).unwrap();
    let b = moment_weight(&om.ou, &c, 3.0, 1.0, 80.0).unwrap();
    assert!(a.is_finite() && rel(a, b) < 1e-3, "{a} {b}");
    assert!(moment_weight(&om.ou, &c, 2.0, 1.0, 60.0).is_err());
}

fn small() -> Grid {
    grid(8)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn remainder_is_monotone_in_modes(seed in any::<u64>(), i in 0usize..500, j in 0usize..12) {
        let u = field(small(), seed, 1.0);
        let a = spectral_remainder(&u, i).unwrap();
        let b = spectral_remainder(&u, i + j).unwrap();
        prop_assert!(b.remainder <= a.remainder);
        prop_assert!(a.remainder <= a.gap_bound() * (1.0 + 1e-12));
    }
}
