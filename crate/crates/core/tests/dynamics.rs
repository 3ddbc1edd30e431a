mod common;

use cbf_core::dynamics::{rhs_additive, rhs_multiplicative, validate_config, NoiseCase, Regime};
use cbf_core::field::{compute_norms, trilinear_b};
use cbf_core::forcing::{ForcingMode, ForcingProfile};
use cbf_core::{Error, SpectralField};
use common::*;

#[test]
fn admissible_region() {
    let mut c = cfg(8, NoiseCase::Multiplicative);
    (c.r, c.beta, c.mu) = (3.0, 1.0, 0.5);
    assert_eq!(validate_config(&c).unwrap().regime, Regime::Critical);
    (c.beta, c.mu) = (0.4, 1.0);
    match validate_config(&c) {
        Err(Error::Config(m)) => assert!(m.contains("2*beta*mu >= 1"), "{m}"),
        other => panic!("{other:?}"),
    }
    (c.r, c.beta, c.mu) = (5.0, 1e-3, 1e-3);
    assert_eq!(validate_config(&c).unwrap().regime, Regime::Supercritical);
    c.r = 2.5;
    assert!(matches!(validate_config(&c), Err(Error::Config(_))));
}

#[test]
fn rest_state_with_no_forcing() {
    let c = cfg(16, NoiseCase::Multiplicative);
    let z = SpectralField::zeros(c.grid);
    assert_eq!(rhs_multiplicative(&z, 0.7, &z, &c).unwrap().total().norm(), 0.0);
}

#[test]
fn linear_shear_mode() {
    let mut c = cfg(16, NoiseCase::Multiplicative);
    c.beta = 0.0;
    let u = SpectralField::plane_wave(c.grid, [0, 2, 0], [0.9, 0.0, 0.0], [0.0, 0.0, 0.3]);
    let f = field(c.grid, 4, 1.0);
    let k2 = (2.0 * 2.0 * std::f64::consts::PI / L).powi(2);
    let mut expect = u.scaled(-(c.mu * k2 + c.alpha));
    expect.axpy(1.0, &f).unwrap();
    let got = rhs_multiplicative(&u, 0.0, &f, &c).unwrap().total();
    assert!(got.sub(&expect).unwrap().norm() < 1e-12 * expect.norm());
}

#[test]
fn energy_pairing_term_by_term() {
    let c = cfg(16, NoiseCase::Multiplicative);
    let u = field(c.grid, 5, 2.5);
    let f = field(c.grid, 6, 1.7);
    let y = -0.6;
    let total = rhs_multiplicative(&u, y, &f, &c).unwrap().total().inner(&u).unwrap();
    let n = compute_norms(&u, c.r, L).unwrap();
    let closed = -(c.alpha - c.sigma * y) * n.h_norm.powi(2) - c.mu * n.grad_norm.powi(2)
        - c.beta * ((c.r - 1.0) * y).exp() * n.lp_norm.powf(c.r + 1.0)
        + (-y).exp() * f.inner(&u).unwrap();
    assert!(rel(total, closed) < 1e-9, "{total} {closed}");
    let young = (1.0 / c.alpha) * (2.0 * y.abs()).exp() * f.norm_sq() + c.alpha / 4.0 * n.h_norm.powi(2);
    assert!(total <= closed - (-y).exp() * f.inner(&u).unwrap() + young);
}

#[test]
fn additive_reductions() {
    let mut c = cfg(16, NoiseCase::Additive);
    let f = field(c.grid, 7, 1.0);
    let u = field(c.grid, 8, 2.0);
    c.g = Some(field(c.grid, 9, 0.4));
    let add = rhs_additive(&u, 0.0, &f, &c).unwrap().total();
    let mut m = c.clone();
    m.case = NoiseCase::Multiplicative;
    let mul = rhs_multiplicative(&u, 0.0, &f, &m).unwrap().total();
    assert!(add.sub(&mul).unwrap().norm() < 1e-12 * mul.norm());
    c.g = None;
    let add0 = rhs_additive(&u, 0.9, &f, &c).unwrap().total();
    let mul0 = rhs_multiplicative(&u, 0.0, &f, &m).unwrap().total();
    assert!(add0.sub(&mul0).unwrap().norm() < 1e-12 * mul0.norm());
}

#[test]
fn additive_cancellation() {
    let mut c = cfg(16, NoiseCase::Additive);
    let g = field(c.grid, 10, 0.5);
    c.g = Some(g.clone());
    let y = 0.8;
    let u = g.scaled(-y);
    let z = SpectralField::zeros(c.grid);
    let got = rhs_additive(&u, y, &z, &c).unwrap().total();
    // Nonlinear terms vanish; -(mu A + alpha)(-g y) + (sigma - alpha) g y - mu y A g = sigma y g.
    let expect = g.scaled(c.sigma * y);
    assert!(got.sub(&expect).unwrap().norm() < 1e-12 * expect.norm());
}

#[test]
fn additive_rejects_rough_or_compressible_g() {
    let mut c = cfg(8, NoiseCase::Additive);
    c.g = Some(SpectralField::from_fn(c.grid, |x| [x[0].sin(), 0.0, 0.0]));
    assert!(matches!(validate_config(&c), Err(Error::Config(_))));
}

#[test]
fn convection_pairing_is_zero_on_every_assembly() {
    let c = cfg(16, NoiseCase::Multiplicative);
    for s in 0..3 {
        let u = field(c.grid, 40 + s, 3.0);
        let scale = u.norm() * (u.norm_sq() + u.grad_norm_sq());
        assert!(trilinear_b(&u, &u, &u).unwrap().abs() < 1e-10 * scale);
    }
}

#[test]
fn forcing_approach_integral_closed_form() {
    let g = grid(16);
    let f = ForcingProfile::gaussian_curl(g, 1.0, 1.5, 2, ForcingMode::ExpRelax).unwrap();
    let n2 = f.f_inf().norm_sq();
    for tau in [-1.0, -4.0, -8.0] {
        // midpoint rule on (e^t)^2 from tau - 40
        let h = 1e-3;
        let num: f64 = (0..40_000).map(|i| (2.0 * (tau - 40.0 + (i as f64 + 0.5) * h)).exp() * h).sum::<f64>() * n2;
        assert!(rel(f.approach_integral(tau), num) < 1e-6);
        assert!(rel(f.approach_integral(tau), 0.5 * (2.0 * tau).exp() * n2) < 1e-14);
    }
    assert!(f.sobolev_history(0.5, 0.0).unwrap().is_finite());
    assert!(f.sobolev_history(0.0, 0.0).is_err());
}
