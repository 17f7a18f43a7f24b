use std::f64::consts::PI;

use proptest::prelude::*;
use quench_core::asymptotics::{
    airy, airy_negative_asymptote, bessel_diagonal_limit, bessel_j, cosine_argument,
    default_oncone_window, dimer_bessel_correlator, dimer_oncone_amplitude, extremal_lines,
    offcone_prediction, oncone_decay_fit, uniform_airy_bessel, AiryRegionPoint, OnConeOptions,
    AIRY_AT_ZERO, GAMMA_TWO_THIRDS,
};
use quench_core::evolution::{dimer_exact, time_grid};
use quench_core::{correlation_trace, ChainSpec, QuenchError, StateFamily, Tolerances};

/// Ai(z) from the contour integral (1/pi) int_0^inf exp(-r^3/3 - z r/2)
/// cos(pi/6 + sqrt3 z r/2) dr, by composite Simpson on [0, 12].
fn airy_quadrature(z: f64) -> f64 {
    let (a, b, m) = (0.0, 12.0, 24000usize);
    let h = (b - a) / m as f64;
    let f = |r: f64| (-r * r * r / 3.0 - z * r / 2.0).exp() * (PI / 6.0 + 3f64.sqrt() * z * r / 2.0).cos();
    let mut acc = f(a) + f(b);
    for i in 1..m {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        acc += w * f(a + i as f64 * h);
    }
    acc * h / 3.0 / PI
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn bessel_recurrence(n in 1usize..400, frac in 0.5f64..3.0) {
        let nu = frac * n as f64 + 0.1;
        let lhs = bessel_j(n - 1, nu).unwrap() + bessel_j(n + 1, nu).unwrap();
        let rhs = 2.0 * n as f64 / nu * bessel_j(n, nu).unwrap();
        prop_assert!((lhs - rhs).abs() < 1e-8, "n={n} nu={nu}: {lhs} vs {rhs}");
    }

    #[test]
    fn airy_matches_contour_integral(z in -10.0f64..6.0) {
        let a = airy(z).unwrap();
        let q = airy_quadrature(z);
        prop_assert!((a - q).abs() < 1e-9, "z={z}: {a} vs {q}");
    }

    #[test]
    fn airy_satisfies_its_ode(z in -12.0f64..8.0) {
        let h = 1e-2;
        let f = |x: f64| airy(x).unwrap();
        let d2 = (-f(z + 2.0 * h) + 16.0 * f(z + h) - 30.0 * f(z) + 16.0 * f(z - h) - f(z - 2.0 * h))
            / (12.0 * h * h);
        prop_assert!((d2 - z * f(z)).abs() < 1e-6);
    }

    #[test]
    fn extremal_loci_invert(n in 1usize..8, x in 5.0f64..300.0) {
        let p = extremal_lines(n, &[x]).unwrap()[0];
        prop_assert!(p.t > x / 2.0);
        prop_assert!(p.z > 0.0);
        let back = cosine_argument(x, p.t);
        prop_assert!((back - n as f64 * PI).abs() < 1e-10);
    }
}

#[test]
fn bessel_basics() {
    assert!((bessel_j(0, 0.0).unwrap() - 1.0).abs() < 1e-15);
    assert!(bessel_j(1, 0.0).unwrap().abs() < 1e-15);
    // Tabulated J_0(1), J_5(10).
    assert!((bessel_j(0, 1.0).unwrap() - 0.765_197_686_557_966_6).abs() < 1e-12);
    assert!((bessel_j(5, 10.0).unwrap() + 0.234_061_528_186_793_6).abs() < 1e-12);
    assert!(bessel_j(2001, 1.0).is_err());
    assert!(bessel_j(3, 2500.0).is_err());
}

#[test]
fn bessel_diagonal_approaches_its_limit() {
    let want = 2f64.powf(1.0 / 3.0) / (3f64.powf(2.0 / 3.0) * GAMMA_TWO_THIRDS);
    assert!((bessel_diagonal_limit() - want).abs() < 1e-14);
    let x = 500.0;
    let got = bessel_j(500, x).unwrap() * x.powf(1.0 / 3.0);
    assert!((got - want).abs() / want < 0.01, "{got} vs {want}");
}

#[test]
fn airy_at_zero_and_large_negative_argument() {
    let want = 1.0 / (3f64.powf(2.0 / 3.0) * GAMMA_TWO_THIRDS);
    assert!((AIRY_AT_ZERO - want).abs() < 1e-15);
    assert!((airy(0.0).unwrap() - want).abs() < 1e-12);
    assert!((airy_quadrature(0.0) - want).abs() < 1e-10);
    assert!(airy(51.0).is_err());
    // Relative to the oscillation envelope pi^{-1/2} z^{-1/4}; the pointwise
    // ratio is meaningless near the zeros of the sine.
    let z: f64 = 10.0;
    let envelope = z.powf(-0.25) / PI.sqrt();
    let err = (airy(-z).unwrap() - airy_negative_asymptote(z)).abs() / envelope;
    assert!(err < 0.02, "{err}");
}

#[test]
fn uniform_airy_link_at_order_200() {
    let nu = 200usize;
    let mut worst: f64 = 0.0;
    for i in 0..=30 {
        let z = 0.1 * i as f64;
        let arg = nu as f64 + z * (nu as f64).powf(1.0 / 3.0);
        let exact = bessel_j(nu, arg).unwrap();
        let approx = uniform_airy_bessel(nu as f64, z).unwrap();
        worst = worst.max((approx - exact).abs() / exact.abs());
    }
    assert!(worst < 0.02, "worst relative deviation {worst}");
}

#[test]
fn dimer_correlator_examples() {
    assert!(dimer_bessel_correlator(3, 0.0).unwrap().abs() < 1e-15);
    let amp = dimer_oncone_amplitude();
    assert!((amp - AIRY_AT_ZERO / 2.0).abs() < 1e-15);
    // On x = 2t the recurrence reduces the pair to one Bessel function.
    for x in [20usize, 45, 90] {
        let t = x as f64 / 2.0;
        let half = 0.5 * bessel_j(x, 2.0 * t).unwrap().abs();
        let c = dimer_bessel_correlator(x, t).unwrap();
        assert!((c - half).abs() / half < 0.05);
    }
}

#[test]
fn dimer_correlator_matches_lattice_sum() {
    let spec = ChainSpec::new(240).unwrap();
    let mut worst: f64 = 0.0;
    for x in 6..60 {
        for i in 1..240 {
            let t = 0.25 * i as f64;
            let lattice = dimer_exact(1, 1 + x, t, spec).unwrap().norm();
            let bessel = dimer_bessel_correlator(x, t).unwrap();
            if lattice < 1e-6 {
                continue;
            }
            worst = worst.max((bessel - lattice).abs() / lattice);
        }
    }
    assert!(worst < 1e-2, "worst relative deviation {worst}");
}

#[test]
fn offcone_prediction_domain() {
    assert!(matches!(
        offcone_prediction(40.0, 20.0).unwrap_err(),
        QuenchError::OutOfRange(_)
    ));
    assert!(offcone_prediction(40.0, 25.0).is_ok());
    let p = AiryRegionPoint::new(40.0, 30.0);
    assert!((p.z - 20.0 / 40f64.powf(1.0 / 3.0)).abs() < 1e-12);
}

#[test]
fn offcone_zeros_sit_on_half_integer_lines() {
    for n in 1..5 {
        let phase = (n as f64 + 0.5) * PI + PI / 4.0;
        for x in [40.0, 70.0, 100.0] {
            let t = (2.0 * x + (3.0 * f64::sqrt(x) * phase).powf(2.0 / 3.0)) / 4.0;
            assert!(offcone_prediction(x, t).unwrap() < 1e-12);
        }
    }
}

#[test]
fn offcone_scales_as_inverse_cube_root_along_a_locus() {
    let xs: Vec<f64> = (40..=100).step_by(10).map(|x| x as f64).collect();
    for n in 1..4 {
        let loci = extremal_lines(n, &xs).unwrap();
        let scaled: Vec<f64> = loci
            .iter()
            .map(|p| offcone_prediction(p.x, p.t).unwrap() * p.x.powf(1.0 / 3.0))
            .collect();
        for s in &scaled {
            assert!((s - scaled[0]).abs() / scaled[0] < 1e-10);
        }
        for p in &loci {
            assert!((p.z - loci[0].z).abs() < 1e-10);
        }
    }
}

#[test]
fn offcone_matches_half_bessel_on_first_extremal_line() {
    let xs: Vec<f64> = (40..=100).step_by(5).map(|x| x as f64).collect();
    for p in extremal_lines(1, &xs).unwrap() {
        let pred = offcone_prediction(p.x, p.t).unwrap();
        let half = 0.5 * bessel_j(p.x as usize, 2.0 * p.t).unwrap().abs();
        assert!((pred - half).abs() / half < 0.10, "x={} z={}: {pred} vs {half}", p.x, p.z);
    }
}

#[test]
fn offcone_matches_half_bessel_over_interior_window() {
    // Extremal lines with z in [1, 4] are n = 1 (z = 2.59) and n = 2
    // (z = 3.83). At n = 2 the expansion in (2t - x)/x, which is 0.33 at
    // x = 40, shifts the Bessel phase enough to lose the 10% agreement.
    let xs: Vec<f64> = (40..=100).step_by(5).map(|x| x as f64).collect();
    let mut worst: f64 = 0.0;
    for n in 1..=2 {
        for p in extremal_lines(n, &xs).unwrap() {
            assert!(p.z >= 1.0 && p.z <= 4.0);
            let pred = offcone_prediction(p.x, p.t).unwrap();
            let half = 0.5 * bessel_j(p.x as usize, 2.0 * p.t).unwrap().abs();
            worst = worst.max((pred - half).abs() / half);
        }
    }
    assert!(worst < 0.10, "worst relative deviation {worst}");
}

#[test]
fn dimer_oncone_fit() {
    let n = 240;
    let c0 = StateFamily::Dimer
        .build(ChainSpec::new(n).unwrap(), &Tolerances::default())
        .unwrap();
    let (lo, hi) = default_oncone_window(n, 2.0);
    assert_eq!((lo, hi), (8.0, 55.0));
    let trace = correlation_trace(&c0, &time_grid(0.5, hi)).unwrap();
    let fit = oncone_decay_fit(&trace, 2.0, &OnConeOptions::default()).unwrap();
    assert!(fit.exponent > -0.40 && fit.exponent < -0.27, "{fit:?}");
    assert!((0.0..=1.0).contains(&fit.r_squared));
    let want = dimer_oncone_amplitude();
    assert!((fit.amplitude - want).abs() / want < 0.15);

    let short = correlation_trace(&c0, &time_grid(1.0, 10.0)).unwrap();
    assert!(matches!(
        oncone_decay_fit(&short, 2.0, &OnConeOptions::default()).unwrap_err(),
        QuenchError::InsufficientSamples { .. }
    ));
}
