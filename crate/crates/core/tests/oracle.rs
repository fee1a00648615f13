mod common;

use std::f64::consts::{PI, TAU};

use common::{max_abs_diff, random_sequence_equivalence, series_on_grid, GridPdf, GRID_POINTS};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use spintrack::circdist::{DEFAULT_J_MAX, DEFAULT_PRUNE_TOL};
use spintrack::{CircularDistribution, SensorParams};

fn params() -> SensorParams {
    SensorParams {
        tau0: 20e-9,
        max_k: 7,
        t2_star: 100e-6,
        xi0: 1.0,
        xi1: 1.0,
        overhead: 0.0,
    }
}

/// Coefficients of a sampled density by direct quadrature on the grid.
fn grid_coefficients(g: &GridPdf, orders: usize) -> Vec<Complex64> {
    let n = g.len();
    (0..=orders)
        .map(|j| {
            let mut acc = Complex64::new(0.0, 0.0);
            for (i, &v) in g.values.iter().enumerate() {
                acc += v * Complex64::from_polar(1.0, -(j as f64) * GridPdf::phase_of(n, i));
            }
            acc / n as f64
        })
        .collect()
}

#[test]
fn random_sequences_match_grid() {
    let eq = random_sequence_equivalence(60, 20, 7);
    assert!(eq.max_err < 1e-8, "max pointwise error {:e}", eq.max_err);
}

#[test]
fn seven_coefficient_prior_update() {
    let coeffs = [
        Complex64::new(1.0 / TAU, 0.0),
        Complex64::new(0.03, -0.02),
        Complex64::new(-0.015, 0.02),
        Complex64::new(0.01, 0.008),
    ];
    let mut d = CircularDistribution::from_coefficients(&coeffs, DEFAULT_J_MAX, DEFAULT_PRUNE_TOL).unwrap();
    // prior sampled by direct summation, independent of the library evaluator
    let mut g = GridPdf::from_fn(GRID_POINTS, |phi| {
        let mut v = coeffs[0].re;
        for (j, c) in coeffs.iter().enumerate().skip(1) {
            v += 2.0 * (c * Complex64::from_polar(1.0, j as f64 * phi)).re;
        }
        v
    });
    assert!(g.values.iter().all(|&v| v > 0.0));
    let p = SensorParams { xi0: 0.88, ..params() };
    d.bayes_update(0, 2, 0.7, &p).unwrap();
    g.bayes(0, 2, 0.7, &p);
    let err = max_abs_diff(&d, &g, 1);
    assert!(err < 1e-9, "{err:e}");
}

#[test]
fn random_three_coefficient_evaluation() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..20 {
        let c: Vec<Complex64> = (0..3)
            .map(|j| {
                if j == 0 {
                    Complex64::new(1.0 / TAU, 0.0)
                } else {
                    Complex64::new(rng.random_range(-0.05..0.05), rng.random_range(-0.05..0.05))
                }
            })
            .collect();
        let d = CircularDistribution::from_coefficients(&c, DEFAULT_J_MAX, DEFAULT_PRUNE_TOL).unwrap();
        for _ in 0..50 {
            let phi: f64 = rng.random_range(-PI..PI);
            let direct = c[0].re
                + 2.0 * (c[1] * Complex64::from_polar(1.0, phi)).re
                + 2.0 * (c[2] * Complex64::from_polar(1.0, 2.0 * phi)).re;
            assert!((d.evaluate_pdf(phi) - direct).abs() < 1e-12);
        }
    }
}

#[test]
fn wrapped_gaussian_holevo_std() {
    let tau0 = 20e-9;
    for &sigma in &[0.05, 0.1, 0.3] {
        let center = 1.1;
        let g = GridPdf::from_fn(GRID_POINTS, |phi| {
            (-3..=3)
                .map(|m| {
                    let x = phi - center + TAU * m as f64;
                    (-x * x / (2.0 * sigma * sigma)).exp()
                })
                .sum()
        });
        let orders = (12.0 / sigma) as usize;
        let c = grid_coefficients(&g, orders);
        let d = CircularDistribution::from_coefficients(&c, DEFAULT_J_MAX, DEFAULT_PRUNE_TOL).unwrap();
        let f = d.holevo_std(tau0).unwrap();
        let expected = sigma / (TAU * tau0);
        assert!((f / expected - 1.0).abs() < 0.05, "sigma {sigma}: {f} vs {expected}");
        let est = d.estimate_frequency(tau0).unwrap();
        assert!((est - center / (TAU * tau0)).abs() < 1e-6 * expected);
    }
}

#[test]
fn estimate_matches_grid_argmax() {
    let p = SensorParams {
        t2_star: f64::INFINITY,
        ..params()
    };
    let n = GRID_POINTS;
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..5 {
        // bright fringes centred on a grid point, so the posterior peaks there
        let peak_index = rng.random_range(0..n);
        let peak = GridPdf::phase_of(n, peak_index);
        let mut d = CircularDistribution::uniform(DEFAULT_J_MAX, DEFAULT_PRUNE_TOL).unwrap();
        let mut g = GridPdf::uniform(n);
        for k in (0..=7).rev() {
            for _ in 0..3 {
                let theta = -((1u64 << k) as f64) * peak;
                d.bayes_update(0, k, theta, &p).unwrap();
                g.bayes(0, k, theta, &p);
            }
        }
        let cell = TAU / n as f64;
        let argmax = g.argmax_phase();
        assert!((argmax - peak).abs() < 0.5 * cell);
        let est_phase = d.estimate_frequency(p.tau0).unwrap() * TAU * p.tau0;
        let diff = (est_phase - argmax + PI).rem_euclid(TAU) - PI;
        assert!(diff.abs() <= cell, "{diff} vs cell {cell}");
    }
}

#[test]
fn single_update_posterior_shape() {
    let p = SensorParams {
        t2_star: f64::INFINITY,
        ..params()
    };
    let mut d = CircularDistribution::uniform(DEFAULT_J_MAX, DEFAULT_PRUNE_TOL).unwrap();
    d.bayes_update(0, 0, 0.0, &p).unwrap();
    let grid = series_on_grid(&d, 64, 1);
    for (i, v) in grid.iter().enumerate() {
        let phi = GridPdf::phase_of(64, i);
        assert!((v - (1.0 + phi.cos()) / TAU).abs() < 1e-15);
    }
}
