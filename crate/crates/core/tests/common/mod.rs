//! Dense-grid reference for the coefficient representation.
//!
//! The density is held as samples on `n` equally spaced phases. Bayes
//! updates multiply by the likelihood pointwise and renormalize with the
//! grid sum; diffusion is a direct (real-space) sum against a wrapped
//! Gaussian kernel. Nothing here touches Fourier coefficients.

#![allow(dead_code)]

use std::f64::consts::{PI, TAU};

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use spintrack::circdist::{DEFAULT_J_MAX, DEFAULT_PRUNE_TOL};
use spintrack::{CircularDistribution, SensorParams};

pub struct GridPdf {
    pub values: Vec<f64>,
}

impl GridPdf {
    pub fn uniform(n: usize) -> Self {
        GridPdf {
            values: vec![1.0 / TAU; n],
        }
    }

    pub fn from_fn(n: usize, f: impl Fn(f64) -> f64) -> Self {
        let mut g = GridPdf {
            values: (0..n).map(|i| f(Self::phase_of(n, i))).collect(),
        };
        g.normalize();
        g
    }

    pub fn phase_of(n: usize, i: usize) -> f64 {
        TAU * i as f64 / n as f64
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn normalize(&mut self) {
        let mass: f64 = self.values.iter().sum::<f64>() * TAU / self.len() as f64;
        for v in &mut self.values {
            *v /= mass;
        }
    }

    /// Likelihood of the outcome written out from the measurement model.
    pub fn bayes(&mut self, mu: u8, k: u32, theta: f64, p: &SensorParams) {
        let n = self.len();
        let tau = p.tau0 * (1u64 << k) as f64;
        let decay = if p.t2_star.is_infinite() {
            1.0
        } else {
            (-(tau / p.t2_star).powi(2)).exp()
        };
        for i in 0..n {
            let phi = Self::phase_of(n, i);
            let p0 = (1.0 + p.xi0 - p.xi1) / 2.0
                + (p.xi0 + p.xi1 - 1.0) / 2.0 * decay * ((1u64 << k) as f64 * phi + theta).cos();
            self.values[i] *= if mu == 0 { p0 } else { 1.0 - p0 };
        }
        self.normalize();
    }

    /// Convolve with a Gaussian of standard deviation `sigma` (radians),
    /// wrapped onto the circle and truncated at `10 sigma`.
    pub fn diffuse(&mut self, sigma: f64) {
        let n = self.len();
        let h = TAU / n as f64;
        let half = (10.0 * sigma / h).ceil() as i64;
        let kernel: Vec<f64> = (-half..=half)
            .map(|m| {
                let x = m as f64 * h;
                (-x * x / (2.0 * sigma * sigma)).exp() / (sigma * (TAU).sqrt()) * h
            })
            .collect();
        let old = self.values.clone();
        for i in 0..n as i64 {
            let mut acc = 0.0;
            for (off, w) in kernel.iter().enumerate() {
                let j = (i - (off as i64 - half)).rem_euclid(n as i64) as usize;
                acc += old[j] * w;
            }
            self.values[i as usize] = acc;
        }
    }

    pub fn argmax_phase(&self) -> f64 {
        let (i, _) = self
            .values
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.total_cmp(b.1))
            .unwrap();
        Self::phase_of(self.len(), i)
    }
}

/// PDF of `d` at `n / step` grid phases, summed with a rotating phasor.
pub fn series_on_grid(d: &CircularDistribution, n: usize, step: usize) -> Vec<f64> {
    let coeffs: Vec<(usize, Complex64)> = d.nonnegative().collect();
    (0..n)
        .step_by(step)
        .map(|i| {
            let phi = GridPdf::phase_of(n, i);
            let mut acc = coeffs[0].1.re;
            for &(j, c) in &coeffs[1..] {
                let z = Complex64::from_polar(1.0, j as f64 * phi);
                acc += 2.0 * (c * z).re;
            }
            acc
        })
        .collect()
}

pub fn max_abs_diff(d: &CircularDistribution, g: &GridPdf, step: usize) -> f64 {
    let series = series_on_grid(d, g.len(), step);
    series
        .iter()
        .zip(g.values.iter().step_by(step))
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max)
}

pub const GRID_POINTS: usize = 1 << 14;

pub struct Equivalence {
    pub sequences: usize,
    pub max_err: f64,
    pub ops: usize,
}

/// Random mixed sequences of at most `max_ops` operations with `k <= 6`,
/// each replayed on the coefficient representation and on the grid.
pub fn random_sequence_equivalence(sequences: usize, max_ops: usize, seed: u64) -> Equivalence {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let tau0 = 20e-9;
    let mut max_err: f64 = 0.0;
    let mut ops = 0;
    for _ in 0..sequences {
        let params = SensorParams {
            tau0,
            max_k: 6,
            t2_star: if rng.random_bool(0.3) {
                f64::INFINITY
            } else {
                rng.random_range(2e-6..200e-6)
            },
            xi0: rng.random_range(0.7..=1.0),
            xi1: rng.random_range(0.9..=1.0),
            overhead: 0.0,
        };
        let mut d = CircularDistribution::uniform(DEFAULT_J_MAX, DEFAULT_PRUNE_TOL).unwrap();
        let mut g = GridPdf::uniform(GRID_POINTS);
        let n_ops = rng.random_range(1..=max_ops);
        for _ in 0..n_ops {
            ops += 1;
            if rng.random_bool(0.3) {
                // kernel wide enough for the grid sum to be exact
                let sigma: f64 = rng.random_range(1e-3..3e-3);
                let kappa: f64 = rng.random_range(0.1e6..10e6);
                let dt = (sigma / (TAU * kappa * tau0)).powi(2);
                d.convolve_wiener(kappa, dt, tau0).unwrap();
                g.diffuse(sigma);
            } else {
                let k = rng.random_range(0..=6);
                let theta = rng.random_range(-PI..PI);
                let mu = rng.random_range(0..=1u8);
                match d.bayes_update(mu, k, theta, &params) {
                    Ok(()) => g.bayes(mu, k, theta, &params),
                    // outcome has (numerically) zero probability: skip on both
                    Err(spintrack::Error::DegenerateLikelihood { .. }) => {}
                    Err(e) => panic!("{e}"),
                }
            }
        }
        max_err = max_err.max(max_abs_diff(&d, &g, 8));
    }
    Equivalence {
        sequences,
        max_err,
        ops,
    }
}
