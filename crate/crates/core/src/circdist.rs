//! Probability densities on the circle stored as truncated Fourier series.
//!
//! A [`CircularDistribution`] represents `P(phi) = sum_j c_j exp(i j phi)` on
//! the phase variable `phi = 2 pi f tau0`, `phi` in `[-pi, pi)`. The zeroth
//! coefficient is pinned to `1 / (2 pi)` and `c_{-j} = conj(c_j)`, so only
//! `j >= 0` is stored.
//!
//! Ramsey likelihoods only couple coefficients whose indices differ by a
//! power of two. Coefficients are therefore kept on a lattice `j = n * stride`
//! where `stride` is the smallest shift applied so far; every other
//! coefficient is exactly zero.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::sensor::{wrap_phase, SensorParams};

pub const DEFAULT_J_MAX: usize = 65536;
pub const DEFAULT_PRUNE_TOL: f64 = 1e-12;

/// `c_0` of every normalized distribution.
pub const C0: f64 = 1.0 / (2.0 * PI);

/// Smallest un-normalized `c_0` accepted after a likelihood update.
const NORM_FLOOR: f64 = 1e-15;

#[derive(Debug, Clone, PartialEq)]
pub struct CircularDistribution {
    /// `half[n] = c_{n * stride}`.
    half: Vec<Complex64>,
    stride: usize,
    prune_tol: f64,
    j_max: usize,
}

/// One entry of the JSON debug dump: `[j, re, im]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CoefficientTriple(pub i64, pub f64, pub f64);

impl CircularDistribution {
    /// The flat prior.
    pub fn uniform(j_max: usize, prune_tol: f64) -> Result<Self> {
        if j_max < 1 {
            return invalid("j_max must be at least 1");
        }
        if !(prune_tol >= 0.0) {
            return invalid("prune_tol must be >= 0");
        }
        Ok(CircularDistribution {
            half: vec![Complex64::new(C0, 0.0)],
            stride: 1,
            prune_tol,
            j_max,
        })
    }

    /// Build from `c_0, c_1, ..., c_J` (non-negative orders). The table is
    /// rescaled so that `c_0 = 1 / (2 pi)`; the caller is responsible for it
    /// describing a non-negative density.
    pub fn from_coefficients(coeffs: &[Complex64], j_max: usize, prune_tol: f64) -> Result<Self> {
        let mut d = Self::uniform(j_max, prune_tol)?;
        let Some(first) = coeffs.first() else {
            return invalid("coefficient table is empty");
        };
        if !(first.re > 0.0) || !first.re.is_finite() {
            return invalid("c_0 must be positive");
        }
        if coeffs.iter().any(|c| !c.re.is_finite() || !c.im.is_finite()) {
            return invalid("coefficients must be finite");
        }
        let scale = C0 / first.re;
        d.half = coeffs.iter().map(|c| c * scale).collect();
        d.half[0] = Complex64::new(C0, 0.0);
        d.prune_tail();
        d.compact_stride();
        if d.order() > j_max {
            return Err(Error::CapExceeded {
                order: d.order(),
                cap: j_max,
            });
        }
        Ok(d)
    }

    /// Inverse of [`Self::to_triples`]. Negative orders are ignored; they are
    /// implied by Hermitian symmetry.
    pub fn from_triples(triples: &[CoefficientTriple], j_max: usize, prune_tol: f64) -> Result<Self> {
        let top = triples.iter().map(|t| t.0).max().unwrap_or(0).max(0) as usize;
        if top > j_max {
            return Err(Error::CapExceeded { order: top, cap: j_max });
        }
        let mut coeffs = vec![Complex64::new(0.0, 0.0); top + 1];
        for &CoefficientTriple(j, re, im) in triples {
            if j >= 0 {
                coeffs[j as usize] = Complex64::new(re, im);
            }
        }
        Self::from_coefficients(&coeffs, j_max, prune_tol)
    }

    /// Current truncation order `J`.
    pub fn order(&self) -> usize {
        (self.half.len() - 1) * self.stride
    }

    pub fn j_max(&self) -> usize {
        self.j_max
    }

    pub fn prune_tol(&self) -> f64 {
        self.prune_tol
    }

    /// Coefficient `c_j` for any integer `j` (zero outside the stored range).
    pub fn coefficient(&self, j: i64) -> Complex64 {
        let mag = j.unsigned_abs() as usize;
        if !mag.is_multiple_of(self.stride) {
            return Complex64::new(0.0, 0.0);
        }
        let c = self
            .half
            .get(mag / self.stride)
            .copied()
            .unwrap_or(Complex64::new(0.0, 0.0));
        if j < 0 {
            c.conj()
        } else {
            c
        }
    }

    /// Stored non-negative orders as `(j, c_j)`.
    pub fn nonnegative(&self) -> impl Iterator<Item = (usize, Complex64)> + '_ {
        self.half.iter().enumerate().map(move |(n, &c)| (n * self.stride, c))
    }

    /// Density at `phi`.
    pub fn evaluate_pdf(&self, phi: f64) -> f64 {
        let s = self.stride as f64;
        let mut acc = 0.0;
        for (n, c) in self.half.iter().enumerate().skip(1) {
            let (sin, cos) = (n as f64 * s * phi).sin_cos();
            acc += c.re * cos - c.im * sin;
        }
        C0 + 2.0 * acc
    }

    /// Multiply by the Ramsey likelihood of outcome `mu` for sensing index
    /// `k` and read-out phase `theta`, then renormalize.
    ///
    /// With `A = (1 + xi0 - xi1) / 2`, `B = (xi0 + xi1 - 1) / 2` and dephasing
    /// factor `D`, the likelihood of `mu = 0` is `A + B D cos(2^k phi + theta)`
    /// and that of `mu = 1` its complement.
    pub fn bayes_update(&mut self, mu: u8, k: u32, theta: f64, params: &SensorParams) -> Result<()> {
        if mu > 1 {
            return invalid(format!("outcome must be 0 or 1, got {mu}"));
        }
        if k > params.max_k {
            return invalid(format!("sensing index {k} exceeds K = {}", params.max_k));
        }
        if !theta.is_finite() {
            return invalid("theta must be finite");
        }
        let offset = params.fringe_offset();
        let amp = params.fringe_amplitude(params.sensing_time(k));
        let (base, sign) = if mu == 0 { (offset, 1.0) } else { (1.0 - offset, -1.0) };
        self.apply_fringe(1usize << k, theta, base, 0.5 * sign * amp)
    }

    /// `c_j <- base c_j + h (e^{i theta} c_{j-shift} + e^{-i theta} c_{j+shift})`,
    /// renormalized. Leaves `self` untouched on error.
    fn apply_fringe(&mut self, shift: usize, theta: f64, base: f64, h: f64) -> Result<()> {
        let mut stride = self.stride;
        let mut old = std::borrow::Cow::Borrowed(&self.half);
        if self.half.len() == 1 {
            stride = shift;
        } else if !shift.is_multiple_of(stride) {
            // shift < stride, both powers of two
            let factor = stride / shift;
            let mut dense = vec![Complex64::new(0.0, 0.0); (self.half.len() - 1) * factor + 1];
            for (n, &c) in self.half.iter().enumerate() {
                dense[n * factor] = c;
            }
            old = std::borrow::Cow::Owned(dense);
            stride = shift;
        }
        let old = old.as_ref();
        let q = shift / stride;
        let len = old.len();
        let rot = Complex64::from_polar(1.0, theta) * h;
        let rot_c = rot.conj();
        let at = |i: usize| old.get(i).copied().unwrap_or_default();

        let mut new = Vec::with_capacity(len + q);
        for n in 0..len + q {
            let lower = if n >= q { at(n - q) } else { at(q - n).conj() };
            new.push(at(n) * base + rot * lower + rot_c * at(n + q));
        }

        let norm = new[0].re;
        if !(norm > NORM_FLOOR) {
            return Err(Error::DegenerateLikelihood { norm });
        }
        let scale = C0 / norm;
        for c in new.iter_mut() {
            *c *= scale;
        }
        new[0] = Complex64::new(C0, 0.0);
        let kept = Self::pruned_len(&new, self.prune_tol);
        let order = (kept - 1) * stride;
        if order > self.j_max {
            return Err(Error::CapExceeded { order, cap: self.j_max });
        }
        new.truncate(kept);
        self.half = new;
        self.stride = stride;
        Ok(())
    }

    /// Evolve under Wiener diffusion of the frequency for `dt` seconds:
    /// `c_j <- c_j exp(-2 (pi j kappa tau0)^2 dt)`.
    pub fn convolve_wiener(&mut self, kappa: f64, dt: f64, tau0: f64) -> Result<()> {
        if !(kappa >= 0.0) || !kappa.is_finite() {
            return invalid("kappa must be finite and >= 0");
        }
        if !(dt >= 0.0) || !dt.is_finite() {
            return invalid("dt must be finite and >= 0");
        }
        if !(tau0 > 0.0) {
            return invalid("tau0 must be positive");
        }
        let s = self.stride as f64;
        let a = 2.0 * (PI * kappa * tau0 * s).powi(2) * dt;
        if a == 0.0 {
            return Ok(());
        }
        // exp(-a n^2) by the recurrence r_n = r_{n-1} exp(-a (2n - 1))
        let step2 = (-2.0 * a).exp();
        let mut ratio = (-a).exp();
        let mut r = 1.0;
        // |c_j| <= c_0, so once r c_0 drops below the tolerance the tail is gone
        let cutoff = self.prune_tol / C0;
        let mut keep = self.half.len();
        for n in 1..self.half.len() {
            r *= ratio;
            ratio *= step2;
            if r < cutoff || r == 0.0 {
                keep = n;
                break;
            }
            self.half[n] *= r;
        }
        self.half.truncate(keep);
        self.prune_tail();
        Ok(())
    }

    /// Frequency estimate `arg(c_{-1}) / (2 pi tau0)`, wrapped into
    /// `[-1/(2 tau0), 1/(2 tau0))`.
    pub fn estimate_frequency(&self, tau0: f64) -> Result<f64> {
        let c = self.coefficient(-1);
        if c.norm() == 0.0 {
            return Err(Error::UndefinedEstimate);
        }
        Ok(wrap_phase(c.arg()) / (2.0 * PI * tau0))
    }

    /// Holevo variance `(2 pi |c_1|)^{-2} - 1` of the phase.
    pub fn holevo_variance(&self) -> Result<f64> {
        let r = 2.0 * PI * self.coefficient(1).norm();
        if r == 0.0 {
            return Err(Error::UndefinedEstimate);
        }
        Ok((r.powi(-2) - 1.0).max(0.0))
    }

    /// Frequency uncertainty `sqrt(V_H) / (2 pi tau0)`.
    pub fn holevo_std(&self, tau0: f64) -> Result<f64> {
        Ok(self.holevo_variance()?.sqrt() / (2.0 * PI * tau0))
    }

    /// Read-out phase `arg(c_{-2^k}) / 2`; zero when that coefficient
    /// vanishes.
    pub fn control_phase(&self, k: u32) -> f64 {
        let c = self.coefficient(-(1i64 << k));
        if c.norm() == 0.0 {
            0.0
        } else {
            0.5 * c.arg()
        }
    }

    /// Debug dump: all stored orders, `-J..=J`.
    pub fn to_triples(&self) -> Vec<CoefficientTriple> {
        let mut out: Vec<_> = self
            .nonnegative()
            .skip(1)
            .map(|(j, c)| CoefficientTriple(-(j as i64), c.re, -c.im))
            .collect();
        out.reverse();
        out.extend(self.nonnegative().map(|(j, c)| CoefficientTriple(j as i64, c.re, c.im)));
        out
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(&self.to_triples())?)
    }

    pub fn from_json(s: &str, j_max: usize, prune_tol: f64) -> Result<Self> {
        let triples: Vec<CoefficientTriple> = serde_json::from_str(s)?;
        Self::from_triples(&triples, j_max, prune_tol)
    }

    fn pruned_len(coeffs: &[Complex64], tol: f64) -> usize {
        let mut len = coeffs.len();
        while len > 1 && coeffs[len - 1].norm() < tol {
            len -= 1;
        }
        len
    }

    fn prune_tail(&mut self) {
        let len = Self::pruned_len(&self.half, self.prune_tol);
        self.half.truncate(len);
    }

    /// Coarsen the lattice to the largest power of two dividing every
    /// non-zero order.
    fn compact_stride(&mut self) {
        let mut factor = 1usize;
        while self.half.len() > 1 && (self.half.len() - 1).is_multiple_of(factor * 2) {
            let f = factor * 2;
            if self
                .half
                .iter()
                .enumerate()
                .any(|(n, c)| n % f != 0 && *c != Complex64::default())
            {
                break;
            }
            factor = f;
        }
        if factor > 1 {
            self.half = self.half.iter().step_by(factor).copied().collect();
            self.stride *= factor;
        }
    }
}
