//! Single-qubit Ramsey sensor with finite read-out fidelity and Gaussian
//! dephasing.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::signal::TruthPath;

/// Sub-stream of the trajectory seed reserved for outcome draws.
pub(crate) const SENSOR_STREAM: u64 = 2;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SensorParams {
    /// Shortest sensing time, s.
    pub tau0: f64,
    /// Largest sensing-time index; sensing times are `2^k tau0`, `k <= max_k`.
    pub max_k: u32,
    /// Dephasing time, s. `f64::INFINITY` disables decoherence.
    pub t2_star: f64,
    /// Read-out fidelity of outcome 0.
    pub xi0: f64,
    /// Read-out fidelity of outcome 1.
    pub xi1: f64,
    /// Dead time per Ramsey experiment, s.
    pub overhead: f64,
}

impl Default for SensorParams {
    fn default() -> Self {
        SensorParams {
            tau0: 20e-9,
            max_k: 7,
            t2_star: 100e-6,
            xi0: 1.0,
            xi1: 1.0,
            overhead: 0.0,
        }
    }
}

impl SensorParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.tau0 > 0.0 && self.tau0.is_finite()) {
            return invalid("tau0 must be positive");
        }
        if self.max_k > 40 {
            return invalid("max_k must be at most 40");
        }
        if !(self.t2_star > 0.0) {
            return invalid("T2* must be positive");
        }
        if !(0.0..=1.0).contains(&self.xi0) || !(0.0..=1.0).contains(&self.xi1) {
            return invalid("read-out fidelities must lie in [0, 1]");
        }
        if !(self.overhead >= 0.0 && self.overhead.is_finite()) {
            return invalid("overhead must be finite and >= 0");
        }
        Ok(())
    }

    /// Sensing time `2^k tau0`.
    pub fn sensing_time(&self, k: u32) -> f64 {
        self.tau0 * (1u64 << k) as f64
    }

    /// Constant part of `P(mu = 0)`.
    pub fn fringe_offset(&self) -> f64 {
        0.5 * (1.0 + self.xi0 - self.xi1)
    }

    /// Oscillating amplitude of `P(mu = 0)` for sensing time `tau`, including
    /// dephasing.
    pub fn fringe_amplitude(&self, tau: f64) -> f64 {
        0.5 * (self.xi0 + self.xi1 - 1.0) * self.decay(tau)
    }

    pub fn decay(&self, tau: f64) -> f64 {
        let r = tau / self.t2_star;
        (-r * r).exp()
    }
}

/// Probability of reading out `mu = 0` after accumulating `phase` during a
/// window of length `tau` with read-out rotation `theta`.
pub fn outcome_probability(phase: f64, theta: f64, tau: f64, params: &SensorParams) -> Result<f64> {
    if !(tau > 0.0) {
        return invalid(format!("sensing time must be positive, got {tau}"));
    }
    let p = params.fringe_offset() + params.fringe_amplitude(tau) * (phase + theta).cos();
    Ok(p.clamp(0.0, 1.0))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RamseyOutcome {
    pub mu: u8,
    /// Start of the next experiment: `t + 2^k tau0 + overhead`.
    pub t_next: f64,
    /// Phase actually accumulated by the qubit.
    pub phase: f64,
}

/// Per-trajectory sensor context: parameters plus a dedicated outcome stream.
#[derive(Debug, Clone)]
pub struct Sensor {
    params: SensorParams,
    rng: ChaCha8Rng,
}

impl Sensor {
    pub fn new(params: SensorParams, seed: u64) -> Result<Self> {
        params.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(SENSOR_STREAM);
        Ok(Sensor { params, rng })
    }

    pub fn params(&self) -> &SensorParams {
        &self.params
    }

    /// Run one Ramsey experiment with sensing index `k` starting at `t`,
    /// extending `path` through the sensing window and the overhead gap.
    pub fn simulate_ramsey(&mut self, path: &mut TruthPath, t: f64, k: u32, theta: f64) -> Result<RamseyOutcome> {
        if k > self.params.max_k {
            return invalid(format!("sensing index {k} exceeds K = {}", self.params.max_k));
        }
        let tau = self.params.sensing_time(k);
        let sense_end = t + tau;
        path.advance(sense_end, self.params.tau0)?;
        let phase = path.accumulated_phase(t, tau)?;
        let p0 = outcome_probability(phase, theta, tau, &self.params)?;
        let u: f64 = self.rng.random();
        let mu = if u < p0 { 0 } else { 1 };
        let t_next = t + (tau + self.params.overhead);
        // the gap is a single exact Gaussian step in event-driven mode
        path.advance(t_next.max(sense_end), f64::INFINITY)?;
        Ok(RamseyOutcome { mu, t_next, phase })
    }
}

/// Wrap an angle into `[-pi, pi)`.
pub fn wrap_phase(x: f64) -> f64 {
    let y = (x + PI).rem_euclid(2.0 * PI) - PI;
    if y >= PI {
        -PI
    } else {
        y
    }
}
