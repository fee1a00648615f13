//! Ground-truth frequency trajectories.
//!
//! The sensed frequency follows a Wiener process `df = kappa dW`, clamped to
//! `[-clamp, +clamp]` after every generation step so that it never leaves the
//! unambiguous band of the sensor. A [`TruthPath`] stores the trajectory as a
//! piecewise-constant function: breakpoint `i` holds its value on
//! `[t_i, t_{i+1})`.

use std::collections::VecDeque;
use std::f64::consts::PI;
use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

/// Default truncation bound of the signal, in Hz.
pub const DEFAULT_CLAMP_HZ: f64 = 24.0e6;

/// Sub-stream of the trajectory seed reserved for the signal noise.
pub(crate) const SIGNAL_STREAM: u64 = 1;

/// Relative slack used when comparing times that went through float sums.
const TIME_SLACK: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitialFrequency {
    Fixed(f64),
    /// Uniform on `[-clamp, +clamp]`, drawn from the signal stream.
    RandomUniform,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SignalModel {
    /// Fluctuation level, Hz^{3/2}.
    pub kappa: f64,
    /// Truncation bound, Hz.
    pub clamp: f64,
    /// Representable half-range `1 / (2 tau0)`, Hz.
    pub f_range: f64,
    pub initial: InitialFrequency,
    pub seed: u64,
}

impl SignalModel {
    /// Model with the default clamp (24 MHz, or the band edge if narrower) and
    /// a random initial value.
    pub fn new(kappa: f64, tau0: f64) -> Result<Self> {
        if !(tau0 > 0.0) {
            return invalid("tau0 must be positive");
        }
        let f_range = 0.5 / tau0;
        let model = SignalModel {
            kappa,
            clamp: DEFAULT_CLAMP_HZ.min(f_range),
            f_range,
            initial: InitialFrequency::RandomUniform,
            seed: 0,
        };
        model.validate()?;
        Ok(model)
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_initial(mut self, initial: InitialFrequency) -> Self {
        self.initial = initial;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.kappa >= 0.0) || !self.kappa.is_finite() {
            return invalid(format!("kappa must be finite and >= 0, got {}", self.kappa));
        }
        if !(self.clamp > 0.0 && self.clamp <= self.f_range) {
            return invalid(format!(
                "clamp {} must lie in (0, f_range = {}]",
                self.clamp, self.f_range
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "mode")]
pub enum PathMode {
    /// Fixed time grid of spacing `dt`; `advance` ignores its substep.
    Grid { dt: f64 },
    /// Breakpoints placed lazily at the requested times, with interior
    /// substeps no longer than the requested substep.
    EventDriven,
}

/// A realized trajectory of the frequency.
#[derive(Debug, Clone)]
pub struct TruthPath {
    mode: PathMode,
    kappa: f64,
    clamp: f64,
    times: VecDeque<f64>,
    values: VecDeque<f64>,
    /// Path is defined up to here.
    end: f64,
    /// Grid mode: index of the last generated grid point.
    grid_index: u64,
    rng: ChaCha8Rng,
}

impl TruthPath {
    pub fn new(model: &SignalModel, mode: PathMode) -> Result<Self> {
        model.validate()?;
        if let PathMode::Grid { dt } = mode {
            if !(dt > 0.0) {
                return invalid("grid spacing must be positive");
            }
        }
        let mut rng = ChaCha8Rng::seed_from_u64(model.seed);
        rng.set_stream(SIGNAL_STREAM);
        let f0 = match model.initial {
            InitialFrequency::Fixed(f) => f.clamp(-model.clamp, model.clamp),
            InitialFrequency::RandomUniform => rng.random_range(-model.clamp..=model.clamp),
        };
        Ok(TruthPath {
            mode,
            kappa: model.kappa,
            clamp: model.clamp,
            times: VecDeque::from([0.0]),
            values: VecDeque::from([f0]),
            end: 0.0,
            grid_index: 0,
            rng,
        })
    }

    pub fn mode(&self) -> PathMode {
        self.mode
    }

    /// Earliest time still stored.
    pub fn start_time(&self) -> f64 {
        self.times[0]
    }

    pub fn end_time(&self) -> f64 {
        self.end
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// Stored breakpoints `(t, f)`, oldest first.
    pub fn breakpoints(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.times.iter().copied().zip(self.values.iter().copied())
    }

    fn step(&mut self, t: f64, dt: f64) {
        let z: f64 = self.rng.sample(StandardNormal);
        let last = *self.values.back().expect("path never empty");
        let next = (last + self.kappa * dt.sqrt() * z).clamp(-self.clamp, self.clamp);
        self.times.push_back(t);
        self.values.push_back(next);
    }

    /// Extend the path to `to_t` with Gaussian increments of variance
    /// `kappa^2 * delta` over sub-intervals `delta <= substep`.
    pub fn advance(&mut self, to_t: f64, substep: f64) -> Result<()> {
        if !(substep > 0.0) {
            return invalid("substep must be positive");
        }
        let slack = TIME_SLACK * self.end.abs();
        if to_t < self.end && to_t >= self.end - slack {
            return Ok(());
        }
        if !(to_t >= self.end) {
            return invalid(format!(
                "cannot advance path backwards from {:e} s to {:e} s",
                self.end, to_t
            ));
        }
        match self.mode {
            PathMode::Grid { dt } => {
                let limit = to_t * (1.0 + TIME_SLACK);
                loop {
                    let t_next = (self.grid_index + 1) as f64 * dt;
                    if t_next > limit {
                        break;
                    }
                    self.grid_index += 1;
                    self.step(t_next, dt);
                }
                self.end = to_t.max(*self.times.back().unwrap());
            }
            PathMode::EventDriven => {
                let span = to_t - self.end;
                if span <= 0.0 {
                    return Ok(());
                }
                let n = (span / substep).ceil().max(1.0) as u64;
                let delta = span / n as f64;
                let start = self.end;
                for i in 1..=n {
                    let t = if i == n { to_t } else { start + i as f64 * delta };
                    self.step(t, delta);
                }
                self.end = to_t;
            }
        }
        Ok(())
    }

    fn check_covered(&self, t: f64) -> Result<()> {
        let start = self.start_time();
        let slack = TIME_SLACK * self.end.abs().max(f64::MIN_POSITIVE);
        if t < start || t > self.end + slack || !t.is_finite() {
            return Err(Error::OutOfRange {
                t,
                start,
                end: self.end,
            });
        }
        Ok(())
    }

    fn segment_index(&self, t: f64) -> usize {
        self.times.partition_point(|&x| x <= t).saturating_sub(1)
    }

    /// Piecewise-constant value at `t` (left breakpoint convention).
    pub fn value_at(&self, t: f64) -> Result<f64> {
        self.check_covered(t)?;
        Ok(self.values[self.segment_index(t)])
    }

    /// Phase `2 pi * integral(f dt)` accumulated over `[t0, t0 + tau]`.
    pub fn accumulated_phase(&self, t0: f64, tau: f64) -> Result<f64> {
        if !(tau >= 0.0) {
            return invalid("window length must be non-negative");
        }
        let t1 = t0 + tau;
        self.check_covered(t0)?;
        self.check_covered(t1)?;
        let mut i = self.segment_index(t0);
        let mut acc = 0.0;
        let mut lo = t0;
        while lo < t1 {
            let hi = self.times.get(i + 1).copied().unwrap_or(f64::INFINITY).min(t1);
            acc += self.values[i] * (hi - lo);
            lo = hi;
            i += 1;
        }
        Ok(2.0 * PI * acc)
    }

    /// Drop breakpoints no longer needed to answer queries at times `>= t`.
    pub fn forget_before(&mut self, t: f64) {
        while self.times.len() >= 2 && self.times[1] <= t {
            self.times.pop_front();
            self.values.pop_front();
        }
    }

    /// Write the stored breakpoints as CSV with columns `t_seconds,f_hz`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["t_seconds", "f_hz"])?;
        for (t, f) in self.breakpoints() {
            w.write_record([format!("{t:e}"), format!("{f:e}")])?;
        }
        w.flush()?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const TAU0: f64 = 20e-9;

    fn model(kappa: f64, f0: f64) -> SignalModel {
        SignalModel::new(kappa, TAU0)
            .unwrap()
            .with_initial(InitialFrequency::Fixed(f0))
            .with_seed(7)
    }

    #[test]
    fn zero_kappa_is_constant() {
        for mode in [PathMode::Grid { dt: TAU0 }, PathMode::EventDriven] {
            let mut p = TruthPath::new(&model(0.0, 3e6), mode).unwrap();
            p.advance(5e-6, TAU0).unwrap();
            p.advance(7.3e-6, 1e-3).unwrap();
            assert!(p.breakpoints().all(|(_, f)| f == 3e6));
            assert_eq!(p.value_at(4.01e-6).unwrap(), 3e6);
        }
    }

    #[test]
    fn clamp_is_enforced() {
        let m = model(5e9, DEFAULT_CLAMP_HZ);
        let mut p = TruthPath::new(&m, PathMode::Grid { dt: TAU0 }).unwrap();
        p.advance(20e-6, TAU0).unwrap();
        assert!(p.breakpoints().all(|(_, f)| f.abs() <= m.clamp));
        assert!(p.breakpoints().any(|(_, f)| f == m.clamp || f == -m.clamp));
    }

    #[test]
    fn time_regression_is_rejected() {
        let mut p = TruthPath::new(&model(1e6, 0.0), PathMode::EventDriven).unwrap();
        p.advance(1e-6, TAU0).unwrap();
        assert!(matches!(p.advance(0.5e-6, TAU0), Err(Error::InvalidArgument(_))));
        assert!(matches!(p.advance(2e-6, 0.0), Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn phase_of_constant_path() {
        let f = 1.7e6;
        let mut p = TruthPath::new(&model(0.0, f), PathMode::EventDriven).unwrap();
        p.advance(3e-6, TAU0).unwrap();
        let tau = 1.28e-6;
        let phase = p.accumulated_phase(0.4e-6, tau).unwrap();
        assert!((phase - 2.0 * PI * f * tau).abs() < 1e-12 * phase.abs());
    }

    #[test]
    fn phase_of_two_halves() {
        let (f1, f2) = (2e6, -5e5);
        let mut p = TruthPath::new(&model(0.0, f1), PathMode::EventDriven).unwrap();
        p.advance(1e-6, 1.0).unwrap();
        // splice a second level by hand
        *p.values.back_mut().unwrap() = f2;
        p.advance(2e-6, 1.0).unwrap();
        let phase = p.accumulated_phase(0.0, 2e-6).unwrap();
        let expected = 2.0 * PI * (f1 + f2) * 2e-6 / 2.0;
        assert!((phase - expected).abs() < 1e-12);
    }

    #[test]
    fn value_at_uses_left_breakpoint() {
        let mut p = TruthPath::new(&model(1e7, 0.0), PathMode::Grid { dt: TAU0 }).unwrap();
        p.advance(10.0 * TAU0, TAU0).unwrap();
        let bps: Vec<_> = p.breakpoints().collect();
        assert_eq!(p.value_at(bps[3].0).unwrap(), bps[3].1);
        assert_eq!(p.value_at(0.5 * (bps[3].0 + bps[4].0)).unwrap(), bps[3].1);
        assert!(matches!(p.value_at(11.0 * TAU0), Err(Error::OutOfRange { .. })));
    }

    #[test]
    fn chunked_advance_matches_single_advance() {
        let m = model(3e6, 1e6);
        let mut a = TruthPath::new(&m, PathMode::Grid { dt: TAU0 }).unwrap();
        let mut b = a.clone();
        a.advance(4e-6, TAU0).unwrap();
        for t in [0.3e-6, 1.01e-6, 1.01e-6, 2.5e-6, 4e-6] {
            b.advance(t, TAU0).unwrap();
        }
        let pa: Vec<_> = a.breakpoints().collect();
        let pb: Vec<_> = b.breakpoints().collect();
        assert_eq!(pa, pb);
    }

    #[test]
    fn forget_keeps_governing_breakpoint() {
        let mut p = TruthPath::new(&model(1e6, 0.0), PathMode::Grid { dt: TAU0 }).unwrap();
        p.advance(1e-6, TAU0).unwrap();
        let t = 0.5e-6 + 0.3 * TAU0;
        let v = p.value_at(t).unwrap();
        p.forget_before(t);
        assert!(p.start_time() <= t);
        assert_eq!(p.value_at(t).unwrap(), v);
        assert!(p.value_at(0.1e-6).is_err());
    }

    #[test]
    fn csv_export_has_header() {
        let mut p = TruthPath::new(&model(0.0, 1.0), PathMode::Grid { dt: TAU0 }).unwrap();
        p.advance(2.0 * TAU0, TAU0).unwrap();
        let mut buf = Vec::new();
        p.write_csv(&mut buf).unwrap();
        let s = String::from_utf8(buf).unwrap();
        assert!(s.starts_with("t_seconds,f_hz\n"));
        assert_eq!(s.lines().count(), 4);
    }
}
