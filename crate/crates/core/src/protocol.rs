//! The two estimators: reset-based non-tracking sequences and the adaptive
//! tracking loop.

use std::io::Write;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::circdist::{CircularDistribution, DEFAULT_J_MAX, DEFAULT_PRUNE_TOL};
use crate::error::{invalid, Error, Result};
use crate::harness::waveform_error_after;
use crate::sensor::{Sensor, SensorParams};
use crate::signal::{PathMode, SignalModel, TruthPath};

/// Overheads up to this use a fixed `tau0` truth grid; longer ones switch to
/// event-driven generation.
pub const GRID_MODE_MAX_OVERHEAD: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Protocol {
    NonTracking,
    Tracking,
}

impl Protocol {
    pub fn name(self) -> &'static str {
        match self {
            Protocol::NonTracking => "non-tracking",
            Protocol::Tracking => "tracking",
        }
    }
}

impl std::fmt::Display for Protocol {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// How the largest sensing index `K` is picked.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KPolicy {
    Fixed(u32),
    /// Run `pilot_trajectories` per candidate in `min..=max` and keep the
    /// candidate with the smallest mean waveform error.
    Scan {
        min: u32,
        max: u32,
        pilot_trajectories: usize,
    },
}

/// Read-out phase rule used before each Ramsey experiment.
///
/// With the fringe convention `cos(phase + theta)`, a posterior peaked at
/// `phi*` has `arg(c_{-2^p}) = 2^p phi*`. Choosing `theta = -arg(c_{-2^{k+1}}) / 2`
/// puts the two candidate values left by the previous, finer sensing time on
/// opposite fringe extrema.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PhaseRule {
    /// `arg(c_{-2^k}) / 2` with `k` the index about to be measured.
    SameIndex,
    /// `-arg(c_{-2^k}) / 2`.
    SameIndexNegated,
    /// `-arg(c_{-2^{k+1}}) / 2`, falling back to the same-index pivot when
    /// the coarser coefficient vanishes.
    Discriminating,
    /// Maximize the expected `|c_{-2^k}|` after the outcome.
    MaxSharpness,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProtocolConfig {
    /// Repetitions at the longest sensing time.
    pub g: u32,
    /// Extra repetitions per shorter sensing time.
    pub f: u32,
    /// Threshold factor of the tracking loop.
    pub alpha: f64,
    /// Outcome-dependent phase increment added by the non-tracking protocol,
    /// indexed by the previous outcome.
    pub phase_increments: [f64; 2],
    pub phase_rule: PhaseRule,
    pub k_policy: KPolicy,
    /// Simulated time per trajectory, s.
    pub duration: f64,
    /// Truth generation mode; `None` picks from the overhead.
    pub signal_mode: Option<PathMode>,
    pub j_max: usize,
    pub prune_tol: f64,
}

impl Default for ProtocolConfig {
    fn default() -> Self {
        ProtocolConfig {
            g: 5,
            f: 3,
            alpha: 0.15,
            phase_increments: [0.0, 0.0],
            phase_rule: PhaseRule::Discriminating,
            k_policy: KPolicy::Fixed(7),
            duration: 5e-3,
            signal_mode: None,
            j_max: DEFAULT_J_MAX,
            prune_tol: DEFAULT_PRUNE_TOL,
        }
    }
}

impl ProtocolConfig {
    pub fn validate(&self) -> Result<()> {
        if self.g < 1 {
            return invalid("G must be at least 1");
        }
        if !(self.alpha > 0.0) {
            return invalid("alpha must be positive");
        }
        if !(self.duration > 0.0) || !self.duration.is_finite() {
            return invalid("duration must be positive and finite");
        }
        if let KPolicy::Scan {
            min,
            max,
            pilot_trajectories,
        } = self.k_policy
        {
            if min > max || pilot_trajectories == 0 {
                return invalid("K scan needs min <= max and at least one pilot trajectory");
            }
        }
        Ok(())
    }

    fn path_mode(&self, params: &SensorParams) -> PathMode {
        self.signal_mode
            .unwrap_or(if params.overhead <= GRID_MODE_MAX_OVERHEAD {
                PathMode::Grid { dt: params.tau0 }
            } else {
                PathMode::EventDriven
            })
    }

    fn prior(&self) -> Result<CircularDistribution> {
        CircularDistribution::uniform(self.j_max, self.prune_tol)
    }
}

/// Repetitions `G + (K - k) F` of sensing index `k` in a non-tracking sequence.
pub fn repetitions(k: u32, max_k: u32, cfg: &ProtocolConfig) -> Result<u32> {
    if k > max_k {
        return invalid(format!("sensing index {k} exceeds K = {max_k}"));
    }
    Ok(cfg.g + (max_k - k) * cfg.f)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SequenceBudget {
    /// Summed sensing time of one sequence, s.
    pub sensing: f64,
    /// Ramsey experiments per sequence.
    pub ramseys: u64,
    /// Sensing plus overhead, s.
    pub total: f64,
}

/// Time and experiment count of one non-tracking sequence with largest index `K`.
pub fn sequence_budget(max_k: u32, cfg: &ProtocolConfig, params: &SensorParams) -> SequenceBudget {
    let k = max_k as u64;
    let (g, f) = (cfg.g as u64, cfg.f as u64);
    let pow = 1u64 << (k + 1);
    let units = (pow - 1) * g + (pow - k - 2) * f;
    let ramseys = (k + 1) * g + (k + 1) * k * f / 2;
    let sensing = params.tau0 * units as f64;
    SequenceBudget {
        sensing,
        ramseys,
        total: sensing + ramseys as f64 * params.overhead,
    }
}

/// One emitted estimate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EstimateRow {
    /// Time the estimate becomes available, s.
    pub t: f64,
    pub f_true: f64,
    pub f_hat: f64,
    pub k: u32,
    pub mu: u8,
    pub theta: f64,
    /// Holevo standard deviation of the posterior, Hz (infinite when undefined).
    pub fom: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryRecord {
    pub rows: Vec<EstimateRow>,
    /// Truth samples `(t, f)` taken at the start of every Ramsey experiment
    /// and at the end of the run.
    pub truth: Vec<(f64, f64)>,
    /// Start of the scored window (end of the warm-up), s.
    pub burn_in: f64,
    /// Simulated time covered by the run, s.
    pub t_end: f64,
    pub ramseys: u64,
}

impl TrajectoryRecord {
    /// CSV with header `t_s,f_true_hz,f_hat_hz,k,mu,theta_rad,fom_hz`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["t_s", "f_true_hz", "f_hat_hz", "k", "mu", "theta_rad", "fom_hz"])?;
        for r in &self.rows {
            w.write_record([
                format!("{:e}", r.t),
                format!("{:e}", r.f_true),
                format!("{:e}", r.f_hat),
                r.k.to_string(),
                r.mu.to_string(),
                format!("{:e}", r.theta),
                format!("{:e}", r.fom),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Everything a single trajectory needs.
struct Run {
    kappa: f64,
    path: TruthPath,
    sensor: Sensor,
    record: TrajectoryRecord,
    t: f64,
}

impl Run {
    fn new(model: &SignalModel, params: &SensorParams, cfg: &ProtocolConfig, seed: u64) -> Result<Self> {
        params.validate()?;
        cfg.validate()?;
        let path = TruthPath::new(&model.with_seed(seed), cfg.path_mode(params))?;
        Ok(Run {
            kappa: model.kappa,
            path,
            sensor: Sensor::new(*params, seed)?,
            record: TrajectoryRecord::default(),
            t: 0.0,
        })
    }

    fn ramsey(&mut self, k: u32, theta: f64) -> Result<u8> {
        let t = self.t;
        self.record.truth.push((t, self.path.value_at(t)?));
        let out = self.sensor.simulate_ramsey(&mut self.path, t, k, theta)?;
        self.t = out.t_next;
        self.record.ramseys += 1;
        self.path.forget_before(self.t);
        Ok(out.mu)
    }

    fn truth_now(&self) -> Result<f64> {
        self.path.value_at(self.t)
    }

    fn finish(mut self) -> Result<TrajectoryRecord> {
        let f = self.truth_now()?;
        self.record.truth.push((self.t, f));
        self.record.t_end = self.t;
        Ok(self.record)
    }
}

fn control_phase(rule: PhaseRule, d: &CircularDistribution, k: u32, params: &SensorParams) -> f64 {
    match rule {
        PhaseRule::MaxSharpness => {
            let n = 1i64 << k;
            let (cn, c2n, c0) = (d.coefficient(-n), d.coefficient(-2 * n), d.coefficient(0));
            let a = params.fringe_offset();
            let h = 0.5 * params.fringe_amplitude(params.sensing_time(k));
            let score = |t: f64| {
                let z = Complex64::from_polar(1.0, t) * c2n + Complex64::from_polar(1.0, -t) * c0;
                (cn * a + z * h).norm() + (cn * (1.0 - a) - z * h).norm()
            };
            let mut best = (f64::NEG_INFINITY, 0.0);
            for i in 0..64 {
                let t = i as f64 * std::f64::consts::TAU / 64.0;
                let v = score(t);
                if v > best.0 {
                    best = (v, t);
                }
            }
            best.1
        }
        PhaseRule::SameIndex => d.control_phase(k),
        PhaseRule::SameIndexNegated => -d.control_phase(k),
        PhaseRule::Discriminating => {
            if d.coefficient(-(1i64 << (k + 1))).norm() > 0.0 {
                -d.control_phase(k + 1)
            } else {
                d.control_phase(k)
            }
        }
    }
}

/// Bayes update that restarts from the flat prior when the outcome was
/// numerically impossible under the current posterior.
fn update_or_reset(
    d: &mut CircularDistribution,
    mu: u8,
    k: u32,
    theta: f64,
    params: &SensorParams,
    cfg: &ProtocolConfig,
) -> Result<()> {
    match d.bayes_update(mu, k, theta, params) {
        Err(Error::DegenerateLikelihood { .. }) => {
            *d = cfg.prior()?;
            d.bayes_update(mu, k, theta, params)
        }
        other => other,
    }
}

/// Repeat full estimation sequences from a flat prior for `cfg.duration`.
///
/// The sensing index runs from `K = params.max_k` down to zero with
/// [`repetitions`] experiments each. One estimate is emitted at the end of
/// every sequence.
pub fn run_non_tracking(
    model: &SignalModel,
    params: &SensorParams,
    cfg: &ProtocolConfig,
    seed: u64,
) -> Result<TrajectoryRecord> {
    let mut run = Run::new(model, params, cfg, seed)?;
    let max_k = params.max_k;
    let budget = sequence_budget(max_k, cfg, params);
    if cfg.duration < budget.total {
        return invalid(format!(
            "duration {:e} s is shorter than one sequence ({:e} s)",
            cfg.duration, budget.total
        ));
    }
    let tau0 = params.tau0;
    let mut f_hat = 0.0;
    let mut first = true;
    while run.t + budget.total <= cfg.duration * (1.0 + 1e-12) {
        let mut d = cfg.prior()?;
        let mut last_mu: Option<u8> = None;
        let mut theta = 0.0;
        for k in (0..=max_k).rev() {
            for _ in 0..repetitions(k, max_k, cfg)? {
                theta = control_phase(cfg.phase_rule, &d, k, params)
                    + last_mu.map_or(0.0, |m| cfg.phase_increments[m as usize]);
                let mu = run.ramsey(k, theta)?;
                update_or_reset(&mut d, mu, k, theta, params, cfg)?;
                last_mu = Some(mu);
            }
        }
        if let Ok(f) = d.estimate_frequency(tau0) {
            f_hat = f;
        }
        if first {
            run.record.burn_in = run.t;
            first = false;
        }
        let row = EstimateRow {
            t: run.t,
            f_true: run.truth_now()?,
            f_hat,
            k: max_k,
            mu: last_mu.unwrap_or(0),
            theta,
            fom: d.holevo_std(tau0).unwrap_or(f64::INFINITY),
        };
        run.record.rows.push(row);
    }
    run.finish()
}

/// Sensing index for the next tracking step: up one (capped at `K`) when the
/// figure of merit beats `alpha / (2^k tau0)`, otherwise down one (floored at 0).
pub fn next_sensing_index(fom: f64, k: u32, max_k: u32, alpha: f64, tau0: f64) -> u32 {
    let threshold = alpha / (tau0 * (1u64 << k) as f64);
    if fom < threshold {
        (k + 1).min(max_k)
    } else {
        k.saturating_sub(1)
    }
}

/// Adaptive tracking loop: diffuse, pick the phase, measure, update,
/// estimate, adapt `k`. One estimate per Ramsey experiment; the posterior is
/// never reset.
pub fn run_tracking(
    model: &SignalModel,
    params: &SensorParams,
    cfg: &ProtocolConfig,
    seed: u64,
) -> Result<TrajectoryRecord> {
    let mut run = Run::new(model, params, cfg, seed)?;
    let max_k = params.max_k;
    let tau0 = params.tau0;
    let burn_in_ramseys = sequence_budget(max_k, cfg, params).ramseys;
    let mut d = cfg.prior()?;
    let mut k = max_k;
    let mut f_hat = 0.0;
    while run.t < cfg.duration {
        let dt = params.sensing_time(k) + params.overhead;
        d.convolve_wiener(run.kappa, dt, tau0)?;
        let theta = control_phase(cfg.phase_rule, &d, k, params);
        let mu = run.ramsey(k, theta)?;
        update_or_reset(&mut d, mu, k, theta, params, cfg)?;
        let fom = d.holevo_std(tau0).unwrap_or(f64::INFINITY);
        if let Ok(f) = d.estimate_frequency(tau0) {
            f_hat = f;
        }
        let row = EstimateRow {
            t: run.t,
            f_true: run.truth_now()?,
            f_hat,
            k,
            mu,
            theta,
            fom,
        };
        run.record.rows.push(row);
        if run.record.ramseys == burn_in_ramseys {
            run.record.burn_in = run.t;
        }
        k = next_sensing_index(fom, k, max_k, cfg.alpha, tau0);
    }
    if run.record.ramseys < burn_in_ramseys {
        run.record.burn_in = run.t;
    }
    run.finish()
}

pub fn run_protocol(
    protocol: Protocol,
    model: &SignalModel,
    params: &SensorParams,
    cfg: &ProtocolConfig,
    seed: u64,
) -> Result<TrajectoryRecord> {
    match protocol {
        Protocol::NonTracking => run_non_tracking(model, params, cfg, seed),
        Protocol::Tracking => run_tracking(model, params, cfg, seed),
    }
}

/// Index with `2^K tau0 = 1 / ([G (G + F)]^{1/3} kappa^{2/3})`, rounded to
/// the nearest integer and floored at zero.
pub fn k_scaling_seed(kappa: f64, cfg: &ProtocolConfig, tau0: f64) -> u32 {
    let gf = (cfg.g as f64 * (cfg.g + cfg.f) as f64).cbrt();
    let tmax = 1.0 / (gf * kappa.powf(2.0 / 3.0));
    (tmax / tau0).log2().round().max(0.0) as u32
}

/// Pick `K` for `protocol` according to `cfg.k_policy`.
///
/// Pilot trajectory `i` uses seed `seed ^ i`, and burn-in is excluded from
/// the pilot errors.
pub fn choose_k(
    protocol: Protocol,
    model: &SignalModel,
    params: &SensorParams,
    cfg: &ProtocolConfig,
    seed: u64,
) -> Result<u32> {
    scan_k(protocol, model, params, cfg, seed, &|_| cfg.duration)
}

/// [`choose_k`] with the pilot duration depending on the candidate `K`.
pub fn scan_k(
    protocol: Protocol,
    model: &SignalModel,
    params: &SensorParams,
    cfg: &ProtocolConfig,
    seed: u64,
    duration_for: &dyn Fn(u32) -> f64,
) -> Result<u32> {
    match cfg.k_policy {
        KPolicy::Fixed(k) => Ok(k),
        KPolicy::Scan {
            min,
            max,
            pilot_trajectories,
        } => {
            if !(model.kappa > 0.0) {
                return invalid("K scan needs kappa > 0");
            }
            let mut best = (f64::INFINITY, min);
            for k in min..=max {
                let p = SensorParams { max_k: k, ..*params };
                let c = ProtocolConfig {
                    duration: duration_for(k),
                    ..cfg.clone()
                };
                if protocol == Protocol::NonTracking && sequence_budget(k, &c, &p).total > c.duration {
                    continue;
                }
                let mut total = 0.0;
                for i in 0..pilot_trajectories {
                    let rec = run_protocol(protocol, model, &p, &c, seed ^ i as u64)?;
                    total += waveform_error_after(&rec, rec.burn_in)?;
                }
                let mean = total / pilot_trajectories as f64;
                if mean < best.0 {
                    best = (mean, k);
                }
            }
            Ok(best.1)
        }
    }
}
