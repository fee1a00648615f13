use std::io::{Read, Write};
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::fit::{fit_fixed_exponent, fit_power_law, FixedExponentFit, PowerLawFit};
use super::metrics::{eta, waveform_error_after};
use crate::error::{invalid, Result};
use crate::protocol::{
    run_protocol, scan_k, sequence_budget, KPolicy, Protocol, ProtocolConfig, GRID_MODE_MAX_OVERHEAD,
};
use crate::sensor::SensorParams;
use crate::signal::SignalModel;

/// Hz^{3/2} per MHz Hz^{1/2}.
pub const KAPPA_DISPLAY_UNIT: f64 = 1e6;

pub const VERSION: &str = env!("SPINTRACK_VERSION");

/// Seeds of pilot runs are offset so they never coincide with scored runs.
const PILOT_SEED_OFFSET: u64 = 0x5851_f42d_4c95_7f2d;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepAxis {
    Kappa,
    Overhead,
    Fidelity,
}

impl SweepAxis {
    pub fn name(self) -> &'static str {
        match self {
            SweepAxis::Kappa => "kappa",
            SweepAxis::Overhead => "overhead",
            SweepAxis::Fidelity => "fidelity",
        }
    }

    pub fn from_name(s: &str) -> Option<Self> {
        match s {
            "kappa" => Some(SweepAxis::Kappa),
            "overhead" => Some(SweepAxis::Overhead),
            "fidelity" => Some(SweepAxis::Fidelity),
            _ => None,
        }
    }

    /// Value as written to the results file: kappa in MHz Hz^{1/2}, overhead
    /// in microseconds, fidelity unitless.
    pub fn display(self, si: f64) -> f64 {
        match self {
            SweepAxis::Kappa => si / KAPPA_DISPLAY_UNIT,
            SweepAxis::Overhead => si * 1e6,
            SweepAxis::Fidelity => si,
        }
    }

    fn apply(self, value: f64, model: &mut SignalModel, params: &mut SensorParams) {
        match self {
            SweepAxis::Kappa => model.kappa = value,
            SweepAxis::Overhead => params.overhead = value,
            SweepAxis::Fidelity => params.xi0 = value,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ProtocolSelection {
    Tracking,
    NonTracking,
    Both,
}

impl ProtocolSelection {
    pub fn protocols(self) -> &'static [Protocol] {
        match self {
            ProtocolSelection::Tracking => &[Protocol::Tracking],
            ProtocolSelection::NonTracking => &[Protocol::NonTracking],
            ProtocolSelection::Both => &[Protocol::NonTracking, Protocol::Tracking],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DurationPolicy {
    Fixed(f64),
    /// `short` seconds when the overhead is small, otherwise enough time for
    /// `min_cycles` non-tracking sequences (and at least `short`).
    Auto {
        short: f64,
        min_cycles: u32,
    },
}

impl Default for DurationPolicy {
    fn default() -> Self {
        DurationPolicy::Auto {
            short: 5e-3,
            min_cycles: 200,
        }
    }
}

impl DurationPolicy {
    pub fn duration(&self, max_k: u32, params: &SensorParams, cfg: &ProtocolConfig) -> f64 {
        match *self {
            DurationPolicy::Fixed(d) => d,
            DurationPolicy::Auto { short, min_cycles } => {
                let cycle = sequence_budget(max_k, cfg, params).total;
                if params.overhead <= GRID_MODE_MAX_OVERHEAD {
                    short.max(cycle * 2.0)
                } else {
                    short.max(cycle * min_cycles as f64)
                }
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepConfig {
    pub axis: SweepAxis,
    /// Axis values in SI units (Hz^{3/2}, s, or fidelity).
    pub values: Vec<f64>,
    pub trajectories: usize,
    pub protocols: ProtocolSelection,
    pub base_seed: u64,
    pub params: SensorParams,
    pub protocol: ProtocolConfig,
    pub signal: SignalModel,
    pub duration: DurationPolicy,
}

impl SweepConfig {
    pub fn validate(&self) -> Result<()> {
        if self.trajectories < 1 {
            return invalid("need at least one trajectory per point");
        }
        if self.values.is_empty() {
            return invalid("sweep has no axis values");
        }
        for &v in &self.values {
            let ok = match self.axis {
                SweepAxis::Kappa | SweepAxis::Overhead => v >= 0.0 && v.is_finite(),
                SweepAxis::Fidelity => (0.0..=1.0).contains(&v),
            };
            if !ok {
                return invalid(format!("bad {} value {v}", self.axis.name()));
            }
        }
        self.params.validate()?;
        self.protocol.validate()?;
        self.signal.validate()
    }

    /// SHA-256 of the canonical JSON form of the configuration.
    pub fn hash(&self) -> String {
        let bytes = serde_json::to_vec(self).expect("config serializes");
        Sha256::digest(&bytes).iter().map(|b| format!("{b:02x}")).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointResult {
    /// SI value.
    pub axis_value: f64,
    pub protocol: Protocol,
    /// Mean waveform error, Hz.
    pub eps: f64,
    /// Standard error of the mean, Hz.
    pub eps_stderr: f64,
    pub n_traj: usize,
    pub k_used: u32,
    pub duration: f64,
    /// Per-trajectory errors, Hz, in trajectory order.
    pub eps_samples: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EtaPoint {
    pub axis_value: f64,
    pub eta: f64,
    pub eta_err: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProtocolFit {
    pub protocol: Protocol,
    /// Free-exponent fit of error (Hz) against kappa (Hz^{3/2}).
    pub free: PowerLawFit,
    /// Constant of `error = c kappa^{2/3}`, SI units.
    pub two_thirds: FixedExponentFit,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepMetadata {
    pub version: String,
    pub config_hash: String,
    pub base_seed: u64,
    /// Trajectory `i` uses `base_seed ^ i` for both protocols.
    pub seed_rule: String,
    pub runtime_s: f64,
    pub config: SweepConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub axis: SweepAxis,
    pub points: Vec<PointResult>,
    pub etas: Vec<EtaPoint>,
    pub fits: Vec<ProtocolFit>,
    pub metadata: SweepMetadata,
}

/// One line of the results CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub axis_name: String,
    pub axis_value: f64,
    pub protocol: String,
    pub eps_mhz: f64,
    pub eps_stderr_mhz: f64,
    pub n_traj: usize,
    #[serde(rename = "K_used")]
    pub k_used: u32,
}

fn mean_stderr(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

fn run_point(
    protocol: Protocol,
    model: &SignalModel,
    params: &SensorParams,
    cfg: &ProtocolConfig,
    trajectories: usize,
    base_seed: u64,
) -> Result<Vec<f64>> {
    (0..trajectories)
        .into_par_iter()
        .map(|i| {
            let rec = run_protocol(protocol, model, params, cfg, base_seed ^ i as u64)?;
            waveform_error_after(&rec, rec.burn_in)
        })
        .collect()
}

/// Run every (point, protocol, trajectory) combination of `cfg`.
pub fn run_sweep(cfg: &SweepConfig) -> Result<SweepResult> {
    cfg.validate()?;
    let started = Instant::now();
    let mut points = Vec::new();
    let mut etas = Vec::new();

    for &value in &cfg.values {
        let mut model = cfg.signal;
        let mut params = cfg.params;
        cfg.axis.apply(value, &mut model, &mut params);

        let pilot_seed = cfg.base_seed.wrapping_add(PILOT_SEED_OFFSET);
        let pick_k = |protocol: Protocol, duration_for: &dyn Fn(u32) -> f64| -> Result<u32> {
            scan_k(protocol, &model, &params, &cfg.protocol, pilot_seed, duration_for)
        };
        let auto = |k: u32| {
            let p = SensorParams { max_k: k, ..params };
            cfg.duration.duration(k, &p, &cfg.protocol)
        };

        let selection = cfg.protocols.protocols();
        let k_nt = if selection.contains(&Protocol::NonTracking) {
            Some(pick_k(Protocol::NonTracking, &auto)?)
        } else {
            None
        };
        let point_duration = |k: u32| k_nt.map_or_else(|| auto(k), auto);

        let mut by_protocol = Vec::new();
        for &protocol in selection {
            let k = match (protocol, k_nt) {
                (Protocol::NonTracking, Some(k)) => k,
                _ => pick_k(protocol, &point_duration)?,
            };
            let duration = point_duration(k);
            let run_params = SensorParams { max_k: k, ..params };
            let run_cfg = ProtocolConfig {
                duration,
                k_policy: KPolicy::Fixed(k),
                ..cfg.protocol.clone()
            };
            let samples = run_point(protocol, &model, &run_params, &run_cfg, cfg.trajectories, cfg.base_seed)?;
            let (eps, eps_stderr) = mean_stderr(&samples);
            by_protocol.push((protocol, eps, eps_stderr));
            points.push(PointResult {
                axis_value: value,
                protocol,
                eps,
                eps_stderr,
                n_traj: cfg.trajectories,
                k_used: k,
                duration,
                eps_samples: samples,
            });
        }
        if let [(_, nt, nt_se), (_, tr, tr_se)] = by_protocol[..] {
            let ratio = eta(nt, tr)?;
            let rel = ((nt_se / nt).powi(2) + (tr_se / tr).powi(2)).sqrt();
            etas.push(EtaPoint {
                axis_value: value,
                eta: ratio,
                eta_err: ratio * rel,
            });
        }
    }

    let mut fits = Vec::new();
    if cfg.axis == SweepAxis::Kappa && cfg.values.len() >= 3 {
        for &protocol in cfg.protocols.protocols() {
            let pts: Vec<_> = points
                .iter()
                .filter(|p| p.protocol == protocol)
                .map(|p| (p.axis_value, p.eps, p.eps_stderr))
                .collect();
            if let (Ok(free), Ok(two_thirds)) = (fit_power_law(&pts), fit_fixed_exponent(&pts, 2.0 / 3.0)) {
                fits.push(ProtocolFit {
                    protocol,
                    free,
                    two_thirds,
                });
            }
        }
    }

    Ok(SweepResult {
        axis: cfg.axis,
        points,
        etas,
        fits,
        metadata: SweepMetadata {
            version: VERSION.to_string(),
            config_hash: cfg.hash(),
            base_seed: cfg.base_seed,
            seed_rule: "trajectory i uses base_seed XOR i".into(),
            runtime_s: started.elapsed().as_secs_f64(),
            config: cfg.clone(),
        },
    })
}

impl SweepResult {
    pub fn rows(&self) -> Vec<ResultRow> {
        self.points
            .iter()
            .map(|p| ResultRow {
                axis_name: self.axis.name().to_string(),
                axis_value: self.axis.display(p.axis_value),
                protocol: p.protocol.name().to_string(),
                eps_mhz: p.eps / 1e6,
                eps_stderr_mhz: p.eps_stderr / 1e6,
                n_traj: p.n_traj,
                k_used: p.k_used,
            })
            .collect()
    }

    /// Results CSV: `axis_name,axis_value,protocol,eps_mhz,eps_stderr_mhz,n_traj,K_used`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        for row in self.rows() {
            w.serialize(row)?;
        }
        w.flush()?;
        Ok(())
    }

    /// Everything except the CSV rows, including the resolved configuration.
    pub fn metadata_json(&self) -> Result<String> {
        #[derive(Serialize)]
        struct Doc<'a> {
            metadata: &'a SweepMetadata,
            etas: &'a [EtaPoint],
            fits: &'a [ProtocolFit],
        }
        Ok(serde_json::to_string_pretty(&Doc {
            metadata: &self.metadata,
            etas: &self.etas,
            fits: &self.fits,
        })?)
    }

    pub fn point(&self, protocol: Protocol, axis_value: f64) -> Option<&PointResult> {
        self.points
            .iter()
            .find(|p| p.protocol == protocol && p.axis_value == axis_value)
    }
}

pub fn read_results_csv<R: Read>(input: R) -> Result<Vec<ResultRow>> {
    let mut r = csv::Reader::from_reader(input);
    let rows: std::result::Result<Vec<ResultRow>, _> = r.deserialize().collect();
    Ok(rows?)
}
