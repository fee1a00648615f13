//! Real-time Bayesian estimation of a frequency that drifts as a Wiener
//! process, sensed through Ramsey experiments on a single qubit.
//!
//! The crate simulates two estimators side by side:
//!
//! * a reset-based *non-tracking* estimator that restarts from a flat prior
//!   for every sequence of `K + 1` sensing times, and
//! * an adaptive *tracking* estimator that keeps its posterior, diffuses it
//!   with the known signal statistics and picks one sensing time per Ramsey.
//!
//! Distributions over the periodic phase are handled by [`circdist`], the
//! ground truth by [`signal`], single experiments by [`sensor`], the two
//! estimators by [`protocol`], and sweeps, error metrics and fits by
//! [`harness`].

pub mod circdist;
pub mod error;
pub mod harness;
pub mod protocol;
pub mod sensor;
pub mod signal;

pub use circdist::CircularDistribution;
pub use error::{Error, Result};
pub use protocol::{run_non_tracking, run_protocol, run_tracking, Protocol, ProtocolConfig, TrajectoryRecord};
pub use sensor::{outcome_probability, Sensor, SensorParams};
pub use signal::{InitialFrequency, PathMode, SignalModel, TruthPath};
