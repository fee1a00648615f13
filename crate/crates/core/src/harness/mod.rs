//! Parameter sweeps, waveform error, scaling-law fits and result files.

mod fit;
mod metrics;
mod sweep;

pub use fit::{fit_fixed_exponent, fit_power_law, FixedExponentFit, PowerLawFit};
pub use metrics::{eta, waveform_error, waveform_error_after};
pub use sweep::{
    read_results_csv, run_sweep, DurationPolicy, EtaPoint, PointResult, ProtocolFit, ProtocolSelection, ResultRow,
    SweepAxis, SweepConfig, SweepMetadata, SweepResult, KAPPA_DISPLAY_UNIT, VERSION,
};
