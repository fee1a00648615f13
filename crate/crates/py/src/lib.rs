//! Python bindings for the `spintrack` core.
//!
//! Units are SI throughout (Hz, s, Hz^{3/2}); the CSV helpers write the same
//! MHz columns as the command-line tool.

use num_complex::Complex64;
use pyo3::exceptions::{PyOSError, PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;
use spintrack::circdist::{DEFAULT_J_MAX, DEFAULT_PRUNE_TOL};
use spintrack::harness::{self, DurationPolicy, ProtocolSelection, SweepAxis, SweepConfig};
use spintrack::protocol::{self, KPolicy, PhaseRule, Protocol};
use spintrack::{Error, SignalModel};

fn err(e: Error) -> PyErr {
    match e {
        Error::InvalidArgument(_) | Error::CapExceeded { .. } | Error::DegenerateFit(_) => {
            PyValueError::new_err(e.to_string())
        }
        Error::Io(_) => PyOSError::new_err(e.to_string()),
        _ => PyRuntimeError::new_err(e.to_string()),
    }
}

/// Parse a kebab-case name through the serde representation of `T`.
fn parse_name<T: serde::de::DeserializeOwned>(kind: &str, s: &str) -> PyResult<T> {
    serde_json::from_value(serde_json::Value::String(s.to_string()))
        .map_err(|_| PyValueError::new_err(format!("unknown {kind} '{s}'")))
}

fn parse_protocol(s: &str) -> PyResult<Protocol> {
    parse_name("protocol", s)
}

#[pyclass(name = "SensorParams", module = "spintrack_py", frozen, skip_from_py_object)]
#[derive(Clone)]
struct PySensorParams {
    inner: spintrack::SensorParams,
}

#[pymethods]
impl PySensorParams {
    #[new]
    #[pyo3(signature = (tau0=20e-9, max_k=7, t2_star=100e-6, xi0=1.0, xi1=1.0, overhead=0.0))]
    fn new(tau0: f64, max_k: u32, t2_star: f64, xi0: f64, xi1: f64, overhead: f64) -> PyResult<Self> {
        let inner = spintrack::SensorParams {
            tau0,
            max_k,
            t2_star,
            xi0,
            xi1,
            overhead,
        };
        inner.validate().map_err(err)?;
        Ok(PySensorParams { inner })
    }

    #[getter]
    fn tau0(&self) -> f64 {
        self.inner.tau0
    }

    #[getter]
    fn max_k(&self) -> u32 {
        self.inner.max_k
    }

    #[getter]
    fn t2_star(&self) -> f64 {
        self.inner.t2_star
    }

    #[getter]
    fn xi0(&self) -> f64 {
        self.inner.xi0
    }

    #[getter]
    fn xi1(&self) -> f64 {
        self.inner.xi1
    }

    #[getter]
    fn overhead(&self) -> f64 {
        self.inner.overhead
    }

    /// Copy with a different largest sensing index.
    fn with_max_k(&self, max_k: u32) -> Self {
        PySensorParams {
            inner: spintrack::SensorParams { max_k, ..self.inner },
        }
    }

    fn sensing_time(&self, k: u32) -> f64 {
        self.inner.sensing_time(k)
    }

    fn __repr__(&self) -> String {
        let p = &self.inner;
        format!(
            "SensorParams(tau0={:e}, max_k={}, t2_star={:e}, xi0={}, xi1={}, overhead={:e})",
            p.tau0, p.max_k, p.t2_star, p.xi0, p.xi1, p.overhead
        )
    }
}

#[pyclass(name = "ProtocolConfig", module = "spintrack_py", frozen, skip_from_py_object)]
#[derive(Clone)]
struct PyProtocolConfig {
    inner: spintrack::ProtocolConfig,
}

#[pymethods]
impl PyProtocolConfig {
    /// `k_scan = (min, max, pilots)` enables the K scan used by `choose_k`
    /// and `run_sweep`; otherwise sweeps use `fixed_k` (or 7).
    #[new]
    #[pyo3(signature = (g=5, f=3, alpha=0.15, phase_rule="discriminating", duration=5e-3, fixed_k=None, k_scan=None))]
    fn new(
        g: u32,
        f: u32,
        alpha: f64,
        phase_rule: &str,
        duration: f64,
        fixed_k: Option<u32>,
        k_scan: Option<(u32, u32, usize)>,
    ) -> PyResult<Self> {
        let k_policy = match (fixed_k, k_scan) {
            (Some(_), Some(_)) => return Err(PyValueError::new_err("give fixed_k or k_scan, not both")),
            (_, Some((min, max, pilot_trajectories))) => KPolicy::Scan {
                min,
                max,
                pilot_trajectories,
            },
            (k, None) => KPolicy::Fixed(k.unwrap_or(7)),
        };
        let inner = spintrack::ProtocolConfig {
            g,
            f,
            alpha,
            phase_rule: parse_name::<PhaseRule>("phase rule", phase_rule)?,
            duration,
            k_policy,
            ..spintrack::ProtocolConfig::default()
        };
        inner.validate().map_err(err)?;
        Ok(PyProtocolConfig { inner })
    }

    #[getter]
    fn g(&self) -> u32 {
        self.inner.g
    }

    #[getter]
    fn f(&self) -> u32 {
        self.inner.f
    }

    #[getter]
    fn alpha(&self) -> f64 {
        self.inner.alpha
    }

    #[getter]
    fn duration(&self) -> f64 {
        self.inner.duration
    }

    fn __repr__(&self) -> String {
        format!(
            "ProtocolConfig({})",
            serde_json::to_string(&self.inner).unwrap_or_default()
        )
    }
}

/// Fourier-series density over `phi = 2 pi f tau0`.
#[pyclass(name = "CircularDistribution", module = "spintrack_py")]
struct PyCircularDistribution {
    inner: spintrack::CircularDistribution,
}

#[pymethods]
impl PyCircularDistribution {
    #[staticmethod]
    #[pyo3(signature = (j_max=DEFAULT_J_MAX, prune_tol=DEFAULT_PRUNE_TOL))]
    fn uniform(j_max: usize, prune_tol: f64) -> PyResult<Self> {
        let inner = spintrack::CircularDistribution::uniform(j_max, prune_tol).map_err(err)?;
        Ok(PyCircularDistribution { inner })
    }

    /// Coefficients `c_0, c_1, ...`; negative orders follow by symmetry.
    #[staticmethod]
    #[pyo3(signature = (coeffs, j_max=DEFAULT_J_MAX, prune_tol=DEFAULT_PRUNE_TOL))]
    fn from_coefficients(coeffs: Vec<Complex64>, j_max: usize, prune_tol: f64) -> PyResult<Self> {
        let inner = spintrack::CircularDistribution::from_coefficients(&coeffs, j_max, prune_tol).map_err(err)?;
        Ok(PyCircularDistribution { inner })
    }

    #[staticmethod]
    #[pyo3(signature = (s, j_max=DEFAULT_J_MAX, prune_tol=DEFAULT_PRUNE_TOL))]
    fn from_json(s: &str, j_max: usize, prune_tol: f64) -> PyResult<Self> {
        let inner = spintrack::CircularDistribution::from_json(s, j_max, prune_tol).map_err(err)?;
        Ok(PyCircularDistribution { inner })
    }

    fn to_json(&self) -> PyResult<String> {
        self.inner.to_json().map_err(err)
    }

    #[getter]
    fn order(&self) -> usize {
        self.inner.order()
    }

    fn coefficient(&self, j: i64) -> Complex64 {
        self.inner.coefficient(j)
    }

    /// `c_0 .. c_order`.
    fn coefficients(&self) -> Vec<Complex64> {
        (0..=self.inner.order() as i64)
            .map(|j| self.inner.coefficient(j))
            .collect()
    }

    fn evaluate_pdf(&self, phi: f64) -> f64 {
        self.inner.evaluate_pdf(phi)
    }

    fn bayes_update(&mut self, mu: u8, k: u32, theta: f64, params: PyRef<'_, PySensorParams>) -> PyResult<()> {
        self.inner.bayes_update(mu, k, theta, &params.inner).map_err(err)
    }

    fn convolve_wiener(&mut self, kappa: f64, dt: f64, tau0: f64) -> PyResult<()> {
        self.inner.convolve_wiener(kappa, dt, tau0).map_err(err)
    }

    fn estimate_frequency(&self, tau0: f64) -> PyResult<f64> {
        self.inner.estimate_frequency(tau0).map_err(err)
    }

    fn holevo_variance(&self) -> PyResult<f64> {
        self.inner.holevo_variance().map_err(err)
    }

    fn holevo_std(&self, tau0: f64) -> PyResult<f64> {
        self.inner.holevo_std(tau0).map_err(err)
    }

    fn control_phase(&self, k: u32) -> f64 {
        self.inner.control_phase(k)
    }

    fn __repr__(&self) -> String {
        format!("CircularDistribution(order={})", self.inner.order())
    }
}

/// Estimates and truth samples of one simulated run.
#[pyclass(name = "Trajectory", module = "spintrack_py", frozen)]
struct PyTrajectory {
    inner: spintrack::TrajectoryRecord,
}

#[pymethods]
impl PyTrajectory {
    #[getter]
    fn burn_in(&self) -> f64 {
        self.inner.burn_in
    }

    #[getter]
    fn t_end(&self) -> f64 {
        self.inner.t_end
    }

    #[getter]
    fn ramseys(&self) -> u64 {
        self.inner.ramseys
    }

    fn __len__(&self) -> usize {
        self.inner.rows.len()
    }

    /// Estimate rows as a dict of equal-length lists.
    fn columns<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyDict>> {
        let rows = &self.inner.rows;
        let d = PyDict::new(py);
        d.set_item("t", rows.iter().map(|r| r.t).collect::<Vec<_>>())?;
        d.set_item("f_true", rows.iter().map(|r| r.f_true).collect::<Vec<_>>())?;
        d.set_item("f_hat", rows.iter().map(|r| r.f_hat).collect::<Vec<_>>())?;
        d.set_item("k", rows.iter().map(|r| r.k).collect::<Vec<_>>())?;
        d.set_item("mu", rows.iter().map(|r| r.mu).collect::<Vec<_>>())?;
        d.set_item("theta", rows.iter().map(|r| r.theta).collect::<Vec<_>>())?;
        d.set_item("fom", rows.iter().map(|r| r.fom).collect::<Vec<_>>())?;
        Ok(d)
    }

    /// Truth samples as `(times, frequencies)`.
    fn truth(&self) -> (Vec<f64>, Vec<f64>) {
        self.inner.truth.iter().copied().unzip()
    }

    /// RMS deviation of the held estimate from the truth after `start`
    /// (default: the burn-in time), Hz.
    #[pyo3(signature = (start=None))]
    fn waveform_error(&self, start: Option<f64>) -> PyResult<f64> {
        harness::waveform_error_after(&self.inner, start.unwrap_or(self.inner.burn_in)).map_err(err)
    }

    fn to_csv(&self) -> PyResult<String> {
        let mut buf = Vec::new();
        self.inner.write_csv(&mut buf).map_err(err)?;
        Ok(String::from_utf8(buf).expect("csv is utf-8"))
    }
}

#[pyclass(name = "SweepResult", module = "spintrack_py", frozen)]
struct PySweepResult {
    inner: harness::SweepResult,
}

#[pymethods]
impl PySweepResult {
    fn points<'py>(&self, py: Python<'py>) -> PyResult<Vec<Bound<'py, PyDict>>> {
        self.inner
            .points
            .iter()
            .map(|p| {
                let d = PyDict::new(py);
                d.set_item("axis_value", p.axis_value)?;
                d.set_item("protocol", p.protocol.name())?;
                d.set_item("eps", p.eps)?;
                d.set_item("eps_stderr", p.eps_stderr)?;
                d.set_item("n_traj", p.n_traj)?;
                d.set_item("k_used", p.k_used)?;
                d.set_item("duration", p.duration)?;
                d.set_item("eps_samples", p.eps_samples.clone())?;
                Ok(d)
            })
            .collect()
    }

    /// `(axis_value, eta, eta_err)` per point run with both protocols.
    fn etas(&self) -> Vec<(f64, f64, f64)> {
        self.inner
            .etas
            .iter()
            .map(|e| (e.axis_value, e.eta, e.eta_err))
            .collect()
    }

    /// Results CSV (display units) as a string.
    fn to_csv(&self) -> PyResult<String> {
        let mut buf = Vec::new();
        self.inner.write_csv(&mut buf).map_err(err)?;
        Ok(String::from_utf8(buf).expect("csv is utf-8"))
    }

    /// Metadata, fits and eta values as JSON.
    fn metadata_json(&self) -> PyResult<String> {
        self.inner.metadata_json().map_err(err)
    }
}

#[pyfunction]
fn outcome_probability(phase: f64, theta: f64, tau: f64, params: PyRef<'_, PySensorParams>) -> PyResult<f64> {
    spintrack::outcome_probability(phase, theta, tau, &params.inner).map_err(err)
}

#[pyfunction]
fn repetitions(k: u32, max_k: u32, config: PyRef<'_, PyProtocolConfig>) -> PyResult<u32> {
    protocol::repetitions(k, max_k, &config.inner).map_err(err)
}

/// `(sensing time, Ramsey count, total time)` of one non-tracking sequence.
#[pyfunction]
fn sequence_budget(
    max_k: u32,
    config: PyRef<'_, PyProtocolConfig>,
    params: PyRef<'_, PySensorParams>,
) -> (f64, u64, f64) {
    let b = protocol::sequence_budget(max_k, &config.inner, &params.inner);
    (b.sensing, b.ramseys, b.total)
}

fn signal(kappa: f64, tau0: f64) -> PyResult<SignalModel> {
    SignalModel::new(kappa, tau0).map_err(err)
}

/// Simulate one trajectory with `K = params.max_k`.
#[pyfunction]
#[pyo3(signature = (protocol, kappa, params, config, seed=0))]
fn run_trajectory(
    py: Python<'_>,
    protocol: &str,
    kappa: f64,
    params: PyRef<'_, PySensorParams>,
    config: PyRef<'_, PyProtocolConfig>,
    seed: u64,
) -> PyResult<PyTrajectory> {
    let protocol = parse_protocol(protocol)?;
    let model = signal(kappa, params.inner.tau0)?;
    let (p, c) = (params.inner, config.inner.clone());
    let inner = py
        .detach(|| spintrack::run_protocol(protocol, &model, &p, &c, seed))
        .map_err(err)?;
    Ok(PyTrajectory { inner })
}

/// K picked by the config's K policy (pilot scan or fixed value).
#[pyfunction]
#[pyo3(signature = (protocol, kappa, params, config, seed=0))]
fn choose_k(
    py: Python<'_>,
    protocol: &str,
    kappa: f64,
    params: PyRef<'_, PySensorParams>,
    config: PyRef<'_, PyProtocolConfig>,
    seed: u64,
) -> PyResult<u32> {
    let protocol = parse_protocol(protocol)?;
    let model = signal(kappa, params.inner.tau0)?;
    let (p, c) = (params.inner, config.inner.clone());
    py.detach(|| protocol::choose_k(protocol, &model, &p, &c, seed))
        .map_err(err)
}

#[pyfunction]
fn eta(eps_non_tracking: f64, eps_tracking: f64) -> PyResult<f64> {
    harness::eta(eps_non_tracking, eps_tracking).map_err(err)
}

fn fit_points(x: &[f64], y: &[f64], yerr: Option<Vec<f64>>) -> PyResult<Vec<(f64, f64, f64)>> {
    let yerr = yerr.unwrap_or_else(|| vec![0.0; x.len()]);
    if x.len() != y.len() || y.len() != yerr.len() {
        return Err(PyValueError::new_err("x, y and yerr must have equal length"));
    }
    Ok(x.iter().zip(y).zip(&yerr).map(|((&a, &b), &e)| (a, b, e)).collect())
}

/// Weighted log-log fit of `y = c x^exponent`; returns
/// `(c, exponent, c_err, exponent_err)`.
#[pyfunction]
#[pyo3(signature = (x, y, yerr=None))]
fn fit_power_law(x: Vec<f64>, y: Vec<f64>, yerr: Option<Vec<f64>>) -> PyResult<(f64, f64, f64, f64)> {
    let f = harness::fit_power_law(&fit_points(&x, &y, yerr)?).map_err(err)?;
    Ok((f.c, f.exponent, f.c_err, f.exponent_err))
}

/// Constant of `y = c x^exponent` for fixed exponent; returns `(c, c_err)`.
#[pyfunction]
#[pyo3(signature = (x, y, yerr=None, exponent=2.0 / 3.0))]
fn fit_fixed_exponent(x: Vec<f64>, y: Vec<f64>, yerr: Option<Vec<f64>>, exponent: f64) -> PyResult<(f64, f64)> {
    let f = harness::fit_fixed_exponent(&fit_points(&x, &y, yerr)?, exponent).map_err(err)?;
    Ok((f.c, f.c_err))
}

/// Sweep `axis` ("kappa", "overhead" or "fidelity") over SI `values`.
///
/// `duration=None` picks the simulated time from the overhead and K.
#[pyfunction]
#[pyo3(signature = (axis, values, kappa, params, config, trajectories=100, protocols="both", seed=1, duration=None))]
#[allow(clippy::too_many_arguments)]
fn run_sweep(
    py: Python<'_>,
    axis: &str,
    values: Vec<f64>,
    kappa: f64,
    params: PyRef<'_, PySensorParams>,
    config: PyRef<'_, PyProtocolConfig>,
    trajectories: usize,
    protocols: &str,
    seed: u64,
    duration: Option<f64>,
) -> PyResult<PySweepResult> {
    let axis = SweepAxis::from_name(axis).ok_or_else(|| PyValueError::new_err(format!("unknown axis '{axis}'")))?;
    let protocols = match protocols {
        "both" => ProtocolSelection::Both,
        "tracking" => ProtocolSelection::Tracking,
        "non-tracking" => ProtocolSelection::NonTracking,
        other => return Err(PyValueError::new_err(format!("unknown protocol selection '{other}'"))),
    };
    let cfg = SweepConfig {
        axis,
        values,
        trajectories,
        protocols,
        base_seed: seed,
        params: params.inner,
        protocol: config.inner.clone(),
        signal: signal(kappa, params.inner.tau0)?,
        duration: duration.map_or_else(DurationPolicy::default, DurationPolicy::Fixed),
    };
    let inner = py.detach(|| harness::run_sweep(&cfg)).map_err(err)?;
    Ok(PySweepResult { inner })
}

#[pymodule]
fn spintrack_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("__version__", harness::VERSION)?;
    m.add_class::<PySensorParams>()?;
    m.add_class::<PyProtocolConfig>()?;
    m.add_class::<PyCircularDistribution>()?;
    m.add_class::<PyTrajectory>()?;
    m.add_class::<PySweepResult>()?;
    m.add_function(wrap_pyfunction!(outcome_probability, m)?)?;
    m.add_function(wrap_pyfunction!(repetitions, m)?)?;
    m.add_function(wrap_pyfunction!(sequence_budget, m)?)?;
    m.add_function(wrap_pyfunction!(run_trajectory, m)?)?;
    m.add_function(wrap_pyfunction!(choose_k, m)?)?;
    m.add_function(wrap_pyfunction!(eta, m)?)?;
    m.add_function(wrap_pyfunction!(fit_power_law, m)?)?;
    m.add_function(wrap_pyfunction!(fit_fixed_exponent, m)?)?;
    m.add_function(wrap_pyfunction!(run_sweep, m)?)?;
    Ok(())
}
