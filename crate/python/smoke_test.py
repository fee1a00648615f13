"""Smoke test for the spintrack_py extension.

Build and install first:

    pip install --no-build-isolation -e crates/py
    python python/smoke_test.py
"""

import cmath
import math

import spintrack_py as st


def close(a, b, tol=1e-12):
    return abs(a - b) <= tol * max(1.0, abs(b))


def check_distribution():
    params = st.SensorParams(t2_star=math.inf)
    d = st.CircularDistribution.uniform()
    assert close(d.evaluate_pdf(0.3), 1 / (2 * math.pi))
    d.bayes_update(0, 0, 0.0, params)
    # posterior (1 + cos phi) / 2 pi
    assert close(d.evaluate_pdf(0.0), 1 / math.pi)
    assert close(d.evaluate_pdf(math.pi), 0.0)
    assert close(d.coefficient(1).real, 1 / (4 * math.pi))
    assert close(d.holevo_variance(), 3.0)

    c = [1 / (2 * math.pi), cmath.rect(0.1, math.pi / 2)]
    e = st.CircularDistribution.from_coefficients(c)
    # arg c_{-1} = -pi/2 -> -1/(4 tau0)
    assert close(e.estimate_frequency(20e-9), -12.5e6, 1e-9)
    before = abs(e.coefficient(1))
    e.convolve_wiener(2e6, 100e-6, 20e-9)
    assert abs(e.coefficient(1)) < before
    again = st.CircularDistribution.from_json(e.to_json())
    assert again.coefficients() == e.coefficients()


def check_formulas():
    cfg = st.ProtocolConfig()
    params = st.SensorParams()
    sensing, ramseys, total = st.sequence_budget(7, cfg, params)
    assert close(sensing, 40.32e-6) and ramseys == 124 and total == sensing
    assert st.repetitions(0, 7, cfg) == 26
    lossy = st.SensorParams(xi0=0.88, t2_star=math.inf)
    assert close(st.outcome_probability(0.0, 0.0, 20e-9, lossy), 0.88)
    c, exponent, _, _ = st.fit_power_law([1.0, 2.0, 4.0], [3.0, 6.0, 12.0])
    assert close(c, 3.0, 1e-9) and close(exponent, 1.0, 1e-9)


def check_simulation():
    params = st.SensorParams(overhead=10e-9)
    cfg = st.ProtocolConfig(duration=1e-3)
    runs = {}
    for protocol in ("non-tracking", "tracking"):
        traj = st.run_trajectory(protocol, 1e6, params, cfg, seed=3)
        cols = traj.columns()
        assert len(cols["t"]) == len(traj) > 0
        assert traj.to_csv().startswith("t_s,f_true_hz")
        runs[protocol] = traj.waveform_error()
        again = st.run_trajectory(protocol, 1e6, params, cfg, seed=3)
        assert again.waveform_error() == runs[protocol]
    print("waveform error [kHz]:", {k: round(v / 1e3, 2) for k, v in runs.items()})

    sweep = st.run_sweep(
        "kappa", [0.5e6, 1e6, 2e6], 1e6, params, st.ProtocolConfig(fixed_k=7),
        trajectories=3, seed=2, duration=1e-3,
    )
    assert len(sweep.points()) == 6 and len(sweep.etas()) == 3
    assert sweep.to_csv().splitlines()[0] == "axis_name,axis_value,protocol,eps_mhz,eps_stderr_mhz,n_traj,K_used"
    print("eta:", [round(e[1], 2) for e in sweep.etas()])

    try:
        st.SensorParams(xi0=1.5)
    except ValueError:
        pass
    else:
        raise AssertionError("invalid fidelity accepted")


if __name__ == "__main__":
    print("spintrack_py", st.__version__)
    check_distribution()
    check_formulas()
    check_simulation()
    print("smoke test passed")
