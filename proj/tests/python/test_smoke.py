import math

import numpy as np
import pytest

import pmoc


def double_integrator(**extra):
    return pmoc.config(system="pointmass", n=8, tf_min=1.0, tf_max=1.0, **extra)


def test_config_defaults_and_overrides():
    cfg = pmoc.config()
    assert cfg["system"] == "acrobot"
    assert cfg["n"] == 64
    assert cfg["guess"]["amplitude"] == 1.0
    tuned = pmoc.config(cfg, amplitude=0.3, n=32)
    assert tuned["guess"]["amplitude"] == 0.3
    assert tuned["n"] == 32
    assert pmoc.digest(cfg) != pmoc.digest(tuned)
    with pytest.raises(pmoc.ConfigError):
        pmoc.config(nodes=3)


def test_basis_quadrature_and_metric():
    b = pmoc.basis("legendre", 6)
    # exact for degree < 12
    assert abs(b["weights"] @ b["nodes"] ** 10 - 2.0 / 11.0) < 1e-13
    c = pmoc.basis("chebyshev", 8)
    t = c["nodes"]
    assert abs(t @ c["metric"] @ t - 2.0 / 3.0) < 1e-12
    assert np.allclose(c["diff"] @ t**3, 3 * t**2, atol=1e-12)


def test_double_integrator_run_and_trajectory():
    report = pmoc.run(double_integrator(opt_tol=1e-7))
    rec = report["runs"][0]
    assert rec["status"] == "Optimal"
    assert abs(rec["cost"] - 12.0) < 1e-5
    header, data = pmoc.trajectory(report)
    assert header == ["t", "q1", "v1", "u1", "p1"]
    assert data.shape == (512, 5)
    assert np.all(np.diff(data[:, 0]) > 0)
    assert np.max(np.abs(data[:, 3] - (6 - 12 * data[:, 0]))) < 1e-5


def test_compare_orders_rows_and_contains_failures():
    report = pmoc.compare(["ode-el", "pmoc"], pmoc.config(system="pendulum", n=16, max_major=2))
    assert [r["config"]["scheme"] for r in report["runs"]] == ["pmoc", "ode-el"]
    assert all(r["status"] == "IterLimit" for r in report["runs"])
    assert "> 2" in pmoc.table(report)
    with pytest.raises(pmoc.ConfigError):
        pmoc.trajectory(report)


def test_geometry_probes():
    assert pmoc.pendulum_defect(16)["defect"] < 1e-4
    assert pmoc.pendulum_defect(16, broken=True)["defect"] > 1e-1
    assert pmoc.gravity_free_drift("pmoc", 32)["drift"] < 1e-8
    rows = pmoc.convergence_study("pmoc", [8, 16, 24])
    residuals = [r for _, r in rows]
    assert residuals == sorted(residuals, reverse=True)
    assert residuals[-1] < 1e-8
    assert not math.isnan(residuals[0])
