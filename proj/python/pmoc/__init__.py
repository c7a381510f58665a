"""Pseudo-spectral variational trajectory optimization.

Configurations and reports are plain dicts with the same keys as the JSON
files written by the ``pmoc`` command-line tool.
"""

from __future__ import annotations

import io
import json
from typing import Any, Iterable

import numpy as np

from . import _core
from ._core import (
    ConfigError,
    DynamicsError,
    GeomError,
    NlpError,
    SingularBasisError,
    basis,
    convergence_study,
    gravity_free_drift,
    pendulum_defect,
)

__all__ = [
    "ConfigError",
    "DynamicsError",
    "GeomError",
    "NlpError",
    "SingularBasisError",
    "basis",
    "compare",
    "config",
    "convergence_study",
    "digest",
    "gravity_free_drift",
    "pendulum_defect",
    "run",
    "table",
    "trajectory",
]


def _merge(base: dict | None, overrides: dict[str, Any]) -> str:
    cfg = dict(base or {})
    guess = dict(cfg.get("guess", {}))
    for key, value in overrides.items():
        if key in ("strategy", "amplitude", "frequency", "phase", "torque", "kp", "kd"):
            guess[key] = value
        else:
            cfg[key] = value
    if guess:
        cfg["guess"] = guess
    return json.dumps(cfg)


def config(base: dict | None = None, **overrides: Any) -> dict:
    """Complete configuration: defaults, then `base`, then keyword overrides."""
    return json.loads(_core.normalize_config(_merge(base, overrides)))


def digest(cfg: dict) -> str:
    return _core.config_digest(json.dumps(cfg))


def run(cfg: dict | None = None, **overrides: Any) -> dict:
    """Solve one configuration and return the report."""
    return json.loads(_core.run(_merge(cfg, overrides)))


def compare(schemes: Iterable[str], cfg: dict | None = None, **overrides: Any) -> dict:
    """Solve the configuration once per scheme; runs come back in pmoc, dae-el, ode-el order."""
    return json.loads(_core.compare(_merge(cfg, overrides), list(schemes)))


def table(report: dict) -> str:
    return _core.table(json.dumps(report))


def trajectory(report: dict, run: int = 0) -> tuple[list[str], np.ndarray]:
    """Header and 512 x k samples of t, q, v, u, p for a feasible run."""
    text = _core.trajectory_csv(json.dumps(report), run)
    header = text.split("\n", 1)[0].split(",")
    return header, np.loadtxt(io.StringIO(text), delimiter=",", skiprows=1, ndmin=2)
