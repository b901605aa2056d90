"""Python front end for the nova inner convex approximation solver."""

import json
import math

import numpy as np

from ._nova import (
    ConfigError,
    ConvergenceError,
    InfeasibilityError,
    InputError,
    IoError,
    NovaError,
    ParameterError,
    UnsupportedError,
    grid_oracle,
    list_problems,
    problem_info,
    sample_feasible_points,
    step_sequence,
    verify_surrogates,
)

__all__ = [
    "ConfigError",
    "ConvergenceError",
    "InfeasibilityError",
    "InputError",
    "IoError",
    "NovaError",
    "ParameterError",
    "UnsupportedError",
    "grid_oracle",
    "list_problems",
    "problem_info",
    "run",
    "sample_feasible_points",
    "simulate",
    "step_sequence",
    "verify_surrogates",
]


def _config_text(config, overrides):
    cfg = dict(config or {})
    cfg.update(overrides)
    for key in ("x0",):
        if isinstance(cfg.get(key), np.ndarray):
            cfg[key] = cfg[key].tolist()
    return json.dumps(cfg)


def _decode(text):
    out = json.loads(text)
    out["x"] = np.asarray(out["x"])
    out["multipliers"] = np.asarray(out["multipliers"])
    out["iterates"] = [np.asarray(x) for x in out["iterates"]]
    # JSON has no infinities; an unconstrained row stores max_g as null.
    for row in out["trace"]:
        for key in ("U", "max_g"):
            if row[key] is None:
                row[key] = -math.inf
    return out


def run(config=None, **overrides):
    """Run the outer loop. Takes the same JSON schema as `nova run --config`."""
    from ._nova import run_json

    return _decode(run_json(_config_text(config, overrides)))


def simulate(config=None, **overrides):
    """Run with a distributed inner solver and return the round log as well."""
    from ._nova import simulate_json

    return _decode(simulate_json(_config_text(config, overrides)))
