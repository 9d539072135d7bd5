# SPDX-License-Identifier: Apache-2.0
"""Optimizer dynamics on a linear softmax associative memory.

Configurations are plain dicts using the same keys as the CLI's JSON config
files; ``preset`` names a shipped preset that the dict is layered on top of.
"""

import json
import os
from pathlib import Path

_bundled = Path(__file__).with_name("presets")
if _bundled.is_dir():
    os.environ.setdefault("AMEM_PRESET_DIR", str(_bundled))

from . import _core  # noqa: E402
from ._core import (  # noqa: E402
    InvalidArgument,
    IoError,
    NumericalError,
    gd_margin_step,
    gd_stability_threshold,
    margin_fixed_point,
    matrix_sign,
    muon_phase_window,
    optimal_loss,
    preset_directory,
    preset_names,
    scaling_exponents,
    verify,
)

__all__ = [
    "InvalidArgument",
    "IoError",
    "NumericalError",
    "fit_power_law",
    "gd_margin_step",
    "gd_stability_threshold",
    "loss_and_gradient",
    "margin_fixed_point",
    "matrix_sign",
    "muon_phase_window",
    "optimal_loss",
    "preset_directory",
    "preset_names",
    "resolve_config",
    "scaling_exponents",
    "simulate",
    "sweep",
    "verify",
]


def _encode(config, overrides):
    merged = dict(config or {})
    merged.update(overrides)
    return json.dumps(merged) if merged else ""


def resolve_config(config=None, *, preset="", **overrides):
    """Fully resolved configuration as a dict."""
    return json.loads(_core.resolve_config(_encode(config, overrides), preset))


def simulate(config=None, *, preset="", **overrides):
    """Run one trajectory. Returns a dict of numpy arrays keyed by probe."""
    return _core.simulate(_encode(config, overrides), preset)


def sweep(config=None, *, preset="", jobs=1, **overrides):
    """Best final loss per budget over the learning-rate grid."""
    return _core.sweep(_encode(config, overrides), preset, jobs)


def fit_power_law(budgets, losses, l_star):
    """Fit loss - l_star = a * T^(-gamma) by least squares in log space."""
    return _core.fit_power_law(list(budgets), list(losses), l_star)


def loss_and_gradient(w, config=None, *, preset="", **overrides):
    """Total loss and gradient at raw weights ``w`` for the configured task."""
    return _core.loss_and_gradient(w, _encode(config, overrides), preset)
