"""Low-rank VAR(1) estimation.

Trajectories are ``M x n`` arrays with one column per time step.
Estimator specs are dicts (or JSON strings) with the same keys as the
``lrvar`` config files, e.g. ``{"kind": "fixed-rank", "rank": 2}``.
"""

import json as _json

from ._core import (
    ConfigError,
    ContractionError,
    DataError,
    DomainError,
    Error,
    NoJumpError,
    NumericalError,
    SampleTooSmallError,
    UnsupportedLossError,
    empirical_risk,
    excess_risk,
    fixed_point_covariance,
    generate_transition,
    nuclear_norm,
    numerical_rank,
    penalty_delta0,
    penalty_v0,
    project_spectral_ball,
    rank_path,
    schatten_norm,
    select_constant,
    simulate,
    singular_value_threshold,
    spectral_norm,
    stationary_covariance,
    theoretical_penalty,
)
from . import _core


def _spec_text(spec):
    return spec if isinstance(spec, str) else _json.dumps(spec)


def fit(x, spec=None):
    """Fit an estimator to an ``M x n`` trajectory; returns a dict."""
    if spec is None:
        spec = {"kind": "rank-penalized"}
    return _core.fit(x, _spec_text(spec))


def fit_pairs(targets, regressors, spec):
    """Fit to explicit (target, regressor) column pairs."""
    return _core.fit_pairs(targets, regressors, _spec_text(spec))


def run_grid(grid):
    """Run a simulation grid (dict or JSON); returns per-replication dicts."""
    return _core.run_grid(_spec_text(grid))


__all__ = [name for name in dir() if not name.startswith("_")]
