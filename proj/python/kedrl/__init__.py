"""Kernel embeddings of multivariate return distributions for off-policy evaluation."""

import json

from . import _core
from ._core import (
    DomainError,
    InvalidInput,
    IoError,
    Matern,
    NumericalError,
    bellman_operators,
    build_grid,
    density_ratio,
    gram,
    gram_cross,
    mmd_sq,
    mmd_sq_samples,
    ridge_weights,
    smooth_cdf,
)


def default_config(preset="paper"):
    """Configuration dict for the "paper" or "smoke" preset."""
    return json.loads(_core.default_config(preset))


def _dump(config):
    return "" if config is None else json.dumps(config)


def simulate(config=None):
    """Behavior-policy transitions with truncated discounted returns attached."""
    return _core.simulate(_dump(config))


def mc_reference(config=None):
    """Monte Carlo returns from the query under the target policy."""
    return _core.mc_reference(_dump(config))


def fit(config=None):
    """Simulates the configured dataset and fits the embedding at the query."""
    return _core.fit(_dump(config))


def recover(omega, atoms, k_z, spec):
    """sum_i omega_i g(z_i) for the test function described by `spec`."""
    return _core.recover(omega, atoms, k_z, json.dumps(spec))


def replicate_study(config=None, replicates=1, seed=0):
    """Runs and scores independent replicates; returns the report as a dict."""
    return json.loads(_core.replicate_study(_dump(config), replicates, seed))


def run_cli(*args):
    """Runs the command-line interface in process and returns its exit code."""
    return _core.run_cli([str(a) for a in args])
