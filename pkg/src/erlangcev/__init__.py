"""Optimal investment for an insurer with Erlang(n) interclaim times and a CEV stock.

Exponential utility of terminal wealth; closed form for a zero risk-free
rate, fixed-point (Picard) solution otherwise, plus Monte Carlo checks.
"""

from .model import (
    DivergentMGF,
    Deterministic,
    Exponential,
    ModelConfig,
    ModelParams,
    PhaseIntensities,
    TableMGF,
    Uniform,
    load_config,
    mgf,
    reference_params,
    validate,
    z_of_t,
)
from .nonzero_rate import NoConvergence, NonzeroRateSolution, picard_solve
from .zero_rate import ZeroRateSolution

ZERO_RATE_THRESHOLD = 1e-12


def solve(params, phases, dist, n_steps: int = 2000):
    """Pick the closed-form solver when ``|r| < 1e-12``, the Picard solver otherwise."""
    if abs(params.r) < ZERO_RATE_THRESHOLD:
        return ZeroRateSolution.build(params, phases, dist)
    return picard_solve(params, phases, dist, n_steps=n_steps)


def optimal_amount(params, t, s):
    if abs(params.r) < ZERO_RATE_THRESHOLD:
        from .zero_rate import strategy
    else:
        from .nonzero_rate import strategy
    return strategy(params, t, s)


def verify_conditions(params):
    if abs(params.r) < ZERO_RATE_THRESHOLD:
        from .zero_rate import verify_conditions_zero

        return verify_conditions_zero(params.with_(r=0.0))
    from .nonzero_rate import verify_conditions_nonzero

    return verify_conditions_nonzero(params)


__all__ = [
    "DivergentMGF",
    "Deterministic",
    "Exponential",
    "ModelConfig",
    "ModelParams",
    "NoConvergence",
    "NonzeroRateSolution",
    "PhaseIntensities",
    "TableMGF",
    "Uniform",
    "ZeroRateSolution",
    "load_config",
    "mgf",
    "optimal_amount",
    "picard_solve",
    "reference_params",
    "solve",
    "validate",
    "verify_conditions",
    "z_of_t",
]
