"""Coupling matrices of the Erlang phase chain and their exponentials."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import expm

from .model import PhaseIntensities


def _coupling(phases: PhaseIntensities, corner: float) -> np.ndarray:
    lam = phases.array
    n = lam.size
    Q = np.diag(lam)
    if n == 1:
        Q[0, 0] = lam[0] * (1.0 - corner)
        return Q
    Q[np.arange(n - 1), np.arange(1, n)] = -lam[:-1]
    Q[n - 1, 0] = -lam[-1] * corner
    return Q


def build_Q_hat(phases: PhaseIntensities, zeta: float) -> np.ndarray:
    """Constant coupling matrix of the zero-rate system.

    Diagonal ``lambda_i``, superdiagonal ``-lambda_i`` and bottom-left corner
    ``-lambda_n * zeta``. For a single phase the corner and the diagonal
    coincide and the matrix is ``[lambda_1 * (1 - zeta)]``.
    """
    if zeta < 1.0:
        raise ValueError(f"zeta must be >= 1, got {zeta}")
    return _coupling(phases, zeta)


def build_Q_t(phases: PhaseIntensities, z_value: float) -> np.ndarray:
    """Coupling matrix at one instant, with the claim factor ``z(t)`` in the corner."""
    if z_value < 1.0:
        raise ValueError(f"z(t) must be >= 1, got {z_value}")
    return _coupling(phases, z_value)


def killed_generator(phases: PhaseIntensities, zeta: float) -> np.ndarray:
    """Sign-flipped coupling matrix; its off-diagonal entries are nonnegative."""
    return -build_Q_hat(phases, zeta)


def matrix_exp(A, t: float = 1.0) -> np.ndarray:
    """``exp(A*t)`` by Pade scaling-and-squaring (scipy's expm)."""
    return expm(np.asarray(A, dtype=float) * t)


def taylor_exp(A, t: float = 1.0, terms: int = 40) -> np.ndarray:
    """Truncated Taylor series of ``exp(A*t)``; only meant as a test oracle."""
    M = np.asarray(A, dtype=float) * t
    out = np.eye(M.shape[0])
    term = np.eye(M.shape[0])
    for k in range(1, terms):
        term = term @ M / k
        out = out + term
    return out


@dataclass
class NonnegativityReport:
    min_entry: float
    tau_at_min: float
    passed: bool
    tol: float = 1e-12


def check_nonnegativity(phases: PhaseIntensities, zeta: float, t_grid, tol: float = 1e-12) -> NonnegativityReport:
    """Smallest entry of ``exp(Q_hat*tau)`` over backward offsets ``tau <= 0``."""
    Q = build_Q_hat(phases, zeta)
    worst, worst_tau = np.inf, None
    for tau in np.asarray(t_grid, dtype=float):
        if tau > 0:
            raise ValueError(f"offsets must be <= 0, got {tau}")
        low = matrix_exp(Q, tau).min()
        if low < worst:
            worst, worst_tau = float(low), float(tau)
    return NonnegativityReport(worst, worst_tau, worst >= -tol, tol)


def to_csv(A) -> str:
    return "\n".join(",".join(repr(float(v)) for v in row) for row in np.atleast_2d(A))
