"""Closed-form solution when the risk-free rate is zero."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .model import ClaimDistribution, ModelParams, PhaseIntensities, mgf
from .oracle import LinearSystem
from .phase import build_Q_hat, matrix_exp


def L(params: ModelParams, t):
    """Integrating factor exponent, the antiderivative of
    ``c*m + (2*beta+1)*mu**2*beta*(T-t)/2`` vanishing at 0."""
    p = params
    t = np.asarray(t, dtype=float)
    out = p.c * p.m * t + (2 * p.beta + 1) * p.mu**2 * p.beta * (p.T * t - 0.5 * t * t) / 2
    return out if out.ndim else float(out)


def L_prime(params: ModelParams, t):
    p = params
    return p.c * p.m + (2 * p.beta + 1) * p.mu**2 * p.beta * (p.T - np.asarray(t, dtype=float)) / 2


@dataclass(frozen=True)
class ZeroRateSolution:
    params: ModelParams
    phases: PhaseIntensities
    zeta: float
    L_T: float = field(init=False)
    Q_hat: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        object.__setattr__(self, "L_T", L(self.params, self.params.T))
        object.__setattr__(self, "Q_hat", build_Q_hat(self.phases, self.zeta))

    @classmethod
    def build(cls, params: ModelParams, phases: PhaseIntensities, dist: ClaimDistribution) -> "ZeroRateSolution":
        if params.r != 0.0:
            params = params.with_(r=0.0)
        return cls(params, phases, mgf(dist, params.m))

    def phi_system(self) -> LinearSystem:
        """The transformed linear system, for the RK4 oracle."""
        Q = self.Q_hat
        return LinearSystem(lambda t: Q, self.params.T, np.full(self.phases.n, math.exp(-self.L_T)))

    def psi_system(self) -> LinearSystem:
        """The untransformed system ``psi' = (L'(t) I + Q_hat) psi``."""
        Q, n, p = self.Q_hat, self.phases.n, self.params
        return LinearSystem(lambda t: Q + L_prime(p, t) * np.eye(n), p.T, np.ones(n))

    def phi(self, t: float) -> np.ndarray:
        return solve_phi(self, t)

    def psi(self, t: float, i: int) -> float:
        return psi(self, t, i)

    def psi_vector(self, t: float) -> np.ndarray:
        return solve_phi(self, t) * math.exp(L(self.params, t))

    def value(self, t, x, s, i):
        return value(self, t, x, s, i)


def _check_t(params: ModelParams, t: float):
    if not (-1e-12 <= t <= params.T + 1e-12):
        raise ValueError(f"t={t} outside [0, {params.T}]")


def solve_phi(solution: ZeroRateSolution, t: float) -> np.ndarray:
    """``phi(t) = exp(Q_hat (t-T)) * exp(-L(T)) * ones``."""
    _check_t(solution.params, t)
    E = matrix_exp(solution.Q_hat, t - solution.params.T)
    return E.sum(axis=1) * math.exp(-solution.L_T)


def psi(solution: ZeroRateSolution, t: float, i: int) -> float:
    """Phase factor ``psi_i(t)``; phases are numbered from 1."""
    if not 1 <= i <= solution.phases.n:
        raise IndexError(f"phase {i} outside 1..{solution.phases.n}")
    if t == solution.params.T:
        return 1.0
    return float(solve_phi(solution, t)[i - 1] * math.exp(L(solution.params, t)))


def value(solution: ZeroRateSolution, t: float, x, s, i: int):
    p = solution.params
    s = np.asarray(s, dtype=float)
    if np.any(s <= 0):
        raise ValueError("price must be positive")
    expo = -p.m * np.asarray(x, dtype=float) + p.mu**2 / (2 * p.sigma**2) * (t - p.T) * s ** (-2 * p.beta)
    out = -np.exp(expo) * psi(solution, t, i) / p.m
    return out if out.ndim else float(out)


def strategy(params: ModelParams, t, s):
    """Optimal amount in the risky asset; free of wealth and phase."""
    p = params
    s = np.asarray(s, dtype=float)
    if np.any(s <= 0):
        raise ValueError("price must be positive")
    out = (p.mu + p.mu**2 * p.beta * (p.T - np.asarray(t, dtype=float))) / (p.sigma**2 * s ** (2 * p.beta) * p.m)
    return out if out.ndim else float(out)


@dataclass
class ConditionReport:
    """Outcome of the horizon conditions behind the optimality proof.

    ``stat`` is Gamma (zero rate) or iota (nonzero rate); ``gamma_b`` is the
    matching gamma_2 / gamma_3 and ``bound`` the arccot horizon bound.
    """

    case: str
    stat_name: str
    stat: float
    threshold: float
    gamma1: float
    gamma_b: float | None
    bound: float | None
    T: float
    condition1: bool
    condition2: bool | None
    note: str = ""

    @property
    def holds(self) -> bool:
        return self.condition1 or bool(self.condition2)

    @property
    def which(self) -> str:
        if self.condition1:
            return "condition 1"
        if self.condition2:
            return "condition 2"
        return "neither"

    def lines(self) -> list:
        out = [
            f"case: {self.case}",
            f"{self.stat_name} = {self.stat:.10g}",
            f"mu^2/(2 sigma^2) = {self.threshold:.10g}",
            f"condition 1 ({self.stat_name} <= mu^2/(2 sigma^2)): {'holds' if self.condition1 else 'fails'}",
            f"gamma1 = {self.gamma1:.10g}",
        ]
        if self.gamma_b is None:
            out.append(f"condition 2: inapplicable ({self.note})")
        else:
            out.append(f"{'gamma2' if self.case == 'zero-rate' else 'gamma3'} = {self.gamma_b:.10g}")
            out.append(f"arccot bound = {self.bound:.10g} (T = {self.T:g})")
            if self.condition1:
                out.append("condition 2: not needed")
            else:
                out.append(f"condition 2 (T < bound): {'holds' if self.condition2 else 'fails'}")
        out.append(f"result: {self.which}")
        return out

    def __str__(self):
        return "\n".join(self.lines())


def arccot(x: float) -> float:
    """Inverse cotangent with range (0, pi)."""
    return math.pi / 2 - math.atan(x)


def horizon_conditions(case: str, stat_name: str, stat: float, params: ModelParams) -> ConditionReport:
    p = params
    threshold = p.mu**2 / (2 * p.sigma**2)
    cond1 = stat <= threshold
    gamma1 = p.mu * p.beta
    radicand = -4 * p.mu**2 * p.beta**2 + 8 * p.beta**2 * p.sigma**2 * stat
    if p.beta == 0.0 or radicand <= 0:
        note = "beta = 0 makes gamma vanish" if p.beta == 0.0 else "gamma is not real"
        return ConditionReport(case, stat_name, stat, threshold, gamma1, None, None, p.T, cond1, None, note)
    gamma_b = math.sqrt(radicand) / 2
    bound = arccot(-gamma1 / gamma_b) / gamma_b
    cond2 = (not cond1) and p.T < bound
    return ConditionReport(case, stat_name, stat, threshold, gamma1, gamma_b, bound, p.T, cond1, cond2)


def verify_conditions_zero(params: ModelParams) -> ConditionReport:
    p = params
    Gamma = (4 * p.mu**2 + 12 * p.mu**3 * p.beta * p.T + 8 * p.mu**4 * p.beta**2 * p.T**2) / p.sigma**2
    return horizon_conditions("zero-rate", "Gamma", Gamma, p)
