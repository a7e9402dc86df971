"""Semi-explicit solution for a positive risk-free rate.

The phase factors solve a linear system whose coupling matrix changes with
time through the claim factor ``z(t)``, so no matrix exponential applies.
:func:`picard_solve` builds the solution backward from ``T`` on short
subintervals; on each one the system is decoupled into a chain of scalar
equations with exponential kernels and iterated to its fixed point.

All closed forms below are written with ``expm1``-based helpers so they stay
accurate as ``beta*r -> 0``; the zero-rate formulas are recovered in that limit.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.interpolate import CubicHermiteSpline

from .model import ClaimDistribution, ModelParams, PhaseIntensities, z_of_t
from .oracle import LinearSystem
from .phase import build_Q_t


class NoConvergence(RuntimeError):
    pass


def _e1(y):
    """``expm1(y)/y`` with the removable singularity at 0 filled in."""
    y = np.asarray(y, dtype=float)
    small = np.abs(y) < 1e-8
    safe = np.where(small, 1.0, y)
    out = np.where(small, 1.0 + 0.5 * y, np.expm1(safe) / safe)
    return out if out.ndim else float(out)


def _bracket_integral(params: ModelParams, t: float) -> float:
    """``(1/(4r)) * int_0^t [1 - exp(2 beta r (u-T))] du``, finite as r or beta -> 0."""
    p = params
    g = 2 * p.beta * p.r
    if g * p.T < 0.1:
        # series in g; each term carries one factor of g, which cancels the 1/r
        total = 0.0
        fact = 1.0
        for k in range(1, 30):
            fact *= k + 1
            term = (2 * p.beta) ** k * p.r ** (k - 1) * ((t - p.T) ** (k + 1) - (-p.T) ** (k + 1)) / fact
            total -= term
            if abs(term) < 1e-18 * max(abs(total), 1e-300):
                break
        return total / 4
    return (t - math.exp(-g * p.T) * t * _e1(g * t)) / (4 * p.r)


def F(params: ModelParams, t) -> float:
    """Integrating factor exponent, ``F(0) = 0`` and ``F' = K`` (see :func:`F_prime`)."""
    p = params
    if np.ndim(t):
        return np.array([F(p, float(u)) for u in np.asarray(t, dtype=float)])
    t = float(t)
    premium = p.c * p.m * math.exp(p.r * p.T) * t * _e1(-p.r * t)
    if p.beta < 1e-8:
        return premium
    return premium + (2 * p.beta + 1) * (p.mu - p.r) ** 2 * _bracket_integral(p, t)


def F_prime(params: ModelParams, t):
    """``c m e^{r(T-t)} + (2beta+1)(mu-r)^2 [1 - e^{2 beta r (t-T)}] / (4r)``."""
    p = params
    tau = p.T - np.asarray(t, dtype=float)
    return p.c * p.m * np.exp(p.r * tau) + (2 * p.beta + 1) * (p.mu - p.r) ** 2 * p.beta * tau * _e1(
        -2 * p.beta * p.r * tau
    ) / 2


def _tail_integrals(f: np.ndarray, h: float) -> np.ndarray:
    """``R[j] = int_{t_j}^{t_end} f`` on a uniform grid, fourth order.

    Composite Simpson over an even number of panels from the right end; an
    odd leftover panel is integrated with the parabola through its
    neighbouring nodes.
    """
    m = f.size - 1
    R = np.zeros(f.size)
    if m == 0:
        return R
    if m == 1:
        R[0] = 0.5 * h * (f[0] + f[1])
        return R
    # even offsets from the right end
    j_even = np.arange(m - 2, -1, -2)
    pairs = h / 3 * (f[j_even] + 4 * f[j_even + 1] + f[j_even + 2])
    R[j_even] = np.cumsum(pairs)
    # odd offsets: one extra panel [t_j, t_{j+1}]
    j_odd = np.arange(m - 1, -1, -2)
    panel = np.empty(j_odd.size)
    inner = j_odd + 2 <= m
    jo = j_odd[inner]
    panel[inner] = h / 12 * (5 * f[jo] + 8 * f[jo + 1] - f[jo + 2])
    jl = j_odd[~inner]
    panel[~inner] = h / 12 * (-f[jl - 1] + 8 * f[jl] + 5 * f[jl + 1])
    R[j_odd] = R[j_odd + 1] + panel
    return R


def _kernel_solve(lam: float, source: np.ndarray, end_value: float, tt: np.ndarray, h: float) -> np.ndarray:
    """Solve ``y' = lam*y - lam*source`` backward from ``y(tt[-1]) = end_value``."""
    b = tt[-1]
    shift = np.exp(lam * (b - tt))
    R = _tail_integrals(shift * source, h)
    return (end_value + lam * R) / shift


@dataclass
class PicardReport:
    iterations: list = field(default_factory=list)
    final_deltas: list = field(default_factory=list)
    contraction: list = field(default_factory=list)
    bound: float = float("nan")

    @property
    def max_contraction(self) -> float:
        vals = [c for c in self.contraction if c is not None]
        return max(vals) if vals else 0.0


def _measured_ratio(deltas: list, scale: float) -> float | None:
    # ratios once the differences sink toward round-off carry no information
    floor = 1e-9 * scale
    ratios = [b / a for a, b in zip(deltas, deltas[1:]) if a > floor and b > floor]
    return max(ratios) if ratios else None


@dataclass(frozen=True)
class NonzeroRateSolution:
    params: ModelParams
    phases: PhaseIntensities
    dist: ClaimDistribution
    grid: np.ndarray = field(repr=False)
    phi_values: np.ndarray = field(repr=False)
    z_values: np.ndarray = field(repr=False)
    delta: float
    zbar: float
    lambdabar: float
    report: PicardReport = field(repr=False)

    @property
    def h(self) -> float:
        return float(self.grid[1] - self.grid[0])

    def Q(self, t: float) -> np.ndarray:
        return build_Q_t(self.phases, z_of_t(self.dist, self.params, t))

    def phi_system(self) -> LinearSystem:
        n = self.phases.n
        return LinearSystem(self.Q, self.params.T, np.full(n, math.exp(-F(self.params, self.params.T))))

    def psi_system(self) -> LinearSystem:
        n, p = self.phases.n, self.params
        return LinearSystem(lambda t: self.Q(t) + F_prime(p, t) * np.eye(n), p.T, np.ones(n))

    def _spline(self) -> CubicHermiteSpline:
        sp = self.__dict__.get("_spline_cache")
        if sp is None:
            lam = self.phases.array
            phi = self.phi_values
            # node derivatives straight from the ODE right-hand side
            d = lam[:, None] * phi
            d[:-1] -= lam[:-1, None] * phi[1:]
            d[-1] -= lam[-1] * self.z_values * phi[0]
            sp = CubicHermiteSpline(self.grid, phi, d, axis=1)
            object.__setattr__(self, "_spline_cache", sp)
        return sp

    def _node_index(self, t: float):
        j = int(round(t / self.h))
        if 0 <= j < self.grid.size and abs(self.grid[j] - t) <= 1e-12 * self.params.T:
            return j
        return None

    def phi(self, t: float) -> np.ndarray:
        if not (-1e-12 <= t <= self.params.T + 1e-12):
            raise ValueError(f"t={t} outside [0, {self.params.T}]")
        j = self._node_index(t)
        if j is not None:
            return self.phi_values[:, j].copy()
        return self._spline()(t)

    def psi_vector(self, t: float) -> np.ndarray:
        return math.exp(F(self.params, t)) * self.phi(t)

    def psi(self, t: float, i: int) -> float:
        return psi(self, t, i)

    def value(self, t, x, s, i):
        return value(self, t, x, s, i)

    def psi_grid(self) -> np.ndarray:
        return np.exp(F(self.params, self.grid))[None, :] * self.phi_values

    def write_csv(self, path):
        n = self.phases.n
        psi_vals = self.psi_grid()
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["t"] + [f"phi_{i}" for i in range(1, n + 1)] + [f"psi_{i}" for i in range(1, n + 1)])
            for j, t in enumerate(self.grid):
                w.writerow([repr(float(t))] + [repr(float(v)) for v in self.phi_values[:, j]]
                           + [repr(float(v)) for v in psi_vals[:, j]])


def picard_solve(
    params: ModelParams,
    phases: PhaseIntensities,
    dist: ClaimDistribution,
    n_steps: int = 2000,
    tol: float = 1e-12,
    max_iter: int = 200,
) -> NonzeroRateSolution:
    """Solve the time-varying phase system by subinterval fixed-point iteration.

    The horizon is cut into ``N = ceil(2 T zbar lambdabar)`` equal pieces so
    that each has width at most ``1/(2 zbar lambdabar)``. Each piece gets the
    same number of uniform steps, chosen so the global step does not exceed
    ``T/n_steps``. Pieces are solved from ``T`` backwards; the left end of one
    becomes the terminal value of the next.

    Within a piece, a guess for the first phase is pushed through the chain
    ``phi_n, phi_{n-1}, ..., phi_1`` (each an explicit exponential-kernel
    integral of the next) and the resulting ``phi_1`` replaces the guess until
    the sup-norm change drops below ``tol`` relative to the iterate.
    """
    p = params
    lam = phases.array
    n = lam.size
    zbar = z_of_t(dist, p, 0.0)
    lambdabar = float(lam.max())
    N = max(1, math.ceil(2 * p.T * zbar * lambdabar - 1e-12))
    delta = p.T / N
    M = max(2, math.ceil(n_steps / N))
    K = N * M
    grid = np.linspace(0.0, p.T, K + 1)
    h = p.T / K
    zs = np.array([z_of_t(dist, p, float(t)) for t in grid])

    phi = np.empty((n, K + 1))
    phi[:, K] = math.exp(-F(p, p.T))
    report = PicardReport(bound=(delta * lambdabar * zbar) ** n)

    for k in range(1, N + 1):
        lo, hi = K - k * M, K - (k - 1) * M
        tt = grid[lo : hi + 1]
        zk = zs[lo : hi + 1]
        end = phi[:, hi].copy()
        guess = np.full(tt.size, end[0])
        deltas = []
        local = np.empty((n, tt.size))
        for it in range(1, max_iter + 1):
            src = zk * guess
            for i in range(n - 1, -1, -1):
                local[i] = _kernel_solve(lam[i], src, end[i], tt, h)
                src = local[i]
            change = float(np.max(np.abs(local[0] - guess)))
            deltas.append(change)
            guess = local[0].copy()
            if change <= tol * float(np.max(np.abs(guess))):
                break
        else:
            raise NoConvergence(
                f"subinterval {k}/{N}: no convergence after {max_iter} iterations (last change {change:.3e})"
            )
        # final pass with the converged guess so every phase is consistent
        src = zk * guess
        for i in range(n - 1, -1, -1):
            local[i] = _kernel_solve(lam[i], src, end[i], tt, h)
            src = local[i]
        phi[:, lo : hi + 1] = local
        report.iterations.append(it)
        report.final_deltas.append(change)
        report.contraction.append(_measured_ratio(deltas, float(np.max(np.abs(guess)))))

    return NonzeroRateSolution(p, phases, dist, grid, phi, zs, delta, zbar, lambdabar, report)


def psi(solution: NonzeroRateSolution, t: float, i: int) -> float:
    if not 1 <= i <= solution.phases.n:
        raise IndexError(f"phase {i} outside 1..{solution.phases.n}")
    return float(math.exp(F(solution.params, t)) * solution.phi(t)[i - 1])


def value_exponent(params: ModelParams, t: float, x, s):
    """Exponent of the value function apart from the phase factor."""
    p = params
    s = np.asarray(s, dtype=float)
    if np.any(s <= 0):
        raise ValueError("price must be positive")
    tau = p.T - t
    price_term = (p.mu - p.r) ** 2 * tau * _e1(-2 * p.beta * p.r * tau) / (2 * p.sigma**2)
    return -p.m * np.asarray(x, dtype=float) * math.exp(p.r * tau) - price_term * s ** (-2 * p.beta)


def value(solution: NonzeroRateSolution, t: float, x, s, i: int):
    p = solution.params
    out = -np.exp(value_exponent(p, t, x, s)) * psi(solution, t, i) / p.m
    return out if np.ndim(out) else float(out)


def strategy(params: ModelParams, t, s):
    """Optimal amount in the risky asset, free of wealth and phase.

    ``[(mu-r) + (mu-r)^2 (1 - e^{2 beta r (t-T)}) / (2r)] / (sigma^2 s^{2beta} m e^{r(T-t)})``
    """
    p = params
    s = np.asarray(s, dtype=float)
    if np.any(s <= 0):
        raise ValueError("price must be positive")
    tau = p.T - np.asarray(t, dtype=float)
    num = (p.mu - p.r) + (p.mu - p.r) ** 2 * p.beta * tau * _e1(-2 * p.beta * p.r * tau)
    out = num / (p.sigma**2 * s ** (2 * p.beta) * p.m * np.exp(p.r * tau))
    return out if np.ndim(out) else float(out)


def verify_conditions_nonzero(params: ModelParams):
    from .zero_rate import horizon_conditions

    iota = 4 * (params.mu - params.r) ** 2 / params.sigma**2
    return horizon_conditions("nonzero-rate", "iota", iota, params)
