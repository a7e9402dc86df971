"""Backward RK4 integrator for linear terminal-value problems ``y' = A(t) y``.

Kept deliberately plain: it is the independent reference the closed-form and
fixed-point solvers are checked against.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np


@dataclass(frozen=True)
class LinearSystem:
    A: Callable[[float], np.ndarray]
    T: float
    terminal: np.ndarray

    @property
    def n(self) -> int:
        return int(np.asarray(self.terminal).size)


def _steps(span: float, step: float) -> list:
    k = int(math.floor(span / step + 1e-9))
    hs = [step] * k
    rest = span - k * step
    if rest > 1e-14 * max(1.0, span):
        hs.append(rest)
    return hs


def integrate_backward(system: LinearSystem, t_target: float, step: float | None = None) -> np.ndarray:
    """Classical RK4 from ``T`` down to ``t_target``.

    The default step is ``1e-4 * T``; a final partial step absorbs any
    remainder.
    """
    if not (0.0 <= t_target <= system.T):
        raise ValueError(f"t_target={t_target} outside [0, {system.T}]")
    if step is None:
        step = 1e-4 * system.T
    if step <= 0:
        raise ValueError("step must be positive")
    y = np.array(system.terminal, dtype=float)
    t = system.T
    for h in _steps(system.T - t_target, step):
        # y' = A y integrated with dt = -h
        k1 = system.A(t) @ y
        k2 = system.A(t - h / 2) @ (y - h / 2 * k1)
        k3 = system.A(t - h / 2) @ (y - h / 2 * k2)
        k4 = system.A(t - h) @ (y - h * k3)
        y = y - h / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
        t -= h
    return y


def integrate_backward_grid(system: LinearSystem, grid: Sequence[float], step: float | None = None) -> np.ndarray:
    """Oracle values at every node of an increasing grid ending at ``T``.

    Returns an array of shape ``(n, len(grid))``. Integration restarts from
    the previous node so each segment uses steps no larger than ``step``.
    """
    grid = np.asarray(grid, dtype=float)
    if step is None:
        step = 1e-4 * system.T
    out = np.empty((system.n, grid.size))
    y = np.array(system.terminal, dtype=float)
    t_prev = system.T
    for j in range(grid.size - 1, -1, -1):
        t = grid[j]
        if t < t_prev:
            seg = LinearSystem(system.A, t_prev, y)
            y = integrate_backward(seg, t, min(step, t_prev - t))
            t_prev = t
        out[:, j] = y
    return out


@dataclass
class OrderEstimate:
    order: float | None
    errors: np.ndarray
    steps: np.ndarray
    exact: bool = False


def convergence_order(system: LinearSystem, t_target: float, steps: Sequence[float]) -> OrderEstimate:
    """Empirical order from the log-log slope of error against step size.

    The finest step is the reference; the remaining (at least two) steps give
    the fit. If all errors vanish the system is integrated exactly.
    """
    steps = np.sort(np.asarray(steps, dtype=float))[::-1]
    if steps.size < 3:
        raise ValueError("need at least three step sizes")
    ref = integrate_backward(system, t_target, steps[-1])
    coarse = steps[:-1]
    errs = np.array([np.max(np.abs(integrate_backward(system, t_target, h) - ref)) for h in coarse])
    scale = max(np.max(np.abs(ref)), 1e-300)
    if np.all(errs <= 1e-15 * scale):
        return OrderEstimate(None, errs, coarse, exact=True)
    good = errs > 0
    slope = np.polyfit(np.log(coarse[good]), np.log(errs[good]), 1)[0]
    return OrderEstimate(float(slope), errs, coarse)
