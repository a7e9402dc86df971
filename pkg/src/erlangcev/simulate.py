"""Monte Carlo simulation of the controlled surplus.

The price follows the CEV dynamics ``dS = S (mu dt + sigma S^beta dW)`` and
the surplus ``dX = (r X + (mu - r) a + c) dt + sigma S^beta a dW - dClaims``,
both driven by the same Brownian increment. Both are advanced with
full-truncation Euler on a uniform grid. The Erlang phase clock and the claims
are simulated exactly as events in continuous time; a claim at time ``tau``
inside a step is charged at the end of that step grown by ``exp(r*(t_end - tau))``.

Every path owns two random streams derived from ``(seed, path index)``: one for
the Brownian increments and one for phase sojourns and claim sizes. Results
therefore do not depend on chunking, and different strategies run on the
same seed see identical randomness (common random numbers).
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .model import ClaimDistribution, ModelParams, PhaseIntensities

S_FLOOR = 1e-12
Z99 = 2.5758293035489004


@dataclass(frozen=True)
class Strategy:
    """Investment rule ``(t, x, s, phase) -> amount``.

    ``x``, ``s`` and ``phase`` arrive as equally shaped arrays (phases
    numbered from 1) and the evaluator must return an array of that shape.
    Admissibility is the caller's responsibility.
    """

    evaluator: Callable
    label: str = "strategy"

    def __call__(self, t, x, s, phase):
        return np.broadcast_to(self.evaluator(t, x, s, phase), np.shape(x))

    def scaled(self, k: float, label: str | None = None) -> "Strategy":
        f = self.evaluator
        return Strategy(lambda t, x, s, ph: k * f(t, x, s, ph), label or f"{k:g}*{self.label}")


def optimal_strategy(params: ModelParams) -> Strategy:
    """The closed-form maximiser for the configured rate."""
    if abs(params.r) < 1e-12:
        from .zero_rate import strategy
    else:
        from .nonzero_rate import strategy
    return Strategy(lambda t, x, s, ph: strategy(params, t, s), "a*")


def zero_strategy() -> Strategy:
    return Strategy(lambda t, x, s, ph: np.zeros(np.shape(x)), "0")


def constant_strategy(amount: float) -> Strategy:
    return Strategy(lambda t, x, s, ph: np.full(np.shape(x), float(amount)), f"const {amount:g}")


def perturbed_strategies(params: ModelParams, count: int, seed: int, n_phases: int = 1,
                         rel: float = 0.3, absolute: float = 0.2) -> list:
    """Bounded random perturbations of the optimal rule.

    Each member is ``a*(t,s) (1 + u) + v cos(w t) + p[phase]`` with
    ``|u| <= rel``, ``|v| <= absolute``, ``|p| <= absolute`` drawn once from
    ``seed``.
    """
    base = optimal_strategy(params).evaluator
    rng = np.random.default_rng(seed)
    out = []
    for k in range(count):
        u = rng.uniform(-rel, rel)
        v = rng.uniform(-absolute, absolute)
        w = rng.uniform(0.0, 2 * math.pi / params.T)
        shift = np.concatenate([[0.0], rng.uniform(-absolute, absolute, n_phases)])

        def f(t, x, s, ph, u=u, v=v, w=w, shift=shift):
            return base(t, x, s, ph) * (1 + u) + v * math.cos(w * t) + shift[ph]

        out.append(Strategy(f, f"perturbed#{k}"))
    return out


@dataclass(frozen=True)
class PathState:
    t: float
    x: float
    s: float
    phase: int


def utility(params: ModelParams, x):
    # deep ruin overflows to -inf, which is the right limit
    with np.errstate(over="ignore"):
        return -np.exp(-params.m * np.asarray(x, dtype=float)) / params.m


def _streams(seed: int, index: int):
    w = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(index, 0)))
    c = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(index, 1)))
    return w, c


def phase_events(lambdas: Sequence[float], phase: int, t0: float, T: float,
                 rng: np.random.Generator, dist: ClaimDistribution | None = None):
    """Phase jumps in ``(t0, T]`` starting from ``phase`` at ``t0``.

    Returns ``(times, new_phases, claims)``; ``claims`` is the claim size paid
    at each jump (zero except on the jump from the last phase to the first).
    """
    n = len(lambdas)
    times, phases, claims = [], [], []
    t = t0
    while True:
        t += rng.exponential(1.0 / lambdas[phase - 1])
        if t > T:
            break
        if phase == n:
            y = float(dist.sample(rng)) if dist is not None else 0.0
            phase = 1
        else:
            y = 0.0
            phase += 1
        times.append(t)
        phases.append(phase)
        claims.append(y)
    return times, phases, claims


def interclaim_times(phases: PhaseIntensities, n_claims: int, seed: int) -> np.ndarray:
    """Gaps between successive claims of a chain started at a renewal."""
    rng = np.random.default_rng(seed)
    lam = phases.lambdas
    out = np.empty(n_claims)
    horizon = 64 * phases.mean_cycle
    t, phase, last, k = 0.0, 1, 0.0, 0
    while k < n_claims:
        times, new, _ = phase_events(lam, phase, t, t + horizon, rng)
        for tau, ph in zip(times, new):
            if ph == 1:
                out[k] = tau - last
                last = tau
                k += 1
                if k == n_claims:
                    break
        if times:
            t, phase = times[-1], new[-1]
        else:
            t += horizon
    return out


def erlang_cdf(phases: PhaseIntensities, t):
    """CDF of the interclaim time via the phase-type representation."""
    from scipy.linalg import expm

    lam = phases.array
    n = lam.size
    S = np.diag(-lam)
    S[np.arange(n - 1), np.arange(1, n)] = lam[:-1]
    t = np.atleast_1d(np.asarray(t, dtype=float))
    out = np.array([1.0 - expm(S * u)[0].sum() if u > 0 else 0.0 for u in t])
    return out


def _grid(T: float, t0: float, dt: float):
    steps = max(1, math.ceil((T - t0) / dt - 1e-9))
    return np.linspace(t0, T, steps + 1)


def simulate_path(params: ModelParams, phases: PhaseIntensities, dist: ClaimDistribution,
                  strategy: Strategy, initial: PathState, dt: float, seed: int, index: int = 0):
    """One path, stepped in plain Python.

    Path ``index`` under ``seed`` reproduces path ``index`` of
    :func:`estimate_utility` with the same seed.
    """
    p = params
    grid = _grid(p.T, initial.t, dt)
    rng_w, rng_c = _streams(seed, index)
    dW = rng_w.standard_normal(grid.size - 1) * np.sqrt(np.diff(grid))
    ev_t, ev_ph, ev_y = phase_events(phases.lambdas, initial.phase, initial.t, p.T, rng_c, dist)
    x, s, phase = float(initial.x), float(initial.s), int(initial.phase)
    e = 0
    for k in range(grid.size - 1):
        t, t1 = grid[k], grid[k + 1]
        h = t1 - t
        a = float(strategy(t, np.array([x]), np.array([s]), np.array([phase]))[0])
        sp = max(s, 0.0)
        vol = p.sigma * sp**p.beta
        x = x + (p.r * x + (p.mu - p.r) * a + p.c) * h + vol * a * dW[k]
        s = s + p.mu * sp * h + vol * sp * dW[k]
        if s < S_FLOOR:
            s = S_FLOOR
        while e < len(ev_t) and ev_t[e] <= t1:
            x -= ev_y[e] * math.exp(p.r * (t1 - ev_t[e]))
            phase = ev_ph[e]
            e += 1
    return PathState(float(grid[-1]), x, s, phase), float(utility(p, x))


@dataclass
class SimulationResult:
    label: str
    utilities: np.ndarray = field(repr=False)
    wealth: np.ndarray = field(repr=False)
    n_paths: int
    dt: float
    seed: int

    @property
    def mean(self) -> float:
        return float(np.mean(self.utilities))

    @property
    def se(self) -> float:
        return float(np.std(self.utilities, ddof=1) / math.sqrt(self.utilities.size))

    @property
    def ci99(self) -> tuple:
        return (self.mean - Z99 * self.se, self.mean + Z99 * self.se)

    def summary(self) -> dict:
        lo, hi = self.ci99
        return {"label": self.label, "mean": self.mean, "se": self.se, "ci99_low": lo, "ci99_high": hi,
                "n_paths": self.n_paths, "dt": self.dt, "seed": self.seed}

    def write_csv(self, path, per_path: bool = False):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            if per_path:
                w.writerow(["path", "terminal_wealth", "utility"])
                for i, (x, u) in enumerate(zip(self.wealth, self.utilities)):
                    w.writerow([i, repr(float(x)), repr(float(u))])
            else:
                summary = self.summary()
                w.writerow(list(summary))
                w.writerow([v if isinstance(v, str) else repr(v) for v in summary.values()])


def _simulate_chunk(p, phases, dist, strategies, initial, grid, seed, first, count):
    nst = len(strategies)
    steps = grid.size - 1
    dW = np.empty((count, steps))
    sqh = np.sqrt(np.diff(grid))
    events = []
    for j in range(count):
        rng_w, rng_c = _streams(seed, first + j)
        dW[j] = rng_w.standard_normal(steps) * sqh
        events.append(phase_events(phases.lambdas, initial.phase, initial.t, p.T, rng_c, dist))
    width = max(1, max(len(ev[0]) for ev in events)) + 1
    ev_t = np.full((count, width), np.inf)
    ev_ph = np.zeros((count, width), dtype=int)
    ev_y = np.zeros((count, width))
    for j, (tt, ph, yy) in enumerate(events):
        ev_t[j, : len(tt)] = tt
        ev_ph[j, : len(ph)] = ph
        ev_y[j, : len(yy)] = yy

    rows = np.arange(count)
    ptr = np.zeros(count, dtype=int)
    phase = np.full(count, initial.phase, dtype=int)
    s = np.full(count, float(initial.s))
    x = np.full((nst, count), float(initial.x))
    for k in range(steps):
        t, t1 = grid[k], grid[k + 1]
        h = t1 - t
        w = dW[:, k]
        sp = np.maximum(s, 0.0)
        vol = p.sigma * sp**p.beta
        for q, strat in enumerate(strategies):
            a = strat(t, x[q], s, phase)
            x[q] = x[q] + (p.r * x[q] + (p.mu - p.r) * a + p.c) * h + vol * a * w
        s = s + p.mu * sp * h + vol * sp * w
        np.maximum(s, S_FLOOR, out=s)
        nxt = ev_t[rows, ptr]
        due = nxt <= t1
        while due.any():
            idx = rows[due]
            j = ptr[idx]
            x[:, idx] -= ev_y[idx, j] * np.exp(p.r * (t1 - ev_t[idx, j]))
            phase[idx] = ev_ph[idx, j]
            ptr[idx] += 1
            due = ev_t[rows, ptr] <= t1
    return x


def compare_strategies(params: ModelParams, phases: PhaseIntensities, dist: ClaimDistribution,
                       strategies: Sequence[Strategy], initial: PathState, dt: float,
                       n_paths: int, seed: int, chunk: int = 2048) -> list:
    """Simulate every strategy on the same paths; returns one result per strategy."""
    if not strategies:
        raise ValueError("at least one strategy is required")
    if n_paths < 2:
        raise ValueError("n_paths must be >= 2")
    grid = _grid(params.T, initial.t, dt)
    wealth = np.empty((len(strategies), n_paths))
    for first in range(0, n_paths, chunk):
        count = min(chunk, n_paths - first)
        wealth[:, first : first + count] = _simulate_chunk(
            params, phases, dist, strategies, initial, grid, seed, first, count
        )
    return [
        SimulationResult(st.label, utility(params, wealth[q]), wealth[q], n_paths, dt, seed)
        for q, st in enumerate(strategies)
    ]


def estimate_utility(params: ModelParams, phases: PhaseIntensities, dist: ClaimDistribution,
                     strategy: Strategy, initial: PathState, dt: float, n_paths: int,
                     seed: int) -> SimulationResult:
    """Mean terminal utility of ``strategy`` with standard error and 99% interval."""
    return compare_strategies(params, phases, dist, [strategy], initial, dt, n_paths, seed)[0]


@dataclass
class RankingRow:
    rank: int
    label: str
    mean: float
    se: float
    gap_to_best: float
    combined_se: float


def ranking_table(results: Sequence[SimulationResult]) -> list:
    """Order results by mean utility; gaps are measured against the leader."""
    order = sorted(results, key=lambda r: r.mean, reverse=True)
    best = order[0]
    rows = []
    for k, res in enumerate(order, start=1):
        rows.append(RankingRow(k, res.label, res.mean, res.se, best.mean - res.mean,
                               math.hypot(best.se, res.se)))
    return rows
