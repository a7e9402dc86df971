"""Model parameters, claim-size laws and input validation.

The claim-size laws expose a moment generating function because every
quantity the solvers need from the claims enters through ``E[exp(theta*Y)]``.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Union

import numpy as np
from scipy.integrate import simpson


class DivergentMGF(ValueError):
    """Raised when the claim-size MGF is infinite at the requested argument."""


@dataclass(frozen=True)
class ModelParams:
    """Market and preference constants.

    mu, r and sigma are per year, ``c`` is currency per year, ``m`` is the
    absolute risk aversion (1/currency) and ``T`` the horizon in years.
    ``mu > r`` is not enforced here; :func:`validate` reports it.
    """

    mu: float
    r: float
    sigma: float
    beta: float
    c: float
    m: float
    T: float

    def __post_init__(self):
        if self.r < 0:
            raise ValueError(f"r must be nonnegative, got {self.r}")
        if self.sigma <= 0:
            raise ValueError(f"sigma must be positive, got {self.sigma}")
        if self.beta < 0:
            raise ValueError(f"beta must be nonnegative, got {self.beta}")
        for name in ("c", "m", "T"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive, got {getattr(self, name)}")

    def with_(self, **changes) -> "ModelParams":
        fields = {k: getattr(self, k) for k in ("mu", "r", "sigma", "beta", "c", "m", "T")}
        fields.update(changes)
        return ModelParams(**fields)


@dataclass(frozen=True)
class PhaseIntensities:
    """Exit rates of the Erlang(n) phases, ``lambdas[i]`` for phase ``i+1``."""

    lambdas: tuple

    def __post_init__(self):
        lam = tuple(float(x) for x in self.lambdas)
        if len(lam) < 1:
            raise ValueError("at least one phase is required")
        if any(not (x > 0) or not math.isfinite(x) for x in lam):
            raise ValueError(f"phase intensities must be positive and finite, got {lam}")
        object.__setattr__(self, "lambdas", lam)

    @property
    def n(self) -> int:
        return len(self.lambdas)

    @property
    def array(self) -> np.ndarray:
        return np.asarray(self.lambdas, dtype=float)

    @property
    def mean_cycle(self) -> float:
        """Mean interclaim time, the sum of the mean sojourns."""
        return float(sum(1.0 / x for x in self.lambdas))


@dataclass(frozen=True)
class Exponential:
    kappa: float

    def __post_init__(self):
        if not self.kappa > 0:
            raise ValueError(f"kappa must be positive, got {self.kappa}")

    @property
    def mean(self) -> float:
        return 1.0 / self.kappa

    def mgf(self, theta: float) -> float:
        if theta >= self.kappa:
            raise DivergentMGF(
                f"E[exp(theta*Y)] diverges for exponential claims: theta={theta} >= kappa={self.kappa}"
            )
        return self.kappa / (self.kappa - theta)

    def sample(self, rng: np.random.Generator, size=None):
        return rng.exponential(1.0 / self.kappa, size)


@dataclass(frozen=True)
class Uniform:
    a: float
    b: float

    def __post_init__(self):
        if self.a < 0 or not self.b > self.a:
            raise ValueError(f"need 0 <= a < b, got a={self.a}, b={self.b}")

    @property
    def mean(self) -> float:
        return 0.5 * (self.a + self.b)

    def mgf(self, theta: float) -> float:
        w = theta * (self.b - self.a)
        if abs(w) < 1e-8:
            rel = 1.0 + 0.5 * w
        else:
            rel = math.expm1(w) / w
        return math.exp(theta * self.a) * rel

    def sample(self, rng: np.random.Generator, size=None):
        return rng.uniform(self.a, self.b, size)


@dataclass(frozen=True)
class Deterministic:
    y: float

    def __post_init__(self):
        if self.y < 0:
            raise ValueError(f"claim size must be nonnegative, got {self.y}")

    @property
    def mean(self) -> float:
        return self.y

    def mgf(self, theta: float) -> float:
        return math.exp(theta * self.y)

    def sample(self, rng: np.random.Generator, size=None):
        if size is None:
            return self.y
        return np.full(size, self.y, dtype=float)


@dataclass(frozen=True)
class TableMGF:
    """Claim law given by density samples on a grid.

    The density is renormalised by its own Simpson integral so that the MGF is
    exactly one at zero. The grid must be increasing and start at or above 0.
    """

    y: tuple
    density: tuple
    _norm: float = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        y = np.asarray(self.y, dtype=float)
        f = np.asarray(self.density, dtype=float)
        if y.ndim != 1 or y.shape != f.shape or y.size < 3:
            raise ValueError("y and density must be 1-d of equal length >= 3")
        if y[0] < 0 or np.any(np.diff(y) <= 0):
            raise ValueError("y grid must be increasing and nonnegative")
        if np.any(f < 0):
            raise ValueError("density samples must be nonnegative")
        norm = float(simpson(f, x=y))
        if not norm > 0:
            raise ValueError("density integrates to zero")
        object.__setattr__(self, "y", tuple(y))
        object.__setattr__(self, "density", tuple(f))
        object.__setattr__(self, "_norm", norm)

    @property
    def mean(self) -> float:
        y = np.asarray(self.y)
        return float(simpson(y * np.asarray(self.density), x=y)) / self._norm

    def mgf(self, theta: float) -> float:
        y = np.asarray(self.y)
        return float(simpson(np.exp(theta * y) * np.asarray(self.density), x=y)) / self._norm

    def sample(self, rng: np.random.Generator, size=None):
        # inverse transform on the piecewise-linear CDF
        y = np.asarray(self.y)
        f = np.asarray(self.density)
        cdf = np.concatenate([[0.0], np.cumsum(0.5 * (f[1:] + f[:-1]) * np.diff(y))])
        cdf /= cdf[-1]
        return np.interp(rng.random(size), cdf, y)


ClaimDistribution = Union[Exponential, Uniform, Deterministic, TableMGF]


def mgf(dist: ClaimDistribution, theta: float) -> float:
    """Return ``E[exp(theta*Y)]``; raises :class:`DivergentMGF` when infinite."""
    return dist.mgf(float(theta))


def z_of_t(dist: ClaimDistribution, params: ModelParams, t: float) -> float:
    """Claim factor ``E[exp(m*Y*exp(r*(T-t)))]`` at time ``t``."""
    if not (-1e-12 <= t <= params.T + 1e-12):
        raise ValueError(f"t={t} outside [0, {params.T}]")
    t = min(max(t, 0.0), params.T)
    return mgf(dist, params.m * math.exp(params.r * (params.T - t)))


@dataclass
class ValidationReport:
    checks: dict = field(default_factory=dict)

    def add(self, name: str, passed: bool, detail: str):
        self.checks[name] = (bool(passed), detail)

    @property
    def ok(self) -> bool:
        return all(passed for passed, _ in self.checks.values())

    def __str__(self):
        lines = []
        for name, (passed, detail) in self.checks.items():
            lines.append(f"{'PASS' if passed else 'FAIL'}  {name}: {detail}")
        return "\n".join(lines)


def validate(params: ModelParams, dist: ClaimDistribution, phases: PhaseIntensities) -> ValidationReport:
    """Check the model assumptions; never raises, the caller decides."""
    report = ValidationReport()

    report.add("mu_gt_r", params.mu > params.r, f"mu={params.mu} r={params.r}")

    threshold = dist.mean / phases.mean_cycle
    report.add(
        "net_profit",
        params.c > threshold,
        f"c={params.c} vs E(Y)/sum(1/lambda)={threshold:.6g}",
    )

    theta = params.m * math.exp(params.r * params.T)
    try:
        value = mgf(dist, theta)
        finite = math.isfinite(value)
        detail = f"E[exp({theta:.6g} Y)]={value:.6g}"
    except (DivergentMGF, OverflowError) as exc:
        finite = False
        detail = str(exc)
    report.add("mgf_finite", finite, detail)

    if isinstance(dist, Exponential):
        report.add(
            "exponential_mgf_bound",
            theta < dist.kappa,
            f"m*exp(rT)={theta:.6g} vs kappa={dist.kappa}",
        )
    return report


_CLAIM_KINDS = {
    "exponential": Exponential,
    "uniform": Uniform,
    "deterministic": Deterministic,
    "table": TableMGF,
}


def claim_from_dict(doc: dict) -> ClaimDistribution:
    kind = doc["kind"].lower()
    if kind not in _CLAIM_KINDS:
        raise ValueError(f"unknown claim kind {doc['kind']!r}; expected one of {sorted(_CLAIM_KINDS)}")
    return _CLAIM_KINDS[kind](**doc.get("params", {}))


def claim_to_dict(dist: ClaimDistribution) -> dict:
    for kind, cls in _CLAIM_KINDS.items():
        if isinstance(dist, cls):
            if isinstance(dist, TableMGF):
                return {"kind": kind, "params": {"y": list(dist.y), "density": list(dist.density)}}
            return {"kind": kind, "params": dict(dist.__dict__)}
    raise TypeError(f"not a claim distribution: {dist!r}")


@dataclass(frozen=True)
class ModelConfig:
    params: ModelParams
    phases: PhaseIntensities
    claim: ClaimDistribution

    @classmethod
    def from_dict(cls, doc: dict) -> "ModelConfig":
        params = ModelParams(**{k: float(doc[k]) for k in ("mu", "r", "sigma", "beta", "c", "m", "T")})
        return cls(params, PhaseIntensities(tuple(doc["lambdas"])), claim_from_dict(doc["claim"]))

    def to_dict(self) -> dict:
        doc = {k: getattr(self.params, k) for k in ("mu", "r", "sigma", "beta", "c", "m", "T")}
        doc["lambdas"] = list(self.phases.lambdas)
        doc["claim"] = claim_to_dict(self.claim)
        return doc


def load_config(path) -> ModelConfig:
    """Read a JSON model configuration (see README for the keys)."""
    with Path(path).open() as fh:
        return ModelConfig.from_dict(json.load(fh))


def reference_params(r: float = 0.18) -> ModelParams:
    """Baseline parameter set used throughout the sensitivity sweeps (price s = 1)."""
    return ModelParams(mu=0.2, r=r, sigma=0.3, beta=1.0, c=2.5, m=1.0, T=2.0)
