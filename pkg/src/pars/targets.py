"""Univariate log-density targets.

All targets are unnormalized: ``log_density`` returns ``V(x)`` with
``pi(x) = exp(V(x))`` known only up to a constant, which is all rejection
sampling needs.
"""

from __future__ import annotations

import math
from abc import ABC, abstractmethod
from dataclasses import dataclass
from typing import NamedTuple, Optional, Tuple

import numpy as np

from .errors import DomainError, ParameterError


@dataclass(frozen=True)
class DomainInterval:
    """Open interval ``(lower, upper)``; either end may be infinite."""

    lower: float = -math.inf
    upper: float = math.inf

    def __post_init__(self):
        if math.isnan(self.lower) or math.isnan(self.upper):
            raise ParameterError("domain endpoints must not be NaN")
        if not self.lower < self.upper:
            raise ParameterError(f"empty domain ({self.lower}, {self.upper})")

    def contains(self, x: float) -> bool:
        return self.lower < x < self.upper

    @classmethod
    def parse(cls, text: str) -> "DomainInterval":
        """Parse ``"lo:hi"``; ``-inf``/``inf`` are accepted as endpoints."""
        parts = text.split(":")
        if len(parts) != 2:
            raise ParameterError(f"domain must look like lo:hi, got {text!r}")
        try:
            lo, hi = (float(p.strip()) for p in parts)
        except ValueError:
            raise ParameterError(f"bad domain endpoint in {text!r}") from None
        return cls(lo, hi)


class LogTarget(ABC):
    """A log-concave target known through ``V`` and ``V'``."""

    @abstractmethod
    def log_density(self, x: float) -> float: ...

    @abstractmethod
    def log_density_derivative(self, x: float) -> float: ...

    @abstractmethod
    def domain(self) -> DomainInterval: ...


@dataclass(frozen=True)
class NakagamiParams:
    m: float
    omega: float

    def __post_init__(self):
        if not self.m >= 0.5:
            raise ParameterError(f"Nakagami m must be >= 0.5, got {self.m}")
        if not self.omega > 0:
            raise ParameterError(f"Nakagami omega must be > 0, got {self.omega}")

    @property
    def mode(self) -> float:
        return math.sqrt(self.omega * (2 * self.m - 1) / (2 * self.m))


def nakagami_log_density(p: NakagamiParams, x: float) -> float:
    if not x > 0:
        raise DomainError(f"Nakagami log-density undefined at x={x}")
    return (2 * p.m - 1) * math.log(x) - (p.m / p.omega) * x * x


def nakagami_log_derivative(p: NakagamiParams, x: float) -> float:
    if not x > 0:
        raise DomainError(f"Nakagami log-density undefined at x={x}")
    return (2 * p.m - 1) / x - 2 * (p.m / p.omega) * x


def gaussian_log_density(mu: float, sigma: float, x: float) -> float:
    if not sigma > 0:
        raise ParameterError(f"sigma must be > 0, got {sigma}")
    z = (x - mu) / sigma
    return -0.5 * z * z


class NakagamiTarget(LogTarget):
    """Nakagami-m fading envelope, ``V(x) = (2m-1) ln x - (m/omega) x^2`` on x > 0."""

    def __init__(self, m: float = 1.2, omega: float = 2.0):
        self.params = NakagamiParams(m, omega)
        # cached coefficients for the hot path
        self._c_log = 2 * self.params.m - 1
        self._c_sq = self.params.m / self.params.omega
        self._domain = DomainInterval(0.0, math.inf)

    def log_density(self, x):
        if not x > 0:
            raise DomainError(f"Nakagami log-density undefined at x={x}")
        return self._c_log * math.log(x) - self._c_sq * x * x

    def log_density_derivative(self, x):
        if not x > 0:
            raise DomainError(f"Nakagami log-density undefined at x={x}")
        return self._c_log / x - 2 * self._c_sq * x

    def domain(self):
        return self._domain

    def __repr__(self):
        return f"NakagamiTarget(m={self.params.m}, omega={self.params.omega})"

    def __reduce__(self):
        return (NakagamiTarget, (self.params.m, self.params.omega))


class GaussianTarget(LogTarget):
    """Unnormalized normal density on the real line."""

    def __init__(self, mu: float = 0.0, sigma: float = 1.0):
        if not sigma > 0:
            raise ParameterError(f"sigma must be > 0, got {sigma}")
        self.mu = float(mu)
        self.sigma = float(sigma)
        self._inv_var = 1.0 / (self.sigma * self.sigma)
        self._domain = DomainInterval()

    def log_density(self, x):
        d = x - self.mu
        return -0.5 * d * d * self._inv_var

    def log_density_derivative(self, x):
        return -(x - self.mu) * self._inv_var

    def domain(self):
        return self._domain

    def __repr__(self):
        return f"GaussianTarget(mu={self.mu}, sigma={self.sigma})"

    def __reduce__(self):
        return (GaussianTarget, (self.mu, self.sigma))


class ConcavityReport(NamedTuple):
    concave: bool
    violation: Optional[Tuple[float, float]]

    def __bool__(self):
        return self.concave


def check_concavity(target: LogTarget, grid_size: int = 100, seed: int = 0,
                    span: float = 10.0, tol: float = 1e-9) -> ConcavityReport:
    """Spot-check that ``V'`` is non-increasing on random domain points.

    Infinite ends are clipped ``span`` units away from the other end (or
    from zero when both are infinite). Returns the first consecutive pair
    ``(x_i, x_{i+1})`` where ``V'`` increases by more than ``tol``.
    """
    if grid_size < 3:
        raise ParameterError("grid_size must be >= 3")
    dom = target.domain()
    lo, hi = dom.lower, dom.upper
    if math.isinf(lo) and math.isinf(hi):
        lo, hi = -span, span
    elif math.isinf(lo):
        lo = hi - span
    elif math.isinf(hi):
        hi = lo + span
    rng = np.random.default_rng(seed)
    xs = np.sort(rng.uniform(lo, hi, size=grid_size))
    xs = xs[(xs > dom.lower) & (xs < dom.upper)]
    prev_x, prev_d = None, None
    for x in xs.tolist():
        d = target.log_density_derivative(x)
        if prev_d is not None and d > prev_d + tol * max(1.0, abs(prev_d)):
            return ConcavityReport(False, (prev_x, x))
        prev_x, prev_d = x, d
    return ConcavityReport(True, None)
