"""Quadrature and goodness-of-fit oracles for envelopes and sampler output.

Everything here is an independent check on the sampling code: target
integrals come from numerical quadrature of ``exp(V)``, never from the
envelope's own closed-form areas (those appear only as the denominator).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import List, NamedTuple, Optional, Sequence, Tuple

import numpy as np
from scipy import integrate, optimize, stats
from scipy.interpolate import CubicHermiteSpline

from .envelope import Envelope
from .errors import ParameterError, QuadratureError
from .targets import LogTarget


@dataclass(frozen=True)
class QuadratureSpec:
    rel_tol: float = 1e-12
    abs_tol: float = 1e-15
    max_subdivisions: int = 200
    tail_cutoff_mass: float = 1e-13

    def __post_init__(self):
        if not (self.rel_tol > 0 and self.abs_tol > 0):
            raise ParameterError("quadrature tolerances must be positive")
        if self.tail_cutoff_mass > 1e-12:
            raise ParameterError("tail_cutoff_mass must be <= 1e-12")


DEFAULT_QUAD = QuadratureSpec()


def _quad(f, a, b, q: QuadratureSpec) -> float:
    with np.errstate(all="ignore"):
        val, err, *rest = integrate.quad(f, a, b, epsabs=q.abs_tol, epsrel=q.rel_tol,
                                         limit=q.max_subdivisions, full_output=1)
    if not math.isfinite(val):
        raise QuadratureError(f"non-finite integral on ({a}, {b})")
    if len(rest) > 1 and err > 1e3 * max(q.abs_tol, q.rel_tol * abs(val)):
        raise QuadratureError(f"quadrature did not converge on ({a}, {b}): {rest[1]}")
    return val


def envelope_cutoffs(env: Envelope, frac: float) -> Tuple[float, float]:
    """Finite ends beyond which the envelope (hence the target) holds < ``frac`` of the mass."""
    lm = env.total_log_mass
    segs = env.segments
    lo, hi = env.lower, env.upper
    if lo == -math.inf:
        s = segs[0]
        c = (math.log(frac) + lm + math.log(s.slope) - s.intercept) / s.slope
        lo = min(c, s.right)
    if hi == math.inf:
        s = segs[-1]
        c = (math.log(frac) + lm + math.log(-s.slope) - s.intercept) / s.slope
        hi = max(c, s.left)
    return lo, hi


def _panels(env: Envelope, lo: float, hi: float, max_panels: int = 256) -> List[float]:
    inner = [e for e in env.breakpoints[1:-1] if lo < e < hi]
    if len(inner) > max_panels:
        step = len(inner) / max_panels
        inner = [inner[int(i * step)] for i in range(max_panels)]
    return [lo] + inner + [hi]


def target_mass_ratio(target: LogTarget, env: Envelope,
                      q: QuadratureSpec = DEFAULT_QUAD) -> float:
    """``integral(pi) / integral(q_t)`` by quadrature of ``exp(V - log_mass)``."""
    lm = env.total_log_mass
    lo, hi = envelope_cutoffs(env, q.tail_cutoff_mass)
    V = target.log_density
    f = lambda x: math.exp(V(x) - lm)
    edges = _panels(env, lo, hi)
    return math.fsum(_quad(f, a, b, q) for a, b in zip(edges, edges[1:]))


def acceptance_rate_exact(target: LogTarget, env: Envelope,
                          q: QuadratureSpec = DEFAULT_QUAD) -> float:
    """Probability that one proposal from ``env`` passes the rejection test."""
    return target_mass_ratio(target, env, q)


def l1_distance(target: LogTarget, env: Envelope, q: QuadratureSpec = DEFAULT_QUAD) -> float:
    """``integral |q_t - pi|``, which equals ``integral(q_t) - integral(pi)`` under dominance."""
    mass = env.total_mass
    return mass - acceptance_rate_exact(target, env, q) * mass


def node_add_probability(target: LogTarget, env: Envelope,
                         q: QuadratureSpec = DEFAULT_QUAD) -> float:
    """Chance that ARS rejects (and hence adds a node) on the next proposal."""
    return 1.0 - acceptance_rate_exact(target, env, q)


def envelope_mass_by_quadrature(env: Envelope, q: QuadratureSpec = DEFAULT_QUAD) -> float:
    """Numerical ``integral exp(W)``, for checking the closed-form areas."""
    lm = env.total_log_mass
    W = env.evaluate_upper
    lo, hi = envelope_cutoffs(env, q.tail_cutoff_mass)
    edges = _panels(env, lo, hi)
    body = math.fsum(_quad(lambda x: math.exp(W(x) - lm), a, b, q)
                     for a, b in zip(edges, edges[1:]))
    # add back the truncated exponential tails exactly
    tails = 0.0
    segs = env.segments
    if env.lower == -math.inf:
        tails += math.exp(segs[0].intercept + segs[0].slope * lo - lm) / segs[0].slope
    if env.upper == math.inf:
        tails += math.exp(segs[-1].intercept + segs[-1].slope * hi - lm) / -segs[-1].slope
    return (body + tails) * math.exp(lm)


# --- numeric CDF ---------------------------------------------------------------

def find_mode(target: LogTarget) -> float:
    """Maximizer of ``V`` (a domain endpoint when ``V`` is monotone)."""
    dom = target.domain()
    lo, hi = dom.lower, dom.upper
    dV = target.log_density_derivative
    if math.isfinite(lo) and math.isfinite(hi):
        x0 = 0.5 * (lo + hi)
    elif math.isfinite(lo):
        x0 = lo + 1.0
    elif math.isfinite(hi):
        x0 = hi - 1.0
    else:
        x0 = 0.0

    if dV(x0) == 0:
        return x0
    direction = 1.0 if dV(x0) > 0 else -1.0
    bound = hi if direction > 0 else lo
    a, step = x0, 1.0
    for _ in range(2000):
        if math.isfinite(bound):
            b = a + 0.5 * (bound - a)
        else:
            b = a + direction * step
            step *= 2.0
        if dV(b) * direction <= 0:
            lo_b, hi_b = sorted((a, b))
            return optimize.brentq(dV, lo_b, hi_b, xtol=1e-14, rtol=1e-14)
        if math.isfinite(bound) and abs(b - bound) <= 1e-12 * max(1.0, abs(bound)):
            return bound
        a = b
    raise QuadratureError("could not bracket the mode; is the target integrable?")


def _tail_cut(target: LogTarget, mode: float, v_ref: float, bound: float,
              direction: float, frac: float) -> float:
    """Walk away from the mode until the log-concave tail bound
    ``pi(x) / |V'(x)|`` drops below ``frac`` (in units of ``exp(v_ref)``)."""
    if math.isfinite(bound):
        return bound
    V, dV = target.log_density, target.log_density_derivative
    step = 1.0
    x = mode
    for _ in range(2000):
        x = mode + direction * step
        d = abs(dV(x))
        if d > 0 and V(x) - v_ref - math.log(d) < math.log(frac):
            return x
        step *= 1.25
    raise QuadratureError("tail cutoff search failed; is the target integrable?")


_GL_X, _GL_W = np.polynomial.legendre.leggauss(10)
_GL2_X, _GL2_W = np.polynomial.legendre.leggauss(5)


class NumericCDF:
    """Normalized CDF of ``exp(V)`` on an adaptively refined panel grid.

    Between grid nodes the CDF is a cubic Hermite interpolant whose node
    slopes are the exact normalized density.
    """

    def __init__(self, target: LogTarget, q: QuadratureSpec = DEFAULT_QUAD,
                 initial_panels: int = 256, panel_tol: float = 1e-12, max_panels: int = 20000):
        self.target = target
        dom = target.domain()
        self.mode = find_mode(target)
        mode_in = min(max(self.mode, np.nextafter(dom.lower, dom.upper)),
                      np.nextafter(dom.upper, dom.lower))
        self.v_ref = target.log_density(mode_in)
        frac = q.tail_cutoff_mass * 1e-2
        self.lower = _tail_cut(target, self.mode, self.v_ref, dom.lower, -1.0, frac)
        self.upper = _tail_cut(target, self.mode, self.v_ref, dom.upper, 1.0, frac)

        edges = np.linspace(self.lower, self.upper, initial_panels + 1)
        if dom.lower < self.mode < dom.upper:
            edges = np.union1d(edges, [self.mode])
        edges, masses, nodes, weights = self._refine(edges.tolist(), panel_tol, max_panels)
        self.edges = np.asarray(edges)
        self._nodes = nodes
        self._weights = weights
        cum = np.concatenate(([0.0], np.cumsum(masses)))
        self.log_norm = self.v_ref + math.log(cum[-1])
        self.grid_cdf = cum / cum[-1]
        self.grid_pdf = self.pdf(self.edges)
        self._spline = CubicHermiteSpline(self.edges, self.grid_cdf, self.grid_pdf)

    def _f(self, xs: np.ndarray) -> np.ndarray:
        V = self.target.log_density
        dom = self.target.domain()
        v_ref = self.v_ref
        return np.array([math.exp(V(x) - v_ref) if dom.lower < x < dom.upper else 0.0
                         for x in np.asarray(xs, dtype=float).tolist()])

    def _rule(self, a, b, gx, gw):
        half, mid = 0.5 * (b - a), 0.5 * (a + b)
        xs = mid + half * gx
        w = half * gw
        return xs, w, float(np.dot(w, self._f(xs)))

    def _refine(self, edges, tol, max_panels):
        """Bisect panels until both the panel integral (10- vs 5-point
        Gauss-Legendre) and the Hermite interpolant at the midpoint are
        accurate to ``tol``."""
        panels = list(zip(edges, edges[1:]))
        done = []
        while panels:
            a, b = panels.pop()
            xs, w, fine = self._rule(a, b, _GL_X, _GL_W)
            _, _, coarse = self._rule(a, b, _GL2_X, _GL2_W)
            m = 0.5 * (a + b)
            _, _, half = self._rule(a, m, _GL_X, _GL_W)
            fa, fb = self._f([a, b])
            hermite_mid = 0.5 * fine + (b - a) * (fa - fb) / 8.0
            bad = abs(fine - coarse) > tol or abs(hermite_mid - half) > tol
            if bad and len(done) + len(panels) < max_panels and b - a > 1e-12:
                panels.extend([(a, m), (m, b)])
            else:
                done.append((a, b, fine, xs, w))
        done.sort(key=lambda p: p[0])
        edges = [done[0][0]] + [p[1] for p in done]
        masses = np.array([p[2] for p in done])
        nodes = np.concatenate([p[3] for p in done])
        weights = np.concatenate([p[4] for p in done])
        return edges, masses, nodes, weights

    def pdf(self, x) -> np.ndarray:
        """Normalized density (zero outside the target's domain)."""
        x = np.atleast_1d(np.asarray(x, dtype=float))
        dom = self.target.domain()
        out = np.zeros_like(x)
        V = self.target.log_density
        for i, xi in enumerate(x.tolist()):
            if dom.lower < xi < dom.upper:
                out[i] = math.exp(V(xi) - self.log_norm)
        return out

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        inside = np.clip(x, self.lower, self.upper)
        out = np.clip(self._spline(inside), 0.0, 1.0)
        out = np.where(x <= self.lower, 0.0, np.where(x >= self.upper, 1.0, out))
        return out if out.ndim else float(out)

    def inverse(self, u):
        """Quantile function: panel lookup followed by safeguarded Newton steps."""
        u = np.asarray(u, dtype=float)
        flat = np.atleast_1d(u)
        k = np.clip(np.searchsorted(self.grid_cdf, flat, side="right") - 1, 0, len(self.edges) - 2)
        a, b = self.edges[k], self.edges[k + 1]
        fa, fb = self.grid_cdf[k], self.grid_cdf[k + 1]
        span = np.where(fb > fa, fb - fa, 1.0)
        x = a + (b - a) * np.clip((flat - fa) / span, 0.0, 1.0)
        for _ in range(30):
            fx = self._spline(x) - flat
            lo_mask = fx < 0
            a = np.where(lo_mask, x, a)
            b = np.where(lo_mask, b, x)
            d = self._spline(x, 1)
            with np.errstate(divide="ignore", invalid="ignore"):
                step = np.where(d > 0, fx / d, 0.0)
            nx = x - step
            bad = ~((nx > a) & (nx < b))
            nx = np.where(bad, 0.5 * (a + b), nx)
            if np.all(np.abs(nx - x) <= 1e-15 * np.maximum(1.0, np.abs(x))):
                x = nx
                break
            x = nx
        return x if u.ndim else float(x[0])

    def moment(self, k: int, about: float = 0.0) -> float:
        p = self._f(self._nodes) * np.exp(self.v_ref - self.log_norm)
        return float(np.dot(self._weights, p * (self._nodes - about) ** k))

    def moments(self) -> Tuple[float, float, float]:
        """(mean, variance, fourth central moment)."""
        mean = self.moment(1)
        return mean, self.moment(2, mean), self.moment(4, mean)


def numeric_cdf(target: LogTarget, q: QuadratureSpec = DEFAULT_QUAD) -> NumericCDF:
    return NumericCDF(target, q)


# --- goodness of fit -----------------------------------------------------------

class KSResult(NamedTuple):
    statistic: float
    critical: float
    pvalue: float
    passed: bool


def ks_statistic(samples: Sequence[float], cdf) -> float:
    x = np.sort(np.asarray(samples, dtype=float))
    n = x.size
    F = np.asarray(cdf(x), dtype=float)
    i = np.arange(1, n + 1)
    return float(max(np.max(i / n - F), np.max(F - (i - 1) / n)))


def ks_test(samples: Sequence[float], cdf, alpha: float = 0.01) -> KSResult:
    """One-sample Kolmogorov-Smirnov test with asymptotic critical values."""
    n = len(samples)
    if n < 100:
        raise ParameterError(f"ks_test needs at least 100 samples, got {n}")
    d = ks_statistic(samples, cdf)
    root_n = math.sqrt(n)
    crit = float(stats.kstwobign.isf(alpha)) / root_n
    return KSResult(d, crit, float(stats.kstwobign.sf(root_n * d)), root_n * d < crit * root_n)


def chi_square_pieces(counts: Sequence[int], probs: Sequence[float]) -> Tuple[float, float]:
    """Pearson chi-square of piece-selection counts; returns (statistic, p-value)."""
    counts = np.asarray(counts, dtype=float)
    expected = np.asarray(probs, dtype=float) * counts.sum()
    keep = expected > 0
    stat = float(np.sum((counts[keep] - expected[keep]) ** 2 / expected[keep]))
    dof = int(keep.sum()) - 1
    return stat, float(stats.chi2.sf(stat, dof))
