"""Piecewise-exponential upper envelope built from tangents to a concave ``V``.

The hull ``W(x) = min_i w_i(x)`` of the tangent lines ``w_i`` has exactly
one linear piece per support point when ``V`` is concave, so pieces are
stored per node and only the two neighbouring breakpoints move when a node
is inserted.

Piece masses live in log space. For sampling, the linear-scale weights
``exp(log_area - ref)`` are kept in a Fenwick tree indexed by insertion
slot (not by position along the x-axis), which makes both piece selection
and insertion O(log m) even when the node count reaches 10^5.
"""

from __future__ import annotations

import bisect
import csv
import math
from dataclasses import dataclass
from typing import Callable, Iterable, List, Optional, Sequence, Tuple

from .errors import DegenerateSlopeError, DomainError, IntegrabilityError
from .targets import LogTarget

DEDUP_TOL = 1e-10
SLOPE_TOL = 1e-14

_INF = math.inf


@dataclass(frozen=True)
class SupportPoint:
    x: float
    v: float
    dv: float

    @classmethod
    def at(cls, target: LogTarget, x: float) -> "SupportPoint":
        return cls(x, target.log_density(x), target.log_density_derivative(x))


@dataclass(frozen=True)
class Segment:
    """One piece ``exp(intercept + slope * x)`` on ``(left, right)``."""

    slope: float
    intercept: float
    left: float
    right: float
    log_area: float


def tangent_at(p: SupportPoint) -> Tuple[float, float]:
    """(slope, intercept) of the tangent to ``V`` at ``p``."""
    return p.dv, p.v - p.dv * p.x


def intersect_tangents(a: Tuple[float, float], b: Tuple[float, float]) -> float:
    """Abscissa where tangent ``a`` (left node) meets tangent ``b`` (right node)."""
    sa, ca = a
    sb, cb = b
    ds = sa - sb
    if abs(ds) <= SLOPE_TOL * max(1.0, abs(sa)):
        raise DegenerateSlopeError(
            f"tangent slopes {sa!r} and {sb!r} are numerically parallel")
    return (cb - ca) / ds


def segment_log_area(slope: float, intercept: float, left: float, right: float) -> float:
    """log of the integral of ``exp(intercept + slope*x)`` over ``(left, right)``."""
    if left == -_INF:
        if not slope > 0:
            raise IntegrabilityError(
                f"piece with slope {slope} is not integrable towards -inf")
        if right == _INF:
            raise IntegrabilityError("a single line cannot be integrable on the whole real line")
        return intercept + slope * right - math.log(slope)
    if right == _INF:
        if not slope < 0:
            raise IntegrabilityError(
                f"piece with slope {slope} is not integrable towards +inf")
        return intercept + slope * left - math.log(-slope)
    width = right - left
    if width <= 0:
        return -_INF
    if slope == 0:
        return intercept + math.log(width)
    t = slope * width
    if slope > 0:
        # anchor at the right end so the exponent is <= 0
        return intercept + slope * right + math.log(-math.expm1(-t)) - math.log(slope)
    return intercept + slope * left + math.log(-math.expm1(t)) - math.log(-slope)


def _truncated_exp(slope: float, left: float, right: float, u: float) -> float:
    if left == -_INF:
        x = right + math.log(u) / slope
    elif right == _INF:
        x = left + math.log1p(-u) / slope
    elif slope == 0:
        x = left + u * (right - left)
    else:
        t = slope * (right - left)
        if t > 1.0:
            x = right + math.log(u + (1.0 - u) * math.exp(-t)) / slope
        else:
            x = left + math.log1p(u * math.expm1(t)) / slope
    # rounding can land on an endpoint; keep the draw strictly inside
    if x <= left:
        x = math.nextafter(left, right)
    elif x >= right:
        x = math.nextafter(right, left)
    return x


def sample_from_segment(seg: Segment, u: float) -> float:
    """Inverse-CDF draw from the density proportional to ``exp(slope*x)`` on the segment."""
    return _truncated_exp(seg.slope, seg.left, seg.right, u)


class Envelope:
    """Tangent hull of a concave log-density plus its sampling structure.

    Mutated in place by :meth:`insert`; not safe for concurrent mutation.
    """

    def __init__(self, target: LogTarget, nodes: Iterable[float]):
        self.target = target
        dom = target.domain()
        self.lower = dom.lower
        self.upper = dom.upper

        xs = sorted(float(x) for x in nodes)
        if not xs:
            raise ValueError("at least one support point is required")
        kept: List[float] = []
        for x in xs:
            if not dom.contains(x):
                raise DomainError(f"support point {x} is not inside {dom}")
            if kept and x - kept[-1] <= DEDUP_TOL:
                continue
            kept.append(x)

        pts = [SupportPoint.at(target, x) for x in kept]
        m = len(pts)
        if self.lower == -_INF and not pts[0].dv > 0:
            raise IntegrabilityError(
                f"envelope not integrable at -inf: leftmost node {pts[0].x} has slope "
                f"{pts[0].dv}; initial nodes must bracket the mode")
        if self.upper == _INF and not pts[-1].dv < 0:
            raise IntegrabilityError(
                f"envelope not integrable at +inf: rightmost node {pts[-1].x} has slope "
                f"{pts[-1].dv}; initial nodes must bracket the mode")

        breaks = [self.lower]
        for a, b in zip(pts, pts[1:]):
            e = intersect_tangents(tangent_at(a), tangent_at(b))
            breaks.append(min(max(e, a.x), b.x))
        breaks.append(self.upper)

        # sorted view
        self._xs: List[float] = [p.x for p in pts]
        self._order: List[int] = list(range(m))
        # per-slot storage, append-only
        self._pv = [p.v for p in pts]
        self._pdv = [p.dv for p in pts]
        self._slope = [p.dv for p in pts]
        self._icpt = [p.v - p.dv * p.x for p in pts]
        self._left = breaks[:-1]
        self._right = breaks[1:]
        self._logarea = [segment_log_area(self._slope[k], self._icpt[k],
                                          self._left[k], self._right[k])
                         for k in range(m)]
        self._rebuild_tree()

    # Fenwick tree over slot weights ------------------------------------

    def _rebuild_tree(self) -> None:
        la = self._logarea
        n = len(la)
        self._ref = max(la)
        w = [math.exp(a - self._ref) for a in la]
        tree = [0.0] * (n + 1)
        for i in range(1, n + 1):
            tree[i] += w[i - 1]
            j = i + (i & -i)
            if j <= n:
                tree[j] += tree[i]
        self._weights = w
        self._tree = tree
        self._n = n
        self._top = 1 << (n.bit_length() - 1)
        self._total = self._prefix(n)
        self._since_rebuild = 0
        self._log_mass: Optional[float] = None

    def _prefix(self, i: int) -> float:
        s = 0.0
        tree = self._tree
        while i > 0:
            s += tree[i]
            i -= i & -i
        return s

    def _tree_add(self, slot: int, delta: float) -> None:
        i = slot + 1
        tree, n = self._tree, self._n
        while i <= n:
            tree[i] += delta
            i += i & -i

    def _tree_append(self, w: float) -> None:
        n = self._n + 1
        low = n & -n
        self._tree.append(w + self._prefix(n - 1) - self._prefix(n - low))
        self._weights.append(w)
        self._n = n
        self._top = 1 << (n.bit_length() - 1)

    def _set_weight(self, slot: int) -> None:
        w = math.exp(self._logarea[slot] - self._ref)
        self._tree_add(slot, w - self._weights[slot])
        self._weights[slot] = w

    def _select_slot(self, target_mass: float) -> int:
        tree, n = self._tree, self._n
        pos = 0
        step = self._top
        while step:
            nxt = pos + step
            if nxt <= n and tree[nxt] <= target_mass:
                pos = nxt
                target_mass -= tree[nxt]
            step >>= 1
        return pos if pos < n else n - 1

    # public views -------------------------------------------------------

    def __len__(self) -> int:
        return self._n

    @property
    def node_count(self) -> int:
        return self._n

    @property
    def nodes(self) -> List[float]:
        return list(self._xs)

    @property
    def points(self) -> List[SupportPoint]:
        return [SupportPoint(self._xs[i], self._pv[k], self._pdv[k])
                for i, k in enumerate(self._order)]

    @property
    def segments(self) -> List[Segment]:
        return [Segment(self._slope[k], self._icpt[k], self._left[k],
                        self._right[k], self._logarea[k]) for k in self._order]

    @property
    def breakpoints(self) -> List[float]:
        """Segment boundaries ``e_0 < e_1 < ... < e_m`` in x order."""
        return [self._left[k] for k in self._order] + [self.upper]

    @property
    def log_areas(self) -> List[float]:
        return [self._logarea[k] for k in self._order]

    @property
    def total_log_mass(self) -> float:
        if self._log_mass is None:
            la = self._logarea
            top = max(la)
            self._log_mass = top + math.log(math.fsum(math.exp(a - top) for a in la))
        return self._log_mass

    @property
    def total_mass(self) -> float:
        return math.exp(self.total_log_mass)

    @property
    def probabilities(self) -> List[float]:
        """Piece probabilities ``rho`` in x order."""
        lm = self.total_log_mass
        return [math.exp(a - lm) for a in self.log_areas]

    @property
    def cumulative_weights(self) -> List[float]:
        cum, acc = [], 0.0
        for p in self.probabilities:
            acc += p
            cum.append(acc)
        cum[-1] = 1.0
        return cum

    # evaluation ---------------------------------------------------------

    def evaluate_upper(self, x: float) -> float:
        """``W(x)``, the hull value at ``x``."""
        if not self.lower < x < self.upper:
            raise DomainError(f"x={x} outside ({self.lower}, {self.upper})")
        i = bisect.bisect_right(self._xs, x)
        order = self._order
        if i > 0:
            k = order[i - 1]
            if x <= self._right[k] or i == self._n:
                return self._icpt[k] + self._slope[k] * x
        k = order[i]
        return self._icpt[k] + self._slope[k] * x

    def segment_index(self, x: float) -> int:
        """x-order index of the piece containing ``x``."""
        if not self.lower < x < self.upper:
            raise DomainError(f"x={x} outside ({self.lower}, {self.upper})")
        i = bisect.bisect_right(self._xs, x)
        if i > 0 and (i == self._n or x <= self._right[self._order[i - 1]]):
            return i - 1
        return i

    # sampling -----------------------------------------------------------

    def propose(self, rand: Callable[[], float]) -> Tuple[float, float]:
        """Draw ``x ~ exp(W)`` using ``rand`` (uniform on [0, 1)); returns ``(x, W(x))``."""
        k = self._select_slot(rand() * self._total)
        u = rand()
        while u == 0.0:
            u = rand()
        s = self._slope[k]
        x = _truncated_exp(s, self._left[k], self._right[k], u)
        return x, self._icpt[k] + s * x

    # adaptation ---------------------------------------------------------

    def insert(self, x: float, point: Optional[SupportPoint] = None) -> bool:
        """Add ``x`` as a support point. Returns False if it duplicates a node.

        Raises DegenerateSlopeError when the new tangent is numerically
        parallel to a neighbour's; the envelope is left unchanged then.
        """
        if not self.lower < x < self.upper:
            raise DomainError(f"x={x} outside ({self.lower}, {self.upper})")
        xs = self._xs
        i = bisect.bisect_left(xs, x)
        if (i > 0 and x - xs[i - 1] <= DEDUP_TOL) or (i < self._n and xs[i] - x <= DEDUP_TOL):
            return False
        if point is None:
            point = SupportPoint.at(self.target, x)
        s_new, c_new = point.dv, point.v - point.dv * x

        p = self._order[i - 1] if i > 0 else None
        q = self._order[i] if i < self._n else None
        if p is None:
            e_left = self.lower
            if e_left == -_INF and not s_new > 0:
                raise DegenerateSlopeError(f"left tail slope {s_new} at {x} is not positive")
        else:
            e = intersect_tangents((self._slope[p], self._icpt[p]), (s_new, c_new))
            e_left = min(max(e, xs[i - 1]), x)
        if q is None:
            e_right = self.upper
            if e_right == _INF and not s_new < 0:
                raise DegenerateSlopeError(f"right tail slope {s_new} at {x} is not negative")
        else:
            e = intersect_tangents((s_new, c_new), (self._slope[q], self._icpt[q]))
            e_right = max(min(e, xs[i]), x)

        new_area = segment_log_area(s_new, c_new, e_left, e_right)
        if p is not None:
            self._right[p] = e_left
            self._logarea[p] = segment_log_area(self._slope[p], self._icpt[p],
                                                self._left[p], e_left)
        if q is not None:
            self._left[q] = e_right
            self._logarea[q] = segment_log_area(self._slope[q], self._icpt[q],
                                                e_right, self._right[q])

        slot = self._n
        xs.insert(i, x)
        self._order.insert(i, slot)
        self._pv.append(point.v)
        self._pdv.append(point.dv)
        self._slope.append(s_new)
        self._icpt.append(c_new)
        self._left.append(e_left)
        self._right.append(e_right)
        self._logarea.append(new_area)

        self._since_rebuild += 1
        if self._since_rebuild >= max(64, self._n):
            self._rebuild_tree()
        else:
            if p is not None:
                self._set_weight(p)
            if q is not None:
                self._set_weight(q)
            self._tree_append(math.exp(new_area - self._ref))
            self._total = self._prefix(self._n)
            self._log_mass = None
        return True

    # export -------------------------------------------------------------

    CSV_FIELDS = ("x", "v", "dv", "slope", "intercept", "left", "right", "log_area")

    def rows(self) -> List[Tuple[float, ...]]:
        return [(pt.x, pt.v, pt.dv, sg.slope, sg.intercept, sg.left, sg.right, sg.log_area)
                for pt, sg in zip(self.points, self.segments)]

    def write_csv(self, fh) -> None:
        """Debug dump: one row per node with its tangent piece."""
        w = csv.writer(fh)
        w.writerow(self.CSV_FIELDS)
        for row in self.rows():
            w.writerow([repr(v) for v in row])

    def __repr__(self):
        return f"Envelope(m={self._n}, log_mass={self.total_log_mass:.6g})"


def build_envelope(target: LogTarget, nodes: Sequence[float]) -> Envelope:
    return Envelope(target, nodes)


def evaluate_upper(env: Envelope, x: float) -> float:
    return env.evaluate_upper(x)


def sample_piece_index(env: Envelope, u: float) -> int:
    """Smallest x-order piece index whose cumulative probability exceeds ``u``."""
    cum = env.cumulative_weights
    return min(bisect.bisect_right(cum, u), len(cum) - 1)


def draw(env: Envelope, rng) -> float:
    """One draw from the normalized envelope; ``rng`` is a ``random.Random``-like object."""
    return env.propose(rng.random)[0]


def insert_support_point(env: Envelope, x_new: float,
                         target: Optional[LogTarget] = None) -> Envelope:
    """Insert ``x_new`` in place (duplicates are ignored) and return ``env``."""
    point = SupportPoint.at(target, x_new) if target is not None else None
    env.insert(x_new, point)
    return env
