"""ARS and PARS sampling loops plus a replication harness."""

from __future__ import annotations

import math
import os
import random
import statistics
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from typing import List, Optional, Sequence, Tuple

import numpy as np

from .envelope import Envelope
from .errors import DegenerateSlopeError, NodeCapError, ParameterError
from .targets import LogTarget

WORKERS_ENV = "PARS_WORKERS"


@dataclass(frozen=True)
class SamplerConfig:
    n_samples: int
    initial_nodes: Tuple[float, ...] = (0.5, 1.0, 2.0)
    delta: float = 0.8
    seed: int = 0
    max_nodes: Optional[int] = None

    def __post_init__(self):
        object.__setattr__(self, "initial_nodes", tuple(float(x) for x in self.initial_nodes))
        if self.n_samples < 1:
            raise ParameterError(f"n_samples must be >= 1, got {self.n_samples}")
        if not self.initial_nodes:
            raise ParameterError("initial_nodes must not be empty")
        if not 0.0 <= self.delta <= 1.0:
            raise ParameterError(f"delta must lie in [0, 1], got {self.delta}")
        if self.max_nodes is not None and self.max_nodes < 1:
            raise ParameterError("max_nodes must be positive")


@dataclass
class RunResult:
    samples: List[float]
    total_proposals: int
    final_node_count: int
    initial_node_count: int
    node_trace: List[Tuple[int, int]]
    elapsed: float
    insertion_attempts: int = 0
    insertions_skipped: int = 0
    n_accepted: int = -1

    def __post_init__(self):
        if self.n_accepted < 0:
            self.n_accepted = len(self.samples)

    @property
    def acceptance_rate(self) -> float:
        return self.n_accepted / self.total_proposals

    @property
    def rejections(self) -> int:
        return self.total_proposals - self.n_accepted

    def same_outcome(self, other: "RunResult") -> bool:
        """Equality of everything except wall-clock time."""
        return (replace(self, elapsed=0.0) == replace(other, elapsed=0.0))


def log_accept_ratio(target: LogTarget, env: Envelope, x: float) -> float:
    """``V(x) - W(x)``; the proposal is accepted when ``ln u <= `` this."""
    return target.log_density(x) - env.evaluate_upper(x)


def _run(target: LogTarget, cfg: SamplerConfig, parsimonious: bool,
         rng: Optional[random.Random]) -> RunResult:
    if rng is None:
        rng = random.Random(cfg.seed)
    env = Envelope(target, cfg.initial_nodes)
    m0 = env.node_count
    if cfg.max_nodes is not None and m0 > cfg.max_nodes:
        raise NodeCapError(f"initial node count {m0} exceeds max_nodes={cfg.max_nodes}")

    rand = rng.random
    log = math.log
    V = target.log_density
    propose = env.propose
    N = cfg.n_samples
    log_delta = log(cfg.delta) if cfg.delta > 0 else -math.inf
    cap = cfg.max_nodes

    samples: List[float] = []
    push = samples.append
    trace = [(0, m0)]
    t = 0
    attempts = skipped = 0

    start = time.perf_counter()
    while len(samples) < N:
        t += 1
        x, w = propose(rand)
        r = V(x) - w
        accepted = log(1.0 - rand()) <= r
        if accepted:
            push(x)
        if parsimonious:
            grow = r <= log_delta
        else:
            grow = not accepted
        if grow:
            attempts += 1
            if cap is not None and env.node_count >= cap:
                raise NodeCapError(f"node cap max_nodes={cap} reached at iteration {t}")
            try:
                added = env.insert(x)
            except DegenerateSlopeError:
                added = False
            if added:
                trace.append((t, env.node_count))
            else:
                skipped += 1
    elapsed = time.perf_counter() - start

    if trace[-1][0] != t:
        trace.append((t, env.node_count))
    return RunResult(samples=samples, total_proposals=t, final_node_count=env.node_count,
                     initial_node_count=m0, node_trace=trace, elapsed=elapsed,
                     insertion_attempts=attempts, insertions_skipped=skipped)


def run_ars(target: LogTarget, cfg: SamplerConfig,
            rng: Optional[random.Random] = None) -> RunResult:
    """Standard ARS: every rejected proposal becomes a support point.

    ``cfg.delta`` is ignored. With ``rng=None`` a ``random.Random(cfg.seed)``
    is used, so runs are reproducible from the config alone.
    """
    return _run(target, cfg, False, rng)


def run_pars(target: LogTarget, cfg: SamplerConfig,
             rng: Optional[random.Random] = None) -> RunResult:
    """Parsimonious ARS: a proposal becomes a node iff its ratio ``pi/q <= delta``,
    whether or not it was accepted.
    """
    return _run(target, cfg, True, rng)


RUNNERS = {"ars": run_ars, "pars": run_pars}


def replica_seed(base_seed: int, index: int) -> int:
    """Independent 64-bit seed for replica ``index``."""
    ss = np.random.SeedSequence(entropy=base_seed, spawn_key=(index,))
    hi, lo = ss.generate_state(2, dtype=np.uint32).tolist()
    return (hi << 32) | lo


@dataclass
class Aggregate:
    kind: str
    n_runs: int
    mean_accept: float
    std_accept: float
    mean_nodes: float
    std_nodes: float
    mean_elapsed: float
    std_elapsed: float
    acceptance_rates: List[float] = field(repr=False, default_factory=list)
    node_counts: List[int] = field(repr=False, default_factory=list)
    elapsed: List[float] = field(repr=False, default_factory=list)


class ReplicaError(RuntimeError):
    def __init__(self, index: int, cause: BaseException):
        self.index = index
        self.cause = cause
        super().__init__(f"replica {index} failed: {cause}")


def _one_replica(args):
    kind, target, cfg, index, keep = args
    try:
        res = RUNNERS[kind](target, cfg)
    except Exception as exc:  # re-raised with the replica index by the caller
        return index, exc
    if not keep:
        res.samples = []
        res.node_trace = []
    return index, res


def _std(values: Sequence[float]) -> float:
    return statistics.pstdev(values) if len(values) > 1 else 0.0


def default_workers() -> int:
    raw = os.environ.get(WORKERS_ENV)
    if raw:
        try:
            return max(1, int(raw))
        except ValueError:
            raise ParameterError(f"{WORKERS_ENV} must be an integer, got {raw!r}") from None
    return 1


def replicate(kind: str, target: LogTarget, cfg: SamplerConfig, n_runs: int,
              base_seed: int, workers: Optional[int] = None,
              keep_results: bool = False) -> List[RunResult]:
    """Run ``n_runs`` seeded replicas; results come back in replica order."""
    if kind not in RUNNERS:
        raise ParameterError(f"unknown sampler kind {kind!r}")
    if n_runs < 1:
        raise ParameterError("n_runs must be >= 1")
    if workers is None:
        workers = default_workers()
    jobs = [(kind, target, replace(cfg, seed=replica_seed(base_seed, i)), i, keep_results)
            for i in range(n_runs)]
    if workers <= 1:
        outcomes = [_one_replica(j) for j in jobs]
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            outcomes = list(pool.map(_one_replica, jobs))
    results = []
    for index, res in sorted(outcomes, key=lambda o: o[0]):
        if isinstance(res, BaseException):
            raise ReplicaError(index, res) from res
        results.append(res)
    return results


def run_replicated(kind: str, target: LogTarget, cfg: SamplerConfig, n_runs: int,
                   base_seed: int, workers: Optional[int] = None) -> Aggregate:
    """Mean and population standard deviation over seeded replicas.

    Replica ``i`` is seeded from ``(base_seed, i)``, so the statistics (timing
    aside) do not depend on ``workers``.
    """
    results = replicate(kind, target, cfg, n_runs, base_seed, workers)
    acc = [r.acceptance_rate for r in results]
    nodes = [r.final_node_count for r in results]
    el = [r.elapsed for r in results]
    return Aggregate(kind=kind, n_runs=n_runs,
                     mean_accept=statistics.fmean(acc), std_accept=_std(acc),
                     mean_nodes=statistics.fmean(nodes), std_nodes=_std(nodes),
                     mean_elapsed=statistics.fmean(el), std_elapsed=_std(el),
                     acceptance_rates=acc, node_counts=nodes, elapsed=el)
