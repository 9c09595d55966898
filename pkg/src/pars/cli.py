"""Command-line interface: ``pars sample | bench | validate``.

Exit codes: 0 success, 1 runtime failure (or a failed validation), 2 bad flags.
Set ``PARS_WORKERS`` to let ``bench`` run replicas in that many processes.
"""

from __future__ import annotations

import argparse
import csv
import math
import os
import sys
from dataclasses import dataclass, field
from typing import List, Optional, Sequence

from .diagnostics import ks_test, numeric_cdf
from .errors import ParseError, ParsError
from .expr import expression_target, parse
from .samplers import RUNNERS, SamplerConfig, default_workers, run_replicated
from .targets import DomainInterval, GaussianTarget, LogTarget, NakagamiTarget

BENCH_HEADER = ["algo", "n", "delta", "runs", "mean_accept", "std_accept", "mean_nodes",
                "std_nodes", "mean_elapsed_s", "std_elapsed_s", "base_seed"]

DEFAULT_N_VALUES = [50_000, 100_000, 150_000, 200_000]
# 0.5, 0.8, 0.999 and 0.9999 are the values discussed for Fig. 2; the rest fill the sweep
DEFAULT_DELTAS = [0.1, 0.3, 0.5, 0.8, 0.9, 0.99, 0.999, 0.9999]


@dataclass
class BenchGrid:
    n_values: List[int] = field(default_factory=lambda: list(DEFAULT_N_VALUES))
    delta_values: List[float] = field(default_factory=lambda: list(DEFAULT_DELTAS))
    n_runs: int = 200
    base_seed: int = 0
    algos: Sequence[str] = ("ars", "pars")

    def __post_init__(self):
        if not self.n_values or not self.delta_values:
            raise ValueError("grid lists must be non-empty")
        if any(n < 1 for n in self.n_values) or self.n_runs < 1:
            raise ValueError("n values and run count must be positive")
        if any(not 0 <= d <= 1 for d in self.delta_values):
            raise ValueError("delta values must lie in [0, 1]")

    def cells(self):
        """(algo, n, delta) in output order; delta is None for ARS."""
        for n in self.n_values:
            if "ars" in self.algos:
                yield "ars", n, None
            if "pars" in self.algos:
                for d in self.delta_values:
                    yield "pars", n, d


# --- argument helpers ------------------------------------------------------------

def _float_list(text: str) -> List[float]:
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}")


def _int_list(text: str) -> List[int]:
    try:
        return [int(float(v)) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}")


def _count(text: str) -> int:
    try:
        v = int(float(text))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {text!r}")
    if v < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {text!r}")
    return v


def _seed(text: str) -> int:
    try:
        v = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"seed must be an integer, got {text!r}")
    if v < 0:
        raise argparse.ArgumentTypeError("seed must be non-negative")
    return v


def _add_target_flags(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("target")
    g.add_argument("--target", choices=["nakagami", "gaussian", "expr"], default="nakagami")
    g.add_argument("--m", type=float, default=1.2, help="Nakagami fading parameter (>= 0.5)")
    g.add_argument("--omega", type=float, default=2.0, help="Nakagami average power (> 0)")
    g.add_argument("--mu", type=float, default=0.0, help="Gaussian mean")
    g.add_argument("--sigma", type=float, default=1.0, help="Gaussian standard deviation")
    g.add_argument("--target-expr", help="log-density V(x), e.g. '1.4*log(x) - 0.6*x^2'")
    g.add_argument("--domain", default="-inf:inf", help="domain for --target-expr as lo:hi")


def _add_sampler_flags(p: argparse.ArgumentParser, n_default: Optional[int]) -> None:
    p.add_argument("--algo", choices=sorted(RUNNERS), default="pars")
    p.add_argument("--delta", type=float, default=0.8, help="PARS threshold in [0, 1]")
    p.add_argument("--s0", type=_float_list, default=None,
                   help="initial support points, comma separated (must bracket the mode)")
    p.add_argument("--max-nodes", type=_count, default=None)
    if n_default is None:
        p.add_argument("--n", type=_count, required=True, help="number of samples")
    else:
        p.add_argument("--n", type=_count, default=n_default, help="number of samples")
    p.add_argument("--seed", type=_seed, default=0)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="pars", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("sample", help="draw samples and write one per line")
    _add_target_flags(p)
    _add_sampler_flags(p, None)
    p.add_argument("--out", default="-", help="output path ('-' for stdout)")

    p = sub.add_parser("bench", help="replicated ARS/PARS benchmark grid as CSV")
    _add_target_flags(p)
    p.add_argument("--algos", default="ars,pars", help="subset of ars,pars")
    p.add_argument("--n", type=_int_list, default=None, dest="n_values",
                   help="comma-separated sample sizes")
    p.add_argument("--delta", type=_float_list, default=None, dest="delta_values",
                   help="comma-separated PARS thresholds")
    p.add_argument("--runs", type=_count, default=200)
    p.add_argument("--base-seed", type=_seed, default=0)
    p.add_argument("--s0", type=_float_list, default=None)
    p.add_argument("--max-nodes", type=_count, default=None)
    p.add_argument("--workers", type=_count, default=None,
                   help="worker processes (default: $PARS_WORKERS or 1)")
    p.add_argument("--out", default="-", help="CSV path, appended to if it exists")

    p = sub.add_parser("validate", help="KS and moment checks of sampler output")
    _add_target_flags(p)
    _add_sampler_flags(p, 100_000)
    p.add_argument("--alpha", type=float, default=0.01)
    p.add_argument("--against", choices=["nakagami", "gaussian", "expr"], default=None,
                   help="reference distribution (default: the sampled target)")
    return parser


def make_target(kind: str, args) -> LogTarget:
    if kind == "nakagami":
        return NakagamiTarget(args.m, args.omega)
    if kind == "gaussian":
        return GaussianTarget(args.mu, args.sigma)
    if not args.target_expr:
        raise ValueError("--target expr requires --target-expr")
    return expression_target(parse(args.target_expr), DomainInterval.parse(args.domain))


def default_s0(kind: str, args) -> List[float]:
    if kind == "nakagami":
        return [0.5, 1.0, 2.0]
    if kind == "gaussian":
        return [args.mu - args.sigma, args.mu + args.sigma]
    raise ValueError("--s0 is required for expression targets")


def _setup(parser, args):
    """Target and initial nodes from flags; flag problems exit with status 2."""
    try:
        target = make_target(args.target, args)
        s0 = args.s0 if args.s0 else default_s0(args.target, args)
    except (ParseError, ValueError) as exc:
        parser.error(str(exc))
    if hasattr(args, "delta") and isinstance(args.delta, float) and not 0 <= args.delta <= 1:
        parser.error("--delta must lie in [0, 1]")
    return target, s0


def _fail(exc: BaseException) -> int:
    print(f"pars: error: {type(exc).__name__}: {exc}", file=sys.stderr)
    return 1


# --- commands --------------------------------------------------------------------

def cmd_sample(args, parser) -> int:
    target, s0 = _setup(parser, args)
    try:
        cfg = SamplerConfig(args.n, tuple(s0), args.delta, args.seed, args.max_nodes)
        res = RUNNERS[args.algo](target, cfg)
    except ParsError as exc:
        return _fail(exc)
    out = sys.stdout if args.out == "-" else open(args.out, "w")
    try:
        out.writelines(f"{x!r}\n" for x in res.samples)
        out.write(f"# algo={args.algo} delta={args.delta if args.algo == 'pars' else ''}\n")
        out.write(f"# T={res.total_proposals}\n")
        out.write(f"# m_T={res.final_node_count}\n")
        out.write(f"# acceptance={res.acceptance_rate!r}\n")
        out.write(f"# elapsed_s={res.elapsed!r}\n")
    finally:
        if out is not sys.stdout:
            out.close()
    return 0


def _open_csv(path: str):
    if path == "-":
        return sys.stdout, True
    fresh = not os.path.exists(path) or os.path.getsize(path) == 0
    if not fresh:
        with open(path, newline="") as fh:
            header = next(csv.reader(fh), None)
        if header != BENCH_HEADER:
            raise ValueError(f"{path} exists with a different header; refusing to append")
    return open(path, "a", newline=""), fresh


def cmd_bench(args, parser) -> int:
    target, s0 = _setup(parser, args)
    algos = [a.strip() for a in args.algos.split(",") if a.strip()]
    if not algos or any(a not in RUNNERS for a in algos):
        parser.error(f"--algos must be a subset of ars,pars, got {args.algos!r}")
    try:
        grid = BenchGrid(n_values=args.n_values or list(DEFAULT_N_VALUES),
                         delta_values=args.delta_values or list(DEFAULT_DELTAS),
                         n_runs=args.runs, base_seed=args.base_seed, algos=algos)
    except ValueError as exc:
        parser.error(str(exc))
    try:
        fh, fresh = _open_csv(args.out)
    except (OSError, ValueError) as exc:
        return _fail(exc)
    workers = args.workers if args.workers is not None else default_workers()
    writer = csv.writer(fh)
    try:
        if fresh:
            writer.writerow(BENCH_HEADER)
            fh.flush()
        for algo, n, delta in grid.cells():
            cfg = SamplerConfig(n, tuple(s0), 0.0 if delta is None else delta, 0,
                                args.max_nodes)
            agg = run_replicated(algo, target, cfg, grid.n_runs, grid.base_seed, workers)
            writer.writerow([algo, n, "" if delta is None else repr(delta), grid.n_runs,
                             repr(agg.mean_accept), repr(agg.std_accept),
                             repr(agg.mean_nodes), repr(agg.std_nodes),
                             repr(agg.mean_elapsed), repr(agg.std_elapsed), grid.base_seed])
            fh.flush()
    except (ParsError, RuntimeError) as exc:
        return _fail(exc)
    finally:
        if fh is not sys.stdout:
            fh.close()
    return 0


def cmd_validate(args, parser) -> int:
    target, s0 = _setup(parser, args)
    try:
        reference = target if args.against in (None, args.target) else make_target(args.against, args)
    except (ParseError, ValueError) as exc:
        parser.error(str(exc))
    if not 0 < args.alpha < 1:
        parser.error("--alpha must lie in (0, 1)")
    try:
        cfg = SamplerConfig(args.n, tuple(s0), args.delta, args.seed, args.max_nodes)
        res = RUNNERS[args.algo](target, cfg)
        cdf = numeric_cdf(reference)
    except ParsError as exc:
        return _fail(exc)

    checks = []
    ks = ks_test(res.samples, cdf, args.alpha)
    checks.append(("ks", ks.passed,
                   f"D={ks.statistic:.6g} critical={ks.critical:.6g} p={ks.pvalue:.4g}"))
    n = len(res.samples)
    mean, var, mu4 = cdf.moments()
    emp_mean = math.fsum(res.samples) / n
    emp_var = math.fsum((x - emp_mean) ** 2 for x in res.samples) / (n - 1)
    band_mean = 3 * math.sqrt(var / n)
    band_var = 3 * math.sqrt(max(mu4 - var * var, 0.0) / n)
    checks.append(("mean", abs(emp_mean - mean) <= band_mean,
                   f"empirical={emp_mean:.6g} expected={mean:.6g} band={band_mean:.3g}"))
    checks.append(("variance", abs(emp_var - var) <= band_var,
                   f"empirical={emp_var:.6g} expected={var:.6g} band={band_var:.3g}"))

    print(f"# {args.algo} on {args.target} vs {args.against or args.target}: n={n} "
          f"T={res.total_proposals} m_T={res.final_node_count}")
    for name, ok, detail in checks:
        print(f"{name:9s} {'PASS' if ok else 'FAIL'}  {detail}")
    return 0 if all(ok for _, ok, _ in checks) else 1


COMMANDS = {"sample": cmd_sample, "bench": cmd_bench, "validate": cmd_validate}


# options whose values routinely start with '-' (negative nodes, negated expressions)
_DASH_VALUE_OPTS = ("--s0", "--target-expr", "--domain", "--mu", "--delta", "--n")


def _join_dash_values(argv: Sequence[str]) -> List[str]:
    """Rewrite ``--s0 -1,1`` as ``--s0=-1,1`` so argparse does not read it as a flag."""
    out: List[str] = []
    i = 0
    while i < len(argv):
        tok = argv[i]
        if (tok in _DASH_VALUE_OPTS and i + 1 < len(argv)
                and argv[i + 1].startswith("-") and not argv[i + 1].startswith("--")):
            out.append(f"{tok}={argv[i + 1]}")
            i += 2
        else:
            out.append(tok)
            i += 1
    return out


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(_join_dash_values(sys.argv[1:] if argv is None else list(argv)))
    return COMMANDS[args.command](args, parser)


if __name__ == "__main__":
    sys.exit(main())
