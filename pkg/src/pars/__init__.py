"""Adaptive and parsimonious adaptive rejection sampling for log-concave densities."""

from .errors import (
    DegenerateSlopeError,
    DomainError,
    EvaluationError,
    IntegrabilityError,
    NodeCapError,
    ParameterError,
    ParseError,
    QuadratureError,
    UnknownIdentifierError,
)
from .targets import (
    DomainInterval,
    GaussianTarget,
    LogTarget,
    NakagamiParams,
    NakagamiTarget,
    check_concavity,
)
from .envelope import Envelope, Segment, SupportPoint, build_envelope
from .samplers import RunResult, SamplerConfig, run_ars, run_pars, run_replicated
from .expr import Dual, eval_dual, expression_target, parse

__version__ = "0.1.0"

__all__ = [
    "DegenerateSlopeError",
    "DomainError",
    "DomainInterval",
    "Dual",
    "Envelope",
    "EvaluationError",
    "GaussianTarget",
    "IntegrabilityError",
    "LogTarget",
    "NakagamiParams",
    "NakagamiTarget",
    "NodeCapError",
    "ParameterError",
    "ParseError",
    "QuadratureError",
    "RunResult",
    "SamplerConfig",
    "Segment",
    "SupportPoint",
    "UnknownIdentifierError",
    "build_envelope",
    "check_concavity",
    "eval_dual",
    "expression_target",
    "parse",
    "run_ars",
    "run_pars",
    "run_replicated",
]
