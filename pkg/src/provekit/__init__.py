"""Verifier-guided proof generation pipelines at desk scale."""

__version__ = "0.1.0"

from .statements import Binder, FormalStatement, dedup, negate, parse_theorem, render
from .verifier import Diagnostic, GoalState, ToyVerifier, Verdict, goal_to_statement
from .metrics import aggregate_with_stderr, pass_at_k, scaling_curve

__all__ = [
    "Binder", "FormalStatement", "dedup", "negate", "parse_theorem", "render",
    "Diagnostic", "GoalState", "ToyVerifier", "Verdict", "goal_to_statement",
    "aggregate_with_stderr", "pass_at_k", "scaling_curve",
]
