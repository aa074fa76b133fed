"""Radial solutions of -|Du|^{q-2} Delta_p^N u = f(|x|) via the fictitious-dimension reduction."""

from .params import DerivedParams, DomainError, ProblemSpec, SourceTerm, derive_params, eval_source
from .weighted import DiscreteFunction, Mesh1D, TestFunction

__all__ = [
    "DerivedParams",
    "DiscreteFunction",
    "DomainError",
    "Mesh1D",
    "ProblemSpec",
    "SourceTerm",
    "TestFunction",
    "derive_params",
    "eval_source",
]
