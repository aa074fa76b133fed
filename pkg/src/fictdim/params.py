"""Problem definition for the radial reduction.

A radial problem is fixed by the exponents ``p`` (normalized p-Laplacian),
``q`` (gradient weight), the ambient dimension ``N``, the radius ``R``, a
radial source ``f`` and the Dirichlet value ``g`` at ``r = R``.  The 1D
equation it reduces to is

    -kappa (|v'|^{q-2} v' r^{d-1})' = f r^{d-1}    on (0, R)

with ``kappa = (p-1)/(q-1)`` and ``d = (N-1)(q-1)/(p-1) + 1``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from typing import Callable, Sequence

import numpy as np


class DomainError(ValueError):
    """A problem parameter lies outside its admissible range."""


@dataclass(frozen=True)
class DerivedParams:
    kappa: float
    d: float


@dataclass(frozen=True)
class SourceTerm:
    """Radial source ``f`` on ``[0, R)``.

    Exactly one of the three representations is active:

    * ``monomials``: tuple of ``(c, s)`` pairs, ``f(r) = sum c r**s``
    * ``table``: ``(radii, values)`` interpolated linearly
    * ``func``: an opaque vectorized callable
    """

    monomials: tuple[tuple[float, float], ...] | None = None
    table: tuple[np.ndarray, np.ndarray] | None = None
    func: Callable[[np.ndarray], np.ndarray] | None = field(default=None, compare=False)

    def __post_init__(self):
        active = sum(x is not None for x in (self.monomials, self.table, self.func))
        if active != 1:
            raise ValueError("SourceTerm needs exactly one representation")
        if self.monomials is not None:
            for c, s in self.monomials:
                if s < 0:
                    raise DomainError(f"monomial exponent {s} < 0: f must be continuous at 0")
        if self.table is not None:
            r, v = self.table
            if len(r) != len(v) or len(r) < 2 or np.any(np.diff(r) <= 0):
                raise ValueError("tabulated source needs >= 2 strictly increasing radii")

    @classmethod
    def monomial_sum(cls, terms: Sequence[Sequence[float]]) -> "SourceTerm":
        return cls(monomials=tuple((float(c), float(s)) for c, s in terms))

    @classmethod
    def constant(cls, c: float) -> "SourceTerm":
        return cls.monomial_sum([(c, 0.0)])

    @classmethod
    def tabulated(cls, radii, values) -> "SourceTerm":
        r = np.asarray(radii, dtype=float)
        v = np.asarray(values, dtype=float)
        r.setflags(write=False)
        v.setflags(write=False)
        return cls(table=(r, v))

    @classmethod
    def from_callable(cls, func) -> "SourceTerm":
        return cls(func=func)

    @property
    def is_monomial(self) -> bool:
        return self.monomials is not None

    def __call__(self, r):
        r = np.asarray(r, dtype=float)
        if self.monomials is not None:
            out = np.zeros_like(r)
            for c, s in self.monomials:
                # 0**0 is 1 in numpy, which is the value we want for constants
                out = out + c * r**s
            return out
        if self.table is not None:
            return np.interp(r, *self.table)
        return np.asarray(self.func(r), dtype=float) * np.ones_like(r)

    def sup_norm(self, R: float, samples: int = 257) -> float:
        r = np.linspace(0.0, R, samples)
        return float(np.max(np.abs(self(r))))


@dataclass(frozen=True)
class ProblemSpec:
    p: float
    q: float
    N: int
    R: float
    f: SourceTerm
    g: float = 0.0

    def __post_init__(self):
        if not self.p > 1:
            raise DomainError(f"p must satisfy p > 1, got p={self.p}")
        if not self.q > 1:
            raise DomainError(f"q must satisfy q > 1, got q={self.q}")
        if int(self.N) != self.N or self.N < 2:
            raise DomainError(f"N must be an integer >= 2, got N={self.N}")
        if not self.R > 0:
            raise DomainError(f"R must satisfy R > 0, got R={self.R}")

    @cached_property
    def derived(self) -> DerivedParams:
        return derive_params(self)

    def with_source(self, f: SourceTerm) -> "ProblemSpec":
        return ProblemSpec(self.p, self.q, self.N, self.R, f, self.g)


def derive_params(spec: ProblemSpec) -> DerivedParams:
    """Return ``kappa`` and the fictitious dimension ``d`` for ``spec``."""
    p, q, N = spec.p, spec.q, spec.N
    if p <= 1 or q <= 1 or N < 2:
        raise DomainError(f"need p > 1, q > 1, N >= 2; got p={p}, q={q}, N={N}")
    kappa = (p - 1) / (q - 1)
    # the ratio first, so that q == p gives d == N exactly
    d = (N - 1) * ((q - 1) / (p - 1)) + 1
    return DerivedParams(kappa=kappa, d=d)


def eval_source(f: SourceTerm, r, R: float | None = None):
    """Evaluate ``f`` at ``r``, rejecting radii outside ``[0, R)``."""
    arr = np.asarray(r, dtype=float)
    if np.any(arr < 0) or (R is not None and np.any(arr >= R)):
        raise DomainError(f"radius outside [0, R): {r}")
    out = f(arr)
    return float(out) if out.ndim == 0 else out
