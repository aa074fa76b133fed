"""Closed-form radial profiles used as oracles.

Three families:

``regular``
    Integrate the divergence form once with zero flux at the origin.  For a
    monomial source the antiderivative ``F(r) = int_0^r f(s) s^(d-1) ds`` is
    explicit; the second integration is done by adaptive Simpson so the
    oracle shares no quadrature with the finite element code.
``counterexample``
    ``r^(1-a)/(1-a)`` with ``a = (N-1)/(p-1)``, ``p > N``.  It solves the
    homogeneous equation away from the origin but carries the constant flux
    ``kappa`` into it.
``fundamental``
    ``r^((p-N)/(p-1))`` or ``log r`` for ``q = p``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .params import DomainError, ProblemSpec, derive_params
from .weighted import write_csv


@dataclass(frozen=True)
class ExactProfile:
    kind: str
    spec: ProblemSpec
    value: Callable
    deriv: Callable
    deriv2: Callable | None = None
    flux_constant: float | None = None

    @property
    def params(self):
        return derive_params(self.spec)

    def __call__(self, r):
        return self.value(r)

    def flux(self, r):
        """``kappa |v'|^(q-2) v' r^(d-1)``."""
        kp = self.params
        dv = np.asarray(self.deriv(r), dtype=float)
        return kp.kappa * signed_power(dv, self.spec.q - 1) * np.asarray(r, dtype=float) ** (kp.d - 1)

    def to_csv(self, r) -> str:
        r = np.asarray(r, dtype=float)
        return write_csv({"r": r, "v": self.value(r), "flux": self.flux(r)})


def signed_power(x, e):
    """``sgn(x) |x|^e`` with the value 0 at 0."""
    x = np.asarray(x, dtype=float)
    return np.sign(x) * np.abs(x) ** e


def adaptive_simpson(func, a: float, b: float, tol: float = 1e-10, max_depth: int = 50) -> float:
    """Adaptive Simpson quadrature of a scalar function on ``[a, b]``."""

    def simpson(fa, fm, fb, a, b):
        return (b - a) / 6.0 * (fa + 4.0 * fm + fb)

    def recurse(a, b, fa, fm, fb, whole, tol, depth):
        m = 0.5 * (a + b)
        lm, rm = 0.5 * (a + m), 0.5 * (m + b)
        flm, frm = func(lm), func(rm)
        left = simpson(fa, flm, fm, a, m)
        right = simpson(fm, frm, fb, m, b)
        delta = left + right - whole
        if depth <= 0 or abs(delta) <= 15.0 * tol:
            return left + right + delta / 15.0
        return (recurse(a, m, fa, flm, fm, left, 0.5 * tol, depth - 1)
                + recurse(m, b, fm, frm, fb, right, 0.5 * tol, depth - 1))

    if a == b:
        return 0.0
    fa, fm, fb = func(a), func(0.5 * (a + b)), func(b)
    return recurse(a, b, fa, fm, fb, simpson(fa, fm, fb, a, b), tol, max_depth)


def _require_zero_source(spec: ProblemSpec):
    r = np.linspace(0.0, spec.R, 33)[:-1]
    if np.any(spec.f(r) != 0.0):
        raise DomainError("singular profiles are defined for f = 0 only")


def exact_regular_solution(spec: ProblemSpec) -> ExactProfile:
    """Zero-origin-flux solution for a monomial source."""
    if not spec.f.is_monomial:
        raise DomainError("closed-form solution needs a monomial source")
    kp = derive_params(spec)
    if kp.kappa <= 0:
        raise DomainError("kappa must be positive")
    d, q, R, g = kp.d, spec.q, spec.R, spec.g
    terms = spec.f.monomials

    def antiderivative(r):
        r = np.asarray(r, dtype=float)
        return sum(c * r ** (s + d) / (s + d) for c, s in terms) + 0.0 * r

    def deriv(r):
        r = np.asarray(r, dtype=float)
        F = antiderivative(r)
        with np.errstate(divide="ignore", invalid="ignore"):
            mag = np.where(r > 0, np.abs(F) * r ** (1 - d) / kp.kappa, 0.0)
        return -np.sign(F) * mag ** (1.0 / (q - 1))

    def deriv2(r):
        # from (|v'|^{q-2} v' r^{d-1})' = -f r^{d-1}/kappa
        r = np.asarray(r, dtype=float)
        dv = deriv(r)
        with np.errstate(divide="ignore", invalid="ignore"):
            out = -(spec.f(r) / kp.kappa * np.abs(dv) ** (2 - q) + (d - 1) * dv / r) / (q - 1)
        return out

    def scalar_deriv(s):
        if s <= 0.0:
            return 0.0
        F = sum(c * s ** (e + d) / (e + d) for c, e in terms)
        mag = (abs(F) * s ** (1 - d) / kp.kappa) ** (1.0 / (q - 1))
        return -math.copysign(mag, F) if F != 0 else 0.0

    def value(r):
        r = np.asarray(r, dtype=float)
        flat = np.atleast_1d(r).ravel()
        order = np.argsort(flat)[::-1]
        out = np.empty_like(flat)
        # integrate from R downward, accumulating over consecutive sorted radii
        acc, prev = 0.0, R
        for k in order:
            x = flat[k]
            if x > R:
                raise DomainError(f"radius {x} beyond R={R}")
            acc += adaptive_simpson(scalar_deriv, x, prev) if x < prev else 0.0
            prev = x
            out[k] = g - acc
        return out.reshape(r.shape) if r.ndim else float(out[0])

    return ExactProfile("regular", spec, value, deriv, deriv2, flux_constant=0.0)


def counterexample_profile(spec: ProblemSpec) -> ExactProfile:
    """Interior solution of the homogeneous equation with flux ``kappa`` at 0."""
    if not spec.p > spec.N:
        raise DomainError(f"counterexample needs p > N, got p={spec.p}, N={spec.N}")
    _require_zero_source(spec)
    kp = derive_params(spec)
    alpha = (spec.N - 1) / (spec.p - 1)

    def value(r):
        return np.asarray(r, dtype=float) ** (1 - alpha) / (1 - alpha)

    def deriv(r):
        with np.errstate(divide="ignore"):
            return np.asarray(r, dtype=float) ** (-alpha)

    def deriv2(r):
        with np.errstate(divide="ignore"):
            return -alpha * np.asarray(r, dtype=float) ** (-alpha - 1)

    return ExactProfile("counterexample", spec, value, deriv, deriv2, flux_constant=kp.kappa)


def fundamental_profile(spec: ProblemSpec) -> ExactProfile:
    """Radial fundamental solution of the p-Laplacian (``q = p``)."""
    if spec.q != spec.p:
        raise DomainError(f"fundamental solution needs q = p, got p={spec.p}, q={spec.q}")
    _require_zero_source(spec)
    p, N = spec.p, spec.N
    if p == N:
        def value(r):
            with np.errstate(divide="ignore"):
                return np.log(np.asarray(r, dtype=float))

        def deriv(r):
            with np.errstate(divide="ignore"):
                return 1.0 / np.asarray(r, dtype=float)

        def deriv2(r):
            with np.errstate(divide="ignore"):
                return -1.0 / np.asarray(r, dtype=float) ** 2

        flux = 1.0
    else:
        e = (p - N) / (p - 1)

        def value(r):
            with np.errstate(divide="ignore"):
                return np.asarray(r, dtype=float) ** e

        def deriv(r):
            with np.errstate(divide="ignore"):
                return e * np.asarray(r, dtype=float) ** (e - 1)

        def deriv2(r):
            with np.errstate(divide="ignore"):
                return e * (e - 1) * np.asarray(r, dtype=float) ** (e - 2)

        flux = math.copysign(abs(e) ** (p - 1), e)
    return ExactProfile("fundamental", spec, value, deriv, deriv2, flux_constant=flux)


def strong_residual(profile: ExactProfile, r):
    """``-kappa |v'|^(q-2) ((q-1) v'' + (d-1) v'/r) - f(r)`` from analytic derivatives."""
    kp = profile.params
    q = profile.spec.q
    r = np.asarray(r, dtype=float)
    dv = profile.deriv(r)
    d2v = profile.deriv2(r)
    return -kp.kappa * np.abs(dv) ** (q - 2) * ((q - 1) * d2v + (kp.d - 1) * dv / r) - profile.spec.f(r)
