"""Pointwise (viscosity-side) tools for radial profiles.

Includes the strong-form residual, the radial lift to ``R^N``, the radial
inf-convolution with kernel ``|r - s|^qh / (qh eps^(qh-1))`` and the checks
built on it.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .exact import ExactProfile, strong_residual
from .params import ProblemSpec, derive_params
from .weighted import DiscreteFunction, Mesh1D, write_csv


def local_derivatives(v: DiscreteFunction, r: float, width: int = 2):
    """First and second derivative of ``v`` at ``r`` from a local quadratic fit.

    The fit is a least-squares quadratic through the ``2 width + 1`` nodes
    centred on the node nearest ``r``.  A piecewise-linear function has no
    pointwise second derivative, so this is a smoothed diagnostic.
    """
    nodes = v.mesh.nodes
    i = int(np.argmin(np.abs(nodes - r)))
    if i - width < 0 or i + width > v.mesh.M:
        raise ValueError(f"r={r} is too close to the boundary for the stencil")
    x = nodes[i - width:i + width + 1] - r
    y = v.values[i - width:i + width + 1]
    if np.all(y == y[0]):
        return 0.0, 0.0
    c2, c1, _ = np.polyfit(x, y, 2)
    return c1, 2.0 * c2


def pointwise_residual(v, r, spec: ProblemSpec):
    """``-kappa |v'|^(q-2) ((q-1) v'' + (d-1) v'/r) - f(r)`` at ``0 < r < R``."""
    if isinstance(v, ExactProfile):
        return strong_residual(v, r)
    kp = derive_params(spec)
    q = spec.q
    r_arr = np.atleast_1d(np.asarray(r, dtype=float))
    out = np.empty_like(r_arr)
    for k, x in enumerate(r_arr):
        if not 0 < x < spec.R:
            raise ValueError(f"r={x} outside (0, R)")
        dv, d2v = local_derivatives(v, x)
        inner = (q - 1) * d2v + (kp.d - 1) * dv / x
        if inner == 0:
            # flat and straight: the operator vanishes whatever the sign of q - 2
            out[k] = -spec.f(x)
            continue
        with np.errstate(divide="ignore"):
            out[k] = -kp.kappa * abs(dv) ** (q - 2) * inner - spec.f(x)
    return out if np.ndim(r) else float(out[0])


def radial_lift_sample(v: DiscreteFunction, x) -> float:
    """Value of ``u(x) = v(|x|)`` for a point ``x`` in ``R^N``."""
    rad = float(np.linalg.norm(x))
    if rad >= v.mesh.R:
        raise ValueError(f"|x| = {rad} is not inside the ball of radius {v.mesh.R}")
    return float(v(rad))


@dataclass(frozen=True)
class InfConvConfig:
    epsilon: float
    q_hat: float
    q: float

    def __post_init__(self):
        if not self.epsilon > 0:
            raise ValueError("epsilon must be positive")
        if not self.q_hat > 2:
            raise ValueError("q_hat must exceed 2")
        if not self.q - 2 + (self.q_hat - 2) / (self.q_hat - 1) > 0:
            raise ValueError(f"q_hat={self.q_hat} too small for q={self.q}")

    @classmethod
    def for_q(cls, epsilon: float, q: float) -> "InfConvConfig":
        return cls(epsilon, default_q_hat(q), q)

    def rho(self, osc: float) -> float:
        """Localization radius; the leading factor is ``max(q, q_hat)``.

        With kernel ``|r-s|^qh/(qh eps^(qh-1))`` any ``s`` farther than
        ``(qh eps^(qh-1) osc)^(1/qh)`` loses to ``s = r``; ``max(q, qh)``
        covers the variant constant as well.
        """
        lead = max(self.q, self.q_hat)
        return (lead * self.epsilon ** (self.q_hat - 1) * osc) ** (1.0 / self.q_hat)


def default_q_hat(q: float) -> float:
    """Smallest of 2.5, 3, 4, 5, ... with ``q - 2 + (qh-2)/(qh-1) > 0.1``."""
    candidates = [2.5] + [float(k) for k in range(3, 1000)]
    for qh in candidates:
        if q - 2 + (qh - 2) / (qh - 1) > 0.1:
            return qh
    raise ValueError(f"no admissible q_hat for q={q}")


@dataclass(frozen=True)
class InfConvResult:
    values: DiscreteFunction
    argmin: np.ndarray
    rho: float
    config: InfConvConfig
    saturated: bool = False

    def to_csv(self, original: DiscreteFunction) -> str:
        return write_csv({"r": original.mesh.nodes, "v": original.values,
                          "v_eps": self.values.values, "argmin": self.argmin})


def kernel(dist, config: InfConvConfig):
    qh, eps = config.q_hat, config.epsilon
    return np.abs(dist) ** qh / (qh * eps ** (qh - 1))


def inf_convolution(v: DiscreteFunction, config: InfConvConfig, window: bool = True) -> InfConvResult:
    """Radial inf-convolution of a piecewise-linear ``v`` at the mesh nodes.

    On each element the objective ``v(s) + kernel(r - s)`` is convex, so its
    minimum over the element (clipped to the window) is at the clipped
    stationary point ``s = r - sgn(m) eps |m|^(1/(qh-1))``.  Minimizing over
    all elements gives the exact discrete inf-convolution.  Ties go to the
    smallest radius.  ``window=False`` minimizes over all of ``[0, R]``.
    """
    mesh = v.mesh
    r = mesh.nodes
    osc = float(np.ptp(v.values))
    rho = config.rho(osc)
    saturated = rho >= mesh.R
    if saturated:
        warnings.warn(f"inf-convolution window rho={rho:.3g} covers the whole domain "
                      f"(epsilon={config.epsilon} too large)", stacklevel=2)
    a, b = r[:-1], r[1:]
    m = v.slopes
    eps, qh = config.epsilon, config.q_hat
    x = r[:, None]
    lo = np.maximum(a[None, :], x - rho) if window else np.broadcast_to(a[None, :], (r.size, a.size))
    hi = np.minimum(b[None, :], x + rho) if window else np.broadcast_to(b[None, :], (r.size, a.size))
    valid = lo <= hi
    stationary = x - np.sign(m)[None, :] * eps * np.abs(m)[None, :] ** (1.0 / (qh - 1))
    s = np.clip(stationary, lo, hi)
    obj = v.values[:-1][None, :] + m[None, :] * (s - a[None, :]) + kernel(x - s, config)
    obj = np.where(valid, obj, np.inf)
    best = np.argmin(obj, axis=1)
    rows = np.arange(r.size)
    values = obj[rows, best]
    argmin = s[rows, best]
    # a node is always a feasible candidate for itself
    own = values > v.values
    values[own] = v.values[own]
    argmin[own] = r[own]
    return InfConvResult(DiscreteFunction(mesh, values), argmin, rho, config, saturated)


def inf_conv_derivative_formula(result: InfConvResult) -> np.ndarray:
    """``(r - r_eps) |r - r_eps|^(qh-2) / eps^(qh-1)`` at every node."""
    cfg = result.config
    diff = result.values.mesh.nodes - result.argmin
    return diff * np.abs(diff) ** (cfg.q_hat - 2) / cfg.epsilon ** (cfg.q_hat - 1)


def centered_differences(v: DiscreteFunction):
    """Centered first and second differences at the interior nodes."""
    r, y = v.mesh.nodes, v.values
    hm = r[1:-1] - r[:-2]
    hp = r[2:] - r[1:-1]
    sm = (y[1:-1] - y[:-2]) / hm
    sp = (y[2:] - y[1:-1]) / hp
    first = (hm * sp + hp * sm) / (hm + hp)
    second = 2.0 * (sp - sm) / (hm + hp)
    return first, second


@dataclass(frozen=True)
class SemiconcavityReport:
    passed: bool
    worst_margin: float
    worst_radius: float


def semiconcavity_check(result: InfConvResult, rtol: float = 1e-9) -> SemiconcavityReport:
    """Second differences of ``v_eps`` against the one-sided Hessian bound.

    At a node ``r`` with minimizer ``r_eps``, ``v_eps`` is touched from above
    by ``v(r_eps) + kernel(. - r_eps)``, so the second difference over
    ``[r - h-, r + h+]`` is at most ``(qh-1) (|r - r_eps| + h)^(qh-2) / eps^(qh-1)``.
    At ``h = 0`` this is ``(qh-1)/eps |v_eps'|^((qh-2)/(qh-1))``.
    """
    cfg = result.config
    v = result.values
    r = v.mesh.nodes
    _, second = centered_differences(v)
    h = np.maximum(r[1:-1] - r[:-2], r[2:] - r[1:-1])
    dist = np.abs(r[1:-1] - result.argmin[1:-1]) + h
    bound = (cfg.q_hat - 1) * dist ** (cfg.q_hat - 2) / cfg.epsilon ** (cfg.q_hat - 1)
    # rounding in a second difference scales like eps |v| / h^2
    slack = rtol * (1.0 + np.max(np.abs(v.values))) / h**2
    margin = bound + slack - second
    k = int(np.argmin(margin))
    return SemiconcavityReport(bool(np.all(margin >= 0)), float(margin[k]), float(r[1 + k]))


def shifted_source_inf(f, mesh: Mesh1D, rho: float) -> np.ndarray:
    """``inf_{|r-s| <= rho} f(s)`` at every node, over the node samples."""
    r = mesh.nodes
    vals = f(r)
    inside = np.abs(r[:, None] - r[None, :]) <= rho
    return np.min(np.where(inside, vals[None, :], np.inf), axis=1)


def flat_point_violations(v: DiscreteFunction, f_values, q: float, tol: float = 1e-8) -> np.ndarray:
    """Interior nodes where ``v`` is flat and not convex but ``f > tol``.

    For ``q <= 2`` a supersolution has ``f <= 0`` wherever its derivative
    vanishes and it is twice differentiable.  Returns the offending radii.
    """
    if q > 2:
        return np.empty(0)
    first, second = centered_differences(v)
    flat = (np.abs(first) <= tol) & (second <= tol)
    bad = flat & (np.asarray(f_values)[1:-1] > tol)
    return v.mesh.nodes[1:-1][bad]


def radial_lift_derivatives(dv: float, d2v: float, r: float, N: int):
    """Gradient and Hessian of ``x -> v(|x|)`` at ``r e_1``."""
    grad = np.zeros(N)
    grad[0] = dv
    hess = np.diag([d2v] + [dv / r] * (N - 1))
    return grad, hess


def touching_derivative_check(grad, hess, r: float, tol: float = 1e-12) -> bool:
    """Necessary conditions at ``r e_1`` for a test function touching a radial ``u`` from below.

    Tangential first derivatives vanish and every tangential second
    derivative is at most ``D_1 phi / r``.
    """
    if r <= 0:
        raise ValueError("the touching-derivative conditions need r > 0")
    grad = np.asarray(grad, dtype=float)
    hess = np.asarray(hess, dtype=float)
    tangential = grad[1:]
    if np.any(np.abs(tangential) > tol):
        return False
    diag = np.diag(hess)[1:]
    return bool(np.all(diag <= grad[0] / r + tol))
