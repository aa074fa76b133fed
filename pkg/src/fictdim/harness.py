"""Cross-checks of the radial reduction against its higher-dimensional origins."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .params import ProblemSpec, derive_params
from .weighted import DiscreteFunction, Mesh1D, TestFunction, element_moments, gauss_points


@dataclass(frozen=True)
class ComparisonReport:
    max_violation: float
    passed: bool
    tol: float
    perturbation: str = ""


def comparison_check(w: DiscreteFunction, v: DiscreteFunction, tol: float = 1e-9,
                     perturbation: str = "") -> ComparisonReport:
    """Report ``max(w - v)`` over the nodes; passes when it is at most ``tol``.

    Unordered boundary values are not an error: they show up as a violation
    at the last node.
    """
    if not w.mesh.same_as(v.mesh):
        raise ValueError("comparison needs both functions on the same mesh")
    viol = float(np.max(w.values - v.values))
    return ComparisonReport(viol, viol <= tol, tol, perturbation)


@dataclass(frozen=True)
class CaccioppoliReport:
    lhs: float
    cutoff_term: float
    source_term: float
    constant: float
    sup_v: float

    @property
    def rhs(self) -> float:
        return self.constant * (self.cutoff_term + self.source_term)

    @property
    def passed(self) -> bool:
        return self.lhs <= self.rhs


def caccioppoli_constant(kappa: float, q: float, M: float) -> float:
    """Constant of the energy estimate, traced through its proof.

    Testing with ``(M - v) xi^q`` and using ``M - v <= 2M`` gives

        kappa L <= 2 M kappa q int |v'|^(q-1) |xi'| xi^(q-1) w + 2 M B.

    Young's inequality ``q a^(q-1) b <= e a^q + ((q-1)/e)^(q-1) b^q`` with
    ``e = 1/(4M)`` absorbs half of ``L`` into the left side, so
    ``L <= 4M ((q-1)/e)^(q-1) A + (4M/kappa) B``.
    """
    if M == 0:
        return 0.0
    e = 1.0 / (4.0 * M)
    young = ((q - 1) / e) ** (q - 1)
    return 4.0 * M * max(young, 1.0 / kappa)


def caccioppoli_check(v: DiscreteFunction, xi: TestFunction, spec: ProblemSpec) -> CaccioppoliReport:
    """Both sides of the energy estimate by weighted quadrature on the mesh of ``v``."""
    if not xi.function.mesh.same_as(v.mesh):
        raise ValueError("cutoff and solution must share a mesh")
    vals = xi.function.values
    if np.any(vals < 0) or np.max(vals) > 1 + 1e-12:
        raise ValueError("cutoff must take values in [0, 1]")
    kp = derive_params(spec)
    q = spec.q
    mesh = v.mesh
    pts, wts = gauss_points(mesh)
    weight = pts ** (kp.d - 1) * wts
    xi_pts = xi.function(pts)
    slope = v.slopes[:, None]
    lhs = float(np.sum(np.abs(slope) ** q * xi_pts**q * weight))
    cutoff_term = float(np.sum(np.abs(xi.function.slopes) ** q * element_moments(mesh, kp.d)))
    source_term = float(np.sum(xi_pts**q * np.abs(spec.f(pts)) * weight))
    support = mesh.nodes < xi.support_end
    M = float(np.max(np.abs(v.values[support])))
    C = caccioppoli_constant(kp.kappa, q, M)
    return CaccioppoliReport(lhs, cutoff_term, source_term, C, M)


def sphere_area(d: int) -> float:
    """Surface measure of the unit sphere in ``R^d``."""
    return 2.0 * math.pi ** (d / 2) / math.gamma(d / 2)


@dataclass(frozen=True)
class IntegrationIdentity:
    mc_estimate: float
    exact: float
    stderr: float

    @property
    def z(self) -> float:
        return abs(self.mc_estimate - self.exact) / self.stderr if self.stderr > 0 else 0.0


def radial_integration_identity(g, d: int, samples: int = 10**6, R: float = 1.0,
                                seed: int = 0, chunk: int = 200_000) -> IntegrationIdentity:
    """Monte Carlo ``int_{B_R} g(|x|) dx`` against ``|S^{d-1}| int_0^R g(r) r^(d-1) dr``."""
    if d not in (2, 3, 4, 5):
        raise ValueError(f"unsupported dimension d={d}")
    rng = np.random.default_rng(seed)
    vol = (2.0 * R) ** d
    total = 0.0
    total_sq = 0.0
    done = 0
    while done < samples:
        n = min(chunk, samples - done)
        x = rng.uniform(-R, R, size=(n, d))
        rad = np.linalg.norm(x, axis=1)
        vals = np.where(rad < R, g(rad), 0.0) * vol
        total += vals.sum()
        total_sq += (vals**2).sum()
        done += n
    mean = total / samples
    var = max(total_sq / samples - mean**2, 0.0)
    stderr = math.sqrt(var / samples)
    mesh = Mesh1D.graded(R, 64, 1.0)
    pts, wts = gauss_points(mesh, 10)
    exact = sphere_area(d) * float(np.sum(g(pts) * pts ** (d - 1) * wts))
    return IntegrationIdentity(mean, exact, stderr)


def gradient_lift_identity(v: DiscreteFunction, x, h: float = 1e-5) -> float:
    """Max component gap between the finite-difference gradient of ``v(|y|)`` and ``x/|x| v'(|x|)``."""
    x = np.asarray(x, dtype=float)
    rad = float(np.linalg.norm(x))
    if rad == 0:
        raise ValueError("the gradient identity is stated away from the origin")
    if rad >= v.mesh.R:
        raise ValueError("point outside the ball")
    fd = np.empty_like(x)
    for i in range(x.size):
        e = np.zeros_like(x)
        e[i] = h
        fd[i] = (v(np.linalg.norm(x + e)) - v(np.linalg.norm(x - e))) / (2 * h)
    exact = x / rad * float(v.derivative(rad))
    return float(np.max(np.abs(fd - exact)))
