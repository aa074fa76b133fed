"""Meshes, piecewise-linear functions and the weighted norms on ``(0, R)``.

The weight is ``r^(d-1)`` with a real ``d > 1``.  Everything here works on
continuous piecewise-linear nodal functions; their derivatives are
piecewise constant, so weighted integrals of ``|v'|^q`` against the bare
weight are exact through :func:`weight_moment`.
"""

from __future__ import annotations

import io
from dataclasses import dataclass

import numpy as np

GAUSS_ORDER = 5


@dataclass(frozen=True, eq=False)
class Mesh1D:
    nodes: np.ndarray
    grading: float = 1.0

    def __post_init__(self):
        nodes = np.asarray(self.nodes, dtype=float)
        if nodes.ndim != 1 or nodes.size < 3:
            raise ValueError("mesh needs at least M = 2 elements")
        if nodes[0] != 0.0:
            raise ValueError("mesh must start at r = 0 exactly")
        if np.any(np.diff(nodes) <= 0):
            raise ValueError("mesh nodes must be strictly increasing")
        nodes.setflags(write=False)
        object.__setattr__(self, "nodes", nodes)

    @classmethod
    def graded(cls, R: float, M: int, grading: float = 2.0) -> "Mesh1D":
        """Power-graded mesh ``r_i = R (i/M)^grading``, clustered at the origin."""
        if grading < 1:
            raise ValueError("grading exponent must be >= 1")
        t = np.arange(M + 1) / M
        nodes = R * t**grading
        nodes[-1] = R
        return cls(nodes, grading)

    @property
    def M(self) -> int:
        return self.nodes.size - 1

    @property
    def R(self) -> float:
        return float(self.nodes[-1])

    @property
    def h(self) -> np.ndarray:
        return np.diff(self.nodes)

    def same_as(self, other: "Mesh1D") -> bool:
        return self.nodes.shape == other.nodes.shape and np.array_equal(self.nodes, other.nodes)


@dataclass(frozen=True, eq=False)
class DiscreteFunction:
    mesh: Mesh1D
    values: np.ndarray

    def __post_init__(self):
        values = np.array(self.values, dtype=float)
        if values.shape != self.mesh.nodes.shape:
            raise ValueError(f"expected {self.mesh.nodes.size} nodal values, got {values.shape}")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    @classmethod
    def interpolate(cls, func, mesh: Mesh1D) -> "DiscreteFunction":
        return cls(mesh, np.asarray(func(mesh.nodes), dtype=float) * np.ones(mesh.nodes.size))

    @property
    def slopes(self) -> np.ndarray:
        return np.diff(self.values) / self.mesh.h

    def __call__(self, r):
        return np.interp(r, self.mesh.nodes, self.values)

    def derivative(self, r):
        """Element slope at ``r``; at a node the slope of the element to the right."""
        r = np.asarray(r, dtype=float)
        idx = np.clip(np.searchsorted(self.mesh.nodes, r, side="right") - 1, 0, self.mesh.M - 1)
        return self.slopes[idx]

    def __mul__(self, c: float) -> "DiscreteFunction":
        return DiscreteFunction(self.mesh, c * self.values)

    __rmul__ = __mul__

    def __sub__(self, other: "DiscreteFunction") -> "DiscreteFunction":
        if not self.mesh.same_as(other.mesh):
            raise ValueError("mesh mismatch")
        return DiscreteFunction(self.mesh, self.values - other.values)

    def to_csv(self, extra: dict | None = None) -> str:
        return write_csv({"r": self.mesh.nodes, "v": self.values, **(extra or {})})


@dataclass(frozen=True, eq=False)
class TestFunction:
    """Non-negative cutoff with support in ``[0, support_end]``, ``support_end < R``."""

    function: DiscreteFunction
    support_end: float
    admits_origin: bool = True

    __test__ = False  # keep pytest from collecting this class

    def __post_init__(self):
        mesh = self.function.mesh
        if not self.support_end < mesh.R:
            raise ValueError("test function support must end before R")
        outside = mesh.nodes >= self.support_end
        if np.any(self.function.values[outside] != 0.0):
            raise ValueError("test function does not vanish on [R', R]")
        if not self.admits_origin and self.function.values[0] != 0.0:
            raise ValueError("test function must vanish at the origin")

    @classmethod
    def hat(cls, mesh: Mesh1D, i: int) -> "TestFunction":
        if not 0 <= i < mesh.M:
            raise ValueError("hat index must be a non-Dirichlet node")
        values = np.zeros(mesh.M + 1)
        values[i] = 1.0
        return cls(DiscreteFunction(mesh, values), float(mesh.nodes[i + 1]), admits_origin=i == 0)

    @classmethod
    def plateau(cls, mesh: Mesh1D, inner: float, outer: float) -> "TestFunction":
        """Cutoff equal to 1 on ``[0, inner]`` with a C^1 cosine taper to 0 at ``outer``."""
        if not 0 < inner < outer < mesh.R:
            raise ValueError("need 0 < inner < outer < R")
        r = mesh.nodes
        t = np.clip((r - inner) / (outer - inner), 0.0, 1.0)
        values = 0.5 * (1.0 + np.cos(np.pi * t))
        values[r >= outer] = 0.0
        return cls(DiscreteFunction(mesh, values), outer, admits_origin=True)


def weight_moment(a: float, b: float, d: float) -> float:
    """Exact ``int_a^b r^(d-1) dr``."""
    if not a < b:
        raise ValueError(f"need a < b, got a={a}, b={b}")
    return (b**d - a**d) / d


def element_moments(mesh: Mesh1D, d: float) -> np.ndarray:
    r = mesh.nodes
    return (r[1:] ** d - r[:-1] ** d) / d


def gauss_points(mesh: Mesh1D, order: int = GAUSS_ORDER):
    """Quadrature points and weights on every element, shape ``(M, order)``."""
    x, w = np.polynomial.legendre.leggauss(order)
    a = mesh.nodes[:-1, None]
    h = mesh.h[:, None]
    pts = a + 0.5 * h * (x[None, :] + 1.0)
    wts = 0.5 * h * w[None, :]
    return pts, wts


def weighted_integral(func, mesh: Mesh1D, d: float, order: int = GAUSS_ORDER) -> float:
    """Element-wise Gauss quadrature of ``func(r) r^(d-1)`` over ``(0, R)``."""
    pts, wts = gauss_points(mesh, order)
    return float(np.sum(func(pts) * pts ** (d - 1) * wts))


def weighted_lq_norm(v: DiscreteFunction, q: float, d: float) -> float:
    return weighted_integral(lambda r: np.abs(v(r)) ** q, v.mesh, d) ** (1.0 / q)


def derivative_lq_norm(v: DiscreteFunction, q: float, d: float) -> float:
    """Weighted ``L^q`` norm of ``v'``; exact since ``v'`` is piecewise constant."""
    return float(np.sum(np.abs(v.slopes) ** q * element_moments(v.mesh, d)) ** (1.0 / q))


def weighted_w1q_norm(v: DiscreteFunction, q: float, d: float) -> float:
    return (weighted_lq_norm(v, q, d) ** q + derivative_lq_norm(v, q, d) ** q) ** (1.0 / q)


def unweighted_lq_norm(v: DiscreteFunction, q: float) -> float:
    return weighted_lq_norm(v, q, 1.0)


def positive_part(v: DiscreteFunction) -> DiscreteFunction:
    """``max(v, 0)`` with a node inserted at every interior zero crossing.

    The returned function lives on a refined mesh, on which it is exactly
    the pointwise positive part of ``v``; in particular its derivative equals
    ``v'`` where ``v > 0`` and vanishes where ``v <= 0``.
    """
    r, y = v.mesh.nodes, v.values
    crossing = np.nonzero(y[:-1] * y[1:] < 0)[0]
    roots = r[crossing] - y[crossing] * (r[crossing + 1] - r[crossing]) / (y[crossing + 1] - y[crossing])
    # the root can round onto a neighbouring node; drop those
    roots = roots[(roots > r[crossing]) & (roots < r[crossing + 1])]
    nodes = np.sort(np.concatenate([r, roots]))
    values = np.interp(nodes, r, y)
    values[np.isin(nodes, roots)] = 0.0
    return DiscreteFunction(Mesh1D(nodes, v.mesh.grading), np.maximum(values, 0.0))


def translation_error(v: DiscreteFunction, lam: float, q: float, d: float) -> float:
    """Weighted ``W^{1,q}`` distance between ``v(. + lam)`` and ``v``.

    ``v`` is extended by the constant ``v(R)`` to the right of ``R``.  The
    integrals run over the union of both meshes so the integrands are
    piecewise polynomial on every sub-element.
    """
    R = v.mesh.R
    if not 0 <= lam < R:
        raise ValueError(f"need 0 <= lambda < R, got {lam}")
    if lam == 0:
        return 0.0
    r = v.mesh.nodes
    shifted = r - lam
    nodes = np.unique(np.concatenate([r, shifted[shifted > 0]]))
    mesh = Mesh1D(nodes)

    def diff(x):
        return np.interp(x + lam, r, v.values) - np.interp(x, r, v.values)

    value_part = weighted_integral(lambda x: np.abs(diff(x)) ** q, mesh, d)
    mid = 0.5 * (nodes[:-1] + nodes[1:])
    dslope = v.derivative(mid + lam) * (mid + lam < R) - v.derivative(mid)
    deriv_part = float(np.sum(np.abs(dslope) ** q * element_moments(mesh, d)))
    return (value_part + deriv_part) ** (1.0 / q)


def write_csv(columns: dict) -> str:
    """Render equal-length columns as CSV with 17 significant digits."""
    names = list(columns)
    data = [np.asarray(columns[n], dtype=float) for n in names]
    buf = io.StringIO()
    buf.write(",".join(names) + "\n")
    for row in zip(*data):
        buf.write(",".join(f"{x:.17g}" for x in row) + "\n")
    return buf.getvalue()


def read_csv(text: str) -> dict:
    lines = [ln for ln in text.strip().splitlines() if ln]
    names = lines[0].split(",")
    rows = np.array([[float(x) for x in ln.split(",")] for ln in lines[1:]])
    return {n: rows[:, i] for i, n in enumerate(names)}


def function_from_csv(text: str) -> DiscreteFunction:
    cols = read_csv(text)
    return DiscreteFunction(Mesh1D(cols["r"]), cols["v"])
