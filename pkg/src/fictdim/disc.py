"""P1 finite elements for the q-Laplacian on a disc, the ``d = 2`` oracle.

The mesh is a structured polar triangulation: a centre node and
``rings`` concentric rings of ``sectors`` nodes each, all at the same
angles.  It is invariant under rotation by ``2 pi / sectors``, so for a
radial source the discrete solution is constant on every ring up to
rounding, which makes angular symmetry a checkable property.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .params import DomainError, ProblemSpec, derive_params
from .solver import NonConvergence, SolverConfig, WeakForm
from .weighted import DiscreteFunction, Mesh1D, write_csv


@dataclass(frozen=True, eq=False)
class DiscMesh2D:
    points: np.ndarray
    triangles: np.ndarray
    boundary: np.ndarray
    ring: np.ndarray
    ring_radii: np.ndarray

    @classmethod
    def polar(cls, R: float = 1.0, rings: int = 16, sectors: int = 32) -> "DiscMesh2D":
        theta = 2.0 * np.pi * np.arange(sectors) / sectors
        radii = R * np.arange(rings + 1) / rings
        pts = [np.zeros((1, 2))]
        for k in range(1, rings + 1):
            pts.append(np.column_stack([radii[k] * np.cos(theta), radii[k] * np.sin(theta)]))
        points = np.vstack(pts)

        def idx(k, j):
            return 1 + (k - 1) * sectors + (j % sectors)

        tris = []
        for j in range(sectors):
            tris.append((0, idx(1, j), idx(1, j + 1)))
        for k in range(1, rings):
            for j in range(sectors):
                a, b = idx(k, j), idx(k, j + 1)
                c, d = idx(k + 1, j + 1), idx(k + 1, j)
                tris.append((a, d, c))
                tris.append((a, c, b))
        tris = np.array(tris)
        p = points[tris]
        signed = ((p[:, 1, 0] - p[:, 0, 0]) * (p[:, 2, 1] - p[:, 0, 1])
                  - (p[:, 2, 0] - p[:, 0, 0]) * (p[:, 1, 1] - p[:, 0, 1]))
        flip = signed < 0
        tris[flip] = tris[flip][:, [0, 2, 1]]
        ring = np.concatenate([[0], np.repeat(np.arange(1, rings + 1), sectors)])
        boundary = ring == rings
        return cls(points, tris, boundary, ring, radii)

    @property
    def R(self) -> float:
        return float(self.ring_radii[-1])

    def gradients(self):
        """Barycentric gradients ``(T, 2, 3)`` and areas ``(T,)``."""
        p = self.points[self.triangles]
        e1 = p[:, 1] - p[:, 0]
        e2 = p[:, 2] - p[:, 0]
        det = e1[:, 0] * e2[:, 1] - e1[:, 1] * e2[:, 0]
        area = 0.5 * det
        # rows of inv([e1 e2]) give gradients of the 2nd and 3rd barycentrics
        g1 = np.column_stack([e2[:, 1], -e2[:, 0]]) / det[:, None]
        g2 = np.column_stack([-e1[:, 1], e1[:, 0]]) / det[:, None]
        g0 = -g1 - g2
        G = np.stack([g0, g1, g2], axis=2)
        return G, area


@dataclass
class DiscSolution:
    mesh: DiscMesh2D
    u: np.ndarray
    ring_profile: np.ndarray
    ring_spread: np.ndarray
    iterations: int

    @property
    def max_spread(self) -> float:
        return float(np.max(self.ring_spread))

    def as_radial(self) -> DiscreteFunction:
        return DiscreteFunction(Mesh1D(self.mesh.ring_radii), self.ring_profile)

    def to_csv(self) -> str:
        return write_csv({"x": self.mesh.points[:, 0], "y": self.mesh.points[:, 1], "u": self.u})


class DiscForm:
    """Regularized q-Laplacian energy and its derivatives on a disc mesh."""

    def __init__(self, spec: ProblemSpec, mesh: DiscMesh2D):
        kp = derive_params(spec)
        if abs(kp.d - 2.0) > 1e-12:
            raise DomainError(f"the disc oracle needs d = 2, got d={kp.d}")
        self.spec = spec
        self.q = spec.q
        self.kappa = kp.kappa
        self.mesh = mesh
        self.G, self.area = mesh.gradients()
        self.load = self._load()

    def _load(self):
        # edge-midpoint rule, exact for quadratics; f is scaled by 1/kappa
        tri = self.mesh.triangles
        p = self.mesh.points[tri]
        load = np.zeros(len(self.mesh.points))
        for i in range(3):
            j, k = (i + 1) % 3, (i + 2) % 3
            mids = [(p[:, i] + p[:, j]) / 2, (p[:, i] + p[:, k]) / 2]
            fvals = sum(self.spec.f(np.linalg.norm(m, axis=1)) for m in mids) / self.kappa
            np.add.at(load, tri[:, i], self.area / 3.0 * 0.5 * fvals)
        return load

    def grads(self, u):
        return np.einsum("tij,tj->ti", self.G, u[self.mesh.triangles])

    def energy(self, u, delta):
        s2 = np.sum(self.grads(u) ** 2, axis=1)
        dens = (s2 + delta) ** (self.q / 2) if delta > 0 else s2 ** (self.q / 2)
        return float(np.sum(self.area * dens) / self.q - self.load @ u)

    def residual(self, u, delta):
        g = self.grads(u)
        s2 = np.sum(g**2, axis=1)
        if delta > 0:
            coef = (s2 + delta) ** ((self.q - 2) / 2)
        else:
            with np.errstate(divide="ignore", invalid="ignore"):
                coef = np.where(s2 > 0, s2 ** ((self.q - 2) / 2), 0.0)
        flux = coef[:, None] * g
        local = self.area[:, None] * np.einsum("tij,ti->tj", self.G, flux)
        res = np.zeros(len(self.mesh.points))
        np.add.at(res, self.mesh.triangles, local)
        return res - self.load

    def jacobian(self, u, delta, floor):
        g = self.grads(u)
        s2 = np.sum(g**2, axis=1)
        base = (s2 + delta) ** ((self.q - 2) / 2)
        A = base[:, None, None] * (np.eye(2)[None] + (self.q - 2) * np.einsum("ti,tj->tij", g, g)
                                   / (s2 + delta)[:, None, None])
        A = A + floor * np.eye(2)[None]
        K = self.area[:, None, None] * np.einsum("tki,tkl,tlj->tij", self.G, A, self.G)
        tri = self.mesh.triangles
        rows = np.repeat(tri, 3, axis=1).ravel()
        cols = np.tile(tri, (1, 3)).ravel()
        n = len(self.mesh.points)
        return sp.csr_matrix((K.ravel(), (rows, cols)), shape=(n, n))


def ring_means(mesh: DiscMesh2D, u, weights):
    n = len(mesh.ring_radii)
    tot = np.bincount(mesh.ring, weights=weights * u, minlength=n)
    wsum = np.bincount(mesh.ring, weights=weights, minlength=n)
    mean = tot / wsum
    hi = np.full(n, -np.inf)
    lo = np.full(n, np.inf)
    np.maximum.at(hi, mesh.ring, u)
    np.minimum.at(lo, mesh.ring, u)
    return mean, hi - lo


def lumped_mass(mesh: DiscMesh2D) -> np.ndarray:
    _, area = mesh.gradients()
    m = np.zeros(len(mesh.points))
    np.add.at(m, mesh.triangles, np.repeat(area[:, None] / 3.0, 3, axis=1))
    return m


def disc_fem_solve(spec: ProblemSpec, mesh: DiscMesh2D | None = None,
                   config: SolverConfig | None = None) -> DiscSolution:
    """Solve ``-Delta_q u = f(|x|)/kappa`` on the disc with ``u = g`` on the boundary."""
    config = config or SolverConfig()
    mesh = mesh or DiscMesh2D.polar(spec.R)
    if abs(mesh.R - spec.R) > 1e-12 * spec.R:
        raise ValueError("disc radius differs from the problem radius")
    form = DiscForm(spec, mesh)
    free = ~mesh.boundary
    rad = np.linalg.norm(mesh.points, axis=1)
    fmax = spec.f.sup_norm(spec.R)
    top = spec.g + spec.R * (fmax / form.kappa) ** (1.0 / (spec.q - 1))
    u = top + (spec.g - top) * rad / spec.R
    u[mesh.boundary] = spec.g
    tol = config.newton_tol * (1.0 + fmax)
    total = 0
    for delta in config.schedule():
        res = form.residual(u, delta)[free]
        energy = form.energy(u, delta)
        for it in range(config.max_newton + 1):
            if np.max(np.abs(res)) <= tol:
                break
            if it == config.max_newton:
                raise NonConvergence(f"disc solve stalled at delta={delta:g}")
            J = form.jacobian(u, delta, config.delta_min)[free][:, free]
            step = spla.spsolve(J.tocsc(), -res)
            slope = float(res @ step)
            t = 1.0
            while True:
                trial = u.copy()
                trial[free] += t * step
                e = form.energy(trial, delta)
                if e <= energy + config.armijo_slope * t * slope + 1e-14 * (1 + abs(energy)):
                    break
                t *= config.backtrack
                if t < 1e-12:
                    raise NonConvergence(f"line search failed at delta={delta:g}")
            u, energy = trial, e
            res = form.residual(u, delta)[free]
            total += 1
    mean, spread = ring_means(mesh, u, lumped_mass(mesh))
    return DiscSolution(mesh, u, mean, spread, total)


def lifted_residual(v: DiscreteFunction, spec: ProblemSpec, mesh: DiscMesh2D) -> float:
    """2D weak residual of ``x -> v(|x|)`` against radial (ring-summed) hats.

    Normalized by the largest ring load.  Covers the centre and all interior rings.
    """
    form = DiscForm(spec, mesh)
    u = v(np.linalg.norm(mesh.points, axis=1))
    res = form.residual(u, 0.0)
    n = len(mesh.ring_radii)
    ring_res = np.bincount(mesh.ring, weights=res, minlength=n)[:-1]
    ring_load = np.bincount(mesh.ring, weights=form.load, minlength=n)[:-1]
    return float(np.max(np.abs(ring_res)) / np.max(np.abs(ring_load)))


def ring_profile_residual(sol: DiscSolution, spec: ProblemSpec) -> float:
    """1D weak residual of the ring-averaged 2D solution, normalized by the largest load."""
    v = sol.as_radial()
    form = WeakForm(spec, v.mesh)
    res = form.residual(v.values, 0.0)
    return float(np.max(np.abs(res)) / np.max(np.abs(form.load[:-1])))
