"""Piecewise-linear finite elements for the weighted radial equation.

The discrete problem tests against every hat function except the one at
``r = R`` (Dirichlet node).  Keeping the hat at the origin is what imposes
the natural zero-flux condition there: a profile like ``r^(1-a)/(1-a)``
passes every interior test yet leaves a residual ``-kappa`` on the origin
hat.  Dropping that row would admit such profiles as solutions.

The flux ``|v'|^{q-2} v'`` is regularized to ``(|v'|^2 + delta)^{(q-2)/2} v'``
and ``delta`` is driven to ``delta_min`` by continuation.  Each stage is a
damped Newton iteration on the (strictly convex) regularized energy

    J(v) = sum_e kappa/q (s_e^2 + delta)^{q/2} |w_e| - int f v r^{d-1} dr,

where ``s_e`` is the slope and ``|w_e|`` the weight mass of element ``e``.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .exact import exact_regular_solution, signed_power
from .params import ProblemSpec, derive_params
from .weighted import GAUSS_ORDER, DiscreteFunction, Mesh1D, element_moments, gauss_points

log = logging.getLogger(__name__)


class NonConvergence(RuntimeError):
    def __init__(self, message, report=None):
        super().__init__(message)
        self.report = report


class DegenerateJacobian(RuntimeError):
    pass


@dataclass(frozen=True)
class SolverConfig:
    delta_init: float = 1.0
    delta_factor: float = 0.1
    delta_min: float = 1e-10
    newton_tol: float = 1e-10
    max_newton: int = 50
    armijo_slope: float = 1e-4
    backtrack: float = 0.5

    def __post_init__(self):
        for name in ("delta_init", "delta_min", "newton_tol", "armijo_slope", "backtrack"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if not 0 < self.delta_factor < 1:
            raise ValueError("delta_factor must lie in (0, 1)")
        if not 0 < self.backtrack < 1:
            raise ValueError("backtrack must lie in (0, 1)")
        if self.max_newton < 1:
            raise ValueError("max_newton must be >= 1")

    def schedule(self) -> list[float]:
        deltas = []
        delta = self.delta_init
        while delta > self.delta_min * (1 + 1e-12):
            deltas.append(delta)
            delta *= self.delta_factor
        deltas.append(self.delta_min)
        return deltas


@dataclass
class Stage:
    delta: float
    iterations: int = 0
    residuals: list = field(default_factory=list)
    energies: list = field(default_factory=list)

    @property
    def final_residual(self) -> float:
        return self.residuals[-1]


@dataclass
class SolveReport:
    solution: DiscreteFunction
    stages: list
    origin_flux: float
    energy: float
    converged: bool = True

    def summary(self) -> str:
        """Text block; floats use the shortest repr that round-trips."""
        lines = [f"converged = {self.converged}",
                 f"origin_flux = {float(self.origin_flux)!r}",
                 f"energy = {float(self.energy)!r}",
                 "[stages]",
                 "delta,iterations,final_residual"]
        for st in self.stages:
            lines.append(f"{float(st.delta)!r},{st.iterations},{float(st.final_residual)!r}")
        return "\n".join(lines) + "\n"


class WeakForm:
    """Discrete weak form of the radial equation on a fixed mesh."""

    def __init__(self, spec: ProblemSpec, mesh: Mesh1D):
        if abs(mesh.R - spec.R) > 1e-12 * spec.R:
            raise ValueError(f"mesh ends at {mesh.R}, problem radius is {spec.R}")
        self.spec = spec
        self.mesh = mesh
        kp = derive_params(spec)
        self.kappa, self.d, self.q = kp.kappa, kp.d, spec.q
        self.h = mesh.h
        self.moments = element_moments(mesh, self.d)
        self.load = self._assemble_load()

    def _assemble_load(self) -> np.ndarray:
        pts, wts = gauss_points(self.mesh, GAUSS_ORDER)
        w = wts * self.spec.f(pts) * pts ** (self.d - 1)
        t = (pts - self.mesh.nodes[:-1, None]) / self.h[:, None]
        load = np.zeros(self.mesh.M + 1)
        load[:-1] += np.sum(w * (1.0 - t), axis=1)
        load[1:] += np.sum(w * t, axis=1)
        return load

    def element_flux(self, values, delta):
        """``kappa a_delta(s) s |w_e| / h_e`` per element."""
        s = np.diff(values) / self.h
        if delta == 0:
            flux = signed_power(s, self.q - 1)
        else:
            flux = (s * s + delta) ** ((self.q - 2) / 2) * s
        return self.kappa * flux * self.moments / self.h

    def full_residual(self, values, delta):
        """Weak residual tested against every hat, the Dirichlet one included."""
        t = self.element_flux(values, delta)
        res = -self.load.copy()
        res[:-1] -= t
        res[1:] += t
        return res

    def residual(self, values, delta):
        return self.full_residual(values, delta)[:-1]

    def stiffness(self, values, delta, floor):
        s = np.diff(values) / self.h
        s2 = s * s
        c = (s2 + delta) ** ((self.q - 2) / 2) * (1 + (self.q - 2) * s2 / (s2 + delta))
        c = np.maximum(c, floor)
        return self.kappa * c * self.moments / self.h**2

    def newton_step(self, values, res, delta, floor):
        """Solve ``J step = -res`` on the free nodes.

        ``J`` is a weighted 1D stiffness matrix with a natural row at the
        origin, so the element fluxes of the step are partial sums of the
        residual and the step follows by summing back from the Dirichlet
        node.  LU on the banded form loses everything to cancellation once
        the weight spans many decades (large ``d``).
        """
        k = self.stiffness(values, delta, floor)
        partial = np.cumsum(res)
        # at very large d the weight underflows near the origin; such
        # elements carry no load either and are simply decoupled
        void = (k == 0) & (partial == 0)
        if not np.all(np.isfinite(k)) or np.any((k <= 0) & ~void):
            raise DegenerateJacobian(f"non-positive element stiffness at delta={delta:g}")
        increments = np.divide(partial, k, out=np.zeros_like(partial), where=~void)
        if self.q < 2:
            # the energy is separable in the element slopes, so rescaling single
            # increments keeps a descent direction.  For q < 2 the flux is concave
            # in |s| and a full step from a steep slope lands on roughly -s, so a
            # step through zero is stopped at zero.
            jumps = np.diff(values)
            crossing = (increments * jumps < 0) & (np.abs(increments) > np.abs(jumps))
            increments = np.where(crossing, -jumps, increments)
        step = -np.cumsum(increments[::-1])[::-1]
        if not np.all(np.isfinite(step)):
            raise DegenerateJacobian(f"non-finite Newton step at delta={delta:g}")
        return step

    def energy(self, values, delta):
        s = np.diff(values) / self.h
        if delta == 0:
            density = np.abs(s) ** self.q
        else:
            density = (s * s + delta) ** (self.q / 2)
        return float(self.kappa / self.q * np.sum(density * self.moments) - self.load @ values)

    def energy_scale(self, values, delta):
        s = np.diff(values) / self.h
        return float(self.kappa / self.q * np.sum((s * s + delta) ** (self.q / 2) * self.moments)
                     + np.abs(self.load) @ np.abs(values))


def assemble_weak_residual(v: DiscreteFunction, spec: ProblemSpec, delta: float = 0.0) -> np.ndarray:
    """Weak residual of ``v`` tested against hats ``0..M-1``."""
    return WeakForm(spec, v.mesh).residual(v.values, delta)


def profile_weak_residual(profile, mesh: Mesh1D, order: int = 8) -> np.ndarray:
    """Weak residual of an exact profile against hats ``0..M-1``.

    Uses the profile's analytic flux, so a constant flux is integrated
    exactly against the piecewise-constant hat derivatives.
    """
    spec = profile.spec
    form = WeakForm(spec, mesh)
    pts, wts = gauss_points(mesh, order)
    mean_flux = np.sum(profile.flux(pts) * wts, axis=1) / mesh.h
    t = mean_flux
    res = -form.load.copy()
    res[:-1] -= t
    res[1:] += t
    return res[:-1]


def initial_guess(spec: ProblemSpec, mesh: Mesh1D) -> np.ndarray:
    """Linear interpolant from ``g + v0`` at the origin to ``g`` at ``R``.

    ``v0`` is the centre value of the exact solution for the constant source
    ``sup|f|``, signed by the mean of ``f``.
    """
    kp = derive_params(spec)
    q, R = spec.q, spec.R
    fmax = spec.f.sup_norm(R)
    sign = np.sign(np.mean(spec.f(mesh.nodes))) or 1.0
    v0 = R * (fmax * R / (kp.kappa * kp.d)) ** (1.0 / (q - 1)) * (q - 1) / q
    top = spec.g + sign * v0
    return top + (spec.g - top) * mesh.nodes / R


def _newton_stage(form: WeakForm, values, stage: Stage, config: SolverConfig, tol: float):
    delta = stage.delta
    res = form.residual(values, delta)
    energy = form.energy(values, delta)
    stage.residuals.append(float(np.max(np.abs(res))))
    stage.energies.append(energy)
    for _ in range(config.max_newton):
        step = form.newton_step(values, res, delta, config.delta_min)
        if stage.residuals[-1] <= tol:
            # the residual carries the weight r^(d-1), which at large d leaves
            # nodes near the origin loosely determined; keep polishing until
            # the Newton correction is negligible as well
            if np.max(np.abs(step)) <= config.newton_tol * (1.0 + np.max(np.abs(values))):
                return values, True
        slope = float(res @ step)
        slack = 16 * np.finfo(float).eps * form.energy_scale(values, delta)
        t = 1.0
        while True:
            trial = values.copy()
            trial[:-1] += t * step
            trial_energy = form.energy(trial, delta)
            if trial_energy <= energy + config.armijo_slope * t * slope + slack:
                break
            t *= config.backtrack
            if t < 1e-12:
                # energy is flat to rounding: fall back to the full step if it
                # reduces the residual, otherwise stop
                trial = values.copy()
                trial[:-1] += step
                trial_energy = form.energy(trial, delta)
                trial_res = form.residual(trial, delta)
                if np.max(np.abs(trial_res)) >= stage.residuals[-1]:
                    return values, stage.residuals[-1] <= tol
                break
        trial_res = form.residual(trial, delta)
        if stage.residuals[-1] <= tol < np.max(np.abs(trial_res)):
            return values, True
        values = trial
        res = trial_res
        energy = trial_energy
        stage.iterations += 1
        stage.residuals.append(float(np.max(np.abs(res))))
        stage.energies.append(energy)
    return values, stage.residuals[-1] <= tol


def solve(spec: ProblemSpec, mesh: Mesh1D, config: SolverConfig | None = None,
          initial: np.ndarray | None = None) -> SolveReport:
    """Solve the weak problem with Dirichlet value ``spec.g`` at ``r = R``."""
    config = config or SolverConfig()
    form = WeakForm(spec, mesh)
    values = np.array(initial if initial is not None else initial_guess(spec, mesh), dtype=float)
    # iterate on v - g: the weak form only sees differences, and near the
    # origin the stiffness is large enough that one ulp of g would show up
    # in the residual
    shift = spec.g
    values = values - shift
    values[-1] = 0.0
    offset = -shift * float(np.sum(form.load))
    tol = config.newton_tol * (1.0 + spec.f.sup_norm(spec.R))
    stages = []
    retried = False
    schedule = config.schedule()
    k = 0
    while k < len(schedule):
        stage = Stage(schedule[k])
        try:
            values, ok = _newton_stage(form, values, stage, config, tol)
        except DegenerateJacobian:
            if retried or k == 0:
                raise
            retried = True
            log.warning("degenerate Jacobian at delta=%g, retrying at delta=%g",
                        schedule[k], schedule[k - 1])
            schedule.insert(k, schedule[k - 1])
            continue
        stage.energies = [e + offset for e in stage.energies]
        stages.append(stage)
        log.debug("delta=%g iterations=%d residual=%.3e", stage.delta, stage.iterations,
                  stage.final_residual)
        if not ok:
            report = _report(form, values, stages, shift, converged=False)
            raise NonConvergence(
                f"stage delta={stage.delta:g} stopped at residual {stage.final_residual:.3e} "
                f"> {tol:.3e}", report)
        k += 1
    return _report(form, values, stages, shift, converged=True)


def _report(form: WeakForm, shifted, stages, shift, converged) -> SolveReport:
    # variational flux recovery: the unregularized residual on the origin hat
    origin_flux = -float(form.full_residual(shifted, 0.0)[0])
    values = shifted + shift
    values[-1] = shift
    return SolveReport(DiscreteFunction(form.mesh, values), stages, origin_flux,
                       form.energy(values, 0.0), converged)


@dataclass(frozen=True)
class RefinementRow:
    M: int
    error: float
    rate: float | None


def refine_and_solve(spec: ProblemSpec, levels: int, config: SolverConfig | None = None,
                     M0: int = 32, grading: float = 2.0) -> list[RefinementRow]:
    """Max-nodal-error sequence over ``M0, 2 M0, ...``.

    Errors are measured against the closed-form solution for monomial
    sources, otherwise against a solve two levels finer than the last one.
    """
    if levels < 2:
        raise ValueError("need at least 2 refinement levels")
    Ms = [M0 * 2**k for k in range(levels)]
    if spec.f.is_monomial:
        exact = exact_regular_solution(spec)
        reference = exact.value
    else:
        fine = solve(spec, Mesh1D.graded(spec.R, Ms[-1] * 4, grading), config).solution
        reference = fine
    rows = []
    prev = None
    for M in Ms:
        mesh = Mesh1D.graded(spec.R, M, grading)
        sol = solve(spec, mesh, config).solution
        err = float(np.max(np.abs(sol.values - reference(mesh.nodes))))
        rate = None
        if prev is not None and err > 0 and prev > 0:
            rate = float(np.log2(prev / err))
        rows.append(RefinementRow(M, err, rate))
        prev = err
    return rows
