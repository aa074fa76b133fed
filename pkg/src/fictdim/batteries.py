"""Verification batteries run by ``fictdim verify``."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .exact import counterexample_profile, exact_regular_solution
from .harness import caccioppoli_check, comparison_check
from .params import DomainError, ProblemSpec, SourceTerm, derive_params
from .solver import SolverConfig, profile_weak_residual, solve
from .viscosity import InfConvConfig, inf_convolution, pointwise_residual, semiconcavity_check
from .weighted import Mesh1D, TestFunction


@dataclass(frozen=True)
class Check:
    name: str
    passed: bool
    detail: str

    def line(self) -> str:
        return f"{'PASS' if self.passed else 'FAIL'} {self.name}: {self.detail}"


def random_monomial_source(rng: np.random.Generator, terms: int | None = None) -> SourceTerm:
    """Non-negative monomial source with 1-3 terms, coefficients in [0.2, 2], exponents in [0, 3]."""
    n = terms or int(rng.integers(1, 4))
    return SourceTerm.monomial_sum([(rng.uniform(0.2, 2.0), rng.uniform(0.0, 3.0)) for _ in range(n)])


def counterexample_battery(spec: ProblemSpec, M: int = 256, grading: float = 2.0,
                           config: SolverConfig | None = None) -> list[Check]:
    if not spec.p > spec.N:
        raise DomainError(f"the counterexample needs p > N, got p={spec.p}, N={spec.N}")
    kappa = derive_params(spec).kappa
    zero = spec.with_source(SourceTerm.constant(0.0))
    prof = counterexample_profile(zero)
    mesh = Mesh1D.graded(spec.R, M, grading)
    res = profile_weak_residual(prof, mesh)
    interior = float(np.max(np.abs(res[1:])))
    origin = float(res[0])
    rel = abs(origin + kappa) / kappa
    checks = [
        Check("counterexample interior residual", interior <= 1e-6, f"max |res| = {interior:.3e}"),
        Check("counterexample origin residual", rel <= 1e-3,
              f"origin residual = {origin:.12g} (expected -kappa = {-kappa:.12g})"),
    ]
    f = spec.f if spec.f.sup_norm(spec.R) > 0 else SourceTerm.constant(1.0)
    report = solve(spec.with_source(f), mesh, config)
    checks.append(Check("solver origin flux", abs(report.origin_flux) <= 10.0 / M,
                        f"|origin flux| = {abs(report.origin_flux):.3e} <= {10.0 / M:.3e}"))
    return checks


def comparison_battery(spec: ProblemSpec, rng: np.random.Generator, trials: int = 20,
                       M: int = 128, config: SolverConfig | None = None) -> list[Check]:
    worst = -np.inf
    closest = -np.inf
    failures = 0
    mesh = Mesh1D.graded(spec.R, M)
    for _ in range(trials):
        f1 = random_monomial_source(rng)
        extra = random_monomial_source(rng, terms=1)
        f2 = SourceTerm.monomial_sum(list(f1.monomials) + list(extra.monomials))
        w = solve(spec.with_source(f1), mesh, config).solution
        v = solve(spec.with_source(f2), mesh, config).solution
        rep = comparison_check(w, v, tol=1e-9)
        worst = max(worst, rep.max_violation)
        closest = max(closest, float(np.max(w.values[:-1] - v.values[:-1])))
        failures += not rep.passed
    return [Check("comparison principle", failures == 0,
                  f"{trials} ordered pairs, {failures} violations, max(w - v) = {worst:.3e}, "
                  f"largest interior w - v = {closest:.3e}")]


def caccioppoli_battery(spec: ProblemSpec, rng: np.random.Generator, trials: int = 10,
                        M: int = 128, config: SolverConfig | None = None) -> list[Check]:
    mesh = Mesh1D.graded(spec.R, M)
    failures = 0
    worst = 0.0
    for _ in range(trials):
        f = random_monomial_source(rng)
        sp = spec.with_source(f)
        v = solve(sp, mesh, config).solution
        inner = rng.uniform(0.2, 0.6) * spec.R
        outer = inner + rng.uniform(0.1, 0.35) * spec.R
        xi = TestFunction.plateau(mesh, inner, outer)
        rep = caccioppoli_check(v, xi, sp)
        failures += not rep.passed
        worst = max(worst, rep.lhs / rep.rhs if rep.rhs > 0 else 0.0)
    return [Check("caccioppoli estimate", failures == 0,
                  f"{trials} trials, {failures} failures, worst lhs/rhs = {worst:.3e}")]


def infconv_battery(spec: ProblemSpec, M: int = 256, config: SolverConfig | None = None) -> list[Check]:
    mesh = Mesh1D.graded(spec.R, M, 1.0)
    v = solve(spec, mesh, config).solution
    checks = []
    gaps = []
    below = True
    local = True
    concave = True
    for eps in (0.2, 0.1, 0.05, 0.025):
        cfg = InfConvConfig.for_q(eps * spec.R, spec.q)
        res = inf_convolution(v, cfg)
        below &= bool(np.all(res.values.values <= v.values + 1e-15))
        local &= bool(np.all(np.abs(mesh.nodes - res.argmin) <= res.rho))
        concave &= semiconcavity_check(res).passed
        gaps.append(float(np.max(v.values - res.values.values)))
    checks.append(Check("inf-convolution below", below, "v_eps <= v at every node"))
    checks.append(Check("inf-convolution localization", local, "|r - r_eps| <= rho(eps)"))
    checks.append(Check("inf-convolution convergence", all(a >= b for a, b in zip(gaps, gaps[1:])),
                        "max gap " + ", ".join(f"{g:.3e}" for g in gaps)))
    checks.append(Check("inf-convolution semiconcavity", concave, "second differences within bound"))
    return checks


def residual_battery(spec: ProblemSpec, config: SolverConfig | None = None) -> list[Check]:
    maxima = []
    for M in (64, 128, 256):
        mesh = Mesh1D.graded(spec.R, M)
        v = solve(spec, mesh, config).solution
        r = np.linspace(0.2, 0.8, 25) * spec.R
        maxima.append(float(np.max(np.abs(pointwise_residual(v, r, spec)))))
    ok = all(a > b for a, b in zip(maxima, maxima[1:]))
    return [Check("pointwise residual refinement", ok, ", ".join(f"{m:.3e}" for m in maxima))]


def oracle_battery(spec: ProblemSpec, M: int = 256, config: SolverConfig | None = None) -> list[Check]:
    if not spec.f.is_monomial:
        return []
    mesh = Mesh1D.graded(spec.R, M)
    v = solve(spec, mesh, config).solution
    err = float(np.max(np.abs(v.values - exact_regular_solution(spec)(mesh.nodes))))
    return [Check("closed-form agreement", err <= 1e-3, f"max nodal error = {err:.3e} at M={M}")]


BATTERIES = ("counterexample", "comparison", "caccioppoli", "infconv", "residual", "oracle")


def run_battery(name: str, spec: ProblemSpec, rng: np.random.Generator,
                config: SolverConfig | None = None, M: int = 256,
                trials: int | None = None) -> list[Check]:
    if name == "counterexample":
        return counterexample_battery(spec, M=M, config=config)
    if name == "comparison":
        return comparison_battery(spec, rng, trials=trials or 20, config=config)
    if name == "caccioppoli":
        return caccioppoli_battery(spec, rng, trials=trials or 10, config=config)
    if name == "infconv":
        return infconv_battery(spec, M=M, config=config)
    if name == "residual":
        return residual_battery(spec, config=config)
    if name == "oracle":
        return oracle_battery(spec, M=M, config=config)
    raise ValueError(f"unknown battery {name!r}; choose from {', '.join(BATTERIES)} or all")

