import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from fictdim.exact import (
    adaptive_simpson, counterexample_profile, exact_regular_solution, fundamental_profile,
    strong_residual,
)
from fictdim.params import DomainError, ProblemSpec, SourceTerm, derive_params
from fictdim.weighted import DiscreteFunction, Mesh1D, derivative_lq_norm

ZERO = SourceTerm.constant(0.0)


def fd_divergence_residual(profile, r, h=1e-3):
    """-kappa (|v'|^{q-2} v' r^{d-1})' - f r^{d-1} with v' and the outer derivative by 4th-order differences of v."""
    kp = derive_params(profile.spec)
    q = profile.spec.q

    def dv(x):
        return (-profile(x + 2 * h) + 8 * profile(x + h) - 8 * profile(x - h) + profile(x - 2 * h)) / (12 * h)

    def flux(x):
        g = dv(x)
        return kp.kappa * np.sign(g) * np.abs(g) ** (q - 1) * x ** (kp.d - 1)

    H = 10 * h
    dflux = (-flux(r + 2 * H) + 8 * flux(r + H) - 8 * flux(r - H) + flux(r - 2 * H)) / (12 * H)
    return -dflux - profile.spec.f(r) * r ** (kp.d - 1)


def test_adaptive_simpson():
    assert adaptive_simpson(math.sin, 0, math.pi) == pytest.approx(2.0, abs=1e-10)
    assert adaptive_simpson(math.sqrt, 0, 1) == pytest.approx(2 / 3, abs=1e-9)


def test_poisson_disc_solution():
    s = ProblemSpec(2, 2, 2, 1.0, SourceTerm.constant(2.0))
    prof = exact_regular_solution(s)
    r = np.linspace(0, 1, 17)
    np.testing.assert_allclose(prof(r), (1 - r**2) / 2, atol=1e-11)
    np.testing.assert_allclose(fd_divergence_residual(prof, np.array([0.3, 0.5, 0.7])), 0, atol=1e-6)


def test_zero_source_is_constant():
    s = ProblemSpec(3.5, 1.7, 4, 2.0, ZERO, g=1.25)
    prof = exact_regular_solution(s)
    r = np.linspace(0, 2, 9)
    assert np.all(prof(r) == 1.25)
    assert np.all(prof.deriv(r) == 0)


def test_degenerate_closed_form():
    s = ProblemSpec(3, 3, 2, 1.0, SourceTerm.constant(3.0))
    prof = exact_regular_solution(s)
    r = np.linspace(0, 1, 33)
    expect = (2 / 3) * math.sqrt(1.5) * (1 - r**1.5)
    np.testing.assert_allclose(prof(r), expect, atol=1e-10)
    assert prof(0.0) == pytest.approx(0.81650, abs=1e-5)
    np.testing.assert_allclose(fd_divergence_residual(prof, np.array([0.3, 0.5, 0.7])), 0, atol=1e-6)


def test_rejects_non_monomial():
    s = ProblemSpec(2, 2, 2, 1.0, SourceTerm.from_callable(np.cos))
    with pytest.raises(DomainError):
        exact_regular_solution(s)


@pytest.mark.parametrize("p, q, N, terms", [
    (2, 2, 2, [(2, 0)]),
    (3, 2, 3, [(1, 0)]),
    (4, 4, 2, [(1, 0), (2, 1.5)]),
    (1.6, 3.2, 3, [(0.5, 2)]),
    (5, 1.5, 2, [(1, 0.5)]),
])
def test_regular_profile_satisfies_strong_form(p, q, N, terms):
    s = ProblemSpec(p, q, N, 1.0, SourceTerm.monomial_sum(terms))
    prof = exact_regular_solution(s)
    r = np.linspace(0.1, 0.9, 9)
    np.testing.assert_allclose(strong_residual(prof, r), 0, atol=1e-8)
    res = fd_divergence_residual(prof, r)
    np.testing.assert_allclose(res, 0, atol=1e-5 * (1 + np.max(np.abs(s.f(r)))))
    assert abs(prof.flux(1e-8)) < 1e-12


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2**32 - 1), st.floats(1.3, 4), st.floats(1.3, 4), st.integers(2, 4))
def test_oracle_respects_source_ordering(seed, p, q, N):
    rng = np.random.default_rng(seed)
    terms = [(rng.uniform(-1, 2), rng.uniform(0, 3)) for _ in range(2)]
    extra = (rng.uniform(0.1, 2), rng.uniform(0, 3))
    lo = ProblemSpec(p, q, N, 1.0, SourceTerm.monomial_sum([t for t in terms if t[0] > 0] or [(0, 0)]))
    hi = lo.with_source(SourceTerm.monomial_sum(list(lo.f.monomials) + [extra]))
    r = np.linspace(0, 1, 21)
    assert np.all(exact_regular_solution(lo)(r) <= exact_regular_solution(hi)(r) + 1e-12)


def counterexample_spec():
    return ProblemSpec(3, 2, 2, 1.0, ZERO)


def test_counterexample_flux_is_kappa():
    prof = counterexample_profile(counterexample_spec())
    r = np.array([1e-6, 0.1, 0.5, 0.99])
    np.testing.assert_allclose(prof.flux(r), 2.0, rtol=1e-14)
    assert prof.flux_constant == 2.0
    assert prof(0.25) == pytest.approx(1.0)


def test_counterexample_derivative_norm_finite():
    prof = counterexample_profile(counterexample_spec())
    m = Mesh1D.graded(1.0, 4096, 4.0)
    v = DiscreteFunction(m, prof(m.nodes))
    assert derivative_lq_norm(v, 2, 1.5) == pytest.approx(math.sqrt(2), rel=1e-5)


def test_counterexample_interior_equation():
    prof = counterexample_profile(ProblemSpec(6, 2.5, 3, 1.0, ZERO))
    np.testing.assert_allclose(strong_residual(prof, np.linspace(0.1, 0.9, 5)), 0, atol=1e-10)


def test_counterexample_needs_p_above_n():
    with pytest.raises(DomainError):
        counterexample_profile(ProblemSpec(2, 2, 2, 1.0, ZERO))
    with pytest.raises(DomainError):
        counterexample_profile(ProblemSpec(3, 2, 2, 1.0, SourceTerm.constant(1.0)))


def test_fundamental_log_case():
    prof = fundamental_profile(ProblemSpec(3, 3, 3, 1.0, ZERO))
    r = np.array([0.2, 0.5])
    np.testing.assert_allclose(prof(r), np.log(r))
    np.testing.assert_allclose(prof.deriv(r), 1 / r)
    np.testing.assert_allclose(prof.flux(r), 1.0)


def test_fundamental_power_case():
    s = ProblemSpec(4, 4, 2, 1.0, ZERO)
    prof = fundamental_profile(s)
    assert prof(0.5) == pytest.approx(0.5 ** (2 / 3))
    # analytic differentiation vs finite differences of the value
    h = 1e-4
    r = 0.5
    d1 = (prof(r + h) - prof(r - h)) / (2 * h)
    d2 = (prof(r + h) - 2 * prof(r) + prof(r - h)) / h**2
    assert d1 == pytest.approx(prof.deriv(r), rel=1e-7)
    res = -abs(d1) ** 2 * (3 * d2 + d1 / r)
    assert abs(res) < 1e-6
    assert abs(strong_residual(prof, r)) < 1e-8
    flux = prof.flux(np.array([0.2, 0.5, 0.9]))
    assert np.ptp(flux) / abs(flux[0]) < 1e-10
    assert flux[0] != 0


def test_fundamental_needs_equal_exponents():
    with pytest.raises(DomainError):
        fundamental_profile(ProblemSpec(4, 3, 2, 1.0, ZERO))


def test_profile_csv_has_flux_column():
    prof = counterexample_profile(counterexample_spec())
    text = prof.to_csv([0.25, 0.5])
    assert text.splitlines()[0] == "r,v,flux"
