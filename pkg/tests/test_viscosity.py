import warnings

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.optimize import minimize_scalar

from fictdim.exact import fundamental_profile
from fictdim.params import ProblemSpec, SourceTerm
from fictdim.viscosity import (
    InfConvConfig, centered_differences, default_q_hat, flat_point_violations, inf_conv_derivative_formula,
    inf_convolution, kernel, local_derivatives, pointwise_residual, radial_lift_derivatives,
    radial_lift_sample, semiconcavity_check, shifted_source_inf, touching_derivative_check,
)
from fictdim.weighted import DiscreteFunction, Mesh1D

ZERO = SourceTerm.constant(0.0)


def brute_force_inf(v: DiscreteFunction, cfg: InfConvConfig):
    """Element-by-element bounded scalar minimization, independent of the closed-form stationary point."""
    r = v.mesh.nodes
    out = np.empty_like(r)
    for i, x in enumerate(r):
        best = np.inf
        for a, b in zip(r[:-1], r[1:]):
            obj = lambda s: float(v(s)) + float(kernel(x - s, cfg))
            res = minimize_scalar(obj, bounds=(a, b), method="bounded", options={"xatol": 1e-13})
            best = min(best, res.fun, obj(a), obj(b))
        out[i] = best
    return out


# -- pointwise residual ------------------------------------------------------

def test_residual_of_poisson_profile_vanishes():
    spec = ProblemSpec(2, 2, 2, 1.0, SourceTerm.constant(2.0))
    mesh = Mesh1D.graded(1.0, 400, 1.0)
    v = DiscreteFunction.interpolate(lambda r: (1 - r**2) / 2, mesh)
    assert pointwise_residual(v, 0.5, spec) == pytest.approx(0.0, abs=1e-8)


def test_residual_of_fundamental_profile():
    spec = ProblemSpec(4, 4, 2, 1.0, ZERO)
    prof = fundamental_profile(spec)
    assert abs(pointwise_residual(prof, 0.5, spec)) <= 1e-8


@pytest.mark.parametrize("r", [0.1, 0.37, 0.9])
def test_residual_of_constant(r):
    spec = ProblemSpec(3, 1.5, 3, 1.0, ZERO, g=2.0)
    v = DiscreteFunction.interpolate(lambda s: 2.0 + 0 * s, Mesh1D.graded(1.0, 64))
    assert pointwise_residual(v, r, spec) == 0.0


def test_residual_rejects_boundary_points():
    spec = ProblemSpec(2, 2, 2, 1.0, ZERO)
    v = DiscreteFunction.interpolate(lambda s: s, Mesh1D.graded(1.0, 64))
    with pytest.raises(ValueError):
        pointwise_residual(v, 0.0, spec)
    with pytest.raises(ValueError):
        pointwise_residual(v, 1.0, spec)
    with pytest.raises(ValueError):
        local_derivatives(v, 0.999)


# -- radial lift -------------------------------------------------------------

def test_lift_examples():
    v = DiscreteFunction.interpolate(lambda r: r, Mesh1D.graded(1.0, 32, 1.0))
    assert radial_lift_sample(v, np.zeros(3)) == v(0.0)
    assert radial_lift_sample(v, np.array([0.3, 0.4])) == pytest.approx(0.5, abs=1e-15)
    with pytest.raises(ValueError):
        radial_lift_sample(v, np.array([0.8, 0.8]))


@settings(max_examples=50, deadline=None)
@given(st.integers(2, 5), st.integers(0, 10**6))
def test_lift_is_orthogonally_invariant(N, seed):
    rng = np.random.default_rng(seed)
    v = DiscreteFunction.interpolate(lambda r: np.cos(3 * r), Mesh1D.graded(1.0, 40))
    x = rng.normal(size=N)
    x *= rng.uniform(0, 0.95) / np.linalg.norm(x)
    Q, _ = np.linalg.qr(rng.normal(size=(N, N)))
    assert radial_lift_sample(v, Q @ x) == pytest.approx(radial_lift_sample(v, x), abs=1e-14)


# -- inf-convolution ---------------------------------------------------------

@pytest.mark.parametrize("q", [1.2, 2.0, 3.0, 6.0])
def test_default_q_hat_satisfies_constraint(q):
    qh = default_q_hat(q)
    assert qh > 2 and q - 2 + (qh - 2) / (qh - 1) > 0.1
    InfConvConfig(0.1, qh, q)


def test_config_rejects_bad_parameters():
    with pytest.raises(ValueError):
        InfConvConfig(0.0, 3.0, 2.0)
    with pytest.raises(ValueError):
        InfConvConfig(0.1, 2.0, 2.0)
    with pytest.raises(ValueError):
        InfConvConfig(0.1, 2.5, 1.2)


def test_constant_is_its_own_inf_convolution():
    mesh = Mesh1D.graded(1.0, 50)
    v = DiscreteFunction.interpolate(lambda r: 0.7 + 0 * r, mesh)
    res = inf_convolution(v, InfConvConfig.for_q(0.1, 2.0))
    np.testing.assert_array_equal(res.values.values, v.values)
    np.testing.assert_array_equal(res.argmin, mesh.nodes)


@pytest.mark.parametrize("q_hat", [2.5, 3.0, 4.0])
@pytest.mark.parametrize("eps", [0.05, 0.1])
def test_ramp_closed_form(q_hat, eps):
    mesh = Mesh1D.graded(1.0, 64, 1.0)
    v = DiscreteFunction.interpolate(lambda r: r, mesh)
    cfg = InfConvConfig(eps, q_hat, 2.0)
    res = inf_convolution(v, cfg)
    r = mesh.nodes
    inside = r >= eps
    np.testing.assert_allclose(res.values.values[inside], r[inside] - eps * (1 - 1 / q_hat), atol=1e-12)
    np.testing.assert_allclose(brute_force_inf(v, cfg)[inside], r[inside] - eps * (1 - 1 / q_hat), atol=1e-8)


@settings(max_examples=15, deadline=None)
@given(st.integers(0, 10**6), st.sampled_from([0.2, 0.1, 0.05]))
def test_matches_brute_force_on_random_profiles(seed, eps):
    rng = np.random.default_rng(seed)
    mesh = Mesh1D.graded(1.0, 24, 1.0)
    v = DiscreteFunction(mesh, rng.normal(size=mesh.M + 1) * 0.3)
    cfg = InfConvConfig.for_q(eps, 2.0)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        res = inf_convolution(v, cfg)
        glob = inf_convolution(v, cfg, window=False)
    np.testing.assert_allclose(res.values.values, brute_force_inf(v, cfg), atol=1e-9)
    np.testing.assert_allclose(res.values.values, glob.values.values, atol=1e-14)
    assert np.all(res.values.values <= v.values)
    assert np.all(np.abs(mesh.nodes - res.argmin) <= res.rho)


def test_convergence_over_epsilon():
    mesh = Mesh1D.graded(1.0, 256, 1.0)
    v = DiscreteFunction.interpolate(lambda r: np.abs(r - 0.5) + np.sin(4 * r), mesh)
    gaps = []
    for eps in (0.2, 0.1, 0.05, 0.025):
        res = inf_convolution(v, InfConvConfig.for_q(eps, 2.0))
        gaps.append(np.max(v.values - res.values.values))
    assert all(a > b for a, b in zip(gaps, gaps[1:]))
    assert gaps[-1] < gaps[0] / 4


def test_derivative_formula_matches_differences():
    mesh = Mesh1D.graded(1.0, 400, 1.0)
    v = DiscreteFunction.interpolate(lambda r: np.sin(3 * r), mesh)
    res = inf_convolution(v, InfConvConfig(0.1, 3.0, 2.0))
    first, _ = centered_differences(res.values)
    formula = inf_conv_derivative_formula(res)[1:-1]
    h = np.max(mesh.h)
    # differentiable nodes: the argmin moves continuously across both neighbours
    jumps = np.abs(np.diff(res.argmin))
    smooth = (jumps[:-1] <= 4 * h) & (jumps[1:] <= 4 * h)
    smooth[:20] = smooth[-20:] = False
    assert smooth.sum() > 300
    assert np.max(np.abs(first - formula)[smooth]) <= 10 * h


@pytest.mark.parametrize("profile", [lambda r: np.abs(r - 0.5), lambda r: -np.abs(r - 0.5),
                                     lambda r: 0.0 * r, lambda r: r**2 - np.cos(5 * r)])
@pytest.mark.parametrize("eps", [0.2, 0.05])
def test_semiconcavity_bound(profile, eps):
    mesh = Mesh1D.graded(1.0, 200, 1.0)
    v = DiscreteFunction.interpolate(profile, mesh)
    report = semiconcavity_check(inf_convolution(v, InfConvConfig(eps, 3.0, 2.0)))
    assert report.passed, report


def test_saturated_window_warns():
    mesh = Mesh1D.graded(1.0, 16, 1.0)
    v = DiscreteFunction.interpolate(lambda r: 10 * r, mesh)
    with pytest.warns(UserWarning, match="covers the whole domain"):
        res = inf_convolution(v, InfConvConfig(5.0, 3.0, 2.0))
    assert res.saturated


def test_infconv_csv_columns():
    mesh = Mesh1D.graded(1.0, 8, 1.0)
    v = DiscreteFunction.interpolate(lambda r: r, mesh)
    text = inf_convolution(v, InfConvConfig(0.1, 3.0, 2.0)).to_csv(v)
    assert text.splitlines()[0] == "r,v,v_eps,argmin"
    assert len(text.splitlines()) == mesh.M + 2


def test_shifted_source_inf():
    mesh = Mesh1D.graded(1.0, 10, 1.0)
    out = shifted_source_inf(lambda r: r, mesh, 0.25)
    np.testing.assert_allclose(out, np.maximum(mesh.nodes - 0.2, 0.0), atol=1e-15)


def test_flat_point_violations():
    mesh = Mesh1D.graded(1.0, 40, 1.0)
    v = DiscreteFunction.interpolate(lambda r: 0 * r, mesh)
    bad = flat_point_violations(v, np.ones(mesh.M + 1), 1.5)
    assert bad.size == mesh.M - 1
    assert flat_point_violations(v, -np.ones(mesh.M + 1), 1.5).size == 0
    assert flat_point_violations(v, np.ones(mesh.M + 1), 3.0).size == 0


# -- touching derivatives ----------------------------------------------------

@pytest.mark.parametrize("N", [2, 3, 5])
def test_lift_of_smooth_profile_touches_with_equality(N):
    r = 0.4
    grad, hess = radial_lift_derivatives(-0.8, 2.0, r, N)
    assert touching_derivative_check(grad, hess, r)
    assert hess[1, 1] == grad[0] / r


def test_nonzero_tangential_gradient_fails():
    grad = np.array([1.0, 1e-6])
    assert not touching_derivative_check(grad, np.zeros((2, 2)), 0.5)


def test_tangential_curvature_above_bound_fails():
    grad = np.array([1.0, 0.0, 0.0])
    hess = np.diag([0.0, 1.0, 3.0])
    assert not touching_derivative_check(grad, hess, 0.5)


def test_origin_configuration_raises():
    # phi(x) = (x_1 - 1)^2 touching at the origin
    with pytest.raises(ValueError):
        touching_derivative_check(np.array([-2.0, 0.0]), np.diag([2.0, 0.0]), 0.0)
