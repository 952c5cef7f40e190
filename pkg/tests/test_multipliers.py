import io
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from diraclab.clifford import build_clifford
from diraclab.fields import make_grid, make_potential, random_smooth
from diraclab.multipliers import (MultiplierError, hessian_decomposed, hessian_form, make_multiplier, phi0,
                                  sphere_area, sphere_rule, surface_delta_integral, verify_multiplier_bounds,
                                  write_multiplier_csv)
from diraclab.operators import DiracOperator


def test_phi0_frozen_n3():
    val, d1, d2 = phi0(np.array([0.5, 1.0, 2.0]), 3)
    np.testing.assert_allclose(val, [1 / 24, 1 / 6, 7 / 12], rtol=1e-14)
    np.testing.assert_allclose(d1, [1 / 6, 1 / 3, 11 / 24], rtol=1e-14)
    np.testing.assert_allclose(d2, [1 / 3, 1 / 3, 1 / 24], rtol=1e-14)


def test_sphere_area():
    assert sphere_area(2) == pytest.approx(2 * math.pi)
    assert sphere_area(3) == pytest.approx(4 * math.pi)
    assert sphere_area(4) == pytest.approx(2 * math.pi**2)


@pytest.mark.parametrize("n", [2, 3, 4, 5])
def test_phi0_is_c2_across_the_sphere(n):
    lo, hi = phi0(np.array([1 - 1e-12]), n), phi0(np.array([1 + 1e-12]), n)
    for a, b in zip(lo, hi):
        assert a == pytest.approx(b, abs=1e-9)


@pytest.mark.parametrize("kind", ["abs", "perturb", "combined"])
@pytest.mark.parametrize("n", [3, 4])
def test_laplacian_and_bilaplacian_by_differences(kind, n):
    spec = make_multiplier(kind, n, R=1.3)
    r = np.array([0.4, 0.9, 1.8, 3.0])
    d = 1e-4
    phi = lambda s: spec.evaluate(s)["phi"]
    lap_fd = (phi(r + d) - 2 * phi(r) + phi(r - d)) / d**2 + (n - 1) / r * (phi(r + d) - phi(r - d)) / (2 * d)
    np.testing.assert_allclose(spec.evaluate(r)["lap"], lap_fd, rtol=1e-6, atol=1e-6)
    lap = lambda s: spec.evaluate(s)["lap"]
    bil_fd = (lap(r + d) - 2 * lap(r) + lap(r - d)) / d**2 + (n - 1) / r * (lap(r + d) - lap(r - d)) / (2 * d)
    np.testing.assert_allclose(spec.evaluate(r)["bilap"], bil_fd, rtol=1e-4, atol=1e-5)


@pytest.mark.parametrize("n", [3, 4, 5, 6])
def test_combined_bounds_sharp_value(n):
    spec = make_multiplier("combined", n, R=2.0)
    rep = verify_multiplier_bounds(spec, radii=np.concatenate([np.linspace(0.01, 10, 4000), [2.0]]))
    assert rep["dphi_ok"]
    assert rep["max_r_lap"] == pytest.approx(1.5 * (n - 1), rel=1e-12)
    assert rep["r_lap_ok"] == (1.5 * (n - 1) <= n)


def test_sphere_rule_moments():
    for n in (2, 3, 4):
        dirs, w = sphere_rule(n, 8)
        np.testing.assert_allclose(np.linalg.norm(dirs, axis=1), 1.0)
        assert w.sum() == pytest.approx(sphere_area(n))
        assert np.dot(w, dirs[:, 0] ** 2) == pytest.approx(sphere_area(n) / n)
        assert np.dot(w, dirs[:, 0] ** 4 * dirs[:, -1] ** 2) == pytest.approx(
            3 * sphere_area(n) / (n * (n + 2) * (n + 4)))


def test_surface_integral_of_constant():
    g = make_grid(3, 4.0, 24)
    spec = make_multiplier("perturb", 3, R=1.5)
    exact = -(2 / (2 * 1.5**2)) * 4 * math.pi * 1.5**2
    assert surface_delta_integral(spec, g, np.ones(g.shape), "spectral") == pytest.approx(exact, rel=1e-10)
    assert surface_delta_integral(spec, g, np.ones(g.shape), "shell") == pytest.approx(exact, rel=1e-12)
    quad = np.exp(-g.r**2 / 4)
    a = surface_delta_integral(spec, g, quad, "spectral")
    assert a == pytest.approx(exact * math.exp(-1.5**2 / 4), rel=1e-5)
    assert surface_delta_integral(spec, g, quad, "shell") == pytest.approx(a, rel=0.05)


def test_surface_errors():
    g = make_grid(3, 2.0, 16)
    with pytest.raises(MultiplierError):
        surface_delta_integral(make_multiplier("abs", 3), g, np.ones(g.shape))
    with pytest.raises(MultiplierError):
        surface_delta_integral(make_multiplier("perturb", 3, R=1.9), g, np.ones(g.shape))


def test_hessian_forms_agree():
    g = make_grid(3, 4.0, 16)
    op = DiracOperator(build_clifford(3), g, make_potential("rotational", eps=0.2), 1.0)
    u = random_smooth(g, 8, np.random.default_rng(5))
    grad = op.covariant_gradient(u)
    spec = make_multiplier("combined", 3, R=1.0)
    np.testing.assert_allclose(hessian_form(spec, g, grad), hessian_decomposed(spec, g, grad), rtol=1e-9, atol=1e-12)


@settings(max_examples=30, deadline=None)
@given(st.floats(0.2, 5.0), st.integers(2, 6))
def test_multiplier_convex_and_monotone(R, n):
    spec = make_multiplier("combined", n, R)
    ev = spec.evaluate(np.geomspace(1e-3, 50, 200))
    assert np.all(ev["d1"] >= 1.0)
    assert np.all(ev["d2"] >= 0.0)


def test_multiplier_validation():
    with pytest.raises(MultiplierError):
        make_multiplier("square", 3)
    with pytest.raises(MultiplierError):
        make_multiplier("abs", 1)
    with pytest.raises(MultiplierError):
        make_multiplier("perturb", 3, R=0.0)
    with pytest.raises(MultiplierError):
        make_multiplier("abs", 3).evaluate([0.0])


def test_csv_table():
    buf = io.StringIO()
    write_multiplier_csv(buf, make_multiplier("combined", 3), [0.5, 1.0])
    lines = buf.getvalue().splitlines()
    assert lines[0] == "r,phi,dphi,d2phi,lap_phi,bilap_phi_regular"
    assert len(lines) == 3
