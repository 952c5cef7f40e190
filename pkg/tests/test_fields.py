import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from diraclab.fields import (FieldError, GridError, PotentialError, SpinorField, builtin_potentials, ell1,
                             gaussian_packet, magnetic_field_of, make_grid, make_potential, plane_wave,
                             random_smooth, read_snapshot, snap_momentum, tangential_component, write_snapshot)


def test_grid_geometry():
    g = make_grid(2, 4.0, 16)
    assert g.h == 0.5
    assert g.x1d[0] == pytest.approx(-3.75)
    assert g.r.min() > 0  # the offset keeps the origin off the grid
    assert g.r.min() == pytest.approx(math.sqrt(2) * 0.25)
    assert g.points.shape == (16, 16, 2)


@pytest.mark.parametrize("kw", [dict(n=0, L=1.0, pts=16), dict(n=2, L=1.0, pts=15), dict(n=2, L=1.0, pts=6),
                                dict(n=2, L=-1.0, pts=16), dict(n=6, L=1.0, pts=32)])
def test_grid_rejects(kw):
    with pytest.raises(GridError):
        make_grid(**kw)


def test_non_power_of_two_allowed():
    assert make_grid(3, 2.0, 18).sites == 18**3


def test_gaussian_norm_closed_form():
    g = make_grid(3, 6.0, 24)
    f = gaussian_packet(g, 8, width=1.0, spinor=np.ones(8))
    assert f.norm() ** 2 == pytest.approx(math.pi**1.5, rel=1e-8)
    assert f.boundary_ratio() < 1e-6


def test_snap_momentum_and_plane_wave():
    g = make_grid(2, 4.0, 16)
    np.testing.assert_allclose(snap_momentum(g, [0.8, -0.1]), [np.pi / 4 * 1, 0.0])
    f = plane_wave(g, 4, (1, 2))
    np.testing.assert_allclose(f.density(), 1.0)


def test_field_validation():
    g = make_grid(2, 4.0, 16)
    with pytest.raises(FieldError):
        SpinorField(g, np.zeros((8, 8, 4)))
    bad = np.zeros(g.shape + (4,), dtype=complex)
    bad[0, 0, 0] = np.nan
    with pytest.raises(FieldError):
        SpinorField(g, bad)
    with pytest.raises(FieldError):
        gaussian_packet(g, 4, spinor=np.ones(3))


def test_field_algebra_and_inner(rng):
    g = make_grid(2, 4.0, 16)
    f = random_smooth(g, 4, rng)
    h = random_smooth(g, 4, rng)
    assert (f + h - h).values == pytest.approx(f.values)
    assert f.inner(f).real == pytest.approx(f.norm() ** 2)
    assert f.inner(h) == pytest.approx(np.conj(h.inner(f)))
    assert (2.0 * f).norm() == pytest.approx(2 * f.norm())


def test_snapshot_roundtrip(tmp_path, rng):
    g = make_grid(3, 5.0, 8)
    f = random_smooth(g, 8, rng)
    write_snapshot(tmp_path / "f.snp", f)
    back = read_snapshot(tmp_path / "f.snp")
    assert back.grid == g
    np.testing.assert_array_equal(back.values, f.values)
    (tmp_path / "bad.snp").write_bytes(b"NOTASNAP" + bytes(40))
    with pytest.raises(FieldError):
        read_snapshot(tmp_path / "bad.snp")


def test_interpolation_is_exact_on_grid_points(rng):
    g = make_grid(2, 3.0, 16)
    f = random_smooth(g, 4, rng)
    np.testing.assert_allclose(g.interpolate(f.values, g.points[3, 5]), f.values[3, 5], atol=1e-12)
    np.testing.assert_allclose(g.interpolate_many(f.values[..., 0], g.points[[1, 2], [4, 7]]),
                               f.values[[1, 2], [4, 7], 0], atol=1e-12)


# --- potentials ---


@pytest.mark.parametrize("family", ["rotational", "bump"])
@pytest.mark.parametrize("n", [2, 3, 4])
def test_B_matches_curl_of_A(family, n, rng):
    pot = make_potential(family, eps=0.3)
    for _ in range(5):
        x = rng.uniform(-2.5, 2.5, n)
        np.testing.assert_allclose(pot.B(x[None])[0], magnetic_field_of(pot.A, x), atol=2e-8)


@settings(max_examples=25, deadline=None)
@given(st.lists(st.floats(-3, 3), min_size=4, max_size=4).filter(lambda v: np.linalg.norm(v) > 0.05))
def test_B_tau_and_radial_derivative(x):
    pot = make_potential("rotational", eps=0.2)
    x = np.asarray(x)
    b = pot.B(x[None])[0]
    assert np.allclose(b, -b.T)
    np.testing.assert_allclose(pot.B_tau(x[None])[0], tangential_component(b, x), atol=1e-12)
    r = np.linalg.norm(x)
    d = 1e-5
    fd = (pot.B((x * (1 + d / r))[None])[0] - pot.B((x * (1 - d / r))[None])[0]) / (2 * d)
    np.testing.assert_allclose(pot.dr_B(x[None])[0], fd, atol=1e-7)


def test_rotational_envelope_closed_form():
    # |x|^2 |B_tau| = 2 eps r^2/(1 + r^2)^2 peaks at r = 1 with value eps/2
    for eps in (0.1, 0.7):
        env = make_potential("rotational", eps=eps).envelope(4)
        assert env["C1"] == pytest.approx(eps / 2, rel=1e-8)
        assert env["B2_inf"] == 0.0


def test_envelope_dominates_samples(rng):
    from diraclab.hypotheses import sampled_constants

    for pot in builtin_potentials().values():
        if pot.is_zero:
            continue
        env = pot.envelope(4)
        smp = sampled_constants(pot, 4, 5000, 3)
        for key in ("C0", "C1", "C2", "B2_inf"):
            assert smp[key] <= env[key]


def test_ell1_and_split():
    b = np.array([[0.0, 1.0], [-1.0, 0.0]])
    assert ell1(b) == pytest.approx(2.0)  # all entries, both triangles
    pot = make_potential("rotational", eps=0.1, split="b2")
    x = np.array([[0.3, 0.4, 0.1]])
    np.testing.assert_array_equal(pot.B1(x), 0)
    np.testing.assert_allclose(pot.B2(x), pot.B(x))


def test_potential_errors():
    with pytest.raises(PotentialError):
        make_potential("nonsense")
    with pytest.raises(PotentialError):
        make_potential("rotational", split="b3")
    with pytest.raises(PotentialError):
        make_potential("rotational").A(np.zeros((1, 1)))


def test_zero_potential_is_zero():
    pot = make_potential("zero")
    assert pot.is_zero
    assert pot.envelope(4)["C0"] == 0.0
    np.testing.assert_array_equal(pot.A(np.ones((2, 3))), 0)
