import numpy as np
import pytest

from diraclab.clifford import build_clifford
from diraclab.evolution import (EvolutionError, evolve, iter_evolve, krylov_expm, load_trajectory, save_trajectory,
                                spectral_expm, wave_reformulation_check)
from diraclab.fields import make_grid, make_potential, random_smooth
from diraclab.operators import DiracOperator


@pytest.fixture(scope="module")
def setup2():
    g = make_grid(2, 5.0, 24)
    f = random_smooth(g, 4, np.random.default_rng(11), spread=0.15)
    free = DiracOperator(build_clifford(2), g, mass=0.8)
    mag = DiracOperator(build_clifford(2), g, make_potential("rotational", eps=0.3), 0.8)
    return g, f, free, mag


def test_krylov_matches_exact_free_flow(setup2):
    _, f, free, _ = setup2
    a, _ = krylov_expm(free, f, 0.7, tol=1e-12)
    b = spectral_expm(free, f, 0.7)
    assert (a - b).norm() / f.norm() < 1e-10


def test_time_convention_is_plus_i(setup2):
    # d/dt u = i H u at t = 0
    _, f, _, mag = setup2
    tau = 1e-4
    fwd, _ = krylov_expm(mag, f, tau, tol=1e-13)
    bwd, _ = krylov_expm(mag, f, -tau, tol=1e-13)
    deriv = (fwd - bwd) * (1 / (2 * tau))
    assert (deriv - mag.apply(f) * 1j).norm() / mag.apply(f).norm() < 1e-6


def test_unitarity_energy_and_reversibility(setup2):
    _, f, _, mag = setup2
    traj = evolve(mag, f, np.linspace(0, 2, 5), tol=1e-11)
    assert traj.norm_drift() < 1e-10
    assert traj.energy_drift() < 1e-9
    back = evolve(mag, traj.states[-1], [0.0, -2.0], tol=1e-11)
    assert (back.states[-1] - f).norm() / f.norm() < 1e-9


def test_streaming_matches_collected(setup2):
    _, f, _, mag = setup2
    times = [0.0, 0.3, 0.6]
    traj = evolve(mag, f, times)
    for (t, s), s2 in zip(iter_evolve(mag, f, times), traj.states):
        np.testing.assert_array_equal(s.values, s2.values)


def test_nonzero_start_and_backward_grid(setup2):
    _, f, free, _ = setup2
    traj = evolve(free, f, [-0.5, -1.0], method="spectral")
    exact = spectral_expm(free, f, -1.0)
    assert (traj.states[-1] - exact).norm() < 1e-10


def test_wave_reformulation_second_order(setup2):
    _, f, _, mag = setup2
    res = []
    for tau in (0.04, 0.02):
        traj = evolve(mag, f, [0.0, tau, 2 * tau], tol=1e-13)
        res.append(wave_reformulation_check(traj)["max_residual"])
    assert 3.0 < res[0] / res[1] < 5.0


def test_validation_errors(setup2):
    _, f, free, mag = setup2
    with pytest.raises(EvolutionError):
        evolve(free, f, [0.0, 1.0], tol=1e-3)
    with pytest.raises(EvolutionError):
        evolve(free, f, [0.0, 1.0, 0.5])
    with pytest.raises(EvolutionError):
        evolve(mag, f, [0.0, 1.0], method="spectral")
    with pytest.raises(EvolutionError):
        evolve(free, f, [0.0, 1.0], method="euler")
    with pytest.raises(EvolutionError):
        krylov_expm(mag, f, 50.0, tol=1e-12, max_dim=3)


def test_save_load_roundtrip(tmp_path, setup2):
    _, f, _, mag = setup2
    traj = evolve(mag, f, [0.0, 0.2, 0.4])
    save_trajectory(traj, tmp_path / "run", {"tag": "x"})
    back = load_trajectory(tmp_path / "run", mag)
    np.testing.assert_array_equal(back.times, traj.times)
    for a, b in zip(back.states, traj.states):
        np.testing.assert_array_equal(a.values, b.values)
