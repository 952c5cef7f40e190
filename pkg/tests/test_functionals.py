import json
import math

import numpy as np
import pytest

from diraclab.clifford import build_clifford
from diraclab.evolution import Trajectory, evolve
from diraclab.fields import SpinorField, gaussian_packet, make_grid, make_potential, random_smooth
from diraclab.functionals.hardy import HardyError, hardy_check
from diraclab.functionals.reports import digest, dumps, make_report, to_jsonable, write_virial_csv
from diraclab.functionals.smoothing import (dual_dyadic_norm, holder_audit, quadratic_form,
                                            radius_ladder, shell_indices, smoothing_norm, step1_constants)
from diraclab.functionals.strichartz import (ZeroModeWarning, fractional_multiplier, spatial_norm,
                                             strichartz_from_states, strichartz_norm)
from diraclab.functionals.virial import (VirialError, fitted_order, lhs_terms, mass_term_check, virial_convergence,
                                         virial_report, virial_state, young_chain)
from diraclab.admissibility import AdmissibilityError
from diraclab.multipliers import make_multiplier
from diraclab.operators import DiracOperator

from conftest import random_spinor


@pytest.fixture(scope="module", params=["zero", "rotational"])
def resolved(request):
    g = make_grid(3, 7.0, 24)
    op = DiracOperator(build_clifford(3), g, make_potential(request.param, eps=0.1), 1.0)
    u = gaussian_packet(g, 8, (3.0, 3.0, 3.0), 1.0, (0.3, 0.3, 0.3), random_spinor(8, 3))
    return op, u


# --- virial ---


@pytest.mark.parametrize("kind", ["abs", "perturb", "combined"])
def test_virial_crosscheck_on_resolved_state(resolved, kind):
    op, u = resolved
    assert virial_state(op, u, make_multiplier(kind, 3, 1.0)).crosscheck_error < 1e-6


@pytest.mark.parametrize("kind", ["abs", "combined"])
def test_second_derivative_equals_term_by_term_side(resolved, kind):
    op, u = resolved
    spec = make_multiplier(kind, 3, 1.0)
    st = virial_state(op, u, spec)
    assert lhs_terms(op, u, spec)["total"] == pytest.approx(st.d2theta, rel=1e-5)


def test_theta_matches_direct_definition(resolved):
    op, u = resolved
    spec = make_multiplier("combined", 3, 1.0)
    phi = spec.on_grid(op.grid)["phi"]
    ut = op.apply(u) * 1j
    direct = (phi * ut).inner(ut).real + (phi * op.apply_h_squared(u)).inner(u).real
    assert virial_state(op, u, spec).theta == pytest.approx(direct, rel=1e-12)


def test_virial_convergence_order_two():
    g = make_grid(2, 8.0, 64)
    op = DiracOperator(build_clifford(2), g, make_potential("rotational", eps=0.1), 1.0)
    u = gaussian_packet(g, 4, (3.0, 3.0), 1.0, (0.3, 0.3), random_spinor(4, 3))
    row = virial_convergence(op, u, make_multiplier("abs", 2), [0.16, 0.08, 0.04, 0.02])
    assert row["order_first"] == pytest.approx(2.0, abs=0.3)
    assert row["order_second"] == pytest.approx(2.0, abs=0.3)
    assert row["norm_drift"] < 1e-10


def test_virial_report_and_csv(tmp_path, resolved):
    op, u = resolved
    traj = evolve(op, u, [0.0, 0.05, 0.1, 0.15])
    rep = virial_report(traj, make_multiplier("abs", 3))
    assert rep.residual_first[0] is None and rep.residual_first[1] is not None
    path = write_virial_csv(tmp_path / "v.csv", rep)
    lines = path.read_text().splitlines()
    assert lines[0] == "t,theta,dtheta,d2theta,residual_first,residual_second,crosscheck"
    assert len(lines) == 5
    with pytest.raises(VirialError):
        virial_report(evolve(op, u, [0.0, 0.1]), make_multiplier("abs", 3))


def test_fitted_order_exact():
    assert fitted_order([0.1, 0.05, 0.025], [3e-2, 7.5e-3, 1.875e-3]) == pytest.approx(2.0)


def test_mass_term_real_part_vanishes_stated_form_does_not(resolved):
    op, u = resolved
    out = mass_term_check(op, u, make_multiplier("combined", 3, 1.0))
    assert out["real_part"] < 1e-6
    assert out["stated"] > 1e-3


def test_young_chain_nonnegative_slack(resolved):
    op, u = resolved
    yc = young_chain(op, u, make_multiplier("combined", 3, 1.0))
    assert yc["slack"] >= 0
    assert yc["rhs"] == pytest.approx(yc["dirac"] + yc["radial"] + yc["laplacian"])


# --- Hardy ---


def test_hardy_free_and_magnetic(rng):
    g = make_grid(4, 5.0, 12)
    for pot, m in ((make_potential("zero"), 0.0), (make_potential("rotational", eps=0.5), 1.0)):
        op = DiracOperator(build_clifford(4), g, pot, m)
        rep = hardy_check(op, random_smooth(g, 16, rng), 0.5)
        assert not rep.violated()
        assert rep.hardy_slack >= 0


def test_hardy_errors():
    g = make_grid(4, 5.0, 12)
    f = random_smooth(g, 16, np.random.default_rng(0))
    op = DiracOperator(build_clifford(4), g, make_potential("bump", eps=0.1), 0.0)
    with pytest.raises(HardyError):
        hardy_check(op, f, 0.5)
    with pytest.raises(HardyError):
        hardy_check(op.with_mass(1.0), f, 1.0)


# --- smoothing ---


def test_radius_ladder():
    g = make_grid(4, 8.0, 16)
    assert radius_ladder(g) == [2.0, 4.0]
    assert radius_ladder(make_grid(2, 1.0, 8)) == [0.5]


def test_smoothing_stationary_state_grows_linearly():
    # a constant-in-time density gives (1/R) T mass(B_R)
    g = make_grid(2, 4.0, 16)
    op = DiracOperator(build_clifford(2), g, mass=0.0)
    f = gaussian_packet(g, 4, width=0.8)
    states = [f, f, f]
    traj = Trajectory(np.array([0.0, 0.5, 1.0]), states, op, "krylov", 1e-10, 1.0, [], f.norm())
    rep = smoothing_norm(traj)
    inside = float(f.density()[g.r <= rep.argmax_R].sum()) * g.cell_volume
    assert rep.sup == pytest.approx(inside / rep.argmax_R)
    both = smoothing_norm(traj, backward=traj)
    assert both.sup == pytest.approx(2 * rep.sup)
    assert both.interval == "[-T, T]"


def test_quadratic_form_frozen():
    assert quadratic_form(0.0, 0.0, 1.0, 1.0, 4) == pytest.approx(3.5)
    assert quadratic_form(1.0, 1.0, 2.0, 1.0, 5) == pytest.approx(2 - 4 - 4 + 16)


def test_step1_constants_positive(resolved):
    op, u = resolved
    k = step1_constants(op, u)
    assert k["K1"] > 0 and k["K2"] > 0


def test_dyadic_shells_and_holder():
    g = make_grid(3, 6.0, 16)
    assert min(shell_indices(g)) < 0  # shells below unit radius exist on the grid
    op = DiracOperator(build_clifford(3), g, make_potential("rotational", eps=0.2), 1.0)
    f = random_smooth(g, 8, np.random.default_rng(2))
    traj = evolve(op, f, [0.0, 0.2, 0.4])
    audit = holder_audit(traj, op.potential)
    assert audit["holds"]
    assert dual_dyadic_norm(g, [0.0], [np.zeros(g.shape)]) == 0.0


# --- Strichartz ---


def test_energy_pair_is_unitarity():
    g = make_grid(3, 6.0, 16)
    op = DiracOperator(build_clifford(3), g, mass=1.0)
    f = random_smooth(g, 8, np.random.default_rng(4))
    traj = evolve(op, f, np.linspace(0, 1, 5), method="spectral")
    rep = strichartz_norm(traj, "inf", 2)
    assert rep.s == 0.0
    assert rep.ratio == pytest.approx(1.0, abs=1e-12)


def test_zero_mode_warning_and_mass():
    g = make_grid(4, 5.0, 8)
    f = SpinorField(g, np.ones(g.shape + (16,)))
    with pytest.warns(ZeroModeWarning):
        rep = strichartz_from_states(g, [(0.0, f), (1.0, f)], 4, "8/3")
    assert rep.zero_mode_mass == pytest.approx(f.norm() ** 2)
    assert rep.norm == 0.0


def test_fractional_multiplier_on_plane_wave():
    from diraclab.fields import plane_wave

    g = make_grid(2, math.pi, 16)
    f = plane_wave(g, 4, (3, 4))  # |xi| = 5
    out, dropped = fractional_multiplier(g, f.values, -0.5)
    np.testing.assert_allclose(out, f.values / math.sqrt(5.0), atol=1e-12)
    assert dropped < 1e-20


def test_spatial_norms():
    g = make_grid(2, 2.0, 8)
    v = np.ones(g.shape + (4,))
    assert spatial_norm(g, v, 2) == pytest.approx(math.sqrt(4 * 16.0))
    from diraclab.admissibility import INF

    assert spatial_norm(g, v, INF) == pytest.approx(2.0)


def test_inadmissible_pair_rejected():
    g = make_grid(4, 5.0, 8)
    f = SpinorField.zeros(g, 16)
    with pytest.raises(AdmissibilityError):
        strichartz_from_states(g, [(0.0, f)], 2, 4)


# --- reports ---


def test_reports_are_canonical():
    rep = make_report("x", {"b": 1, "a": [1.5, math.inf]}, {"v": np.float64(2.0), "nan": math.nan})
    text = dumps(rep)
    back = json.loads(text)
    assert back["inputs"]["a"][1] == "inf" and back["values"]["nan"] == "nan"
    assert back["inputs_digest"] == digest({"a": [1.5, math.inf], "b": 1})
    assert to_jsonable(np.arange(3)) == [0, 1, 2]
