from fractions import Fraction

import pytest
from hypothesis import given, strategies as st

from diraclab.admissibility import (INF, AdmissibilityError, admissible_ladder, closed_form_verdict, gap,
                                    is_admissible, oracle_sweep, parse_exponent)


def test_endpoint_pair_wave_n4():
    v = is_admissible("inf", 2, 4, "wave")
    assert v.admissible and v.s == 0


def test_p_equal_two_rejected_with_name():
    v = is_admissible(2, 6, 4, "wave")
    assert not v.admissible
    assert "2 < p" in v.violations


def test_schrodinger_interior_pair():
    v = is_admissible(4, "8/3", 4, "schrodinger")
    assert v.admissible
    assert v.s == Fraction(-3, 8)


def test_scaling_violation_named():
    v = is_admissible(4, 2, 4, "schrodinger")
    assert any(s.startswith("scaling") for s in v.violations)


def test_upper_q_bound_is_open():
    # Schrodinger endpoint q = 2n/(n-2) = 4 at n = 4 is excluded
    assert not is_admissible(2, 4, 4, "schrodinger")
    assert "q < 4" in is_admissible(2, 4, 4, "schrodinger").violations


def test_gap_values():
    assert gap(INF, 2) == 0
    assert gap(4, 4) == Fraction(-1, 2)
    assert gap("inf", "inf") == Fraction(-1, 2)


def test_parse_exponent():
    assert parse_exponent("8/3") == Fraction(8, 3)
    assert parse_exponent("Inf") is INF
    with pytest.raises(AdmissibilityError):
        parse_exponent(2.5)


@pytest.mark.parametrize("flavor", ["wave", "schrodinger"])
@pytest.mark.parametrize("n", [3, 4, 5, 6])
def test_oracle_sweep_no_mismatch(n, flavor):
    out = oracle_sweep(n, flavor)
    assert out["pairs"] > 10_000
    assert out["mismatches"] == []


@pytest.mark.parametrize("flavor", ["wave", "schrodinger"])
def test_ladder_starts_at_energy_pair(flavor):
    first = admissible_ladder(4, flavor, 1)[0]
    assert first.p is INF and first.q == 2 and first.s == 0


def test_ladder_scaling_identity():
    for pair in admissible_ladder(4, "schrodinger", 3):
        assert 2 * (0 if pair.p is INF else 1 / pair.p) + 4 / pair.q == 2


def test_ladder_errors():
    with pytest.raises(AdmissibilityError):
        admissible_ladder(3, "wave", 2)
    with pytest.raises(AdmissibilityError):
        admissible_ladder(4, "wave", 0)
    with pytest.raises(AdmissibilityError):
        is_admissible(4, 4, 4, "klein")


@given(st.integers(3, 8), st.sampled_from(["wave", "schrodinger"]), st.integers(1, 12))
def test_ladder_round_trip(n, flavor, count):
    if flavor == "wave" and n < 4:
        return
    for pair in admissible_ladder(n, flavor, count):
        assert is_admissible(pair.p, pair.q, n, flavor)
        assert closed_form_verdict(pair.p, pair.q, n, flavor)


@given(st.fractions(Fraction(2), Fraction(40), max_denominator=30),
       st.fractions(Fraction(2), Fraction(10), max_denominator=30), st.integers(3, 7))
def test_closed_form_equals_direct(p, q, n):
    for flavor in ("wave", "schrodinger"):
        assert closed_form_verdict(p, q, n, flavor) == is_admissible(p, q, n, flavor).admissible
