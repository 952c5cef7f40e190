"""Exact exponent arithmetic for Strichartz pairs.

Exponents are ``Fraction`` values or ``INF``.  All conditions are checked on
reciprocals, with 1/INF = 0:

    wave         2/p + (n-1)/q = (n-1)/2,  0 <= 1/p < 1/2,  (n-3)/(2(n-1)) < 1/q <= 1/2
    schrodinger  2/p + n/q     = n/2,      0 <= 1/p < 1/2,  (n-2)/(2n)     < 1/q <= 1/2

The derivative gap of a pair is s = 1/q - 1/p - 1/2.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Dict, List, Tuple, Union

FLAVORS = ("wave", "schrodinger")


class _Infinity:
    _inst = None

    def __new__(cls):
        if cls._inst is None:
            cls._inst = super().__new__(cls)
        return cls._inst

    def __repr__(self):
        return "INF"

    def __str__(self):
        return "inf"

    def __reduce__(self):
        return (_Infinity, ())


INF = _Infinity()
Exponent = Union[Fraction, _Infinity]


class AdmissibilityError(ValueError):
    pass


def parse_exponent(value) -> Exponent:
    """Accepts INF, 'inf', ints, Fractions and strings like '8/3'.  Floats are rejected."""
    if value is INF:
        return INF
    if isinstance(value, str):
        v = value.strip().lower()
        if v in ("inf", "infinity", "oo"):
            return INF
        return Fraction(v)
    if isinstance(value, float):
        raise AdmissibilityError("exponents must be exact (int, Fraction, 'a/b' or 'inf'), not float")
    return Fraction(value)


def reciprocal(p: Exponent) -> Fraction:
    return Fraction(0) if p is INF else 1 / Fraction(p)


def exponent_str(p: Exponent) -> str:
    return "inf" if p is INF else str(p)


def gap(p, q) -> Fraction:
    """s = 1/q - 1/p - 1/2."""
    return reciprocal(parse_exponent(q)) - reciprocal(parse_exponent(p)) - Fraction(1, 2)


def _params(n: int, flavor: str) -> Tuple[int, Fraction]:
    """(d, lower) with scaling 2/p + d/q = d/2 and the open lower bound on 1/q."""
    if flavor == "wave":
        return n - 1, Fraction(n - 3, 2 * (n - 1)) if n > 1 else Fraction(-1)
    if flavor == "schrodinger":
        return n, Fraction(n - 2, 2 * n)
    raise AdmissibilityError(f"unknown flavor {flavor!r}; known: {FLAVORS}")


@dataclass(frozen=True)
class AdmissiblePair:
    p: Exponent
    q: Exponent
    n: int
    flavor: str
    s: Fraction = field(init=False)

    def __post_init__(self):
        object.__setattr__(self, "s", gap(self.p, self.q))

    def to_dict(self) -> Dict:
        return {"p": exponent_str(self.p), "q": exponent_str(self.q), "n": self.n, "flavor": self.flavor,
                "s": str(self.s), "s_float": float(self.s)}


@dataclass
class Verdict:
    admissible: bool
    violations: List[str]
    s: Fraction

    def __bool__(self):
        return self.admissible


def is_admissible(p, q, n: int, flavor: str) -> Verdict:
    """Direct evaluation of every condition, naming each one that fails."""
    p, q = parse_exponent(p), parse_exponent(q)
    d, lower = _params(n, flavor)
    ip, iq = reciprocal(p), reciprocal(q)
    bad = []
    if p is not INF and p < 1:
        bad.append("p >= 1")
    if q is not INF and q < 1:
        bad.append("q >= 1")
    if 2 * ip + d * iq != Fraction(d, 2):
        bad.append(f"scaling 2/p + {d}/q = {d}/2")
    if not ip < Fraction(1, 2):
        bad.append("2 < p")
    if not iq <= Fraction(1, 2):
        bad.append("2 <= q")
    if not iq > lower:
        bound = "inf" if lower == 0 else str(1 / lower) if lower > 0 else "none"
        bad.append(f"q < {bound}")
    return Verdict(not bad, bad, iq - ip - Fraction(1, 2))


def required_inverse_p(q, n: int, flavor: str):
    """The unique 1/p compatible with q, or None when q is outside its range."""
    d, lower = _params(n, flavor)
    iq = reciprocal(parse_exponent(q))
    if not (lower < iq <= Fraction(1, 2)):
        return None
    return Fraction(d, 2) * (Fraction(1, 2) - iq)


def closed_form_verdict(p, q, n: int, flavor: str) -> bool:
    """Solve the scaling identity for 1/p and compare; the p-range then follows from the q-range."""
    need = required_inverse_p(q, n, flavor)
    return need is not None and reciprocal(parse_exponent(p)) == need


def admissible_ladder(n: int, flavor: str, count: int) -> List[AdmissiblePair]:
    """``count`` pairs with 1/p = k/(2 count), k = 0..count-1; k = 0 is (inf, 2)."""
    if count < 1:
        raise AdmissibilityError("count must be >= 1")
    if flavor == "wave" and n < 4:
        raise AdmissibilityError("wave-admissible ladders need n >= 4")
    if flavor == "schrodinger" and n < 3:
        raise AdmissibilityError("Schrodinger-admissible ladders need n >= 3")
    d, _ = _params(n, flavor)
    out = []
    for k in range(count):
        ip = Fraction(k, 2 * count)
        iq = Fraction(1, 2) - 2 * ip / d
        p = INF if ip == 0 else 1 / ip
        pair = AdmissiblePair(p, 1 / iq, n, flavor)
        if not is_admissible(pair.p, pair.q, n, flavor):
            raise AssertionError(f"ladder produced an inadmissible pair {pair}")
        out.append(pair)
    return out


def rational_grid(denominator: int = 12, p_max: int = 48, q_range=(2, 8)) -> Tuple[List[Exponent], List[Fraction]]:
    """p on (2, p_max] and q on [q_range] in steps of 1/denominator, plus p = inf."""
    ps: List[Exponent] = [Fraction(k, denominator) for k in range(2 * denominator + 1, p_max * denominator + 1)]
    ps.append(INF)
    qs = [Fraction(k, denominator) for k in range(q_range[0] * denominator, q_range[1] * denominator + 1)]
    return ps, qs


def oracle_sweep(n: int, flavor: str, denominator: int = 12) -> Dict:
    """Closed-form verdict against direct integer evaluation on the rational grid.

    The direct side clears denominators: with p = a/D and q = b/D the
    scaling identity reads 4 D b + 2 d D a = d a b (2 d D = d b for p = inf),
    and every range test becomes an integer comparison.
    """
    d, lower = _params(n, flavor)
    D = denominator
    ps, qs = rational_grid(D)
    index = {p: i for i, p in enumerate(ps)}
    a_vals = [None if p is INF else int(p * D) for p in ps]
    lo_num, lo_den = lower.numerator, lower.denominator
    mismatches, admissible = [], 0
    for q in qs:
        need = required_inverse_p(q, n, flavor)
        # position of the closed-form p on the grid (-1 if absent)
        hit = -1 if need is None else index.get(INF if need == 0 else 1 / need, -1)
        b = int(q * D)
        # 1/q = D/b; lower < D/b <= 1/2
        q_ok = lo_num * b < lo_den * D and 2 * D <= b
        lhs_q, dab = 4 * D * b, d * b
        for i, a in enumerate(a_vals):
            if a is None:
                direct = q_ok and 2 * d * D == dab
            else:
                direct = q_ok and 2 * D < a and lhs_q + 2 * d * D * a == dab * a
            admissible += direct
            if direct != (i == hit):
                mismatches.append((exponent_str(ps[i]), str(q)))
    return {"n": n, "flavor": flavor, "pairs": len(ps) * len(qs), "admissible": admissible, "mismatches": mismatches}
