"""Checks of the size and decay conditions a magnetic potential must satisfy.

Constants (for a declared split B = B1 + B2):

    C0 = sup |x|^2 [B1(x)]_1
    C1 = sup |x|^2 |B_tau(x)|
    C2 = sup |x|^3 [d_r B(x)]_1 / 2

Conditions for the smoothing estimate (n >= 4):

    hpC    C1^2 + 2 C2 <= (2/3)(n-1)(n-3)
    C0     C0 < (n-2)^2 / 4
    B2     ||B2||_inf < inf

The weaker ``condC`` (C1^2 + 2 C2 <= (n-1)(n-3)) is what the positivity of
the quadratic form in the first step of the argument needs; it is reported
alongside.  Certified values come from the potential's analytic envelope;
random sampling can only falsify them.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from typing import Dict, List, Optional

import numpy as np

from .clifford import build_clifford, spin_pairing
from .fields import Grid, PotentialSpec, ell1


class HypothesisError(ValueError):
    pass


@dataclass
class HypothesisReport:
    family: str
    eps: float
    n: int
    split: str
    C0: float
    C1: float
    C2: float
    B2_inf: float
    sampled: Dict[str, float]
    budget_hpC: float
    budget_condC: float
    threshold_C0: float
    passes: Dict[str, bool]
    failed: List[str] = field(default_factory=list)
    spin_bound_violations: int = 0
    notes: List[str] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.failed

    def to_dict(self) -> Dict:
        d = asdict(self)
        d["ok"] = self.ok
        return d


def _random_points(n: int, count: int, rng: np.random.Generator, r_min=1e-3, r_max=1e3) -> np.ndarray:
    dirs = rng.normal(size=(count, n))
    dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
    radii = np.exp(rng.uniform(math.log(r_min), math.log(r_max), count))
    return dirs * radii[:, None]


def sampled_constants(pot: PotentialSpec, n: int, count: int = 20000, seed: int = 0) -> Dict[str, float]:
    """Raw sample maxima of the three weighted quantities (lower bounds for the sups)."""
    rng = np.random.default_rng(seed)
    x = _random_points(n, count, rng)
    r = np.linalg.norm(x, axis=1)
    b1 = pot.B1(x)
    out = {
        "C0": float(np.max(r**2 * ell1(b1))),
        "C1": float(np.max(r**2 * np.linalg.norm(pot.B_tau(x), axis=1))),
        "C2": float(np.max(r**3 * ell1(pot.dr_B(x)) / 2)),
        "B2_inf": float(np.max(ell1(pot.B2(x)))),
        "samples": count,
    }
    return out


def spin_bound_check(pot: PotentialSpec, n: int, count: int = 200, seed: int = 1) -> int:
    """Count samples where ||sum_{j<k} alpha_j alpha_k d_r B^{jk}|| exceeds [d_r B]_1 / 2."""
    rep = build_clifford(n)
    rng = np.random.default_rng(seed)
    x = _random_points(n, count, rng, 1e-2, 1e2)
    drb = pot.dr_B(x)
    bad = 0
    for k in range(count):
        mat = spin_pairing(rep, drb[k])
        lhs = np.linalg.norm(mat, 2)
        if lhs > 0.5 * ell1(drb[k]) * (1 + 1e-12) + 1e-15:
            bad += 1
    return bad


def check_smoothing_hypotheses(pot: PotentialSpec, n: int, mass: Optional[float] = None,
                               samples: int = 20000, seed: int = 0) -> HypothesisReport:
    if n < 4:
        raise HypothesisError(f"the smoothing hypotheses are stated for n >= 4, got n={n}")
    if mass == 0 and pot.split == "b2" and not pot.is_zero:
        raise HypothesisError("in the massless case the whole field must be declared as B1 (B2 = 0)")
    env = pot.envelope(n)
    smp = sampled_constants(pot, n, samples, seed) if not pot.is_zero else {
        "C0": 0.0, "C1": 0.0, "C2": 0.0, "B2_inf": 0.0, "samples": 0}
    budget = 2.0 / 3.0 * (n - 1) * (n - 3)
    cond = float((n - 1) * (n - 3))
    thr = (n - 2) ** 2 / 4.0
    lhs = env["C1"] ** 2 + 2 * env["C2"]
    passes = {
        "hpC": lhs <= budget,
        "C0": env["C0"] < thr,
        "B2": math.isfinite(env["B2_inf"]),
        "condC": lhs <= cond,
    }
    notes = []
    for key in ("C0", "C1", "C2", "B2_inf"):
        if smp[key] > env[key] * (1 + 1e-9) + 1e-300:
            notes.append(f"sampled {key}={smp[key]:.6g} exceeds the envelope {env[key]:.6g}")
    failed = [k for k in ("hpC", "C0", "B2") if not passes[k]]
    if notes:
        failed.append("envelope")
    spin_bad = spin_bound_check(pot, n) if not pot.is_zero else 0
    if spin_bad:
        failed.append("spin-bound")
    return HypothesisReport(
        family=pot.family, eps=pot.eps, n=n, split=pot.split,
        C0=env["C0"], C1=env["C1"], C2=env["C2"], B2_inf=env["B2_inf"],
        sampled=smp, budget_hpC=budget, budget_condC=cond, threshold_C0=thr,
        passes=passes, failed=failed, spin_bound_violations=spin_bad, notes=notes,
    )


@dataclass
class DyadicSum:
    partial_sum: float
    partial_sum_envelope: float
    lower_tail: float
    upper_tail: float
    shells: List[Dict]
    verdict: bool
    explanation: str

    @property
    def total(self) -> float:
        return self.partial_sum_envelope + self.lower_tail + self.upper_tail

    def to_dict(self) -> Dict:
        d = asdict(self)
        d["total"] = self.total
        return d


def _shell_sup_envelope(pot: PotentialSpec, lo: float, hi: float, samples: int = 4001) -> float:
    r = np.linspace(lo, hi, samples)
    return float(np.max(pot.abs_A_radial_bound(r)))


def check_dyadic_A_sum(pot: PotentialSpec, grid: Grid) -> DyadicSum:
    """sum_j 2^j sup_{2^j <= |x| < 2^{j+1}} |A| split into three ranges.

    Shells with h <= 2^j <= L/2 are summed from grid samples (and from the
    analytic radial envelope).  Below h the bound |A| <= c |x| with
    c = eps * w(0) gives sum 2^j * c 2^{j+1} = (2c/3) 4^{j0}.  Above the box the
    declared decay |A| <= c |x|^-gamma gives a geometric tail when gamma > 1.
    """
    if pot.is_zero:
        return DyadicSum(0.0, 0.0, 0.0, 0.0, [], True, "A = 0")
    j0 = math.ceil(math.log2(grid.h))
    j1 = math.floor(math.log2(grid.L / 2))
    r = grid.r
    amag = np.linalg.norm(pot.A(grid.points), axis=-1)
    shells, part, part_env = [], 0.0, 0.0
    for j in range(j0, j1 + 1):
        lo, hi = 2.0**j, 2.0 ** (j + 1)
        mask = (r >= lo) & (r < hi)
        s_grid = float(amag[mask].max()) if np.any(mask) else 0.0
        s_env = _shell_sup_envelope(pot, lo, hi)
        shells.append({"j": j, "r_lo": lo, "r_hi": hi, "sup_grid": s_grid, "sup_envelope": s_env})
        part += 2.0**j * s_grid
        part_env += 2.0**j * s_env
    c_loc = abs(pot.eps) * float(pot.profile.w(np.array([0.0]))[0])
    lower = 2.0 * c_loc * 4.0**j0 / 3.0
    start = 2.0 ** (j1 + 1)
    support = pot.profile.support
    if math.isfinite(support):
        upper, j = 0.0, j1 + 1
        while 2.0**j < support:
            upper += 2.0**j * _shell_sup_envelope(pot, 2.0**j, 2.0 ** (j + 1))
            j += 1
        return DyadicSum(part, part_env, lower, upper, shells, True, f"compact support in |x| < {support:g}")
    gamma = pot.decay
    if gamma <= 1:
        return DyadicSum(part, part_env, lower, math.inf, shells, False,
                         f"|A| ~ |x|^-{gamma:g} at infinity: sum 2^j 2^(-j gamma) diverges (needs gamma > 1)")
    # |A| <= c_tail r^-gamma beyond the box, c_tail measured at the box edge
    c_tail = _shell_sup_envelope(pot, start, 64 * start) * start**gamma
    upper = c_tail * start ** (1 - gamma) / (1 - 2.0 ** (1 - gamma))
    return DyadicSum(part, part_env, lower, upper, shells, True, f"geometric tail with gamma={gamma:g}")
