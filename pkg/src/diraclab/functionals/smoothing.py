"""Local smoothing (Morrey-Campanato) norms and their dyadic duals.

For a trajectory u(t) the local mass at radius R is

    M(R) = (1/R) int dt int_{|x| <= R} |u|^2

on the dyadic ladder R = 2h, 4h, ... up to L/2, with the time integral done
by the trapezoid rule on the recorded grid.  Shells are always
2^j <= |x| < 2^(j+1).
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from typing import Dict, List, Optional, Sequence

import numpy as np
from scipy.integrate import trapezoid

from ..evolution import Trajectory
from ..fields import Grid, PotentialSpec, SpinorField
from ..operators import DiracOperator, radial_tangential_split


class SmoothingError(ValueError):
    pass


def radius_ladder(grid: Grid) -> List[float]:
    """R = 2h, 4h, ... while R <= L/2."""
    out, R = [], 2.0 * grid.h
    while R <= grid.L / 2 * (1 + 1e-12):
        out.append(R)
        R *= 2.0
    if not out:
        raise SmoothingError(f"box too small for a radius ladder (h={grid.h}, L={grid.L})")
    return out


def _trapezoid(times: np.ndarray, values: np.ndarray) -> float:
    if len(times) == 1:
        return 0.0
    return float(trapezoid(values, times))


def _ball_masses(grid: Grid, density: np.ndarray, radii: Sequence[float]) -> np.ndarray:
    r = grid.r
    return np.array([float(density[r <= R].sum()) * grid.cell_volume for R in radii])


def step1_constants(op: DiracOperator, u: SpinorField) -> Dict[str, float]:
    """K1 = (int |u|^2/|x|^3)^(1/2) and K2 = (int |grad^tau_A u|^2/|x|)^(1/2)."""
    g = op.grid
    _, tang = radial_tangential_split(op.covariant_gradient(u), g)
    t2 = sum(t.density() for t in tang)
    k1 = math.sqrt(float(np.sum(u.density() / g.r**3)) * g.cell_volume)
    k2 = math.sqrt(float(np.sum(t2 / g.r)) * g.cell_volume)
    return {"K1": k1, "K2": k2}


def quadratic_form(C1: float, C2: float, K1: float, K2: float, n: int) -> float:
    """C = 2 K2^2 - 2 C1 K1 K2 - C2 K1^2 + (n-1)(n-3) K1^2 / 2."""
    return 2 * K2**2 - 2 * C1 * K1 * K2 - C2 * K1**2 + (n - 1) * (n - 3) * K1**2 / 2


@dataclass
class SmoothingReport:
    radii: List[float]
    times: List[float]
    masses: List[float]
    sup: float
    argmax_R: float
    norm_f2: float
    ratio: float
    grad_masses: List[float] = field(default_factory=list)
    grad_sup: float = 0.0
    grad_argmax_R: float = 0.0
    grad_ratio: float = 0.0
    K1: List[float] = field(default_factory=list)
    K2: List[float] = field(default_factory=list)
    C: List[float] = field(default_factory=list)
    C1: Optional[float] = None
    C2: Optional[float] = None
    interval: str = "[0, T]"

    def to_dict(self) -> Dict:
        return asdict(self)

    @property
    def min_C(self) -> float:
        return min(self.C) if self.C else math.nan


def _sup(radii, masses):
    k = int(np.argmax(masses))
    return float(masses[k]), float(radii[k])


def smoothing_norm(traj: Trajectory, backward: Optional[Trajectory] = None, gradient: bool = False,
                   constants: Optional[Dict[str, float]] = None) -> SmoothingReport:
    """sup over the radius ladder of (1/R) int dt int_{|x|<=R} |u|^2, relative to ||f||^2.

    ``backward`` is an optional second half-run from the same datum toward
    negative times; the two time integrals are added.  ``gradient`` adds
    the same quantity for |D_A u|^2, relative to ||D_A f||^2.  With
    ``constants`` (keys C1, C2) the Step-1 form C is evaluated at every
    recorded state.
    """
    if len(traj) == 0:
        raise SmoothingError("empty trajectory")
    runs = [traj] if backward is None else [traj, backward]
    g = traj.grid
    op = traj.op
    radii = radius_ladder(g)
    massless = op.with_mass(0.0)
    masses = np.zeros(len(radii))
    gmasses = np.zeros(len(radii))
    all_times, K1, K2, C = [], [], [], []
    for run in runs:
        t = np.abs(np.asarray(run.times, dtype=float))
        per_time = np.array([_ball_masses(g, s.density(), radii) for s in run.states])
        masses += np.array([_trapezoid(t, per_time[:, i]) for i in range(len(radii))])
        if gradient:
            gper = np.array([_ball_masses(g, massless.apply(s).density(), radii) for s in run.states])
            gmasses += np.array([_trapezoid(t, gper[:, i]) for i in range(len(radii))])
        if constants is not None:
            for s in run.states:
                k = step1_constants(op, s)
                K1.append(k["K1"])
                K2.append(k["K2"])
                C.append(quadratic_form(constants["C1"], constants["C2"], k["K1"], k["K2"], g.n))
        all_times.extend(float(x) for x in run.times)
    masses /= np.asarray(radii)
    gmasses /= np.asarray(radii)
    f = traj.states[0]
    norm2 = f.norm() ** 2
    sup, arg = _sup(radii, masses)
    rep = SmoothingReport(
        radii=radii, times=all_times, masses=masses.tolist(), sup=sup, argmax_R=arg, norm_f2=norm2,
        ratio=sup / norm2 if norm2 > 0 else 0.0, K1=K1, K2=K2, C=C,
        C1=None if constants is None else constants["C1"], C2=None if constants is None else constants["C2"],
        interval="[-T, T]" if backward is not None else "[0, T]",
    )
    if gradient:
        gnorm2 = massless.apply(f).norm() ** 2
        rep.grad_masses = gmasses.tolist()
        rep.grad_sup, rep.grad_argmax_R = _sup(radii, gmasses)
        rep.grad_ratio = rep.grad_sup / gnorm2 if gnorm2 > 0 else 0.0
    return rep


# ---------------------------------------------------------------------------
# dyadic shells


def shell_indices(grid: Grid) -> List[int]:
    """j with 2^j <= L whose shell 2^j <= |x| < 2^(j+1) contains grid points."""
    r = grid.r
    lo = math.floor(math.log2(float(r.min())))
    hi = math.floor(math.log2(grid.L))
    return [j for j in range(lo, hi + 1) if np.any((r >= 2.0**j) & (r < 2.0 ** (j + 1)))]


def shell_norms(grid: Grid, times: Sequence[float], F: Sequence[np.ndarray]) -> Dict[int, float]:
    """||F||_{L^2_t L^2(shell j)} for every shell; F[k] is a scalar or spinor array at times[k]."""
    if len(F) != len(times):
        raise SmoothingError("F must be sampled on the time grid")
    t = np.asarray(times, dtype=float)
    dens = [np.abs(np.asarray(x)) ** 2 for x in F]
    dens = [d.sum(axis=-1) if d.ndim == grid.n + 1 else d for d in dens]
    r = grid.r
    out = {}
    for j in shell_indices(grid):
        mask = (r >= 2.0**j) & (r < 2.0 ** (j + 1))
        per_t = np.array([float(d[mask].sum()) * grid.cell_volume for d in dens])
        out[j] = math.sqrt(abs(_trapezoid(t, per_t)) if len(t) > 1 else float(per_t[0]))
    return out


def dual_dyadic_norm(grid: Grid, times: Sequence[float], F: Sequence[np.ndarray]) -> float:
    """sum_j 2^(j/2) ||F||_{L^2_t L^2(2^j <= |x| < 2^(j+1))}.

    With a single recorded time the time integral is dropped and the
    spatial L^2 norm on each shell is used.
    """
    return float(sum(2.0 ** (j / 2) * v for j, v in shell_norms(grid, times, F).items()))


def holder_audit(traj: Trajectory, pot: PotentialSpec) -> Dict[str, float]:
    """Both sides of  ||A u||_dual <= (sum_j 2^j sup_j |A|) sup_j 2^(-j/2) ||u||_{L^2_t L^2(shell j)}.

    The sups of |A| are taken over the grid points of each shell, so the
    inequality is exact at the discrete level.
    """
    g = traj.grid
    amag = np.linalg.norm(pot.A(g.points), axis=-1) if not pot.is_zero else np.zeros(g.shape)
    times = list(traj.times)
    lhs = dual_dyadic_norm(g, times, [amag[..., None] * s.values for s in traj.states])
    un = shell_norms(g, times, [s.values for s in traj.states])
    r = g.r
    a_sum = 0.0
    for j in un:
        mask = (r >= 2.0**j) & (r < 2.0 ** (j + 1))
        a_sum += 2.0**j * float(amag[mask].max())
    u_sup = max(2.0 ** (-j / 2) * v for j, v in un.items())
    return {"lhs": lhs, "A_sum": a_sum, "u_shell_sup": u_sup, "rhs": a_sum * u_sup,
            "holds": lhs <= a_sum * u_sup * (1 + 1e-12)}

