"""Mixed space-time norms || |D|^s u ||_{L^p_t L^q_x} along a flow.

s = 1/q - 1/p - 1/2 is applied as the Fourier multiplier |xi|^s on the
torus lattice.  When s < 0 the zero mode is projected out first and its L^2
mass is reported.  Per time the spatial L^q norm of the pointwise spinor
norm is taken by the grid quadrature; the time norm is the trapezoid rule,
or the maximum over records for p = inf.
"""

from __future__ import annotations

import warnings
from dataclasses import asdict, dataclass, field
from typing import Dict, Iterable, List, Optional, Tuple

import numpy as np
from scipy.integrate import trapezoid

from ..admissibility import FLAVORS, INF, AdmissibilityError, exponent_str, is_admissible, parse_exponent
from ..evolution import Trajectory
from ..fields import Grid, SpinorField


class ZeroModeWarning(UserWarning):
    pass


@dataclass
class StrichartzReport:
    p: str
    q: str
    s: float
    flavor: str
    norm: float
    initial_norm: float
    ratio: float
    times: List[float]
    spatial_norms: List[float]
    zero_mode_mass: float = 0.0
    notes: List[str] = field(default_factory=list)

    def to_dict(self) -> Dict:
        return asdict(self)


def _flavor_for(p, q, n: int, flavor: Optional[str]) -> str:
    flavors = FLAVORS if flavor is None else (flavor,)
    reasons = []
    for fl in flavors:
        v = is_admissible(p, q, n, fl)
        if v:
            return fl
        reasons.append(f"{fl}: " + ", ".join(v.violations))
    raise AdmissibilityError(f"(p, q) = ({exponent_str(p)}, {exponent_str(q)}) is not admissible in n={n}: "
                             + "; ".join(reasons))


def fractional_multiplier(grid: Grid, values: np.ndarray, s: float) -> Tuple[np.ndarray, float]:
    """|xi|^s applied to ``values``; returns the result and the L^2 mass of the dropped zero mode."""
    if s == 0.0:
        return values, 0.0
    fh = grid.fft(values)
    xi = np.sqrt(grid.xi2)
    zero = xi == 0.0
    dropped = 0.0
    if s < 0:
        # the zero mode of values is its mean; its L^2 mass is |mean|^2 times the volume
        mean = values.reshape(-1, values.shape[-1]).mean(axis=0)
        dropped = float(np.sum(np.abs(mean) ** 2)) * grid.sites * grid.cell_volume
    with np.errstate(divide="ignore"):
        w = np.where(zero, 0.0, xi ** s)
    return grid.ifft(fh * w[..., None]), dropped


def spatial_norm(grid: Grid, values: np.ndarray, q) -> float:
    """|| |u(x)| ||_{L^q} by the grid quadrature; q may be INF."""
    pointwise = np.sqrt(np.sum(np.abs(values) ** 2, axis=-1))
    if q is INF:
        return float(pointwise.max())
    qf = float(q)
    return float((np.sum(pointwise**qf) * grid.cell_volume) ** (1.0 / qf))


def strichartz_from_states(grid: Grid, records: Iterable[Tuple[float, SpinorField]], p, q,
                           flavor: Optional[str] = None, initial_norm: Optional[float] = None) -> StrichartzReport:
    """Mixed norm over ``(t, u(t))`` records; the states may come from a generator."""
    p, q = parse_exponent(p), parse_exponent(q)
    fl = _flavor_for(p, q, grid.n, flavor)
    s = float(is_admissible(p, q, grid.n, fl).s)
    times, norms, dropped, notes = [], [], 0.0, []
    for t, u in records:
        if initial_norm is None:
            initial_norm = u.norm()
        w, d = fractional_multiplier(grid, u.values, s)
        dropped = max(dropped, d)
        times.append(float(t))
        norms.append(spatial_norm(grid, w, q))
    if not times:
        raise ValueError("no records")
    if dropped > 0.0:
        msg = f"s = {s:g} < 0: zero mode projected out, max dropped L^2 mass {dropped:.3e}"
        warnings.warn(msg, ZeroModeWarning, stacklevel=2)
        notes.append(msg)
    arr = np.asarray(norms)
    if p is INF:
        total = float(arr.max())
    else:
        pf = float(p)
        t = np.abs(np.asarray(times) - times[0])
        total = float(trapezoid(arr**pf, t) ** (1.0 / pf)) if len(times) > 1 else 0.0
    return StrichartzReport(
        p=exponent_str(p), q=exponent_str(q), s=s, flavor=fl, norm=total, initial_norm=float(initial_norm),
        ratio=total / initial_norm if initial_norm else 0.0, times=times, spatial_norms=norms,
        zero_mode_mass=dropped, notes=notes,
    )


def strichartz_norm(traj: Trajectory, p, q, flavor: Optional[str] = None) -> StrichartzReport:
    """|| |D|^s e^{itH} f ||_{L^p L^q} over the recorded times, and its ratio to ||f||.

    ``flavor`` restricts the admissibility check to wave or schrodinger
    pairs; by default either is accepted.
    """
    return strichartz_from_states(traj.grid, zip(traj.times, traj.states), p, q, flavor,
                                  traj.initial_norm or None)
