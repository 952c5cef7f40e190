"""Unitary time evolution u(t) = exp(itH) f.

The default propagator is a matrix-free Lanczos exponential.  Each step
builds a Krylov basis of H, exponentiates the tridiagonal projection
exactly through its eigendecomposition and stops as soon as the a
posteriori estimate ``beta_m |[exp(i tau T) e_1]_m|`` drops below the
tolerance.  If the basis hits its size limit first, the step is halved.

For A = 0 an exact propagator is also available: per Fourier mode the
symbol sigma = alpha.xi + m beta satisfies sigma^2 = lambda^2, so
exp(it sigma) = cos(t lambda) + i sin(t lambda) sigma / lambda.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Sequence

import numpy as np
from scipy.linalg import eigh_tridiagonal

from .fields import SpinorField, read_snapshot, write_snapshot
from .operators import DiracOperator

DEFAULT_TOL = 1e-10
DEFAULT_MAX_DIM = 40
STEP_NORM_PRODUCT = 10.0
MAX_SUBSTEPS = 2000


class EvolutionError(RuntimeError):
    pass


@dataclass
class KrylovStep:
    tau: float
    dim: int
    estimate: float


def _lanczos_expm(apply, v: np.ndarray, tau: float, tol: float, max_dim: int):
    """exp(i tau H) v for hermitian H given as ``apply``.

    Returns ``(w, dim, estimate)``; ``estimate`` is None when the basis
    reached ``max_dim`` without meeting ``tol``.
    """
    shape = v.shape
    beta0 = float(np.linalg.norm(v))
    if beta0 == 0.0:
        return v.copy(), 0, 0.0
    V = np.empty((max_dim + 1, v.size), dtype=complex)
    V[0] = v.ravel() / beta0
    alpha = np.zeros(max_dim)
    beta = np.zeros(max_dim)
    for j in range(max_dim):
        w = apply(V[j].reshape(shape)).ravel()
        alpha[j] = float(np.vdot(V[j], w).real)
        w -= alpha[j] * V[j]
        if j > 0:
            w -= beta[j - 1] * V[j - 1]
        # one full reorthogonalisation pass keeps the basis orthonormal to rounding
        w -= (V[: j + 1] @ w.conj()).conj() @ V[: j + 1]
        beta[j] = float(np.linalg.norm(w))
        m = j + 1
        if m == 1:
            evals, evecs = np.array([alpha[0]]), np.ones((1, 1))
        else:
            evals, evecs = eigh_tridiagonal(alpha[:m], beta[: m - 1])
        y = evecs @ (np.exp(1j * tau * evals) * evecs[0].conj())
        breakdown = beta[j] <= 1e-13 * max(1.0, abs(alpha[j]))
        est = 0.0 if breakdown else beta[j] * abs(y[-1])
        if breakdown or est <= tol:
            out = beta0 * (y @ V[:m])
            return out.reshape(shape), m, est
        V[j + 1] = w / beta[j]
    return None, max_dim, None


def krylov_expm(op: DiracOperator, f: SpinorField, tau: float, tol: float = DEFAULT_TOL,
                max_dim: int = DEFAULT_MAX_DIM) -> tuple:
    """exp(i tau H) f with automatic sub-stepping.  Returns ``(field, [KrylovStep])``.

    Raises EvolutionError when more than ``MAX_SUBSTEPS`` sub-steps would be
    needed, which signals a basis limit far too small for the tolerance.
    """
    values = np.ascontiguousarray(np.moveaxis(f.values, -1, 0))
    done, steps = 0.0, []
    sub = tau
    while abs(tau - done) > 1e-15 * max(1.0, abs(tau)):
        sub = math.copysign(min(abs(sub), abs(tau - done)), tau)
        out, dim, est = _lanczos_expm(op._apply_cm, values, sub, tol, max_dim)
        if out is None:
            sub /= 2.0
            if abs(sub) < 1e-12 * max(1.0, abs(tau)):
                raise EvolutionError(f"Krylov iteration did not converge (max_dim={max_dim}, tol={tol:g})")
            continue
        values = out
        done += sub
        steps.append(KrylovStep(sub, dim, est))
        if len(steps) > MAX_SUBSTEPS:
            raise EvolutionError(f"more than {MAX_SUBSTEPS} Krylov sub-steps (max_dim={max_dim}, tol={tol:g})")
    return SpinorField(f.grid, np.moveaxis(values, 0, -1)), steps


def spectral_expm(op: DiracOperator, f: SpinorField, tau: float) -> SpinorField:
    """Exact exp(i tau H0) f for a potential-free operator."""
    if op.has_potential:
        raise EvolutionError("the spectral propagator requires A = 0")
    g = f.grid
    lam = np.sqrt(g.xi2 + op.mass**2)[..., None]
    fh = g.fft(f.values)
    with np.errstate(invalid="ignore", divide="ignore"):
        sinc = np.where(lam > 0, np.sin(tau * lam) / np.where(lam > 0, lam, 1.0), tau)
    out = np.cos(tau * lam) * fh + 1j * sinc * op.apply_symbol(fh)
    return SpinorField(g, g.ifft(out))


@dataclass
class Trajectory:
    """Recorded states u(t_k) of one evolution together with solver metadata."""

    times: np.ndarray
    states: List[SpinorField]
    op: DiracOperator
    method: str
    tol: float
    max_step: float
    krylov_dims: List[int] = field(default_factory=list)
    initial_norm: float = 0.0

    def __len__(self):
        return len(self.times)

    @property
    def grid(self):
        return self.op.grid

    def u_t(self, k: int) -> SpinorField:
        """u_t = iHu, from the equation rather than by differencing."""
        return self.op.apply(self.states[k]) * 1j

    def norm_drift(self) -> float:
        if self.initial_norm == 0.0:
            return 0.0
        return max(abs(s.norm() - self.initial_norm) for s in self.states) / self.initial_norm

    def energies(self) -> np.ndarray:
        return np.array([self.op.apply(s).inner(s).real for s in self.states])

    def energy_drift(self) -> float:
        e = self.energies()
        scale = max(abs(e[0]), 1e-300)
        return float(np.max(np.abs(e - e[0])) / scale)

    def uniform_step(self, rtol: float = 1e-9) -> float:
        d = np.diff(self.times)
        if d.size == 0 or np.max(np.abs(d - d[0])) > rtol * abs(d[0]):
            raise EvolutionError("time grid is not uniform")
        return float(d[0])

    def metadata(self) -> Dict:
        return {
            "method": self.method,
            "tol": self.tol,
            "max_step": self.max_step,
            "krylov_max_dim_used": max(self.krylov_dims, default=0),
            "krylov_steps": len(self.krylov_dims),
            "records": len(self.times),
            "t_first": float(self.times[0]),
            "t_last": float(self.times[-1]),
        }


def default_step(op: DiracOperator) -> float:
    return STEP_NORM_PRODUCT / op.norm_bound()


def _validate(op: DiracOperator, f: SpinorField, t_grid, tol: float, method: str) -> np.ndarray:
    if not (1e-14 < tol < 1e-4):
        raise EvolutionError(f"tolerance must lie in (1e-14, 1e-4), got {tol:g}")
    if method not in ("krylov", "spectral"):
        raise EvolutionError(f"unknown method {method!r}")
    times = np.asarray(t_grid, dtype=float)
    if times.ndim != 1 or times.size == 0:
        raise EvolutionError("t_grid must be a non-empty sequence")
    d = np.diff(times)
    if d.size and not (np.all(d > 0) or np.all(d < 0)):
        raise EvolutionError("t_grid must be strictly monotone")
    op._check(f)
    return times


def iter_evolve(op: DiracOperator, f: SpinorField, t_grid: Sequence[float], tol: float = DEFAULT_TOL,
                method: str = "krylov", max_step: Optional[float] = None,
                max_dim: int = DEFAULT_MAX_DIM, dims: Optional[List[int]] = None):
    """Yield ``(t_k, u(t_k))`` one record at a time without keeping earlier states.

    Same contract as :func:`evolve`; Krylov basis sizes are appended to
    ``dims`` when given.
    """
    times = _validate(op, f, t_grid, tol, method)
    step = default_step(op) if max_step is None else float(max_step)
    norm0 = f.norm()
    state, t_prev = f, 0.0
    for t in times:
        dt = t - t_prev
        if dt != 0.0:
            if method == "spectral":
                state = spectral_expm(op, state, dt)
            else:
                pieces = max(1, math.ceil(abs(dt) / step - 1e-12))
                for _ in range(pieces):
                    state, steps = krylov_expm(op, state, dt / pieces, tol, max_dim)
                    if dims is not None:
                        dims.extend(s.dim for s in steps)
        t_prev = t
        if norm0 > 0:
            drift = abs(state.norm() - norm0) / norm0
            if drift > max(10 * tol, 1e-12):
                raise EvolutionError(f"unitarity drift {drift:.3e} at t={t:g} exceeds 10*tol")
        yield float(t), state


def evolve(op: DiracOperator, f: SpinorField, t_grid: Sequence[float], tol: float = DEFAULT_TOL,
           method: str = "krylov", max_step: Optional[float] = None,
           max_dim: int = DEFAULT_MAX_DIM) -> Trajectory:
    """Record u(t_k) = exp(i t_k H) f on a monotone time grid starting at any t_0.

    ``f`` is the state at time 0; if ``t_grid[0] != 0`` the flow first runs
    to ``t_grid[0]``.  The time grid may decrease (backward flow).
    """
    dims: List[int] = []
    times = _validate(op, f, t_grid, tol, method)
    states = [s for _, s in iter_evolve(op, f, times, tol, method, max_step, max_dim, dims)]
    step = default_step(op) if max_step is None else float(max_step)
    return Trajectory(times, states, op, method, tol, step, dims, f.norm())


def wave_reformulation_check(traj: Trajectory) -> Dict:
    """Residual of u_tt + H^2 u = 0 with a centred second difference in time."""
    if len(traj) < 3:
        raise EvolutionError("need at least three recorded times")
    tau = traj.uniform_step()
    norm0 = traj.initial_norm or 1.0
    res = []
    for k in range(1, len(traj) - 1):
        utt = (traj.states[k + 1] - traj.states[k] * 2.0 + traj.states[k - 1]) * (1.0 / tau**2)
        r = utt + traj.op.apply_h_squared(traj.states[k])
        res.append(r.norm() / norm0)
    return {"tau": abs(tau), "times": traj.times[1:-1].tolist(), "residuals": res, "max_residual": max(res)}


# ---------------------------------------------------------------------------
# archive


def save_trajectory(traj: Trajectory, directory, extra: Optional[Dict] = None) -> Path:
    """Write one snapshot per record plus ``manifest.json``."""
    out = Path(directory)
    out.mkdir(parents=True, exist_ok=True)
    files = []
    for k, s in enumerate(traj.states):
        name = f"state_{k:05d}.snp"
        write_snapshot(out / name, s)
        files.append(name)
    pot = traj.op.potential
    manifest = {
        "schema": "diraclab.trajectory/1",
        "times": [float(t) for t in traj.times],
        "files": files,
        "grid": traj.grid.describe(),
        "mass": traj.op.mass,
        "potential": {"family": pot.family, "params": dict(pot.params), "split": pot.split},
        "solver": traj.metadata(),
    }
    if extra:
        manifest.update(extra)
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True))
    return out


def load_trajectory(directory, op: DiracOperator) -> Trajectory:
    d = Path(directory)
    manifest = json.loads((d / "manifest.json").read_text())
    states = [read_snapshot(d / name) for name in manifest["files"]]
    for s in states:
        op._check(s)
    solver = manifest["solver"]
    return Trajectory(np.array(manifest["times"]), states, op, solver["method"], solver["tol"],
                      solver["max_step"], [], states[0].norm() if states else 0.0)
