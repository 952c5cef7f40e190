"""Virial functional Theta(t) and its two time derivatives.

With L = H^2 and u_t = iHu,

    Theta      = (phi u_t, u_t) + Re((2 phi L - L phi) u, u)
               = (phi u_t, u_t) + Re(phi L u, u)
    Theta'     = Re([L, phi] u, u_t)  = Re(phi u, L u_t) - Re(phi L u, u_t)
    Theta''    = -1/2 Re([L, [L, phi]] u, u) = -Re(phi u, L^2 u) + (phi L u, L u)

The right-hand forms use only that L is hermitian, so they hold exactly for
the discrete operator and never differentiate the product phi u.  The
explicit commutator [L, phi] = -(2 grad phi . grad_A + Delta phi) gives a
second, independent expression for Theta'.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence

import numpy as np
import scipy.fft as sfft

from ..evolution import DEFAULT_MAX_DIM, Trajectory, evolve
from ..fields import SpinorField
from ..multipliers import MultiplierSpec, hessian_decomposed, surface_delta_integral
from ..operators import DiracOperator


class VirialError(ValueError):
    pass


def _weighted(values: np.ndarray, weight: np.ndarray) -> np.ndarray:
    return values * weight[..., None]


def _inner(grid, f: np.ndarray, g: np.ndarray) -> complex:
    return complex(np.vdot(g, f)) * grid.cell_volume


@dataclass
class VirialState:
    """Theta and its derivative identities at one state."""

    theta: float
    dtheta: float
    d2theta: float
    dtheta_explicit: float

    @property
    def crosscheck_error(self) -> float:
        """|Theta' (commutator form) - Theta' (explicit form)| relative to |Theta'|."""
        return abs(self.dtheta - self.dtheta_explicit) / max(abs(self.dtheta), 1e-300)


def _pair_density(x: np.ndarray, y: np.ndarray) -> np.ndarray:
    """sum_a x[a] conj(y[a]) for component-major arrays, one component at a time."""
    acc = x[0] * y[0].conj()
    for a in range(1, x.shape[0]):
        acc += x[a] * y[a].conj()
    return acc


class _Densities:
    """Pointwise spinor pairings of u, Hu, ..., H^4 u and grad_A u.

    Every multiplier-dependent quantity is a weighted sum of these scalar
    fields, so the operator is applied once per state however many
    multipliers are evaluated.
    """

    def __init__(self, op: DiracOperator, u: SpinorField, second: bool):
        g = op.grid
        v = np.ascontiguousarray(np.moveaxis(op._check(u), -1, 0))
        h1 = op._apply_cm(v)
        h2 = op._apply_cm(h1)
        h3 = op._apply_cm(h2)
        self.h1h1 = _pair_density(h1, h1).real
        self.h2v = _pair_density(h2, v)
        self.vh3 = _pair_density(v, h3)
        self.h2h1 = _pair_density(h2, h1)
        del h3
        self.vh4 = self.h2h2 = None
        if second:
            h4 = op._apply_cm(op._apply_cm(h2))
            self.vh4 = _pair_density(v, h4)
            self.h2h2 = _pair_density(h2, h2).real
            del h4
        self.vh1 = _pair_density(v, h1)
        # grad_A u paired with H u, one direction at a time
        axes = tuple(range(1, g.n + 1))
        fh = sfft.fftn(v, axes=axes)
        self.gh1 = []
        for k in range(g.n):
            d = sfft.ifftn(1j * g.freq(k)[None] * fh, axes=axes)
            if op.has_potential:
                d -= 1j * op.A[..., k][None] * v
            self.gh1.append(_pair_density(d, h1))


def _state_from(op: DiracOperator, dn: _Densities, spec: MultiplierSpec) -> VirialState:
    # with u_t = iHu: (phi u_t, u_t) = sum phi |Hu|^2, Re(phi v, L u_t) = Im(v conj H^3 u), ...
    g = op.grid
    ev = spec.on_grid(g)
    phi = ev["phi"]
    dv = g.cell_volume
    theta = float(np.sum(phi * (dn.h1h1 + dn.h2v.real))) * dv
    dtheta = float(np.sum(phi * (dn.vh3.imag - dn.h2h1.imag))) * dv
    d2theta = np.nan
    if dn.vh4 is not None:
        d2theta = float(np.sum(phi * (dn.h2h2 - dn.vh4.real))) * dv
    # explicit form: -Re(P u, u_t) = -Im(P u, Hu) with P = 2 grad phi . grad_A + Delta phi
    w = ev["d1"] / g.r
    ex = ev["lap"] * dn.vh1.imag
    for k in range(g.n):
        ex = ex + 2.0 * w * g.coord(k) * dn.gh1[k].imag
    explicit = -float(np.sum(ex)) * dv
    return VirialState(theta, dtheta, float(d2theta), explicit)


def _norm(grid, f: np.ndarray) -> float:
    return float(np.sqrt(np.sum(np.abs(f) ** 2) * grid.cell_volume))


def _commutator_part(g, ev, v: np.ndarray, grads) -> np.ndarray:
    """P u = 2 grad phi . grad_A u + (Delta phi) u, so that [H^2, phi] = -P."""
    dphi_r = ev["d1"] / g.r
    pu = _weighted(v, ev["lap"])
    for k in range(g.n):
        pu += 2.0 * _weighted(grads[k], dphi_r * g.coord(k))
    return pu


def virial_states(op: DiracOperator, u: SpinorField, specs: Sequence[MultiplierSpec],
                  second: bool = True) -> List[VirialState]:
    """One VirialState per multiplier; the operator is applied once for all of them."""
    dn = _Densities(op, u, second)
    return [_state_from(op, dn, s) for s in specs]


def virial_state(op: DiracOperator, u: SpinorField, spec: MultiplierSpec, second: bool = True) -> VirialState:
    return virial_states(op, u, [spec], second)[0]


def theta(traj: Trajectory, spec: MultiplierSpec, k: int) -> float:
    return virial_state(traj.op, traj.states[k], spec, second=False).theta


def lhs_terms(op: DiracOperator, u: SpinorField, spec: MultiplierSpec,
              surface: str = "spectral") -> Dict[str, float]:
    """Term-by-term evaluation of the second-derivative side of the virial identity.

    hessian   2 int grad_A u . D^2 phi . conj(grad_A u)
    bilap     -1/2 int |u|^2 Delta^2 phi (regular part, single layer on |x| = R,
              point mass at the origin for |x| in three dimensions)
    b_tau     -2 int phi' Im(u . B_tau . conj(grad_A u))
    spin      Im(phi' sum_{j<k} alpha_j alpha_k d_r B^{jk} u, u)
    """
    g = op.grid
    ev = spec.on_grid(g)
    grad = op.covariant_gradient(u)
    dens = u.density()
    out = {"hessian": 2.0 * float(np.sum(hessian_decomposed(spec, g, grad))) * g.cell_volume}
    bil = float(np.sum(dens * ev["bilap"])) * g.cell_volume
    if spec.has_perturb:
        bil += surface_delta_integral(spec, g, dens, method=surface)
    if spec.origin_coefficient():
        u0 = g.interpolate(u.values, np.zeros(g.n))
        bil += spec.origin_coefficient() * float(np.sum(np.abs(u0) ** 2))
    out["bilap"] = -0.5 * bil
    if op.has_potential:
        btau = op.potential.B_tau(g.points)
        contr = np.zeros(g.shape + (u.M,), dtype=complex)
        for k in range(g.n):
            contr += btau[..., k, None] * np.conj(grad[k].values)
        out["b_tau"] = -2.0 * float(np.sum(ev["d1"][..., None] * np.imag(u.values * contr))) * g.cell_volume
        drb = op.potential.dr_B(g.points)
        spin = op._spin_field(drb * ev["d1"][..., None, None], u.values)
        out["spin"] = _inner(g, spin, u.values).imag
    else:
        out["b_tau"] = 0.0
        out["spin"] = 0.0
    out["total"] = out["hessian"] + out["bilap"] + out["b_tau"] + out["spin"]
    return out


@dataclass
class VirialReport:
    times: List[float]
    theta: List[float]
    dtheta_identity: List[float]
    dtheta_explicit: List[float]
    d2theta_identity: List[float]
    dtheta_fd: List[Optional[float]]
    d2theta_fd: List[Optional[float]]
    dtheta_explicit_fd: List[Optional[float]]
    residual_first: List[Optional[float]]
    residual_second: List[Optional[float]]
    crosscheck: List[float]
    lhs: List[Dict[str, float]] = field(default_factory=list)
    multiplier: Dict = field(default_factory=dict)

    def to_dict(self) -> Dict:
        return {k: getattr(self, k) for k in self.__dataclass_fields__}

    def max_crosscheck(self) -> float:
        return max(self.crosscheck)

    def interior_residuals(self):
        r1 = [r for r in self.residual_first if r is not None]
        r2 = [r for r in self.residual_second if r is not None]
        return r1, r2


def virial_report(traj: Trajectory, spec: MultiplierSpec, with_lhs: bool = False) -> VirialReport:
    """Evaluate Theta and both identities at every record; difference in time at interior records."""
    if len(traj) < 3:
        raise VirialError("virial residuals need at least three recorded times")
    tau = traj.uniform_step()
    states = [virial_state(traj.op, s, spec) for s in traj.states]
    th = [s.theta for s in states]
    K = len(states)
    none = [None] * K
    d1fd, d2fd, exfd, r1, r2 = list(none), list(none), list(none), list(none), list(none)
    for k in range(1, K - 1):
        d1fd[k] = (th[k + 1] - th[k - 1]) / (2 * tau)
        d2fd[k] = (th[k + 1] - 2 * th[k] + th[k - 1]) / tau**2
        exfd[k] = (states[k + 1].dtheta_explicit - states[k - 1].dtheta_explicit) / (2 * tau)
        r1[k] = d1fd[k] - states[k].dtheta
        r2[k] = d2fd[k] - states[k].d2theta
    lhs = [lhs_terms(traj.op, s, spec) for s in traj.states] if with_lhs else []
    return VirialReport(
        times=[float(t) for t in traj.times],
        theta=th,
        dtheta_identity=[s.dtheta for s in states],
        dtheta_explicit=[s.dtheta_explicit for s in states],
        d2theta_identity=[s.d2theta for s in states],
        dtheta_fd=d1fd,
        d2theta_fd=d2fd,
        dtheta_explicit_fd=exfd,
        residual_first=r1,
        residual_second=r2,
        crosscheck=[s.crosscheck_error for s in states],
        lhs=lhs,
        multiplier={"kind": spec.kind, "n": spec.n, "R": spec.R},
    )


def virial_first_identity_residual(traj: Trajectory, spec: MultiplierSpec) -> Dict:
    rep = virial_report(traj, spec)
    return {"times": rep.times[1:-1], "residuals": rep.residual_first[1:-1], "crosscheck": rep.crosscheck}


def virial_second_identity_residual(traj: Trajectory, spec: MultiplierSpec, with_lhs: bool = True) -> Dict:
    rep = virial_report(traj, spec, with_lhs=with_lhs)
    return {
        "times": rep.times[1:-1],
        "residuals": rep.residual_second[1:-1],
        "d2theta": rep.d2theta_identity[1:-1],
        "lhs": rep.lhs[1:-1] if with_lhs else [],
    }


def fitted_order(steps: Sequence[float], errors: Sequence[float]) -> float:
    """Least-squares slope of log|error| against log(step)."""
    s = np.log(np.asarray(steps, dtype=float))
    e = np.log(np.abs(np.asarray(errors, dtype=float)))
    return float(np.polyfit(s, e, 1)[0])


def virial_convergence_many(op: DiracOperator, u_star: SpinorField, specs: Sequence[MultiplierSpec],
                           taus: Sequence[float], tol: float = 1e-12, method: str = "krylov",
                           max_dim: int = DEFAULT_MAX_DIM) -> List[Dict]:
    """Centred-difference residuals of both identities at one state for a sequence of steps.

    Two half-runs from u_star record the flow at +tau and -tau for every
    tau; Theta at the three points is compared with the identities at the
    centre.  The algebraic cross-check is evaluated at every recorded state.
    """
    taus = sorted({float(t) for t in taus})
    if len(taus) < 2 or taus[0] <= 0:
        raise VirialError("need at least two distinct positive steps")
    fwd = evolve(op, u_star, [0.0] + taus, tol=tol, method=method, max_dim=max_dim)
    bwd = evolve(op, u_star, [0.0] + [-t for t in taus], tol=tol, method=method, max_dim=max_dim)
    centre = virial_states(op, u_star, specs)
    hi = [virial_states(op, s, specs, second=False) for s in fwd.states[1:]]
    lo = [virial_states(op, s, specs, second=False) for s in bwd.states[1:]]
    out = []
    for i, spec in enumerate(specs):
        c = centre[i]
        r1 = [(hi[k][i].theta - lo[k][i].theta) / (2 * t) - c.dtheta for k, t in enumerate(taus)]
        r2 = [(hi[k][i].theta - 2 * c.theta + lo[k][i].theta) / t**2 - c.d2theta for k, t in enumerate(taus)]
        cross = [c.crosscheck_error] + [st[i].crosscheck_error for st in hi + lo]
        out.append({
            "multiplier": {"kind": spec.kind, "n": spec.n, "R": spec.R},
            "taus": taus,
            "residual_first": r1,
            "residual_second": r2,
            "order_first": fitted_order(taus, r1),
            "order_second": fitted_order(taus, r2),
            "theta": c.theta,
            "dtheta": c.dtheta,
            "d2theta": c.d2theta,
            "crosscheck": c.crosscheck_error,
            "crosscheck_max": max(cross),
            "norm_drift": max(fwd.norm_drift(), bwd.norm_drift()),
        })
    return out


def virial_convergence(op: DiracOperator, u_star: SpinorField, spec: MultiplierSpec,
                       taus: Sequence[float], tol: float = 1e-12, method: str = "krylov",
                       max_dim: int = DEFAULT_MAX_DIM) -> Dict:
    return virial_convergence_many(op, u_star, [spec], taus, tol, method, max_dim)[0]


# ---------------------------------------------------------------------------
# right-hand side of the virial identity


def mass_term_check(op: DiracOperator, u: SpinorField, spec: MultiplierSpec) -> Dict[str, float]:
    """The mass contribution to Re(u_t, P u) with u_t = -i(m beta + D_A) u.

    ``stated`` is Re[-i m (beta u, P u)], ``real_part`` is Re(beta u, P u).
    P is anti-hermitian and commutes with beta, so (beta u, P u) is purely
    imaginary: ``real_part`` vanishes while ``stated`` = m Im(beta u, P u)
    does not in general.  Both are divided by m ||beta u|| ||P u||.
    """
    g = op.grid
    ev = spec.on_grid(g)
    v = op._check(u)
    pu = _commutator_part(g, ev, v, op._gradient(v))
    bu = v @ op.rep.beta.T
    y = _inner(g, bu, pu)
    m = op.mass
    scale = _norm(g, bu) * _norm(g, pu)
    if scale == 0.0 or m == 0.0:
        return {"stated": 0.0, "real_part": 0.0, "scale": scale, "value": 0.0}
    return {"stated": abs((-1j * m * y).real) / (m * scale), "real_part": abs(y.real) / scale,
            "scale": m * scale, "value": float((-1j * m * y).real)}


def young_chain(op: DiracOperator, u: SpinorField, spec: MultiplierSpec) -> Dict[str, float]:
    """Both sides of |Re(u_t, P u)| <= 3/2 ||D_A u||^2 + ||grad phi . grad_A u||^2 + 1/2 ||u Delta phi||^2."""
    g = op.grid
    ev = spec.on_grid(g)
    v = op._check(u)
    grads = op._gradient(v)
    pu = _commutator_part(g, ev, v, grads)
    ut = 1j * op._apply(v)
    lhs = abs(_inner(g, ut, pu).real)
    dphi_r = ev["d1"] / g.r
    radial = sum(_weighted(grads[k], dphi_r * g.coord(k)) for k in range(g.n))
    du = op.apply_dirac_massless(u).values
    terms = {
        "dirac": 1.5 * _norm(g, du) ** 2,
        "radial": _norm(g, radial) ** 2,
        "laplacian": 0.5 * _norm(g, _weighted(v, ev["lap"])) ** 2,
    }
    rhs = sum(terms.values())
    return {"lhs": lhs, "rhs": rhs, "slack": rhs - lhs, **terms}
