"""Build an operator and datum from a config, evolve, and run functionals."""

from __future__ import annotations

import json
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Sequence

import numpy as np

from . import admissibility
from .clifford import build_clifford, verify_anticommutation
from .config import ConfigError, ExperimentConfig
from .evolution import evolve, save_trajectory
from .fields import gaussian_packet, make_grid, plane_wave, random_smooth
from .functionals.hardy import hardy_check
from .functionals.reports import SCHEMA, digest, make_report, to_jsonable, write_report, write_virial_csv
from .functionals.smoothing import smoothing_norm
from .functionals.strichartz import strichartz_norm
from .functionals.virial import fitted_order, virial_convergence_many, virial_report
from .hypotheses import check_dyadic_A_sum, check_smoothing_hypotheses
from .multipliers import make_multiplier
from .operators import DiracOperator

_MODULE_OF = {
    "virial": "functionals", "smoothing": "functionals", "hardy": "functionals", "strichartz": "functionals",
    "hypotheses": "hypothesis", "square": "operators",
}


@dataclass
class Setup:
    cfg: ExperimentConfig
    op: DiracOperator
    datum: object

    @property
    def grid(self):
        return self.op.grid


@dataclass
class ExperimentResult:
    config: Dict
    reports: Dict[str, Dict] = field(default_factory=dict)
    failures: List[str] = field(default_factory=list)
    errors: List[str] = field(default_factory=list)
    output: Optional[str] = None

    @property
    def passed(self) -> bool:
        return not self.failures and not self.errors

    @property
    def exit_code(self) -> int:
        return 0 if self.passed else 1


def _spinor(cfg: ExperimentConfig, M: int, rng: np.random.Generator):
    if cfg.spinor == "random":
        return rng.normal(size=M) + 1j * rng.normal(size=M)
    try:
        v = np.array([float(s) for s in cfg.spinor.split(",")])
    except ValueError:
        raise ConfigError(f"spinor must be 'random' or {M} comma-separated numbers") from None
    if v.size != M:
        raise ConfigError(f"spinor has {v.size} entries, expected M={M}")
    return v


def build(cfg: ExperimentConfig) -> Setup:
    rep = build_clifford(cfg.n)
    grid = make_grid(cfg.n, cfg.L, cfg.pts)
    op = DiracOperator(rep, grid, cfg.make_potential(), cfg.mass)
    rng = np.random.default_rng(cfg.seed)
    if cfg.datum == "gaussian":
        f = gaussian_packet(grid, rep.M, cfg.center or None, cfg.width, cfg.momentum or None, _spinor(cfg, rep.M, rng))
    elif cfg.datum == "plane_wave":
        if not cfg.mode:
            raise ConfigError("plane_wave data need a lattice mode")
        f = plane_wave(grid, rep.M, cfg.mode, _spinor(cfg, rep.M, rng))
    else:
        f = random_smooth(grid, rep.M, rng)
    return Setup(cfg, op, f)


def check_strichartz_pair(cfg: ExperimentConfig) -> None:
    """Raise AdmissibilityError before any evolution if (p, q) is not admissible."""
    from .functionals.strichartz import _flavor_for

    _flavor_for(admissibility.parse_exponent(cfg.p), admissibility.parse_exponent(cfg.q), cfg.n, cfg.flavor or None)


def _virial(setup: Setup, traj, out: Optional[Path]):
    cfg = setup.cfg
    spec = make_multiplier(cfg.multiplier, cfg.n, cfg.R)
    rep = virial_report(traj, spec, with_lhs=True)
    if out is not None:
        write_virial_csv(out / "virial.csv", rep)
    worst = rep.max_crosscheck()
    fails = []
    if cfg.crosscheck_tol > 0 and worst > cfg.crosscheck_tol:
        fails.append(f"virial cross-check {worst:.3e} > {cfg.crosscheck_tol:g}")
    if traj.norm_drift() > max(10 * cfg.tol, 1e-12):
        fails.append(f"unitarity drift {traj.norm_drift():.3e}")
    r1, r2 = rep.interior_residuals()
    return rep.to_dict(), {"crosscheck_max": worst, "residual_first": r1, "residual_second": r2}, fails


def _smoothing(setup: Setup, traj, out):
    cfg = setup.cfg
    constants = None
    if cfg.n >= 4:
        env = setup.op.potential.envelope(cfg.n) if not setup.op.potential.is_zero else {"C1": 0.0, "C2": 0.0}
        constants = {"C1": float(env["C1"]), "C2": float(env["C2"])}
    rep = smoothing_norm(traj, gradient=True, constants=constants)
    fails = []
    if min(rep.masses) < 0:
        fails.append("negative local mass")
    if constants is not None:
        budget = (cfg.n - 1) * (cfg.n - 3)
        if constants["C1"] ** 2 + 2 * constants["C2"] <= budget and rep.min_C < 0:
            fails.append(f"Step-1 quadratic form negative ({rep.min_C:.3e})")
    return rep.to_dict(), {}, fails


def _hardy(setup: Setup, traj, out):
    rep = hardy_check(setup.op, setup.datum, setup.cfg.hardy_eps)
    fails = ["Hardy inequality violated"] if rep.violated() else []
    return rep.to_dict(), {"slack": rep.slack, "hardy_slack": rep.hardy_slack}, fails


def _strichartz(setup: Setup, traj, out):
    cfg = setup.cfg
    rep = strichartz_norm(traj, cfg.p, cfg.q, cfg.flavor or None)
    return rep.to_dict(), {}, []


def _hypotheses(setup: Setup, traj, out):
    cfg = setup.cfg
    pot = setup.op.potential
    rep = check_smoothing_hypotheses(pot, cfg.n, cfg.mass)
    dyadic = check_dyadic_A_sum(pot, setup.grid)
    fails = [f"hypothesis {name} fails" for name in rep.failed]
    return {"smoothing": rep.to_dict(), "dyadic_A_sum": dyadic.to_dict()}, {}, fails


def _square(setup: Setup, traj, out):
    op, f = setup.op, setup.datum
    res = op.square_identity_residual(f)
    herm = op.hermiticity_residual(f, op.apply(f))
    fails = [] if herm <= 1e-10 else [f"hermiticity residual {herm:.3e}"]
    return {"square_identity_residual": res, "hermiticity_residual": herm,
            "boundary_ratio": f.boundary_ratio()}, {}, fails


_RUNNERS = {"virial": _virial, "smoothing": _smoothing, "hardy": _hardy, "strichartz": _strichartz,
            "hypotheses": _hypotheses, "square": _square}
_NEEDS_FLOW = {"virial", "smoothing", "strichartz"}


def run_experiment(cfg: ExperimentConfig, output: Optional[str] = None, save_states: bool = False) -> ExperimentResult:
    """Run every selected functional; write a manifest and one JSON report each.

    Configuration and admissibility errors are raised before any work is
    done.  Errors inside a functional are recorded with a module tag and
    the remaining functionals still run.
    """
    if "strichartz" in cfg.functionals:
        check_strichartz_pair(cfg)
    outdir = output or cfg.output or None
    out = Path(outdir) if outdir else None
    result = ExperimentResult(config=cfg.to_dict(), output=str(out) if out else None)
    inputs = cfg.to_dict()
    inputs.pop("output", None)
    setup = build(cfg)
    traj = None
    solver: Dict = {}
    if _NEEDS_FLOW & set(cfg.functionals):
        try:
            traj = evolve(setup.op, setup.datum, cfg.times(), tol=cfg.tol, method=cfg.method, max_dim=cfg.max_dim)
            solver = dict(traj.metadata(), norm_drift=traj.norm_drift(), energy_drift=traj.energy_drift())
            if out is not None and save_states:
                save_trajectory(traj, out / "trajectory", {"config_digest": digest(inputs)})
        except Exception as exc:  # noqa: BLE001 - reported, not swallowed
            result.errors.append(f"[evolution] {type(exc).__name__}: {exc}")
    for name in cfg.functionals:
        if name in _NEEDS_FLOW and traj is None:
            result.errors.append(f"[{_MODULE_OF[name]}] {name}: skipped, no trajectory")
            continue
        try:
            values, residuals, fails = _RUNNERS[name](setup, traj, out)
        except Exception as exc:  # noqa: BLE001
            result.errors.append(f"[{_MODULE_OF[name]}] {name}: {type(exc).__name__}: {exc}")
            continue
        result.failures.extend(fails)
        result.reports[name] = make_report(name, inputs, values, residuals, setup.grid.describe(), solver,
                                           passed=not fails)
    if out is not None:
        for name, rep in result.reports.items():
            write_report(out / f"{name}.json", rep)
        manifest = {
            "schema": SCHEMA,
            "config": inputs,
            "config_digest": digest(inputs),
            "grid": setup.grid.describe(),
            "solver": solver,
            "reports": sorted(result.reports),
            "status": "passed" if result.passed else "failed",
            "failures": result.failures,
            "errors": result.errors,
        }
        write_report(out / "manifest.json", manifest)
    return result


def _run_one(args):
    cfg, output = args
    res = run_experiment(cfg, output)
    return {"output": res.output, "exit_code": res.exit_code, "failures": res.failures, "errors": res.errors}


def run_many(cfgs: Sequence[ExperimentConfig], outputs: Sequence[Optional[str]], parallel: int = 1) -> List[Dict]:
    """Independent experiments, sequentially or in ``parallel`` worker processes."""
    jobs = list(zip(cfgs, outputs))
    if parallel <= 1:
        return [_run_one(j) for j in jobs]
    with ProcessPoolExecutor(max_workers=parallel) as pool:
        return list(pool.map(_run_one, jobs))


def convergence_study(cfg: ExperimentConfig, taus: Optional[Sequence[float]] = None,
                      pts_list: Optional[Sequence[int]] = None) -> Dict:
    """Residuals and fitted orders under refinement in tau and/or pts.

    ``taus``: virial identity residuals at the datum (order about 2).
    ``pts_list``: square-identity residual and anticommutation defect per
    resolution (spectral decay and an exact zero respectively).
    """
    if not taus and not pts_list:
        raise ConfigError("give at least one refinement sequence")
    out: Dict = {"config_digest": digest(cfg.to_dict())}
    if taus:
        if len(taus) < 3:
            raise ConfigError("need at least three tau levels")
        setup = build(cfg)
        spec = make_multiplier(cfg.multiplier, cfg.n, cfg.R)
        (row,) = virial_convergence_many(setup.op, setup.datum, [spec], taus, tol=min(cfg.tol, 1e-12),
                                         method=cfg.method, max_dim=cfg.max_dim)
        out["tau"] = row
    if pts_list:
        if len(pts_list) < 3:
            raise ConfigError("need at least three pts levels")
        rows = []
        for pts in pts_list:
            setup = build(cfg.replace(pts=int(pts)))
            defect = max(verify_anticommutation(setup.op.rep).values())
            rows.append({"pts": int(pts), "h": setup.grid.h,
                         "square_identity_residual": setup.op.square_identity_residual(setup.datum),
                         "anticommutation_defect": defect})
        hs = [r["h"] for r in rows]
        res = [max(r["square_identity_residual"], 1e-300) for r in rows]
        out["pts"] = {"rows": rows, "fitted_order": fitted_order(hs, res)}
    return out


def dump(obj) -> str:
    return json.dumps(to_jsonable(obj), indent=2, sort_keys=True)
