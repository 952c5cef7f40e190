"""Command-line entry point.

Exit codes: 0 pass, 1 invariant violation, 2 usage or configuration error.
"""

from __future__ import annotations

import argparse
import sys
from typing import Dict, List, Optional

import numpy as np

from . import admissibility as adm
from .clifford import CliffordError, build_clifford, verify_anticommutation
from .config import ConfigError, ExperimentConfig, config_fields, load_config, override
from .evolution import EvolutionError, evolve, save_trajectory
from .experiment import build, convergence_study, dump, run_experiment, run_many
from .fields import FieldError, GridError, PotentialError, magnetic_field_of, make_grid, make_potential
from .functionals.reports import digest
from .hypotheses import HypothesisError, check_dyadic_A_sum, check_smoothing_hypotheses
from .multipliers import MultiplierError, make_multiplier, verify_multiplier_bounds, write_multiplier_csv

USAGE_ERRORS = (ConfigError, adm.AdmissibilityError, CliffordError, GridError, FieldError, PotentialError,
                MultiplierError, HypothesisError)
_TAGS = {ConfigError: "config", adm.AdmissibilityError: "admissibility", CliffordError: "clifford",
         GridError: "fields", FieldError: "fields", PotentialError: "fields", MultiplierError: "multipliers",
         HypothesisError: "hypothesis", EvolutionError: "evolution"}


def _emit(obj) -> None:
    sys.stdout.write(dump(obj) + "\n")


def _add_config_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", action="append", default=[], help="key = value config file (repeatable)")
    for name in config_fields():
        p.add_argument(f"--{name}", dest=f"cfg_{name}", default=None, metavar="VALUE")


def _configs(args, **forced) -> List[ExperimentConfig]:
    overrides = {name: getattr(args, f"cfg_{name}") for name in config_fields()}
    bases = [load_config(path) for path in args.config] or [ExperimentConfig()]
    out = []
    for base in bases:
        cfg = override(base, overrides)
        if forced:
            cfg = cfg.replace(**forced)
        out.append(cfg)
    return out


# --- subcommands -----------------------------------------------------------


def cmd_clifford_check(args) -> int:
    dims = [args.n] if args.n else list(range(1, 7))
    rows, ok = [], True
    for n in dims:
        rep = build_clifford(n)
        dev = verify_anticommutation(rep)
        worst = max(dev.values())
        ok &= worst == 0.0
        rows.append({"n": n, "M": rep.M, "max_deviation": worst,
                     "pairs": {f"{j},{k}": v for (j, k), v in sorted(dev.items())}})
    _emit(rows if len(rows) > 1 else rows[0])
    return 0 if ok else 1


def cmd_op_check(args) -> int:
    (cfg,) = _configs(args)[:1]
    setup = build(cfg)
    op, f = setup.op, setup.datum
    rng = np.random.default_rng(cfg.seed)
    pts = rng.uniform(-0.5, 0.5, (100, cfg.n)) * cfg.L
    pot = op.potential
    fd_err = 0.0
    if not pot.is_zero:
        for x in pts:
            exact = pot.B(x[None])[0]
            approx = magnetic_field_of(pot.A, x, 1e-5 * cfg.L)
            fd_err = max(fd_err, float(np.abs(exact - approx).max() / max(np.abs(exact).max(), 1e-300)))
    herm = op.hermiticity_residual(f, op.apply(f))
    out = {
        "config_digest": digest(cfg.to_dict()),
        "grid": setup.grid.describe(),
        "square_identity_residual": op.square_identity_residual(f),
        "hermiticity_residual": herm,
        "boundary_ratio": f.boundary_ratio(),
        "B_finite_difference_rel_error": fd_err,
    }
    _emit(out)
    return 0 if herm <= 1e-10 and fd_err <= 1e-6 else 1


def cmd_multiplier_table(args) -> int:
    spec = make_multiplier(args.kind, args.n, args.R)
    radii = np.linspace(args.rmin, args.rmax, args.count)
    if args.out:
        write_multiplier_csv(args.out, spec, radii)
    else:
        write_multiplier_csv(sys.stdout, spec, radii)
    if spec.kind == "combined":
        bounds = verify_multiplier_bounds(spec, radii=radii)
        sys.stderr.write(dump(bounds) + "\n")
    return 0


def cmd_hypo_check(args) -> int:
    params: Dict = {}
    if args.potential in ("rotational", "bump") and args.eps is not None:
        params["eps"] = args.eps
    if args.split:
        params["split"] = args.split
    pot = make_potential(args.potential, **params)
    rep = check_smoothing_hypotheses(pot, args.n, args.mass)
    dyadic = check_dyadic_A_sum(pot, make_grid(args.n, args.L, args.pts))
    _emit({"hypotheses": rep.to_dict(), "dyadic_A_sum": dyadic.to_dict()})
    return 0 if rep.ok else 1


def cmd_admissible(args) -> int:
    if args.p is not None or args.q is not None:
        if args.p is None or args.q is None:
            raise ConfigError("give both --p and --q")
        v = adm.is_admissible(args.p, args.q, args.n, args.flavor)
        _emit({"p": args.p, "q": args.q, "n": args.n, "flavor": args.flavor, "admissible": v.admissible,
               "violations": v.violations, "s": str(v.s)})
        return 0 if v.admissible else 1
    pairs = adm.admissible_ladder(args.n, args.flavor, args.list)
    _emit([p.to_dict() for p in pairs])
    return 0


def cmd_evolve(args) -> int:
    (cfg,) = _configs(args)[:1]
    out = args.out or cfg.output
    if not out:
        raise ConfigError("evolve needs --out (or output = ... in the config)")
    setup = build(cfg)
    traj = evolve(setup.op, setup.datum, cfg.times(), tol=cfg.tol, method=cfg.method, max_dim=cfg.max_dim)
    save_trajectory(traj, out, {"config": cfg.to_dict(), "config_digest": digest(cfg.to_dict())})
    meta = dict(traj.metadata(), norm_drift=traj.norm_drift(), energy_drift=traj.energy_drift(), output=out)
    _emit(meta)
    return 0


def _functional_cmd(name: str):
    def run(args) -> int:
        cfgs = _configs(args, functionals=(name,))
        outs: List[Optional[str]] = [args.out or c.output or None for c in cfgs]
        if len(cfgs) > 1 and args.out:
            outs = [f"{args.out}/run{k:03d}" for k in range(len(cfgs))]
        if len(cfgs) == 1:
            res = run_experiment(cfgs[0], outs[0])
            _emit({"passed": res.passed, "failures": res.failures, "errors": res.errors,
                   "reports": {k: v["values"] for k, v in res.reports.items()} if args.verbose else sorted(res.reports),
                   "output": res.output})
            return res.exit_code
        results = run_many(cfgs, outs, args.parallel)
        _emit(results)
        return max(r["exit_code"] for r in results)

    return run


def cmd_study(args) -> int:
    (cfg,) = _configs(args)[:1]
    taus = [float(x) for x in args.taus.split(",")] if args.taus else None
    pts = [int(x) for x in args.pts_list.split(",")] if args.pts_list else None
    _emit(convergence_study(cfg, taus, pts))
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="diraclab", description="Magnetic Dirac equation laboratory")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("clifford-check", help="anticommutation report for the Dirac matrices")
    p.add_argument("--n", type=int, default=None, help="dimension (default: 1..6)")
    p.set_defaults(func=cmd_clifford_check)

    p = sub.add_parser("op-check", help="square identity, hermiticity and B finite-difference check")
    _add_config_flags(p)
    p.set_defaults(func=cmd_op_check)

    p = sub.add_parser("multiplier-table", help="CSV table of a radial multiplier")
    p.add_argument("--kind", default="combined")
    p.add_argument("--n", type=int, default=3)
    p.add_argument("--R", type=float, default=1.0)
    p.add_argument("--rmin", type=float, default=0.05)
    p.add_argument("--rmax", type=float, default=5.0)
    p.add_argument("--count", type=int, default=100)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_multiplier_table)

    p = sub.add_parser("hypo-check", help="potential hypotheses and dyadic A-sum")
    p.add_argument("--potential", default="rotational")
    p.add_argument("--n", type=int, default=4)
    p.add_argument("--eps", type=float, default=None)
    p.add_argument("--split", default=None)
    p.add_argument("--mass", type=float, default=None)
    p.add_argument("--L", type=float, default=8.0)
    p.add_argument("--pts", type=int, default=16)
    p.set_defaults(func=cmd_hypo_check)

    p = sub.add_parser("admissible", help="admissible pairs or a single verdict")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--flavor", choices=adm.FLAVORS, default="wave")
    p.add_argument("--list", type=int, default=5)
    p.add_argument("--p", default=None)
    p.add_argument("--q", default=None)
    p.set_defaults(func=cmd_admissible)

    p = sub.add_parser("evolve", help="evolve a datum and save snapshots")
    _add_config_flags(p)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_evolve)

    for name in ("virial", "smoothing", "hardy", "strichartz"):
        p = sub.add_parser(name, help=f"run the {name} functional")
        _add_config_flags(p)
        p.add_argument("--out", default=None)
        p.add_argument("--parallel", type=int, default=1, help="worker processes for several --config files")
        p.add_argument("--verbose", action="store_true", help="print report values")
        p.set_defaults(func=_functional_cmd(name))

    p = sub.add_parser("study", help="convergence study in tau and/or pts")
    _add_config_flags(p)
    p.add_argument("--taus", default=None, help="comma-separated steps")
    p.add_argument("--pts-list", default=None, help="comma-separated resolutions")
    p.set_defaults(func=cmd_study)
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except USAGE_ERRORS as exc:
        tag = next((t for cls, t in _TAGS.items() if isinstance(exc, cls)), "error")
        sys.stderr.write(f"error: [{tag}] {exc}\n")
        return 2
    except EvolutionError as exc:
        sys.stderr.write(f"error: [evolution] {exc}\n")
        return 1


if __name__ == "__main__":
    sys.exit(main())
