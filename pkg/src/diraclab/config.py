"""Experiment configuration in a plain ``key = value`` text format.

Grammar, one entry per line:

    line    := blank | comment | entry
    comment := '#' anything
    entry   := key '=' value [ '#' anything ]
    value   := scalar | scalar (',' scalar)*

Keys are the field names of :class:`ExperimentConfig`.  Lists are comma
separated; booleans are ``true``/``false``; ``random`` as the spinor means a
complex normal vector drawn from the seed.  ``crosscheck_tol = 0`` reports
the virial cross-check without asserting it.  Seeded data use numpy's PCG64
generator (``numpy.random.default_rng(seed)``).
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple

import numpy as np

from .fields import make_potential
from .multipliers import KINDS

FUNCTIONALS = ("virial", "smoothing", "hardy", "strichartz", "hypotheses", "square")
DATA = ("gaussian", "plane_wave", "random")


class ConfigError(ValueError):
    pass


@dataclass
class ExperimentConfig:
    n: int = 3
    L: float = 8.0
    pts: int = 16
    potential: str = "zero"
    eps: float = 0.1
    radius: float = 3.0
    split: str = ""
    mass: float = 1.0
    datum: str = "gaussian"
    center: Tuple[float, ...] = ()
    width: float = 1.0
    momentum: Tuple[float, ...] = ()
    spinor: str = "random"
    mode: Tuple[int, ...] = ()
    seed: int = 0
    T: float = 0.4
    tau: float = 0.1
    tol: float = 1e-10
    method: str = "krylov"
    max_dim: int = 40
    backward: bool = False
    multiplier: str = "abs"
    R: float = 1.0
    functionals: Tuple[str, ...] = ("virial",)
    p: str = "inf"
    q: str = "2"
    flavor: str = ""
    hardy_eps: float = 0.5
    crosscheck_tol: float = 0.0
    output: str = ""

    def __post_init__(self):
        self.validate()

    def validate(self) -> None:
        if self.n < 1:
            raise ConfigError(f"n must be >= 1, got {self.n}")
        if self.datum not in DATA:
            raise ConfigError(f"unknown datum {self.datum!r}; known: {DATA}")
        if self.multiplier not in KINDS:
            raise ConfigError(f"unknown multiplier {self.multiplier!r}; known: {KINDS}")
        if self.method not in ("krylov", "spectral"):
            raise ConfigError(f"unknown method {self.method!r}")
        bad = [f for f in self.functionals if f not in FUNCTIONALS]
        if bad:
            raise ConfigError(f"unknown functionals {bad}; known: {FUNCTIONALS}")
        if self.tau <= 0 or self.T < 0:
            raise ConfigError("need tau > 0 and T >= 0")
        for name in ("center", "momentum", "mode"):
            v = getattr(self, name)
            if v and len(v) != self.n:
                raise ConfigError(f"{name} has {len(v)} entries, expected n={self.n}")
        try:
            self.make_potential()
        except ValueError as exc:
            raise ConfigError(str(exc)) from None

    def make_potential(self):
        params: Dict[str, Any] = {}
        if self.potential == "rotational":
            params["eps"] = self.eps
        elif self.potential == "bump":
            params.update(eps=self.eps, radius=self.radius)
        if self.split:
            params["split"] = self.split
        return make_potential(self.potential, **params)

    def times(self) -> np.ndarray:
        steps = int(round(self.T / self.tau))
        if abs(steps * self.tau - self.T) > 1e-9 * max(1.0, self.T):
            raise ConfigError(f"T={self.T} is not a multiple of tau={self.tau}")
        sign = -1.0 if self.backward else 1.0
        return sign * self.tau * np.arange(steps + 1)

    def to_dict(self) -> Dict[str, Any]:
        return {f.name: (list(v) if isinstance(v, tuple) else v)
                for f, v in ((f, getattr(self, f.name)) for f in dataclasses.fields(self))}

    def to_text(self) -> str:
        lines = []
        for key, v in self.to_dict().items():
            if isinstance(v, list):
                v = ", ".join(str(x) for x in v)
            elif isinstance(v, bool):
                v = "true" if v else "false"
            lines.append(f"{key} = {v}")
        return "\n".join(lines) + "\n"

    def replace(self, **changes) -> "ExperimentConfig":
        return dataclasses.replace(self, **changes)


_FIELDS = {f.name: f for f in dataclasses.fields(ExperimentConfig)}


def _default_of(name: str):
    f = _FIELDS[name]
    return f.default if f.default is not dataclasses.MISSING else f.default_factory()


def coerce(name: str, raw: str):
    """Convert a raw string to the type of field ``name``."""
    if name not in _FIELDS:
        raise ConfigError(f"unknown key {name!r}")
    default = _default_of(name)
    raw = raw.strip()
    try:
        if isinstance(default, bool):
            low = raw.lower()
            if low not in ("true", "false", "1", "0", "yes", "no"):
                raise ValueError(raw)
            return low in ("true", "1", "yes")
        if isinstance(default, int):
            return int(raw)
        if isinstance(default, float):
            return float(raw)
        if isinstance(default, tuple):
            items = [s.strip() for s in raw.split(",") if s.strip()]
            if name == "functionals":
                return tuple(items)
            if name == "mode":
                return tuple(int(s) for s in items)
            return tuple(float(s) for s in items)
        return raw
    except ValueError:
        raise ConfigError(f"cannot parse {name} = {raw!r}") from None


def parse_config(text: str) -> ExperimentConfig:
    values: Dict[str, Any] = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        body = line.split("#", 1)[0].strip()
        if not body:
            continue
        if "=" not in body:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {line!r}")
        key, raw = (s.strip() for s in body.split("=", 1))
        if key in values:
            raise ConfigError(f"line {lineno}: duplicate key {key!r}")
        values[key] = coerce(key, raw)
    return ExperimentConfig(**values)


def load_config(path) -> ExperimentConfig:
    return parse_config(Path(path).read_text())


def config_fields() -> List[str]:
    return list(_FIELDS)


def override(cfg: ExperimentConfig, pairs: Dict[str, Optional[str]]) -> ExperimentConfig:
    """Apply raw string overrides (e.g. from command-line flags), skipping None."""
    changes = {k: coerce(k, v) for k, v in pairs.items() if v is not None}
    return cfg.replace(**changes) if changes else cfg
