"""Both sides of the magnetic Hardy inequality and its massive extension.

    m^2 ||f||^2 + ((1-eps)(n-2)^2/4 - C0/2) ||f/|x|||^2 + eps ||grad_A f||^2
        <= (1 + ||B2||_inf / (2 m^2)) ||H f||^2

with C0 = sup |x|^2 [B1]_1.  For m = 0 the whole field must sit in B1 and
the right-hand side is ||H f||^2.  The standalone inequality is
(n-2)^2/4 ||f/|x|||^2 <= ||grad_A f||^2.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass
from typing import Dict

import numpy as np

from ..fields import SpinorField
from ..operators import DiracOperator, gradient_density


class HardyError(ValueError):
    pass


@dataclass
class HardyReport:
    n: int
    mass: float
    eps: float
    C0: float
    B2_inf: float
    mass_term: float
    coefficient: float
    weighted_mass: float
    gradient_term: float
    lhs: float
    rhs: float
    slack: float
    hardy_lhs: float
    hardy_rhs: float
    hardy_slack: float

    @property
    def relative_slack(self) -> float:
        return self.slack / max(abs(self.rhs), abs(self.lhs), 1e-300)

    @property
    def hardy_relative_slack(self) -> float:
        return self.hardy_slack / max(abs(self.hardy_rhs), 1e-300)

    def violated(self, rtol: float = 1e-6) -> bool:
        return self.relative_slack < -rtol or self.hardy_relative_slack < -rtol

    def to_dict(self) -> Dict:
        d = asdict(self)
        d["relative_slack"] = self.relative_slack
        d["hardy_relative_slack"] = self.hardy_relative_slack
        return d


def potential_constants(op: DiracOperator) -> Dict[str, float]:
    """Certified ||x|^2 B1||_inf and ||B2||_inf from the potential's envelope."""
    pot = op.potential
    if pot.is_zero:
        return {"C0": 0.0, "B2_inf": 0.0}
    env = pot.envelope(op.n)
    return {"C0": float(env["C0"]), "B2_inf": float(env["B2_inf"])}


def hardy_check(op: DiracOperator, f: SpinorField, eps: float) -> HardyReport:
    if not 0.0 < eps < 1.0:
        raise HardyError(f"eps must lie in (0, 1), got {eps}")
    consts = potential_constants(op)
    m = op.mass
    if m == 0.0 and consts["B2_inf"] > 0.0:
        raise HardyError("with m = 0 the whole field must be declared as B1 (B2 = 0)")
    g = op.grid
    n = g.n
    dv = g.cell_volume
    weighted = float(np.sum(f.density() / g.r**2)) * dv
    grad2 = float(np.sum(gradient_density(op.covariant_gradient(f)))) * dv
    hf2 = op.apply(f).norm() ** 2
    hardy_const = (n - 2) ** 2 / 4.0
    coef = (1 - eps) * hardy_const - 0.5 * consts["C0"]
    mass_term = m**2 * f.norm() ** 2
    lhs = mass_term + coef * weighted + eps * grad2
    factor = 1.0 + (consts["B2_inf"] / (2 * m**2) if m != 0.0 else 0.0)
    rhs = factor * hf2
    return HardyReport(
        n=n, mass=m, eps=eps, C0=consts["C0"], B2_inf=consts["B2_inf"],
        mass_term=mass_term, coefficient=coef, weighted_mass=weighted, gradient_term=eps * grad2,
        lhs=lhs, rhs=rhs, slack=rhs - lhs,
        hardy_lhs=hardy_const * weighted, hardy_rhs=grad2, hardy_slack=grad2 - hardy_const * weighted,
    )
