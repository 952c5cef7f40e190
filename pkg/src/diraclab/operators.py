"""The magnetic Dirac operator H = D_A + m beta on a periodic grid.

Derivatives are spectral.  With ``D_A = -i alpha.(grad - iA)`` the free part
is applied through its Fourier symbol ``alpha.xi`` and the potential enters
as the pointwise term ``-alpha.A``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from typing import List, Tuple

import numpy as np
import scipy.fft as sfft

from .clifford import CliffordRep, signed_permutation
from .fields import Grid, PotentialSpec, SpinorField, zero_potential


class OperatorError(ValueError):
    pass


class _MatrixAction:
    """Applies a fixed M x M matrix to the trailing axis of a field array."""

    def __init__(self, mat: np.ndarray):
        self.mat = np.asarray(mat, dtype=complex)
        sp = signed_permutation(self.mat)
        self.perm, self.signs = sp if sp is not None else (None, None)

    def __call__(self, values: np.ndarray) -> np.ndarray:
        if self.perm is not None:
            return values[..., self.perm] * self.signs
        return values @ self.mat.T


@dataclass
class DiracOperator:
    rep: CliffordRep
    grid: Grid
    potential: PotentialSpec = field(default_factory=zero_potential)
    mass: float = 0.0

    def __post_init__(self):
        if self.rep.n != self.grid.n:
            raise OperatorError(f"Clifford dimension {self.rep.n} does not match grid dimension {self.grid.n}")
        self._alpha = [_MatrixAction(a) for a in self.rep.alphas]
        # per output component: (source component, sign) for each alpha_k
        self._rows = [
            [(int(act.perm[a]), complex(act.signs[a])) for act in self._alpha]
            for a in range(self.rep.M)
        ] if all(act.perm is not None for act in self._alpha) else None
        self._pairs = {
            (j, k): _MatrixAction(self.rep.alphas[j] @ self.rep.alphas[k])
            for j in range(1, self.rep.n + 1)
            for k in range(j + 1, self.rep.n + 1)
        }

    @property
    def n(self) -> int:
        return self.grid.n

    @property
    def M(self) -> int:
        return self.rep.M

    def with_mass(self, mass: float) -> "DiracOperator":
        return DiracOperator(self.rep, self.grid, self.potential, mass)

    # --- potential data sampled on the grid ---

    @cached_property
    def A(self) -> np.ndarray:
        return self.potential.A(self.grid.points)

    @cached_property
    def div_A(self) -> np.ndarray:
        return self.potential.div_A(self.grid.points)

    @cached_property
    def B(self) -> np.ndarray:
        return self.potential.B(self.grid.points)

    @cached_property
    def has_potential(self) -> bool:
        return not self.potential.is_zero

    def norm_bound(self) -> float:
        """Upper bound for the operator norm: sqrt(|xi|_max^2 + m^2) + max |A|."""
        xi_max2 = float(self.grid.xi2.max())
        a_max = float(np.sqrt(np.sum(self.A**2, axis=-1)).max()) if self.has_potential else 0.0
        return float(np.sqrt(xi_max2 + self.mass**2)) + a_max

    def _check(self, f: SpinorField) -> np.ndarray:
        if f.grid != self.grid:
            raise OperatorError("field lives on a different grid")
        if f.M != self.M:
            raise OperatorError(f"field has {f.M} components, operator expects {self.M}")
        return f.values

    # --- building blocks on raw arrays ---

    def _free_dirac(self, values: np.ndarray) -> np.ndarray:
        g = self.grid
        fh = g.fft(values)
        out = np.zeros_like(fh)
        for k in range(self.n):
            out += g.freq(k)[..., None] * self._alpha[k + 1](fh)
        return g.ifft(out)

    def apply_symbol(self, fh: np.ndarray) -> np.ndarray:
        """(alpha.xi + m beta) applied mode by mode to Fourier coefficients."""
        out = self.mass * self._alpha[0](fh) if self.mass != 0.0 else np.zeros_like(fh)
        for k in range(self.n):
            out += self.grid.freq(k)[..., None] * self._alpha[k + 1](fh)
        return out

    @cached_property
    def _freq_full(self) -> List[np.ndarray]:
        return [np.broadcast_to(self.grid.freq(k), self.grid.shape).copy() for k in range(self.n)]

    @cached_property
    def _A_nonzero(self) -> List[Tuple[int, np.ndarray]]:
        if not self.has_potential:
            return []
        return [(k, np.ascontiguousarray(self.A[..., k])) for k in range(self.n) if np.any(self.A[..., k])]

    def _apply_cm(self, v: np.ndarray) -> np.ndarray:
        """H on a component-major array of shape (M,) + grid.shape.

        Works one output component at a time so every pass stays in cache.
        """
        if self._rows is None:
            return np.moveaxis(self._apply_dense(np.moveaxis(v, 0, -1)), -1, 0)
        axes = tuple(range(1, self.n + 1))
        fh = sfft.fftn(v, axes=axes)
        out = np.empty_like(fh)
        freq = self._freq_full
        for a, row in enumerate(self._rows):
            acc = out[a]
            src, sgn = row[1]
            np.multiply(fh[src], sgn * freq[0], out=acc)
            for k in range(1, self.n):
                src, sgn = row[k + 1]
                acc += (sgn * freq[k]) * fh[src]
        out = sfft.ifftn(out, axes=axes, overwrite_x=True)
        for a, row in enumerate(self._rows):
            for k, ak in self._A_nonzero:
                src, sgn = row[k + 1]
                out[a] -= (sgn * ak) * v[src]
            if self.mass != 0.0:
                src, sgn = row[0]
                out[a] += (self.mass * sgn) * v[src]
        return out

    def _apply(self, values: np.ndarray) -> np.ndarray:
        v = np.ascontiguousarray(np.moveaxis(values, -1, 0))
        return np.moveaxis(self._apply_cm(v), 0, -1)

    def _apply_dense(self, values: np.ndarray) -> np.ndarray:
        out = self._free_dirac(values)
        if self.has_potential:
            for k in range(self.n):
                out -= self.A[..., k : k + 1] * self._alpha[k + 1](values)
        if self.mass != 0.0:
            out += self.mass * self._alpha[0](values)
        return out

    def _gradient(self, values: np.ndarray) -> List[np.ndarray]:
        g = self.grid
        fh = g.fft(values)
        grads = []
        for k in range(self.n):
            d = g.ifft(1j * g.freq(k)[..., None] * fh)
            if self.has_potential:
                d -= 1j * self.A[..., k : k + 1] * values
            grads.append(d)
        return grads

    def _spin_field(self, bfield: np.ndarray, values: np.ndarray) -> np.ndarray:
        """(sum_{j<k} alpha_j alpha_k b^{jk}(x)) f(x) for a matrix field b."""
        out = np.zeros_like(values)
        for (j, k), act in self._pairs.items():
            out += bfield[..., j - 1, k - 1, None] * act(values)
        return out

    # --- public operations ---

    def apply(self, f: SpinorField) -> SpinorField:
        return SpinorField(self.grid, self._apply(self._check(f)))

    def covariant_gradient(self, f: SpinorField) -> Tuple[SpinorField, ...]:
        return tuple(SpinorField(self.grid, d) for d in self._gradient(self._check(f)))

    def apply_dirac_massless(self, f: SpinorField) -> SpinorField:
        """D_A f (the mass term dropped)."""
        return self.with_mass(0.0).apply(f)

    def spin_term(self, f: SpinorField, bfield: np.ndarray = None) -> SpinorField:
        b = self.B if bfield is None else bfield
        return SpinorField(self.grid, self._spin_field(b, self._check(f)))

    def magnetic_laplacian(self, f: SpinorField) -> SpinorField:
        """Delta_A f = Delta f - i (div A) f - 2i A.grad f - |A|^2 f."""
        values = self._check(f)
        g = self.grid
        fh = g.fft(values)
        out = g.ifft(-g.xi2[..., None] * fh)
        if self.has_potential:
            out -= 1j * self.div_A[..., None] * values
            out -= np.sum(self.A**2, axis=-1)[..., None] * values
            for k in range(self.n):
                dk = g.ifft(1j * g.freq(k)[..., None] * fh)
                out -= 2j * self.A[..., k : k + 1] * dk
        return SpinorField(g, out)

    def apply_h_squared_direct(self, f: SpinorField) -> SpinorField:
        """(m^2 - Delta_A) f + i (S.B) f with the analytic field B."""
        values = self._check(f)
        out = self.mass**2 * values - self.magnetic_laplacian(f).values
        if self.has_potential:
            out += 1j * self._spin_field(self.B, values)
        return SpinorField(self.grid, out)

    def apply_h_squared(self, f: SpinorField) -> SpinorField:
        """H(H f), the composed square; exactly hermitian on the grid."""
        return self.apply(self.apply(f))

    def square_identity_residual(self, f: SpinorField) -> float:
        """||H(Hf) - [(m^2 - Delta_A) f + i S.B f]|| / ||f||."""
        diff = self.apply_h_squared(f) - self.apply_h_squared_direct(f)
        nf = f.norm()
        return diff.norm() / nf if nf else 0.0

    def hermiticity_residual(self, f: SpinorField, g: SpinorField) -> float:
        lhs = self.apply(f).inner(g)
        rhs = f.inner(self.apply(g))
        scale = max(abs(lhs), abs(rhs), 1e-300)
        return abs(lhs - rhs) / scale


def radial_tangential_split(grad: Tuple[SpinorField, ...], grid: Grid):
    """Split a covariant gradient into radial and tangential parts.

    Returns ``(radial, tangential)`` where ``radial = (x/|x|).grad`` and
    ``tangential[k] = grad[k] - (x_k/|x|) radial``.
    """
    if len(grad) != grid.n:
        raise OperatorError(f"expected {grid.n} gradient components, got {len(grad)}")
    r = grid.r
    radial = np.zeros_like(grad[0].values)
    for k in range(grid.n):
        radial += (grid.coord(k) / r)[..., None] * grad[k].values
    tangential = tuple(
        SpinorField(grid, grad[k].values - (grid.coord(k) / r)[..., None] * radial) for k in range(grid.n)
    )
    return SpinorField(grid, radial), tangential


def gradient_density(grad: Tuple[SpinorField, ...]) -> np.ndarray:
    """Pointwise |grad f|^2 summed over directions and components."""
    return sum(g.density() for g in grad)
