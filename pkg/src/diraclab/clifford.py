"""Dirac matrices for arbitrary spatial dimension.

The family is built by the block recursion

    alpha_j^(n) = [[0, alpha_j^(n-1)], [alpha_j^(n-1), 0]],   j = 0..n-1
    alpha_n^(n) = diag(I, -I)

starting from the two Pauli-type matrices for n = 1, which gives M = 2**n.
Index 0 is the mass matrix beta.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict, Tuple

import numpy as np

MAX_DIMENSION = 8


class CliffordError(ValueError):
    pass


@dataclass(frozen=True)
class CliffordRep:
    n: int
    alphas: Tuple[np.ndarray, ...]
    spin_table: Dict[Tuple[int, int], np.ndarray] = field(repr=False)

    @property
    def M(self) -> int:
        return self.alphas[0].shape[0]

    @property
    def beta(self) -> np.ndarray:
        return self.alphas[0]

    def spin(self, j: int, k: int) -> np.ndarray:
        """S_jk = (alpha_j alpha_k - alpha_k alpha_j)/4 for 1 <= j, k <= n."""
        if not (1 <= j <= self.n and 1 <= k <= self.n):
            raise CliffordError(f"spin index ({j}, {k}) out of range for n={self.n}")
        if j == k:
            return np.zeros((self.M, self.M), dtype=complex)
        if j < k:
            return self.spin_table[(j, k)]
        return -self.spin_table[(k, j)]


def _readonly(a: np.ndarray) -> np.ndarray:
    a = np.array(a, dtype=complex)
    a.setflags(write=False)
    return a


def build_clifford(n: int, max_n: int = MAX_DIMENSION) -> CliffordRep:
    if n <= 0:
        raise CliffordError(f"dimension must be >= 1, got {n}")
    if n > max_n:
        raise CliffordError(f"dimension {n} exceeds ceiling {max_n} (M = 2**n matrices)")

    alphas = [np.array([[0, 1], [1, 0]], dtype=complex), np.array([[1, 0], [0, -1]], dtype=complex)]
    for _ in range(2, n + 1):
        size = alphas[0].shape[0]
        zero = np.zeros((size, size), dtype=complex)
        eye = np.eye(size, dtype=complex)
        alphas = [np.block([[zero, a], [a, zero]]) for a in alphas]
        alphas.append(np.block([[eye, zero], [zero, -eye]]))

    alphas = tuple(_readonly(a) for a in alphas)
    spin = {}
    for j in range(1, n + 1):
        for k in range(j + 1, n + 1):
            spin[(j, k)] = _readonly(0.25 * (alphas[j] @ alphas[k] - alphas[k] @ alphas[j]))
    return CliffordRep(n=n, alphas=alphas, spin_table=spin)


def verify_anticommutation(rep: CliffordRep) -> Dict[Tuple[int, int], float]:
    """Max-entry deviation of alpha_j alpha_k + alpha_k alpha_j - 2 delta_jk I for j <= k."""
    eye = np.eye(rep.M)
    out = {}
    for j in range(rep.n + 1):
        for k in range(j, rep.n + 1):
            anti = rep.alphas[j] @ rep.alphas[k] + rep.alphas[k] @ rep.alphas[j]
            target = 2.0 * eye if j == k else 0.0 * eye
            out[(j, k)] = float(np.max(np.abs(anti - target)))
    return out


def is_antisymmetric(mat: np.ndarray, tol: float = 1e-12) -> bool:
    mat = np.asarray(mat)
    scale = max(1.0, float(np.max(np.abs(mat))) if mat.size else 1.0)
    return bool(np.max(np.abs(mat + np.swapaxes(mat, -1, -2)), initial=0.0) <= tol * scale)


def spin_pairing(rep: CliffordRep, bmat: np.ndarray, tol: float = 1e-12) -> np.ndarray:
    """S.B = sum_{j,k} S_jk B^{jk} = sum_{j<k} alpha_j alpha_k B^{jk}.

    ``bmat`` is indexed from 0, so ``bmat[j-1, k-1]`` is B^{jk}.
    """
    bmat = np.asarray(bmat, dtype=float)
    if bmat.shape != (rep.n, rep.n):
        raise CliffordError(f"expected a {rep.n}x{rep.n} matrix, got shape {bmat.shape}")
    if not is_antisymmetric(bmat, tol):
        raise CliffordError("field matrix is not antisymmetric")
    out = np.zeros((rep.M, rep.M), dtype=complex)
    for (j, k), s in rep.spin_table.items():
        out += 2.0 * s * bmat[j - 1, k - 1]
    return out


def signed_permutation(mat: np.ndarray):
    """Return (perm, signs) with ``mat @ v == signs * v[perm]``, or None.

    Every matrix of the recursive family, and every product of them, has
    exactly one nonzero entry per row; operators use this to avoid dense
    M x M products per grid site.
    """
    mat = np.asarray(mat)
    nz = np.abs(mat) > 0
    if not np.all(nz.sum(axis=1) == 1):
        return None
    perm = np.argmax(nz, axis=1)
    signs = mat[np.arange(mat.shape[0]), perm]
    return perm, signs
