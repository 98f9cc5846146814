"""Dense real linear-algebra kernels and matrix-order predicates.

Matrices are plain 2-D ``numpy`` float arrays.  ``vec`` stacks columns.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .errors import SizeError, ValidationError

MAX_DIM = 4096
SYMMETRY_TOL = 1e-10
_SIGN_EPS = 1e-12


def as_matrix(a, name: str = "matrix") -> np.ndarray:
    """Coerce ``a`` to a finite 2-D float array."""
    m = np.asarray(a, dtype=float)
    if m.ndim == 1:
        m = m[None, :]
    if m.ndim != 2 or m.shape[0] < 1 or m.shape[1] < 1:
        raise ValidationError(f"{name} must be a non-empty 2-D array, got shape {m.shape}")
    if not np.all(np.isfinite(m)):
        raise ValidationError(f"{name} has non-finite entries")
    return m


def vec(x: np.ndarray) -> np.ndarray:
    """Column-stacking vectorization."""
    return np.asarray(x).reshape(-1, order="F")


def unvec(v: np.ndarray, rows: int, cols: int) -> np.ndarray:
    return np.asarray(v).reshape((rows, cols), order="F")


def kron(a, b, max_dim: int = MAX_DIM) -> np.ndarray:
    a = as_matrix(a, "a")
    b = as_matrix(b, "b")
    rows = a.shape[0] * b.shape[0]
    cols = a.shape[1] * b.shape[1]
    if rows > max_dim or cols > max_dim:
        raise SizeError(f"kron result {rows}x{cols} exceeds max dimension {max_dim}")
    return np.kron(a, b)


@dataclass(frozen=True)
class EigDecomposition:
    """Eigenpairs of a symmetric matrix, eigenvalues in descending order."""

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray

    def reconstruct(self, values: np.ndarray | None = None) -> np.ndarray:
        """Return ``V diag(values) V^T`` (the input matrix when ``values`` is None)."""
        lam = self.eigenvalues if values is None else np.asarray(values, dtype=float)
        v = self.eigenvectors
        return (v * lam) @ v.T


def _fix_signs(v: np.ndarray) -> np.ndarray:
    v = v.copy()
    for j in range(v.shape[1]):
        col = v[:, j]
        idx = np.flatnonzero(np.abs(col) > _SIGN_EPS)
        if idx.size and col[idx[0]] < 0:
            v[:, j] = -col
    return v


def sym_eig(s, tol: float = SYMMETRY_TOL) -> EigDecomposition:
    s = as_matrix(s, "s")
    if s.shape[0] != s.shape[1]:
        raise ValidationError(f"sym_eig needs a square matrix, got {s.shape}")
    if np.max(np.abs(s - s.T)) > tol:
        raise ValidationError("sym_eig input is not symmetric within tolerance")
    lam, v = np.linalg.eigh(0.5 * (s + s.T))
    order = np.argsort(lam)[::-1]
    return EigDecomposition(lam[order], _fix_signs(v[:, order]))


class MatrixNorms(NamedTuple):
    spectral: float
    frobenius: float
    two_infty: float


def spectral_norm(a) -> float:
    a = np.asarray(a, dtype=float)
    if a.size == 0:
        return 0.0
    return float(np.linalg.norm(a, 2))


def matrix_norms(a) -> MatrixNorms:
    a = as_matrix(a)
    return MatrixNorms(
        spectral=spectral_norm(a),
        frobenius=float(np.linalg.norm(a, "fro")),
        two_infty=float(np.max(np.linalg.norm(a, axis=1))),
    )


def min_eig(s: np.ndarray) -> float:
    """Smallest eigenvalue of the symmetric part of ``s``."""
    s = np.asarray(s, dtype=float)
    return float(np.linalg.eigvalsh(0.5 * (s + s.T))[0])


def psd_dominates(a, b, tol: float = 1e-9) -> bool:
    """True iff ``a`` is below ``b`` in the Loewner order, up to ``-tol``.

    The name reads as "``b`` dominates ``a``": ``min eig(b - a) >= -tol``.
    """
    a = as_matrix(a, "a")
    b = as_matrix(b, "b")
    if a.shape != b.shape or a.shape[0] != a.shape[1]:
        raise ValidationError(f"psd_dominates needs equal square shapes, got {a.shape} and {b.shape}")
    return min_eig(b - a) >= -tol


def trace_logdet_excess(x, alpha: float) -> float:
    """``Tr(R) - logdet(R) - n`` for ``R = (I + alpha X^T X)^{-1}``.

    Evaluated through the eigenvalues of ``X^T X`` so the value stays
    accurate when ``R`` is close to the identity.
    """
    x = as_matrix(x, "x")
    if alpha <= 0:
        raise ValidationError("alpha must be positive")
    lam = np.clip(np.linalg.eigvalsh(x.T @ x), 0.0, None)
    u = alpha * lam
    # 1/(1+u) + log(1+u) - 1, written to avoid cancellation at small u
    return float(np.sum(np.log1p(u) - u / (1.0 + u)))
