"""Sensitivity-matrix designs and their Loewner-order certificates.

Each design produces per-layer matrices ``A_l`` with ``h_{l-1} h_l`` columns
that are meant to satisfy ``J_l^T J_l <= (1/d) A_l^T A_l``.  The diagonal
design is kept as one scalar per layer.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import ValidationError
from .gcn import GcnModel, LayerState, forward, jacobian_layer, jacobians, _check_input
from .graphs import Propagation, propagated_ones
from .matrixkit import kron, min_eig, psd_dominates, spectral_norm

ADMISSIBILITY_TOL = 1e-12


class FilterKind(str, enum.Enum):
    IDENTITY = "identity"
    LOW_PASS_RATIONAL = "lowpass_rational"
    LOW_PASS_POLY = "lowpass_poly"
    HIGH_PASS_RATIONAL = "highpass_rational"
    HIGH_PASS_POLY = "highpass_poly"


_DEFAULT_XI = {
    FilterKind.IDENTITY: 0.0,
    FilterKind.LOW_PASS_RATIONAL: 1.0,
    FilterKind.HIGH_PASS_RATIONAL: 1.0,
    FilterKind.LOW_PASS_POLY: 0.5,
    FilterKind.HIGH_PASS_POLY: 0.5,
}


@dataclass(frozen=True)
class FilterSpec:
    kind: FilterKind = FilterKind.IDENTITY
    xi: float | None = None

    def __post_init__(self):
        object.__setattr__(self, "kind", FilterKind(self.kind))
        xi = _DEFAULT_XI[self.kind] if self.xi is None else float(self.xi)
        if xi < 0:
            raise ValidationError("filter parameter xi must be >= 0")
        object.__setattr__(self, "xi", xi)

    def __call__(self, lam):
        lam = np.asarray(lam, dtype=float)
        xi = self.xi
        k = self.kind
        if k is FilterKind.IDENTITY:
            return lam.copy()
        if k is FilterKind.LOW_PASS_RATIONAL:
            return (1 + 2 * xi) / (1 + xi * (1 - lam))
        if k is FilterKind.LOW_PASS_POLY:
            return np.abs(lam) + xi * (1 - lam ** 2)
        if k is FilterKind.HIGH_PASS_RATIONAL:
            return (1 + 2 * xi) / (1 + xi * (1 + lam))
        return np.abs(lam) + xi * (1 + lam)

    def admissibility_margin(self, lam) -> float:
        """``min_i |psi(lam_i)| - |lam_i|``; negative means the filter cannot certify dominance."""
        lam = np.asarray(lam, dtype=float)
        return float(np.min(np.abs(self(lam)) - np.abs(lam)))

    @property
    def label(self) -> str:
        if self.kind is FilterKind.IDENTITY:
            return "identity"
        return f"{self.kind.value}(xi={self.xi:g})"


class Design(str, enum.Enum):
    EXACT_SPATIAL = "exact"
    DIAGONAL = "diagonal"
    LOW_RANK = "lowrank"
    SPECTRAL = "spectral"


@dataclass(frozen=True, eq=False)
class SensitivitySet:
    """Per-layer sensitivity matrices for one design.

    For :attr:`Design.DIAGONAL` the ``matrices`` entries are ``None`` and
    ``A_l = scalars[l-1] * I``.  ``columns[l-1] = h_{l-1} h_l``.
    """

    design: Design
    columns: tuple[int, ...]
    matrices: tuple[np.ndarray | None, ...]
    scalars: tuple[float, ...] = ()
    filter: FilterSpec | None = None
    g_values: tuple[float, ...] = ()
    alphas: tuple[float, ...] = ()
    notes: tuple[str, ...] = ()
    extras: dict = field(default_factory=dict, repr=False)

    @property
    def depth(self) -> int:
        return len(self.columns)

    @property
    def label(self) -> str:
        if self.design is Design.SPECTRAL and self.filter is not None:
            return f"spectral[{self.filter.label}]"
        return self.design.value

    def is_scalar(self) -> bool:
        return self.design is Design.DIAGONAL

    def matrix(self, l: int) -> np.ndarray:
        """Dense ``A_l`` (materializes the diagonal design)."""
        a = self.matrices[l - 1]
        if a is None:
            return self.scalars[l - 1] * np.eye(self.columns[l - 1])
        return a

    def gram(self, l: int) -> np.ndarray:
        """``A_l^T A_l``."""
        a = self.matrix(l)
        return a.T @ a

    def trace(self, l: int) -> float:
        """``Tr(A_l A_l^T)``."""
        a = self.matrices[l - 1]
        if a is None:
            return self.scalars[l - 1] ** 2 * self.columns[l - 1]
        return float(np.sum(a * a))

    def apply(self, l: int, u: np.ndarray) -> np.ndarray:
        """``A_l u`` for a vector or a batch of row vectors."""
        a = self.matrices[l - 1]
        if a is None:
            return self.scalars[l - 1] * np.asarray(u)
        return np.asarray(u) @ a.T if np.ndim(u) == 2 else a @ u


def _norms(model: GcnModel) -> list[float]:
    return [spectral_norm(w) for w in model.weights]


def _prod(vals) -> float:
    return float(math.prod(vals))


def _trailing_product(model: GcnModel, l: int) -> np.ndarray:
    """``W_{l+1} W_{l+2} ... W_d`` (``h_l x K``); identity when ``l = d``."""
    p = np.eye(model.num_classes)
    for k in range(model.depth, l, -1):
        p = model.weight(k) @ p
    return p


def _leading_vectors(model: GcnModel, prop: Propagation, x) -> list[np.ndarray]:
    """``v_l^T = 1^T L^{d-1} X W_1 ... W_{l-1}`` for ``l = 1..d``."""
    d = model.depth
    row = prop.matrix.T
    ones = np.ones(prop.n)
    for _ in range(d - 1):
        ones = row @ ones
    v = ones @ x
    out = [v]
    for l in range(1, d):
        v = v @ model.weight(l)
        out.append(v)
    return out


def build_spatial_exact(model: GcnModel, prop: Propagation, x) -> SensitivitySet:
    """``A_l = (sqrt(d)/n) (W_{l+1}...W_d)^T kron v_l^T``."""
    x = _check_input(model, prop, x)
    d, n = model.depth, prop.n
    vs = _leading_vectors(model, prop, x)
    mats, ns = [], []
    for l in range(1, d + 1):
        nmat = math.sqrt(d) / n * _trailing_product(model, l)  # N_l, h_l x K
        mats.append(kron(nmat.T, vs[l - 1][None, :]))
        ns.append(nmat)
    cols = tuple(w.size for w in model.weights)
    return SensitivitySet(Design.EXACT_SPATIAL, cols, tuple(mats),
                          extras={"N": ns, "v": vs})


def diagonal_scalar(d: int, n: int, bound: float, ones_norm: float, norms: Sequence[float], l: int) -> float:
    """``sqrt(d/n) B ||L^{d-1} 1|| prod_{i != l} norms_i``."""
    return math.sqrt(d / n) * bound * ones_norm * _prod(v for i, v in enumerate(norms, 1) if i != l)


def build_spatial_diagonal(model: GcnModel, prop: Propagation, bound: float,
                           norms: Sequence[float] | None = None) -> SensitivitySet:
    """Scalar design; pass ``norms`` to evaluate it at spectral-norm estimates instead."""
    if bound <= 0:
        raise ValidationError("feature bound B must be positive")
    d = model.depth
    norms = _norms(model) if norms is None else list(norms)
    ones_sq, _ = propagated_ones(prop, d)
    root = math.sqrt(ones_sq)
    scalars = tuple(diagonal_scalar(d, prop.n, bound, root, norms, l) for l in range(1, d + 1))
    cols = tuple(w.size for w in model.weights)
    return SensitivitySet(Design.DIAGONAL, cols, (None,) * d, scalars=scalars)


def _fix_column_signs(u: np.ndarray) -> np.ndarray:
    for j in range(u.shape[1]):
        idx = np.flatnonzero(np.abs(u[:, j]) > 1e-12)
        if idx.size and u[idx[0], j] < 0:
            u[:, j] = -u[:, j]
    return u


def build_spatial_lowrank(model: GcnModel, prop: Propagation, x) -> SensitivitySet:
    """Rank-``K`` design ``(sqrt(d)/n) prod_{k>l} ||W_k|| (Q_l^T kron v_l^T)``.

    ``Q_l`` (``h_l x K``) holds the left singular vectors of
    ``W_{l+1}...W_d``, zero-padded when ``h_l < K``, so that
    ``N_l N_l^T <= ||N_l||^2 Q_l Q_l^T`` and the Gram ``A A^T`` is a
    multiple of ``I_K`` whenever ``h_l >= K``.
    """
    x = _check_input(model, prop, x)
    d, n, k = model.depth, prop.n, model.num_classes
    norms = _norms(model)
    vs = _leading_vectors(model, prop, x)
    mats = []
    for l in range(1, d + 1):
        p = _trailing_product(model, l)
        hl = p.shape[0]
        u = _fix_column_signs(np.linalg.svd(p, full_matrices=False)[0])
        q = np.zeros((hl, k))
        q[:, : u.shape[1]] = u
        coef = math.sqrt(d) / n * _prod(norms[l:])
        mats.append(coef * kron(q.T, vs[l - 1][None, :]))
    cols = tuple(w.size for w in model.weights)
    return SensitivitySet(Design.LOW_RANK, cols, tuple(mats), extras={"v": vs})


def spectral_sensitivity(prop: Propagation, filt: FilterSpec, l: int, d: int) -> float:
    """``max_i |lam_i|^{d-l-1} * max_j |psi(lam_j) lam_j^{l-1}|`` for ``1 <= l <= d-1``."""
    if not 1 <= l <= d - 1:
        raise ValidationError(f"spectral sensitivity is defined for 1 <= l <= d-1, got l={l}, d={d}")
    lam = prop.eigenvalues
    first = float(np.max(np.abs(lam) ** (d - l - 1)))
    second = float(np.max(np.abs(filt(lam) * lam ** (l - 1))))
    return first * second


def readout_sensitivity(prop: Propagation, d: int) -> float:
    """Readout-layer stand-in for ``g_d``: ``||L||_2^{d-1}`` (equals ``rho(L)^{d-1}`` for symmetric ``L``)."""
    return prop.norm2 ** (d - 1)


def spectral_sensitivities(prop: Propagation, filt: FilterSpec, d: int) -> list[float]:
    return [spectral_sensitivity(prop, filt, l, d) for l in range(1, d)] + [readout_sensitivity(prop, d)]


def spectral_alpha(model: GcnModel, prop: Propagation, l: int, norms=None) -> float:
    """``(sqrt(d)/n) ||1^T L^{d-l-1}|| prod_{k>l} ||W_k||``."""
    d = model.depth
    norms = _norms(model) if norms is None else norms
    row = _power_t(prop, d - l - 1)
    return math.sqrt(d) / prop.n * float(np.linalg.norm(row)) * _prod(norms[l:])


def _power_t(prop: Propagation, power: int) -> np.ndarray:
    out = np.ones(prop.n)
    for _ in range(power):
        out = prop.matrix.T @ out
    return out


def build_spectral(model: GcnModel, prop: Propagation, x, filt: FilterSpec | None = None,
                   state: LayerState | None = None) -> SensitivitySet:
    """Filtered design ``A_l = alpha_l (I_{h_l} kron psi(L) H_{l-1})`` for ``l < d``.

    The readout layer uses ``sqrt(d) J_d``, the exact readout Jacobian.
    """
    filt = filt or FilterSpec()
    x = _check_input(model, prop, x)
    margin = filt.admissibility_margin(prop.eigenvalues)
    if margin < -ADMISSIBILITY_TOL:
        raise ValidationError(
            f"filter {filt.label} violates |psi(lam)| >= |lam| on the spectrum (margin {margin:.3e})")
    st = state or forward(model, prop, x)
    d = model.depth
    norms = _norms(model)
    psi_l = prop.spectral_function(filt(prop.eigenvalues))
    mats, alphas = [], []
    for l in range(1, d):
        a = spectral_alpha(model, prop, l, norms)
        mats.append(a * kron(np.eye(model.widths[l]), psi_l @ st.embeddings[l - 1]))
        alphas.append(a)
    mats.append(math.sqrt(d) * jacobian_layer(model, prop, x, d, st))
    notes = ["readout layer uses sqrt(d) * J_d"]
    if not prop.symmetric:
        notes.append("non-symmetric propagation: spectral certificates assume a symmetric L")
    cols = tuple(w.size for w in model.weights)
    return SensitivitySet(Design.SPECTRAL, cols, tuple(mats), filter=filt,
                          g_values=tuple(spectral_sensitivities(prop, filt, d)),
                          alphas=tuple(alphas), notes=tuple(notes),
                          extras={"admissibility_margin": margin})


def scaled(sset: SensitivitySet, factor: float) -> SensitivitySet:
    """Copy of ``sset`` with every ``A_l`` multiplied by ``factor``."""
    mats = tuple(None if a is None else factor * a for a in sset.matrices)
    return SensitivitySet(sset.design, sset.columns, mats,
                          scalars=tuple(factor * s for s in sset.scalars), filter=sset.filter,
                          g_values=sset.g_values, alphas=tuple(factor * a for a in sset.alphas),
                          notes=sset.notes + (f"scaled by {factor:g}",), extras=sset.extras)


def build_design(design, model: GcnModel, prop: Propagation, x, bound: float,
                 filt: FilterSpec | None = None) -> SensitivitySet:
    design = Design(design)
    if design is Design.EXACT_SPATIAL:
        return build_spatial_exact(model, prop, x)
    if design is Design.DIAGONAL:
        return build_spatial_diagonal(model, prop, bound)
    if design is Design.LOW_RANK:
        return build_spatial_lowrank(model, prop, x)
    return build_spectral(model, prop, x, filt)


def dominance_margins(model: GcnModel, prop: Propagation, x, sset: SensitivitySet,
                      js: list[np.ndarray] | None = None) -> list[float]:
    """Per layer ``min eig((1/d) A_l^T A_l - J_l^T J_l)``."""
    js = js if js is not None else jacobians(model, prop, x)
    d = model.depth
    return [min_eig(sset.gram(l) / d - js[l - 1].T @ js[l - 1]) for l in range(1, d + 1)]


def check_dominance(model: GcnModel, prop: Propagation, x, sset: SensitivitySet,
                    tol: float = 1e-8, js: list[np.ndarray] | None = None) -> list[bool]:
    js = js if js is not None else jacobians(model, prop, x)
    d = model.depth
    return [psd_dominates(js[l - 1].T @ js[l - 1], sset.gram(l) / d, tol) for l in range(1, d + 1)]


def gram_chain_margins(lower: SensitivitySet, upper: SensitivitySet) -> list[float]:
    """Per layer ``min eig(A_upper^T A_upper - A_lower^T A_lower)``."""
    return [min_eig(upper.gram(l) - lower.gram(l)) for l in range(1, lower.depth + 1)]
