"""Sampling checks for the perturbation condition, the perturbation bounds and
the Gaussian quadratic-form concentration behind ``kappa``.

Every trial ``t`` draws from its own generator seeded with ``(seed, t)``, so a
report depends only on the configuration and never on evaluation order.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Sequence

import numpy as np

from .errors import ValidationError
from .gcn import GcnModel, _check_input, apply_perturbation, output
from .graphs import Propagation
from .matrixkit import spectral_norm, vec, unvec
from .pacbayes import CovBlock, kappa
from .sensitivity import SensitivitySet

EPS_LADDER = (1e-1, 1e-2, 1e-3)
QUANTILES = (0.5, 0.9, 0.99, 1.0)
DECAY_FACTOR = 5.0
DECAY_FLOOR = 1e-9


@dataclass(frozen=True)
class McConfig:
    trials: int = 1000
    seed: int = 0
    perturbation_scale: float = 1e-3
    tolerance: float = 0.05

    def __post_init__(self):
        if self.trials < 100:
            raise ValidationError("Monte Carlo checks need at least 100 trials")
        if not self.perturbation_scale > 0:
            raise ValidationError("perturbation scale must be positive")
        if self.tolerance < 0:
            raise ValidationError("tolerance must be non-negative")
        if not 0 <= self.seed < 2 ** 64:
            raise ValidationError("seed must be a 64-bit unsigned integer")


@dataclass
class McReport:
    name: str
    empirical_probability: float
    max_ratio: float
    quantiles: list[tuple[float, float]]
    passed: bool
    details: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "empirical_probability": self.empirical_probability,
            "max_ratio": self.max_ratio,
            "quantiles": [[q, v] for q, v in self.quantiles],
            "pass": self.passed,
            "details": self.details,
        }


def trial_rng(seed: int, t: int) -> np.random.Generator:
    return np.random.default_rng([seed, t])


@lru_cache(maxsize=16)
def _normal_draws(seed: int, trials: int, dim: int) -> np.ndarray:
    z = np.empty((trials, dim))
    for t in range(trials):
        z[t] = trial_rng(seed, t).standard_normal(dim)
    z.flags.writeable = False
    return z


def normal_draws(cfg: McConfig, dim: int) -> np.ndarray:
    """``trials x dim`` standard normals, row ``t`` from the trial-``t`` generator."""
    return _normal_draws(int(cfg.seed), int(cfg.trials), int(dim))


def quantile_list(values: np.ndarray, qs: Sequence[float] = QUANTILES) -> list[tuple[float, float]]:
    v = np.sort(np.asarray(values, dtype=float))
    return [(float(q), float(np.quantile(v, q))) for q in qs]


def _check_blocks(sset: SensitivitySet, blocks: Sequence[CovBlock]):
    if len(blocks) != sset.depth:
        raise ValidationError(f"need {sset.depth} posterior blocks, got {len(blocks)}")
    for l, blk in enumerate(blocks, start=1):
        if blk.dim != sset.columns[l - 1]:
            raise ValidationError(f"R_{l} has dimension {blk.dim}, A_{l} has {sset.columns[l - 1]} columns")


def _split(z: np.ndarray, dims: Sequence[int]) -> list[np.ndarray]:
    return np.split(z, np.cumsum(dims)[:-1], axis=1)


def _sensitivity_energy(sset: SensitivitySet, blocks: Sequence[CovBlock], z: np.ndarray,
                        scale: float) -> np.ndarray:
    """``sum_l ||A_l u_l||^2`` with ``u_l = scale * R_l^{1/2} z_l`` for every row of ``z``."""
    total = np.zeros(z.shape[0])
    for l, (zl, blk) in enumerate(zip(_split(z, sset.columns), blocks), start=1):
        if sset.is_scalar() and blk.matrix is None:
            c2 = sset.scalars[l - 1] ** 2 * blk.scalar
            total += scale * c2 * np.einsum("ij,ij->i", zl, zl)
            continue
        m = sset.matrix(l) @ _root(blk)
        y = zl @ m.T
        total += scale * np.einsum("ij,ij->i", y, y)
    return total


def _root(blk: CovBlock) -> np.ndarray:
    r = blk.sqrt()
    return r * np.eye(blk.dim) if np.isscalar(r) else r


def check_perturbation_condition(sset: SensitivitySet, sigma_sq: float, blocks: Sequence[CovBlock],
                                 gamma: float, cfg: McConfig) -> McReport:
    """Estimate ``P[sum ||A_l u_l||^2 < gamma^2/16]`` for ``u_l ~ N(0, sigma^2 R_l)``.

    Passes when the estimate is at least ``1/2 - 2/sqrt(trials)``.
    """
    _check_blocks(sset, blocks)
    if not sigma_sq > 0:
        raise ValidationError("sigma^2 must be positive")
    threshold = gamma ** 2 / 16
    z = normal_draws(cfg, sum(sset.columns))
    if math.isinf(sigma_sq):
        energy = _sensitivity_energy(sset, blocks, z, 1.0)
        energy = np.where(energy > 0, np.inf, 0.0)
    else:
        energy = _sensitivity_energy(sset, blocks, z, sigma_sq)
    prob = float(np.mean(energy < threshold))
    slack = 2.0 / math.sqrt(cfg.trials)
    ratios = energy / threshold
    return McReport(
        name=f"perturbation_condition[{sset.label}]",
        empirical_probability=prob,
        max_ratio=float(np.max(ratios)),
        quantiles=quantile_list(ratios),
        passed=prob >= 0.5 - slack,
        details={"threshold": threshold, "slack": slack, "sigma_sq": sigma_sq, "trials": cfg.trials},
    )


def _ratio(num: float, den: float) -> float:
    if den == 0.0:
        return 0.0 if num == 0.0 else math.inf
    return num / den


def _perturbation_directions(model: GcnModel, sset: SensitivitySet, blocks, z: np.ndarray):
    """Rows of ``R^{1/2} z`` rescaled to the norm of the flattened weights."""
    w_norm = float(np.linalg.norm(model.flat_weights()))
    parts = []
    for zl, blk in zip(_split(z, sset.columns), blocks):
        r = blk.sqrt()
        parts.append(r * zl if np.isscalar(r) else zl @ r)
    u = np.concatenate(parts, axis=1)
    norms = np.linalg.norm(u, axis=1, keepdims=True)
    return np.where(norms > 0, u * (w_norm / np.where(norms > 0, norms, 1.0)), 0.0)


def _blocks_to_layers(model: GcnModel, flat: np.ndarray) -> list[np.ndarray]:
    pieces = _split(flat[None, :], [w.size for w in model.weights])
    return [unvec(p[0], *w.shape) for p, w in zip(pieces, model.weights)]


def _ladder_verdict(max_ratios: dict[float, float], tolerance: float, ladder=EPS_LADDER) -> tuple[bool, bool]:
    """``(bounded, decays)``: the ratio at the smallest scale is at most
    ``1 + tolerance`` and the excess over 1 shrinks at least 5x per decade."""
    excess = [max(0.0, max_ratios[e] - 1.0) for e in ladder]
    decays = all(b <= max(a / DECAY_FACTOR, DECAY_FLOOR) for a, b in zip(excess, excess[1:]))
    bounded = max_ratios[ladder[-1]] <= 1.0 + tolerance
    return bounded, decays


def check_perturbation_bound(model: GcnModel, prop: Propagation, x, sset: SensitivitySet,
                             sigma_sq: float, blocks: Sequence[CovBlock], cfg: McConfig,
                             ladder: Sequence[float] = EPS_LADDER) -> McReport:
    """Ratio ``||f_{w+eps u} - f_w||_inf^2 / (eps^2 sum ||A_l u_l||^2)`` over a scale ladder.

    Directions ``u`` are posterior draws rescaled to ``||u|| = ||w||``.  The
    bound is first order, so the pass rule looks at the smallest scale and at
    the decay of the excess over 1 across the ladder.  The unit-scale ratio
    is reported but not asserted.
    """
    x = _check_input(model, prop, x)
    _check_blocks(sset, blocks)
    base = output(model, prop, x)
    dirs = _perturbation_directions(model, sset, blocks, normal_draws(cfg, sum(sset.columns)))
    scales = sorted(set(ladder) | {1.0, cfg.perturbation_scale}, reverse=True)
    per_scale: dict[float, np.ndarray] = {}
    for eps in scales:
        vals = np.empty(cfg.trials)
        for t, u in enumerate(dirs):
            us = _blocks_to_layers(model, u)
            diff = output(apply_perturbation(model, [eps * ul for ul in us]), prop, x) - base
            den = eps ** 2 * sum(float(np.sum(sset.apply(l, vec(ul)) ** 2)) for l, ul in enumerate(us, 1))
            vals[t] = _ratio(float(np.max(np.abs(diff))) ** 2, den)
        per_scale[eps] = vals
    maxima = {e: float(np.max(v)) for e, v in per_scale.items()}
    bounded, decays = _ladder_verdict(maxima, cfg.tolerance, tuple(ladder))
    small = per_scale[cfg.perturbation_scale]
    return McReport(
        name=f"perturbation_bound[{sset.label}]",
        empirical_probability=float(np.mean(small <= 1.0 + cfg.tolerance)),
        max_ratio=maxima[cfg.perturbation_scale],
        quantiles=quantile_list(small),
        passed=bounded and decays,
        details={"max_ratio_by_scale": {f"{e:g}": maxima[e] for e in scales},
                 "bounded": bounded, "decays": decays, "unit_scale_ratio": maxima[1.0],
                 "sigma_sq": sigma_sq},
    )


def lemma6_rhs(model: GcnModel, prop: Propagation, bound: float, us: Sequence[np.ndarray]) -> float:
    """``d B^2 ||L||^{2d-2} prod ||W_l||^2 sum ||U_l||^2 / ||W_l||^2``."""
    d = model.depth
    norms = [spectral_norm(w) for w in model.weights]
    if min(norms) == 0.0:
        raise ValidationError("perturbation bound needs every ||W_l||_2 > 0")
    pre = d * bound ** 2 * prop.norm2 ** (2 * d - 2) * math.prod(s * s for s in norms)
    return pre * sum(spectral_norm(u) ** 2 / s ** 2 for u, s in zip(us, norms))


def check_lemma6(model: GcnModel, prop: Propagation, x, cfg: McConfig,
                 ladder: Sequence[float] = EPS_LADDER) -> McReport:
    """Ratio ``||f_{w+u} - f_w||_2^2`` over the layerwise perturbation bound.

    ``U_l = eps ||W_l||_2 c_l Z_l / ||Z_l||_2`` with ``Z_l`` standard normal
    and ``c_l`` uniform on ``(0, 1]``; ``B`` is the row-norm bound of ``x``.
    """
    x = _check_input(model, prop, x)
    bound = float(np.max(np.linalg.norm(x, axis=1)))
    base = output(model, prop, x)
    sizes = [w.size for w in model.weights]
    norms = [spectral_norm(w) for w in model.weights]
    shapes = []
    for t in range(cfg.trials):
        rng = trial_rng(cfg.seed, t)
        z = rng.standard_normal(sum(sizes))
        c = 1.0 - rng.random(model.depth)
        zs = _blocks_to_layers(model, z)
        shapes.append([ci * s * zl / max(spectral_norm(zl), 1e-300)
                       for ci, s, zl in zip(c, norms, zs)])
    scales = sorted(set(ladder) | {1.0, cfg.perturbation_scale}, reverse=True)
    per_scale: dict[float, np.ndarray] = {}
    for eps in scales:
        vals = np.empty(cfg.trials)
        for t, shape in enumerate(shapes):
            us = [eps * s for s in shape]
            diff = output(apply_perturbation(model, us), prop, x) - base
            vals[t] = _ratio(float(diff @ diff), lemma6_rhs(model, prop, bound, us))
        per_scale[eps] = vals
    maxima = {e: float(np.max(v)) for e, v in per_scale.items()}
    bounded, decays = _ladder_verdict(maxima, cfg.tolerance, tuple(ladder))
    small = per_scale[cfg.perturbation_scale]
    return McReport(
        name="layerwise_perturbation_bound",
        empirical_probability=float(np.mean(small <= 1.0 + cfg.tolerance)),
        max_ratio=maxima[cfg.perturbation_scale],
        quantiles=quantile_list(small),
        passed=bounded and decays,
        details={"max_ratio_by_scale": {f"{e:g}": maxima[e] for e in scales},
                 "bounded": bounded, "decays": decays, "unit_scale_ratio": maxima[1.0], "B": bound},
    )


def check_quadratic_concentration(a, r, sigma_sq: float, cfg: McConfig) -> McReport:
    """Median of ``||A u||^2`` for ``u ~ N(0, sigma^2 R)`` against ``sigma^2 kappa Tr(A R A^T)``."""
    a = np.atleast_2d(np.asarray(a, dtype=float))
    r = np.asarray(r, dtype=float)
    if r.shape != (a.shape[1], a.shape[1]):
        raise ValidationError(f"R must be {a.shape[1]}x{a.shape[1]}, got {r.shape}")
    lam, v = np.linalg.eigh(0.5 * (r + r.T))
    if lam[0] < -1e-12:
        raise ValidationError("R must be positive semidefinite")
    root = (v * np.sqrt(np.clip(lam, 0.0, None))) @ v.T
    m = a @ root
    y = normal_draws(cfg, a.shape[1]) @ m.T
    vals = sigma_sq * np.einsum("ij,ij->i", y, y)
    median = float(np.median(np.sort(vals)))
    limit = sigma_sq * kappa() * float(np.trace(a @ r @ a.T))
    return McReport(
        name="quadratic_concentration",
        empirical_probability=float(np.mean(vals <= limit)),
        max_ratio=_ratio(median, limit),
        quantiles=quantile_list(vals),
        passed=median <= limit,
        details={"median": median, "limit": limit},
    )
