"""Prior/posterior selection, KL objective and generalization bounds.

The closed-form bounds are reported twice: once with the explicit
constants of the KL chains (``kl_upper`` feeding ``final_bound``) and once
as the bare order-of-magnitude expression with unit constant
(``order_bound``).
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from typing import Sequence

import numpy as np

from .errors import ValidationError
from .gcn import GcnModel, GraphSample, margin_loss_empirical
from .graphs import Propagation, propagated_ones
from .matrixkit import spectral_norm
from .sensitivity import (
    Design,
    FilterSpec,
    SensitivitySet,
    build_spatial_diagonal,
    build_spatial_exact,
    build_spatial_lowrank,
    build_spectral,
    diagonal_scalar,
    spectral_sensitivities,
)

E2 = math.e ** 2
E4_PLUS_1 = math.e ** 4 + 1


def kappa() -> float:
    """Concentration constant ``1 + 2 ln 2 + sqrt(4 ln 2)``."""
    return 1.0 + 2.0 * math.log(2.0) + math.sqrt(4.0 * math.log(2.0))


@dataclass(frozen=True)
class PacParams:
    """Margin ``gamma``, confidence ``delta``, feature bound ``B`` and cover multiplicity.

    ``bound=None`` means "use the largest row norm seen in the samples";
    ``cover_constant=None`` means ``d * sqrt(m)``.
    """

    gamma: float
    delta: float = 0.05
    bound: float | None = None
    cover_constant: float | None = None

    def __post_init__(self):
        if not self.gamma > 0:
            raise ValidationError("gamma must be positive")
        if not 0 < self.delta < 1:
            raise ValidationError("delta must lie in (0, 1)")
        if self.bound is not None and not self.bound > 0:
            raise ValidationError("feature bound B must be positive")
        if self.cover_constant is not None and self.cover_constant < 1:
            raise ValidationError("cover constant must be >= 1")


def layer_norms(model: GcnModel) -> tuple[list[float], list[float]]:
    spec = [spectral_norm(w) for w in model.weights]
    frob = [float(np.linalg.norm(w)) for w in model.weights]
    return spec, frob


def _weighted_complexity(model: GcnModel, weights: Sequence[float]) -> float:
    spec, frob = layer_norms(model)
    if min(spec) == 0.0:
        return 0.0
    prod = math.prod(s * s for s in spec)
    return prod * sum(w * f * f / (s * s) for w, f, s in zip(weights, frob, spec))


def spectral_complexity(model: GcnModel) -> float:
    """``prod ||W_l||_2^2 * sum ||W_l||_F^2 / ||W_l||_2^2``; 0 if some layer vanishes."""
    return _weighted_complexity(model, [1.0] * model.depth)


def graph_spectral_complexity(model: GcnModel, g_values: Sequence[float]) -> float:
    """Spectral complexity with the layer-``l`` stable rank weighted by ``g_l^2``."""
    if len(g_values) != model.depth:
        raise ValidationError(f"need {model.depth} sensitivity values, got {len(g_values)}")
    return _weighted_complexity(model, [g * g for g in g_values])


def _prod_except(vals: Sequence[float], l: int) -> float:
    return math.prod(v for i, v in enumerate(vals, 1) if i != l)


def prior_variance(design, gamma: float, hat_norms: Sequence[float], prop: Propagation,
                   widths: Sequence[int], bound: float, g_values: Sequence[float] | None = None) -> float:
    """Weight-independent prior variance for a design, given spectral-norm estimates.

    Returns ``math.inf`` when every term of ``1/sigma^2`` vanishes.
    """
    design = Design(design)
    widths = list(widths)
    d = len(widths) - 1
    n = prop.n
    k = widths[-1]
    h = max(widths)
    kap = kappa()
    if len(hat_norms) != d:
        raise ValidationError(f"need {d} norm estimates, got {len(hat_norms)}")
    if design is Design.DIAGONAL:
        root = math.sqrt(propagated_ones(prop, d)[0])
        total = sum(diagonal_scalar(d, n, bound, root, hat_norms, l) ** 2 * widths[l - 1] * widths[l]
                    for l in range(1, d + 1))
        inv = 16 * E2 * kap / gamma ** 2 * total
    elif design is Design.LOW_RANK:
        ones_sq = propagated_ones(prop, d)[0]
        total = sum(_prod_except([b * b for b in hat_norms], l) for l in range(1, d + 1))
        inv = 16 * E2 * kap * bound ** 2 * d * k / (gamma ** 2 * n) * ones_sq * total
    elif design is Design.SPECTRAL:
        if g_values is None or len(g_values) != d:
            raise ValidationError("spectral prior variance needs one g value per layer")
        total = sum(g * g * _prod_except([b * b for b in hat_norms], l)
                    for l, g in enumerate(g_values, 1))
        inv = 16 * E2 * kap * d * h * bound ** 2 / gamma ** 2 * total
    else:
        raise ValidationError(f"no weight-independent prior variance for design {design.value!r}")
    return math.inf if inv == 0 else 1.0 / inv


def posterior_scale(gamma: float, w_norm: float) -> float:
    """``eta^2 = 16 kappa ||w||^2 / gamma^2``."""
    return 16 * kappa() * w_norm ** 2 / gamma ** 2


@dataclass(frozen=True, eq=False)
class CovBlock:
    """Posterior covariance block: dense ``matrix`` or ``scalar * I_dim``."""

    dim: int
    matrix: np.ndarray | None = None
    scalar: float = 1.0

    def eigenvalues(self) -> np.ndarray:
        if self.matrix is None:
            return np.full(self.dim, self.scalar)
        return np.linalg.eigvalsh(0.5 * (self.matrix + self.matrix.T))

    def dense(self) -> np.ndarray:
        return self.scalar * np.eye(self.dim) if self.matrix is None else self.matrix

    def sqrt(self) -> np.ndarray | float:
        """Symmetric PSD square root (a float for scalar blocks)."""
        if self.matrix is None:
            return math.sqrt(self.scalar)
        lam, v = np.linalg.eigh(0.5 * (self.matrix + self.matrix.T))
        return (v * np.sqrt(np.clip(lam, 0.0, None))) @ v.T


def posterior_covariance(a: np.ndarray, gamma: float, w_norm: float) -> np.ndarray:
    """``R* = (I + eta^2 A^T A)^{-1}``."""
    a = np.asarray(a, dtype=float)
    eta2 = posterior_scale(gamma, w_norm)
    m = np.eye(a.shape[1]) + eta2 * (a.T @ a)
    r = np.linalg.solve(m, np.eye(a.shape[1]))
    return 0.5 * (r + r.T)


def optimal_posteriors(sset: SensitivitySet, gamma: float, w_norm: float) -> list[CovBlock]:
    eta2 = posterior_scale(gamma, w_norm)
    blocks = []
    for l in range(1, sset.depth + 1):
        if sset.is_scalar():
            c = sset.scalars[l - 1]
            blocks.append(CovBlock(sset.columns[l - 1], scalar=1.0 / (1.0 + eta2 * c * c)))
        else:
            blocks.append(CovBlock(sset.columns[l - 1],
                                   posterior_covariance(sset.matrix(l), gamma, w_norm)))
    return blocks


@dataclass(frozen=True)
class PosteriorSpec:
    sigma_sq: float
    blocks: tuple[CovBlock, ...]
    eta_sq: float


def _excess(mu: np.ndarray) -> float:
    """``sum(mu - log mu - 1)`` written as ``t - log1p(t)`` with ``t = mu - 1``."""
    t = mu - 1.0
    return float(np.sum(t - np.log1p(t)))


def kl_terms(model: GcnModel, sigma_sq: float, blocks: Sequence[CovBlock]) -> tuple[float, list[float]]:
    """Return the weight term ``sum ||W_l||_F^2 / sigma^2`` and per-layer
    ``Tr(R_l) - logdet(R_l) - dim(R_l)``."""
    if len(blocks) != model.depth:
        raise ValidationError(f"need {model.depth} posterior blocks, got {len(blocks)}")
    if not sigma_sq > 0:
        raise ValidationError("sigma^2 must be positive")
    inv = 0.0 if math.isinf(sigma_sq) else 1.0 / sigma_sq
    weight_term = sum(float(np.sum(w * w)) for w in model.weights) * inv
    excess = []
    for l, (w, blk) in enumerate(zip(model.weights, blocks), start=1):
        if blk.dim != w.size:
            raise ValidationError(f"R_{l} has dimension {blk.dim}, W_{l} has {w.size} entries")
        mu = blk.eigenvalues()
        if np.min(mu) <= 0:
            raise ValidationError(f"R_{l} is not positive definite")
        excess.append(_excess(mu))
    return weight_term, excess


def kl_value(model: GcnModel, sigma_sq: float, blocks: Sequence[CovBlock]) -> float:
    """``(1/2) sum_l [||W_l||_F^2/sigma^2 + Tr R_l - logdet R_l - dim R_l]``."""
    weight_term, excess = kl_terms(model, sigma_sq, blocks)
    return 0.5 * (weight_term + sum(excess))


def lagrangian_objective(model: GcnModel, sigma_sq: float, blocks: Sequence[CovBlock],
                         sset: SensitivitySet, eta_sq: float) -> float:
    """KL objective plus the trace penalty ``(eta^2/2) sum Tr(A_l R_l A_l^T)``.

    ``R*`` is the stationary point of this function, not of the KL alone.
    """
    base = kl_value(model, sigma_sq, blocks)
    pen = 0.0
    for l, blk in enumerate(blocks, start=1):
        pen += float(np.sum(sset.gram(l) * blk.dense()))
    return base + 0.5 * eta_sq * pen


def framework_prior_variance(sset: SensitivitySet, blocks: Sequence[CovBlock], gamma: float) -> float:
    """Weight-dependent ``1/sigma^2 = (16 kappa/gamma^2) sum Tr(A_l R_l A_l^T)``."""
    total = 0.0
    for l, blk in enumerate(blocks, start=1):
        total += float(np.sum(sset.gram(l) * blk.dense()))
    inv = 16 * kappa() / gamma ** 2 * total
    return math.inf if inv == 0 else 1.0 / inv


def _check_m(m, delta):
    if m < 2:
        raise ValidationError("need m >= 2 samples")
    if not delta > 0:
        raise ValidationError("delta must be positive")


def pac_bound_from_kl(empirical: float, kl: float, m: int, delta: float, log_cover: float = 0.0) -> float:
    """Margin PAC-Bayes bound ``emp + sqrt((2 KL + ln(8m/delta) + log_cover) / (2(m-1)))``."""
    _check_m(m, delta)
    return empirical + math.sqrt((2 * kl + math.log(8 * m / delta) + log_cover) / (2 * (m - 1)))


def two_sided_bound(expected_emp: float, kl: float, m: int, delta: float) -> float:
    _check_m(m, delta)
    return expected_emp + math.sqrt((kl + math.log(2 * m / delta)) / (2 * (m - 1)))


def order_bound(empirical: float, complexity: float, gamma: float, m: int, delta: float, d: int) -> float:
    """Unit-constant evaluation of ``emp + O(sqrt((C + ln(dm/delta)) / (gamma^2 m)))``."""
    _check_m(m, delta)
    return empirical + math.sqrt((complexity + math.log(d * m / delta)) / (gamma ** 2 * m))


@dataclass
class LayerDiagnostics:
    spectral_norm: float
    frobenius_norm: float
    g: float | None = None


@dataclass
class BoundReport:
    design: str
    empirical_margin_loss: float
    complexity_term: float | None
    kl_exact: float | None
    kl_upper: float | None
    final_bound: float | None
    order_bound: float | None
    baseline_bound: float
    constants: dict = field(default_factory=dict)
    layers: list[LayerDiagnostics] = field(default_factory=list)
    flags: list[str] = field(default_factory=list)

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class _Context:
    d: int
    n: int
    m: int
    h: int
    k: int
    bound: float
    w_norm: float
    ones_sq: float
    spec: list
    frob: list
    emp: float
    log_cover: float
    cover: float
    flags: list


def _context(model: GcnModel, prop: Propagation, samples: Sequence[GraphSample], params: PacParams) -> _Context:
    if not samples:
        raise ValidationError("need at least one sample")
    for s in samples:
        if s.graph.n != prop.n or s.x.shape[1] != model.widths[0]:
            raise ValidationError("samples do not match the propagation/model dimensions")
    data_bound = max(s.feature_bound for s in samples)
    bound = params.bound if params.bound is not None else data_bound
    if data_bound > bound + 1e-12:
        raise ValidationError(f"sample feature norm {data_bound:.6g} exceeds B={bound:.6g}")
    d, m = model.depth, len(samples)
    cover = params.cover_constant if params.cover_constant is not None else d * math.sqrt(m)
    spec, frob = layer_norms(model)
    flags = []
    if min(spec) == 0.0:
        flags.append("degenerate: a layer has zero spectral norm")
    return _Context(
        d=d, n=prop.n, m=m, h=model.max_width, k=model.num_classes, bound=bound,
        w_norm=float(np.linalg.norm(model.flat_weights())),
        ones_sq=propagated_ones(prop, d)[0], spec=spec, frob=frob,
        emp=margin_loss_empirical(model, samples, params.gamma, prop.kind),
        log_cover=math.log(cover), cover=cover, flags=flags,
    )


def baseline_complexity(model: GcnModel, prop: Propagation) -> float:
    """``d^2 h ln(dh) ||L||_2^{2d-2} Phi(w)`` without the ``B^2`` factor."""
    d, h = model.depth, model.max_width
    return d * d * h * math.log(d * h) * prop.norm2 ** (2 * d - 2) * spectral_complexity(model)


def _baseline_bound(model, prop, ctx, params) -> tuple[float, float]:
    c = ctx.bound ** 2 * baseline_complexity(model, prop)
    return c, order_bound(ctx.emp, c, params.gamma, ctx.m, params.delta, ctx.d)


def _worst_sample(samples, build):
    """Sensitivity set with the largest total trace over the samples, and its index."""
    best, best_idx, best_tr = None, 0, -1.0
    for i, s in enumerate(samples):
        sset = build(s.x)
        tr = sum(sset.trace(l) for l in range(1, sset.depth + 1))
        if tr > best_tr:
            best, best_idx, best_tr = sset, i, tr
    return best, best_idx


def _constants(ctx: _Context, params: PacParams, **extra) -> dict:
    out = {
        "kappa": kappa(), "e2": E2, "e4_plus_1": E4_PLUS_1,
        "gamma": params.gamma, "delta": params.delta, "B": ctx.bound,
        "m": ctx.m, "n": ctx.n, "d": ctx.d, "h": ctx.h, "K": ctx.k,
        "w_norm": ctx.w_norm, "ones_norm_sq": ctx.ones_sq,
        "cover_constant": ctx.cover,
        "eta_sq": posterior_scale(params.gamma, ctx.w_norm),
    }
    out.update(extra)
    return out


def _layers(ctx: _Context, g=None) -> list[LayerDiagnostics]:
    return [LayerDiagnostics(s, f, None if g is None else g[i])
            for i, (s, f) in enumerate(zip(ctx.spec, ctx.frob))]


def _eta_flag() -> str:
    return "eta^2 taken as 16 kappa ||w||^2 / gamma^2"


def bound_spatial(model: GcnModel, prop: Propagation, samples: Sequence[GraphSample],
                   params: PacParams, variant="lowrank") -> BoundReport:
    """Spatial-design bound (diagonal or low-rank sensitivity)."""
    variant = Design(variant)
    if variant not in (Design.DIAGONAL, Design.LOW_RANK):
        raise ValidationError("spatial bound variant must be 'diagonal' or 'lowrank'")
    ctx = _context(model, prop, samples, params)
    d, gamma = ctx.d, params.gamma
    phi = spectral_complexity(model)
    kap = kappa()
    flags = list(ctx.flags) + [_eta_flag()]
    extra = {}
    if variant is Design.DIAGONAL:
        sset = build_spatial_diagonal(model, prop, ctx.bound)
        complexity = ctx.bound ** 2 * d * d * ctx.h ** 2 * ctx.ones_sq / ctx.n * phi
        kl_upper = 8 * E4_PLUS_1 * kap * ctx.w_norm ** 2 / gamma ** 2 * sum(
            sset.trace(l) for l in range(1, d + 1))
    else:
        sset, idx = _worst_sample(samples, lambda x: build_spatial_lowrank(model, prop, x))
        extra["sensitivity_sample"] = idx
        complexity = ctx.bound ** 2 * d * d * ctx.k * ctx.ones_sq / ctx.n * phi
        sq = [s * s for s in ctx.spec]
        kl_upper = (8 * E4_PLUS_1 * kap * ctx.bound ** 2 * d * ctx.k / (gamma ** 2 * ctx.n)
                    * ctx.w_norm ** 2 * ctx.ones_sq * sum(_prod_except(sq, l) for l in range(1, d + 1)))
    sigma_sq = prior_variance(variant, gamma, ctx.spec, prop, model.widths, ctx.bound)
    blocks = optimal_posteriors(sset, gamma, ctx.w_norm)
    kl_exact = kl_value(model, sigma_sq, blocks)
    if "degenerate" in " ".join(flags):
        complexity = 0.0
    final = pac_bound_from_kl(ctx.emp, kl_upper, ctx.m, params.delta, ctx.log_cover)
    base_c, base_b = _baseline_bound(model, prop, ctx, params)
    return BoundReport(
        design=variant.value, empirical_margin_loss=ctx.emp, complexity_term=complexity,
        kl_exact=kl_exact, kl_upper=kl_upper, final_bound=final,
        order_bound=order_bound(ctx.emp, complexity, gamma, ctx.m, params.delta, d),
        baseline_bound=base_b,
        constants=_constants(ctx, params, sigma_sq=sigma_sq, phi=phi, baseline_complexity=base_c, **extra),
        layers=_layers(ctx), flags=flags,
    )


def bound_spectral(model: GcnModel, prop: Propagation, samples: Sequence[GraphSample],
                   params: PacParams, filt: FilterSpec | None = None) -> BoundReport:
    """Spectral-design bound for a graph filter."""
    filt = filt or FilterSpec()
    ctx = _context(model, prop, samples, params)
    d, gamma = ctx.d, params.gamma
    g = spectral_sensitivities(prop, filt, d)
    phi_sp = graph_spectral_complexity(model, g)
    sset, idx = _worst_sample(samples, lambda x: build_spectral(model, prop, x, filt))
    complexity = ctx.bound ** 2 * d * d * ctx.h * phi_sp
    sq = [s * s for s in ctx.spec]
    kl_upper = (8 * E4_PLUS_1 * kappa() * d * ctx.h * ctx.bound ** 2 / gamma ** 2 * ctx.w_norm ** 2
                * sum(gl * gl * _prod_except(sq, l) for l, gl in enumerate(g, 1)))
    sigma_sq = prior_variance(Design.SPECTRAL, gamma, ctx.spec, prop, model.widths, ctx.bound, g)
    blocks = optimal_posteriors(sset, gamma, ctx.w_norm)
    kl_exact = kl_value(model, sigma_sq, blocks)
    flags = list(ctx.flags) + [_eta_flag()] + list(sset.notes)
    final = pac_bound_from_kl(ctx.emp, kl_upper, ctx.m, params.delta, ctx.log_cover)
    base_c, base_b = _baseline_bound(model, prop, ctx, params)
    return BoundReport(
        design=sset.label, empirical_margin_loss=ctx.emp, complexity_term=complexity,
        kl_exact=kl_exact, kl_upper=kl_upper, final_bound=final,
        order_bound=order_bound(ctx.emp, complexity, gamma, ctx.m, params.delta, d),
        baseline_bound=base_b,
        constants=_constants(ctx, params, sigma_sq=sigma_sq, phi_sp=phi_sp,
                             phi=spectral_complexity(model), baseline_complexity=base_c,
                             filter=filt.kind.value, xi=filt.xi, sensitivity_sample=idx),
        layers=_layers(ctx, g), flags=flags,
    )


def bound_baseline(model: GcnModel, prop: Propagation, samples: Sequence[GraphSample],
                   params: PacParams) -> BoundReport:
    """Prior-art GCN bound with the ``ln(dh) ||L||^{2d-2}`` factor, order form only."""
    ctx = _context(model, prop, samples, params)
    c, b = _baseline_bound(model, prop, ctx, params)
    return BoundReport(
        design="baseline", empirical_margin_loss=ctx.emp, complexity_term=c,
        kl_exact=None, kl_upper=None, final_bound=b, order_bound=b, baseline_bound=b,
        constants=_constants(ctx, params, phi=spectral_complexity(model), L_norm=prop.norm2),
        layers=_layers(ctx), flags=list(ctx.flags) + ["order-form bound with unit constant"],
    )


def bound_exact(model: GcnModel, prop: Propagation, samples: Sequence[GraphSample],
                params: PacParams) -> BoundReport:
    """Exact spatial design: KL at the weight-dependent framework prior, no final bound."""
    ctx = _context(model, prop, samples, params)
    sset, idx = _worst_sample(samples, lambda x: build_spatial_exact(model, prop, x))
    blocks = optimal_posteriors(sset, params.gamma, ctx.w_norm)
    sigma_sq = framework_prior_variance(sset, blocks, params.gamma)
    kl = kl_value(model, sigma_sq, blocks)
    _, base_b = _baseline_bound(model, prop, ctx, params)
    return BoundReport(
        design="exact", empirical_margin_loss=ctx.emp, complexity_term=None,
        kl_exact=kl, kl_upper=None, final_bound=None, order_bound=None, baseline_bound=base_b,
        constants=_constants(ctx, params, sigma_sq=sigma_sq, sensitivity_sample=idx),
        layers=_layers(ctx),
        flags=list(ctx.flags) + [_eta_flag(), "weight-dependent prior; no closed-form bound"],
    )


def bound_for(design: str, model, prop, samples, params, filt: FilterSpec | None = None) -> BoundReport:
    if design in ("diagonal", "lowrank"):
        return bound_spatial(model, prop, samples, params, design)
    if design == "spectral":
        return bound_spectral(model, prop, samples, params, filt)
    if design == "baseline":
        return bound_baseline(model, prop, samples, params)
    if design == "exact":
        return bound_exact(model, prop, samples, params)
    raise ValidationError(f"unknown design {design!r}")
