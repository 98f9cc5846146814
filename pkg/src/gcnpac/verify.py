"""Seeded property suites over random small instances.

Each suite returns a list of :class:`CheckResult`.  A check is *gating* when
its failure should fail a verification run; non-gating checks are reported
for information only (see the ``note`` field for why).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .gcn import (
    Activation,
    GcnModel,
    forward,
    jacobian_fd,
    jacobians,
    make_dataset,
    random_features,
    random_model,
)
from .graphs import (
    GRAPH_KINDS,
    Graph,
    Propagation,
    PropagationKind,
    build_propagation,
    generate,
    ones_lower_bound,
    propagated_ones,
)
from .matrixkit import kron, psd_dominates, spectral_norm, trace_logdet_excess, vec
from .montecarlo import (
    McConfig,
    check_lemma6,
    check_perturbation_bound,
    check_perturbation_condition,
    check_quadratic_concentration,
)
from .pacbayes import (
    CovBlock,
    PacParams,
    bound_baseline,
    bound_spatial,
    bound_spectral,
    graph_spectral_complexity,
    lagrangian_objective,
    layer_norms,
    optimal_posteriors,
    posterior_scale,
    prior_variance,
    spectral_complexity,
)
from .sensitivity import (
    Design,
    FilterKind,
    FilterSpec,
    build_spatial_diagonal,
    build_spatial_exact,
    build_spatial_lowrank,
    build_spectral,
    dominance_margins,
    gram_chain_margins,
    scaled,
    spectral_sensitivities,
)

DOMINANCE_TOL = 1e-8
REL_TOL = 1e-8


@dataclass
class CheckResult:
    name: str
    passed: bool
    instances: int
    worst: float
    tolerance: float
    gating: bool = True
    note: str = ""
    details: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "name": self.name, "pass": self.passed, "gating": self.gating,
            "instances": self.instances, "worst": self.worst, "tolerance": self.tolerance,
            "note": self.note, "details": self.details,
        }


@dataclass(frozen=True, eq=False)
class Instance:
    graph: Graph
    prop: Propagation
    model: GcnModel
    x: np.ndarray

    @property
    def bound(self) -> float:
        return float(np.max(np.linalg.norm(self.x, axis=1)))


def _rng(seed: int, *tags: int) -> np.random.Generator:
    return np.random.default_rng([seed, *tags])


def random_graph(rng: np.random.Generator, n_min: int = 3, n_max: int = 6, kinds=GRAPH_KINDS) -> Graph:
    """A graph from a random family with ``n_min <= n <= n_max`` nodes."""
    kind = str(rng.choice(list(kinds)))
    n = int(rng.integers(n_min, n_max + 1))
    seed = int(rng.integers(2 ** 31))
    if kind == "cycle":
        n = max(n, 3)
    if kind == "regular":
        ks = [k for k in range(1, n) if (k * n) % 2 == 0]
        return generate("regular", n, seed, k=int(rng.choice(ks)))
    if kind == "erdos_renyi":
        return generate(kind, n, seed, p=float(rng.uniform(0.2, 0.9)))
    if kind == "sbm":
        a = max(1, n // 2)
        return generate(kind, seed=seed, sizes=[a, n - a] if n > a else [a],
                        p_in=float(rng.uniform(0.5, 1.0)), p_out=float(rng.uniform(0.0, 0.3)))
    return generate(kind, n, seed)


def random_instance(seed: int, *, activation="relu", n_max: int = 6, d_max: int = 4, h_max: int = 3,
                    h_min: int = 1, k_max: int | None = None, kind=PropagationKind.NORMALIZED_ADJACENCY,
                    bound: float = 1.0) -> Instance:
    rng = _rng(seed, 0)
    g = random_graph(rng, 3, n_max)
    d = int(rng.integers(2, d_max + 1))
    widths = [int(rng.integers(h_min, h_max + 1)) for _ in range(d + 1)]
    if k_max is not None:
        widths[-1] = min(widths[-1], k_max)
    model = random_model(widths, activation, seed=int(rng.integers(2 ** 31)))
    prop = build_propagation(g, kind)
    x = random_features(g.n, widths[0], bound, rng)
    return Instance(g, prop, model, x)


def kink_margin(inst: Instance) -> float:
    """Smallest pre-activation magnitude over the convolution layers."""
    out = math.inf
    h = inst.x
    for w in inst.model.weights[:-1]:
        z = inst.prop.matrix @ h @ w
        out = min(out, float(np.min(np.abs(z))))
        h = inst.model.activation(z)
    return out


def smooth_relu_instances(seed: int, count: int, margin: float = 1e-2, **kw) -> list[Instance]:
    """ReLU instances whose pre-activations all stay at least ``margin`` away from the kink."""
    out, t = [], 0
    while len(out) < count:
        inst = random_instance(seed * 100003 + t, **kw)
        t += 1
        if kink_margin(inst) >= margin:
            out.append(inst)
    return out


def _rel_gap(a: float, b: float) -> float:
    return abs(a - b) / max(1.0, abs(a), abs(b))


def _result(name, values: Sequence[float], limit: float, *, larger_is_worse=True, **kw) -> CheckResult:
    vals = list(values)
    worst = max(vals) if larger_is_worse else min(vals)
    ok = worst <= limit if larger_is_worse else worst >= limit
    return CheckResult(name, bool(ok), len(vals), float(worst), float(limit), **kw)


# --- matrix lemmas -----------------------------------------------------------


def _rand_psd(rng, k, min_eig_val=0.0):
    g = rng.standard_normal((k, k))
    return g @ g.T + min_eig_val * np.eye(k)


def lemma_suite(seed: int = 0, count: int = 100) -> list[CheckResult]:
    trace_gap, trace_oracle, zero_case = [], [], []
    kron_order, kron_spec, kron_frob, axb, vec_id = [], [], [], [], []
    for t in range(count):
        rng = _rng(seed, 1, t)
        r, c = (int(v) for v in rng.integers(1, 7, size=2))
        x = rng.standard_normal((r, c))
        alpha = float(10 ** rng.uniform(-2, 1))
        f = trace_logdet_excess(x, alpha)
        rhs = alpha * float(np.sum(x * x))
        trace_gap.append((f - rhs) / max(1.0, rhs))
        rmat = np.linalg.inv(np.eye(c) + alpha * x.T @ x)
        direct = np.trace(rmat) - np.linalg.slogdet(rmat)[1] - c
        trace_oracle.append(_rel_gap(f, direct))
        zero_case.append(abs(trace_logdet_excess(np.zeros((r, c)), alpha)))

        ka, kb = (int(v) for v in rng.integers(1, 5, size=2))
        a = _rand_psd(rng, ka)
        b = rng.standard_normal((kb, kb))
        b = b + b.T
        p = _rand_psd(rng, kb, 0.1)
        cmat = b + p if rng.random() < 0.5 else b - p
        kron_order.append(float(psd_dominates(b, cmat, 1e-8) != psd_dominates(kron(a, b), kron(a, cmat), 1e-8)))

        ma = rng.standard_normal(tuple(int(v) for v in rng.integers(1, 7, size=2)))
        mb = rng.standard_normal(tuple(int(v) for v in rng.integers(1, 7, size=2)))
        kab = kron(ma, mb)
        kron_spec.append(_rel_gap(spectral_norm(kab), spectral_norm(ma) * spectral_norm(mb)))
        kron_frob.append(_rel_gap(np.linalg.norm(kab), np.linalg.norm(ma) * np.linalg.norm(mb)))

        p1, q1, r1, s1 = (int(v) for v in rng.integers(1, 7, size=4))
        am, xm, bm = rng.standard_normal((p1, q1)), rng.standard_normal((q1, r1)), rng.standard_normal((r1, s1))
        lhs = np.linalg.norm(am @ xm @ bm)
        bound = spectral_norm(am) * spectral_norm(bm) * np.linalg.norm(xm)
        axb.append((lhs - bound) / max(1.0, bound))
        vec_id.append(float(np.max(np.abs(vec(am @ xm @ bm) - kron(bm.T, am) @ vec(xm)))))
    return [
        _result("trace_logdet_excess <= alpha Tr(X^T X)", trace_gap, REL_TOL),
        _result("trace_logdet_excess matches direct evaluation", trace_oracle, REL_TOL),
        _result("trace_logdet_excess vanishes at X = 0", zero_case, 0.0),
        _result("kron preserves the PSD order (both directions)", kron_order, 0.0),
        _result("||A kron B||_2 = ||A||_2 ||B||_2", kron_spec, REL_TOL),
        _result("||A kron B||_F = ||A||_F ||B||_F", kron_frob, REL_TOL),
        _result("||AXB||_F <= ||A||_2 ||B||_2 ||X||_F", axb, REL_TOL),
        _result("vec(AXB) = (B^T kron A) vec(X)", vec_id, 1e-12),
    ]


# --- graphs ------------------------------------------------------------------


def graph_cases(seed: int = 0, count: int = 50, n_max: int = 40) -> list[Graph]:
    graphs = []
    for t in range(count):
        rng = _rng(seed, 2, t)
        kind = GRAPH_KINDS[t % len(GRAPH_KINDS)]
        graphs.append(random_graph(rng, 3, n_max, kinds=(kind,)))
    return graphs


def graph_suite(seed: int = 0, count: int = 50, depths: Sequence[int] = range(1, 7)) -> list[CheckResult]:
    rho_err, norm_err, eig_out, eig_signed, sandwich, regular = [], [], [], [], [], []
    lazy_fix, lazy_norm = [], []
    for g in graph_cases(seed, count):
        p = build_propagation(g, PropagationKind.NORMALIZED_ADJACENCY)
        rho_err.append(abs(p.spectral_radius - 1.0))
        norm_err.append(abs(p.norm2 - 1.0))
        lam = p.eigenvalues
        eig_out.append(max(0.0, -float(lam.min()), float(lam.max()) - 1.0))
        eig_signed.append(max(0.0, -1.0 - float(lam.min()), float(lam.max()) - 1.0))
        low = ones_lower_bound(g)
        for d in depths:
            sq, _ = propagated_ones(p, d)
            sandwich.append(max(low - sq, sq - g.n) / g.n)
            if g.is_regular():
                regular.append(abs(sq - g.n) / g.n)
        q = build_propagation(g, PropagationKind.LAZY_RANDOM_WALK)
        for d in depths:
            lazy_fix.append(float(np.max(np.abs(q.apply_power(np.ones(g.n), d - 1) - 1.0))))
        deg = g.degrees
        upper = math.sqrt((deg.max() + 1) / (deg.min() + 1))
        lazy_norm.append(max(1.0 - q.norm2, q.norm2 - upper))
    return [
        _result("normalized adjacency: rho(L) = 1", rho_err, 1e-9),
        _result("normalized adjacency: ||L||_2 = 1", norm_err, 1e-9),
        _result("normalized adjacency: eigenvalues in [-1, 1]", eig_signed, 1e-9),
        _result("normalized adjacency: eigenvalues in [0, 1]", eig_out, 1e-9, gating=False,
                note="I + A is indefinite for most graphs (cycles reach -1/3, stars 1 - sqrt(n-1)); "
                     "nothing downstream relies on a nonnegative spectrum"),
        _result("alpha_1^2 <= ||L^{d-1} 1||^2 <= n", sandwich, 1e-9),
        _result("regular graphs: ||L^{d-1} 1||^2 = n", regular or [0.0], 1e-9),
        _result("lazy random walk: L^{d-1} 1 = 1", lazy_fix, 1e-12),
        _result("lazy random walk: 1 <= ||L||_2 <= sqrt((D_max+1)/(D_min+1))", lazy_norm, 1e-9),
    ]


# --- Jacobians ---------------------------------------------------------------


def jacobian_suite(seed: int = 0, count: int = 50, epsilon: float = 1e-5) -> list[CheckResult]:
    errs = []
    for t in range(count):
        inst = random_instance(seed * 7919 + t, activation="tanh", n_max=6, d_max=4, h_max=4)
        js = jacobians(inst.model, inst.prop, inst.x)
        for l, j in enumerate(js, start=1):
            fd = jacobian_fd(inst.model, inst.prop, inst.x, l, epsilon)
            scale = max(float(np.max(np.abs(j))), 1e-12)
            errs.append(float(np.max(np.abs(j - fd))) / scale)
    return [_result("Jacobian matches central differences (tanh)", errs, 1e-5)]


# --- dominance ---------------------------------------------------------------


def filter_grid() -> list[FilterSpec]:
    grid = [FilterSpec(FilterKind.IDENTITY)]
    for kind in FilterKind:
        if kind is FilterKind.IDENTITY:
            continue
        grid.extend(FilterSpec(kind, xi) for xi in (0.0, 0.5, 1.0))
    return grid


def dominance_suite(seed: int = 0, count: int = 30, break_dominance: bool = False) -> list[CheckResult]:
    """Loewner-order certificates on ReLU instances (``n <= 6``, ``d <= 4``, ``h <= 3``).

    ``break_dominance`` shrinks the certified designs by 10x as a negative control.
    """
    factor = 0.1 if break_dominance else 1.0
    exact_relu, exact_linear, spectral, diag_j, chain_lr, chain_diag = [], [], [], [], [], []
    per_filter: dict[str, float] = {}
    for t in range(count):
        inst = random_instance(seed * 104729 + t)
        m, p, x = inst.model, inst.prop, inst.x
        js = jacobians(m, p, x)
        exact = build_spatial_exact(m, p, x)
        low = build_spatial_lowrank(m, p, x)
        diag = scaled(build_spatial_diagonal(m, p, inst.bound), factor)
        exact_relu.append(min(dominance_margins(m, p, x, exact, js)))
        diag_j.append(min(dominance_margins(m, p, x, diag, js)))
        chain_lr.append(min(gram_chain_margins(exact, low)))
        chain_diag.append(min(gram_chain_margins(low, build_spatial_diagonal(m, p, inst.bound))))
        st = forward(m, p, x)
        for filt in filter_grid():
            s = scaled(build_spectral(m, p, x, filt, st), factor)
            v = min(dominance_margins(m, p, x, s, js))
            spectral.append(v)
            per_filter[filt.label] = min(per_filter.get(filt.label, math.inf), v)
        lin = GcnModel(m.weights, Activation.IDENTITY)
        exact_linear.append(min(dominance_margins(lin, p, x, build_spatial_exact(lin, p, x))))
    lim = -DOMINANCE_TOL
    return [
        _result("J^T J <= (1/d) A^T A, spectral design, all filters", spectral, lim,
                larger_is_worse=False, details={"min_margin_by_filter": per_filter}),
        _result("J^T J <= (1/d) A^T A, diagonal design", diag_j, lim, larger_is_worse=False),
        _result("exact <= low-rank Gram order", chain_lr, lim, larger_is_worse=False),
        _result("low-rank <= diagonal Gram order", chain_diag, lim, larger_is_worse=False),
        _result("J^T J <= (1/d) A^T A, exact spatial design, linear activation", exact_linear, lim,
                larger_is_worse=False),
        _result("J^T J <= (1/d) A^T A, exact spatial design, ReLU", exact_relu, lim,
                larger_is_worse=False, gating=False,
                note="the exact spatial design omits the activation masks B_l; "
                     "it is exact for linear models only"),
    ]


# --- sampling checks ---------------------------------------------------------


def _posterior_inputs(inst: Instance, design: Design, gamma: float, filt=None):
    m, p, x = inst.model, inst.prop, inst.x
    spec, _ = layer_norms(m)
    w_norm = float(np.linalg.norm(m.flat_weights()))
    g = None
    if design is Design.DIAGONAL:
        sset = build_spatial_diagonal(m, p, inst.bound)
    elif design is Design.LOW_RANK:
        sset = build_spatial_lowrank(m, p, x)
    elif design is Design.SPECTRAL:
        sset = build_spectral(m, p, x, filt)
        g = list(sset.g_values)
    else:
        sset = build_spatial_exact(m, p, x)
    blocks = optimal_posteriors(sset, gamma, w_norm)
    if design is Design.EXACT_SPATIAL:
        sigma_sq = 1.0
    else:
        sigma_sq = prior_variance(design, gamma, spec, p, m.widths, inst.bound, g)
    return sset, sigma_sq, blocks


def perturbation_condition_suite(seed: int = 0, count: int = 30, trials: int = 10000,
                                 gamma: float = 1.0) -> tuple[list[CheckResult], list[dict]]:
    cfg = McConfig(trials=trials, seed=seed)
    probs: dict[str, list[float]] = {}
    reports = []
    for t in range(count):
        inst = random_instance(seed * 15485863 + t)
        for design in (Design.DIAGONAL, Design.LOW_RANK, Design.SPECTRAL):
            sset, sigma_sq, blocks = _posterior_inputs(inst, design, gamma, FilterSpec())
            rep = check_perturbation_condition(sset, sigma_sq, blocks, gamma, cfg)
            probs.setdefault(design.value, []).append(rep.empirical_probability)
            if t == 0:
                reports.append(rep.to_dict())
    slack = 0.5 - 2.0 / math.sqrt(trials)
    checks = [_result(f"P[sum ||A_l u_l||^2 < gamma^2/16] >= 1/2, {name}", vals, slack,
                      larger_is_worse=False) for name, vals in probs.items()]
    return checks, reports


def perturbation_bound_suite(seed: int = 0, count: int = 10, trials: int = 1000,
                             epsilon: float = 1e-3, tolerance: float = 0.05,
                             informational: bool = True) -> tuple[list[CheckResult], list[dict]]:
    """First-order perturbation bounds on kink-free ReLU instances."""
    cfg = McConfig(trials=trials, seed=seed, perturbation_scale=epsilon, tolerance=tolerance)
    gated = [(Design.SPECTRAL, FilterSpec()), (Design.DIAGONAL, None)]
    extra = [(Design.LOW_RANK, None), (Design.EXACT_SPATIAL, None)] if informational else []
    rows: dict[str, list] = {}
    reports = []
    for i, inst in enumerate(smooth_relu_instances(seed, count)):
        for design, filt in gated + extra:
            sset, sigma_sq, blocks = _posterior_inputs(inst, design, 1.0, filt)
            rep = check_perturbation_bound(inst.model, inst.prop, inst.x, sset, sigma_sq, blocks, cfg)
            rows.setdefault(sset.label, []).append(rep)
            if i == 0:
                reports.append(rep.to_dict())
        rep = check_lemma6(inst.model, inst.prop, inst.x, cfg)
        rows.setdefault("layerwise", []).append(rep)
        if i == 0:
            reports.append(rep.to_dict())
    checks = []
    informational_labels = {"lowrank", "exact"}
    for label, reps in rows.items():
        worst = max(r.max_ratio for r in reps)
        ok = all(r.passed for r in reps)
        name = ("layerwise perturbation bound" if label == "layerwise"
                else f"||f_(w+eps u) - f_w||_inf^2 <= sum ||A_l eps u_l||^2, {label}")
        info = label in informational_labels
        checks.append(CheckResult(
            name, ok, len(reps), worst, 1.0 + tolerance, gating=not info,
            note="design not certified under ReLU; reported only" if info else "",
            details={"decays": all(r.details["decays"] for r in reps),
                     "max_unit_scale_ratio": max(r.details["unit_scale_ratio"] for r in reps)}))
    return checks, reports


def concentration_suite(seed: int = 0, trials: int = 10000) -> list[CheckResult]:
    cfg = McConfig(trials=trials, seed=seed)
    rng = _rng(seed, 5)
    cases = [(np.eye(k), np.eye(k)) for k in (1, 2, 5)]
    a1 = rng.standard_normal((1, 4))
    cases.append((a1.T @ a1, np.eye(4)))
    for _ in range(4):
        k = int(rng.integers(2, 7))
        a = rng.standard_normal((int(rng.integers(1, 5)), k))
        cases.append((a, np.linalg.inv(np.eye(k) + a.T @ a)))
    ratios = [check_quadratic_concentration(a, r, 0.7, cfg).max_ratio for a, r in cases]
    return [_result("median ||A u||^2 <= sigma^2 kappa Tr(A R A^T)", ratios, 1.0)]


# --- bounds ------------------------------------------------------------------


def _samples(inst: Instance, m: int, seed: int):
    teacher = random_model(inst.model.widths, inst.model.activation, seed=seed)
    return make_dataset(inst.graph, teacher, m, inst.bound, seed=seed, kind=inst.prop.kind)


def ordering_suite(seed: int = 0, count: int = 20, gamma: float = 1.0) -> list[CheckResult]:
    """Low-rank complexity against the baseline on normalized adjacency with ``2 <= K <= h``."""
    ratios, strict = [], []
    for t in range(count):
        inst = random_instance(seed * 32452843 + t, h_min=2, h_max=4)
        samples = _samples(inst, 8, seed + t)
        params = PacParams(gamma=gamma, bound=inst.bound)
        low = bound_spatial(inst.model, inst.prop, samples, params, "lowrank")
        base = bound_baseline(inst.model, inst.prop, samples, params)
        d, h, k, n = inst.model.depth, inst.model.max_width, inst.model.num_classes, inst.prop.n
        ones_sq = propagated_ones(inst.prop, d)[0]
        factor = math.log(d * h) * h / k * n / ones_sq
        ratios.append(base.complexity_term / low.complexity_term / factor - 1.0)
        strict.append(base.complexity_term / low.complexity_term)
    return [
        _result("baseline / low-rank complexity >= ln(dh) h/K n/||L^{d-1}1||^2", ratios, -1e-9,
                larger_is_worse=False),
        _result("low-rank complexity strictly below baseline", strict, 1.0 + 1e-12, larger_is_worse=False),
    ]


def spectral_suite(seed: int = 0, count: int = 20, gamma: float = 1.0) -> list[CheckResult]:
    reduce, excess = [], []
    for t in range(count):
        inst = random_instance(seed * 49979687 + t)
        m, p = inst.model, inst.prop
        phi = spectral_complexity(m)
        g_id = spectral_sensitivities(p, FilterSpec(), m.depth)
        reduce.append((graph_spectral_complexity(m, g_id) - phi) / max(phi, 1e-300))
        samples = _samples(inst, 8, seed + t)
        params = PacParams(gamma=gamma, bound=inst.bound)
        base = bound_spectral(m, p, samples, params, FilterSpec()).complexity_term
        for kind in FilterKind:
            if kind is FilterKind.IDENTITY:
                continue
            for xi in (0.5, 1.0):
                c = bound_spectral(m, p, samples, params, FilterSpec(kind, xi)).complexity_term
                excess.append((c - base) / max(base, 1e-300))
    return [
        _result("identity filter: Phi_sp <= Phi", reduce, 1e-12),
        _result("low/high-pass filters: complexity >= identity filter", excess, -1e-12,
                larger_is_worse=False),
    ]


def _probe(inst_model, sset, blocks, sigma_sq, eta_sq, rng, directions=20, step=1e-4):
    # moves R -> R^{1/2} (I + step S) R^{1/2}, which stays positive definite
    dense = [CovBlock(b.dim, b.dense()) for b in blocks]
    roots = [b.sqrt() for b in dense]
    base = lagrangian_objective(inst_model, sigma_sq, dense, sset, eta_sq)
    worst = math.inf
    for _ in range(directions):
        moved = []
        for b, root in zip(dense, roots):
            s = rng.standard_normal((b.dim, b.dim))
            s = s + s.T
            s /= np.linalg.norm(s)
            r = root @ (np.eye(b.dim) + step * s) @ root
            moved.append(CovBlock(b.dim, 0.5 * (r + r.T)))
        val = lagrangian_objective(inst_model, sigma_sq, moved, sset, eta_sq)
        worst = min(worst, (val - base) / max(1.0, abs(base)))
    return worst


def kl_suite(seed: int = 0, count: int = 30, gamma: float = 1.0) -> list[CheckResult]:
    order, nonneg, lemma, probe = [], [], [], []
    for t in range(count):
        inst = random_instance(seed * 86028121 + t)
        m, p = inst.model, inst.prop
        samples = _samples(inst, 8, seed + t)
        params = PacParams(gamma=gamma, bound=inst.bound)
        rng = _rng(seed, 9, t)
        w_norm = float(np.linalg.norm(m.flat_weights()))
        eta_sq = posterior_scale(gamma, w_norm)
        for design in ("diagonal", "lowrank", "spectral"):
            if design == "spectral":
                rep = bound_spectral(m, p, samples, params, FilterSpec())
            else:
                rep = bound_spatial(m, p, samples, params, design)
            order.append((rep.kl_upper - rep.kl_exact) / max(1.0, rep.kl_upper))
            nonneg.append(rep.kl_exact)
            x = samples[rep.constants.get("sensitivity_sample", 0)].x
            inst_x = Instance(inst.graph, p, m, x)
            sset, sigma_sq, blocks = _posterior_inputs(inst_x, Design(design), gamma, FilterSpec())
            for l, blk in enumerate(blocks, start=1):
                mu = blk.eigenvalues()
                excess = float(np.sum(mu - 1.0 - np.log(mu)))
                bound = eta_sq * sset.trace(l)
                lemma.append((excess - bound) / max(1.0, bound))
            probe.append(_probe(m, sset, blocks, sigma_sq, eta_sq, rng))
    return [
        _result("kl_upper >= kl_exact", order, -1e-9, larger_is_worse=False),
        _result("kl_exact >= 0", nonneg, 0.0, larger_is_worse=False),
        _result("Tr R - logdet R - dim <= eta^2 Tr(A^T A)", lemma, 1e-9),
        _result("R* is a local minimum of the penalized KL objective", probe, -1e-12,
                larger_is_worse=False),
    ]


SUITES: dict[str, Callable] = {
    "lemmas": lemma_suite,
    "graphs": graph_suite,
    "jacobian": jacobian_suite,
    "dominance": dominance_suite,
    "ordering": ordering_suite,
    "spectral": spectral_suite,
    "kl": kl_suite,
}


def run_all(seed: int = 0, trials: int = 10000, bound_trials: int = 1000,
            break_dominance: bool = False) -> dict:
    """Run every suite and collect a JSON-ready bundle."""
    groups: dict[str, list[CheckResult]] = {}
    groups["lemmas"] = lemma_suite(seed)
    groups["graphs"] = graph_suite(seed)
    groups["jacobian"] = jacobian_suite(seed)
    groups["dominance"] = dominance_suite(seed, break_dominance=break_dominance)
    cond, cond_reports = perturbation_condition_suite(seed, trials=trials)
    groups["perturbation_condition"] = cond
    pert, pert_reports = perturbation_bound_suite(seed, trials=bound_trials)
    groups["perturbation_bound"] = pert
    groups["concentration"] = concentration_suite(seed, trials=trials)
    groups["ordering"] = ordering_suite(seed)
    groups["spectral"] = spectral_suite(seed)
    groups["kl"] = kl_suite(seed)
    checks = [c for cs in groups.values() for c in cs]
    return {
        "seed": seed,
        "trials": trials,
        "bound_trials": bound_trials,
        "break_dominance": break_dominance,
        "passed": all(c.passed for c in checks if c.gating),
        "groups": {k: [c.to_dict() for c in v] for k, v in groups.items()},
        "mc_reports": cond_reports + pert_reports,
    }
