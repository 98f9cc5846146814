"""GCN forward pass, layerwise weight Jacobians and empirical margin loss.

Convolution layers compute ``H_l = phi(L H_{l-1} W_l)`` for ``l < d``; the
readout is ``f = (1/n) 1^T H_{d-1} W_d``.  Weight vectors are taken in
column-stacking order, ``u_l = vec(U_l)``.
"""

from __future__ import annotations

import enum
import json
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import ValidationError
from .graphs import Graph, Propagation, PropagationKind, build_propagation
from .matrixkit import as_matrix, vec


class Activation(str, enum.Enum):
    RELU = "relu"
    TANH = "tanh"
    IDENTITY = "identity"

    def __call__(self, z):
        if self is Activation.RELU:
            return np.maximum(z, 0.0)
        if self is Activation.TANH:
            return np.tanh(z)
        return z

    def derivative(self, z):
        # ReLU'(0) := 0
        if self is Activation.RELU:
            return (z > 0).astype(float)
        if self is Activation.TANH:
            return 1.0 - np.tanh(z) ** 2
        return np.ones_like(z)


@dataclass(frozen=True, eq=False)
class GcnModel:
    weights: tuple[np.ndarray, ...]
    activation: Activation = Activation.RELU

    def __post_init__(self):
        ws = tuple(as_matrix(w, f"W_{i + 1}") for i, w in enumerate(self.weights))
        if len(ws) < 2:
            raise ValidationError("a GCN needs depth d >= 2")
        for i in range(1, len(ws)):
            if ws[i - 1].shape[1] != ws[i].shape[0]:
                raise ValidationError(
                    f"W_{i} has {ws[i - 1].shape[1]} columns but W_{i + 1} has {ws[i].shape[0]} rows")
        object.__setattr__(self, "weights", ws)
        object.__setattr__(self, "activation", Activation(self.activation))

    @property
    def depth(self) -> int:
        return len(self.weights)

    @property
    def widths(self) -> tuple[int, ...]:
        return (self.weights[0].shape[0],) + tuple(w.shape[1] for w in self.weights)

    @property
    def num_classes(self) -> int:
        return self.widths[-1]

    @property
    def max_width(self) -> int:
        return max(self.widths)

    def weight(self, l: int) -> np.ndarray:
        """1-based layer access, ``W_l``."""
        return self.weights[l - 1]

    def flat_weights(self) -> np.ndarray:
        return np.concatenate([vec(w) for w in self.weights])


@dataclass(frozen=True, eq=False)
class LayerState:
    """Forward-pass record: ``embeddings[l]`` is ``H_l`` for ``l = 0..d-1``,
    ``derivatives[l-1]`` is ``phi'(L H_{l-1} W_l)`` as an ``n x h_l`` array."""

    embeddings: tuple[np.ndarray, ...]
    derivatives: tuple[np.ndarray, ...]
    output: np.ndarray

    def b_diag(self, l: int) -> np.ndarray:
        """Diagonal of ``B_l`` (length ``n h_l``)."""
        return vec(self.derivatives[l - 1])


@dataclass(frozen=True, eq=False)
class GraphSample:
    """Labelled graph sample; ``y`` is a class index in ``1..K``."""

    graph: Graph
    x: np.ndarray
    y: int

    def __post_init__(self):
        x = as_matrix(self.x, "X")
        if x.shape[0] != self.graph.n:
            raise ValidationError(f"X has {x.shape[0]} rows for a graph with {self.graph.n} nodes")
        object.__setattr__(self, "x", x)

    @property
    def feature_bound(self) -> float:
        return float(np.max(np.linalg.norm(self.x, axis=1)))


def _check_input(model: GcnModel, prop: Propagation, x) -> np.ndarray:
    x = as_matrix(x, "X")
    if x.shape != (prop.n, model.widths[0]):
        raise ValidationError(f"X must be {prop.n}x{model.widths[0]}, got {x.shape}")
    return x


def forward(model: GcnModel, prop: Propagation, x) -> LayerState:
    x = _check_input(model, prop, x)
    L = prop.matrix
    hs = [x]
    ds = []
    for w in model.weights[:-1]:
        z = L @ hs[-1] @ w
        hs.append(model.activation(z))
        ds.append(model.activation.derivative(z))
    f = hs[-1].sum(axis=0) @ model.weights[-1] / prop.n
    return LayerState(tuple(hs), tuple(ds), f)


def output(model: GcnModel, prop: Propagation, x) -> np.ndarray:
    return forward(model, prop, x).output


def _check_layer(model, l):
    if not 1 <= l <= model.depth:
        raise ValidationError(f"layer index {l} outside 1..{model.depth}")


def embedding_jacobian(model: GcnModel, prop: Propagation, x, l: int,
                       state: LayerState | None = None) -> np.ndarray:
    """``G_l = d f / d vec(H_l)``, a ``K x n h_l`` matrix, for ``1 <= l <= d-1``.

    Rows are pulled back layer by layer: a row of ``G_{k}`` reshaped to
    ``n x h_k`` maps to ``L^T (B_k o M) W_k^T`` in ``G_{k-1}``, which is the
    row form of ``G_k B_k (W_k^T kron L)``.
    """
    if not 1 <= l <= model.depth - 1:
        raise ValidationError(f"G_l is defined for 1 <= l <= d-1, got l={l}")
    st = state or forward(model, prop, x)
    n, d, L = prop.n, model.depth, prop.matrix
    wd = model.weight(d)
    # rows of (1/n)(W_d^T kron 1^T): M = (1/n) 1 W_d[:, c]^T
    rows = [np.outer(np.ones(n), wd[:, c]) / n for c in range(wd.shape[1])]
    for k in range(d - 1, l, -1):
        bk = st.derivatives[k - 1]
        wk = model.weight(k)
        rows = [L.T @ (bk * m) @ wk.T for m in rows]
    return np.stack([vec(m) for m in rows])


def jacobian_layer(model: GcnModel, prop: Propagation, x, l: int,
                   state: LayerState | None = None) -> np.ndarray:
    """Analytic ``J_l = d f / d vec(W_l)`` as a ``K x h_{l-1} h_l`` matrix."""
    x = _check_input(model, prop, x)
    _check_layer(model, l)
    st = state or forward(model, prop, x)
    d, n = model.depth, prop.n
    h = st.embeddings[l - 1]
    if l == d:
        ones_h = h.sum(axis=0) / n
        return np.kron(np.eye(model.num_classes), ones_h[None, :])
    g = embedding_jacobian(model, prop, x, l, st)
    bl = st.derivatives[l - 1]
    lh = prop.matrix @ h
    hl = model.widths[l]
    # row r: (g_r o b_l)(I kron L H_{l-1}) = vec((L H_{l-1})^T M)
    out = []
    for r in range(g.shape[0]):
        m = (g[r] * vec(bl)).reshape((n, hl), order="F")
        out.append(vec(lh.T @ m))
    return np.stack(out)


def jacobians(model: GcnModel, prop: Propagation, x) -> list[np.ndarray]:
    st = forward(model, prop, x)
    return [jacobian_layer(model, prop, x, l, st) for l in range(1, model.depth + 1)]


def jacobian_fd(model: GcnModel, prop: Propagation, x, l: int, epsilon: float = 1e-5) -> np.ndarray:
    """Central-difference estimate of ``d f / d vec(W_l)``."""
    if epsilon <= 0:
        raise ValidationError("epsilon must be positive")
    x = _check_input(model, prop, x)
    _check_layer(model, l)
    w = model.weight(l)
    flat = vec(w)
    cols = []
    for k in range(flat.size):
        outs = []
        for sign in (1.0, -1.0):
            pert = flat.copy()
            pert[k] += sign * epsilon
            ws = list(model.weights)
            ws[l - 1] = pert.reshape(w.shape, order="F")
            outs.append(output(GcnModel(tuple(ws), model.activation), prop, x))
        cols.append((outs[0] - outs[1]) / (2 * epsilon))
    return np.stack(cols, axis=1)


def apply_perturbation(model: GcnModel, perturbations: Sequence[np.ndarray]) -> GcnModel:
    if len(perturbations) != model.depth:
        raise ValidationError(f"need {model.depth} perturbation blocks, got {len(perturbations)}")
    ws = []
    for l, (w, u) in enumerate(zip(model.weights, perturbations), start=1):
        u = np.asarray(u, dtype=float)
        if u.shape != w.shape:
            raise ValidationError(f"U_{l} has shape {u.shape}, W_{l} has {w.shape}")
        ws.append(w + u)
    return GcnModel(tuple(ws), model.activation)


def margin_violated(f: np.ndarray, y: int, gamma: float) -> bool:
    k = f.size
    if not 1 <= y <= k:
        raise ValidationError(f"label {y} outside 1..{k}")
    others = np.delete(f, y - 1)
    best_other = others.max() if others.size else -np.inf
    return bool(f[y - 1] <= gamma + best_other)


def margin_loss_empirical(model: GcnModel, samples: Sequence[GraphSample], gamma: float,
                          kind=PropagationKind.NORMALIZED_ADJACENCY) -> float:
    """Fraction of samples whose true-class score does not beat the runner-up by more than ``gamma``."""
    if not samples:
        raise ValidationError("margin loss needs at least one sample")
    if gamma < 0:
        raise ValidationError("gamma must be non-negative")
    cache: dict[int, Propagation] = {}
    hits = 0
    for s in samples:
        prop = cache.get(id(s.graph))
        if prop is None:
            prop = cache[id(s.graph)] = build_propagation(s.graph, kind)
        hits += margin_violated(output(model, prop, s.x), s.y, gamma)
    return hits / len(samples)


def random_model(widths: Sequence[int], activation="relu", seed: int = 0) -> GcnModel:
    """I.i.d. normal weights with per-layer scale ``1/sqrt(h_{l-1})``."""
    widths = [int(h) for h in widths]
    if len(widths) < 3 or min(widths) < 1:
        raise ValidationError("widths must list h_0..h_d with d >= 2, all positive")
    rng = np.random.default_rng(seed)
    ws = [rng.standard_normal((a, b)) / np.sqrt(a) for a, b in zip(widths[:-1], widths[1:])]
    return GcnModel(tuple(ws), Activation(activation))


def random_features(n: int, h0: int, bound: float, rng: np.random.Generator) -> np.ndarray:
    """Uniform entries on [-1, 1], rescaled so the largest row norm equals ``bound``."""
    x = rng.uniform(-1.0, 1.0, size=(n, h0))
    top = np.max(np.linalg.norm(x, axis=1))
    return x * (bound / top) if top > 0 else x


def make_dataset(graphs: Graph | Sequence[Graph], teacher: GcnModel, m: int, bound: float,
                 seed: int = 0, kind=PropagationKind.NORMALIZED_ADJACENCY) -> list[GraphSample]:
    """Draw ``m`` samples whose labels are the teacher's argmax classes."""
    if m < 1:
        raise ValidationError("need at least one sample")
    pool = [graphs] if isinstance(graphs, Graph) else list(graphs)
    props = [build_propagation(g, kind) for g in pool]
    rng = np.random.default_rng(seed)
    samples = []
    for i in range(m):
        g, prop = pool[i % len(pool)], props[i % len(pool)]
        x = random_features(g.n, teacher.widths[0], bound, rng)
        y = int(np.argmax(output(teacher, prop, x))) + 1
        samples.append(GraphSample(g, x, y))
    return samples


def model_to_dict(model: GcnModel) -> dict:
    return {
        "widths": list(model.widths),
        "activation": model.activation.value,
        "weights": [w.tolist() for w in model.weights],
    }


def model_from_dict(data: dict) -> GcnModel:
    try:
        ws = tuple(np.asarray(w, dtype=float) for w in data["weights"])
        model = GcnModel(ws, Activation(data.get("activation", "relu")))
    except (KeyError, TypeError, ValueError) as exc:
        if isinstance(exc, ValidationError):
            raise
        raise ValidationError(f"malformed model description: {exc}") from None
    if "widths" in data and list(data["widths"]) != list(model.widths):
        raise ValidationError(f"declared widths {data['widths']} do not match weights {list(model.widths)}")
    return model


def load_model(path) -> GcnModel:
    return model_from_dict(json.loads(Path(path).read_text()))


def save_model(model: GcnModel, path) -> None:
    Path(path).write_text(json.dumps(model_to_dict(model), indent=2) + "\n")
