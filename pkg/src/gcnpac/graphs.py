"""Simple undirected graphs, generators, edge-list I/O and propagation matrices."""

from __future__ import annotations

import enum
import re
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path

import networkx as nx
import numpy as np

from .errors import ValidationError
from .matrixkit import EigDecomposition, spectral_norm, sym_eig


@dataclass(frozen=True)
class Graph:
    """Simple undirected graph on nodes ``0..n-1``.

    ``edges`` holds sorted pairs ``(i, j)`` with ``i < j``; construct through
    :meth:`from_edges` to get validation and deduplication.
    """

    n: int
    edges: tuple[tuple[int, int], ...]

    def __post_init__(self):
        if self.n < 1:
            raise ValidationError("graph needs at least one node")
        seen = set()
        for i, j in self.edges:
            if not (0 <= i < j < self.n):
                raise ValidationError(f"bad edge ({i}, {j}) for n={self.n}")
            if (i, j) in seen:
                raise ValidationError(f"duplicate edge ({i}, {j})")
            seen.add((i, j))

    @classmethod
    def from_edges(cls, n: int, edges) -> "Graph":
        clean = set()
        for i, j in edges:
            i, j = int(i), int(j)
            if i == j:
                raise ValidationError(f"self-loop at node {i}")
            if not (0 <= i < n and 0 <= j < n):
                raise ValidationError(f"edge ({i}, {j}) out of range for n={n}")
            clean.add((min(i, j), max(i, j)))
        return cls(n, tuple(sorted(clean)))

    @cached_property
    def degrees(self) -> np.ndarray:
        deg = np.zeros(self.n, dtype=int)
        for i, j in self.edges:
            deg[i] += 1
            deg[j] += 1
        return deg

    def adjacency(self) -> np.ndarray:
        a = np.zeros((self.n, self.n))
        for i, j in self.edges:
            a[i, j] = a[j, i] = 1.0
        return a

    def is_regular(self) -> bool:
        return bool(np.all(self.degrees == self.degrees[0]))

    def summary(self) -> dict:
        return {
            "n": self.n,
            "edges": len(self.edges),
            "d_max": int(self.degrees.max()),
            "d_min": int(self.degrees.min()),
        }


_HEADER = re.compile(r"^\s*n\s*=\s*(\d+)\s*$")


def load_edge_list(path) -> Graph:
    """Read an edge list: ``i j`` per line, ``#`` comments, optional first line ``n=<count>``."""
    declared = None
    pairs = []
    max_id = -1
    seen_data = False
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        m = _HEADER.match(line)
        if m and not seen_data:
            declared = int(m.group(1))
            seen_data = True
            continue
        seen_data = True
        parts = line.split()
        if len(parts) != 2:
            raise ValidationError(f"line {lineno}: expected 'i j', got {raw!r}")
        try:
            i, j = int(parts[0]), int(parts[1])
        except ValueError:
            raise ValidationError(f"line {lineno}: non-integer node id in {raw!r}") from None
        if i < 0 or j < 0:
            raise ValidationError(f"line {lineno}: negative node id")
        if i == j:
            raise ValidationError(f"line {lineno}: self-loop at node {i}")
        if declared is not None and max(i, j) >= declared:
            raise ValidationError(f"line {lineno}: node id {max(i, j)} >= declared n={declared}")
        pairs.append((i, j))
        max_id = max(max_id, i, j)
    n = declared if declared is not None else max_id + 1
    if n < 1:
        raise ValidationError(f"{path}: no nodes")
    return Graph.from_edges(n, pairs)


def write_edge_list(g: Graph, path) -> None:
    lines = [f"n={g.n}"] + [f"{i} {j}" for i, j in g.edges]
    Path(path).write_text("\n".join(lines) + "\n")


GRAPH_KINDS = ("complete", "path", "cycle", "star", "regular", "erdos_renyi", "sbm")


def generate(kind: str, n: int | None = None, seed: int = 0, *, k: int | None = None,
             p: float | None = None, sizes=None, p_in: float | None = None,
             p_out: float | None = None) -> Graph:
    """Build a graph from a named family; deterministic for a fixed ``seed``."""
    if kind == "sbm":
        if not sizes:
            raise ValidationError("sbm needs block sizes")
        sizes = [int(s) for s in sizes]
        if any(s < 1 for s in sizes):
            raise ValidationError("sbm block sizes must be positive")
        n = sum(sizes)
    if n is None or n < 1:
        raise ValidationError("n must be a positive integer")
    rng = np.random.default_rng(seed)
    iu = np.triu_indices(n, 1)

    if kind == "complete":
        edges = zip(*iu)
    elif kind == "path":
        edges = [(i, i + 1) for i in range(n - 1)]
    elif kind == "cycle":
        if n < 3:
            raise ValidationError("cycle needs n >= 3")
        edges = [(i, (i + 1) % n) for i in range(n)]
    elif kind == "star":
        edges = [(0, i) for i in range(1, n)]
    elif kind == "regular":
        if k is None or k < 0 or k >= n or (k * n) % 2:
            raise ValidationError(f"no simple {k}-regular graph on {n} nodes")
        edges = nx.random_regular_graph(k, n, seed=seed).edges()
    elif kind == "erdos_renyi":
        _check_prob(p, "p")
        keep = rng.random(iu[0].size) < p
        edges = zip(iu[0][keep], iu[1][keep])
    elif kind == "sbm":
        _check_prob(p_in, "p_in")
        _check_prob(p_out, "p_out")
        block = np.repeat(np.arange(len(sizes)), sizes)
        prob = np.where(block[iu[0]] == block[iu[1]], p_in, p_out)
        keep = rng.random(iu[0].size) < prob
        edges = zip(iu[0][keep], iu[1][keep])
    else:
        raise ValidationError(f"unknown graph kind {kind!r}; choose from {GRAPH_KINDS}")
    return Graph.from_edges(n, edges)


def _check_prob(p, name):
    if p is None or not 0.0 <= p <= 1.0:
        raise ValidationError(f"{name} must lie in [0, 1], got {p}")


class PropagationKind(str, enum.Enum):
    NORMALIZED_ADJACENCY = "normalized_adjacency"
    LAZY_RANDOM_WALK = "lazy_random_walk"
    RANDOM_WALK = "random_walk"


@dataclass(frozen=True, eq=False)
class Propagation:
    """Propagation matrix with the spectrum of its symmetric similar form.

    ``matrix = T S T^{-1}`` where ``S = V diag(lam) V^T`` is ``eig`` and ``T``
    is diagonal with entries ``similarity``; ``T = I`` for symmetric kinds.
    """

    kind: PropagationKind
    matrix: np.ndarray
    eig: EigDecomposition
    similarity: np.ndarray
    graph: Graph | None = field(default=None, repr=False)

    @property
    def n(self) -> int:
        return self.matrix.shape[0]

    @property
    def eigenvalues(self) -> np.ndarray:
        return self.eig.eigenvalues

    @cached_property
    def spectral_radius(self) -> float:
        return float(np.max(np.abs(self.eig.eigenvalues)))

    @cached_property
    def norm2(self) -> float:
        return spectral_norm(self.matrix)

    @property
    def symmetric(self) -> bool:
        return self.kind is PropagationKind.NORMALIZED_ADJACENCY

    def spectral_function(self, values) -> np.ndarray:
        """Matrix function ``T V diag(values) V^T T^{-1}`` on the cached eigenbasis."""
        s = self.eig.reconstruct(values)
        t = self.similarity
        return (t[:, None] * s) / t[None, :]

    def apply_power(self, x: np.ndarray, power: int) -> np.ndarray:
        """``L^power @ x`` by repeated products."""
        out = np.asarray(x, dtype=float)
        for _ in range(power):
            out = self.matrix @ out
        return out


def build_propagation(g: Graph, kind=PropagationKind.NORMALIZED_ADJACENCY) -> Propagation:
    kind = PropagationKind(kind)
    a = g.adjacency()
    deg = g.degrees.astype(float)
    if kind is PropagationKind.RANDOM_WALK:
        if np.any(deg == 0):
            raise ValidationError("random walk propagation needs every node to have degree >= 1")
        inv_sqrt = 1.0 / np.sqrt(deg)
        sym = inv_sqrt[:, None] * a * inv_sqrt[None, :]
        matrix = a / deg[:, None]
        similarity = inv_sqrt
    else:
        dt = deg + 1.0
        inv_sqrt = 1.0 / np.sqrt(dt)
        sym = inv_sqrt[:, None] * (np.eye(g.n) + a) * inv_sqrt[None, :]
        if kind is PropagationKind.NORMALIZED_ADJACENCY:
            matrix = sym
            similarity = np.ones(g.n)
        else:
            matrix = (np.eye(g.n) + a) / dt[:, None]
            similarity = inv_sqrt
    sym = 0.5 * (sym + sym.T)
    return Propagation(kind, matrix, sym_eig(sym), similarity, g)


def ones_lower_bound(g: Graph) -> float:
    """``(sum_i sqrt(1+D_i))^2 / sum_i (1+D_i)``: squared projection of 1 on the top eigenvector."""
    dt = g.degrees + 1.0
    return float(np.sum(np.sqrt(dt)) ** 2 / np.sum(dt))


def propagated_ones(p: Propagation, d: int) -> tuple[float, float]:
    """Return ``(||L^{d-1} 1||_2^2, lower bound)`` for depth ``d``.

    The lower bound is the squared top-eigenvector coefficient for the
    normalized adjacency and ``n`` for the row-stochastic kinds.
    """
    if d < 1:
        raise ValidationError("depth must be >= 1")
    v = p.apply_power(np.ones(p.n), d - 1)
    norm_sq = float(v @ v)
    if p.kind is PropagationKind.NORMALIZED_ADJACENCY:
        lower = ones_lower_bound(p.graph) if p.graph is not None else 0.0
    else:
        lower = float(p.n)
    return norm_sq, lower
