import math

import numpy as np
import pytest

from gcnpac.errors import ValidationError
from gcnpac.graphs import (
    GRAPH_KINDS,
    Graph,
    PropagationKind,
    build_propagation,
    generate,
    load_edge_list,
    ones_lower_bound,
    propagated_ones,
    write_edge_list,
)
from gcnpac.verify import graph_cases

NA = PropagationKind.NORMALIZED_ADJACENCY
LAZY = PropagationKind.LAZY_RANDOM_WALK
RW = PropagationKind.RANDOM_WALK


def _write(tmp_path, text, name="g.txt"):
    p = tmp_path / name
    p.write_text(text)
    return p


def test_load_path_graph(tmp_path):
    g = load_edge_list(_write(tmp_path, "0 1\n1 2"))
    assert g.n == 3
    assert g.degrees.tolist() == [1, 2, 1]


def test_load_rejects_self_loop_with_line_number(tmp_path):
    with pytest.raises(ValidationError, match="line 2"):
        load_edge_list(_write(tmp_path, "0 1\n1 1\n"))


def test_load_deduplicates(tmp_path):
    g = load_edge_list(_write(tmp_path, "0 1\n0 1\n1 0\n"))
    assert g.edges == ((0, 1),)
    assert g.degrees.tolist() == [1, 1]


def test_load_header_and_comments(tmp_path):
    g = load_edge_list(_write(tmp_path, "# a comment\nn=5\n0 1  # trailing\n"))
    assert g.n == 5
    assert g.degrees.tolist() == [1, 1, 0, 0, 0]


def test_load_id_beyond_declared_n(tmp_path):
    with pytest.raises(ValidationError, match="declared n=2"):
        load_edge_list(_write(tmp_path, "n=2\n0 2\n"))


def test_load_parse_error(tmp_path):
    with pytest.raises(ValidationError, match="line 1"):
        load_edge_list(_write(tmp_path, "0 x\n"))


def test_edge_list_roundtrip(tmp_path):
    g = generate("erdos_renyi", 9, seed=2, p=0.4)
    path = tmp_path / "rt.txt"
    write_edge_list(g, path)
    assert load_edge_list(path) == g


def test_graph_validation():
    with pytest.raises(ValidationError):
        Graph.from_edges(3, [(0, 3)])
    with pytest.raises(ValidationError):
        Graph(3, ((1, 0),))


def test_generate_examples():
    assert generate("complete", 3).degrees.tolist() == [2, 2, 2]
    assert generate("star", 4).degrees.tolist() == [3, 1, 1, 1]
    assert generate("erdos_renyi", 5, p=1.0) == generate("complete", 5)
    assert len(generate("cycle", 6).edges) == 6
    assert generate("path", 4).edges == ((0, 1), (1, 2), (2, 3))


def test_generate_regular_infeasible():
    with pytest.raises(ValidationError):
        generate("regular", 5, k=3)
    g = generate("regular", 6, seed=1, k=3)
    assert set(g.degrees.tolist()) == {3}


def test_generate_sbm_boundary_probabilities():
    g = generate("sbm", seed=7, sizes=[4, 4], p_in=1.0, p_out=0.0)
    assert len(g.edges) == 12
    assert all((i < 4) == (j < 4) for i, j in g.edges)


@pytest.mark.parametrize("kind", ["erdos_renyi", "sbm", "regular"])
def test_generate_deterministic(kind):
    kw = {"erdos_renyi": dict(p=0.3), "sbm": dict(sizes=[5, 6], p_in=0.6, p_out=0.1),
          "regular": dict(k=4)}[kind]
    n = None if kind == "sbm" else 11 if kind != "regular" else 10
    assert generate(kind, n, 42, **kw) == generate(kind, n, 42, **kw)


def test_generate_bad_inputs():
    with pytest.raises(ValidationError):
        generate("erdos_renyi", 5, p=1.5)
    with pytest.raises(ValidationError):
        generate("nope", 5)
    with pytest.raises(ValidationError):
        generate("cycle", 2)


def test_k3_normalized_adjacency():
    p = build_propagation(generate("complete", 3), NA)
    assert np.allclose(p.matrix, 1 / 3)
    assert np.allclose(p.eigenvalues, [1, 0, 0], atol=1e-10)


def test_p3_normalized_adjacency():
    p = build_propagation(generate("path", 3), NA)
    r6 = 1 / math.sqrt(6)
    want = np.array([[1 / 2, r6, 0], [r6, 1 / 3, r6], [0, r6, 1 / 2]])
    assert np.allclose(p.matrix, want, atol=1e-14)


@pytest.mark.parametrize("g", graph_cases(3, 14), ids=lambda g: f"n{g.n}e{len(g.edges)}")
def test_lazy_random_walk_row_sums(g):
    p = build_propagation(g, LAZY)
    assert np.allclose(p.matrix.sum(axis=1), 1.0, atol=1e-12, rtol=0)
    assert np.allclose(p.spectral_function(p.eigenvalues), p.matrix, atol=1e-12)


def test_random_walk_needs_degrees():
    with pytest.raises(ValidationError):
        build_propagation(Graph.from_edges(3, [(0, 1)]), RW)


def test_random_walk_spectrum_in_unit_interval():
    for g in graph_cases(5, 14):
        if g.degrees.min() == 0:
            continue
        p = build_propagation(g, RW)
        assert np.all(np.abs(p.eigenvalues) <= 1 + 1e-9)
        assert np.allclose(p.spectral_function(p.eigenvalues), p.matrix, atol=1e-10)


def test_propagated_ones_examples():
    lazy = build_propagation(generate("erdos_renyi", 8, seed=3, p=0.4), LAZY)
    for d in range(1, 6):
        assert propagated_ones(lazy, d)[0] == pytest.approx(8.0, abs=1e-12)
    k3 = build_propagation(generate("complete", 3), NA)
    assert propagated_ones(k3, 2)[0] == pytest.approx(3.0, abs=1e-12)
    p3 = build_propagation(generate("path", 3), NA)
    sq, low = propagated_ones(p3, 2)
    assert low == pytest.approx((2 * math.sqrt(2) + math.sqrt(3)) ** 2 / 7, abs=1e-12)
    assert low == pytest.approx(2.9711, abs=1e-4)
    assert low <= sq <= 3.0


def test_propagated_ones_depth_check():
    with pytest.raises(ValidationError):
        propagated_ones(build_propagation(generate("complete", 3)), 0)


@pytest.mark.parametrize("seed", range(6))
def test_lemma5_normalized_adjacency(seed):
    for g in graph_cases(seed, len(GRAPH_KINDS)):
        p = build_propagation(g, NA)
        assert p.spectral_radius == pytest.approx(1.0, abs=1e-9)
        assert p.norm2 == pytest.approx(1.0, abs=1e-9)
        assert p.eigenvalues.max() <= 1 + 1e-9 and p.eigenvalues.min() >= -1 - 1e-9
        low = ones_lower_bound(g)
        for d in range(1, 7):
            sq, _ = propagated_ones(p, d)
            assert low - 1e-9 <= sq <= g.n + 1e-9
            if g.is_regular():
                assert sq == pytest.approx(g.n, abs=1e-9)


@pytest.mark.parametrize("seed", range(4))
def test_lemma5_lazy_norm_sandwich(seed):
    for g in graph_cases(seed, len(GRAPH_KINDS)):
        p = build_propagation(g, LAZY)
        upper = math.sqrt((g.degrees.max() + 1) / (g.degrees.min() + 1))
        assert 1 - 1e-9 <= p.norm2 <= upper + 1e-9


def test_negative_spectrum_for_cycles():
    # eigenvalues of the normalized cycle are (1 + 2 cos theta)/3, reaching -1/3
    p = build_propagation(generate("cycle", 6), NA)
    assert p.eigenvalues.min() == pytest.approx(-1 / 3, abs=1e-12)
