import math

import numpy as np
import pytest

from gcnpac.errors import ValidationError
from gcnpac.gcn import GcnModel, embedding_jacobian, forward, jacobians
from gcnpac.graphs import Propagation, PropagationKind, build_propagation, generate
from gcnpac.matrixkit import kron, spectral_norm, sym_eig
from gcnpac.sensitivity import (
    Design,
    FilterKind,
    FilterSpec,
    build_design,
    build_spatial_diagonal,
    build_spatial_exact,
    build_spatial_lowrank,
    build_spectral,
    check_dominance,
    gram_chain_margins,
    scaled,
    spectral_alpha,
    spectral_sensitivities,
    spectral_sensitivity,
)
from gcnpac.verify import filter_grid, random_instance


def _fake_prop(eigs):
    s = np.diag(np.asarray(eigs, dtype=float))
    return Propagation(PropagationKind.NORMALIZED_ADJACENCY, s, sym_eig(s), np.ones(len(eigs)))


def test_filter_values():
    lam = np.array([-0.5, 0.0, 0.5, 1.0])
    assert np.array_equal(FilterSpec()(lam), lam)
    assert np.allclose(FilterSpec(FilterKind.LOW_PASS_RATIONAL, 0.0)(lam), 1.0)
    assert FilterSpec(FilterKind.LOW_PASS_RATIONAL).xi == 1.0
    assert FilterSpec(FilterKind.HIGH_PASS_POLY).xi == 0.5
    assert FilterSpec(FilterKind.HIGH_PASS_RATIONAL, 1.0)(np.array([1.0])) == pytest.approx(1.0)
    with pytest.raises(ValidationError):
        FilterSpec(FilterKind.LOW_PASS_POLY, -1.0)


def test_exact_factorization_identities(relu_instances):
    for inst in relu_instances:
        s = build_spatial_exact(inst.model, inst.prop, inst.x)
        for l in range(1, inst.model.depth + 1):
            a, nmat, v = s.matrix(l), s.extras["N"][l - 1], s.extras["v"][l - 1]
            assert a.shape[1] == inst.model.weight(l).size
            assert np.allclose(a.T @ a, np.kron(nmat @ nmat.T, np.outer(v, v)), atol=1e-9)
            assert np.allclose(a @ a.T, (v @ v) * nmat.T @ nmat, atol=1e-9)


def test_exact_readout_layer():
    inst = random_instance(41)
    m, p, x = inst.model, inst.prop, inst.x
    d, n = m.depth, p.n
    s = build_spatial_exact(m, p, x)
    v = np.ones(n) @ np.linalg.matrix_power(p.matrix, d - 1) @ x
    for w in m.weights[:-1]:
        v = v @ w
    assert np.allclose(s.matrix(d), math.sqrt(d) / n * np.kron(np.eye(m.num_classes), v[None, :]))


def test_exact_zero_middle_layer():
    inst = random_instance(43, d_max=4)
    while inst.model.depth < 3:
        inst = random_instance(inst.model.depth * 7 + 44, d_max=4)
    ws = list(inst.model.weights)
    ws[1] = np.zeros_like(ws[1])
    m = GcnModel(tuple(ws), "relu")
    s = build_spatial_exact(m, inst.prop, inst.x)
    for l in range(1, m.depth + 1):
        if l != 2:
            assert np.all(s.matrix(l) == 0)


def test_exact_design_is_exact_for_linear_models():
    for t in range(6):
        inst = random_instance(50 + t, activation="identity")
        m = inst.model
        s = build_spatial_exact(m, inst.prop, inst.x)
        for l, j in enumerate(jacobians(m, inst.prop, inst.x), start=1):
            assert np.allclose(s.matrix(l) / math.sqrt(m.depth), j, atol=1e-12)


def test_diagonal_formula_example(k3):
    p = build_propagation(k3)
    m = GcnModel((np.ones((1, 1)), np.ones((1, 1))), "relu")
    s = build_spatial_diagonal(m, p, 1.0)
    assert s.scalars == pytest.approx((math.sqrt(2), math.sqrt(2)))
    assert s.is_scalar() and s.trace(1) == pytest.approx(2.0)


def test_diagonal_zero_layer():
    inst = random_instance(60)
    ws = list(inst.model.weights)
    ws[0] = np.zeros_like(ws[0])
    s = build_spatial_diagonal(GcnModel(tuple(ws)), inst.prop, 1.0)
    assert s.scalars[0] > 0
    assert all(v == 0 for v in s.scalars[1:])
    with pytest.raises(ValidationError):
        build_spatial_diagonal(inst.model, inst.prop, 0.0)


def test_diagonal_dominates_exact_and_lowrank(relu_instances):
    for inst in relu_instances:
        m, p, x = inst.model, inst.prop, inst.x
        exact = build_spatial_exact(m, p, x)
        low = build_spatial_lowrank(m, p, x)
        diag = build_spatial_diagonal(m, p, inst.bound)
        assert min(gram_chain_margins(exact, diag)) >= -1e-8
        assert min(gram_chain_margins(exact, low)) >= -1e-8
        assert min(gram_chain_margins(low, diag)) >= -1e-8


def test_lowrank_gram_identity(relu_instances):
    for inst in relu_instances:
        m = inst.model
        s = build_spatial_lowrank(m, inst.prop, inst.x)
        norms = [spectral_norm(w) for w in m.weights]
        d, n, k = m.depth, inst.prop.n, m.num_classes
        for l in range(1, d + 1):
            a = s.matrix(l)
            assert a.shape == (k, m.weight(l).size)
            if m.widths[l] < k:
                continue
            v = s.extras["v"][l - 1]
            want = d / n ** 2 * (v @ v) * math.prod(x * x for x in norms[l:])
            assert np.allclose(a @ a.T, want * np.eye(k), atol=1e-9)


def test_lowrank_single_class_has_one_row():
    inst = random_instance(70, k_max=1, h_max=3)
    s = build_spatial_lowrank(inst.model, inst.prop, inst.x)
    assert all(s.matrix(l).shape[0] == 1 for l in range(1, inst.model.depth + 1))


def test_spectral_identity_filter_structure():
    inst = random_instance(80)
    m, p, x = inst.model, inst.prop, inst.x
    s = build_spectral(m, p, x, FilterSpec())
    st = forward(m, p, x)
    for l in range(1, m.depth):
        want = s.alphas[l - 1] * kron(np.eye(m.widths[l]), p.matrix @ st.embeddings[l - 1])
        assert np.allclose(s.matrix(l), want, atol=1e-12)
    assert "readout" in s.notes[0]
    assert s.label == "spectral[identity]"


def test_spectral_rejects_inadmissible_filter():
    inst = random_instance(81)
    f = FilterSpec(FilterKind.LOW_PASS_RATIONAL, 0.0)
    assert f.admissibility_margin(np.array([2.0])) < 0
    n = inst.prop.n
    bad = _fake_prop(np.full(n, 2.0))
    with pytest.raises(ValidationError, match="violates"):
        build_spectral(inst.model, bad, inst.x, f)


@pytest.mark.parametrize("filt", filter_grid(), ids=lambda f: f.label)
def test_spectral_dominance_all_filters(filt, relu_instances):
    for inst in relu_instances:
        s = build_spectral(inst.model, inst.prop, inst.x, filt)
        assert s.extras["admissibility_margin"] >= -1e-12
        assert all(check_dominance(inst.model, inst.prop, inst.x, s))


def test_spectral_sensitivity_examples():
    p = build_propagation(generate("erdos_renyi", 8, seed=5, p=0.5))
    for d in (2, 3, 4):
        for l in range(1, d):
            assert spectral_sensitivity(p, FilterSpec(), l, d) == pytest.approx(1.0, abs=1e-12)
            for xi in (0.5, 1.0):
                g = spectral_sensitivity(p, FilterSpec(FilterKind.LOW_PASS_RATIONAL, xi), l, d)
                assert g <= (1 + 2 * xi) * p.spectral_radius ** (d - 1) + 1e-9
    two = _fake_prop([1.0, 0.5])
    assert spectral_sensitivity(two, FilterSpec(), 1, 3) == pytest.approx(1.0)
    with pytest.raises(ValidationError):
        spectral_sensitivity(two, FilterSpec(), 3, 3)
    assert len(spectral_sensitivities(two, FilterSpec(), 3)) == 3


def test_check_dominance_controls(relu_instances):
    broke = 0
    for inst in relu_instances:
        m, p, x = inst.model, inst.prop, inst.x
        assert all(check_dominance(m, p, x, build_spatial_diagonal(m, p, inst.bound)))
        s = scaled(build_spectral(m, p, x), 0.1)
        broke += not all(check_dominance(m, p, x, s))
    assert broke > 0


def test_exact_dominance_fails_under_relu():
    # the exact spatial design leaves out the ReLU masks, so it under-covers J_l
    fails = 0
    for t in range(30):
        inst = random_instance(t)
        s = build_spatial_exact(inst.model, inst.prop, inst.x)
        fails += not all(check_dominance(inst.model, inst.prop, inst.x, s))
    assert fails > 0


def test_alpha_bounds(relu_instances):
    for inst in relu_instances:
        m, p, x = inst.model, inst.prop, inst.x
        d, n = m.depth, p.n
        norms = [spectral_norm(w) for w in m.weights]
        st = forward(m, p, x)
        for l in range(1, d):
            a = spectral_alpha(m, p, l)
            assert a <= math.sqrt(d / n) * p.norm2 ** (d - l - 1) * math.prod(norms[l:]) + 1e-9
            g = embedding_jacobian(m, p, x, l, st)
            assert a >= math.sqrt(d) * spectral_norm(g) - 1e-9


def test_norm_estimate_sandwich(relu_instances):
    rng = np.random.default_rng(0)
    for inst in relu_instances:
        m, p = inst.model, inst.prop
        d = m.depth
        norms = [spectral_norm(w) for w in m.weights]
        hat = [b * (1 + rng.uniform(-1, 1) / d) for b in norms]
        exact = build_spatial_diagonal(m, p, 1.0)
        est = build_spatial_diagonal(m, p, 1.0, norms=hat)
        for a, b in zip(exact.scalars, est.scalars):
            assert a * a / math.e ** 2 - 1e-12 <= b * b <= math.e ** 2 * a * a + 1e-12


def test_build_design_dispatch():
    inst = random_instance(90)
    for design in Design:
        s = build_design(design, inst.model, inst.prop, inst.x, inst.bound)
        assert s.design is design
        assert s.columns == tuple(w.size for w in inst.model.weights)
