"""Acceptance criteria, one test per criterion.

Each test records a PASS/FAIL line (shown in the terminal summary) before asserting.
"""

import time

import pytest

import conftest
from gcnpac import verify
from gcnpac.cli import main

pytestmark = pytest.mark.acceptance


def _timed(fn, *args, **kw):
    t0 = time.perf_counter()
    out = fn(*args, **kw)
    return out, time.perf_counter() - t0


def _record(num: int, title: str, checks, elapsed: float, limit: float | None, extra: str = ""):
    failed = [c.name for c in checks if not c.passed]
    slow = limit is not None and elapsed >= limit
    ok = not failed and not slow
    parts = [f"{len(checks)} checks", f"{elapsed:.1f}s" + (f" (< {limit:g}s)" if limit else "")]
    if failed:
        parts.append("failed: " + "; ".join(failed))
    if slow:
        parts.append("over time limit")
    if extra:
        parts.append(extra)
    line = f"{'PASS' if ok else 'FAIL'} criterion {num:>2} {title}: " + ", ".join(parts)
    conftest.ACCEPTANCE_LINES.append(line)
    print(line)
    assert not failed, line
    assert not slow, line


def test_criterion_01_matrix_lemmas():
    checks, dt = _timed(verify.lemma_suite, 0, 100)
    _record(1, "matrix lemmas", checks, dt, 10)


def test_criterion_02_propagation_spectra():
    # every check is asserted here, including the [0, 1] eigenvalue range
    checks, dt = _timed(verify.graph_suite, 0, 50)
    eig = next(c for c in checks if "[0, 1]" in c.name)
    _record(2, "propagation spectra", checks, dt, 20, extra=f"largest excursion outside [0, 1] {eig.worst:.3g}")


def test_criterion_03_jacobian():
    checks, dt = _timed(verify.jacobian_suite, 0, 50)
    _record(3, "Jacobian vs finite differences", checks, dt, 30, extra=f"max rel err {checks[0].worst:.2e}")


def test_criterion_04_dominance_chain():
    # includes the exact spatial design under ReLU
    checks, dt = _timed(verify.dominance_suite, 0, 30)
    worst = min(c.worst for c in checks)
    _record(4, "dominance chain", checks, dt, 60, extra=f"min margin {worst:.3g}")


def test_criterion_05_perturbation_condition():
    (checks, _), dt = _timed(verify.perturbation_condition_suite, 0, 30, 10000)
    probs = ", ".join(f"{c.name.rsplit(', ', 1)[1]}={c.worst:.4f}" for c in checks)
    _record(5, "perturbation condition", checks, dt, 60, extra=f"min probability {probs}")


def test_criterion_06_perturbation_bounds():
    (checks, _), dt = _timed(verify.perturbation_bound_suite, 0, 10, 1000, 1e-3, 0.05, True)
    gated = [c for c in checks if c.gating]
    decays = all(c.details["decays"] for c in gated)
    info = ", ".join(f"{c.name.rsplit(', ', 1)[-1]} ratio {c.worst:.3g}" for c in checks if not c.gating)
    extra = f"max ratio {max(c.worst for c in gated):.4f}, decay ok={decays}; not certified: {info}"
    _record(6, "perturbation bounds", gated, dt, 60, extra=extra)
    assert decays


def test_criterion_07_bound_ordering():
    checks, dt = _timed(verify.ordering_suite, 0, 20)
    _record(7, "low-rank vs baseline ordering", checks, dt, 10)


def test_criterion_08_spectral_reductions():
    checks, dt = _timed(verify.spectral_suite, 0, 20)
    _record(8, "spectral reductions", checks, dt, 10)


def test_criterion_09_kl_soundness():
    checks, dt = _timed(verify.kl_suite, 0, 30)
    _record(9, "KL soundness", checks, dt, 20)


def test_criterion_10_determinism(tmp_path, capsys):
    paths = [tmp_path / "a.json", tmp_path / "b.json"]
    t0 = time.perf_counter()
    codes = [main(["verify", "--seed", "0", "--out", str(p)]) for p in paths]
    dt = time.perf_counter() - t0
    capsys.readouterr()
    same = paths[0].read_bytes() == paths[1].read_bytes()
    check = verify.CheckResult("byte-identical verify JSON", same, 2, 0.0, 0.0)
    _record(10, "determinism", [check], dt, None, extra=f"exit codes {codes}")
