import csv
import io
import json

import pytest

from gcnpac.cli import EXIT_IO, EXIT_OK, EXIT_VALIDATION, EXIT_VERIFY, main
from gcnpac.graphs import load_edge_list
from gcnpac.reports import CSV_DIGITS, JSON_DIGITS, normalize, round_sig, to_csv, to_json

INSTANCE = ["--kind", "cycle", "--n", "6", "--widths", "3,3,2"]


def _run(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


def _bound_json(capsys, *argv):
    code, out, err = _run(capsys, "bound", *argv)
    assert code == EXIT_OK, err
    doc = json.loads(out)
    return {r["design"]: r for r in doc["reports"]}, doc


def test_gen_graph_complete(tmp_path, capsys):
    path = tmp_path / "k3.txt"
    code, _, err = _run(capsys, "gen-graph", "--kind", "complete", "--n", "3", "--out", str(path))
    assert code == EXIT_OK
    assert path.read_text().splitlines()[0] == "n=3"
    g = load_edge_list(path)
    assert len(g.edges) == 3
    assert "edges=3" in err


def test_gen_graph_odd_regular_is_validation_error(capsys):
    code, _, err = _run(capsys, "gen-graph", "--kind", "regular", "--k", "3", "--n", "5")
    assert code == EXIT_VALIDATION and err.startswith("error:")


def test_gen_graph_sbm_boundary_probabilities(tmp_path, capsys):
    path = tmp_path / "sbm.txt"
    code, _, _ = _run(capsys, "gen-graph", "--kind", "sbm", "--sizes", "4,4", "--p-in", "1",
                      "--p-out", "0", "--seed", "7", "--out", str(path))
    assert code == EXIT_OK
    g = load_edge_list(path)
    want = {(i, j) for b in (0, 4) for i in range(b, b + 4) for j in range(i + 1, b + 4)}
    assert set(map(tuple, g.edges)) == want


def test_gen_graph_requires_kind():
    with pytest.raises(SystemExit):
        main(["gen-graph", "--n", "3"])


def test_missing_graph_file_is_io_error(tmp_path, capsys):
    code, _, err = _run(capsys, "bound", "--graph", str(tmp_path / "nope.txt"), "--widths", "2,2")
    assert code == EXIT_IO and "error" in err


def test_missing_model_source(capsys):
    code, _, _ = _run(capsys, "bound", "--kind", "cycle", "--n", "5")
    assert code == EXIT_VALIDATION


def test_unknown_design(capsys):
    code, _, _ = _run(capsys, "bound", *INSTANCE, "--designs", "lowrank,bogus")
    assert code == EXIT_VALIDATION


def test_lowrank_complexity_below_baseline_on_lazy_walk(capsys):
    reps, doc = _bound_json(capsys, *INSTANCE, "--propagation", "lazy_random_walk",
                            "--designs", "lowrank,baseline")
    c = reps["lowrank"]["constants"]
    assert c["K"] <= c["h"] * __import__("math").log(c["d"] * c["h"])
    assert reps["lowrank"]["complexity_term"] <= reps["baseline"]["complexity_term"]
    assert [row["design"] for row in doc["comparison"]] == ["lowrank", "baseline"]


def test_larger_margin_gives_smaller_bounds(capsys):
    g1, _ = _bound_json(capsys, *INSTANCE, "--gamma", "1")
    g2, _ = _bound_json(capsys, *INSTANCE, "--gamma", "2")
    for design in g1:
        assert g2[design]["final_bound"] <= g1[design]["final_bound"]
        assert g2[design]["empirical_margin_loss"] >= g1[design]["empirical_margin_loss"]
        if design != "baseline":
            assert g2[design]["kl_upper"] < g1[design]["kl_upper"]


def test_spectral_identity_g_at_most_one(capsys):
    reps, _ = _bound_json(capsys, "--kind", "erdos_renyi", "--n", "8", "--p", "0.5",
                          "--widths", "3,3,3,2", "--designs", "spectral", "--filter", "identity")
    (rep,) = reps.values()
    gs = [layer["g"] for layer in rep["layers"]]
    assert len(gs) == 3 and max(gs) <= 1 + 1e-12


def test_bound_is_deterministic(capsys):
    a = _run(capsys, "bound", *INSTANCE, "--seed", "4")[1]
    b = _run(capsys, "bound", *INSTANCE, "--seed", "4")[1]
    assert a == b


def test_csv_matches_json(capsys):
    _, js, _ = _run(capsys, "bound", *INSTANCE, "--format", "json")
    _, cs, _ = _run(capsys, "bound", *INSTANCE, "--format", "csv")
    reps = {r["design"]: r for r in json.loads(js)["reports"]}
    rows = list(csv.DictReader(io.StringIO(cs)))
    assert [r["design"] for r in rows] == list(reps)
    for row in rows:
        for key, text in row.items():
            if key == "design" or text == "":
                continue
            assert float(text) == pytest.approx(round_sig(reps[row["design"]][key], CSV_DIGITS), rel=1e-12)


def test_negative_filter_parameter_is_validation_error(capsys):
    code, _, err = _run(capsys, "bound", *INSTANCE, "--designs", "spectral",
                        "--filter", "lowpass_rational", "--xi", "-3")
    assert code == EXIT_VALIDATION and "xi" in err


def test_per_design_failure_is_reported_not_fatal(capsys):
    # the exact design needs a kron product above the size guard here
    code, out, err = _run(capsys, "bound", "--kind", "cycle", "--n", "6", "--widths", "70,70,2",
                          "--designs", "exact,baseline", "--samples", "3")
    assert code == EXIT_OK
    reps = {r["design"]: r for r in json.loads(out)["reports"]}
    assert "exceeds" in reps["exact"]["error"]
    assert reps["baseline"]["final_bound"] > 0
    assert err.startswith("warning: exact")


def test_mc_check_runs(capsys, tmp_path):
    path = tmp_path / "mc.json"
    code, _, err = _run(capsys, "mc-check", *INSTANCE, "--trials", "200", "--out", str(path))
    doc = json.loads(path.read_text())
    assert len(doc["reports"]) == 3
    assert code in (EXIT_OK, EXIT_VERIFY)
    assert code == (EXIT_OK if all(r["pass"] for r in doc["reports"]) else EXIT_VERIFY)
    assert err.count("\n") == 3


def test_verify_break_dominance_fails(capsys):
    code, _, err = _run(capsys, "verify", "--trials", "100", "--bound-trials", "100", "--break-dominance")
    assert code == EXIT_VERIFY
    assert "FAIL" in err


@pytest.mark.parametrize("x", [0.0, 1.0, -2.5, 1 / 3, 6.02214076e23, 1e-300])
def test_round_sig_round_trip(x):
    for digits in (CSV_DIGITS, JSON_DIGITS):
        r = round_sig(x, digits)
        assert round_sig(r, digits) == r
        assert r == pytest.approx(x, rel=10.0 ** (1 - digits), abs=0)


def test_non_finite_values_serialize():
    doc = json.loads(to_json({"a": float("inf"), "b": float("nan"), "c": [1, 2.5]}))
    assert doc == {"a": "inf", "b": "nan", "c": [1, 2.5]}
    assert normalize(True) is True
    text = to_csv([{"x": 0.1234567891, "y": None}], ("x", "y"))
    assert text.splitlines() == ["x,y", "0.123457,"]
