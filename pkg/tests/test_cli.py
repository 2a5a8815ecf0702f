import copy
import io
import json
from pathlib import Path

import pytest

from affine_recovery.cli import main

EXAMPLES = Path(__file__).resolve().parent.parent / "docs" / "examples"

CONSTANT = {
    "setting": "rkhs",
    "N": 1,
    "new_point": 0.8,
    "old_points": [0.3],
    "model_sets": [{"basis": [{"anchors": [0.0], "weights": [1.0]}], "epsilon": 0.0}],
    "kernel": {"name": "min"},
}


def run(*argv):
    out, err = io.StringIO(), io.StringIO()
    code = main([str(a) for a in argv], stdout=out, stderr=err)
    return code, out.getvalue(), err.getvalue()


def write(path, doc):
    path.write_text(json.dumps(doc))
    return path


def test_recover_constant_instance(tmp_path):
    code, out, _ = run("recover", "--input", write(tmp_path / "p.json", CONSTANT))
    assert code == 0
    doc = json.loads(out)
    assert abs(doc["values"][0]) <= 1e-7
    assert doc["coeffs"][0][0][0] == pytest.approx(1.0, abs=1e-6)


def test_certify_sum_to_one(tmp_path):
    target = tmp_path / "cert.json"
    code, _, _ = run("certify", "--input", EXAMPLES / "cosine_sum_to_one.json", "--level", 8, "--grid", 101,
                     "--output", target)
    assert code == 0
    doc = json.loads(target.read_text())
    assert doc["lb"] <= doc["ub"] + 1e-6
    assert doc["r"] == 8 and doc["s"] == 101


def test_malformed_document_leaves_no_output(tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    target = tmp_path / "out.json"
    code, out, err = run("recover", "--input", bad, "--output", target)
    assert code == 2
    assert out == "" and not target.exists()
    assert json.loads(err)["status"] == 2
    code, _, _ = run("recover", "--input", write(tmp_path / "p.json", {"setting": "rkhs"}))
    assert code == 2


def test_invalid_problem_status(tmp_path):
    doc = copy.deepcopy(CONSTANT)
    doc["old_points"] = [0.3, 0.3]
    code, out, err = run("recover", "--input", write(tmp_path / "p.json", doc))
    assert code == 3 and out == ""
    assert "duplicate old points" in err
    doc = copy.deepcopy(CONSTANT)
    doc["N"] = 2
    code, _, err = run("recover", "--input", write(tmp_path / "p.json", doc))
    assert code == 3 and "dimension mismatch" in err


def test_certify_refuses_rkhs(tmp_path):
    code, _, _ = run("certify", "--input", EXAMPLES / "kernel_sum_to_one.json")
    assert code == 3


def test_bad_arguments_are_usage_errors(tmp_path):
    code, _, _ = run("certify", "--input", EXAMPLES / "cosine_sum_to_one.json", "--grid", 2)
    assert code == 2


def test_output_is_reproducible_and_input_untouched(tmp_path):
    src = EXAMPLES / "kernel_sum_to_one.json"
    before = src.read_text()
    a, b = tmp_path / "a.json", tmp_path / "b.json"
    assert run("recover", "--input", src, "--output", a)[0] == 0
    assert run("recover", "--input", src, "--output", b)[0] == 0
    assert a.read_text() == b.read_text()
    assert src.read_text() == before
    assert sorted(p.name for p in tmp_path.iterdir()) == ["a.json", "b.json"]


def test_predict_with_sweep(tmp_path):
    obs = write(tmp_path / "y.json", {"y": [[0.3, 0.7], [0.4, 0.6]]})
    plot = tmp_path / "plot.csv"
    code, out, _ = run("predict", "--input", EXAMPLES / "kernel_sum_to_one.json", "--observations", obs,
                       "--plot-csv", plot, "--sweep", 5)
    assert code == 0
    doc = json.loads(out)
    assert len(doc["prediction"]) == 2
    lines = plot.read_text().splitlines()
    assert lines[0] == "theta,pred_1,pred_2"
    assert len(lines) == 6


def test_predict_rejects_wrong_observation_shape(tmp_path):
    obs = write(tmp_path / "y.json", [[0.3, 0.7]])
    code, _, _ = run("predict", "--input", EXAMPLES / "kernel_sum_to_one.json", "--observations", obs)
    assert code == 3


def test_oracle_report(tmp_path):
    samples = tmp_path / "samples.csv"
    code, out, _ = run("oracle", "--input", EXAMPLES / "kernel_sum_to_one.json", "--samples", 500, "--seed", 2,
                       "--samples-csv", samples)
    assert code == 0
    doc = json.loads(out)
    assert doc["samples"] == 500 and doc["within_bound"]
    assert len(samples.read_text().splitlines()) == 501
