import json
import math

import numpy as np
import pytest

from conftest import SEED_20240101_C3_2x2
from exactmil.cli import main
from exactmil.tensor import ProbTensor, save_label_set, save_tensor, LabelSet


@pytest.fixture
def files(tmp_path):
    def write(name, values, labels=None):
        tpath = tmp_path / f"{name}.json"
        save_tensor(ProbTensor(np.asarray(values, dtype=float)), tpath)
        if labels is None:
            return str(tpath)
        lpath = tmp_path / f"{name}_labels.json"
        save_label_set(LabelSet(labels), lpath)
        return str(tpath), str(lpath)
    return write


def _json_out(capsys):
    out = capsys.readouterr().out.strip().splitlines()
    assert len(out) == 1
    return json.loads(out[0])


def test_likelihood_fixture(files, capsys):
    t, l = files("p", np.array([0.5, 0.3, 0.2]).reshape(3, 1, 1), [1])
    assert main(["likelihood", t, l, "--format", "json"]) == 0
    doc = _json_out(capsys)
    assert doc["logprob"] == pytest.approx(math.log(0.5), rel=1e-15)
    assert doc["method"] == "exact-series" and doc["terms_evaluated"] == 2


def test_likelihood_zero_probability(files, capsys, tmp_path):
    t, _ = files("p", np.array([0.5, 0.3, 0.2]).reshape(3, 1, 1), [1])
    l = tmp_path / "l12.json"
    save_label_set(LabelSet([1, 2]), l)
    assert main(["likelihood", t, str(l), "--format", "json"]) == 2
    assert _json_out(capsys)["logprob"] == "-inf"
    assert main(["likelihood", t, str(l)]) == 2
    assert "-inf" in capsys.readouterr().out


def test_likelihood_methods_agree(files, capsys):
    t, l = files("r", SEED_20240101_C3_2x2, [1, 3])
    values = {}
    for method in ("exact", "beta", "brute"):
        assert main(["likelihood", t, l, "--method", method, "--format", "json"]) == 0
        values[method] = math.exp(_json_out(capsys)["logprob"])
    assert abs(values["exact"] - values["brute"]) <= 1e-9
    assert abs(values["exact"] - values["beta"]) <= 1e-9
    assert main(["likelihood", t, l, "--method", "bound", "--k", "0", "--format", "json"]) == 0
    assert math.exp(_json_out(capsys)["logprob"]) >= values["exact"] - 1e-12


def test_likelihood_guards_and_errors(files, tmp_path, capsys):
    t, l = files("r", SEED_20240101_C3_2x2, [1, 2, 3])
    assert main(["likelihood", t, l, "--max-order", "2"]) == 3
    assert main(["likelihood", t, l, "--method", "bound"]) == 1
    big = files("big", np.full((5, 6, 6), 0.2), [1])
    assert main(["likelihood", big[0], big[1], "--method", "brute"]) == 3
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    assert main(["likelihood", str(bad), l]) == 1
    unnormalized = tmp_path / "un.json"
    unnormalized.write_text(json.dumps({"kind": "prob", "shape": [2, 1, 1], "data": [0.5, 0.6]}))
    assert main(["likelihood", str(unnormalized), l]) == 1
    out_of_range = files("oor", np.array([0.5, 0.5]).reshape(2, 1, 1), [3])
    assert main(["likelihood", *out_of_range]) == 1
    capsys.readouterr()


def test_logit_input_is_softmaxed(tmp_path, capsys):
    t = tmp_path / "z.json"
    t.write_text(json.dumps({"kind": "logit", "shape": [2, 1, 1], "data": [0.0, 0.0]}))
    l = tmp_path / "l.json"
    save_label_set(LabelSet([1]), l)
    assert main(["likelihood", str(t), str(l), "--format", "json"]) == 0
    assert _json_out(capsys)["logprob"] == pytest.approx(math.log(0.5))


@pytest.mark.parametrize("suite,trials", [("oracle", 10), ("methods", 10), ("partition", 5),
                                          ("gradcheck", 5), ("bounds", 10)])
def test_verify_suites(suite, trials, capsys, tmp_path):
    log = tmp_path / "log.jsonl"
    assert main(["verify", "--suite", suite, "--trials", str(trials), "--format", "json",
                 "--log", str(log)]) == 0
    doc = _json_out(capsys)
    assert doc["passed"] and doc["failures"] == 0
    assert json.loads(log.read_text().splitlines()[-1]) == doc


def test_verify_failure_exit_code(capsys):
    assert main(["verify", "--suite", "gradcheck", "--trials", "3", "--tolerance", "1e-30"]) == 1
    capsys.readouterr()


def _map(tmp_path, columns, C=10):
    cells = np.array([columns, columns])
    path = tmp_path / "map.json"
    path.write_text(json.dumps({"shape": list(cells.shape), "num_classes": C,
                                "cells": cells.ravel().tolist()}))
    return str(path)


def test_transcribe_fixture(tmp_path, capsys):
    phi = 11
    path = _map(tmp_path, [1] * 5 + [phi, phi] + [5, 5] + [phi] + [2] * 5)
    assert main(["transcribe", path]) == 0
    assert capsys.readouterr().out.strip() == "152"


def test_transcribe_all_background(tmp_path, capsys):
    assert main(["transcribe", _map(tmp_path, [11] * 6), "--format", "json"]) == 0
    assert _json_out(capsys) == {"transcription": "", "labels": []}


def test_transcribe_tensor_input(files, capsys):
    values = np.zeros((3, 1, 4))
    values[:, 0, :] = [[0.9, 0.1, 0.1, 0.1], [0.05, 0.1, 0.1, 0.8], [0.05, 0.8, 0.8, 0.1]]
    path = files("t", values)
    assert main(["transcribe", path]) == 0
    assert capsys.readouterr().out.strip() == "12"


def test_transcribe_map_class_count(tmp_path, capsys):
    path = tmp_path / "m.json"
    path.write_text(json.dumps({"shape": [1, 2], "cells": [1, 3]}))
    # without num_classes the digit setting (C = 10) is assumed
    assert main(["transcribe", str(path)]) == 0
    assert capsys.readouterr().out.strip() == "13"
    assert main(["transcribe", str(path), "--num-classes", "2"]) == 0
    assert capsys.readouterr().out.strip() == "1"


@pytest.mark.slow
def test_train_twice_is_byte_identical(tmp_path, capsys):
    args = ["train", "--epochs", "2", "--seed", "7", "--train-size", "256", "--test-size", "50"]
    assert main(args + ["--out", str(tmp_path / "a")]) == 0
    assert main(args + ["--out", str(tmp_path / "b")]) == 0
    a = (tmp_path / "a" / "metrics.jsonl").read_bytes()
    assert a == (tmp_path / "b" / "metrics.jsonl").read_bytes()
    assert len(a.splitlines()) == 2
    capsys.readouterr()
    assert main(["eval", str(tmp_path / "a" / "checkpoint.json"), "--test-size", "50"]) == 0
    doc = _json_out(capsys)
    assert doc["test_size"] == 50 and 0.0 <= doc["alpha_error"] <= 1.0


def test_eval_bad_checkpoint(tmp_path, capsys):
    bad = tmp_path / "c.json"
    bad.write_text("{}")
    assert main(["eval", str(bad)]) == 1
    capsys.readouterr()
