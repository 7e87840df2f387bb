import json

import pytest

import mbti_bench as mb


def test_version():
    assert mb.version() == "0.3.0"


def test_labels_and_preprocess():
    assert mb.encode_labels("INTJ") == [1, 0, 0, 1]
    assert mb.encode_labels("esfp") == [0, 1, 1, 0]
    with pytest.raises(ValueError):
        mb.encode_labels("XXXX")
    assert mb.preprocess("Hello, World!  hello", ["world"]) == ["hello", "hello"]


def test_metrics_fixture():
    truth = [1, 1, 0, 0, 0, 0, 1, 1, 1, 1]
    pred = [1, 1, 0, 0, 0, 1, 0, 0, 0, 0]
    m = mb.compute_metrics(truth, pred)
    assert m["accuracy"] == 0.5
    assert m["per_class"][1]["precision"] == pytest.approx(2 / 3)
    assert m["per_class"][1]["recall"] == pytest.approx(1 / 3)
    assert m["per_class"][1]["f1"] == pytest.approx(4 / 9)
    with pytest.raises(ValueError):
        mb.compute_metrics([0, 1], [0])


def test_mcnemar():
    r = mb.mcnemar(40, 10)
    assert r["statistic"] == pytest.approx(16.82)
    assert r["p_value"] < 0.001
    assert mb.mcnemar(8, 1)["p_value"] == pytest.approx(0.0391, abs=5e-5)
    assert mb.mcnemar_test([0, 1, 1], [0, 1, 1], [1, 1, 0])["p_value"] == 1.0


def test_class_distribution_and_cli(tmp_path):
    lines = [
        json.dumps({"id": f"d{i}", "lang": "en", "text": "some text here", "mbti": "INTJ" if i % 4 else "ESFP"})
        for i in range(40)
    ]
    corpus = "\n".join(lines) + "\n"
    counts = mb.class_distribution(corpus)
    assert counts["E"] == 10 and counts["I"] == 30

    path = tmp_path / "c.jsonl"
    path.write_text(corpus)
    code, out, _ = mb.run(["stats", "--input", str(path), "--quiet"])
    assert code == 0
    assert "E 10  I 30" in out
    code, _, err = mb.run(["stats", "--input", str(tmp_path / "missing.jsonl")])
    assert code == 2
    assert err.startswith("error: ")
