import csv
import json

import pytest

from weightsym.cli import main


@pytest.fixture(scope="module")
def zoo_file(tmp_path_factory):
    out = tmp_path_factory.mktemp("zoos") / "zoo.json"
    assert main(["zoo", "gen", "--n", "20", "--task", "2d-two-class",
                 "--seed", "7", "--out", str(out)]) == 0
    return out


def test_zoo_gen_outputs(zoo_file):
    doc = json.loads(zoo_file.read_text())
    assert doc["version"] == "weightsym/1"
    assert len(doc["entries"]) == 20
    manifest = json.loads((zoo_file.parent / "zoo.json.manifest.json")
                          .read_text())
    assert str(zoo_file) in manifest["outputs"]
    assert "config_hash" in manifest and "end" in manifest


def test_zoo_augment(tmp_path, zoo_file):
    out = tmp_path / "aug.json"
    assert main(["zoo", "augment", "--zoo", str(zoo_file), "--factor", "2",
                 "--scale-exp", "2", "--seed", "1", "--out", str(out)]) == 0
    doc = json.loads(out.read_text())
    assert len(doc["entries"]) == 40


def test_missing_out_is_usage_error():
    assert main(["zoo", "gen", "--n", "5"]) == 2


def test_unknown_subcommand_is_usage_error():
    assert main(["frobnicate"]) == 2


def test_train_eval_report_cycle(tmp_path, zoo_file):
    ck = tmp_path / "model.json"
    code = main(["train", "--zoo", str(zoo_file), "--seed", "0",
                 "--quasi", "on", "--epochs", "2", "--out", str(ck)])
    assert code == 0
    metrics = ck.parent / "model.json.metrics.csv"
    with open(metrics) as fh:
        rows = list(csv.DictReader(fh))
    assert any(r.get("split") == "test" for r in rows)

    ev = tmp_path / "eval.csv"
    assert main(["eval", "--checkpoint", str(ck), "--zoo", str(zoo_file),
                 "--split", "test", "--out", str(ev)]) == 0
    assert main(["eval", "--checkpoint", str(ck), "--zoo", str(zoo_file),
                 "--split", "test", "--threshold", "0.2",
                 "--out", str(tmp_path / "eval2.csv")]) == 0

    rep = tmp_path / "report.csv"
    assert main(["report", str(metrics), "--out", str(rep)]) == 0
    lines = rep.read_text().splitlines()
    assert lines[0] == "source,test_tau"
    assert any(line.startswith("mean,") for line in lines)


def test_train_deterministic_metrics(tmp_path, zoo_file):
    outs = []
    for name in ("a.json", "b.json"):
        ck = tmp_path / name
        assert main(["train", "--zoo", str(zoo_file), "--seed", "3",
                     "--quasi", "off", "--epochs", "2",
                     "--out", str(ck)]) == 0
        outs.append((ck.parent / (name + ".metrics.csv")).read_text())
    assert outs[0] == outs[1]


def test_verify_command(tmp_path):
    out = tmp_path / "verify.csv"
    assert main(["verify", "--samples", "2", "--out", str(out)]) == 0
    with open(out) as fh:
        rows = list(csv.DictReader(fh))
    assert all(r["passed"] == "True" for r in rows)


def test_report_empty_input_is_usage_error(tmp_path):
    assert main(["report", "--out", str(tmp_path / "r.csv")]) == 2
