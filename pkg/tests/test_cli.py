"""Command line: full pipeline runs, env overrides, and exit codes."""

from __future__ import annotations

import json
import os

import pytest

from liqlab.cli import main
from liqlab.sampler import write_buckets_csv
from liqlab.dataset import Label

NY = "America/New_York"


def run(*argv):
    return main(list(argv))


@pytest.fixture(scope="module")
def workspace(tmp_path_factory):
    """One full generate -> features -> train chain shared by the module."""
    root = tmp_path_factory.mktemp("cli")
    tape = root / "tape.csv"
    assert run("generate", "--out", str(tape), "--seed", "11",
               "--tickers", "SYN", "--days", "3",
               "--signal-strength", "0.8") == 0
    feat = root / "feat"
    assert run("features", "--input", str(tape), "--out", str(feat),
               "--timezone", NY) == 0
    train = root / "train"
    assert run("train", "--input", str(feat / "buckets.csv"),
               "--out", str(train), "--timezone", NY) == 0
    return root, tape, feat, train


def test_generate_artifacts(workspace):
    root, tape, _, _ = workspace
    assert tape.exists()
    manifest = json.loads((root / "tape.csv.manifest.json").read_text())
    assert manifest["format"] == "liqlab-manifest"
    assert manifest["command"] == "generate"
    assert manifest["config"]["synth"]["signal_strength"] == 0.8
    assert "tape.csv" in manifest["outputs"]
    first = tape.read_text().splitlines()[0]
    assert first.startswith("timestamp,ticker,kind,")


def test_features_artifacts(workspace):
    _, _, feat, _ = workspace
    buckets = (feat / "buckets.csv").read_text().splitlines()
    assert buckets[0].startswith("# liqlab_config_hash=")
    assert buckets[1].startswith("ticker,minute_start,first_trade_price")
    assert len(buckets) == 2 + 3 * 300  # every minute of three sessions
    features = (feat / "features.csv").read_text().splitlines()
    assert len(features) == len(buckets)
    manifest = json.loads((feat / "manifest_features.json").read_text())
    assert set(manifest["outputs"]) == {"buckets.csv", "features.csv"}


def test_train_artifacts(workspace):
    _, _, _, train = workspace
    names = sorted(os.listdir(train))
    assert names == ["dataset.csv", "manifest_train.json", "model_logistic.json",
                     "model_rf.json", "model_svm.json", "standardization.json"]
    std = json.loads((train / "standardization.json").read_text())
    assert len(std["mean"]) == 17
    model = json.loads((train / "model_rf.json").read_text())
    assert model["standardization_hash"] == std["hash"]
    assert model["run_config"]["split"] == [70, 15, 15]
    assert model["run_config"]["timezone"] == NY


def test_evaluate_end_to_end(workspace, tmp_path):
    _, _, feat, train = workspace
    out = tmp_path / "eval"
    assert run("evaluate", "--input", str(feat / "buckets.csv"),
               "--models", str(train), "--out", str(out)) == 0
    report = json.loads((out / "report.json").read_text())
    assert [m["model"] for m in report["models"]] == ["logistic", "rf", "svm"]
    for m in report["models"]:
        # planted signal at 0.8: far better than chance on the test slice
        assert m["all_features"]["accuracy"] > 0.8
        assert m["subset"] is None
    assert (out / "results_table.csv").exists()
    assert (out / "importance_rf.svg").exists()
    assert (out / "manifest_evaluate.json").exists()


def test_select_end_to_end(workspace, tmp_path):
    _, _, feat, _ = workspace
    out = tmp_path / "select"
    assert run("select", "--input", str(feat / "buckets.csv"),
               "--out", str(out), "--timezone", NY,
               "--model", "lr", "--select", "topk:3") == 0
    report = json.loads((out / "report.json").read_text())
    (entry,) = report["models"]
    assert entry["strategy"] == "topk:3"
    assert len(entry["subset"]["features"]) == 3
    assert entry["subset"]["accuracy"] > 0.8
    assert (out / "model_logistic.json").exists()
    assert (out / "model_logistic_subset.json").exists()
    sub = json.loads((out / "model_logistic_subset.json").read_text())
    assert sub["feature_names"] == entry["subset"]["features"]


def test_generate_is_deterministic(tmp_path, monkeypatch):
    monkeypatch.chdir(tmp_path)
    assert run("generate", "--out", "a.csv", "--seed", "5", "--days", "1") == 0
    assert run("generate", "--out", "b.csv", "--seed", "5", "--days", "1") == 0
    a = (tmp_path / "a.csv").read_bytes()
    assert a == (tmp_path / "b.csv").read_bytes()
    # same relative out path -> byte-identical manifest too
    assert run("generate", "--out", "c/x.csv", "--seed", "5", "--days", "1") == 0
    assert run("generate", "--out", "d/x.csv", "--seed", "5", "--days", "1") == 0
    ma = (tmp_path / "c/x.csv.manifest.json").read_bytes()
    mb = (tmp_path / "d/x.csv.manifest.json").read_bytes()
    assert (tmp_path / "c/x.csv").read_bytes() == a
    assert ma != mb  # the out path itself is part of the echoed config
    pa = json.loads(ma)
    pb = json.loads(mb)
    assert pa["outputs"]["x.csv"] == pb["outputs"]["x.csv"]


def test_jobs_do_not_change_feature_bytes(workspace, tmp_path, monkeypatch):
    # identical RunConfig means identical bytes, so use the same *relative*
    # paths from two different working directories and vary only --jobs
    # (which is deliberately excluded from the echoed config)
    _, tape, _, _ = workspace
    outputs = []
    for name, jobs in (("one", "1"), ("three", "3")):
        cwd = tmp_path / name
        cwd.mkdir()
        (cwd / "tape.csv").write_bytes(tape.read_bytes())
        monkeypatch.chdir(cwd)
        assert run("features", "--input", "tape.csv", "--out", "out",
                   "--timezone", NY, "--jobs", jobs) == 0
        outputs.append(cwd / "out")
    one, three = outputs
    for name in ("buckets.csv", "features.csv", "manifest_features.json"):
        assert (one / name).read_bytes() == (three / name).read_bytes()


def test_env_override_and_flag_precedence(tmp_path, monkeypatch):
    monkeypatch.chdir(tmp_path)
    assert run("generate", "--out", "flag0.csv") == 0          # seed default 0
    monkeypatch.setenv("LIQLAB_SEED", "5")
    assert run("generate", "--out", "env5.csv") == 0           # env seed 5
    assert run("generate", "--out", "flag7.csv", "--seed", "7") == 0  # flag wins
    monkeypatch.delenv("LIQLAB_SEED")
    assert run("generate", "--out", "plain5.csv", "--seed", "5") == 0
    assert run("generate", "--out", "plain7.csv", "--seed", "7") == 0

    env5 = (tmp_path / "env5.csv").read_bytes()
    assert env5 == (tmp_path / "plain5.csv").read_bytes()
    assert env5 != (tmp_path / "flag0.csv").read_bytes()
    assert (tmp_path / "flag7.csv").read_bytes() == \
        (tmp_path / "plain7.csv").read_bytes()


def test_env_timezone_override(workspace, tmp_path, monkeypatch):
    # LIQLAB_TIMEZONE satisfies the required --timezone flag; the data rows
    # come out identical to the flag-driven run
    _, tape, feat, _ = workspace
    monkeypatch.setenv("LIQLAB_TIMEZONE", NY)
    out = tmp_path / "envtz"
    assert run("features", "--input", str(tape), "--out", str(out)) == 0
    ours = (out / "buckets.csv").read_text().splitlines()
    theirs = (feat / "buckets.csv").read_text().splitlines()
    assert ours[1:] == theirs[1:]  # first line embeds the out path's hash


# ---------------------------------------------------------------------------
# exit codes
# ---------------------------------------------------------------------------

def test_exit_code_2_config(workspace, tmp_path):
    _, _, feat, _ = workspace
    assert run("train", "--input", str(feat / "buckets.csv"),
               "--out", str(tmp_path / "t"), "--timezone", NY,
               "--split", "70,15,16") == 2
    assert run("features", "--input", str(feat / "buckets.csv"),
               "--out", str(tmp_path / "f"), "--timezone", NY,
               "--session-start", "17:00") == 2  # window start past its end
    assert run("features", "--input", str(feat / "buckets.csv"),
               "--out", str(tmp_path / "f"), "--timezone", NY,
               "--session-start", "nonsense") == 2


def test_exit_code_3_input(tmp_path):
    assert run("features", "--input", str(tmp_path / "missing.csv"),
               "--out", str(tmp_path / "out"), "--timezone", NY) == 3
    bad = tmp_path / "bad.csv"
    bad.write_text("not,a,tape\n")
    assert run("features", "--input", str(bad),
               "--out", str(tmp_path / "out"), "--timezone", NY) == 3


def test_exit_code_4_data(tmp_path, workspace):
    # a bucket file too small to split
    _, _, feat, _ = workspace
    lines = (feat / "buckets.csv").read_text().splitlines()
    small = tmp_path / "small.csv"
    small.write_text("\n".join(lines[:2] + lines[2:12]) + "\n")
    assert run("train", "--input", str(small), "--out", str(tmp_path / "t"),
               "--timezone", NY) == 4


def test_exit_code_2_standardization_mismatch(workspace, tmp_path, monkeypatch):
    root, tape, feat, train = workspace
    monkeypatch.chdir(tmp_path)
    # different tape -> different dataset -> hash disagreement with the models
    assert run("generate", "--out", "other.csv", "--seed", "99",
               "--days", "3", "--signal-strength", "0.8") == 0
    assert run("features", "--input", "other.csv", "--out", "ofeat",
               "--timezone", NY) == 0
    assert run("evaluate", "--input", str(tmp_path / "ofeat" / "buckets.csv"),
               "--models", str(train), "--out", "oeval") == 2


def test_evaluate_rejects_missing_models(tmp_path, workspace):
    _, _, feat, _ = workspace
    empty = tmp_path / "empty"
    empty.mkdir()
    assert run("evaluate", "--input", str(feat / "buckets.csv"),
               "--models", str(empty), "--out", str(tmp_path / "e")) == 3
