import csv
import hashlib
import json

import numpy as np
import pytest
import yaml

from haelt.cli import main
from haelt.data import load_csv
from haelt.model.network import VARIANT_LABELS, VARIANTS

TINY_MODEL = {"resnet_filters": [4, 56], "lstm_units": [8, 4], "embed_dim": 8, "num_heads": 2,
              "ff_dim": 8, "encoder_layers": 1, "head_units": 4, "fusion_units": [8, 4]}


def write_config(path, out, **extra):
    cfg = {"seed": 3, "out": str(out),
           "data": {"synthetic": {"n_rows": 360, "volume_signal": 1.0}},
           "model": TINY_MODEL, "train": {"max_epochs": 2}, "importance": {"repeats": 2}}
    for key, value in extra.items():
        cfg.setdefault(key, {}).update(value) if isinstance(value, dict) else cfg.__setitem__(key, value)
    path.write_text(yaml.safe_dump(cfg))
    return path


def read_csv(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


@pytest.fixture(scope="module")
def run(tmp_path_factory):
    root = tmp_path_factory.mktemp("cli")
    cfg = write_config(root / "cfg.yaml", root / "run")
    assert main(["train", "--config", str(cfg)]) == 0
    return root, cfg, root / "run"


def test_synth_is_deterministic_and_valid(tmp_path):
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    assert main(["synth", "--seed", "9", "--out", str(a)]) == 0
    assert main(["synth", "--seed", "9", "--out", str(b)]) == 0
    assert hashlib.sha256(a.read_bytes()).digest() == hashlib.sha256(b.read_bytes()).digest()
    series = load_csv(a)
    assert len(series) == 2438
    assert np.all(series.high >= np.maximum(series.open, series.close))
    assert np.all(series.low <= np.minimum(series.open, series.close))


def test_synth_invalid_spec_is_usage_error(tmp_path):
    cfg = write_config(tmp_path / "c.yaml", tmp_path, data={"synthetic": {"n_rows": 10}})
    assert main(["synth", "--config", str(cfg), "--out", str(tmp_path / "x.csv")]) == 1


def test_prepare_writes_manifest(tmp_path):
    cfg = write_config(tmp_path / "c.yaml", tmp_path / "prep")
    assert main(["prepare", "--config", str(cfg)]) == 0
    manifest = json.loads((tmp_path / "prep" / "dataset_manifest.json").read_text())
    assert sum(manifest["split_sizes"]) == manifest["windows"]


def test_train_artifacts(run):
    _, _, out = run
    for name in ("config.yaml", "train_log.jsonl", "checkpoint.json", "metrics_val.json",
                 "metrics_test.json", "ensemble_weights.csv", "predictions_test.csv",
                 "manifest.json"):
        assert (out / name).exists(), name
    metrics = json.loads((out / "metrics_test.json").read_text())
    assert 0 <= metrics["accuracy"] <= 1
    weights = read_csv(out / "ensemble_weights.csv")
    for row in weights:
        assert abs(sum(float(row[f"w_{m}"]) for m in ("lstm", "transformer", "fused")) - 1) < 1e-12
    preds = read_csv(out / "predictions_test.csv")
    assert len(preds) == len(weights) == metrics["n"]


def test_same_config_same_bytes(run, tmp_path):
    root, cfg, out = run
    assert main(["train", "--config", str(cfg), "--out", str(tmp_path / "again")]) == 0
    for name in ("metrics_test.json", "train_log.jsonl", "predictions_test.csv"):
        assert (out / name).read_bytes() == (tmp_path / "again" / name).read_bytes()


def test_importance_and_report(run):
    _, _, out = run
    before = (out / "predictions_test.csv").read_bytes()
    assert main(["importance", str(out), "--repeats", "1"]) == 0
    imp = read_csv(out / "importance.csv")
    assert len(imp) == 52
    values = [float(r["importance"]) for r in imp]
    assert values == sorted(values, reverse=True)

    assert main(["report", str(out)]) == 0
    rep = out / "report"
    top = read_csv(rep / "importance_top15.csv")
    assert len(top) <= 15
    roc = read_csv(rep / "roc_final.csv")
    assert (float(roc[0]["fpr"]), float(roc[0]["tpr"])) == (0.0, 0.0)
    assert (float(roc[-1]["fpr"]), float(roc[-1]["tpr"])) == (1.0, 1.0)
    cm = json.loads((rep / "confusion.json").read_text())
    n = json.loads((out / "metrics_test.json").read_text())["n"]
    assert cm["tp"] + cm["tn"] + cm["fp"] + cm["fn"] == n == cm["total"]
    first = {p.name: p.read_bytes() for p in rep.iterdir()}
    assert main(["report", str(out)]) == 0
    assert {p.name: p.read_bytes() for p in rep.iterdir()} == first
    assert (out / "predictions_test.csv").read_bytes() == before


def test_report_lists_missing_artifacts(tmp_path, capsys):
    assert main(["report", str(tmp_path)]) == 2
    err = capsys.readouterr().err
    assert "predictions_test.csv" in err and "importance.csv" in err


def test_baselines(tmp_path):
    cfg = write_config(tmp_path / "c.yaml", tmp_path / "b")
    assert main(["baselines", "--config", str(cfg)]) == 0
    fitted = json.loads((tmp_path / "b" / "baselines.json").read_text())
    assert set(fitted) >= {"logistic", "arima", "garch"}
    reports = json.loads((tmp_path / "b" / "metrics_baselines.json").read_text())
    # the planted volume cue is linearly visible to the logistic model
    assert reports["logistic"]["accuracy"] > 0.9


def test_variant_flag_builds_only_named_parts(tmp_path):
    cfg = write_config(tmp_path / "c.yaml", tmp_path / "t", train={"max_epochs": 1})
    assert main(["train", "--config", str(cfg), "--variant", "transformer_only"]) == 0
    ckpt = json.loads((tmp_path / "t" / "checkpoint.json").read_text())
    names = list(ckpt["parameters"])
    assert all(n.startswith(("transformer.", "transformer_head.")) for n in names)


def test_ablate_table(tmp_path):
    cfg = write_config(tmp_path / "c.yaml", tmp_path / "abl", train={"max_epochs": 1})
    assert main(["ablate", "--config", str(cfg)]) == 0
    rows = read_csv(tmp_path / "abl" / "ablation.csv")
    assert [r["variant"] for r in rows] == list(VARIANTS)
    assert [r["name"] for r in rows] == [VARIANT_LABELS[v] for v in VARIANTS]
    counts = {r["variant"]: int(r["n_parameters"]) for r in rows}
    assert min(counts.values()) > 0 and max(counts, key=counts.get) == "full"
    for r in rows:
        assert r["status"] == "ok"
        for m in ("accuracy", "precision", "recall", "f1"):
            assert 0 <= float(r[m]) <= 1


class TestExitCodes:
    def test_usage(self):
        with pytest.raises(SystemExit) as exc:
            main(["nonsense"])
        assert exc.value.code == 1

    def test_bad_config_value(self, tmp_path):
        cfg = write_config(tmp_path / "c.yaml", tmp_path, train={"lr": -1.0})
        assert main(["train", "--config", str(cfg)]) == 1

    def test_missing_data_file(self, tmp_path):
        cfg = write_config(tmp_path / "c.yaml", tmp_path, data={"path": str(tmp_path / "no.csv")})
        assert main(["prepare", "--config", str(cfg)]) == 2

    def test_bad_repeats(self, run):
        assert main(["importance", str(run[2]), "--repeats", "0"]) == 1

    def test_missing_config_file(self, tmp_path):
        assert main(["train", "--config", str(tmp_path / "nope.yaml")]) == 1
