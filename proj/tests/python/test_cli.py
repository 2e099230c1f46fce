import csv
import json
import os
import subprocess

import pytest

CLI = os.environ.get("LIVLR_CLI")
pytestmark = pytest.mark.skipif(not CLI, reason="LIVLR_CLI not set")

TINY = {"preset": "tiny", "epochs": 2}
SPEC = {"n_samples": 8, "signal_source": "finegrained_visual", "noise_scale": 0.1, "n_classes": 4, "seed": 0}


def run(*args):
    return subprocess.run([CLI, *map(str, args)], capture_output=True, text=True)


def write(path, obj):
    path.write_text(json.dumps(obj))
    return path


def test_gen_train_eval(tmp_path):
    cfg = write(tmp_path / "cfg.json", TINY)
    spec = write(tmp_path / "spec.json", SPEC)
    data = tmp_path / "d.jsonl"
    assert run("gen-data", "--spec", spec, "--config", cfg, "--out", data).returncode == 0

    out = tmp_path / "run"
    assert run("train", "--config", cfg, "--data", data, "--out-dir", out).returncode == 0
    with open(out / "metrics.csv") as f:
        rows = list(csv.DictReader(f))
    assert list(rows[0]) == ["epoch", "train_loss", "train_acc", "wall_ms"]
    assert len(rows) == 2
    assert (out / "checkpoint.lvlr").read_bytes()[:4] == b"LVLR"

    ev = run("eval", "--checkpoint", out / "checkpoint.lvlr", "--data", data)
    assert ev.returncode == 0
    assert json.loads(ev.stdout)["samples"] == 8


def test_config_errors_exit_2(tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text('{"d":')
    assert run("param-count", "--config", bad).returncode == 2
    assert run("param-count", "--config", write(tmp_path / "h.json", {"preset": "tiny", "N_h": 3})).returncode == 2
    assert run("param-count").returncode == 2


def test_data_errors_exit_3(tmp_path):
    cfg = write(tmp_path / "cfg.json", TINY)
    garbage = tmp_path / "g.jsonl"
    garbage.write_text("not json\n")
    assert run("train", "--config", cfg, "--data", garbage, "--out-dir", tmp_path / "o").returncode == 3
    junk = tmp_path / "junk.lvlr"
    junk.write_bytes(b"NOPE")
    assert run("eval", "--checkpoint", junk, "--data", garbage).returncode == 3


def test_grad_check_failure_exits_4(tmp_path):
    cfg = write(tmp_path / "cfg.json", dict(TINY, ri_variant="RI_CONCAT"))
    assert run("grad-check", "--config", cfg, "--tolerance", 0).returncode == 4
    assert run("grad-check", "--config", cfg).returncode == 0


def test_param_count_json(tmp_path):
    res = run("param-count", "--config", write(tmp_path / "cfg.json", TINY))
    assert res.returncode == 0
    assert "total" in res.stdout
