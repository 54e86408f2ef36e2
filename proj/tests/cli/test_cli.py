import json
import os
import subprocess
from pathlib import Path

import pytest

CLI = os.environ.get("SLATE_FORGE_CLI", "slate_forge")


def run(*args, check=True):
    proc = subprocess.run([CLI, *map(str, args)], capture_output=True, text=True)
    if check and proc.returncode != 0:
        raise AssertionError(f"{args} exited {proc.returncode}: {proc.stderr}")
    return proc


@pytest.fixture(scope="module")
def pipeline(tmp_path_factory):
    root = tmp_path_factory.mktemp("pipeline")
    data = root / "data"
    run("--seed", 3, "gen-data", "--users", 300, "--actions", 150, "--density", 0.05, "--out", data)
    csv = data / "interactions.csv"
    run("--seed", 3, "embed", "--data", csv, "--dim", 8, "--out", root / "emb")
    sleb = root / "emb" / "embeddings.sleb"
    run("--seed", 3, "build-index", "--embeddings", sleb, "--out", root / "index")
    return {"root": root, "csv": csv, "sleb": sleb, "slmi": root / "index" / "index.slmi"}


def train(pipeline, out, *extra):
    return run("--seed", 1, "train", "--data", pipeline["csv"], "--embeddings", pipeline["sleb"],
               "--k", 3, "--iterations", 30, "--batch", 8, "--eval-intervals", 3, "--out", out, *extra)


def test_pipeline_outputs_and_manifest(pipeline):
    for key in ("csv", "sleb", "slmi"):
        assert pipeline[key].exists()
    header = pipeline["csv"].read_text().splitlines()[0]
    assert header == "user_id,item_id"
    manifest = json.loads((pipeline["root"] / "emb" / "manifest.json").read_text())
    assert "embed" in manifest["commands"]


def test_train_eval_roundtrip(pipeline):
    out = pipeline["root"] / "run"
    train(pipeline, out)
    log = (out / "train_log.csv").read_text().splitlines()
    assert log[0].startswith("interval,seconds,iteration")
    assert len(log) == 5
    last_val = float(log[-1].split(",")[4])
    proc = run("eval", "--params", out / "params.bin", "--k", 3)
    assert float(proc.stdout.strip().split()[-1]) == pytest.approx(last_val, rel=1e-12, abs=1e-15)


def test_rerun_is_byte_identical(pipeline):
    a, b = pipeline["root"] / "a", pipeline["root"] / "b"
    train(pipeline, a)
    train(pipeline, b)
    assert (a / "params.bin").read_bytes() == (b / "params.bin").read_bytes()
    train(pipeline, a)
    assert (a / "params.bin").read_bytes() == (b / "params.bin").read_bytes()
    assert (a / "manifest.json").read_bytes() == (b / "manifest.json").read_bytes()


def test_config_file_and_override(pipeline, tmp_path):
    cfg = tmp_path / "run.toml"
    cfg.write_text("# settings\nk = 3\nbatch = 8\niterations = 10\neval_intervals = 2\n")
    out = tmp_path / "cfg"
    run("--seed", 1, "train", "--config", cfg, "--data", pipeline["csv"], "--embeddings", pipeline["sleb"],
        "--k", 4, "--out", out)
    manifest = json.loads((out / "manifest.json").read_text())
    settings = manifest["commands"]["train"]["settings"]
    assert int(settings["k"]) == 4
    assert settings["budget"]["iterations"] == 10
    assert settings["batch"] == 8


def test_recall(pipeline):
    proc = run("--seed", 2, "recall", "--index", pipeline["slmi"], "--queries", 100, "--k", 10)
    token = next(t for t in proc.stdout.split() if t.startswith("recall@10="))
    assert float(token.split("=")[1]) >= 0.95


def test_exit_codes(pipeline, tmp_path):
    assert run("train", "--no-such-flag", check=False).returncode == 2
    assert run("embed", "--data", tmp_path / "missing.csv", "--out", tmp_path, check=False).returncode == 1
    bad = tmp_path / "bad.csv"
    bad.write_text("user_id,item_id\n0,x\n")
    proc = run("embed", "--data", bad, "--out", tmp_path, check=False)
    assert proc.returncode == 1
    assert "bad.csv" in proc.stderr
    proc = run("train", "--data", pipeline["csv"], "--embeddings", pipeline["sleb"], "--sigma", "abc",
               "--out", tmp_path, check=False)
    assert proc.returncode == 2
    assert run("--version").returncode == 0
