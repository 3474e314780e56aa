import json
import subprocess
import sys
import time
from pathlib import Path

import numpy as np
import pytest

from ordgrade.cli import main
from ordgrade.dataset import GradedSample, featurize_many, load_dataset, scores_of, write_dataset
from ordgrade.losses import LossKind, LossSpec
from ordgrade.scorer import HeadKind, ScorerModel, TrainConfig, save_checkpoint

CONFIGS = Path(__file__).resolve().parent.parent / "configs"


def run(*argv):
    return main([str(a) for a in argv])


def files(directory, skip=("manifest.json",)):
    return {p.name: p.read_bytes() for p in sorted(Path(directory).iterdir()) if p.name not in skip}


@pytest.fixture(scope="module")
def bundled(tmp_path_factory):
    """The bundled synthetic benchmark (seed 0, 10000 samples, 1000 pairs)."""
    out = tmp_path_factory.mktemp("syn")
    assert run("gen-synthetic", "--out", out) == 0
    return out


@pytest.fixture(scope="module")
def small(tmp_path_factory):
    out = tmp_path_factory.mktemp("small")
    assert run("gen-synthetic", "--n", 800, "--pairs", 200, "--seed", 4, "--out", out) == 0
    return out


@pytest.fixture(scope="module")
def small_model(small, tmp_path_factory):
    out = tmp_path_factory.mktemp("model")
    assert run("train", "--data", small / "samples.jsonl", "--config", CONFIGS / "desk.toml", "--out", out) == 0
    return out


class TestAugment:
    def test_deterministic(self, small, tmp_path):
        for name in ("a", "b"):
            assert run("augment", "--input", small / "samples.jsonl", "--seed", 3, "--out", tmp_path / name) == 0
        assert files(tmp_path / "a") == files(tmp_path / "b")
        assert (tmp_path / "a" / "manifest.json").exists()

    def test_zero_probs_identity(self, small, tmp_path):
        assert run("augment", "--input", small / "samples.jsonl", "--drop-rubric", 0, "--drop-reference", 0,
                   "--out", tmp_path) == 0
        assert (tmp_path / "augmented.jsonl").read_bytes() == (small / "samples.jsonl").read_bytes()

    def test_malformed_vs_io(self, tmp_path, capsys):
        bad = tmp_path / "bad.jsonl"
        bad.write_text('{"instruction": "q", "response": "r", "score": 3}\n{"instruction": "q", "response": "r", "score": 9}\n')
        data_code = run("augment", "--input", bad, "--out", tmp_path / "o1")
        assert "line 2" in capsys.readouterr().err
        io_code = run("augment", "--input", tmp_path / "missing.jsonl", "--out", tmp_path / "o2")
        assert (data_code, io_code) == (3, 4)


class TestTrain:
    def test_epochs_zero_rejected(self, small, tmp_path):
        assert run("train", "--data", small / "samples.jsonl", "--epochs", 0, "--out", tmp_path) == 2

    def test_unknown_config_key(self, small, tmp_path):
        cfg = tmp_path / "c.json"
        cfg.write_text('{"train": {"learnign_rate": 1}}')
        assert run("train", "--data", small / "samples.jsonl", "--config", cfg, "--out", tmp_path) == 2

    def test_outputs(self, small_model):
        names = set(files(small_model, skip=()))
        assert {"checkpoint.json", "train_steps.csv", "train_epochs.csv", "metrics.json", "metrics.txt", "manifest.json"} <= names
        metrics = json.loads((small_model / "metrics.json").read_text())
        assert metrics["split"] == "validation" and metrics["n"] == 40

    def test_rerun_identical_checkpoint(self, small, small_model, tmp_path):
        assert run("train", "--data", small / "samples.jsonl", "--config", CONFIGS / "desk.toml", "--out", tmp_path) == 0
        assert (tmp_path / "checkpoint.json").read_bytes() == (small_model / "checkpoint.json").read_bytes()

    @pytest.mark.slow
    @pytest.mark.parametrize("config", [None, "desk.toml"])
    def test_bundled_under_budget(self, bundled, tmp_path, config):
        extra = [] if config is None else ["--config", CONFIGS / config]
        start = time.perf_counter()
        assert run("train", "--data", bundled / "samples.jsonl", *extra, "--out", tmp_path) == 0
        assert time.perf_counter() - start < 60.0

    def test_regression_head(self, small, tmp_path):
        assert run("train", "--data", small / "samples.jsonl", "--head", "regression", "--epochs", 1, "--out", tmp_path) == 0
        cfg = json.loads((tmp_path / "manifest.json").read_text())["config"]
        assert cfg["loss"]["kind"] == "mse"


class TestEvaluate:
    def test_own_training_set(self, small, small_model, tmp_path):
        assert run("evaluate", "--checkpoint", small_model / "checkpoint.json", "--data", small / "samples.jsonl",
                   "--out", tmp_path) == 0
        m = json.loads((tmp_path / "metrics.json").read_text())
        assert all(np.isfinite(m[k]) for k in ("pearson", "spearman", "kendall", "mae", "mse", "r2"))
        assert m["mae"] >= 0

    def test_perfect_model(self, tmp_path):
        # five distinct texts; a least-squares regression head reproduces their scores exactly
        samples = [GradedSample(f"p{k}", "rate this", f"answer number {k} token{k}", None, None, k) for k in range(1, 6)] * 4
        write_dataset(samples, tmp_path / "d.jsonl")
        x = np.c_[featurize_many(samples, 32), np.ones(len(samples))]
        w, *_ = np.linalg.lstsq(x, scores_of(samples).astype(float), rcond=None)
        model = ScorerModel(HeadKind.REGRESSION, 32, 0, {"W2": w[None, :32], "b2": w[32:]})
        save_checkpoint(tmp_path / "ck.json", model, TrainConfig(loss=LossSpec(LossKind.MSE)), "none")
        assert run("evaluate", "--checkpoint", tmp_path / "ck.json", "--data", tmp_path / "d.jsonl",
                   "--out", tmp_path / "o") == 0
        m = json.loads((tmp_path / "o" / "metrics.json").read_text())
        assert m["pearson"] == pytest.approx(1.0, abs=1e-12)
        assert m["mse"] == pytest.approx(0.0, abs=1e-20)

    def test_relative_two_rows(self, small, small_model, tmp_path):
        assert run("evaluate", "--checkpoint", small_model / "checkpoint.json", "--data", small / "pairs.jsonl",
                   "--mode", "relative", "--tie-epsilon", 0, 0.5, "--out", tmp_path) == 0
        rows = json.loads((tmp_path / "relative.json").read_text())["accuracy"]
        assert [r["tie_epsilon"] for r in rows] == [0.0, 0.5]
        assert len((tmp_path / "relative.txt").read_text().splitlines()) == 3

    def test_dim_mismatch(self, small, small_model, tmp_path, capsys):
        code = run("evaluate", "--checkpoint", small_model / "checkpoint.json", "--data", small / "samples.jsonl",
                   "--dim", 64, "--out", tmp_path)
        err = capsys.readouterr().err
        assert code == 3
        assert "256" in err and "64" in err


class TestCompare:
    def test_three_rows(self, small, tmp_path):
        assert run("compare-losses", "--data", small / "samples.jsonl", "--seeds", 1, "--epochs", 2,
                   "--lr", 0.03, "--out", tmp_path) == 0
        lines = (tmp_path / "comparison.csv").read_text().splitlines()
        assert len(lines) == 4
        assert "median_" not in lines[0]
        assert [l.split(",")[0] for l in lines[1:]] == ["ce", "squared_emd", "regression_mse"]


class TestReplay:
    @pytest.mark.parametrize("argv", [
        ("augment", "--seed", 9),
        ("train", "--epochs", 2, "--lr", 0.03),
        ("compare-losses", "--seeds", 1, 2, "--epochs", 1, "--lr", 0.03),
    ])
    def test_byte_identical(self, small, tmp_path, argv):
        flag = "--input" if argv[0] == "augment" else "--data"
        assert run(*argv, flag, small / "samples.jsonl", "--out", tmp_path / "first") == 0
        assert run("replay", tmp_path / "first" / "manifest.json", "--out", tmp_path / "second") == 0
        assert files(tmp_path / "first") == files(tmp_path / "second")
        first = json.loads((tmp_path / "first" / "manifest.json").read_text())
        second = json.loads((tmp_path / "second" / "manifest.json").read_text())
        first["config"].pop("out"), second["config"].pop("out")
        assert first == second


def test_console_script_entry():
    proc = subprocess.run([sys.executable, "-m", "ordgrade.cli", "--version"], capture_output=True, text=True)
    assert proc.returncode == 0 and "ordgrade" in proc.stdout
