# zpgan/tests/test_cli.py
import json

import numpy as np
import pytest

from zpgan.cli.main import main

SMALL_ARCH_YAML = """
train:
  architecture:
    latent_dim: 4
    base_channels: 4
    conditioning_embed_dim: 4
"""


@pytest.fixture
def data_dir(tmp_path):
    out = tmp_path / "data"
    assert main(["synth", "--seed", "7", "--groups", "6", "--per-group", "4", "--out", str(out)]) == 0
    return out


@pytest.fixture
def small_yaml(tmp_path):
    path = tmp_path / "small.yaml"
    path.write_text(SMALL_ARCH_YAML)
    return str(path)


@pytest.fixture
def trained(tmp_path, data_dir, small_yaml):
    run = tmp_path / "run"
    code = main(["train", "--config", small_yaml, "--data", str(data_dir), "--out", str(run), "--epochs", "1", "--batch-size", "8"])
    assert code == 0
    return run / "checkpoint"


def test_synth_writes_expected_sample_count(tmp_path):
    out = tmp_path / "d"
    assert main(["synth", "--seed", "7", "--groups", "64", "--per-group", "8", "--out", str(out)]) == 0
    assert json.loads((out / "manifest.json").read_text())["n_samples"] == 512


def test_synth_rerun_is_byte_identical(tmp_path):
    for name in ("a", "b"):
        assert main(["synth", "--seed", "7", "--groups", "3", "--per-group", "2", "--out", str(tmp_path / name)]) == 0
    for f in ("manifest.json", "conditions.bin", "responses.bin", "groups.json"):
        assert (tmp_path / "a" / f).read_bytes() == (tmp_path / "b" / f).read_bytes()


def test_synth_rejects_one_sample_per_group(tmp_path, capsys):
    assert main(["synth", "--per-group", "1", "--out", str(tmp_path / "d")]) == 2
    assert "synth.per_group" in capsys.readouterr().err


def test_bad_flag_is_a_usage_error():
    assert main(["synth", "--no-such-flag"]) == 2
    assert main(["gridsearch", "--grid-div", "a,b"]) == 2


def test_help_lists_defaults(capsys):
    assert main(["train", "--help"]) == 0
    out = " ".join(capsys.readouterr().out.split())
    for flag in ("--lambda-div", "--lambda-in", "--lambda-aux", "--epochs", "--seed"):
        assert flag in out
    assert "default: 1e-10" in out


def test_stats_command(data_dir):
    assert main(["stats", "--data", str(data_dir)]) == 0
    stats = json.loads((data_dir / "stats.json").read_text())
    assert len(stats["per_group"]) == 6


def test_train_with_zero_epochs_emits_initial_checkpoint(tmp_path, data_dir, small_yaml):
    run = tmp_path / "run"
    assert main(["train", "--config", small_yaml, "--data", str(data_dir), "--out", str(run), "--epochs", "0"]) == 0
    meta = json.loads((run / "checkpoint" / "meta.json").read_text())
    assert meta["step"] == 0
    assert meta["weights"] == {"lambda_div": 1e-1, "lambda_in": 1e-10, "lambda_aux": 1e-3}
    assert meta["split_ratio"] == 0.8
    assert meta["data_dir"] == str(data_dir)


def test_train_plain_gan_flags(tmp_path, data_dir, small_yaml):
    run = tmp_path / "run"
    args = ["train", "--config", small_yaml, "--data", str(data_dir), "--out", str(run), "--epochs", "1",
            "--lambda-div", "0", "--lambda-in", "0", "--lambda-aux", "0"]
    assert main(args) == 0
    meta = json.loads((run / "checkpoint" / "meta.json").read_text())
    assert meta["weights"] == {"lambda_div": 0.0, "lambda_in": 0.0, "lambda_aux": 0.0}
    assert (run / "train_log.jsonl").read_text().count("\n") == meta["step"]


def test_train_twice_gives_identical_logs(tmp_path, data_dir, small_yaml):
    for name in ("a", "b"):
        args = ["train", "--config", small_yaml, "--data", str(data_dir), "--out", str(tmp_path / name), "--epochs", "1"]
        assert main(args) == 0
    assert (tmp_path / "a" / "train_log.jsonl").read_bytes() == (tmp_path / "b" / "train_log.jsonl").read_bytes()


def test_train_missing_dataset(tmp_path):
    assert main(["train", "--data", str(tmp_path / "nowhere"), "--out", str(tmp_path / "run")]) == 2


def test_config_rejects_unknown_keys(tmp_path, data_dir, capsys):
    bad = tmp_path / "bad.yaml"
    bad.write_text("train:\n  epochs: 0\n  learning_rate: 0.1\n")
    assert main(["train", "--config", str(bad), "--data", str(data_dir)]) == 2
    assert "train.learning_rate" in capsys.readouterr().err


def test_flags_override_config_file(tmp_path, data_dir):
    cfg = tmp_path / "cfg.yaml"
    cfg.write_text(SMALL_ARCH_YAML + "  epochs: 5\n")
    run = tmp_path / "run"
    assert main(["train", "--config", str(cfg), "--data", str(data_dir), "--out", str(run), "--epochs", "0"]) == 0
    assert json.loads((run / "checkpoint" / "meta.json").read_text())["epoch"] == 0


def test_eval_prints_table_and_is_reproducible(tmp_path, trained, capsys):
    capsys.readouterr()
    for name in ("a", "b"):
        assert main(["eval", "--checkpoint", str(trained), "--out", str(tmp_path / name), "--seed", "3"]) == 0
    out = capsys.readouterr().out
    rows = [line for line in out.splitlines() if line.startswith(("ch", "mean"))]
    assert [r.split()[0] for r in rows[:7]] == ["channel", "ch1", "ch2", "ch3", "ch4", "ch5", "mean"]
    assert (tmp_path / "a" / "report.json").read_bytes() == (tmp_path / "b" / "report.json").read_bytes()


def test_eval_one_sample_per_condition(tmp_path, trained):
    out = tmp_path / "ev"
    assert main(["eval", "--checkpoint", str(trained), "--out", str(out), "--samples-per-condition", "1", "--split", "all"]) == 0
    assert json.loads((out / "report.json").read_text())["n_samples"] == 6


def test_eval_missing_checkpoint(tmp_path):
    assert main(["eval", "--checkpoint", str(tmp_path / "missing"), "--out", str(tmp_path / "ev")]) == 2


def test_plot_missing_report(tmp_path):
    assert main(["plot", "--report", str(tmp_path / "missing")]) == 2


def test_plot_emits_histograms_and_sample_grid(tmp_path, trained):
    report = tmp_path / "ev"
    assert main(["eval", "--checkpoint", str(trained), "--out", str(report)]) == 0
    for f in report.glob("hist_ch*.csv"):
        f.unlink()

    assert main(["plot", "--report", str(report)]) == 0
    assert sorted(p.name for p in report.glob("hist_ch*.csv")) == ["hist_ch4.csv", "hist_ch5.csv"]

    out = tmp_path / "plots"
    args = ["plot", "--report", str(report), "--out", str(out), "--channels", "1,2,3,4,5",
            "--checkpoint", str(trained), "--samples", "3"]
    assert main(args) == 0
    assert len(list(out.glob("hist_ch*.csv"))) == 5
    grid = np.load(out / "sample_grid.npz")
    assert grid["conditions"].shape == (3, 9)
    assert grid["true"].shape == grid["generated"].shape == (3, 56, 30)


def test_gridsearch_single_cell(tmp_path, data_dir, small_yaml):
    out = tmp_path / "grid"
    args = ["gridsearch", "--config", small_yaml, "--data", str(data_dir), "--out", str(out),
            "--runs-per-cell", "1", "--grid-div", "0.1", "--grid-in", "1e-10", "--grid-aux", "1e-3",
            "--epochs", "1", "--jobs", "1", "--backend", "local", "--samples-per-condition", "2"]
    assert main(args) == 0
    results = json.loads((out / "grid_results.json").read_text())
    assert len(results["cells"]) == 1
    assert results["cells"][0]["rank"] == 1
