# SPDX-License-Identifier: MIT
#
# Copyright (c) 2026 The baddiff authors

import json

import pytest

import baddiff
from baddiff import cli as baddiff_cli


def _write_config(tmp_path):
    cfg = baddiff.ExperimentConfig(
        dataset=baddiff.DatasetSpec(count=64),
        heldout_count=32,
        schedule=baddiff.ScheduleConfig(T=10, beta_start=1e-3, beta_end=0.2),
        hidden=(16,),
        embed_dim=4,
        train=baddiff.TrainConfig(epochs=2, batch_size=32),
        sampler=baddiff.SamplerConfig(num_samples=16),
        output_dir=str(tmp_path / "run"),
    )
    path = tmp_path / "cfg.json"
    path.write_text(cfg.to_json())
    return path


def test_version(capsys):
    with pytest.raises(SystemExit) as exc:
        baddiff_cli.main(["--version"])

    assert exc.value.code == 0
    assert capsys.readouterr().out.strip() == baddiff.__version__


def test_verify_quick(capsys):
    assert baddiff_cli.main(["verify", "--quick"]) == 0
    assert "6 of 6 checks passed" in capsys.readouterr().out


def test_flags_override_config_file(tmp_path):
    path = _write_config(tmp_path)
    parser = baddiff_cli._build_parser()
    args = parser.parse_args(
        ["-c", str(path), "-s", "7", "train", "--epochs", "5", "--sampler", "ddim"]
    )
    cfg = baddiff_cli._effective_config(args)

    assert cfg.train.epochs == 5
    assert cfg.train.batch_size == 32
    assert cfg.sampler.kind is baddiff.SamplerKind.DDIM
    assert cfg.sampler.num_samples == 16
    assert cfg.dataset.count == 64
    assert cfg.seed == 7


def test_forced_values(tmp_path):
    path = _write_config(tmp_path)
    args = baddiff_cli._build_parser().parse_args(["-c", str(path), "train"])
    cfg = baddiff_cli._effective_config(
        args, **{"train.mode": "scratch", "train.checkpoint_in": None}
    )

    assert cfg.train.mode is baddiff.TrainMode.SCRATCH
    assert cfg.train.checkpoint_in is None


def test_bad_config_file(tmp_path, capsys):
    path = tmp_path / "cfg.json"
    path.write_text("{")

    assert baddiff_cli.main(["-c", str(path), "train"]) == 1
    assert capsys.readouterr().err.startswith("baddiff: error:")


def test_missing_config_file(tmp_path, capsys):
    assert baddiff_cli.main(["-c", str(tmp_path / "nope.json"), "train"]) == 1
    assert "baddiff: error:" in capsys.readouterr().err


def test_invalid_override(tmp_path, capsys):
    path = _write_config(tmp_path)

    assert baddiff_cli.main(["-c", str(path), "train", "--poison-rate", "2"]) == 1
    assert "poison rate" in capsys.readouterr().err


def test_bad_log_level():
    with pytest.raises(SystemExit) as exc:
        baddiff_cli.main(["-l", "loud", "verify"])

    assert exc.value.code == 2


def test_train_sample_eval(tmp_path, capsys):
    path = _write_config(tmp_path)
    run = tmp_path / "run"

    assert baddiff_cli.main(["-c", str(path), "train", "--epochs", "1"]) == 0

    report = json.loads(capsys.readouterr().out)

    assert "triggered_mse" in report["metrics"]
    assert (run / "backdoored.bdck").exists()

    ck = str(run / "backdoored.bdck")
    out = tmp_path / "triggered.bdtf"
    argv = ["-c", str(path), "sample", "--checkpoint", ck, "--triggered", "--out", str(out)]

    assert baddiff_cli.main(argv) == 0
    assert baddiff.load_tensors(out).shape == (16, 2)

    capsys.readouterr()

    assert baddiff_cli.main(["-c", str(path), "eval", "--checkpoint", ck]) == 0
    assert json.loads(capsys.readouterr().out) == report


def test_sample_missing_checkpoint(tmp_path, capsys):
    path = _write_config(tmp_path)
    missing = str(tmp_path / "missing.bdck")

    assert baddiff_cli.main(["-c", str(path), "sample", "--checkpoint", missing]) == 1
