# SPDX-License-Identifier: MIT
#
# Copyright (c) 2026 The baddiff authors

import csv
import hashlib
import json
import os

import numpy as np
import pytest

import baddiff


def _tiny(directory, **changes):
    cfg = baddiff.ExperimentConfig(
        dataset=baddiff.DatasetSpec(count=64),
        heldout_count=32,
        schedule=baddiff.ScheduleConfig(T=10, beta_start=1e-3, beta_end=0.2),
        hidden=(16,),
        embed_dim=4,
        pretrain=baddiff.TrainConfig(epochs=2, batch_size=32, mode=baddiff.TrainMode.SCRATCH),
        train=baddiff.TrainConfig(epochs=2, batch_size=32, checkpoint_every=1),
        sampler=baddiff.SamplerConfig(num_samples=16),
        defense=baddiff.DefenseConfig(
            budgets=(0.0, 0.1), lrs=(1e-3,), epochs=1, batch_size=32, num_reconstructions=8
        ),
        output_dir=str(directory),
        seed=1,
    )
    return cfg.replace(**changes)


def _manifest(directory):
    with open(os.path.join(directory, "manifest.json"), encoding="utf-8") as f:
        return json.load(f)


def _read(path):
    with open(path, "rb") as f:
        return f.read()


def test_run_outputs(tmp_path):
    out = tmp_path / "run"
    res = baddiff.run_experiment(_tiny(out))
    manifest = _manifest(out)

    for name in (
        "clean.bdck",
        "pretrain_loss_history.csv",
        "checkpoint_epoch_0001.bdck",
        "checkpoint_epoch_0002.bdck",
        "epoch_metrics.csv",
        "loss_history.csv",
        "backdoored.bdck",
        "samples_clean.bdtf",
        "samples_triggered.bdtf",
        "metrics.json",
        "metrics.csv",
    ):
        assert manifest["files"][name] == hashlib.sha256(_read(out / name)).hexdigest()

    assert set(manifest["stages"].values()) == {"ok"}
    assert manifest["error"] is None
    assert len(manifest["chain_seeds"]["clean"]) == 16
    assert manifest["seeds"]["train"] == baddiff.derive_seed(1, "train")
    assert baddiff.load_tensors(out / "samples_triggered.bdtf").shape == (16, 2)
    assert baddiff.load_checkpoint(out / "backdoored.bdck").params == res.params
    assert len(res.history.epoch_losses) == 2
    assert set(res.report.values) == {"triggered_mse", "clean_mse", "frechet", "mmd_zscore"}

    with open(out / "epoch_metrics.csv", newline="") as f:
        assert [row[0] for row in csv.reader(f)] == ["epoch", "1", "2"]


def test_rerun_is_byte_identical(tmp_path):
    out = tmp_path / "run"
    cfg = _tiny(out)
    baddiff.run_experiment(cfg)
    first = {name: _read(out / name) for name in ("manifest.json", "metrics.json")}
    baddiff.run_experiment(cfg)

    for name, content in first.items():
        assert _read(out / name) == content


def test_scratch_skips_pretraining(tmp_path):
    out = tmp_path / "run"
    cfg = _tiny(out)
    cfg = cfg.replace(train=baddiff.TrainConfig(epochs=1, mode=baddiff.TrainMode.SCRATCH))
    baddiff.run_experiment(cfg)
    manifest = _manifest(out)

    assert manifest["stages"]["pretrain"] == "skipped"
    assert not (out / "clean.bdck").exists()


def test_finetune_from_checkpoint(tmp_path):
    first = tmp_path / "first"
    baddiff.run_experiment(_tiny(first))
    cfg = _tiny(tmp_path / "second")
    train = baddiff.TrainConfig(epochs=1, batch_size=32, checkpoint_in=str(first / "clean.bdck"))
    res = baddiff.run_experiment(cfg.replace(train=train))

    assert _manifest(tmp_path / "second")["stages"]["pretrain"] == "skipped"
    assert len(res.history.epoch_losses) == 1


def test_failed_stage_is_recorded(tmp_path):
    other = baddiff.init_params(baddiff.Architecture(baddiff.DenoiserMode.VECTOR, (2,), (4,), 4))
    ck = tmp_path / "other.bdck"
    baddiff.save_checkpoint(ck, other, baddiff.make_linear_schedule(10, 1e-3, 0.2))
    out = tmp_path / "run"
    cfg = _tiny(out)
    cfg = cfg.replace(train=baddiff.TrainConfig(epochs=1, checkpoint_in=str(ck)))

    with pytest.raises(baddiff.StageError) as exc:
        baddiff.run_experiment(cfg)

    manifest = _manifest(out)

    assert exc.value.stage == "init"
    assert manifest["stages"]["data"] == "ok"
    assert manifest["stages"]["init"] == "failed"
    assert manifest["stages"]["train"] == "pending"
    assert manifest["error"]["stage"] == "init"
    assert manifest["error"]["type"] == "ShapeError"


def test_evaluate_matches_run(tmp_path):
    out = tmp_path / "run"
    cfg = _tiny(out)
    res = baddiff.run_experiment(cfg)
    params = baddiff.load_model(cfg, out / "backdoored.bdck")
    report, samples = baddiff.evaluate(cfg, params)

    assert report.values == res.report.values
    assert np.array_equal(samples["clean"], baddiff.load_tensors(out / "samples_clean.bdtf"))


def test_load_model_schedule_mismatch(tmp_path):
    out = tmp_path / "run"
    cfg = _tiny(out)
    baddiff.run_experiment(cfg)
    other = cfg.replace(schedule=baddiff.ScheduleConfig(T=12, beta_start=1e-3, beta_end=0.2))

    with pytest.raises(baddiff.ParameterError):
        baddiff.load_model(other, out / "backdoored.bdck")


def test_evaluate_architecture_mismatch(tmp_path):
    cfg = _tiny(tmp_path / "run")
    params = baddiff.init_params(baddiff.Architecture(baddiff.DenoiserMode.VECTOR, (2,), (4,), 4))

    with pytest.raises(baddiff.ShapeError):
        baddiff.evaluate(cfg, params)


def test_sweep_shares_pretraining(tmp_path):
    out = tmp_path / "sweep"
    results = baddiff.run_sweep(_tiny(out), "poison_rate", ["0", "0.5"])

    assert [v for v, _ in results] == ["0", "0.5"]
    assert (out / "clean.bdck").exists()

    for name in ("poison_rate-0", "poison_rate-0.5"):
        assert _manifest(out / name)["stages"]["pretrain"] == "skipped"

    with open(out / "sweep.csv", newline="") as f:
        rows = list(csv.reader(f))

    assert rows[0][0] == "poison_rate"
    assert len(rows) == 3


def test_sweep_over_mode(tmp_path):
    out = tmp_path / "sweep"
    cfg = _tiny(out, train=baddiff.TrainConfig(epochs=1, batch_size=32))
    results = baddiff.run_sweep(cfg, "mode", ["scratch"])
    point = results[0][1]

    # scratch points get the scratch-to-fine-tune epoch ratio
    assert len(point.history.epoch_losses) == 8
    assert _manifest(out)["stages"]["pretrain"] == "skipped"


def test_sweep_bad_arguments(tmp_path):
    cfg = _tiny(tmp_path / "sweep")

    with pytest.raises(baddiff.ParameterError):
        baddiff.run_sweep(cfg, "hidden", ["8"])

    with pytest.raises(baddiff.ParameterError):
        baddiff.run_sweep(cfg, "poison_rate", [])

    with pytest.raises(baddiff.ParameterError):
        baddiff.run_sweep(cfg, "poison_rate", ["lots"])

    with pytest.raises(baddiff.ParameterError):
        baddiff.run_sweep(cfg, "poison_rate", ["1.5"])


def test_defense(tmp_path):
    out = tmp_path / "run"
    cfg = _tiny(out)
    params = baddiff.init_params(cfg.architecture(), 0)
    results = baddiff.run_defense(cfg, params=params)

    assert sorted(results) == [(0.0, 1e-3), (0.1, 1e-3)]

    zero = results[(0.0, 1e-3)]
    plain = baddiff.sample_chains(
        params, cfg.schedule.build(), (2,), 8, cfg.sampler, zero.reconstruction_seeds
    )

    assert np.array_equal(zero.reconstructions[0], plain)
    assert (out / "defense" / "anp_summary.csv").exists()
    assert (out / "defense" / "anp_b0_lr0.001.csv").exists()
    assert (out / "defense" / "anp_b0.1_lr0.001_best.bdtf").exists()
    assert set(_manifest(out / "defense")["stages"].values()) == {"ok"}


def _desk_config(directory, rate):
    return baddiff.ExperimentConfig(
        poison=baddiff.PoisonConfig(rate=rate), output_dir=str(directory), seed=0
    )


@pytest.fixture(scope="module")
def desk_runs(tmp_path_factory):
    root = tmp_path_factory.mktemp("desk")
    control = _desk_config(root / "control", 0.0)
    clean = baddiff.run_experiment(
        control.replace(output_dir=str(root / "clean"), train=baddiff.TrainConfig(epochs=0))
    )
    attack = _desk_config(root / "attack", 0.1)
    return {
        "clean": clean,
        "control": baddiff.run_experiment(control, clean.params),
        "attack_config": attack,
        "attack": baddiff.run_experiment(attack, clean.params),
    }


@pytest.mark.slow
def test_attack_specificity_and_utility(desk_runs):
    attack_run = desk_runs["attack"]

    assert attack_run.report["triggered_mse"] * 10.0 <= desk_runs["control"].report["triggered_mse"]
    assert attack_run.report["frechet"] <= 2.0 * desk_runs["clean"].report["frechet"]
    assert attack_run.report["mmd_zscore"] < 6.0


@pytest.mark.slow
def test_ddim_keeps_the_backdoor(desk_runs):
    ddim = baddiff.SamplerConfig(kind=baddiff.SamplerKind.DDIM)
    attack = desk_runs["attack_config"]
    control = attack.replace(poison=baddiff.PoisonConfig(rate=0.0))
    attack_report, _ = baddiff.evaluate(attack.replace(sampler=ddim), desk_runs["attack"].params)
    control_report, _ = baddiff.evaluate(
        control.replace(sampler=ddim), desk_runs["control"].params
    )

    assert attack_report["triggered_mse"] * 5.0 <= control_report["triggered_mse"]


@pytest.mark.slow
def test_defense_curves_and_learning_rate_sensitivity(desk_runs):
    attack = desk_runs["attack_config"]
    budgets = (1.0, 2.0, 4.0)
    results = baddiff.run_defense(
        attack, budgets=budgets, lrs=(2e-4, 1e-4), params=desk_runs["attack"].params
    )
    out = os.path.join(attack.output_dir, "defense")

    assert set(results) == {(b, lr) for b in budgets for lr in (2e-4, 1e-4)}
    assert os.path.isfile(os.path.join(out, "anp_summary.csv"))

    for res in results.values():
        assert res is not None
        assert len(res.mse) == attack.defense.epochs

    # the larger step overshoots for at least one budget
    assert any(np.any(np.diff(results[(b, 2e-4)].mse) > 0.0) for b in budgets)


@pytest.mark.slow
def test_triggered_mse_falls_with_poison_rate(tmp_path):
    rates = [0.0, 0.05, 0.1, 0.2, 0.3]
    points = baddiff.run_sweep(_desk_config(tmp_path, 0.1), "poison_rate", rates)
    mse = [result.report["triggered_mse"] for _, result in points]

    assert [value for value, _ in points] == rates
    assert int(np.sum(np.diff(mse) > 0.0)) <= 1
    assert (tmp_path / "sweep.csv").exists()


@pytest.mark.slow
def test_clipping_breaks_the_image_backdoor(tmp_path):
    cfg = baddiff.ExperimentConfig(
        dataset=baddiff.DatasetSpec(kind=baddiff.DatasetKind.SHAPES),
        poison=baddiff.PoisonConfig(
            trigger_kind=baddiff.TriggerKind.GREY_BOX,
            target_kind=baddiff.TargetKind.CORNER,
            rate=0.2,
        ),
        pretrain=baddiff.TrainConfig(
            epochs=400,
            batch_size=32,
            mode=baddiff.TrainMode.SCRATCH,
        ),
        train=baddiff.TrainConfig(batch_size=32),
        output_dir=str(tmp_path),
        seed=0,
    )
    run = baddiff.run_experiment(cfg)
    clipped = baddiff.SamplerConfig(kind=baddiff.SamplerKind.CLIPPED)
    report, _ = baddiff.evaluate(cfg.replace(sampler=clipped), run.params)
    frechet = run.report["frechet"]

    assert report["triggered_mse"] >= 10.0 * run.report["triggered_mse"]
    assert abs(report["frechet"] - frechet) < 0.25 * frechet
