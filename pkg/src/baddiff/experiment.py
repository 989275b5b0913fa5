# SPDX-License-Identifier: MIT
#
# Copyright (c) 2026 The baddiff authors

# Experiment orchestration: dataset generation, clean pre-training,
# backdoor fine-tuning (or training from scratch), sampling, evaluation
# and the weight-perturbation defense, each run as a named stage whose
# outcome is recorded in the run directory's manifest.

import contextlib
import csv
import dataclasses
import hashlib
import io
import json
import os
import typing

import numpy as np

from baddiff import config as baddiff_config
from baddiff import data as baddiff_data
from baddiff import defense as baddiff_defense
from baddiff import denoiser as baddiff_denoiser
from baddiff import error as baddiff_error
from baddiff import logging as baddiff_logging
from baddiff import metrics as baddiff_metrics
from baddiff import sampling as baddiff_sampling
from baddiff import tensor_file as baddiff_tensor_file
from baddiff import training as baddiff_training
from baddiff import utils as baddiff_utils
from baddiff import version as baddiff_version

_logger = baddiff_logging._get_logger(__name__)

MANIFEST_NAME = "manifest.json"
SWEEP_OVER = ("poison_rate", "trigger_size", "mode")

# Chains sampled at each intermediate fine-tuning checkpoint.
MONITOR_SAMPLES = 64

STAGE_OK = "ok"
STAGE_FAILED = "failed"
STAGE_SKIPPED = "skipped"
STAGE_PENDING = "pending"


def _csv_bytes(rows) -> bytes:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerows(rows)
    return buf.getvalue().encode("utf-8")


class _Manifest:
    def __init__(self, directory, config, stages):
        self._directory = directory
        self._doc = {
            "baddiff_version": baddiff_version.__version__,
            "config": config.to_dict(),
            "config_hash": config.config_hash(),
            "seeds": {"master": config.seed},
            "chain_seeds": {},
            "stages": {name: STAGE_PENDING for name in stages},
            "files": {},
            "error": None,
        }

        for name in baddiff_config.STREAM_NAMES:
            self._doc["seeds"][name] = baddiff_config.derive_seed(config.seed, name)

    @property
    def directory(self) -> str:
        return self._directory

    @property
    def document(self) -> dict:
        return self._doc

    def path(self, name):
        return os.path.join(self._directory, name)

    def set_stage(self, name, status):
        self._doc["stages"][name] = status

    def set_chain_seeds(self, name, seeds):
        self._doc["chain_seeds"][name] = [int(s) for s in seeds]

    def record_error(self, stage, error):
        self._doc["error"] = {
            "stage": stage,
            "type": error.__class__.__name__,
            "message": str(error),
        }

    def add_file(self, name):
        with open(self.path(name), "rb") as f:
            self._doc["files"][name] = hashlib.sha256(f.read()).hexdigest()

    def write_bytes(self, name, content: bytes):
        with open(self.path(name), "wb") as f:
            f.write(content)

        self.add_file(name)

    def write_csv(self, name, rows):
        self.write_bytes(name, _csv_bytes(rows))

    def write_tensors(self, name, tensors):
        baddiff_tensor_file.save_tensors(self.path(name), tensors)
        self.add_file(name)

    def write_checkpoint(self, name, params, schedule, provenance):
        baddiff_tensor_file.save_checkpoint(self.path(name), params, schedule, provenance)
        self.add_file(name)

    def write(self):
        text = json.dumps(self._doc, sort_keys=True, indent=2) + "\n"

        with open(self.path(MANIFEST_NAME), "w", encoding="utf-8") as f:
            f.write(text)

    @contextlib.contextmanager
    def stage(self, name):
        _logger.info("stage `%s`: start", name)

        try:
            yield
        except Exception as exc:
            self.set_stage(name, STAGE_FAILED)

            # a nested stage already recorded the root failure
            if isinstance(exc, baddiff_error.StageError):
                self.write()
                raise

            _logger.error("stage `%s` failed: %s", name, exc)
            self.record_error(name, exc)
            self.write()

            raise baddiff_error.StageError(name, exc) from exc

        self.set_stage(name, STAGE_OK)
        _logger.info("stage `%s`: done", name)


class RunResult:
    def __init__(self, directory, params, history, report, manifest):
        self._directory = directory
        self._params = params
        self._history = history
        self._report = report
        self._manifest = manifest

    @property
    def directory(self) -> str:
        return self._directory

    @property
    def params(self) -> baddiff_denoiser.DenoiserParams:
        return self._params

    @property
    def history(self) -> baddiff_training.TrainHistory:
        return self._history

    @property
    def report(self) -> baddiff_metrics.MetricsReport:
        return self._report

    @property
    def manifest(self) -> dict:
        return self._manifest


class _Context:
    """Everything derived from a config before any model exists."""

    def __init__(self, config: baddiff_config.ExperimentConfig):
        self.config = config
        self.schedule = config.schedule.build()
        self.architecture = config.architecture()
        self.poison = config.poison_spec()
        self.shape = config.data_shape
        sample_rng = baddiff_config.seed_stream(config.seed, "sample")
        n = config.sampler.num_samples
        self.clean_seeds = baddiff_sampling.draw_chain_seeds(sample_rng, n)
        self.triggered_seeds = baddiff_sampling.draw_chain_seeds(sample_rng, n)

    def dataset(self) -> np.ndarray:
        rng = baddiff_config.seed_stream(self.config.seed, "data")
        return baddiff_data.generate_dataset(self.config.dataset, rng)

    def heldout(self) -> np.ndarray:
        rng = baddiff_config.seed_stream(self.config.seed, "heldout")
        spec = self.config.dataset.with_count(self.config.heldout_count)
        return baddiff_data.generate_dataset(spec, rng)

    def fresh_params(self) -> baddiff_denoiser.DenoiserParams:
        seed = baddiff_config.derive_seed(self.config.seed, "init")
        return baddiff_denoiser.init_params(self.architecture, seed)

    def provenance(self, stage, epoch) -> dict:
        return {"config_hash": self.config.config_hash(), "stage": stage, "epoch": epoch}


def _check_checkpoint(ctx, ck, path):
    if ck.params.architecture != ctx.architecture:
        raise baddiff_error.ShapeError(
            "checkpoint `{}` architecture {!r} does not match {!r}".format(
                path, ck.params.architecture, ctx.architecture
            )
        )

    if ck.schedule_descriptor != ctx.schedule.descriptor():
        raise baddiff_error.ParameterError(
            "checkpoint `{}` was trained with a different noise schedule".format(path)
        )


def load_model(
    config: baddiff_config.ExperimentConfig, path: typing.Union[str, os.PathLike]
) -> baddiff_denoiser.DenoiserParams:
    """Parameters of the checkpoint at `path`, checked against `config`."""
    ctx = _Context(config)
    ck = baddiff_tensor_file.load_checkpoint(path)
    _check_checkpoint(ctx, ck, path)
    return ck.params


def _pretrain(ctx, dataset):
    cfg = dataclasses.replace(
        ctx.config.pretrain, seed=baddiff_config.derive_seed(ctx.config.seed, "pretrain")
    )
    return baddiff_training.pretrain_clean(cfg, dataset, ctx.schedule, ctx.fresh_params())


def _sample_both(ctx, params):
    cfg = ctx.config.sampler
    n = cfg.num_samples
    clean = baddiff_sampling.sample_chains(
        params, ctx.schedule, ctx.shape, n, cfg, ctx.clean_seeds
    )
    triggered = baddiff_sampling.sample_chains(
        params, ctx.schedule, ctx.shape, n, cfg, ctx.triggered_seeds, ctx.poison.trigger
    )
    return clean, triggered


def _score(ctx, clean, triggered, heldout) -> baddiff_metrics.MetricsReport:
    y = ctx.poison.target
    values, counts = {}, {}
    n = clean.shape[0]
    metrics_rng = baddiff_config.seed_stream(ctx.config.seed, "metrics")

    for name in ctx.config.metrics:
        if name == "triggered_mse":
            values[name] = baddiff_metrics.target_mse(triggered, y)
        elif name == "clean_mse":
            values[name] = baddiff_metrics.target_mse(clean, y)
        elif name == "triggered_ssim":
            values[name] = baddiff_metrics.mean_ssim(triggered, y)
        elif name == "frechet":
            values[name] = baddiff_metrics.frechet_gaussian_distance(clean, heldout)
        elif name == "mmd":
            bw = baddiff_metrics.median_bandwidth(clean, heldout)
            values[name] = baddiff_metrics.kernel_mmd(clean, heldout, bw)
        else:
            values[name] = baddiff_metrics.kernel_mmd_zscore(clean, heldout, rng=metrics_rng)

        counts[name] = n

    seeds = {
        "sample": baddiff_config.derive_seed(ctx.config.seed, "sample"),
        "heldout": baddiff_config.derive_seed(ctx.config.seed, "heldout"),
        "metrics": baddiff_config.derive_seed(ctx.config.seed, "metrics"),
    }
    return baddiff_metrics.MetricsReport(values, counts, seeds)


def evaluate(
    config: baddiff_config.ExperimentConfig, params: baddiff_denoiser.DenoiserParams
) -> typing.Tuple[baddiff_metrics.MetricsReport, typing.Dict[str, np.ndarray]]:
    """Sample clean and triggered chains from `params` and score them.

    Returns the report and the `clean` and `triggered` sample batches.
    """
    baddiff_utils._check_type(config, baddiff_config.ExperimentConfig)
    baddiff_utils._check_type(params, baddiff_denoiser.DenoiserParams)
    ctx = _Context(config)

    if params.architecture != ctx.architecture:
        raise baddiff_error.ShapeError("parameters do not match the configured architecture")

    clean, triggered = _sample_both(ctx, params)
    report = _score(ctx, clean, triggered, ctx.heldout())
    return report, {"clean": clean, "triggered": triggered}


def _starting_params(ctx, manifest, dataset, clean_params):
    train_cfg = ctx.config.train

    if train_cfg.mode is baddiff_training.TrainMode.SCRATCH:
        manifest.set_stage("pretrain", STAGE_SKIPPED)
        return ctx.fresh_params()

    if train_cfg.checkpoint_in is not None:
        ck = baddiff_tensor_file.load_checkpoint(train_cfg.checkpoint_in)
        _check_checkpoint(ctx, ck, train_cfg.checkpoint_in)
        manifest.set_stage("pretrain", STAGE_SKIPPED)
        return ck.params

    if clean_params is not None:
        manifest.set_stage("pretrain", STAGE_SKIPPED)
        return clean_params

    with manifest.stage("pretrain"):
        params, history = _pretrain(ctx, dataset)
        manifest.write_csv("pretrain_loss_history.csv", history.to_csv_rows())
        manifest.write_checkpoint(
            "clean.bdck",
            params,
            ctx.schedule,
            ctx.provenance("pretrain", ctx.config.pretrain.epochs),
        )

    return params


def run_experiment(
    config: baddiff_config.ExperimentConfig,
    clean_params: typing.Optional[baddiff_denoiser.DenoiserParams] = None,
) -> RunResult:
    """Run one attack experiment into `config.output_dir`.

    Fine-tuning starts from `config.train.checkpoint_in` when set, else
    from `clean_params` when given, else from a freshly pre-trained clean
    model.
    """
    baddiff_utils._check_type(config, baddiff_config.ExperimentConfig)
    os.makedirs(config.output_dir, exist_ok=True)
    ctx = _Context(config)
    manifest = _Manifest(
        config.output_dir, config, ["data", "init", "pretrain", "train", "sample", "evaluate"]
    )
    manifest.set_chain_seeds("clean", ctx.clean_seeds)
    manifest.set_chain_seeds("triggered", ctx.triggered_seeds)
    _logger.info("experiment `%s` (config %s)", config.output_dir, config.config_hash()[:12])

    with manifest.stage("data"):
        dataset = ctx.dataset()
        heldout = ctx.heldout()

    with manifest.stage("init"):
        start = _starting_params(ctx, manifest, dataset, clean_params)

    monitor_rows = [["epoch", "triggered_mse"]]
    monitor_n = min(MONITOR_SAMPLES, config.sampler.num_samples)

    def on_checkpoint(epoch, params):
        manifest.write_checkpoint(
            "checkpoint_epoch_{:04d}.bdck".format(epoch),
            params,
            ctx.schedule,
            ctx.provenance("train", epoch),
        )
        monitored = baddiff_sampling.sample_chains(
            params,
            ctx.schedule,
            ctx.shape,
            monitor_n,
            config.sampler,
            ctx.triggered_seeds[:monitor_n],
            ctx.poison.trigger,
        )
        mse = baddiff_metrics.target_mse(monitored, ctx.poison.target)
        monitor_rows.append([epoch, "{:.17g}".format(mse)])
        _logger.info("epoch %d: triggered MSE %.6g over %d chains", epoch, mse, monitor_n)

    with manifest.stage("train"):
        train_cfg = dataclasses.replace(
            config.train, seed=baddiff_config.derive_seed(config.seed, "train")
        )
        params, history = baddiff_training.train(
            train_cfg, dataset, ctx.poison, ctx.schedule, start, on_checkpoint
        )
        manifest.write_csv("loss_history.csv", history.to_csv_rows())

        if len(monitor_rows) > 1:
            manifest.write_csv("epoch_metrics.csv", monitor_rows)

        manifest.write_checkpoint(
            "backdoored.bdck", params, ctx.schedule, ctx.provenance("train", config.train.epochs)
        )

    with manifest.stage("sample"):
        clean, triggered = _sample_both(ctx, params)
        manifest.write_tensors("samples_clean.bdtf", clean)
        manifest.write_tensors("samples_triggered.bdtf", triggered)

    with manifest.stage("evaluate"):
        report = _score(ctx, clean, triggered, heldout)
        manifest.write_bytes("metrics.json", report.to_json().encode("utf-8"))
        manifest.write_csv("metrics.csv", report.to_csv_rows())

    manifest.write()
    return RunResult(config.output_dir, params, history, report, manifest.document)


def _sweep_point(config, over, value):
    if over == "poison_rate":
        poison = dataclasses.replace(config.poison, rate=float(value))
        return config.replace(poison=poison)
    elif over == "trigger_size":
        poison = dataclasses.replace(config.poison, trigger_size=int(value))
        return config.replace(poison=poison)

    mode = baddiff_training.TrainMode(value)
    train = config.train

    if mode is baddiff_training.TrainMode.SCRATCH and train.mode is not mode:
        # same budget ratio as the default fine-tune and scratch schedules
        epochs = round(
            train.epochs
            * baddiff_training.DEFAULT_SCRATCH_EPOCHS
            / baddiff_training.DEFAULT_FINETUNE_EPOCHS
        )
        train = dataclasses.replace(train, mode=mode, epochs=epochs, checkpoint_in=None)
    else:
        train = dataclasses.replace(train, mode=mode)

    return config.replace(train=train)


def run_sweep(
    config: baddiff_config.ExperimentConfig, over: str, values: typing.Sequence
) -> typing.List[typing.Tuple[typing.Any, RunResult]]:
    """Run one experiment per value of `over` under `config.output_dir`.

    Fine-tuning points share a single clean pre-training run.  The
    per-point metrics are collected into `sweep.csv`.
    """
    baddiff_utils._check_type(config, baddiff_config.ExperimentConfig)

    if over not in SWEEP_OVER:
        raise baddiff_error.ParameterError(
            "cannot sweep over `{}` (expecting one of {})".format(over, ", ".join(SWEEP_OVER))
        )

    if not values:
        raise baddiff_error.ParameterError("a sweep needs at least one value")

    try:
        points = [(v, _sweep_point(config, over, v)) for v in values]
    except (TypeError, ValueError) as exc:
        if isinstance(exc, baddiff_error._Error):
            raise

        raise baddiff_error.ParameterError(
            "invalid `{}` sweep value: {}".format(over, exc)
        ) from None

    os.makedirs(config.output_dir, exist_ok=True)
    ctx = _Context(config)
    manifest = _Manifest(config.output_dir, config, ["data", "pretrain", "points"])
    clean_params = None
    needs_clean = any(
        c.train.mode is baddiff_training.TrainMode.FINETUNE and c.train.checkpoint_in is None
        for _, c in points
    )

    with manifest.stage("data"):
        dataset = ctx.dataset()

    if needs_clean:
        with manifest.stage("pretrain"):
            clean_params, history = _pretrain(ctx, dataset)
            manifest.write_csv("pretrain_loss_history.csv", history.to_csv_rows())
            manifest.write_checkpoint(
                "clean.bdck",
                clean_params,
                ctx.schedule,
                ctx.provenance("pretrain", config.pretrain.epochs),
            )
    else:
        manifest.set_stage("pretrain", STAGE_SKIPPED)

    results = []
    rows = [[over] + list(config.metrics)]

    with manifest.stage("points"):
        for value, point in points:
            name = "{}-{}".format(over, value)
            point = point.replace(output_dir=os.path.join(config.output_dir, name))
            _logger.info("sweep point %s = %s", over, value)
            result = run_experiment(point, clean_params)
            results.append((value, result))
            rows.append(
                [value] + ["{:.17g}".format(result.report[m]) for m in config.metrics]
            )

        manifest.write_csv("sweep.csv", rows)

    manifest.write()
    return results


def _format_number(v):
    return "{:g}".format(v)


def run_defense(
    config: baddiff_config.ExperimentConfig,
    budgets: typing.Optional[typing.Sequence[float]] = None,
    lrs: typing.Optional[typing.Sequence[float]] = None,
    params: typing.Optional[baddiff_denoiser.DenoiserParams] = None,
) -> typing.Dict[typing.Tuple[float, float], typing.Optional[baddiff_defense.AnpResult]]:
    """Weight-perturbation search for every (budget, lr) pair.

    Without `params` the backdoored model comes from a full experiment
    run.  The defender's clean data is the held-out set.  Results go to
    `<output_dir>/defense`; a pair whose ascent diverges maps to None.
    """
    baddiff_utils._check_type(config, baddiff_config.ExperimentConfig)
    budgets = config.defense.budgets if budgets is None else tuple(budgets)
    lrs = config.defense.lrs if lrs is None else tuple(lrs)

    if params is None:
        params = run_experiment(config).params

    directory = os.path.join(config.output_dir, "defense")
    os.makedirs(directory, exist_ok=True)
    ctx = _Context(config)
    manifest = _Manifest(directory, config, ["data", "defense"])
    defense = config.defense

    with manifest.stage("data"):
        heldout = ctx.heldout()

    results = {}
    summary = [["budget", "lr", "best_epoch", "best_mse", "final_mse", "status"]]

    with manifest.stage("defense"):
        for budget in budgets:
            for lr in lrs:
                tag = "b{}_lr{}".format(_format_number(budget), _format_number(lr))
                rng = baddiff_config.seed_stream(config.seed, "defense")

                try:
                    res = baddiff_defense.anp_search(
                        params,
                        heldout,
                        ctx.schedule,
                        budget,
                        lr,
                        defense.epochs,
                        rng,
                        target=ctx.poison.target,
                        granularity=defense.granularity,
                        batch_size=defense.batch_size,
                        num_reconstructions=defense.num_reconstructions,
                        sampler=config.sampler,
                    )
                except baddiff_error.NonFiniteError as exc:
                    _logger.warning("defense %s diverged: %s", tag, exc)
                    results[(budget, lr)] = None
                    summary.append([budget, lr, "", "", "", "diverged"])
                    continue

                results[(budget, lr)] = res
                manifest.write_csv("anp_{}.csv".format(tag), res.to_csv_rows())

                if res.reconstructions:
                    manifest.set_chain_seeds(tag, res.reconstruction_seeds)
                    best = res.best_epoch
                    manifest.write_tensors(
                        "anp_{}_best.bdtf".format(tag), res.reconstructions[best - 1]
                    )
                    summary.append(
                        [
                            budget,
                            lr,
                            best,
                            "{:.17g}".format(res.mse[best - 1]),
                            "{:.17g}".format(res.mse[-1]),
                            "ok",
                        ]
                    )
                else:
                    summary.append([budget, lr, "", "", "", "ok"])

        manifest.write_csv("anp_summary.csv", summary)

    manifest.write()
    return results
