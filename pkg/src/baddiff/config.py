# SPDX-License-Identifier: MIT
#
# Copyright (c) 2026 The baddiff authors

import dataclasses
import hashlib
import json
import os
import typing

import numpy as np

from baddiff import data as baddiff_data
from baddiff import defense as baddiff_defense
from baddiff import denoiser as baddiff_denoiser
from baddiff import error as baddiff_error
from baddiff import poisoning as baddiff_poisoning
from baddiff import sampling as baddiff_sampling
from baddiff import schedule as baddiff_schedule
from baddiff import training as baddiff_training
from baddiff import utils as baddiff_utils

DatasetSpec = baddiff_data.DatasetSpec

STREAM_NAMES = (
    "split",
    "init",
    "train",
    "pretrain",
    "sample",
    "defense",
    "data",
    "heldout",
    "metrics",
)

METRIC_NAMES = (
    "triggered_mse",
    "clean_mse",
    "triggered_ssim",
    "frechet",
    "mmd",
    "mmd_zscore",
)
DEFAULT_METRICS = ("triggered_mse", "clean_mse", "frechet", "mmd_zscore")
DEFAULT_OUTPUT_DIR = "baddiff-run"
DEFAULT_HELDOUT_COUNT = 1000


def _stream_key(name: str) -> int:
    digest = hashlib.sha256(name.encode("utf-8")).digest()
    return int.from_bytes(digest[:4], "little")


def _seed_sequence(master_seed, name):
    baddiff_utils._check_str(name)

    if name not in STREAM_NAMES:
        raise baddiff_error.ParameterError(
            "unknown seed stream `{}` (expecting one of {})".format(name, ", ".join(STREAM_NAMES))
        )

    master_seed = baddiff_utils._check_non_negative_int(master_seed, "master seed")
    return np.random.SeedSequence(master_seed, spawn_key=(_stream_key(name),))


def seed_stream(master_seed: int, name: str) -> np.random.Generator:
    """Generator of the named sub-stream of `master_seed`.

    Streams with different names are statistically independent and do
    not depend on the order they are requested in.
    """
    return np.random.Generator(np.random.PCG64(_seed_sequence(master_seed, name)))


def derive_seed(master_seed: int, name: str) -> int:
    # integer form, for APIs that take a seed rather than a generator
    state = _seed_sequence(master_seed, name).generate_state(2, np.uint32)
    return int(state[0]) | (int(state[1]) << 32)


def _build(cls, d, converters=None):
    if not isinstance(d, typing.Mapping):
        raise baddiff_error.ParameterError(
            "{} must be a JSON object (got {})".format(cls.__name__, type(d).__name__)
        )

    d = dict(d)
    known = {f.name for f in dataclasses.fields(cls)}
    unknown = sorted(set(d) - known)

    if unknown:
        raise baddiff_error.ParameterError(
            "unknown {} field(s): {}".format(cls.__name__, ", ".join(unknown))
        )

    for name, conv in (converters or {}).items():
        if name in d and d[name] is not None:
            try:
                d[name] = conv(d[name])
            except (TypeError, ValueError) as exc:
                if isinstance(exc, baddiff_error._Error):
                    raise

                raise baddiff_error.ParameterError(
                    "invalid {} field `{}`: {}".format(cls.__name__, name, exc)
                ) from None

    try:
        return cls(**d)
    except TypeError as exc:
        raise baddiff_error.ParameterError("invalid {}: {}".format(cls.__name__, exc)) from None


def _tuple_of(conv):
    return lambda seq: tuple(conv(v) for v in seq)


@dataclasses.dataclass(frozen=True)
class ScheduleConfig:
    T: int = baddiff_schedule.DESK_T
    beta_start: float = baddiff_schedule.DEFAULT_BETA_START
    beta_end: float = baddiff_schedule.DEFAULT_BETA_END

    def __post_init__(self):
        self.build()

    def build(self) -> baddiff_schedule.NoiseSchedule:
        return baddiff_schedule.make_linear_schedule(self.T, self.beta_start, self.beta_end)

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    @classmethod
    def from_dict(cls, d: typing.Mapping) -> "ScheduleConfig":
        return _build(cls, d)


@dataclasses.dataclass(frozen=True)
class PoisonConfig:
    trigger_kind: baddiff_poisoning.TriggerKind = baddiff_poisoning.TriggerKind.COORDINATE
    trigger_size: typing.Optional[int] = None
    trigger_value: typing.Optional[float] = None
    target_kind: baddiff_poisoning.TargetKind = baddiff_poisoning.TargetKind.POINT
    target_size: typing.Optional[int] = None
    rate: float = 0.1
    overlap: bool = False

    def __post_init__(self):
        baddiff_utils._check_type(self.trigger_kind, baddiff_poisoning.TriggerKind)
        baddiff_utils._check_type(self.target_kind, baddiff_poisoning.TargetKind)
        baddiff_utils._check_unit_interval(self.rate, "poison rate")
        baddiff_utils._check_bool(self.overlap)

    def build(self, shape: typing.Sequence[int], split_seed: int) -> baddiff_poisoning.PoisonSpec:
        trigger = baddiff_poisoning.make_trigger(
            self.trigger_kind, shape, self.trigger_size, self.trigger_value
        )
        target = baddiff_poisoning.make_target(self.target_kind, shape, trigger, self.target_size)
        return baddiff_poisoning.PoisonSpec(trigger, target, self.rate, split_seed, self.overlap)

    def to_dict(self) -> dict:
        out = dataclasses.asdict(self)
        out["trigger_kind"] = self.trigger_kind.value
        out["target_kind"] = self.target_kind.value
        return out

    @classmethod
    def from_dict(cls, d: typing.Mapping) -> "PoisonConfig":
        return _build(
            cls,
            d,
            {
                "trigger_kind": baddiff_poisoning.TriggerKind,
                "target_kind": baddiff_poisoning.TargetKind,
            },
        )


@dataclasses.dataclass(frozen=True)
class DefenseConfig:
    budgets: typing.Tuple[float, ...] = (1.0, 2.0, 4.0)
    lrs: typing.Tuple[float, ...] = (2e-4, 1e-4, 5e-5)
    epochs: int = baddiff_defense.DEFAULT_EPOCHS
    batch_size: int = baddiff_defense.DEFAULT_BATCH_SIZE
    num_reconstructions: int = baddiff_defense.DEFAULT_NUM_RECONSTRUCTIONS
    granularity: baddiff_defense.PerturbationGranularity = (
        baddiff_defense.PerturbationGranularity.WEIGHT
    )

    def __post_init__(self):
        for b in self.budgets:
            baddiff_utils._check_non_negative_real(b, "perturbation budget")

        for lr in self.lrs:
            baddiff_utils._check_non_negative_real(lr, "defense learning rate")

        baddiff_utils._check_non_negative_int(self.epochs, "defense epoch count")
        baddiff_utils._check_positive_int(self.batch_size, "defense batch size")
        baddiff_utils._check_positive_int(self.num_reconstructions, "reconstruction count")
        baddiff_utils._check_type(self.granularity, baddiff_defense.PerturbationGranularity)

    def to_dict(self) -> dict:
        out = dataclasses.asdict(self)
        out["budgets"] = list(self.budgets)
        out["lrs"] = list(self.lrs)
        out["granularity"] = self.granularity.value
        return out

    @classmethod
    def from_dict(cls, d: typing.Mapping) -> "DefenseConfig":
        return _build(
            cls,
            d,
            {
                "budgets": _tuple_of(float),
                "lrs": _tuple_of(float),
                "granularity": baddiff_defense.PerturbationGranularity,
            },
        )


def _default_pretrain():
    return baddiff_training.TrainConfig(
        epochs=baddiff_training.DEFAULT_SCRATCH_EPOCHS, mode=baddiff_training.TrainMode.SCRATCH
    )


@dataclasses.dataclass(frozen=True)
class ExperimentConfig:
    """Everything one experiment run depends on.

    The per-stage seeds inside `train`, `pretrain` and `sampler` are
    replaced by sub-streams of `seed` when the experiment runs.
    """

    dataset: DatasetSpec = dataclasses.field(default_factory=DatasetSpec)
    heldout_count: int = DEFAULT_HELDOUT_COUNT
    schedule: ScheduleConfig = dataclasses.field(default_factory=ScheduleConfig)
    hidden: typing.Tuple[int, ...] = baddiff_denoiser.DEFAULT_HIDDEN
    embed_dim: int = baddiff_denoiser.DEFAULT_EMBED_DIM
    poison: PoisonConfig = dataclasses.field(default_factory=PoisonConfig)
    pretrain: baddiff_training.TrainConfig = dataclasses.field(default_factory=_default_pretrain)
    train: baddiff_training.TrainConfig = dataclasses.field(
        default_factory=baddiff_training.TrainConfig
    )
    sampler: baddiff_sampling.SamplerConfig = dataclasses.field(
        default_factory=baddiff_sampling.SamplerConfig
    )
    defense: DefenseConfig = dataclasses.field(default_factory=DefenseConfig)
    metrics: typing.Tuple[str, ...] = DEFAULT_METRICS
    output_dir: str = DEFAULT_OUTPUT_DIR
    seed: int = 0

    def __post_init__(self):
        baddiff_utils._check_type(self.dataset, DatasetSpec)
        baddiff_utils._check_type(self.schedule, ScheduleConfig)
        baddiff_utils._check_type(self.poison, PoisonConfig)
        baddiff_utils._check_type(self.pretrain, baddiff_training.TrainConfig)
        baddiff_utils._check_type(self.train, baddiff_training.TrainConfig)
        baddiff_utils._check_type(self.sampler, baddiff_sampling.SamplerConfig)
        baddiff_utils._check_type(self.defense, DefenseConfig)
        baddiff_utils._check_positive_int(self.heldout_count, "held-out sample count")
        baddiff_utils._check_str(self.output_dir)
        baddiff_utils._check_non_negative_int(self.seed, "master seed")

        for name in self.metrics:
            if name not in METRIC_NAMES:
                raise baddiff_error.ParameterError(
                    "unknown metric `{}` (expecting one of {})".format(
                        name, ", ".join(METRIC_NAMES)
                    )
                )

        if "triggered_ssim" in self.metrics and not self.dataset.is_image:
            raise baddiff_error.UnsupportedModeError("SSIM needs an image dataset")

        if self.pretrain.checkpoint_in is not None:
            raise baddiff_error.ParameterError("clean pre-training starts from fresh parameters")

        path = self.train.checkpoint_in

        if path is not None and not os.path.isfile(path):
            raise baddiff_error.ParameterError("checkpoint `{}` does not exist".format(path))

        # builds (and validates) the architecture and the poison spec
        self.architecture()
        self.poison_spec()

    @property
    def data_shape(self) -> typing.Tuple[int, ...]:
        return self.dataset.data_shape

    def architecture(self) -> baddiff_denoiser.Architecture:
        mode = baddiff_denoiser.DenoiserMode.VECTOR

        if self.dataset.is_image:
            mode = baddiff_denoiser.DenoiserMode.IMAGE

        return baddiff_denoiser.Architecture(mode, self.data_shape, self.hidden, self.embed_dim)

    def poison_spec(self) -> baddiff_poisoning.PoisonSpec:
        return self.poison.build(self.data_shape, derive_seed(self.seed, "split"))

    def replace(self, **changes) -> "ExperimentConfig":
        return dataclasses.replace(self, **changes)

    def to_dict(self) -> dict:
        return {
            "dataset": self.dataset.to_dict(),
            "heldout_count": self.heldout_count,
            "schedule": self.schedule.to_dict(),
            "hidden": list(self.hidden),
            "embed_dim": self.embed_dim,
            "poison": self.poison.to_dict(),
            "pretrain": self.pretrain.to_dict(),
            "train": self.train.to_dict(),
            "sampler": self.sampler.to_dict(),
            "defense": self.defense.to_dict(),
            "metrics": list(self.metrics),
            "output_dir": self.output_dir,
            "seed": self.seed,
        }

    @classmethod
    def from_dict(cls, d: typing.Mapping) -> "ExperimentConfig":
        return _build(
            cls,
            d,
            {
                "dataset": DatasetSpec.from_dict,
                "schedule": ScheduleConfig.from_dict,
                "hidden": _tuple_of(int),
                "poison": PoisonConfig.from_dict,
                "pretrain": baddiff_training.TrainConfig.from_dict,
                "train": baddiff_training.TrainConfig.from_dict,
                "sampler": baddiff_sampling.SamplerConfig.from_dict,
                "defense": DefenseConfig.from_dict,
                "metrics": _tuple_of(str),
            },
        )

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=2) + "\n"

    def config_hash(self) -> str:
        canonical = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


def load_config(path: typing.Union[str, os.PathLike]) -> ExperimentConfig:
    try:
        with open(path, "r", encoding="utf-8") as f:
            raw = json.load(f)
    except json.JSONDecodeError as exc:
        raise baddiff_error.ParameterError(
            "`{}` is not valid JSON: {}".format(path, exc)
        ) from None

    return ExperimentConfig.from_dict(raw)
