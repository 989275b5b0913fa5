# SPDX-License-Identifier: MIT
#
# Copyright (c) 2026 The baddiff authors

import dataclasses
import enum
import typing
from collections import namedtuple

import numpy as np
import tqdm

from baddiff import denoiser as baddiff_denoiser
from baddiff import diffusion as baddiff_diffusion
from baddiff import error as baddiff_error
from baddiff import logging as baddiff_logging
from baddiff import poisoning as baddiff_poisoning
from baddiff import schedule as baddiff_schedule
from baddiff import utils as baddiff_utils

_logger = baddiff_logging._get_logger(__name__)

DEFAULT_LR = 2e-4
DEFAULT_BATCH_SIZE_VECTOR = 128
DEFAULT_BATCH_SIZE_IMAGE = 32
DEFAULT_FINETUNE_EPOCHS = 50
DEFAULT_SCRATCH_EPOCHS = 400


class TrainMode(enum.Enum):
    FINETUNE = "finetune"
    SCRATCH = "scratch"


@dataclasses.dataclass(frozen=True)
class TrainConfig:
    epochs: int = DEFAULT_FINETUNE_EPOCHS
    batch_size: int = DEFAULT_BATCH_SIZE_VECTOR
    lr: float = DEFAULT_LR
    beta1: float = 0.9
    beta2: float = 0.999
    adam_eps: float = 1e-8
    seed: int = 0
    mode: TrainMode = TrainMode.FINETUNE
    checkpoint_in: typing.Optional[str] = None
    checkpoint_every: int = 0

    def __post_init__(self):
        baddiff_utils._check_non_negative_int(self.epochs, "epoch count")
        baddiff_utils._check_positive_int(self.batch_size, "batch size")
        baddiff_utils._check_int(self.seed)
        baddiff_utils._check_non_negative_int(self.checkpoint_every, "checkpoint interval")
        baddiff_utils._check_type(self.mode, TrainMode)

        baddiff_utils._check_non_negative_real(self.lr, "learning rate")

        for name in ("beta1", "beta2"):
            value = baddiff_utils._check_real(getattr(self, name))

            if not 0.0 <= value < 1.0:
                raise baddiff_error.ParameterError(
                    "Adam {} must be within [0, 1) (got {})".format(name, value)
                )

        baddiff_utils._check_positive_real(self.adam_eps, "Adam epsilon")

        if self.checkpoint_in is not None and self.mode is not TrainMode.FINETUNE:
            raise baddiff_error.ParameterError("an input checkpoint only applies to fine-tuning")

    def to_dict(self) -> dict:
        out = dataclasses.asdict(self)
        out["mode"] = self.mode.value
        return out

    @classmethod
    def from_dict(cls, d: typing.Mapping) -> "TrainConfig":
        d = dict(d)

        if "mode" in d:
            d["mode"] = TrainMode(d["mode"])

        return cls(**d)


class AdamState:
    """First and second moment estimates, one pair of arrays per parameter array."""

    def __init__(
        self,
        m,
        v,
        step: int = 0,
        beta1: float = 0.9,
        beta2: float = 0.999,
        eps: float = 1e-8,
    ):
        self._m = [np.asarray(a, dtype=np.float64) for a in m]
        self._v = [np.asarray(a, dtype=np.float64) for a in v]
        self._step = baddiff_utils._check_non_negative_int(step, "Adam step")
        self._beta1 = baddiff_utils._check_real(beta1)
        self._beta2 = baddiff_utils._check_real(beta2)
        self._eps = baddiff_utils._check_real(eps)

    @classmethod
    def zeros(cls, params, beta1=0.9, beta2=0.999, eps=1e-8) -> "AdamState":
        arrays = params.arrays() if isinstance(params, baddiff_denoiser.DenoiserParams) else params
        return cls(
            [np.zeros_like(a) for a in arrays],
            [np.zeros_like(a) for a in arrays],
            0,
            beta1,
            beta2,
            eps,
        )

    @property
    def m(self) -> typing.List[np.ndarray]:
        return self._m

    @property
    def v(self) -> typing.List[np.ndarray]:
        return self._v

    @property
    def step(self) -> int:
        return self._step

    @property
    def beta1(self) -> float:
        return self._beta1

    @property
    def beta2(self) -> float:
        return self._beta2

    @property
    def eps(self) -> float:
        return self._eps


def _adam_arrays(state, arrays, grads, lr):
    if len(arrays) != len(state.m) or len(grads) != len(arrays):
        raise baddiff_error.ShapeError("Adam state, parameters and gradients differ in length")

    step = state.step + 1
    bc1 = 1.0 - state.beta1**step
    bc2 = 1.0 - state.beta2**step
    new_m, new_v, new_arrays = [], [], []

    for p, g, m, v in zip(arrays, grads, state.m, state.v):
        if not (p.shape == g.shape == m.shape == v.shape):
            raise baddiff_error.ShapeError(
                "Adam shapes differ: param {}, grad {}, moments {}".format(
                    p.shape, g.shape, m.shape
                )
            )

        m = state.beta1 * m + (1.0 - state.beta1) * g
        v = state.beta2 * v + (1.0 - state.beta2) * (g * g)
        denom = np.sqrt(v / bc2) + state.eps
        new_arrays.append(p - (lr / bc1) * m / denom)
        new_m.append(m)
        new_v.append(v)

    return AdamState(new_m, new_v, step, state.beta1, state.beta2, state.eps), new_arrays


def adam_step(state: AdamState, params, grads, lr: float):
    """One bias-corrected Adam update; returns a new state and new parameters.

    `params` and `grads` are either `DenoiserParams` or matching lists of
    arrays.  Inputs are never modified.
    """
    baddiff_utils._check_type(state, AdamState)
    lr = baddiff_utils._check_non_negative_real(lr, "learning rate")

    if isinstance(params, baddiff_denoiser.DenoiserParams):
        state, arrays = _adam_arrays(state, params.arrays(), grads.arrays(), lr)
        return state, baddiff_denoiser.DenoiserParams.from_arrays(params.architecture, arrays)

    return _adam_arrays(state, list(params), list(grads), lr)


CheckpointCallback = typing.Callable[[int, baddiff_denoiser.DenoiserParams], None]

Batch = namedtuple("Batch", ["samples", "poisoned"])


def draw_timesteps_and_noise(rng: np.random.Generator, s, batch_shape):
    """One (t, ε) draw per batch element, t first."""
    t = rng.integers(1, s.T + 1, size=batch_shape[0])
    eps = rng.standard_normal(batch_shape)
    return t, eps


def build_training_pairs(x, poisoned, spec, s, t, eps):
    """Model inputs and regression targets for both loss branches."""
    inputs = np.empty_like(x)
    targets = np.empty_like(x)
    clean = ~poisoned

    if clean.any():
        inputs[clean] = baddiff_diffusion.forward_marginal_clean(s, x[clean], t[clean], eps[clean])
        targets[clean] = eps[clean]

    if poisoned.any():
        if spec is None:
            raise baddiff_error.ParameterError("poisoned batch elements need a poison spec")

        inputs[poisoned], targets[poisoned] = baddiff_poisoning.poisoned_training_example(
            x[poisoned], spec, s, t[poisoned], eps[poisoned]
        )

    return inputs, targets


def poisoned_loss_batch(
    params: baddiff_denoiser.DenoiserParams,
    batch: Batch,
    spec: typing.Optional[baddiff_poisoning.PoisonSpec],
    s: baddiff_schedule.NoiseSchedule,
    rng: np.random.Generator,
) -> typing.Tuple[float, baddiff_denoiser.DenoiserParams]:
    x = baddiff_utils._as_tensor(batch.samples, "batch samples")
    poisoned = np.asarray(batch.poisoned, dtype=bool)

    if x.ndim == 0 or x.shape[0] == 0:
        raise baddiff_error.ParameterError("empty batch")

    if poisoned.shape != (x.shape[0],):
        raise baddiff_error.ShapeError("one membership flag per batch element is required")

    t, eps = draw_timesteps_and_noise(rng, s, x.shape)
    inputs, targets = build_training_pairs(x, poisoned, spec, s, t, eps)
    return baddiff_denoiser.loss_gradient(params, inputs, targets, t)


class TrainHistory:
    def __init__(self):
        self._epoch_losses = []
        self._steps = 0

    @property
    def epoch_losses(self) -> typing.List[float]:
        return self._epoch_losses

    @property
    def steps(self) -> int:
        return self._steps

    def _add_epoch(self, mean_loss, steps):
        self._epoch_losses.append(float(mean_loss))
        self._steps += steps

    def to_csv_rows(self) -> typing.List[typing.List]:
        return [["epoch", "mean_loss"]] + [
            [i + 1, "{:.17g}".format(loss)] for i, loss in enumerate(self._epoch_losses)
        ]


def _training_pool(dataset, spec):
    if spec is None or spec.rate == 0.0:
        return dataset, np.zeros(dataset.shape[0], dtype=bool)

    D_p, D_c = baddiff_poisoning.split_dataset(dataset, spec)
    _logger.info("poisoned split: %d poisoned, %d clean samples", D_p.shape[0], D_c.shape[0])
    samples = np.concatenate([D_c, D_p])
    flags = np.concatenate([np.zeros(D_c.shape[0], dtype=bool), np.ones(D_p.shape[0], dtype=bool)])
    return samples, flags


def train(
    config: TrainConfig,
    dataset,
    spec: typing.Optional[baddiff_poisoning.PoisonSpec],
    s: baddiff_schedule.NoiseSchedule,
    init_params: baddiff_denoiser.DenoiserParams,
    on_checkpoint: typing.Optional[CheckpointCallback] = None,
) -> typing.Tuple[baddiff_denoiser.DenoiserParams, TrainHistory]:
    """Minimise the combined clean/poisoned loss with Adam.

    The poison split is drawn once, before the first epoch.  Each epoch
    visits the training pool in a fresh order drawn from `config.seed`.
    """
    baddiff_utils._check_type(config, TrainConfig)
    baddiff_utils._check_type(init_params, baddiff_denoiser.DenoiserParams)
    dataset = baddiff_utils._as_tensor(dataset, "dataset")

    if dataset.ndim < 1 or dataset.shape[0] < 1:
        raise baddiff_error.ParameterError("dataset must contain at least one sample")

    samples, flags = _training_pool(dataset, spec)
    params = init_params.copy()
    state = AdamState.zeros(params, config.beta1, config.beta2, config.adam_eps)
    rng = np.random.default_rng(config.seed)
    history = TrainHistory()
    n = samples.shape[0]
    step = 0
    epochs = tqdm.trange(
        config.epochs, desc="train", unit="epoch", disable=not baddiff_logging._progress_enabled()
    )

    for epoch in epochs:
        order = rng.permutation(n)
        losses = []

        for start in range(0, n, config.batch_size):
            idx = order[start : start + config.batch_size]
            loss, grads = poisoned_loss_batch(
                params, Batch(samples[idx], flags[idx]), spec, s, rng
            )
            step += 1

            if not np.isfinite(loss) or not np.all(np.isfinite(grads.flat())):
                _logger.error("non-finite loss at step %d (lr=%g)", step, config.lr)
                raise baddiff_error.NonFiniteError(
                    "non-finite training loss", step=step, lr=config.lr, epoch=epoch + 1
                )

            state, params = adam_step(state, params, grads, config.lr)
            losses.append(loss)

        history._add_epoch(np.mean(losses), len(losses))
        epochs.set_postfix(loss="{:.4g}".format(history.epoch_losses[-1]))
        _logger.info(
            "epoch %d/%d: mean loss %.6g", epoch + 1, config.epochs, history.epoch_losses[-1]
        )

        if on_checkpoint is not None and config.checkpoint_every:
            if (epoch + 1) % config.checkpoint_every == 0:
                on_checkpoint(epoch + 1, params)

    return params, history


def pretrain_clean(
    config: TrainConfig,
    dataset,
    s: baddiff_schedule.NoiseSchedule,
    init_params: baddiff_denoiser.DenoiserParams,
) -> typing.Tuple[baddiff_denoiser.DenoiserParams, TrainHistory]:
    """Plain DDPM training; produces the warm start for fine-tuning."""
    return train(config, dataset, None, s, init_params)
