# SPDX-License-Identifier: MIT
#
# Copyright (c) 2026 The baddiff authors

# Adversarial weight perturbation: multipliers on every weight and bias,
# boxed to [1 − b, 1 + b], pushed by projected Adam ascent on the clean
# denoising loss.  Samples drawn from the perturbed model after each
# epoch expose what the network falls back to generating.

import enum
import typing

import numpy as np
import tqdm

from baddiff import denoiser as baddiff_denoiser
from baddiff import diffusion as baddiff_diffusion
from baddiff import error as baddiff_error
from baddiff import logging as baddiff_logging
from baddiff import metrics as baddiff_metrics
from baddiff import sampling as baddiff_sampling
from baddiff import schedule as baddiff_schedule
from baddiff import training as baddiff_training
from baddiff import utils as baddiff_utils

_logger = baddiff_logging._get_logger(__name__)

DEFAULT_EPOCHS = 5
DEFAULT_NUM_RECONSTRUCTIONS = 256
DEFAULT_BATCH_SIZE = 128


class PerturbationGranularity(enum.Enum):
    # one multiplier per weight and per bias
    WEIGHT = "weight"
    # one weight multiplier and one bias multiplier per output unit
    NEURON = "neuron"


def _multiplier_shapes(params, granularity):
    shapes = []

    for w, b in zip(params.weights, params.biases):
        if granularity is PerturbationGranularity.WEIGHT:
            shapes += [w.shape, b.shape]
        else:
            shapes += [(w.shape[0],), b.shape]

    return shapes


class PerturbationState:
    def __init__(
        self,
        multipliers,
        budget: float,
        granularity: PerturbationGranularity = PerturbationGranularity.WEIGHT,
        adam: typing.Optional[baddiff_training.AdamState] = None,
    ):
        baddiff_utils._check_type(granularity, PerturbationGranularity)
        self._budget = baddiff_utils._check_non_negative_real(budget, "perturbation budget")
        self._granularity = granularity
        self._multipliers = [baddiff_utils._as_tensor(m, "multiplier") for m in multipliers]

        if len(self._multipliers) % 2:
            raise baddiff_error.ShapeError("expecting weight and bias multipliers per layer")

        lo, hi = self.bounds

        if any(np.any((m < lo) | (m > hi)) for m in self._multipliers):
            raise baddiff_error.ParameterError(
                "multipliers must lie within [{}, {}]".format(lo, hi)
            )

        if adam is None:
            adam = baddiff_training.AdamState.zeros(self._multipliers)

        self._adam = adam

    @classmethod
    def identity(
        cls,
        params: baddiff_denoiser.DenoiserParams,
        budget: float,
        granularity: PerturbationGranularity = PerturbationGranularity.WEIGHT,
    ) -> "PerturbationState":
        baddiff_utils._check_type(params, baddiff_denoiser.DenoiserParams)
        ones = [np.ones(shape) for shape in _multiplier_shapes(params, granularity)]
        return cls(ones, budget, granularity)

    @property
    def budget(self) -> float:
        return self._budget

    @property
    def bounds(self) -> typing.Tuple[float, float]:
        return 1.0 - self._budget, 1.0 + self._budget

    @property
    def granularity(self) -> PerturbationGranularity:
        return self._granularity

    @property
    def multipliers(self) -> typing.List[np.ndarray]:
        """Multiplier arrays in parameter declaration order."""
        return self._multipliers

    @property
    def weight_multipliers(self) -> typing.List[np.ndarray]:
        return self._multipliers[0::2]

    @property
    def bias_multipliers(self) -> typing.List[np.ndarray]:
        return self._multipliers[1::2]

    @property
    def adam(self) -> baddiff_training.AdamState:
        return self._adam

    def _check_params(self, params):
        baddiff_utils._check_type(params, baddiff_denoiser.DenoiserParams)
        expected = _multiplier_shapes(params, self._granularity)

        if [m.shape for m in self._multipliers] != expected:
            raise baddiff_error.ShapeError("multiplier shapes do not match the parameters")

    def _expand(self, m, like):
        if self._granularity is PerturbationGranularity.NEURON and like.ndim == 2:
            return m[:, None]

        return m

    def apply(self, params: baddiff_denoiser.DenoiserParams) -> baddiff_denoiser.DenoiserParams:
        """Effective parameters δ̄ ⊙ W and ξ̄ ⊙ b."""
        self._check_params(params)
        arrays = [a * self._expand(m, a) for a, m in zip(params.arrays(), self._multipliers)]
        return baddiff_denoiser.DenoiserParams.from_arrays(params.architecture, arrays)

    def multiplier_gradient(self, params, effective_grads) -> typing.List[np.ndarray]:
        """Chain rule from effective-parameter gradients to multiplier gradients."""
        self._check_params(params)
        grads = []

        for a, g in zip(params.arrays(), effective_grads.arrays()):
            prod = a * g

            if self._granularity is PerturbationGranularity.NEURON and a.ndim == 2:
                prod = prod.sum(axis=1)

            grads.append(prod)

        return grads

    def ascent_step(self, params, effective_grads, lr: float) -> "PerturbationState":
        """Adam step up the loss, then projection onto the budget box."""
        grads = self.multiplier_gradient(params, effective_grads)
        adam, moved = baddiff_training.adam_step(
            self._adam, self._multipliers, [-g for g in grads], lr
        )
        lo, hi = self.bounds
        projected = [np.clip(m, lo, hi) for m in moved]
        return PerturbationState(projected, self._budget, self._granularity, adam)


def perturbed_forward(
    params: baddiff_denoiser.DenoiserParams, pert: PerturbationState, x_t, t
) -> np.ndarray:
    baddiff_utils._check_type(pert, PerturbationState)
    return baddiff_denoiser.predict_noise(pert.apply(params), x_t, t)


def reconstruction_mse(samples, y) -> float:
    return baddiff_metrics.target_mse(samples, y)


class AnpResult:
    def __init__(self, state, reconstructions, losses, mse, reconstruction_seeds):
        self._state = state
        self._reconstructions = reconstructions
        self._losses = losses
        self._mse = mse
        self._reconstruction_seeds = reconstruction_seeds

    @property
    def state(self) -> PerturbationState:
        return self._state

    @property
    def reconstructions(self) -> typing.List[np.ndarray]:
        return self._reconstructions

    @property
    def losses(self) -> typing.List[float]:
        """Mean clean loss of the perturbed model over each epoch."""
        return self._losses

    @property
    def mse(self) -> typing.Optional[typing.List[float]]:
        return self._mse

    @property
    def reconstruction_seeds(self) -> typing.List[int]:
        return self._reconstruction_seeds

    @property
    def best_epoch(self) -> typing.Optional[int]:
        # 1-based; None without a reference target
        if not self._mse:
            return None

        return int(np.argmin(self._mse)) + 1

    def to_csv_rows(self) -> typing.List[typing.List]:
        rows = [["epoch", "ascent_loss", "reconstruction_mse"]]

        for i, loss in enumerate(self._losses):
            mse = "" if self._mse is None else "{:.17g}".format(self._mse[i])
            rows.append([i + 1, "{:.17g}".format(loss), mse])

        return rows


def anp_search(
    params: baddiff_denoiser.DenoiserParams,
    clean_batch_source,
    s: baddiff_schedule.NoiseSchedule,
    budget: float,
    lr: float,
    epochs: int,
    rng: np.random.Generator,
    target=None,
    granularity: PerturbationGranularity = PerturbationGranularity.WEIGHT,
    batch_size: int = DEFAULT_BATCH_SIZE,
    num_reconstructions: int = DEFAULT_NUM_RECONSTRUCTIONS,
    sampler: typing.Optional[baddiff_sampling.SamplerConfig] = None,
) -> AnpResult:
    """Search multipliers that maximise the clean loss within the budget.

    `clean_batch_source` is an array of clean samples, visited in a fresh
    order every epoch.  After each epoch `num_reconstructions` chains are
    sampled from the perturbed model from clean initial noise; the chain
    seeds are drawn once, so every epoch reuses them.
    """
    baddiff_utils._check_type(params, baddiff_denoiser.DenoiserParams)
    data = baddiff_utils._as_tensor(clean_batch_source, "clean samples")
    epochs = baddiff_utils._check_non_negative_int(epochs, "epoch count")
    lr = baddiff_utils._check_non_negative_real(lr, "learning rate")
    batch_size = baddiff_utils._check_positive_int(batch_size, "batch size")

    if data.ndim < 1 or data.shape[0] < 1:
        raise baddiff_error.ParameterError("defense needs at least one clean sample")

    sampler = sampler if sampler is not None else baddiff_sampling.SamplerConfig()
    pert = PerturbationState.identity(params, budget, granularity)
    shape = params.architecture.data_shape
    seeds = baddiff_sampling.draw_chain_seeds(rng, num_reconstructions)
    reconstructions, losses = [], []
    mse = [] if target is not None else None
    step = 0
    bar = tqdm.trange(
        epochs, desc="anp", unit="epoch", disable=not baddiff_logging._progress_enabled()
    )

    for epoch in bar:
        order = rng.permutation(data.shape[0])
        epoch_losses = []

        for start in range(0, data.shape[0], batch_size):
            x0 = data[order[start : start + batch_size]]
            t, eps = baddiff_training.draw_timesteps_and_noise(rng, s, x0.shape)
            inputs = baddiff_diffusion.forward_marginal_clean(s, x0, t, eps)
            loss, grads = baddiff_denoiser.loss_gradient(pert.apply(params), inputs, eps, t)
            step += 1

            if not np.isfinite(loss):
                _logger.error("non-finite perturbed loss at step %d (lr=%g)", step, lr)
                raise baddiff_error.NonFiniteError(
                    "divergent perturbed loss", step=step, lr=lr, budget=pert.budget
                )

            pert = pert.ascent_step(params, grads, lr)
            epoch_losses.append(loss)

        losses.append(float(np.mean(epoch_losses)))
        batch = baddiff_sampling.sample_chains(
            pert.apply(params), s, shape, num_reconstructions, sampler, seeds
        )
        reconstructions.append(batch)

        if mse is not None:
            mse.append(reconstruction_mse(batch, target))

        _logger.info(
            "anp epoch %d/%d (budget %g, lr %g): loss %.6g%s",
            epoch + 1,
            epochs,
            pert.budget,
            lr,
            losses[-1],
            "" if mse is None else ", reconstruction MSE {:.6g}".format(mse[-1]),
        )

    return AnpResult(pert, reconstructions, losses, mse, seeds)
