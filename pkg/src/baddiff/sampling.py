# SPDX-License-Identifier: MIT
#
# Copyright (c) 2026 The baddiff authors

# Reverse-process samplers.
#
# Every sampler accepts either a single latent or a batch of latents.
# The `rng` argument is either one generator shared by the whole batch or
# a sequence of generators, one per batch row; the latter gives every
# chain its own noise stream.

import concurrent.futures
import dataclasses
import enum
import typing

import numpy as np
import tqdm

from baddiff import denoiser as baddiff_denoiser
from baddiff import error as baddiff_error
from baddiff import logging as baddiff_logging
from baddiff import poisoning as baddiff_poisoning
from baddiff import schedule as baddiff_schedule
from baddiff import utils as baddiff_utils

_logger = baddiff_logging._get_logger(__name__)

DEFAULT_NUM_SAMPLES = 512

# Chains are sampled in blocks of this many rows; the block layout only
# depends on the chain count.
_CHAIN_BLOCK = 64


class SamplerKind(enum.Enum):
    ANCESTRAL = "ancestral"
    CLIPPED = "clipped"
    DDIM = "ddim"


class SigmaRule(enum.Enum):
    BETA = "beta"
    BETA_TILDE = "beta_tilde"


@dataclasses.dataclass(frozen=True)
class SamplerConfig:
    kind: SamplerKind = SamplerKind.ANCESTRAL
    sigma: SigmaRule = SigmaRule.BETA
    ddim_steps: typing.Optional[int] = None
    clip_lo: float = -1.0
    clip_hi: float = 1.0
    # Subtract the clipped x̃_0 term instead of adding it.
    literal_minus: bool = False
    seed: int = 0
    num_samples: int = DEFAULT_NUM_SAMPLES

    def __post_init__(self):
        baddiff_utils._check_type(self.kind, SamplerKind)
        baddiff_utils._check_type(self.sigma, SigmaRule)
        baddiff_utils._check_bool(self.literal_minus)
        baddiff_utils._check_int(self.seed)
        baddiff_utils._check_positive_int(self.num_samples, "sample count")

        if self.ddim_steps is not None:
            baddiff_utils._check_positive_int(self.ddim_steps, "DDIM step count")

        if not baddiff_utils._check_real(self.clip_lo) < baddiff_utils._check_real(self.clip_hi):
            raise baddiff_error.ParameterError(
                "clip bounds must satisfy lo < hi (got [{}, {}])".format(self.clip_lo, self.clip_hi)
            )

    def to_dict(self) -> dict:
        out = dataclasses.asdict(self)
        out["kind"] = self.kind.value
        out["sigma"] = self.sigma.value
        return out

    @classmethod
    def from_dict(cls, d: typing.Mapping) -> "SamplerConfig":
        d = dict(d)

        if "kind" in d:
            d["kind"] = SamplerKind(d["kind"])

        if "sigma" in d:
            d["sigma"] = SigmaRule(d["sigma"])

        return cls(**d)


def _draw_normal(rng, shape):
    if isinstance(rng, np.random.Generator):
        return rng.standard_normal(shape)

    rngs = list(rng)

    if len(rngs) != shape[0]:
        raise baddiff_error.ShapeError(
            "{} generators given for a batch of {} chains".format(len(rngs), shape[0])
        )

    return np.stack([r.standard_normal(shape[1:]) for r in rngs])


def init_latent(
    shape: typing.Sequence[int],
    trigger: typing.Optional[baddiff_poisoning.Trigger],
    rng: np.random.Generator,
) -> np.ndarray:
    """x_T ~ N(0, I), or N(g, I) when a trigger is given."""
    shape = tuple(int(n) for n in shape)
    z = _draw_normal(rng, shape)

    if trigger is None:
        return z

    baddiff_utils._check_type(trigger, baddiff_poisoning.Trigger)

    if shape != trigger.shape and shape[1:] != trigger.shape:
        raise baddiff_error.ShapeError(
            "latent shape {} does not match trigger shape {}".format(shape, trigger.shape)
        )

    return z + trigger.pattern


def _check_params(params, s, cfg, kind):
    baddiff_utils._check_type(params, baddiff_denoiser.DenoiserParams)
    baddiff_utils._check_type(s, baddiff_schedule.NoiseSchedule)
    baddiff_utils._check_type(cfg, SamplerConfig)

    if cfg.kind is not kind:
        raise baddiff_error.ParameterError(
            "sampler configured for `{}`, not `{}`".format(cfg.kind.value, kind.value)
        )


def _check_finite(x, t):
    if not np.all(np.isfinite(x)):
        _logger.error("non-finite latent at step t=%d", t)
        raise baddiff_error.NonFiniteError("non-finite latent", step=t)


def _sigma(s, cfg, t):
    variances = s.betas if cfg.sigma is SigmaRule.BETA else s.beta_tildes
    return float(np.sqrt(variances[t - 1]))


def estimate_x0(
    params: baddiff_denoiser.DenoiserParams, s: baddiff_schedule.NoiseSchedule, x_t, t: int
) -> np.ndarray:
    """Unclipped x̃_0 = (x_t − √(1 − ᾱ_t)·ε_θ(x_t, t)) / √ᾱ_t."""
    t = baddiff_utils._check_timestep(t, s.T)
    x_t = baddiff_utils._as_tensor(x_t, "x_t")
    eps = baddiff_denoiser.predict_noise(params, x_t, t)
    return (x_t - s.deltas[t - 1] * eps) / np.sqrt(s.alpha_bars[t - 1])


def ancestral_sample(
    params: baddiff_denoiser.DenoiserParams,
    s: baddiff_schedule.NoiseSchedule,
    x_T,
    cfg: SamplerConfig,
    rng,
) -> np.ndarray:
    _check_params(params, s, cfg, SamplerKind.ANCESTRAL)
    x = baddiff_utils._as_tensor(x_T, "x_T").copy()

    for t in range(s.T, 0, -1):
        eps = baddiff_denoiser.predict_noise(params, x, t)
        i = t - 1
        x = (x - (s.betas[i] / s.deltas[i]) * eps) / np.sqrt(s.alphas[i])

        if t > 1:
            x = x + _sigma(s, cfg, t) * _draw_normal(rng, x.shape)

        _check_finite(x, t)

    return x


def clipped_sample(
    params: baddiff_denoiser.DenoiserParams,
    s: baddiff_schedule.NoiseSchedule,
    x_T,
    cfg: SamplerConfig,
    rng,
) -> np.ndarray:
    """Posterior-mean steps in x0-form with x̃_0 clipped to [lo, hi]."""
    _check_params(params, s, cfg, SamplerKind.CLIPPED)
    x = baddiff_utils._as_tensor(x_T, "x_T").copy()
    sign = -1.0 if cfg.literal_minus else 1.0

    for t in range(s.T, 0, -1):
        i = t - 1
        x0 = np.clip(estimate_x0(params, s, x, t), cfg.clip_lo, cfg.clip_hi)
        denom = 1.0 - s.alpha_bars[i]
        c_xt = np.sqrt(s.alphas[i]) * (1.0 - s.alpha_bars_prev[i]) / denom
        c_x0 = np.sqrt(s.alpha_bars_prev[i]) * s.betas[i] / denom
        x = c_xt * x + sign * c_x0 * x0

        if t > 1:
            x = x + _sigma(s, cfg, t) * _draw_normal(rng, x.shape)

        _check_finite(x, t)

    return x


def ddim_timesteps(T: int, steps: typing.Optional[int] = None) -> np.ndarray:
    """Evenly spaced increasing subsequence of 1..T of length `steps`, ending at T."""
    T = baddiff_utils._check_positive_int(T, "step count")
    steps = T if steps is None else baddiff_utils._check_positive_int(steps, "DDIM step count")

    if steps > T:
        raise baddiff_error.ParameterError(
            "DDIM step count {} exceeds the schedule length {}".format(steps, T)
        )

    if steps == 1:
        return np.array([T], dtype=np.int64)

    return np.round(np.linspace(1, T, steps)).astype(np.int64)


def _check_subsequence(taus, T):
    taus = np.asarray(taus)

    if (
        taus.ndim != 1
        or taus.size == 0
        or not np.issubdtype(taus.dtype, np.integer)
        or taus[0] < 1
        or taus[-1] > T
        or np.any(np.diff(taus) <= 0)
    ):
        raise baddiff_error.ParameterError(
            "DDIM timesteps must be a strictly increasing subsequence of 1..{}".format(T)
        )

    return taus


def ddim_sample(
    params: baddiff_denoiser.DenoiserParams,
    s: baddiff_schedule.NoiseSchedule,
    x_T,
    cfg: SamplerConfig,
    timesteps=None,
) -> np.ndarray:
    """Deterministic DDIM (η = 0) over an increasing subsequence of 1..T."""
    _check_params(params, s, cfg, SamplerKind.DDIM)
    taus = ddim_timesteps(s.T, cfg.ddim_steps) if timesteps is None else timesteps
    taus = _check_subsequence(taus, s.T)
    x = baddiff_utils._as_tensor(x_T, "x_T").copy()

    for k in range(taus.size - 1, -1, -1):
        t = int(taus[k])
        eps = baddiff_denoiser.predict_noise(params, x, t)
        x0 = (x - s.deltas[t - 1] * eps) / np.sqrt(s.alpha_bars[t - 1])
        ab_prev = s.alpha_bar_at(int(taus[k - 1])) if k else 1.0
        x = np.sqrt(ab_prev) * x0 + np.sqrt(1.0 - ab_prev) * eps
        _check_finite(x, t)

    return x


def sample(
    params: baddiff_denoiser.DenoiserParams,
    s: baddiff_schedule.NoiseSchedule,
    x_T,
    cfg: SamplerConfig,
    rng,
) -> np.ndarray:
    baddiff_utils._check_type(cfg, SamplerConfig)

    if cfg.kind is SamplerKind.ANCESTRAL:
        return ancestral_sample(params, s, x_T, cfg, rng)
    elif cfg.kind is SamplerKind.CLIPPED:
        return clipped_sample(params, s, x_T, cfg, rng)

    return ddim_sample(params, s, x_T, cfg)


def _sample_block(params, s, shape, cfg, seeds, trigger):
    rngs = [np.random.default_rng(int(seed)) for seed in seeds]
    x_T = init_latent((len(rngs),) + shape, trigger, rngs)
    return sample(params, s, x_T, cfg, rngs)


def sample_chains(
    params: baddiff_denoiser.DenoiserParams,
    s: baddiff_schedule.NoiseSchedule,
    shape: typing.Sequence[int],
    n: int,
    cfg: SamplerConfig,
    chain_seeds: typing.Sequence[int],
    trigger: typing.Optional[baddiff_poisoning.Trigger] = None,
) -> np.ndarray:
    """Run `n` independent chains, chain i seeded with `chain_seeds[i]`.

    Blocks of chains run on `BADDIFF_NUM_THREADS` worker threads; the
    result rows are in chain order.
    """
    n = baddiff_utils._check_positive_int(n, "chain count")
    shape = tuple(int(d) for d in shape)

    if len(chain_seeds) != n:
        raise baddiff_error.ParameterError(
            "expecting {} chain seeds (got {})".format(n, len(chain_seeds))
        )

    blocks = [chain_seeds[i : i + _CHAIN_BLOCK] for i in range(0, n, _CHAIN_BLOCK)]
    workers = baddiff_utils._num_threads()
    _logger.debug("sampling %d chains in %d blocks on %d threads", n, len(blocks), workers)

    with concurrent.futures.ThreadPoolExecutor(max_workers=workers) as executor:
        futures = [
            executor.submit(_sample_block, params, s, shape, cfg, block, trigger)
            for block in blocks
        ]
        results = [
            f.result()
            for f in tqdm.tqdm(
                futures,
                desc="sample",
                unit="block",
                disable=not baddiff_logging._progress_enabled(),
            )
        ]

    return np.concatenate(results)


def draw_chain_seeds(rng: np.random.Generator, n: int) -> typing.List[int]:
    """`n` per-chain seeds drawn from a sampling stream."""
    return [int(seed) for seed in rng.integers(0, 2**63 - 1, size=n)]


def to_display(x) -> np.ndarray:
    """Map model space [−1, 1] to display space [0, 1], clamping."""
    return np.clip((np.asarray(x, dtype=np.float64) + 1.0) / 2.0, 0.0, 1.0)
