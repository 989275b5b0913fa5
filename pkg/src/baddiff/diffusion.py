# SPDX-License-Identifier: MIT
#
# Copyright (c) 2026 The baddiff authors

# Closed-form clean and backdoored forward processes, one-step
# transitions and posterior means.
#
# Every operation accepts a single tensor or a batch whose leading axis
# indexes samples.  `t` is either an integer shared by the whole input or,
# for batches, an integer array holding one timestep per sample.

import typing

import numpy as np

from baddiff import error as baddiff_error
from baddiff import schedule as baddiff_schedule
from baddiff import utils as baddiff_utils

Timestep = typing.Union[int, np.ndarray]


def _check_t(s, t, lowest=1):
    if isinstance(t, np.ndarray):
        if t.ndim != 1 or not np.issubdtype(t.dtype, np.integer):
            raise TypeError("per-sample timesteps must be a 1-D integer array")

        if t.size == 0 or t.min() < lowest or t.max() > s.T:
            raise baddiff_error.TimestepError(
                "timesteps must lie within [{}, {}]".format(lowest, s.T), T=s.T
            )

        return t

    return baddiff_utils._check_timestep(t, s.T, lowest=lowest)


def _gather(values: np.ndarray, t: Timestep, like: np.ndarray):
    # Per-timestep coefficient, broadcastable against `like`.
    if isinstance(t, np.ndarray):
        if like.ndim == 0 or like.shape[0] != t.shape[0]:
            raise baddiff_error.ShapeError(
                "{} timesteps given for an input of shape {}".format(t.shape[0], like.shape)
            )

        return values[t - 1].reshape((-1,) + (1,) * (like.ndim - 1))

    return values[t - 1]


def _check_posterior_t(s, t):
    t = _check_t(s, t)
    lowest = int(t.min()) if isinstance(t, np.ndarray) else t

    if lowest < 2:
        raise baddiff_error.DegenerateStepError(
            "the posterior at t = 1 collapses to x0; use x0 directly"
        )

    return t


def _tensors(*named):
    arrays = [(name, baddiff_utils._as_tensor(x, name)) for name, x in named]
    baddiff_utils._check_same_shape(*arrays)
    return [a for _, a in arrays]


def forward_marginal_clean(
    s: baddiff_schedule.NoiseSchedule, x0, t: Timestep, eps
) -> np.ndarray:
    baddiff_utils._check_type(s, baddiff_schedule.NoiseSchedule)
    x0, eps = _tensors(("x0", x0), ("eps", eps))
    t = _check_t(s, t)
    sqrt_ab = np.sqrt(_gather(s.alpha_bars, t, x0))
    return sqrt_ab * x0 + _gather(s.deltas, t, x0) * eps


def forward_marginal_backdoor(
    s: baddiff_schedule.NoiseSchedule, x0_target, r, t: Timestep, eps
) -> np.ndarray:
    baddiff_utils._check_type(s, baddiff_schedule.NoiseSchedule)
    x0, r, eps = _tensors(("x0_target", x0_target), ("r", r), ("eps", eps))
    t = _check_t(s, t)
    sqrt_ab = np.sqrt(_gather(s.alpha_bars, t, x0))
    return sqrt_ab * x0 + (1.0 - sqrt_ab) * r + _gather(s.deltas, t, x0) * eps


def transition_backdoor(
    s: baddiff_schedule.NoiseSchedule, x_prev, r, t: Timestep, eps
) -> np.ndarray:
    baddiff_utils._check_type(s, baddiff_schedule.NoiseSchedule)
    x_prev, r, eps = _tensors(("x_prev", x_prev), ("r", r), ("eps", eps))
    t = _check_t(s, t)
    gamma = _gather(s.gammas, t, x_prev)
    return gamma * x_prev + (1.0 - gamma) * r + np.sqrt(_gather(s.betas, t, x_prev)) * eps


def posterior_coefficients_clean(s: baddiff_schedule.NoiseSchedule, t: int):
    """Coefficients (on x_t, on x0) of the clean posterior mean."""
    t = _check_posterior_t(s, baddiff_utils._check_int(t))
    c = baddiff_schedule.coefficients(s, t)
    denom = 1.0 - c.alpha_bar
    c_xt = np.sqrt(c.alpha) * (1.0 - c.alpha_bar_prev) / denom
    c_x0 = np.sqrt(c.alpha_bar_prev) * c.beta / denom
    return float(c_xt), float(c_x0)


def posterior_coefficients_backdoor(s: baddiff_schedule.NoiseSchedule, t: int):
    """Coefficients (on x_t′, on x0′, on r) of the backdoored posterior mean.

    The three coefficients sum to one.
    """
    c_xt, c_x0 = posterior_coefficients_clean(s, t)
    c = baddiff_schedule.coefficients(s, t)
    denom = 1.0 - c.alpha_bar
    sqrt_a = np.sqrt(c.alpha)
    c_r = c.beta * (1.0 - np.sqrt(c.alpha_bar_prev)) / denom - sqrt_a * (1.0 - sqrt_a) * (
        1.0 - c.alpha_bar_prev
    ) / denom
    return c_xt, c_x0, float(c_r)


def _posterior_arrays(s, t, like):
    # Vectorised version of the posterior coefficients, gathered at t.
    denom = 1.0 - _gather(s.alpha_bars, t, like)
    ab_prev = _gather(s.alpha_bars_prev, t, like)
    alpha = _gather(s.alphas, t, like)
    beta = _gather(s.betas, t, like)
    sqrt_a = np.sqrt(alpha)
    c_xt = sqrt_a * (1.0 - ab_prev) / denom
    c_x0 = np.sqrt(ab_prev) * beta / denom
    c_r = (beta * (1.0 - np.sqrt(ab_prev)) - sqrt_a * (1.0 - sqrt_a) * (1.0 - ab_prev)) / denom
    return c_xt, c_x0, c_r


def posterior_mean_clean(s: baddiff_schedule.NoiseSchedule, x_t, x0, t: Timestep) -> np.ndarray:
    baddiff_utils._check_type(s, baddiff_schedule.NoiseSchedule)
    x_t, x0 = _tensors(("x_t", x_t), ("x0", x0))
    t = _check_posterior_t(s, t)
    c_xt, c_x0, _ = _posterior_arrays(s, t, x_t)
    return c_xt * x_t + c_x0 * x0


def posterior_mean_backdoor(
    s: baddiff_schedule.NoiseSchedule, x_t_prime, x0_prime, r, t: Timestep
) -> np.ndarray:
    baddiff_utils._check_type(s, baddiff_schedule.NoiseSchedule)
    x_t, x0, r = _tensors(("x_t_prime", x_t_prime), ("x0_prime", x0_prime), ("r", r))
    t = _check_posterior_t(s, t)
    c_xt, c_x0, c_r = _posterior_arrays(s, t, x_t)
    return c_xt * x_t + c_x0 * x0 + c_r * r


def posterior_mean_backdoor_eps_form(
    s: baddiff_schedule.NoiseSchedule, x_t_prime, r, eps, t: Timestep
) -> np.ndarray:
    baddiff_utils._check_type(s, baddiff_schedule.NoiseSchedule)
    x_t, r, eps = _tensors(("x_t_prime", x_t_prime), ("r", r), ("eps", eps))
    t = _check_t(s, t)
    sqrt_a = np.sqrt(_gather(s.alphas, t, x_t))
    rho = _gather(s.rhos, t, x_t)
    eps_scale = _gather(s.betas, t, x_t) / _gather(s.deltas, t, x_t)
    return (x_t - rho * r - eps_scale * eps) / sqrt_a


def reparametrize_x0_backdoor(
    s: baddiff_schedule.NoiseSchedule, x_t_prime, r, eps, t: Timestep
) -> np.ndarray:
    """x0′ implied by x_t′, r and the noise that generated x_t′."""
    baddiff_utils._check_type(s, baddiff_schedule.NoiseSchedule)
    x_t, r, eps = _tensors(("x_t_prime", x_t_prime), ("r", r), ("eps", eps))
    t = _check_t(s, t)
    sqrt_ab = np.sqrt(_gather(s.alpha_bars, t, x_t))
    return (x_t - (1.0 - sqrt_ab) * r - _gather(s.deltas, t, x_t) * eps) / sqrt_ab


def solve_eps_backdoor(
    s: baddiff_schedule.NoiseSchedule, x_t_prime, x0_prime, r, t: Timestep
) -> np.ndarray:
    """Noise ε for which the backdoored marginal maps (x0′, r) to x_t′."""
    baddiff_utils._check_type(s, baddiff_schedule.NoiseSchedule)
    x_t, x0, r = _tensors(("x_t_prime", x_t_prime), ("x0_prime", x0_prime), ("r", r))
    t = _check_t(s, t)
    sqrt_ab = np.sqrt(_gather(s.alpha_bars, t, x_t))
    return (x_t - sqrt_ab * x0 - (1.0 - sqrt_ab) * r) / _gather(s.deltas, t, x_t)
