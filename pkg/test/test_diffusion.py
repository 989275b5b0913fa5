# SPDX-License-Identifier: MIT
#
# Copyright (c) 2026 The baddiff authors

import math

import numpy as np
import pytest

import baddiff


def _two_step():
    return baddiff.NoiseSchedule.from_betas([0.1, 0.2])


def test_clean_marginal():
    x = baddiff.forward_marginal_clean(_two_step(), 1.0, 2, 1.0)

    assert float(x) == pytest.approx(1.37768, abs=1e-5)


def test_backdoor_marginal_without_noise():
    x = baddiff.forward_marginal_backdoor(_two_step(), 0.0, 1.0, 2, 0.0)

    assert float(x) == pytest.approx(0.151472, abs=1e-6)


def test_clean_posterior_mean():
    mean = baddiff.posterior_mean_clean(_two_step(), 1.0, 0.0, 2)

    assert float(mean) == pytest.approx(0.319438, abs=1e-6)


def test_backdoor_posterior_mean():
    mean = baddiff.posterior_mean_backdoor(_two_step(), 1.0, 0.0, 1.0, 2)

    assert float(mean) == pytest.approx(0.322369, abs=1e-5)


def test_backdoor_posterior_coefficients_sum_to_one():
    s = baddiff.make_linear_schedule(100)

    for t in (2, 17, 100):
        assert sum(baddiff.posterior_coefficients_backdoor(s, t)) == pytest.approx(1.0)


def test_zero_trigger_reduces_to_clean():
    s = baddiff.make_linear_schedule(100)
    rng = np.random.default_rng(1)
    x0 = rng.standard_normal((4, 2))
    eps = rng.standard_normal((4, 2))
    zero = np.zeros_like(x0)

    assert np.array_equal(
        baddiff.forward_marginal_backdoor(s, x0, zero, 30, eps),
        baddiff.forward_marginal_clean(s, x0, 30, eps),
    )
    assert baddiff.posterior_mean_backdoor(s, eps, x0, zero, 30) == pytest.approx(
        baddiff.posterior_mean_clean(s, eps, x0, 30)
    )


def test_eps_form_matches_x0_form():
    s = baddiff.make_linear_schedule(100)
    rng = np.random.default_rng(2)
    x0, r, eps = rng.uniform(-1.0, 1.0, size=(3, 5, 3))
    t = np.array([2, 10, 40, 80, 100])
    x_t = baddiff.forward_marginal_backdoor(s, x0, r, t, eps)

    assert baddiff.posterior_mean_backdoor_eps_form(s, x_t, r, eps, t) == pytest.approx(
        baddiff.posterior_mean_backdoor(s, x_t, x0, r, t), abs=1e-12
    )
    assert baddiff.reparametrize_x0_backdoor(s, x_t, r, eps, t) == pytest.approx(x0, abs=1e-12)
    assert baddiff.solve_eps_backdoor(s, x_t, x0, r, t) == pytest.approx(eps, abs=1e-9)


def test_transition_at_first_step_matches_marginal():
    s = baddiff.make_linear_schedule(10)
    x0, r, eps = 0.3, -0.5, 0.7

    assert float(baddiff.transition_backdoor(s, x0, r, 1, eps)) == pytest.approx(
        float(baddiff.forward_marginal_backdoor(s, x0, r, 1, eps))
    )


def test_composed_transitions_follow_the_backdoored_marginal():
    s = baddiff.make_linear_schedule(20, 0.01, 0.2)
    rng = np.random.default_rng(4)
    n, t = 20000, 15
    r = np.full(n, -1.0)
    x = np.full(n, 0.5)

    for k in range(1, t + 1):
        x = baddiff.transition_backdoor(s, x, r, k, rng.standard_normal(n))

    mean = float(baddiff.forward_marginal_backdoor(s, 0.5, -1.0, t, 0.0))
    var = 1.0 - s.alpha_bars[t - 1]

    assert abs(x.mean() - mean) / math.sqrt(var / n) < 5.0
    assert abs(x.var(ddof=1) - var) / (var * math.sqrt(2.0 / (n - 1))) < 5.0


def test_posterior_at_first_step_is_degenerate():
    with pytest.raises(baddiff.DegenerateStepError):
        baddiff.posterior_mean_backdoor(_two_step(), 1.0, 0.0, 1.0, 1)

    with pytest.raises(baddiff.DegenerateStepError):
        baddiff.posterior_coefficients_clean(_two_step(), 1)


def test_timestep_out_of_range():
    with pytest.raises(baddiff.TimestepError):
        baddiff.forward_marginal_clean(_two_step(), 0.0, 3, 0.0)

    with pytest.raises(baddiff.TimestepError):
        baddiff.forward_marginal_clean(_two_step(), np.zeros(2), np.array([1, 0]), np.zeros(2))


def test_shape_mismatch():
    with pytest.raises(baddiff.ShapeError):
        baddiff.forward_marginal_clean(_two_step(), np.zeros(2), 1, np.zeros(3))


def test_per_sample_timesteps_need_matching_batch():
    with pytest.raises(baddiff.ShapeError):
        baddiff.forward_marginal_clean(
            _two_step(), np.zeros((3, 2)), np.array([1, 2]), np.zeros((3, 2))
        )
