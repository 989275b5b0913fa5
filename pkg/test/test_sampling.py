# SPDX-License-Identifier: MIT
#
# Copyright (c) 2026 The baddiff authors

import numpy as np
import pytest

import baddiff


def _model():
    arch = baddiff.Architecture(baddiff.DenoiserMode.VECTOR, (2,), (8,), 4)
    return baddiff.init_params(arch, 2), baddiff.make_linear_schedule(10, 1e-3, 0.2)


def test_zero_model_ancestral_step_without_noise():
    params, s = _model()
    params = params.zeros_like()
    cfg = baddiff.SamplerConfig()
    s1 = baddiff.NoiseSchedule.from_betas([0.36])
    x = baddiff.ancestral_sample(params, s1, np.array([0.8, -0.4]), cfg, np.random.default_rng(0))

    # t = 1: no noise is added and ε_θ = 0, so x_0 = x_1 / √α_1
    assert x == pytest.approx([1.0, -0.5])


def test_init_latent():
    tr = baddiff.make_trigger(baddiff.TriggerKind.COORDINATE, (2,), value=0.8)
    clean = baddiff.init_latent((3, 2), None, np.random.default_rng(1))
    triggered = baddiff.init_latent((3, 2), tr, np.random.default_rng(1))

    assert triggered - clean == pytest.approx(np.tile([0.8, 0.0], (3, 1)))

    with pytest.raises(baddiff.ShapeError):
        baddiff.init_latent((3, 4), tr, np.random.default_rng(1))


def test_triggered_latents_are_centred_on_the_pattern():
    tr = baddiff.make_trigger(baddiff.TriggerKind.COORDINATE, (2,), value=0.8)
    n = 20000
    x = baddiff.init_latent((n, 2), tr, np.random.default_rng(6))

    assert np.all(np.abs(x.mean(axis=0) - tr.pattern) < 5.0 / np.sqrt(n))


def test_estimate_x0_with_zero_model():
    params, s = _model()
    x = np.array([0.5, 0.25])

    assert baddiff.estimate_x0(params.zeros_like(), s, x, 4) == pytest.approx(
        x / np.sqrt(s.alpha_bars[3])
    )


def test_clipped_sample_stays_bounded_with_zero_model():
    params, s = _model()
    cfg = baddiff.SamplerConfig(kind=baddiff.SamplerKind.CLIPPED)
    x_T = np.full((4, 2), 50.0)
    x = baddiff.clipped_sample(params.zeros_like(), s, x_T, cfg, np.random.default_rng(0))

    assert np.all(np.isfinite(x))
    assert np.all(np.abs(x) < 50.0)


def test_inactive_clip_matches_ancestral():
    params, s = _model()
    x_T = np.random.default_rng(3).standard_normal((5, 2))
    clipped = baddiff.SamplerConfig(kind=baddiff.SamplerKind.CLIPPED, clip_lo=-1e6, clip_hi=1e6)
    a = baddiff.clipped_sample(params, s, x_T, clipped, np.random.default_rng(8))
    b = baddiff.ancestral_sample(params, s, x_T, baddiff.SamplerConfig(), np.random.default_rng(8))

    assert a == pytest.approx(b, abs=1e-10)


def test_literal_minus_changes_the_samples():
    params, s = _model()
    x_T = np.random.default_rng(3).standard_normal((5, 2))
    plus = baddiff.SamplerConfig(kind=baddiff.SamplerKind.CLIPPED)
    minus = baddiff.SamplerConfig(kind=baddiff.SamplerKind.CLIPPED, literal_minus=True)
    a = baddiff.clipped_sample(params, s, x_T, plus, np.random.default_rng(8))
    b = baddiff.clipped_sample(params, s, x_T, minus, np.random.default_rng(8))

    assert np.max(np.abs(a - b)) > 1e-3


def test_sampler_kind_must_match():
    params, s = _model()

    with pytest.raises(baddiff.ParameterError):
        baddiff.clipped_sample(params, s, np.zeros(2), baddiff.SamplerConfig(), None)


def test_ddim_timesteps():
    assert baddiff.ddim_timesteps(10).tolist() == list(range(1, 11))
    assert baddiff.ddim_timesteps(10, 1).tolist() == [10]

    taus = baddiff.ddim_timesteps(100, 10)

    assert taus[0] == 1 and taus[-1] == 100
    assert np.all(np.diff(taus) > 0)

    with pytest.raises(baddiff.ParameterError):
        baddiff.ddim_timesteps(10, 11)


def test_ddim_is_deterministic():
    params, s = _model()
    cfg = baddiff.SamplerConfig(kind=baddiff.SamplerKind.DDIM, ddim_steps=5)
    x_T = np.random.default_rng(0).standard_normal((4, 2))

    assert np.array_equal(
        baddiff.ddim_sample(params, s, x_T, cfg), baddiff.ddim_sample(params, s, x_T, cfg)
    )


def test_ddim_single_step_returns_x0_estimate():
    params, s = _model()
    cfg = baddiff.SamplerConfig(kind=baddiff.SamplerKind.DDIM, ddim_steps=1)
    x_T = np.array([0.3, -0.6])

    assert baddiff.ddim_sample(params, s, x_T, cfg) == pytest.approx(
        baddiff.estimate_x0(params, s, x_T, s.T)
    )


def test_ddim_with_zero_model_rescales_each_step():
    params, s = _model()
    cfg = baddiff.SamplerConfig(kind=baddiff.SamplerKind.DDIM)
    x_T = np.array([0.3, -0.6])
    taus = np.array([3, 7, 10])
    x = baddiff.ddim_sample(params.zeros_like(), s, x_T, cfg, timesteps=taus)
    scale = 1.0

    for prev, cur in zip([0, 3, 7], [3, 7, 10]):
        scale *= np.sqrt(s.alpha_bar_at(prev) / s.alpha_bar_at(cur))

    assert x == pytest.approx(scale * x_T, abs=1e-12)
    assert scale == pytest.approx(1.0 / np.sqrt(s.alpha_bars[-1]))


def test_ddim_rejects_bad_subsequence():
    params, s = _model()
    cfg = baddiff.SamplerConfig(kind=baddiff.SamplerKind.DDIM)

    with pytest.raises(baddiff.ParameterError):
        baddiff.ddim_sample(params, s, np.zeros(2), cfg, timesteps=np.array([5, 3]))


def test_sample_dispatch():
    params, s = _model()
    x_T = np.array([0.1, 0.2])
    cfg = baddiff.SamplerConfig(kind=baddiff.SamplerKind.ANCESTRAL)

    assert np.array_equal(
        baddiff.sample(params, s, x_T, cfg, np.random.default_rng(5)),
        baddiff.ancestral_sample(params, s, x_T, cfg, np.random.default_rng(5)),
    )


def test_chains_do_not_depend_on_thread_count(monkeypatch):
    params, s = _model()
    cfg = baddiff.SamplerConfig()
    seeds = baddiff.draw_chain_seeds(np.random.default_rng(0), 130)
    monkeypatch.setenv("BADDIFF_NUM_THREADS", "1")
    one = baddiff.sample_chains(params, s, (2,), 130, cfg, seeds)
    monkeypatch.setenv("BADDIFF_NUM_THREADS", "4")
    four = baddiff.sample_chains(params, s, (2,), 130, cfg, seeds)

    assert one.shape == (130, 2)
    assert np.array_equal(one, four)


def test_chain_depends_only_on_its_seed():
    params, s = _model()
    cfg = baddiff.SamplerConfig()
    seeds = baddiff.draw_chain_seeds(np.random.default_rng(0), 3)
    full = baddiff.sample_chains(params, s, (2,), 3, cfg, seeds)
    last = baddiff.sample_chains(params, s, (2,), 1, cfg, seeds[2:])

    assert full[2:] == pytest.approx(last, abs=1e-12)


def test_sampling_leaves_params_untouched():
    params, s = _model()
    before = params.copy()
    tr = baddiff.make_trigger(baddiff.TriggerKind.COORDINATE, (2,))
    seeds = baddiff.draw_chain_seeds(np.random.default_rng(0), 5)

    for kind in baddiff.SamplerKind:
        cfg = baddiff.SamplerConfig(kind=kind)
        baddiff.sample_chains(params, s, (2,), 5, cfg, seeds, tr)

    assert params == before


def test_chain_seed_count_must_match():
    params, s = _model()

    with pytest.raises(baddiff.ParameterError):
        baddiff.sample_chains(params, s, (2,), 3, baddiff.SamplerConfig(), [1, 2])


def test_invalid_thread_count(monkeypatch):
    params, s = _model()
    monkeypatch.setenv("BADDIFF_NUM_THREADS", "zero")

    with pytest.raises(baddiff.ParameterError):
        baddiff.sample_chains(params, s, (2,), 1, baddiff.SamplerConfig(), [0])


def test_to_display():
    assert baddiff.to_display([-1.0, 0.0, 1.0, 3.0]).tolist() == [0.0, 0.5, 1.0, 1.0]


def test_sampler_config_round_trip():
    cfg = baddiff.SamplerConfig(
        kind=baddiff.SamplerKind.CLIPPED, sigma=baddiff.SigmaRule.BETA_TILDE, literal_minus=True
    )

    assert baddiff.SamplerConfig.from_dict(cfg.to_dict()) == cfg

    with pytest.raises(baddiff.ParameterError):
        baddiff.SamplerConfig(clip_lo=1.0, clip_hi=-1.0)
