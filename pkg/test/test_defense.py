# SPDX-License-Identifier: MIT
#
# Copyright (c) 2026 The baddiff authors

import numpy as np
import pytest

import baddiff


def _model():
    arch = baddiff.Architecture(baddiff.DenoiserMode.VECTOR, (2,), (8,), 4)
    data = np.random.default_rng(0).uniform(-1.0, 1.0, size=(16, 2))
    return baddiff.init_params(arch, 1), baddiff.make_linear_schedule(8, 1e-3, 0.2), data


def test_identity_keeps_params():
    params, _, _ = _model()
    pert = baddiff.PerturbationState.identity(params, 0.2)

    assert pert.apply(params) == params
    assert pert.bounds == pytest.approx((0.8, 1.2))


def test_neuron_multiplier_shapes():
    params, _, _ = _model()
    pert = baddiff.PerturbationState.identity(
        params, 0.1, baddiff.PerturbationGranularity.NEURON
    )

    assert [m.shape for m in pert.weight_multipliers] == [(8,), (2,)]
    assert [m.shape for m in pert.bias_multipliers] == [(8,), (2,)]


def test_neuron_multiplier_scales_rows():
    params, _, _ = _model()
    ones = baddiff.PerturbationState.identity(
        params, 0.5, baddiff.PerturbationGranularity.NEURON
    ).multipliers
    ones[0] = np.linspace(0.5, 1.5, 8)
    pert = baddiff.PerturbationState(ones, 0.5, baddiff.PerturbationGranularity.NEURON)
    out = pert.apply(params)

    assert out.weights[0] == pytest.approx(params.weights[0] * ones[0][:, None])
    assert np.array_equal(out.weights[1], params.weights[1])


def test_multipliers_outside_budget():
    params, _, _ = _model()
    ms = baddiff.PerturbationState.identity(params, 0.1).multipliers
    ms[0] = ms[0] * 1.5

    with pytest.raises(baddiff.ParameterError):
        baddiff.PerturbationState(ms, 0.1)


def test_negative_budget():
    params, _, _ = _model()

    with pytest.raises(baddiff.ParameterError):
        baddiff.PerturbationState.identity(params, -0.1)


def test_mismatched_params():
    params, _, _ = _model()
    other = baddiff.init_params(
        baddiff.Architecture(baddiff.DenoiserMode.VECTOR, (2,), (4,), 4)
    )
    pert = baddiff.PerturbationState.identity(params, 0.1)

    with pytest.raises(baddiff.ShapeError):
        pert.apply(other)


def test_multiplier_gradient_neuron_sums_rows():
    params, _, _ = _model()
    pert = baddiff.PerturbationState.identity(
        params, 0.1, baddiff.PerturbationGranularity.NEURON
    )
    grads = params.copy()
    out = pert.multiplier_gradient(params, grads)

    assert out[0] == pytest.approx(np.sum(params.weights[0] ** 2, axis=1))
    assert out[1] == pytest.approx(params.biases[0] ** 2)


def test_perturbed_forward_with_identity():
    params, _, _ = _model()
    pert = baddiff.PerturbationState.identity(params, 0.3)
    x = np.array([[0.1, -0.2], [0.5, 0.5]])

    assert np.array_equal(
        baddiff.perturbed_forward(params, pert, x, 3), baddiff.predict_noise(params, x, 3)
    )


def test_zero_budget_is_no_defense():
    params, s, data = _model()
    res = baddiff.anp_search(
        params, data, s, 0.0, 1e-2, 2, np.random.default_rng(5), num_reconstructions=4
    )
    plain = baddiff.sample_chains(
        params, s, (2,), 4, baddiff.SamplerConfig(), res.reconstruction_seeds
    )

    assert res.state.apply(params) == params
    assert len(res.reconstructions) == 2
    assert np.array_equal(res.reconstructions[-1], plain)
    assert res.mse is None
    assert res.best_epoch is None


def test_search_stays_within_budget():
    params, s, data = _model()
    res = baddiff.anp_search(
        params, data, s, 0.1, 5e-2, 3, np.random.default_rng(5), num_reconstructions=2
    )
    ms = np.concatenate([m.reshape(-1) for m in res.state.multipliers])

    assert np.all(ms >= 0.9 - 1e-12)
    assert np.all(ms <= 1.1 + 1e-12)
    assert np.any(ms != 1.0)
    assert len(res.losses) == 3


def test_search_is_deterministic():
    params, s, data = _model()

    def run():
        return baddiff.anp_search(
            params, data, s, 0.2, 1e-2, 2, np.random.default_rng(9), num_reconstructions=3
        )

    a, b = run(), run()

    assert a.losses == b.losses
    assert all(np.array_equal(x, y) for x, y in zip(a.reconstructions, b.reconstructions))


def test_search_with_target():
    params, s, data = _model()
    target = np.array([-0.75, 0.75])
    res = baddiff.anp_search(
        params, data, s, 0.1, 1e-2, 2, np.random.default_rng(0), target, num_reconstructions=4
    )

    assert len(res.mse) == 2
    assert res.mse[0] == pytest.approx(baddiff.target_mse(res.reconstructions[0], target))
    assert res.best_epoch in (1, 2)

    rows = res.to_csv_rows()

    assert rows[0] == ["epoch", "ascent_loss", "reconstruction_mse"]
    assert len(rows) == 3


def test_zero_epochs():
    params, s, data = _model()
    res = baddiff.anp_search(params, data, s, 0.1, 1e-2, 0, np.random.default_rng(0))

    assert res.losses == []
    assert res.reconstructions == []


def test_empty_clean_set():
    params, s, _ = _model()

    with pytest.raises(baddiff.ParameterError):
        baddiff.anp_search(params, np.zeros((0, 2)), s, 0.1, 1e-2, 1, np.random.default_rng(0))


def test_reconstruction_mse():
    assert baddiff.reconstruction_mse(np.zeros((3, 2)), np.ones(2)) == pytest.approx(1.0)
