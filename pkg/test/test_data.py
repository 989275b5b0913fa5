# SPDX-License-Identifier: MIT
#
# Copyright (c) 2026 The baddiff authors

import numpy as np
import pytest

import baddiff


def test_ring_shape_and_determinism():
    spec = baddiff.DatasetSpec(count=50)
    a = baddiff.generate_dataset(spec, 3)

    assert a.shape == (50, 2)
    assert np.array_equal(a, baddiff.generate_dataset(spec, 3))
    assert not np.array_equal(a, baddiff.generate_dataset(spec, 4))


def test_ring_without_spread_lies_on_centres():
    spec = baddiff.DatasetSpec(count=200, modes=4, radius=0.5, sigma=0.0)
    x = baddiff.generate_dataset(spec, 0)
    centres = baddiff.ring_centres(spec)

    assert np.linalg.norm(x, axis=1) == pytest.approx(np.full(200, 0.5))
    assert all(np.any(np.all(np.isclose(centres, p), axis=1)) for p in x)


def test_ring_centres():
    spec = baddiff.DatasetSpec(modes=4, radius=2.0)

    assert baddiff.ring_centres(spec) == pytest.approx(
        np.array([[2.0, 0.0], [0.0, 2.0], [-2.0, 0.0], [0.0, -2.0]]), abs=1e-12
    )


def test_single_sample():
    x = baddiff.generate_dataset(baddiff.DatasetSpec(count=1), 0)

    assert x.shape == (1, 2)


def test_generator_seed():
    spec = baddiff.DatasetSpec(count=10)

    assert np.array_equal(
        baddiff.generate_dataset(spec, np.random.default_rng(7)),
        baddiff.generate_dataset(spec, 7),
    )


@pytest.mark.parametrize("kind", [baddiff.DatasetKind.SHAPES, baddiff.DatasetKind.BARS])
def test_image_datasets(kind):
    spec = baddiff.DatasetSpec(kind=kind, count=20, height=8, width=12)
    x = baddiff.generate_dataset(spec, 1)

    assert spec.is_image
    assert spec.data_shape == (8, 12)
    assert x.shape == (20, 8, 12)
    assert x.min() >= -1.0
    assert x.max() <= 1.0
    # every image draws at least one foreground shape
    assert np.all((x > -1.0).reshape(20, -1).any(axis=1))


def test_spec_validation():
    with pytest.raises(baddiff.ParameterError):
        baddiff.DatasetSpec(count=0)

    with pytest.raises(baddiff.ParameterError):
        baddiff.DatasetSpec(sigma=-0.1)

    with pytest.raises(baddiff.ParameterError):
        baddiff.DatasetSpec(kind=baddiff.DatasetKind.BARS, height=3)


def test_spec_round_trip():
    spec = baddiff.DatasetSpec(kind=baddiff.DatasetKind.SHAPES, count=12)

    assert baddiff.DatasetSpec.from_dict(spec.to_dict()) == spec
    assert spec.with_count(3).count == 3
