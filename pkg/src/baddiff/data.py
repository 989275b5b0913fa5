# SPDX-License-Identifier: MIT
#
# Copyright (c) 2026 The baddiff authors

import dataclasses
import enum
import math
import typing

import numpy as np

from baddiff import error as baddiff_error
from baddiff import utils as baddiff_utils


class DatasetKind(enum.Enum):
    # Gaussian mixture on a circle (vector mode)
    RING = "ring"
    # filled squares and discs (image mode)
    SHAPES = "shapes"
    # horizontal and vertical bars (image mode)
    BARS = "bars"


@dataclasses.dataclass(frozen=True)
class DatasetSpec:
    kind: DatasetKind = DatasetKind.RING
    count: int = 2000
    modes: int = 8
    radius: float = 0.75
    sigma: float = 0.05
    height: int = 16
    width: int = 16

    def __post_init__(self):
        baddiff_utils._check_type(self.kind, DatasetKind)
        baddiff_utils._check_positive_int(self.count, "sample count")
        baddiff_utils._check_positive_int(self.modes, "mode count")
        baddiff_utils._check_positive_real(self.radius, "ring radius")
        baddiff_utils._check_non_negative_real(self.sigma, "ring spread")

        for name in ("height", "width"):
            if baddiff_utils._check_positive_int(getattr(self, name), name) < 4:
                raise baddiff_error.ParameterError("image {} must be ≥ 4".format(name))

    @property
    def is_image(self) -> bool:
        return self.kind is not DatasetKind.RING

    @property
    def data_shape(self) -> typing.Tuple[int, ...]:
        return (self.height, self.width) if self.is_image else (2,)

    def with_count(self, count: int) -> "DatasetSpec":
        return dataclasses.replace(self, count=count)

    def to_dict(self) -> dict:
        out = dataclasses.asdict(self)
        out["kind"] = self.kind.value
        return out

    @classmethod
    def from_dict(cls, d: typing.Mapping) -> "DatasetSpec":
        d = dict(d)

        if "kind" in d:
            d["kind"] = DatasetKind(d["kind"])

        return cls(**d)


def ring_centres(spec: DatasetSpec) -> np.ndarray:
    angles = 2.0 * math.pi * np.arange(spec.modes) / spec.modes
    return spec.radius * np.stack([np.cos(angles), np.sin(angles)], axis=1)


def _ring(spec, rng):
    components = rng.integers(spec.modes, size=spec.count)
    noise = rng.standard_normal((spec.count, 2))
    return ring_centres(spec)[components] + spec.sigma * noise


def _shapes(spec, rng):
    H, W = spec.height, spec.width
    images = np.full((spec.count, H, W), -1.0)
    rows, cols = np.mgrid[0:H, 0:W]

    for img in images:
        for _ in range(int(rng.integers(1, 3))):
            size = int(rng.integers(3, max(4, min(H, W) // 2 + 1)))
            top = int(rng.integers(0, H - size + 1))
            left = int(rng.integers(0, W - size + 1))
            value = float(rng.uniform(0.2, 1.0))

            if rng.random() < 0.5:
                img[top : top + size, left : left + size] = value
            else:
                cy = top + (size - 1) / 2.0
                cx = left + (size - 1) / 2.0
                disc = (rows - cy) ** 2 + (cols - cx) ** 2 <= (size / 2.0) ** 2
                img[disc] = value

    return images


def _bars(spec, rng):
    H, W = spec.height, spec.width
    images = np.full((spec.count, H, W), -1.0)

    for img in images:
        for _ in range(int(rng.integers(1, 4))):
            thickness = int(rng.integers(1, 3))

            if rng.random() < 0.5:
                start = int(rng.integers(0, H - thickness + 1))
                img[start : start + thickness, :] = 1.0
            else:
                start = int(rng.integers(0, W - thickness + 1))
                img[:, start : start + thickness] = 1.0

    return images


_GENERATORS = {
    DatasetKind.RING: _ring,
    DatasetKind.SHAPES: _shapes,
    DatasetKind.BARS: _bars,
}


def generate_dataset(spec: DatasetSpec, seed: typing.Union[int, np.random.Generator]) -> np.ndarray:
    """Desk-scale dataset of `spec.count` samples, deterministic from `seed`."""
    baddiff_utils._check_type(spec, DatasetSpec)

    if isinstance(seed, np.random.Generator):
        rng = seed
    else:
        rng = np.random.default_rng(baddiff_utils._check_int(seed))

    return _GENERATORS[spec.kind](spec, rng)
