# SPDX-License-Identifier: MIT
#
# Copyright (c) 2026 The baddiff authors

import enum
import typing

import numpy as np

from baddiff import diffusion as baddiff_diffusion
from baddiff import error as baddiff_error
from baddiff import schedule as baddiff_schedule
from baddiff import utils as baddiff_utils

# Tolerance for the two algebraic forms of the poisoned regression
# coefficient.
_COEFFICIENT_TOLERANCE = 1e-12


class Trigger:
    """Pattern g and binary mask M; stamps r = M⊙g + (1 − M)⊙x.

    Pattern values under M = 0 are zeroed on construction.
    """

    def __init__(self, pattern, mask):
        pattern = baddiff_utils._as_tensor(pattern, "trigger pattern")
        mask = baddiff_utils._as_tensor(mask, "trigger mask")
        baddiff_utils._check_same_shape(("pattern", pattern), ("mask", mask))

        if not np.all((mask == 0.0) | (mask == 1.0)):
            raise baddiff_error.ParameterError("trigger mask must only contain 0 and 1")

        pattern = np.where(mask == 1.0, pattern, 0.0)
        pattern.setflags(write=False)
        mask = mask.copy()
        mask.setflags(write=False)
        self._pattern = pattern
        self._mask = mask

    @property
    def pattern(self) -> np.ndarray:
        return self._pattern

    @property
    def mask(self) -> np.ndarray:
        return self._mask

    @property
    def shape(self) -> typing.Tuple[int, ...]:
        return self._pattern.shape

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Trigger):
            return False

        return np.array_equal(self._pattern, other._pattern) and np.array_equal(
            self._mask, other._mask
        )


class PoisonSpec:
    def __init__(
        self,
        trigger: Trigger,
        target,
        rate: float,
        split_seed: int = 0,
        overlap: bool = False,
    ):
        baddiff_utils._check_type(trigger, Trigger)
        target = baddiff_utils._as_tensor(target, "backdoor target")
        baddiff_utils._check_same_shape(("trigger", trigger.pattern), ("target", target))

        if np.any(np.abs(target) > 1.0):
            raise baddiff_error.ParameterError("backdoor target must lie within [-1, 1]")

        target = target.copy()
        target.setflags(write=False)
        self._trigger = trigger
        self._target = target
        self._rate = baddiff_utils._check_unit_interval(rate, "poison rate")
        self._split_seed = baddiff_utils._check_int(split_seed)
        self._overlap = baddiff_utils._check_bool(overlap)

    @property
    def trigger(self) -> Trigger:
        return self._trigger

    @property
    def target(self) -> np.ndarray:
        return self._target

    @property
    def rate(self) -> float:
        return self._rate

    @property
    def split_seed(self) -> int:
        return self._split_seed

    @property
    def overlap(self) -> bool:
        return self._overlap

    def with_rate(self, rate: float) -> "PoisonSpec":
        return PoisonSpec(self._trigger, self._target, rate, self._split_seed, self._overlap)


def _check_data_shape(x, shape, what):
    if x.shape != shape and x.shape[1:] != shape:
        raise baddiff_error.ShapeError(
            "{} of shape {} does not match data shape {}".format(what, x.shape, shape)
        )


def apply_trigger(x, tr: Trigger) -> np.ndarray:
    baddiff_utils._check_type(tr, Trigger)
    x = baddiff_utils._as_tensor(x, "x")
    _check_data_shape(x, tr.shape, "input")
    return tr.mask * tr.pattern + (1.0 - tr.mask) * x


def poison_count(n: int, rate: float) -> int:
    # half-up rounding of rate·n, taken on the product rounded to 1e-9
    return int(np.floor(round(rate * n, 9) + 0.5))


def split_indices(n: int, spec: PoisonSpec) -> typing.Tuple[np.ndarray, np.ndarray]:
    """Sorted (poisoned, clean) sample indices for a dataset of `n` samples.

    Rates above one half take the clean set as the prefix that rate 1 − p
    would poison, so rates p and 1 − p yield swapped partitions.  At a
    half-count tie this gives round(p·n) − 1 poisoned samples.
    """
    n = baddiff_utils._check_positive_int(n, "dataset size")
    baddiff_utils._check_type(spec, PoisonSpec)
    perm = np.random.default_rng(spec.split_seed).permutation(n)

    if spec.rate <= 0.5:
        n_p = poison_count(n, spec.rate)
        poisoned = perm[:n_p]
        clean = perm[n_p:]
    else:
        n_c = poison_count(n, 1.0 - spec.rate)
        clean = perm[:n_c]
        poisoned = perm[n_c:]

    poisoned = np.sort(poisoned)

    if spec.overlap:
        clean = np.arange(n)
    else:
        clean = np.sort(clean)

    return poisoned, clean


def split_dataset(D, spec: PoisonSpec) -> typing.Tuple[np.ndarray, np.ndarray]:
    D = baddiff_utils._as_tensor(D, "dataset")

    if D.ndim < 1 or D.shape[0] < 1:
        raise baddiff_error.ParameterError("dataset must contain at least one sample")

    _check_data_shape(D[0], spec.trigger.shape, "dataset sample")
    poisoned, clean = split_indices(D.shape[0], spec)
    return D[poisoned], D[clean]


def poison_target_coefficients(s: baddiff_schedule.NoiseSchedule) -> np.ndarray:
    """Coefficient on r of the poisoned regression target, for t = 1..T."""
    baddiff_utils._check_type(s, baddiff_schedule.NoiseSchedule)
    direct = s.rhos * s.deltas / (1.0 - s.alphas)
    simplified = s.deltas / (1.0 + np.sqrt(s.alphas))

    if not np.allclose(direct, simplified, rtol=0.0, atol=_COEFFICIENT_TOLERANCE):
        raise ArithmeticError("poisoned target coefficient forms disagree")

    return direct


def poisoned_training_example(
    x,
    spec: PoisonSpec,
    s: baddiff_schedule.NoiseSchedule,
    t: baddiff_diffusion.Timestep,
    eps,
) -> typing.Tuple[np.ndarray, np.ndarray]:
    """Model input x_t′(y, r, ε) and regression target for a poisoned sample."""
    baddiff_utils._check_type(spec, PoisonSpec)
    x = baddiff_utils._as_tensor(x, "x")
    eps = baddiff_utils._as_tensor(eps, "eps")
    baddiff_utils._check_same_shape(("x", x), ("eps", eps))
    r = apply_trigger(x, spec.trigger)
    y = np.broadcast_to(spec.target, r.shape)
    model_input = baddiff_diffusion.forward_marginal_backdoor(s, y, r, t, eps)
    t = baddiff_diffusion._check_t(s, t)
    coef = baddiff_diffusion._gather(poison_target_coefficients(s), t, r)
    return model_input, coef * r + eps


# Built-in triggers and targets.


class TriggerKind(enum.Enum):
    COORDINATE = "coordinate"
    GREY_BOX = "grey_box"
    STOP_SIGN = "stop_sign"


class TargetKind(enum.Enum):
    POINT = "point"
    NO_SHIFT = "no_shift"
    SHIFT = "shift"
    CORNER = "corner"
    STAMP = "stamp"


_DEFAULT_TRIGGER_VALUES = {
    TriggerKind.COORDINATE: 0.8,
    TriggerKind.GREY_BOX: 0.5,
    TriggerKind.STOP_SIGN: 0.6,
}


def _check_image_shape(shape, what):
    if len(shape) != 2:
        raise baddiff_error.UnsupportedModeError(
            "{} needs an image shape (got {})".format(what, shape)
        )


def _check_size(size, limit, what):
    size = baddiff_utils._check_positive_int(size, "{} size".format(what))

    if size > limit:
        raise baddiff_error.ParameterError(
            "{} size {} exceeds the data extent {}".format(what, size, limit)
        )

    return size


def make_trigger(
    kind: TriggerKind,
    shape: typing.Sequence[int],
    size: typing.Optional[int] = None,
    value: typing.Optional[float] = None,
) -> Trigger:
    """Build a library trigger.

    COORDINATE overwrites the first `size` coordinates of a vector.  The
    image triggers sit in the bottom-right corner and span `size` pixels.
    """
    baddiff_utils._check_type(kind, TriggerKind)
    shape = tuple(int(n) for n in shape)
    value = _DEFAULT_TRIGGER_VALUES[kind] if value is None else baddiff_utils._check_real(value)
    mask = np.zeros(shape)

    if kind is TriggerKind.COORDINATE:
        if len(shape) != 1:
            raise baddiff_error.UnsupportedModeError("coordinate triggers need a vector shape")

        size = _check_size(1 if size is None else size, shape[0], "trigger")
        mask[:size] = 1.0
        return Trigger(np.full(shape, value), mask)

    _check_image_shape(shape, "{} trigger".format(kind.value))
    H, W = shape
    size = _check_size(min(H, W) // 2 + 2 if size is None else size, min(H, W), "trigger")
    top, left = H - size, W - size

    if kind is TriggerKind.GREY_BOX:
        mask[top:, left:] = 1.0

        if size > 2:
            mask[top + 1 : H - 1, left + 1 : W - 1] = 0.0
    else:
        cut = size // 3
        rows, cols = np.mgrid[0:size, 0:size]
        far = size - 1
        octagon = (
            (rows + cols >= cut)
            & (rows + (far - cols) >= cut)
            & ((far - rows) + cols >= cut)
            & ((far - rows) + (far - cols) >= cut)
        )
        mask[top:, left:] = octagon.astype(np.float64)

    return Trigger(np.full(shape, value), mask)


def make_target(
    kind: TargetKind,
    shape: typing.Sequence[int],
    trigger: typing.Optional[Trigger] = None,
    size: typing.Optional[int] = None,
) -> np.ndarray:
    baddiff_utils._check_type(kind, TargetKind)
    shape = tuple(int(n) for n in shape)

    if kind is TargetKind.POINT:
        if len(shape) != 1:
            raise baddiff_error.UnsupportedModeError("point targets need a vector shape")

        target = np.full(shape, 0.75)
        target[0::2] = -0.75
        return target

    _check_image_shape(shape, "{} target".format(kind.value))
    H, W = shape
    target = np.full(shape, -1.0)

    if kind in (TargetKind.NO_SHIFT, TargetKind.SHIFT):
        if trigger is None:
            raise baddiff_error.ParameterError(
                "{} targets are built from a trigger".format(kind.value)
            )

        baddiff_utils._check_type(trigger, Trigger)

        if trigger.shape != shape:
            raise baddiff_error.ShapeError("trigger shape does not match target shape")

        target = np.where(trigger.mask == 1.0, trigger.pattern, -1.0)

        if kind is TargetKind.SHIFT:
            rows, cols = np.nonzero(trigger.mask)

            if rows.size:
                target = np.roll(target, (-int(rows.min()), -int(cols.min())), axis=(0, 1))

        return target

    if kind is TargetKind.CORNER:
        size = _check_size(max(2, min(H, W) // 4) if size is None else size, min(H, W), "target")
        target[:size, :size] = 1.0
        return target

    # STAMP: a hat-like shape, crown above a brim, centred horizontally
    size = _check_size(max(4, (min(H, W) * 3) // 4) if size is None else size, min(H, W), "target")
    top = (H - size) // 2
    left = (W - size) // 2
    brim_row = top + (size * 3) // 4
    target[brim_row, left : left + size] = 1.0
    crown = max(1, size // 4)
    target[top:brim_row, left + crown : left + size - crown] = 1.0
    return target
