# SPDX-License-Identifier: MIT
#
# Copyright (c) 2026 The baddiff authors

import math
import numbers
import os
import typing

import numpy as np

from baddiff import error as baddiff_error

_NUM_THREADS_ENV = "BADDIFF_NUM_THREADS"


def _check_bool(o):
    if not isinstance(o, bool):
        raise TypeError("'{}' is not a 'bool' object".format(o.__class__.__name__))

    return o


def _check_int(o):
    if isinstance(o, bool) or not isinstance(o, numbers.Integral):
        raise TypeError("'{}' is not an 'int' object".format(o.__class__.__name__))

    return int(o)


def _check_real(o):
    if isinstance(o, bool) or not isinstance(o, numbers.Real):
        raise TypeError("'{}' is not a 'float' object".format(o.__class__.__name__))

    return float(o)


def _check_str(o):
    if not isinstance(o, str):
        raise TypeError("'{}' is not a 'str' object".format(o.__class__.__name__))

    return o


_Type = typing.TypeVar("_Type")


def _check_type(o: typing.Any, expected_type: typing.Type[_Type]) -> _Type:
    if not isinstance(o, expected_type):
        raise TypeError("'{}' is not a '{}' object".format(o.__class__.__name__, expected_type))

    return o


def _check_positive_int(v, what):
    v = _check_int(v)

    if v < 1:
        raise baddiff_error.ParameterError("{} must be ≥ 1 (got {})".format(what, v))

    return v


def _check_non_negative_int(v, what):
    v = _check_int(v)

    if v < 0:
        raise baddiff_error.ParameterError("{} must be ≥ 0 (got {})".format(what, v))

    return v


def _check_positive_real(v, what):
    v = _check_real(v)

    if not (v > 0 and math.isfinite(v)):
        raise baddiff_error.ParameterError("{} must be a finite value > 0 (got {})".format(what, v))

    return v


def _check_non_negative_real(v, what):
    v = _check_real(v)

    if not (v >= 0 and math.isfinite(v)):
        raise baddiff_error.ParameterError(
            "{} must be a finite value ≥ 0 (got {})".format(what, v)
        )

    return v


def _check_unit_interval(v, what):
    v = _check_real(v)

    if not (0.0 <= v <= 1.0):
        raise baddiff_error.ParameterError("{} must be within [0, 1] (got {})".format(what, v))

    return v


def _as_tensor(x, what="tensor") -> np.ndarray:
    # Every tensor crossing the public API is a float64 array with finite
    # values only.
    arr = np.asarray(x, dtype=np.float64)

    if not np.all(np.isfinite(arr)):
        raise baddiff_error.ParameterError("{} contains non-finite values".format(what))

    return arr


def _check_same_shape(*named_tensors):
    # named_tensors: (name, array) pairs
    ref_name, ref = named_tensors[0]

    for name, arr in named_tensors[1:]:
        if arr.shape != ref.shape:
            raise baddiff_error.ShapeError(
                "shape of {} {} does not match shape of {} {}".format(
                    name, arr.shape, ref_name, ref.shape
                )
            )


def _check_timestep(t, T, lowest=1):
    t = _check_int(t)

    if t < lowest or t > T:
        raise baddiff_error.TimestepError(
            "timestep {} is outside [{}, {}]".format(t, lowest, T), t=t, T=T
        )

    return t


def _num_threads() -> int:
    raw = os.environ.get(_NUM_THREADS_ENV)

    if raw is None or raw.strip() == "":
        return 1

    try:
        value = int(raw)
    except ValueError:
        raise baddiff_error.ParameterError(
            "{} must be an integer (got `{}`)".format(_NUM_THREADS_ENV, raw)
        ) from None

    if value < 1:
        raise baddiff_error.ParameterError(
            "{} must be ≥ 1 (got {})".format(_NUM_THREADS_ENV, value)
        )

    return value
