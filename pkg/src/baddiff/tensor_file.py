# SPDX-License-Identifier: MIT
#
# Copyright (c) 2026 The baddiff authors

# Portable tensor and checkpoint files.
#
# Tensor file (`.bdtf`), all integers little-endian:
#
#     "BDTF" | u32 version | u8 mode | u32 rank | u64 dims[rank] | f64 data
#
# The first dimension is the batch count (0 is valid).  The mode byte
# records how to read the remaining dimensions: 0 for vectors, 1 for
# images, 2 for anything else.
#
# Checkpoint file (`.bdck`):
#
#     "BDCK" | u32 version | u64 length | UTF-8 JSON descriptor | f64 arrays
#
# The descriptor holds the architecture, the schedule and the training
# provenance; the arrays follow in parameter declaration order (W_1, b_1,
# W_2, ...), their shapes implied by the architecture.

import collections
import json
import os
import struct
import typing

import numpy as np

from baddiff import denoiser as baddiff_denoiser
from baddiff import error as baddiff_error
from baddiff import logging as baddiff_logging
from baddiff import schedule as baddiff_schedule
from baddiff import utils as baddiff_utils

_logger = baddiff_logging._get_logger(__name__)

TENSOR_MAGIC = b"BDTF"
TENSOR_VERSION = 1
CHECKPOINT_MAGIC = b"BDCK"
CHECKPOINT_VERSION = 1

MODE_VECTOR = 0
MODE_IMAGE = 1
MODE_RAW = 2

_FLOAT = np.dtype("<f8")

Checkpoint = collections.namedtuple("Checkpoint", ["params", "schedule_descriptor", "provenance"])


class _Reader:
    def __init__(self, buf: bytes, path):
        self._buf = buf
        self._pos = 0
        self._path = path

    def take(self, size: int, what: str) -> bytes:
        if self._pos + size > len(self._buf):
            raise baddiff_error.FormatError(
                "{}: truncated file (reading {})".format(self._path, what)
            )

        chunk = self._buf[self._pos : self._pos + size]
        self._pos += size
        return chunk

    def unpack(self, fmt: str, what: str):
        return struct.unpack(fmt, self.take(struct.calcsize(fmt), what))

    def floats(self, count: int, what: str) -> np.ndarray:
        chunk = self.take(count * _FLOAT.itemsize, what)
        return np.frombuffer(chunk, dtype=_FLOAT).astype(np.float64)

    def finish(self):
        if self._pos != len(self._buf):
            raise baddiff_error.FormatError(
                "{}: {} trailing bytes".format(self._path, len(self._buf) - self._pos)
            )


def _mode_for(data_rank):
    return {1: MODE_VECTOR, 2: MODE_IMAGE}.get(data_rank, MODE_RAW)


def _read(path) -> bytes:
    with open(path, "rb") as f:
        return f.read()


def _write(path, chunks):
    with open(path, "wb") as f:
        for chunk in chunks:
            f.write(chunk)


def _read_header(reader, magic, supported, kind):
    found = reader.take(len(magic), "magic")

    if found != magic:
        raise baddiff_error.FormatError(
            "{}: not a {} file (magic {!r})".format(reader._path, kind, found)
        )

    (version,) = reader.unpack("<I", "version")

    if version != supported:
        raise baddiff_error.FormatError(
            "{}: unsupported {} version {} (expecting {})".format(
                reader._path, kind, version, supported
            )
        )


def save_tensors(path: typing.Union[str, os.PathLike], tensors) -> None:
    """Write a batch of tensors; the first axis is the batch count."""
    tensors = baddiff_utils._as_tensor(tensors, "tensor batch")

    if tensors.ndim < 1:
        raise baddiff_error.ShapeError("a tensor batch needs a leading count dimension")

    header = TENSOR_MAGIC + struct.pack(
        "<IBI", TENSOR_VERSION, _mode_for(tensors.ndim - 1), tensors.ndim
    )
    dims = struct.pack("<{}Q".format(tensors.ndim), *tensors.shape)
    _write(path, [header, dims, np.ascontiguousarray(tensors, dtype=_FLOAT).tobytes()])
    _logger.debug("wrote tensor batch %s to `%s`", tensors.shape, path)


def load_tensors(path: typing.Union[str, os.PathLike]) -> np.ndarray:
    reader = _Reader(_read(path), path)
    _read_header(reader, TENSOR_MAGIC, TENSOR_VERSION, "tensor")
    mode, rank = reader.unpack("<BI", "mode and rank")

    if mode not in (MODE_VECTOR, MODE_IMAGE, MODE_RAW):
        raise baddiff_error.FormatError("{}: unknown mode byte {}".format(path, mode))

    if rank < 1:
        raise baddiff_error.FormatError("{}: rank must be at least 1".format(path))

    if mode != _mode_for(rank - 1):
        raise baddiff_error.FormatError(
            "{}: mode byte {} does not match rank {}".format(path, mode, rank)
        )

    shape = reader.unpack("<{}Q".format(rank), "dimensions")
    data = reader.floats(int(np.prod(shape, dtype=np.int64)), "tensor data")
    reader.finish()
    return data.reshape(shape)


def save_checkpoint(
    path: typing.Union[str, os.PathLike],
    params: baddiff_denoiser.DenoiserParams,
    schedule: baddiff_schedule.NoiseSchedule,
    provenance: typing.Optional[typing.Mapping] = None,
) -> None:
    baddiff_utils._check_type(params, baddiff_denoiser.DenoiserParams)
    baddiff_utils._check_type(schedule, baddiff_schedule.NoiseSchedule)
    descriptor = {
        "architecture": params.architecture.descriptor(),
        "schedule": schedule.descriptor(),
        "provenance": dict(provenance or {}),
    }
    text = json.dumps(descriptor, sort_keys=True).encode("utf-8")
    header = CHECKPOINT_MAGIC + struct.pack("<IQ", CHECKPOINT_VERSION, len(text))
    arrays = [np.ascontiguousarray(a, dtype=_FLOAT).tobytes() for a in params.arrays()]
    _write(path, [header, text] + arrays)
    _logger.info("wrote checkpoint `%s` (%d parameters)", path, params.param_count)


def load_checkpoint(path: typing.Union[str, os.PathLike]) -> Checkpoint:
    reader = _Reader(_read(path), path)
    _read_header(reader, CHECKPOINT_MAGIC, CHECKPOINT_VERSION, "checkpoint")
    (length,) = reader.unpack("<Q", "descriptor length")

    try:
        descriptor = json.loads(reader.take(length, "descriptor").decode("utf-8"))
        arch = baddiff_denoiser.Architecture.from_descriptor(descriptor["architecture"])
        schedule_descriptor = dict(descriptor["schedule"])
        provenance = dict(descriptor["provenance"])
    except (UnicodeDecodeError, ValueError, KeyError, TypeError) as exc:
        if isinstance(exc, baddiff_error.FormatError):
            raise

        raise baddiff_error.FormatError(
            "{}: invalid checkpoint descriptor: {}".format(path, exc)
        ) from None

    arrays = []

    for n_in, n_out in arch.layer_sizes:
        arrays.append(reader.floats(n_out * n_in, "weights").reshape(n_out, n_in))
        arrays.append(reader.floats(n_out, "biases"))

    reader.finish()
    params = baddiff_denoiser.DenoiserParams.from_arrays(arch, arrays)
    return Checkpoint(params, schedule_descriptor, provenance)
