# SPDX-License-Identifier: MIT
#
# Copyright (c) 2026 The baddiff authors

# Noise predictor ε_θ(x_t, t): a fully connected network over the
# flattened input concatenated with a sinusoidal time embedding, with a
# hand-written reverse pass.

import enum
import math
import typing

import numpy as np
from scipy import special

from baddiff import error as baddiff_error
from baddiff import utils as baddiff_utils

DEFAULT_HIDDEN = (128, 128, 128)
DEFAULT_EMBED_DIM = 16
DEFAULT_INIT_SEED = 0

# Weights of a layer with fan-in n are drawn from U(−s/√n, s/√n).
INIT_SCALE = 1.0

_EMBED_MAX_PERIOD = 10000.0


class DenoiserMode(enum.Enum):
    VECTOR = "vector"
    IMAGE = "image"


class Architecture:
    def __init__(
        self,
        mode: DenoiserMode,
        data_shape: typing.Sequence[int],
        hidden: typing.Sequence[int] = DEFAULT_HIDDEN,
        embed_dim: int = DEFAULT_EMBED_DIM,
    ):
        baddiff_utils._check_type(mode, DenoiserMode)
        data_shape = tuple(baddiff_utils._check_positive_int(n, "data extent") for n in data_shape)
        expected_rank = 1 if mode is DenoiserMode.VECTOR else 2

        if len(data_shape) != expected_rank:
            raise baddiff_error.ShapeError(
                "{} mode needs a rank-{} data shape (got {})".format(
                    mode.value, expected_rank, data_shape
                )
            )

        hidden = tuple(baddiff_utils._check_positive_int(n, "hidden width") for n in hidden)

        if not hidden:
            raise baddiff_error.ParameterError("at least one hidden layer is required")

        embed_dim = baddiff_utils._check_positive_int(embed_dim, "time embedding dimension")

        if embed_dim % 2:
            raise baddiff_error.ParameterError(
                "time embedding dimension must be even (got {})".format(embed_dim)
            )

        self._mode = mode
        self._data_shape = data_shape
        self._hidden = hidden
        self._embed_dim = embed_dim

    @property
    def mode(self) -> DenoiserMode:
        return self._mode

    @property
    def data_shape(self) -> typing.Tuple[int, ...]:
        return self._data_shape

    @property
    def hidden(self) -> typing.Tuple[int, ...]:
        return self._hidden

    @property
    def embed_dim(self) -> int:
        return self._embed_dim

    @property
    def data_dim(self) -> int:
        return int(np.prod(self._data_shape))

    @property
    def layer_sizes(self) -> typing.List[typing.Tuple[int, int]]:
        """(fan-in, fan-out) of every layer, input layer first."""
        widths = (self.data_dim + self._embed_dim,) + self._hidden + (self.data_dim,)
        return list(zip(widths[:-1], widths[1:]))

    @property
    def param_count(self) -> int:
        return sum(n_in * n_out + n_out for n_in, n_out in self.layer_sizes)

    def descriptor(self) -> dict:
        return {
            "mode": self._mode.value,
            "data_shape": list(self._data_shape),
            "hidden": list(self._hidden),
            "embed_dim": self._embed_dim,
        }

    @classmethod
    def from_descriptor(cls, desc: typing.Mapping) -> "Architecture":
        try:
            return cls(
                DenoiserMode(desc["mode"]),
                [int(n) for n in desc["data_shape"]],
                [int(n) for n in desc["hidden"]],
                int(desc["embed_dim"]),
            )
        except (KeyError, TypeError, ValueError) as exc:
            if isinstance(exc, baddiff_error._Error):
                raise

            raise baddiff_error.ParameterError(
                "invalid architecture descriptor: {}".format(dict(desc))
            ) from None

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Architecture):
            return False

        return self.descriptor() == other.descriptor()

    def __repr__(self) -> str:
        return "Architecture(mode={}, data_shape={}, hidden={}, embed_dim={})".format(
            self._mode.value, self._data_shape, self._hidden, self._embed_dim
        )


class DenoiserParams:
    """Weights (fan-out × fan-in) and biases of every layer.

    Arrays are in declaration order: W_0, b_0, W_1, b_1, ...
    """

    def __init__(self, architecture: Architecture, weights, biases):
        baddiff_utils._check_type(architecture, Architecture)
        sizes = architecture.layer_sizes

        if len(weights) != len(sizes) or len(biases) != len(sizes):
            raise baddiff_error.ShapeError(
                "expecting {} layers (got {} weights, {} biases)".format(
                    len(sizes), len(weights), len(biases)
                )
            )

        self._weights = []
        self._biases = []

        for i, ((n_in, n_out), w, b) in enumerate(zip(sizes, weights, biases)):
            w = baddiff_utils._as_tensor(w, "weight {}".format(i))
            b = baddiff_utils._as_tensor(b, "bias {}".format(i))

            if w.shape != (n_out, n_in) or b.shape != (n_out,):
                raise baddiff_error.ShapeError(
                    "layer {}: expecting weight {} and bias {} (got {} and {})".format(
                        i, (n_out, n_in), (n_out,), w.shape, b.shape
                    )
                )

            self._weights.append(w)
            self._biases.append(b)

        self._architecture = architecture

    @classmethod
    def _create_unchecked(cls, architecture, weights, biases):
        # gradients may overflow; their consumers test finiteness
        params = cls.__new__(cls)
        params._architecture = architecture
        params._weights = list(weights)
        params._biases = list(biases)
        return params

    @property
    def architecture(self) -> Architecture:
        return self._architecture

    @property
    def weights(self) -> typing.List[np.ndarray]:
        return self._weights

    @property
    def biases(self) -> typing.List[np.ndarray]:
        return self._biases

    @property
    def param_count(self) -> int:
        return sum(w.size + b.size for w, b in zip(self._weights, self._biases))

    def arrays(self) -> typing.List[np.ndarray]:
        out = []

        for w, b in zip(self._weights, self._biases):
            out += [w, b]

        return out

    @classmethod
    def from_arrays(cls, architecture: Architecture, arrays) -> "DenoiserParams":
        arrays = list(arrays)
        return cls(architecture, arrays[0::2], arrays[1::2])

    def flat(self) -> np.ndarray:
        return np.concatenate([a.reshape(-1) for a in self.arrays()])

    @classmethod
    def from_flat(cls, architecture: Architecture, vec) -> "DenoiserParams":
        vec = baddiff_utils._as_tensor(vec, "parameter vector").reshape(-1)

        if vec.size != architecture.param_count:
            raise baddiff_error.ShapeError(
                "expecting {} parameters (got {})".format(architecture.param_count, vec.size)
            )

        arrays = []
        offset = 0

        for n_in, n_out in architecture.layer_sizes:
            arrays.append(vec[offset : offset + n_out * n_in].reshape(n_out, n_in))
            offset += n_out * n_in
            arrays.append(vec[offset : offset + n_out])
            offset += n_out

        return cls.from_arrays(architecture, arrays)

    def copy(self) -> "DenoiserParams":
        return DenoiserParams.from_arrays(self._architecture, [a.copy() for a in self.arrays()])

    def zeros_like(self) -> "DenoiserParams":
        return DenoiserParams.from_arrays(
            self._architecture, [np.zeros_like(a) for a in self.arrays()]
        )

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, DenoiserParams):
            return False

        return self._architecture == other._architecture and all(
            np.array_equal(a, b) for a, b in zip(self.arrays(), other.arrays())
        )


def init_params(architecture: Architecture, seed: int = DEFAULT_INIT_SEED) -> DenoiserParams:
    baddiff_utils._check_type(architecture, Architecture)
    rng = np.random.default_rng(baddiff_utils._check_int(seed))
    weights = []
    biases = []

    for n_in, n_out in architecture.layer_sizes:
        bound = INIT_SCALE / math.sqrt(n_in)
        weights.append(rng.uniform(-bound, bound, size=(n_out, n_in)))
        biases.append(np.zeros(n_out))

    return DenoiserParams(architecture, weights, biases)


def zero_params(architecture: Architecture) -> DenoiserParams:
    return DenoiserParams(
        architecture,
        [np.zeros((n_out, n_in)) for n_in, n_out in architecture.layer_sizes],
        [np.zeros(n_out) for _, n_out in architecture.layer_sizes],
    )


def time_embedding(t, k: int = DEFAULT_EMBED_DIM) -> np.ndarray:
    """Sinusoidal features [sin(t·f_i), cos(t·f_i)] of one or more timesteps.

    Frequencies f_i decay geometrically from 1 to 1/10000.
    """
    k = baddiff_utils._check_positive_int(k, "time embedding dimension")

    if k % 2:
        raise baddiff_error.ParameterError(
            "time embedding dimension must be even (got {})".format(k)
        )

    t = np.asarray(t, dtype=np.float64)
    half = k // 2
    freqs = np.exp(-math.log(_EMBED_MAX_PERIOD) * np.arange(half) / half)
    angles = t[..., None] * freqs
    return np.concatenate([np.sin(angles), np.cos(angles)], axis=-1)


def _silu(z):
    return z * special.expit(z)


def _silu_grad(z):
    sig = special.expit(z)
    return sig * (1.0 + z * (1.0 - sig))


def _flatten_input(architecture, x_t, t):
    # Returns the (B, d) batch, its per-sample timesteps and whether the
    # input was a single unbatched tensor.
    x_t = baddiff_utils._as_tensor(x_t, "x_t")
    shape = architecture.data_shape

    if x_t.shape == shape:
        single = True
        x_t = x_t[None]
    elif x_t.shape[1:] == shape:
        single = False
    else:
        raise baddiff_error.ShapeError(
            "input of shape {} does not match the {} architecture with data shape {}".format(
                x_t.shape, architecture.mode.value, shape
            )
        )

    B = x_t.shape[0]

    if isinstance(t, np.ndarray):
        if t.shape != (B,) or not np.issubdtype(t.dtype, np.integer):
            raise baddiff_error.ShapeError(
                "expecting {} integer timesteps (got array of shape {})".format(B, t.shape)
            )

        if t.size and t.min() < 0:
            raise baddiff_error.TimestepError("timesteps must be ≥ 0")

        ts = t
    else:
        t = baddiff_utils._check_non_negative_int(t, "timestep")
        ts = np.full(B, t, dtype=np.int64)

    return x_t.reshape(B, -1), ts, single


def _forward(params, X, ts):
    # X: (B, d).  The cache keeps each layer's input and pre-activation.
    h = np.concatenate([X, time_embedding(ts, params.architecture.embed_dim)], axis=1)
    cache = []
    last = len(params.weights) - 1

    for i, (w, b) in enumerate(zip(params.weights, params.biases)):
        z = h @ w.T + b
        cache.append((h, z))
        h = z if i == last else _silu(z)

    return h, cache


def _backward(params, cache, dY):
    grads_w = [None] * len(params.weights)
    grads_b = [None] * len(params.weights)
    dz = dY

    for i in reversed(range(len(params.weights))):
        h, _ = cache[i]
        grads_w[i] = dz.T @ h
        grads_b[i] = dz.sum(axis=0)

        if i:
            dz = (dz @ params.weights[i]) * _silu_grad(cache[i - 1][1])

    return DenoiserParams._create_unchecked(params.architecture, grads_w, grads_b)


def predict_noise(params: DenoiserParams, x_t, t) -> np.ndarray:
    baddiff_utils._check_type(params, DenoiserParams)
    X, ts, single = _flatten_input(params.architecture, x_t, t)
    Y, _ = _forward(params, X, ts)
    Y = Y.reshape((-1,) + params.architecture.data_shape)
    return Y[0] if single else Y


def loss_gradient(
    params: DenoiserParams, batch_inputs, batch_targets, batch_timesteps
) -> typing.Tuple[float, DenoiserParams]:
    """Mean squared error over batch and elements, and its exact gradient."""
    baddiff_utils._check_type(params, DenoiserParams)
    batch_inputs = baddiff_utils._as_tensor(batch_inputs, "batch inputs")
    batch_targets = baddiff_utils._as_tensor(batch_targets, "batch targets")

    if batch_inputs.ndim == 0 or batch_inputs.shape[0] == 0:
        raise baddiff_error.ParameterError("empty batch")

    baddiff_utils._check_same_shape(("inputs", batch_inputs), ("targets", batch_targets))
    timesteps = np.asarray(batch_timesteps)
    X, ts, single = _flatten_input(params.architecture, batch_inputs, timesteps)

    if single:
        raise baddiff_error.ShapeError("loss_gradient expects a batch of inputs")

    Y, cache = _forward(params, X, ts)
    residual = Y - batch_targets.reshape(Y.shape)
    loss = float(np.mean(residual * residual))
    dY = 2.0 * residual / residual.size
    return loss, _backward(params, cache, dY)
