# SPDX-License-Identifier: MIT
#
# Copyright (c) 2026 The baddiff authors

import json
import math
import typing

import numpy as np
from scipy import linalg, ndimage
from scipy.spatial import distance

from baddiff import error as baddiff_error
from baddiff import logging as baddiff_logging
from baddiff import sampling as baddiff_sampling
from baddiff import utils as baddiff_utils

_logger = baddiff_logging._get_logger(__name__)

SSIM_K1 = 0.01
SSIM_K2 = 0.03
SSIM_DYNAMIC_RANGE = 1.0
SSIM_MAX_WINDOW = 8

FD_REGULARIZATION = 1e-6
DEFAULT_MMD_PERMUTATIONS = 200


def _batch(samples, what="samples"):
    samples = baddiff_utils._as_tensor(samples, what)

    if samples.ndim < 1 or samples.shape[0] == 0:
        raise baddiff_error.ParameterError("{} batch is empty".format(what))

    return samples


def _flatten_set(x, what):
    x = _batch(x, what)
    return x.reshape(x.shape[0], -1)


def target_mse(samples, y) -> float:
    """Mean over the batch of each sample's mean squared error to `y`."""
    samples = _batch(samples)
    y = baddiff_utils._as_tensor(y, "target")

    if samples.shape[1:] != y.shape:
        raise baddiff_error.ShapeError(
            "samples of shape {} do not match target shape {}".format(samples.shape[1:], y.shape)
        )

    diff = (samples - y).reshape(samples.shape[0], -1)
    return float(np.mean(np.mean(diff * diff, axis=1)))


def ssim(a, b) -> float:
    """Mean structural similarity of two display-space images in [0, 1]."""
    a = baddiff_utils._as_tensor(a, "a")
    b = baddiff_utils._as_tensor(b, "b")

    if a.ndim != 2 or b.ndim != 2:
        raise baddiff_error.UnsupportedModeError("SSIM needs image-mode (rank-2) inputs")

    baddiff_utils._check_same_shape(("a", a), ("b", b))
    win = min(SSIM_MAX_WINDOW, *a.shape)
    c1 = (SSIM_K1 * SSIM_DYNAMIC_RANGE) ** 2
    c2 = (SSIM_K2 * SSIM_DYNAMIC_RANGE) ** 2

    def filt(x):
        return ndimage.uniform_filter(x, size=win, mode="reflect")

    mu_a = filt(a)
    mu_b = filt(b)
    mu_aa = mu_a * mu_a
    mu_bb = mu_b * mu_b
    mu_ab = mu_a * mu_b
    var_a = filt(a * a) - mu_aa
    var_b = filt(b * b) - mu_bb
    cov = filt(a * b) - mu_ab
    numerator = (2.0 * mu_ab + c1) * (2.0 * cov + c2)
    denominator = (mu_aa + mu_bb + c1) * (var_a + var_b + c2)
    ssim_map = numerator / denominator
    return float(np.mean(ssim_map))


def mean_ssim(samples, y) -> float:
    """Average SSIM between every model-space sample and the model-space target."""
    samples = _batch(samples)
    y_disp = baddiff_sampling.to_display(baddiff_utils._as_tensor(y, "target"))
    disp = baddiff_sampling.to_display(samples)
    return float(np.mean([ssim(s, y_disp) for s in disp]))


def _gaussian_fit(x, what):
    x = _flatten_set(x, what)
    n, d = x.shape

    if n < 2:
        raise baddiff_error.ParameterError("{} needs at least two samples".format(what))

    cov = np.atleast_2d(np.cov(x, rowvar=False))

    if n <= d:
        _logger.warning(
            "%s: %d samples for dimension %d; regularising the covariance", what, n, d
        )
        cov = cov + FD_REGULARIZATION * np.eye(d)

    return x.mean(axis=0), cov


def _sqrt_psd(m):
    vals, vecs = linalg.eigh(m)
    return (vecs * np.sqrt(np.clip(vals, 0.0, None))) @ vecs.T


def frechet_gaussian_distance(set_a, set_b) -> float:
    """Fréchet distance between Gaussians fitted to two flattened sample sets."""
    mu_a, cov_a = _gaussian_fit(set_a, "set_a")
    mu_b, cov_b = _gaussian_fit(set_b, "set_b")

    if mu_a.shape != mu_b.shape:
        raise baddiff_error.ShapeError("sample sets have different dimensions")

    # Tr((Σ_a Σ_b)^½) = Tr((Σ_a^½ Σ_b Σ_a^½)^½)
    root_a = _sqrt_psd(cov_a)
    inner = root_a @ cov_b @ root_a
    inner = 0.5 * (inner + inner.T)
    tr_cross = float(np.sum(np.sqrt(np.clip(linalg.eigvalsh(inner), 0.0, None))))
    diff = mu_a - mu_b
    fd = float(diff @ diff) + float(np.trace(cov_a) + np.trace(cov_b)) - 2.0 * tr_cross
    return max(fd, 0.0)


def _kernel(x, y, bandwidth):
    return np.exp(-0.5 * distance.cdist(x, y, "sqeuclidean") / bandwidth**2)


def _mmd_from_blocks(k_xx, k_yy, k_xy):
    m = k_xx.shape[0]
    n = k_yy.shape[0]
    a = (k_xx.sum() - np.trace(k_xx)) / (m * (m - 1))
    b = (k_yy.sum() - np.trace(k_yy)) / (n * (n - 1))
    c = 2.0 * k_xy.sum() / (m * n)
    return float(a + b - c)


def _mmd_flat(x, y, bandwidth):
    return _mmd_from_blocks(
        _kernel(x, x, bandwidth), _kernel(y, y, bandwidth), _kernel(x, y, bandwidth)
    )


def _mmd_sets(set_a, set_b):
    x = _flatten_set(set_a, "set_a")
    y = _flatten_set(set_b, "set_b")

    if x.shape[0] < 2 or y.shape[0] < 2:
        raise baddiff_error.ParameterError("kernel MMD needs at least two samples per set")

    if x.shape[1] != y.shape[1]:
        raise baddiff_error.ShapeError("sample sets have different dimensions")

    return x, y


def kernel_mmd(set_a, set_b, bandwidth: float) -> float:
    """Unbiased squared MMD with a Gaussian kernel; may be slightly negative."""
    bandwidth = baddiff_utils._check_positive_real(bandwidth, "bandwidth")
    x, y = _mmd_sets(set_a, set_b)
    return _mmd_flat(x, y, bandwidth)


def median_bandwidth(set_a, set_b) -> float:
    """Median pairwise distance over the pooled samples."""
    x, y = _mmd_sets(set_a, set_b)
    med = float(np.median(distance.pdist(np.concatenate([x, y]))))

    if not med > 0:
        _logger.warning("median pairwise distance is zero; using bandwidth 1")
        return 1.0

    return med


def kernel_mmd_zscore(
    set_a,
    set_b,
    bandwidth: typing.Optional[float] = None,
    rng: typing.Optional[np.random.Generator] = None,
    permutations: int = DEFAULT_MMD_PERMUTATIONS,
) -> float:
    """Standardised MMD estimate against its permutation null distribution."""
    x, y = _mmd_sets(set_a, set_b)
    bandwidth = median_bandwidth(x, y) if bandwidth is None else bandwidth
    bandwidth = baddiff_utils._check_positive_real(bandwidth, "bandwidth")
    permutations = baddiff_utils._check_positive_int(permutations, "permutation count")
    rng = rng if rng is not None else np.random.default_rng(0)
    pooled = np.concatenate([x, y])
    k = _kernel(pooled, pooled, bandwidth)
    m = x.shape[0]
    observed = _mmd_from_blocks(k[:m, :m], k[m:, m:], k[:m, m:])
    null = np.empty(permutations)

    for i in range(permutations):
        perm = rng.permutation(pooled.shape[0])
        a, b = perm[:m], perm[m:]
        null[i] = _mmd_from_blocks(k[np.ix_(a, a)], k[np.ix_(b, b)], k[np.ix_(a, b)])

    std = float(np.std(null))

    if std == 0.0:
        return 0.0

    return (observed - float(np.mean(null))) / std


class MetricsReport:
    """Named metric values with the sample counts and seeds they came from."""

    def __init__(
        self,
        values: typing.Mapping[str, float],
        counts: typing.Mapping[str, int],
        seeds: typing.Optional[typing.Mapping[str, int]] = None,
    ):
        self._values = {}
        self._counts = {}

        for name, value in values.items():
            value = baddiff_utils._check_real(value)

            if not math.isfinite(value):
                raise baddiff_error.ParameterError("metric `{}` is not finite".format(name))

            self._values[baddiff_utils._check_str(name)] = value

        for name, count in counts.items():
            self._counts[name] = baddiff_utils._check_positive_int(count, "count `{}`".format(name))

        self._seeds = {k: int(v) for k, v in (seeds or {}).items()}

    @property
    def values(self) -> typing.Mapping[str, float]:
        return self._values

    @property
    def counts(self) -> typing.Mapping[str, int]:
        return self._counts

    @property
    def seeds(self) -> typing.Mapping[str, int]:
        return self._seeds

    def __getitem__(self, name: str) -> float:
        return self._values[name]

    def __contains__(self, name: object) -> bool:
        return name in self._values

    def to_dict(self) -> dict:
        return {
            "metrics": dict(self._values),
            "counts": dict(self._counts),
            "seeds": dict(self._seeds),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=2) + "\n"

    def to_csv_rows(self) -> typing.List[typing.List]:
        return [["metric", "value"]] + [
            [name, "{:.17g}".format(self._values[name])] for name in sorted(self._values)
        ]
