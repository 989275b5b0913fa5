# SPDX-License-Identifier: MIT
#
# Copyright (c) 2026 The baddiff authors

import enum
import typing
from collections import namedtuple

import numpy as np

from baddiff import error as baddiff_error
from baddiff import logging as baddiff_logging
from baddiff import utils as baddiff_utils

_logger = baddiff_logging._get_logger(__name__)

# Defaults for full-length runs and for desk-scale experiments.
DEFAULT_BETA_START = 1e-4
DEFAULT_BETA_END = 0.02
DEFAULT_T = 1000
DESK_T = 100


class ScheduleKind(enum.Enum):
    LINEAR = "linear"
    EXPLICIT = "explicit"


CoefficientSet = namedtuple(
    "CoefficientSet",
    ["alpha", "alpha_bar", "alpha_bar_prev", "gamma", "rho", "delta", "beta_tilde", "beta"],
)


def _readonly(arr):
    arr.setflags(write=False)
    return arr


class NoiseSchedule:
    """Variance schedule β_1..β_T and its derived per-step arrays.

    Timesteps are 1-based everywhere in the public API; ᾱ_0 is 1.
    Instances are immutable.
    """

    def __init__(self, betas, kind: ScheduleKind = ScheduleKind.EXPLICIT):
        baddiff_utils._check_type(kind, ScheduleKind)
        betas = np.array(betas, dtype=np.float64).reshape(-1)

        if betas.size < 1:
            raise baddiff_error.ParameterError("a schedule needs at least one step")

        if not np.all(np.isfinite(betas)) or np.any(betas <= 0.0) or np.any(betas >= 1.0):
            raise baddiff_error.ParameterError("every β_t must lie strictly within (0, 1)")

        alphas = 1.0 - betas
        alpha_bars = np.cumprod(alphas)
        alpha_bars_prev = np.concatenate(([1.0], alpha_bars[:-1]))

        self._kind = kind
        self._betas = _readonly(betas)
        self._alphas = _readonly(alphas)
        self._alpha_bars = _readonly(alpha_bars)
        self._alpha_bars_prev = _readonly(alpha_bars_prev)
        self._gammas = _readonly(np.sqrt(alphas))
        self._rhos = _readonly(1.0 - np.sqrt(alphas))
        self._deltas = _readonly(np.sqrt(1.0 - alpha_bars))
        self._beta_tildes = _readonly((1.0 - alpha_bars_prev) / (1.0 - alpha_bars) * betas)

    @classmethod
    def from_betas(cls, betas) -> "NoiseSchedule":
        return cls(betas, ScheduleKind.EXPLICIT)

    @property
    def T(self) -> int:
        return int(self._betas.size)

    @property
    def kind(self) -> ScheduleKind:
        return self._kind

    @property
    def betas(self) -> np.ndarray:
        return self._betas

    @property
    def alphas(self) -> np.ndarray:
        return self._alphas

    @property
    def alpha_bars(self) -> np.ndarray:
        return self._alpha_bars

    @property
    def alpha_bars_prev(self) -> np.ndarray:
        return self._alpha_bars_prev

    @property
    def gammas(self) -> np.ndarray:
        return self._gammas

    @property
    def rhos(self) -> np.ndarray:
        return self._rhos

    @property
    def deltas(self) -> np.ndarray:
        return self._deltas

    @property
    def beta_tildes(self) -> np.ndarray:
        return self._beta_tildes

    @property
    def beta_start(self) -> float:
        return float(self._betas[0])

    @property
    def beta_end(self) -> float:
        return float(self._betas[-1])

    def alpha_bar_at(self, t: int) -> float:
        # t = 0 is allowed here: ᾱ_0 = 1
        t = baddiff_utils._check_timestep(t, self.T, lowest=0)
        return 1.0 if t == 0 else float(self._alpha_bars[t - 1])

    def descriptor(self) -> dict:
        desc = {
            "T": self.T,
            "beta_start": self.beta_start,
            "beta_end": self.beta_end,
            "schedule_kind": self._kind.value,
        }

        if self._kind is ScheduleKind.EXPLICIT:
            desc["betas"] = [float(b) for b in self._betas]

        return desc

    @classmethod
    def from_descriptor(cls, desc: typing.Mapping) -> "NoiseSchedule":
        try:
            kind = ScheduleKind(desc["schedule_kind"])
        except (KeyError, ValueError):
            raise baddiff_error.ParameterError(
                "invalid schedule descriptor: {}".format(dict(desc))
            ) from None

        if kind is ScheduleKind.LINEAR:
            return make_linear_schedule(int(desc["T"]), desc["beta_start"], desc["beta_end"])

        return cls.from_betas(desc["betas"])

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, NoiseSchedule):
            return False

        return self._kind == other._kind and np.array_equal(self._betas, other._betas)

    def __repr__(self) -> str:
        return "NoiseSchedule(kind={}, T={}, beta_start={!r}, beta_end={!r})".format(
            self._kind.value, self.T, self.beta_start, self.beta_end
        )


def make_linear_schedule(
    T: int = DESK_T,
    beta_start: float = DEFAULT_BETA_START,
    beta_end: float = DEFAULT_BETA_END,
) -> NoiseSchedule:
    T = baddiff_utils._check_int(T)
    beta_start = baddiff_utils._check_real(beta_start)
    beta_end = baddiff_utils._check_real(beta_end)

    if T < 1:
        raise baddiff_error.ParameterError("step count must be ≥ 1 (got {})".format(T))

    if not (0.0 < beta_start <= beta_end < 1.0):
        raise baddiff_error.ParameterError(
            "expecting 0 < beta_start ≤ beta_end < 1 (got {}, {})".format(beta_start, beta_end)
        )

    betas = np.linspace(beta_start, beta_end, T, dtype=np.float64)
    sched = NoiseSchedule(betas, ScheduleKind.LINEAR)
    _logger.debug(
        "linear schedule: T=%d, beta=[%g, %g], alpha_bar_T=%.3e",
        T,
        beta_start,
        beta_end,
        sched.alpha_bars[-1],
    )
    return sched


def coefficients(s: NoiseSchedule, t: int) -> CoefficientSet:
    baddiff_utils._check_type(s, NoiseSchedule)
    t = baddiff_utils._check_timestep(t, s.T)
    i = t - 1
    return CoefficientSet(
        alpha=float(s.alphas[i]),
        alpha_bar=float(s.alpha_bars[i]),
        alpha_bar_prev=float(s.alpha_bars_prev[i]),
        gamma=float(s.gammas[i]),
        rho=float(s.rhos[i]),
        delta=float(s.deltas[i]),
        beta_tilde=float(s.beta_tildes[i]),
        beta=float(s.betas[i]),
    )
