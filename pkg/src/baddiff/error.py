# SPDX-License-Identifier: MIT
#
# Copyright (c) 2026 The baddiff authors

import typing
from collections import abc


class _ErrorCause:
    def __init__(
        self,
        message: str,
        module_name: typing.Optional[str] = None,
        stage: typing.Optional[str] = None,
        details: typing.Optional[typing.Mapping[str, typing.Any]] = None,
    ):
        self._message = message
        self._module_name = module_name
        self._stage = stage
        self._details = dict(details) if details is not None else {}

    def __str__(self) -> str:
        where = []

        if self._module_name is not None:
            where.append(self._module_name)

        if self._stage is not None:
            where.append("stage `{}`".format(self._stage))

        prefix = "[{}] ".format(", ".join(where)) if where else ""
        extra = ""

        if self._details:
            extra = " ({})".format(
                ", ".join("{}={}".format(k, self._details[k]) for k in sorted(self._details))
            )

        return prefix + self._message + extra

    @property
    def message(self) -> str:
        return self._message

    @property
    def module_name(self) -> typing.Optional[str]:
        return self._module_name

    @property
    def stage(self) -> typing.Optional[str]:
        return self._stage

    @property
    def details(self) -> typing.Mapping[str, typing.Any]:
        return self._details

    def to_dict(self) -> dict:
        return {
            "message": self._message,
            "module_name": self._module_name,
            "stage": self._stage,
            "details": {k: str(v) for k, v in sorted(self._details.items())},
        }


class _Error(Exception, abc.Sequence):
    """baddiff error.

    Carries an ordered list of causes, innermost first.  The first cause
    is always the one describing this error itself.
    """

    def __init__(
        self,
        msg: str,
        causes: typing.Optional[typing.Iterable[_ErrorCause]] = None,
        **details,
    ):
        super().__init__(msg)
        self._msg = msg
        self._causes = [_ErrorCause(msg, self.__class__.__module__, details=details)]

        # An empty cause list would make the exception falsy through
        # abc.Sequence.__bool__, which confuses `traceback`.
        if causes is not None:
            self._causes.extend(causes)

        assert len(self._causes) > 0

    def __getitem__(self, index: int) -> _ErrorCause:
        return self._causes[index]

    def __len__(self) -> int:
        return len(self._causes)

    def __str__(self) -> str:
        if len(self._causes) == 1:
            return str(self._causes[0])

        return "\n".join([str(self._causes[0])] + ["  caused by: " + str(c) for c in self[1:]])

    @property
    def message(self) -> str:
        return self._msg


class ParameterError(_Error, ValueError):
    """Raised when a parameter is outside its valid domain."""


class ShapeError(_Error, ValueError):
    """Raised when tensor shapes or architecture modes do not agree."""


class TimestepError(_Error, IndexError):
    pass


class DegenerateStepError(_Error, ValueError):
    """Raised when a posterior is requested at t = 1, where it collapses to x0."""


class NonFiniteError(_Error, ArithmeticError):
    """Raised when a loss or latent becomes NaN or infinite."""

    def __init__(self, msg: str, step: int, lr: typing.Optional[float] = None, **details):
        if lr is not None:
            details["lr"] = lr

        super().__init__(msg, step=step, **details)
        self._step = step
        self._lr = lr

    @property
    def step(self) -> int:
        return self._step

    @property
    def lr(self) -> typing.Optional[float]:
        return self._lr


class FormatError(_Error, ValueError):
    """Raised when a tensor or checkpoint file is malformed."""


class UnsupportedModeError(_Error, ValueError):
    pass


class StageError(_Error, RuntimeError):
    """Raised by the experiment orchestrator when one of its stages fails."""

    def __init__(self, stage: str, error: BaseException):
        inner = [_ErrorCause(str(error), error.__class__.__module__, stage=stage)]

        if isinstance(error, _Error):
            inner = [
                _ErrorCause(c.message, c.module_name, stage=stage, details=c.details)
                for c in error
            ]

        super().__init__("stage `{}` failed".format(stage), causes=inner)
        self._stage = stage

    @property
    def stage(self) -> str:
        return self._stage
