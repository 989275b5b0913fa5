# SPDX-License-Identifier: MIT
#
# Copyright (c) 2026 The baddiff authors

import pytest

import baddiff


def test_error_hierarchy():
    assert issubclass(baddiff.ParameterError, ValueError)
    assert issubclass(baddiff.ShapeError, ValueError)
    assert issubclass(baddiff.TimestepError, IndexError)
    assert issubclass(baddiff.NonFiniteError, ArithmeticError)
    assert issubclass(baddiff.StageError, RuntimeError)

    for cls in (baddiff.FormatError, baddiff.DegenerateStepError, baddiff.UnsupportedModeError):
        assert issubclass(cls, baddiff._Error)


def test_single_cause():
    exc = baddiff.ParameterError("bad value")

    assert len(exc) == 1
    assert exc.message == "bad value"
    assert exc[0].module_name == "baddiff.error"
    assert str(exc) == "[baddiff.error] bad value"


def test_details():
    exc = baddiff.NonFiniteError("diverged", step=3, lr=0.5)

    assert exc.step == 3
    assert exc.lr == 0.5
    assert exc[0].details == {"step": 3, "lr": 0.5}
    assert str(exc).endswith("diverged (lr=0.5, step=3)")


def test_stage_error_wraps_causes():
    inner = baddiff.NonFiniteError("diverged", step=7)
    exc = baddiff.StageError("train", inner)

    assert exc.stage == "train"
    assert len(exc) == 2
    assert exc[1].stage == "train"
    assert exc[1].message == "diverged"
    assert "caused by: [baddiff.error, stage `train`] diverged (step=7)" in str(exc)
    assert exc[1].to_dict()["details"] == {"step": "7"}


def test_stage_error_from_foreign_exception():
    exc = baddiff.StageError("data", OSError("disk full"))

    assert len(exc) == 2
    assert exc[1].message == "disk full"
    assert exc[1].stage == "data"


def test_raise_and_catch():
    with pytest.raises(ValueError) as exc:
        baddiff.make_linear_schedule(0)

    assert isinstance(exc.value, baddiff.ParameterError)
