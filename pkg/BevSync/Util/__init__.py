# -*- coding: utf-8 -*-
from __future__ import print_function, division


class BevSyncError(Exception):
    """Base class for all errors raised by BevSync."""


class ShapeError(BevSyncError, ValueError):
    """An operand has the wrong shape or extent."""


class ConfigError(BevSyncError, ValueError):
    """A run configuration violates one of its constraints."""


class FormatError(BevSyncError, ValueError):
    """An artifact on disk cannot be parsed."""


class StageError(BevSyncError, RuntimeError):
    """A pipeline stage failed, carries the stage name."""

    def __init__(self, stage, message):
        self._stage = stage
        super(StageError, self).__init__("Stage \"{0:s}\" failed: {1:s}".format(stage, message))

    @property
    def stage(self): return self._stage


def is_string(in_obj):
    return isinstance(in_obj, str)


def _as_pair(value, name="value"):
    """Turn an int or a 2-sequence into a tuple of two ints."""
    if isinstance(value, int):
        return (value, value)
    try:
        first, second = value
    except (TypeError, ValueError):
        raise ValueError("Invalid input for {0:s}, expected an int or a pair, not {1:s}.".format(name, str(value)))
    return (int(first), int(second))
