"""Value types for two-step trajectories and trajectory measurements.

A time window spans the fine steps ``k`` and ``k+1`` of the filter clock.
A two-step trajectory either dies inside the window, is born at its end or
is alive at both ends; a trajectory measurement symmetrically carries a
detection at the start, at the end, or at both ends of the window.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Optional

import numpy as np


class TrajectoryKind(enum.Enum):
    DIED = 1   # state at k only
    BORN = 2   # state at k+1 only
    ALIVE = 3  # states at k and k+1


class MeasurementKind(enum.Enum):
    FIRST = 1  # detection at k only
    LAST = 2   # detection at k+1 only
    FULL = 3   # detections at k and k+1

    @classmethod
    def parse(cls, value) -> "MeasurementKind":
        if isinstance(value, cls):
            return value
        if isinstance(value, str):
            try:
                return cls[value.upper()]
            except KeyError:
                pass
        raise ValueError(f"unknown measurement kind {value!r}")


@dataclass(frozen=True)
class WindowClock:
    """Maps a window index onto the fine sampling grid."""

    fine_steps_per_window: int
    fine_interval: float
    window_index: int = 0

    def __post_init__(self):
        if self.fine_steps_per_window < 1:
            raise ValueError("fine_steps_per_window must be positive")
        if self.fine_interval <= 0:
            raise ValueError("fine_interval must be positive")
        if self.window_index < 0:
            raise ValueError("window_index must be nonnegative")

    @property
    def window_interval(self) -> float:
        return self.fine_interval * self.fine_steps_per_window

    def boundaries(self, first_step: int = 0) -> tuple[int, int]:
        """Fine-step indices at the start and end of the current window."""
        start = first_step + self.window_index * self.fine_steps_per_window
        return start, start + self.fine_steps_per_window


@dataclass(frozen=True)
class TrajectoryMeasurement:
    kind: MeasurementKind
    z_first: Optional[np.ndarray] = None
    z_last: Optional[np.ndarray] = None

    def __post_init__(self):
        kind = MeasurementKind.parse(self.kind)
        object.__setattr__(self, "kind", kind)
        need_first = kind in (MeasurementKind.FIRST, MeasurementKind.FULL)
        need_last = kind in (MeasurementKind.LAST, MeasurementKind.FULL)
        for name, needed in (("z_first", need_first), ("z_last", need_last)):
            value = getattr(self, name)
            if needed and value is None:
                raise ValueError(f"{kind.name} measurement requires {name}")
            if not needed and value is not None:
                raise ValueError(f"{kind.name} measurement must not carry {name}")
            if value is not None:
                arr = np.atleast_1d(np.asarray(value, dtype=float))
                arr.setflags(write=False)
                object.__setattr__(self, name, arr)
        if kind is MeasurementKind.FULL and self.z_first.shape != self.z_last.shape:
            raise ValueError("both endpoints of a full measurement need the same dimension")

    @property
    def start_offset(self) -> int:
        """0 when the measurement starts at k, 1 when it starts at k+1."""
        return 1 if self.kind is MeasurementKind.LAST else 0

    @property
    def stacked(self) -> np.ndarray:
        """All detections stacked in time order."""
        if self.kind is MeasurementKind.FULL:
            return np.concatenate([self.z_first, self.z_last])
        return self.z_first if self.kind is MeasurementKind.FIRST else self.z_last

    @property
    def dim(self) -> int:
        return self.stacked.size


def make_measurement(kind, z_first=None, z_last=None) -> TrajectoryMeasurement:
    return TrajectoryMeasurement(MeasurementKind.parse(kind), z_first, z_last)


def measurement_dim(kind) -> tuple[int, int]:
    """``(mu, iota)``: the measurement-space index and number of detections."""
    kind = MeasurementKind.parse(kind)
    return kind.value, 2 if kind is MeasurementKind.FULL else 1
