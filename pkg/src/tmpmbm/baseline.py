"""Point-measurement PMBM / PMB filters used as the comparison baseline.

They keep only the window-end detection of each trajectory measurement. The
recursion is the same hypothesis engine as the trajectory filter run with a
sensor that only ever reports the window end: a detection probability of
``p^D (1 - gamma)`` and the window-end marginal of the trajectory clutter.
"""

from __future__ import annotations

from dataclasses import replace

import numpy as np

from .filter import FilterConfig, step
from .models import MeasurementModel
from .trajectory import MeasurementKind, TrajectoryMeasurement


def adjusted_detect_prob(meas: MeasurementModel) -> float:
    """Probability that a target yields a detection at the window end."""
    return meas.detect_prob * (1.0 - meas.gamma)


def strip_measurements(Z_set) -> list:
    """Window-end points of a set of trajectory measurements."""
    out = []
    for Z in Z_set:
        if Z.kind is not MeasurementKind.FIRST:
            out.append(np.array(Z.z_last))
    return out


def baseline_config(cfg: FilterConfig) -> FilterConfig:
    """Point-target configuration matching a trajectory-filter configuration."""
    meas = MeasurementModel.point(cfg.meas.H, cfg.meas.R, adjusted_detect_prob(cfg.meas))
    return replace(cfg, meas=meas, clutter=cfg.clutter.at_window_end())


def baseline_step(posterior, points, cfg: FilterConfig):
    """One window of the point filter; ``cfg`` must come from :func:`baseline_config`."""
    if not cfg.meas.point_only:
        raise ValueError("baseline_step needs a point-only measurement model")
    Z_set = [TrajectoryMeasurement(MeasurementKind.LAST, z_last=z) for z in points]
    return step(posterior, Z_set, cfg)
