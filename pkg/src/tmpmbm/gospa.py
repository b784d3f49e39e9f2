"""GOSPA metric (alpha = 2) with its localisation / missed / false decomposition."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .association import optimal_assignment


@dataclass(frozen=True)
class GospaResult:
    """GOSPA error and its components, all in distance units.

    ``total**p == localisation**p + missed**p + false_**p``.
    """

    total: float
    localisation: float
    missed: float
    false_: float
    n_missed: int = 0
    n_false: int = 0


def _as_points(X) -> np.ndarray:
    X = np.asarray(X, dtype=float)
    if X.size == 0:
        return X.reshape(0, X.shape[-1] if X.ndim == 2 else 0)
    return np.atleast_2d(X) if X.ndim > 1 else X.reshape(-1, 1)


def gospa(truth, est, c: float = 10.0, p: float = 2.0) -> GospaResult:
    """GOSPA distance between two finite point sets (rows are points)."""
    if c <= 0 or p < 1:
        raise ValueError("need c > 0 and p >= 1")
    X, Y = _as_points(truth), _as_points(est)
    nx, ny = len(X), len(Y)
    half = c**p / 2.0
    loc, n_pairs = 0.0, 0
    if nx and ny:
        D = np.linalg.norm(X[:, None, :] - Y[None, :, :], axis=-1) ** p
        # dummies: X_i left alone / Y_j left alone each cost c^p / 2
        big = np.full((nx + ny, ny + nx), np.inf)
        big[:nx, :ny] = np.minimum(D, c**p)
        big[:nx, ny:][np.diag_indices(nx)] = half
        big[nx:, :ny][np.diag_indices(ny)] = half
        big[nx:, ny:] = 0.0
        cols, _ = optimal_assignment(big)
        for i in range(nx):
            j = cols[i]
            if j < ny and D[i, j] < c**p:
                loc += D[i, j]
                n_pairs += 1
    n_missed, n_false = nx - n_pairs, ny - n_pairs
    missed, false_ = half * n_missed, half * n_false
    root = 1.0 / p
    return GospaResult(
        total=(loc + missed + false_) ** root,
        localisation=loc**root,
        missed=missed**root,
        false_=false_**root,
        n_missed=n_missed,
        n_false=n_false,
    )


def rms(results: Sequence[GospaResult]) -> GospaResult:
    """Component-wise root mean square over windows and runs."""
    if len(results) == 0:
        raise ValueError("rms of an empty series")
    arr = np.array([[r.total, r.localisation, r.missed, r.false_] for r in results])
    tot, loc, mis, fal = np.sqrt(np.mean(arr**2, axis=0))
    return GospaResult(float(tot), float(loc), float(mis), float(fal),
                       int(sum(r.n_missed for r in results)),
                       int(sum(r.n_false for r in results)))
