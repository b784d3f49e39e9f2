"""Self-checks against independent reference computations.

Each suite compares the library with a brute-force or closed-form oracle
written without reusing the code under test, and returns a :class:`SuiteResult`.
"""

from __future__ import annotations

import itertools
import time
from dataclasses import dataclass

import numpy as np

from .association import InfeasibleAssignmentError, murty_kbest
from .density import LocalHypothesis, PmbmState
from .filter import FilterConfig, Thresholds, predict, step, update
from .gaussian import Gaussian
from .gospa import gospa
from .models import BirthModel, ClutterModel, MeasurementModel, MotionModel, sample_clutter
from .trajectory import MeasurementKind, TrajectoryMeasurement


@dataclass(frozen=True)
class SuiteResult:
    name: str
    passed: bool
    detail: str
    seconds: float


def brute_force_assignments(cost: np.ndarray) -> list:
    """Every feasible assignment as ``(total, columns)``, sorted by cost."""
    m, n = cost.shape
    out = []
    for cols in itertools.permutations(range(n), m):
        total = sum(cost[i, j] for i, j in enumerate(cols))
        if np.isfinite(total):
            out.append((total, cols))
    return sorted(out)


def brute_force_gospa(X, Y, c=10.0, p=2.0) -> float:
    """GOSPA (alpha = 2) by enumerating every partial matching."""
    X, Y = np.asarray(X, float).reshape(-1, 2), np.asarray(Y, float).reshape(-1, 2)
    nx, ny = len(X), len(Y)
    if nx > ny:
        X, Y, nx, ny = Y, X, ny, nx
    best = np.inf
    for cols in itertools.permutations(range(ny), nx):
        total = 0.0
        for i, j in enumerate(cols):
            d = np.sqrt(np.sum((X[i] - Y[j]) ** 2))
            total += min(d, c) ** p  # min(d, c)^p == pairing or leaving both unassigned
        total += c**p / 2 * (ny - nx)
        best = min(best, total)
    if nx == 0:
        best = c**p / 2 * ny
    return best ** (1.0 / p)


def stacked_kalman_oracle(m, P, Z_pairs, F, Q, H, R):
    """Window-end posteriors of a single target observed at both window ends.

    Uses the joint Gaussian of consecutive states and the stacked observation,
    then keeps the window-end block.
    """
    n = len(m)
    Hs = np.kron(np.eye(2), H)
    Rs = np.kron(np.eye(2), R)
    out = []
    for z1, z2 in Z_pairs:
        mean = np.concatenate([m, F @ m])
        cov = np.block([[P, P @ F.T], [F @ P, F @ P @ F.T + Q]])
        S = Hs @ cov @ Hs.T + Rs
        K = np.linalg.solve(S, Hs @ cov).T
        mean = mean + K @ (np.concatenate([z1, z2]) - Hs @ mean)
        cov = cov - K @ S @ K.T
        m, P = mean[n:], cov[n:, n:]
        out.append((m.copy(), P.copy()))
    return out


def kalman_equivalence_case(seed: int = 0, n_windows: int = 50, n_w: int = 5):
    """Filter and oracle posteriors for one target with certain detection."""
    rng = np.random.default_rng(seed)
    motion = MotionModel.ncv(0.2, n_w, 0.01)
    meas = MeasurementModel.position(0.1, 1.0, 1.0)
    cfg = FilterConfig(motion, meas, BirthModel(), ClutterModel(0.0, 0.0, [[0, 100], [0, 100]]))
    m0, P0 = np.array([50.0, 1.0, 50.0, -1.0]), np.diag([4.0, 1.0, 4.0, 1.0])
    state = PmbmState((), [[LocalHypothesis(0.0, 1.0, Gaussian(m0, P0))]])
    x = m0.copy()
    pairs, got = [], []
    for _ in range(n_windows):
        x2 = motion.F @ x + rng.multivariate_normal(np.zeros(4), motion.Q)
        z1 = meas.H @ x + rng.multivariate_normal(np.zeros(2), meas.R)
        z2 = meas.H @ x2 + rng.multivariate_normal(np.zeros(2), meas.R)
        pairs.append((z1, z2))
        state, _, _ = step(state, [TrajectoryMeasurement(MeasurementKind.FULL, z1, z2)], cfg)
        best = state.assignments[state.best_global()]
        h = state.targets[0][best[0]]
        got.append((h.r, h.density.mean, h.density.cov))
        x = x2
    want = stacked_kalman_oracle(m0, P0, pairs, motion.F, motion.Q, meas.H, meas.R)
    return got, want


def _suite_murty(fault):
    rng = np.random.default_rng(11)
    for _ in range(200):
        m = int(rng.integers(1, 5))
        n = int(rng.integers(m, 5))
        cost = rng.normal(size=(m, n))
        cost[rng.random((m, n)) < 0.2] = np.inf
        ref = brute_force_assignments(cost)
        try:
            got = murty_kbest(cost, max(1, len(ref)))
        except InfeasibleAssignmentError:
            if ref:
                return False, "reported infeasible but a feasible assignment exists"
            continue
        totals = [c for _, c in got]
        if fault:
            totals[0] += 1.0
        if len(got) != len(ref) or np.max(np.abs(np.subtract(totals, [c for c, _ in ref]))) > 1e-12:
            return False, f"mismatch on a {m}x{n} matrix"
    return True, "200 matrices"


def _suite_gospa(fault):
    rng = np.random.default_rng(12)
    for _ in range(200):
        X = rng.uniform(0, 20, size=(rng.integers(0, 6), 2))
        Y = rng.uniform(0, 20, size=(rng.integers(0, 6), 2))
        got = gospa(X, Y).total + (1.0 if fault else 0.0)
        if abs(got - brute_force_gospa(X, Y)) > 1e-12:
            return False, f"mismatch with |X|={len(X)}, |Y|={len(Y)}"
    return True, "200 set pairs"


def _suite_kalman(fault):
    got, want = kalman_equivalence_case()
    err = 0.0
    for (r, m, P), (mo, Po) in zip(got, want):
        err = max(err, abs(r - 1.0), np.abs(m - mo).max(), np.abs(P - Po).max())
    if fault:
        err += 1.0
    return err <= 1e-9, f"max abs error {err:.3g} over {len(want)} windows"


def _suite_normalisation(fault):
    rng = np.random.default_rng(13)
    motion = MotionModel.ncv(0.2, 5, 0.01)
    meas = MeasurementModel.position(0.1, 0.9, 0.7)
    clutter = ClutterModel.from_total(5.0, [[0, 100], [0, 100]])
    birth = BirthModel.single(0.5, [50, 0, 50, 0], np.diag([50.0, 1, 50, 1]) ** 2)
    cfg = FilterConfig(motion, meas, birth, clutter, Thresholds(n_h=50))
    state = PmbmState()
    for _ in range(10):
        Z = sample_clutter(clutter, rng)
        upd = update(predict(state, cfg), Z, cfg)
        total = upd.weights.sum() + (1.0 if fault else 0.0)
        if abs(total - 1.0) > 1e-12:
            return False, f"global weights sum to {total!r}"
        for hyps in upd.targets:
            for h in hyps:
                if not 0.0 <= h.r <= 1.0 or abs(sum(h.beta) - 1.0) > 1e-12:
                    return False, "existence or branch probabilities out of range"
        state, _, _ = step(state, Z, cfg)
    return True, "10 windows of clutter"


SUITES = {
    "murty-brute-force": _suite_murty,
    "gospa-brute-force": _suite_gospa,
    "kalman-equivalence": _suite_kalman,
    "normalisation": _suite_normalisation,
}


def run_suites(fault: str | None = None) -> list:
    """Run every suite; ``fault`` names a suite whose comparison is perturbed."""
    out = []
    for name, fn in SUITES.items():
        t0 = time.perf_counter()
        try:
            ok, detail = fn(fault == name)
        except Exception as err:  # a crash counts as a failure
            ok, detail = False, f"{type(err).__name__}: {err}"
        out.append(SuiteResult(name, bool(ok), detail, time.perf_counter() - t0))
    return out
