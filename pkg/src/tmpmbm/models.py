"""Motion, birth, trajectory-measurement and clutter models (linear-Gaussian)."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .gaussian import Gaussian, LinearObservation, gaussian_eval, moment_match, symmetrize
from .trajectory import MeasurementKind, TrajectoryKind, TrajectoryMeasurement


def ncv_matrices(interval: float, q: float):
    """Nearly-constant-velocity F and Q for the state ``[px, vx, py, vy]``."""
    F1 = np.array([[1.0, interval], [0.0, 1.0]])
    Q1 = np.array([[interval**3 / 3, interval**2 / 2], [interval**2 / 2, interval]])
    return np.kron(np.eye(2), F1), q * np.kron(np.eye(2), Q1)


@dataclass(frozen=True)
class MotionModel:
    F: np.ndarray
    Q: np.ndarray
    survive_per_fine_step: float = 0.99
    fine_steps: int = 1

    def __post_init__(self):
        object.__setattr__(self, "F", np.atleast_2d(np.asarray(self.F, dtype=float)))
        object.__setattr__(self, "Q", np.atleast_2d(np.asarray(self.Q, dtype=float)))
        if not 0.0 <= self.survive_per_fine_step <= 1.0:
            raise ValueError("survival probability must lie in [0, 1]")
        if np.linalg.eigvalsh(symmetrize(self.Q)).min() < -1e-12:
            raise ValueError("Q must be positive semidefinite")

    @classmethod
    def ncv(cls, fine_interval=0.2, fine_steps=1, q=0.01, survive_per_fine_step=0.99):
        F, Q = ncv_matrices(fine_interval * fine_steps, q)
        return cls(F, Q, survive_per_fine_step, fine_steps)

    @property
    def survive_prob(self) -> float:
        """Survival probability over one window of ``fine_steps`` steps."""
        return self.survive_per_fine_step**self.fine_steps

    @property
    def dim(self) -> int:
        return self.F.shape[0]


_VALID_PAIRS = {(1, 3), (2, 3), (3, 3), (1, 1), (2, 2)}


@dataclass(frozen=True)
class MeasurementModel:
    """Trajectory-measurement model.

    A detected alive trajectory yields a full measurement with probability
    ``full_given_detect`` and either partial kind with ``gamma`` each. With
    ``point_only`` the model degenerates to a point-target sensor at the
    window end: alive trajectories only give LAST measurements and
    trajectories that died inside the window are never detected.
    """

    H: np.ndarray
    R: np.ndarray
    detect_prob: float = 0.9
    full_given_detect: float = 0.9
    point_only: bool = False
    _cache: dict = field(default_factory=dict, init=False, repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "H", np.atleast_2d(np.asarray(self.H, dtype=float)))
        object.__setattr__(self, "R", np.atleast_2d(np.asarray(self.R, dtype=float)))
        for name in ("detect_prob", "full_given_detect"):
            if not 0.0 <= getattr(self, name) <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1]")
        if np.linalg.eigvalsh(symmetrize(self.R)).min() <= 0:
            raise ValueError("R must be positive definite")

    @classmethod
    def position(cls, sigma2=0.1, detect_prob=0.9, full_given_detect=0.9):
        H = np.kron(np.eye(2), np.array([[1.0, 0.0]]))
        return cls(H, sigma2 * np.eye(2), detect_prob, full_given_detect)

    @classmethod
    def point(cls, H, R, detect_prob):
        return cls(H, R, detect_prob, 0.0, point_only=True)

    @property
    def gamma(self) -> float:
        return 0.5 * (1.0 - self.full_given_detect)

    @property
    def kind_probs(self) -> dict:
        """Probability of each measurement kind given an alive trajectory is detected."""
        if self.point_only:
            return {MeasurementKind.FULL: 0.0, MeasurementKind.FIRST: 0.0, MeasurementKind.LAST: 1.0}
        g = self.gamma
        return {MeasurementKind.FULL: self.full_given_detect,
                MeasurementKind.FIRST: g, MeasurementKind.LAST: g}

    def detect_prob_for(self, kind: TrajectoryKind) -> float:
        if kind is TrajectoryKind.DIED and self.point_only:
            return 0.0
        return self.detect_prob

    @property
    def n_z(self) -> int:
        return self.H.shape[0]

    @property
    def n_x(self) -> int:
        return self.H.shape[1]


def observation_matrix(model: MeasurementModel, mu: int, tau: int) -> LinearObservation:
    """``H_{mu,tau}`` together with the stacked noise ``I_iota (x) R``."""
    if (mu, tau) not in _VALID_PAIRS:
        raise ValueError(f"measurement space {mu} cannot observe trajectory space {tau}")
    key = (mu, tau)
    if key not in model._cache:
        H, R = model.H, model.R
        if tau == 3:
            sel = {1: [[1.0, 0.0]], 2: [[0.0, 1.0]], 3: np.eye(2)}[mu]
            Hm = np.kron(np.asarray(sel), H)
        else:
            Hm = H
        Rm = np.kron(np.eye(2), R) if mu == 3 else R
        model._cache[key] = LinearObservation(Hm, Rm)
    return model._cache[key]


def measurement_density(model: MeasurementModel, Z: TrajectoryMeasurement,
                        X_kind: TrajectoryKind, x) -> float:
    """Density ``l(Z | X)`` of a target-generated trajectory measurement."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    expected = 2 * model.n_x if X_kind is TrajectoryKind.ALIVE else model.n_x
    if x.size != expected:
        raise ValueError(f"{X_kind.name} trajectory needs a {expected}-D state, got {x.size}")
    mu, tau = Z.kind.value, X_kind.value
    if X_kind is TrajectoryKind.ALIVE:
        factor = model.kind_probs[Z.kind]
    elif (mu, tau) in _VALID_PAIRS and model.detect_prob_for(X_kind) > 0:
        factor = 1.0
    else:
        return 0.0
    if factor == 0.0:
        return 0.0
    obs = observation_matrix(model, mu, tau)
    return factor * gaussian_eval(Z.stacked, Gaussian(obs.matrix @ x, obs.noise_cov))


@dataclass(frozen=True)
class BirthModel:
    components: tuple = ()

    def __post_init__(self):
        # accepts (weight, Gaussian) pairs or (weight, mean, cov) triples
        comps = tuple(
            (float(c[0]), c[1] if len(c) == 2 else Gaussian(c[1], c[2]))
            for c in self.components
        )
        if any(w <= 0 for w, _ in comps):
            raise ValueError("birth weights must be positive")
        object.__setattr__(self, "components", comps)

    @classmethod
    def single(cls, weight, mean, cov):
        return cls(((weight, Gaussian(mean, cov)),))

    @property
    def total_weight(self) -> float:
        return sum(w for w, _ in self.components)

    def reduced(self) -> "BirthModel":
        """Moment-matched single component carrying the total weight."""
        if len(self.components) <= 1:
            return self
        ws = [w for w, _ in self.components]
        return BirthModel(((sum(ws), moment_match(ws, [g for _, g in self.components])),))


def window_birth(per_step: BirthModel, fine_motion: MotionModel, steps: int) -> BirthModel:
    """Birth intensity at the end of a window collecting births at every fine step.

    Targets appearing ``j`` fine steps before the window end are propagated
    through ``j`` steps of the fine motion model (with survival), and the
    resulting mixture is reduced to one component.
    """
    comps = []
    F, Q, ps = fine_motion.F, fine_motion.Q, fine_motion.survive_per_fine_step
    for w, g in per_step.components:
        m, P, wj = g.mean, g.cov, w
        for _ in range(steps):
            comps.append((wj, Gaussian(m, P)))
            m, P, wj = F @ m, symmetrize(F @ P @ F.T + Q), wj * ps
    return BirthModel(tuple(comps)).reduced()


@dataclass(frozen=True)
class ClutterModel:
    """Uniform Poisson clutter on the trajectory-measurement space.

    ``region`` is an ``(n_z, 2)`` array of ``[low, high]`` bounds. ``rate_last``
    overrides the LAST-kind rate (defaults to ``rate_partial``).
    """

    rate_full: float
    rate_partial: float
    region: np.ndarray
    rate_last: Optional[float] = None

    def __post_init__(self):
        region = np.atleast_2d(np.asarray(self.region, dtype=float))
        if region.shape[1] != 2 or np.any(region[:, 1] <= region[:, 0]):
            raise ValueError("region must be an (n_z, 2) array of increasing bounds")
        object.__setattr__(self, "region", region)
        if self.rate_last is None:
            object.__setattr__(self, "rate_last", self.rate_partial)
        if min(self.rate_full, self.rate_partial, self.rate_last) < 0:
            raise ValueError("clutter rates must be nonnegative")

    @classmethod
    def from_total(cls, total_rate, region):
        """Equal full and partial rates adding up to ``total_rate``."""
        return cls(total_rate / 3.0, total_rate / 3.0, region)

    def at_window_end(self) -> "ClutterModel":
        """Point clutter obtained by marginalising out the window start."""
        return ClutterModel(0.0, 0.0, self.region, rate_last=self.rate_full + self.rate_last)

    @property
    def volume(self) -> float:
        return float(np.prod(self.region[:, 1] - self.region[:, 0]))

    def contains(self, z) -> bool:
        z = np.asarray(z)
        return bool(np.all(z >= self.region[:, 0]) and np.all(z <= self.region[:, 1]))

    def rate_for(self, kind: MeasurementKind) -> float:
        return {MeasurementKind.FULL: self.rate_full, MeasurementKind.FIRST: self.rate_partial,
                MeasurementKind.LAST: self.rate_last}[kind]


def clutter_intensity(model: ClutterModel, Z: TrajectoryMeasurement) -> float:
    V = model.volume
    if Z.kind is MeasurementKind.FULL:
        if model.contains(Z.z_first) and model.contains(Z.z_last):
            return model.rate_full / V**2
        return 0.0
    z = Z.z_first if Z.kind is MeasurementKind.FIRST else Z.z_last
    return model.rate_for(Z.kind) / V if model.contains(z) else 0.0


def clutter_rate(model: ClutterModel) -> tuple[float, float]:
    """Total clutter rate and the rate of the window-end marginal clutter."""
    total = model.rate_full + model.rate_partial + model.rate_last
    return total, model.rate_full + model.rate_last


def _noisy(rng, mean, R):
    return mean + rng.multivariate_normal(np.zeros(len(mean)), R)


def sample_target_measurement(model: MeasurementModel, X_kind: TrajectoryKind, x_true,
                              rng: np.random.Generator) -> Optional[TrajectoryMeasurement]:
    x_true = np.asarray(x_true, dtype=float)
    n_x = model.n_x
    if x_true.size != (2 * n_x if X_kind is TrajectoryKind.ALIVE else n_x):
        raise ValueError("state size does not match the trajectory kind")
    if rng.random() >= model.detect_prob_for(X_kind):
        return None
    H, R = model.H, model.R
    if X_kind is TrajectoryKind.DIED:
        return TrajectoryMeasurement(MeasurementKind.FIRST, z_first=_noisy(rng, H @ x_true, R))
    if X_kind is TrajectoryKind.BORN:
        return TrajectoryMeasurement(MeasurementKind.LAST, z_last=_noisy(rng, H @ x_true, R))
    probs = model.kind_probs
    kinds = [MeasurementKind.FULL, MeasurementKind.FIRST, MeasurementKind.LAST]
    kind = kinds[rng.choice(3, p=[probs[k] for k in kinds])]
    z1 = _noisy(rng, H @ x_true[:n_x], R)
    z2 = _noisy(rng, H @ x_true[n_x:], R)
    if kind is MeasurementKind.FULL:
        return TrajectoryMeasurement(kind, z1, z2)
    if kind is MeasurementKind.FIRST:
        return TrajectoryMeasurement(kind, z_first=z1)
    return TrajectoryMeasurement(kind, z_last=z2)


def sample_clutter(model: ClutterModel, rng: np.random.Generator) -> list:
    lo, hi = model.region[:, 0], model.region[:, 1]
    n_z = lo.size
    out = []
    n_full = rng.poisson(model.rate_full)
    pts = rng.uniform(lo, hi, size=(n_full, 2, n_z))
    out += [TrajectoryMeasurement(MeasurementKind.FULL, p[0], p[1]) for p in pts]
    for kind, rate in ((MeasurementKind.FIRST, model.rate_partial),
                       (MeasurementKind.LAST, model.rate_last)):
        pts = rng.uniform(lo, hi, size=(rng.poisson(rate), n_z))
        if kind is MeasurementKind.FIRST:
            out += [TrajectoryMeasurement(kind, z_first=p) for p in pts]
        else:
            out += [TrajectoryMeasurement(kind, z_last=p) for p in pts]
    return out
