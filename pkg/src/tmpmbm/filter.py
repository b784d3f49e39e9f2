"""Trajectory-measurement PMBM and PMB filters on two-step trajectories.

Each window runs predict (target form to two-step trajectory form), update
with a set of trajectory measurements, an optional PMB merge, and
marginalisation back to the target state at the window end.
"""

from __future__ import annotations

import enum
import math
import time
from dataclasses import dataclass, field

import numpy as np

from .association import InfeasibleAssignmentError, murty_kbest
from .density import (
    LocalHypothesis,
    PmbmState,
    PoissonComponent,
    compact,
    estimate,
    hypothesis_counts,
    kld_merge_to_pmb,
    normalize_and_prune,
)
from .gaussian import Gaussian, kalman_update_log, log_sum_exp, marginal_block, predict_two_step
from .models import (
    BirthModel,
    ClutterModel,
    MeasurementModel,
    MotionModel,
    clutter_intensity,
    observation_matrix,
)
from .trajectory import MeasurementKind, TrajectoryKind, TrajectoryMeasurement

FIRST, LAST, FULL = MeasurementKind.FIRST, MeasurementKind.LAST, MeasurementKind.FULL
BORN, ALIVE = TrajectoryKind.BORN, TrajectoryKind.ALIVE

# log of the smallest weight kept for a missed detection; stops log(0) when r = p^D = 1
_LOG_FLOOR = math.log(1e-300)


class Variant(enum.Enum):
    PMBM = "pmbm"
    PMB = "pmb"


@dataclass(frozen=True)
class Thresholds:
    gamma_p: float = 1e-5
    gamma_mbm: float = 1e-4
    gamma_b: float = 1e-5
    gamma_g: float = 9.0
    n_h: int = 200
    r_estimate: float = 0.1

    def __post_init__(self):
        for name in ("gamma_p", "gamma_mbm", "gamma_b", "gamma_g", "n_h", "r_estimate"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")


@dataclass(frozen=True)
class FilterConfig:
    motion: MotionModel
    meas: MeasurementModel
    birth: BirthModel
    clutter: ClutterModel
    thresholds: Thresholds = field(default_factory=Thresholds)
    variant: Variant = Variant.PMBM

    def __post_init__(self):
        object.__setattr__(self, "variant", Variant(self.variant))
        if self.meas.n_x != self.motion.dim:
            raise ValueError("measurement and motion models disagree on the state dimension")

    @property
    def n_x(self) -> int:
        return self.motion.dim


@dataclass(frozen=True)
class StepDiagnostics:
    n_local: int
    n_global: int
    step_ms: float


# ---------------------------------------------------------------- prediction

def predict(posterior: PmbmState, cfg: FilterConfig) -> PmbmState:
    """Target-form posterior to the predicted two-step trajectory density."""
    if posterior.is_trajectory:
        raise ValueError("predict expects a target-form density")
    F, Q, ps = cfg.motion.F, cfg.motion.Q, cfg.motion.survive_prob
    poisson = [PoissonComponent(w, g, BORN) for w, g in cfg.birth.components]
    poisson += [
        PoissonComponent(c.weight * ps, predict_two_step(c.gaussian, F, Q), ALIVE)
        for c in posterior.poisson if c.weight * ps > 0
    ]
    targets = []
    for hyps in posterior.targets:
        new = []
        for h in hyps:
            if h.r == 0:
                new.append(LocalHypothesis(0.0, 0.0, beta=(0.0, 1.0)))
            else:
                new.append(LocalHypothesis(0.0, h.r, predict_two_step(h.density, F, Q),
                                           beta=(1.0 - ps, ps), died=h.density))
        targets.append(new)
    return PmbmState(poisson, targets, posterior.assignments, posterior.log_weights)


# ------------------------------------------------------------- update pieces

def update_poisson(poisson, cfg: FilterConfig) -> tuple:
    """Undetected part of the predicted Poisson intensity."""
    out = []
    for c in poisson:
        pd = cfg.meas.detect_prob_for(c.kind) if c.kind is not None else cfg.meas.detect_prob
        out.append(PoissonComponent(c.weight * (1.0 - pd), c.gaussian, c.kind))
    return tuple(out)


def _detect_probs(cfg: FilterConfig):
    return cfg.meas.detect_prob_for(TrajectoryKind.DIED), cfg.meas.detect_prob_for(ALIVE)


def update_bernoulli_missed(hyp: LocalHypothesis, cfg: FilterConfig) -> LocalHypothesis:
    """Hypothesis that the Bernoulli generated no measurement."""
    if hyp.r == 0:
        return LocalHypothesis(0.0, 0.0, beta=(0.0, 1.0))
    pdd, pda = _detect_probs(cfg)
    b1, b2 = hyp.beta
    q = b1 * pdd + b2 * pda
    w = 1.0 - hyp.r * q
    if w <= 0:
        return LocalHypothesis(_LOG_FLOOR, 0.0, beta=(0.0, 1.0))
    r = hyp.r * (1.0 - q) / w
    m1, m2 = b1 * (1.0 - pdd), b2 * (1.0 - pda)
    beta = (m1 / (m1 + m2), m2 / (m1 + m2)) if m1 + m2 > 0 else hyp.beta
    if r == 0:
        return LocalHypothesis(math.log(w), 0.0, beta=(0.0, 1.0))
    return LocalHypothesis(math.log(w), r, hyp.density, beta, hyp.died)


def update_bernoulli_detection(hyp: LocalHypothesis, Z: TrajectoryMeasurement,
                               cfg: FilterConfig) -> LocalHypothesis:
    """Hypothesis that the Bernoulli generated ``Z``; ``log_weight`` may be -inf."""
    meas = cfg.meas
    if hyp.r == 0:
        return LocalHypothesis(-math.inf, 0.0, beta=(0.0, 1.0))
    pdd, pda = _detect_probs(cfg)
    b1, b2 = hyp.beta
    kp = meas.kind_probs[Z.kind]
    if Z.kind is FIRST:
        f1, f2 = b1 * pdd, b2 * pda * kp
        if f1 + f2 == 0:
            return LocalHypothesis(-math.inf, 0.0, beta=(0.0, 1.0))
        alive = died = None
        l1 = l2 = -math.inf
        if f2 > 0:
            alive, ll = kalman_update_log(hyp.density, observation_matrix(meas, 1, 3), Z.z_first)
            l2 = math.log(f2) + ll
        if f1 > 0:
            died, ll = kalman_update_log(hyp.died, observation_matrix(meas, 1, 1), Z.z_first)
            l1 = math.log(f1) + ll
        # the two branches share the window-start marginal, so this is usually f1 : f2
        top = max(l1, l2)
        e1, e2 = math.exp(l1 - top), math.exp(l2 - top)
        lw = math.log(hyp.r) + top + math.log(e1 + e2)
        return LocalHypothesis(lw, 1.0, alive, (e1 / (e1 + e2), e2 / (e1 + e2)), died)
    f = b2 * pda * kp
    if f == 0:
        return LocalHypothesis(-math.inf, 0.0, beta=(0.0, 1.0))
    post, ll = kalman_update_log(hyp.density, observation_matrix(meas, Z.kind.value, 3), Z.stacked)
    return LocalHypothesis(math.log(hyp.r) + math.log(f) + ll, 1.0, post, (0.0, 1.0))


def create_new_bernoulli(poisson, Z: TrajectoryMeasurement, cfg: FilterConfig,
                         gated=None) -> tuple[LocalHypothesis, LocalHypothesis]:
    """Missed (nonexistent) and detection hypotheses of the Bernoulli that ``Z`` starts.

    ``poisson`` is the predicted intensity; ``gated`` optionally restricts the
    components considered. The detection hypothesis keeps the Kalman update of
    the component contributing most, while its weight and existence use all.
    """
    meas = cfg.meas
    lam_c = clutter_intensity(cfg.clutter, Z)
    idx = range(len(poisson)) if gated is None else gated
    best, best_lv, lvs = None, -math.inf, []
    for q in idx:
        c = poisson[q]
        if c.kind is BORN:
            if Z.kind is not LAST:
                continue
            obs, factor = observation_matrix(meas, 2, 2), meas.detect_prob_for(BORN)
        else:
            obs, factor = observation_matrix(meas, Z.kind.value, 3), meas.detect_prob_for(ALIVE)
            factor *= meas.kind_probs[Z.kind]
        if c.weight * factor <= 0:
            continue
        post, ll = kalman_update_log(c.gaussian, obs, Z.stacked)
        lv = math.log(c.weight * factor) + ll
        lvs.append(lv)
        if lv > best_lv:
            best, best_lv = (c.kind, post), lv
    missed = LocalHypothesis(0.0, 0.0, beta=(0.0, 1.0))
    if not lvs:
        lw = math.log(lam_c) if lam_c > 0 else -math.inf
        return missed, LocalHypothesis(lw, 0.0, beta=(0.0, 1.0))
    log_v = log_sum_exp(lvs)
    log_w = np.logaddexp(math.log(lam_c), log_v) if lam_c > 0 else log_v
    r = float(math.exp(log_v - log_w))
    kind, post = best
    det = LocalHypothesis(float(log_w), r, post, (0.0, 1.0), born=kind is BORN)
    return missed, det


# -------------------------------------------------------------------- gating

class _GateCache:
    """Predicted end-point measurements and inverse innovation covariances."""

    def __init__(self, meas: MeasurementModel):
        self.H, self.R = meas.H, meas.R
        self.n_x = meas.n_x

    def ends(self, g: Gaussian, kind):
        """``[(z_hat, S_inv) or None, (z_hat, S_inv) or None]`` for the two window ends."""
        n = self.n_x
        if kind is BORN:
            blocks = [None, slice(0, n)]
        elif g.dim == 2 * n:
            blocks = [slice(0, n), slice(n, 2 * n)]
        else:
            blocks = [slice(0, n), None]
        out = []
        for b in blocks:
            if b is None:
                out.append(None)
                continue
            S = self.H @ g.cov[b, b] @ self.H.T + self.R
            out.append((self.H @ g.mean[b], np.linalg.inv(S)))
        return out


def _mahal(end, Zs):
    z_hat, S_inv = end
    d = Zs - z_hat
    return np.einsum("ij,jk,ik->i", d, S_inv, d)


def _gate_matrix(ends, zf, zl, kinds, threshold):
    """Boolean gate of one density against every measurement."""
    m = len(kinds)
    g1 = np.zeros(m, bool)
    g2 = np.zeros(m, bool)
    if ends[0] is not None:
        has = kinds != LAST.value
        g1[has] = _mahal(ends[0], zf[has]) <= threshold
    if ends[1] is not None:
        has = kinds != FIRST.value
        g2[has] = _mahal(ends[1], zl[has]) <= threshold
    # a full measurement passes when either end gates
    return g1 | g2


def _measurement_arrays(Z_set, n_z):
    m = len(Z_set)
    zf = np.full((m, n_z), np.nan)
    zl = np.full((m, n_z), np.nan)
    kinds = np.array([Z.kind.value for Z in Z_set], dtype=int)
    for j, Z in enumerate(Z_set):
        if Z.z_first is not None:
            zf[j] = Z.z_first
        if Z.z_last is not None:
            zl[j] = Z.z_last
    return zf, zl, kinds


# -------------------------------------------------------------------- update

def update(predicted: PmbmState, Z_set, cfg: FilterConfig) -> PmbmState:
    """Update the predicted trajectory density with one window of measurements."""
    Z_set = list(Z_set)
    th = cfg.thresholds
    m, n = len(Z_set), predicted.n
    cache = _GateCache(cfg.meas)
    zf, zl, kinds = _measurement_arrays(Z_set, cfg.meas.n_z)

    # potential targets from the predicted MBM
    new_targets, miss_lw, det_lw, det_idx = [], [], [], []
    for hyps in predicted.targets:
        out, t_miss, t_det, t_idx = [], [], [], []
        for h in hyps:
            miss = update_bernoulli_missed(h, cfg)
            t_miss.append(max(miss.log_weight, _LOG_FLOOR))
            t_idx.append(len(out))
            out.append(miss)
            row_lw, row_idx = np.full(m, -np.inf), np.full(m, -1)
            if h.r > 0 and m:
                gated = _gate_matrix(cache.ends(h.density, ALIVE), zf, zl, kinds, th.gamma_g)
                for j in np.flatnonzero(gated):
                    det = update_bernoulli_detection(h, Z_set[j], cfg)
                    if det.log_weight > -math.inf:
                        row_lw[j], row_idx[j] = det.log_weight, len(out)
                        out.append(det)
            t_det.append(row_lw)
            det_idx_row = row_idx
            t_idx[-1] = (t_idx[-1], det_idx_row)
        new_targets.append(out)
        miss_lw.append(np.array(t_miss))
        det_lw.append(t_det)
        det_idx.append(t_idx)

    # potential targets started by each measurement
    born_gate = np.zeros((len(predicted.poisson), m), bool)
    for q, c in enumerate(predicted.poisson):
        if m:
            born_gate[q] = _gate_matrix(cache.ends(c.gaussian, c.kind), zf, zl, kinds, th.gamma_g)
    new_lw = np.full(m, -np.inf)
    for j, Z in enumerate(Z_set):
        pair = create_new_bernoulli(predicted.poisson, Z, cfg, np.flatnonzero(born_gate[:, j]))
        new_targets.append(list(pair))
        new_lw[j] = pair[1].log_weight

    # a measurement nothing can explain is re-examined without gating
    orphan = [j for j in range(m) if new_lw[j] == -np.inf
              and all(row[j] == -np.inf for t in det_lw for row in t)]
    for j in orphan:
        pair = create_new_bernoulli(predicted.poisson, Z_set[j], cfg)
        new_targets[n + j] = list(pair)
        new_lw[j] = pair[1].log_weight
        for i, hyps in enumerate(predicted.targets):
            for a, h in enumerate(hyps):
                if h.r == 0:
                    continue
                det = update_bernoulli_detection(h, Z_set[j], cfg)
                if det.log_weight > -math.inf:
                    det_lw[i][a][j] = det.log_weight
                    det_idx[i][a][1][j] = len(new_targets[i])
                    new_targets[i].append(det)

    # global hypotheses
    w_glob = predicted.weights
    rows, lws = [], []
    for g, assignment in enumerate(predicted.assignments):
        base = math.log(w_glob[g]) if w_glob[g] > 0 else -math.inf
        if base == -math.inf:
            continue
        base += math.fsum(miss_lw[i][a] for i, a in enumerate(assignment))
        cost = np.full((m, n + m), np.inf)
        for i, a in enumerate(assignment):
            cost[:, i] = -(det_lw[i][a] - miss_lw[i][a])
        cost[np.arange(m), n + np.arange(m)] = -new_lw
        k = max(1, math.ceil(w_glob[g] * th.n_h))
        try:
            solutions = _ranked_assignments(cost, n, k)
        except InfeasibleAssignmentError:
            continue
        for cols, c in solutions:
            row = np.empty(n + m, dtype=int)
            for i, a in enumerate(assignment):
                row[i] = det_idx[i][a][0]
            row[n:] = 0
            for j, col in enumerate(cols):
                if col < n:
                    row[col] = det_idx[col][assignment[col]][1][j]
                else:
                    row[n + j] = 1
            rows.append(row)
            lws.append(base - c)

    if not rows:
        lws, rows = [-np.inf], [np.zeros(n + m, dtype=int)]
    state = PmbmState(update_poisson(predicted.poisson, cfg), new_targets,
                      np.array(rows, dtype=int).reshape(len(rows), n + m), np.array(lws))
    return normalize_and_prune(state, th.gamma_p, th.gamma_mbm, th.gamma_b, th.n_h)


def _ranked_assignments(cost: np.ndarray, n: int, k: int):
    """k-best assignments of measurements (rows) to columns.

    Rows whose only option is their own new-target column are fixed up front
    and the remaining problem is handed to Murty's method on the reduced matrix.
    """
    m = cost.shape[0]
    if m == 0:
        return [((), 0.0)]
    finite = np.isfinite(cost)
    fixed = ~finite[:, :n].any(axis=1)
    if np.any(fixed & ~np.isfinite(cost[np.arange(m), n + np.arange(m)])):
        raise InfeasibleAssignmentError("a measurement has no feasible origin")
    free = np.flatnonzero(~fixed)
    fixed_cost = math.fsum(cost[j, n + j] for j in np.flatnonzero(fixed))
    if free.size == 0:
        return [(tuple(n + j for j in range(m)), fixed_cost)]
    tcols = np.flatnonzero(finite[np.ix_(free, np.arange(n))].any(axis=0))
    ncols = n + free
    sub = cost[np.ix_(free, np.concatenate([tcols, ncols]))]
    col_map = np.concatenate([tcols, ncols])
    out = []
    for cols, c in murty_kbest(sub, k):
        full = [n + j for j in range(m)]
        for r, cidx in zip(free, cols):
            full[r] = int(col_map[cidx])
        out.append((tuple(full), c + fixed_cost))
    return out


# ---------------------------------------------------------- marginalisation

def marginalise(updated: PmbmState, cfg: FilterConfig | None = None) -> PmbmState:
    """Keep only the window-end state of every trajectory."""
    poisson = []
    for c in updated.poisson:
        if c.kind is ALIVE:
            n = c.gaussian.dim // 2
            poisson.append(PoissonComponent(c.weight, marginal_block(c.gaussian, (n, 2 * n))))
        else:
            poisson.append(PoissonComponent(c.weight, c.gaussian))
    targets = []
    for hyps in updated.targets:
        out = []
        for h in hyps:
            if h.r == 0 or h.beta[1] == 0:
                out.append(LocalHypothesis(h.log_weight, 0.0))
            elif h.born:
                out.append(LocalHypothesis(h.log_weight, h.r, h.density))
            else:
                n = h.density.dim // 2
                out.append(LocalHypothesis(h.log_weight, h.r * h.beta[1],
                                           marginal_block(h.density, (n, 2 * n))))
        targets.append(out)
    return PmbmState(poisson, targets, updated.assignments, updated.log_weights)


# ---------------------------------------------------------------------- step

def step(posterior: PmbmState, Z_set, cfg: FilterConfig):
    """One window: returns the new posterior, the estimated states and diagnostics."""
    t0 = time.perf_counter()
    th = cfg.thresholds
    state = update(predict(posterior, cfg), Z_set, cfg)
    if cfg.variant is Variant.PMB:
        state = kld_merge_to_pmb(state)
    state = marginalise(state, cfg)
    state = compact(normalize_and_prune(state, th.gamma_p, th.gamma_mbm, th.gamma_b, th.n_h))
    est = estimate(state, th.r_estimate)
    n_local, n_global = hypothesis_counts(state)
    diag = StepDiagnostics(n_local, n_global, 1e3 * (time.perf_counter() - t0))
    return state, est, diag


def initial_state(weight: float, gaussian: Gaussian) -> PmbmState:
    """Posterior with no detected targets and one Poisson component."""
    return PmbmState((PoissonComponent(weight, gaussian),))
