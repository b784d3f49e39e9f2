"""PMBM densities on target states and on two-step trajectories.

The same containers hold both forms. In target form every Gaussian lives on
the single-target state space. In trajectory form a Poisson component is
either a trajectory born at the window end (``n_x``-dimensional) or one
alive over the whole window (stacked ``2 n_x``), and a local hypothesis is
a two-branch mixture: with probability ``beta[0]`` the trajectory died
inside the window (state at its start only), with ``beta[1]`` it is alive
at both ends.

Global hypotheses are rows of an integer matrix: row ``g`` picks one local
hypothesis per potential target and carries the log weight ``log_weights[g]``.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np

from .gaussian import Gaussian, log_sum_exp, marginal_block, moment_match
from .trajectory import TrajectoryKind


class EmptyPosteriorError(RuntimeError):
    """Every global hypothesis was pruned away."""


@dataclass(frozen=True)
class PoissonComponent:
    weight: float
    gaussian: Gaussian
    kind: Optional[TrajectoryKind] = None  # None in target form; BORN or ALIVE otherwise


@dataclass(frozen=True)
class LocalHypothesis:
    """One single-target hypothesis of a potential target (a Bernoulli).

    ``density`` is the state density in target form, the alive branch of a
    trajectory-form hypothesis, or the single state of a trajectory born at
    the window end (``born``). ``died`` is the branch of trajectories that
    ended inside the window.
    """

    log_weight: float
    r: float
    density: Optional[Gaussian] = None
    beta: Optional[tuple] = None
    died: Optional[Gaussian] = None
    born: bool = False

    @property
    def weight(self) -> float:
        return float(np.exp(self.log_weight))

    @property
    def is_trajectory(self) -> bool:
        return self.beta is not None

    def nonexistent(self) -> "LocalHypothesis":
        beta = None if self.beta is None else (0.0, 1.0)
        return LocalHypothesis(self.log_weight, 0.0, beta=beta)


@dataclass(frozen=True)
class PmbmState:
    poisson: tuple = ()
    targets: tuple = ()
    assignments: Optional[np.ndarray] = None  # defaults to picking hypothesis 0 everywhere
    log_weights: np.ndarray = field(default_factory=lambda: np.zeros(1))

    def __post_init__(self):
        object.__setattr__(self, "poisson", tuple(self.poisson))
        object.__setattr__(self, "targets", tuple(tuple(t) for t in self.targets))
        lw = np.asarray(self.log_weights, dtype=float).reshape(-1)
        if self.assignments is None:
            A = np.zeros((lw.size, len(self.targets)), dtype=int)
        else:
            A = np.asarray(self.assignments, dtype=int).reshape(lw.size, len(self.targets))
        for i, hyps in enumerate(self.targets):
            if A.shape[0] and (A[:, i].min() < 0 or A[:, i].max() >= len(hyps)):
                raise ValueError(f"global hypotheses reference a missing hypothesis of target {i}")
        object.__setattr__(self, "assignments", A)
        object.__setattr__(self, "log_weights", lw)

    @property
    def n(self) -> int:
        return len(self.targets)

    @property
    def weights(self) -> np.ndarray:
        return np.exp(self.log_weights - log_sum_exp(self.log_weights))

    @property
    def is_trajectory(self) -> bool:
        if any(c.kind is not None for c in self.poisson):
            return True
        return any(h.is_trajectory for hyps in self.targets for h in hyps)

    def best_global(self) -> int:
        return int(np.argmax(self.log_weights))


def normalize_and_prune(state: PmbmState, gamma_p=1e-5, gamma_mbm=1e-4, gamma_b=1e-5,
                        n_h=200) -> PmbmState:
    """Renormalise and prune Poisson components, global and local hypotheses.

    Bernoullis with existence below ``gamma_b`` become the nonexistent
    hypothesis before the global weights are touched.
    """
    lw = state.log_weights
    if lw.size == 0 or not np.isfinite(lw).any():
        raise EmptyPosteriorError("no global hypothesis with positive weight")
    lw = lw - log_sum_exp(lw)
    w = np.exp(lw)
    keep = np.flatnonzero(w >= gamma_mbm)
    if keep.size > n_h:
        # stable: among equal weights the earlier hypothesis wins
        order = np.argsort(-w[keep], kind="stable")[:n_h]
        keep = np.sort(keep[order])
    if keep.size == 0:
        raise EmptyPosteriorError("every global hypothesis fell below the pruning threshold")
    A = state.assignments[keep]
    lw = lw[keep] - log_sum_exp(lw[keep])

    targets = [
        [h.nonexistent() if 0 < h.r < gamma_b else h for h in hyps]
        for hyps in _drop_unreferenced(state.targets, A)
    ]
    poisson = tuple(c for c in state.poisson if c.weight >= gamma_p)
    return PmbmState(poisson, targets, A, lw)


def _drop_unreferenced(targets, A):
    """Keep only referenced local hypotheses, renumbering ``A`` in place."""
    out = []
    for i, hyps in enumerate(targets):
        used = np.unique(A[:, i])
        remap = np.full(len(hyps), -1)
        remap[used] = np.arange(used.size)
        A[:, i] = remap[A[:, i]]
        out.append([hyps[a] for a in used])
    return out


def compact(state: PmbmState) -> PmbmState:
    """Drop potential targets that exist in no global hypothesis and merge duplicate rows."""
    cols = [
        i for i, hyps in enumerate(state.targets)
        if any(hyps[a].r > 0 for a in np.unique(state.assignments[:, i]))
    ]
    merged: dict = {}
    for row, lw in zip(map(tuple, state.assignments[:, cols]), state.log_weights):
        merged.setdefault(row, []).append(lw)
    A = np.array(list(merged), dtype=int).reshape(len(merged), len(cols))
    log_weights = np.array([log_sum_exp(v) for v in merged.values()])
    targets = _drop_unreferenced([state.targets[i] for i in cols], A)
    return PmbmState(state.poisson, targets, A, log_weights)


def estimate(state: PmbmState, r_threshold: float = 0.1) -> np.ndarray:
    """Means of the Bernoullis with ``r > r_threshold`` in the best global hypothesis."""
    if state.is_trajectory:
        raise ValueError("estimate expects a target-form density")
    if state.n == 0:
        return np.zeros((0, 0))
    row = state.assignments[state.best_global()]
    means = [
        state.targets[i][a].density.mean for i, a in enumerate(row)
        if state.targets[i][a].r > r_threshold
    ]
    if not means:
        return np.zeros((0, 0))
    return np.stack(means)


def _merge_column(hyps, marginals) -> LocalHypothesis:
    r_w = np.array([w * h.r for w, h in zip(marginals, hyps)])
    # the marginals sum to one only up to rounding
    r = min(float(r_w.sum()), 1.0)
    if r <= 0:
        return LocalHypothesis(0.0, 0.0, beta=(0.0, 1.0) if hyps[0].is_trajectory else None)
    live = [(rw, h) for rw, h in zip(r_w, hyps) if rw > 0]
    if not live[0][1].is_trajectory:
        return LocalHypothesis(0.0, r, moment_match([rw for rw, _ in live], [h.density for _, h in live]))
    if any(h.born for _, h in live):
        if not all(h.born for _, h in live):
            raise ValueError("cannot merge born and surviving trajectory hypotheses")
        return LocalHypothesis(0.0, r, moment_match([rw for rw, _ in live], [h.density for _, h in live]),
                               beta=(0.0, 1.0), born=True)
    w_died = [(rw * h.beta[0], h.died) for rw, h in live if rw * h.beta[0] > 0]
    w_alive = [(rw * h.beta[1], h.density) for rw, h in live if rw * h.beta[1] > 0]
    b1 = sum(x for x, _ in w_died)
    b2 = sum(x for x, _ in w_alive)
    died = moment_match([x for x, _ in w_died], [g for _, g in w_died]) if w_died else None
    alive = moment_match([x for x, _ in w_alive], [g for _, g in w_alive]) if w_alive else None
    return LocalHypothesis(0.0, r, alive, beta=(b1 / (b1 + b2), b2 / (b1 + b2)), died=died)


def marginal_association_weights(state: PmbmState) -> list:
    """For every potential target, the total global weight of each local hypothesis."""
    w = state.weights
    return [
        np.bincount(state.assignments[:, i], weights=w, minlength=len(hyps))
        for i, hyps in enumerate(state.targets)
    ]


def kld_merge_to_pmb(state: PmbmState) -> PmbmState:
    """Collapse the multi-Bernoulli mixture into one multi-Bernoulli.

    Each potential target keeps one hypothesis whose existence is the
    association-weighted average and whose density (per branch) is the
    moment-matched mixture of the hypothesis densities.
    """
    marg = marginal_association_weights(state)
    targets = [[_merge_column(hyps, m)] for hyps, m in zip(state.targets, marg)]
    return PmbmState(state.poisson, targets, np.zeros((1, state.n), dtype=int), np.zeros(1))


def hypothesis_counts(state: PmbmState) -> tuple[int, int]:
    """Total number of local hypotheses and number of global hypotheses."""
    return sum(len(h) for h in state.targets), len(state.log_weights)


def describe(state: PmbmState) -> str:
    """Plain-text dump of the hypothesis structure."""
    w = state.weights
    lines = [
        f"poisson components: {len(state.poisson)} "
        f"(total weight {sum(c.weight for c in state.poisson):.6g})",
        f"potential targets: {state.n}",
        f"global hypotheses: {len(w)}",
    ]
    for i, hyps in enumerate(state.targets):
        r_best = max(h.r for h in hyps)
        lines.append(f"  target {i}: {len(hyps)} hypotheses, max r {r_best:.6g}")
    lines.append("  global weights: " + " ".join(f"{x:.6g}" for x in w))
    return "\n".join(lines)
