"""Ground truth, measurement synthesis and Monte Carlo runs.

Time is counted in fine steps ``1..n_fine_steps`` of length ``fine_interval``.
A filter with window length ``N_w`` processes windows ``[s, s + N_w]`` with
``s = 1, 1 + N_w, ...``; trailing fine steps that do not fill a window are
not processed.
"""

from __future__ import annotations

import csv
import json
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from importlib import resources
from typing import Optional, Sequence

import numpy as np

from .baseline import baseline_config, strip_measurements
from .density import PmbmState
from .filter import FilterConfig, Thresholds, Variant, initial_state, step
from .gaussian import Gaussian
from .gospa import GospaResult, gospa
from .models import (
    BirthModel,
    ClutterModel,
    MeasurementModel,
    MotionModel,
    ncv_matrices,
    sample_clutter,
    sample_target_measurement,
    window_birth,
)
from .trajectory import TrajectoryKind, TrajectoryMeasurement

FILTERS = ("tm-pmbm", "tm-pmb", "pmbm", "pmb")


@dataclass(frozen=True)
class ScenarioConfig:
    """Scenario and the model parameters the filters assume for it."""

    name: str = "scenario1"
    area: tuple = ((0.0, 100.0), (0.0, 100.0))
    fine_interval: float = 0.2
    n_fine_steps: int = 250
    q: float = 0.01
    sigma2: float = 0.1
    detect_prob: float = 0.9
    survive_per_step: float = 0.99       # assumed by the filters
    true_survive_per_step: float = 0.99  # used to sample target deaths
    prior_weight: float = 3.0            # Poisson intensity at the first step
    birth_rate: float = 0.005            # per fine step after the first
    birth_mean: tuple = (50.0, 0.0, 50.0, 0.0)
    birth_std: tuple = (50.0, 1.0, 50.0, 1.0)
    prior_std: Optional[tuple] = None    # defaults to birth_std
    fixture: Optional[str] = "scenario1.json"
    seed: int = 0

    def __post_init__(self):
        if self.n_fine_steps < 2:
            raise ValueError("need at least two fine steps")
        if self.fine_interval <= 0:
            raise ValueError("fine_interval must be positive")

    @property
    def region(self) -> np.ndarray:
        return np.asarray(self.area, dtype=float)

    @property
    def birth_gaussian(self) -> Gaussian:
        return Gaussian(np.asarray(self.birth_mean, float), np.diag(np.square(self.birth_std)))

    @property
    def prior_gaussian(self) -> Gaussian:
        std = self.birth_std if self.prior_std is None else self.prior_std
        return Gaussian(np.asarray(self.birth_mean, float), np.diag(np.square(std)))

    def windows(self, n_w: int) -> list:
        """``(start, end)`` fine steps of every complete window."""
        return [(s, s + n_w) for s in range(1, self.n_fine_steps - n_w + 1, n_w)]


def scenario1() -> ScenarioConfig:
    return ScenarioConfig()


def scenario2() -> ScenarioConfig:
    # mean lifespan of 1000 s at T = 0.2 s
    return ScenarioConfig(
        name="scenario2", area=((0.0, 600.0), (0.0, 400.0)),
        true_survive_per_step=1.0 - 0.2 / 1000.0, prior_weight=0.16, birth_rate=0.16,
        birth_mean=(300.0, 0.0, 200.0, 0.0), birth_std=(30.0, 1.0, 30.0, 1.0),
        prior_std=(300.0, 1.0, 200.0, 1.0), fixture=None,
    )


@dataclass(frozen=True)
class TargetTrack:
    birth: int         # first fine step with a state
    end: int           # first fine step without a state (exclusive)
    states: np.ndarray  # (end - birth) x n_x

    def alive_at(self, k: int) -> bool:
        return self.birth <= k < self.end

    def state_at(self, k: int) -> np.ndarray:
        return self.states[k - self.birth]


@dataclass(frozen=True)
class GroundTruth:
    tracks: tuple = ()
    n_fine_steps: int = 0

    def states_at(self, k: int) -> np.ndarray:
        alive = [t.state_at(k) for t in self.tracks if t.alive_at(k)]
        return np.stack(alive) if alive else np.zeros((0, 4))

    def window_kinds(self, start: int, end: int) -> list:
        """``(kind, stacked true state)`` of every track present at a window boundary."""
        out = []
        for t in self.tracks:
            a, b = t.alive_at(start), t.alive_at(end)
            if a and b:
                out.append((TrajectoryKind.ALIVE, np.concatenate([t.state_at(start), t.state_at(end)])))
            elif a:
                out.append((TrajectoryKind.DIED, t.state_at(start)))
            elif b:
                out.append((TrajectoryKind.BORN, t.state_at(end)))
        return out


def load_fixture(name: str) -> GroundTruth:
    text = resources.files("tmpmbm").joinpath("data").joinpath(name).read_text()
    raw = json.loads(text)
    tracks = tuple(
        TargetTrack(t["birth"], t["end"], np.asarray(t["states"], dtype=float))
        for t in raw["tracks"]
    )
    return GroundTruth(tracks, raw["n_fine_steps"])


def make_scenario1_tracks(seed: int = 2024, n_fine_steps: int = 250, meet: int = 125,
                          q: float = 0.01, T: float = 0.2) -> dict:
    """Four NCV tracks from step 1 that pass close to (50, 50) at ``meet``.

    One of them ends at ``meet``. Motion is sampled forwards and backwards from
    the meeting step so every track stays inside ``[0, 100]^2``.
    """
    rng = np.random.default_rng(seed)
    F, Q = ncv_matrices(T, q)
    F_inv = np.linalg.inv(F)
    headings = np.deg2rad([30.0, 120.0, 210.0, 300.0])
    while True:
        tracks = []
        for i, h in enumerate(headings):
            speed = rng.uniform(1.0, 1.6)
            x = np.array([50 + rng.normal(0, 0.5), speed * np.cos(h),
                          50 + rng.normal(0, 0.5), speed * np.sin(h)])
            back = [x]
            for _ in range(meet - 1):
                back.append(F_inv @ (back[-1] - rng.multivariate_normal(np.zeros(4), Q)))
            states = back[::-1]
            end = meet if i == 3 else n_fine_steps + 1
            for _ in range(end - meet - 1):
                states.append(F @ states[-1] + rng.multivariate_normal(np.zeros(4), Q))
            if i == 3:
                states = states[:-1]
            tracks.append({"birth": 1, "end": end, "states": np.array(states)})
        pos = np.concatenate([t["states"][:, [0, 2]] for t in tracks])
        if pos.min() > 2 and pos.max() < 98:
            break
    return {
        "n_fine_steps": n_fine_steps,
        "seed": seed,
        "tracks": [{"birth": t["birth"], "end": t["end"], "states": t["states"].tolist()}
                   for t in tracks],
    }


def generate_ground_truth(cfg: ScenarioConfig, rng: np.random.Generator) -> GroundTruth:
    """Tracks from the frozen fixture, or from Poisson births and geometric deaths."""
    if cfg.fixture:
        return load_fixture(cfg.fixture)
    F, Q = ncv_matrices(cfg.fine_interval, cfg.q)
    birth = cfg.birth_gaussian
    H = cfg.n_fine_steps
    L = np.linalg.cholesky(Q)
    tracks = []
    for k in range(1, H + 1):
        for _ in range(rng.poisson(cfg.birth_rate)):
            x = rng.multivariate_normal(birth.mean, birth.cov)
            states = [x]
            end = k + 1
            while end <= H and rng.random() < cfg.true_survive_per_step:
                states.append(F @ states[-1] + L @ rng.standard_normal(4))
                end += 1
            tracks.append(TargetTrack(k, end, np.array(states)))
    return GroundTruth(tuple(tracks), H)


def generate_measurements(truth: GroundTruth, window, meas: MeasurementModel,
                          clutter: ClutterModel, rng: np.random.Generator) -> list:
    start, end = window
    out = []
    for kind, x in truth.window_kinds(start, end):
        Z = sample_target_measurement(meas, kind, x, rng)
        if Z is not None:
            out.append(Z)
    return out + sample_clutter(clutter, rng)


def write_measurements_csv(path, windows, Z_sets) -> None:
    """One row per measurement: window, start, end, kind, z_first..., z_last..."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["window", "start", "end", "kind", "z1_x", "z1_y", "z2_x", "z2_y"])
        for idx, ((s, e), Zs) in enumerate(zip(windows, Z_sets)):
            for Z in Zs:
                z1 = ["", ""] if Z.z_first is None else [repr(float(v)) for v in Z.z_first]
                z2 = ["", ""] if Z.z_last is None else [repr(float(v)) for v in Z.z_last]
                w.writerow([idx, s, e, Z.kind.name, *z1, *z2])


# ----------------------------------------------------------------- experiments

@dataclass(frozen=True)
class Cell:
    """One point of the sweep."""

    n_w: int
    p_full: float
    clutter_rate: float
    index: int = 0


@dataclass(frozen=True)
class Experiment:
    scenario: ScenarioConfig = field(default_factory=ScenarioConfig)
    filters: tuple = FILTERS
    n_runs: int = 1
    seed: int = 0
    thresholds: Thresholds = field(default_factory=Thresholds)
    gospa_c: float = 10.0
    gospa_p: float = 2.0

    def __post_init__(self):
        if self.n_runs < 1:
            raise ValueError("n_runs must be at least 1")
        bad = set(self.filters) - set(FILTERS)
        if bad:
            raise ValueError(f"unknown filters: {sorted(bad)}")


def filter_config(scn: ScenarioConfig, cell: Cell, name: str,
                  thresholds: Thresholds = Thresholds()) -> FilterConfig:
    fine = MotionModel.ncv(scn.fine_interval, 1, scn.q, scn.survive_per_step)
    motion = MotionModel.ncv(scn.fine_interval, cell.n_w, scn.q, scn.survive_per_step)
    per_step = BirthModel.single(scn.birth_rate, scn.birth_gaussian.mean, scn.birth_gaussian.cov)
    cfg = FilterConfig(
        motion=motion,
        meas=MeasurementModel.position(scn.sigma2, scn.detect_prob, cell.p_full),
        birth=window_birth(per_step, fine, cell.n_w),
        clutter=ClutterModel.from_total(cell.clutter_rate, scn.region),
        thresholds=thresholds,
        variant=Variant.PMB if name.endswith("pmb") else Variant.PMBM,
    )
    return cfg if name.startswith("tm-") else baseline_config(cfg)


@dataclass(frozen=True)
class WindowRecord:
    filter: str
    run: int
    window: int
    gospa: GospaResult
    n_local: int
    n_global: int
    step_ms: float


def _run_streams(seed: int, cell: Cell, run: int):
    truth_rng = np.random.default_rng(np.random.SeedSequence([seed, run]))
    meas_rng = np.random.default_rng(np.random.SeedSequence([seed, run, cell.index + 1]))
    return truth_rng, meas_rng


def simulate_run(exp: Experiment, cell: Cell, run: int) -> list:
    """All filters of ``exp`` on one sampled scenario; measurements are shared."""
    scn = exp.scenario
    truth_rng, meas_rng = _run_streams(exp.seed, cell, run)
    truth = generate_ground_truth(scn, truth_rng)
    windows = scn.windows(cell.n_w)
    tm_cfg = filter_config(scn, cell, "tm-pmbm", exp.thresholds)
    Z_sets = [generate_measurements(truth, w, tm_cfg.meas, tm_cfg.clutter, meas_rng) for w in windows]
    records = []
    for name in exp.filters:
        cfg = filter_config(scn, cell, name, exp.thresholds)
        state = initial_state(scn.prior_weight, scn.prior_gaussian)
        for idx, ((_, end), Zs) in enumerate(zip(windows, Z_sets)):
            if not name.startswith("tm-"):
                Zs = [TrajectoryMeasurement("LAST", z_last=z) for z in strip_measurements(Zs)]
            state, est, diag = step(state, Zs, cfg)
            pos = est[:, [0, 2]] if est.size else np.zeros((0, 2))
            err = gospa(truth.states_at(end)[:, [0, 2]], pos, exp.gospa_c, exp.gospa_p)
            records.append(WindowRecord(name, run, idx, err, diag.n_local, diag.n_global, diag.step_ms))
    return records


def _worker(args):
    exp, cell, run = args
    return simulate_run(exp, cell, run)


def worker_count() -> int:
    try:
        return max(1, int(os.environ.get("TMPMBM_WORKERS", "1")))
    except ValueError:
        return 1


def run_monte_carlo(exp: Experiment, cell: Cell, workers: Optional[int] = None) -> list:
    """Records of every (filter, run, window), ordered by filter, run and window."""
    workers = worker_count() if workers is None else workers
    jobs = [(exp, cell, run) for run in range(exp.n_runs)]
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            per_run = list(pool.map(_worker, jobs))
    else:
        per_run = [_worker(j) for j in jobs]
    records = [r for rs in per_run for r in rs]
    order = {name: i for i, name in enumerate(exp.filters)}
    return sorted(records, key=lambda r: (order[r.filter], r.run, r.window))
