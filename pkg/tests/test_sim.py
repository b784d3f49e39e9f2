import numpy as np
import pytest

from tmpmbm.models import ClutterModel, MeasurementModel
from tmpmbm.sim import (
    Cell,
    Experiment,
    GroundTruth,
    TargetTrack,
    generate_ground_truth,
    generate_measurements,
    load_fixture,
    make_scenario1_tracks,
    run_monte_carlo,
    scenario1,
    scenario2,
    simulate_run,
)
from tmpmbm.trajectory import MeasurementKind, TrajectoryKind


class TestFixture:
    def test_scenario1_structure(self):
        truth = generate_ground_truth(scenario1(), np.random.default_rng(0))
        assert truth.n_fine_steps == 250
        assert len(truth.tracks) == 4
        assert all(t.birth == 1 for t in truth.tracks)
        assert sorted(t.end for t in truth.tracks) == [125, 251, 251, 251]
        for t in truth.tracks:
            assert t.states.shape == (t.end - t.birth, 4)
            assert np.all((t.states[:, [0, 2]] > 0) & (t.states[:, [0, 2]] < 100))

    def test_fixture_is_reproducible(self):
        want = make_scenario1_tracks(seed=2024)
        got = load_fixture("scenario1.json")
        for t, raw in zip(got.tracks, want["tracks"]):
            assert np.allclose(t.states, raw["states"], atol=1e-12)

    def test_targets_meet(self):
        truth = load_fixture("scenario1.json")
        pos = truth.states_at(124)[:, [0, 2]]
        assert np.all(np.linalg.norm(pos - [50.0, 50.0], axis=1) < 5.0)


def test_zero_birth_is_empty():
    scn = scenario2()
    from dataclasses import replace
    truth = generate_ground_truth(replace(scn, birth_rate=0.0), np.random.default_rng(0))
    assert truth.tracks == ()


def test_scenario2_birth_count():
    scn = scenario2()
    H = scn.n_fine_steps
    counts = [len(generate_ground_truth(scn, np.random.default_rng(s)).tracks) for s in range(100)]
    mean = 0.16 * H
    assert abs(np.mean(counts) - mean) < 3 * np.sqrt(mean / 100)


class TestWindowKinds:
    def make(self):
        states = np.arange(40.0).reshape(10, 4)
        return GroundTruth((TargetTrack(3, 13, states),), 20)

    def test_alive_across(self):
        kinds = self.make().window_kinds(4, 8)
        assert kinds[0][0] is TrajectoryKind.ALIVE and kinds[0][1].size == 8

    def test_born_inside(self):
        kinds = self.make().window_kinds(1, 5)
        assert kinds[0][0] is TrajectoryKind.BORN
        assert np.array_equal(kinds[0][1], self.make().tracks[0].state_at(5))

    def test_died_inside(self):
        kinds = self.make().window_kinds(10, 15)
        assert kinds[0][0] is TrajectoryKind.DIED
        assert np.array_equal(kinds[0][1], self.make().tracks[0].state_at(10))

    def test_born_and_died_inside_is_invisible(self):
        truth = GroundTruth((TargetTrack(3, 5, np.zeros((2, 4))),), 20)
        assert truth.window_kinds(1, 6) == []

    def test_exhaustive_and_exclusive(self):
        truth = self.make()
        for start in range(1, 15):
            for end in range(start + 1, 20):
                kinds = truth.window_kinds(start, end)
                present = truth.tracks[0].alive_at(start) or truth.tracks[0].alive_at(end)
                assert len(kinds) == int(present)


class TestMeasurements:
    def test_certain_full(self):
        truth = load_fixture("scenario1.json")
        meas = MeasurementModel.position(0.1, 1.0, 1.0)
        Zs = generate_measurements(truth, (10, 15), meas, ClutterModel(0.0, 0.0, [[0, 100], [0, 100]]),
                                   np.random.default_rng(0))
        assert len(Zs) == 4 and all(Z.kind is MeasurementKind.FULL for Z in Zs)

    def test_birth_mid_window_gives_last_only(self):
        truth = GroundTruth((TargetTrack(3, 13, np.zeros((10, 4))),), 20)
        meas = MeasurementModel.position(0.1, 1.0, 0.5)
        clutter = ClutterModel(0.0, 0.0, [[0, 100], [0, 100]])
        rng = np.random.default_rng(0)
        for _ in range(50):
            Zs = generate_measurements(truth, (1, 5), meas, clutter, rng)
            assert [Z.kind for Z in Zs] == [MeasurementKind.LAST]

    def test_clutter_only(self):
        truth = GroundTruth((), 20)
        meas = MeasurementModel.position()
        clutter = ClutterModel.from_total(10.0, [[0, 100], [0, 100]])
        rng = np.random.default_rng(1)
        counts = [len(generate_measurements(truth, (1, 5), meas, clutter, rng)) for _ in range(10_000)]
        assert abs(np.mean(counts) - 10.0) < 0.1


class TestMonteCarlo:
    def small(self, **kw):
        from dataclasses import replace
        scn = replace(scenario1(), n_fine_steps=60)
        return Experiment(scn, n_runs=2, seed=5, **kw)

    def test_deterministic(self):
        exp = self.small(filters=("tm-pmb", "pmb"))
        cell = Cell(5, 0.7, 10.0)
        a = run_monte_carlo(exp, cell, workers=1)
        b = run_monte_carlo(exp, cell, workers=2)
        key = [(r.filter, r.run, r.window, r.gospa, r.n_local, r.n_global) for r in a]
        assert key == [(r.filter, r.run, r.window, r.gospa, r.n_local, r.n_global) for r in b]

    def test_records_ordered(self):
        exp = self.small(filters=("pmb", "tm-pmb"))
        recs = run_monte_carlo(exp, Cell(10, 0.9, 5.0), workers=1)
        assert [r.filter for r in recs] == ["pmb"] * 10 + ["tm-pmb"] * 10
        assert [r.window for r in recs[:5]] == list(range(5))

    def test_filters_share_measurements(self, monkeypatch):
        import tmpmbm.sim as sim

        seen = {}
        orig = sim.step

        def spy(state, Zs, cfg):
            seen.setdefault(cfg.meas.point_only, []).append(
                sorted(tuple(np.round(Z.z_last, 12)) for Z in Zs if Z.z_last is not None))
            return orig(state, Zs, cfg)

        monkeypatch.setattr(sim, "step", spy)
        simulate_run(self.small(filters=("tm-pmbm", "pmbm")), Cell(5, 0.7, 10.0), 0)
        assert seen[False] == seen[True]

    def test_unknown_filter(self):
        with pytest.raises(ValueError):
            Experiment(filters=("kf",))
