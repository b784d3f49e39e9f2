import numpy as np
import pytest

from tmpmbm.gaussian import Gaussian, gaussian_eval
from tmpmbm.models import (
    BirthModel,
    ClutterModel,
    MeasurementModel,
    MotionModel,
    clutter_intensity,
    clutter_rate,
    measurement_density,
    ncv_matrices,
    observation_matrix,
    sample_clutter,
    sample_target_measurement,
    window_birth,
)
from tmpmbm.trajectory import MeasurementKind, TrajectoryKind, make_measurement

AREA = [[0.0, 100.0], [0.0, 100.0]]


def test_ncv_matrices():
    F, Q = ncv_matrices(1.4, 0.01)
    assert np.allclose(F, np.kron(np.eye(2), [[1, 1.4], [0, 1]]))
    assert np.allclose(Q, 0.01 * np.kron(np.eye(2), [[1.4**3 / 3, 1.4**2 / 2], [1.4**2 / 2, 1.4]]))


def test_window_survival():
    assert MotionModel.ncv(0.2, 5).survive_prob == pytest.approx(0.99**5)
    assert MotionModel.ncv(0.2, 5).survive_prob == pytest.approx(0.95099, abs=1e-5)
    with pytest.raises(ValueError):
        MotionModel(np.eye(2), -np.eye(2))


def test_gamma_partitions_detection():
    for pf in (0.0, 0.3, 0.7, 0.9, 1.0):
        m = MeasurementModel.position(full_given_detect=pf)
        assert m.full_given_detect + 2 * m.gamma == 1.0
        assert sum(m.kind_probs.values()) == pytest.approx(1.0)


class TestObservation:
    def test_first_of_alive_scalar(self):
        m = MeasurementModel([[1.0, 0.0]], [[0.1]])
        obs = observation_matrix(m, 1, 3)
        assert np.array_equal(obs.matrix, [[1, 0, 0, 0]])
        assert np.array_equal(obs.noise_cov, [[0.1]])

    def test_full_of_alive(self):
        m = MeasurementModel.position()
        obs = observation_matrix(m, 3, 3)
        assert np.array_equal(obs.matrix, np.kron(np.eye(2), m.H))
        assert np.array_equal(obs.noise_cov, np.kron(np.eye(2), m.R))

    def test_first_of_died(self):
        m = MeasurementModel.position()
        obs = observation_matrix(m, 1, 1)
        assert np.array_equal(obs.matrix, m.H) and np.array_equal(obs.noise_cov, m.R)

    def test_last_of_alive_reads_second_state(self):
        m = MeasurementModel.position()
        obs = observation_matrix(m, 2, 3)
        assert np.array_equal(obs.matrix[:, :4], np.zeros((2, 4)))
        assert np.array_equal(obs.matrix[:, 4:], m.H)

    @pytest.mark.parametrize("pair", [(2, 1), (1, 2), (3, 1), (3, 2), (4, 3)])
    def test_invalid_pairs(self, pair):
        with pytest.raises(ValueError):
            observation_matrix(MeasurementModel.position(), *pair)


class TestDensity:
    def test_full_at_noiseless_image(self):
        m = MeasurementModel.position(0.1, 0.9, 0.9)
        x = np.array([1.0, 0.5, 2.0, -0.5, 1.5, 0.5, 1.5, -0.5])
        Z = make_measurement("full", m.H @ x[:4], m.H @ x[4:])
        want = 0.9 / (2 * np.pi * 0.1) ** 2
        assert measurement_density(m, Z, TrajectoryKind.ALIVE, x) == pytest.approx(want, rel=1e-12)

    def test_last_vs_died_is_zero(self):
        m = MeasurementModel.position()
        Z = make_measurement("last", z_last=[0.0, 0.0])
        assert measurement_density(m, Z, TrajectoryKind.DIED, np.zeros(4)) == 0.0

    def test_full_vs_born_is_zero(self):
        m = MeasurementModel.position()
        Z = make_measurement("full", [0.0, 0.0], [0.0, 0.0])
        assert measurement_density(m, Z, TrajectoryKind.BORN, np.zeros(4)) == 0.0

    def test_wrong_state_size(self):
        m = MeasurementModel.position()
        with pytest.raises(ValueError):
            measurement_density(m, make_measurement("last", z_last=[0.0, 0.0]), TrajectoryKind.ALIVE, np.zeros(4))

    @pytest.mark.parametrize("kind", list(TrajectoryKind))
    def test_integrates_to_one(self, kind):
        # importance sampling over each measurement kind; the density is
        # conditional on detection so the kinds together carry unit mass
        rng = np.random.default_rng(kind.value)
        m = MeasurementModel.position(0.1, 0.9, 0.7)
        x = rng.normal(size=8 if kind is TrajectoryKind.ALIVE else 4)
        total, n = 0.0, 10_000
        centre = {MeasurementKind.FIRST: m.H @ x[:4], MeasurementKind.LAST: m.H @ x[-4:]}
        for mk in MeasurementKind:
            if mk is MeasurementKind.FULL:
                mean = np.concatenate([centre[MeasurementKind.FIRST], centre[MeasurementKind.LAST]])
            else:
                mean = centre[mk]
            cov = 0.15 * np.eye(mean.size)
            prop = Gaussian(mean, cov)
            zs = rng.multivariate_normal(mean, cov, size=n)
            acc = 0.0
            for z in zs:
                Z = make_measurement(mk, z[:2] if mk is not MeasurementKind.LAST else None,
                                     z[-2:] if mk is not MeasurementKind.FIRST else None)
                dens = measurement_density(m, Z, kind, x)
                if dens:
                    acc += dens / gaussian_eval(z, prop)
            total += acc / n
        assert total == pytest.approx(1.0, abs=0.02)


class TestClutter:
    def test_equal_split(self):
        c = ClutterModel.from_total(10.0, AREA)
        assert c.rate_full == pytest.approx(10 / 3)
        total, window_end = clutter_rate(c)
        assert total == pytest.approx(10.0)
        assert window_end == pytest.approx(20 / 3)
        assert c.rate_full + 2 * c.rate_partial == total

    def test_intensity(self):
        c = ClutterModel(1.0, 2.0, AREA)
        assert clutter_intensity(c, make_measurement("first", [5.0, 5.0])) == pytest.approx(2.0 / 1e4)
        assert clutter_intensity(c, make_measurement("full", [5.0, 5.0], [6.0, 6.0])) == pytest.approx(1.0 / 1e8)
        assert clutter_intensity(c, make_measurement("last", z_last=[-1.0, 5.0])) == 0.0
        assert clutter_intensity(c, make_measurement("full", [5.0, 5.0], [6.0, 106.0])) == 0.0

    def test_window_end_marginal(self):
        c = ClutterModel.from_total(10.0, AREA).at_window_end()
        assert c.rate_full == 0.0 and c.rate_partial == 0.0
        assert c.rate_last == pytest.approx(20 / 3)

    def test_zero_rates_give_nothing(self):
        rng = np.random.default_rng(0)
        c = ClutterModel(0.0, 0.0, AREA)
        assert all(sample_clutter(c, rng) == [] for _ in range(100))

    def test_mean_count_and_support(self):
        rng = np.random.default_rng(1)
        c = ClutterModel.from_total(10.0, AREA)
        counts = []
        for _ in range(10_000):
            Zs = sample_clutter(c, rng)
            counts.append(len(Zs))
        assert abs(np.mean(counts) - 10.0) < 3 * np.sqrt(10.0 / 10_000)
        for Z in sample_clutter(ClutterModel.from_total(300.0, AREA), rng):
            for z in (Z.z_first, Z.z_last):
                assert z is None or c.contains(z)

    def test_invalid(self):
        with pytest.raises(ValueError):
            ClutterModel(-1.0, 0.0, AREA)
        with pytest.raises(ValueError):
            ClutterModel(1.0, 0.0, [[0.0, -1.0], [0.0, 1.0]])


class TestSampling:
    def test_certain_full(self):
        rng = np.random.default_rng(0)
        m = MeasurementModel.position(0.1, 1.0, 1.0)
        kinds = {sample_target_measurement(m, TrajectoryKind.ALIVE, np.zeros(8), rng).kind for _ in range(200)}
        assert kinds == {MeasurementKind.FULL}

    def test_never_detected(self):
        rng = np.random.default_rng(0)
        m = MeasurementModel.position(0.1, 0.0, 0.9)
        assert all(sample_target_measurement(m, TrajectoryKind.ALIVE, np.zeros(8), rng) is None
                   for _ in range(200))

    def test_kind_frequencies(self):
        rng = np.random.default_rng(3)
        m = MeasurementModel.position(0.1, 0.9, 0.9)
        n = 100_000
        counts = {k: 0 for k in MeasurementKind}
        for _ in range(n):
            Z = sample_target_measurement(m, TrajectoryKind.ALIVE, np.zeros(8), rng)
            if Z is not None:
                counts[Z.kind] += 1
        for kind, p in ((MeasurementKind.FULL, 0.81), (MeasurementKind.FIRST, 0.045),
                        (MeasurementKind.LAST, 0.045)):
            band = 3 * np.sqrt(p * (1 - p) / n)
            assert abs(counts[kind] / n - p) < band
        assert abs(counts[MeasurementKind.FULL] / n - 0.81) < 0.01

    def test_died_and_born_kinds(self):
        rng = np.random.default_rng(4)
        m = MeasurementModel.position(0.1, 1.0, 0.5)
        assert sample_target_measurement(m, TrajectoryKind.DIED, np.zeros(4), rng).kind is MeasurementKind.FIRST
        assert sample_target_measurement(m, TrajectoryKind.BORN, np.zeros(4), rng).kind is MeasurementKind.LAST

    def test_point_sensor_never_sees_died(self):
        rng = np.random.default_rng(5)
        m = MeasurementModel.point(np.eye(2, 4), 0.1 * np.eye(2), 1.0)
        assert sample_target_measurement(m, TrajectoryKind.DIED, np.zeros(4), rng) is None
        assert sample_target_measurement(m, TrajectoryKind.ALIVE, np.zeros(8), rng).kind is MeasurementKind.LAST


def test_window_birth_single_component():
    fine = MotionModel.ncv(0.2, 1)
    per_step = BirthModel.single(0.005, [50, 0, 50, 0], np.diag([50.0, 1, 50, 1]) ** 2)
    b = window_birth(per_step, fine, 7)
    assert len(b.components) == 1
    w, g = b.components[0]
    assert w == pytest.approx(0.005 * sum(0.99**j for j in range(7)))
    assert np.allclose(g.mean, [50, 0, 50, 0])
    assert g.is_valid()
    # covariance grows with the propagation
    assert g.cov[0, 0] > 2500.0


def test_birth_model_validation():
    with pytest.raises(ValueError):
        BirthModel.single(0.0, [0.0], [[1.0]])
    b = BirthModel(((1.0, [0.0], [[1.0]]), (3.0, Gaussian([4.0], [[2.0]]))))
    assert b.total_weight == 4.0
    w, g = b.reduced().components[0]
    assert w == 4.0 and g.mean == pytest.approx([3.0])
