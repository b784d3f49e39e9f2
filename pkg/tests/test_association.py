import itertools

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from tmpmbm.association import (
    InfeasibleAssignmentError,
    gate,
    mahalanobis2,
    murty_kbest,
    optimal_assignment,
)


def enumerate_all(cost):
    # independent oracle: every injective row->column map
    m, n = cost.shape
    out = []
    for cols in itertools.permutations(range(n), m):
        total = sum(cost[i, j] for i, j in enumerate(cols))
        if np.isfinite(total):
            out.append(total)
    return sorted(out)


class TestGate:
    def test_boundary_is_inside(self):
        assert mahalanobis2([0.0, 0.0], np.eye(2), [3.0, 0.0]) == 9.0
        assert gate([0.0, 0.0], np.eye(2), [3.0, 0.0], 9.0)

    def test_same_point(self):
        assert gate([1.0, 2.0], np.eye(2), [1.0, 2.0], 9.0)

    def test_outside(self):
        assert not gate([0.0, 0.0], np.eye(2), [4.0, 0.0], 9.0)

    def test_uses_covariance(self):
        assert gate([0.0, 0.0], 4.0 * np.eye(2), [4.0, 0.0], 9.0)


class TestMurty:
    def test_two_by_two(self):
        out = murty_kbest([[1.0, 10.0], [10.0, 1.0]], 2)
        assert [c for _, c in out] == [2.0, 20.0]
        assert [a for a, _ in out] == [(0, 1), (1, 0)]

    def test_k_exceeds_feasible(self):
        out = murty_kbest([[1.0, np.inf], [np.inf, 1.0]], 5)
        assert out == [((0, 1), 2.0)]

    def test_infeasible(self):
        with pytest.raises(InfeasibleAssignmentError):
            murty_kbest([[np.inf, np.inf], [0.0, 1.0]], 1)

    def test_empty_rows(self):
        assert murty_kbest(np.zeros((0, 3)), 4) == [((), 0.0)]

    @pytest.mark.parametrize("bad", [[[np.nan]], [[-np.inf]]])
    def test_bad_entries(self, bad):
        with pytest.raises(ValueError):
            murty_kbest(bad, 1)

    def test_negative_costs(self):
        cost = np.array([[-5.0, -1.0], [-2.0, -7.0]])
        assert [c for _, c in murty_kbest(cost, 2)] == [-12.0, -3.0]

    def test_rectangular(self):
        cost = np.array([[1.0, 2.0, 3.0]])
        assert [c for _, c in murty_kbest(cost, 3)] == [1.0, 2.0, 3.0]

    def test_random_square_full_enumeration(self):
        rng = np.random.default_rng(0)
        for _ in range(20):
            cost = rng.normal(size=(4, 4))
            got = murty_kbest(cost, 24)
            assert len(got) == 24
            assert np.allclose([c for _, c in got], enumerate_all(cost), atol=1e-12, rtol=0)
            assert len({a for a, _ in got}) == 24

    @settings(max_examples=100, deadline=None)
    @given(st.integers(0, 2**32 - 1))
    def test_matches_enumeration_with_forbidden(self, seed):
        rng = np.random.default_rng(seed)
        m = int(rng.integers(1, 5))
        n = int(rng.integers(m, 6))
        cost = rng.uniform(-3, 3, size=(m, n))
        cost[rng.random((m, n)) < 0.3] = np.inf
        want = enumerate_all(cost)
        if not want:
            with pytest.raises(InfeasibleAssignmentError):
                murty_kbest(cost, 1)
            return
        got = murty_kbest(cost, len(want) + 2)
        totals = [c for _, c in got]
        assert len(got) == len(want)
        assert np.allclose(totals, want, atol=1e-12, rtol=0)
        assert totals == sorted(totals)
        for a, c in got:
            assert len(set(a)) == m
            assert c == pytest.approx(sum(cost[i, j] for i, j in enumerate(a)), abs=1e-12)

    def test_optimal(self):
        a, c = optimal_assignment([[4.0, 1.0, 3.0], [2.0, 0.0, 5.0], [3.0, 2.0, 2.0]])
        assert c == 5.0 and a == (1, 0, 2)
