import numpy as np
import pytest

from hnsq.core import (
    BellFunctional,
    Box,
    Scenario,
    bell_value,
    classical_bound,
    correlator_to_probability,
    enumerate_deterministic_boxes,
    pr_box,
    prepend_deterministic_party,
    uniform_box,
)
from hnsq.polytope import (
    EmptyConstraintSetError,
    flex_ns,
    ns_bound,
    ns_equalities,
    ns_maximizing_box,
    ns_membership,
)

BIPARTITE = Scenario(2, 2, 2, has_trusted_party=False)


def chsh():
    corr = np.zeros((3, 3))
    corr[1, 1] = corr[1, 2] = corr[2, 1] = 1.0
    corr[2, 2] = -1.0
    return correlator_to_probability(corr, BIPARTITE)


class TestNsEqualities:
    def test_rows_annihilate_ns_boxes(self):
        A, b = ns_equalities(BIPARTITE)
        for box in (pr_box(), uniform_box(BIPARTITE)):
            np.testing.assert_allclose(A @ box.table.ravel(), b, atol=1e-12)

    def test_rank_matches_polytope_dimension(self):
        # dim NS(n,m,k) = (m(k-1)+1)**n - 1; rows must cut exactly that
        A, _ = ns_equalities(BIPARTITE)
        assert A.shape[0] == 16 - (3**2 - 1)
        A3, _ = ns_equalities(Scenario(3, 2, 2, has_trusted_party=False))
        assert A3.shape[0] == 64 - (3**3 - 1)
        assert np.linalg.matrix_rank(A3) == A3.shape[0]


class TestNsBound:
    def test_chsh_reaches_four(self):
        assert ns_bound(chsh()) == pytest.approx(4.0, abs=1e-7)

    def test_constant_functional(self):
        f = BellFunctional(BIPARTITE, np.zeros(BIPARTITE.table_shape), offset=2.5)
        assert ns_bound(f) == pytest.approx(2.5, abs=1e-7)

    def test_dominates_classical_bound(self):
        rng = np.random.default_rng(2)
        for _ in range(5):
            f = BellFunctional(BIPARTITE, rng.standard_normal(BIPARTITE.table_shape))
            assert ns_bound(f) >= classical_bound(f) - 1e-7

    def test_maximizer_attains_bound(self):
        value, box = ns_maximizing_box(chsh())
        assert value == pytest.approx(4.0, abs=1e-6)
        assert bell_value(chsh(), box) == pytest.approx(4.0, abs=1e-5)
        np.testing.assert_allclose(box.table, pr_box().table, atol=1e-5)


class TestFlexNs:
    def test_chsh_at_four_is_one(self):
        assert flex_ns(chsh(), 4.0) == pytest.approx(1.0, abs=1e-6)

    def test_chsh_at_zero_exceeds_one(self):
        assert flex_ns(chsh(), 0.0) > 1.0 + 1e-6

    def test_nonincreasing_in_floor(self):
        f = chsh()
        values = [flex_ns(f, B) for B in (0.0, 2.0, 3.0, 4.0)]
        assert all(a >= b - 1e-7 for a, b in zip(values, values[1:]))

    def test_floor_above_bound_raises(self):
        with pytest.raises(EmptyConstraintSetError):
            flex_ns(chsh(), 4.5)

    def test_at_least_one_when_nonempty(self):
        rng = np.random.default_rng(4)
        f = BellFunctional(BIPARTITE, rng.standard_normal(BIPARTITE.table_shape))
        assert flex_ns(f, classical_bound(f)) >= 1.0 - 1e-7


class TestNsMembership:
    def test_pr_box(self):
        assert ns_membership(pr_box())

    def test_signaling_box(self):
        table = np.zeros(BIPARTITE.table_shape)
        for x, y in np.ndindex(2, 2):
            table[y, y, x, y] = 1.0
        assert not ns_membership(Box(BIPARTITE, table))

    def test_deterministic_times_pr(self):
        assert ns_membership(prepend_deterministic_party(pr_box(), [0, 1]))
