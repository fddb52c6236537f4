import itertools

import numpy as np
import pytest

from hnsq.core import (
    BellFunctional,
    Box,
    EnumerationTooLargeError,
    MalformedBoxError,
    Scenario,
    bell_value,
    classical_bound,
    correlator_to_probability,
    correlator_value,
    enumerate_deterministic_boxes,
    is_no_signaling,
    pr_box,
    prepend_deterministic_party,
    probability_to_correlator,
    product_box,
    uniform_box,
)

BIPARTITE = Scenario(2, 2, 2, has_trusted_party=False)
TRIPARTITE = Scenario(2, 2, 2, has_trusted_party=True)


def chsh_correlators():
    """<A0B0> + <A0B1> + <A1B0> - <A1B1> as a correlator table."""
    corr = np.zeros((3, 3))
    corr[1, 1] = corr[1, 2] = corr[2, 1] = 1.0
    corr[2, 2] = -1.0
    return corr


def chsh_functional():
    return correlator_to_probability(chsh_correlators(), BIPARTITE)


def random_local_box(scenario, rng):
    """Random convex mixture of deterministic boxes (local, hence no-signaling)."""
    boxes = list(enumerate_deterministic_boxes(scenario))
    w = rng.dirichlet(np.ones(len(boxes)))
    table = sum(wi * b.table for wi, b in zip(w, boxes))
    return Box(scenario, table)


class TestBoxValidation:
    def test_uniform_box_valid(self):
        uniform_box(TRIPARTITE)

    def test_bad_normalization_rejected(self):
        table = np.full(BIPARTITE.table_shape, 0.3)
        with pytest.raises(MalformedBoxError):
            Box(BIPARTITE, table)

    def test_negative_entry_rejected(self):
        table = np.full(BIPARTITE.table_shape, 0.25)
        table[0, 0, 0, 0] = -0.1
        table[1, 1, 0, 0] = 0.6
        with pytest.raises(MalformedBoxError):
            Box(BIPARTITE, table)

    def test_wrong_shape_rejected(self):
        with pytest.raises(MalformedBoxError):
            Box(BIPARTITE, np.zeros((2, 2, 2)))


class TestNoSignaling:
    def test_uniform_box(self):
        assert is_no_signaling(uniform_box(TRIPARTITE), 1e-7)

    def test_pr_box(self):
        assert is_no_signaling(pr_box(), 1e-7)

    def test_signaling_box(self):
        # Alice's marginal depends on Bob's setting: deterministic outcomes
        # a = b = y.
        table = np.zeros(BIPARTITE.table_shape)
        for x, y in itertools.product(range(2), repeat=2):
            table[y, y, x, y] = 1.0
        box = Box(BIPARTITE, table)
        assert not is_no_signaling(box, 1e-7)

    def test_deterministic_boxes_are_no_signaling(self):
        for box in enumerate_deterministic_boxes(BIPARTITE):
            assert is_no_signaling(box, 1e-9)


class TestBellValue:
    def test_offset_only(self):
        f = BellFunctional(BIPARTITE, np.zeros(BIPARTITE.table_shape), offset=5.0)
        assert bell_value(f, uniform_box(BIPARTITE)) == 5.0

    def test_chsh_on_pr_box(self):
        assert bell_value(chsh_functional(), pr_box()) == pytest.approx(4.0, abs=1e-12)

    def test_chsh_on_deterministic(self):
        # a = b = 0 always: all four correlators are +1, CHSH = 1+1+1-1 = 2.
        table = np.zeros(BIPARTITE.table_shape)
        table[0, 0, :, :] = 1.0
        assert bell_value(chsh_functional(), Box(BIPARTITE, table)) == pytest.approx(2.0)


class TestEnumeration:
    @pytest.mark.parametrize(
        "scenario,count",
        [
            (Scenario(2, 1, 2, has_trusted_party=False), 4),
            (Scenario(2, 2, 2, has_trusted_party=False), 16),
            (Scenario(3, 2, 2, has_trusted_party=False), 64),
        ],
    )
    def test_counts(self, scenario, count):
        boxes = list(enumerate_deterministic_boxes(scenario))
        assert len(boxes) == count
        seen = {b.table.tobytes() for b in boxes}
        assert len(seen) == count

    def test_entries_are_binary(self):
        for box in enumerate_deterministic_boxes(BIPARTITE):
            assert set(np.unique(box.table)) <= {0.0, 1.0}

    def test_guard(self):
        with pytest.raises(EnumerationTooLargeError):
            list(enumerate_deterministic_boxes(Scenario(4, 4, 4, has_trusted_party=False)))


class TestClassicalBound:
    def test_chsh(self):
        assert classical_bound(chsh_functional()) == pytest.approx(2.0, abs=1e-12)

    def test_constant(self):
        f = BellFunctional(BIPARTITE, np.zeros(BIPARTITE.table_shape), offset=1.5)
        assert classical_bound(f) == 1.5

    def test_matches_enumeration(self):
        rng = np.random.default_rng(7)
        for _ in range(5):
            coeffs = rng.standard_normal(TRIPARTITE.table_shape)
            f = BellFunctional(TRIPARTITE, coeffs)
            brute = max(
                bell_value(f, b) for b in enumerate_deterministic_boxes(TRIPARTITE)
            )
            assert classical_bound(f) == pytest.approx(brute, abs=1e-10)


class TestCorrelatorForm:
    def test_single_party_marginal_term(self):
        corr = np.zeros((3, 3))
        corr[1, 0] = 1.0  # <A at setting 0>, B traced out
        f = correlator_to_probability(corr, BIPARTITE)
        # +1 on a=0, -1 on a=1 at x=0, replicated over Bob with weight 1/m
        expected = np.zeros(BIPARTITE.table_shape)
        expected[0, :, 0, :] = 0.5
        expected[1, :, 0, :] = -0.5
        np.testing.assert_allclose(f.coefficients, expected, atol=1e-14)
        assert f.offset == 0.0

    def test_chsh_classical_bound(self):
        assert classical_bound(chsh_functional()) == pytest.approx(2.0)

    def test_zero_table(self):
        f = correlator_to_probability(np.zeros((3, 3)), BIPARTITE)
        assert not f.coefficients.any()
        assert f.offset == 0.0

    def test_identity_entry_becomes_offset(self):
        corr = np.zeros((3, 3))
        corr[0, 0] = 2.5
        f = correlator_to_probability(corr, BIPARTITE)
        assert f.offset == 2.5
        assert not f.coefficients.any()

    def test_requires_binary_outcomes(self):
        with pytest.raises(ValueError):
            correlator_to_probability(
                np.zeros((3, 3)), Scenario(2, 2, 3, has_trusted_party=False)
            )

    def test_expansion_matches_direct_evaluation(self):
        # On no-signaling boxes the expansion must reproduce the correlator
        # combination computed directly from marginals.
        rng = np.random.default_rng(11)
        for _ in range(20):
            corr = rng.standard_normal((3, 3, 3))
            box = random_local_box(Scenario(3, 2, 2, has_trusted_party=False), rng)
            f = correlator_to_probability(corr, box.scenario)
            direct = 0.0
            t = box.table
            for idx in itertools.product(range(3), repeat=3):
                if all(i == 0 for i in idx):
                    direct += corr[idx]
                    continue
                # correlator of the measured parties, averaged over traced ones
                total = 0.0
                settings_pool = [
                    [i - 1] if i > 0 else list(range(2)) for i in idx
                ]
                for xs in itertools.product(*settings_pool):
                    for outs in itertools.product(range(2), repeat=3):
                        sign = (-1) ** sum(
                            outs[p] for p in range(3) if idx[p] > 0
                        )
                        total += sign * t[outs + xs]
                weight = corr[idx] / 2 ** sum(1 for i in idx if i == 0)
                direct += weight * total
            assert bell_value(f, box) == pytest.approx(direct, abs=1e-10)

    def test_round_trip_on_ns_subspace(self):
        rng = np.random.default_rng(3)
        for _ in range(10):
            corr = rng.standard_normal((3, 3))
            f = correlator_to_probability(corr, BIPARTITE)
            back = probability_to_correlator(f)
            np.testing.assert_allclose(back, corr, atol=1e-12)

    def test_projection_preserves_values_on_ns_boxes(self):
        rng = np.random.default_rng(5)
        for _ in range(10):
            coeffs = rng.standard_normal(BIPARTITE.table_shape)
            f = BellFunctional(BIPARTITE, coeffs, offset=rng.standard_normal())
            corr = probability_to_correlator(f)
            g = correlator_to_probability(corr, BIPARTITE)
            box = random_local_box(BIPARTITE, rng)
            assert bell_value(g, box) == pytest.approx(bell_value(f, box), abs=1e-10)
            assert correlator_value(corr, pr_box()) == pytest.approx(
                bell_value(f, pr_box()), abs=1e-10
            )


class TestProductBox:
    def test_deterministic_times_pr_is_no_signaling(self):
        box = prepend_deterministic_party(pr_box(), [0, 0])
        assert box.scenario.parties == 3
        assert is_no_signaling(box, 1e-9)

    def test_marginals_factor(self):
        box = prepend_deterministic_party(pr_box(), [0, 1])
        # BC marginal at any x equals the PR box
        for x in range(2):
            bc = box.table.sum(axis=0)[..., x, :, :]
            np.testing.assert_allclose(bc, pr_box().table, atol=1e-12)

    def test_product_of_two_boxes(self):
        joint = product_box(pr_box(), pr_box())
        assert joint.scenario.parties == 4
        assert is_no_signaling(joint, 1e-9)
        np.testing.assert_allclose(
            joint.table[0, 0, 1, 1, 0, 1, 1, 1],
            pr_box().table[0, 0, 0, 1] * pr_box().table[1, 1, 1, 1],
        )
