import itertools
import math

import numpy as np
import pytest

from hnsq.assemblage import (
    Assemblage,
    DegenerateAngleError,
    MeasurementFamily,
    PseudoState,
    build_w,
    canonical_measurements,
    canonical_party_effects,
    dual_basis,
    from_quantum,
    norm_bound,
    norm_bound_f,
    reconstruct_assemblage,
    solve_theta_min,
    validate,
)
from hnsq.qops import (
    dag,
    haar_random_state,
    kron_all,
    partial_trace,
    partial_transpose,
    permute_factors,
    projector,
    random_qubit_projective,
    swap_operator,
)

KET0 = np.array([1.0, 0.0])
KET1 = np.array([0.0, 1.0])
PLUS = np.array([1.0, 1.0]) / np.sqrt(2)


def ghz(n):
    v = np.zeros(2**n, dtype=complex)
    v[0] = v[-1] = 1 / np.sqrt(2)
    return v


class TestQops:
    def test_partial_trace_product(self):
        rng = np.random.default_rng(0)
        a = projector(haar_random_state(2, rng))
        b = projector(haar_random_state(3, rng))
        np.testing.assert_allclose(
            partial_trace(np.kron(a, b), [2, 3], keep=[1]), b, atol=1e-12
        )
        np.testing.assert_allclose(
            partial_trace(np.kron(a, b), [2, 3], keep=[0]), a, atol=1e-12
        )

    def test_partial_transpose_involution(self):
        rng = np.random.default_rng(1)
        m = rng.standard_normal((8, 8)) + 1j * rng.standard_normal((8, 8))
        pt = partial_transpose(m, [2, 2, 2], which=[1])
        np.testing.assert_allclose(
            partial_transpose(pt, [2, 2, 2], which=[1]), m, atol=1e-12
        )

    def test_swap_operator(self):
        s = swap_operator(2)
        np.testing.assert_allclose(s @ s, np.eye(4), atol=1e-14)
        # exchanges |01> and |10>, fixes |00>, |11>
        v = np.kron(KET0, KET1)
        np.testing.assert_allclose(s @ v, np.kron(KET1, KET0), atol=1e-14)
        rng = np.random.default_rng(2)
        for _ in range(5):
            r1 = projector(haar_random_state(2, rng)) * rng.uniform(0.2, 1.0)
            r2 = projector(haar_random_state(2, rng)) * rng.uniform(0.2, 1.0)
            lhs = np.trace(s @ np.kron(r1, r2))
            np.testing.assert_allclose(lhs, np.trace(r1 @ r2), atol=1e-12)

    def test_permute_factors(self):
        rng = np.random.default_rng(3)
        a = rng.standard_normal((2, 2))
        b = rng.standard_normal((2, 2))
        c = rng.standard_normal((2, 2))
        op = kron_all(a, b, c)
        moved = permute_factors(op, [2, 2, 2], order=[1, 2, 0])
        # factor 0 moves to slot 1, 1 to slot 2, 2 to slot 0
        np.testing.assert_allclose(moved, kron_all(c, a, b), atol=1e-12)


class TestCanonicalMeasurements:
    def test_theta_pi4_effects(self):
        block = canonical_party_effects(2, 2, math.pi / 4)
        np.testing.assert_allclose(block[0, 0], projector(KET0), atol=1e-14)
        np.testing.assert_allclose(block[1, 0], projector(PLUS), atol=1e-14)

    def test_degenerate_angles_rejected(self):
        for theta in (0.0, math.pi / 2, math.pi):
            with pytest.raises(DegenerateAngleError):
                canonical_party_effects(2, 2, theta)

    def test_gram_entries_at_pi4(self):
        block = canonical_party_effects(2, 2, math.pi / 4)
        assert np.trace(np.eye(2)) == 2
        overlap = np.trace(block[0, 0] @ block[1, 0]).real
        assert overlap == pytest.approx(0.5, abs=1e-14)

    def test_completeness(self):
        fam = canonical_measurements(2, 2, 2)
        for b in fam.effects:
            for x in range(2):
                np.testing.assert_allclose(b[x].sum(axis=0), np.eye(2), atol=1e-14)

    def test_general_mk_family(self):
        block = canonical_party_effects(3, 3)
        assert block.shape == (3, 3, 3, 3)
        np.testing.assert_allclose(
            block.sum(axis=1), np.broadcast_to(np.eye(3), (3, 3, 3)), atol=1e-12
        )


class TestDualBasis:
    def test_biorthogonality(self):
        fam = canonical_measurements(1, 2, 2, theta=0.9)
        duals = dual_basis(fam)
        block = fam.effects[0]
        system = [np.eye(2), block[0, 0], block[1, 0]]
        dual_ops = [duals.ident_dual[0], duals.effect_duals[0][0, 0], duals.effect_duals[0][1, 0]]
        for i, n_op in enumerate(system):
            for j, d_op in enumerate(dual_ops):
                val = np.trace(n_op @ d_op).real
                assert val == pytest.approx(float(i == j), abs=1e-10)

    def test_dual_identity_norm_at_pi4(self):
        duals = dual_basis(canonical_measurements(1, 2, 2, math.pi / 4))
        norm = np.abs(np.linalg.eigvalsh(duals.ident_dual[0])).max()
        expected = 1.0 / (2 * math.cos(math.pi / 4)) + 0.5
        assert norm == pytest.approx(expected, abs=1e-12)

    def test_dual_effect_norms_at_pi4(self):
        duals = dual_basis(canonical_measurements(1, 2, 2, math.pi / 4))
        for x in range(2):
            norm = np.abs(np.linalg.eigvalsh(duals.effect_duals[0][x, 0])).max()
            assert norm == pytest.approx(1.0, abs=1e-12)

    def test_dual_norms_general_theta(self):
        for theta in (0.5, 0.715, 1.1):
            duals = dual_basis(canonical_measurements(1, 2, 2, theta))
            norm_i = np.abs(np.linalg.eigvalsh(duals.ident_dual[0])).max()
            assert norm_i == pytest.approx(0.5 + 0.5 / math.cos(theta), abs=1e-10)
            norm_m = np.abs(np.linalg.eigvalsh(duals.effect_duals[0][0, 0])).max()
            assert norm_m == pytest.approx(
                1.0 / (2 * math.sin(theta) * math.cos(theta)), abs=1e-10
            )


def ghz_assemblage(theta=math.pi / 4):
    fam = canonical_measurements(2, 2, 2, theta)
    return from_quantum(ghz(3), fam, d_B=2), fam


class TestValidateAndFromQuantum:
    def test_ghz_assemblage_valid(self):
        a, _ = ghz_assemblage()
        assert validate(a) == []

    def test_scaled_block_names_marginal_constraint(self):
        a, _ = ghz_assemblage()
        sigma = a.sigma.copy()
        sigma[0, 0, 0, 0] *= 1.1
        bad = Assemblage(2, 2, 2, sigma)
        problems = validate(bad)
        assert problems
        assert any("marginal" in p or "no-signaling" in p for p in problems)

    def test_single_party_qubit_assemblage(self):
        rng = np.random.default_rng(5)
        fam = canonical_measurements(1, 2, 2)
        state = haar_random_state(4, rng)
        a = from_quantum(state, fam, d_B=2)
        assert validate(a) == []

    def test_product_state_is_unsteerable(self):
        rng = np.random.default_rng(6)
        rho_a = np.diag([0.7, 0.3])
        rho_b = projector(haar_random_state(2, rng))
        fam = canonical_measurements(1, 2, 2)
        a = from_quantum(np.kron(rho_a, rho_b), fam, d_B=2)
        for outs, sets in itertools.product(range(2), range(2)):
            block = a.sigma[outs, sets]
            p = np.trace(block).real
            np.testing.assert_allclose(block, p * rho_b, atol=1e-12)

    def test_maximally_entangled_projective(self):
        fam = canonical_measurements(1, 2, 2)
        phi = np.zeros(4, dtype=complex)
        phi[0] = phi[3] = 1 / np.sqrt(2)
        a = from_quantum(phi, fam, d_B=2)
        np.testing.assert_allclose(a.sigma[0, 0], projector(KET0) / 2, atol=1e-12)
        np.testing.assert_allclose(a.sigma[0, 1], projector(PLUS) / 2, atol=1e-12)


class TestBuildW:
    def test_trace_one_and_hermitian(self):
        a, fam = ghz_assemblage()
        ps = build_w(a, fam)
        assert abs(np.trace(ps.w) - 1.0) < 1e-10

    def test_single_party_round_trip(self):
        rng = np.random.default_rng(7)
        fam = canonical_measurements(1, 2, 2)
        a = from_quantum(haar_random_state(4, rng), fam, d_B=2)
        ps = build_w(a, fam)
        back = reconstruct_assemblage(ps, fam)
        np.testing.assert_allclose(back.sigma, a.sigma, atol=1e-9)

    def test_ghz_round_trip(self):
        a, fam = ghz_assemblage()
        ps = build_w(a, fam)
        back = reconstruct_assemblage(ps, fam)
        np.testing.assert_allclose(back.sigma, a.sigma, atol=1e-9)

    def test_unsteerable_product_gives_product_w(self):
        # real single-party state lies in the span of {1, M00, M01}, so the
        # dual resummation returns exactly rho_A (x) rho_B, a PSD operator
        rho_a = np.array([[0.6, 0.2], [0.2, 0.4]])
        rho_b = np.diag([0.25, 0.75])
        fam = canonical_measurements(1, 2, 2)
        a = from_quantum(np.kron(rho_a, rho_b), fam, d_B=2)
        ps = build_w(a, fam)
        np.testing.assert_allclose(ps.w, np.kron(rho_a, rho_b), atol=1e-10)
        assert np.linalg.eigvalsh(ps.w).min() > -1e-12

    def test_invalid_assemblage_rejected(self):
        a, fam = ghz_assemblage()
        sigma = a.sigma.copy()
        sigma[0, 0, 0, 0] *= 1.3
        with pytest.raises(ValueError):
            build_w(Assemblage(2, 2, 2, sigma), fam)


class TestReconstruct:
    def test_maximally_mixed_w_gives_uniform_assemblage(self):
        fam = canonical_measurements(2, 2, 2)
        w = np.eye(8, dtype=complex) / 8
        ps = PseudoState(w, (2, 2, 2))
        a = reconstruct_assemblage(ps, fam)
        assert validate(a) == []
        for outs in itertools.product(range(2), repeat=2):
            for sets in itertools.product(range(2), repeat=2):
                block = a.sigma[outs + sets]
                p = np.trace(block).real
                np.testing.assert_allclose(block, p * np.eye(2) / 2, atol=1e-12)

    def test_random_hermitian_w_satisfies_linear_constraints(self):
        rng = np.random.default_rng(8)
        fam = canonical_measurements(2, 2, 2)
        h = rng.standard_normal((8, 8)) + 1j * rng.standard_normal((8, 8))
        h = (h + dag(h)) / 2
        h = h / np.trace(h).real
        a = reconstruct_assemblage(PseudoState(h, (2, 2, 2)), fam)
        problems = [p for p in validate(a) if "positivity" not in p]
        assert problems == []


class TestRoundTripProperty:
    def test_random_quantum_assemblages(self):
        rng = np.random.default_rng(9)
        fam = canonical_measurements(2, 2, 2)
        bound = norm_bound_f(math.pi / 4) ** 2
        for _ in range(25):
            state = haar_random_state(8, rng)
            a = from_quantum(state, fam, d_B=2)
            ps = build_w(a, fam)
            assert abs(np.trace(ps.w).real - 1.0) < 1e-10
            back = reconstruct_assemblage(ps, fam)
            assert np.abs(back.sigma - a.sigma).max() < 1e-8
            eig = np.linalg.eigvalsh(ps.w)
            assert eig.min() >= -bound and eig.max() <= bound

    def test_round_trip_with_random_projective_family(self):
        rng = np.random.default_rng(10)
        for _ in range(5):
            blocks = []
            for _ in range(2):
                block = np.zeros((2, 2, 2, 2), dtype=complex)
                for x in range(2):
                    p = random_qubit_projective(rng)
                    block[x, 0] = p
                    block[x, 1] = np.eye(2) - p
                blocks.append(block)
            fam = MeasurementFamily(tuple(blocks))
            a = from_quantum(haar_random_state(8, rng), fam, d_B=2)
            ps = build_w(a, fam)
            back = reconstruct_assemblage(ps, fam)
            assert np.abs(back.sigma - a.sigma).max() < 1e-8


class TestNormBounds:
    def test_f_at_pi4(self):
        assert norm_bound_f(math.pi / 4) == pytest.approx((5 + math.sqrt(2)) / 2, abs=1e-12)

    def test_f_outside_domain(self):
        for theta in (-0.1, 0.0, math.pi / 2, 2.0):
            with pytest.raises(ValueError):
                norm_bound_f(theta)

    def test_norm_bound_squared_below_eleven(self):
        assert norm_bound(math.pi / 4, 2) == pytest.approx(((5 + math.sqrt(2)) / 2) ** 2)
        assert norm_bound(math.pi / 4, 2) <= 11.0

    def test_theta_min(self):
        theta = solve_theta_min()
        assert theta == pytest.approx(0.715, abs=5e-4)
        s = math.sin(theta)
        assert abs(s**3 + 4 * s**2 - 2) < 1e-12
        assert 3.181 <= norm_bound_f(theta) <= 3.183

    def test_theta_min_is_stationary(self):
        theta = solve_theta_min()
        eps = 1e-6
        deriv = (norm_bound_f(theta + eps) - norm_bound_f(theta - eps)) / (2 * eps)
        assert abs(deriv) < 1e-6
