"""Linear-programming bounds and Flex values over the no-signaling polytope.

The polytope lives in the flattened box-table coordinates of ``core``: the
variables are the k**N * m**N probabilities, constrained by normalization per
setting tuple and by the no-signaling equalities (for each party, the summed
marginal must agree between consecutive settings of that party).
"""

from __future__ import annotations

import itertools

import numpy as np
from scipy import linalg, sparse

from hnsq import conic
from hnsq.core import (
    CROSS_TOL,
    BellFunctional,
    Box,
    Scenario,
    bell_value,
    is_no_signaling,
)


class EmptyConstraintSetError(ValueError):
    """Requested Bell value exceeds the no-signaling maximum."""


def _rank_filter(rows: np.ndarray, tol: float = 1e-10) -> np.ndarray:
    """Drop linearly dependent rows via a pivoted QR on the transpose."""
    if rows.shape[0] == 0:
        return rows
    _, r, piv = linalg.qr(rows.T, mode="economic", pivoting=True)
    diag = np.abs(np.diag(r))
    rank = int((diag > tol * diag[0]).sum()) if diag.size else 0
    keep = np.sort(piv[:rank])
    return rows[keep]


def ns_equalities(scenario: Scenario) -> tuple[np.ndarray, np.ndarray]:
    """Non-redundant equality rows (A, b) defining the NS polytope affine hull.

    Rows cover normalization (rhs 1) and, for each party and each pair of its
    consecutive settings, equality of the summed-out marginals (rhs 0);
    redundant rows are removed by rank filtering with the normalization rows
    kept first.
    """
    n = scenario.parties
    k, m = scenario.k, scenario.m
    shape = scenario.table_shape
    size = int(np.prod(shape))

    rows = []
    rhs = []
    for xs in itertools.product(range(m), repeat=n):
        row = np.zeros(shape)
        row[(slice(None),) * n + xs] = 1.0
        rows.append(row.ravel())
        rhs.append(1.0)

    for party in range(n):
        others = [p for p in range(n) if p != party]
        for x in range(m - 1):
            for outs in itertools.product(range(k), repeat=n - 1):
                for sets in itertools.product(range(m), repeat=n - 1):
                    row = np.zeros(shape)
                    for a in range(k):
                        out_idx = list(outs)
                        out_idx.insert(party, a)
                        set_lo = list(sets)
                        set_lo.insert(party, x)
                        set_hi = list(sets)
                        set_hi.insert(party, x + 1)
                        row[tuple(out_idx) + tuple(set_lo)] += 1.0
                        row[tuple(out_idx) + tuple(set_hi)] -= 1.0
                    rows.append(row.ravel())
                    rhs.append(0.0)

    A = np.array(rows).reshape(-1, size)
    b = np.array(rhs)
    # rank filter jointly, then recover which rows survived to keep rhs aligned
    stacked = np.column_stack([A, b])
    filtered = _rank_filter(stacked)
    return filtered[:, :-1], filtered[:, -1]


def _ns_lp(f: BellFunctional, extra_rows=None, extra_rhs=None, objective=None):
    """Assemble the NS-polytope LP for a functional, optionally with a
    bell-value floor implemented through one slack variable."""
    A, b = ns_equalities(f.scenario)
    size = A.shape[1]
    if extra_rows is None:
        obj = f.coefficients.ravel() if objective is None else objective
        return conic.solve_lp(obj, sparse.csr_matrix(A), b)
    A_ext = np.zeros((A.shape[0] + len(extra_rows), size + 1))
    A_ext[: A.shape[0], :size] = A
    for i, (row, slack_coeff) in enumerate(extra_rows):
        A_ext[A.shape[0] + i, :size] = row
        A_ext[A.shape[0] + i, size] = slack_coeff
    b_ext = np.concatenate([b, extra_rhs])
    obj = np.zeros(size + 1)
    obj[:size] = f.coefficients.ravel() if objective is None else objective
    return conic.solve_lp(obj, sparse.csr_matrix(A_ext), b_ext)


def ns_bound(f: BellFunctional) -> float:
    """Exact (up to LP tolerance) maximum of a functional over NS boxes."""
    sol = _ns_lp(f).require_optimal()
    return sol.primal_value + f.offset


def ns_maximizing_box(f: BellFunctional) -> tuple[float, Box]:
    """NS maximum together with an attaining box (clipped to a valid table)."""
    sol = _ns_lp(f).require_optimal()
    flat = np.concatenate([blk.ravel() for blk in sol.primal_blocks])
    table = flat.reshape(f.scenario.table_shape).clip(0.0, 1.0)
    table = table / table.sum(axis=tuple(range(f.scenario.parties)), keepdims=True)
    return sol.primal_value + f.offset, Box(f.scenario, table, tol=1e-6)


def flex_ns(f: BellFunctional, value_floor: float, tol: float = 1e-7) -> float:
    """Averaged per-probability maximum over NS boxes with bell value >= floor.

    Returns (1/m**parties) * sum over all (outcome, setting) tuples of the LP
    maximum of that single probability subject to the no-signaling constraints
    and the bell-value floor.  A result of 1 certifies that the constrained
    set is a single box.
    """
    s = f.scenario
    top = ns_bound(f)
    if value_floor > top + tol:
        raise EmptyConstraintSetError(
            f"requested value {value_floor} exceeds NS bound {top}"
        )
    size = int(np.prod(s.table_shape))
    bell_row = (f.coefficients.ravel(), -1.0)  # sum c.p - slack = floor - offset
    total = 0.0
    for flat_index in range(size):
        obj = np.zeros(size)
        obj[flat_index] = 1.0
        sol = _ns_lp(
            f,
            extra_rows=[bell_row],
            extra_rhs=[value_floor - f.offset],
            objective=obj,
        ).require_optimal()
        total += sol.primal_value
    return total / s.m**s.parties


def ns_membership(box: Box, tol: float = CROSS_TOL) -> bool:
    """Direct no-signaling membership check (no LP): box invariants plus the
    marginal equalities evaluated entrywise."""
    return is_no_signaling(box, tol)
