"""Bell scenarios, probability boxes, and Bell functionals.

Index conventions used throughout the package:

* A scenario with N parties, m settings and k outcomes per party indexes a
  conditional probability table p(a_1 .. a_N | x_1 .. x_N) by an ndarray of
  shape ``(k,)*N + (m,)*N`` (outcome axes first, then setting axes, party 1
  slowest).  Flattening is row-major (C order), so files and constraint
  matrices agree bit-exactly with ``ndarray.ravel()``.
* Correlator tables for binary outcomes are indexed by ``(m+1,)*N`` where
  index 0 means "party not measured" (identity) and index j >= 1 means
  setting j-1.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np

#: Tolerance for structural checks (normalization, positivity of tables).
STRUCT_TOL = 1e-9
#: Tolerance for cross-module numerical comparisons.
CROSS_TOL = 1e-7

#: Guard for deterministic-strategy enumeration.
MAX_DETERMINISTIC_BOXES = 10**7


class MalformedBoxError(ValueError):
    """Box table fails shape, positivity or normalization requirements."""


class ScenarioMismatchError(ValueError):
    """Two objects built over different scenarios were combined."""


class EnumerationTooLargeError(ValueError):
    """Deterministic-strategy enumeration would exceed the configured guard."""


@dataclass(frozen=True)
class Scenario:
    """Party/setting/outcome counts of a Bell-type experiment.

    ``n_untrusted`` counts the device-like parties; when ``has_trusted_party``
    is true one additional (trusted, quantum) party participates.  All parties
    share the same number of settings ``m`` and outcomes ``k``.
    """

    n_untrusted: int
    m: int
    k: int
    has_trusted_party: bool = True

    def __post_init__(self):
        if self.n_untrusted < 0 or self.m < 1 or self.k < 2:
            raise ValueError(f"invalid scenario counts {self}")
        if self.parties < 2:
            raise ValueError("a Bell scenario needs at least two parties")

    @property
    def parties(self) -> int:
        return self.n_untrusted + (1 if self.has_trusted_party else 0)

    @property
    def table_shape(self) -> tuple[int, ...]:
        return (self.k,) * self.parties + (self.m,) * self.parties

    @property
    def outcome_tuples(self) -> int:
        return self.k**self.parties

    @property
    def setting_tuples(self) -> int:
        return self.m**self.parties

    def __str__(self):
        if self.has_trusted_party:
            return f"({self.n_untrusted}+1,{self.m},{self.k})"
        return f"({self.n_untrusted},{self.m},{self.k})"


def _as_table(scenario: Scenario, table, what: str) -> np.ndarray:
    arr = np.asarray(table, dtype=float)
    if arr.shape != scenario.table_shape:
        raise MalformedBoxError(
            f"{what} shape {arr.shape} does not match scenario "
            f"{scenario} shape {scenario.table_shape}"
        )
    return arr


@dataclass(frozen=True)
class Box:
    """Conditional probability table over a scenario.

    The table must be entrywise in [0, 1] and normalized per setting tuple,
    both within ``tol`` (default ``STRUCT_TOL``).
    """

    scenario: Scenario
    table: np.ndarray
    tol: float = field(default=STRUCT_TOL, compare=False)

    def __post_init__(self):
        arr = _as_table(self.scenario, self.table, "box table")
        if arr.min() < -self.tol or arr.max() > 1.0 + self.tol:
            raise MalformedBoxError(
                f"box entries outside [0,1]: min={arr.min():.3e} max={arr.max():.3e}"
            )
        sums = arr.sum(axis=tuple(range(self.scenario.parties)))
        err = np.abs(sums - 1.0).max()
        if err > self.tol:
            raise MalformedBoxError(f"box normalization off by {err:.3e}")
        arr.setflags(write=False)
        object.__setattr__(self, "table", arr)

    def marginal_setting_axis(self, party: int) -> int:
        return self.scenario.parties + party


@dataclass(frozen=True)
class BellFunctional:
    """Linear functional on boxes: sum(coefficients * table) + offset."""

    scenario: Scenario
    coefficients: np.ndarray
    offset: float = 0.0

    def __post_init__(self):
        arr = _as_table(self.scenario, self.coefficients, "coefficient table")
        arr.setflags(write=False)
        object.__setattr__(self, "coefficients", arr)
        object.__setattr__(self, "offset", float(self.offset))


def is_no_signaling(box: Box, tol: float = CROSS_TOL) -> bool:
    """Check that every party's marginal is independent of that party's setting.

    For each party i the table summed over a_i must not vary with x_i; the
    check is uniform over the remaining parties' outcomes and settings.
    Single-party conditions imply all subset marginals are well defined.
    """
    n = box.scenario.parties
    t = box.table
    for i in range(n):
        summed = t.sum(axis=i)
        # after removing outcome axis i, party i's setting axis index:
        ax = (n - 1) + i
        dev = np.abs(summed - summed.mean(axis=ax, keepdims=True)).max()
        if dev > tol:
            return False
    return True


def bell_value(f: BellFunctional, box: Box) -> float:
    """Evaluate the functional on a box."""
    if f.scenario != box.scenario:
        raise ScenarioMismatchError(f"{f.scenario} vs {box.scenario}")
    return float(np.vdot(f.coefficients, box.table)) + f.offset


def _strategy_onehots(scenario: Scenario) -> np.ndarray:
    """One-hot tensors of all k**m single-party deterministic strategies.

    Returns an array of shape (k**m, k, m) whose slice [s, a, x] is 1 when
    strategy s maps setting x to outcome a.
    """
    m, k = scenario.m, scenario.k
    strategies = np.array(list(itertools.product(range(k), repeat=m)))
    out = np.zeros((len(strategies), k, m))
    for s, assignment in enumerate(strategies):
        out[s, assignment, np.arange(m)] = 1.0
    return out


def enumerate_deterministic_boxes(scenario: Scenario):
    """Yield every deterministic box of a scenario as a 0/1 Box.

    Raises ``EnumerationTooLargeError`` when k**(m * parties) exceeds the
    enumeration guard.
    """
    n = scenario.parties
    total = scenario.k ** (scenario.m * n)
    if total > MAX_DETERMINISTIC_BOXES:
        raise EnumerationTooLargeError(
            f"{total} deterministic boxes exceed guard {MAX_DETERMINISTIC_BOXES}"
        )
    onehots = _strategy_onehots(scenario)
    for combo in itertools.product(range(len(onehots)), repeat=n):
        table = onehots[combo[0]]
        for s in combo[1:]:
            table = np.tensordot(table, onehots[s], axes=0)
        # table axes are (a1,x1,a2,x2,...); regroup to (a..., x...)
        perm = [2 * i for i in range(n)] + [2 * i + 1 for i in range(n)]
        yield Box(scenario, table.transpose(perm))


def classical_bound(f: BellFunctional) -> float:
    """Maximum of the functional over all deterministic boxes.

    Equals the maximum over the local set by convexity.  Evaluated as one
    tensor contraction of the coefficient table against per-party strategy
    one-hots, so no box tables are materialized.
    """
    s = f.scenario
    n = s.parties
    total = s.k ** (s.m * n)
    if total > MAX_DETERMINISTIC_BOXES:
        raise EnumerationTooLargeError(
            f"{total} deterministic boxes exceed guard {MAX_DETERMINISTIC_BOXES}"
        )
    onehots = _strategy_onehots(s)
    # V[s1..sN] = sum_{a,x} coeff[a,x] prod_i onehot[s_i, a_i, x_i]
    operands = [f.coefficients, list(range(2 * n))]
    for i in range(n):
        operands.append(onehots)
        operands.append([2 * n + i, i, n + i])
    values = np.einsum(*operands, list(range(2 * n, 3 * n)), optimize=True)
    return float(values.max()) + f.offset


def _correlator_basis(scenario: Scenario) -> np.ndarray:
    """Per-party expansion tensor F[t, a, x] for binary outcomes.

    t = 0 is the identity slot (weight 1/m for every a, x); t = j >= 1 puts
    weight (-1)**a at setting j-1.
    """
    m = scenario.m
    F = np.zeros((m + 1, 2, m))
    F[0] = 1.0 / m
    for j in range(m):
        F[j + 1, 0, j] = 1.0
        F[j + 1, 1, j] = -1.0
    return F


def correlator_to_probability(correlators, scenario: Scenario) -> BellFunctional:
    """Expand a correlator coefficient table into a probability functional.

    ``correlators`` has shape (m+1,)*parties; index 0 per party means the
    party is traced out (its settings averaged with weight 1/m), index j >= 1
    selects setting j-1 with outcome sign (-1)**a.  The all-identity entry is
    a constant on normalized boxes and is returned as the offset.  Requires
    binary outcomes.
    """
    if scenario.k != 2:
        raise ValueError("correlator form requires k = 2")
    n = scenario.parties
    corr = np.asarray(correlators, dtype=float)
    if corr.shape != (scenario.m + 1,) * n:
        raise ValueError(
            f"correlator shape {corr.shape} does not match {(scenario.m + 1,) * n}"
        )
    F = _correlator_basis(scenario)
    corr = corr.copy()
    offset = float(corr[(0,) * n])
    corr[(0,) * n] = 0.0
    operands = [corr, list(range(n))]
    for i in range(n):
        operands.append(F)
        operands.append([i, n + i, 2 * n + i])
    out_axes = list(range(n, 2 * n)) + list(range(2 * n, 3 * n))
    coeffs = np.einsum(*operands, out_axes, optimize=True)
    return BellFunctional(scenario, coeffs, offset)


def probability_to_correlator(f: BellFunctional) -> np.ndarray:
    """Contract a probability functional back to correlator form.

    Inverse of ``correlator_to_probability`` on the no-signaling subspace:
    the returned table reproduces the functional on every no-signaling box
    (probability coefficient tables are only unique up to signaling
    directions).  The all-identity entry absorbs the offset.
    """
    s = f.scenario
    if s.k != 2:
        raise ValueError("correlator form requires k = 2")
    n = s.parties
    F = _correlator_basis(s)
    flat = F.reshape(s.m + 1, 2 * s.m)
    # dual basis of the per-party family: G @ flat.T == identity
    G = np.linalg.solve(flat @ flat.T, flat).reshape(s.m + 1, 2, s.m)
    operands = [f.coefficients, list(range(2 * n))]
    for i in range(n):
        operands.append(G)
        operands.append([2 * n + i, i, n + i])
    corr = np.einsum(*operands, list(range(2 * n, 3 * n)), optimize=True)
    corr[(0,) * n] += f.offset
    return corr


def correlator_value(correlators, box: Box) -> float:
    """Evaluate a correlator table directly on a box (binary outcomes)."""
    f = correlator_to_probability(correlators, box.scenario)
    return bell_value(f, box)


def uniform_box(scenario: Scenario) -> Box:
    """The maximally mixed box p = 1/k**parties."""
    table = np.full(scenario.table_shape, scenario.k ** (-scenario.parties), dtype=float)
    return Box(scenario, table)


def pr_box() -> Box:
    """The bipartite Popescu-Rohrlich box: p(ab|xy) = 1/2 iff a + b = x*y mod 2."""
    s = Scenario(2, 2, 2, has_trusted_party=False)
    table = np.zeros(s.table_shape)
    for a, b, x, y in itertools.product(range(2), repeat=4):
        if (a + b) % 2 == (x * y) % 2:
            table[a, b, x, y] = 0.5
    return Box(s, table)


def prepend_deterministic_party(box: Box, outcome_map) -> Box:
    """Extend a box with a new first party answering deterministically.

    ``outcome_map[x]`` is the outcome the new party reports for setting x;
    the joint table is p(a, rest | x, xs) = [a == outcome_map[x]] * p(rest|xs).
    """
    s = box.scenario
    joint = Scenario(s.parties + 1, s.m, s.k, has_trusted_party=False)
    outcome_map = list(outcome_map)
    if len(outcome_map) != s.m:
        raise ValueError(f"outcome_map must assign all {s.m} settings")
    table = np.zeros(joint.table_shape)
    n = s.parties
    for x, a in enumerate(outcome_map):
        # slot the old table at new-party outcome a, setting x
        idx = (a,) + (slice(None),) * n + (x,) + (slice(None),) * n
        table[idx] = box.table
    return Box(joint, table)


def product_box(left: Box, right: Box) -> Box:
    """Tensor two boxes with identical (m, k) into one joint box."""
    ls, rs = left.scenario, right.scenario
    if (ls.m, ls.k) != (rs.m, rs.k):
        raise ScenarioMismatchError("product requires identical settings/outcomes")
    n1, n2 = ls.parties, rs.parties
    joint = Scenario(n1 + n2, ls.m, ls.k, has_trusted_party=False)
    table = np.tensordot(left.table, right.table, axes=0)
    # axes: (a_1.. x_1..)(a_2.. x_2..) -> (a_1.. a_2.. x_1.. x_2..)
    perm = (
        list(range(n1))
        + list(range(2 * n1, 2 * n1 + n2))
        + list(range(n1, 2 * n1))
        + list(range(2 * n1 + n2, 2 * (n1 + n2)))
    )
    return Box(joint, table.transpose(perm))
