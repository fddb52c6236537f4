"""Outer SDP approximation of the hybrid correlations with two no-signaling
parties (A, B) and one trusted qubit party (C), binary settings/outcomes.

Construction.  Any box of the hybrid set arises from a trace-one Hermitian
pseudo-state W on the 8-dimensional space A'B'C' (A', B' carry the fixed
computational/Hadamard reconstruction effects, C' the trusted qubit) measured
together with one free qubit measurement of C encoded on an extra register
C'' by the swap identity Tr[SWAP (rho x psi)] = Tr[rho psi].  Bounding the
spectrum of W by Lambda turns the product {W/normalization} x {psi} into a
subset of a positive, normalized, separable-like set, which is relaxed to a
symmetric PPT extension with ``charlie_copies`` copies of C'' (the DPS-style
outer hierarchy).  The steered blocks

    Sigma_{ab|xy} = (1+Lambda d) Tr_{A'B', extra copies}[xi (M_a|x x M_b|y x 1)]
                    - (Lambda d / 8) 1_2 x y,      y = Tr_{all but C''_1}[xi]

must be PSD, and probabilities are p(abc|xyz) = Tr[Sigma_{ab|xy} M^{c|z}]
with M^{0|0} = SWAP(C', C''), M^{0|1} = |0><0| x 1.

Everything is expressed over svec(xi) and handed to the conic interface; the
restriction to real symmetric xi loses nothing (all constraint/objective
matrices are real, and the real part of any feasible Hermitian xi is feasible
with identical probabilities).

Soundness: the feasible set contains every hybrid box (Lambda >= f(pi/4)^2
covers all pseudo-states of the canonical theta = pi/4 effects), so maxima
are certified upper bounds and an infeasible entrywise-distance below
tolerance certifies a box lies outside the hybrid set; membership is never
certified.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field, replace

import numpy as np
from scipy import sparse

from hnsq import conic
from hnsq.core import BellFunctional, Box, Scenario, bell_value
from hnsq.polytope import ns_equalities
from hnsq.qops import kron_all, partial_trace, projector, swap_operator

TRIPARTITE = Scenario(2, 2, 2, has_trusted_party=True)

#: exact spectral envelope f(pi/4)^2 of pseudo-states at the canonical angle
CANONICAL_LAMBDA_FLOOR = ((5.0 + math.sqrt(2.0)) / 2.0) ** 2

_XI_CUT_NAMES = ("copies", "last_copy", "half_copies")


@dataclass(frozen=True)
class HierarchyParams:
    """Level and strengthening knobs of the outer approximation.

    ``lam`` bounds the pseudo-state spectrum (default 11, valid for the
    canonical pi/4 effects); ``charlie_copies`` is the number of C'' copies
    in the symmetric extension; ``ppt_xi_cuts`` names partial transposes
    imposed on xi ("copies" = all C'' copies, "last_copy", "half_copies");
    ``ppt_blocks`` adds the C'|C'' partial transpose on every steered block.
    """

    lam: float = 11.0
    dim_w: int = 8
    charlie_copies: int = 2
    ppt_xi_cuts: tuple[str, ...] = ("copies", "last_copy")
    ppt_blocks: bool = True
    explicit_ns_constraints: bool = True
    gap_tol: float = 1e-7
    feas_tol: float = 1e-7
    max_iter: int = 400

    def __post_init__(self):
        if self.charlie_copies < 1:
            raise ValueError("charlie_copies must be at least 1")
        if self.dim_w != 8:
            raise ValueError("construction is specialized to dim_w = 8 (2+1 qubits)")
        if self.lam < CANONICAL_LAMBDA_FLOOR - 1e-12:
            raise ValueError(
                f"lam={self.lam} below f(pi/4)^2={CANONICAL_LAMBDA_FLOOR:.6f}: "
                "the relaxation would no longer contain all hybrid boxes"
            )
        for name in self.ppt_xi_cuts:
            if name not in _XI_CUT_NAMES:
                raise ValueError(f"unknown ppt cut {name!r}, options {_XI_CUT_NAMES}")


def fixed_measurements() -> tuple[np.ndarray, np.ndarray]:
    """Reconstruction effects for A', B' and the encoded effects for C.

    Returns ``(ab, charlie)``: ``ab[x, a]`` is the 2x2 computational (x=0) or
    Hadamard (x=1) projector; ``charlie[z, c]`` is the 4x4 effect on C'C''
    (z=0 outcome 0 is SWAP, z=1 outcome 0 is |0><0| x 1, complements sum to
    the identity).
    """
    plus = np.array([1.0, 1.0]) / math.sqrt(2)
    minus = np.array([1.0, -1.0]) / math.sqrt(2)
    ab = np.empty((2, 2, 2, 2))
    ab[0, 0] = np.diag([1.0, 0.0])
    ab[0, 1] = np.diag([0.0, 1.0])
    ab[1, 0] = projector(plus).real
    ab[1, 1] = projector(minus).real
    swap = swap_operator(2)
    charlie = np.empty((2, 2, 4, 4))
    charlie[0, 0] = swap
    charlie[0, 1] = np.eye(4) - swap
    charlie[1, 0] = np.kron(np.diag([1.0, 0.0]), np.eye(2))
    charlie[1, 1] = np.kron(np.diag([0.0, 1.0]), np.eye(2))
    return ab, charlie


def build_steered_blocks(xi: np.ndarray, params: HierarchyParams) -> np.ndarray:
    """Numeric steered blocks of an extension state.

    Returns an array indexed [a, b, x, y] of 4x4 blocks on C' x C''_1.  The
    map is linear in xi, which is what the SDP assembly relies on.
    """
    c = params.charlie_copies
    dims = [2] * (3 + c)
    lam_d = params.lam * params.dim_w
    ab, _ = fixed_measurements()
    y = partial_trace(xi, dims, keep=[3])
    blocks = np.empty((2, 2, 2, 2, 4, 4), dtype=complex)
    for a, b, x, yy in itertools.product(range(2), repeat=4):
        effect = kron_all(ab[x, a], ab[yy, b], np.eye(2 ** (1 + c)))
        measured = partial_trace(effect @ xi, dims, keep=[2, 3])
        blocks[a, b, x, yy] = (1 + lam_d) * measured - (lam_d / 8.0) * np.kron(
            np.eye(2), y
        )
    return blocks


def probabilities_from_blocks(blocks: np.ndarray) -> Box:
    """Born probabilities p(abc|xyz) = Tr[Sigma_{ab|xy} M^{c|z}] as a Box."""
    _, charlie = fixed_measurements()
    table = np.empty(TRIPARTITE.table_shape)
    for a, b, c, x, y, z in itertools.product(range(2), repeat=6):
        table[a, b, c, x, y, z] = float(
            np.real(np.trace(blocks[a, b, x, y] @ charlie[z, c]))
        )
    return Box(TRIPARTITE, table, tol=1e-6)


def quantum_box(state: np.ndarray, charlie_z0: np.ndarray) -> Box:
    """Born-rule box of a 3-qubit state under the fixed measurement family.

    A and B measure computational/Hadamard; C measures the projective pair
    {charlie_z0, 1 - charlie_z0} at z = 0 and computational at z = 1.  Boxes
    of this form lie inside the hybrid set, so they make sound "inside"
    fixtures for membership tests.
    """
    state = np.asarray(state, dtype=complex)
    rho = projector(state) if state.ndim == 1 else state
    ab, _ = fixed_measurements()
    cz = np.empty((2, 2, 2, 2), dtype=complex)
    cz[0, 0] = charlie_z0
    cz[0, 1] = np.eye(2) - charlie_z0
    cz[1, 0] = np.diag([1.0, 0.0])
    cz[1, 1] = np.diag([0.0, 1.0])
    table = np.empty(TRIPARTITE.table_shape)
    for a, b, c, x, y, z in itertools.product(range(2), repeat=6):
        effect = kron_all(ab[x, a], ab[y, b], cz[z, c])
        table[a, b, c, x, y, z] = float(np.real(np.trace(effect @ rho)))
    return Box(TRIPARTITE, table, tol=1e-9)


def embed_pseudo_state(
    w: np.ndarray, psi: np.ndarray, params: HierarchyParams
) -> np.ndarray:
    """Exact feasible extension state for a pseudo-state and a C'' qubit state.

    xi = (W + Lambda 1)/(1 + Lambda d) (x) psi (x) ... (x) psi reproduces the
    box of (W, psi) through the steered blocks; useful as a feasibility
    witness and in soundness tests.
    """
    lam, d = params.lam, params.dim_w
    shifted = (np.asarray(w) + lam * np.eye(d)) / (1.0 + lam * d)
    psi_op = projector(psi) if np.asarray(psi).ndim == 1 else np.asarray(psi)
    out = shifted
    for _ in range(params.charlie_copies):
        out = np.kron(out, psi_op)
    return out


# ---------------------------------------------------------------------------
# svec-level assembly


def _triangle_pairs(d: int) -> tuple[np.ndarray, np.ndarray]:
    rows = np.concatenate([np.arange(j + 1) for j in range(d)])
    cols = np.concatenate([np.full(j + 1, j, dtype=int) for j in range(d)])
    return rows, cols


def _entry_permutation_map(d: int, index_map) -> sparse.csr_matrix:
    """svec -> svec matrix of X -> X' with X'[i, j] = X[index_map(i, j)].

    ``index_map`` must send distinct pairs to distinct pairs (partial
    transposes and factor permutations do), so every svec coefficient is 1.
    """
    rows, cols = _triangle_pairs(d)
    n = rows.size
    out_idx = np.empty(n, dtype=int)
    for k in range(n):
        i2, j2 = index_map(int(rows[k]), int(cols[k]))
        out_idx[k] = conic.svec_entry_index(d, i2, j2)
    data = np.ones(n)
    return sparse.csr_matrix((data, (np.arange(n), out_idx)), shape=(n, n))


def _bit_subset_mask(total_qubits: int, qubits: list[int]) -> int:
    mask = 0
    for q in qubits:
        mask |= 1 << (total_qubits - 1 - q)  # qubit 0 is the slowest index bit
    return mask


def _ppt_map(total_qubits: int, qubits: list[int]) -> sparse.csr_matrix:
    mask = _bit_subset_mask(total_qubits, qubits)

    def index_map(i, j):
        i2 = (i & ~mask) | (j & mask)
        j2 = (j & ~mask) | (i & mask)
        return i2, j2

    return _entry_permutation_map(2**total_qubits, index_map)


def _qubit_swap_map(total_qubits: int, qa: int, qb: int) -> sparse.csr_matrix:
    ba = total_qubits - 1 - qa
    bb = total_qubits - 1 - qb

    def swap_bits(i):
        xa = (i >> ba) & 1
        xb = (i >> bb) & 1
        if xa == xb:
            return i
        return i ^ ((1 << ba) | (1 << bb))

    def index_map(i, j):
        return swap_bits(i), swap_bits(j)

    return _entry_permutation_map(2**total_qubits, index_map)


def _adjoint_rows(ops: list[np.ndarray]) -> np.ndarray:
    """Rows <op_k, xi> over svec(xi) for real symmetric operators op_k."""
    return np.array([conic.svec(np.real(op)) for op in ops])


@dataclass
class HierarchyModel:
    """Precomputed constraint maps of one hierarchy level.

    Assembles the standard-form conic problems for bound, flex, and
    membership solves; the constraint skeleton is built once and reused,
    only objectives and single rows change between the 64 flex solves.
    """

    params: HierarchyParams
    # filled by __post_init__:
    dim_xi: int = field(init=False)
    svec_xi: int = field(init=False)
    blocks: list[int] = field(init=False)
    p_offset: int = field(init=False)
    rows: sparse.csr_matrix = field(init=False)
    rhs: np.ndarray = field(init=False)

    def __post_init__(self):
        pr = self.params
        c = pr.charlie_copies
        nq = 3 + c
        self.dim_xi = 2**nq
        S = conic.svec_dim(self.dim_xi)
        self.svec_xi = S
        lam_d = pr.lam * pr.dim_w
        ab, charlie = fixed_measurements()

        # --- variable blocks: xi, one aux block per xi PPT cut, 16 steered
        # blocks, their PPTs, the marginal slack, then the 64 probabilities
        cut_masks = self._cut_qubit_lists()
        blocks: list[int] = [self.dim_xi]
        blocks += [self.dim_xi] * len(cut_masks)
        blocks += [4] * 16
        if pr.ppt_blocks:
            blocks += [4] * 16
        blocks += [8]
        blocks += [1] * 64
        self.blocks = blocks

        offsets = np.cumsum([0] + [conic.svec_dim(d) for d in blocks])
        o_cut = offsets[1]
        o_sig = offsets[1 + len(cut_masks)]
        o_sigpt = o_sig + 16 * 10
        o_marg = offsets[1 + len(cut_masks) + 16 * (2 if pr.ppt_blocks else 1)]
        self.p_offset = int(o_marg + 36)
        total = offsets[-1]

        rows: list[sparse.csr_matrix] = []
        rhs: list[np.ndarray] = []

        def add(block_rows: sparse.spmatrix, b: np.ndarray):
            rows.append(sparse.csr_matrix(block_rows))
            rhs.append(np.asarray(b, dtype=float))

        def against(col0: int, mat: np.ndarray | sparse.spmatrix, out0: int, n_out: int):
            """rows: mat @ x[col0:] - x[out0: out0+n_out] = 0"""
            mat = sparse.csr_matrix(mat)
            left = sparse.hstack(
                [
                    sparse.csr_matrix((n_out, col0)),
                    mat,
                    sparse.csr_matrix((n_out, total - col0 - mat.shape[1])),
                ]
            ).tolil()
            for i in range(n_out):
                left[i, out0 + i] -= 1.0
            add(left.tocsr(), np.zeros(n_out))

        # --- trace of xi is one
        tr_row = np.zeros(total)
        tr_row[:S] = conic.svec(np.eye(self.dim_xi))
        add(sparse.csr_matrix(tr_row), np.array([1.0]))

        # --- permutation symmetry across the C'' copies (pairwise rows)
        for gen in range(c - 1):
            swap = _qubit_swap_map(nq, 3 + gen, 4 + gen)
            sym_pairs = set()
            coo = swap.tocoo()
            for out_k, in_k in zip(coo.row, coo.col):
                if out_k != in_k:
                    sym_pairs.add((min(out_k, in_k), max(out_k, in_k)))
            if sym_pairs:
                data, ri, ci = [], [], []
                for r, (p, q) in enumerate(sorted(sym_pairs)):
                    ri += [r, r]
                    ci += [p, q]
                    data += [1.0, -1.0]
                mat = sparse.csr_matrix(
                    (data, (ri, ci)), shape=(len(sym_pairs), total)
                )
                add(mat, np.zeros(len(sym_pairs)))

        # --- xi PPT cuts: aux block = svec(PT(xi))
        for idx, qubits in enumerate(cut_masks):
            against(0, _ppt_map(nq, qubits), o_cut + idx * S, S)

        # --- steered blocks: adjoint rows over svec(xi)
        tri_r, tri_c = _triangle_pairs(4)
        basis4 = []
        for i, j in zip(tri_r, tri_c):
            e = np.zeros((4, 4))
            if i == j:
                e[i, j] = 1.0
            else:
                e[i, j] = e[j, i] = 1.0 / math.sqrt(2.0)
            basis4.append(e)
        eye_extra = np.eye(2 ** (c - 1))
        sig_maps = {}
        for bi, (a, b, x, y) in enumerate(itertools.product(range(2), repeat=4)):
            ops = []
            for e in basis4:
                g = (1 + lam_d) * kron_all(ab[x, a], ab[y, b], e, eye_extra).real
                tr_cprime = np.trace(e.reshape(2, 2, 2, 2), axis1=0, axis2=2)
                g -= (lam_d / 8.0) * kron_all(
                    np.eye(8), tr_cprime, eye_extra
                ).real
                ops.append(g)
            m = _adjoint_rows(ops)
            sig_maps[(a, b, x, y)] = m
            against(0, m, o_sig + bi * 10, 10)
            if pr.ppt_blocks:
                pt4 = _ppt_map(2, [0])  # transpose C' inside the 4x4 block
                against(0, pt4 @ m, o_sigpt + bi * 10, 10)

        # --- trusted-side marginal bound: slack = (2 lam/(1+lam d)) 1_8 - marg
        marg_ops = []
        tri_r8, tri_c8 = _triangle_pairs(8)
        for i, j in zip(tri_r8, tri_c8):
            e = np.zeros((8, 8))
            if i == j:
                e[i, j] = 1.0
            else:
                e[i, j] = e[j, i] = 1.0 / math.sqrt(2.0)
            marg_ops.append(np.kron(e, np.eye(2**c)))
        marg = _adjoint_rows(marg_ops)
        bound_vec = conic.svec((2 * pr.lam / (1 + lam_d)) * np.eye(8))
        left = sparse.hstack(
            [
                sparse.csr_matrix(marg),
                sparse.csr_matrix((36, total - S)),
            ]
        ).tolil()
        for i in range(36):
            left[i, o_marg + i] += 1.0
        add(left.tocsr(), bound_vec)

        # --- probabilities: p(abc|xyz) = <charlie effect, Sigma_{ab|xy}>
        p_rows = sparse.lil_matrix((64, total))
        for pi, (a, b, cc, x, y, z) in enumerate(
            itertools.product(range(2), repeat=6)
        ):
            bi = list(itertools.product(range(2), repeat=4)).index((a, b, x, y))
            effect_row = conic.svec(charlie[z, cc])
            combined = effect_row @ sig_maps[(a, b, x, y)]
            p_rows[pi, :S] = combined
            p_rows[pi, self.p_offset + pi] = -1.0
        add(p_rows.tocsr(), np.zeros(64))

        # --- optional explicit no-signaling rows on the probabilities.
        # Completeness of the fixed effects makes every marginal equality an
        # identity in xi (its pullback through the probability map vanishes),
        # so rows are added only when they are not already implied; keeping
        # exact duplicates would make the equality system rank deficient.
        if pr.explicit_ns_constraints:
            A_ns, b_ns = ns_equalities(Scenario(3, 2, 2, has_trusted_party=False))
            keep = np.abs(b_ns) < 0.5  # normalization is forced by Tr xi = 1
            A_ns = A_ns[keep]
            p_map = np.array(
                [p_rows[pi, :S].toarray().ravel() for pi in range(64)]
            )
            pulled = A_ns @ p_map
            fresh = A_ns[np.abs(pulled).max(axis=1) > 1e-10]
            if fresh.size:
                ns_rows = sparse.hstack(
                    [
                        sparse.csr_matrix((fresh.shape[0], self.p_offset)),
                        sparse.csr_matrix(fresh),
                        sparse.csr_matrix(
                            (fresh.shape[0], total - self.p_offset - 64)
                        ),
                    ]
                )
                add(ns_rows, np.zeros(fresh.shape[0]))

        self.rows = sparse.vstack(rows, format="csr")
        self.rhs = np.concatenate(rhs)

    def _cut_qubit_lists(self) -> list[list[int]]:
        c = self.params.charlie_copies
        out = []
        seen = set()
        for name in self.params.ppt_xi_cuts:
            if name == "copies":
                qubits = list(range(3, 3 + c))
            elif name == "last_copy":
                qubits = [3 + c - 1]
            else:  # half_copies
                qubits = list(range(3 + c - c // 2, 3 + c)) or [3 + c - 1]
            key = tuple(qubits)
            if key not in seen and qubits:
                seen.add(key)
                out.append(qubits)
        return out

    # -- problem variants ---------------------------------------------------

    def _base_problem(self, objective: np.ndarray, sense: str) -> conic.ConicProblem:
        return conic.ConicProblem(
            blocks=list(self.blocks),
            objective=objective,
            A=self.rows,
            b=self.rhs,
            sense=sense,
        )

    def bound_problem(self, f: BellFunctional) -> conic.ConicProblem:
        if f.scenario != TRIPARTITE:
            raise ValueError(f"hierarchy requires scenario {TRIPARTITE}")
        total = self.rows.shape[1]
        obj = np.zeros(total)
        obj[self.p_offset : self.p_offset + 64] = f.coefficients.ravel()
        return self._base_problem(obj, "max")

    def with_bell_floor(
        self, problem: conic.ConicProblem, f: BellFunctional, floor: float
    ) -> conic.ConicProblem:
        """Append sum(c.p) - slack = floor - offset with a fresh slack var."""
        total = self.rows.shape[1]
        row = np.zeros(total + 1)
        row[self.p_offset : self.p_offset + 64] = f.coefficients.ravel()
        row[-1] = -1.0
        A = sparse.vstack(
            [
                sparse.hstack([problem.A, sparse.csr_matrix((self.rhs.size, 1))]),
                sparse.csr_matrix(row),
            ],
            format="csr",
        )
        b = np.concatenate([problem.b, [floor - f.offset]])
        obj = np.concatenate([problem.objective, [0.0]])
        return conic.ConicProblem(
            blocks=list(problem.blocks) + [1], objective=obj, A=A, b=b, sense="max"
        )

    def tuple_objective(self, flat_index: int) -> np.ndarray:
        obj = np.zeros(self.rows.shape[1])
        obj[self.p_offset + flat_index] = 1.0
        return obj

    def membership_problem(self, box: Box) -> conic.ConicProblem:
        """min t subject to |p - box| <= t entrywise over the feasible set."""
        total = self.rows.shape[1]
        target = box.table.ravel()
        # extra variables: t, s_plus (64), s_minus (64)
        extra = 1 + 128
        A = sparse.hstack(
            [self.rows, sparse.csr_matrix((self.rhs.size, extra))]
        ).tolil()
        b = list(self.rhs)
        new_rows = sparse.lil_matrix((128, total + extra))
        for e in range(64):
            # p_e + t - s_plus_e = box_e ; -p_e + t - s_minus_e = -box_e
            new_rows[2 * e, self.p_offset + e] = 1.0
            new_rows[2 * e, total] = 1.0
            new_rows[2 * e, total + 1 + e] = -1.0
            new_rows[2 * e + 1, self.p_offset + e] = -1.0
            new_rows[2 * e + 1, total] = 1.0
            new_rows[2 * e + 1, total + 1 + 64 + e] = -1.0
            b += [target[e], -target[e]]
        A = sparse.vstack([A.tocsr(), new_rows.tocsr()], format="csr")
        obj = np.zeros(total + extra)
        obj[total] = 1.0
        return conic.ConicProblem(
            blocks=list(self.blocks) + [1] * extra,
            objective=obj,
            A=A,
            b=np.array(b),
            sense="min",
        )

    def extract_box(self, solution: conic.ConicSolution) -> Box:
        flat = np.concatenate(
            [np.atleast_2d(b).ravel() for b in solution.primal_blocks]
        )
        # probability block entries are scalars at known offsets
        start = sum(conic.svec_dim(d) for d in self.blocks[: self._p_block_index()])
        p = flat[start : start + 64]
        table = p.reshape(TRIPARTITE.table_shape).clip(0.0, 1.0)
        table /= table.sum(axis=(0, 1, 2), keepdims=True)
        return Box(TRIPARTITE, table, tol=1e-5)

    def _p_block_index(self) -> int:
        # index of the first probability block in self.blocks
        return len(self.blocks) - 64


_MODEL_CACHE: dict[HierarchyParams, HierarchyModel] = {}


def get_model(params: HierarchyParams) -> HierarchyModel:
    if params not in _MODEL_CACHE:
        _MODEL_CACHE[params] = HierarchyModel(params)
    return _MODEL_CACHE[params]


@dataclass(frozen=True)
class BoundResult:
    value: float
    solution: conic.ConicSolution
    params: HierarchyParams


def hnsq_upper_bound(
    f: BellFunctional, params: HierarchyParams = HierarchyParams()
) -> BoundResult:
    """Certified upper bound on the hybrid maximum of a tripartite functional."""
    model = get_model(params)
    problem = model.bound_problem(f)
    sol = conic.solve(
        problem,
        gap_tol=params.gap_tol,
        feas_tol=params.feas_tol,
        max_iter=params.max_iter,
    ).require_optimal()
    return BoundResult(sol.primal_value + f.offset, sol, params)


def flex_hnsq(
    f: BellFunctional,
    value_floor: float,
    params: HierarchyParams = HierarchyParams(),
) -> float:
    """Averaged per-probability maximum over the relaxation at a value floor.

    Solves one SDP per (outcome, setting) tuple with the bell-value floor
    backed off by gap_tol (degenerate floors at the exact bound would
    otherwise make the numerical feasible set empty).  A result of 1 (the
    relaxation being outer) certifies self-testing for boxes over the hybrid
    set.
    """
    model = get_model(params)
    base = model.bound_problem(f)
    top = conic.solve(
        base, gap_tol=params.gap_tol, feas_tol=params.feas_tol,
        max_iter=params.max_iter,
    ).require_optimal()
    if value_floor > top.primal_value + f.offset + 1e-6:
        raise ValueError(
            f"floor {value_floor} above hierarchy bound "
            f"{top.primal_value + f.offset}"
        )
    floored = model.with_bell_floor(base, f, value_floor - params.gap_tol)
    total = 0.0
    for e in range(64):
        obj = np.concatenate([model.tuple_objective(e), [0.0]])
        problem = conic.ConicProblem(
            blocks=floored.blocks,
            objective=obj,
            A=floored.A,
            b=floored.b,
            sense="max",
        )
        sol = conic.solve(
            problem,
            gap_tol=params.gap_tol,
            feas_tol=params.feas_tol,
            max_iter=params.max_iter,
        ).require_optimal()
        total += sol.primal_value
    return total / 8.0


@dataclass(frozen=True)
class MembershipResult:
    outside: bool
    distance: float
    solution: conic.ConicSolution


def hnsq_membership(
    box: Box,
    params: HierarchyParams = HierarchyParams(),
    certify_tol: float = 1e-4,
) -> MembershipResult:
    """Entrywise distance from a box to the relaxation feasible set.

    ``outside=True`` (distance above ``certify_tol``) soundly certifies the
    box lies outside the hybrid set; ``outside=False`` is inconclusive since
    the feasible set is an outer approximation.
    """
    if box.scenario != TRIPARTITE:
        raise ValueError(f"membership requires scenario {TRIPARTITE}")
    model = get_model(params)
    problem = model.membership_problem(box)
    sol = conic.solve(
        problem,
        gap_tol=params.gap_tol,
        feas_tol=params.feas_tol,
        max_iter=params.max_iter,
    ).require_optimal()
    distance = sol.primal_value
    return MembershipResult(distance > certify_tol, distance, sol)
