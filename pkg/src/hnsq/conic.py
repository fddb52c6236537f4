"""Standard-form conic optimization over products of PSD cones.

Every LP/SDP in the package is expressed as one ``ConicProblem``:

    optimize   objective . x
    subject to A x = b,   x in  PSD(d_1) x PSD(d_2) x ...

where x stacks the symmetric vectorizations (svec) of all blocks.  Dimension-1
blocks are nonnegative scalars, so LPs are the all-ones-block special case.

svec convention: upper triangle in column-major order with off-diagonal
entries scaled by sqrt(2), so that Euclidean dot products of svec vectors
equal trace inner products of the matrices.  This matches the PSD triangle
cone of the Clarabel backend, letting constraint rows be used verbatim.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import clarabel
import numpy as np
from scipy import sparse

DEFAULT_GAP_TOL = 1e-8
DEFAULT_FEAS_TOL = 1e-8
DEFAULT_MAX_ITER = 200
MAX_BLOCK_SIDE = 512

_SQRT2 = math.sqrt(2.0)


class ProblemFormatError(ValueError):
    """Problem data violates the standard-form invariants."""


class SolverFailure(RuntimeError):
    """A solve ended in a status the caller declared unacceptable."""


def svec_dim(d: int) -> int:
    return d * (d + 1) // 2


def _triangle_indices(d: int):
    """Row/column index arrays of the upper triangle in column-major order."""
    cols = np.concatenate([np.full(j + 1, j, dtype=int) for j in range(d)])
    rows = np.concatenate([np.arange(j + 1) for j in range(d)])
    return rows, cols


def svec(mat: np.ndarray) -> np.ndarray:
    """Symmetric vectorization (scaled upper triangle, column-major)."""
    d = mat.shape[0]
    rows, cols = _triangle_indices(d)
    sym = 0.5 * (mat + mat.T)
    out = sym[rows, cols].astype(float)
    out[rows != cols] *= _SQRT2
    return out


def smat(vec: np.ndarray, d: int) -> np.ndarray:
    """Inverse of ``svec``."""
    rows, cols = _triangle_indices(d)
    vals = np.asarray(vec, dtype=float).copy()
    vals[rows != cols] /= _SQRT2
    mat = np.zeros((d, d))
    mat[rows, cols] = vals
    mat[cols, rows] = vals
    return mat


def svec_entry_index(d: int, i: int, j: int) -> int:
    """Position of entry (i, j), i <= j, inside the svec of a d x d block."""
    if i > j:
        i, j = j, i
    return j * (j + 1) // 2 + i


@dataclass
class ConicProblem:
    """One optimization over a product of PSD blocks with equality rows."""

    blocks: list[int]
    objective: np.ndarray
    A: sparse.csr_matrix
    b: np.ndarray
    sense: str = "max"

    def __post_init__(self):
        if self.sense not in ("min", "max"):
            raise ProblemFormatError(f"sense must be min or max, got {self.sense!r}")
        if not self.blocks:
            raise ProblemFormatError("problem has no blocks")
        for d in self.blocks:
            if d < 1:
                raise ProblemFormatError(f"block dimension {d} < 1")
            if d > MAX_BLOCK_SIDE:
                raise ProblemFormatError(
                    f"block side {d} exceeds ceiling {MAX_BLOCK_SIDE}"
                )
        n = self.total_dim
        self.objective = np.asarray(self.objective, dtype=float)
        if self.objective.shape != (n,):
            raise ProblemFormatError(
                f"objective length {self.objective.shape} != stacked dim {n}"
            )
        self.A = sparse.csr_matrix(self.A)
        self.b = np.asarray(self.b, dtype=float).ravel()
        if self.A.shape != (self.b.size, n):
            raise ProblemFormatError(
                f"constraint matrix {self.A.shape} vs rhs {self.b.size}, dim {n}"
            )
        row_norms = np.abs(self.A).sum(axis=1).A1 if self.A.nnz else np.zeros(self.b.size)
        if self.b.size and (row_norms == 0).any():
            raise ProblemFormatError("constraint matrix has an all-zero row")

    @property
    def total_dim(self) -> int:
        return sum(svec_dim(d) for d in self.blocks)

    def block_slices(self) -> list[slice]:
        slices, start = [], 0
        for d in self.blocks:
            slices.append(slice(start, start + svec_dim(d)))
            start += svec_dim(d)
        return slices


@dataclass
class ConicSolution:
    status: str  # optimal | infeasible | unbounded | max_iterations
    primal_value: float
    dual_value: float
    primal_blocks: list[np.ndarray]
    duality_gap: float
    iterations: int = 0
    solve_time: float = 0.0
    raw_status: str = ""
    certificate: np.ndarray | None = field(default=None, repr=False)

    def require_optimal(self) -> "ConicSolution":
        if self.status != "optimal":
            raise SolverFailure(
                f"solver returned {self.status} (backend: {self.raw_status}), "
                f"gap={self.duality_gap:.2e}, iters={self.iterations}"
            )
        return self


_STATUS_MAP = {
    "Solved": "optimal",
    "PrimalInfeasible": "infeasible",
    "AlmostPrimalInfeasible": "infeasible",
    "DualInfeasible": "unbounded",
    "AlmostDualInfeasible": "unbounded",
    "AlmostSolved": "max_iterations",
    "MaxIterations": "max_iterations",
    "MaxTime": "max_iterations",
    "InsufficientProgress": "max_iterations",
    "NumericalError": "max_iterations",
}


def _cones_for_blocks(blocks):
    """Clarabel cone list; adjacent 1-dim blocks merge into one nonneg cone."""
    cones = []
    run = 0
    for d in blocks:
        if d == 1:
            run += 1
            continue
        if run:
            cones.append(clarabel.NonnegativeConeT(run))
            run = 0
        cones.append(clarabel.PSDTriangleConeT(d))
    if run:
        cones.append(clarabel.NonnegativeConeT(run))
    return cones


#: KKT static regularization ladder: the backend default first, then two
#: stronger settings for problems whose optimal face is degenerate enough to
#: stall the line search.
_REGULARIZATION_LADDER = (None, 1e-7, 1e-6)


def solve(
    problem: ConicProblem,
    gap_tol: float = DEFAULT_GAP_TOL,
    feas_tol: float = DEFAULT_FEAS_TOL,
    max_iter: int = DEFAULT_MAX_ITER,
    verbose: bool = False,
) -> ConicSolution:
    """Solve a conic problem with the embedded interior-point backend.

    A returned status of ``optimal`` certifies a primal/dual pair with
    relative gap below ``gap_tol`` and residuals below ``feas_tol``; failed
    or inconclusive solves keep their backend status in ``raw_status`` and
    are never reported as optimal.  Stalled solves are retried with stronger
    KKT regularization before giving up.
    """
    n = problem.total_dim
    m_eq = problem.b.size
    sign = -1.0 if problem.sense == "max" else 1.0
    q = sign * problem.objective

    A = sparse.vstack(
        [problem.A, -sparse.identity(n, format="csr")], format="csc"
    )
    b = np.concatenate([problem.b, np.zeros(n)])
    cones = [clarabel.ZeroConeT(m_eq)] if m_eq else []
    cones += _cones_for_blocks(problem.blocks)

    result = None
    raw = ""
    for reg in _REGULARIZATION_LADDER:
        settings = clarabel.DefaultSettings()
        settings.verbose = verbose
        settings.max_iter = max_iter
        settings.tol_gap_rel = gap_tol
        settings.tol_gap_abs = gap_tol
        settings.tol_feas = feas_tol
        if reg is not None:
            settings.static_regularization_constant = reg
        solver = clarabel.DefaultSolver(
            sparse.csc_matrix((n, n)), q, A, b, cones, settings
        )
        attempt = solver.solve()
        raw_attempt = str(attempt.status)
        if result is None or raw_attempt == "Solved":
            result = attempt
            raw = raw_attempt if reg is None else f"{raw_attempt}(reg={reg:g})"
        if raw_attempt in ("Solved", "PrimalInfeasible", "DualInfeasible"):
            break
    status = _STATUS_MAP.get(raw, "max_iterations")
    x = np.asarray(result.x)
    blocks = [
        smat(x[sl], d) if d > 1 else np.atleast_2d(x[sl])
        for d, sl in zip(problem.blocks, problem.block_slices())
    ]
    primal = sign * result.obj_val
    dual = sign * result.obj_val_dual
    certificate = None
    if status == "infeasible":
        certificate = np.asarray(result.z)[:m_eq]
        primal = dual = math.nan
    gap = abs(primal - dual) if math.isfinite(primal) else math.inf
    return ConicSolution(
        status=status,
        primal_value=primal,
        dual_value=dual,
        primal_blocks=blocks,
        duality_gap=gap,
        iterations=result.iterations,
        solve_time=result.solve_time,
        raw_status=raw,
        certificate=certificate,
    )


def solve_lp(
    objective,
    A,
    b,
    sense: str = "max",
    gap_tol: float = DEFAULT_GAP_TOL,
    feas_tol: float = DEFAULT_FEAS_TOL,
    max_iter: int = DEFAULT_MAX_ITER,
) -> ConicSolution:
    """Solve an LP over nonnegative scalars with the same conic engine."""
    objective = np.asarray(objective, dtype=float).ravel()
    problem = ConicProblem(
        blocks=[1] * objective.size,
        objective=objective,
        A=sparse.csr_matrix(A),
        b=np.asarray(b, dtype=float),
        sense=sense,
    )
    return solve(problem, gap_tol=gap_tol, feas_tol=feas_tol, max_iter=max_iter)


def dump(problem: ConicProblem, path) -> None:
    """Write a problem in a plain text sparse format for external checking.

    Layout: a header line, the block sides, the objective in ``index value``
    pairs, then one line per constraint row as ``rhs  idx:val idx:val ...``.
    """
    lines = [f"conic-problem v1 sense={problem.sense}"]
    lines.append("blocks " + " ".join(str(d) for d in problem.blocks))
    obj_terms = " ".join(
        f"{i}:{v:.17g}" for i, v in enumerate(problem.objective) if v != 0.0
    )
    lines.append("objective " + obj_terms)
    coo = problem.A.tocoo()
    rows: dict[int, list[str]] = {}
    for i, j, v in zip(coo.row, coo.col, coo.data):
        rows.setdefault(int(i), []).append(f"{j}:{v:.17g}")
    for i in range(problem.b.size):
        lines.append(f"row {problem.b[i]:.17g}  " + " ".join(rows.get(i, [])))
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")
