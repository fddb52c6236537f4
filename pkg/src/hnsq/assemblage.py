"""No-signaling assemblages and their pseudo-state representation.

An assemblage is the family of subnormalized conditional states of a trusted
d_B-dimensional system indexed by the untrusted parties' outcomes and
settings.  Any no-signaling assemblage can be written as

    sigma_{a|x} = Tr_untrusted[(M_{a_1|x_1} x ... x M_{a_n|x_n} x 1) W]

with fixed local effects M and a trace-one Hermitian (not necessarily
positive) operator W.  ``build_w`` constructs W from the dual basis of the
effect system, ``reconstruct_assemblage`` inverts it, and the ``norm_bound``
functions give the analytic spectral envelope of W for the binary qubit
effect family parametrized by an angle theta.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np
from scipy import optimize

from hnsq.qops import dag, is_psd, kron_all, partial_trace, projector

STRUCT_TOL = 1e-9


class DegenerateAngleError(ValueError):
    """Effect family angle makes the operator system linearly dependent."""


class SingularGramError(ValueError):
    """Operator system is not linearly independent."""


@dataclass(frozen=True)
class MeasurementFamily:
    """Per untrusted party: effects[party][x, a] is a d x d PSD matrix.

    Completeness sum_a effects[party][x, a] = 1 must hold per setting within
    1e-12.
    """

    effects: tuple[np.ndarray, ...]

    def __post_init__(self):
        blocks = tuple(np.asarray(b, dtype=complex) for b in self.effects)
        for b in blocks:
            if b.ndim != 4 or b.shape[2] != b.shape[3]:
                raise ValueError(f"effect block has shape {b.shape}")
            d = b.shape[2]
            if np.abs(b.sum(axis=1) - np.eye(d)).max() > 1e-12:
                raise ValueError("effects do not sum to identity per setting")
            for x, a in np.ndindex(b.shape[0], b.shape[1]):
                if not is_psd(b[x, a], tol=1e-10):
                    raise ValueError(f"effect ({x},{a}) is not PSD")
        object.__setattr__(self, "effects", blocks)

    @property
    def n_parties(self) -> int:
        return len(self.effects)

    @property
    def m(self) -> int:
        return self.effects[0].shape[0]

    @property
    def k(self) -> int:
        return self.effects[0].shape[1]

    def dims(self) -> list[int]:
        return [b.shape[2] for b in self.effects]


@dataclass(frozen=True)
class Assemblage:
    """sigma[a_1..a_n, x_1..x_n] is a d_B x d_B conditional operator."""

    n_untrusted: int
    m: int
    k: int
    sigma: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.sigma, dtype=complex)
        n = self.n_untrusted
        expected = (self.k,) * n + (self.m,) * n
        if arr.shape[: 2 * n] != expected or arr.shape[2 * n] != arr.shape[2 * n + 1]:
            raise ValueError(f"sigma shape {arr.shape} does not match scenario")
        object.__setattr__(self, "sigma", arr)

    @property
    def d_B(self) -> int:
        return self.sigma.shape[-1]

    def marginal(self, keep: tuple[int, ...], outcomes, settings) -> np.ndarray:
        """sigma_{a_I|x_I}: sum out the parties not in ``keep`` (setting 0)."""
        n = self.n_untrusted
        idx_out: list = [slice(None)] * n
        idx_set: list = [0] * n
        for party, a, x in zip(keep, outcomes, settings):
            idx_out[party] = a
            idx_set[party] = x
        block = self.sigma[tuple(idx_out) + tuple(idx_set)]
        summed = [i for i, sl in enumerate(idx_out) if isinstance(sl, slice)]
        if summed:
            block = block.sum(axis=tuple(range(len(summed))))
        return block

    def reduced_state(self) -> np.ndarray:
        """sigma_B: the trusted marginal (settings all 0)."""
        return self.marginal((), (), ())


def validate(a: Assemblage, tol: float = STRUCT_TOL) -> list[str]:
    """Return the violated constraints (empty list when the assemblage is
    a valid no-signaling assemblage within ``tol``)."""
    out = []
    n, m, k = a.n_untrusted, a.m, a.k
    for idx in itertools.product(*[range(k)] * n, *[range(m)] * n):
        block = a.sigma[idx]
        herm = np.abs(block - dag(block)).max()
        if herm > tol:
            out.append(f"hermiticity at {idx}: residual {herm:.3e}")
            continue
        lo = np.linalg.eigvalsh(block).min()
        if lo < -tol:
            out.append(f"positivity at {idx}: min eigenvalue {lo:.3e}")
    # consistency of the trusted marginal across setting tuples
    sigma_b = None
    for xs in itertools.product(range(m), repeat=n):
        total = a.sigma[(slice(None),) * n + xs].sum(axis=tuple(range(n)))
        if sigma_b is None:
            sigma_b = total
        else:
            res = np.abs(total - sigma_b).max()
            if res > tol:
                out.append(f"trusted marginal varies at x={xs}: residual {res:.3e}")
    tr = abs(np.trace(sigma_b).real - 1.0)
    if tr > 1e-7:
        out.append(f"trusted state trace off by {tr:.3e}")
    # per-party no-signaling: summing out party i removes its setting
    for party in range(n):
        summed = a.sigma.sum(axis=party)
        ax = (n - 1) + party
        ref = summed.take(0, axis=ax)
        for x in range(1, m):
            res = np.abs(summed.take(x, axis=ax) - ref).max()
            if res > tol:
                out.append(
                    f"no-signaling of party {party} between settings 0,{x}: "
                    f"residual {res:.3e}"
                )
    return out


def from_quantum(state: np.ndarray, fam: MeasurementFamily, d_B: int) -> Assemblage:
    """Assemblage steered by measuring the untrusted parts of a joint state.

    ``state`` is a density operator (or pure-state vector) on the product of
    the untrusted dimensions and the trusted dimension, trusted factor last.
    """
    state = np.asarray(state, dtype=complex)
    if state.ndim == 1:
        state = projector(state)
    dims = fam.dims() + [d_B]
    D = int(np.prod(dims))
    if state.shape != (D, D):
        raise ValueError(f"state shape {state.shape} does not match dims {dims}")
    n, m, k = fam.n_parties, fam.m, fam.k
    sigma = np.zeros((k,) * n + (m,) * n + (d_B, d_B), dtype=complex)
    for outs in itertools.product(range(k), repeat=n):
        for sets in itertools.product(range(m), repeat=n):
            effect = kron_all(
                *[fam.effects[i][sets[i], outs[i]] for i in range(n)],
                np.eye(d_B),
            )
            sigma[outs + sets] = partial_trace(
                effect @ state, dims, keep=[len(dims) - 1]
            )
    return Assemblage(n, m, k, sigma)


def canonical_party_effects(m: int, k: int, theta: float = math.pi / 4) -> np.ndarray:
    """One party's effect block (m, k, d, d) with an independent operator
    system {1} u {effects with a <= k-2}.

    For m = k = 2 this is the qubit pair {|0><0|, |theta><theta|} with
    |theta> = (cos theta, sin theta); theta in {0, pi/2, pi} is rejected as
    linearly dependent.  For general (m, k) the effects are scaled rank-one
    projectors onto deterministically perturbed direction vectors in dimension
    d = max(m, k), with the largest scale keeping the last effect PSD.
    """
    if k == 2 and m == 2:
        if min(abs(theta - t) for t in (0.0, math.pi / 2, math.pi)) < 1e-12:
            raise DegenerateAngleError(f"theta={theta} gives a dependent system")
        vec = np.array([math.cos(theta), math.sin(theta)])
        block = np.zeros((2, 2, 2, 2), dtype=complex)
        block[0, 0] = projector([1.0, 0.0])
        block[0, 1] = np.eye(2) - block[0, 0]
        block[1, 0] = projector(vec)
        block[1, 1] = np.eye(2) - block[1, 0]
        return block
    d = max(m, k)
    # deterministic pseudo-random directions; perturbations guarantee the
    # Gram matrix of {1, effects} stays comfortably nonsingular
    rng = np.random.default_rng(1234567)
    block = np.zeros((m, k, d, d), dtype=complex)
    for x in range(m):
        raw = np.zeros((k - 1, d, d), dtype=complex)
        for a in range(k - 1):
            v = np.zeros(d, dtype=complex)
            v[a % d] = 1.0
            v[(a + x + 1) % d] += 0.6 + 0.1 * x
            v += 0.05 * (rng.standard_normal(d) + 1j * rng.standard_normal(d))
            raw[a] = projector(v / np.linalg.norm(v))
        total = raw.sum(axis=0)
        scale = 1.0 / np.linalg.eigvalsh(total).max()
        for a in range(k - 1):
            block[x, a] = scale * raw[a]
        block[x, k - 1] = np.eye(d) - scale * total
    # verify independence of {1} u {effects a <= k-2}
    system = [np.eye(d)] + [block[x, a] for x in range(m) for a in range(k - 1)]
    gram = np.array([[np.trace(dag(p) @ q).real for q in system] for p in system])
    if np.linalg.cond(gram) > 1e6:
        raise SingularGramError("could not build an independent effect system")
    return block


def canonical_measurements(
    n_parties: int, m: int, k: int, theta: float = math.pi / 4
) -> MeasurementFamily:
    """The same canonical effect block on every untrusted party."""
    block = canonical_party_effects(m, k, theta)
    return MeasurementFamily(tuple(block for _ in range(n_parties)))


@dataclass(frozen=True)
class DualBasis:
    """Hilbert-Schmidt duals of the system {1, M_{a|x}: a <= k-2} per party.

    ident_dual[i] is dual to the identity; effect_duals[i][x, a] is dual to
    effect (x, a); biorthogonality Tr(N_i dual_j) = delta_ij holds by
    construction.  ``condition`` carries the Gram condition number per party
    as a conditioning diagnostic.
    """

    ident_dual: tuple[np.ndarray, ...]
    effect_duals: tuple[np.ndarray, ...]
    condition: tuple[float, ...]


def dual_basis(fam: MeasurementFamily) -> DualBasis:
    """Invert the Gram matrix of each party's operator system."""
    idents, duals, conds = [], [], []
    m, k = fam.m, fam.k
    for block in fam.effects:
        d = block.shape[2]
        system = [np.eye(d, dtype=complex)]
        for x in range(m):
            for a in range(k - 1):
                system.append(block[x, a])
        gram = np.array(
            [[np.trace(dag(p) @ q).real for q in system] for p in system]
        )
        cond = float(np.linalg.cond(gram))
        if not np.isfinite(cond) or cond > 1e12:
            raise SingularGramError(f"Gram matrix condition {cond:.2e}")
        inv = np.linalg.solve(gram, np.eye(len(system)))
        stacked = np.stack(system)
        dual_ops = np.einsum("ij,jkl->ikl", inv, stacked)
        idents.append(dual_ops[0])
        duals.append(dual_ops[1:].reshape(m, k - 1, d, d))
        conds.append(cond)
    return DualBasis(tuple(idents), tuple(duals), tuple(conds))


@dataclass(frozen=True)
class PseudoState:
    """Trace-one Hermitian operator on (prod d_i) * d_B dimensions."""

    w: np.ndarray
    dims: tuple[int, ...]  # untrusted dims + (d_B,)

    def __post_init__(self):
        w = np.asarray(self.w, dtype=complex)
        herm = np.abs(w - dag(w)).max()
        if herm > 1e-12:
            raise ValueError(f"W not Hermitian: residual {herm:.3e}")
        tr = abs(np.trace(w).real - 1.0)
        if tr > 1e-12:
            raise ValueError(f"W trace off by {tr:.3e}")
        object.__setattr__(self, "w", w)

    @property
    def spectral_norm(self) -> float:
        return float(np.abs(np.linalg.eigvalsh(self.w)).max())


def build_w(a: Assemblage, fam: MeasurementFamily) -> PseudoState:
    """Represent a no-signaling assemblage by a pseudo-state.

    W sums, over every subset I of untrusted parties and every outcome/setting
    choice on I with outcomes <= k-2, the tensor product of dual effects (on
    I), dual identities (off I), and the marginal operator sigma_I.
    """
    problems = validate(a)
    if problems:
        raise ValueError("assemblage invalid: " + "; ".join(problems[:3]))
    if fam.n_parties != a.n_untrusted or fam.m != a.m or fam.k != a.k:
        raise ValueError("measurement family does not match the assemblage")
    duals = dual_basis(fam)
    n, m, k = a.n_untrusted, a.m, a.k
    dims = tuple(fam.dims()) + (a.d_B,)
    D = int(np.prod(dims))
    w = np.zeros((D, D), dtype=complex)
    for r in range(n + 1):
        for keep in itertools.combinations(range(n), r):
            for outs in itertools.product(range(k - 1), repeat=r):
                for sets in itertools.product(range(m), repeat=r):
                    sigma_i = a.marginal(keep, outs, sets)
                    ops = []
                    for party in range(n):
                        if party in keep:
                            j = keep.index(party)
                            ops.append(duals.effect_duals[party][sets[j], outs[j]])
                        else:
                            ops.append(duals.ident_dual[party])
                    w += kron_all(*ops, sigma_i)
    return PseudoState(w, dims)


def reconstruct_assemblage(ps: PseudoState, fam: MeasurementFamily) -> Assemblage:
    """Apply the defining partial-trace formula for every outcome/setting.

    The result satisfies the linear no-signaling constraints automatically;
    positivity is for the caller to check (a generic Hermitian W produces
    negative blocks).
    """
    n, m, k = fam.n_parties, fam.m, fam.k
    dims = list(ps.dims)
    d_B = dims[-1]
    sigma = np.zeros((k,) * n + (m,) * n + (d_B, d_B), dtype=complex)
    for outs in itertools.product(range(k), repeat=n):
        for sets in itertools.product(range(m), repeat=n):
            effect = kron_all(
                *[fam.effects[i][sets[i], outs[i]] for i in range(n)], np.eye(d_B)
            )
            sigma[outs + sets] = partial_trace(effect @ ps.w, dims, keep=[n])
    return Assemblage(n, m, k, sigma)


def norm_bound_f(theta: float) -> float:
    """Spectral envelope factor f(theta) = 1/2 + 1/(2 cos) + 1/(sin cos)."""
    if not 0.0 < theta < math.pi / 2:
        raise ValueError(f"theta={theta} outside (0, pi/2)")
    return 0.5 + 0.5 / math.cos(theta) + 1.0 / (math.sin(theta) * math.cos(theta))


def norm_bound(theta: float, n_untrusted: int) -> float:
    """Bound f(theta)**n on the spectral norm of W for n untrusted parties."""
    return norm_bound_f(theta) ** n_untrusted


def solve_theta_min() -> float:
    """Angle minimizing the norm bound: root of sin^3 + 4 sin^2 - 2 in
    (0, pi/2), located by bracketing bisection and polished by Newton."""

    def poly(theta):
        s = math.sin(theta)
        return s**3 + 4 * s**2 - 2

    theta = optimize.brentq(poly, 0.1, math.pi / 2 - 0.1, xtol=1e-14)
    for _ in range(4):  # Newton polish on the polynomial root
        s, c = math.sin(theta), math.cos(theta)
        deriv = (3 * s**2 + 8 * s) * c
        theta -= poly(theta) / deriv
    return theta
