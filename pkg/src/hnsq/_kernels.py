"""Hot see-saw sweep kernels: numba-jitted with a pure-numpy fallback.

Backend selection: environment variable ``HNSQ_KERNEL_BACKEND`` set to
``numba`` or ``numpy``; unset picks numba when importable.  Both paths share
one contract, ``run_sweeps(corr, obs, psi, max_sweeps, tol)``:

* ``corr``: correlator coefficient tensor, shape (m+1,)*n (slot 0 = identity,
  its [0]*n entry is ignored as a constant),
* ``obs``: per party/setting +-1 observables, complex (n, m, d, d),
* ``psi``: state vector, complex (d**n,).

It alternates top-eigenvector state updates with sign-function observable
updates until the objective improves by less than ``tol``, and returns
``(value, obs, psi, sweeps_used, monotone)``.  Objectives are nondecreasing
at every step up to roundoff; ``monotone`` reports whether that held within
1e-12.
"""

from __future__ import annotations

import os

import numpy as np

_BACKEND = os.environ.get("HNSQ_KERNEL_BACKEND", "").lower()
if _BACKEND not in ("numba", "numpy", ""):
    raise ValueError(f"HNSQ_KERNEL_BACKEND must be numba or numpy, not {_BACKEND!r}")
if _BACKEND != "numpy":
    try:
        import numba

        HAVE_NUMBA = True
    except ImportError:
        if _BACKEND == "numba":
            raise
        HAVE_NUMBA = False
else:
    HAVE_NUMBA = False

USE_NUMBA = HAVE_NUMBA and _BACKEND != "numpy"


def _apply_ops_numpy(psi_t, ops, skip):
    """Apply each party's operator (identity when None) except ``skip``."""
    n = psi_t.ndim
    out = psi_t
    for party in range(n):
        if party == skip or ops[party] is None:
            continue
        out = np.moveaxis(np.tensordot(ops[party], out, axes=([1], [party])), 0, party)
    return out


def _sign_observable(f: np.ndarray) -> np.ndarray:
    """argmax_{O=O^dag, O^2=1} Tr[O F]: sign of F with 0 -> +1."""
    herm = 0.5 * (f + f.conj().T)
    vals, vecs = np.linalg.eigh(herm)
    signs = np.where(vals >= 0.0, 1.0, -1.0)
    return (vecs * signs) @ vecs.conj().T


def _bell_operator_numpy(corr, obs):
    n = corr.ndim
    d = obs.shape[2]
    dim = d**n
    bell = np.zeros((dim, dim), dtype=np.complex128)
    it = np.ndindex(*corr.shape)
    for t in it:
        c = corr[t]
        if c == 0.0 or all(i == 0 for i in t):
            continue
        op = np.eye(1, dtype=np.complex128)
        for party, ti in enumerate(t):
            factor = np.eye(d, dtype=np.complex128) if ti == 0 else obs[party, ti - 1]
            op = np.kron(op, factor)
        bell += c * op
    return bell


def _objective_numpy(corr, obs, psi):
    bell = _bell_operator_numpy(corr, obs)
    return float(np.real(np.vdot(psi, bell @ psi)))


def _effective_operator_numpy(corr, obs, psi, party, setting):
    """F with the current objective's party/setting term equal to Tr[O F]."""
    n = corr.ndim
    d = obs.shape[2]
    psi_t = psi.reshape((d,) * n)
    f = np.zeros((d, d), dtype=np.complex128)
    for t in np.ndindex(*corr.shape):
        if t[party] != setting + 1 or corr[t] == 0.0:
            continue
        ops = [None if ti == 0 else obs[p, ti - 1] for p, ti in enumerate(t)]
        phi = _apply_ops_numpy(psi_t, ops, skip=party)
        contract = list(range(n))
        contract.remove(party)
        k = np.tensordot(psi_t.conj(), phi, axes=(contract, contract))
        f += corr[t] * k.T
    return f


def run_sweeps_numpy(corr, obs, psi, max_sweeps=500, tol=1e-10):
    obs = obs.copy()
    psi = psi.copy()
    n = corr.ndim
    m = corr.shape[0] - 1
    value = _objective_numpy(corr, obs, psi)
    monotone = True
    sweeps = 0
    for sweeps in range(1, max_sweeps + 1):
        previous = value
        bell = _bell_operator_numpy(corr, obs)
        vals, vecs = np.linalg.eigh(bell)
        top = int(np.argmax(vals))
        psi = np.ascontiguousarray(vecs[:, top])
        value = float(vals[top])
        if value < previous - 1e-12:
            monotone = False
        for party in range(n):
            for setting in range(m):
                before = value
                f = _effective_operator_numpy(corr, obs, psi, party, setting)
                obs[party, setting] = _sign_observable(f)
                value = _objective_numpy(corr, obs, psi)
                if value < before - 1e-12:
                    monotone = False
        if value - previous < tol:
            break
    return value, obs, psi, sweeps, monotone


if USE_NUMBA:

    @numba.njit(cache=True)
    def _kron_chain(factors, d, n):  # pragma: no cover - numba path
        dim = d**n
        out = np.zeros((dim, dim), dtype=np.complex128)
        for row in range(dim):
            for col in range(dim):
                val = 1.0 + 0j
                r, c = row, col
                for party in range(n - 1, -1, -1):
                    val *= factors[party, r % d, c % d]
                    r //= d
                    c //= d
                out[row, col] = val
        return out

    @numba.njit(cache=True)
    def _bell_operator_nb(corr_flat, shape, obs, d, n):  # pragma: no cover
        dim = d**n
        bell = np.zeros((dim, dim), dtype=np.complex128)
        eye = np.eye(d, dtype=np.complex128)
        total = corr_flat.size
        factors = np.empty((n, d, d), dtype=np.complex128)
        for flat in range(total):
            c = corr_flat[flat]
            if c == 0.0:
                continue
            rem = flat
            nontrivial = False
            for party in range(n - 1, -1, -1):
                ti = rem % shape
                rem //= shape
                if ti == 0:
                    factors[party] = eye
                else:
                    factors[party] = obs[party, ti - 1]
                    nontrivial = True
            if not nontrivial:
                continue
            bell += c * _kron_chain(factors, d, n)
        return bell

    @numba.njit(cache=True)
    def _sign_observable_nb(f):  # pragma: no cover
        herm = 0.5 * (f + f.conj().T)
        vals, vecs = np.linalg.eigh(herm)
        d = f.shape[0]
        out = np.zeros((d, d), dtype=np.complex128)
        for i in range(d):
            s = 1.0 if vals[i] >= 0.0 else -1.0
            for r in range(d):
                for c in range(d):
                    out[r, c] += s * vecs[r, i] * np.conj(vecs[c, i])
        return out

    @numba.njit(cache=True)
    def _objective_nb(corr_flat, shape, obs, psi, d, n):  # pragma: no cover
        bell = _bell_operator_nb(corr_flat, shape, obs, d, n)
        return float(np.real(np.vdot(psi, bell @ psi)))

    @numba.njit(cache=True)
    def _effective_operator_nb(
        corr_flat, shape, obs, psi, party, setting, d, n
    ):  # pragma: no cover
        dim = d**n
        f = np.zeros((d, d), dtype=np.complex128)
        eye = np.eye(d, dtype=np.complex128)
        factors = np.empty((n, d, d), dtype=np.complex128)
        stride = np.empty(n, dtype=np.int64)
        s = 1
        for party_i in range(n - 1, -1, -1):
            stride[party_i] = s
            s *= d
        for flat in range(corr_flat.size):
            c = corr_flat[flat]
            if c == 0.0:
                continue
            rem = flat
            ok = True
            for p in range(n - 1, -1, -1):
                ti = rem % shape
                rem //= shape
                if p == party:
                    if ti != setting + 1:
                        ok = False
                        break
                    factors[p] = eye  # placeholder, excluded from contraction
                elif ti == 0:
                    factors[p] = eye
                else:
                    factors[p] = obs[p, ti - 1]
            if not ok:
                continue
            # phi = (x_{p != party} factors[p]) psi, identity on `party`
            phi = psi.copy()
            for p in range(n):
                if p == party:
                    continue
                nxt = np.zeros(dim, dtype=np.complex128)
                st = stride[p]
                block = st * d
                for base in range(0, dim, block):
                    for off in range(st):
                        for r in range(d):
                            acc = 0.0 + 0j
                            for cc in range(d):
                                acc += factors[p, r, cc] * phi[base + cc * st + off]
                            nxt[base + r * st + off] = acc
                phi = nxt
            # K[a_row, a_col] = sum over others conj(psi[.. a_row ..]) phi[.. a_col ..]
            st = stride[party]
            block = st * d
            for a_row in range(d):
                for a_col in range(d):
                    acc = 0.0 + 0j
                    for base in range(0, dim, block):
                        for off in range(st):
                            acc += (
                                np.conj(psi[base + a_row * st + off])
                                * phi[base + a_col * st + off]
                            )
                    # val = sum O[a_row, a_col] * K[a_row, a_col] = Tr[O K^T]
                    f[a_col, a_row] += c * acc
        return f

    @numba.njit(cache=True)
    def _run_sweeps_nb(corr_flat, shape, obs, psi, d, n, max_sweeps, tol):
        # pragma: no cover - exercised via equivalence tests
        obs = obs.copy()
        psi = psi.copy()
        m = shape - 1
        value = _objective_nb(corr_flat, shape, obs, psi, d, n)
        monotone = True
        sweeps = 0
        for sweep in range(1, max_sweeps + 1):
            sweeps = sweep
            previous = value
            bell = _bell_operator_nb(corr_flat, shape, obs, d, n)
            vals, vecs = np.linalg.eigh(bell)
            top = 0
            best = vals[0]
            for i in range(1, vals.size):
                if vals[i] > best:
                    best = vals[i]
                    top = i
            psi = np.ascontiguousarray(vecs[:, top])
            value = float(best)
            if value < previous - 1e-12:
                monotone = False
            for party in range(n):
                for setting in range(m):
                    before = value
                    f = _effective_operator_nb(
                        corr_flat, shape, obs, psi, party, setting, d, n
                    )
                    obs[party, setting] = _sign_observable_nb(f)
                    value = _objective_nb(corr_flat, shape, obs, psi, d, n)
                    if value < before - 1e-12:
                        monotone = False
            if value - previous < tol:
                break
        return value, obs, psi, sweeps, monotone

    def run_sweeps_numba(corr, obs, psi, max_sweeps=500, tol=1e-10):
        n = corr.ndim
        d = obs.shape[2]
        corr_flat = np.ascontiguousarray(corr, dtype=np.float64).ravel()
        obs = np.ascontiguousarray(obs, dtype=np.complex128)
        psi = np.ascontiguousarray(psi, dtype=np.complex128)
        value, obs, psi, sweeps, monotone = _run_sweeps_nb(
            corr_flat, corr.shape[0], obs, psi, d, n, max_sweeps, tol
        )
        return value, obs, psi, sweeps, monotone


def run_sweeps(corr, obs, psi, max_sweeps=500, tol=1e-10):
    """Dispatch one full see-saw optimization to the active backend."""
    if USE_NUMBA:
        return run_sweeps_numba(corr, obs, psi, max_sweeps=max_sweeps, tol=tol)
    return run_sweeps_numpy(corr, obs, psi, max_sweeps=max_sweeps, tol=tol)


def backend_name() -> str:
    return "numba" if USE_NUMBA else "numpy"
