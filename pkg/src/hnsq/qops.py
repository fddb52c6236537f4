"""Dense linear-algebra helpers for small multipartite operators.

Operators on tensor products are plain complex ndarrays of shape (D, D) with
D the product of local dimensions; factor order matches the order of the
``dims`` sequences passed in (first factor slowest, matching C-order reshape).
"""

from __future__ import annotations

import numpy as np


def dag(a: np.ndarray) -> np.ndarray:
    return a.conj().T


def kron_all(*ops: np.ndarray) -> np.ndarray:
    out = np.array([[1.0 + 0j]])
    for op in ops:
        out = np.kron(out, op)
    return out


def ket(index: int, dim: int) -> np.ndarray:
    v = np.zeros(dim, dtype=complex)
    v[index] = 1.0
    return v


def projector(vec: np.ndarray) -> np.ndarray:
    vec = np.asarray(vec, dtype=complex).ravel()
    return np.outer(vec, vec.conj())


def is_hermitian(a: np.ndarray, tol: float = 1e-12) -> bool:
    return bool(np.abs(a - dag(a)).max() <= tol)


def is_psd(a: np.ndarray, tol: float = 1e-9) -> bool:
    if not is_hermitian(a, max(tol, 1e-10)):
        return False
    return bool(np.linalg.eigvalsh(a).min() >= -tol)


def partial_trace(op: np.ndarray, dims, keep) -> np.ndarray:
    """Trace out all factors except those listed in ``keep`` (order kept)."""
    dims = list(dims)
    n = len(dims)
    keep = list(keep)
    traced = [i for i in range(n) if i not in keep]
    tensor = op.reshape(dims + dims)
    # contract row/col indices of traced factors pairwise
    for count, i in enumerate(sorted(traced)):
        axis = i - count  # axes shift as we contract
        ndim_half = len(tensor.shape) // 2
        tensor = np.trace(tensor, axis1=axis, axis2=axis + ndim_half)
    d_keep = int(np.prod([dims[i] for i in keep])) if keep else 1
    out = tensor.reshape(d_keep, d_keep)
    if keep != sorted(keep):
        order = np.argsort(np.argsort(keep))
        out = permute_factors(out, [dims[i] for i in sorted(keep)], order)
    return out


def permute_factors(op: np.ndarray, dims, order) -> np.ndarray:
    """Reorder tensor factors of an operator: factor i moves to slot order[i]."""
    dims = list(dims)
    n = len(dims)
    inv = np.argsort(order)
    tensor = op.reshape(dims + dims)
    perm = list(inv) + [n + i for i in inv]
    new_dims = [dims[i] for i in inv]
    d = int(np.prod(dims))
    return tensor.transpose(perm).reshape(d, d)


def partial_transpose(op: np.ndarray, dims, which) -> np.ndarray:
    """Transpose the listed factors in place."""
    dims = list(dims)
    n = len(dims)
    tensor = op.reshape(dims + dims)
    perm = list(range(2 * n))
    for i in which:
        perm[i], perm[n + i] = perm[n + i], perm[i]
    d = int(np.prod(dims))
    return tensor.transpose(perm).reshape(d, d)


def swap_operator(dim: int) -> np.ndarray:
    """SWAP on two dim-dimensional factors: SWAP |i>|j> = |j>|i>."""
    op = np.zeros((dim * dim, dim * dim))
    for i in range(dim):
        for j in range(dim):
            op[j * dim + i, i * dim + j] = 1.0
    return op


def haar_random_unitary(dim: int, rng: np.random.Generator) -> np.ndarray:
    z = (rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim)))
    z /= np.sqrt(2.0)
    q, r = np.linalg.qr(z)
    phase = np.diag(r) / np.abs(np.diag(r))
    return q * phase


def haar_random_state(dim: int, rng: np.random.Generator) -> np.ndarray:
    v = rng.standard_normal(dim) + 1j * rng.standard_normal(dim)
    return v / np.linalg.norm(v)


def random_qubit_projective(rng: np.random.Generator) -> np.ndarray:
    """A random rank-one qubit projector (Haar direction)."""
    return projector(haar_random_unitary(2, rng)[:, 0])
