"""Heuristic quantum lower bounds by alternating state/measurement ascent.

Binary-outcome functionals only: each party's setting is a +-1 observable O
(Hermitian, O^2 = 1), the state is pure.  One sweep updates the state to the
top eigenvector of the current Bell operator and each observable to the sign
of its effective operator; both steps are exact partial maximizations, so the
objective never decreases.  The best value over random restarts is a valid
lower bound on the quantum maximum by construction.

The sweep loop runs on the numba kernel when available (pure-numpy fallback,
see ``hnsq._kernels``); restarts are driven from here.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from hnsq import _kernels
from hnsq.core import BellFunctional, Box, Scenario, bell_value, probability_to_correlator
from hnsq.qops import haar_random_state, haar_random_unitary


def state_update(bell_operator: np.ndarray) -> tuple[float, np.ndarray]:
    """Top eigenpair of the Bell operator; the new objective is the value.

    Degenerate top eigenvalues resolve to the lowest index among the maxima
    of the ascending eigh spectrum, so reruns are reproducible.
    """
    vals, vecs = np.linalg.eigh(bell_operator)
    top = int(np.argmax(vals))
    return float(vals[top]), np.ascontiguousarray(vecs[:, top])


def measurement_update(effective: np.ndarray) -> np.ndarray:
    """Optimal +-1 observable for Tr[O F]: the sign of F, zeros mapped to +1."""
    herm = 0.5 * (effective + effective.conj().T)
    vals, vecs = np.linalg.eigh(herm)
    signs = np.where(vals >= 0.0, 1.0, -1.0)
    return (vecs * signs) @ vecs.conj().T


@dataclass(frozen=True)
class QuantumRealization:
    """A pure state plus +-1 observables, one (m, d, d) block per party."""

    psi: np.ndarray
    observables: np.ndarray  # (n_parties, m, d, d)

    @property
    def local_dim(self) -> int:
        return self.observables.shape[2]

    def effects(self) -> np.ndarray:
        """(n, m, 2, d, d) projective effects M_{a|x} = (1 + (-1)^a O)/2."""
        n, m, d = self.observables.shape[:3]
        eye = np.eye(d)
        out = np.empty((n, m, 2, d, d), dtype=complex)
        for party, setting in np.ndindex(n, m):
            o = self.observables[party, setting]
            out[party, setting, 0] = (eye + o) / 2
            out[party, setting, 1] = (eye - o) / 2
        return out

    def box(self, scenario: Scenario) -> Box:
        """Evaluate the Born-rule probability table of the realization."""
        n, m = self.observables.shape[:2]
        if scenario.parties != n or scenario.m != m or scenario.k != 2:
            raise ValueError("scenario does not match realization")
        d = self.local_dim
        effects = self.effects()
        psi_t = self.psi.reshape((d,) * n)
        table = np.empty(scenario.table_shape)
        for outs in np.ndindex(*(2,) * n):
            for sets in np.ndindex(*(m,) * n):
                phi = psi_t
                for party in range(n):
                    phi = np.moveaxis(
                        np.tensordot(
                            effects[party, sets[party], outs[party]],
                            phi,
                            axes=([1], [party]),
                        ),
                        0,
                        party,
                    )
                table[outs + sets] = float(np.real(np.vdot(psi_t, phi)))
        return Box(scenario, table, tol=1e-7)


@dataclass(frozen=True)
class SeesawResult:
    value: float
    realization: QuantumRealization
    restart_values: tuple[float, ...]
    monotone: bool
    backend: str


def _random_observable(d: int, rng: np.random.Generator) -> np.ndarray:
    u = haar_random_unitary(d, rng)
    signs = rng.choice([-1.0, 1.0], size=d)
    if (signs == signs[0]).all():
        signs[rng.integers(d)] *= -1.0  # avoid +-identity starts
    return (u * signs) @ u.conj().T


def seesaw_bound(
    f: BellFunctional,
    local_dim: int = 2,
    restarts: int = 50,
    sweeps: int = 500,
    seed: int = 0,
    improvement_tol: float = 1e-10,
) -> SeesawResult:
    """Best-of-restarts see-saw maximization of a binary-outcome functional.

    Returns the highest value found together with its realization; the value
    is a quantum lower bound by construction.  Identical seeds give identical
    results for a fixed backend and floating environment.
    """
    s = f.scenario
    if s.k != 2:
        raise ValueError("see-saw parametrization requires binary outcomes")
    if local_dim < 2:
        raise ValueError("local dimension must be at least 2")

    corr = probability_to_correlator(f)
    constant = float(corr[(0,) * s.parties])
    corr = corr.copy()
    corr[(0,) * s.parties] = 0.0

    n, m, d = s.parties, s.m, local_dim
    rng = np.random.default_rng(seed)
    best = None
    values = []
    monotone = True
    for _ in range(restarts):
        psi0 = haar_random_state(d**n, rng)
        obs0 = np.empty((n, m, d, d), dtype=complex)
        for party, setting in np.ndindex(n, m):
            obs0[party, setting] = _random_observable(d, rng)
        value, obs, psi, _, mono = _kernels.run_sweeps(
            corr, obs0, psi0, max_sweeps=sweeps, tol=improvement_tol
        )
        monotone = monotone and mono
        values.append(value + constant)
        if best is None or value + constant > best[0]:
            best = (value + constant, QuantumRealization(psi, obs))
    return SeesawResult(
        value=best[0],
        realization=best[1],
        restart_values=tuple(values),
        monotone=monotone,
        backend=_kernels.backend_name(),
    )
