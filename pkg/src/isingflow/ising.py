"""Ising instances, spin energies and the exhaustive oracle.

The Ising energy of a spin configuration ``v`` in ``{-1, +1}^n`` is
``E(v) = -1/2 v^T S v`` for a symmetric, zero-diagonal coupling matrix ``S``.
No external field term is supported.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "IsingProblem",
    "OracleResult",
    "OracleCapError",
    "DEFAULT_ORACLE_CAP",
    "energy",
    "energies",
    "brute_force",
    "sign_vector",
    "as_spins",
]

DEFAULT_ORACLE_CAP = 24
_BLOCK_BITS = 12


class OracleCapError(ValueError):
    """Raised when exhaustive enumeration is requested beyond the size cap."""


@dataclass(frozen=True, eq=False)
class IsingProblem:
    """A symmetric, zero-diagonal coupling matrix.

    The matrix is copied and made read-only on construction, so instances can
    be shared freely between threads and processes.
    """

    coupling: np.ndarray
    name: str = field(default="", compare=False)

    def __post_init__(self):
        S = np.array(self.coupling, dtype=float, copy=True)
        if S.ndim != 2 or S.shape[0] != S.shape[1]:
            raise ValueError(f"coupling must be a square matrix, got shape {S.shape}")
        if S.shape[0] < 1:
            raise ValueError("coupling must have at least one spin")
        if not np.all(np.isfinite(S)):
            raise ValueError("coupling entries must be finite")
        if not np.array_equal(S, S.T):
            i, j = np.argwhere(S != S.T)[0]
            raise ValueError(f"coupling is not symmetric: S[{i},{j}]={S[i, j]} != S[{j},{i}]={S[j, i]}")
        if np.any(np.diag(S) != 0):
            i = int(np.flatnonzero(np.diag(S))[0])
            raise ValueError(f"coupling must have zero diagonal: S[{i},{i}]={S[i, i]}")
        S.setflags(write=False)
        object.__setattr__(self, "coupling", S)

    @property
    def n(self) -> int:
        return self.coupling.shape[0]

    @property
    def S(self) -> np.ndarray:
        return self.coupling

    @classmethod
    def from_edges(cls, n: int, edges, name: str = "") -> "IsingProblem":
        """Build a dense problem from ``(i, j, s)`` triples, each undirected edge once."""
        S = np.zeros((n, n))
        seen = set()
        for i, j, s in edges:
            i, j = int(i), int(j)
            if not (0 <= i < n and 0 <= j < n):
                raise ValueError(f"edge ({i}, {j}) out of range for n={n}")
            if i == j:
                raise ValueError(f"self-loop edge ({i}, {j}) not allowed")
            key = (min(i, j), max(i, j))
            if key in seen:
                raise ValueError(f"duplicate edge {key}")
            seen.add(key)
            S[i, j] = S[j, i] = float(s)
        return cls(S, name=name)

    def edges(self) -> list[tuple[int, int, float]]:
        iu, ju = np.nonzero(np.triu(self.coupling, k=1))
        return [(int(i), int(j), float(self.coupling[i, j])) for i, j in zip(iu, ju)]

    def spectral_radius(self) -> float:
        if self.n == 1:
            return 0.0
        return float(np.max(np.abs(np.linalg.eigvalsh(self.coupling))))

    def same_as(self, other: "IsingProblem") -> bool:
        return np.array_equal(self.coupling, other.coupling)

    def __repr__(self):
        label = f" {self.name!r}" if self.name else ""
        return f"IsingProblem{label}(n={self.n})"


def as_spins(v, n: int | None = None) -> np.ndarray:
    """Validate ``v`` as a spin configuration and return it as an int8 array."""
    arr = np.asarray(v)
    if arr.ndim != 1:
        raise ValueError(f"spin configuration must be a vector, got shape {arr.shape}")
    if n is not None and arr.shape[0] != n:
        raise ValueError(f"spin configuration has length {arr.shape[0]}, expected {n}")
    if not np.all((arr == 1) | (arr == -1)):
        raise ValueError("spin components must be exactly -1 or +1")
    return arr.astype(np.int8)


def energy(problem: IsingProblem, v) -> float:
    """Ising energy ``-1/2 v^T S v``.

    The pair terms are summed with :func:`math.fsum`, which is correctly
    rounded, so the result does not depend on summation order or on BLAS and
    ``energy(v) == energy(-v)`` holds bit for bit.
    """
    s = as_spins(v, problem.n).astype(float)
    S = problem.coupling
    iu, ju = np.triu_indices(problem.n, k=1)
    terms = S[iu, ju] * s[iu] * s[ju]
    return -math.fsum(terms.tolist()) + 0.0


def energies(problem: IsingProblem, V) -> np.ndarray:
    """Vectorized energies for a stack of configurations (rows of ``V``).

    Uses floating-point matrix products; use :func:`energy` where exact,
    order-independent values matter.
    """
    V = np.asarray(V, dtype=float)
    return -0.5 * np.einsum("ki,ij,kj->k", V, problem.coupling, V)


def sign_vector(x) -> np.ndarray:
    """Componentwise signum with values in ``{-1, 0, 1}``; exact zeros map to 0."""
    x = np.asarray(x, dtype=float)
    if not np.all(np.isfinite(x)):
        raise ValueError("sign_vector requires finite input")
    return np.sign(x).astype(np.int8)


@dataclass(frozen=True)
class OracleResult:
    min_energy: float
    minimizers: np.ndarray  # (k, n) int8, rows sorted lexicographically
    evaluated_count: int

    def contains(self, v) -> bool:
        v = np.asarray(v, dtype=np.int8)
        return bool(np.any(np.all(self.minimizers == v, axis=1)))

    def to_dict(self) -> dict:
        return {
            "min_energy": self.min_energy,
            "minimizers": self.minimizers.astype(int).tolist(),
            "evaluated_count": self.evaluated_count,
        }


def _block_configs(bits: int) -> np.ndarray:
    """All ``2**bits`` spin rows in reflected Gray-code order."""
    V = np.ones((1, bits), dtype=float)
    for k in range(bits):
        flipped = V[::-1].copy()
        flipped[:, k] = -flipped[:, k]
        V = np.vstack([V, flipped])
    return V


def _block_energies(S_low: np.ndarray, V_low: np.ndarray) -> np.ndarray:
    """Energies of the low block built by Gray-code doubling.

    Each doubling mirrors the current list and flips one more spin, so the new
    half differs from a known configuration by a single flip and its energy is
    an O(1) update ``dE = 2 v_k h_k`` per row.
    """
    bits = S_low.shape[0]
    E = np.array([-0.5 * float(np.ones(bits) @ S_low @ np.ones(bits))])
    h = np.ones((1, bits)) @ S_low  # local fields, row per configuration
    V = np.ones((1, bits))
    for k in range(bits):
        Vr, hr, Er = V[::-1], h[::-1], E[::-1]
        vk = Vr[:, k]
        E_new = Er + 2.0 * vk * hr[:, k]
        h_new = hr - 2.0 * vk[:, None] * S_low[k][None, :]
        V_new = Vr.copy()
        V_new[:, k] = -vk
        V = np.vstack([V, V_new])
        h = np.vstack([h, h_new])
        E = np.concatenate([E, E_new])
    assert np.array_equal(V, V_low)
    return E


def brute_force(problem: IsingProblem, cap: int = DEFAULT_ORACLE_CAP) -> OracleResult:
    """Exact minimum and all minimizers by exhaustive Gray-code enumeration.

    The lowest ``min(n, 12)`` spins form a block whose ``2**L`` energies are
    built by Gray-code doubling; the remaining spins are walked in Gray-code
    order one flip at a time, each flip updating the whole block's energies
    with ``dE = 2 v_k h_k``. Candidate minimizers are re-scored with
    :func:`energy` so the returned minimum is exact.
    """
    n = problem.n
    if n > cap:
        raise OracleCapError(f"brute_force is capped at n <= {cap} spins (got n={n})")
    S = problem.coupling
    L = min(n, _BLOCK_BITS)
    low, high = np.arange(L), np.arange(L, n)
    V_low = _block_configs(L)
    E_block = _block_energies(S[np.ix_(low, low)], V_low)

    m = n - L
    v_high = np.ones(m)
    S_hh = S[np.ix_(high, high)]
    F_low = V_low @ S[np.ix_(low, high)]  # field on each high spin from the low block
    hh = S_hh @ v_high  # field on each high spin from the other high spins
    # energy with all high spins +1 = E_low + E_high + cross term
    E_block = E_block - F_low.sum(axis=1) - 0.5 * float(v_high @ S_hh @ v_high)

    scale = 1.0 + float(np.abs(S).sum())
    tol = 1e-9 * scale
    best = math.inf
    candidates: list[np.ndarray] = []

    def consider(E_vals: np.ndarray):
        nonlocal best, candidates
        lo = float(E_vals.min())
        if lo < best - tol:
            best = lo
            candidates = []
        if lo <= best + tol:
            best = min(best, lo)
            idx = np.flatnonzero(E_vals <= best + tol)
            rows = np.empty((idx.size, n))
            rows[:, :L] = V_low[idx]
            rows[:, L:] = v_high
            candidates.append(rows)

    consider(E_block)
    for step in range(1, 2**m):
        k = (step & -step).bit_length() - 1  # bit flipped by the Gray code
        vk = v_high[k]
        E_block = E_block + 2.0 * vk * (F_low[:, k] + hh[k])
        hh = hh - 2.0 * vk * S_hh[:, k]
        v_high[k] = -vk
        consider(E_block)

    rows = np.vstack(candidates).astype(np.int8)
    exact = np.array([energy(problem, r) for r in rows])
    e_min = float(exact.min())
    keep = rows[exact == e_min]
    keep = np.unique(keep, axis=0)  # lexicographic, deterministic
    return OracleResult(min_energy=e_min, minimizers=keep, evaluated_count=2**n)
