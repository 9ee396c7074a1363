"""Quartic potential, its derivatives and Morse analysis of its critical points.

    U(x) = sum_i x_i**4 / 4 + (beta - alpha**2) / 2 * |x|**2 - 1/2 x^T S x

For large ``alpha`` the critical points of ``U`` sit O(1/alpha) away from the
``3**n`` points ``alpha * {-1, 0, 1}**n`` and keep the Morse index of their
seed (the number of zero entries). The minima then carry every spin
configuration as their sign vector, and the deepest ones carry the Ising
ground states. :func:`calibrate_alpha` finds an ``alpha`` where all of this
is verified numerically.
"""
from __future__ import annotations

import enum
import itertools
import logging
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components

from .ising import DEFAULT_ORACLE_CAP, IsingProblem, brute_force, energy, sign_vector

__all__ = [
    "PotentialParams",
    "CriticalKind",
    "CriticalPoint",
    "LandscapeSummary",
    "Calibration",
    "NotCriticalError",
    "CalibrationError",
    "eval_U",
    "grad_U",
    "hess_U",
    "classify",
    "find_critical_points",
    "damped_newton",
    "batched_newton",
    "global_minima",
    "minima_ordering_violations",
    "calibrate",
    "calibrate_alpha",
    "heuristic_alpha",
    "newton_tol",
    "dedup_tol",
    "null_tol",
    "value_tie_tol",
]

log = logging.getLogger(__name__)

DEFAULT_SEED_CAP = 16
_SCREEN_ITER = 12


def newton_tol(alpha: float) -> float:
    return 1e-10 * (1.0 + alpha**3)


def dedup_tol(alpha: float) -> float:
    return 1e-6 * (1.0 + alpha)


def null_tol(alpha: float) -> float:
    return 1e-8 * (1.0 + alpha**2)


def value_tie_tol(alpha: float) -> float:
    return 1e-9 * (1.0 + alpha**4)


@dataclass(frozen=True)
class PotentialParams:
    alpha: float
    beta: float
    problem: IsingProblem

    def __post_init__(self):
        for name in ("alpha", "beta"):
            val = float(getattr(self, name))
            if not math.isfinite(val) or val <= 0:
                raise ValueError(f"{name} must be a positive finite number, got {val}")
            object.__setattr__(self, name, val)

    @property
    def n(self) -> int:
        return self.problem.n

    @property
    def shift(self) -> float:
        """Coefficient ``beta - alpha**2`` of the quadratic term."""
        return self.beta - self.alpha**2

    def with_alpha(self, alpha: float) -> "PotentialParams":
        return PotentialParams(alpha, self.beta, self.problem)


def _check_dim(params: PotentialParams, x) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.shape[-1:] != (params.n,):
        raise ValueError(f"expected points of dimension {params.n}, got shape {x.shape}")
    return x


def eval_U(params: PotentialParams, x) -> np.ndarray | float:
    """Potential value; ``x`` may be a single point or a stack of shape (..., n)."""
    x = _check_dim(params, x)
    sq = x * x
    val = 0.25 * np.sum(sq * sq, axis=-1) + 0.5 * params.shift * np.sum(sq, axis=-1)
    val = val - 0.5 * np.sum((x @ params.problem.coupling) * x, axis=-1)
    return float(val) if np.ndim(val) == 0 else val


def grad_U(params: PotentialParams, x) -> np.ndarray:
    """``x_i**3 + (beta - alpha**2) x_i - (S x)_i``, batched over leading axes."""
    x = _check_dim(params, x)
    return x * x * x + params.shift * x - x @ params.problem.coupling


def hess_U(params: PotentialParams, x) -> np.ndarray:
    """``diag(3 x_i**2 + beta - alpha**2) - S``, batched over leading axes."""
    x = _check_dim(params, x)
    H = np.broadcast_to(-params.problem.coupling, x.shape + (params.n,)).copy()
    diag = 3.0 * x * x + params.shift
    idx = np.arange(params.n)
    H[..., idx, idx] += diag
    return H


class CriticalKind(str, enum.Enum):
    MINIMUM = "min"
    SADDLE = "saddle"
    MAXIMUM = "max"
    DEGENERATE = "degenerate"


class NotCriticalError(ValueError):
    def __init__(self, grad_norm: float, tol: float):
        super().__init__(f"point is not critical: |grad U| = {grad_norm:.3e} > {tol:.3e}")
        self.grad_norm = grad_norm
        self.tol = tol


@dataclass(frozen=True, eq=False)
class CriticalPoint:
    x: np.ndarray
    value: float
    grad_norm: float
    morse_index: int
    nullity: int
    kind: CriticalKind
    seed: np.ndarray | None = None  # member of {-1, 0, 1}^n whose alpha-scaling seeded Newton

    @property
    def sign(self) -> np.ndarray:
        return sign_vector(self.x)

    def to_dict(self) -> dict:
        return {
            "x": self.x.tolist(),
            "value": self.value,
            "grad_norm": self.grad_norm,
            "morse_index": self.morse_index,
            "nullity": self.nullity,
            "class": self.kind.value,
            "seed": None if self.seed is None else self.seed.astype(int).tolist(),
        }


def _kind_from_index(index: int, nullity: int, n: int) -> CriticalKind:
    if nullity > 0:
        return CriticalKind.DEGENERATE
    if index == 0:
        return CriticalKind.MINIMUM
    if index == n:
        return CriticalKind.MAXIMUM
    return CriticalKind.SADDLE


def _morse_counts(params: PotentialParams, X: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    eig = np.linalg.eigvalsh(hess_U(params, X))
    tol = null_tol(params.alpha)
    return np.sum(eig < -tol, axis=-1), np.sum(np.abs(eig) <= tol, axis=-1)


def classify(params: PotentialParams, x, tol: float | None = None, seed=None) -> CriticalPoint:
    """Morse index, nullity and class of a critical point.

    Raises :class:`NotCriticalError` when ``|grad U(x)|`` exceeds the Newton
    tolerance.
    """
    x = _check_dim(params, x).copy()
    tol = newton_tol(params.alpha) if tol is None else tol
    gn = float(np.linalg.norm(grad_U(params, x)))
    if gn > tol:
        raise NotCriticalError(gn, tol)
    index, nullity = (int(v) for v in _morse_counts(params, x))
    return CriticalPoint(
        x=x,
        value=eval_U(params, x),
        grad_norm=gn,
        morse_index=index,
        nullity=nullity,
        kind=_kind_from_index(index, nullity, params.n),
        seed=None if seed is None else np.asarray(seed, dtype=np.int8),
    )


def _newton_directions(H: np.ndarray, G: np.ndarray) -> np.ndarray:
    try:
        return np.linalg.solve(H, G[..., None])[..., 0]
    except np.linalg.LinAlgError:
        out = np.empty_like(G)
        for k in range(len(G)):
            try:
                out[k] = np.linalg.solve(H[k], G[k])
            except np.linalg.LinAlgError:
                out[k] = np.linalg.lstsq(H[k], G[k], rcond=None)[0]
        return out


def batched_newton(grad, hess, X0, tol: float, max_iter: int = 200):
    """Batched Newton on ``grad(X) = 0`` with backtracking on ``|grad|**2``.

    ``grad`` maps an (m, d) stack to (m, d) and ``hess`` to (m, d, d).
    Returns ``(X, grad_norm, converged)`` for every row of ``X0``.
    """
    X = np.array(X0, dtype=float, copy=True)
    G = grad(X)
    gn = np.linalg.norm(G, axis=1)
    active = gn > tol
    for _ in range(max_iter):
        idx = np.flatnonzero(active)
        if idx.size == 0:
            break
        Xa, Ga = X[idx], G[idx]
        D = _newton_directions(hess(Xa), Ga)
        f0 = np.sum(Ga * Ga, axis=1)
        step = np.ones(idx.size)
        X_new, G_new = Xa.copy(), Ga.copy()
        pending = np.ones(idx.size, dtype=bool)
        for _ in range(40):
            p = np.flatnonzero(pending)
            if p.size == 0:
                break
            trial = Xa[p] - step[p, None] * D[p]
            with np.errstate(over="ignore", invalid="ignore"):
                Gt = grad(trial)
                f1 = np.sum(Gt * Gt, axis=1)
            ok = np.isfinite(f1) & (f1 <= (1.0 - 2e-4 * step[p]) * f0[p])
            X_new[p[ok]], G_new[p[ok]] = trial[ok], Gt[ok]
            pending[p[ok]] = False
            step[p[~ok]] *= 0.5
        # rows whose line search failed keep their point; they stop below
        stalled = pending
        X[idx], G[idx] = X_new, G_new
        gn[idx] = np.linalg.norm(G_new, axis=1)
        active[idx] = (gn[idx] > tol) & ~stalled
    return X, gn, gn <= tol


def damped_newton(params: PotentialParams, X0, tol: float | None = None, max_iter: int = 200):
    """:func:`batched_newton` on ``grad U``; the default tolerance is :func:`newton_tol`."""
    tol = newton_tol(params.alpha) if tol is None else tol
    return batched_newton(lambda X: grad_U(params, X), lambda X: hess_U(params, X), X0, tol, max_iter)


@dataclass
class LandscapeSummary:
    alpha: float
    beta: float
    n: int
    critical_points: list[CriticalPoint]
    U_s: float | None
    U_M: float | None
    count_by_class: dict[str, int]
    n_seeds: int
    failed_seeds: list[np.ndarray] = field(default_factory=list)
    collided_seeds: list[tuple[np.ndarray, np.ndarray]] = field(default_factory=list)

    def of_kind(self, kind: CriticalKind) -> list[CriticalPoint]:
        return [p for p in self.critical_points if p.kind is kind]

    @property
    def minima(self) -> list[CriticalPoint]:
        return self.of_kind(CriticalKind.MINIMUM)

    @property
    def saddles(self) -> list[CriticalPoint]:
        return self.of_kind(CriticalKind.SADDLE)

    def points_array(self) -> np.ndarray:
        return np.array([p.x for p in self.critical_points]).reshape(-1, self.n)

    def to_dict(self) -> dict:
        return {
            "alpha": self.alpha,
            "beta": self.beta,
            "n": self.n,
            "count": len(self.critical_points),
            "count_by_class": dict(self.count_by_class),
            "U_s": self.U_s,
            "U_M": self.U_M,
            "n_seeds": self.n_seeds,
            "failed_seeds": [s.astype(int).tolist() for s in self.failed_seeds],
            "collided_seeds": [[a.astype(int).tolist(), b.astype(int).tolist()] for a, b in self.collided_seeds],
            "critical_points": [p.to_dict() for p in self.critical_points],
        }


def _seed_grid(n: int, zero_counts=None) -> np.ndarray:
    """Seeds in ``{-1, 0, 1}^n`` in lexicographic order, optionally by number of zeros."""
    if zero_counts is None:
        digits = (np.arange(3**n)[:, None] // 3 ** np.arange(n - 1, -1, -1)) % 3
        return (digits - 1).astype(np.int8)
    blocks = []
    for k in sorted({int(k) for k in zero_counts if 0 <= k <= n}):
        m = n - k
        signs = (((np.arange(2**m)[:, None] >> np.arange(m - 1, -1, -1)) & 1) * 2 - 1).astype(np.int8)
        for zpos in itertools.combinations(range(n), k):
            B = np.zeros((len(signs), n), dtype=np.int8)
            B[:, [i for i in range(n) if i not in zpos]] = signs
            blocks.append(B)
    if not blocks:
        return np.empty((0, n), dtype=np.int8)
    seeds = np.vstack(blocks)
    return seeds[np.lexsort(seeds.T[::-1])]


def _close_pairs(X: np.ndarray, radius: float) -> np.ndarray:
    """Index pairs ``(i, j)`` with ``|X_i - X_j| <= radius``.

    Sweep along a fixed generic projection: a close pair is within ``radius``
    in projection too, and well-separated points leave the windows nearly empty.
    """
    m, n = X.shape
    direction = np.sqrt(np.arange(2, n + 2, dtype=float))
    direction /= np.linalg.norm(direction)
    order = np.argsort(X @ direction, kind="stable")
    proj = (X @ direction)[order]
    found = []
    for k in range(1, m):
        cand = np.flatnonzero(proj[k:] - proj[:-k] <= radius)
        if cand.size == 0:
            break
        d = np.linalg.norm(X[order[cand + k]] - X[order[cand]], axis=1)
        hit = cand[d <= radius]
        found.append(np.column_stack([order[hit], order[hit + k]]))
    return np.vstack(found) if found else np.empty((0, 2), dtype=int)


def _cluster_reps(X: np.ndarray, radius: float) -> np.ndarray:
    """Representative (lowest index) of each point's cluster within ``radius``."""
    m = len(X)
    if m < 2:
        return np.arange(m)
    pairs = _close_pairs(X, radius)
    graph = coo_matrix((np.ones(len(pairs)), (pairs[:, 0], pairs[:, 1])), shape=(m, m))
    _, labels = connected_components(graph, directed=False)
    _, first = np.unique(labels, return_index=True)
    return first[labels]


def find_critical_points(
    params: PotentialParams,
    max_n: int = DEFAULT_SEED_CAP,
    zero_counts=None,
    chunk: int = 8192,
    max_iter: int = 200,
) -> LandscapeSummary:
    """Enumerate critical points by damped Newton from every seed ``alpha * {-1,0,1}^n``.

    ``zero_counts`` restricts the seeds to those with the given numbers of
    zero entries (for instance ``{1}`` targets index-1 saddles). Seeds that do
    not converge, or converge onto a point already found from an earlier seed,
    are reported in ``failed_seeds`` / ``collided_seeds``; both are expected
    below the bifurcation thresholds, where fewer than ``3**n`` points exist.
    """
    n = params.n
    if n > max_n:
        raise ValueError(f"critical-point enumeration is capped at n <= {max_n} (3**n seeds), got n={n}")
    seeds = _seed_grid(n, zero_counts)
    X, ok = _newton_from_seeds(params, seeds, max_iter, chunk)
    return _summarize(params, seeds, X, ok)


def _newton_from_seeds(params, seeds, max_iter=200, chunk=8192):
    Xs, conv = [], []
    for start in range(0, len(seeds), chunk):
        X, _, ok = damped_newton(params, params.alpha * seeds[start : start + chunk].astype(float), max_iter=max_iter)
        Xs.append(X)
        conv.append(ok)
    X = np.vstack(Xs) if Xs else np.empty((0, params.n))
    ok = np.concatenate(conv) if conv else np.empty(0, bool)
    return X, ok


def _summarize(params, seeds, X, ok) -> LandscapeSummary:
    n, alpha = params.n, params.alpha
    failed = [seeds[i] for i in np.flatnonzero(~ok)]
    good = np.flatnonzero(ok)
    reps = _cluster_reps(X[good], dedup_tol(alpha))
    unique_local = np.flatnonzero(reps == np.arange(len(good)))
    collided = [(seeds[good[i]], seeds[good[reps[i]]]) for i in range(len(good)) if reps[i] != i]

    U_idx = good[unique_local]
    Xu = X[U_idx]
    points: list[CriticalPoint] = []
    if len(Xu):
        index, nullity = _morse_counts(params, Xu)
        values = eval_U(params, Xu)
        gnorm = np.linalg.norm(grad_U(params, Xu), axis=1)
        for k, i in enumerate(U_idx):
            points.append(
                CriticalPoint(
                    x=Xu[k].copy(),
                    value=float(values[k]),
                    grad_norm=float(gnorm[k]),
                    morse_index=int(index[k]),
                    nullity=int(nullity[k]),
                    kind=_kind_from_index(int(index[k]), int(nullity[k]), n),
                    seed=seeds[i].copy(),
                )
            )
    counts = {k.value: 0 for k in CriticalKind}
    for p in points:
        counts[p.kind.value] += 1
    saddle_vals = [p.value for p in points if p.kind is CriticalKind.SADDLE]
    min_vals = [p.value for p in points if p.kind is CriticalKind.MINIMUM]
    return LandscapeSummary(
        alpha=alpha,
        beta=params.beta,
        n=n,
        critical_points=points,
        U_s=min(saddle_vals) if saddle_vals else None,
        U_M=max(min_vals) if min_vals else None,
        count_by_class=counts,
        n_seeds=len(seeds),
        failed_seeds=failed,
        collided_seeds=collided,
    )


def global_minima(summary: LandscapeSummary) -> list[CriticalPoint]:
    """All minima whose value ties the least minimum value (within ``value_tie_tol``)."""
    minima = summary.minima
    if not minima:
        return []
    least = min(p.value for p in minima)
    tol = value_tie_tol(summary.alpha)
    return [p for p in minima if p.value <= least + tol]


def minima_ordering_violations(problem: IsingProblem, summary: LandscapeSummary) -> int:
    """Count minima whose Ising energy undercuts a minimum strictly below them in U.

    Sorting minima by potential value must give non-decreasing Ising energies
    of their sign vectors; U-values within the tie tolerance are treated as
    ties. Minima with a zero sign component count as violations.
    """
    minima = summary.minima
    if not minima:
        return 0
    signs = [p.sign for p in minima]
    if any(np.any(s == 0) for s in signs):
        return sum(int(np.any(s == 0)) for s in signs)
    U = np.array([p.value for p in minima])
    E = np.array([energy(problem, s) for s in signs])
    order = np.argsort(U, kind="stable")
    U, E = U[order], E[order]
    prefix_max = np.maximum.accumulate(E)
    cut = np.searchsorted(U, U - value_tie_tol(summary.alpha), side="left")
    bad = 0
    for j in range(len(U)):
        if cut[j] > 0 and prefix_max[cut[j] - 1] > E[j]:
            bad += 1
    return bad


class CalibrationError(RuntimeError):
    pass


@dataclass
class Calibration:
    alpha: float
    verified: bool
    attempts: list[tuple[float, str]]  # (alpha tried, reason it failed or "ok")
    summary: LandscapeSummary | None = None


def heuristic_alpha(problem: IsingProblem, beta: float) -> float:
    """Starting guess ``sqrt(beta + 2 (1 + rho(S)))``; equals ``sqrt(beta + 4)`` for the 2-spin instance."""
    return math.sqrt(beta + 2.0 * (1.0 + problem.spectral_radius()))


def _calibration_failure(problem, summary, oracle) -> str | None:
    n = problem.n
    if len(summary.critical_points) != 3**n or summary.count_by_class["degenerate"]:
        return f"{len(summary.critical_points)} critical points ({summary.count_by_class['degenerate']} degenerate)"
    minima = summary.minima
    if len(minima) != 2**n:
        return f"{len(minima)} minima"
    signs = {tuple(int(s) for s in p.sign) for p in minima}
    if len(signs) != 2**n or any(0 in s for s in signs):
        return "minima sign vectors do not cover {-1,1}^n"
    if oracle is not None:
        for p in global_minima(summary):
            if not oracle.contains(p.sign):
                return f"global minimum sign {p.sign.tolist()} is not an Ising minimizer"
        if minima_ordering_violations(problem, summary):
            return "minima ordering by U disagrees with Ising energies"
    return None


def calibrate(
    problem: IsingProblem,
    beta: float,
    alpha_max: float = 1e6,
    max_n: int = DEFAULT_SEED_CAP,
    oracle_cap: int = DEFAULT_ORACLE_CAP,
) -> Calibration:
    """Smallest ``alpha`` on the doubling ladder from :func:`heuristic_alpha` that passes verification.

    An ``alpha`` passes when there are exactly ``3**n`` non-degenerate critical
    points, the ``2**n`` minima have sign vectors covering ``{-1,1}**n``, and
    (when the oracle is affordable) every global minimum's sign vector is an
    exact Ising minimizer and the minima sorted by ``U`` have non-decreasing
    Ising energies. Above ``max_n`` the heuristic is returned unverified.
    """
    alpha = heuristic_alpha(problem, beta)
    if problem.n > max_n:
        log.warning("n=%d exceeds the enumeration cap %d; alpha=%.4g is unverified", problem.n, max_n, alpha)
        return Calibration(alpha=alpha, verified=False, attempts=[(alpha, "unverified")])
    oracle = brute_force(problem, cap=oracle_cap) if problem.n <= oracle_cap else None
    attempts = []
    seeds = _seed_grid(problem.n)
    while alpha <= alpha_max:
        params = PotentialParams(alpha, beta, problem)
        # Above the thresholds Newton from every seed converges in a handful of
        # steps; a seed still unconverged after a short budget rejects alpha
        # cheaply. Rejection only ever pushes alpha up, and the returned alpha
        # still passes the full verification below.
        X, ok = _newton_from_seeds(params, seeds, max_iter=_SCREEN_ITER)
        if not ok.all():
            attempts.append((alpha, f"{int((~ok).sum())} seeds unconverged after {_SCREEN_ITER} Newton steps"))
            alpha *= 2.0
            continue
        summary = _summarize(params, seeds, X, ok)
        reason = _calibration_failure(problem, summary, oracle)
        attempts.append((alpha, reason or "ok"))
        if reason is None:
            return Calibration(alpha=alpha, verified=True, attempts=attempts, summary=summary)
        log.debug("alpha=%.6g rejected: %s", alpha, reason)
        alpha *= 2.0
    raise CalibrationError(
        f"no alpha <= {alpha_max:g} passed verification (last: {attempts[-1][1]}); the instance may be ill-scaled"
    )


def calibrate_alpha(problem: IsingProblem, beta: float, **kwargs) -> float:
    return calibrate(problem, beta, **kwargs).alpha
