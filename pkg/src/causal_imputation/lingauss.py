"""Imputation on a linear-Gaussian trellis ``X_{t+1} = A X_t + eps_t``.

Nodes are ordered time-major: state ``k`` at time ``t`` has index
``t * n + k``, for ``t = 0 .. T``, so there are ``N = n (T + 1)`` nodes. The
initial states carry their own noise ``X_0 = eps_0``. For an imputation mask
``S`` the process is ``Y = A~ Y + diag(S) x + I_S eps`` with
``A~ = I_S B`` (``B`` holds ``A`` on the block subdiagonal), hence

    mean = P diag(S) x,    cov = sigma^2 P I_S P^T,    P = (I - A~)^{-1}.
"""

from __future__ import annotations

import time
from collections.abc import Sequence
from dataclasses import dataclass

import numpy as np
from scipy.linalg import LinAlgError, cho_factor, cho_solve, solve_triangular

from .core import OciProblem, SolveReport, quadratic_cost
from .errors import DimensionError, SingularError, TooLargeError, ValidationError
from .graph import Dag, mask_to_nodes
from .sem import AdditiveNoise, NoiseSpec, Real, Sem, squared_deviation

ENUM_LIMIT = 20
TABLE_LIMIT = 12


@dataclass(frozen=True, eq=False)
class TrellisProblem:
    A: np.ndarray
    sigma2: float
    T: int
    q: np.ndarray
    delta: np.ndarray
    ybar: np.ndarray

    def __post_init__(self):
        A = np.atleast_2d(np.asarray(self.A, dtype=float))
        if A.ndim != 2 or A.shape[0] != A.shape[1] or A.shape[0] == 0:
            raise DimensionError(f"A must be a non-empty square matrix, got shape {A.shape}")
        if int(self.T) < 1:
            raise ValidationError("horizon T must be >= 1", "T")
        if not float(self.sigma2) > 0:
            raise ValidationError("sigma2 must be positive", "sigma2")
        N = A.shape[0] * (int(self.T) + 1)
        arrs = {}
        for name in ("q", "delta", "ybar"):
            v = np.asarray(getattr(self, name), dtype=float).ravel()
            if v.shape != (N,):
                raise DimensionError(f"{name} must have length n(T+1) = {N}, got {v.size}")
            if not np.all(np.isfinite(v)):
                raise ValidationError("entries must be finite", name)
            v.setflags(write=False)
            arrs[name] = v
        if np.any(arrs["q"] < 0):
            raise ValidationError("q_i >= 0 violated", "q")
        if np.any(arrs["delta"] < 0):
            raise ValidationError("delta_i >= 0 violated", "delta")
        if not np.all(np.isfinite(A)):
            raise ValidationError("entries must be finite", "A")
        A.setflags(write=False)
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "sigma2", float(self.sigma2))
        object.__setattr__(self, "T", int(self.T))
        for k, v in arrs.items():
            object.__setattr__(self, k, v)

    @property
    def n(self) -> int:
        return self.A.shape[0]

    @property
    def N(self) -> int:
        return self.n * (self.T + 1)

    def index(self, k: int, t: int) -> int:
        return t * self.n + k

    def shift(self) -> np.ndarray:
        """Block subdiagonal matrix ``B`` with ``A`` in block row ``t``, column ``t - 1``."""
        n, N = self.n, self.N
        B = np.zeros((N, N))
        for t in range(1, self.T + 1):
            B[t * n : (t + 1) * n, (t - 1) * n : t * n] = self.A
        return B


@dataclass(frozen=True, eq=False)
class TrellisMatrices:
    S: np.ndarray
    I_S: np.ndarray
    A_tilde: np.ndarray
    P: np.ndarray
    D: np.ndarray


def as_selection(problem: TrellisProblem, S) -> np.ndarray:
    """Boolean selection vector from a bitmask, a boolean vector, or node indices."""
    N = problem.N
    if isinstance(S, (int, np.integer)):
        if S < 0 or S >> N:
            raise DimensionError(f"bitmask {S} outside {N} nodes")
        return np.array([(int(S) >> i) & 1 for i in range(N)], dtype=bool)
    arr = np.asarray(S)
    if arr.dtype == bool:
        if arr.shape != (N,):
            raise DimensionError(f"selection must have length {N}, got {arr.shape}")
        return arr.astype(bool)
    sel = np.zeros(N, dtype=bool)
    for i in arr.ravel():
        if not 0 <= int(i) < N:
            raise DimensionError(f"node {i} outside {N} nodes")
        sel[int(i)] = True
    return sel


def build_matrices(problem: TrellisProblem, S) -> TrellisMatrices:
    s = as_selection(problem, S)
    N = problem.N
    I_S = np.diag((~s).astype(float))
    A_tilde = I_S @ problem.shift()
    # I - A~ is unit lower triangular: forward substitution, no general inverse
    P = solve_triangular(np.eye(N) - A_tilde, np.eye(N), lower=True, unit_diagonal=True)
    D = P.T @ P
    for a in (I_S, A_tilde, P, D):
        a.setflags(write=False)
    return TrellisMatrices(s, I_S, A_tilde, P, D)


def _xbar(problem: TrellisProblem, s: np.ndarray, xbar) -> np.ndarray:
    x = np.zeros(problem.N) if xbar is None else np.asarray(xbar, dtype=float).ravel()
    if x.shape != (problem.N,):
        raise DimensionError(f"xbar must have length {problem.N}, got {x.size}")
    if np.any(x[~s] != 0):
        raise ValidationError("xbar must be zero outside the imputation set", "xbar")
    return x


def moments(problem: TrellisProblem, S, xbar=None, mats: TrellisMatrices | None = None) -> tuple[np.ndarray, np.ndarray]:
    mats = mats or build_matrices(problem, S)
    x = _xbar(problem, mats.S, xbar)
    mean = mats.P @ (mats.S * x)
    cov = problem.sigma2 * (mats.P * (~mats.S)) @ mats.P.T
    return mean, cov


def analytic_objective(problem: TrellisProblem, S, xbar=None, mats: TrellisMatrices | None = None) -> float:
    """``sum_{i in S} (delta_i + q_i x_i^2) + E ||Y - ybar||^2`` from exact moments."""
    mats = mats or build_matrices(problem, S)
    x = _xbar(problem, mats.S, xbar)
    mean, cov = moments(problem, S, x, mats)
    s = mats.S
    c = float(problem.delta[s].sum() + (problem.q[s] * x[s] ** 2).sum())
    r = mean - problem.ybar
    return c + float(r @ r) + float(np.trace(cov))


def quadratic_form_objective(problem: TrellisProblem, S, xbar=None, mats: TrellisMatrices | None = None) -> float:
    """``x^T (Q + D) x + sigma^2 tr(D I_S) + delta^T S - 2 ybar^T x``.

    Agrees with :func:`analytic_objective` minus ``ybar^T ybar`` when
    ``ybar = 0``; for a partial ``S`` and nonzero ``ybar`` the cross term
    differs (the exact one is ``-2 ybar^T P x``).
    """
    mats = mats or build_matrices(problem, S)
    x = _xbar(problem, mats.S, xbar)
    quad = float(x @ (problem.q * x) + x @ mats.D @ x)
    return quad + problem.sigma2 * float(np.trace(mats.D @ mats.I_S)) + float(problem.delta @ mats.S) - 2.0 * float(problem.ybar @ x)


def inner_minimize(problem: TrellisProblem, S, mats: TrellisMatrices | None = None) -> tuple[np.ndarray, float]:
    """Optimal imputed values for a fixed set and the resulting objective.

    Solves ``(Q + D)_S x_S = (P^T ybar)_S`` by Cholesky; the system is
    positive definite because ``D`` is and ``Q >= 0``.
    """
    mats = mats or build_matrices(problem, S)
    s = mats.S
    x = np.zeros(problem.N)
    if s.any():
        idx = np.flatnonzero(s)
        H = mats.D[np.ix_(idx, idx)] + np.diag(problem.q[idx])
        rhs = (mats.P.T @ problem.ybar)[idx]
        try:
            x[idx] = cho_solve(cho_factor(H, lower=True), rhs)
        except LinAlgError as e:
            raise SingularError(f"reduced system not positive definite: {e}") from e
    return x, analytic_objective(problem, s, x, mats)


def enumerate_solve(problem: TrellisProblem) -> SolveReport:
    """Minimize over all ``2^N`` imputation sets with the closed-form inner step."""
    t0 = time.perf_counter()
    N = problem.N
    if N > ENUM_LIMIT:
        raise TooLargeError(f"enumeration is limited to N <= {ENUM_LIMIT}, got {N}")
    best = None
    table = {} if N <= TABLE_LIMIT else None
    for s in sorted(range(1 << N), key=lambda m: (bin(m).count("1"), m)):
        x, val = inner_minimize(problem, s)
        if table is not None:
            table[s] = val
        if best is None or val < best[0]:
            best = (val, s, x)
    val, s, x = best
    nodes = mask_to_nodes(s)
    return SolveReport(
        subset=tuple(nodes),
        values=tuple(float(x[i]) for i in nodes),
        objective=float(val),
        method="enumerate",
        table=table,
        wall_time=time.perf_counter() - t0,
    )


def trellis_dag(problem: TrellisProblem) -> Dag:
    n = problem.n
    edges = []
    for t in range(1, problem.T + 1):
        for k in range(n):
            for j in range(n):
                if problem.A[k, j] != 0:
                    edges.append((problem.index(j, t - 1), problem.index(k, t)))
    return Dag(problem.N, edges)


def materialize(problem: TrellisProblem) -> OciProblem:
    """The trellis as a generic SEM problem with matching costs, for simulation."""
    dag = trellis_dag(problem)
    noise = NoiseSpec.gaussian(0.0, np.sqrt(problem.sigma2))
    mechs = []
    names = []
    for i in range(problem.N):
        t, k = divmod(i, problem.n)
        names.append(f"x{k}_{t}")
        pa = dag.parents(i)
        w = tuple(float(problem.A[k, p - (t - 1) * problem.n]) for p in pa)
        mechs.append(AdditiveNoise(noise, w))
    sem = Sem(dag, mechs, [Real(1)] * problem.N, names)
    return OciProblem(sem, quadratic_cost(problem.delta, problem.q), squared_deviation(range(problem.N), problem.ybar))


def problem_from_lists(A: Sequence[Sequence[float]], sigma2: float, T: int, q, delta, ybar) -> TrellisProblem:
    return TrellisProblem(np.asarray(A, dtype=float), sigma2, T, np.asarray(q), np.asarray(delta), np.asarray(ybar))
