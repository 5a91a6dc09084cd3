"""Generic optimal causal imputation: objective evaluation and exhaustive search."""

from __future__ import annotations

import itertools
import math
import time
from collections.abc import Callable, Mapping, Sequence
from dataclasses import dataclass, field

import numpy as np

from .errors import TooLargeError, ValidationError
from .graph import mask_to_nodes
from .sem import (
    EMPTY_PLAN,
    ImputationPlan,
    Realization,
    Sem,
    base_chunks,
    exact_expectation,
    expectation_over,
)

BRUTE_NODE_LIMIT = 16
BRUTE_PLAN_LIMIT = 10**6

CostFn = Callable[[tuple[int, ...], tuple], float]
SystemCost = Callable[[Realization], np.ndarray]


@dataclass(frozen=True, eq=False)
class OciProblem:
    """SEM, imputation cost ``c(I, x_I)`` and vectorized system cost ``g``.

    The cost oracle must be total; subsets or values that are not allowed
    should return ``math.inf``.
    """

    sem: Sem
    cost: CostFn
    g: SystemCost

    def __post_init__(self):
        c0 = self.cost((), ())
        if not math.isfinite(c0):
            raise ValidationError("c(empty set) must be finite", "cost")

    def can_be_exact(self) -> bool:
        if not self.sem.is_finite:
            return False
        size = 1
        for d in self.sem.domains:
            size *= d.size
        return size <= 10**6


@dataclass
class SolveReport:
    subset: tuple[int, ...]
    values: tuple
    objective: float
    method: str
    seed: int | None = None
    n_samples: int | None = None
    stderr: float | None = None
    table: dict[int, float] | None = None
    wall_time: float = 0.0
    extra: dict = field(default_factory=dict)

    @property
    def plan(self) -> ImputationPlan:
        return ImputationPlan(self.subset, self.values)


def _mode(problem: OciProblem, mode: str) -> str:
    if mode not in ("auto", "exact", "mc"):
        raise ValueError(f"unknown evaluation mode {mode!r}")
    if mode == "auto":
        return "exact" if problem.can_be_exact() else "mc"
    return mode


def estimate(
    problem: OciProblem, plan: ImputationPlan, n_samples: int = 10_000, seed: int = 0, mode: str = "auto"
) -> tuple[float, float]:
    """Objective ``c(I, x_I) + E g(do(X; I, x_I))`` and its standard error (0 when exact)."""
    plan = plan.checked(problem.sem)
    c = float(problem.cost(plan.nodes, plan.values))
    if _mode(problem, mode) == "exact":
        return c + exact_expectation(problem.sem, plan, problem.g), 0.0
    if n_samples < 2:
        raise ValueError("Monte-Carlo evaluation needs n_samples >= 2")
    mean, se = expectation_over(problem.sem, base_chunks(problem.sem, seed, n_samples), plan, problem.g)
    return c + mean, se


def evaluate(
    problem: OciProblem, plan: ImputationPlan = EMPTY_PLAN, n_samples: int = 10_000, seed: int = 0, mode: str = "auto"
) -> float:
    return estimate(problem, plan, n_samples, seed, mode)[0]


def _count_plans(n: int, grids: Sequence[Sequence]) -> int:
    total = 1
    for i in range(n):
        total *= 1 + len(grids[i])
        if total > BRUTE_PLAN_LIMIT:
            raise TooLargeError(f"more than {BRUTE_PLAN_LIMIT} candidate plans; shrink the grids")
    return total


def brute_force_solve(
    problem: OciProblem,
    grids: Mapping[int, Sequence] | Sequence[Sequence],
    n_samples: int = 10_000,
    seed: int = 0,
    mode: str = "auto",
    workers: int = 1,
) -> SolveReport:
    """Exhaustive search over every subset and every grid combination of values.

    Nodes with no (or an empty) grid are never imputed. All plans share one
    set of base samples. Ties go to the smaller subset, then the smaller
    bitmask, then the lexicographically smaller tuple of grid indices. The
    report table maps each subset bitmask to its best objective.
    """
    t0 = time.perf_counter()
    sem = problem.sem
    n = sem.node_count
    if n > BRUTE_NODE_LIMIT:
        raise TooLargeError(f"brute force is limited to {BRUTE_NODE_LIMIT} nodes, got {n}")
    if isinstance(grids, Mapping):
        grid_list = [list(grids.get(i, ())) for i in range(n)]
    else:
        grid_list = [list(g) for g in grids]
        if len(grid_list) != n:
            raise ValidationError(f"need one grid per node ({n}), got {len(grid_list)}", "grid")
    grid_list = [[sem.domains[i].check_value(x) for x in g] for i, g in enumerate(grid_list)]
    _count_plans(n, grid_list)

    mode = _mode(problem, mode)
    bases = base_chunks(sem, seed, n_samples) if mode == "mc" else None
    if mode == "mc" and n_samples < 2:
        raise ValueError("Monte-Carlo evaluation needs n_samples >= 2")

    def score(plan):
        c = float(problem.cost(plan.nodes, plan.values))
        if math.isinf(c) and c > 0:
            return math.inf, 0.0
        if mode == "exact":
            return c + exact_expectation(sem, plan, problem.g), 0.0
        mean, se = expectation_over(sem, bases, plan, problem.g, workers)
        return c + mean, se

    masks = sorted(range(1 << n), key=lambda s: (bin(s).count("1"), s))
    best = None
    table: dict[int, float] = {}
    for s in masks:
        nodes = mask_to_nodes(s)
        if any(not grid_list[v] for v in nodes):
            continue
        sub_best = math.inf
        for combo in itertools.product(*(grid_list[v] for v in nodes)):
            plan = ImputationPlan(tuple(nodes), combo)
            val, se = score(plan)
            sub_best = min(sub_best, val)
            if best is None or val < best[0]:
                best = (val, se, plan)
        table[s] = sub_best
    val, se, plan = best
    return SolveReport(
        subset=plan.nodes,
        values=plan.values,
        objective=val,
        method="brute",
        seed=seed if mode == "mc" else None,
        n_samples=n_samples if mode == "mc" else None,
        stderr=se,
        table=table,
        wall_time=time.perf_counter() - t0,
        extra={"evaluation": mode},
    )


def quadratic_cost(delta: Sequence[float], q: Sequence[float]) -> CostFn:
    """``c(I, x_I) = sum_{i in I} delta_i + q_i * ||x_i||^2``."""
    delta = [float(d) for d in delta]
    q = [float(v) for v in q]

    def c(nodes, values):
        return float(sum(delta[i] + q[i] * float(np.sum(np.square(x))) for i, x in zip(nodes, values)))

    return c


def set_cost(F) -> CostFn:
    """Lift a set function to a cost that ignores the imputed values."""

    def c(nodes, values):
        m = 0
        for i in nodes:
            m |= 1 << i
        return F(m)

    return c
