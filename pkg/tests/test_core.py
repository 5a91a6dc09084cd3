import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from causal_imputation.core import OciProblem, brute_force_solve, estimate, evaluate, quadratic_cost
from causal_imputation.errors import TooLargeError, ValidationError
from causal_imputation.generators import random_finite_sem
from causal_imputation.graph import Dag
from causal_imputation.sem import AdditiveNoise, ImputationPlan, NoiseSpec, Sem, Table, squared_deviation

UNIT = NoiseSpec.gaussian()


def chain_problem():
    sem = Sem(Dag(2, [(0, 1)]), [AdditiveNoise(UNIT), AdditiveNoise(UNIT)])
    return OciProblem(sem, quadratic_cost([1, 1], [1, 1]), squared_deviation([1]))


def test_empty_plan_is_baseline():
    p = chain_problem()
    v, se = estimate(p, ImputationPlan((), ()), 100_000, 2)
    assert abs(v - 2.0) < 3 * se


def test_chain_examples():
    p = chain_problem()
    assert evaluate(p, ImputationPlan((1,), (0.0,)), 1000, 1) == 1.0
    v, se = estimate(p, ImputationPlan((0,), (0.0,)), 100_000, 1)
    assert abs(v - 2.0) < 3 * se


def test_brute_force_chain():
    rep = brute_force_solve(chain_problem(), {0: [-1, 0, 1], 1: [-1, 0, 1]}, 20_000, 0)
    assert rep.subset == (1,) and rep.values == (0.0,)
    assert rep.objective == 1.0
    assert rep.objective == min(rep.table.values())


def test_all_tie_picks_empty():
    sem = Sem(Dag(2, [(0, 1)]), [AdditiveNoise(UNIT), AdditiveNoise(UNIT)])
    p = OciProblem(sem, lambda nodes, values: 0.0, lambda y: np.zeros(y.n))
    rep = brute_force_solve(p, {0: [0, 1], 1: [0, 1]}, 100, 0)
    assert rep.subset == () and rep.objective == 0.0


def test_priced_out_single_node():
    sem = Sem(Dag(1, []), [AdditiveNoise(UNIT)])
    p = OciProblem(sem, lambda nodes, values: 10.0 if nodes else 0.0, squared_deviation([0]))
    rep = brute_force_solve(p, {0: [-1, 0, 1]}, 100_000, 5)
    assert rep.subset == ()
    assert abs(rep.objective - 1.0) < 3 * rep.stderr


def test_infinite_empty_cost_rejected():
    sem = Sem(Dag(1, []), [AdditiveNoise(UNIT)])
    with pytest.raises(ValidationError):
        OciProblem(sem, lambda nodes, values: math.inf, squared_deviation([0]))


def test_size_limits():
    sem = Sem(Dag(17, []), [AdditiveNoise(UNIT)] * 17)
    p = OciProblem(sem, lambda n, v: 0.0, lambda y: np.zeros(y.n))
    with pytest.raises(TooLargeError):
        brute_force_solve(p, {0: [0]}, 10, 0)
    sem = Sem(Dag(6, []), [AdditiveNoise(UNIT)] * 6)
    p = OciProblem(sem, lambda n, v: 0.0, lambda y: np.zeros(y.n))
    with pytest.raises(TooLargeError):
        brute_force_solve(p, {i: list(range(12)) for i in range(6)}, 10, 0)


def _finite_problem(seed):
    rng = np.random.default_rng(seed)
    sem = random_finite_sem(rng, 3, 3)
    w = rng.normal(size=3)
    g = lambda y: sum(w[i] * y[i] for i in range(3)).astype(float)  # noqa: E731
    grids = {i: list(range(sem.domains[i].size)) for i in range(3)}
    return OciProblem(sem, quadratic_cost(rng.uniform(0, 1, 3), [0.1] * 3), g), grids


def test_exact_mode_is_seed_independent():
    p, grids = _finite_problem(4)
    a = brute_force_solve(p, grids, seed=1)
    b = brute_force_solve(p, grids, seed=99)
    assert (a.subset, a.values, a.objective, a.table) == (b.subset, b.values, b.objective, b.table)
    assert a.extra["evaluation"] == "exact"


def test_exact_agrees_with_mc():
    p, grids = _finite_problem(6)
    plan = ImputationPlan((1,), (0,))
    exact = estimate(p, plan, mode="exact")[0]
    mc, se = estimate(p, plan, 100_000, 3, mode="mc")
    assert abs(mc - exact) < 4 * se


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 10_000), st.floats(-3, 3))
def test_adding_grid_value_never_hurts(seed, extra):
    sem = Sem(Dag(2, [(0, 1)]), [AdditiveNoise(UNIT), AdditiveNoise(UNIT)])
    q = OciProblem(sem, quadratic_cost([0.2, 0.2], [1, 1]), squared_deviation([1], [1.0]))
    base = {0: [0.0], 1: [0.5]}
    more = {0: [0.0, extra], 1: [0.5]}
    a = brute_force_solve(q, base, 2000, seed)
    b = brute_force_solve(q, more, 2000, seed)
    assert b.objective <= a.objective


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 10_000))
def test_report_optimum_is_table_minimum(seed):
    p, grids = _finite_problem(seed)
    rep = brute_force_solve(p, grids)
    assert rep.objective == min(rep.table.values())
    assert estimate(p, rep.plan)[0] == rep.objective
