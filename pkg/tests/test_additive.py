import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from causal_imputation import additive
from causal_imputation.additive import AdditiveSemSpec, build_F, build_F_max, build_G, check_hypotheses, closed_form_G
from causal_imputation.errors import HypothesisError, ValidationError
from causal_imputation.generators import random_additive_spec
from causal_imputation.graph import Dag
from causal_imputation.sem import base_chunks, expectation_over
from causal_imputation.setfunc import ConstraintOracle, SetFunction, greedy_maximize, is_nondecreasing, is_submodular

CHAIN = Dag(3, [(0, 1), (1, 2)])


def chain_spec(cost=None):
    return AdditiveSemSpec(CHAIN, [1, 4, 9], 2, cost)


def test_hypothesis_checks():
    assert check_hypotheses(chain_spec()) == []
    diamond = AdditiveSemSpec(Dag(4, [(0, 1), (0, 2), (1, 3), (2, 3)]), [1] * 4, 3)
    (v,) = check_hypotheses(diamond)
    assert v.kind == "unique_path" and v.witness == (0, 3, 2)
    sup = AdditiveSemSpec(CHAIN, [1, 1, 1], 2, SetFunction.from_table([0, 0, 0, 1, 0, 1, 1, 3]))
    kinds = [v.kind for v in check_hypotheses(sup)]
    assert kinds == ["cost_not_submodular"]


def test_closed_form_chain():
    spec = chain_spec()
    assert closed_form_G(spec, []) == 14
    assert closed_form_G(spec, [1]) == 9
    assert closed_form_G(spec, [2]) == 0
    assert list(build_G(spec).table()) == [14, 13, 9, 9, 0, 0, 0, 0]


def test_off_ancestry_imputation_leaves_variance():
    # node 3 is a child of the root but not an ancestor of the target
    spec = AdditiveSemSpec(Dag(4, [(0, 1), (1, 2), (0, 3)]), [1, 4, 9, 16], 2)
    assert closed_form_G(spec, [3]) == closed_form_G(spec, []) == 14


def test_F_tables_on_chain():
    spec = chain_spec(SetFunction.modular([2, 2, 2]))
    F = build_F(spec)
    assert [F(()), F((1,)), F((2,)), F((1, 2))] == [14, 11, 2, 4]
    Fm = build_F_max(spec)
    assert [Fm(()), Fm((1,)), Fm((2,)), Fm((1, 2))] == [-14, -7, 2, 4]
    assert greedy_maximize(Fm, ConstraintOracle.cardinality(1)) == (2,)


def test_zero_cost_G_monotone_and_negation_submodular():
    spec = chain_spec()
    G = build_G(spec)
    assert is_nondecreasing(-G)
    assert is_submodular(-G)
    assert is_nondecreasing(build_F_max(spec))


def test_F_is_not_submodular_in_general():
    # the smallest instance: imputing the parent is worth less once the child is imputed
    spec = AdditiveSemSpec(Dag(2, [(0, 1)]), [1, 1], 1)
    chk = is_submodular(build_F(spec))
    assert not chk and chk.witness == ((), (1,), 0)


def test_hypothesis_errors():
    diamond = AdditiveSemSpec(Dag(4, [(0, 1), (0, 2), (1, 3), (2, 3)]), [1] * 4, 3)
    with pytest.raises(HypothesisError):
        build_F(diamond)
    with pytest.raises(HypothesisError, match="nondecreasing"):
        build_F_max(chain_spec(SetFunction.modular([1, -1, 1])))
    with pytest.raises(ValidationError):
        AdditiveSemSpec(CHAIN, [1, -1, 1], 2)


def test_vector_variances_summed():
    spec = AdditiveSemSpec(CHAIN, [[0.5, 0.5], [2, 2], [4, 5]], 2)
    assert closed_form_G(spec, []) == 14


def test_closed_form_vs_simulation():
    spec = chain_spec()
    sem = additive.materialize(spec, [0.3, -1.0, 2.0])
    bases = base_chunks(sem, 9, 100_000)
    for s in range(8):
        plan = additive.single_value_plan(s, [1.0, -2.0, 0.5])
        mc, se = expectation_over(sem, bases, plan, additive.target_variance_cost(sem, 2, plan))
        exact = closed_form_G(spec, s)
        assert abs(mc - exact) <= 3 * se + 1e-12


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(1, 7))
def test_random_instances_meet_hypotheses(seed, n):
    spec = random_additive_spec(np.random.default_rng(seed), n)
    assert check_hypotheses(spec) == []
    G = build_G(spec)
    assert is_nondecreasing(-G) and is_submodular(-G)
    Fm = build_F_max(spec)
    assert is_nondecreasing(Fm) and is_submodular(Fm)
