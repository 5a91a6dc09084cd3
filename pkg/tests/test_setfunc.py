import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from causal_imputation.errors import DomainError, TooLargeError
from causal_imputation.generators import random_monotone_submodular, random_submodular
from causal_imputation.graph import nodes_to_mask
from causal_imputation.setfunc import (
    ConstraintOracle,
    SetFunction,
    brute_force_extremum,
    greedy_maximize,
    is_nondecreasing,
    is_submodular,
    lovasz_extension,
    lovasz_extension_many,
    minimize_single_value,
)

SUB = SetFunction.from_table([0, 1, 2, 2.5])
SUPER = SetFunction.from_table([0, 0, 0, 1])


def test_submodularity_examples():
    assert is_submodular(SetFunction.modular([1, -2, 3]))
    assert is_submodular(SUB)
    chk = is_submodular(SUPER)
    assert not chk and chk.witness == ((), (1,), 0)


def test_monotonicity_examples():
    assert is_nondecreasing(SetFunction.modular([0, 1, 2]))
    chk = is_nondecreasing(SetFunction.from_table([1, 0]))
    assert not chk and chk.witness == ((), (0,))
    assert is_nondecreasing(SetFunction.coverage([[0, 1], [1, 2], [3]], [1, 1, 1, 1]))


def test_lovasz_examples():
    assert lovasz_extension(SUB, [0.5, 0.8]) == pytest.approx(1.85, abs=1e-15)
    const = SetFunction.from_table([3.0] * 8)
    assert lovasz_extension(const, [0.1, 0.7, 0.3]) == pytest.approx(3.0, abs=1e-15)
    with pytest.raises(DomainError):
        lovasz_extension(SUB, [1.5, 0.0])


def test_lovasz_matches_riemann_sum():
    rng = np.random.default_rng(0)
    F = random_submodular(rng, 5)
    lam = (np.arange(1_000_000) + 0.5) / 1_000_000
    for _ in range(3):
        z = rng.random(5)
        # F({i : z_i > lam}) over a midpoint grid of lam
        masks = ((z[None, :] > lam[:, None]) * (1 << np.arange(5))).sum(axis=1)
        riemann = F.table()[masks].mean()
        # a midpoint rule on a step function errs by at most h/2 per unit of jump
        chain = masks[np.r_[True, np.diff(masks) != 0]]
        bound = 0.5e-6 * np.abs(np.diff(F.table()[chain])).sum()
        assert abs(riemann - lovasz_extension(F, z)) <= max(bound, 1e-6)


def test_midpoint_violation_from_witness():
    rng = np.random.default_rng(1)
    found = 0
    for _ in range(50):
        m = int(rng.integers(2, 7))
        F = SetFunction.from_table(rng.normal(size=1 << m))
        chk = is_submodular(F)
        if chk:
            continue
        A, B, i = chk.witness
        x = np.zeros(m)
        x[list(A) + [i]] = 1
        y = np.zeros(m)
        y[list(B)] = 1
        gap = lovasz_extension(F, (x + y) / 2) - (lovasz_extension(F, x) + lovasz_extension(F, y)) / 2
        assert gap > 1e-9
        found += 1
    assert found > 0


def test_minimize_examples():
    assert minimize_single_value(SetFunction.modular([1, -2, 3])) == ((1,), -2.0)
    assert minimize_single_value(SUB) == ((), 0.0)


def test_greedy_examples():
    assert greedy_maximize(SUB, ConstraintOracle.cardinality(1)) == (1,)
    assert greedy_maximize(SetFunction.modular([-1, -2])) == ()


def test_brute_force_examples():
    assert brute_force_extremum(SetFunction.from_table([0.0] * 8)) == ((), 0.0)
    assert brute_force_extremum(SetFunction.from_table([0, 5]), direction="max") == ((0,), 5.0)
    with pytest.raises(TooLargeError):
        brute_force_extremum(SetFunction(21, lambda s: 0.0))


def test_explicit_constraint():
    con = ConstraintOracle.explicit([(), (0, 2), (1,)])
    F = SetFunction.modular([1, 1, 1])
    assert brute_force_extremum(F, con, "max") == ((0, 2), 2.0)
    assert greedy_maximize(F, con) == (1,)


def test_batched_extension_matches_scalar():
    rng = np.random.default_rng(2)
    F = random_submodular(rng, 6)
    Z = rng.random((200, 6))
    Z[:50] = np.round(Z[:50])
    np.testing.assert_allclose(lovasz_extension_many(F, Z), [lovasz_extension(F, z) for z in Z], atol=1e-12)


def test_coverage_matches_definition():
    F = SetFunction.coverage([[0], [0, 1], [2]], [1.0, 2.0, 4.0])
    assert F((0, 1)) == 3.0
    assert F(nodes_to_mask([0, 2])) == 5.0


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(1, 8))
def test_vertices_exact_and_min_equals_brute(seed, m):
    F = random_submodular(np.random.default_rng(seed), m)
    tab = F.table()
    for s in range(1 << m):
        z = np.array([(s >> i) & 1 for i in range(m)], dtype=float)
        assert lovasz_extension(F, z) == tab[s]
    subset, val = minimize_single_value(F)
    assert val == tab.min()
    assert brute_force_extremum(F)[1] == val


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(1, 8), st.integers(1, 8))
def test_greedy_ratio(seed, m, k):
    F = random_monotone_submodular(np.random.default_rng(seed), m)
    con = ConstraintOracle.cardinality(min(k, m))
    g = F(greedy_maximize(F, con))
    opt = brute_force_extremum(F, con, "max")[1]
    assert g >= (1 - 1 / math.e) * opt - 1e-9


@settings(max_examples=40, deadline=None)
@given(st.lists(st.floats(-5, 5), min_size=4, max_size=4))
def test_two_element_submodularity_matches_inequality(vals):
    F = SetFunction.from_table(vals)
    expected = vals[1] + vals[2] >= vals[0] + vals[3] - 1e-9
    assert bool(is_submodular(F)) == expected
