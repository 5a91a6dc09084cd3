import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from causal_imputation.errors import DomainError, TooLargeError, ValidationError
from causal_imputation.generators import random_finite_sem, random_mixed_sem
from causal_imputation.graph import Dag
from causal_imputation.sem import (
    AdditiveNoise,
    Custom,
    Finite,
    ImputationPlan,
    NoiseSpec,
    Real,
    Sem,
    Table,
    draw_noise,
    exact_joint,
    expectation,
    impute,
    propagate,
    sample,
    squared_deviation,
    uniforms,
)

UNIT = NoiseSpec.gaussian(0.0, 1.0)


def chain(n=3, noise=UNIT):
    return Sem(Dag(n, [(i, i + 1) for i in range(n - 1)]), [AdditiveNoise(noise)] * n)


def test_uniforms_open_interval_and_block_independent():
    u = uniforms(5, 2, 0, 10_000)
    assert np.all((u > 0) & (u < 1))
    # a window starting mid-stream matches the same slice of a long draw
    np.testing.assert_array_equal(uniforms(5, 2, 4090, 20), u[4090:4110])


def test_recompute_is_bit_exact():
    sem = chain(2)
    noise = draw_noise(sem, 3, 100)
    assert propagate(sem, noise).identical(propagate(sem, noise))


def test_zero_noise_chain():
    sem = chain(3, NoiseSpec.degenerate(0.0))
    y = sample(sem, 0, 5)
    for i in range(3):
        assert np.all(y[i] == 0.0)


def test_bernoulli_root_marginal():
    sem = Sem(Dag(1, []), [Table(np.array([0.5, 0.5]))])
    y = sample(sem, 11, 100_000)
    assert abs(y[0].mean() - 0.5) < 0.01


def test_impute_chain_middle():
    sem = chain(3)
    base = sample(sem, 1, 50)
    y = impute(sem, base, ImputationPlan((1,), (0.0,)))
    np.testing.assert_array_equal(y[0], base[0])
    assert np.all(y[1] == 0.0)
    np.testing.assert_array_equal(y[2], NoiseSpec.gaussian().transform(base.noise.u[2]).ravel())
    assert base[1] is not y[1]  # base untouched


def test_impute_sink_changes_only_sink():
    sem = chain(3)
    base = sample(sem, 1, 20)
    y = impute(sem, base, ImputationPlan((2,), (7.0,)))
    assert y[0] is base[0] and y[1] is base[1]
    assert np.all(y[2] == 7.0)


def test_imputed_process_keeps_earlier_constants():
    sem = chain(3)
    base = sample(sem, 1, 20)
    y = impute(sem, impute(sem, base, ImputationPlan((1,), (2.0,))), ImputationPlan((0,), (5.0,)))
    assert np.all(y[1] == 2.0)


def test_plan_validation():
    sem = Sem(Dag(2, [(0, 1)]), [Table(np.array([0.5, 0.5])), Table(np.array([[1.0, 0.0], [0.0, 1.0]]))])
    with pytest.raises(DomainError):
        ImputationPlan((0,), (2,)).checked(sem)
    with pytest.raises(DomainError):
        ImputationPlan((5,), (0,)).checked(sem)
    with pytest.raises(ValidationError):
        ImputationPlan((1, 1), (0, 0))


def test_expectation_constant_and_chain_variance():
    sem = chain(3)
    one = lambda y: np.ones(y.n)  # noqa: E731
    assert expectation(sem, ImputationPlan((), ()), one, 1000, 0) == (1.0, 0.0)
    g = squared_deviation([2])
    est, se = expectation(sem, ImputationPlan((), ()), g, 100_000, 1)
    assert abs(est - 3.0) < 3 * se
    est, se = expectation(sem, ImputationPlan((1,), (0.0,)), g, 100_000, 1)
    assert abs(est - 1.0) < 3 * se


def test_expectation_independent_of_workers_and_chunking():
    sem = chain(3)
    g = squared_deviation([2])
    plan = ImputationPlan((0,), (1.0,))
    a = expectation(sem, plan, g, 10_000, 4, workers=1, chunk=1000)
    b = expectation(sem, plan, g, 10_000, 4, workers=4, chunk=1000)
    assert a == b
    c = expectation(sem, plan, g, 10_000, 4, chunk=10_000)
    assert abs(a[0] - c[0]) < 1e-12


def test_nonfinite_cost_raises():
    sem = chain(1)
    with pytest.raises(DomainError):
        expectation(sem, ImputationPlan((), ()), lambda y: np.full(y.n, np.inf), 10, 0)


def test_exact_joint_examples():
    coin = Table(np.array([0.5, 0.5]))
    assert exact_joint(Sem(Dag(1, []), [coin])) == {(0,): 0.5, (1,): 0.5}
    copy = Sem(Dag(2, [(0, 1)]), [coin, Table(np.eye(2))])
    assert exact_joint(copy) == {(0, 0): 0.5, (1, 1): 0.5}


def test_exact_joint_equals_table_product():
    rng = np.random.default_rng(3)
    for _ in range(30):
        sem = random_finite_sem(rng, int(rng.integers(1, 5)))
        joint = exact_joint(sem)
        sizes = [d.size for d in sem.domains]
        for x in itertools.product(*(range(s) for s in sizes)):
            p = 1.0
            for i in range(sem.node_count):
                idx = tuple(x[j] for j in sem.dag.parents(i)) + (x[i],)
                p *= sem.mechanisms[i].probs[idx]
            assert abs(joint.get(x, 0.0) - p) < 1e-15


def test_exact_matches_sampling():
    rng = np.random.default_rng(8)
    sem = random_finite_sem(rng, 3, 3)
    joint = exact_joint(sem, ImputationPlan((0,), (0,)))
    y = impute(sem, sample(sem, 2, 200_000), ImputationPlan((0,), (0,)))
    states = np.column_stack([y[i] for i in range(3)])
    for x, p in joint.items():
        freq = np.mean(np.all(states == np.array(x), axis=1))
        assert abs(freq - p) < 5 * np.sqrt(p * (1 - p) / 200_000) + 1e-12


def test_exact_limits():
    with pytest.raises(DomainError):
        exact_joint(chain(2))
    big = Sem(Dag(21, []), [Table(np.full(2, 0.5))] * 21)
    with pytest.raises(TooLargeError):
        exact_joint(big)


def test_vector_real_nodes():
    sem = Sem(Dag(2, [(0, 1)]), [AdditiveNoise(UNIT), AdditiveNoise(UNIT)], [Real(3), Real(3)])
    y = sample(sem, 0, 4)
    assert y[1].shape == (4, 3)
    y2 = impute(sem, y, ImputationPlan((0,), ((1.0, 2.0, 3.0),)))
    np.testing.assert_array_equal(y2[0], np.tile([1.0, 2.0, 3.0], (4, 1)))


def test_custom_mechanism_and_domain_check():
    sq = Custom(lambda pa, u: pa[0] ** 2 + u.ravel())
    sem = Sem(Dag(2, [(0, 1)]), [AdditiveNoise(UNIT), sq], [Real(1), Real(1)])
    y = sample(sem, 0, 10)
    np.testing.assert_allclose(y[1], y[0] ** 2 + sem_u(sem, y, 1))
    with pytest.raises(ValidationError):
        Sem(Dag(1, []), [Table(np.array([0.5, 0.5]))], [Finite(3)])


def sem_u(sem, y, i):
    return y.noise.u[i].ravel()


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(2, 8))
def test_commutativity_property(seed, n):
    rng = np.random.default_rng(seed)
    sem = random_mixed_sem(rng, n)
    i, j = (int(v) for v in rng.choice(n, 2, replace=False))
    vals = {k: (int(rng.integers(sem.domains[k].size)) if isinstance(sem.domains[k], Finite) else float(rng.normal())) for k in (i, j)}
    base = sample(sem, seed, 8)
    a = impute(sem, impute(sem, base, ImputationPlan((i,), (vals[i],))), ImputationPlan((j,), (vals[j],)))
    b = impute(sem, impute(sem, base, ImputationPlan((j,), (vals[j],))), ImputationPlan((i,), (vals[i],)))
    assert a.identical(b)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(1, 300), st.integers(0, 5000))
def test_sample_windows_are_consistent(seed, n, start):
    sem = random_mixed_sem(np.random.default_rng(seed % 1000), 4)
    whole = sample(sem, seed, start + n)
    part = sample(sem, seed, n, start)
    for i in range(4):
        np.testing.assert_array_equal(whole[i][start:], part[i])
