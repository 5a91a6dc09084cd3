import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from causal_imputation import lingauss
from causal_imputation.errors import DimensionError, TooLargeError, ValidationError
from causal_imputation.generators import random_trellis
from causal_imputation.lingauss import TrellisProblem, analytic_objective, build_matrices, enumerate_solve, inner_minimize, moments
from causal_imputation.sem import ImputationPlan, base_chunks, expectation_over


def scalar(a=1.0, delta=(0, 0), ybar=(0, 0), q=(0, 0)):
    return TrellisProblem(np.array([[a]]), 1.0, 1, np.array(q, float), np.array(delta, float), np.array(ybar, float))


def test_matrices_examples():
    m = build_matrices(scalar(), 0)
    np.testing.assert_array_equal(m.A_tilde, [[0, 0], [1, 0]])
    np.testing.assert_array_equal(m.P, [[1, 0], [1, 1]])
    np.testing.assert_array_equal(m.D, [[2, 1], [1, 1]])
    m = build_matrices(scalar(2.0), 0)
    np.testing.assert_array_equal(m.P, [[1, 0], [2, 1]])
    np.testing.assert_array_equal(m.D, [[5, 2], [2, 1]])
    m = build_matrices(scalar(2.0), 0b11)
    np.testing.assert_array_equal(m.A_tilde, np.zeros((2, 2)))
    np.testing.assert_array_equal(m.P, np.eye(2))


def test_moments_examples():
    p = scalar()
    mean, cov = moments(p, 0)
    np.testing.assert_array_equal(mean, [0, 0])
    np.testing.assert_array_equal(cov, [[1, 1], [1, 2]])
    mean, cov = moments(p, [0], [2.5, 0])
    np.testing.assert_array_equal(mean, [2.5, 2.5])
    np.testing.assert_array_equal(cov, [[0, 0], [0, 1]])
    mean, cov = moments(p, [0, 1], [1.0, -3.0])
    np.testing.assert_array_equal(mean, [1, -3])
    assert not cov.any()
    with pytest.raises(ValidationError):
        moments(p, [0], [0, 1.0])


def test_objective_examples():
    p = scalar()
    assert analytic_objective(p, 0) == 3
    assert analytic_objective(p, [0]) == 1
    assert analytic_objective(p, [1]) == 1
    p = scalar(ybar=(0.7, -2.0))
    assert analytic_objective(p, [0, 1], [0.7, -2.0]) == 0


def test_inner_minimize_examples():
    p = scalar(ybar=(1, 1))
    x, val = inner_minimize(p, [0])
    np.testing.assert_allclose(x, [1, 0])
    assert val == pytest.approx(1.0)
    p = scalar(ybar=(0.3, 0.9), delta=(0.25, 0.5))
    x, val = inner_minimize(p, [0, 1])
    np.testing.assert_allclose(x, [0.3, 0.9])
    assert val == pytest.approx(0.75)
    rng = np.random.default_rng(1)
    for _ in range(10):
        p = random_trellis(rng, 2, 2, ybar_zero=True)
        x, _ = inner_minimize(p, rng.random(p.N) < 0.5)
        assert not x.any()


def test_enumerate_examples():
    assert (r := enumerate_solve(scalar(delta=(10, 10)))).subset == () and r.objective == 3
    r = enumerate_solve(scalar(delta=(0.5, 0.5)))
    assert r.subset == (0, 1) and r.objective == 1.0
    r = enumerate_solve(scalar())
    assert r.subset == (0, 1) and r.objective == 0.0
    assert r.objective == min(r.table.values())


def test_validation():
    with pytest.raises(ValidationError, match="q"):
        scalar(q=(-1, 0))
    with pytest.raises(ValidationError, match="delta"):
        scalar(delta=(-1, 0))
    with pytest.raises(DimensionError):
        TrellisProblem(np.eye(2), 1.0, 1, np.zeros(3), np.zeros(4), np.zeros(4))
    with pytest.raises(TooLargeError):
        enumerate_solve(TrellisProblem(np.eye(1), 1.0, 20, np.zeros(21), np.zeros(21), np.zeros(21)))


def test_simulation_agrees():
    rng = np.random.default_rng(5)
    p = random_trellis(rng, 2, 2)
    oci = lingauss.materialize(p)
    bases = base_chunks(oci.sem, 4, 100_000)
    for _ in range(5):
        s = rng.random(p.N) < 0.4
        x = np.where(s, rng.normal(size=p.N), 0.0)
        idx = np.flatnonzero(s)
        plan = ImputationPlan(tuple(int(i) for i in idx), tuple(float(x[i]) for i in idx))
        mc, se = expectation_over(oci.sem, bases, plan, oci.g)
        mc += oci.cost(plan.nodes, plan.values)
        assert abs(mc - analytic_objective(p, s, x)) <= 3 * se + 1e-9


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(1, 3), st.integers(1, 3))
def test_structure_and_zero_target_identity(seed, n, T):
    rng = np.random.default_rng(seed)
    p = random_trellis(rng, n, T, ybar_zero=True)
    s = rng.random(p.N) < 0.5
    m = build_matrices(p, s)
    assert np.all(np.triu(m.P, 1) == 0) and np.all(np.diag(m.P) == 1)
    assert np.linalg.det(m.P) == pytest.approx(1.0)
    x = np.where(s, rng.normal(size=p.N), 0.0)
    # for ybar = 0 the displayed quadratic form is exact
    assert lingauss.quadratic_form_objective(p, s, x) == pytest.approx(analytic_objective(p, s, x), rel=1e-12)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**32 - 1), st.floats(0, 5))
def test_larger_delta_never_helps(seed, bump):
    rng = np.random.default_rng(seed)
    p = random_trellis(rng, 1, 2)
    hi = TrellisProblem(p.A, p.sigma2, p.T, p.q, p.delta + bump * rng.random(p.N), p.ybar)
    assert enumerate_solve(hi).objective >= enumerate_solve(p).objective - 1e-12
