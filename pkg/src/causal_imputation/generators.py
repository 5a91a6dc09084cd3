"""Seeded random instances for tests and experiment scripts."""

from __future__ import annotations

import numpy as np

from .additive import AdditiveSemSpec
from .graph import Dag
from .lingauss import TrellisProblem
from .sem import AdditiveNoise, Finite, NoiseSpec, Real, Sem, Table
from .setfunc import SetFunction


def random_dag(rng: np.random.Generator, n: int, p: float = 0.4) -> Dag:
    perm = rng.permutation(n)
    edges = [(int(perm[a]), int(perm[b])) for a in range(n) for b in range(a + 1, n) if rng.random() < p]
    return Dag(n, edges)


def _random_table(rng, parent_sizes, k):
    probs = rng.dirichlet(np.ones(k), size=int(np.prod(parent_sizes, dtype=int)))
    # exact zeros exercise skipped categories in the inverse CDF
    if k > 1 and rng.random() < 0.2:
        probs[:, 0] = 0.0
        probs /= probs.sum(axis=1, keepdims=True)
    return Table(probs.reshape(*parent_sizes, k))


def random_finite_sem(rng: np.random.Generator, n: int, max_alphabet: int = 3, p: float = 0.5) -> Sem:
    dag = random_dag(rng, n, p)
    sizes = [int(rng.integers(1, max_alphabet + 1)) for _ in range(n)]
    mechs = [_random_table(rng, [sizes[j] for j in dag.parents(i)], sizes[i]) for i in range(n)]
    return Sem(dag, mechs, [Finite(s) for s in sizes])


def random_mixed_sem(rng: np.random.Generator, n: int, p: float = 0.4) -> Sem:
    """Random DAG mixing table nodes (finite) and additive Gaussian/uniform nodes (real).

    Table nodes only take finite parents; additive nodes take any parents.
    """
    perm = rng.permutation(n)
    is_table = rng.random(n) < 0.5
    edges = []
    for a in range(n):
        for b in range(a + 1, n):
            u, v = int(perm[a]), int(perm[b])
            if rng.random() < p and (not is_table[v] or is_table[u]):
                edges.append((u, v))
    dag = Dag(n, edges)
    sizes = [int(rng.integers(2, 4)) for _ in range(n)]
    mechs, doms = [], []
    for i in range(n):
        if is_table[i]:
            mechs.append(_random_table(rng, [sizes[j] for j in dag.parents(i)], sizes[i]))
            doms.append(Finite(sizes[i]))
        else:
            noise = NoiseSpec.gaussian(rng.normal(), rng.uniform(0.1, 2.0)) if rng.random() < 0.7 else NoiseSpec.uniform(-1, 1)
            w = tuple(float(x) for x in rng.normal(size=len(dag.parents(i))))
            mechs.append(AdditiveNoise(noise, w))
            doms.append(Real(1))
    return Sem(dag, mechs, doms)


def random_submodular(rng: np.random.Generator, m: int, items: int | None = None) -> SetFunction:
    """Weighted coverage minus a random modular term: submodular, not monotone."""
    cov = random_monotone_submodular(rng, m, items)
    w = rng.uniform(0.0, 2.0, size=m) * (rng.random(m) < 0.8)
    tab = cov.table() - np.array([w[[i for i in range(m) if s >> i & 1]].sum() for s in range(1 << m)])
    return SetFunction.from_table(tab, "coverage-modular")


def random_monotone_submodular(rng: np.random.Generator, m: int, items: int | None = None) -> SetFunction:
    items = items or max(2, 2 * m)
    sets = [np.flatnonzero(rng.random(items) < rng.uniform(0.1, 0.5)).tolist() for _ in range(m)]
    weights = rng.uniform(0.1, 1.0, size=items)
    f = SetFunction.coverage(sets, weights)
    return SetFunction.from_table(f.table(), "coverage")


def random_additive_spec(rng: np.random.Generator, n: int, monotone_cost: bool = True) -> AdditiveSemSpec:
    """Random instance satisfying the unique-path hypothesis toward its target.

    The target's ancestral set is an in-tree; the remaining nodes hang off it
    and never feed back into the tree.
    """
    k = int(rng.integers(1, n + 1))
    tree_order = list(range(k))  # position k-1 is the target
    edges = []
    for a in tree_order[:-1]:
        edges.append((a, int(rng.integers(a + 1, k))))
    for v in range(k, n):
        for u in range(v):
            if rng.random() < 0.35:
                edges.append((u, v))
    perm = rng.permutation(n)
    dag = Dag(n, [(int(perm[u]), int(perm[v])) for u, v in edges])
    variances = rng.uniform(0.1, 3.0, size=n)
    cost = random_monotone_submodular(rng, n)
    if monotone_cost:
        scale = rng.uniform(0.0, 2.0)
        cost = SetFunction.from_table(scale * cost.table(), "cost")
    else:
        cost = random_submodular(rng, n)
    return AdditiveSemSpec(dag, variances, int(perm[k - 1]), cost)


def random_trellis(rng: np.random.Generator, n: int, T: int, ybar_zero: bool = False) -> TrellisProblem:
    N = n * (T + 1)
    A = rng.normal(scale=0.8, size=(n, n))
    ybar = np.zeros(N) if ybar_zero else rng.normal(size=N)
    return TrellisProblem(
        A,
        float(rng.uniform(0.3, 2.0)),
        T,
        rng.uniform(0.0, 1.0, size=N),
        rng.uniform(0.0, 1.5, size=N),
        ybar,
    )
