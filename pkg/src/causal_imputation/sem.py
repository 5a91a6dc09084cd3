"""Structural equation models with frozen per-node uniform noise.

Every node ``i`` is computed as ``X_i = f_i(pa(X_i), u_i)`` where ``u_i`` is a
uniform draw on (0, 1) (or a vector of them). All arrays are batched: a
:class:`Realization` holds ``n`` independent sample paths at once, one array
per node with leading axis ``n``.

Noise is counter-based: the uniforms of node ``i`` at sample index ``k`` depend
only on ``(seed, i, k)``, so chunked or threaded evaluation reproduces the
same numbers bit for bit.
"""

from __future__ import annotations

import itertools
from collections.abc import Callable, Iterable, Mapping, Sequence
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.special import ndtri

from .errors import DomainError, TooLargeError, ValidationError
from .graph import Dag

NOISE_BLOCK = 4096
EXACT_LIMIT = 10**6


# --------------------------------------------------------------------------- domains


@dataclass(frozen=True)
class Finite:
    """Finite alphabet ``{0, ..., size - 1}``."""

    size: int

    def __post_init__(self):
        if self.size < 1:
            raise ValidationError(f"finite alphabet needs size >= 1, got {self.size}")

    def check_value(self, x):
        if isinstance(x, (bool, np.bool_)) or not isinstance(x, (int, np.integer)):
            raise DomainError(f"{x!r} is not an integer symbol")
        if not 0 <= x < self.size:
            raise DomainError(f"{x} outside alphabet of size {self.size}")
        return int(x)

    def check_array(self, arr: np.ndarray, n: int) -> np.ndarray:
        arr = np.asarray(arr)
        if arr.shape != (n,):
            raise DomainError(f"expected shape {(n,)}, got {arr.shape}")
        if not np.issubdtype(arr.dtype, np.integer):
            if not np.all(np.mod(arr, 1) == 0):
                raise DomainError("non-integer value for a finite node")
        if arr.size and (arr.min() < 0 or arr.max() >= self.size):
            raise DomainError(f"value outside alphabet of size {self.size}")
        return arr.astype(np.int64, copy=False)

    def constant(self, x, n: int) -> np.ndarray:
        return np.full(n, x, dtype=np.int64)


@dataclass(frozen=True)
class Real:
    """Real vectors of dimension ``dim``; scalar nodes (dim 1) are stored flat."""

    dim: int = 1

    def __post_init__(self):
        if self.dim < 1:
            raise ValidationError(f"real domain needs dim >= 1, got {self.dim}")

    @property
    def shape(self) -> tuple[int, ...]:
        return () if self.dim == 1 else (self.dim,)

    def check_value(self, x):
        arr = np.asarray(x, dtype=float)
        if arr.size != self.dim or (self.dim == 1 and arr.ndim > 1):
            raise DomainError(f"expected a value of dimension {self.dim}, got {x!r}")
        if not np.all(np.isfinite(arr)):
            raise DomainError(f"non-finite value {x!r}")
        return float(arr.reshape(())) if self.dim == 1 else tuple(float(v) for v in arr.ravel())

    def check_array(self, arr: np.ndarray, n: int) -> np.ndarray:
        arr = np.asarray(arr, dtype=float)
        if arr.shape != (n, *self.shape):
            raise DomainError(f"expected shape {(n, *self.shape)}, got {arr.shape}")
        if not np.all(np.isfinite(arr)):
            raise DomainError("mechanism produced a non-finite value")
        return arr

    def constant(self, x, n: int) -> np.ndarray:
        return np.broadcast_to(np.asarray(x, dtype=float), (n, *self.shape)).copy()


Domain = Finite | Real


# --------------------------------------------------------------------------- noise


@dataclass(frozen=True)
class NoiseSpec:
    """Scalar noise distribution realized from a uniform by its inverse CDF."""

    kind: str = "gaussian"
    loc: float = 0.0
    scale: float = 1.0

    def __post_init__(self):
        if self.kind not in ("gaussian", "uniform", "degenerate"):
            raise ValidationError(f"unknown noise kind {self.kind!r}")
        if self.scale < 0:
            raise ValidationError("noise scale must be non-negative")

    @classmethod
    def gaussian(cls, mean=0.0, std=1.0):
        return cls("gaussian", float(mean), float(std))

    @classmethod
    def uniform(cls, low=0.0, high=1.0):
        return cls("uniform", float(low), float(high) - float(low))

    @classmethod
    def degenerate(cls, value=0.0):
        return cls("degenerate", float(value), 0.0)

    def transform(self, u: np.ndarray) -> np.ndarray:
        if self.kind == "gaussian":
            return self.loc + self.scale * ndtri(u)
        if self.kind == "uniform":
            return self.loc + self.scale * u
        return np.full(np.shape(u), self.loc)

    @property
    def mean(self) -> float:
        return self.loc + (0.5 * self.scale if self.kind == "uniform" else 0.0)

    @property
    def variance(self) -> float:
        if self.kind == "gaussian":
            return self.scale**2
        if self.kind == "uniform":
            return self.scale**2 / 12.0
        return 0.0


def uniforms(seed: int, node: int, start: int, count: int, width: int = 1) -> np.ndarray:
    """Uniforms on (0, 1) for samples ``start .. start + count - 1`` of one node.

    Samples are grouped into blocks of ``NOISE_BLOCK``; each block has its own
    Philox stream keyed on ``(seed, node, block)``. Returns shape ``(count,)``
    when ``width == 1`` and ``(count, width)`` otherwise.
    """
    if count == 0:
        return np.empty((0,) if width == 1 else (0, width))
    first, last = start // NOISE_BLOCK, (start + count - 1) // NOISE_BLOCK
    parts = []
    for b in range(first, last + 1):
        bitgen = np.random.Philox(np.random.SeedSequence([int(seed), int(node), b]))
        raw = bitgen.random_raw(NOISE_BLOCK * width)
        parts.append(((raw >> np.uint64(11)).astype(np.float64) + 0.5) * 2.0**-53)
    flat = np.concatenate(parts).reshape(-1, width)
    off = start - first * NOISE_BLOCK
    out = flat[off : off + count]
    return out[:, 0] if width == 1 else out


# --------------------------------------------------------------------------- mechanisms


@dataclass(frozen=True)
class AdditiveNoise:
    """``X = sum_j w_j * parent_j + noise(u)``; weights default to one."""

    noise: NoiseSpec = field(default_factory=NoiseSpec)
    weights: tuple[float, ...] | None = None

    def noise_width(self, domain: Domain) -> int:
        return domain.dim if isinstance(domain, Real) else 1

    def __call__(self, parents: Sequence[np.ndarray], u: np.ndarray) -> np.ndarray:
        out = self.noise.transform(u)
        w = self.weights if self.weights is not None else (1.0,) * len(parents)
        for wj, pj in zip(w, parents):
            out = out + wj * pj
        return out


@dataclass(frozen=True, eq=False)
class Table:
    """Conditional probability table ``probs[parent_0, ..., parent_k, value]``.

    The value is drawn by inverse CDF of the selected row at ``u``.
    """

    probs: np.ndarray

    def __post_init__(self):
        p = np.array(self.probs, dtype=float)
        if p.ndim < 1 or p.shape[-1] < 1:
            raise ValidationError("table needs a trailing value axis")
        if np.any(p < 0) or not np.allclose(p.sum(axis=-1), 1.0, atol=1e-9):
            raise ValidationError("table rows must be non-negative and sum to 1")
        p = p / p.sum(axis=-1, keepdims=True)
        p.setflags(write=False)
        object.__setattr__(self, "probs", p)
        cdf = np.cumsum(p, axis=-1)[..., :-1]
        cdf.setflags(write=False)
        object.__setattr__(self, "_cdf", cdf)

    def __eq__(self, other):
        return isinstance(other, Table) and np.array_equal(self.probs, other.probs)

    __hash__ = None

    @property
    def size(self) -> int:
        return self.probs.shape[-1]

    @property
    def parent_sizes(self) -> tuple[int, ...]:
        return self.probs.shape[:-1]

    def noise_width(self, domain: Domain) -> int:
        return 1

    def rows(self, parents: Sequence[np.ndarray]) -> tuple:
        return tuple(np.asarray(p, dtype=np.int64) for p in parents)

    def __call__(self, parents: Sequence[np.ndarray], u: np.ndarray) -> np.ndarray:
        cdf = self._cdf[self.rows(parents)] if parents else np.broadcast_to(self._cdf, (len(u), self.size - 1))
        return (cdf <= u[:, None]).sum(axis=1).astype(np.int64)


@dataclass(frozen=True)
class Custom:
    """Arbitrary pure function ``fn(parent_arrays, u) -> values``, vectorized over samples."""

    fn: Callable[[Sequence[np.ndarray], np.ndarray], np.ndarray]
    width: int = 1

    def noise_width(self, domain: Domain) -> int:
        return self.width

    def __call__(self, parents, u):
        return self.fn(parents, u)


Mechanism = AdditiveNoise | Table | Custom


# --------------------------------------------------------------------------- model


class Sem:
    """A DAG with one mechanism and one value domain per node."""

    def __init__(
        self,
        dag: Dag,
        mechanisms: Sequence[Mechanism],
        domains: Sequence[Domain] | None = None,
        names: Sequence[str] | None = None,
    ):
        n = dag.node_count
        if len(mechanisms) != n:
            raise ValidationError(f"need {n} mechanisms, got {len(mechanisms)}")
        if domains is None:
            domains = [Finite(m.size) if isinstance(m, Table) else Real(1) for m in mechanisms]
        if len(domains) != n:
            raise ValidationError(f"need {n} domains, got {len(domains)}")
        self.dag = dag
        self.mechanisms = tuple(mechanisms)
        self.domains = tuple(domains)
        self.names = tuple(names) if names is not None else tuple(f"x{i}" for i in range(n))
        for i in range(n):
            self._check_node(i)

    def _check_node(self, i: int) -> None:
        mech, dom, pa = self.mechanisms[i], self.domains[i], self.dag.parents(i)
        if isinstance(mech, Table):
            if not isinstance(dom, Finite) or dom.size != mech.size:
                raise ValidationError(f"node {i}: table width does not match its domain")
            sizes = []
            for p in pa:
                if not isinstance(self.domains[p], Finite):
                    raise ValidationError(f"node {i}: table parent {p} is not finite")
                sizes.append(self.domains[p].size)
            if tuple(sizes) != mech.parent_sizes:
                raise ValidationError(f"node {i}: table shape {mech.probs.shape} does not match parents {tuple(sizes)}")
        elif isinstance(mech, AdditiveNoise):
            if not isinstance(dom, Real):
                raise ValidationError(f"node {i}: additive mechanism needs a real domain")
            if mech.weights is not None and len(mech.weights) != len(pa):
                raise ValidationError(f"node {i}: {len(mech.weights)} weights for {len(pa)} parents")
            for p in pa:
                pd = self.domains[p]
                if isinstance(pd, Real) and pd.dim != dom.dim:
                    raise ValidationError(f"node {i}: parent {p} has dimension {pd.dim}, expected {dom.dim}")
                if isinstance(pd, Finite) and dom.dim != 1:
                    raise ValidationError(f"node {i}: finite parent {p} feeding a vector node")

    @property
    def node_count(self) -> int:
        return self.dag.node_count

    @property
    def is_finite(self) -> bool:
        return all(isinstance(m, Table) for m in self.mechanisms)

    def noise_width(self, i: int) -> int:
        return self.mechanisms[i].noise_width(self.domains[i])

    def evaluate_node(self, i: int, values: Sequence[np.ndarray], u: np.ndarray, n: int) -> np.ndarray:
        parents = [values[p] for p in self.dag.parents(i)]
        out = self.mechanisms[i](parents, u)
        return self.domains[i].check_array(out, n)


# --------------------------------------------------------------------------- records


@dataclass(frozen=True, eq=False)
class NoiseRecord:
    seed: int | None
    start: int
    u: tuple[np.ndarray, ...]

    @property
    def n(self) -> int:
        return len(self.u[0]) if self.u else 0

    def __eq__(self, other):
        return (
            isinstance(other, NoiseRecord)
            and len(self.u) == len(other.u)
            and all(np.array_equal(a, b) for a, b in zip(self.u, other.u))
        )

    __hash__ = None


@dataclass(frozen=True)
class ImputationPlan:
    """Nodes to impute and the constant each one is forced to."""

    nodes: tuple[int, ...] = ()
    values: tuple = ()

    def __post_init__(self):
        nodes = tuple(int(v) for v in self.nodes)
        values = tuple(self.values)
        if len(nodes) != len(values):
            raise ValidationError("plan needs one value per node")
        if len(set(nodes)) != len(nodes):
            raise ValidationError(f"duplicate nodes in plan {nodes}")
        order = sorted(range(len(nodes)), key=nodes.__getitem__)
        object.__setattr__(self, "nodes", tuple(nodes[k] for k in order))
        object.__setattr__(self, "values", tuple(values[k] for k in order))

    @classmethod
    def from_mapping(cls, mapping: Mapping[int, object]) -> ImputationPlan:
        return cls(tuple(mapping), tuple(mapping.values()))

    @property
    def mask(self) -> int:
        m = 0
        for v in self.nodes:
            m |= 1 << v
        return m

    def as_dict(self) -> dict[int, object]:
        return dict(zip(self.nodes, self.values))

    def checked(self, sem: Sem) -> ImputationPlan:
        vals = []
        for v, x in zip(self.nodes, self.values):
            if not 0 <= v < sem.node_count:
                raise DomainError(f"plan node {v} out of range")
            vals.append(sem.domains[v].check_value(x))
        return ImputationPlan(self.nodes, tuple(vals))

    def __len__(self) -> int:
        return len(self.nodes)


EMPTY_PLAN = ImputationPlan()


@dataclass(frozen=True, eq=False)
class Realization:
    """A batch of ``n`` sample paths plus the noise that produced them.

    ``interventions`` records constants already forced by earlier imputations,
    so a realization of ``do(X; I, x_I)`` carries the mechanisms of the
    imputed process.
    """

    values: tuple[np.ndarray, ...]
    noise: NoiseRecord | None
    interventions: tuple[tuple[int, object], ...] = ()

    @property
    def n(self) -> int:
        return len(self.values[0]) if self.values else 0

    def __getitem__(self, i: int) -> np.ndarray:
        return self.values[i]

    def stack(self) -> np.ndarray:
        """All scalar node values as an ``(n, |V|)`` float matrix."""
        return np.column_stack([np.asarray(v, dtype=float).reshape(self.n, -1) for v in self.values])

    def identical(self, other: Realization) -> bool:
        """Bit-exact equality of values (including dtypes)."""
        return len(self.values) == len(other.values) and all(
            a.dtype == b.dtype and a.shape == b.shape and a.tobytes() == b.tobytes()
            for a, b in zip(self.values, other.values)
        )


def _freeze(arr: np.ndarray) -> np.ndarray:
    arr.setflags(write=False)
    return arr


def draw_noise(sem: Sem, seed: int, n_samples: int, start: int = 0) -> NoiseRecord:
    u = tuple(_freeze(uniforms(seed, i, start, n_samples, sem.noise_width(i))) for i in range(sem.node_count))
    return NoiseRecord(seed, start, u)


def propagate(sem: Sem, noise: NoiseRecord) -> Realization:
    """Evaluate every mechanism in topological order over a fixed noise record."""
    n = noise.n
    values: list = [None] * sem.node_count
    for i in sem.dag.order:
        values[i] = _freeze(sem.evaluate_node(i, values, noise.u[i], n))
    return Realization(tuple(values), noise)


def sample(sem: Sem, seed: int, n_samples: int = 1, start: int = 0) -> Realization:
    return propagate(sem, draw_noise(sem, seed, n_samples, start))


def impute(sem: Sem, base: Realization, plan: ImputationPlan) -> Realization:
    """Return ``do(base; plan)`` without touching ``base``.

    Imputed nodes become constants, their descendants are re-evaluated with the
    base noise record, and every other node is copied unchanged.
    """
    plan = plan.checked(sem)
    if not plan.nodes:
        return base
    if base.noise is None:
        raise DomainError("cannot impute a realization without a noise record")
    forced = dict(base.interventions)
    forced.update(plan.as_dict())
    fresh = plan.as_dict()
    affected = 0
    for v in plan.nodes:
        affected |= sem.dag.descendant_mask(v)
    n = base.n
    values = list(base.values)
    for i in sem.dag.order:
        if i in fresh:
            values[i] = _freeze(sem.domains[i].constant(fresh[i], n))
        elif (affected >> i) & 1 and i not in forced:
            values[i] = _freeze(sem.evaluate_node(i, values, base.noise.u[i], n))
    return Realization(tuple(values), base.noise, tuple(sorted(forced.items())))


# --------------------------------------------------------------------------- expectations


CHUNK = 1 << 16


def _moments(arr: np.ndarray) -> tuple[int, float, float]:
    arr = np.asarray(arr, dtype=float)
    if not np.all(np.isfinite(arr)):
        raise DomainError("system cost returned a non-finite value")
    if arr.size and np.all(arr == arr[0]):
        # constant costs: report the value itself, not a rounded mean
        return len(arr), float(arr[0]), 0.0
    mean = float(arr.mean())
    return len(arr), mean, float(((arr - mean) ** 2).sum())


def _merge(a, b):
    na, ma, sa = a
    nb, mb, sb = b
    n = na + nb
    d = mb - ma
    return n, ma + d * nb / n, sa + sb + d * d * na * nb / n


def base_chunks(sem: Sem, seed: int, n_samples: int, chunk: int = CHUNK) -> list[Realization]:
    """Base realizations for samples ``0 .. n_samples - 1`` split at fixed chunk boundaries."""
    return [sample(sem, seed, min(chunk, n_samples - s), s) for s in range(0, n_samples, chunk)]


def expectation_over(
    sem: Sem,
    bases: Sequence[Realization],
    plan: ImputationPlan,
    g: Callable[[Realization], np.ndarray],
    workers: int = 1,
) -> tuple[float, float]:
    """Mean and standard error of ``g(do(X; plan))`` on pre-drawn base chunks.

    Reusing one list of bases across plans gives common random numbers.
    Chunk moments are merged in index order, so ``workers`` never changes the
    result.
    """
    plan = plan.checked(sem)

    def run(base):
        return _moments(g(impute(sem, base, plan)))

    if workers > 1 and len(bases) > 1:
        with ThreadPoolExecutor(workers) as pool:
            parts = list(pool.map(run, bases))
    else:
        parts = [run(b) for b in bases]
    acc = parts[0]
    for p in parts[1:]:
        acc = _merge(acc, p)
    n, mean, ss = acc
    if n < 2:
        raise ValueError("expectation needs n_samples >= 2")
    return mean, float(np.sqrt(ss / (n - 1) / n))


def expectation(
    sem: Sem,
    plan: ImputationPlan,
    g: Callable[[Realization], np.ndarray],
    n_samples: int,
    seed: int,
    workers: int = 1,
    chunk: int = CHUNK,
) -> tuple[float, float]:
    """Monte-Carlo mean and standard error of ``g(do(X; plan))``.

    ``g`` maps a batched realization to a length-``n`` array of costs.
    """
    if n_samples < 2:
        raise ValueError("expectation needs n_samples >= 2")
    return expectation_over(sem, base_chunks(sem, seed, n_samples, chunk), plan, g, workers)


def exact_support(sem: Sem, plan: ImputationPlan = EMPTY_PLAN) -> tuple[np.ndarray, np.ndarray]:
    """All reachable value tuples of a finite SEM and their probabilities.

    Returns ``(states, probs)`` with ``states`` of shape ``(k, |V|)``; rows are
    ordered lexicographically by node index.
    """
    if not sem.is_finite:
        raise DomainError("exact enumeration needs table mechanisms on every node")
    plan = plan.checked(sem)
    size = 1
    for d in sem.domains:
        size *= d.size
        if size > EXACT_LIMIT:
            raise TooLargeError(f"joint state space exceeds {EXACT_LIMIT}")
    forced = plan.as_dict()
    V = sem.node_count
    states = np.zeros((1, V), dtype=np.int64)
    probs = np.ones(1)
    for i in sem.dag.order:
        if i in forced:
            states[:, i] = forced[i]
            continue
        table = sem.mechanisms[i]
        pa = sem.dag.parents(i)
        rows = table.probs[tuple(states[:, p] for p in pa)] if pa else np.broadcast_to(table.probs, (len(probs), table.size))
        k = table.size
        states = np.repeat(states, k, axis=0)
        states[:, i] = np.tile(np.arange(k), len(probs))
        probs = (probs[:, None] * rows).ravel()
        keep = probs > 0
        states, probs = states[keep], probs[keep]
    order = np.lexsort(states.T[::-1])
    return states[order], probs[order]


def exact_joint(sem: Sem, plan: ImputationPlan = EMPTY_PLAN) -> dict[tuple[int, ...], float]:
    states, probs = exact_support(sem, plan)
    return {tuple(int(v) for v in s): float(p) for s, p in zip(states, probs)}


def exact_expectation(sem: Sem, plan: ImputationPlan, g: Callable[[Realization], np.ndarray]) -> float:
    states, probs = exact_support(sem, plan)
    batch = Realization(tuple(_freeze(states[:, i].copy()) for i in range(sem.node_count)), None)
    costs = np.asarray(g(batch), dtype=float)
    if not np.all(np.isfinite(costs)):
        raise DomainError("system cost returned a non-finite value")
    return float(np.dot(probs, costs))


def marginal(joint: Mapping[tuple[int, ...], float], nodes: Sequence[int]) -> dict[tuple[int, ...], float]:
    out: dict[tuple[int, ...], float] = {}
    for x, p in joint.items():
        key = tuple(x[v] for v in nodes)
        out[key] = out.get(key, 0.0) + p
    return out


def factorized(joint: Mapping[tuple[int, ...], float], dag: Dag, sizes: Sequence[int]) -> dict[tuple[int, ...], float]:
    """Rebuild a joint as the product of the conditionals ``P(X_i | pa(X_i))`` read off ``joint``."""
    conds = []
    for i in range(dag.node_count):
        pa = list(dag.parents(i))
        fam = marginal(joint, pa + [i])
        par = marginal(joint, pa)
        conds.append((pa, fam, par))
    out = {}
    for x in itertools.product(*(range(s) for s in sizes)):
        p = 1.0
        for i, (pa, fam, par) in enumerate(conds):
            pk = tuple(x[v] for v in pa)
            denom = par.get(pk, 0.0)
            if denom == 0.0:
                p = 0.0
                break
            p *= fam.get(pk + (x[i],), 0.0) / denom
        if p > 0.0:
            out[x] = p
    return out


def total_variation(p: Mapping, q: Mapping) -> float:
    keys = set(p) | set(q)
    return 0.5 * sum(abs(p.get(k, 0.0) - q.get(k, 0.0)) for k in keys)


def squared_deviation(nodes: Iterable[int], targets: Iterable[float] | None = None) -> Callable[[Realization], np.ndarray]:
    """System cost ``sum_k ||Y_k - t_k||^2`` over the given nodes."""
    nodes = list(nodes)
    targets = list(targets) if targets is not None else [0.0] * len(nodes)

    def g(y: Realization) -> np.ndarray:
        total = np.zeros(y.n)
        for v, t in zip(nodes, targets):
            d = np.asarray(y[v], dtype=float) - np.asarray(t, dtype=float)
            total += (d * d).reshape(y.n, -1).sum(axis=1)
        return total

    return g
