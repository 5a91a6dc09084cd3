"""Set functions on a small ground set, submodularity checks and optimizers.

Subsets are bitmasks: element ``i`` is in the set iff bit ``i`` is set. Ties
between optimal sets are always broken by smaller cardinality, then by
smaller bitmask value.
"""

from __future__ import annotations

import math
import threading
from collections.abc import Callable, Iterable
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .errors import DomainError, TooLargeError, ValidationError
from .graph import mask_to_nodes, nodes_to_mask

MAX_GROUND = 30
CHECK_LIMIT = 12
ENUM_LIMIT = 20


class SetFunction:
    """Memoized oracle ``F: bitmask -> float`` on ``m`` elements.

    The cache is safe to share between threads: reads are lock-free and
    insertions happen under a lock.
    """

    def __init__(self, m: int, oracle: Callable[[int], float], name: str = "F"):
        if not 0 <= m <= MAX_GROUND:
            raise TooLargeError(f"ground set size {m} outside [0, {MAX_GROUND}]")
        self.m = m
        self.name = name
        self._oracle = oracle
        self._cache: dict[int, float] = {}
        self._lock = threading.Lock()
        self._table: np.ndarray | None = None

    @classmethod
    def from_table(cls, values: Iterable[float], name: str = "F") -> SetFunction:
        vals = np.asarray(list(values), dtype=float)
        m = int(round(math.log2(len(vals)))) if len(vals) else -1
        if m < 0 or 1 << m != len(vals):
            raise ValidationError(f"table length {len(vals)} is not a power of two")
        vals.setflags(write=False)
        f = cls(m, lambda s: float(vals[s]), name)
        f._table = vals
        return f

    @classmethod
    def modular(cls, weights: Iterable[float], offset: float = 0.0, name: str = "modular") -> SetFunction:
        w = [float(x) for x in weights]
        return cls(len(w), lambda s: offset + sum(w[i] for i in mask_to_nodes(s)), name)

    @classmethod
    def coverage(cls, sets: Iterable[Iterable[int]], weights: Iterable[float], name: str = "coverage") -> SetFunction:
        """Weighted coverage ``F(I) = sum of weights of items covered by the sets in I``."""
        covers = [nodes_to_mask(s) for s in sets]
        w = [float(x) for x in weights]

        def oracle(s):
            items = 0
            for i in mask_to_nodes(s):
                items |= covers[i]
            return sum(w[k] for k in mask_to_nodes(items))

        return cls(len(covers), oracle, name)

    def __call__(self, subset: int | Iterable[int]) -> float:
        s = subset if isinstance(subset, (int, np.integer)) else nodes_to_mask(subset)
        s = int(s)
        if s >> self.m:
            raise DomainError(f"subset {s:#b} outside ground set of size {self.m}")
        try:
            return self._cache[s]
        except KeyError:
            pass
        value = float(self._oracle(s))
        with self._lock:
            self._cache.setdefault(s, value)
        return self._cache[s]

    def table(self) -> np.ndarray:
        """Values on all ``2**m`` subsets, indexed by bitmask."""
        if self._table is None:
            if self.m > ENUM_LIMIT:
                raise TooLargeError(f"cannot tabulate a set function on {self.m} > {ENUM_LIMIT} elements")
            t = np.array([self(s) for s in range(1 << self.m)])
            t.setflags(write=False)
            self._table = t
        return self._table

    def __add__(self, other: SetFunction) -> SetFunction:
        _same_ground(self, other)
        return SetFunction(self.m, lambda s: self(s) + other(s), f"({self.name} + {other.name})")

    def __sub__(self, other: SetFunction) -> SetFunction:
        _same_ground(self, other)
        return SetFunction(self.m, lambda s: self(s) - other(s), f"({self.name} - {other.name})")

    def __neg__(self) -> SetFunction:
        return SetFunction(self.m, lambda s: -self(s), f"-{self.name}")

    def __repr__(self) -> str:
        return f"SetFunction(m={self.m}, name={self.name!r})"


def _same_ground(a: SetFunction, b: SetFunction) -> None:
    if a.m != b.m:
        raise ValidationError(f"ground set sizes differ: {a.m} vs {b.m}")


def popcounts(m: int) -> np.ndarray:
    masks = np.arange(1 << m, dtype=np.int64)
    counts = np.zeros(1 << m, dtype=np.int64)
    for b in range(m):
        counts += (masks >> b) & 1
    return counts


@dataclass(frozen=True)
class ConstraintOracle:
    """Feasible family ``S`` of subsets for constrained maximization."""

    kind: str
    k: int | None = None
    members: frozenset[int] | None = None
    predicate: Callable[[int], bool] | None = None

    def __post_init__(self):
        if self.kind not in ("cardinality", "explicit", "custom", "none"):
            raise ValidationError(f"unknown constraint kind {self.kind!r}")
        if 0 not in self:
            raise ValidationError("the empty set must be feasible")

    @classmethod
    def cardinality(cls, k: int) -> ConstraintOracle:
        if k < 0:
            raise ValidationError("cardinality bound must be non-negative")
        return cls("cardinality", k=k)

    @classmethod
    def explicit(cls, subsets: Iterable[Iterable[int] | int]) -> ConstraintOracle:
        return cls("explicit", members=frozenset(s if isinstance(s, int) else nodes_to_mask(s) for s in subsets))

    @classmethod
    def custom(cls, predicate: Callable[[int], bool]) -> ConstraintOracle:
        return cls("custom", predicate=predicate)

    @classmethod
    def unconstrained(cls) -> ConstraintOracle:
        return cls("none")

    def __contains__(self, mask: int) -> bool:
        if self.kind == "cardinality":
            return bin(mask).count("1") <= self.k
        if self.kind == "explicit":
            return mask in self.members
        if self.kind == "custom":
            return bool(self.predicate(mask))
        return True


UNCONSTRAINED = ConstraintOracle.unconstrained()


class Check(NamedTuple):
    """Outcome of an exhaustive property check; falsy when a witness was found."""

    holds: bool
    witness: tuple | None = None

    def __bool__(self) -> bool:
        return self.holds


def _checkable(F: SetFunction) -> np.ndarray:
    if F.m > CHECK_LIMIT:
        raise TooLargeError(f"exhaustive checks are limited to {CHECK_LIMIT} elements, got {F.m}")
    return np.asarray(F.table(), dtype=float)


def _submask_min(arr: np.ndarray, m: int) -> np.ndarray:
    out = arr.copy()
    for b in range(m):
        view = out.reshape(-1, 2, 1 << b)
        np.minimum(view[:, 1, :], view[:, 0, :], out=view[:, 1, :])
    return out


def is_submodular(F: SetFunction, slack: float = 1e-9) -> Check:
    """Check ``F(A + i) - F(A) >= F(B + i) - F(B) - slack`` for all ``A ⊆ B``, ``i ∉ B``.

    All nested pairs are covered: for each ``i`` the smallest marginal over the
    subsets of every ``B`` is computed with a subset-minimum sweep. The witness
    is ``(A, B, i)`` with ``A`` and ``B`` as sorted tuples; it is the first
    violation in the order ``i``, then ``B``, then ``A`` (ascending bitmasks).
    """
    vals = _checkable(F)
    m = F.m
    masks = np.arange(1 << m)
    for i in range(m):
        bit = 1 << i
        free = (masks & bit) == 0
        gain = np.full(1 << m, np.inf)
        gain[free] = vals[masks[free] | bit] - vals[masks[free]]
        low = _submask_min(gain, m)
        bad = np.flatnonzero(free & (low < gain - slack))
        if bad.size:
            B = int(bad[0])
            target = gain[B] - slack
            A = 0
            while True:
                if gain[A] < target:
                    break
                A = ((A | ~B) + 1) & B  # next submask of B in ascending order
            return Check(False, (tuple(mask_to_nodes(A)), tuple(mask_to_nodes(B)), i))
    return Check(True)


def is_nondecreasing(F: SetFunction, slack: float = 1e-9) -> Check:
    """Check ``F(S) <= F(S + i) + slack`` for every ``S`` and ``i ∉ S``; witness ``(S, S + i)``."""
    vals = _checkable(F)
    m = F.m
    masks = np.arange(1 << m)
    first = None
    for i in range(m):
        bit = 1 << i
        free = masks[(masks & bit) == 0]
        bad = free[vals[free | bit] < vals[free] - slack]
        if bad.size and (first is None or bad[0] < first[0]):
            first = (int(bad[0]), i)
    if first is None:
        return Check(True)
    S, i = first
    return Check(False, (tuple(mask_to_nodes(S)), tuple(mask_to_nodes(S | (1 << i)))))


def _level_sets(z: np.ndarray) -> tuple[list[int], list[float]]:
    """Level-set chain of ``z`` and the λ-lengths on which each set is active."""
    ts = np.unique(np.concatenate(([0.0, 1.0], z)))
    sets, widths = [], []
    for lo, hi in zip(ts[:-1], ts[1:]):
        sets.append(nodes_to_mask(np.flatnonzero(z > lo)))
        widths.append(hi - lo)
    return sets, widths


def lovasz_extension(F: SetFunction, z) -> float:
    """Exact value of ``E_λ F({i : z_i > λ})`` for ``λ ~ U[0, 1]``."""
    z = np.asarray(z, dtype=float)
    if z.shape != (F.m,):
        raise DomainError(f"z must have shape ({F.m},), got {z.shape}")
    if np.any(~np.isfinite(z)) or np.any(z < 0) or np.any(z > 1):
        raise DomainError("z must lie in [0, 1]^m")
    sets, widths = _level_sets(z)
    return float(sum(w * F(s) for s, w in zip(sets, widths)))


def lovasz_extension_many(F: SetFunction, Z) -> np.ndarray:
    """Extension at each row of ``Z`` via the sorted chain.

    ``f(z) = F(0)(1 - z_(1)) + sum_k F(S_k)(z_(k) - z_(k+1)) + F(V) z_(m)``
    with ``z`` sorted in decreasing order and ``S_k`` its top ``k`` indices.
    """
    Z = np.atleast_2d(np.asarray(Z, dtype=float))
    if Z.shape[1] != F.m:
        raise DomainError(f"rows must have length {F.m}, got {Z.shape[1]}")
    if np.any(~np.isfinite(Z)) or np.any(Z < 0) or np.any(Z > 1):
        raise DomainError("z must lie in [0, 1]^m")
    tab = np.asarray(F.table(), dtype=float)
    order = np.argsort(-Z, axis=1, kind="stable")
    zs = np.take_along_axis(Z, order, axis=1)
    chain = np.concatenate([np.zeros((len(Z), 1), dtype=np.int64), np.cumsum(np.left_shift(1, order), axis=1)], axis=1)
    bounds = np.concatenate([np.ones((len(Z), 1)), zs, np.zeros((len(Z), 1))], axis=1)
    widths = bounds[:, :-1] - bounds[:, 1:]
    return (tab[chain] * widths).sum(axis=1)


def lovasz_subgradient(F: SetFunction, z: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Greedy subgradient of the extension at ``z``.

    Also returns the chain of sets it visits (sorted by decreasing ``z``, ties
    by index) and ``F`` on that chain.
    """
    order = np.lexsort((np.arange(F.m), -z))
    chain = np.concatenate(([0], np.cumsum(np.left_shift(1, order))))
    if F._table is not None:
        vals = F._table[chain]
    else:
        vals = np.array([F(int(s)) for s in chain])
    grad = np.empty(F.m)
    grad[order] = np.diff(vals)
    return grad, chain, vals


def _better(cand: tuple[float, int], best: tuple[float, int] | None) -> bool:
    if best is None:
        return True
    (v, s), (bv, bs) = cand, best
    if v != bv:
        return v < bv
    pc, bpc = bin(s).count("1"), bin(bs).count("1")
    return pc < bpc if pc != bpc else s < bs


def _best_of(sets, vals, best):
    # chain sets are nested, so among equal values the first has fewest elements
    k = int(np.argmin(vals))
    cand = (float(vals[k]), int(sets[k]))
    return cand if _better(cand, best) else best


def minimize_single_value(
    F: SetFunction, iterations: int = 5000, start: float = 0.5
) -> tuple[tuple[int, ...], float]:
    """Minimize a submodular ``F`` through its convex Lovász relaxation.

    Runs projected subgradient descent on ``[0, 1]^m`` from ``z = start``. The
    step at iteration ``t`` is ``1 / sqrt(t)`` on ``F`` rescaled by its range
    estimate (spread of ``F`` over the empty set, the full set and the
    singletons). Every set on a subgradient chain is a candidate, as are the
    level sets of the final iterate, the empty set and the full set; the best
    candidate is returned.
    """
    m = F.m
    full = (1 << m) - 1
    best = None
    for s in (0, full):
        if _better((F(s), s), best):
            best = (F(s), s)
    if m == 0:
        return (), best[0]
    probe = [F(0), F(full)] + [F(1 << i) for i in range(m)]
    scale = max(probe) - min(probe)
    scale = scale if scale > 0 else 1.0
    z = np.full(m, float(start))
    for t in range(1, iterations + 1):
        grad, chain, vals = lovasz_subgradient(F, z)
        best = _best_of(chain, vals, best)
        z = np.clip(z - grad / (scale * math.sqrt(t)), 0.0, 1.0)
    levels = _level_sets(z)[0]
    best = _best_of(levels, [F(s) for s in levels], best)
    return tuple(mask_to_nodes(best[1])), best[0]


def greedy_maximize(F: SetFunction, constraint: ConstraintOracle = UNCONSTRAINED) -> tuple[int, ...]:
    """Greedy ascent: keep adding the feasible element with the largest gain while that gain is >= 0."""
    current = 0
    value = F(0)
    while True:
        best_i, best_val = None, -math.inf
        for i in range(F.m):
            cand = current | (1 << i)
            if cand == current or cand not in constraint:
                continue
            v = F(cand)
            if v > best_val:
                best_i, best_val = i, v
        if best_i is None or best_val - value < 0:
            return tuple(mask_to_nodes(current))
        current |= 1 << best_i
        value = best_val


def brute_force_extremum(
    F: SetFunction, constraint: ConstraintOracle = UNCONSTRAINED, direction: str = "min"
) -> tuple[tuple[int, ...], float]:
    if direction not in ("min", "max"):
        raise ValueError("direction must be 'min' or 'max'")
    if F.m > ENUM_LIMIT:
        raise TooLargeError(f"enumeration is limited to {ENUM_LIMIT} elements, got {F.m}")
    vals = np.asarray(F.table(), dtype=float)
    masks = np.arange(1 << F.m)
    if constraint.kind == "none":
        feasible = np.ones(len(masks), dtype=bool)
    elif constraint.kind == "cardinality":
        feasible = popcounts(F.m) <= constraint.k
    else:
        feasible = np.fromiter((int(s) in constraint for s in masks), dtype=bool, count=len(masks))
    score = vals if direction == "min" else -vals
    score = np.where(feasible, score, np.inf)
    target = score.min()
    ties = masks[score == target]
    pcs = popcounts(F.m)[ties]
    s = int(ties[np.lexsort((ties, pcs))[0]])
    return tuple(mask_to_nodes(s)), float(vals[s])
