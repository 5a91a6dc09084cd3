"""Finite directed acyclic graphs over dense integer node ids."""

from __future__ import annotations

import heapq
from collections.abc import Iterable

from .errors import BadEdgeError, CycleError


class Dag:
    """Validated, immutable DAG on nodes ``0 .. node_count - 1``.

    Construction checks edge ranges, rejects self-loops and cycles, and fixes a
    topological order (Kahn's algorithm, lowest index first). Parent lists are
    sorted ascending; that order is the argument order of node mechanisms.
    """

    __slots__ = ("node_count", "edges", "order", "_parents", "_children", "_anc", "_desc", "_pos")

    def __init__(self, node_count: int, edges: Iterable[tuple[int, int]] = ()):
        if node_count < 0:
            raise BadEdgeError(f"node_count must be non-negative, got {node_count}")
        edge_set = set()
        for u, v in edges:
            u, v = int(u), int(v)
            if not (0 <= u < node_count and 0 <= v < node_count):
                raise BadEdgeError(f"edge ({u}, {v}) references a node outside [0, {node_count})")
            if u == v:
                raise CycleError([u, u])
            edge_set.add((u, v))
        self.node_count = node_count
        self.edges = frozenset(edge_set)

        parents = [[] for _ in range(node_count)]
        children = [[] for _ in range(node_count)]
        for u, v in sorted(edge_set):
            parents[v].append(u)
            children[u].append(v)
        self._parents = tuple(tuple(p) for p in parents)
        self._children = tuple(tuple(c) for c in children)

        self.order = self._kahn()
        self._pos = {v: k for k, v in enumerate(self.order)}

        anc = [0] * node_count
        for v in self.order:
            m = 0
            for p in self._parents[v]:
                m |= anc[p] | (1 << p)
            anc[v] = m
        desc = [0] * node_count
        for v in reversed(self.order):
            m = 0
            for c in self._children[v]:
                m |= desc[c] | (1 << c)
            desc[v] = m
        self._anc = tuple(anc)
        self._desc = tuple(desc)

    def _kahn(self) -> tuple[int, ...]:
        indeg = [len(p) for p in self._parents]
        heap = [v for v in range(self.node_count) if indeg[v] == 0]
        heapq.heapify(heap)
        order = []
        while heap:
            v = heapq.heappop(heap)
            order.append(v)
            for c in self._children[v]:
                indeg[c] -= 1
                if indeg[c] == 0:
                    heapq.heappush(heap, c)
        if len(order) < self.node_count:
            raise CycleError(self._find_cycle({v for v in range(self.node_count) if indeg[v] > 0}))
        return tuple(order)

    def _find_cycle(self, remaining: set[int]) -> list[int]:
        # every leftover node has a leftover parent, so walking parents must revisit
        v = min(remaining)
        seen: dict[int, int] = {}
        path = []
        while v not in seen:
            seen[v] = len(path)
            path.append(v)
            v = min(p for p in self._parents[v] if p in remaining)
        cycle = path[seen[v]:]
        cycle.reverse()
        return cycle + [cycle[0]]

    def __repr__(self) -> str:
        return f"Dag(node_count={self.node_count}, edges={sorted(self.edges)})"

    def __eq__(self, other) -> bool:
        return isinstance(other, Dag) and self.node_count == other.node_count and self.edges == other.edges

    def __hash__(self) -> int:
        return hash((self.node_count, self.edges))

    def _check(self, i: int) -> None:
        if not 0 <= i < self.node_count:
            raise IndexError(f"node {i} out of range [0, {self.node_count})")

    def parents(self, i: int) -> tuple[int, ...]:
        self._check(i)
        return self._parents[i]

    def children(self, i: int) -> tuple[int, ...]:
        self._check(i)
        return self._children[i]

    def position(self, i: int) -> int:
        return self._pos[i]

    def ancestor_mask(self, i: int) -> int:
        self._check(i)
        return self._anc[i]

    def descendant_mask(self, i: int) -> int:
        self._check(i)
        return self._desc[i]

    def ancestors(self, nodes: int | Iterable[int]) -> frozenset[int]:
        """Ancestors of a node, or the union of ancestors over a set of nodes."""
        return frozenset(mask_to_nodes(self._union(self._anc, nodes)))

    def descendants(self, nodes: int | Iterable[int]) -> frozenset[int]:
        return frozenset(mask_to_nodes(self._union(self._desc, nodes)))

    def _union(self, table, nodes) -> int:
        if isinstance(nodes, int):
            self._check(nodes)
            return table[nodes]
        m = 0
        for v in nodes:
            self._check(v)
            m |= table[v]
        return m

    def path_count(self, j: int, i: int) -> int:
        """Number of directed paths (at least one edge) from ``j`` to ``i``."""
        self._check(j)
        self._check(i)
        if not (self._desc[j] >> i) & 1:
            return 0
        counts = [0] * self.node_count
        counts[j] = 1
        for v in self.order[self._pos[j] + 1 : self._pos[i] + 1]:
            counts[v] = sum(counts[p] for p in self._parents[v])
        return counts[i]

    def unique_path_to(self, j: int, i: int) -> bool:
        return self.path_count(j, i) == 1


def validate(node_count: int, edges: Iterable[tuple[int, int]]) -> Dag:
    return Dag(node_count, edges)


def mask_to_nodes(mask: int) -> list[int]:
    out = []
    k = 0
    while mask:
        if mask & 1:
            out.append(k)
        mask >>= 1
        k += 1
    return out


def nodes_to_mask(nodes: Iterable[int]) -> int:
    m = 0
    for v in nodes:
        m |= 1 << int(v)
    return m
