"""Undirected communication graph and spanning-tree path-load quantities.

Nodes are 0-based here; scenario files use 1-based indices and convert on load.

For a spanning tree rooted at ``r``, ``d(i)`` is the depth of ``i`` and an edge
``E`` is *used* by ``i`` when the root path of ``i`` crosses it. The tree cost is
``max_E sum_i [i uses E] d(i)`` and ``W`` is its minimum over all roots and all
spanning trees.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass
from typing import Iterable, Iterator

from .errors import GraphSizeError

MAX_ENUM_NODES = 12


@dataclass(frozen=True)
class CommGraph:
    n: int
    edges: frozenset  # of (i, j) with i < j

    def __init__(self, n: int, edges: Iterable[tuple[int, int]]):
        norm = set()
        for i, j in edges:
            i, j = int(i), int(j)
            if i == j:
                raise ValueError(f"self-loop at node {i}")
            if not (0 <= i < n and 0 <= j < n):
                raise ValueError(f"edge ({i}, {j}) outside node range [0, {n})")
            norm.add((min(i, j), max(i, j)))
        object.__setattr__(self, "n", int(n))
        object.__setattr__(self, "edges", frozenset(norm))

    def sorted_edges(self) -> list[tuple[int, int]]:
        return sorted(self.edges)

    def adjacency(self) -> list[list[int]]:
        adj: list[list[int]] = [[] for _ in range(self.n)]
        for i, j in self.sorted_edges():
            adj[i].append(j)
            adj[j].append(i)
        return adj


def neighbors(g: CommGraph, i: int) -> frozenset:
    return frozenset(j for e in g.edges if i in e for j in e if j != i)


def _bfs_depths(adj: list[list[int]], src: int) -> list[int]:
    dist = [-1] * len(adj)
    dist[src] = 0
    queue = deque([src])
    while queue:
        u = queue.popleft()
        for v in adj[u]:
            if dist[v] < 0:
                dist[v] = dist[u] + 1
                queue.append(v)
    return dist


def is_connected(g: CommGraph) -> bool:
    if g.n == 0:
        return False
    return all(d >= 0 for d in _bfs_depths(g.adjacency(), 0))


def diameter(g: CommGraph) -> int:
    """Longest shortest-path length; raises on a disconnected graph."""
    adj = g.adjacency()
    best = 0
    for s in range(g.n):
        dist = _bfs_depths(adj, s)
        if min(dist) < 0:
            raise ValueError("diameter of a disconnected graph is infinite")
        best = max(best, max(dist))
    return best


@dataclass(frozen=True)
class SpanningTree:
    """Rooted tree: ``parent[root] == -1``; edges point away from the root."""

    root: int
    parent: tuple[int, ...]

    @property
    def n(self) -> int:
        return len(self.parent)

    def edges(self) -> list[tuple[int, int]]:
        return [(p, v) for v, p in enumerate(self.parent) if p >= 0]

    def depths(self) -> list[int]:
        depth = [-1] * self.n
        depth[self.root] = 0

        def resolve(v: int) -> int:
            chain = []
            while depth[v] < 0:
                chain.append(v)
                v = self.parent[v]
            d = depth[v]
            for u in reversed(chain):
                d += 1
                depth[u] = d
            return depth[chain[0]] if chain else d

        for v in range(self.n):
            resolve(v)
        return depth

    def height(self) -> int:
        return max(self.depths())


def _orient(n: int, tree_edges: list[tuple[int, int]], root: int) -> SpanningTree:
    adj: list[list[int]] = [[] for _ in range(n)]
    for i, j in tree_edges:
        adj[i].append(j)
        adj[j].append(i)
    parent = [-2] * n
    parent[root] = -1
    queue = deque([root])
    while queue:
        u = queue.popleft()
        for v in adj[u]:
            if parent[v] == -2:
                parent[v] = u
                queue.append(v)
    return SpanningTree(root, tuple(parent))


def _find(comp: list[int], x: int) -> int:
    while comp[x] != x:
        x = comp[x]
    return x


def _undirected_trees(g: CommGraph) -> Iterator[list[tuple[int, int]]]:
    """Every spanning tree once, via include/exclude recursion over sorted edges."""
    if g.n > MAX_ENUM_NODES:
        raise GraphSizeError(f"spanning-tree enumeration limited to n <= {MAX_ENUM_NODES}, got {g.n}")
    edges = g.sorted_edges()
    n = g.n
    if n == 1:
        yield []
        return

    def connectable(chosen: list[tuple[int, int]], rest: list[tuple[int, int]]) -> bool:
        comp = list(range(n))
        for i, j in chosen + rest:
            a, b = _find(comp, i), _find(comp, j)
            if a != b:
                comp[a] = b
        r = _find(comp, 0)
        return all(_find(comp, v) == r for v in range(n))

    def rec(k: int, chosen: list[tuple[int, int]], comp: list[int]):
        if len(chosen) == n - 1:
            yield list(chosen)
            return
        if len(edges) - k < n - 1 - len(chosen):
            return
        i, j = edges[k]
        a, b = _find(comp, i), _find(comp, j)
        if a != b:
            comp2 = list(comp)
            comp2[a] = b
            chosen.append((i, j))
            yield from rec(k + 1, chosen, comp2)
            chosen.pop()
        if connectable(chosen, edges[k + 1:]):
            yield from rec(k + 1, chosen, comp)

    if not connectable([], edges):
        return
    yield from rec(0, [], list(range(n)))


def enumerate_spanning_trees(g: CommGraph, root: int) -> Iterator[SpanningTree]:
    if not 0 <= root < g.n:
        raise ValueError(f"root {root} outside [0, {g.n})")
    for tree_edges in _undirected_trees(g):
        yield _orient(g.n, tree_edges, root)


def tree_cost(t: SpanningTree) -> int:
    depth = t.depths()
    # load on edge (parent(v), v) = sum of depths over the subtree of v
    load = list(depth)
    for v in sorted(range(t.n), key=lambda u: -depth[u]):
        p = t.parent[v]
        if p >= 0 and p != t.root:
            load[p] += load[v]
    return max((load[v] for v in range(t.n) if v != t.root), default=0)


def compute_W(g: CommGraph) -> tuple[int, int, SpanningTree]:
    """Return ``(W, root, tree)`` with the first minimizer found."""
    if g.n > MAX_ENUM_NODES:
        raise GraphSizeError(f"W needs n <= {MAX_ENUM_NODES}, got {g.n}")
    if not is_connected(g):
        raise ValueError("W is defined only for connected graphs")
    best: tuple[int, int, SpanningTree] | None = None
    trees = list(_undirected_trees(g))
    for root in range(g.n):
        for tree_edges in trees:
            t = _orient(g.n, tree_edges, root)
            c = tree_cost(t)
            if best is None or c < best[0]:
                best = (c, root, t)
    assert best is not None
    return best
