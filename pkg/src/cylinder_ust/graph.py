"""Cylindrical graphs C_n x P_m, their sink variant, and forest contraction.

Vertices are dense integers: cell ``(i, j)`` is ``j * n + i`` and the sink,
when present, is ``n * m``. Edges carry integer ids:

* ring edge ``{(i, j), (i+1, j)}``  -> ``j * n + i``
* path edge ``{(i, j), (i, j+1)}``  -> ``n * m + j * n + i``
* sink edge to ``(i, 0)``           -> ``n * m + n * (m - 1) + i``
* sink edge to ``(i, m-1)``         -> ``n * m + n * (m - 1) + n + i``

For ``m = 1`` both sink edges of a cell exist, so every cell of a sink
graph has degree 4 regardless of ``m``.

Neighbour lists use a fixed order: ring successor, ring predecessor,
path right (``j + 1``), path left (``j - 1``), sink. The sink lists ``R_0``
then ``R_{m-1}``.
"""

from __future__ import annotations

from collections import Counter

import numpy as np


class GraphError(ValueError):
    pass


class CylinderGraph:
    """Immutable description of G_{n,m}, optionally with a sink."""

    def __init__(self, n: int, m: int, has_sink: bool = False):
        if int(n) != n or n < 3:
            raise GraphError(f"circumference n must be an integer >= 3, got {n!r}")
        if int(m) != m or m < 1:
            raise GraphError(f"length m must be an integer >= 1, got {m!r}")
        self.n = int(n)
        self.m = int(m)
        self.has_sink = bool(has_sink)
        self.num_cells = self.n * self.m
        self.num_vertices = self.num_cells + (1 if self.has_sink else 0)
        self.sink = self.num_cells if self.has_sink else None
        self.edges = self._edge_array()
        self.num_edges = len(self.edges)
        self.offsets, self.targets, self.edge_ids = self._csr()
        for arr in (self.edges, self.offsets, self.targets, self.edge_ids):
            arr.setflags(write=False)

    def __repr__(self):
        return f"CylinderGraph(n={self.n}, m={self.m}, has_sink={self.has_sink})"

    def __eq__(self, other):
        return isinstance(other, CylinderGraph) and (self.n, self.m, self.has_sink) == (
            other.n, other.m, other.has_sink)

    def __hash__(self):
        return hash((self.n, self.m, self.has_sink))

    # vertex encoding

    def encode(self, i: int, j: int) -> int:
        if not (0 <= j < self.m):
            raise GraphError(f"ring index {j} outside 0..{self.m - 1}")
        return j * self.n + (i % self.n)

    def decode(self, v: int):
        """``(i, j)`` for a cell, ``None`` for the sink."""
        self._check_vertex(v)
        if v == self.sink:
            return None
        return (v % self.n, v // self.n)

    def ring_index(self, v: int):
        self._check_vertex(v)
        if v == self.sink:
            return None
        return v // self.n

    def ring(self, k: int) -> np.ndarray:
        return np.arange(k * self.n, (k + 1) * self.n)

    def _check_vertex(self, v):
        if not (0 <= v < self.num_vertices) or int(v) != v:
            raise GraphError(f"unknown vertex {v!r} in {self!r}")

    # adjacency

    def neighbors(self, v: int) -> list[int]:
        self._check_vertex(v)
        return self.targets[self.offsets[v]:self.offsets[v + 1]].tolist()

    def incident_edges(self, v: int) -> list[int]:
        self._check_vertex(v)
        return self.edge_ids[self.offsets[v]:self.offsets[v + 1]].tolist()

    def degree(self, v: int) -> int:
        self._check_vertex(v)
        return int(self.offsets[v + 1] - self.offsets[v])

    def degrees(self) -> np.ndarray:
        return np.diff(self.offsets)

    def edge_kind(self, e: int) -> str:
        nm = self.num_cells
        if e < nm:
            return "ring"
        if e < 2 * nm - self.n:
            return "path"
        if e < 2 * nm:
            return "sink-left"
        return "sink-right"

    def _edge_array(self) -> np.ndarray:
        n, m = self.n, self.m
        i = np.arange(n)
        rows = []
        for j in range(m):
            rows.append(np.stack([j * n + i, j * n + (i + 1) % n], axis=1))
        for j in range(m - 1):
            rows.append(np.stack([j * n + i, (j + 1) * n + i], axis=1))
        if self.has_sink:
            s = np.full(n, self.sink)
            rows.append(np.stack([s, i], axis=1))
            rows.append(np.stack([s, (m - 1) * n + i], axis=1))
        return np.concatenate(rows).astype(np.int64)

    def _csr(self):
        n, m, nm = self.n, self.m, self.num_cells
        sink_left = nm + n * (m - 1)
        adj = []
        for v in range(nm):
            i, j = v % n, v // n
            row = [(j * n + (i + 1) % n, j * n + i),
                   (j * n + (i - 1) % n, j * n + (i - 1) % n)]
            if j < m - 1:
                row.append((v + n, nm + j * n + i))
            if j > 0:
                row.append((v - n, nm + (j - 1) * n + i))
            if self.has_sink:
                if j == 0:
                    row.append((self.sink, sink_left + i))
                if j == m - 1:
                    row.append((self.sink, sink_left + n + i))
            adj.append(row)
        if self.has_sink:
            adj.append([(i, sink_left + i) for i in range(n)]
                       + [((m - 1) * n + i, sink_left + n + i) for i in range(n)])
        offsets = np.zeros(self.num_vertices + 1, dtype=np.int64)
        offsets[1:] = np.cumsum([len(r) for r in adj])
        flat = [pair for r in adj for pair in r]
        targets = np.array([p[0] for p in flat], dtype=np.int64)
        edge_ids = np.array([p[1] for p in flat], dtype=np.int64)
        return offsets, targets, edge_ids

    def edge_pair(self, e: int) -> tuple[int, int]:
        u, v = self.edges[e]
        return (int(min(u, v)), int(max(u, v)))

    def info(self) -> dict:
        hist = Counter(self.degrees().tolist())
        return {
            "n": self.n,
            "m": self.m,
            "sink": self.has_sink,
            "vertices": self.num_vertices,
            "edges": self.num_edges,
            "degree_histogram": {str(d): hist[d] for d in sorted(hist)},
        }


def build(n: int, m: int, with_sink: bool = False) -> CylinderGraph:
    return CylinderGraph(n, m, with_sink)


def neighbors(g: CylinderGraph, v: int) -> list[int]:
    return g.neighbors(v)


def ring_index(g: CylinderGraph, v: int):
    return g.ring_index(v)


class _UnionFind:
    def __init__(self, size):
        self.parent = list(range(size))

    def find(self, x):
        root = x
        while self.parent[root] != root:
            root = self.parent[root]
        while self.parent[x] != root:
            self.parent[x], x = root, self.parent[x]
        return root

    def union(self, a, b) -> bool:
        ra, rb = self.find(a), self.find(b)
        if ra == rb:
            return False
        if ra < rb:
            self.parent[rb] = ra
        else:
            self.parent[ra] = rb
        return True


class QuotientGraph:
    """The multigraph G/A obtained by collapsing each component of a forest A.

    Classes are numbered by increasing smallest member. Forest edges vanish;
    any other edge with both ends in one class becomes a self-loop and adds 2
    to that class's degree (``keep_loops=False`` drops them instead).
    Half-edges carry the id of the base edge they came from.
    """

    def __init__(self, base: CylinderGraph, forest, keep_loops: bool = True):
        self.base = base
        self.forest = np.array(sorted(set(int(e) for e in forest)), dtype=np.int64)
        self.keep_loops = keep_loops
        uf = _UnionFind(base.num_vertices)
        for e in self.forest:
            if not 0 <= e < base.num_edges:
                raise GraphError(f"unknown edge id {e}")
            u, v = base.edges[e]
            if not uf.union(int(u), int(v)):
                raise GraphError(f"edge set contains a cycle (closed by edge {e})")
        roots = [uf.find(v) for v in range(base.num_vertices)]
        # union by smaller id keeps each root equal to its class minimum
        reps = sorted(set(roots))
        index = {r: c for c, r in enumerate(reps)}
        self.component_of = np.array([index[r] for r in roots], dtype=np.int64)
        self.representative = np.array(reps, dtype=np.int64)
        self.num_vertices = len(reps)
        self.offsets, self.targets, self.edge_ids = self._csr()

    def _csr(self):
        base = self.base
        in_forest = np.zeros(base.num_edges, dtype=bool)
        in_forest[self.forest] = True
        members = [[] for _ in range(self.num_vertices)]
        for v in range(base.num_vertices):
            members[self.component_of[v]].append(v)
        rows = []
        for c in range(self.num_vertices):
            row = []
            for v in members[c]:
                lo, hi = base.offsets[v], base.offsets[v + 1]
                for w, e in zip(base.targets[lo:hi], base.edge_ids[lo:hi]):
                    if in_forest[e]:
                        continue
                    cw = self.component_of[w]
                    if cw == c and not self.keep_loops:
                        continue
                    row.append((int(cw), int(e)))
            rows.append(row)
        offsets = np.zeros(self.num_vertices + 1, dtype=np.int64)
        offsets[1:] = np.cumsum([len(r) for r in rows])
        targets = np.array([p[0] for r in rows for p in r], dtype=np.int64)
        edge_ids = np.array([p[1] for r in rows for p in r], dtype=np.int64)
        return offsets, targets, edge_ids

    @property
    def num_edges(self) -> int:
        return len(self.targets) // 2

    def degree(self, c: int) -> int:
        return int(self.offsets[c + 1] - self.offsets[c])

    def degrees(self) -> np.ndarray:
        return np.diff(self.offsets)

    def neighbors(self, c: int) -> list[int]:
        return self.targets[self.offsets[c]:self.offsets[c + 1]].tolist()

    def non_loop_edges(self) -> set[int]:
        out = set()
        for c in range(self.num_vertices):
            for k in range(self.offsets[c], self.offsets[c + 1]):
                if self.targets[k] != c:
                    out.add(int(self.edge_ids[k]))
        return out


def contract(g: CylinderGraph, forest, keep_loops: bool = True) -> QuotientGraph:
    return QuotientGraph(g, forest, keep_loops=keep_loops)


def is_connected(num_vertices, offsets, targets, removed=None) -> bool:
    """Connectivity by BFS, optionally ignoring a set of removed vertices."""
    removed = set() if removed is None else set(removed)
    alive = [v for v in range(num_vertices) if v not in removed]
    if not alive:
        return True
    seen = {alive[0]}
    stack = [alive[0]]
    while stack:
        v = stack.pop()
        for w in targets[offsets[v]:offsets[v + 1]]:
            w = int(w)
            if w not in seen and w not in removed:
                seen.add(w)
                stack.append(w)
    return len(seen) == len(alive)
