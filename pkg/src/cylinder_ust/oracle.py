"""Exact ground truth for small graphs: Matrix-Tree counts, exhaustive
enumeration, and chi-square checks of sampled tree frequencies."""

from __future__ import annotations

from collections import Counter

import numpy as np
from scipy.special import gammaincc


class OracleError(ValueError):
    pass


class EdgeListGraph:
    """A small multigraph given by an edge list; edge ids are list positions."""

    def __init__(self, num_vertices: int, edges):
        self.num_vertices = int(num_vertices)
        self.edges = np.array(edges, dtype=np.int64).reshape(-1, 2)
        self.num_edges = len(self.edges)
        adj = [[] for _ in range(self.num_vertices)]
        for e, (u, v) in enumerate(self.edges.tolist()):
            adj[u].append((v, e))
            adj[v].append((u, e))
        self.offsets = np.zeros(self.num_vertices + 1, dtype=np.int64)
        self.offsets[1:] = np.cumsum([len(a) for a in adj])
        self.targets = np.array([w for a in adj for w, _ in a], dtype=np.int64)
        self.edge_ids = np.array([e for a in adj for _, e in a], dtype=np.int64)


def path_graph(k: int) -> EdgeListGraph:
    return EdgeListGraph(k, [(i, i + 1) for i in range(k - 1)])


def edge_list(g) -> list[tuple[int, int, int]]:
    """``(u, v, edge_id)`` for every edge of ``g``, self-loops included once."""
    seen = {}
    for v in range(g.num_vertices):
        for k in range(g.offsets[v], g.offsets[v + 1]):
            e = int(g.edge_ids[k])
            w = int(g.targets[k])
            if e not in seen:
                seen[e] = (v, w, e)
    return [seen[e] for e in sorted(seen)]


def bareiss_determinant(matrix) -> int:
    """Exact determinant of an integer matrix by fraction-free elimination."""
    a = [[int(x) for x in row] for row in matrix]
    size = len(a)
    if size == 0:
        return 1
    sign = 1
    prev = 1
    for k in range(size - 1):
        if a[k][k] == 0:
            swap = next((r for r in range(k + 1, size) if a[r][k] != 0), None)
            if swap is None:
                return 0
            a[k], a[swap] = a[swap], a[k]
            sign = -sign
        pivot = a[k][k]
        row_k = a[k]
        for i in range(k + 1, size):
            row_i = a[i]
            aik = row_i[k]
            for j in range(k + 1, size):
                row_i[j] = (row_i[j] * pivot - aik * row_k[j]) // prev
            row_i[k] = 0
        prev = pivot
    return sign * a[-1][-1]


def laplacian(g) -> list[list[int]]:
    nv = g.num_vertices
    lap = [[0] * nv for _ in range(nv)]
    for u, v, _ in edge_list(g):
        if u == v:
            continue
        lap[u][u] += 1
        lap[v][v] += 1
        lap[u][v] -= 1
        lap[v][u] -= 1
    return lap


def spanning_tree_count(g) -> int:
    """Number of spanning trees (Kirchhoff); 0 when ``g`` is disconnected.

    Loops are ignored and parallel edges count with multiplicity.
    """
    nv = g.num_vertices
    if nv > 1000:
        raise OracleError(f"determinant oracle limited to 1000 vertices, got {nv}")
    if nv <= 1:
        return 1
    lap = laplacian(g)
    minor = [row[:-1] for row in lap[:-1]]
    return bareiss_determinant(minor)


def _find(parent, x):
    while parent[x] != x:
        parent[x] = parent[parent[x]]
        x = parent[x]
    return x


def _connected_with(nv, edges):
    parent = list(range(nv))
    parts = nv
    for u, v, _ in edges:
        ru, rv = _find(parent, u), _find(parent, v)
        if ru != rv:
            parent[ru] = rv
            parts -= 1
    return parts == 1


def enumerate_spanning_trees(g, cap: int = 100_000) -> list[tuple[int, ...]]:
    """Every spanning tree as a sorted tuple of edge ids, in lexicographic order.

    Edges are decided one at a time: include it unless it closes a cycle,
    exclude it unless the remaining edges can no longer span. Both branches
    are pruned this way, so every leaf of the recursion is a tree.
    """
    count = spanning_tree_count(g)
    if count > cap:
        raise OracleError(f"{count} spanning trees exceed the enumeration cap {cap}")
    nv = g.num_vertices
    edges = [e for e in edge_list(g) if e[0] != e[1]]
    out = []

    def recurse(k, chosen, parent):
        if len(chosen) == nv - 1:
            out.append(tuple(sorted(e for _, _, e in chosen)))
            return
        if k == len(edges):
            return
        u, v, _ = edges[k]
        ru, rv = _find(parent, u), _find(parent, v)
        if ru != rv:
            child = parent.copy()
            child[ru] = rv
            recurse(k + 1, chosen + [edges[k]], child)
        if _connected_with(nv, chosen + edges[k + 1:]):
            recurse(k + 1, chosen, parent)

    if nv <= 1:
        return [()]
    if count:
        recurse(0, [], list(range(nv)))
    out.sort()
    if len(out) != count:
        raise OracleError(f"enumeration found {len(out)} trees, determinant says {count}")
    return out


def _p_value(statistic: float, df: int) -> float:
    if df <= 0:
        return 1.0
    return float(gammaincc(df / 2.0, statistic / 2.0))


def _tally(samples, universe):
    index = {tuple(sorted(t)): k for k, t in enumerate(universe)}
    counts = np.zeros(len(universe), dtype=np.int64)
    for s in samples:
        key = tuple(sorted(s))
        k = index.get(key)
        if k is None:
            raise OracleError(f"sampled edge set {key} is not in the universe")
        counts[k] += 1
    return counts


def chi_square_uniformity(samples, universe, min_expected: float = 5.0) -> tuple[float, float]:
    """Pearson chi-square of sample frequencies against uniform over ``universe``.

    Returns ``(statistic, p_value)`` with ``len(universe) - 1`` degrees of freedom.
    """
    counts = _tally(samples, universe)
    total = counts.sum()
    expected = total / len(universe)
    if expected < min_expected:
        raise OracleError(
            f"expected count per cell {expected:.2f} < {min_expected}; draw more samples")
    statistic = float(((counts - expected) ** 2).sum() / expected)
    return statistic, _p_value(statistic, len(universe) - 1)


def two_sample_chi_square(samples_a, samples_b, universe,
                          min_expected: float = 5.0) -> tuple[float, float]:
    """Chi-square test that two samples share one distribution over ``universe``."""
    table = np.stack([_tally(samples_a, universe), _tally(samples_b, universe)]).astype(float)
    table = table[:, table.sum(axis=0) > 0]
    rows = table.sum(axis=1, keepdims=True)
    cols = table.sum(axis=0, keepdims=True)
    expected = rows * cols / table.sum()
    if expected.min() < min_expected:
        raise OracleError("expected cell count below threshold; draw more samples")
    statistic = float(((table - expected) ** 2 / expected).sum())
    return statistic, _p_value(statistic, table.shape[1] - 1)


def frequencies(samples) -> Counter:
    return Counter(tuple(sorted(s)) for s in samples)
