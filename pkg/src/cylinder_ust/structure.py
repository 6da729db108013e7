"""Trunks, branches, depths to the trunk, and the left/right split of sink trees."""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass

import numpy as np

from .graph import CylinderGraph
from .sampler import SpanningTree


@dataclass(frozen=True)
class Trunk:
    vertices: tuple
    mode: str = "canonical"

    @property
    def length(self) -> int:
        return len(self.vertices) - 1


@dataclass(frozen=True)
class Branch:
    attach: int
    vertices: tuple

    @property
    def length(self) -> int:
        return len(self.vertices) - 1


@dataclass(frozen=True)
class SlashResult:
    left_set: frozenset
    right_set: frozenset
    slash_edges: tuple

    @property
    def size(self) -> int:
        return len(self.slash_edges)


def rings_met(g: CylinderGraph, vertices) -> set:
    return {v // g.n for v in vertices if v != g.sink}


def meets_every_ring(g: CylinderGraph, vertices) -> bool:
    return len(rings_met(g, vertices)) == g.m


def canonical_trunk(g: CylinderGraph, t: SpanningTree) -> Trunk:
    """The tree path from ``(0, 0)`` to ``(0, m-1)``.

    Any path between the end rings crosses every ring, so this is a trunk.
    """
    if g.has_sink:
        raise ValueError("canonical_trunk is defined for graphs without a sink")
    path = t.path(g.encode(0, 0), g.encode(0, g.m - 1))
    return Trunk(tuple(path), "canonical")


def proof_trunk(g: CylinderGraph, t: SpanningTree) -> Trunk:
    """The first loop-erased segment of the sampling trace, from the root side.

    Only a trunk when the tree was sampled with :func:`trunk_first_order`.
    """
    if not t.trace:
        raise ValueError("tree carries no sampling trace")
    path = tuple(reversed(t.trace[0]))
    if not meets_every_ring(g, path):
        raise ValueError("first trace segment misses a ring; sample with trunk-first order")
    return Trunk(path, "proof-trace")


def _tree_adjacency(t: SpanningTree):
    """Neighbour lists of ``t`` paired with the joining edge ids."""
    adj = [[] for _ in range(t.num_vertices)]
    for v, (p, e) in enumerate(zip(t.parent.tolist(), t.parent_edge.tolist())):
        if e >= 0:
            adj[v].append((p, e))
            adj[p].append((v, e))
    return adj


def _hang(t: SpanningTree, trunk: Trunk):
    """BFS outward from the trunk: depth to the trunk and the next vertex towards it."""
    adj = _tree_adjacency(t)
    nv = t.num_vertices
    depth = np.full(nv, -1, dtype=np.int64)
    up = np.full(nv, -1, dtype=np.int64)
    queue = deque(trunk.vertices)
    for v in trunk.vertices:
        depth[v] = 0
    while queue:
        v = queue.popleft()
        for w, _ in adj[v]:
            if depth[w] < 0:
                depth[w] = depth[v] + 1
                up[w] = v
                queue.append(w)
    if (depth < 0).any():
        raise ValueError("tree is not connected to the trunk")
    return adj, depth, up


def _leaves(adj, depth):
    return [v for v in range(len(adj)) if depth[v] > 0 and len(adj[v]) == 1]


def branches(t: SpanningTree, trunk: Trunk) -> list[Branch]:
    """One branch per leaf of the subtrees hanging off the trunk.

    Each branch runs from its attachment vertex on the trunk out to a leaf,
    which makes it a maximal simple path meeting the trunk in one endpoint.
    """
    adj, depth, up = _hang(t, trunk)
    out = []
    for leaf in _leaves(adj, depth):
        path = [leaf]
        while depth[path[-1]] > 0:
            path.append(int(up[path[-1]]))
        path.reverse()
        out.append(Branch(path[0], tuple(path)))
    return out


def branch_lengths(t: SpanningTree, trunk: Trunk) -> np.ndarray:
    """Lengths of all branches, without materialising the paths."""
    adj, depth, _ = _hang(t, trunk)
    return np.array([depth[v] for v in _leaves(adj, depth)], dtype=np.int64)


def vertex_depths(t: SpanningTree, trunk: Trunk) -> np.ndarray:
    """Tree distance from every vertex to the trunk, indexed by vertex."""
    return _hang(t, trunk)[1]


def segment_labels(g: CylinderGraph, t: SpanningTree) -> np.ndarray:
    """Per-vertex side of the sink: 1 left (via ``R_0``), 2 right (via ``R_{m-1}``), 0 the sink."""
    if not g.has_sink:
        raise ValueError("left/right segments need a sink graph")
    adj = _tree_adjacency(t)
    s = g.sink
    label = np.full(g.num_vertices, -1, dtype=np.int64)
    label[s] = 0
    for u, e in adj[s]:
        kind = g.edge_kind(e)
        assert kind in ("sink-left", "sink-right"), f"tree edge {e} at the sink is a {kind} edge"
        side = 1 if kind == "sink-left" else 2
        label[u] = side
        stack = [u]
        while stack:
            v = stack.pop()
            for w, _ in adj[v]:
                if label[w] < 0:
                    label[w] = side
                    stack.append(w)
    return label


def lr_segments(g: CylinderGraph, t: SpanningTree) -> tuple[frozenset, frozenset]:
    label = segment_labels(g, t)
    left = frozenset(np.flatnonzero(label == 1).tolist())
    right = frozenset(np.flatnonzero(label == 2).tolist())
    return left, right


def lr_slash(g: CylinderGraph, segments) -> SlashResult:
    """Edges of ``g`` away from the sink that join the left and right segments.

    ``segments`` is the ``(left, right)`` pair from :func:`lr_segments` or a
    label array from :func:`segment_labels`.
    """
    if isinstance(segments, np.ndarray):
        label = segments
    else:
        left, right = segments
        label = np.zeros(g.num_vertices, dtype=np.int64)
        label[list(left)] = 1
        label[list(right)] = 2
    cell_edges = g.edges[: 2 * g.num_cells - g.n]
    a, b = label[cell_edges[:, 0]], label[cell_edges[:, 1]]
    crossing = np.flatnonzero(a != b)
    return SlashResult(
        frozenset(np.flatnonzero(label == 1).tolist()),
        frozenset(np.flatnonzero(label == 2).tolist()),
        tuple(crossing.tolist()),
    )


def slash_size(g: CylinderGraph, t: SpanningTree) -> int:
    label = segment_labels(g, t)
    cell_edges = g.edges[: 2 * g.num_cells - g.n]
    return int(np.count_nonzero(label[cell_edges[:, 0]] != label[cell_edges[:, 1]]))


def _pick(g, members, best):
    """Vertex of ``members`` with extreme ring index, ties to the smallest id."""
    rings = members // g.n
    target = best(rings)
    return int(members[rings == target].min())


def sink_trunk(g: CylinderGraph, t: SpanningTree, labels=None) -> tuple[Trunk, int]:
    """An s-rooted trunk and its class index.

    The trunk runs from the deepest-ring left vertex down to the sink and
    back out to the shallowest-ring right vertex. The class index is the
    largest ring on the left portion, -1 when there is no left portion.
    """
    label = segment_labels(g, t) if labels is None else labels
    s = g.sink
    left = np.flatnonzero(label == 1)
    right = np.flatnonzero(label == 2)
    path = [s]
    index = -1
    if len(left):
        u = _pick(g, left, np.max)
        left_part = t.path(u, s)
        index = max(v // g.n for v in left_part[:-1])
        path = left_part
    if len(right):
        v = _pick(g, right, np.min)
        path = path + t.path(s, v)[1:]
    return Trunk(tuple(path), "sink"), index
