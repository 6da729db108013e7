"""Random walks, loop erasure and Wilson's algorithm.

All samplers work on any graph object exposing ``num_vertices`` and a CSR
half-edge table (``offsets``, ``targets``, ``edge_ids``); both
:class:`~cylinder_ust.graph.CylinderGraph` and
:class:`~cylinder_ust.graph.QuotientGraph` qualify. A step picks one
half-edge of the current vertex uniformly, so parallel edges and
self-loops are weighted by multiplicity.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numba
import numpy as np

from .graph import CylinderGraph, GraphError, QuotientGraph, contract
from .rng import RngStream, bounded

DEFAULT_STEP_CAP = 10**9


def step_cap(g) -> int:
    """Per-walk step cap: ``max(10**9, 1000 |E| |V|)``.

    Expected hitting times are at most ``2 |E| (|V| - 1)``, so only a bug
    should ever reach this; a flat 10**9 is too tight for m ~ 20000.
    """
    num_edges = len(g.targets) // 2
    return max(DEFAULT_STEP_CAP, 1000 * num_edges * g.num_vertices)


class WalkCapError(RuntimeError):
    """A walk exceeded the step cap. Walks on finite connected graphs hit
    their target almost surely, so this points at a bug or a disconnected
    target."""


@numba.njit(nogil=True, cache=True)
def _walk_kernel(offsets, targets, is_target, start, state, cap):
    path = np.empty(64, dtype=np.int64)
    path[0] = start
    size = 1
    cur = start
    steps = 0
    while not is_target[cur]:
        if steps >= cap:
            return path[:size], False
        lo = offsets[cur]
        cur = targets[lo + bounded(state, offsets[cur + 1] - lo)]
        steps += 1
        if size == len(path):
            grown = np.empty(2 * size, dtype=np.int64)
            grown[:size] = path
            path = grown
        path[size] = cur
        size += 1
    return path[:size], True


@numba.njit(nogil=True, cache=True)
def _wilson_kernel(offsets, targets, edge_ids, in_tree, order, state, cap,
                   parent, parent_edge, trace_vertices, trace_starts):
    """Wilson's algorithm with loops erased on the fly.

    The current loop-erased path lives on a stack; ``pos[v]`` is the stack
    index of ``v`` or -1. Revisiting a stacked vertex truncates the stack
    back to it, which is chronological loop erasure. Returns the number of
    trace segments, or ``-(k + 1)`` if the walk from ``order[k]`` hit the cap.
    """
    nv = len(offsets) - 1
    pos = np.full(nv, -1, dtype=np.int64)
    stack_v = np.empty(nv, dtype=np.int64)
    stack_e = np.empty(nv, dtype=np.int64)
    n_seg = 0
    t_size = 0
    for k in range(len(order)):
        start = order[k]
        if in_tree[start]:
            continue
        top = 0
        stack_v[0] = start
        pos[start] = 0
        cur = start
        steps = 0
        while True:
            if steps >= cap:
                return -(k + 1)
            lo = offsets[cur]
            h = lo + bounded(state, offsets[cur + 1] - lo)
            w = targets[h]
            steps += 1
            if in_tree[w]:
                stack_e[top] = edge_ids[h]
                break
            p = pos[w]
            if p >= 0:
                for q in range(p + 1, top + 1):
                    pos[stack_v[q]] = -1
                top = p
            else:
                stack_e[top] = edge_ids[h]
                top += 1
                stack_v[top] = w
                pos[w] = top
            cur = w
        trace_starts[n_seg] = t_size
        for q in range(top + 1):
            v = stack_v[q]
            parent[v] = stack_v[q + 1] if q < top else w
            parent_edge[v] = stack_e[q]
            in_tree[v] = True
            pos[v] = -1
            trace_vertices[t_size] = v
            t_size += 1
        trace_vertices[t_size] = w
        t_size += 1
        n_seg += 1
    trace_starts[n_seg] = t_size
    return n_seg


@dataclass
class WalkPath:
    vertices: list

    @property
    def length(self) -> int:
        return len(self.vertices) - 1


@dataclass
class SpanningTree:
    """Rooted spanning tree: ``parent[root] == root``, ``parent_edge[root] == -1``.

    ``trace`` holds the loop-erased segments in insertion order when the
    sampler was asked to keep them; each segment ends at the vertex where
    it attached.
    """

    root: int
    parent: np.ndarray
    parent_edge: np.ndarray
    trace: list | None = field(default=None, repr=False)

    @property
    def num_vertices(self) -> int:
        return len(self.parent)

    @property
    def edges(self) -> np.ndarray:
        mask = self.parent_edge >= 0
        return np.sort(self.parent_edge[mask])

    def edge_set(self) -> frozenset:
        return frozenset(self.edges.tolist())

    def adjacency(self) -> list[list[int]]:
        adj = [[] for _ in range(self.num_vertices)]
        for v, p in enumerate(self.parent.tolist()):
            if v != self.root:
                adj[v].append(p)
                adj[p].append(v)
        return adj

    def path_to_root(self, v: int) -> list[int]:
        out = [v]
        while out[-1] != self.root:
            out.append(int(self.parent[out[-1]]))
            if len(out) > self.num_vertices:
                raise ValueError("parent links contain a cycle")
        return out

    def path(self, a: int, b: int) -> list[int]:
        """The unique tree path from ``a`` to ``b``."""
        up_a = self.path_to_root(a)
        index = {v: k for k, v in enumerate(up_a)}
        up_b = [b]
        while up_b[-1] not in index:
            up_b.append(int(self.parent[up_b[-1]]))
        meet = up_b[-1]
        return up_a[:index[meet]] + up_b[::-1]

    def validate(self, g) -> None:
        """Raise ``ValueError`` unless this is a spanning tree of ``g``."""
        nv = g.num_vertices
        if len(self.parent) != nv:
            raise ValueError("tree size does not match graph")
        if self.parent[self.root] != self.root or self.parent_edge[self.root] != -1:
            raise ValueError("root must be its own parent")
        edges = self.edges
        if len(edges) != nv - 1 or len(set(edges.tolist())) != nv - 1:
            raise ValueError("a spanning tree needs |V| - 1 distinct edges")
        edge_ends = {}
        for v in range(nv):
            for k in range(g.offsets[v], g.offsets[v + 1]):
                edge_ends.setdefault(int(g.edge_ids[k]), set()).add(v)
        for v in range(nv):
            if v == self.root:
                continue
            e = int(self.parent_edge[v])
            if edge_ends.get(e) != {v, int(self.parent[v])}:
                raise ValueError(f"parent edge of {v} does not join it to its parent")
        depth_known = np.zeros(nv, dtype=bool)
        depth_known[self.root] = True
        for v in range(nv):
            chain = []
            x = v
            while not depth_known[x]:
                chain.append(x)
                x = int(self.parent[x])
                if len(chain) > nv:
                    raise ValueError("parent links contain a cycle")
            depth_known[chain] = True


def _check_stream(rng):
    if not isinstance(rng, RngStream):
        raise TypeError("rng must be an RngStream")


def walk_until_hit(g, start: int, target, rng: RngStream, cap: int | None = None) -> WalkPath:
    """Simple random walk from ``start`` until it first enters ``target``.

    ``target`` is a boolean mask, a collection of vertices, or a predicate.
    """
    _check_stream(rng)
    nv = g.num_vertices
    if callable(target):
        mask = np.array([bool(target(v)) for v in range(nv)])
    else:
        mask = np.asarray(target)
        if mask.dtype != bool or mask.shape != (nv,):
            mask = np.zeros(nv, dtype=bool)
            mask[list(target)] = True
    if not mask.any():
        raise ValueError("target set is empty")
    cap = step_cap(g) if cap is None else cap
    path, ok = _walk_kernel(g.offsets, g.targets, mask, int(start), rng.state, cap)
    if not ok:
        raise WalkCapError(f"walk from {start} exceeded {cap} steps")
    return WalkPath(path.tolist())


def loop_erase(path) -> list:
    """Chronological loop erasure of a vertex sequence."""
    if isinstance(path, WalkPath):
        path = path.vertices
    if len(path) == 0:
        raise ValueError("cannot loop-erase an empty path")
    stack = []
    where = {}
    for v in path:
        if v in where:
            p = where[v]
            for u in stack[p + 1:]:
                del where[u]
            del stack[p + 1:]
        else:
            where[v] = len(stack)
            stack.append(v)
    return stack


def _run_wilson(g, in_tree, order, rng, cap, trace):
    nv = g.num_vertices
    cap = step_cap(g) if cap is None else cap
    parent = np.arange(nv, dtype=np.int64)
    parent_edge = np.full(nv, -1, dtype=np.int64)
    trace_vertices = np.empty(2 * nv + 1, dtype=np.int64)
    trace_starts = np.empty(nv + 1, dtype=np.int64)
    order = np.ascontiguousarray(order, dtype=np.int64)
    n_seg = _wilson_kernel(g.offsets, g.targets, g.edge_ids, in_tree, order,
                           rng.state, cap, parent, parent_edge,
                           trace_vertices, trace_starts)
    if n_seg < 0:
        raise WalkCapError(f"walk from vertex {order[-n_seg - 1]} exceeded {cap} steps")
    segments = None
    if trace:
        segments = [trace_vertices[trace_starts[k]:trace_starts[k + 1]].tolist()
                    for k in range(n_seg)]
    return parent, parent_edge, segments


def default_root(g) -> int:
    return g.sink if getattr(g, "sink", None) is not None else 0


def wilson(g, root: int | None = None, order=None, rng: RngStream | None = None,
           trace: bool = False, cap: int | None = None) -> SpanningTree:
    """Uniform spanning tree of ``g`` by Wilson's algorithm.

    ``order`` lists the vertices other than ``root`` in the order walks are
    started; the default is increasing vertex id.
    """
    _check_stream(rng)
    nv = g.num_vertices
    root = default_root(g) if root is None else int(root)
    if order is None:
        order = np.array([v for v in range(nv) if v != root], dtype=np.int64)
    else:
        order = np.asarray(order, dtype=np.int64)
        if sorted(order.tolist()) != [v for v in range(nv) if v != root]:
            raise ValueError("order must be a permutation of the non-root vertices")
    in_tree = np.zeros(nv, dtype=np.bool_)
    in_tree[root] = True
    parent, parent_edge, segments = _run_wilson(g, in_tree, order, rng, cap, trace)
    return SpanningTree(root, parent, parent_edge, segments)


def _orient(g, root, edges) -> tuple[np.ndarray, np.ndarray]:
    """Parent arrays for an undirected spanning edge set, rooted at ``root``."""
    nv = g.num_vertices
    chosen = np.zeros(g.num_edges, dtype=bool)
    chosen[list(edges)] = True
    parent = np.full(nv, -1, dtype=np.int64)
    parent_edge = np.full(nv, -1, dtype=np.int64)
    parent[root] = root
    stack = [root]
    while stack:
        v = stack.pop()
        for k in range(g.offsets[v], g.offsets[v + 1]):
            e = g.edge_ids[k]
            w = g.targets[k]
            if chosen[e] and parent[w] < 0:
                parent[w] = v
                parent_edge[w] = e
                stack.append(w)
    if (parent < 0).any():
        raise ValueError("edge set does not span the graph")
    return parent, parent_edge


def wilson_extend(g: CylinderGraph, partial, order=None, rng: RngStream | None = None,
                  root: int | None = None, cap: int | None = None,
                  method: str = "auto") -> SpanningTree:
    """Finish a spanning tree that must contain the forest ``partial``.

    The result is a UST of ``g`` conditioned on ``partial`` being a subset.
    With ``method="continue"`` the forest must be a single tree containing
    ``root``, and Wilson's algorithm simply resumes from it. With
    ``method="contract"`` the walks run on the quotient graph ``g / partial``
    and the chosen quotient edges are lifted back. ``"auto"`` picks
    ``continue`` when it applies.
    """
    _check_stream(rng)
    root = default_root(g) if root is None else int(root)
    partial = sorted(set(int(e) for e in partial))
    q = contract(g, partial)
    root_class = int(q.component_of[root])
    touched = {int(v) for e in partial for v in g.edges[e]}
    single_tree = all(q.component_of[v] == root_class for v in touched)
    if method == "auto":
        method = "continue" if single_tree else "contract"
    if order is None:
        order = np.arange(g.num_vertices, dtype=np.int64)
    order = np.asarray(order, dtype=np.int64)

    if method == "continue":
        if not single_tree:
            raise GraphError("continue mode needs the forest to be one tree containing the root")
        in_tree = (q.component_of == root_class).astype(np.bool_)
        covered = set(np.flatnonzero(in_tree).tolist())
        if not covered.union(order.tolist()) >= set(range(g.num_vertices)):
            raise ValueError("order must cover every vertex outside the partial tree")
        parent, parent_edge, _ = _run_wilson(g, in_tree, order, rng, cap, False)
        edges = set(partial) | set(parent_edge[parent_edge >= 0].tolist())
    elif method == "contract":
        classes = []
        seen = set()
        for v in order.tolist():
            c = int(q.component_of[v])
            if c not in seen:
                seen.add(c)
                classes.append(c)
        missing = set(range(q.num_vertices)) - seen - {root_class}
        if missing:
            raise ValueError("order must cover every vertex outside the partial forest")
        classes = [c for c in classes if c != root_class]
        in_tree = np.zeros(q.num_vertices, dtype=np.bool_)
        in_tree[root_class] = True
        _, parent_edge, _ = _run_wilson(q, in_tree, classes, rng, cap, False)
        edges = set(partial) | set(parent_edge[parent_edge >= 0].tolist())
    else:
        raise ValueError(f"unknown method {method!r}")
    parent, parent_edge = _orient(g, root, edges)
    return SpanningTree(root, parent, parent_edge)


def trunk_first_order(g: CylinderGraph) -> tuple[int, np.ndarray]:
    """Root ``(0, 0)`` and an order starting at ``(0, m-1)``.

    The first loop-erased segment then joins the two end rings and meets
    every ring in between. For ``m = 1`` the first vertex is ``(1, 0)``.
    With a sink the root is the sink and the order is the default one.
    """
    if g.has_sink:
        root = g.sink
        return root, np.arange(g.num_cells, dtype=np.int64)
    root = 0
    first = g.encode(0, g.m - 1) if g.m > 1 else 1
    rest = [v for v in range(g.num_vertices) if v not in (root, first)]
    return root, np.array([first] + rest, dtype=np.int64)


def sample_tree(g: CylinderGraph, rng: RngStream, order_mode: str = "default",
                trace: bool = False) -> SpanningTree:
    if order_mode == "trunk-first":
        root, order = trunk_first_order(g)
    elif order_mode == "default":
        root, order = default_root(g), None
    elif order_mode == "center":
        # same law, shorter walks: the root sits mid-cylinder
        root = g.sink if g.has_sink else g.encode(0, g.m // 2)
        order = np.array([v for v in range(g.num_vertices) if v != root], dtype=np.int64)
    elif order_mode == "reversed":
        root = default_root(g)
        order = np.array([v for v in range(g.num_vertices - 1, -1, -1) if v != root])
    else:
        raise ValueError(f"unknown order mode {order_mode!r}")
    return wilson(g, root, order, rng, trace=trace)


def lift_tree(q: QuotientGraph, tree: SpanningTree, root: int | None = None) -> SpanningTree:
    """Lift a spanning tree of ``g / A`` to the spanning tree ``A + T`` of ``g``."""
    g = q.base
    root = default_root(g) if root is None else int(root)
    edges = set(q.forest.tolist()) | set(tree.edges.tolist())
    parent, parent_edge = _orient(g, root, edges)
    return SpanningTree(root, parent, parent_edge)
