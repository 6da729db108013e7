import numpy as np
import pytest

from cylinder_ust.graph import build
from cylinder_ust.rng import RngStream
from cylinder_ust.sampler import SpanningTree, _orient, sample_tree, wilson
from cylinder_ust.structure import (branch_lengths, branches, canonical_trunk, lr_segments,
                                    lr_slash, meets_every_ring, proof_trunk, rings_met,
                                    segment_labels, sink_trunk, slash_size, vertex_depths,
                                    Trunk)


def edge_between(g, a, b):
    for w, e in zip(g.neighbors(a), g.incident_edges(a)):
        if w == b:
            return e
    raise KeyError((a, b))


def tree_from_pairs(g, root, pairs):
    edges = [edge_between(g, a, b) for a, b in pairs]
    parent, parent_edge = _orient(g, root, edges)
    return SpanningTree(root, parent, parent_edge)


def comb(g):
    """Column i=0 spans every ring; each ring hangs off it along the ring."""
    pairs = [(g.encode(0, j), g.encode(0, j + 1)) for j in range(g.m - 1)]
    for j in range(g.m):
        for i in range(g.n - 1):
            pairs.append((g.encode(i, j), g.encode(i + 1, j)))
    return tree_from_pairs(g, 0, pairs)


def test_canonical_trunk_single_ring():
    g = build(4, 1)
    t = wilson(g, rng=RngStream(1))
    trunk = canonical_trunk(g, t)
    assert trunk.vertices == (0,)
    assert trunk.length == 0


def test_canonical_trunk_comb():
    g = build(3, 3)
    t = comb(g)
    t.validate(g)
    assert canonical_trunk(g, t).vertices == (g.encode(0, 0), g.encode(0, 1), g.encode(0, 2))
    # each ring hangs a path of two edges off the trunk
    assert sorted(branch_lengths(t, canonical_trunk(g, t)).tolist()) == [2, 2, 2]


def test_sampled_trunks_meet_every_ring():
    g = build(4, 40)
    rng = RngStream(2)
    for _ in range(30):
        t = wilson(g, rng=rng)
        assert meets_every_ring(g, canonical_trunk(g, t).vertices)


def test_proof_trunk_matches_canonical():
    g = build(3, 25)
    rng = RngStream(3)
    for _ in range(10):
        t = sample_tree(g, rng, "trunk-first", trace=True)
        p = proof_trunk(g, t)
        assert p.mode == "proof-trace"
        assert p.vertices == canonical_trunk(g, t).vertices


def test_proof_trunk_needs_trace():
    g = build(3, 5)
    with pytest.raises(ValueError):
        proof_trunk(g, wilson(g, rng=RngStream(1)))


def test_branches_empty_when_trunk_is_whole_tree():
    g = build(3, 1)
    t = tree_from_pairs(g, 0, [(0, 1), (1, 2)])
    trunk = Trunk((0, 1, 2))
    assert branches(t, trunk) == []


def abstract_tree(parents):
    parent = np.array(parents, dtype=np.int64)
    parent_edge = np.where(parent == np.arange(len(parent)), -1, np.arange(len(parent)))
    return SpanningTree(0, parent, parent_edge)


def test_hanging_path_and_y():
    # trunk 0-1-2; path 1-3-4-5 off vertex 1; a Y 2-6, 6-7, 6-8 off vertex 2
    t = abstract_tree([0, 0, 1, 1, 3, 4, 2, 6, 6])
    trunk = Trunk((0, 1, 2))
    got = sorted(b.vertices for b in branches(t, trunk))
    assert got == [(1, 3, 4, 5), (2, 6, 7), (2, 6, 8)]
    assert sorted(branch_lengths(t, trunk).tolist()) == [2, 2, 3]
    depths = vertex_depths(t, trunk)
    assert depths.tolist() == [0, 0, 0, 1, 2, 3, 1, 2, 2]
    assert depths.max() == max(b.length for b in branches(t, trunk))


def test_single_hanging_path():
    t = abstract_tree([0, 0, 1, 1, 3, 4])
    (b,) = branches(t, Trunk((0, 1, 2)))
    assert b.attach == 1 and b.length == 3


@pytest.mark.parametrize("n,m,sink", [(3, 30, False), (4, 30, False), (3, 12, True)])
def test_branch_invariants(n, m, sink):
    g = build(n, m, sink)
    rng = RngStream(4)
    for _ in range(20):
        t = wilson(g, rng=rng)
        trunk = sink_trunk(g, t)[0] if sink else canonical_trunk(g, t)
        bs = branches(t, trunk)
        depths = vertex_depths(t, trunk)
        on_trunk = set(trunk.vertices)
        adj = t.adjacency()
        leaves = [v for v in range(g.num_vertices) if v not in on_trunk and len(adj[v]) == 1]
        assert len(bs) == len(leaves)
        covered = {v for b in bs for v in b.vertices[1:]}
        assert covered == set(range(g.num_vertices)) - on_trunk
        for b in bs:
            assert b.attach in on_trunk
            assert on_trunk.isdisjoint(b.vertices[1:])
            for a, c in zip(b.vertices, b.vertices[1:]):
                assert c in adj[a]
            assert depths[b.vertices[-1]] == b.length
        lengths = branch_lengths(t, trunk)
        assert sorted(lengths.tolist()) == sorted(b.length for b in bs)
        assert (lengths.max() if len(lengths) else 0) == depths.max()


def test_lr_segments_single_sink_edge():
    g = build(3, 4, True)
    e = g.encode
    left_edge = g.num_cells + g.n * (g.m - 1) + 0
    # spanning tree with a single sink edge, to (0,0)
    pairs = [(e(0, j), e(0, j + 1)) for j in range(3)]
    pairs += [(e(i, j), e(i + 1, j)) for j in range(4) for i in range(2)]
    chosen = [edge_between(g, a, b) for a, b in pairs] + [left_edge]
    par, pe = _orient(g, g.sink, chosen)
    t = SpanningTree(g.sink, par, pe)
    t.validate(g)
    left, right = lr_segments(g, t)
    assert left == set(range(g.num_cells)) and right == set()
    res = lr_slash(g, (left, right))
    assert res.size == 0
    trunk, index = sink_trunk(g, t)
    assert index == g.m - 1
    assert meets_every_ring(g, trunk.vertices)

    right_edge = left_edge + g.n + 2  # sink to (2, m-1)
    chosen[-1] = right_edge
    par, pe = _orient(g, g.sink, chosen)
    t = SpanningTree(g.sink, par, pe)
    left, right = lr_segments(g, t)
    assert right == set(range(g.num_cells)) and left == set()
    trunk, index = sink_trunk(g, t)
    assert index == -1
    assert meets_every_ring(g, trunk.vertices)


def test_clean_cut_slash():
    g = build(4, 6, True)
    e = g.encode
    k = 2
    pairs = [(e(i, j), e(i + 1, j)) for j in range(g.m) for i in range(g.n - 1)]
    pairs += [(e(0, j), e(0, j + 1)) for j in range(g.m - 1) if j != k]
    chosen = [edge_between(g, a, b) for a, b in pairs]
    sink_left = g.num_cells + g.n * (g.m - 1)
    chosen += [sink_left + 0, sink_left + g.n + 0]
    par, pe = _orient(g, g.sink, chosen)
    t = SpanningTree(g.sink, par, pe)
    t.validate(g)
    res = lr_slash(g, lr_segments(g, t))
    assert res.size == g.n
    assert all(g.edge_kind(x) == "path" for x in res.slash_edges)
    assert {g.ring_index(int(v)) for x in res.slash_edges for v in g.edges[x]} == {k, k + 1}
    assert slash_size(g, t) == g.n
    trunk, index = sink_trunk(g, t)
    assert index == k


@pytest.mark.parametrize("n,m", [(3, 8), (4, 10), (3, 2)])
def test_slash_invariants(n, m):
    g = build(n, m, True)
    rng = RngStream(6)
    tree_edges = None
    for _ in range(200):
        t = wilson(g, rng=rng)
        labels = segment_labels(g, t)
        left, right = lr_segments(g, t)
        assert left | right == set(range(g.num_cells)) and not left & right
        res = lr_slash(g, labels)
        tree_edges = set(t.edges.tolist())
        assert tree_edges.isdisjoint(res.slash_edges)
        for x in res.slash_edges:
            a, b = (int(v) for v in g.edges[x])
            assert labels[a] != labels[b]
        assert (res.size == 0) == (not left or not right)
        if left and right:
            lo = min(v // n for v in right)
            hi = max(v // n for v in left)
            for x in res.slash_edges:
                a, b = (int(v) for v in g.edges[x])
                if labels[a] == 2:
                    a, b = b, a
                # a path edge may reach one ring past the interval [lo, hi]
                assert lo - 1 <= a // n <= hi and lo <= b // n <= hi + 1
        trunk, index = sink_trunk(g, t, labels)
        assert g.sink in trunk.vertices
        assert meets_every_ring(g, trunk.vertices)
        if left and right:
            assert max(v // n for v in left) >= min(v // n for v in right) - 1
        assert -1 <= index <= m - 1


def test_sink_trunk_is_simple_tree_path():
    g = build(3, 8, True)
    rng = RngStream(12)
    for _ in range(50):
        t = wilson(g, rng=rng)
        trunk, _ = sink_trunk(g, t)
        assert len(set(trunk.vertices)) == len(trunk.vertices)
        adj = t.adjacency()
        for a, b in zip(trunk.vertices, trunk.vertices[1:]):
            assert b in adj[a]
        assert rings_met(g, trunk.vertices) == set(range(g.m))
