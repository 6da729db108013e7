"""Abelian sandpile on the sink cylinder G^s_{n,m}.

Heights live on cells only (array indexed by cell id); grains sent to the
sink are lost. Every cell has degree 4, so stable heights are 0..3.
"""

from __future__ import annotations

import itertools
from collections import deque
from dataclasses import dataclass

import numba
import numpy as np

from .graph import CylinderGraph
from .rng import RngStream

TOPPLE_CAP = 10**12


@dataclass(frozen=True)
class AvalancheRecord:
    site: int
    topplings: int
    distinct_sites: int


@numba.njit(nogil=True, cache=True)
def _stabilize(offsets, targets, threshold, heights, site, lifo, toppled, buf):
    """Topple until stable after one grain at ``site``. Returns (topplings, distinct)."""
    num_cells = len(heights)
    heights[site] += 1
    if heights[site] < threshold[site]:
        return 0, 0
    head = 0
    size = 1
    buf[0] = site
    topplings = 0
    distinct = 0
    while size > 0:
        if lifo:
            v = buf[(head + size - 1) % num_cells]
        else:
            v = buf[head]
            head = (head + 1) % num_cells
        size -= 1
        if heights[v] < threshold[v]:
            continue
        heights[v] -= threshold[v]
        topplings += 1
        if not toppled[v]:
            toppled[v] = True
            distinct += 1
        for k in range(offsets[v], offsets[v + 1]):
            w = targets[k]
            if w >= num_cells:
                continue
            heights[w] += 1
            if heights[w] == threshold[w]:
                buf[(head + size) % num_cells] = w
                size += 1
        if heights[v] >= threshold[v]:
            buf[(head + size) % num_cells] = v
            size += 1
        if topplings > TOPPLE_CAP:
            return -1, -1
    for k in range(num_cells):
        toppled[k] = False
    return topplings, distinct


@numba.njit(nogil=True, cache=True)
def _drive(offsets, targets, threshold, heights, sites, lifo, out):
    num_cells = len(heights)
    toppled = np.zeros(num_cells, dtype=np.bool_)
    buf = np.empty(num_cells, dtype=np.int64)
    for k in range(len(sites)):
        t, d = _stabilize(offsets, targets, threshold, heights, sites[k], lifo, toppled, buf)
        out[k, 0] = t
        out[k, 1] = d


def _require_sink(g: CylinderGraph):
    if not g.has_sink:
        raise ValueError("the sandpile lives on a sink graph")


def _thresholds(g: CylinderGraph) -> np.ndarray:
    return g.degrees()[: g.num_cells].astype(np.int64)


def max_stable(g: CylinderGraph) -> np.ndarray:
    _require_sink(g)
    return _thresholds(g) - 1


def is_stable(g: CylinderGraph, heights) -> bool:
    heights = np.asarray(heights)
    return bool(((heights >= 0) & (heights < _thresholds(g))).all())


def _drive_sites(g, heights, sites, order):
    if order not in ("fifo", "lifo"):
        raise ValueError(f"unknown toppling order {order!r}")
    heights = np.array(heights, dtype=np.int64)
    sites = np.asarray(sites, dtype=np.int64)
    if len(sites) and (sites.min() < 0 or sites.max() >= g.num_cells):
        raise ValueError("grains can only be added to cells")
    out = np.zeros((len(sites), 2), dtype=np.int64)
    _drive(g.offsets, g.targets, _thresholds(g), heights, sites, order == "lifo", out)
    if (out < 0).any():
        raise RuntimeError("toppling cap exceeded")
    return heights, out


def add_and_stabilize(g: CylinderGraph, heights, site: int, order: str = "fifo"):
    """Add one grain at ``site`` and relax. Returns ``(new_heights, AvalancheRecord)``."""
    _require_sink(g)
    if not is_stable(g, heights):
        raise ValueError("configuration must be stable before adding a grain")
    new, out = _drive_sites(g, heights, [site], order)
    return new, AvalancheRecord(int(site), int(out[0, 0]), int(out[0, 1]))


def is_recurrent(g: CylinderGraph, heights) -> bool:
    """Dhar's burning test, starting from the sink."""
    _require_sink(g)
    heights = np.asarray(heights)
    nc = g.num_cells
    offsets, targets = g.offsets, g.targets
    unburnt = np.zeros(nc, dtype=np.int64)
    for v in range(nc):
        unburnt[v] = np.count_nonzero(targets[offsets[v]:offsets[v + 1]] < nc)
    burnt = np.zeros(nc, dtype=bool)
    queue = deque(v for v in range(nc) if heights[v] >= unburnt[v])
    for v in queue:
        burnt[v] = True
    count = len(queue)
    while queue:
        v = queue.popleft()
        for w in targets[offsets[v]:offsets[v + 1]]:
            if w >= nc or burnt[w]:
                continue
            unburnt[w] -= 1
            if heights[w] >= unburnt[w]:
                burnt[w] = True
                count += 1
                queue.append(w)
    return count == nc


def recurrent_count(g: CylinderGraph, limit: int = 4**8) -> int:
    """Number of recurrent configurations, by scanning every stable one."""
    _require_sink(g)
    thresholds = _thresholds(g)
    total = int(np.prod(thresholds.astype(object)))
    if total > limit:
        raise ValueError(f"{total} stable configurations exceed the scan limit {limit}")
    ranges = [range(int(t)) for t in thresholds]
    return sum(is_recurrent(g, np.array(c)) for c in itertools.product(*ranges))


def random_sites(g: CylinderGraph, count: int, rng: RngStream) -> np.ndarray:
    return rng.integers(g.num_cells, count)


def markov_sample_recurrent(g: CylinderGraph, steps: int | None = None,
                            rng: RngStream | None = None, start=None) -> np.ndarray:
    """Drive the pile with ``steps`` grains at uniform cells (default ``10 n m``).

    Starts from :func:`max_stable` unless ``start`` is given. The recurrent
    class is closed under driving and its stationary law is uniform, so from
    a recurrent start every output is recurrent and the chain only has to mix.
    """
    _require_sink(g)
    if rng is None:
        raise TypeError("rng is required")
    steps = 10 * g.num_cells if steps is None else int(steps)
    heights = max_stable(g) if start is None else np.array(start, dtype=np.int64)
    heights, _ = _drive_sites(g, heights, random_sites(g, steps, rng), "fifo")
    return heights


def avalanches(g: CylinderGraph, heights, sites, order: str = "fifo"):
    """Drop one grain per entry of ``sites``; returns the final heights and
    an ``(len(sites), 2)`` array of (topplings, distinct sites)."""
    _require_sink(g)
    return _drive_sites(g, heights, sites, order)
