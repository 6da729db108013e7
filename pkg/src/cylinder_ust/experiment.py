"""End-to-end experiments: sample replicas, measure, aggregate, fit, check bounds.

Every replica draws from its own stream ``RngStream(seed, replica)`` and
results are reduced in replica order, so the output files depend only on
the experiment settings and never on the worker count.
"""

from __future__ import annotations

import json
import logging
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import sandpile
from .graph import CylinderGraph, build
from .rng import RngStream
from .sampler import sample_tree
from .statistics import (FitError, Histogram, bound_check, bound_constants,
                         empirical_tail, fit_exponential, merge_all)
from .structure import (branch_lengths, canonical_trunk, proof_trunk, segment_labels,
                        sink_trunk, slash_size, vertex_depths)

log = logging.getLogger(__name__)

OBSERVABLES = ("branches", "depths", "slash", "avalanches")
TRUNK_MODES = ("canonical", "proof")


class SpecError(ValueError):
    pass


@dataclass
class ExperimentSpec:
    n: int
    m: int
    sink: bool = False
    replicas: int = 100
    seed: int = 0
    trunk: str = "canonical"
    observable: str = "branches"
    min_count: int = 10
    grains: int = 1000
    init: str = "max"
    save_trees: bool = False
    svg: bool = False
    out_dir: str = "out"
    threads: int | None = field(default=None)

    def validate(self) -> None:
        if self.n < 3 or self.m < 1:
            raise SpecError("need n >= 3 and m >= 1")
        if self.replicas < 1:
            raise SpecError("need at least one replica")
        if self.seed < 0:
            raise SpecError("seed must be non-negative")
        if self.observable not in OBSERVABLES:
            raise SpecError(f"observable must be one of {OBSERVABLES}")
        if self.trunk not in TRUNK_MODES:
            raise SpecError(f"trunk mode must be one of {TRUNK_MODES}")
        if self.observable in ("slash", "avalanches") and not self.sink:
            raise SpecError(f"observable {self.observable!r} needs --sink")
        if self.sink and self.trunk == "proof" and self.observable in ("branches", "depths"):
            raise SpecError("sink graphs use the s-rooted trunk; proof mode is for plain cylinders")
        if self.init not in ("max", "stationary"):
            raise SpecError("init must be 'max' or 'stationary'")
        if self.grains < 1:
            raise SpecError("need at least one grain")
        if self.threads is not None and self.threads < 1:
            raise SpecError("threads must be >= 1")

    def identity(self) -> dict:
        """Fields that determine the output; worker count and paths excluded."""
        d = asdict(self)
        del d["out_dir"], d["threads"]
        return d


def measure_tree(g: CylinderGraph, spec: ExperimentSpec, replica: int) -> dict:
    """Sample one tree and compute every tree observable for it."""
    rng = RngStream(spec.seed, replica)
    proof = spec.trunk == "proof" and not g.has_sink
    t = sample_tree(g, rng, "trunk-first" if proof else "center", trace=proof)
    record = {"replica": replica}
    if g.has_sink:
        labels = segment_labels(g, t)
        trunk, index = sink_trunk(g, t, labels)
        record["class_index"] = index
        record["slash_size"] = slash_size(g, t)
        record["left_size"] = int(np.count_nonzero(labels == 1))
        record["right_size"] = int(np.count_nonzero(labels == 2))
    elif proof:
        trunk = proof_trunk(g, t)
    else:
        trunk = canonical_trunk(g, t)
    lengths = branch_lengths(t, trunk)
    depths = vertex_depths(t, trunk)
    depths = depths[depths > 0]
    record.update({
        "trunk_mode": trunk.mode,
        "trunk_length": trunk.length,
        "branch_count": int(len(lengths)),
        "max_branch": int(lengths.max()) if len(lengths) else 0,
        "max_depth": int(depths.max()) if len(depths) else 0,
    })
    result = {
        "record": record,
        "branches": Histogram.from_values(lengths),
        "depths": Histogram.from_values(depths),
    }
    if spec.save_trees:
        result["tree"] = {"replica": replica, "n": g.n, "m": g.m, "sink": g.has_sink,
                          "root": int(t.root), "edge_ids": t.edges.tolist()}
    return result


def measure_avalanches(g: CylinderGraph, spec: ExperimentSpec, replica: int) -> dict:
    rng = RngStream(spec.seed, replica)
    if spec.init == "max":
        heights = sandpile.max_stable(g)
    else:
        heights = sandpile.markov_sample_recurrent(g, rng=rng)
    sites = sandpile.random_sites(g, spec.grains, rng)
    _, out = sandpile.avalanches(g, heights, sites)
    sizes = out[:, 0]
    record = {
        "replica": replica,
        "grains": spec.grains,
        "init": spec.init,
        "total_topplings": int(sizes.sum()),
        "max_topplings": int(sizes.max()),
        "max_distinct_sites": int(out[:, 1].max()),
    }
    rows = [(replica, k, int(s), int(t), int(d)) for k, (s, (t, d)) in enumerate(zip(sites, out))]
    return {"record": record, "avalanches": Histogram.from_values(sizes),
            "distinct": Histogram.from_values(out[:, 1]), "rows": rows}


def _fit_or_error(h: Histogram, min_count: int) -> dict:
    try:
        return fit_exponential(h, min_count=min_count).to_dict()
    except FitError as exc:
        return {"error": str(exc)}


def _dump_json(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True) + "\n"


def svg_bar_chart(h: Histogram, title: str, width: int = 640, height: int = 360) -> str:
    """A bare SVG bar chart of a histogram."""
    items = h.items()
    pad = 40
    if not items:
        return f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}"></svg>\n'
    top = max(c for _, c in items)
    lo, hi = items[0][0], items[-1][0]
    slots = hi - lo + 1
    bar = (width - 2 * pad) / slots
    parts = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}">',
             f'<text x="{width / 2:.1f}" y="20" text-anchor="middle" font-size="14">{title}</text>']
    for length, count in items:
        bh = (height - 2 * pad) * count / top
        x = pad + (length - lo) * bar
        y = height - pad - bh
        parts.append(f'<rect x="{x:.2f}" y="{y:.2f}" width="{bar * 0.9:.2f}" '
                     f'height="{bh:.2f}" fill="steelblue"><title>{length}: {count}</title></rect>')
    parts.append(f'<text x="{pad}" y="{height - 10}" font-size="12">{lo}</text>')
    parts.append(f'<text x="{width - pad}" y="{height - 10}" font-size="12" '
                 f'text-anchor="end">{hi}</text>')
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


def run_experiment(spec: ExperimentSpec) -> dict:
    """Run ``spec`` and write its report files into ``spec.out_dir``.

    Returns a summary with the output paths, the fit and the bound verdict.
    """
    spec.validate()
    g = build(spec.n, spec.m, spec.sink)
    threads = spec.threads or os.cpu_count() or 1
    out = Path(spec.out_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise OSError(f"cannot create output directory {out}: {exc}") from exc

    measure = measure_avalanches if spec.observable == "avalanches" else measure_tree
    started = time.perf_counter()
    with ThreadPoolExecutor(max_workers=threads) as pool:
        results = list(pool.map(lambda r: measure(g, spec, r), range(spec.replicas)))
    log.info("sampled %d replicas in %.1fs with %d threads",
             spec.replicas, time.perf_counter() - started, threads)

    files = {}

    def write(name, text):
        path = out / name
        try:
            path.write_text(text)
        except OSError as exc:
            raise OSError(f"cannot write {path}: {exc}") from exc
        files[name] = str(path)

    write("spec.json", _dump_json(spec.identity()))
    write("records.jsonl", "".join(json.dumps(r["record"], sort_keys=True) + "\n" for r in results))
    if spec.save_trees and spec.observable != "avalanches":
        write("trees.jsonl", "".join(json.dumps(r["tree"], sort_keys=True) + "\n" for r in results))

    consts = bound_constants(spec.n)
    bounds = None
    if spec.observable in ("branches", "depths"):
        pooled = merge_all(r[spec.observable] for r in results)
        other = "depths" if spec.observable == "branches" else "branches"
        alt = merge_all(r[other] for r in results)
        key = "max_branch" if spec.observable == "branches" else "max_depth"
        maxima = Histogram.from_values([r["record"][key] for r in results], spec.replicas)
        fit = {"observable": spec.observable, "fit": _fit_or_error(pooled, spec.min_count),
               f"{other}_fit": _fit_or_error(alt, spec.min_count),
               "total": pooled.total, "replicas": spec.replicas}
        bounds = bound_check(empirical_tail(maxima), consts, spec.n, spec.m, "branch")
    elif spec.observable == "slash":
        pooled = Histogram.from_values([r["record"]["slash_size"] for r in results], spec.replicas)
        maxima = pooled
        fit = {"observable": "slash", "fit": _fit_or_error(pooled, spec.min_count),
               "total": pooled.total, "replicas": spec.replicas}
        bounds = bound_check(empirical_tail(maxima, strict=True), consts, spec.n, spec.m, "slash")
    else:
        pooled = merge_all(r["avalanches"] for r in results)
        maxima = Histogram.from_values([r["record"]["max_topplings"] for r in results],
                                       spec.replicas)
        distinct = merge_all(r["distinct"] for r in results)
        fit = {"observable": "avalanches", "fit": _fit_or_error(pooled, spec.min_count),
               "total": pooled.total, "replicas": spec.replicas}
        write("distinct_histogram.csv", distinct.to_csv())
        rows = [row for r in results for row in r["rows"]]
        write("avalanches.csv", "replica,grain,site,topplings,distinct_sites\n"
              + "".join(",".join(map(str, row)) + "\n" for row in rows))

    write("histogram.csv", pooled.to_csv())
    write("maxima.csv", maxima.to_csv())
    write("fit.json", _dump_json(fit))
    if bounds is not None:
        write("bounds.json", _dump_json(bounds))
    if spec.svg:
        write("histogram.svg", svg_bar_chart(pooled, f"{spec.observable}, n={spec.n}, m={spec.m}"))
    return {
        "files": files,
        "fit": fit,
        "bounds_passed": None if bounds is None else bounds["passed"],
        "histogram": pooled,
        "maxima": maxima,
    }
