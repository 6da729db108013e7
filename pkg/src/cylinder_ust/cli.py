"""Command line entry point.

Exit codes: 0 success, 1 usage error, 2 runtime error, 3 bound check
failed under ``--assert-bounds``.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import oracle, sandpile
from .experiment import OBSERVABLES, ExperimentSpec, SpecError, run_experiment
from .graph import GraphError, build
from .rng import RngStream
from .sampler import SpanningTree, _orient, sample_tree
from .statistics import Histogram, fit_exponential
from .structure import (branch_lengths, canonical_trunk, proof_trunk, segment_labels,
                        sink_trunk, slash_size, vertex_depths)

EXIT_USAGE, EXIT_RUNTIME, EXIT_BOUNDS = 1, 2, 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _graph_args(p, sink=True):
    p.add_argument("--n", type=int, required=True, help="circumference")
    p.add_argument("--m", type=int, required=True, help="number of rings")
    if sink:
        p.add_argument("--sink", action="store_true", help="add the sink vertex")


def _global_args(p, top=False):
    default = None if top else argparse.SUPPRESS
    p.add_argument("--seed", type=int, default=default)
    p.add_argument("--threads", type=int, default=default)
    p.add_argument("--out-dir", default=default)


def make_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="cylinder-ust", description=__doc__.splitlines()[0])
    _global_args(parser, top=True)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", parser_class=_Parser, required=True)

    graph = sub.add_parser("graph", help="graph queries")
    gsub = graph.add_subparsers(dest="graph_command", parser_class=_Parser, required=True)
    info = gsub.add_parser("info", help="vertex, edge and degree counts as JSON")
    _graph_args(info)
    _global_args(info)

    sample = sub.add_parser("sample", help="sample USTs as JSON lines")
    _graph_args(sample)
    _global_args(sample)
    sample.add_argument("--count", type=int, default=1)
    sample.add_argument("--trace", action="store_true")
    sample.add_argument("--order", choices=["default", "trunk-first", "reversed", "center"], default="default")
    sample.add_argument("--output", help="write here instead of stdout")

    br = sub.add_parser("branches", help="branch records and length histogram")
    _global_args(br)
    br.add_argument("--in", dest="input", required=True)
    br.add_argument("--trunk", choices=["canonical", "proof"], default="canonical")
    br.add_argument("--hist", help="CSV path for the pooled branch-length histogram")

    sl = sub.add_parser("slash", help="LR-slash records and size histogram")
    _global_args(sl)
    sl.add_argument("--in", dest="input", required=True)
    sl.add_argument("--hist", help="CSV path for the slash-size histogram")

    fit = sub.add_parser("fit", help="exponential fit of a length,count CSV")
    _global_args(fit)
    fit.add_argument("--input", required=True)
    fit.add_argument("--min-count", type=int, default=10)

    vu = sub.add_parser("verify-uniformity", help="chi-square of Wilson samples against enumeration")
    _graph_args(vu)
    _global_args(vu)
    vu.add_argument("--samples", type=int, default=100_000)
    vu.add_argument("--order", choices=["default", "trunk-first", "reversed", "center"], default="default")

    ct = sub.add_parser("count-trees", help="spanning tree count by Matrix-Tree")
    _graph_args(ct)
    _global_args(ct)

    sp = sub.add_parser("sandpile", help="sandpile experiments")
    ssub = sp.add_subparsers(dest="sandpile_command", parser_class=_Parser, required=True)
    av = ssub.add_parser("avalanches", help="avalanche records as CSV")
    _graph_args(av, sink=False)
    _global_args(av)
    av.add_argument("--grains", type=int, default=1000)
    av.add_argument("--init", choices=["max", "stationary"], default="max")
    av.add_argument("--site", type=int, help="fixed grain site (default: uniform cell)")
    rc = ssub.add_parser("recurrent-count", help="exhaustive recurrence scan (tiny graphs)")
    _graph_args(rc, sink=False)
    _global_args(rc)

    run = sub.add_parser("run", help="full experiment: sample, measure, fit, check bounds")
    _graph_args(run)
    _global_args(run)
    run.add_argument("--replicas", type=int, default=100)
    run.add_argument("--observable", choices=OBSERVABLES, default="branches")
    run.add_argument("--trunk", choices=["canonical", "proof"], default="canonical")
    run.add_argument("--min-count", type=int, default=10)
    run.add_argument("--grains", type=int, default=1000)
    run.add_argument("--init", choices=["max", "stationary"], default="max")
    run.add_argument("--save-trees", action="store_true")
    run.add_argument("--svg", action="store_true")
    run.add_argument("--assert-bounds", action="store_true")
    return parser


def _seed(args) -> int:
    return 0 if args.seed is None else args.seed


def _emit(text: str, path=None):
    if path:
        Path(path).write_text(text)
    else:
        sys.stdout.write(text)


def tree_record(g, t: SpanningTree, index: int, trace: bool) -> dict:
    record = {
        "index": index,
        "n": g.n,
        "m": g.m,
        "sink": g.has_sink,
        "root": int(t.root),
        "edge_ids": t.edges.tolist(),
        "edges": [list(g.edge_pair(e)) for e in t.edges.tolist()],
    }
    if trace:
        record["trace"] = t.trace
    return record


def read_trees(path):
    """Yield ``(graph, tree)`` pairs from a JSON-lines file written by ``sample``."""
    graphs = {}
    with open(path) as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            try:
                rec = json.loads(line)
                key = (rec["n"], rec["m"], rec["sink"])
            except (ValueError, KeyError) as exc:
                raise ValueError(f"{path}:{lineno}: bad tree record ({exc})") from exc
            g = graphs.get(key) or graphs.setdefault(key, build(*key))
            if "edge_ids" in rec:
                edges = rec["edge_ids"]
            else:
                lookup = {}
                for e in range(g.num_edges):
                    lookup.setdefault(g.edge_pair(e), []).append(e)
                edges = [lookup[tuple(p)].pop(0) for p in rec["edges"]]
            parent, parent_edge = _orient(g, rec["root"], edges)
            yield g, SpanningTree(rec["root"], parent, parent_edge, rec.get("trace")), rec


def cmd_graph_info(args):
    _emit(json.dumps(build(args.n, args.m, args.sink).info(), sort_keys=True) + "\n")


def cmd_sample(args):
    g = build(args.n, args.m, args.sink)
    if args.count < 0:
        raise UsageError("--count must be non-negative")
    lines = []
    for k in range(args.count):
        t = sample_tree(g, RngStream(_seed(args), k), args.order, trace=args.trace)
        lines.append(json.dumps(tree_record(g, t, k, args.trace)) + "\n")
    _emit("".join(lines), args.output)


def cmd_branches(args):
    pooled = Histogram()
    lines = []
    for g, t, rec in read_trees(args.input):
        if g.has_sink:
            trunk, _ = sink_trunk(g, t)
        elif args.trunk == "proof":
            trunk = proof_trunk(g, t)
        else:
            trunk = canonical_trunk(g, t)
        lengths = branch_lengths(t, trunk)
        depths = vertex_depths(t, trunk)
        pooled = pooled + Histogram.from_values(lengths)
        lines.append(json.dumps({
            "index": rec.get("index"),
            "trunk_mode": trunk.mode,
            "trunk_length": trunk.length,
            "branch_count": int(len(lengths)),
            "max_branch": int(lengths.max()) if len(lengths) else 0,
            "max_depth": int(depths.max()),
            "lengths": Histogram.from_values(lengths).counts,
        }, sort_keys=True) + "\n")
    _emit("".join(lines))
    _write_hist(pooled, args.hist, args, "branch_histogram.csv")


def cmd_slash(args):
    sizes = []
    lines = []
    for g, t, rec in read_trees(args.input):
        if not g.has_sink:
            raise UsageError("slash needs trees sampled with --sink")
        labels = segment_labels(g, t)
        _, index = sink_trunk(g, t, labels)
        size = slash_size(g, t)
        sizes.append(size)
        lines.append(json.dumps({
            "index": rec.get("index"),
            "slash_size": size,
            "class_index": index,
            "left_size": int(np.count_nonzero(labels == 1)),
            "right_size": int(np.count_nonzero(labels == 2)),
        }, sort_keys=True) + "\n")
    _emit("".join(lines))
    _write_hist(Histogram.from_values(sizes, len(sizes)), args.hist, args, "slash_histogram.csv")


def _write_hist(h, path, args, default_name):
    if path is None:
        out_dir = getattr(args, "out_dir", None)
        if out_dir is None:
            return
        Path(out_dir).mkdir(parents=True, exist_ok=True)
        path = Path(out_dir) / default_name
    Path(path).write_text(h.to_csv())


def cmd_fit(args):
    h = Histogram.from_csv(Path(args.input).read_text())
    _emit(json.dumps(fit_exponential(h, args.min_count).to_dict(), sort_keys=True) + "\n")


def cmd_verify_uniformity(args):
    g = build(args.n, args.m, args.sink)
    universe = oracle.enumerate_spanning_trees(g)
    rng = RngStream(_seed(args), 0)
    samples = (sample_tree(g, rng, args.order).edges.tolist() for _ in range(args.samples))
    stat, p = oracle.chi_square_uniformity(samples, universe)
    report = {"count": len(universe), "determinant": oracle.spanning_tree_count(g),
              "samples": args.samples, "statistic": stat, "p_value": p}
    _emit(json.dumps(report, sort_keys=True) + "\n")


def cmd_count_trees(args):
    _emit(f"{oracle.spanning_tree_count(build(args.n, args.m, args.sink))}\n")


def cmd_avalanches(args):
    g = build(args.n, args.m, True)
    rng = RngStream(_seed(args), 0)
    heights = sandpile.max_stable(g) if args.init == "max" else \
        sandpile.markov_sample_recurrent(g, rng=rng)
    if args.site is not None:
        if not 0 <= args.site < g.num_cells:
            raise UsageError("--site must be a cell id")
        sites = np.full(args.grains, args.site, dtype=np.int64)
    else:
        sites = sandpile.random_sites(g, args.grains, rng)
    _, out = sandpile.avalanches(g, heights, sites)
    rows = "".join(f"{k},{s},{t},{d}\n" for k, (s, (t, d)) in enumerate(zip(sites, out)))
    _emit("grain,site,topplings,distinct_sites\n" + rows)
    _write_hist(Histogram.from_values(out[:, 0], 1), None, args, "avalanche_histogram.csv")


def cmd_recurrent_count(args):
    _emit(f"{sandpile.recurrent_count(build(args.n, args.m, True))}\n")


def cmd_run(args):
    spec = ExperimentSpec(
        n=args.n, m=args.m, sink=args.sink, replicas=args.replicas, seed=_seed(args),
        trunk=args.trunk, observable=args.observable, min_count=args.min_count,
        grains=args.grains, init=args.init, save_trees=args.save_trees, svg=args.svg,
        out_dir=args.out_dir or "out", threads=args.threads)
    try:
        spec.validate()
    except SpecError as exc:
        raise UsageError(str(exc)) from exc
    summary = run_experiment(spec)
    _emit(json.dumps({"files": summary["files"], "fit": summary["fit"],
                      "bounds_passed": summary["bounds_passed"]}, indent=2, sort_keys=True) + "\n")
    if args.assert_bounds and summary["bounds_passed"] is False:
        return EXIT_BOUNDS
    return 0


COMMANDS = {
    "sample": cmd_sample,
    "branches": cmd_branches,
    "slash": cmd_slash,
    "fit": cmd_fit,
    "verify-uniformity": cmd_verify_uniformity,
    "count-trees": cmd_count_trees,
    "run": cmd_run,
}


def main(argv=None) -> int:
    args = make_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if args.command == "graph":
        handler = cmd_graph_info
    elif args.command == "sandpile":
        handler = cmd_avalanches if args.sandpile_command == "avalanches" else cmd_recurrent_count
    else:
        handler = COMMANDS[args.command]
    try:
        return handler(args) or 0
    except (UsageError, GraphError, SpecError) as exc:
        print(f"cylinder-ust: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except Exception as exc:  # noqa: BLE001 - surfaced as a runtime failure
        print(f"cylinder-ust: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
