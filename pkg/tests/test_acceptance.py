"""Exit criteria. Each test prints one PASS/FAIL line in the terminal summary."""

import json
import time

import numpy as np
import pytest

from cylinder_ust import oracle, sandpile
from cylinder_ust.cli import main
from cylinder_ust.experiment import ExperimentSpec, run_experiment
from cylinder_ust.graph import build
from cylinder_ust.rng import RngStream
from cylinder_ust.sampler import loop_erase, sample_tree, walk_until_hit, wilson_extend
from cylinder_ust.statistics import bound_constants, fit_exponential

from .conftest import ACCEPTANCE_RESULTS

SEED = 1
ALPHA = 1e-3


def report(number, name, passed, detail):
    ACCEPTANCE_RESULTS.append(f"[{'PASS' if passed else 'FAIL'}] {number}. {name}: {detail}")
    assert passed, detail


@pytest.fixture(scope="module")
def branch_runs(tmp_path_factory):
    runs = {}
    for n in (3, 4):
        for sink in (False, True):
            out = tmp_path_factory.mktemp(f"branches_{n}_{int(sink)}")
            started = time.perf_counter()
            summary = run_experiment(ExperimentSpec(
                n=n, m=1000, sink=sink, replicas=100, seed=SEED, out_dir=str(out)))
            summary["seconds"] = time.perf_counter() - started
            summary["bounds"] = json.loads((out / "bounds.json").read_text())
            runs[n, sink] = summary
    return runs


def test_01_uniformity_oracle(capsys):
    started = time.perf_counter()
    code = main(["verify-uniformity", "--n", "3", "--m", "2", "--samples", "100000",
                 "--seed", str(SEED)])
    seconds = time.perf_counter() - started
    rep = json.loads(capsys.readouterr().out)
    passed = (code == 0 and rep["p_value"] > ALPHA and rep["count"] == rep["determinant"] == 75
              and seconds < 60)
    report(1, "uniformity on G_{3,2}", passed,
           f"p={rep['p_value']:.4f}, |universe|={rep['count']}, det={rep['determinant']}, "
           f"{seconds:.1f}s")


def test_02_order_independence():
    g = build(3, 2)
    universe = oracle.enumerate_spanning_trees(g)
    ra, rb = RngStream(SEED, 0), RngStream(SEED, 1)
    a = [sample_tree(g, ra, "default").edges.tolist() for _ in range(100_000)]
    b = [sample_tree(g, rb, "reversed").edges.tolist() for _ in range(100_000)]
    stat, p = oracle.two_sample_chi_square(a, b, universe)
    report(2, "order independence on G_{3,2}", p > ALPHA, f"chi2={stat:.1f}, p={p:.4f}")


def test_03_contraction_consistency():
    g = build(3, 2)
    edge = 4  # ring edge (1,1)-(2,1), away from the root: sampled on G/e
    universe = [t for t in oracle.enumerate_spanning_trees(g) if edge in t]
    rng = RngStream(SEED, 0)
    samples = [wilson_extend(g, [edge], rng=rng).edges.tolist() for _ in range(100_000)]
    contains = all(edge in s for s in samples)
    stat, p = oracle.chi_square_uniformity(samples, universe)
    report(3, "conditional law given one edge", contains and p > ALPHA,
           f"{len(universe)} trees contain the edge, chi2={stat:.1f}, p={p:.4f}")


@pytest.mark.parametrize("n,lo,hi,reported", [(3, 0.88, 1.18, 1.03), (4, 0.56, 0.86, 0.71)])
def test_04_branch_rate(branch_runs, n, lo, hi, reported):
    run = branch_runs[n, False]
    fit = run["fit"]["fit"]
    depth = run["fit"]["depths_fit"]
    passed = lo <= fit["lambda"] <= hi and run["seconds"] < 600
    report(4, f"branch rate n={n}, m=1000", passed,
           f"lambda={fit['lambda']:.3f} in [{lo}, {hi}] (reported {reported}); "
           f"depth observable lambda={depth['lambda']:.3f}; r2={fit['r_squared']:.3f}; "
           f"{run['seconds']:.1f}s")


@pytest.mark.parametrize("n", [3, 4])
@pytest.mark.parametrize("sink", [False, True])
def test_05_branch_bound(branch_runs, n, sink):
    bounds = branch_runs[n, sink]["bounds"]
    theta = bound_constants(n).theta
    expected_theta = {3: 0.75, 4: (15 / 16) ** 0.5}[n]
    last = max((r for r in bounds["rows"] if r["p"] > 0), key=lambda r: r["l"])
    passed = bounds["passed"] and abs(theta - expected_theta) < 1e-12
    report(5, f"branch tail bound n={n}, m=1000, sink={sink}", passed,
           f"theta={theta:.5f}, first violation={bounds['first_violation']}, "
           f"longest observed l={last['l']} (p={last['p']:.3f} vs bound {last['bound']:.3g})")


def test_06_slash_bound(tmp_path):
    summary = run_experiment(ExperimentSpec(n=3, m=200, sink=True, replicas=1000, seed=SEED,
                                            observable="slash", out_dir=str(tmp_path)))
    bounds = json.loads((tmp_path / "bounds.json").read_text())
    consts = bound_constants(3)
    fit = fit_exponential(summary["histogram"])
    passed = (bounds["passed"] and bounds["strict"] and fit.r_squared >= 0.9
              and abs(consts.delta - 0.75 ** (1 / 25)) < 1e-12)
    report(6, "slash tail bound on G^s_{3,200}", passed,
           f"first violation={bounds['first_violation']}, slash fit lambda={fit.rate:.3f}, "
           f"r2={fit.r_squared:.3f}")


def test_07_loop_erasure():
    g = build(4, 10)
    rng = RngStream(SEED)
    starts = rng.integers(g.num_vertices, 10_000)
    goals = rng.integers(g.num_vertices, 10_000)
    failures = 0
    for s, t in zip(starts.tolist(), goals.tolist()):
        walk = walk_until_hit(g, s, {t}, rng).vertices
        le = loop_erase(walk)
        ok = (len(set(le)) == len(le) and le[0] == walk[0] and le[-1] == walk[-1]
              and loop_erase(le) == le
              and all(b in g.neighbors(a) for a, b in zip(le, le[1:])))
        failures += not ok
    report(7, "loop erasure on 10^4 walks on G_{4,10}", failures == 0, f"{failures} failures")


def test_08_sandpile():
    g31 = build(3, 1, True)
    recurrent = sandpile.recurrent_count(g31)
    trees = oracle.spanning_tree_count(g31)
    g34 = build(3, 4, True)
    rng = np.random.default_rng(SEED)
    abelian_failures = 0
    for _ in range(1000):
        h = rng.integers(0, 4, size=g34.num_cells)
        site = int(rng.integers(0, g34.num_cells))
        a, _ = sandpile.add_and_stabilize(g34, h, site, order="fifo")
        b, _ = sandpile.add_and_stabilize(g34, h, site, order="lifo")
        abelian_failures += not np.array_equal(a, b)
    stream = RngStream(SEED)
    markov_ok = all(sandpile.is_recurrent(g34, sandpile.markov_sample_recurrent(g34, rng=stream))
                    for _ in range(100))
    passed = recurrent == trees and abelian_failures == 0 and markov_ok
    report(8, "sandpile consistency", passed,
           f"#recurrent={recurrent}, #trees={trees}, abelian failures={abelian_failures}, "
           f"markov outputs recurrent={markov_ok}")


def test_09_determinism(tmp_path):
    specs = [
        dict(n=3, m=200, observable="branches"),
        dict(n=4, m=100, observable="depths", trunk="proof"),
        dict(n=3, m=60, sink=True, observable="slash"),
        dict(n=3, m=20, sink=True, observable="avalanches", grains=300, init="stationary"),
    ]
    mismatched = []
    for k, kw in enumerate(specs):
        outputs = []
        for threads in (1, 4):
            out = tmp_path / f"{k}_{threads}"
            run_experiment(ExperimentSpec(replicas=16, seed=SEED, threads=threads, svg=True,
                                          out_dir=str(out), **kw))
            outputs.append({p.name: p.read_bytes() for p in out.iterdir()})
        if outputs[0] != outputs[1]:
            mismatched.append(kw["observable"])
    report(9, "byte-identical outputs for 1 vs 4 threads", not mismatched,
           f"{len(specs)} specs, mismatches: {mismatched or 'none'}")
