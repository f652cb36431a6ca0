"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line.

Run alone with ``pytest -v -s tests/test_acceptance.py`` or as a script with
``python tests/test_acceptance.py``. Criteria 4 to 6 and 8 train at the full
1e5-epoch budget and take several minutes each on one core.
"""

from __future__ import annotations

import functools
import itertools
import sys
import tempfile
import time
from pathlib import Path

import numpy as np
import pytest

from qubognn import cli, gradcheck
from qubognn.graphgen import Graph, generate_regular
from qubognn.metrics import avg, best_of_n, mrr, mrr_from_scores, nullify
from qubognn.oracle import exact_qubo_min, exact_solve
from qubognn.qubo import QuboInstance, TNorm, encode_maxcut, encode_mis, hamiltonian, objective_value
from qubognn.trainer import VARIANTS, read_trace

FULL_BUDGET = 100_000
_WORK = Path(tempfile.mkdtemp(prefix="qubognn-acceptance-"))
_emit_hook = None


def emit(number: int, passed: bool, detail: str) -> None:
    line = f"criterion {number}: {'PASS' if passed else 'FAIL'}  {detail}"
    if _emit_hook is not None:
        with _emit_hook():
            print(line)
    else:
        print(line)


@pytest.fixture(autouse=True)
def _uncaptured(capsys):
    global _emit_hook
    _emit_hook = capsys.disabled
    yield
    _emit_hook = None


def experiment(name, **kw) -> cli.ExperimentConfig:
    out = _WORK / name
    cfg = cli.ExperimentConfig(out=out, sizes=[100], max_epochs=FULL_BUDGET, **kw).validate()
    cli.cmd_generate(cfg)
    cli.cmd_run(cfg)
    return cfg


def bon_means(cfg) -> dict[str, float]:
    rows = cli.aggregate_rows(cli.read_results(cfg.out / "results.csv"))
    return {r["variant"]: r["bon"] for r in rows}


def per_graph_bon(cfg) -> dict[str, dict[str, float]]:
    out: dict[str, dict[str, list]] = {}
    for r in cli.read_results(cfg.out / "results.csv"):
        out.setdefault(r["variant"], {}).setdefault(r["graph_id"], []).append(
            nullify(r["objective"], r["feasible"]))
    return {v: {g: best_of_n(vals) for g, vals in per.items()} for v, per in out.items()}


@functools.lru_cache(maxsize=None)
def sparse_maxcut(tag: str = "c4") -> cli.ExperimentConfig:
    return experiment(tag, problem="maxcut", degrees=[3], graphs=5, seeds=5,
                      variants=["baseline"], trace=True)


def _random_graph(rng) -> Graph:
    n = int(rng.integers(4, 13))
    if rng.random() < 0.5:
        p = rng.uniform(0.1, 0.9)
        edges = [(i, j) for i, j in itertools.combinations(range(n), 2) if rng.random() < p]
        return Graph(n, tuple(edges))
    d = int(rng.integers(1, n))
    return generate_regular(n, d - (n * d) % 2 or 2, rng)


def criterion_1():
    rng = np.random.default_rng(1)
    t0 = time.perf_counter()
    bad = []
    count = 200
    for k in range(count):
        g = _random_graph(rng)
        if exact_qubo_min(encode_maxcut(g)).value != -exact_solve("maxcut", g).value:
            bad.append((k, "maxcut"))
        sol = exact_qubo_min(encode_mis(g, penalty=2.0))
        size, feasible = objective_value("mis", g, sol.assignment)
        best = exact_solve("mis", g).value
        if not (feasible and size == best and sol.value == -best):
            bad.append((k, "mis"))
    dt = time.perf_counter() - t0
    passed = not bad and dt < 60
    return passed, f"{count} graphs, {len(bad)} mismatches, {dt:.1f}s (limit 60s)"


def criterion_2():
    rng = np.random.default_rng(2)
    t0 = time.perf_counter()
    count, mismatches = 100, 0
    for _ in range(count):
        n = int(rng.integers(1, 11))
        Q = rng.integers(-9, 10, size=(n, n)).astype(np.float64)
        q = QuboInstance.from_dense(Q)
        X = np.array(list(itertools.product([0.0, 1.0], repeat=n)))
        ref = np.einsum("ki,ij,kj->k", X, Q, X)
        for x, r in zip(X, ref):
            for t in TNorm:
                mismatches += hamiltonian(q, x, t) != r
    dt = time.perf_counter() - t0
    passed = mismatches == 0 and dt < 60
    return passed, f"{count} instances x 3 t-norms, {mismatches} mismatches, {dt:.1f}s (limit 60s)"


def criterion_3():
    t0 = time.perf_counter()
    worst: dict[str, float] = {}
    failures = 0
    for res, ok in gradcheck.run_suite(points=50, seed=3, tol=1e-4):
        worst[res.variant] = max(worst.get(res.variant, 0.0), res.rel_error)
        failures += not ok
    dt = time.perf_counter() - t0
    passed = failures == 0 and len(worst) == 8 and dt < 120
    detail = ", ".join(f"{k} {v:.1e}" for k, v in worst.items())
    return passed, f"50 points x 8 variants, {failures} above 1e-4; max rel error: {detail}; {dt:.0f}s"


def criterion_4():
    t0 = time.perf_counter()
    bon = bon_means(sparse_maxcut())["baseline"]
    target = 129.25
    passed = abs(bon - target) <= 0.15 * target
    return passed, (f"MaxCut n=100 d=3 baseline BoN mean {bon:.2f}, target {target} +-15% "
                    f"[{0.85 * target:.2f}, {1.15 * target:.2f}] ({time.perf_counter() - t0:.0f}s)")


def criterion_5():
    t0 = time.perf_counter()
    dense = experiment("c5-maxcut", problem="maxcut", degrees=[30], graphs=5, seeds=5,
                       variants=list(VARIANTS))
    bon = bon_means(dense)
    collapse = ["baseline", "temp-lin", "temp-log", "temp-exp", "fuzzy-std"]
    rescue = ["bin-ste", "bin-sig", "fuzzy-luk"]
    threshold = 0.8 * 631.70
    ok_collapse = all(bon[v] == 0 for v in collapse)
    ok_rescue = all(bon[v] >= threshold for v in rescue)

    mis = experiment("c5-mis", problem="mis", degrees=[10], graphs=5, seeds=5,
                     variants=["baseline", "fuzzy-luk"])
    pg = per_graph_bon(mis)
    luk, base = bon_means(mis)["fuzzy-luk"], bon_means(mis)["baseline"]
    dominates = all(pg["fuzzy-luk"][g] > pg["baseline"][g] for g in pg["baseline"])
    close = abs(luk - 16.75) <= 0.3 * 16.75
    passed = ok_collapse and ok_rescue and dominates and close
    detail = (
        "MaxCut d=30 BoN " + ", ".join(f"{v} {bon[v]:.1f}" for v in VARIANTS)
        + f" | collapse (BoN=0) {'ok' if ok_collapse else 'violated'}"
        + f", rescue (>= {threshold:.2f}) {'ok' if ok_rescue else 'violated'}"
        + f" | MIS d=10 fuzzy-luk {luk:.2f} vs baseline {base:.2f}, per-graph dominance "
        + f"{'ok' if dominates else 'violated'}, within 30% of 16.75 {'ok' if close else 'violated'}"
        + f" ({time.perf_counter() - t0:.0f}s)"
    )
    return passed, detail


def _post_fraction_above(h, cut=0.9) -> float:
    return h.counts[h.edges[:-1] >= cut - 1e-12].sum() / h.counts.sum()


def _post_mean(h) -> float:
    centers = 0.5 * (h.edges[:-1] + h.edges[1:])
    return float(centers @ h.counts / h.counts.sum())


def _traces(cfg, gid):
    paths = sorted((cfg.out / "traces").glob(f"{gid}__baseline__s*.csv"))
    return [read_trace(p)["post"] for p in paths]


def criterion_6():
    t0 = time.perf_counter()
    sparse = sparse_maxcut()
    early, late = [], []
    for post in _traces(sparse, cli.graph_id(100, 3, 0)):
        epochs = sorted(post)
        k = max(1, len(epochs) // 10)
        early.append(np.mean([_post_fraction_above(post[e]) for e in epochs[:k]]))
        late.append(np.mean([_post_fraction_above(post[e]) for e in epochs[-k:]]))
    ok_sparse = len(early) == 5 and np.mean(early) < 0.05 and np.mean(late) > 0.2

    dense = experiment("c6-d50", problem="maxcut", degrees=[50], graphs=1, seeds=5,
                       variants=["baseline"], trace=True)
    final_above, final_mean = [], []
    for post in _traces(dense, cli.graph_id(100, 50, 0)):
        h = post[max(post)]
        final_above.append(_post_fraction_above(h))
        final_mean.append(_post_mean(h))
    ok_dense = len(final_mean) == 5 and np.mean(final_above) < 0.01 and np.mean(final_mean) < 0.05
    detail = (f"d=3: frac>0.9 early {np.mean(early):.3f} (<0.05), late {np.mean(late):.3f} (>0.2) "
              f"{'ok' if ok_sparse else 'violated'} | d=50: final frac>0.9 "
              f"{np.mean(final_above):.3f} (<0.01), final mean {np.mean(final_mean):.3f} (<0.05) "
              f"{'ok' if ok_dense else 'violated'} ({time.perf_counter() - t0:.0f}s)")
    return ok_sparse and ok_dense, detail


def criterion_7():
    checks = {
        "bon(3,5,2)=5": best_of_n([3, 5, 2]) == 5,
        "bon(zeros)=0": best_of_n([0, 0, 0]) == 0,
        "bon(single)": best_of_n([4.5]) == 4.5,
        "avg(3,5,2)=10/3": avg([3, 5, 2]) == pytest.approx(10 / 3),
        "avg nullified=8/3": avg([nullify(4, True), nullify(7, False), nullify(4, True)])
        == pytest.approx(8 / 3),
        "avg all infeasible=0": avg([nullify(3, False), nullify(2, False)]) == 0,
        "mrr (10,5,1)": mrr_from_scores({"g": {"a": 10, "b": 5, "c": 1}})
        == pytest.approx({"a": 1, "b": 1 / 2, "c": 1 / 3}),
        "mrr all tied (min)=1": mrr_from_scores({"g": {v: 0 for v in "abcd"}})
        == {v: 1.0 for v in "abcd"},
        "mrr all tied (mean)=25/48": mrr_from_scores({"g": {v: 0 for v in "abcd"}}, ties="mean")
        == pytest.approx({v: 25 / 48 for v in "abcd"}),
        "mrr reversed=0.75": mrr_from_scores({"g1": {"a": 2, "b": 1}, "g2": {"a": 1, "b": 2}})
        == {"a": 0.75, "b": 0.75},
        "mrr via nullified avg": mrr(
            {("g", "a", 0): (4, True), ("g", "a", 1): (9, False), ("g", "b", 0): (3, True),
             ("g", "b", 1): (3, True)}, "avg") == {"a": 0.5, "b": 1.0},
    }
    failed = [k for k, ok in checks.items() if not ok]
    return not failed, f"{len(checks) - len(failed)}/{len(checks)} hand-computed checks" + (
        f"; failed: {', '.join(failed)}" if failed else "")


def criterion_8():
    t0 = time.perf_counter()
    first = sparse_maxcut().out / "results.csv"
    again = sparse_maxcut("c8").out / "results.csv"
    same = first.read_bytes() == again.read_bytes()
    traces_same = all(
        p.read_bytes() == (again.parent / "traces" / p.name).read_bytes()
        for p in (first.parent / "traces").iterdir()
    )
    return same and traces_same, (f"rerun of criterion 4 results CSV "
                                  f"{'byte-identical' if same else 'differs'}, trace CSVs "
                                  f"{'identical' if traces_same else 'differ'} "
                                  f"({time.perf_counter() - t0:.0f}s)")


CRITERIA = [criterion_1, criterion_2, criterion_3, criterion_4, criterion_5, criterion_6,
            criterion_7, criterion_8]


def _check(number):
    passed, detail = CRITERIA[number - 1]()
    emit(number, passed, detail)
    assert passed, detail


def test_criterion_1_oracle_equivalence():
    _check(1)


def test_criterion_2_fuzzy_binary_agreement():
    _check(2)


def test_criterion_3_gradient_suite():
    _check(3)


@pytest.mark.slow
def test_criterion_4_sparse_regime():
    _check(4)


@pytest.mark.slow
def test_criterion_5_dense_collapse_and_rescue():
    _check(5)


@pytest.mark.slow
def test_criterion_6_phase_transition_trace():
    _check(6)


def test_criterion_7_metrics():
    _check(7)


@pytest.mark.slow
def test_criterion_8_determinism():
    _check(8)


if __name__ == "__main__":
    results = []
    for i, fn in enumerate(CRITERIA, start=1):
        passed, detail = fn()
        emit(i, passed, detail)
        results.append(passed)
    sys.exit(0 if all(results) else 1)
