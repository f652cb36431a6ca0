import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from qubognn.metrics import (IncompleteTableError, aggregate, avg, best_of_n, mrr,
                             mrr_from_scores, nullify, reciprocal_ranks, round_assignment)


def test_round_assignment():
    np.testing.assert_array_equal(round_assignment([0.2, 0.8]), [0, 1])
    np.testing.assert_array_equal(round_assignment([0.5]), [1])
    np.testing.assert_array_equal(round_assignment([0.0, 1.0, 1.0]), [0, 1, 1])
    with pytest.raises(ValueError):
        round_assignment([1.5])
    with pytest.raises(ValueError):
        round_assignment([np.nan])


@settings(max_examples=50)
@given(st.lists(st.floats(0, 1), min_size=1, max_size=30))
def test_rounding_idempotent(xs):
    r = round_assignment(xs)
    np.testing.assert_array_equal(round_assignment(r.astype(float)), r)


def test_bon_avg_examples():
    assert best_of_n([3, 5, 2]) == 5
    assert best_of_n([0, 0, 0]) == 0
    assert best_of_n([7]) == 7
    assert avg([3, 5, 2]) == pytest.approx(10 / 3)
    vals = [nullify(4, True), nullify(9, False), nullify(4, True)]
    assert avg(vals) == pytest.approx(8 / 3)
    assert avg([nullify(3, False), nullify(5, False)]) == 0
    for f in (best_of_n, avg):
        with pytest.raises(ValueError):
            f([])


@settings(max_examples=50)
@given(st.lists(st.floats(-1e6, 1e6), min_size=1, max_size=20))
def test_bon_ge_avg(xs):
    assert best_of_n(xs) >= avg(xs) - 1e-9 * max(1.0, max(abs(x) for x in xs))


def table(values_by_graph, feasible=True):
    return {(g, v, s): (val, feasible)
            for g, per in values_by_graph.items()
            for v, vals in per.items() for s, val in enumerate(vals)}


def test_mrr_examples():
    assert mrr_from_scores({"g": {"a": 10, "b": 5, "c": 1}}) == pytest.approx(
        {"a": 1, "b": 1 / 2, "c": 1 / 3})
    assert mrr_from_scores({"g": {"a": 0, "b": 0, "c": 0}}) == {"a": 1, "b": 1, "c": 1}
    two = mrr_from_scores({"g1": {"a": 2, "b": 1}, "g2": {"a": 1, "b": 2}})
    assert two == {"a": 0.75, "b": 0.75}


def test_mean_tie_scheme():
    four = mrr_from_scores({"g": {v: 0.0 for v in "abcd"}}, ties="mean")
    expect = (1 + 1 / 2 + 1 / 3 + 1 / 4) / 4
    assert four == pytest.approx({v: expect for v in "abcd"})
    mixed = reciprocal_ranks({"a": 5, "b": 3, "c": 3, "d": 1}, ties="mean")
    assert mixed == pytest.approx({"a": 1, "b": (1 / 2 + 1 / 3) / 2, "c": (1 / 2 + 1 / 3) / 2,
                                   "d": 1 / 4})
    assert reciprocal_ranks({"a": 5, "b": 3, "c": 3, "d": 1}) == pytest.approx(
        {"a": 1, "b": 1 / 2, "c": 1 / 2, "d": 1 / 4})
    with pytest.raises(ValueError):
        reciprocal_ranks({"a": 1}, ties="dense")


def test_aggregate_nullifies():
    t = {("g", "a", 0): (4, True), ("g", "a", 1): (9, False), ("g", "a", 2): (4, True),
         ("g", "b", 0): (1, True), ("g", "b", 1): (1, True), ("g", "b", 2): (1, True)}
    assert aggregate(t, "bon") == {("g", "a"): 4, ("g", "b"): 1}
    assert aggregate(t, "avg")[("g", "a")] == pytest.approx(8 / 3)
    assert mrr(t, "avg") == {"a": 1.0, "b": 0.5}


def test_incomplete_grid():
    t = table({"g1": {"a": [1, 2], "b": [3, 4]}, "g2": {"a": [1, 2]}})
    with pytest.raises(IncompleteTableError):
        mrr(t)
    t = table({"g1": {"a": [1, 2], "b": [3]}})
    with pytest.raises(IncompleteTableError):
        aggregate(t)
    with pytest.raises(IncompleteTableError):
        mrr({})


@settings(max_examples=50)
@given(st.lists(st.lists(st.integers(0, 5), min_size=3, max_size=3), min_size=1, max_size=4),
       st.floats(0.01, 100), st.sampled_from(["min", "mean"]))
def test_mrr_properties(rows, scale, ties):
    scores = {f"g{i}": dict(zip("abc", r)) for i, r in enumerate(rows)}
    base = mrr_from_scores(scores, ties)
    assert all(0 < v <= 1 for v in base.values())
    scaled = {g: {v: s * scale for v, s in per.items()} for g, per in scores.items()}
    assert mrr_from_scores(scaled, ties) == pytest.approx(base)
    if all(per["a"] > max(per["b"], per["c"]) for per in scores.values()):
        assert base["a"] == 1
