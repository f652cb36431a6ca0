"""Rounding, best-of-N / average aggregation and mean reciprocal rank."""

from __future__ import annotations

from collections import defaultdict
from typing import Iterable, Mapping, Sequence

import numpy as np


class IncompleteTableError(ValueError):
    pass


def round_assignment(a_post) -> np.ndarray:
    """Threshold at 0.5; a value of exactly 0.5 rounds up."""
    a = np.asarray(a_post, dtype=np.float64)
    if np.any(~(a >= 0.0) | ~(a <= 1.0)):
        raise ValueError("activations must lie in [0, 1]")
    return (a >= 0.5).astype(np.int64)


def nullify(value: float, feasible: bool) -> float:
    return float(value) if feasible else 0.0


def best_of_n(values: Sequence[float]) -> float:
    if len(values) == 0:
        raise ValueError("best_of_n of an empty sequence")
    return float(max(values))


def avg(values: Sequence[float]) -> float:
    if len(values) == 0:
        raise ValueError("avg of an empty sequence")
    return float(sum(values) / len(values))


AGGREGATORS = {"bon": best_of_n, "avg": avg}


def reciprocal_ranks(scores: Mapping[str, float], ties: str = "min") -> dict[str, float]:
    """Reciprocal rank of each key when sorted by score, highest first.

    ``ties="min"`` gives every member of a tied block the best rank of the
    block (competition ranking). ``ties="mean"`` gives each member the mean
    of the reciprocal ranks the block spans.
    """
    if ties not in ("min", "mean"):
        raise ValueError("ties must be 'min' or 'mean'")
    ordered = sorted(scores.values(), reverse=True)
    out = {}
    for key, s in scores.items():
        first = ordered.index(s) + 1
        if ties == "min":
            out[key] = 1.0 / first
        else:
            size = ordered.count(s)
            out[key] = sum(1.0 / r for r in range(first, first + size)) / size
    return out


def aggregate(table: Mapping[tuple, tuple[float, bool]], aggregator: str = "bon"
              ) -> dict[tuple[str, str], float]:
    """Collapse ``{(graph, variant, seed): (value, feasible)}`` to ``{(graph, variant): score}``.

    Infeasible runs count as 0. The grid must be complete.
    """
    agg = AGGREGATORS[aggregator]
    groups: dict[tuple, list[float]] = defaultdict(list)
    seeds_by_graph: dict[object, set] = defaultdict(set)
    variants, graphs = set(), set()
    for (graph, variant, seed), (value, feasible) in table.items():
        groups[graph, variant].append(nullify(value, feasible))
        seeds_by_graph[graph, variant].add(seed)
        variants.add(variant)
        graphs.add(graph)
    _check_complete(graphs, variants, seeds_by_graph)
    return {key: agg(vals) for key, vals in groups.items()}


def _check_complete(graphs: Iterable, variants: set, seeds: Mapping) -> None:
    expected = None
    for graph in graphs:
        for variant in variants:
            s = seeds.get((graph, variant))
            if not s:
                raise IncompleteTableError(f"missing runs for graph={graph!r}, variant={variant!r}")
            if expected is None:
                expected = s
            elif s != expected:
                raise IncompleteTableError(
                    f"seed set for graph={graph!r}, variant={variant!r} differs from the rest"
                )


def mrr(table: Mapping[tuple, tuple[float, bool]], aggregator: str = "bon",
        ties: str = "min") -> dict[str, float]:
    """Mean over graphs of each variant's reciprocal rank."""
    scores = aggregate(table, aggregator)
    by_graph: dict[object, dict[str, float]] = defaultdict(dict)
    for (graph, variant), s in scores.items():
        by_graph[graph][variant] = s
    if not by_graph:
        raise IncompleteTableError("empty result table")
    totals: dict[str, float] = defaultdict(float)
    for per_variant in by_graph.values():
        for variant, rr in reciprocal_ranks(per_variant, ties).items():
            totals[variant] += rr
    return {v: t / len(by_graph) for v, t in sorted(totals.items())}


def mrr_from_scores(scores: Mapping[object, Mapping[str, float]], ties: str = "min") -> dict[str, float]:
    """Same as :func:`mrr` for pre-aggregated ``{graph: {variant: score}}``."""
    table = {(g, v, 0): (s, True) for g, per in scores.items() for v, s in per.items()}
    return mrr(table, "bon", ties)
