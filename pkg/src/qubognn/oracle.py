"""Exhaustive ground truth for small instances and a finite-difference gradient."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Iterator

import numpy as np

from .graphgen import Graph
from .qubo import Problem, QuboInstance

MAX_EXACT_N = 24
_BLOCK_BITS = 16


class SizeCapError(ValueError):
    pass


@dataclass(frozen=True)
class ExactSolution:
    value: float
    assignment: np.ndarray
    count_optimal: int


def _blocks(n: int) -> Iterator[np.ndarray]:
    """All ``2**n`` bit patterns as ``(rows, n)`` uint8 blocks, in integer order.

    Bit ``i`` of the pattern index is variable ``i``.
    """
    k = min(n, _BLOCK_BITS)
    low = np.arange(1 << k, dtype=np.int64)
    low_bits = ((low[:, None] >> np.arange(k)) & 1).astype(np.uint8)
    for high in range(1 << (n - k)):
        high_bits = np.array([(high >> j) & 1 for j in range(n - k)], dtype=np.uint8)
        yield np.hstack([low_bits, np.broadcast_to(high_bits, (low_bits.shape[0], n - k))])


def _scan(n: int, score: Callable[[np.ndarray], np.ndarray], maximize: bool) -> ExactSolution:
    if n > MAX_EXACT_N:
        raise SizeCapError(f"exhaustive search capped at n={MAX_EXACT_N}, got {n}")
    sign = 1.0 if maximize else -1.0
    best, witness, count = -np.inf, None, 0
    for bits in _blocks(n):
        vals = sign * score(bits)
        b = vals.max()
        if b > best + 1e-9:
            best, witness, count = b, bits[int(np.argmax(vals))].astype(np.int64), 0
        count += int((vals >= best - 1e-9).sum())
    best = sign * best
    return ExactSolution(float(best), witness, count)


def cut_sizes(g: Graph, bits: np.ndarray) -> np.ndarray:
    e = g.edge_array()
    if e.size == 0:
        return np.zeros(bits.shape[0])
    return (bits[:, e[:, 0]] != bits[:, e[:, 1]]).sum(axis=1).astype(np.float64)


def independent_set_sizes(g: Graph, bits: np.ndarray) -> np.ndarray:
    """Set sizes, with 0 for any pattern that selects both ends of an edge."""
    e = g.edge_array()
    size = bits.sum(axis=1).astype(np.float64)
    if e.size:
        bad = (bits[:, e[:, 0]] & bits[:, e[:, 1]]).any(axis=1)
        size[bad] = 0.0
    return size


def exact_solve(problem, g: Graph) -> ExactSolution:
    """Optimal MaxCut or MIS value by enumerating every assignment."""
    problem = Problem(problem)
    score = cut_sizes if problem is Problem.MAXCUT else independent_set_sizes
    return _scan(g.n, lambda bits: score(g, bits), maximize=True)


def qubo_energies(q: QuboInstance, bits: np.ndarray) -> np.ndarray:
    x = bits.astype(np.float64)
    return x @ q.diag + (x[:, q.rows] * x[:, q.cols]) @ q.coef


def exact_qubo_min(q: QuboInstance) -> ExactSolution:
    return _scan(q.n, lambda bits: qubo_energies(q, bits), maximize=False)


def gray_code_qubo_min(q: QuboInstance) -> ExactSolution:
    """Same result as :func:`exact_qubo_min`, via single-bit Gray-code updates.

    Pure Python, O(degree) work per step; kept as an independent cross-check.
    """
    n = q.n
    if n > MAX_EXACT_N:
        raise SizeCapError(f"exhaustive search capped at n={MAX_EXACT_N}, got {n}")
    nbrs: list[list[tuple[int, float]]] = [[] for _ in range(n)]
    for i, j, c in zip(q.rows.tolist(), q.cols.tolist(), q.coef.tolist()):
        nbrs[i].append((j, c))
        nbrs[j].append((i, c))
    diag = q.diag.tolist()
    x = [0] * n
    energy = 0.0
    best, best_x, count = 0.0, list(x), 1
    for k in range(1, 1 << n):
        i = (k & -k).bit_length() - 1
        # flipping x_i changes the energy by +-(diag_i + sum of active couplings)
        delta = diag[i] + sum(c for j, c in nbrs[i] if x[j])
        if x[i]:
            energy -= delta
            x[i] = 0
        else:
            energy += delta
            x[i] = 1
        if abs(energy - best) <= 1e-9:
            count += 1
        elif energy < best:
            best, best_x, count = energy, list(x), 1
    return ExactSolution(best, np.asarray(best_x, dtype=np.int64), count)


def finite_diff_grad(f: Callable[[np.ndarray], float], x, h: float = 1e-5) -> np.ndarray:
    """Central differences ``(f(x + h e_i) - f(x - h e_i)) / 2h``."""
    x = np.asarray(x, dtype=np.float64)
    grad = np.empty_like(x)
    flat, gflat = x.reshape(-1), grad.reshape(-1)
    for i in range(flat.size):
        xp = flat.copy()
        xp[i] += h
        xm = flat.copy()
        xm[i] -= h
        gflat[i] = (f(xp.reshape(x.shape)) - f(xm.reshape(x.shape))) / (2.0 * h)
    return grad
