"""Random d-regular problem graphs and their edge-list text format."""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable

import numpy as np

MAX_RESTARTS = 10_000


class InvalidDegreeError(ValueError):
    pass


class EdgeListParseError(ValueError):
    def __init__(self, lineno: int, msg: str):
        super().__init__(f"line {lineno}: {msg}")
        self.lineno = lineno


@dataclass(frozen=True)
class Graph:
    """Simple undirected graph on nodes ``0..n-1``.

    Edges are stored once each as ``(u, v)`` with ``u < v``, sorted.
    """

    n: int
    edges: tuple[tuple[int, int], ...]
    _degree: tuple[int, ...] = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if self.n < 1:
            raise ValueError("graph needs at least one node")
        canon = []
        for u, v in self.edges:
            u, v = int(u), int(v)
            if u == v:
                raise ValueError(f"self-loop on node {u}")
            if u > v:
                u, v = v, u
            if u < 0 or v >= self.n:
                raise ValueError(f"edge ({u}, {v}) out of range for n={self.n}")
            canon.append((u, v))
        canon.sort()
        for a, b in zip(canon, canon[1:]):
            if a == b:
                raise ValueError(f"duplicate edge {a}")
        object.__setattr__(self, "edges", tuple(canon))
        deg = [0] * self.n
        for u, v in canon:
            deg[u] += 1
            deg[v] += 1
        object.__setattr__(self, "_degree", tuple(deg))

    @property
    def m(self) -> int:
        return len(self.edges)

    @property
    def degree(self) -> tuple[int, ...]:
        return self._degree

    def edge_array(self) -> np.ndarray:
        """Edges as an ``(m, 2)`` int array."""
        return np.asarray(self.edges, dtype=np.int64).reshape(-1, 2)

    def adjacency(self) -> np.ndarray:
        a = np.zeros((self.n, self.n))
        e = self.edge_array()
        a[e[:, 0], e[:, 1]] = 1.0
        a[e[:, 1], e[:, 0]] = 1.0
        return a

    def relabel(self, perm: Iterable[int]) -> "Graph":
        """Graph with node ``i`` renamed to ``perm[i]``."""
        p = list(perm)
        return Graph(self.n, tuple((p[u], p[v]) for u, v in self.edges))


def _as_rng(seed) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)


def _try_pairing(n: int, d: int, rng: np.random.Generator) -> set | None:
    # Pair stubs; keep simple edges, re-pair only the leftover stubs.
    # Returns None when the leftovers admit no new simple edge.
    edges: set[tuple[int, int]] = set()
    stubs = np.repeat(np.arange(n), d)
    while stubs.size:
        rng.shuffle(stubs)
        leftover: Counter = Counter()
        for s1, s2 in stubs.reshape(-1, 2).tolist():
            if s1 > s2:
                s1, s2 = s2, s1
            if s1 != s2 and (s1, s2) not in edges:
                edges.add((s1, s2))
            else:
                leftover[s1] += 1
                leftover[s2] += 1
        if not leftover:
            break
        nodes = sorted(leftover)
        if not any(
            (a, b) not in edges for i, a in enumerate(nodes) for b in nodes[i + 1:]
        ):
            return None
        stubs = np.repeat(np.asarray(nodes), [leftover[v] for v in nodes])
    return edges


def generate_regular(n: int, d: int, seed=None) -> Graph:
    """Sample a simple d-regular graph on ``n`` nodes.

    Deterministic for a fixed integer seed. ``seed`` may also be a
    ``numpy.random.Generator``, which is advanced in place.
    """
    if n * d % 2 != 0:
        raise InvalidDegreeError(f"n*d must be even (n={n}, d={d})")
    if not 0 < d < n:
        raise InvalidDegreeError(f"need 0 < d < n (n={n}, d={d})")
    rng = _as_rng(seed)
    for _ in range(MAX_RESTARTS):
        edges = _try_pairing(n, d, rng)
        if edges is not None:
            return Graph(n, tuple(edges))
    raise InvalidDegreeError(
        f"no simple {d}-regular graph on {n} nodes after {MAX_RESTARTS} restarts"
    )


def density(g: Graph) -> float:
    if g.n < 2:
        raise ValueError("density needs n >= 2")
    return 2 * g.m / (g.n * (g.n - 1))


def write_edgelist(g: Graph, sink) -> None:
    """Write ``g`` as ``"n m"`` followed by one ``"u v"`` line per edge."""
    lines = [f"{g.n} {g.m}\n"] + [f"{u} {v}\n" for u, v in g.edges]
    text = "".join(lines)
    if isinstance(sink, (str, Path)):
        Path(sink).write_text(text, encoding="ascii")
    else:
        sink.write(text)


def _parse_ints(line: str, lineno: int) -> tuple[int, int]:
    parts = line.split()
    if len(parts) != 2:
        raise EdgeListParseError(lineno, f"expected two integers, got {line!r}")
    try:
        return int(parts[0]), int(parts[1])
    except ValueError:
        raise EdgeListParseError(lineno, f"non-integer token in {line!r}") from None


def read_edgelist(source) -> Graph:
    if isinstance(source, (str, Path)):
        text = Path(source).read_text(encoding="ascii")
    else:
        text = source.read()
    lines = text.splitlines()
    if not lines:
        raise EdgeListParseError(1, "missing header")
    n, m = _parse_ints(lines[0], 1)
    body = [(i + 2, ln) for i, ln in enumerate(lines[1:]) if ln.strip()]
    if len(body) != m:
        raise EdgeListParseError(len(lines), f"header declares {m} edges, found {len(body)}")
    edges = []
    for lineno, ln in body:
        u, v = _parse_ints(ln, lineno)
        if not (0 <= u < n and 0 <= v < n) or u == v:
            raise EdgeListParseError(lineno, f"invalid edge ({u}, {v}) for n={n}")
        edges.append((u, v))
    try:
        return Graph(n, tuple(edges))
    except ValueError as exc:
        raise EdgeListParseError(len(lines), str(exc)) from None
