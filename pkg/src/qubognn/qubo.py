"""QUBO encodings of MaxCut and MIS plus the fuzzy-relaxed Hamiltonian.

For binary ``x`` the energy is ``sum_i diag_i x_i + sum_{i<j} c_ij x_i x_j``,
where ``c_ij`` is the combined (symmetric) off-diagonal coefficient. The
relaxed energy replaces every product with a t-norm, including the diagonal
``x_i AND x_i`` terms.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .graphgen import Graph


class Problem(str, enum.Enum):
    MAXCUT = "maxcut"
    MIS = "mis"


class TNorm(str, enum.Enum):
    PRODUCT = "product"
    STANDARD = "standard"
    LUKASIEWICZ = "lukasiewicz"


class Regularizer(str, enum.Enum):
    NONE = "none"
    L1 = "l1"
    ENTROPY = "binary-entropy"


class DomainError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class QuboInstance:
    n: int
    diag: np.ndarray
    rows: np.ndarray
    cols: np.ndarray
    coef: np.ndarray
    problem: Problem | None = None
    penalty: float | None = None

    def __post_init__(self):
        diag = np.asarray(self.diag, dtype=np.float64)
        rows = np.asarray(self.rows, dtype=np.int64)
        cols = np.asarray(self.cols, dtype=np.int64)
        coef = np.asarray(self.coef, dtype=np.float64)
        if diag.shape != (self.n,):
            raise ValueError("diag must have length n")
        if not (rows.shape == cols.shape == coef.shape) or rows.ndim != 1:
            raise ValueError("rows/cols/coef must be equal-length vectors")
        if rows.size:
            if np.any(rows >= cols) or rows.min() < 0 or cols.max() >= self.n:
                raise ValueError("off-diagonal indices must satisfy 0 <= i < j < n")
            keys = rows * self.n + cols
            if np.unique(keys).size != keys.size:
                raise ValueError("duplicate off-diagonal entry")
        for name, arr in (("diag", diag), ("rows", rows), ("cols", cols), ("coef", coef)):
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @classmethod
    def from_dense(cls, Q, problem=None, penalty=None) -> "QuboInstance":
        """Build from a square matrix; ``Q_ij`` and ``Q_ji`` are combined."""
        Q = np.asarray(Q, dtype=np.float64)
        n = Q.shape[0]
        sym = Q + Q.T
        r, c = np.triu_indices(n, k=1)
        keep = sym[r, c] != 0
        return cls(n, np.diag(Q).copy(), r[keep], c[keep], sym[r, c][keep], problem, penalty)

    def to_dense(self) -> np.ndarray:
        """Upper-triangular matrix ``Q`` with ``x @ Q @ x`` equal to the energy."""
        Q = np.diag(self.diag)
        Q[self.rows, self.cols] += self.coef
        return Q

    def quadratic_form(self, x) -> float:
        x = np.asarray(x, dtype=np.float64)
        return float(x @ self.to_dense() @ x)


def encode_maxcut(g: Graph) -> QuboInstance:
    """Energy equals minus the cut size on binary vectors."""
    e = g.edge_array()
    diag = -np.asarray(g.degree, dtype=np.float64)
    return QuboInstance(g.n, diag, e[:, 0], e[:, 1], np.full(g.m, 2.0), Problem.MAXCUT)


def encode_mis(g: Graph, penalty: float = 2.0) -> QuboInstance:
    """Energy is ``-|S| + penalty * (#edges inside S)``."""
    if not penalty > 1:
        raise ValueError("MIS penalty must exceed 1")
    e = g.edge_array()
    return QuboInstance(
        g.n, -np.ones(g.n), e[:, 0], e[:, 1], np.full(g.m, float(penalty)),
        Problem.MIS, float(penalty),
    )


def encode(problem, g: Graph, penalty: float = 2.0) -> QuboInstance:
    problem = Problem(problem)
    return encode_maxcut(g) if problem is Problem.MAXCUT else encode_mis(g, penalty)


def _check_unit(x) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 1:
        raise DomainError("x must be a vector")
    if np.any(~(x >= 0.0) | ~(x <= 1.0)):
        raise DomainError("all components of x must lie in [0, 1]")
    return x


def hamiltonian(q: QuboInstance, x, t=TNorm.PRODUCT) -> float:
    """Relaxed energy with pairwise conjunctions evaluated by t-norm ``t``."""
    x = _check_unit(x)
    if x.shape != (q.n,):
        raise DomainError(f"expected {q.n} variables, got {x.shape[0]}")
    t = TNorm(t)
    xi, xj = x[q.rows], x[q.cols]
    if t is TNorm.PRODUCT:
        self_t, pair_t = x * x, xi * xj
    elif t is TNorm.STANDARD:
        self_t, pair_t = x, np.minimum(xi, xj)
    else:
        self_t = np.maximum(2.0 * x - 1.0, 0.0)
        pair_t = np.maximum(xi + xj - 1.0, 0.0)
    return float(q.diag @ self_t + q.coef @ pair_t)


def hamiltonian_grad(q: QuboInstance, x, t=TNorm.PRODUCT) -> np.ndarray:
    """(Sub)gradient of :func:`hamiltonian` with respect to ``x``.

    Kinks: ``min`` splits a tie equally; Lukasiewicz terms are flat on and
    below ``x_i + x_j = 1`` (diagonal: ``x_i <= 0.5``).
    """
    x = _check_unit(x)
    t = TNorm(t)
    xi, xj = x[q.rows], x[q.cols]
    if t is TNorm.PRODUCT:
        grad = 2.0 * q.diag * x
        gi, gj = q.coef * xj, q.coef * xi
    elif t is TNorm.STANDARD:
        grad = q.diag.copy()
        wi = np.where(xi < xj, 1.0, np.where(xi > xj, 0.0, 0.5))
        gi, gj = q.coef * wi, q.coef * (1.0 - wi)
    else:
        grad = np.where(x > 0.5, 2.0 * q.diag, 0.0)
        active = np.where(xi + xj > 1.0, q.coef, 0.0)
        gi = gj = active
    grad += np.bincount(q.rows, weights=gi, minlength=q.n)
    grad += np.bincount(q.cols, weights=gj, minlength=q.n)
    return grad


def energy_and_grad(q: QuboInstance, x: np.ndarray, t: TNorm) -> tuple[float, np.ndarray]:
    """Unchecked ``(hamiltonian, hamiltonian_grad)`` for the training loop.

    ``x`` must already lie in ``[0, 1]``; ``t`` must be a :class:`TNorm`.
    """
    xi, xj = x[q.rows], x[q.cols]
    if t is TNorm.PRODUCT:
        value = q.diag @ (x * x) + q.coef @ (xi * xj)
        grad = 2.0 * q.diag * x
        grad += np.bincount(q.rows, weights=q.coef * xj, minlength=q.n)
        grad += np.bincount(q.cols, weights=q.coef * xi, minlength=q.n)
    elif t is TNorm.STANDARD:
        value = q.diag @ x + q.coef @ np.minimum(xi, xj)
        wi = np.where(xi < xj, 1.0, np.where(xi > xj, 0.0, 0.5))
        grad = q.diag.copy()
        grad += np.bincount(q.rows, weights=q.coef * wi, minlength=q.n)
        grad += np.bincount(q.cols, weights=q.coef * (1.0 - wi), minlength=q.n)
    else:
        s_self = 2.0 * x - 1.0
        s_pair = xi + xj - 1.0
        value = q.diag @ np.maximum(s_self, 0.0) + q.coef @ np.maximum(s_pair, 0.0)
        grad = np.where(s_self > 0.0, 2.0 * q.diag, 0.0)
        active = np.where(s_pair > 0.0, q.coef, 0.0)
        grad += np.bincount(q.rows, weights=active, minlength=q.n)
        grad += np.bincount(q.cols, weights=active, minlength=q.n)
    return float(value), grad


def _entropy_bits(x: np.ndarray) -> np.ndarray:
    with np.errstate(divide="ignore", invalid="ignore"):
        h = -x * np.log2(x) - (1.0 - x) * np.log2(1.0 - x)
    return np.where((x <= 0.0) | (x >= 1.0), 0.0, h)


def penalty_value(x, reg) -> float:
    x = _check_unit(x)
    reg = Regularizer(reg)
    if reg is Regularizer.NONE:
        return 0.0
    if reg is Regularizer.L1:
        return float(np.abs(x).sum())
    return float(_entropy_bits(x).sum())


def penalty_grad(x, reg) -> np.ndarray:
    x = _check_unit(x)
    reg = Regularizer(reg)
    if reg is Regularizer.NONE:
        return np.zeros_like(x)
    if reg is Regularizer.L1:
        return np.ones_like(x)
    # d/dx of binary entropy; infinite at the endpoints, clipped to stay finite
    xc = np.clip(x, 1e-12, 1.0 - 1e-12)
    return np.log2((1.0 - xc) / xc)


def regularized_loss(q, x, t=TNorm.PRODUCT, reg=Regularizer.NONE, alpha: float = 0.0) -> float:
    if alpha < 0:
        raise ValueError("alpha must be non-negative")
    return hamiltonian(q, x, t) + alpha * penalty_value(x, reg)


def objective_value(problem, g: Graph, xb) -> tuple[float, bool]:
    """Score a binary assignment: cut size, or independent-set size.

    Infeasible MIS assignments score ``(0, False)``.
    """
    problem = Problem(problem)
    xb = np.asarray(xb)
    if xb.shape != (g.n,) or np.any((xb != 0) & (xb != 1)):
        raise DomainError("assignment must be a binary vector of length n")
    xb = xb.astype(np.int64)
    e = g.edge_array()
    if problem is Problem.MAXCUT:
        return float(np.count_nonzero(xb[e[:, 0]] != xb[e[:, 1]])), True
    if np.any(xb[e[:, 0]] & xb[e[:, 1]]):
        return 0.0, False
    return float(xb.sum()), True


def write_qubo(q: QuboInstance, sink) -> None:
    lines = [f"{q.n}\n"]
    lines += [f"{i} {i} {c!r}\n" for i, c in enumerate(q.diag.tolist())]
    lines += [f"{i} {j} {c!r}\n" for i, j, c in zip(q.rows.tolist(), q.cols.tolist(), q.coef.tolist())]
    text = "".join(lines)
    if isinstance(sink, (str, Path)):
        Path(sink).write_text(text, encoding="ascii")
    else:
        sink.write(text)


def read_qubo(source) -> QuboInstance:
    text = Path(source).read_text() if isinstance(source, (str, Path)) else source.read()
    lines = [ln for ln in text.splitlines() if ln.strip()]
    n = int(lines[0])
    diag = np.zeros(n)
    rows, cols, coef = [], [], []
    for lineno, ln in enumerate(lines[1:], start=2):
        parts = ln.split()
        if len(parts) != 3:
            raise ValueError(f"line {lineno}: expected 'i j c'")
        i, j, c = int(parts[0]), int(parts[1]), float(parts[2])
        if i == j:
            diag[i] = c
        else:
            rows.append(min(i, j))
            cols.append(max(i, j))
            coef.append(c)
    return QuboInstance(n, diag, rows, cols, coef)
