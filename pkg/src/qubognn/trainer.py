"""Training loop, inverse-temperature schedules, activation tracing and the
multi-seed portfolio runner."""

from __future__ import annotations

import csv
import hashlib
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import gnn
from .gnn import Activation
from .graphgen import Graph
from .metrics import round_assignment
from .qubo import (QuboInstance, Regularizer, TNorm, energy_and_grad, hamiltonian,
                   objective_value, penalty_grad, penalty_value)

log = logging.getLogger(__name__)

SCHEDULES = ("constant", "linear", "logarithmic", "exponential")


@dataclass(frozen=True)
class VariantSpec:
    name: str
    activation: Activation
    tnorm: TNorm
    schedule: str = "constant"


VARIANTS: dict[str, VariantSpec] = {
    v.name: v
    for v in (
        VariantSpec("baseline", Activation.SIGMOID, TNorm.PRODUCT),
        VariantSpec("temp-lin", Activation.TEMPERED_SIGMOID, TNorm.PRODUCT, "linear"),
        VariantSpec("temp-log", Activation.TEMPERED_SIGMOID, TNorm.PRODUCT, "logarithmic"),
        VariantSpec("temp-exp", Activation.TEMPERED_SIGMOID, TNorm.PRODUCT, "exponential"),
        VariantSpec("bin-ste", Activation.STEP_STE, TNorm.PRODUCT),
        VariantSpec("bin-sig", Activation.STEP_SIGMOID_BACKWARD, TNorm.PRODUCT),
        VariantSpec("fuzzy-std", Activation.SIGMOID, TNorm.STANDARD),
        VariantSpec("fuzzy-luk", Activation.SIGMOID, TNorm.LUKASIEWICZ),
    )
}


def get_variant(v) -> VariantSpec:
    if isinstance(v, VariantSpec):
        return v
    try:
        return VARIANTS[v]
    except KeyError:
        raise ValueError(f"unknown variant {v!r}; choose from {', '.join(VARIANTS)}") from None


@dataclass(frozen=True)
class TrainConfig:
    lr: float = 1e-4
    max_epochs: int = 100_000
    es_tolerance: float = 1e-4
    es_patience: int = 1_000
    trace_bins: int = 100
    trace_every: int = 100
    trace: bool = True
    regularizer: Regularizer = Regularizer.NONE
    alpha: float = 0.0
    bias: bool = False
    embed_scale: float = 1.0
    self_loops: bool = False

    def __post_init__(self):
        if not (self.lr > 0 and self.max_epochs > 0 and self.es_tolerance > 0
                and self.es_patience > 0 and self.trace_bins > 0 and self.trace_every > 0):
            raise ValueError("training hyperparameters must be positive")
        if self.es_patience > self.max_epochs:
            raise ValueError("es_patience must not exceed max_epochs")


@dataclass
class Histogram:
    edges: np.ndarray
    counts: np.ndarray

    @property
    def lo(self) -> float:
        return float(self.edges[0])

    @property
    def hi(self) -> float:
        return float(self.edges[-1])


@dataclass
class RunResult:
    assignment: np.ndarray
    objective: float
    feasible: bool
    relaxed_loss_final: float
    epochs_run: int
    losses: np.ndarray = field(repr=False)
    trace_epochs: list[int] = field(default_factory=list, repr=False)
    pre_hist: list[Histogram] = field(default_factory=list, repr=False)
    post_hist: list[Histogram] = field(default_factory=list, repr=False)
    failed: bool = False
    message: str = ""

    def same_as(self, other: "RunResult") -> bool:
        return (
            np.array_equal(self.assignment, other.assignment)
            and self.objective == other.objective
            and self.feasible == other.feasible
            and self.epochs_run == other.epochs_run
            and np.array_equal(self.losses, other.losses)
            and self.failed == other.failed
            and len(self.pre_hist) == len(other.pre_hist)
            and all(np.array_equal(a.counts, b.counts) and np.array_equal(a.edges, b.edges)
                    for a, b in zip(self.pre_hist + self.post_hist, other.pre_hist + other.post_hist))
        )


def inv_temp_schedule(kind: str, epoch: int, max_epochs: int) -> float:
    """Inverse temperature at 1-based ``epoch``; every schedule spans ``[1, max_epochs]``."""
    if kind == "constant":
        return 1.0
    if kind == "linear":
        val = float(epoch)
    elif kind == "logarithmic":
        val = math.log2(epoch + 1)
    elif kind == "exponential":
        val = 2.0 ** (epoch * math.log2(max_epochs) / max_epochs)
    else:
        raise ValueError(f"unknown schedule {kind!r}")
    return min(max(val, 1.0), float(max_epochs))


def record_histogram(values, bins: int, range_: tuple[float, float]) -> Histogram:
    if bins < 2:
        raise ValueError("need at least two bins")
    lo, hi = range_
    values = np.clip(np.asarray(values, dtype=np.float64), lo, hi)
    counts, edges = np.histogram(values, bins=bins, range=(lo, hi))
    return Histogram(edges, counts)


def pre_activation_range(values, floor: float = 1.0) -> tuple[float, float]:
    """Symmetric range covering ``values``, at least ``[-floor, floor]``."""
    r = float(np.max(np.abs(values), initial=0.0))
    r = max(floor, math.ceil(r))
    return -r, r


def _seed_everything(seed) -> np.random.Generator:
    return np.random.default_rng(seed)


def train(g: Graph, q: QuboInstance, variant, config: TrainConfig = TrainConfig(), seed=0,
          model: gnn.Model | None = None) -> RunResult:
    """Train one model on one graph instance.

    Early stopping tracks the best relaxed loss; the run ends once
    ``es_patience`` consecutive epochs fail to beat it by more than
    ``es_tolerance``. ``epochs_run`` counts optimizer updates.
    """
    variant = get_variant(variant)
    if q.n != g.n:
        raise ValueError("QUBO instance and graph disagree on n")
    if q.problem is None:
        raise ValueError("QUBO instance carries no problem tag; build it with encode()")
    if model is None:
        model = gnn.init_model(g.n, _seed_everything(seed), variant.activation,
                               bias=config.bias, embed_scale=config.embed_scale)
    A_hat = gnn.normalized_adjacency(g, config.self_loops)
    params = [model.theta]
    state = gnn.AdamState.zeros_like(params)
    tnorm = variant.tnorm
    E = config.max_epochs
    reg, alpha = Regularizer(config.regularizer), config.alpha

    losses = []
    trace_epochs: list[int] = []
    pre_hist: list[Histogram] = []
    post_hist: list[Histogram] = []
    best, wait = math.inf, 0
    epochs_run = 0
    inv_temp = 1.0
    failed, message = False, ""

    def trace(epoch, a_pre, a_post):
        trace_epochs.append(epoch)
        pre_hist.append(record_histogram(a_pre, config.trace_bins, pre_activation_range(a_pre)))
        post_hist.append(record_histogram(a_post, config.trace_bins, (0.0, 1.0)))

    for epoch in range(1, E + 1):
        inv_temp = inv_temp_schedule(variant.schedule, epoch, E)
        a_pre, a_post, cache = gnn.forward(model, A_hat, inv_temp)
        loss, dpost = energy_and_grad(q, a_post, tnorm)
        if alpha:
            loss += alpha * penalty_value(a_post, reg)
        if not math.isfinite(loss):
            failed, message = True, f"non-finite loss at epoch {epoch}"
            log.warning("run aborted: %s", message)
            break
        losses.append(loss)
        if config.trace and (epoch - 1) % config.trace_every == 0:
            trace(epoch, a_pre, a_post)
        if best - loss > config.es_tolerance:
            best, wait = loss, 0
        else:
            wait += 1
            if wait >= config.es_patience:
                break
        if alpha:
            dpost = dpost + alpha * penalty_grad(a_post, reg)
        grads = [model.flat_grad(gnn.backward(cache, dpost))]
        gnn.adam_step(params, grads, state, config.lr)
        epochs_run = epoch

    if failed:
        assignment = np.zeros(g.n, dtype=np.int64)
        return RunResult(assignment, 0.0, True, math.nan, epochs_run, np.asarray(losses),
                         trace_epochs, pre_hist, post_hist, True, message)

    a_pre, a_post, _ = gnn.forward(model, A_hat, inv_temp)
    final_loss = hamiltonian(q, a_post, tnorm)
    if config.trace and (not trace_epochs or trace_epochs[-1] != epochs_run + 1):
        trace(epochs_run + 1, a_pre, a_post)
    assignment = round_assignment(a_post)
    value, feasible = objective_value(q.problem, g, assignment)
    return RunResult(assignment, value, feasible, final_loss, epochs_run, np.asarray(losses),
                     trace_epochs, pre_hist, post_hist)


def derive_seed(master_seed: int, graph_id: str, variant: str, seed_index: int) -> int:
    """Stable 63-bit seed from the run key; independent of the other keys in the grid."""
    key = f"{master_seed}|{graph_id}|{variant}|{seed_index}".encode()
    return int.from_bytes(hashlib.sha256(key).digest()[:8], "little") >> 1


def _run_one(args):
    g, q, variant, config, seed = args
    return train(g, q, variant, config, seed)


def run_portfolio(g: Graph, q: QuboInstance, variants, n_seeds: int = 5,
                  config: TrainConfig = TrainConfig(), master_seed: int = 0,
                  graph_id: str = "g0", workers: int = 1) -> dict[tuple[str, int], RunResult]:
    """Train every ``(variant, seed index)`` pair; keys are ordered variant-major."""
    if n_seeds < 1:
        raise ValueError("n_seeds must be >= 1")
    specs = [get_variant(v) for v in variants]
    keys = [(v.name, i) for v in specs for i in range(n_seeds)]
    jobs = [(g, q, get_variant(name), config, derive_seed(master_seed, graph_id, name, i))
            for name, i in keys]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as ex:
            results = list(ex.map(_run_one, jobs))
    else:
        results = [_run_one(j) for j in jobs]
    return dict(zip(keys, results))


def write_trace(result: RunResult, sink) -> None:
    """CSV rows ``epoch,kind,bin_lo,bin_hi,count``."""
    path = Path(sink)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["epoch", "kind", "bin_lo", "bin_hi", "count"])
        for epoch, pre, post in zip(result.trace_epochs, result.pre_hist, result.post_hist):
            for kind, h in (("pre", pre), ("post", post)):
                for lo, hi, c in zip(h.edges[:-1], h.edges[1:], h.counts):
                    w.writerow([epoch, kind, f"{lo:.6g}", f"{hi:.6g}", int(c)])


def read_trace(source) -> dict[str, dict[int, Histogram]]:
    out: dict[str, dict[int, list]] = {"pre": {}, "post": {}}
    with Path(source).open(newline="") as fh:
        for row in csv.DictReader(fh):
            bucket = out[row["kind"]].setdefault(int(row["epoch"]), [[], [], []])
            bucket[0].append(float(row["bin_lo"]))
            bucket[1].append(float(row["bin_hi"]))
            bucket[2].append(int(row["count"]))
    return {
        kind: {ep: Histogram(np.array(lo + hi[-1:]), np.array(c)) for ep, (lo, hi, c) in d.items()}
        for kind, d in out.items()
    }
