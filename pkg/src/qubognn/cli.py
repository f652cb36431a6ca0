"""Command-line driver: generate instance suites, run portfolios, aggregate.

    qubognn generate --out runs/ --n 100 --d 3,5 --graphs 5
    qubognn run      --out runs/ --variants baseline,bin-ste --seeds 5
    qubognn report   --out runs/
    qubognn oracle   graph.txt --problem mis
    qubognn gradcheck --points 50
"""

from __future__ import annotations

import argparse
import csv
import logging
import sys
import time
from collections import defaultdict
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, fields
from pathlib import Path

import numpy as np

from . import gradcheck, metrics, oracle
from .graphgen import Graph, generate_regular, read_edgelist, write_edgelist
from .qubo import Problem, encode
from .trainer import VARIANTS, TrainConfig, derive_seed, get_variant, train, write_trace

log = logging.getLogger("qubognn")

DEFAULT_DEGREES = (3, 5, 10, 20, 30, 40, 50)
RESULT_FIELDS = ["problem", "n", "d", "graph_id", "variant", "seed", "objective", "feasible"]
AGGREGATE_FIELDS = ["problem", "n", "d", "variant", "bon", "rr_bon", "avg", "rr_avg"]
MANIFEST_FIELDS = ["problem", "n", "d", "graph_id", "path"]


class ConfigError(ValueError):
    pass


class SchemaError(ValueError):
    pass


@dataclass
class ExperimentConfig:
    problem: str = "maxcut"
    sizes: list[int] = field(default_factory=lambda: [100])
    degrees: list[int] = field(default_factory=lambda: list(DEFAULT_DEGREES))
    graphs: int = 5
    seeds: int = 5
    variants: list[str] = field(default_factory=lambda: list(VARIANTS))
    threads: int = 1
    out: Path = Path("runs")
    master_seed: int = 0
    max_epochs: int = 20_000
    trace: bool = False
    penalty: float = 2.0
    ties: str = "min"

    def validate(self) -> "ExperimentConfig":
        Problem(self.problem)
        if not self.sizes or not self.degrees or not self.variants:
            raise ConfigError("sizes, degrees and variants must be non-empty")
        for v in self.variants:
            get_variant(v)
        for n in self.sizes:
            for d in self.degrees:
                if n * d % 2 or not 0 < d < n:
                    raise ConfigError(f"no {d}-regular graph on {n} nodes")
        if self.graphs < 1 or self.seeds < 1 or self.threads < 1 or self.max_epochs < 1:
            raise ConfigError("graphs, seeds, threads and max-epochs must be positive")
        if self.ties not in ("min", "mean"):
            raise ConfigError("ties must be 'min' or 'mean'")
        return self

    def train_config(self) -> TrainConfig:
        patience = min(TrainConfig.es_patience, self.max_epochs)
        return TrainConfig(max_epochs=self.max_epochs, es_patience=patience, trace=self.trace)


_KEY_ALIASES = {"n": "sizes", "d": "degrees", "master-seed": "master_seed",
                "max-epochs": "max_epochs"}


def _int_list(text: str) -> list[int]:
    return [int(t) for t in str(text).replace(" ", "").split(",") if t]


def _coerce(key: str, value):
    if key in ("sizes", "degrees"):
        return _int_list(value)
    if key == "variants":
        return [v for v in str(value).replace(" ", "").split(",") if v]
    if key in ("graphs", "seeds", "threads", "master_seed", "max_epochs"):
        return int(value)
    if key == "penalty":
        return float(value)
    if key == "trace":
        return value if isinstance(value, bool) else str(value).lower() in ("1", "true", "yes", "on")
    if key == "out":
        return Path(value)
    return value


def load_config_file(path) -> dict:
    """Parse ``key = value`` lines; ``#`` starts a comment."""
    out = {}
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{lineno}: expected 'key = value'")
        key, value = (s.strip() for s in line.split("=", 1))
        key = _KEY_ALIASES.get(key, key.replace("-", "_"))
        if key not in {f.name for f in fields(ExperimentConfig)}:
            raise ConfigError(f"{path}:{lineno}: unknown key {key!r}")
        out[key] = _coerce(key, value)
    return out


def build_config(args) -> ExperimentConfig:
    values = load_config_file(args.config) if getattr(args, "config", None) else {}
    for key in ("problem", "sizes", "degrees", "graphs", "seeds", "variants", "threads",
                "out", "master_seed", "max_epochs", "trace", "ties"):
        flag = getattr(args, key, None)
        if flag is not None:
            values[key] = _coerce(key, flag)
    return ExperimentConfig(**values).validate()


def graph_id(n: int, d: int, index: int) -> str:
    return f"n{n}_d{d}_g{index}"


def cmd_generate(cfg: ExperimentConfig) -> list[dict]:
    """Write one edge-list file per (n, d, graph index) plus ``manifest.csv``."""
    gdir = cfg.out / "graphs"
    gdir.mkdir(parents=True, exist_ok=True)
    rows = []
    for n in cfg.sizes:
        for d in cfg.degrees:
            for i in range(cfg.graphs):
                gid = graph_id(n, d, i)
                g = generate_regular(n, d, derive_seed(cfg.master_seed, gid, "graph", 0))
                path = gdir / f"{gid}.txt"
                write_edgelist(g, path)
                rows.append({"problem": cfg.problem, "n": n, "d": d, "graph_id": gid,
                             "path": f"graphs/{gid}.txt"})
    with (cfg.out / "manifest.csv").open("w", newline="") as fh:
        w = csv.DictWriter(fh, MANIFEST_FIELDS, lineterminator="\n")
        w.writeheader()
        w.writerows(rows)
    return rows


def read_manifest(out: Path) -> list[dict]:
    path = out / "manifest.csv"
    if not path.exists():
        raise FileNotFoundError(f"manifest not found: {path} (run 'generate' first)")
    with path.open(newline="") as fh:
        return list(csv.DictReader(fh))


def _fmt_value(v: float) -> str:
    return str(int(v)) if float(v).is_integer() else repr(float(v))


def _run_job(job):
    g, problem, penalty, variant, tcfg, seed, trace_path = job
    q = encode(problem, g, penalty)
    try:
        res = train(g, q, variant, tcfg, seed)
    except Exception as exc:  # one bad run must not sink the grid
        log.error("run %s seed=%d failed: %s", variant, seed, exc)
        return 0.0, True, True
    if trace_path is not None and res.trace_epochs:
        write_trace(res, trace_path)
    if res.failed:
        log.warning("run %s seed=%d failed: %s", variant, seed, res.message)
    return res.objective, res.feasible, res.failed


def cmd_run(cfg: ExperimentConfig, manifest: list[dict] | None = None) -> Path:
    """Train every (instance, variant, seed) and write ``results.csv``."""
    manifest = read_manifest(cfg.out) if manifest is None else manifest
    tcfg = cfg.train_config()
    if cfg.trace:
        (cfg.out / "traces").mkdir(parents=True, exist_ok=True)
    keys, jobs = [], []
    for row in manifest:
        g = read_edgelist(cfg.out / row["path"])
        for variant in cfg.variants:
            for s in range(cfg.seeds):
                seed = derive_seed(cfg.master_seed, row["graph_id"], variant, s)
                trace_path = (cfg.out / "traces" / f"{row['graph_id']}__{variant}__s{s}.csv"
                              if cfg.trace else None)
                keys.append((row, variant, s))
                jobs.append((g, row["problem"], cfg.penalty, variant, tcfg, seed, trace_path))
    t0 = time.time()
    if cfg.threads > 1:
        with ProcessPoolExecutor(max_workers=cfg.threads) as ex:
            outcomes = list(ex.map(_run_job, jobs))
    else:
        outcomes = []
        for i, job in enumerate(jobs, 1):
            outcomes.append(_run_job(job))
            log.info("run %d/%d done (%.0fs)", i, len(jobs), time.time() - t0)
    path = cfg.out / "results.csv"
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(RESULT_FIELDS)
        for (row, variant, s), (value, feasible, _failed) in zip(keys, outcomes):
            w.writerow([row["problem"], row["n"], row["d"], row["graph_id"], variant, s,
                        _fmt_value(value), "true" if feasible else "false"])
    return path


def read_results(path) -> list[dict]:
    """Parse and validate a results CSV; errors name the offending row."""
    with Path(path).open(newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames != RESULT_FIELDS:
            raise SchemaError(f"{path}: header must be {','.join(RESULT_FIELDS)}")
        rows = []
        for lineno, row in enumerate(reader, start=2):
            try:
                Problem(row["problem"])
                rec = {
                    "problem": row["problem"], "n": int(row["n"]), "d": int(row["d"]),
                    "graph_id": row["graph_id"], "variant": row["variant"],
                    "seed": int(row["seed"]), "objective": float(row["objective"]),
                }
                if row["feasible"] not in ("true", "false"):
                    raise ValueError(f"feasible must be true/false, got {row['feasible']!r}")
                rec["feasible"] = row["feasible"] == "true"
            except (TypeError, ValueError) as exc:
                raise SchemaError(f"{path}: row {lineno}: {exc}") from None
            rows.append(rec)
    return rows


def _variant_order(name: str) -> tuple[int, str]:
    names = list(VARIANTS)
    return (names.index(name) if name in names else len(names), name)


def aggregate_rows(rows: list[dict], ties: str = "min") -> list[dict]:
    """One row per (problem, n, d, variant): mean over graphs of BoN/Avg plus their MRRs."""
    settings: dict[tuple, dict] = defaultdict(dict)
    for r in rows:
        key = (r["problem"], r["n"], r["d"])
        settings[key][(r["graph_id"], r["variant"], r["seed"])] = (r["objective"], r["feasible"])
    out = []
    for (problem, n, d) in sorted(settings, key=lambda k: (k[0], k[1], k[2])):
        table = settings[problem, n, d]
        per = {}
        for agg in ("bon", "avg"):
            scores = metrics.aggregate(table, agg)
            rr = metrics.mrr(table, agg, ties)
            by_variant = defaultdict(list)
            for (gid, variant), s in sorted(scores.items()):
                by_variant[variant].append(s)
            per[agg] = {v: (float(np.mean(vals)), rr[v]) for v, vals in by_variant.items()}
        for variant in sorted(per["bon"], key=_variant_order):
            bon, rr_bon = per["bon"][variant]
            avg, rr_avg = per["avg"][variant]
            out.append({"problem": problem, "n": n, "d": d, "variant": variant,
                        "bon": bon, "rr_bon": rr_bon, "avg": avg, "rr_avg": rr_avg})
    return out


def cmd_report(results_path, out_path=None, ties: str = "min") -> list[dict]:
    agg = aggregate_rows(read_results(results_path), ties)
    out_path = Path(out_path or Path(results_path).with_name("aggregate.csv"))
    with out_path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(AGGREGATE_FIELDS)
        for r in agg:
            w.writerow([r["problem"], r["n"], r["d"], r["variant"], f"{r['bon']:.4f}",
                        f"{r['rr_bon']:.4f}", f"{r['avg']:.4f}", f"{r['rr_avg']:.4f}"])
    return agg


def format_table(agg: list[dict]) -> str:
    lines = []
    for key in sorted({(r["problem"], r["n"], r["d"]) for r in agg}):
        lines.append(f"{key[0]}  n={key[1]}  d={key[2]}")
        lines.append(f"  {'variant':<10} {'BoN':>9} {'RR_BoN':>7} {'Avg':>9} {'RR_Avg':>7}")
        for r in agg:
            if (r["problem"], r["n"], r["d"]) == key:
                lines.append(f"  {r['variant']:<10} {r['bon']:9.2f} {r['rr_bon']:7.2f} "
                             f"{r['avg']:9.2f} {r['rr_avg']:7.2f}")
    return "\n".join(lines)


def cmd_oracle(path, problem) -> oracle.ExactSolution:
    g = read_edgelist(path)
    return oracle.exact_solve(problem, g)


def _add_experiment_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="key = value file; flags override it")
    p.add_argument("--problem", choices=[x.value for x in Problem])
    p.add_argument("--n", dest="sizes", help="comma-separated node counts")
    p.add_argument("--d", dest="degrees", help="comma-separated degrees")
    p.add_argument("--graphs", type=int, help="graphs per (n, d) setting")
    p.add_argument("--seeds", type=int, help="random initializations per run")
    p.add_argument("--variants", help=f"comma-separated subset of {','.join(VARIANTS)}")
    p.add_argument("--threads", type=int, help="worker processes")
    p.add_argument("--out", help="output directory")
    p.add_argument("--master-seed", dest="master_seed", type=int)
    p.add_argument("--max-epochs", dest="max_epochs", type=int)
    p.add_argument("--trace", action="store_true", default=None,
                   help="write activation histogram CSVs per run")
    p.add_argument("--ties", choices=["min", "mean"], help="MRR tie handling")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="qubognn", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, helptext in (("generate", "write random regular instances and a manifest"),
                           ("run", "train the variant portfolio on every instance"),
                           ("report", "aggregate results.csv into BoN/Avg/MRR tables")):
        _add_experiment_flags(sub.add_parser(name, help=helptext))
    rep = sub.choices["report"]
    rep.add_argument("--results", help="results CSV (default: <out>/results.csv)")
    orc = sub.add_parser("oracle", help="exact-solve a small edge-list instance")
    orc.add_argument("graph")
    orc.add_argument("--problem", choices=[x.value for x in Problem], default="maxcut")
    gc = sub.add_parser("gradcheck", help="finite-difference check of every variant's gradient")
    gc.add_argument("--points", type=int, default=50)
    gc.add_argument("--seed", type=int, default=0)
    gc.add_argument("--tol", type=float, default=1e-4)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.command == "generate":
            cfg = build_config(args)
            rows = cmd_generate(cfg)
            print(f"wrote {len(rows)} instances to {cfg.out}")
        elif args.command == "run":
            cfg = build_config(args)
            print(f"wrote {cmd_run(cfg)}")
        elif args.command == "report":
            cfg = build_config(args)
            results = Path(args.results) if args.results else cfg.out / "results.csv"
            agg = cmd_report(results, results.with_name("aggregate.csv"), cfg.ties)
            print(format_table(agg))
        elif args.command == "oracle":
            sol = cmd_oracle(args.graph, args.problem)
            print(f"value={_fmt_value(sol.value)} optima={sol.count_optimal} "
                  f"assignment={''.join(map(str, sol.assignment.tolist()))}")
        elif args.command == "gradcheck":
            failures = 0
            worst: dict[str, float] = {}
            for res, ok in gradcheck.run_suite(args.points, args.seed, tol=args.tol):
                worst[res.variant] = max(worst.get(res.variant, 0.0), res.rel_error)
                failures += not ok
            for name, err in worst.items():
                print(f"{'PASS' if err <= args.tol else 'FAIL'} {name:<10} max rel error {err:.2e}")
            return 1 if failures else 0
    except (ConfigError, SchemaError, FileNotFoundError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
