"""
Benchmark tables, multi-dataset ratio tables and convergence-curve reports.

A benchmark runs every config ``repeats`` times with seeds fanned out from
the master seed, always alongside the random baseline, and scales each
mean AUCC by the random mean so the Random row reads 1.0000.
"""

import csv
import glob
import logging
import os
import re
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Any, Dict, List, Mapping, Optional, Sequence, Tuple

import numpy as np

from qwed_topobo.bayes.loop import (
    KernelPool,
    read_trace,
    repeat_seed,
    run_bo,
    run_random,
    write_trace,
)
from qwed_topobo.config import RunConfig
from qwed_topobo.datasets.io import Pool
from qwed_topobo.errors import ConfigError, DataError, DataParseError
from qwed_topobo.models import BOTrace, PersistenceDiagram

logger = logging.getLogger(__name__)

RANDOM_LABEL = "Random"
RANDOM_SLUG = "random"

SUMMARY_COLUMNS = ("method", "slug", "repeats", "mean_aucc", "se_aucc", "ratio")

SHARED_FIELDS = ("n_init", "n_steps", "noise_sd", "repeats", "seed")
"""RunConfig fields every config of one benchmark must agree on."""


@dataclass
class BenchmarkRow:
    label: str
    slug: str
    repeats: int
    mean_aucc: float
    se_aucc: float
    ratio: float = 1.0

    def to_dict(self) -> Dict[str, Any]:
        return {
            "method": self.label,
            "slug": self.slug,
            "repeats": self.repeats,
            "mean_aucc": self.mean_aucc,
            "se_aucc": self.se_aucc,
            "ratio": self.ratio,
        }


@dataclass
class BenchmarkResult:
    """Summary rows (Random first, then configs in order) and the traces behind them."""

    rows: List[BenchmarkRow]
    traces: Dict[str, List[BOTrace]] = field(default_factory=dict)
    target: Optional[float] = None

    def row(self, label: str) -> BenchmarkRow:
        for row in self.rows:
            if row.label == label:
                return row
        raise KeyError(label)

    def to_csv(self, path: str) -> None:
        with open(path, "w", newline="", encoding="utf-8") as f:
            writer = csv.writer(f)
            writer.writerow(SUMMARY_COLUMNS)
            for row in self.rows:
                writer.writerow(
                    [
                        row.label,
                        row.slug,
                        row.repeats,
                        repr(row.mean_aucc),
                        repr(row.se_aucc),
                        f"{row.ratio:.4f}",
                    ]
                )

    def to_text(self) -> str:
        width = max(len("Method"), *(len(row.label) for row in self.rows)) + 2
        lines = [f"{'Method':<{width}}{'Mean AUCC':>14}{'SE':>12}{'Ratio':>10}"]
        lines.append("-" * len(lines[0]))
        for row in self.rows:
            lines.append(
                f"{row.label:<{width}}{row.mean_aucc:>14.4f}{row.se_aucc:>12.4f}{row.ratio:>10.4f}"
            )
        return "\n".join(lines)


def mean_and_se(values: Sequence[float]) -> Tuple[float, float]:
    """Mean and standard error (0 for a single value)."""
    arr = np.asarray(values, dtype=float)
    if arr.size < 2:
        return float(arr.mean()), 0.0
    return float(arr.mean()), float(arr.std(ddof=1) / np.sqrt(arr.size))


def _ratio(mean: float, baseline: float) -> float:
    if baseline == 0.0:
        return 1.0 if mean == 0.0 else float("inf")
    return mean / baseline


def _check_shared(configs: Sequence[RunConfig]) -> None:
    first = configs[0]
    for cfg in configs[1:]:
        for name in SHARED_FIELDS:
            if getattr(cfg, name) != getattr(first, name):
                raise ConfigError(
                    f"All benchmark configs must share {name}; "
                    f"{cfg.label()} has {getattr(cfg, name)!r}, expected {getattr(first, name)!r}."
                )


def _repeat_all(run, threads: int, repeats: int) -> List[BOTrace]:
    if threads > 1 and repeats > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            return list(pool.map(run, range(repeats)))
    return [run(i) for i in range(repeats)]


def benchmark(
    pool: Pool,
    diagrams: Dict[int, Sequence[PersistenceDiagram]],
    configs: Sequence[RunConfig],
    threads: int = 1,
    trace_dir: Optional[str] = None,
) -> BenchmarkResult:
    """
    Random baseline plus every config, ``repeats`` seeded runs each.

    Repeat i of every method uses ``repeat_seed(seed, i)``, so methods share
    initial draws. Kernel pools are built once per (kernel, degrees,
    kernel options). Traces are written under ``trace_dir`` when given.
    """
    if not configs:
        raise ConfigError("benchmark needs at least one RunConfig.")
    _check_shared(configs)
    base = configs[0]
    seeds = [repeat_seed(base.seed, i) for i in range(base.repeats)]

    def record(slug: str, traces: List[BOTrace], cfg: Dict[str, Any]) -> None:
        if trace_dir is None:
            return
        for i, trace in enumerate(traces):
            write_trace(trace, trace_dir, slug, i, config={**cfg, "repeat_seed": seeds[i]})

    logger.info("Benchmark: random baseline, %d repeats", base.repeats)
    random_traces = _repeat_all(lambda i: run_random(pool, base, seeds[i]), threads, base.repeats)
    record(RANDOM_SLUG, random_traces, {**base.to_dict(), "method": RANDOM_SLUG})
    random_mean, random_se = mean_and_se([t.aucc for t in random_traces])
    rows = [BenchmarkRow(RANDOM_LABEL, RANDOM_SLUG, base.repeats, random_mean, random_se, 1.0)]
    traces = {RANDOM_LABEL: random_traces}

    kernel_pools: Dict[Tuple[str, str, Any], KernelPool] = {}
    for cfg in configs:
        key = (cfg.kernel, cfg.degrees, cfg.kernel_config)
        if key not in kernel_pools:
            kernel_pools[key] = KernelPool.build(pool, diagrams, cfg, threads=threads)
        kpool = kernel_pools[key]
        logger.info("Benchmark: %s, %d repeats", cfg.label(), cfg.repeats)
        cfg_traces = _repeat_all(lambda i: run_bo(kpool, cfg, seeds[i]), threads, cfg.repeats)
        record(cfg.slug(), cfg_traces, {**cfg.to_dict(), "method": cfg.slug()})
        mean, se = mean_and_se([t.aucc for t in cfg_traces])
        rows.append(
            BenchmarkRow(cfg.label(), cfg.slug(), cfg.repeats, mean, se, _ratio(mean, random_mean))
        )
        traces[cfg.label()] = cfg_traces

    return BenchmarkResult(rows=rows, traces=traces, target=pool.minimum())


# ── Multi-dataset tables ───────────────────────────────────────────────────────
Dataset = Tuple[Pool, Dict[int, Sequence[PersistenceDiagram]]]


@dataclass
class BenchmarkTable:
    """
    Ratios to random search, one row per method and one column per dataset.

    Rows keep first-seen order across datasets, which for ``table_configs``
    runs is kernel × (0th, 1st, align, MLE). The Random row is left out
    since it reads 1.0000 in every column.
    """

    results: Dict[str, BenchmarkResult]

    @property
    def datasets(self) -> List[str]:
        return list(self.results)

    @property
    def methods(self) -> List[str]:
        labels: List[str] = []
        for result in self.results.values():
            for row in result.rows:
                if row.label != RANDOM_LABEL and row.label not in labels:
                    labels.append(row.label)
        return labels

    def ratio(self, method: str, dataset: str) -> Optional[float]:
        """Ratio of ``method`` on ``dataset``; None where it was not run."""
        try:
            return self.results[dataset].row(method).ratio
        except KeyError:
            return None

    def to_csv(self, path: str) -> None:
        with open(path, "w", newline="", encoding="utf-8") as f:
            writer = csv.writer(f)
            writer.writerow(["method", *self.datasets])
            for method in self.methods:
                cells = [self.ratio(method, name) for name in self.datasets]
                writer.writerow([method, *("" if c is None else f"{c:.4f}" for c in cells)])

    def to_text(self) -> str:
        width = max([len("Method"), *(len(m) for m in self.methods)]) + 2
        widths = [max(10, len(name) + 2) for name in self.datasets]
        header = f"{'Method':<{width}}" + "".join(
            f"{name:>{w}}" for name, w in zip(self.datasets, widths)
        )
        lines = [header, "-" * len(header)]
        for method in self.methods:
            cells = [self.ratio(method, name) for name in self.datasets]
            lines.append(
                f"{method:<{width}}"
                + "".join(
                    f"{'-':>{w}}" if c is None else f"{c:>{w}.4f}" for c, w in zip(cells, widths)
                )
            )
        return "\n".join(lines)


def benchmark_table(results: Mapping[str, BenchmarkResult]) -> BenchmarkTable:
    """Pivot per-dataset benchmark results (in the given order) into one table."""
    if not results:
        raise DataError("A benchmark table needs at least one dataset.")
    return BenchmarkTable(dict(results))


def benchmark_datasets(
    datasets: Mapping[str, Dataset],
    configs: Sequence[RunConfig],
    threads: int = 1,
    trace_dir: Optional[str] = None,
) -> Dict[str, BenchmarkResult]:
    """
    :func:`benchmark` on every named (pool, diagrams) pair with the same configs.

    Traces go to ``<trace_dir>/<dataset>/`` when ``trace_dir`` is given.
    """
    results: Dict[str, BenchmarkResult] = {}
    for name, (pool, diagrams) in datasets.items():
        logger.info("Benchmark dataset %s: %d clouds", name, len(pool))
        results[name] = benchmark(
            pool,
            diagrams,
            configs,
            threads=threads,
            trace_dir=os.path.join(trace_dir, name) if trace_dir else None,
        )
    return results


def read_summary_csv(path: str) -> BenchmarkResult:
    """Rows of a ``summary.csv`` written by :meth:`BenchmarkResult.to_csv`."""
    rows: List[BenchmarkRow] = []
    with open(path, newline="", encoding="utf-8") as f:
        reader = csv.reader(f)
        if tuple(next(reader, ())) != SUMMARY_COLUMNS:
            raise DataParseError(
                f"Expected summary columns {', '.join(SUMMARY_COLUMNS)}.", path=path, line=1
            )
        for line, record in enumerate(reader, start=2):
            try:
                label, slug, repeats, mean, se, ratio = record
                rows.append(
                    BenchmarkRow(label, slug, int(repeats), float(mean), float(se), float(ratio))
                )
            except ValueError as e:
                raise DataParseError(f"Malformed summary row: {e}", path=path, line=line) from e
    if not rows:
        raise DataError(f"Summary {path} has no rows.")
    return BenchmarkResult(rows=rows)


# ── Convergence report ─────────────────────────────────────────────────────────
_SEED_FILE = re.compile(r"seed-(\d+)\.json$")


def _padded_mean(curves: List[np.ndarray]) -> np.ndarray:
    length = max(len(c) for c in curves)
    padded = np.array([np.concatenate([c, np.full(length - len(c), c[-1])]) for c in curves])
    return padded.mean(axis=0)


def convergence_curves(runs_dir: str) -> Tuple[List[str], np.ndarray]:
    """
    Per-step mean best-so-far of every method directory under ``runs_dir``.

    Returns (header, table) with header ``step, <method>..., target`` and
    one row per step; step 0 is the post-initialization best. Truncated
    traces are extended with their final value.
    """
    methods: Dict[str, List[BOTrace]] = {}
    for method_dir in sorted(glob.glob(os.path.join(runs_dir, "*"))):
        if not os.path.isdir(method_dir):
            continue
        files = [
            (int(m.group(1)), path)
            for path in glob.glob(os.path.join(method_dir, "seed-*.json"))
            if (m := _SEED_FILE.search(path))
        ]
        if files:
            methods[os.path.basename(method_dir)] = [read_trace(p) for _, p in sorted(files)]
    if not methods:
        raise DataError(f"No trace files found under {runs_dir}.")

    means = {
        name: _padded_mean([t.best_curve() for t in traces]) for name, traces in methods.items()
    }
    targets = [t.target for traces in methods.values() for t in traces if t.target is not None]
    target = min(targets) if targets else float("nan")
    length = max(len(curve) for curve in means.values())
    columns = [np.arange(length, dtype=float)]
    for curve in means.values():
        columns.append(np.concatenate([curve, np.full(length - len(curve), curve[-1])]))
    columns.append(np.full(length, target))
    return ["step", *means.keys(), "target"], np.column_stack(columns)


def write_convergence_csv(runs_dir: str, out_path: str) -> str:
    header, table = convergence_curves(runs_dir)
    with open(out_path, "w", newline="", encoding="utf-8") as f:
        writer = csv.writer(f)
        writer.writerow(header)
        for row in table:
            writer.writerow([int(row[0]), *(repr(float(v)) for v in row[1:])])
    return out_path
