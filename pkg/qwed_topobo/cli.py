"""
QWED-TopoBO command-line entry point.

    qwed-topobo gen-orbit --count 200 --points 300 --out pool.jsonl
    qwed-topobo diagrams  --pool pool.jsonl --degree both --out pds.jsonl
    qwed-topobo gram      --pool pool.jsonl --pds pds.jsonl --kernel pfk --degree 1
    qwed-topobo run       --pool pool.jsonl --pds pds.jsonl --kernel pwgk_linear --table
    qwed-topobo report    --runs orbit/runs qm9/runs --out-dir report

Every command writes ``config_echo_<command>.json`` into ``--out-dir``.
Exit codes: 0 success, 2 usage error, 3 data error, 4 numerical error,
5 resource error.
"""

import argparse
import json
import logging
import os
import sys
from dataclasses import replace
from typing import Any, Dict, List, Optional, Sequence, Union

from qwed_topobo.bayes.benchmark import (
    RANDOM_LABEL,
    benchmark,
    benchmark_table,
    read_summary_csv,
    write_convergence_csv,
)
from qwed_topobo.bayes.loop import KernelPool
from qwed_topobo.config import (
    DEGREE_CHOICES,
    DEGREES_BOTH,
    MKL_CHOICES,
    KernelConfig,
    RunConfig,
    load_run_config,
    table_configs,
)
from qwed_topobo.datasets.io import Pool, load_pool, save_jsonl
from qwed_topobo.datasets.orbit import (
    DEFAULT_CLOUDS,
    DEFAULT_POINTS,
    DEFAULT_R_MAX,
    DEFAULT_R_MIN,
    gen_orbit,
)
from qwed_topobo.errors import InputError, TopoBOError
from qwed_topobo.kernels.gram import KERNELS, write_gram_csv
from qwed_topobo.models import H0, H1, PersistenceDiagram
from qwed_topobo.topology.cache import DiagramCache, compute_pool_diagrams
from qwed_topobo.topology.persistence import DEFAULT_SIMPLEX_BUDGET

logger = logging.getLogger(__name__)

LOG_FORMAT = "%(asctime)s %(levelname)s %(name)s: %(message)s"

EXIT_IO_ERROR = 3


# ── Argument types ─────────────────────────────────────────────────────────────
def _positive_int(text: str) -> int:
    try:
        value = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected an integer, got {text!r}")
    if value < 1:
        raise argparse.ArgumentTypeError(f"must be ≥ 1, got {value}")
    return value


def _max_radius(text: str) -> Union[str, float]:
    if text == "auto":
        return text
    try:
        value = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected 'auto' or a number, got {text!r}")
    if not value > 0:
        raise argparse.ArgumentTypeError(f"max radius must be > 0, got {value}")
    return value


def _degrees(text: str) -> List[int]:
    return {"0": [H0], "1": [H1], DEGREES_BOTH: [H0, H1]}[text]


# ── Helpers ────────────────────────────────────────────────────────────────────
def _out_path(args: argparse.Namespace, name: str) -> str:
    return args.out if args.out else os.path.join(args.out_dir, name)


def _echo_config(args: argparse.Namespace, resolved: Optional[Dict[str, Any]] = None) -> str:
    """Write ``config_echo_<command>.json``: every flag plus resolved settings."""
    os.makedirs(args.out_dir, exist_ok=True)
    flags = {k: v for k, v in vars(args).items() if k != "func"}
    echo = {"command": args.command, "flags": flags, "resolved": resolved or {}}
    path = os.path.join(args.out_dir, f"config_echo_{args.command}.json")
    with open(path, "w", encoding="utf-8") as f:
        json.dump(echo, f, indent=2, sort_keys=True, default=str)
        f.write("\n")
    return path


def _pool_diagrams(
    args: argparse.Namespace, pool: Pool, degrees: Sequence[int]
) -> Dict[int, List[PersistenceDiagram]]:
    """Diagrams from ``--pds`` when given, else computed in memory with defaults."""
    if args.pds:
        cache = DiagramCache(args.pds)
        return {degree: cache.diagrams(pool.ids(), degree) for degree in degrees}
    logger.info("No --pds cache given; computing diagrams with default settings.")
    return compute_pool_diagrams(list(pool), degrees, threads=args.threads)


def _print_summary(pool: Pool) -> None:
    summary = pool.summary()
    print(
        f"✅ Pool: {summary['size']} clouds, dimension {summary['dim']}, "
        f"labels in [{summary['label_min']:.6g}, {summary['label_max']:.6g}]"
    )


def _kernel_config(args: argparse.Namespace, base: KernelConfig) -> KernelConfig:
    """Apply the kernel flags present on this subcommand."""
    changes = {
        "use_rff": True if getattr(args, "rff", False) else None,
        "rff_features": getattr(args, "rff_features", None),
        "pfk_nu": getattr(args, "pfk_nu", None),
        "pfk_t": getattr(args, "pfk_t", None),
    }
    changes = {k: v for k, v in changes.items() if v is not None}
    return replace(base, **changes) if changes else base


# ── Commands ───────────────────────────────────────────────────────────────────
def cmd_gen_orbit(args: argparse.Namespace) -> int:
    """Generate an orbit pool and save it as JSON Lines."""
    if not args.r_min < args.r_max:
        raise InputError(f"--r-min must be < --r-max, got [{args.r_min}, {args.r_max}].")
    seed = args.seed if args.seed is not None else 0
    pool = gen_orbit(args.count, args.points, args.r_min, args.r_max, seed, args.shared_start)
    out = _out_path(args, "pool.jsonl")
    os.makedirs(os.path.dirname(out) or ".", exist_ok=True)
    save_jsonl(pool, out)
    _echo_config(args, {"pool": pool.params, "out": out})
    _print_summary(pool)
    print(f"✅ Wrote {out}")
    return 0


def cmd_diagrams(args: argparse.Namespace) -> int:
    """Compute (or reuse) persistence diagrams for every cloud of a pool."""
    pool = load_pool(args.pool)
    out = _out_path(args, "diagrams.jsonl")
    os.makedirs(os.path.dirname(out) or ".", exist_ok=True)
    cache = DiagramCache(out)
    degrees = _degrees(args.degree)
    seed = args.seed if args.seed is not None else 0
    diagrams = compute_pool_diagrams(
        list(pool),
        degrees,
        cache=cache,
        max_radius=args.max_radius,
        subsample=args.subsample,
        seed=seed,
        threads=args.threads,
        simplex_budget=args.simplex_budget,
    )
    resolved = {
        "degrees": degrees,
        "seed": seed,
        "out": out,
        "records": len(cache),
    }
    _echo_config(args, resolved)
    _print_summary(pool)
    for degree in degrees:
        sizes = [len(D) for D in diagrams[degree]]
        print(f"✅ H{degree}: {len(sizes)} diagrams, {sum(sizes)} points in total")
    print(f"✅ Wrote {out}")
    return 0


def cmd_gram(args: argparse.Namespace) -> int:
    """Export the Gram matrix (or PFK candidate grid) of one degree as CSV."""
    pool = load_pool(args.pool)
    degrees = "h0" if args.degree == "0" else "h1"
    cfg = RunConfig(kernel=args.kernel, degrees=degrees).with_overrides(
        kernel_config=_kernel_config(args, RunConfig().kernel_config)
    )
    diagrams = _pool_diagrams(args, pool, cfg.homology_degrees)
    kpool = KernelPool.build(pool, diagrams, cfg, threads=args.threads)
    candidates = kpool.channels[0]
    out = _out_path(args, f"gram-{cfg.kernel}-h{args.degree}.csv")
    os.makedirs(os.path.dirname(out) or ".", exist_ok=True)
    stem, ext = os.path.splitext(out)
    written = []
    for k, G in enumerate(candidates):
        path = out if len(candidates) == 1 else f"{stem}-{k:02d}{ext or '.csv'}"
        write_gram_csv(G, path)
        written.append({"path": path, "kernel": G.kernel_desc})
        print(f"✅ {G.kernel_desc} → {path}")
    _echo_config(args, {"config": cfg.to_dict(), "written": written})
    return 0


def _run_configs(args: argparse.Namespace) -> List[RunConfig]:
    base = load_run_config(args.config) if args.config else RunConfig()
    base = base.with_overrides(
        n_init=args.n_init,
        n_steps=args.steps,
        repeats=args.repeats,
        noise_sd=args.noise_sd,
        seed=args.seed,
        kernel_config=_kernel_config(args, base.kernel_config),
    )
    kernels = args.kernel or [base.kernel]
    configs: List[RunConfig] = []
    for kernel in kernels:
        if args.table:
            configs.extend(table_configs(kernel, base))
        else:
            configs.append(base.with_overrides(kernel=kernel, degrees=args.degrees, mkl=args.mkl))
    return configs


def cmd_run(args: argparse.Namespace) -> int:
    """Benchmark the requested configs against random search."""
    configs = _run_configs(args)
    pool = load_pool(args.pool)
    degrees = sorted({d for cfg in configs for d in cfg.homology_degrees})
    diagrams = _pool_diagrams(args, pool, degrees)
    out = _out_path(args, "runs")
    os.makedirs(out, exist_ok=True)
    _echo_config(args, {"configs": [cfg.to_dict() for cfg in configs], "out": out})

    result = benchmark(pool, diagrams, configs, threads=args.threads, trace_dir=out)
    result.to_csv(os.path.join(out, "summary.csv"))
    table = result.to_text()
    with open(os.path.join(out, "summary.txt"), "w", encoding="utf-8") as f:
        f.write(table + "\n")
    _print_summary(pool)
    print(table)
    print(f"✅ {RANDOM_LABEL} baseline plus {len(configs)} config(s); traces in {out}")
    return 0


def _dataset_name(runs_dir: str) -> str:
    """Basename of a runs directory; a default ``<out-dir>/runs`` takes its parent's name."""
    path = os.path.abspath(runs_dir)
    name = os.path.basename(path)
    if name == "runs":
        name = os.path.basename(os.path.dirname(path)) or name
    return name


def cmd_report(args: argparse.Namespace) -> int:
    """Convergence CSVs per runs directory and the ratio table across them."""
    names = args.name or [_dataset_name(d) for d in args.runs]
    if len(names) != len(args.runs):
        raise InputError(f"Got {len(names)} --name values for {len(args.runs)} --runs directories.")
    if len(set(names)) != len(names):
        raise InputError(f"Dataset names must be distinct, got {names}; pass --name.")
    os.makedirs(args.out_dir, exist_ok=True)

    written = []
    summaries = {}
    for name, runs_dir in zip(names, args.runs):
        file_name = "convergence.csv" if len(args.runs) == 1 else f"convergence-{name}.csv"
        written.append(write_convergence_csv(runs_dir, os.path.join(args.out_dir, file_name)))
        summaries[name] = read_summary_csv(os.path.join(runs_dir, "summary.csv"))

    table = benchmark_table(summaries)
    table_path = os.path.join(args.out_dir, "table.csv")
    table.to_csv(table_path)
    text = table.to_text()
    with open(os.path.join(args.out_dir, "table.txt"), "w", encoding="utf-8") as f:
        f.write(text + "\n")
    _echo_config(args, {"datasets": dict(zip(names, args.runs)), "out": [*written, table_path]})
    print(text)
    print(f"✅ Wrote {', '.join(written)} and {table_path}")
    return 0


# ── Parser ─────────────────────────────────────────────────────────────────────
def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="qwed-topobo",
        description="Bayesian optimization over point-cloud pools with persistence kernels.",
    )
    parser.add_argument("--seed", type=int, default=None, help="master seed (default 0)")
    parser.add_argument("--out-dir", default=".", help="directory for outputs and config echoes")
    parser.add_argument(
        "--threads",
        type=_positive_int,
        default=os.cpu_count() or 1,
        help="workers for diagrams, Gram assembly and repeats (default: all cores)",
    )
    parser.add_argument(
        "--log-level",
        default="INFO",
        choices=["DEBUG", "INFO", "WARNING", "ERROR"],
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-orbit", help="generate the orbit point-cloud pool")
    p.add_argument("--count", type=_positive_int, default=DEFAULT_CLOUDS, help="clouds M")
    p.add_argument("--points", type=_positive_int, default=DEFAULT_POINTS, help="points N")
    p.add_argument("--r-min", type=float, default=DEFAULT_R_MIN)
    p.add_argument("--r-max", type=float, default=DEFAULT_R_MAX)
    p.add_argument("--shared-start", action="store_true", help="one (x0, y0) for every cloud")
    p.add_argument("--out", default=None, help="pool file (default <out-dir>/pool.jsonl)")
    p.set_defaults(func=cmd_gen_orbit)

    p = sub.add_parser("diagrams", help="compute persistence diagrams into a cache")
    p.add_argument("--pool", required=True, help="JSONL pool file or XYZ directory")
    p.add_argument("--degree", choices=["0", "1", DEGREES_BOTH], default=DEGREES_BOTH)
    p.add_argument("--max-radius", type=_max_radius, default="auto")
    p.add_argument("--subsample", type=_positive_int, default=None, help="maxmin subsample size")
    p.add_argument("--simplex-budget", type=_positive_int, default=DEFAULT_SIMPLEX_BUDGET)
    p.add_argument("--out", default=None, help="cache file (default <out-dir>/diagrams.jsonl)")
    p.set_defaults(func=cmd_diagrams)

    p = sub.add_parser("gram", help="export a kernel Gram matrix as CSV")
    p.add_argument("--pool", required=True)
    p.add_argument("--pds", default=None, help="diagram cache from the diagrams command")
    p.add_argument("--kernel", choices=KERNELS, default=KERNELS[0])
    p.add_argument("--degree", choices=["0", "1"], default="1")
    p.add_argument("--rff", action="store_true", help="random Fourier features (PWGK only)")
    p.add_argument("--rff-features", type=_positive_int, default=None)
    p.add_argument("--pfk-nu", type=float, default=None, help="pin PFK ν (with --pfk-t)")
    p.add_argument("--pfk-t", type=float, default=None, help="pin PFK t (with --pfk-nu)")
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_gram)

    p = sub.add_parser("run", help="benchmark BO configs against random search")
    p.add_argument("--pool", required=True)
    p.add_argument("--pds", default=None, help="diagram cache from the diagrams command")
    p.add_argument("--config", default=None, help="run-config JSON file")
    p.add_argument("--kernel", choices=KERNELS, nargs="+", default=None)
    p.add_argument("--degrees", choices=DEGREE_CHOICES, default=None)
    p.add_argument("--mkl", choices=MKL_CHOICES, default=None)
    p.add_argument("--table", action="store_true", help="0th, 1st, align and MLE per kernel")
    p.add_argument("--n-init", type=_positive_int, default=None)
    p.add_argument("--steps", type=int, default=None)
    p.add_argument("--repeats", type=_positive_int, default=None)
    p.add_argument("--noise-sd", type=float, default=None)
    p.add_argument("--rff", action="store_true", help="random Fourier features (PWGK only)")
    p.add_argument("--rff-features", type=_positive_int, default=None)
    p.add_argument("--out", default=None, help="runs directory (default <out-dir>/runs)")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("report", help="convergence curves and a ratio table from runs directories")
    p.add_argument("--runs", nargs="+", required=True, help="one runs directory per dataset")
    p.add_argument("--name", nargs="+", default=None, help="dataset column names")
    p.set_defaults(func=cmd_report)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=getattr(logging, args.log_level), format=LOG_FORMAT)
    try:
        return args.func(args)
    except TopoBOError as e:
        logger.debug("Command %s failed", args.command, exc_info=True)
        print(f"❌ {e}", file=sys.stderr)
        return e.exit_code
    except OSError as e:
        print(f"❌ {e.strerror or e}: {e.filename}", file=sys.stderr)
        return EXIT_IO_ERROR


if __name__ == "__main__":
    sys.exit(main())
