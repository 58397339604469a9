"""
QWED-TopoBO: Bayesian Optimization over Persistence Diagrams

Pool-based Bayesian optimization for point clouds. Clouds are compared
through their 0th and 1st persistence diagrams with persistence weighted
Gaussian kernels (PWGK) or persistence Fisher kernels (PFK); the two
homology degrees can be fused by kernel alignment or likelihood-based
multiple kernel learning.
"""

from typing import Dict, List, Optional, Sequence

from qwed_topobo.bayes.benchmark import BenchmarkResult, BenchmarkTable, benchmark, benchmark_table
from qwed_topobo.bayes.loop import KernelPool, aucc, run_bo, run_random
from qwed_topobo.config import KernelConfig, RunConfig, load_run_config, table_configs
from qwed_topobo.datasets.io import Pool, load_jsonl, load_pool, load_xyz_dir, save_jsonl
from qwed_topobo.datasets.orbit import gen_orbit
from qwed_topobo.errors import (
    ConfigError,
    DataError,
    DataParseError,
    InputError,
    NumericalError,
    ResourceError,
    TopoBOError,
)
from qwed_topobo.kernels.gram import KernelSpec, gram
from qwed_topobo.kernels.heuristics import heuristics
from qwed_topobo.models import (
    H0,
    H1,
    BOStep,
    BOTrace,
    GramMatrix,
    PersistenceDiagram,
    PointCloud,
    trace_to_dict,
)
from qwed_topobo.topology.cache import DiagramCache, compute_pool_diagrams
from qwed_topobo.topology.persistence import MaxRadius, compute_diagrams, compute_h0, compute_h1

__version__ = "0.1.0"
__all__ = [
    "BenchmarkResult",
    "BenchmarkTable",
    "benchmark",
    "benchmark_table",
    "KernelPool",
    "aucc",
    "run_bo",
    "run_random",
    "KernelConfig",
    "RunConfig",
    "load_run_config",
    "table_configs",
    "Pool",
    "load_jsonl",
    "load_pool",
    "load_xyz_dir",
    "save_jsonl",
    "gen_orbit",
    "ConfigError",
    "DataError",
    "DataParseError",
    "InputError",
    "NumericalError",
    "ResourceError",
    "TopoBOError",
    "KernelSpec",
    "gram",
    "heuristics",
    "H0",
    "H1",
    "BOStep",
    "BOTrace",
    "GramMatrix",
    "PersistenceDiagram",
    "PointCloud",
    "trace_to_dict",
    "DiagramCache",
    "compute_pool_diagrams",
    "compute_diagrams",
    "compute_h0",
    "compute_h1",
    "TopologicalBO",
]


class TopologicalBO:
    """
    All-in-one pipeline over a single pool.

    Diagrams are computed once per degree (through an optional on-disk
    cache) and kernel pools once per (kernel, degrees, kernel options).

    Args:
        pool: Labelled point clouds to optimize over.
        cache_path: Optional JSON Lines diagram cache; hits skip recomputation.
        max_radius: "auto" or a fixed filtration radius.
        subsample: Maxmin subsample size applied before diagram computation.
        seed: Subsampling seed.
        threads: Workers for diagrams, Gram assembly and repeats.

    Example:
        >>> from qwed_topobo import TopologicalBO, RunConfig, gen_orbit
        >>> bo = TopologicalBO(gen_orbit(M=40, N=80, seed=1))
        >>> trace = bo.run(RunConfig(n_init=5, n_steps=10))
        >>> trace.aucc >= 0
        True
    """

    def __init__(
        self,
        pool: Pool,
        cache_path: Optional[str] = None,
        max_radius: MaxRadius = "auto",
        subsample: Optional[int] = None,
        seed: int = 0,
        threads: int = 1,
    ):
        self.pool = pool
        self.cache = DiagramCache(cache_path)
        self.max_radius = max_radius
        self.subsample = subsample
        self.seed = seed
        self.threads = threads
        self._diagrams: Dict[int, List[PersistenceDiagram]] = {}
        self._kernel_pools: Dict[tuple, KernelPool] = {}

    def diagrams(self, degrees: Sequence[int] = (H0, H1)) -> Dict[int, List[PersistenceDiagram]]:
        """Persistence diagrams of every cloud for ``degrees``."""
        missing = [d for d in degrees if d not in self._diagrams]
        if missing:
            self._diagrams.update(
                compute_pool_diagrams(
                    list(self.pool),
                    missing,
                    cache=self.cache,
                    max_radius=self.max_radius,
                    subsample=self.subsample,
                    seed=self.seed,
                    threads=self.threads,
                )
            )
        return {d: self._diagrams[d] for d in degrees}

    def kernel_pool(self, cfg: RunConfig) -> KernelPool:
        """Gram candidates for ``cfg``, built on first use."""
        key = (cfg.kernel, cfg.degrees, cfg.kernel_config)
        if key not in self._kernel_pools:
            diagrams = self.diagrams(cfg.homology_degrees)
            self._kernel_pools[key] = KernelPool.build(
                self.pool, diagrams, cfg, threads=self.threads
            )
        return self._kernel_pools[key]

    def run(self, cfg: RunConfig, seed: Optional[int] = None) -> BOTrace:
        """One BO run; ``seed`` defaults to ``cfg.seed``."""
        return run_bo(self.kernel_pool(cfg), cfg, cfg.seed if seed is None else seed)

    def run_random(self, cfg: RunConfig, seed: Optional[int] = None) -> BOTrace:
        """Random search with the same initialization as :meth:`run`."""
        return run_random(self.pool, cfg, cfg.seed if seed is None else seed)

    def benchmark(
        self, configs: Sequence[RunConfig], trace_dir: Optional[str] = None
    ) -> BenchmarkResult:
        """Random baseline plus every config, AUCC ratios scaled by random."""
        degrees = sorted({d for cfg in configs for d in cfg.homology_degrees})
        return benchmark(
            self.pool, self.diagrams(degrees), configs, threads=self.threads, trace_dir=trace_dir
        )
