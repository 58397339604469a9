"""
Persistence-diagram cache (JSON Lines) and batch computation over a pool.

One record per (cloud, degree):

    {"id": "orbit-00001", "degree": 1, "points": [[b, d], ...],
     "max_radius": 0.61, "subsample": 300, "seed": 0}

A record is reused only when id, degree, resolved max_radius and the
subsampling settings all match; anything else is recomputed and appended.
"""

import json
import logging
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np

from qwed_topobo.errors import DataParseError
from qwed_topobo.models import PersistenceDiagram, PointCloud
from qwed_topobo.topology.persistence import (
    DEFAULT_SIMPLEX_BUDGET,
    MaxRadius,
    compute_h0,
    compute_h1,
    resolve_max_radius,
    subsample_maxmin,
)

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class CacheRecord:
    """One cached diagram plus the settings it was computed with."""

    id: str
    diagram: PersistenceDiagram
    max_radius: float
    subsample: Optional[int] = None
    seed: int = 0

    @property
    def key(self) -> Tuple[str, int]:
        return (self.id, self.diagram.degree)

    def matches(self, max_radius: float, subsample: Optional[int], seed: int) -> bool:
        if self.max_radius != max_radius or self.subsample != subsample:
            return False
        return subsample is None or self.seed == seed

    def to_dict(self) -> dict:
        return {
            "id": self.id,
            "degree": self.diagram.degree,
            "points": self.diagram.points.tolist(),
            "max_radius": self.max_radius,
            "subsample": self.subsample,
            "seed": self.seed,
        }


class DiagramCache:
    """
    Append-only JSON Lines store of persistence diagrams.

    Later records for the same (id, degree) replace earlier ones on load.
    """

    def __init__(self, path: Optional[str] = None):
        self.path = path
        self._records: Dict[Tuple[str, int], CacheRecord] = {}
        if path is not None and os.path.exists(path):
            self._load(path)

    def _load(self, path: str) -> None:
        with open(path, "r", encoding="utf-8") as f:
            for lineno, line in enumerate(f, start=1):
                if not line.strip():
                    continue
                try:
                    raw = json.loads(line)
                    record = CacheRecord(
                        id=str(raw["id"]),
                        diagram=PersistenceDiagram(
                            degree=int(raw["degree"]),
                            points=np.array(raw["points"], dtype=float).reshape(-1, 2),
                        ),
                        max_radius=float(raw["max_radius"]),
                        subsample=raw.get("subsample"),
                        seed=int(raw.get("seed", 0)),
                    )
                except (ValueError, KeyError, TypeError) as e:
                    raise DataParseError(f"Invalid diagram cache record: {e}", path, lineno) from e
                self._records[record.key] = record

    def __len__(self) -> int:
        return len(self._records)

    def get(
        self,
        cloud_id: str,
        degree: int,
        max_radius: float,
        subsample: Optional[int] = None,
        seed: int = 0,
    ) -> Optional[PersistenceDiagram]:
        record = self._records.get((cloud_id, degree))
        if record is not None and record.matches(max_radius, subsample, seed):
            return record.diagram
        return None

    def put(self, record: CacheRecord) -> None:
        self._records[record.key] = record
        if self.path is not None:
            with open(self.path, "a", encoding="utf-8") as f:
                f.write(json.dumps(record.to_dict(), sort_keys=True) + "\n")

    def diagrams(self, ids: Sequence[str], degree: int) -> List[PersistenceDiagram]:
        """Diagrams for ``ids`` in order; missing entries are a data error."""
        missing = [i for i in ids if (i, degree) not in self._records]
        if missing:
            raise DataParseError(
                f"Diagram cache has no degree-{degree} record for {len(missing)} cloud(s), "
                f"e.g. {missing[0]!r}. Run the diagrams command first.",
                self.path,
            )
        return [self._records[(i, degree)].diagram for i in ids]

    def records(self) -> List[CacheRecord]:
        return list(self._records.values())


def _diagram_job(
    args: Tuple[PointCloud, int, MaxRadius, Optional[int], int, int],
) -> CacheRecord:
    cloud, degree, max_radius, subsample, seed, budget = args
    if subsample is not None and subsample < cloud.size:
        cloud = subsample_maxmin(cloud, subsample, seed=seed)
    radius = resolve_max_radius(cloud, degree, max_radius)
    if radius == 0.0:
        diagram = PersistenceDiagram(degree=degree)
    elif degree == 0:
        diagram = compute_h0(cloud, radius)
    else:
        diagram = compute_h1(cloud, radius, simplex_budget=budget)
    return CacheRecord(cloud.id, diagram, radius, subsample, seed)


def _resolved_radius(
    cloud: PointCloud, degree: int, max_radius: MaxRadius, subsample: Optional[int], seed: int
) -> float:
    if subsample is not None and subsample < cloud.size:
        cloud = subsample_maxmin(cloud, subsample, seed=seed)
    return resolve_max_radius(cloud, degree, max_radius)


def compute_pool_diagrams(
    clouds: Sequence[PointCloud],
    degrees: Iterable[int],
    cache: Optional[DiagramCache] = None,
    max_radius: MaxRadius = "auto",
    subsample: Optional[int] = None,
    seed: int = 0,
    threads: int = 1,
    simplex_budget: int = DEFAULT_SIMPLEX_BUDGET,
) -> Dict[int, List[PersistenceDiagram]]:
    """
    Diagrams for every cloud and degree, reusing cache hits.

    Misses run in a process pool of ``threads`` workers; results are stored
    in input order so the cache file is identical across thread counts.
    """
    cache = cache if cache is not None else DiagramCache()
    degrees = list(degrees)
    jobs = []
    for cloud in clouds:
        for degree in degrees:
            radius = _resolved_radius(cloud, degree, max_radius, subsample, seed)
            if cache.get(cloud.id, degree, radius, subsample, seed) is not None:
                logger.info("Cache hit: %s degree %d", cloud.id, degree)
                continue
            jobs.append((cloud, degree, max_radius, subsample, seed, simplex_budget))

    if jobs:
        logger.info("Computing %d diagram(s) with %d worker(s)", len(jobs), threads)
        step = max(1, len(jobs) // 10)
        if threads > 1:
            with ProcessPoolExecutor(max_workers=threads) as pool:
                results = pool.map(_diagram_job, jobs)
                for k, record in enumerate(results, start=1):
                    cache.put(record)
                    if k % step == 0:
                        logger.info("Diagrams: %d/%d", k, len(jobs))
        else:
            for k, job in enumerate(jobs, start=1):
                cache.put(_diagram_job(job))
                if k % step == 0:
                    logger.info("Diagrams: %d/%d", k, len(jobs))

    ids = [c.id for c in clouds]
    return {degree: cache.diagrams(ids, degree) for degree in degrees}
