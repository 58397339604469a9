"""
Point-cloud pools: validation, JSON Lines persistence and XYZ ingestion.

JSON Lines schema, one cloud per line:

    {"id": "mol-001", "points": [[x, y, z], ...], "y": -6.3}

XYZ directory: one standard XYZ file per cloud. Line 1 is the atom count,
line 2 a comment carrying the label as ``y=<real>``, then one
``element x y z`` row per atom. Elements are ignored; the id is the file
stem.
"""

import json
import logging
import os
import re
from dataclasses import dataclass, field
from typing import Any, Dict, Iterator, List, Sequence, Tuple

import numpy as np

from qwed_topobo.errors import DataError, DataParseError, InputError
from qwed_topobo.models import PointCloud

logger = logging.getLogger(__name__)

PROVENANCE_ORBIT = "orbit"
PROVENANCE_FILE = "file"

LABEL_PATTERN = re.compile(r"(?:^|[\s,;])y\s*=\s*([-+]?(?:\d+\.?\d*|\.\d+)(?:[eE][-+]?\d+)?)")
"""Label inside an XYZ comment line, e.g. ``y=-6.3`` or ``name=water y = -6.3``."""


@dataclass(frozen=True, eq=False)
class Pool:
    """
    A labelled, indexed set of point clouds.

    Invariants: at least one cloud, unique ids, every cloud labelled, one
    shared dimension.
    """

    clouds: Tuple[PointCloud, ...]
    provenance: str = PROVENANCE_FILE
    params: Dict[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        clouds = tuple(self.clouds)
        object.__setattr__(self, "clouds", clouds)
        if not clouds:
            raise DataError("empty pool: no point clouds were found.")
        seen = set()
        for cloud in clouds:
            if cloud.id in seen:
                raise InputError(f"Duplicate cloud id {cloud.id!r} in pool.")
            seen.add(cloud.id)
            if cloud.label is None:
                raise DataError(f"Cloud {cloud.id!r} has no label; every pool entry needs y.")
        dims = sorted({cloud.dim for cloud in clouds})
        if len(dims) > 1:
            raise DataError(f"Dimension mismatch: pool mixes clouds of dimension {dims}.")

    def __len__(self) -> int:
        return len(self.clouds)

    def __iter__(self) -> Iterator[PointCloud]:
        return iter(self.clouds)

    def __getitem__(self, index: int) -> PointCloud:
        return self.clouds[index]

    @property
    def dim(self) -> int:
        return self.clouds[0].dim

    def ids(self) -> List[str]:
        return [cloud.id for cloud in self.clouds]

    def labels(self) -> np.ndarray:
        return np.array([cloud.label for cloud in self.clouds], dtype=float)

    def minimum(self) -> float:
        """Pool optimum; the target line of every convergence curve."""
        return float(self.labels().min())

    def permuted(self, order: Sequence[int]) -> "Pool":
        return Pool(tuple(self.clouds[i] for i in order), self.provenance, dict(self.params))

    def summary(self) -> Dict[str, Any]:
        labels = self.labels()
        return {
            "size": len(self),
            "dim": self.dim,
            "label_min": float(labels.min()),
            "label_max": float(labels.max()),
            "provenance": self.provenance,
        }


def load_jsonl(path: str) -> Pool:
    """
    Read a pool from JSON Lines. Blank lines are skipped.

    Raises:
        DataParseError: malformed line (with its line number).
        InputError: duplicate id.
        DataError: empty file or mixed dimensions.
    """
    clouds: List[PointCloud] = []
    with open(path, "r", encoding="utf-8") as f:
        for lineno, line in enumerate(f, start=1):
            if not line.strip():
                continue
            try:
                raw = json.loads(line)
                cloud = PointCloud(id=str(raw["id"]), points=raw["points"], label=raw["y"])
            except json.JSONDecodeError as e:
                raise DataParseError(f"Invalid JSON: {e.msg}", path, lineno) from e
            except KeyError as e:
                raise DataParseError(f"Missing field {e.args[0]!r}", path, lineno) from e
            except (TypeError, ValueError) as e:
                raise DataParseError(f"Invalid point cloud: {e}", path, lineno) from e
            clouds.append(cloud)
    if not clouds:
        raise DataError(f"empty pool: {path} contains no point clouds.")
    logger.info("Loaded %d clouds from %s", len(clouds), path)
    return Pool(tuple(clouds), PROVENANCE_FILE, {"path": path})


def save_jsonl(pool: Pool, path: str) -> None:
    """Write ``pool`` in the schema read by :func:`load_jsonl`."""
    with open(path, "w", encoding="utf-8") as f:
        for cloud in pool:
            f.write(json.dumps(cloud.to_dict()) + "\n")


def _parse_xyz(path: str) -> PointCloud:
    with open(path, "r", encoding="utf-8") as f:
        lines = f.read().splitlines()
    if len(lines) < 2:
        raise DataParseError("XYZ file needs a count line and a comment line.", path)
    try:
        count = int(lines[0].strip())
    except ValueError as e:
        raise DataParseError(f"Atom count {lines[0].strip()!r} is not an integer.", path, 1) from e
    match = LABEL_PATTERN.search(lines[1])
    if match is None:
        raise DataParseError("Comment line has no 'y=<real>' label.", path, 2)

    rows = [(k + 3, line) for k, line in enumerate(lines[2:]) if line.strip()]
    if len(rows) != count:
        raise DataParseError(f"Declared {count} atoms but found {len(rows)} coordinate rows.", path)
    points = []
    for lineno, line in rows:
        parts = line.split()
        if len(parts) < 4:
            raise DataParseError("Expected 'element x y z'.", path, lineno)
        try:
            points.append([float(v) for v in parts[1:4]])
        except ValueError as e:
            raise DataParseError(f"Invalid coordinate: {e}", path, lineno) from e
    stem = os.path.splitext(os.path.basename(path))[0]
    try:
        return PointCloud(id=stem, points=np.array(points), label=float(match.group(1)))
    except InputError as e:
        raise DataParseError(str(e), path) from e


def load_xyz_dir(path: str) -> Pool:
    """One labelled cloud per ``*.xyz`` file in ``path``, in file-name order."""
    if not os.path.isdir(path):
        raise DataError(f"{path} is not a directory.")
    files = sorted(name for name in os.listdir(path) if name.lower().endswith(".xyz"))
    if not files:
        raise DataError(f"empty pool: {path} contains no .xyz files.")
    clouds = tuple(_parse_xyz(os.path.join(path, name)) for name in files)
    logger.info("Loaded %d XYZ clouds from %s", len(clouds), path)
    return Pool(clouds, PROVENANCE_FILE, {"path": path, "format": "xyz"})


def load_pool(path: str) -> Pool:
    """Directory → XYZ set, anything else → JSON Lines."""
    return load_xyz_dir(path) if os.path.isdir(path) else load_jsonl(path)
