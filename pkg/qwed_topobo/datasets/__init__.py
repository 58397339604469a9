"""QWED-TopoBO Datasets Module: orbit generator and pool file formats."""

from qwed_topobo.datasets.io import (
    PROVENANCE_FILE,
    PROVENANCE_ORBIT,
    Pool,
    load_jsonl,
    load_pool,
    load_xyz_dir,
    save_jsonl,
)
from qwed_topobo.datasets.orbit import gen_orbit, orbit_points

__all__ = [
    "PROVENANCE_FILE",
    "PROVENANCE_ORBIT",
    "Pool",
    "load_jsonl",
    "load_pool",
    "load_xyz_dir",
    "save_jsonl",
    "gen_orbit",
    "orbit_points",
]
