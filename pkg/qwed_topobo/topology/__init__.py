"""QWED-TopoBO Topology Module: Rips persistence diagrams and their cache."""

from qwed_topobo.topology.persistence import (
    DEFAULT_SIMPLEX_BUDGET,
    SUBSAMPLE_HINT,
    compute_diagrams,
    compute_h0,
    compute_h1,
    count_triangles,
    default_h0_radius,
    enclosing_radius,
    resolve_max_radius,
    rips_edges,
    subsample_maxmin,
)
from qwed_topobo.topology.cache import CacheRecord, DiagramCache, compute_pool_diagrams

__all__ = [
    "DEFAULT_SIMPLEX_BUDGET",
    "SUBSAMPLE_HINT",
    "compute_diagrams",
    "compute_h0",
    "compute_h1",
    "count_triangles",
    "default_h0_radius",
    "enclosing_radius",
    "resolve_max_radius",
    "rips_edges",
    "subsample_maxmin",
    "CacheRecord",
    "DiagramCache",
    "compute_pool_diagrams",
]
