"""
Persistent homology of point clouds under a Vietoris–Rips filtration.

The filtration parameter is the ball radius: an edge (i, j) enters at
``distance(i, j) / 2`` and a triangle at the largest value of its three
edges, so diagrams read in radius units.

Simplex order is (value, dimension, lexicographic vertex tuple). With that
total order the persistence pairing is unique, which is what makes the fast
paths below (union-find for H0, gudhi's simplex-tree reduction for H1) agree
pair for pair with a naive reduction of the full boundary matrix.

Coefficients are GF(2). Essential classes and zero-persistence pairs are
excluded from every diagram.
"""

import logging
from typing import Dict, Iterable, List, Optional, Tuple, Union

import gudhi
import numpy as np
from scipy.cluster.hierarchy import DisjointSet
from scipy.spatial.distance import pdist, squareform

from qwed_topobo.errors import InputError, ResourceError
from qwed_topobo.models import H0, H1, FilteredEdge, PersistenceDiagram, PointCloud

logger = logging.getLogger(__name__)

DEFAULT_SIMPLEX_BUDGET = 50_000_000
"""Maximum number of triangles compute_h1 will build."""

SUBSAMPLE_HINT = 300
"""Point count suggested to callers when the simplex budget is exceeded."""

MaxRadius = Union[None, str, float]


def _check_finite(cloud: PointCloud) -> None:
    if not np.all(np.isfinite(cloud.points)):
        raise InputError(f"Cloud {cloud.id!r} has non-finite coordinates.")


def _radius_matrix(cloud: PointCloud) -> np.ndarray:
    """Square matrix of pairwise filtration values (distance / 2)."""
    return squareform(pdist(cloud.points)) / 2.0


def _sorted_edge_arrays(cloud: PointCloud, max_radius: float) -> Tuple[np.ndarray, ...]:
    """Edges with value ≤ max_radius as (values, i, j) arrays in filtration order."""
    n = cloud.size
    if n < 2:
        return np.empty(0), np.empty(0, dtype=int), np.empty(0, dtype=int)
    values = pdist(cloud.points) / 2.0
    # pdist enumerates pairs in (i, j) lexicographic order, so a stable sort
    # on the value alone breaks ties lexicographically.
    ii, jj = np.triu_indices(n, k=1)
    keep = values <= max_radius
    values, ii, jj = values[keep], ii[keep], jj[keep]
    order = np.argsort(values, kind="stable")
    return values[order], ii[order], jj[order]


def rips_edges(cloud: PointCloud, max_radius: float) -> List[FilteredEdge]:
    """
    Edges of the Rips filtration up to ``max_radius``, in filtration order.

    Ties in value are broken by (i, j) lexicographic order.
    """
    _check_finite(cloud)
    if not max_radius > 0:
        raise InputError(f"max_radius must be positive, got {max_radius}.")
    values, ii, jj = _sorted_edge_arrays(cloud, max_radius)
    return [FilteredEdge(float(v), int(i), int(j)) for v, i, j in zip(values, ii, jj)]


def enclosing_radius(cloud: PointCloud) -> float:
    """
    min over points of (max distance to any other point) / 2.

    Beyond this radius the Rips complex is a cone and H1 is trivial.
    """
    if cloud.size < 2:
        return 0.0
    return float(_radius_matrix(cloud).max(axis=1).min())


def default_h0_radius(cloud: PointCloud) -> float:
    """Largest pairwise distance / 2; guarantees the full spanning tree."""
    if cloud.size < 2:
        return 0.0
    return float(pdist(cloud.points).max() / 2.0)


def resolve_max_radius(cloud: PointCloud, degree: int, max_radius: MaxRadius = "auto") -> float:
    """Turn ``None``/``"auto"``/number into a concrete radius for ``degree``."""
    if max_radius is None or max_radius == "auto":
        return enclosing_radius(cloud) if degree == H1 else default_h0_radius(cloud)
    radius = float(max_radius)
    if not radius > 0 or not np.isfinite(radius):
        raise InputError(f"max_radius must be a positive finite number, got {max_radius!r}.")
    return radius


def compute_h0(cloud: PointCloud, max_radius: Optional[float] = None) -> PersistenceDiagram:
    """
    0th persistence diagram by union-find over the sorted Rips edges.

    Every merge at radius r emits (0, r); under the elder rule the younger
    component dies, and with all births at 0 any merge emits exactly one
    point. Components still alive at ``max_radius`` are essential and
    excluded. For a connected cloud the deaths are the MST edge values.
    """
    _check_finite(cloud)
    if max_radius is None:
        max_radius = default_h0_radius(cloud)
        if max_radius == 0.0:
            return PersistenceDiagram(degree=H0)
    elif not max_radius > 0:
        raise InputError(f"max_radius must be positive, got {max_radius}.")

    values, ii, jj = _sorted_edge_arrays(cloud, max_radius)
    components = DisjointSet(range(cloud.size))
    deaths: List[float] = []
    for value, i, j in zip(values, ii, jj):
        if components.merge(int(i), int(j)):
            deaths.append(float(value))
            if len(deaths) == cloud.size - 1:
                break
    points = [(0.0, d) for d in deaths if d > 0.0]
    return PersistenceDiagram(degree=H0, points=np.array(points).reshape(-1, 2))


def count_triangles(cloud: PointCloud, max_radius: float) -> int:
    """Exact number of Rips triangles with value ≤ max_radius (trace(A³) / 6)."""
    if cloud.size < 3:
        return 0
    adjacency = (_radius_matrix(cloud) <= max_radius).astype(float)
    np.fill_diagonal(adjacency, 0.0)
    # trace(A³) for symmetric A
    return int(round(float(((adjacency @ adjacency) * adjacency).sum()) / 6.0))


def compute_h1(
    cloud: PointCloud,
    max_radius: Optional[float] = None,
    simplex_budget: int = DEFAULT_SIMPLEX_BUDGET,
) -> PersistenceDiagram:
    """
    1st persistence diagram of the Rips 2-skeleton, reduced by gudhi.

    The simplex tree is built from the radius matrix itself, so every
    filtration value is an exact pairwise radius and the diagram matches a
    naive full reduction pair for pair. Unpaired edges are essential and
    excluded.

    Raises:
        ResourceError: the complex would hold more triangles than
            ``simplex_budget``; subsample the cloud first.
    """
    _check_finite(cloud)
    if max_radius is None:
        max_radius = enclosing_radius(cloud)
        if max_radius == 0.0:
            return PersistenceDiagram(degree=H1)
    elif not max_radius > 0:
        raise InputError(f"max_radius must be positive, got {max_radius}.")

    n = cloud.size
    if n < 3:
        return PersistenceDiagram(degree=H1)

    n_triangles = count_triangles(cloud, max_radius)
    if n_triangles > simplex_budget:
        raise ResourceError(
            f"Cloud {cloud.id!r} ({n} points) has {n_triangles:,} triangles at radius "
            f"{max_radius:.6g}, above the simplex budget of {simplex_budget:,}. "
            f"Subsample it (e.g. subsample_maxmin to {SUBSAMPLE_HINT} points) first."
        )

    rips = gudhi.RipsComplex(distance_matrix=_radius_matrix(cloud), max_edge_length=max_radius)
    tree = rips.create_simplex_tree(max_dimension=2)
    tree.compute_persistence(homology_coeff_field=2, persistence_dim_max=False)
    intervals = np.asarray(tree.persistence_intervals_in_dimension(1), dtype=float).reshape(-1, 2)
    keep = np.isfinite(intervals[:, 1]) & (intervals[:, 1] > intervals[:, 0])
    pairs = intervals[keep]

    logger.debug(
        "H1 of %s: %d points, %d triangles, %d finite pairs",
        cloud.id, n, n_triangles, len(pairs),
    )
    return PersistenceDiagram(degree=H1, points=pairs)


def subsample_maxmin(cloud: PointCloud, m: int, seed: int = 0) -> PointCloud:
    """
    Farthest-point (maxmin) subsample of ``m`` points.

    The first point is drawn with ``seed``; each next point maximizes the
    distance to the points already chosen (first index on ties). Id and
    label are preserved.
    """
    if not 1 <= m <= cloud.size:
        raise InputError(f"Subsample size must satisfy 1 ≤ m ≤ {cloud.size}, got {m}.")
    if m == cloud.size:
        return cloud
    rng = np.random.default_rng(seed)
    pts = cloud.points
    chosen = [int(rng.integers(cloud.size))]
    dist = np.linalg.norm(pts - pts[chosen[0]], axis=1)
    while len(chosen) < m:
        nxt = int(np.argmax(dist))
        chosen.append(nxt)
        dist = np.minimum(dist, np.linalg.norm(pts - pts[nxt], axis=1))
    return PointCloud(id=cloud.id, points=pts[chosen], label=cloud.label)


def compute_diagrams(
    cloud: PointCloud,
    degrees: Iterable[int] = (H0, H1),
    max_radius: MaxRadius = "auto",
    subsample: Optional[int] = None,
    seed: int = 0,
    simplex_budget: int = DEFAULT_SIMPLEX_BUDGET,
) -> Dict[int, PersistenceDiagram]:
    """Diagrams of ``cloud`` for each requested degree, optionally subsampled first."""
    if subsample is not None and subsample < cloud.size:
        cloud = subsample_maxmin(cloud, subsample, seed=seed)
    out: Dict[int, PersistenceDiagram] = {}
    for degree in degrees:
        radius = resolve_max_radius(cloud, degree, max_radius)
        if radius == 0.0:
            out[degree] = PersistenceDiagram(degree=degree)
        elif degree == H0:
            out[degree] = compute_h0(cloud, radius)
        elif degree == H1:
            out[degree] = compute_h1(cloud, radius, simplex_budget=simplex_budget)
        else:
            raise InputError(f"Homology degree {degree} is not supported.")
    return out
