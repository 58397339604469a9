"""
Synthetic orbit pool from the linked twist map.

    x_{n+1} = x_n + r · y_n (1 − y_n)          mod 1
    y_{n+1} = y_n + r · x_{n+1} (1 − x_{n+1})  mod 1

Each cloud is the first N iterates from a start (x₀, y₀) on [0, 1)² with r
drawn uniformly from [r_min, r_max]; the label is r. The topology of the
orbit changes with r, which is what makes the label learnable from
persistence diagrams.

Randomness: cloud i draws its start and r from its own PCG64 generator,
spawned from ``SeedSequence(seed)``. With ``shared_start`` a single start
is drawn from the root generator and reused by every cloud.
"""

from typing import List

import numpy as np

from qwed_topobo.datasets.io import PROVENANCE_ORBIT, Pool
from qwed_topobo.errors import InputError
from qwed_topobo.models import PointCloud

DEFAULT_R_MIN = 2.0
DEFAULT_R_MAX = 4.3
DEFAULT_CLOUDS = 1000
DEFAULT_POINTS = 1000


def orbit_points(x0: np.ndarray, y0: np.ndarray, r: np.ndarray, n_points: int) -> np.ndarray:
    """
    Iterate many orbits in lock-step.

    Takes start coordinates and parameters of shape (M,) and returns an
    (M, n_points, 2) array whose first point is the start.
    """
    x = np.asarray(x0, dtype=float).copy()
    y = np.asarray(y0, dtype=float).copy()
    r = np.asarray(r, dtype=float)
    out = np.empty((x.size, n_points, 2))
    out[:, 0, 0], out[:, 0, 1] = x, y
    for n in range(1, n_points):
        x = np.mod(x + r * y * (1.0 - y), 1.0)
        y = np.mod(y + r * x * (1.0 - x), 1.0)
        out[:, n, 0], out[:, n, 1] = x, y
    return out


def gen_orbit(
    M: int = DEFAULT_CLOUDS,
    N: int = DEFAULT_POINTS,
    r_min: float = DEFAULT_R_MIN,
    r_max: float = DEFAULT_R_MAX,
    seed: int = 0,
    shared_start: bool = False,
) -> Pool:
    """Pool of M orbit clouds with N points each, labelled by r."""
    if M < 1 or N < 1:
        raise InputError(f"gen_orbit needs M ≥ 1 and N ≥ 1, got M={M}, N={N}.")
    if not r_min < r_max:
        raise InputError(f"gen_orbit needs r_min < r_max, got [{r_min}, {r_max}].")

    root = np.random.SeedSequence(seed)
    generators: List[np.random.Generator] = [
        np.random.Generator(np.random.PCG64(child)) for child in root.spawn(M)
    ]
    starts = np.array([g.random(2) for g in generators])
    r = np.array([g.uniform(r_min, r_max) for g in generators])
    if shared_start:
        shared = np.random.Generator(np.random.PCG64(root)).random(2)
        starts[:] = shared

    orbits = orbit_points(starts[:, 0], starts[:, 1], r, N)
    clouds = tuple(
        PointCloud(id=f"orbit-{i:05d}", points=orbits[i], label=float(r[i])) for i in range(M)
    )
    params = {
        "M": M,
        "N": N,
        "r_min": r_min,
        "r_max": r_max,
        "seed": seed,
        "shared_start": shared_start,
        "generator": "PCG64",
    }
    return Pool(clouds, PROVENANCE_ORBIT, params)
