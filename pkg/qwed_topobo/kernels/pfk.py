"""
Persistence Fisher kernel (PFK).

Each diagram is augmented with the other's diagonal projections,

    Di′ = Di ∪ Δ(Dj),   Dj′ = Dj ∪ Δ(Di),   Δ(b, d) = ((b+d)/2, (b+d)/2),

and modelled as an isotropic normal mixture with standard deviation ν.
Both mixtures are evaluated on the shared support Θ = Di′ ∪ Dj′ and
normalized to sum 1 over Θ, so the mixture constant cancels. The Fisher
information metric between the two discrete densities is

    d_FIM = arccos(Σ_θ √(ρ_i(θ) ρ_j(θ)))

and k_PF = exp(−t · d_FIM).

Conventions:
  - both diagrams empty: d_FIM = 0, k = 1
  - one side empty: that side is its diagonal projections only
  - the affinity is clipped to [0, 1] before arccos
"""

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from qwed_topobo.errors import InputError
from qwed_topobo.kernels.pwgk import _check_positive, _component_kernel, canonical_pair
from qwed_topobo.models import PersistenceDiagram


@dataclass(frozen=True)
class PfkParams:
    """PFK hyperparameters: mixture scale ``nu`` and outer scale ``t``."""

    nu: float
    t: float

    def __post_init__(self):
        object.__setattr__(self, "nu", float(self.nu))
        object.__setattr__(self, "t", float(self.t))
        _check_positive("nu", self.nu)
        _check_positive("t", self.t)

    def to_dict(self) -> dict:
        return {"nu": self.nu, "t": self.t}


def diagonal_projection(points: np.ndarray) -> np.ndarray:
    mid = (points[:, 0] + points[:, 1]) / 2.0
    return np.column_stack([mid, mid])


def fisher_angle(rho_i: np.ndarray, rho_j: np.ndarray) -> float:
    """
    arccos of the Bhattacharyya affinity of two densities on a shared support.

    Both inputs are normalized to sum 1 first; the affinity is clipped to
    [0, 1].
    """
    rho_i = np.asarray(rho_i, dtype=float)
    rho_j = np.asarray(rho_j, dtype=float)
    affinity = float(np.sqrt((rho_i / rho_i.sum()) * (rho_j / rho_j.sum())).sum())
    return float(np.arccos(np.clip(affinity, 0.0, 1.0)))


def pfk_fim(Di: PersistenceDiagram, Dj: PersistenceDiagram, nu: float) -> float:
    """Fisher information metric between the augmented diagrams; in [0, π/2]."""
    _check_positive("nu", nu)
    if Di.degree != Dj.degree:
        raise InputError(f"Cannot compare a degree-{Di.degree} and a degree-{Dj.degree} diagram.")
    if np.array_equal(Di.points, Dj.points):
        return 0.0
    Di, Dj = canonical_pair(Di, Dj)
    aug_i = np.vstack([Di.points, diagonal_projection(Dj.points)])
    aug_j = np.vstack([Dj.points, diagonal_projection(Di.points)])
    theta = np.vstack([aug_i, aug_j])

    rho_i = _component_kernel(theta, aug_i, nu).sum(axis=1)
    rho_j = _component_kernel(theta, aug_j, nu).sum(axis=1)
    # Each mixture's own centres are in Θ, so both sums are ≥ 1.
    return fisher_angle(rho_i, rho_j)


def pfk(Di: PersistenceDiagram, Dj: PersistenceDiagram, params: PfkParams) -> float:
    """exp(−t · d_FIM), in (0, 1]."""
    return float(np.exp(-params.t * pfk_fim(Di, Dj, params.nu)))


def fim_matrix(diagrams: Sequence[PersistenceDiagram], nu: float, threads: int = 1) -> np.ndarray:
    """
    All pairwise d_FIM values at scale ``nu``.

    The upper triangle is computed once and mirrored, so the result is
    exactly symmetric with a zero diagonal.
    """
    n = len(diagrams)
    F = np.zeros((n, n))

    def fill_row(i: int) -> None:
        for j in range(i + 1, n):
            F[i, j] = pfk_fim(diagrams[i], diagrams[j], nu)

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            list(pool.map(fill_row, range(n)))
    else:
        for i in range(n):
            fill_row(i)
    return np.triu(F, 1) + np.triu(F, 1).T
