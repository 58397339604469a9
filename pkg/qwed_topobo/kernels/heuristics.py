"""
Median heuristics for PWGK and PFK hyperparameters.

  - C   = median over diagrams of the median persistence
  - p   = 5
  - ν   = median over diagrams of the median intra-diagram point distance
  - τ   = median over pairs i < j of the RKHS distance ‖E(μ_Di) − E(μ_Dj)‖_H
  - PFK = ν ∈ {10⁻³, 10, 10³} × 1/t ∈ {q₁, q₂, q₅, q₁₀, q₂₀, q₅₀}, where q_s is
          the s% quantile of the pairwise d_FIM values at that ν

Fallbacks for degenerate pools:
  - no diagram with ≥ 2 points: ν = median distance between all points of
    all diagrams; with a single point overall, ν = C
  - all RKHS distances 0: τ = 1
  - zero quantiles are dropped; a ν with none left keeps t = 1
"""

from dataclasses import dataclass
from typing import Sequence, Tuple

import numpy as np
from scipy.spatial.distance import pdist

from qwed_topobo.errors import InputError
from qwed_topobo.kernels.gram import pwgk_linear_matrix
from qwed_topobo.kernels.pfk import PfkParams, fim_matrix
from qwed_topobo.kernels.pwgk import DEFAULT_WEIGHT_EXPONENT, PwgkParams
from qwed_topobo.models import PersistenceDiagram

PFK_NU_GRID = (1e-3, 10.0, 1e3)
"""Mixture scales searched for PFK."""

PFK_QUANTILES = (1, 2, 5, 10, 20, 50)
"""Percentiles of the pairwise d_FIM values used as 1/t."""


@dataclass(frozen=True)
class KernelHeuristics:
    """PWGK defaults (tau included) and the PFK candidate grid."""

    pwgk: PwgkParams
    pfk_grid: Tuple[PfkParams, ...]

    def to_dict(self) -> dict:
        return {
            "pwgk": self.pwgk.to_dict(),
            "pfk_grid": [params.to_dict() for params in self.pfk_grid],
        }


def _median_persistence(diagrams: Sequence[PersistenceDiagram]) -> float:
    return float(np.median([np.median(D.persistence()) for D in diagrams if len(D)]))


def _median_point_distance(diagrams: Sequence[PersistenceDiagram]) -> float:
    per_diagram = [np.median(pdist(D.points)) for D in diagrams if len(D) >= 2]
    per_diagram = [d for d in per_diagram if d > 0]
    if per_diagram:
        return float(np.median(per_diagram))
    everything = np.vstack([D.points for D in diagrams if len(D)])
    if len(everything) >= 2:
        distances = pdist(everything)
        distances = distances[distances > 0]
        if len(distances):
            return float(np.median(distances))
    return 0.0


def _median_rkhs_distance(diagrams: Sequence[PersistenceDiagram], params: PwgkParams) -> float:
    G = pwgk_linear_matrix(diagrams, params)
    diag = np.diag(G)
    dist_sq = np.maximum(diag[:, None] + diag[None, :] - 2.0 * G, 0.0)
    upper = np.sqrt(dist_sq[np.triu_indices(len(diagrams), k=1)])
    return float(np.median(upper))


def pfk_grid(
    diagrams: Sequence[PersistenceDiagram],
    nus: Sequence[float] = PFK_NU_GRID,
    quantiles: Sequence[float] = PFK_QUANTILES,
    threads: int = 1,
) -> Tuple[PfkParams, ...]:
    grid = []
    for nu in nus:
        F = fim_matrix(diagrams, nu, threads=threads)
        values = F[np.triu_indices(len(diagrams), k=1)]
        qs = [q for q in np.percentile(values, quantiles) if q > 0]
        if not qs:
            grid.append(PfkParams(nu=nu, t=1.0))
            continue
        grid.extend(PfkParams(nu=nu, t=1.0 / q) for q in qs)
    return tuple(grid)


def heuristics(
    diagrams: Sequence[PersistenceDiagram],
    p: float = DEFAULT_WEIGHT_EXPONENT,
    nus: Sequence[float] = PFK_NU_GRID,
    quantiles: Sequence[float] = PFK_QUANTILES,
    threads: int = 1,
    with_pfk: bool = True,
) -> KernelHeuristics:
    """
    Median-heuristic hyperparameters for one diagram set.

    ``with_pfk=False`` skips the d_FIM quantiles and leaves the PFK grid empty.

    Raises:
        InputError: fewer than 2 diagrams, or every diagram is empty.
    """
    if len(diagrams) < 2:
        raise InputError(f"Heuristics need at least 2 diagrams, got {len(diagrams)}.")
    if all(len(D) == 0 for D in diagrams):
        raise InputError("All diagrams are empty; no statistics to derive hyperparameters from.")

    C = _median_persistence(diagrams)
    nu = _median_point_distance(diagrams) or C
    base = PwgkParams(C=C, nu=nu, p=p)
    tau = _median_rkhs_distance(diagrams, base) or 1.0
    return KernelHeuristics(
        pwgk=base.with_tau(tau),
        pfk_grid=pfk_grid(diagrams, nus, quantiles, threads=threads) if with_pfk else (),
    )
