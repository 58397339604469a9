"""
Gram matrix assembly and CSV export for the persistence-diagram kernels.

Key distinction:
  - The scalar functions in ``pwgk`` and ``pfk`` are the reference path.
  - This module computes the same values in bulk: PWGK rows are vectorized
    over all points of the pool, PWGK-Gaussian is derived from the linear
    Gram, PFK from one d_FIM matrix per ν. The upper triangle is computed
    and mirrored, so every result is exactly symmetric.
"""

import csv
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence

import numpy as np
from scipy.spatial.distance import cdist

from qwed_topobo.errors import DataParseError, InputError
from qwed_topobo.kernels.pfk import PfkParams, fim_matrix
from qwed_topobo.kernels.pwgk import (
    PwgkParams,
    RffEmbedding,
    pwgk_weights,
    rff_embed,
)
from qwed_topobo.models import GramMatrix, PersistenceDiagram

logger = logging.getLogger(__name__)

# ── Kernel names ───────────────────────────────────────────────────────────────
KERNEL_PWGK_LINEAR = "pwgk_linear"
"""Σ w(x) w(y) k_G(x, y); unbounded, PSD."""

KERNEL_PWGK_GAUSSIAN = "pwgk_gaussian"
"""Outer Gaussian on the PWGK RKHS distance; unit diagonal."""

KERNEL_PFK = "pfk"
"""Persistence Fisher kernel; unit diagonal."""

KERNELS = (KERNEL_PWGK_LINEAR, KERNEL_PWGK_GAUSSIAN, KERNEL_PFK)


@dataclass(frozen=True)
class KernelSpec:
    """
    A fully parameterized kernel.

    PWGK kinds need ``pwgk`` (with tau for the Gaussian variant); PFK needs
    ``pfk``. ``rff`` switches PWGK to the random-feature approximation.
    """

    kind: str
    pwgk: Optional[PwgkParams] = None
    pfk: Optional[PfkParams] = None
    rff: Optional[RffEmbedding] = None

    def __post_init__(self):
        if self.kind not in KERNELS:
            raise InputError(f"Unknown kernel {self.kind!r}; choose one of {KERNELS}.")
        if self.kind == KERNEL_PFK:
            if self.pfk is None:
                raise InputError("The pfk kernel needs PfkParams.")
            if self.rff is not None:
                raise InputError("Random Fourier features apply to PWGK only.")
            return
        if self.pwgk is None:
            raise InputError(f"The {self.kind} kernel needs PwgkParams.")
        if self.kind == KERNEL_PWGK_GAUSSIAN and self.pwgk.tau is None:
            raise InputError("The pwgk_gaussian kernel needs tau.")
        if self.rff is not None and self.rff.nu != self.pwgk.nu:
            raise InputError(
                f"RFF embedding was drawn for nu={self.rff.nu}, kernel uses nu={self.pwgk.nu}."
            )

    def describe(self) -> str:
        if self.kind == KERNEL_PFK:
            return f"pfk(nu={self.pfk.nu:.6g},t={self.pfk.t:.6g})"
        params = f"C={self.pwgk.C:.6g},p={self.pwgk.p:.6g},nu={self.pwgk.nu:.6g}"
        if self.kind == KERNEL_PWGK_GAUSSIAN:
            params += f",tau={self.pwgk.tau:.6g}"
        suffix = f"+rff{self.rff.num_features}" if self.rff is not None else ""
        return f"{self.kind}({params}){suffix}"


def _run_rows(fill_row, n: int, threads: int) -> None:
    if threads > 1 and n > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            list(pool.map(fill_row, range(n)))
    else:
        for i in range(n):
            fill_row(i)


def _mirror_upper(G: np.ndarray) -> np.ndarray:
    return np.triu(G) + np.triu(G, 1).T


def pwgk_linear_matrix(
    diagrams: Sequence[PersistenceDiagram], params: PwgkParams, threads: int = 1
) -> np.ndarray:
    """PWGK-Linear Gram; rows and columns of empty diagrams are 0."""
    n = len(diagrams)
    G = np.zeros((n, n))
    nonempty = [k for k, D in enumerate(diagrams) if len(D)]
    if not nonempty:
        return G
    points = np.vstack([diagrams[k].points for k in nonempty])
    weights = np.concatenate([pwgk_weights(diagrams[k], params) for k in nonempty])
    sizes = np.array([len(diagrams[k]) for k in nonempty])
    starts = np.concatenate([[0], np.cumsum(sizes)[:-1]])
    two_nu_sq = 2.0 * params.nu * params.nu

    def fill_row(a: int) -> None:
        D = diagrams[nonempty[a]]
        offset = starts[a]
        block = np.exp(-cdist(D.points, points[offset:], "sqeuclidean") / two_nu_sq)
        contributions = (weights[offset:offset + sizes[a]] @ block) * weights[offset:]
        G[nonempty[a], nonempty[a:]] = np.add.reduceat(contributions, starts[a:] - offset)

    _run_rows(fill_row, len(nonempty), threads)
    return _mirror_upper(G)


def rff_linear_matrix(
    diagrams: Sequence[PersistenceDiagram], params: PwgkParams, emb: RffEmbedding
) -> np.ndarray:
    """PWGK-Linear Gram approximated by inner products of RFF embeddings."""
    Z = np.vstack([rff_embed(D, params, emb) for D in diagrams])
    return _mirror_upper(Z @ Z.T)


def gaussian_from_linear(G: np.ndarray, tau: float) -> np.ndarray:
    """exp(−(G_ii + G_jj − 2G_ij) / (2τ²)) with the squared distance clamped at 0."""
    diag = np.diag(G)
    dist_sq = np.maximum(diag[:, None] + diag[None, :] - 2.0 * G, 0.0)
    np.fill_diagonal(dist_sq, 0.0)
    return _mirror_upper(np.exp(-dist_sq / (2.0 * tau * tau)))


def _check_degrees(diagrams: Sequence[PersistenceDiagram]) -> Optional[int]:
    degrees = {D.degree for D in diagrams}
    if len(degrees) > 1:
        raise InputError(f"Gram matrix diagrams must share one degree, got {sorted(degrees)}.")
    return degrees.pop() if degrees else None


def gram(
    diagrams: Sequence[PersistenceDiagram],
    spec: KernelSpec,
    ids: Optional[Sequence[str]] = None,
    threads: int = 1,
) -> GramMatrix:
    """Gram matrix of ``spec`` over ``diagrams`` (ids default to d0, d1, ...)."""
    degree = _check_degrees(diagrams)
    ids = tuple(ids) if ids is not None else tuple(f"d{k}" for k in range(len(diagrams)))
    if len(ids) != len(diagrams):
        raise InputError(f"Got {len(ids)} ids for {len(diagrams)} diagrams.")

    if spec.kind == KERNEL_PFK:
        F = fim_matrix(diagrams, spec.pfk.nu, threads=threads)
        values = np.exp(-spec.pfk.t * F)
    else:
        if spec.rff is not None:
            values = rff_linear_matrix(diagrams, spec.pwgk, spec.rff)
        else:
            values = pwgk_linear_matrix(diagrams, spec.pwgk, threads=threads)
        if spec.kind == KERNEL_PWGK_GAUSSIAN:
            values = gaussian_from_linear(values, spec.pwgk.tau)

    logger.debug("Gram %s over %d diagrams", spec.describe(), len(diagrams))
    return GramMatrix(ids=ids, values=values, kernel_desc=spec.describe(), degree=degree)


def pfk_grams(
    diagrams: Sequence[PersistenceDiagram],
    grid: Sequence[PfkParams],
    ids: Optional[Sequence[str]] = None,
    threads: int = 1,
) -> List[GramMatrix]:
    """One PFK Gram per grid entry; d_FIM is computed once per distinct ν."""
    degree = _check_degrees(diagrams)
    ids = tuple(ids) if ids is not None else tuple(f"d{k}" for k in range(len(diagrams)))
    fims: Dict[float, np.ndarray] = {}
    out = []
    for params in grid:
        if params.nu not in fims:
            fims[params.nu] = fim_matrix(diagrams, params.nu, threads=threads)
        spec = KernelSpec(kind=KERNEL_PFK, pfk=params)
        out.append(
            GramMatrix(
                ids=ids,
                values=np.exp(-params.t * fims[params.nu]),
                kernel_desc=spec.describe(),
                degree=degree,
            )
        )
    return out


def write_gram_csv(matrix: GramMatrix, path: str) -> None:
    """CSV with a header row of diagram ids, then one row of values per id."""
    with open(path, "w", newline="", encoding="utf-8") as f:
        writer = csv.writer(f)
        writer.writerow(matrix.ids)
        for row in matrix.values:
            writer.writerow([repr(float(v)) for v in row])


def read_gram_csv(path: str, kernel_desc: str = "", degree: Optional[int] = None) -> GramMatrix:
    with open(path, "r", newline="", encoding="utf-8") as f:
        rows = list(csv.reader(f))
    if not rows:
        raise DataParseError("Gram CSV is empty.", path)
    ids, body = rows[0], rows[1:]
    if len(body) != len(ids):
        raise DataParseError(f"Expected {len(ids)} value rows, found {len(body)}.", path)
    values = np.empty((len(ids), len(ids)))
    for k, row in enumerate(body):
        if len(row) != len(ids):
            raise DataParseError(f"Expected {len(ids)} values, found {len(row)}.", path, k + 2)
        try:
            values[k] = [float(v) for v in row]
        except ValueError as e:
            raise DataParseError(f"Non-numeric Gram entry: {e}", path, k + 2) from e
    try:
        return GramMatrix(ids=tuple(ids), values=values, kernel_desc=kernel_desc, degree=degree)
    except InputError as e:
        raise DataParseError(str(e), path) from e
