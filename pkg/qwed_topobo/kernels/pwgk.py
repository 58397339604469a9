"""
Persistence weighted Gaussian kernel (PWGK).

A diagram D is embedded as the weighted measure Σ_{x∈D} w(x) δ_x, mapped into
the RKHS of the Gaussian component kernel

    k_G(x, y) = exp(−‖x − y‖² / (2ν²)),

with the persistence weight w(x) = arctan(C · pers(x)^p).

  - PWGK-Linear:   k_L(Di, Dj) = Σ_x Σ_y w(x) w(y) k_G(x, y)
  - PWGK-Gaussian: exp(−‖E(μ_Di) − E(μ_Dj)‖²_H / (2τ²)), the squared RKHS
                   distance expanded as k_L(Di,Di) + k_L(Dj,Dj) − 2 k_L(Di,Dj)

Random Fourier features approximate E(μ_D) by a finite vector whose inner
products approximate k_L. They are opt-in; the exact double sum is the
default path.

Every pairwise function evaluates its arguments in a canonical order, so
k(Di, Dj) and k(Dj, Di) are bit-identical.
"""

from dataclasses import dataclass
from typing import Optional, Sequence, Tuple

import numpy as np
from scipy.spatial.distance import cdist

from qwed_topobo.errors import InputError
from qwed_topobo.models import PersistenceDiagram

DEFAULT_WEIGHT_EXPONENT = 5.0
"""Exponent p of the arctan weight."""

DEFAULT_RFF_FEATURES = 2048


def _check_positive(name: str, value: Optional[float]) -> None:
    if value is None:
        return
    if not np.isfinite(value) or not value > 0:
        raise InputError(f"{name} must be a positive finite number, got {value!r}.")


@dataclass(frozen=True)
class PwgkParams:
    """
    PWGK hyperparameters.

    Fields:
        C    — weight scale
        p    — weight exponent
        nu   — bandwidth of the component Gaussian
        tau  — outer bandwidth, PWGK-Gaussian only
    """

    C: float
    nu: float
    p: float = DEFAULT_WEIGHT_EXPONENT
    tau: Optional[float] = None

    def __post_init__(self):
        for name in ("C", "nu", "p", "tau"):
            value = getattr(self, name)
            if value is not None:
                object.__setattr__(self, name, float(value))
            _check_positive(name, getattr(self, name))

    def with_tau(self, tau: float) -> "PwgkParams":
        return PwgkParams(C=self.C, nu=self.nu, p=self.p, tau=tau)

    def to_dict(self) -> dict:
        return {"C": self.C, "nu": self.nu, "p": self.p, "tau": self.tau}


def canonical_pair(
    Di: PersistenceDiagram, Dj: PersistenceDiagram
) -> Tuple[PersistenceDiagram, PersistenceDiagram]:
    """Order a diagram pair by (size, raw bytes) so pairwise evaluation is symmetric."""
    key_i = (len(Di), Di.points.tobytes())
    key_j = (len(Dj), Dj.points.tobytes())
    return (Dj, Di) if key_j < key_i else (Di, Dj)


def pers(x: Sequence[float]) -> float:
    """Persistence death − birth of one diagram point."""
    return float(x[1] - x[0])


def pwgk_weight(x: Sequence[float], params: PwgkParams) -> float:
    """arctan(C · pers(x)^p), in (0, π/2) for every valid point."""
    return float(np.arctan(params.C * pers(x) ** params.p))


def pwgk_weights(diagram: PersistenceDiagram, params: PwgkParams) -> np.ndarray:
    """Vector of weights, one per diagram point."""
    return np.arctan(params.C * diagram.persistence() ** params.p)


def _component_kernel(X: np.ndarray, Y: np.ndarray, nu: float) -> np.ndarray:
    return np.exp(-cdist(X, Y, "sqeuclidean") / (2.0 * nu * nu))


def pwgk_inner(Di: PersistenceDiagram, Dj: PersistenceDiagram, params: PwgkParams) -> float:
    """PWGK-Linear value; 0 when either diagram is empty."""
    if Di.degree != Dj.degree:
        raise InputError(f"Cannot compare a degree-{Di.degree} and a degree-{Dj.degree} diagram.")
    if len(Di) == 0 or len(Dj) == 0:
        return 0.0
    Di, Dj = canonical_pair(Di, Dj)
    wi = pwgk_weights(Di, params)
    wj = pwgk_weights(Dj, params)
    return float(wi @ _component_kernel(Di.points, Dj.points, params.nu) @ wj)


def rkhs_distance_sq(Di: PersistenceDiagram, Dj: PersistenceDiagram, params: PwgkParams) -> float:
    """‖E(μ_Di) − E(μ_Dj)‖²_H by the three-double-sum expansion, clamped at 0."""
    Di, Dj = canonical_pair(Di, Dj)
    self_i = pwgk_inner(Di, Di, params)
    self_j = pwgk_inner(Dj, Dj, params)
    value = self_i + self_j - 2.0 * pwgk_inner(Di, Dj, params)
    return max(value, 0.0)


def pwgk_gaussian(Di: PersistenceDiagram, Dj: PersistenceDiagram, params: PwgkParams) -> float:
    """PWGK-Gaussian value in (0, 1]; exactly 1 on identical diagrams."""
    if params.tau is None:
        raise InputError("PWGK-Gaussian requires tau; set it or use the median heuristic.")
    return float(np.exp(-rkhs_distance_sq(Di, Dj, params) / (2.0 * params.tau**2)))


@dataclass(frozen=True, eq=False)
class RffEmbedding:
    """
    Random Fourier features for the component Gaussian of bandwidth ``nu``.

    Frequencies are i.i.d. N(0, ν⁻² I₂); phases uniform on [0, 2π). Build with
    :meth:`create` so the draw is a function of (num_features, nu, seed) only.
    """

    num_features: int
    seed: int
    nu: float
    frequencies: np.ndarray
    phases: np.ndarray

    @classmethod
    def create(cls, nu: float, num_features: int = DEFAULT_RFF_FEATURES, seed: int = 0):
        _check_positive("nu", nu)
        if num_features < 1:
            raise InputError(f"num_features must be ≥ 1, got {num_features}.")
        rng = np.random.default_rng(seed)
        frequencies = rng.normal(0.0, 1.0 / nu, size=(num_features, 2))
        phases = rng.uniform(0.0, 2.0 * np.pi, size=num_features)
        frequencies.setflags(write=False)
        phases.setflags(write=False)
        return cls(num_features, seed, float(nu), frequencies, phases)


def rff_embed(diagram: PersistenceDiagram, params: PwgkParams, emb: RffEmbedding) -> np.ndarray:
    """
    Finite-dimensional approximation of E(μ_D).

    feature m = √(2/M) · Σ_x w(x) cos(⟨freq_m, x⟩ + phase_m)
    """
    if emb.nu != params.nu:
        raise InputError(
            f"RFF embedding was drawn for nu={emb.nu}, but the kernel uses nu={params.nu}."
        )
    if len(diagram) == 0:
        return np.zeros(emb.num_features)
    weights = pwgk_weights(diagram, params)
    features = np.cos(diagram.points @ emb.frequencies.T + emb.phases)
    return np.sqrt(2.0 / emb.num_features) * (weights @ features)
