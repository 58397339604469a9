"""
Multiple kernel learning over per-degree Gram matrices.

The combined kernel is K = α₁K₁ + ⋯ + α_kK_k with α ≥ 0, so each channel's
positive semi-definiteness carries over. Two ways to learn α:

  - Alignment: maximize the centered alignment with yyᵀ through the
    nonnegative QP  min_{v≥0} vᵀMv − 2vᵀa,  M_ij = ⟨K_ic, K_jc⟩_F,
    a_i = ⟨K_ic, yyᵀ⟩_F, solved by projected gradient; α = v*/‖v*‖.
  - Likelihood: L-BFGS-B on the GP log-likelihood over θ_i = log(α_i s_i),
    s_i the mean diagonal of K_i, so the fit does not depend on Gram scale.

Key distinction:
  - Centering uses the rows that are passed in. The BO loop passes
    observed-index submatrices only.
  - The alignment path returns unit-norm weights; the likelihood path
    returns weights on the kernel's own scale.
"""

import logging
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
from scipy.linalg import cho_solve
from scipy.optimize import minimize

from qwed_topobo.bayes.gp import factorize
from qwed_topobo.errors import AlignmentUndefinedError, InputError, NumericalError
from qwed_topobo.models import GramMatrix

logger = logging.getLogger(__name__)

QP_TOLERANCE = 1e-10
QP_MAX_ITER = 10_000

MLE_GRAD_TOLERANCE = 1e-6
"""Projected-gradient tolerance of L-BFGS-B, in log-weight units."""

MLE_MAX_ITER = 500

MLE_LOG_BOUND = 30.0
"""Box on log(α_i s_i); keeps every weight positive and finite."""

MLE_FAILED_OBJECTIVE = 1e30
"""Objective reported where the combined matrix cannot be factorized."""

MatrixLike = Union[GramMatrix, np.ndarray]


def _values(K: MatrixLike) -> np.ndarray:
    return K.values if isinstance(K, GramMatrix) else np.asarray(K, dtype=float)


@dataclass(frozen=True, eq=False)
class MklWeights:
    """Nonnegative combination weights with at least one positive entry."""

    alpha: np.ndarray

    def __post_init__(self):
        alpha = np.array(self.alpha, dtype=float).reshape(-1)
        if alpha.size == 0 or not np.all(np.isfinite(alpha)):
            raise InputError("MKL weights must be a non-empty finite vector.")
        if np.any(alpha < 0) or not np.any(alpha > 0):
            raise InputError(f"MKL weights must be ≥ 0 with one positive entry, got {alpha}.")
        alpha.setflags(write=False)
        object.__setattr__(self, "alpha", alpha)

    @classmethod
    def uniform(cls, k: int, unit_norm: bool = False) -> "MklWeights":
        return cls(np.full(k, 1.0 / np.sqrt(k) if unit_norm else 1.0 / k))

    def __len__(self) -> int:
        return int(self.alpha.size)

    def to_dict(self) -> dict:
        return {"alpha": self.alpha.tolist()}


@dataclass
class MklFit:
    """Result of :func:`mle_weights`."""

    weights: MklWeights
    log_likelihood: float
    history: List[float] = field(default_factory=list)
    iterations: int = 0
    message: str = ""

    def to_dict(self) -> dict:
        return {
            "alpha": self.weights.alpha.tolist(),
            "log_likelihood": self.log_likelihood,
            "history": list(self.history),
            "iterations": self.iterations,
            "message": self.message,
        }


def combine(Ks: Sequence[MatrixLike], w: MklWeights) -> MatrixLike:
    """
    Entrywise Σ α_i K_i.

    Returns a GramMatrix when the first input is one (ids taken from it),
    a plain array otherwise.
    """
    if len(Ks) != len(w):
        raise InputError(f"Got {len(Ks)} Gram matrices for {len(w)} weights.")
    mats = [_values(K) for K in Ks]
    shape = mats[0].shape
    if any(M.shape != shape for M in mats):
        raise InputError(f"Gram matrices differ in shape: {[M.shape for M in mats]}.")
    combined = np.zeros(shape)
    for a, M in zip(w.alpha, mats):
        combined += a * M
    first = Ks[0]
    if isinstance(first, GramMatrix):
        for K in Ks[1:]:
            if isinstance(K, GramMatrix) and K.ids != first.ids:
                raise InputError("Gram matrices index different diagram ids.")
        return GramMatrix(
            ids=first.ids,
            values=combined,
            kernel_desc="+".join(f"{a:.4g}*{_desc(K)}" for a, K in zip(w.alpha, Ks)),
            degree=None,
        )
    return combined


def _desc(K: MatrixLike) -> str:
    return K.kernel_desc if isinstance(K, GramMatrix) and K.kernel_desc else "K"


def center_gram(K: MatrixLike) -> np.ndarray:
    """K_ij − row mean − column mean + grand mean."""
    M = _values(K)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise InputError(f"center_gram needs a square matrix, got shape {M.shape}.")
    return M - M.mean(axis=1, keepdims=True) - M.mean(axis=0, keepdims=True) + M.mean()


def _centered_norm(Kc: np.ndarray, K: np.ndarray) -> float:
    norm = float(np.linalg.norm(Kc))
    if norm <= 1e-12 * float(np.abs(K).max(initial=0.0)) or norm == 0.0:
        raise AlignmentUndefinedError(
            "Kernel alignment is undefined: the centered Gram matrix is zero "
            "(the kernel is constant on these rows)."
        )
    return norm


def alignment(K: MatrixLike, K2: MatrixLike) -> float:
    """Centered kernel alignment ⟨K_c, K2_c⟩_F / (‖K_c‖_F ‖K2_c‖_F), in [−1, 1]."""
    A, B = _values(K), _values(K2)
    if A.shape != B.shape:
        raise InputError(f"Cannot align matrices of shape {A.shape} and {B.shape}.")
    Ac, Bc = center_gram(A), center_gram(B)
    value = float((Ac * Bc).sum()) / (_centered_norm(Ac, A) * _centered_norm(Bc, B))
    return float(np.clip(value, -1.0, 1.0))


def alignment_qp_terms(
    Ks: Sequence[MatrixLike], y: Sequence[float]
) -> Tuple[np.ndarray, np.ndarray]:
    """(M, a) of the alignment QP."""
    y = np.asarray(y, dtype=float)
    centered = []
    for K in Ks:
        M = _values(K)
        if M.shape != (len(y), len(y)):
            raise InputError(f"Gram shape {M.shape} does not match {len(y)} labels.")
        Kc = center_gram(M)
        _centered_norm(Kc, M)
        centered.append(Kc)
    k = len(centered)
    M = np.empty((k, k))
    for i in range(k):
        for j in range(i, k):
            M[i, j] = M[j, i] = float((centered[i] * centered[j]).sum())
    a = np.array([float(y @ Kc @ y) for Kc in centered])
    return M, a


def solve_alignment_qp(Ks: Sequence[MatrixLike], y: Sequence[float]) -> MklWeights:
    """
    Unit-norm weights maximizing alignment with yyᵀ over α ≥ 0.

    Projected gradient from v = uniform, step 1/λ_max(M), stops when the
    iterate moves less than 1e-10 or after 10⁴ iterations. If v* = 0 (no
    kernel correlates positively with the labels) uniform weights are
    returned with a warning.
    """
    if len(Ks) == 0:
        raise InputError("solve_alignment_qp needs at least one Gram matrix.")
    M, a = alignment_qp_terms(Ks, y)
    k = len(a)
    if np.all(a <= 0):
        logger.warning(
            "⚠️ No kernel aligns positively with the labels (a = %s); using uniform weights.", a
        )
        return MklWeights.uniform(k, unit_norm=True)

    step = 1.0 / float(np.linalg.eigvalsh(M).max())
    v = np.full(k, 1.0 / k)
    for iteration in range(1, QP_MAX_ITER + 1):
        v_next = np.maximum(v - step * (M @ v - a), 0.0)
        moved = float(np.linalg.norm(v_next - v))
        v = v_next
        if moved < QP_TOLERANCE:
            break
    logger.debug("Alignment QP: %d iterations, v* = %s", iteration, v)

    norm = float(np.linalg.norm(v))
    if norm == 0.0:
        logger.warning("⚠️ Alignment QP converged to v* = 0; using uniform weights.")
        return MklWeights.uniform(k, unit_norm=True)
    return MklWeights(v / norm)


def qp_objective(M: np.ndarray, a: np.ndarray, v: np.ndarray) -> float:
    v = np.asarray(v, dtype=float)
    return float(v @ M @ v - 2.0 * v @ a)


def mkl_log_likelihood_and_grad(
    Ks: Sequence[MatrixLike], y: Sequence[float], noise_var: float, alpha: Sequence[float]
) -> Tuple[float, np.ndarray]:
    """
    GP log-likelihood of y under Σ α_i K_i + σ²I and its gradient in α.

        ∂L/∂α_i = ½ yᵀG⁻¹K_iG⁻¹y − ½ tr(G⁻¹K_i)

    Raises:
        NumericalError: the combined matrix cannot be factorized.
    """
    y = np.asarray(y, dtype=float)
    mats = [_values(K) for K in Ks]
    G = np.zeros_like(mats[0])
    for a, M in zip(alpha, mats):
        G += a * M
    L, _ = factorize(G, float(noise_var))
    solved = cho_solve((L, True), y)
    G_inv = cho_solve((L, True), np.eye(len(y)))
    log_likelihood = float(-np.log(np.diag(L)).sum() - 0.5 * y @ solved)
    grad = np.array([0.5 * solved @ M @ solved - 0.5 * float((G_inv * M).sum()) for M in mats])
    return log_likelihood, grad


def channel_scales(Ks: Sequence[MatrixLike]) -> np.ndarray:
    """Mean diagonal of each Gram (largest |entry| if that is 0, else 1)."""
    scales = []
    for K in Ks:
        M = _values(K)
        scale = float(np.mean(np.diag(M)))
        if not scale > 0:
            scale = float(np.abs(M).max(initial=0.0))
        scales.append(scale if scale > 0 else 1.0)
    return np.array(scales)


def mle_weights(
    Ks: Sequence[MatrixLike],
    y: Sequence[float],
    noise_var: float,
    init: Optional[MklWeights] = None,
    max_iter: int = MLE_MAX_ITER,
    tol: float = MLE_GRAD_TOLERANCE,
) -> MklFit:
    """
    Maximize the GP log-likelihood over α > 0 with L-BFGS-B.

    The search runs over θ_i = log(α_i s_i), s_i the channel scale from
    :func:`channel_scales`, boxed to ±MLE_LOG_BOUND. A Gram scaled by c
    therefore gives the same fit with α_i divided by c. ``tol`` bounds the
    projected θ-gradient.

    Starts from ``init`` (1/k in scale units when omitted). ``history``
    holds the log-likelihood of the start and of every L-BFGS-B iterate; it
    is non-decreasing and the returned weights are its last entry.
    """
    k = len(Ks)
    if k == 0:
        raise InputError("mle_weights needs at least one Gram matrix.")
    scales = channel_scales(Ks)
    if init is None:
        alpha0 = np.full(k, 1.0 / k) / scales
    else:
        alpha0 = np.asarray(init.alpha, dtype=float)
        if len(alpha0) != k:
            raise InputError(f"Warm start has {len(alpha0)} weights for {k} Gram matrices.")
    with np.errstate(divide="ignore"):
        theta0 = np.clip(np.log(alpha0 * scales), -MLE_LOG_BOUND, MLE_LOG_BOUND)

    evaluated: Dict[bytes, Tuple[float, np.ndarray]] = {}

    def evaluate(theta: np.ndarray) -> Tuple[float, np.ndarray]:
        key = np.asarray(theta, dtype=float).tobytes()
        if key not in evaluated:
            alpha = np.exp(theta) / scales
            try:
                ll, grad_alpha = mkl_log_likelihood_and_grad(Ks, y, noise_var, alpha)
                evaluated[key] = (ll, grad_alpha * alpha)
            except NumericalError:
                evaluated[key] = (-np.inf, np.zeros(k))
        return evaluated[key]

    def negative(theta: np.ndarray) -> Tuple[float, np.ndarray]:
        ll, grad = evaluate(theta)
        if not np.isfinite(ll):
            return MLE_FAILED_OBJECTIVE, np.zeros(k)
        return -ll, -grad

    start_ll, _ = evaluate(theta0)
    if not np.isfinite(start_ll):
        raise NumericalError("The MKL start weights give a matrix that cannot be factorized.")
    best_theta, history = theta0, [start_ll]

    def record(theta: np.ndarray) -> None:
        nonlocal best_theta
        ll, _ = evaluate(theta)
        if ll >= history[-1]:
            best_theta = np.array(theta, dtype=float)
            history.append(ll)

    result = minimize(
        negative,
        theta0,
        jac=True,
        method="L-BFGS-B",
        bounds=[(-MLE_LOG_BOUND, MLE_LOG_BOUND)] * k,
        callback=record,
        options={"maxiter": max_iter, "gtol": tol},
    )
    status = "✅" if result.success else "⚠️"
    message = f"{status} L-BFGS-B: {result.message}"
    alpha = np.exp(best_theta) / scales
    logger.debug(
        "MKL likelihood weights %s, log-likelihood %.6g (%s)", alpha, history[-1], message
    )
    return MklFit(
        weights=MklWeights(alpha),
        log_likelihood=history[-1],
        history=history,
        iterations=int(result.nit),
        message=message,
    )
