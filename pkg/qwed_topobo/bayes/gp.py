"""
Gaussian-process posterior over pool positions and the expected-improvement
acquisition.

The GP has zero prior mean and works on raw observations. For an observed
index set with Gram block K and noise variance σ²:

    G      = K + σ²I + jitter·I = L Lᵀ
    μ(x)   = k(x)ᵀ G⁻¹ y
    var(x) = k(x, x) − k(x)ᵀ G⁻¹ k(x),  clamped at 0

The log-likelihood used for model selection (noise, MKL weights, PFK grid)
omits the constant term:

    log p(y) = −½ log|G| − ½ yᵀ G⁻¹ y
"""

import logging
from dataclasses import dataclass
from typing import Optional, Sequence, Tuple, Union

import numpy as np
from scipy.linalg import LinAlgError, cho_solve, cholesky, solve_triangular
from scipy.optimize import minimize_scalar
from scipy.stats import norm

from qwed_topobo.errors import InputError, NumericalError

logger = logging.getLogger(__name__)

JITTER_START = 1e-10
"""First non-zero jitter tried when K + σ²I is not numerically positive definite."""

JITTER_MAX = 1e-4
"""Largest jitter tried before fit gives up."""

JITTER_FACTOR = 10.0

NOISE_FLOOR = 1e-6
"""σ² returned by mle_noise when the observations carry no variance."""

NOISE_GRID_POINTS = 25
NOISE_GRID_LOW = 1e-6
"""Lower end of the σ² search grid, relative to var(y)."""

ArrayLike = Union[float, np.ndarray]


@dataclass(frozen=True, eq=False)
class GPState:
    """
    A fitted GP posterior. Immutable after :func:`fit`.

    Fields:
        observed        — pool indices of the observations (may be empty tuple)
        y               — observed values
        noise_var       — σ²
        jitter          — extra diagonal that made the factorization succeed
        chol            — lower Cholesky factor of K + (σ² + jitter) I
        alpha_vec       — G⁻¹ y
        log_likelihood  — −½ log|G| − ½ yᵀ G⁻¹ y
    """

    observed: Tuple[int, ...]
    y: np.ndarray
    noise_var: float
    jitter: float
    chol: np.ndarray
    alpha_vec: np.ndarray
    log_likelihood: float


def factorize(K: np.ndarray, noise_var: float) -> Tuple[np.ndarray, float]:
    n = K.shape[0]
    G = K + noise_var * np.eye(n)
    jitter = 0.0
    while True:
        try:
            return cholesky(G + jitter * np.eye(n), lower=True), jitter
        except LinAlgError:
            jitter = JITTER_START if jitter == 0.0 else jitter * JITTER_FACTOR
            if jitter > JITTER_MAX * (1 + 1e-9):
                break
    min_eig = float(np.linalg.eigvalsh(G).min())
    raise NumericalError(
        f"Cholesky factorization failed with jitter up to {JITTER_MAX:g}: "
        f"K + σ²I has minimum eigenvalue {min_eig:.3e} (σ² = {noise_var:.3e})."
    )


def fit(
    K_obs: np.ndarray,
    y: Sequence[float],
    noise_var: float,
    observed: Optional[Sequence[int]] = None,
) -> GPState:
    """
    Factorize K_obs + σ²I and solve against y.

    Raises:
        InputError: K_obs not square/symmetric, length mismatch, σ² < 0.
        NumericalError: factorization fails at the maximum jitter.
    """
    K = np.asarray(K_obs, dtype=float)
    y = np.asarray(y, dtype=float)
    n = len(y)
    if K.shape != (n, n):
        raise InputError(f"Gram block shape {K.shape} does not match {n} observations.")
    if not np.allclose(K, K.T, rtol=0.0, atol=1e-12 * max(1.0, float(np.abs(K).max(initial=0)))):
        raise InputError("Gram block must be symmetric.")
    if not noise_var >= 0 or not np.isfinite(noise_var):
        raise InputError(f"noise_var must be finite and ≥ 0, got {noise_var!r}.")
    observed = tuple(range(n)) if observed is None else tuple(int(i) for i in observed)
    if len(observed) != n or len(set(observed)) != n:
        raise InputError("Observed indices must be distinct and match y.")

    L, jitter = factorize(K, float(noise_var))
    alpha_vec = cho_solve((L, True), y)
    log_likelihood = float(-np.log(np.diag(L)).sum() - 0.5 * y @ alpha_vec)
    logger.debug(
        "GP fit: n=%d jitter=%.1e log-likelihood=%.6g noise_var=%.6g",
        n, jitter, log_likelihood, noise_var,
    )
    for arr in (y, L, alpha_vec):
        arr.setflags(write=False)
    return GPState(observed, y, float(noise_var), jitter, L, alpha_vec, log_likelihood)


def predict(state: GPState, k_vec: Sequence[float], k_self: float) -> Tuple[float, float]:
    """Posterior mean and variance at one candidate."""
    k_vec = np.asarray(k_vec, dtype=float)
    if k_vec.shape != (len(state.observed),):
        raise InputError(
            f"k_vec has length {k_vec.size}, expected {len(state.observed)} observations."
        )
    mu = float(k_vec @ state.alpha_vec)
    v = solve_triangular(state.chol, k_vec, lower=True)
    return mu, max(float(k_self - v @ v), 0.0)


def predict_many(
    state: GPState, K_cross: np.ndarray, k_self: Sequence[float]
) -> Tuple[np.ndarray, np.ndarray]:
    """
    Posterior means and variances for many candidates at once.

    ``K_cross`` is (n_observed, n_candidates); ``k_self`` the prior variances.
    """
    K_cross = np.asarray(K_cross, dtype=float)
    mu = K_cross.T @ state.alpha_vec
    V = solve_triangular(state.chol, K_cross, lower=True)
    var = np.maximum(np.asarray(k_self, dtype=float) - (V * V).sum(axis=0), 0.0)
    return mu, var


def log_marginal_likelihood(K: np.ndarray, y: Sequence[float], noise_var: float) -> float:
    return fit(K, y, noise_var).log_likelihood


def _safe_log_likelihood(K: np.ndarray, y: np.ndarray, noise_var: float) -> float:
    try:
        return log_marginal_likelihood(K, y, noise_var)
    except NumericalError:
        return -np.inf


def mle_noise(K: np.ndarray, y: Sequence[float]) -> float:
    """
    σ² maximizing the log-likelihood on [10⁻⁶·var(y), var(y)].

    A 25-point log grid locates the best cell; golden-section search in
    log σ² refines it (bounded search when the best grid point is an end
    point). The result never scores below the best grid point.
    """
    K = np.asarray(K, dtype=float)
    y = np.asarray(y, dtype=float)
    if len(y) < 2:
        raise InputError(f"mle_noise needs at least 2 observations, got {len(y)}.")
    var = float(np.var(y))
    if var == 0.0:
        return NOISE_FLOOR

    grid = np.geomspace(NOISE_GRID_LOW * var, var, NOISE_GRID_POINTS)
    scores = np.array([_safe_log_likelihood(K, y, s) for s in grid])
    best = int(np.argmax(scores))
    log_grid = np.log(grid)

    def objective(log_s: float) -> float:
        return -_safe_log_likelihood(K, y, float(np.exp(log_s)))

    candidate = None
    if 0 < best < len(grid) - 1:
        try:
            result = minimize_scalar(
                objective,
                bracket=(log_grid[best - 1], log_grid[best], log_grid[best + 1]),
                method="golden",
            )
            candidate = float(result.x)
        except ValueError:
            candidate = None
    else:
        lo, hi = (0, 1) if best == 0 else (best - 1, best)
        result = minimize_scalar(
            objective, bounds=(log_grid[lo], log_grid[hi]), method="bounded"
        )
        candidate = float(result.x)

    noise_var = float(grid[best])
    if candidate is not None:
        refined = float(np.clip(np.exp(candidate), grid[0], grid[-1]))
        if _safe_log_likelihood(K, y, refined) >= scores[best]:
            noise_var = refined
    logger.debug("mle_noise: var(y)=%.6g noise_var=%.6g", var, noise_var)
    return noise_var


def expected_improvement(mu: ArrayLike, sd: ArrayLike, y_best: float) -> ArrayLike:
    """
    EI for minimization: sd · (Z Φ(Z) + φ(Z)), Z = (y_best − mu) / sd.

    0 wherever sd = 0; clamped at 0 against roundoff. Accepts scalars or
    arrays and returns the same shape.
    """
    mu_arr, sd_arr = np.broadcast_arrays(np.asarray(mu, dtype=float), np.asarray(sd, dtype=float))
    if np.any(sd_arr < 0):
        raise InputError("Predictive standard deviation must be ≥ 0.")
    out = np.zeros(mu_arr.shape)
    positive = sd_arr > 0
    z = (y_best - mu_arr[positive]) / sd_arr[positive]
    out[positive] = sd_arr[positive] * (z * norm.cdf(z) + norm.pdf(z))
    out = np.maximum(out, 0.0)
    return float(out) if out.ndim == 0 else out
