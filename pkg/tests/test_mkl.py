"""Tests for kernel alignment and likelihood-based multiple kernel learning."""

import logging

import numpy as np
import pytest

from qwed_topobo.bayes.mkl import (
    MklWeights,
    alignment,
    alignment_qp_terms,
    center_gram,
    combine,
    mkl_log_likelihood_and_grad,
    mle_weights,
    qp_objective,
    solve_alignment_qp,
)
from qwed_topobo.errors import AlignmentUndefinedError, InputError
from qwed_topobo.models import GramMatrix


def _psd(rng, n, rank):
    X = rng.standard_normal((n, rank))
    return X @ X.T / rank


def _channels(seed=0, n=15):
    rng = np.random.default_rng(seed)
    Ks = [_psd(rng, n, r) for r in (2, 4, 8)]
    y = Ks[0] @ rng.standard_normal(n) * 0.2 + 0.3 * rng.standard_normal(n)
    return Ks, y


class TestWeights:
    """Test weight validation and combination."""

    def test_negative_rejected(self):
        """Weights must be nonnegative."""
        with pytest.raises(InputError, match="≥ 0"):
            MklWeights([0.5, -0.1])

    def test_all_zero_rejected(self):
        """At least one weight must be positive."""
        with pytest.raises(InputError, match="positive"):
            MklWeights([0.0, 0.0])

    def test_uniform(self):
        """Uniform weights sum to 1, or have unit norm on request."""
        assert np.allclose(MklWeights.uniform(4).alpha, 0.25)
        assert np.linalg.norm(MklWeights.uniform(4, unit_norm=True).alpha) == pytest.approx(1.0)

    def test_combine_arrays(self):
        """combine is the weighted entrywise sum."""
        A, B = np.eye(2), np.ones((2, 2))
        assert np.array_equal(combine([A, B], MklWeights([2.0, 0.5])), 2 * A + 0.5 * B)

    def test_combine_gram_matrices(self):
        """GramMatrix inputs give a GramMatrix with the shared ids."""
        A = GramMatrix(("a", "b"), np.eye(2), "k0", 0)
        B = GramMatrix(("a", "b"), np.ones((2, 2)), "k1", 1)
        out = combine([A, B], MklWeights([1.0, 1.0]))
        assert out.ids == ("a", "b")
        assert out.degree is None
        assert "k0" in out.kernel_desc and "k1" in out.kernel_desc

    def test_combine_rejects_id_mismatch(self):
        """Channels must index the same clouds."""
        A = GramMatrix(("a", "b"), np.eye(2))
        B = GramMatrix(("b", "a"), np.eye(2))
        with pytest.raises(InputError, match="ids"):
            combine([A, B], MklWeights([1.0, 1.0]))

    def test_combine_stays_psd(self):
        """Nonnegative weights on PSD inputs give a PSD matrix."""
        rng = np.random.default_rng(12)
        n = 30
        for _ in range(10):
            combined = combine([_psd(rng, n, 5), _psd(rng, n, 12)], MklWeights([2.0, 3.0]))
            assert np.linalg.eigvalsh(combined).min() >= -1e-8 * n

    def test_combine_count_mismatch(self):
        """One weight per matrix."""
        with pytest.raises(InputError, match="weights"):
            combine([np.eye(2)], MklWeights([1.0, 1.0]))


class TestAlignment:
    """Test centered kernel alignment."""

    def test_self_alignment_is_one(self):
        """alignment(K, K) = 1 within 1e-12."""
        Ks, _ = _channels()
        for K in Ks:
            assert alignment(K, K) == pytest.approx(1.0, abs=1e-12)

    def test_symmetric_and_bounded(self):
        """alignment(A, B) = alignment(B, A) ∈ [−1, 1]."""
        Ks, _ = _channels(1)
        value = alignment(Ks[0], Ks[2])
        assert value == pytest.approx(alignment(Ks[2], Ks[0]))
        assert -1.0 <= value <= 1.0

    def test_centering_removes_means(self):
        """Rows and columns of a centered Gram sum to 0."""
        Kc = center_gram(_channels()[0][1])
        assert np.allclose(Kc.sum(axis=0), 0.0)
        assert np.allclose(Kc.sum(axis=1), 0.0)

    def test_scale_invariant(self):
        """alignment(cK, K') = alignment(K, K') for c > 0."""
        Ks, _ = _channels(13)
        for c in (1e-6, 0.3, 7.0, 1e5):
            assert alignment(c * Ks[0], Ks[1]) == pytest.approx(alignment(Ks[0], Ks[1]), abs=1e-12)

    def test_negation_is_minus_one(self):
        """alignment(K, −K) = −1."""
        Ks, _ = _channels(14)
        for K in Ks:
            assert alignment(K, -K) == pytest.approx(-1.0, abs=1e-12)

    def test_center_gram_known_value(self):
        """Centering 2I of size 2 gives [[1, −1], [−1, 1]]."""
        Kc = center_gram(np.array([[2.0, 0.0], [0.0, 2.0]]))
        assert np.allclose(Kc, [[1.0, -1.0], [-1.0, 1.0]], rtol=0.0, atol=1e-15)

    def test_centering_idempotent(self):
        """Centering a centered Gram changes nothing."""
        for K in _channels(15)[0]:
            Kc = center_gram(K)
            assert np.allclose(center_gram(Kc), Kc, rtol=0.0, atol=1e-12)

    def test_constant_kernel_undefined(self):
        """A constant Gram has no centered part."""
        with pytest.raises(AlignmentUndefinedError, match="undefined"):
            alignment(np.ones((4, 4)), np.eye(4))


class TestAlignmentQp:
    """Test the nonnegative alignment QP."""

    def test_beats_random_vectors(self):
        """No random nonnegative vector scores better than the QP solution."""
        Ks, y = _channels(2)
        M, a = alignment_qp_terms(Ks, y)
        alpha = solve_alignment_qp(Ks, y).alpha
        assert np.linalg.norm(alpha) == pytest.approx(1.0)
        v_star = alpha * (alpha @ a) / (alpha @ M @ alpha)
        best = qp_objective(M, a, v_star)
        rng = np.random.default_rng(3)
        scale = np.abs(v_star).max() * 3
        for _ in range(1000):
            v = rng.uniform(0.0, scale, len(Ks))
            assert best <= qp_objective(M, a, v) + 1e-9 * abs(best)

    def test_alignment_not_below_any_channel(self):
        """The combined kernel aligns at least as well as each single channel."""
        Ks, y = _channels(4)
        combined = combine(Ks, solve_alignment_qp(Ks, y))
        target = np.outer(y, y)
        assert all(alignment(combined, target) >= alignment(K, target) - 1e-6 for K in Ks)

    def test_anti_aligned_labels_fall_back_to_uniform(self, caplog):
        """Every a_i ≤ 0 gives uniform weights with a warning."""
        Ks, y = _channels(5)
        with caplog.at_level(logging.WARNING, logger="qwed_topobo.bayes.mkl"):
            w = solve_alignment_qp([-K for K in Ks], y)
        assert np.allclose(w.alpha, 1.0 / np.sqrt(3))
        assert any("uniform" in r.getMessage() for r in caplog.records)

    def test_single_kernel_gets_unit_weight(self):
        """With one positively aligned kernel, α = (1)."""
        u = np.random.default_rng(16).standard_normal(12)
        w = solve_alignment_qp([np.outer(u, u)], u)
        assert np.allclose(w.alpha, [1.0])

    def test_label_shaped_kernel_dominates(self):
        """K₁ = yyᵀ next to a random kernel takes nearly all the weight."""
        rng = np.random.default_rng(17)
        for _ in range(5):
            y = rng.standard_normal(20)
            w = solve_alignment_qp([np.outer(y, y), _psd(rng, 20, 6)], y)
            assert w.alpha[0] > 0.9

    def test_not_worse_than_uniform(self):
        """The QP weights align with yyᵀ at least as well as uniform weights."""
        for seed in range(10):
            Ks, y = _channels(seed)
            target = np.outer(y, y)
            learned = alignment(combine(Ks, solve_alignment_qp(Ks, y)), target)
            uniform = alignment(combine(Ks, MklWeights.uniform(3, unit_norm=True)), target)
            assert learned >= uniform - 1e-10, f"seed {seed}"

    def test_empty_input(self):
        """At least one Gram matrix is needed."""
        with pytest.raises(InputError, match="at least one"):
            solve_alignment_qp([], [1.0, 2.0])


class TestLikelihoodMkl:
    """Test likelihood maximization over the MKL weights."""

    def test_gradient_matches_finite_differences(self):
        """Analytic ∂L/∂α within 1e-4 relative error."""
        Ks, y = _channels(6)
        alpha = np.array([0.7, 0.4, 1.3])
        _, grad = mkl_log_likelihood_and_grad(Ks, y, 0.1, alpha)
        h = 1e-6
        for i in range(3):
            up, down = alpha.copy(), alpha.copy()
            up[i] += h
            down[i] -= h
            numeric = (
                mkl_log_likelihood_and_grad(Ks, y, 0.1, up)[0]
                - mkl_log_likelihood_and_grad(Ks, y, 0.1, down)[0]
            ) / (2 * h)
            assert grad[i] == pytest.approx(numeric, rel=1e-4, abs=1e-8)

    def test_history_non_decreasing(self):
        """Every accepted step raises the log-likelihood."""
        Ks, y = _channels(7)
        result = mle_weights(Ks, y, 0.1)
        assert np.all(np.diff(result.history) >= 0.0)
        assert result.log_likelihood == result.history[-1]
        assert np.all(result.weights.alpha > 0.0)

    def test_warm_start_never_worse(self):
        """The fit scores at least as well as its warm start."""
        Ks, y = _channels(8)
        init = MklWeights([0.2, 0.2, 0.2])
        start, _ = mkl_log_likelihood_and_grad(Ks, y, 0.1, init.alpha)
        assert mle_weights(Ks, y, 0.1, init=init).log_likelihood >= start - 1e-12

    def test_warm_start_length_checked(self):
        """The warm start needs one weight per channel."""
        Ks, y = _channels(9)
        with pytest.raises(InputError, match="Warm start"):
            mle_weights(Ks, y, 0.1, init=MklWeights([1.0]))

    def test_to_dict(self):
        """Fit summaries are JSON-ready."""
        Ks, y = _channels(10)
        d = mle_weights(Ks, y, 0.1, max_iter=5).to_dict()
        assert set(d) == {"alpha", "log_likelihood", "history", "iterations", "message"}
        assert len(d["alpha"]) == 3

    def test_single_channel_reaches_closed_form(self):
        """With one channel K = I the optimum is α = mean(y²) − σ²."""
        y = np.array([2.0, -2.0, 1.0, -1.0, 2.5, -2.5])
        result = mle_weights([np.eye(6)], y, 0.5)
        assert result.weights.alpha[0] == pytest.approx(np.mean(y**2) - 0.5, rel=1e-3)

    def test_tiny_gram_scale(self):
        """Grams scaled by 10⁻¹² still reach the likelihood of the right weights."""
        rng = np.random.default_rng(18)
        n = 40
        K1 = _psd(rng, n, 5)
        y = np.linalg.cholesky(K1 + 0.01 * np.eye(n)) @ rng.standard_normal(n)
        Ks = [1e-12 * K1, 1e-12 * np.eye(n)]
        reference, _ = mkl_log_likelihood_and_grad(Ks, y, 0.01, [1e12, 1e-3])
        result = mle_weights(Ks, y, 0.01)
        assert result.log_likelihood >= reference - 1e-2
        effective = result.weights.alpha * 1e-12
        assert effective[0] / effective.sum() > 0.9

    def test_recovers_generating_kernel(self):
        """y drawn from a GP on K₁ puts most weight on K₁ (≥ 16 of 20 seeds)."""
        n, noise = 100, 0.1
        hits = 0
        for seed in range(20):
            rng = np.random.default_rng(100 + seed)
            K1, K2 = _psd(rng, n, 20), _psd(rng, n, 20)
            y = np.linalg.cholesky(K1 + noise * np.eye(n)) @ rng.standard_normal(n)
            alpha = mle_weights([K1, K2], y, noise).weights.alpha
            hits += alpha[0] / alpha.sum() > 0.7
        assert hits >= 16

    def test_scaled_gram_rescales_weights(self):
        """Multiplying a channel by c divides its weight by c."""
        Ks, y = _channels(19)
        plain = mle_weights(Ks, y, 0.1)
        scaled = mle_weights([Ks[0] * 1e-6, Ks[1], Ks[2]], y, 0.1)
        assert scaled.log_likelihood == pytest.approx(plain.log_likelihood, abs=1e-4)
