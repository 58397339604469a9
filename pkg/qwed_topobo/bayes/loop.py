"""
Pool-based Bayesian optimization over precomputed Gram matrices.

Each run:
  1. draws n_init distinct pool indices with the run seed and observes
     y = label + noise_sd · ε (one ε per pool index, drawn up front);
  2. per step, re-estimates σ² (and the MKL weights), fits the GP on the
     observed block, scores every unobserved index by expected improvement
     and observes the argmax (smallest index on ties);
  3. records the AUCC against the pool minimum.

The random baseline consumes the same seed in the same order for the
initialization and the noise, so both methods start from identical draws.

Trace files:
    <out>/<slug>/seed-<i>.csv    step,chosen_id,observed_y,best_so_far
    <out>/<slug>/seed-<i>.json   full trace, config and per-step diagnostics
"""

import csv
import json
import logging
import os
from dataclasses import dataclass
from typing import Any, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np

from qwed_topobo.bayes.gp import (
    expected_improvement,
    fit,
    log_marginal_likelihood,
    mle_noise,
    predict_many,
)
from qwed_topobo.bayes.mkl import MklWeights, combine, mle_weights, solve_alignment_qp
from qwed_topobo.config import MKL_ALIGN, MKL_MLE, RunConfig
from qwed_topobo.datasets.io import Pool
from qwed_topobo.errors import AlignmentUndefinedError, DataParseError, InputError, NumericalError
from qwed_topobo.kernels.gram import (
    KERNEL_PFK,
    KERNEL_PWGK_GAUSSIAN,
    KernelSpec,
    gram,
    pfk_grams,
)
from qwed_topobo.kernels.heuristics import heuristics
from qwed_topobo.kernels.pfk import PfkParams
from qwed_topobo.kernels.pwgk import PwgkParams, RffEmbedding
from qwed_topobo.models import BOStep, BOTrace, GramMatrix, PersistenceDiagram, _json_safe

logger = logging.getLogger(__name__)

RANDOM_DESC = "random"
"""kernel_desc of random-search traces."""

MKL_ALTERNATIONS = 2
"""Rounds of (σ² given α, α given σ²) per step."""


def repeat_seed(master_seed: int, repeat: int) -> int:
    """Seed of repeat ``repeat``: SeedSequence([master, repeat]) folded to 63 bits."""
    state = np.random.SeedSequence([master_seed, repeat]).generate_state(2, np.uint32)
    return int((int(state[0]) << 31) ^ int(state[1]))


@dataclass(frozen=True)
class KernelPool:
    """
    Labels plus, per homology degree, the candidate Gram matrices of the pool.

    A channel has one candidate for PWGK and the PFK grid for PFK; the
    candidate is chosen by likelihood at every step.
    """

    ids: Tuple[str, ...]
    labels: np.ndarray
    channels: Tuple[Tuple[GramMatrix, ...], ...]
    degrees: Tuple[int, ...] = ()

    def __post_init__(self):
        ids = tuple(self.ids)
        labels = np.array(self.labels, dtype=float)
        if labels.shape != (len(ids),):
            raise InputError(f"Got {labels.size} labels for {len(ids)} ids.")
        channels = tuple(tuple(candidates) for candidates in self.channels)
        for candidates in channels:
            if not candidates:
                raise InputError("Every kernel channel needs at least one Gram matrix.")
            for G in candidates:
                if G.ids != ids:
                    raise InputError(f"Gram matrix {G.kernel_desc!r} indexes different ids.")
        labels.setflags(write=False)
        object.__setattr__(self, "ids", ids)
        object.__setattr__(self, "labels", labels)
        object.__setattr__(self, "channels", channels)

    @property
    def size(self) -> int:
        return len(self.ids)

    @property
    def target(self) -> float:
        return float(self.labels.min())

    @classmethod
    def from_pool(
        cls,
        pool: Pool,
        channels: Sequence[Sequence[GramMatrix]],
        degrees: Sequence[int] = (),
    ) -> "KernelPool":
        return cls(tuple(pool.ids()), pool.labels(), channels, tuple(degrees))

    @classmethod
    def build(
        cls,
        pool: Pool,
        diagrams: Dict[int, Sequence[PersistenceDiagram]],
        cfg: RunConfig,
        threads: int = 1,
    ) -> "KernelPool":
        """
        Gram candidates for ``cfg.kernel`` on each of ``cfg``'s degrees.

        PWGK channels hold one Gram. A PFK channel holds the whole (ν, t)
        grid unless ``pfk_nu`` is pinned; the loop then picks one candidate
        per channel by GP likelihood at every refit, MKL runs included, so
        the H0 and H1 choices move independently and step by step. Pinning
        ``pfk_nu``/``pfk_t`` in the run config holds both channels at that
        single (ν, t) instead.
        """
        ids = pool.ids()
        kc = cfg.kernel_config
        channels = []
        for degree in cfg.homology_degrees:
            if degree not in diagrams:
                raise InputError(f"No degree-{degree} diagrams available for {cfg.label()}.")
            dgms = diagrams[degree]
            need_grid = cfg.kernel == KERNEL_PFK and kc.pfk_nu is None
            found = heuristics(dgms, p=kc.p, threads=threads, with_pfk=need_grid)
            if cfg.kernel == KERNEL_PFK:
                grid = found.pfk_grid if need_grid else (PfkParams(kc.pfk_nu, kc.pfk_t),)
                channels.append(tuple(pfk_grams(dgms, grid, ids=ids, threads=threads)))
                continue
            params = PwgkParams(
                C=kc.C if kc.C is not None else found.pwgk.C,
                nu=kc.nu if kc.nu is not None else found.pwgk.nu,
                p=kc.p,
                tau=kc.tau if kc.tau is not None else found.pwgk.tau,
            )
            rff = (
                RffEmbedding.create(params.nu, kc.rff_features, kc.rff_seed)
                if kc.use_rff
                else None
            )
            spec = KernelSpec(
                kind=cfg.kernel,
                pwgk=params if cfg.kernel == KERNEL_PWGK_GAUSSIAN else params.with_tau(None),
                rff=rff,
            )
            channels.append((gram(dgms, spec, ids=ids, threads=threads),))
        return cls(tuple(ids), pool.labels(), tuple(channels), cfg.homology_degrees)


def aucc(trace: BOTrace, target: float) -> float:
    """
    Area between the convergence curve and ``target``.

    Unit-width rectangles over the post-initialization best (step 0) and
    every acquisition step.
    """
    return float(np.sum(trace.best_curve() - target))


def _observe(
    index: int, step: int, ids: Sequence[str], y: np.ndarray, best: Optional[float]
) -> BOStep:
    value = float(y[index])
    best = value if best is None else min(best, value)
    return BOStep(step=step, index=index, chosen_id=ids[index], observed_y=value, best_so_far=best)


def _initialize(
    n: int, cfg: RunConfig, seed: int, initial: Optional[Sequence[int]], labels: np.ndarray
) -> Tuple[np.random.Generator, np.ndarray, np.ndarray]:
    if n <= cfg.n_init:
        raise InputError(f"Pool of {n} clouds must be larger than n_init={cfg.n_init}.")
    rng = np.random.default_rng(seed)
    drawn = rng.choice(n, size=cfg.n_init, replace=False)
    noise = rng.standard_normal(n)
    if initial is not None:
        drawn = np.asarray(initial, dtype=int)
        if len(drawn) != cfg.n_init or len(set(drawn.tolist())) != cfg.n_init:
            raise InputError(f"initial must hold {cfg.n_init} distinct indices.")
    return rng, drawn, labels + cfg.noise_sd * noise


def _select_candidate(
    candidates: Sequence[GramMatrix], obs: np.ndarray, y: np.ndarray
) -> Tuple[int, float]:
    """Index of the candidate with the highest log-likelihood at its MLE σ², and that σ²."""
    if len(candidates) == 1:
        K = candidates[0].submatrix(obs)
        return 0, mle_noise(K, y)
    best, best_ll, best_noise = 0, -np.inf, None
    for c, G in enumerate(candidates):
        K = G.submatrix(obs)
        try:
            noise_var = mle_noise(K, y)
            ll = log_marginal_likelihood(K, y, noise_var)
        except NumericalError:
            continue
        if ll > best_ll:
            best, best_ll, best_noise = c, ll, noise_var
    if best_noise is None:
        raise NumericalError("No kernel candidate admits a Cholesky factorization.")
    return best, best_noise


class _Model:
    """Per-run kernel state: chosen candidates, MKL weights, σ²."""

    def __init__(self, kpool: KernelPool, cfg: RunConfig):
        self.kpool = kpool
        self.cfg = cfg
        k = len(kpool.channels)
        self.weights = MklWeights.uniform(k) if k > 1 else None
        self.mle_start: Optional[MklWeights] = None

    def refit(self, obs: np.ndarray, y: np.ndarray) -> Tuple[np.ndarray, float, Dict[str, Any]]:
        """Full-pool combined kernel values and σ² for the current observations."""
        chosen = []
        noise_var = 0.0
        for candidates in self.kpool.channels:
            c, noise_var = _select_candidate(candidates, obs, y)
            chosen.append(candidates[c])
        diag: Dict[str, Any] = {"kernels": [G.kernel_desc for G in chosen]}
        if len(chosen) == 1:
            diag["noise_var"] = noise_var
            return chosen[0].values, noise_var, diag

        blocks = [G.submatrix(obs) for G in chosen]
        if self.cfg.mkl == MKL_ALIGN:
            try:
                self.weights = solve_alignment_qp(blocks, y)
            except AlignmentUndefinedError as e:
                logger.warning("⚠️ %s Using uniform weights for this step.", e)
                self.weights = MklWeights.uniform(len(blocks), unit_norm=True)
            noise_var = mle_noise(combine(blocks, self.weights), y)
        elif self.cfg.mkl == MKL_MLE:
            for _ in range(MKL_ALTERNATIONS):
                noise_var = mle_noise(combine(blocks, self.weights), y)
                result = mle_weights(blocks, y, noise_var, init=self.mle_start)
                self.weights = self.mle_start = result.weights
            diag["mkl_log_likelihood"] = result.log_likelihood
        else:
            noise_var = mle_noise(combine(blocks, self.weights), y)
        diag["noise_var"] = noise_var
        diag["alpha"] = self.weights.alpha.tolist()
        return combine([G.values for G in chosen], self.weights), noise_var, diag


def run_bo(
    kpool: KernelPool,
    cfg: RunConfig,
    seed: int = 0,
    initial: Optional[Sequence[int]] = None,
) -> BOTrace:
    """
    One seeded BO run over ``kpool``.

    ``initial`` overrides the seeded initialization indices (the seed still
    drives the noise). If the pool runs out before ``n_steps`` the trace is
    truncated and flagged.
    """
    n = kpool.size
    _, drawn, y_all = _initialize(n, cfg, seed, initial, kpool.labels)
    model = _Model(kpool, cfg)

    observed_mask = np.zeros(n, dtype=bool)
    initial_steps: List[BOStep] = []
    best = None
    for index in drawn.tolist():
        record = _observe(index, 0, kpool.ids, y_all, best)
        best = record.best_so_far
        observed_mask[index] = True
        initial_steps.append(record)
    order = list(drawn.tolist())

    steps: List[BOStep] = []
    diagnostics: List[Dict[str, Any]] = []
    truncated = False
    last_desc = ""
    for step in range(1, cfg.n_steps + 1):
        if observed_mask.all():
            truncated = True
            logger.info(
                "Pool exhausted after %d of %d steps; trace truncated.", step - 1, cfg.n_steps
            )
            break
        obs = np.array(order)
        y_obs = y_all[obs]
        K, noise_var, diag = model.refit(obs, y_obs)
        state = fit(K[np.ix_(obs, obs)], y_obs, noise_var, observed=obs)
        candidates = np.flatnonzero(~observed_mask)
        mu, var = predict_many(state, K[np.ix_(obs, candidates)], np.diag(K)[candidates])
        ei = expected_improvement(mu, np.sqrt(var), best)
        pick = int(candidates[int(np.argmax(ei))])

        record = _observe(pick, step, kpool.ids, y_all, best)
        best = record.best_so_far
        observed_mask[pick] = True
        order.append(pick)
        steps.append(record)
        diag.update(
            {"step": step, "max_ei": float(ei.max()), "log_likelihood": state.log_likelihood}
        )
        diagnostics.append(diag)
        last_desc = "+".join(diag["kernels"])
        logger.debug(
            "Step %d: chose %s (index %d), EI %.4g, best %.6g",
            step, record.chosen_id, pick, float(ei.max()), best,
        )

    trace = BOTrace(
        seed=int(seed),
        kernel_desc=last_desc or cfg.kernel,
        initial=initial_steps,
        steps=steps,
        diagnostics=diagnostics,
        target=kpool.target,
        truncated=truncated,
    )
    trace.aucc = aucc(trace, kpool.target)
    return trace


def _ids_and_labels(pool: Union[Pool, KernelPool]) -> Tuple[Tuple[str, ...], np.ndarray]:
    if isinstance(pool, KernelPool):
        return pool.ids, pool.labels
    return tuple(pool.ids()), pool.labels()


def run_random(
    pool: Union[Pool, KernelPool],
    cfg: RunConfig,
    seed: int = 0,
    initial: Optional[Sequence[int]] = None,
) -> BOTrace:
    """Random search: same initialization as :func:`run_bo`, then uniform draws."""
    ids, labels = _ids_and_labels(pool)
    n = len(ids)
    rng, drawn, y_all = _initialize(n, cfg, seed, initial, labels)

    observed_mask = np.zeros(n, dtype=bool)
    initial_steps: List[BOStep] = []
    best = None
    for index in drawn.tolist():
        record = _observe(index, 0, ids, y_all, best)
        best = record.best_so_far
        observed_mask[index] = True
        initial_steps.append(record)

    steps: List[BOStep] = []
    truncated = False
    for step in range(1, cfg.n_steps + 1):
        candidates = np.flatnonzero(~observed_mask)
        if candidates.size == 0:
            truncated = True
            logger.info(
                "Pool exhausted after %d of %d steps; trace truncated.", step - 1, cfg.n_steps
            )
            break
        pick = int(rng.choice(candidates))
        record = _observe(pick, step, ids, y_all, best)
        best = record.best_so_far
        observed_mask[pick] = True
        steps.append(record)

    target = float(labels.min())
    trace = BOTrace(
        seed=int(seed),
        kernel_desc=RANDOM_DESC,
        initial=initial_steps,
        steps=steps,
        target=target,
        truncated=truncated,
    )
    trace.aucc = aucc(trace, target)
    return trace


# ── Trace files ────────────────────────────────────────────────────────────────
TRACE_COLUMNS = ("step", "chosen_id", "observed_y", "best_so_far")


def trace_paths(out_dir: str, slug: str, repeat: int) -> Tuple[str, str]:
    base = os.path.join(out_dir, slug, f"seed-{repeat}")
    return base + ".csv", base + ".json"


def write_trace(
    trace: BOTrace,
    out_dir: str,
    slug: str,
    repeat: int,
    config: Optional[Dict[str, Any]] = None,
) -> Tuple[str, str]:
    """Write the CSV trace and its JSON sidecar; returns both paths."""
    csv_path, json_path = trace_paths(out_dir, slug, repeat)
    os.makedirs(os.path.dirname(csv_path), exist_ok=True)
    with open(csv_path, "w", newline="", encoding="utf-8") as f:
        writer = csv.writer(f)
        writer.writerow(TRACE_COLUMNS)
        for record in trace.initial + trace.steps:
            writer.writerow(
                [record.step, record.chosen_id, repr(record.observed_y), repr(record.best_so_far)]
            )
    sidecar = {"repeat": repeat, "config": config or {}, "trace": trace.to_dict()}
    with open(json_path, "w", encoding="utf-8") as f:
        json.dump(_json_safe(sidecar), f, indent=2, sort_keys=True)
        f.write("\n")
    return csv_path, json_path


def read_trace(json_path: str) -> BOTrace:
    """Load a trace back from its JSON sidecar."""
    try:
        with open(json_path, "r", encoding="utf-8") as f:
            raw = json.load(f)
        return BOTrace.from_dict(raw["trace"])
    except json.JSONDecodeError as e:
        raise DataParseError(f"Invalid trace sidecar: {e.msg}", json_path, e.lineno) from e
    except (KeyError, TypeError, ValueError) as e:
        raise DataParseError(f"Invalid trace sidecar: {e}", json_path) from e
