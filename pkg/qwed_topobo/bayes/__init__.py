"""QWED-TopoBO Bayes Module: GP regression, kernel fusion, the BO loop and benchmarks."""

from qwed_topobo.bayes.gp import (
    GPState,
    expected_improvement,
    fit,
    log_marginal_likelihood,
    mle_noise,
    predict,
    predict_many,
)
from qwed_topobo.bayes.mkl import (
    MklFit,
    MklWeights,
    alignment,
    center_gram,
    combine,
    mkl_log_likelihood_and_grad,
    mle_weights,
    solve_alignment_qp,
)
from qwed_topobo.bayes.loop import (
    KernelPool,
    aucc,
    read_trace,
    repeat_seed,
    run_bo,
    run_random,
    write_trace,
)
from qwed_topobo.bayes.benchmark import (
    BenchmarkResult,
    BenchmarkRow,
    BenchmarkTable,
    benchmark,
    benchmark_datasets,
    benchmark_table,
    convergence_curves,
    read_summary_csv,
    write_convergence_csv,
)

__all__ = [
    "GPState",
    "expected_improvement",
    "fit",
    "log_marginal_likelihood",
    "mle_noise",
    "predict",
    "predict_many",
    "MklFit",
    "MklWeights",
    "alignment",
    "center_gram",
    "combine",
    "mkl_log_likelihood_and_grad",
    "mle_weights",
    "solve_alignment_qp",
    "KernelPool",
    "aucc",
    "read_trace",
    "repeat_seed",
    "run_bo",
    "run_random",
    "write_trace",
    "BenchmarkResult",
    "BenchmarkRow",
    "BenchmarkTable",
    "benchmark",
    "benchmark_datasets",
    "benchmark_table",
    "convergence_curves",
    "read_summary_csv",
    "write_convergence_csv",
]
