"""QWED-TopoBO Kernels Module: PWGK, PFK, median heuristics and Gram assembly."""

from qwed_topobo.kernels.pwgk import (
    PwgkParams,
    RffEmbedding,
    pers,
    pwgk_gaussian,
    pwgk_inner,
    pwgk_weight,
    rff_embed,
    rkhs_distance_sq,
)
from qwed_topobo.kernels.pfk import PfkParams, fim_matrix, pfk, pfk_fim
from qwed_topobo.kernels.gram import (
    KERNEL_PFK,
    KERNEL_PWGK_GAUSSIAN,
    KERNEL_PWGK_LINEAR,
    KERNELS,
    KernelSpec,
    gram,
    pfk_grams,
    read_gram_csv,
    write_gram_csv,
)
from qwed_topobo.kernels.heuristics import KernelHeuristics, heuristics

__all__ = [
    "PwgkParams",
    "RffEmbedding",
    "pers",
    "pwgk_gaussian",
    "pwgk_inner",
    "pwgk_weight",
    "rff_embed",
    "rkhs_distance_sq",
    "PfkParams",
    "fim_matrix",
    "pfk",
    "pfk_fim",
    "KERNEL_PFK",
    "KERNEL_PWGK_GAUSSIAN",
    "KERNEL_PWGK_LINEAR",
    "KERNELS",
    "KernelSpec",
    "gram",
    "pfk_grams",
    "read_gram_csv",
    "write_gram_csv",
    "KernelHeuristics",
    "heuristics",
]
