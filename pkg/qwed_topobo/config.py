"""
Run configuration for BO experiments.

A run is fully described by a :class:`RunConfig`; the CLI echoes the
resolved config next to every output so a run can be repeated from the
echo file alone.

Run-config file (JSON), every key optional:

    {
      "kernel": "pwgk_linear", "degrees": "both", "mkl": "mle",
      "n_init": 10, "n_steps": 100, "noise_sd": 0.0, "repeats": 30, "seed": 0,
      "kernel_config": {"use_rff": false, "rff_features": 2048, "rff_seed": 0,
                        "C": null, "nu": null, "p": 5.0, "tau": null,
                        "pfk_nu": null, "pfk_t": null}
    }
"""

import json
from dataclasses import asdict, dataclass, field, fields, replace
from typing import Any, Dict, Optional, Tuple

from qwed_topobo.errors import ConfigError, DataParseError
from qwed_topobo.kernels.gram import KERNEL_PFK, KERNEL_PWGK_GAUSSIAN, KERNEL_PWGK_LINEAR, KERNELS
from qwed_topobo.kernels.pwgk import DEFAULT_RFF_FEATURES, DEFAULT_WEIGHT_EXPONENT
from qwed_topobo.models import H0, H1

# ── Degree selections ──────────────────────────────────────────────────────────
DEGREES_H0 = "h0"
DEGREES_H1 = "h1"
DEGREES_BOTH = "both"
DEGREE_CHOICES = (DEGREES_H0, DEGREES_H1, DEGREES_BOTH)

# ── MKL schemes ────────────────────────────────────────────────────────────────
MKL_NONE = "none"
"""Single degree, or both degrees with fixed uniform weights."""

MKL_ALIGN = "align"
"""Weights from the centered-alignment QP, relearned every step."""

MKL_MLE = "mle"
"""Weights from log-likelihood gradient ascent, warm-started every step."""

MKL_CHOICES = (MKL_NONE, MKL_ALIGN, MKL_MLE)

DEFAULT_N_INIT = 10
DEFAULT_N_STEPS = 100
DEFAULT_REPEATS = 30

KERNEL_DISPLAY = {
    KERNEL_PWGK_LINEAR: "PWGK-Linear",
    KERNEL_PWGK_GAUSSIAN: "PWGK-Gaussian",
    KERNEL_PFK: "PFK",
}


@dataclass(frozen=True)
class KernelConfig:
    """
    Kernel options beyond the kernel name.

    Hyperparameter fields left as None come from the median heuristics.
    ``pfk_nu`` and ``pfk_t`` together pin PFK to a single candidate instead
    of the 18-entry grid.
    """

    use_rff: bool = False
    rff_features: int = DEFAULT_RFF_FEATURES
    rff_seed: int = 0
    C: Optional[float] = None
    nu: Optional[float] = None
    p: float = DEFAULT_WEIGHT_EXPONENT
    tau: Optional[float] = None
    pfk_nu: Optional[float] = None
    pfk_t: Optional[float] = None

    def __post_init__(self):
        if self.rff_features < 1:
            raise ConfigError(f"rff_features must be ≥ 1, got {self.rff_features}.")
        for name in ("C", "nu", "p", "tau", "pfk_nu", "pfk_t"):
            value = getattr(self, name)
            if value is not None and not value > 0:
                raise ConfigError(f"kernel_config.{name} must be positive, got {value!r}.")
        if (self.pfk_nu is None) != (self.pfk_t is None):
            raise ConfigError("kernel_config.pfk_nu and pfk_t must be given together.")

    @classmethod
    def from_dict(cls, raw: Dict[str, Any]) -> "KernelConfig":
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(raw) - known)
        if unknown:
            raise ConfigError(f"Unknown kernel_config keys: {unknown}.")
        return cls(**raw)


@dataclass(frozen=True)
class RunConfig:
    """
    One benchmark configuration.

    Invariant: ``mkl`` other than "none" requires ``degrees`` = "both".
    """

    kernel: str = KERNEL_PWGK_LINEAR
    degrees: str = DEGREES_H1
    mkl: str = MKL_NONE
    n_init: int = DEFAULT_N_INIT
    n_steps: int = DEFAULT_N_STEPS
    noise_sd: float = 0.0
    repeats: int = DEFAULT_REPEATS
    seed: int = 0
    kernel_config: KernelConfig = field(default_factory=KernelConfig)

    def __post_init__(self):
        self.validate()

    def validate(self) -> "RunConfig":
        if self.kernel not in KERNELS:
            raise ConfigError(f"Unknown kernel {self.kernel!r}; choose one of {KERNELS}.")
        if self.degrees not in DEGREE_CHOICES:
            raise ConfigError(f"Unknown degrees {self.degrees!r}; choose one of {DEGREE_CHOICES}.")
        if self.mkl not in MKL_CHOICES:
            raise ConfigError(f"Unknown mkl {self.mkl!r}; choose one of {MKL_CHOICES}.")
        if self.mkl != MKL_NONE and self.degrees != DEGREES_BOTH:
            raise ConfigError(
                f"mkl={self.mkl!r} combines H0 and H1 and needs degrees='both', "
                f"got degrees={self.degrees!r}."
            )
        if self.n_init < 2:
            raise ConfigError(f"n_init must be ≥ 2 to estimate the noise, got {self.n_init}.")
        if self.n_steps < 0:
            raise ConfigError(f"n_steps must be ≥ 0, got {self.n_steps}.")
        if self.repeats < 1:
            raise ConfigError(f"repeats must be ≥ 1, got {self.repeats}.")
        if not self.noise_sd >= 0:
            raise ConfigError(f"noise_sd must be ≥ 0, got {self.noise_sd!r}.")
        if self.kernel_config.use_rff and self.kernel == KERNEL_PFK:
            raise ConfigError("Random Fourier features apply to PWGK kernels only.")
        return self

    @property
    def homology_degrees(self) -> Tuple[int, ...]:
        return {DEGREES_H0: (H0,), DEGREES_H1: (H1,), DEGREES_BOTH: (H0, H1)}[self.degrees]

    def label(self) -> str:
        """Table row name, e.g. ``PWGK-Linear 1st`` or ``PFK MLE``."""
        if self.mkl == MKL_ALIGN:
            suffix = "align"
        elif self.mkl == MKL_MLE:
            suffix = "MLE"
        else:
            suffix = {DEGREES_H0: "0th", DEGREES_H1: "1st", DEGREES_BOTH: "0th+1st"}[self.degrees]
        return f"{KERNEL_DISPLAY[self.kernel]} {suffix}"

    def slug(self) -> str:
        """File-system safe name, e.g. ``pwgk_linear-both-mle``."""
        parts = [self.kernel, self.degrees]
        if self.mkl != MKL_NONE:
            parts.append(self.mkl)
        return "-".join(parts)

    def with_overrides(self, **changes: Any) -> "RunConfig":
        """Copy with the non-None entries of ``changes`` applied."""
        return replace(self, **{k: v for k, v in changes.items() if v is not None})

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)

    @classmethod
    def from_dict(cls, raw: Dict[str, Any]) -> "RunConfig":
        raw = dict(raw)
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(raw) - known)
        if unknown:
            raise ConfigError(f"Unknown run-config keys: {unknown}.")
        if "kernel_config" in raw:
            raw["kernel_config"] = KernelConfig.from_dict(raw["kernel_config"] or {})
        return cls(**raw)


def table_configs(kernel: str, base: RunConfig) -> Tuple[RunConfig, ...]:
    """The four rows per kernel: 0th, 1st, align and MLE."""
    return (
        replace(base, kernel=kernel, degrees=DEGREES_H0, mkl=MKL_NONE),
        replace(base, kernel=kernel, degrees=DEGREES_H1, mkl=MKL_NONE),
        replace(base, kernel=kernel, degrees=DEGREES_BOTH, mkl=MKL_ALIGN),
        replace(base, kernel=kernel, degrees=DEGREES_BOTH, mkl=MKL_MLE),
    )


def load_run_config(path: str) -> RunConfig:
    """Read a JSON run-config file. Missing keys take their defaults."""
    try:
        with open(path, "r", encoding="utf-8") as f:
            raw = json.load(f)
    except json.JSONDecodeError as e:
        raise DataParseError(f"Invalid run-config JSON: {e.msg}", path, e.lineno) from e
    if not isinstance(raw, dict):
        raise DataParseError("Run-config file must hold a JSON object.", path)
    return RunConfig.from_dict(raw)
