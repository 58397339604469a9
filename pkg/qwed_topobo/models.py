"""
QWED-TopoBO shared domain models.

These are the records that flow between the topology, kernel and Bayesian
optimization layers:

  - PointCloud          — a labelled finite point set (one pool entry).
  - FilteredEdge        — an edge of the Vietoris–Rips filtration.
  - PersistenceDiagram  — finite (birth, death) pairs of one homology degree.
  - GramMatrix          — kernel values over an indexed diagram set.
  - BOStep / BOTrace    — the auditable record of one optimization run.

Key distinction:
  - All array-backed records are immutable after construction: their arrays
    are copied and flagged read-only, so they are safe to share between
    threads and processes.
  - Validation happens at construction time. An object that exists satisfies
    its invariants; downstream code never re-checks them.
"""

from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np

from qwed_topobo.errors import InputError

# ── Homology degree constants ──────────────────────────────────────────────────
H0 = 0
"""Connected components."""

H1 = 1
"""Loops (1-cycles)."""

SUPPORTED_DEGREES = (H0, H1)


@dataclass(frozen=True, eq=False)
class PointCloud:
    """
    A finite set of d-dimensional points with an optional objective label.

    Fields:
        id      — unique identifier inside a pool
        points  — (N, d) float array, N ≥ 1, all coordinates finite
        label   — objective value f(cloud), None when unlabelled
    """

    id: str
    points: np.ndarray
    label: Optional[float] = None

    def __post_init__(self):
        pts = np.array(self.points, dtype=float)
        if pts.ndim == 1 and pts.size > 0:
            pts = pts.reshape(-1, 1)
        if pts.ndim != 2 or pts.shape[0] < 1 or pts.shape[1] < 1:
            raise InputError(
                f"PointCloud {self.id!r} needs at least one point of dimension ≥ 1; "
                f"got array of shape {pts.shape}."
            )
        if not np.all(np.isfinite(pts)):
            raise InputError(f"PointCloud {self.id!r} contains non-finite coordinates.")
        pts.setflags(write=False)
        object.__setattr__(self, "points", pts)
        if self.label is not None:
            label = float(self.label)
            if not np.isfinite(label):
                raise InputError(f"PointCloud {self.id!r} has a non-finite label {label!r}.")
            object.__setattr__(self, "label", label)

    @property
    def size(self) -> int:
        return int(self.points.shape[0])

    @property
    def dim(self) -> int:
        return int(self.points.shape[1])

    def to_dict(self) -> Dict[str, Any]:
        return {"id": self.id, "points": self.points.tolist(), "y": self.label}


@dataclass(frozen=True, order=True)
class FilteredEdge:
    """
    An edge entering the Rips filtration at radius ``value`` (distance / 2).

    Ordering is (value, i, j), the filtration order used everywhere.
    """

    value: float
    i: int
    j: int

    def __post_init__(self):
        if not self.i < self.j:
            raise InputError(f"FilteredEdge requires i < j, got ({self.i}, {self.j}).")
        if not np.isfinite(self.value) or self.value < 0:
            raise InputError(f"FilteredEdge value must be finite and ≥ 0, got {self.value}.")


@dataclass(frozen=True, eq=False)
class PersistenceDiagram:
    """
    Multiset of finite (birth, death) pairs for one homology degree.

    Invariant: 0 ≤ birth < death < ∞ for every point. Essential classes and
    zero-persistence pairs never enter a diagram.
    """

    degree: int
    points: np.ndarray = field(default_factory=lambda: np.empty((0, 2)))

    def __post_init__(self):
        if self.degree not in SUPPORTED_DEGREES:
            raise InputError(
                f"Homology degree {self.degree} is not supported; use one of {SUPPORTED_DEGREES}."
            )
        pts = np.array(self.points, dtype=float)
        if pts.size == 0:
            pts = np.empty((0, 2))
        if pts.ndim != 2 or pts.shape[1] != 2:
            raise InputError(f"Diagram points must have shape (k, 2), got {pts.shape}.")
        if not np.all(np.isfinite(pts)):
            raise InputError("Diagram points must be finite; essential classes are excluded.")
        if np.any(pts[:, 0] < 0) or np.any(pts[:, 1] <= pts[:, 0]):
            raise InputError("Diagram points must satisfy 0 ≤ birth < death.")
        pts.setflags(write=False)
        object.__setattr__(self, "points", pts)

    def __len__(self) -> int:
        return int(self.points.shape[0])

    @property
    def births(self) -> np.ndarray:
        return self.points[:, 0]

    @property
    def deaths(self) -> np.ndarray:
        return self.points[:, 1]

    def persistence(self) -> np.ndarray:
        """Vector of death − birth per point."""
        return self.points[:, 1] - self.points[:, 0]

    def total_persistence(self) -> float:
        return float(self.persistence().sum())

    def sorted_pairs(self) -> List[Tuple[float, float]]:
        """Pairs in lexicographic order; the canonical form for comparisons."""
        return sorted((float(b), float(d)) for b, d in self.points)

    def to_dict(self) -> Dict[str, Any]:
        return {"degree": self.degree, "points": self.points.tolist()}


@dataclass(frozen=True, eq=False)
class GramMatrix:
    """
    Symmetric matrix of kernel values over an indexed diagram set.

    Contract: PSD up to jitter. Construction checks shape and symmetry only;
    the eigenvalue bound is a property of the kernel, tested separately.
    """

    ids: Tuple[str, ...]
    values: np.ndarray
    kernel_desc: str = ""
    degree: Optional[int] = None

    def __post_init__(self):
        vals = np.array(self.values, dtype=float)
        n = len(self.ids)
        if vals.shape != (n, n):
            raise InputError(f"Gram matrix shape {vals.shape} does not match {n} ids.")
        if not np.array_equal(vals, vals.T):
            raise InputError("Gram matrix must be exactly symmetric.")
        vals.setflags(write=False)
        object.__setattr__(self, "ids", tuple(self.ids))
        object.__setattr__(self, "values", vals)

    @property
    def n(self) -> int:
        return len(self.ids)

    def submatrix(self, rows: Sequence[int], cols: Optional[Sequence[int]] = None) -> np.ndarray:
        cols = rows if cols is None else cols
        return self.values[np.ix_(np.asarray(rows, dtype=int), np.asarray(cols, dtype=int))]


@dataclass(frozen=True)
class BOStep:
    """
    One observation in a BO trace.

    Fields:
        step         — 0 for initialization draws, 1..n_steps afterwards
        index        — pool position of the observed cloud
        chosen_id    — id of the observed cloud
        observed_y   — observed objective value (label + optional noise)
        best_so_far  — minimum observed value up to and including this step
    """

    step: int
    index: int
    chosen_id: str
    observed_y: float
    best_so_far: float

    def to_dict(self) -> Dict[str, Any]:
        return {
            "step": self.step,
            "index": self.index,
            "chosen_id": self.chosen_id,
            "observed_y": self.observed_y,
            "best_so_far": self.best_so_far,
        }


@dataclass
class BOTrace:
    """
    Auditable record of one optimization run.

    ``initial`` holds the n_init draws (all with step 0); ``steps`` the
    acquisitions 1..n_steps. ``diagnostics`` has one dict per acquisition
    step (σ², MKL weights, selected kernel candidate, max EI).

    Invariants: best_so_far is non-increasing; chosen ids are distinct.
    """

    seed: int
    kernel_desc: str
    initial: List[BOStep] = field(default_factory=list)
    steps: List[BOStep] = field(default_factory=list)
    diagnostics: List[Dict[str, Any]] = field(default_factory=list)
    aucc: float = 0.0
    target: Optional[float] = None
    truncated: bool = False

    def __post_init__(self):
        records = list(self.initial) + list(self.steps)
        ids = [r.chosen_id for r in records]
        if len(set(ids)) != len(ids):
            raise InputError("BOTrace contains a re-evaluated cloud id.")
        bests = [r.best_so_far for r in self.steps]
        if self.initial:
            bests.insert(0, self.initial[-1].best_so_far)
        if any(b2 > b1 for b1, b2 in zip(bests, bests[1:])):
            raise InputError("BOTrace best_so_far must be non-increasing.")

    @property
    def initial_best(self) -> float:
        return min(r.observed_y for r in self.initial)

    def best_curve(self) -> np.ndarray:
        """Best-so-far at step 0 (after initialization) and after every step."""
        return np.array([self.initial_best] + [s.best_so_far for s in self.steps])

    def chosen_ids(self) -> List[str]:
        return [s.chosen_id for s in self.steps]

    def to_dict(self) -> Dict[str, Any]:
        return {
            "seed": self.seed,
            "kernel_desc": self.kernel_desc,
            "initial": trace_to_dict(self.initial),
            "steps": trace_to_dict(self.steps),
            "diagnostics": _json_safe(self.diagnostics),
            "aucc": self.aucc,
            "target": self.target,
            "truncated": self.truncated,
        }

    @classmethod
    def from_dict(cls, raw: Dict[str, Any]) -> "BOTrace":
        return cls(
            seed=int(raw["seed"]),
            kernel_desc=str(raw.get("kernel_desc", "")),
            initial=[BOStep(**step) for step in raw.get("initial", [])],
            steps=[BOStep(**step) for step in raw.get("steps", [])],
            diagnostics=list(raw.get("diagnostics", [])),
            aucc=float(raw.get("aucc", 0.0)),
            target=raw.get("target"),
            truncated=bool(raw.get("truncated", False)),
        )


def _json_safe(value: Any) -> Any:
    """Coerce a value into a JSON-serializable structure without losing data."""
    if isinstance(value, dict):
        return {str(k): _json_safe(v) for k, v in value.items()}
    if isinstance(value, np.ndarray):
        return _json_safe(value.tolist())
    if isinstance(value, (list, tuple, set)):
        return [_json_safe(v) for v in value]
    if isinstance(value, np.generic):
        return value.item()
    if isinstance(value, (str, int, float, bool)) or value is None:
        return value
    if hasattr(value, "to_dict"):
        return _json_safe(value.to_dict())
    # Anything else is stringified rather than dropped.
    return str(value)


def trace_to_dict(trace: "list") -> "list":
    """
    Serialize a sequence of BOStep records to a list of dicts.

    Accepts any iterable of BOStep instances and returns JSON-safe dicts via
    :meth:`BOStep.to_dict`.
    """
    return [step.to_dict() for step in trace]
