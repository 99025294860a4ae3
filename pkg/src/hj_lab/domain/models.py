"""
Domain models shared across the layers: tags, checker reports and the scenario schema.
"""
from __future__ import annotations

from enum import Enum
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple

from pydantic import BaseModel, Field, field_validator, model_validator


class ConvexityTag(str, Enum):
    convex = "convex-in-p"
    concave = "concave-in-p"
    nonconvex = "nonconvex"
    unknown = "unknown"


class GeneratorKind(str, Enum):
    affine = "affine"
    phi_cap = "phi-cap"
    quadratic = "quadratic"
    poly = "poly"


class Provenance(str, Enum):
    inf_family = "inf-family"
    variational = "variational"
    iterated = "iterated"
    hopf = "hopf"
    lax_oleinik = "lax-oleinik"
    fd_oracle = "fd-oracle"


class EnvelopeMode(str, Enum):
    convex = "convex"
    concave = "concave"


class StrictModel(BaseModel):
    class Config:
        extra = "forbid"


# ----- checker reports -----


class SampleBox(StrictModel):
    t: Tuple[float, float]
    x: List[Tuple[float, float]]
    p: List[Tuple[float, float]]

    @model_validator(mode="after")
    def _same_dimension(self) -> "SampleBox":
        if len(self.x) != len(self.p) or not self.x:
            raise ValueError("x and p boxes must have the same nonzero dimension")
        return self

    @property
    def dim(self) -> int:
        return len(self.x)


class HypothesisReport(StrictModel):
    model: str
    bound_A: float
    slack: float
    samples: int
    max_value_ratio: float
    max_gradient_ratio: float
    max_hessian: float
    value_ok: bool
    gradient_ok: bool
    hessian_ok: bool

    @property
    def passed(self) -> bool:
        return self.value_ok and self.gradient_ok and self.hessian_ok


class TwoBranchReport(StrictModel):
    t: float
    x: List[float]
    p_minus: List[float]
    p_plus: List[float]
    worst_s: float
    max_violation: float
    tol: float
    passed: bool


class ShockClassification(StrictModel):
    p_minus: float
    p_plus: float
    speed: float
    admissible: bool
    chord: Optional[TwoBranchReport] = None


class EntropyReport(StrictModel):
    t: float
    x: List[float]
    mode: EnvelopeMode
    extreme: List[List[float]]
    samples: List[List[float]] = Field(default_factory=list)
    margins: List[float] = Field(default_factory=list)
    tol: float
    passed: bool
    worst_margin: Optional[float] = None
    worst_p: Optional[List[float]] = None
    certificate: str = "none"


class OrderingPair(StrictModel):
    lower: str
    upper: str
    relation: str
    max_violation: float
    max_abs_difference: float
    passed: bool


class OrderingReport(StrictModel):
    t: float
    tol: float
    pairs: List[OrderingPair]

    @property
    def passed(self) -> bool:
        return all(pair.passed for pair in self.pairs)

    @property
    def max_violation(self) -> float:
        return max((pair.max_violation for pair in self.pairs), default=0.0)


class SemigroupReport(StrictModel):
    times: Tuple[float, float, float]
    max_violation: float
    max_abs_difference: float
    tol: float
    passed: bool


# ----- scenario schema -----


class ComponentRef(StrictModel):
    id: str
    params: Dict[str, Any] = Field(default_factory=dict)


class GridAxis(StrictModel):
    min: float
    max: float
    count: int

    @model_validator(mode="after")
    def _check(self) -> "GridAxis":
        if self.count < 2:
            raise ValueError("grid axes need at least 2 nodes")
        if not self.max > self.min:
            raise ValueError("grid axis max must exceed min")
        return self


class GridSpec(StrictModel):
    axes: List[GridAxis]

    @field_validator("axes")
    @classmethod
    def _dimension(cls, axes: List[GridAxis]) -> List[GridAxis]:
        if not 1 <= len(axes) <= 2:
            raise ValueError("only d=1 and d=2 grids are supported")
        return axes


SOLVER_NAMES = ("inf-family", "variational", "iterated", "hopf", "lax-oleinik", "fd-oracle")


class SolverOptions(StrictModel):
    select: List[str] = Field(default_factory=lambda: ["inf-family", "variational"])
    dt: Optional[float] = Field(default=None, gt=0)
    k: int = Field(default=16, ge=1)
    site_density: Optional[float] = Field(default=None, gt=0)
    hull_samples: Optional[int] = Field(default=None, ge=1)
    dual_resolution: int = Field(default=401, ge=2)
    dual_x_box: Optional[List[Tuple[float, float]]] = None
    dual_p_box: Optional[List[Tuple[float, float]]] = None
    lax_oleinik_resolution: int = Field(default=801, ge=2)
    cfl: float = Field(default=0.5, gt=0, le=1)

    @field_validator("select")
    @classmethod
    def _known(cls, select: List[str]) -> List[str]:
        unknown = [name for name in select if name not in SOLVER_NAMES]
        if unknown:
            raise ValueError(f"unknown solvers: {unknown}")
        if len(set(select)) != len(select):
            raise ValueError("solver selection contains duplicates")
        return select


class EntropyCheck(StrictModel):
    mode: EnvelopeMode = EnvelopeMode.convex
    tol: Optional[float] = None
    field: str = "inf-family"
    samples: Optional[int] = Field(default=None, ge=2)


class CheckOptions(StrictModel):
    ordering_tol: float = Field(default=5e-2, ge=0)
    entropy: Optional[EntropyCheck] = None


class ScenarioConfig(StrictModel):
    name: str
    hamiltonian: ComponentRef
    initial_condition: ComponentRef
    grid: GridSpec
    times: List[float]
    solvers: SolverOptions = Field(default_factory=SolverOptions)
    checks: CheckOptions = Field(default_factory=CheckOptions)
    output_dir: Optional[Path] = None

    @field_validator("times")
    @classmethod
    def _times(cls, times: List[float]) -> List[float]:
        if not times:
            raise ValueError("at least one time is required")
        if any(t < 0 for t in times):
            raise ValueError("times must be nonnegative")
        if any(b <= a for a, b in zip(times, times[1:])):
            raise ValueError("times must be strictly increasing")
        return times

    @property
    def dim(self) -> int:
        return len(self.grid.axes)
