"""
Registry interfaces resolving string ids to models and initial conditions.
"""
from __future__ import annotations

from typing import Any, Dict, Iterable, Protocol, Union

from hj_lab.domain.types import Grid, HamiltonianModel, SampledData, SemiConcaveFn

InitialData = Union[SemiConcaveFn, SampledData]


class HamiltonianRegistry(Protocol):
    def list(self) -> Iterable[str]: ...

    def describe(self, model_id: str) -> str: ...

    def get(self, model_id: str, dim: int, params: Dict[str, Any] | None = None) -> HamiltonianModel: ...


class InitialConditionRegistry(Protocol):
    def list(self) -> Iterable[str]: ...

    def describe(self, ic_id: str) -> str: ...

    def get(self, ic_id: str, grid: Grid, params: Dict[str, Any] | None = None) -> InitialData: ...
