"""
JSON documents written by the command line runner.
"""
from __future__ import annotations

from typing import Dict, List, Optional

from pydantic import BaseModel

from hj_lab.domain import models as domain_models


class OrderingTimeDocument(BaseModel):
    t: float
    passed: bool
    max_violation: float
    pairs: List[domain_models.OrderingPair]

    @classmethod
    def from_domain(cls, report: domain_models.OrderingReport) -> "OrderingTimeDocument":
        return cls(t=report.t, passed=report.passed, max_violation=report.max_violation, pairs=report.pairs)


class OrderingDocument(BaseModel):
    scenario: str
    tol: float
    passed: bool
    max_violation: float
    times: List[OrderingTimeDocument]

    @classmethod
    def from_domain(
        cls, config: domain_models.ScenarioConfig, reports: List[domain_models.OrderingReport]
    ) -> "OrderingDocument":
        times = [OrderingTimeDocument.from_domain(report) for report in reports]
        return cls(
            scenario=config.name,
            tol=config.checks.ordering_tol,
            passed=all(doc.passed for doc in times),
            max_violation=max((doc.max_violation for doc in times), default=0.0),
            times=times,
        )


class EntropyTimeDocument(BaseModel):
    t: float
    nonsmooth_nodes: int
    failing_nodes: int
    worst_margin: Optional[float]
    reports: List[domain_models.EntropyReport]

    @classmethod
    def from_domain(cls, t: float, reports: List[domain_models.EntropyReport]) -> "EntropyTimeDocument":
        margins = [r.worst_margin for r in reports if r.worst_margin is not None]
        return cls(
            t=t,
            nonsmooth_nodes=len(reports),
            failing_nodes=sum(not r.passed for r in reports),
            worst_margin=min(margins) if margins else None,
            reports=reports,
        )


class EntropyDocument(BaseModel):
    scenario: str
    mode: domain_models.EnvelopeMode
    field: str
    passed: Optional[bool]
    skipped: bool = False
    times: List[EntropyTimeDocument]

    @classmethod
    def from_domain(
        cls, config: domain_models.ScenarioConfig, reports: Dict[float, List[domain_models.EntropyReport]]
    ) -> "EntropyDocument":
        check = config.checks.entropy
        if check is None:
            raise ValueError(f"scenario '{config.name}' requests no entropy check")
        times = [EntropyTimeDocument.from_domain(t, reports[t]) for t in sorted(reports)]
        return cls(
            scenario=config.name,
            mode=check.mode,
            field=check.field,
            passed=all(doc.failing_nodes == 0 for doc in times) if times else None,
            skipped=not times,
            times=times,
        )
