"""
Scenario orchestration: resolve a config, run the selected solvers at every
requested time, compare them, scan for entropy violations and emit files.
"""
from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Dict, List, Optional, Tuple

import numpy as np
from pydantic import ValidationError

from hj_lab.core.config import get_settings
from hj_lab.core.errors import ConfigError, HJLabError, SolverStageError
from hj_lab.domain.models import ConvexityTag, EntropyReport, OrderingReport, Provenance, ScenarioConfig
from hj_lab.domain.registries import HamiltonianRegistry, InitialConditionRegistry, InitialData
from hj_lab.domain.types import DualFunction, Grid, HamiltonianModel, SemiConcaveFn, SolutionField
from hj_lab.infrastructure.storage.field_store import FieldStore
from hj_lab.usecases import weak_solvers
from hj_lab.usecases.entropy import scan_field
from hj_lab.usecases.grid_ops import discrete_lipschitz, padding_margin

logger = logging.getLogger(__name__)

_CHARACTERISTIC_SOLVERS = {"inf-family", "variational", "iterated", "lax-oleinik", "fd-oracle"}
_D1_ONLY = {"variational", "iterated", "lax-oleinik", "fd-oracle"}
_FAMILY_BACKED = {"inf-family", "variational", "iterated", "hopf"}


@dataclass
class ResolvedScenario:
    config: ScenarioConfig
    model: HamiltonianModel
    grid: Grid
    u0: InitialData


@dataclass
class ScenarioOutcome:
    name: str
    out_dir: Path
    fields: Dict[float, List[SolutionField]] = field(default_factory=dict)
    ordering: List[OrderingReport] = field(default_factory=list)
    entropy: Dict[float, List[EntropyReport]] = field(default_factory=dict)
    files: List[Path] = field(default_factory=list)

    @property
    def ordering_passed(self) -> bool:
        return all(report.passed for report in self.ordering)

    @property
    def entropy_passed(self) -> Optional[bool]:
        if not self.entropy:
            return None
        return all(report.passed for reports in self.entropy.values() for report in reports)


def load_config(path: Path) -> ScenarioConfig:
    path = Path(path)
    try:
        raw = json.loads(path.read_text(encoding="utf-8"))
    except FileNotFoundError as exc:
        raise ConfigError(f"config file not found: {path}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path} is not valid JSON: {exc}") from exc
    try:
        return ScenarioConfig.model_validate(raw)
    except ValidationError as exc:
        raise ConfigError(str(exc)) from exc


class ScenarioService:
    def __init__(self, hamiltonians: HamiltonianRegistry, initial_conditions: InitialConditionRegistry):
        self.hamiltonians = hamiltonians
        self.initial_conditions = initial_conditions

    def list_builtins(self) -> List[Tuple[str, str, str]]:
        """(kind, id, parameter schema) rows in a stable order."""
        rows = [("hamiltonian", h, self.hamiltonians.describe(h)) for h in self.hamiltonians.list()]
        rows += [("initial-condition", i, self.initial_conditions.describe(i)) for i in self.initial_conditions.list()]
        return rows

    def resolve(self, config: ScenarioConfig, base_dir: Path = Path(".")) -> ResolvedScenario:
        grid = Grid.from_spec(config.grid)
        model = self.hamiltonians.get(config.hamiltonian.id, config.dim, config.hamiltonian.params)
        params = dict(config.initial_condition.params, base_dir=str(base_dir))
        u0 = self.initial_conditions.get(config.initial_condition.id, grid, params)
        self._validate_selection(config, model, grid, u0)
        return ResolvedScenario(config=config, model=model, grid=grid, u0=u0)

    @staticmethod
    def _validate_selection(config: ScenarioConfig, model: HamiltonianModel, grid: Grid, u0: InitialData) -> None:
        selected = set(config.solvers.select)
        if not model.smooth and selected & _CHARACTERISTIC_SOLVERS:
            raise ConfigError(f"'{model.name}' is continuous only; use the hopf solver")
        if grid.dim == 2 and selected & _D1_ONLY:
            raise ConfigError(f"solvers {sorted(selected & _D1_ONLY)} are d=1 only")
        if "lax-oleinik" in selected and model.convexity_tag is not ConvexityTag.convex:
            raise ConfigError(f"lax-oleinik needs a convex-in-p Hamiltonian, '{model.name}' is {model.convexity_tag.value}")
        if selected & {"hopf", "lax-oleinik"} and model.depends_on_tx:
            raise ConfigError(f"hopf and lax-oleinik need H = H(p); '{model.name}' depends on (t, x)")
        if "inf-family" in selected and not isinstance(u0, SemiConcaveFn):
            raise ConfigError("inf-family needs a generating family; sampled data has none")
        entropy = config.checks.entropy
        if entropy is not None:
            if entropy.field not in selected:
                raise ConfigError(f"entropy check field '{entropy.field}' is not among the selected solvers")
            if entropy.field not in _FAMILY_BACKED:
                raise ConfigError(f"'{entropy.field}' fields carry no generating family to scan")

    def run(self, config: ScenarioConfig, out_dir: Optional[Path] = None, base_dir: Path = Path(".")) -> ScenarioOutcome:
        scenario = self.resolve(config, base_dir)
        target = Path(out_dir or config.output_dir or get_settings().output_dir)
        store = FieldStore(target)
        outcome = ScenarioOutcome(name=config.name, out_dir=target)
        logger.info("scenario %s: %s with %s on %s", config.name, scenario.model.name, config.initial_condition.id, scenario.grid.counts)

        dual = self._stage("dual", lambda: self._dual(scenario)) if "hopf" in config.solvers.select else None
        for t in config.times:
            fields = [self._stage(f"{name}@t={t:g}", lambda name=name: self._solve(scenario, name, t, dual)) for name in config.solvers.select]
            outcome.fields[t] = fields
            outcome.files += store.write_fields(t, fields)
            if len(fields) >= 2:
                outcome.ordering.append(
                    self._stage(f"ordering@t={t:g}", lambda: weak_solvers.compare_solutions(fields, config.checks.ordering_tol))
                )
            check = config.checks.entropy
            if check is not None and t > 0:
                source = fields[config.solvers.select.index(check.field)]
                outcome.entropy[t] = self._stage(
                    f"entropy@t={t:g}", lambda: scan_field(scenario.model, source, check.mode, check.tol, check.samples)
                )

        return outcome

    @staticmethod
    def _stage(stage: str, action: Callable):
        try:
            return action()
        except ConfigError:
            raise
        except HJLabError as exc:
            logger.error("stage %s failed: %s", stage, exc)
            raise SolverStageError(stage, exc) from exc
        except (ArithmeticError, LookupError, ValueError, np.linalg.LinAlgError) as exc:
            logger.exception("stage %s failed unexpectedly", stage)
            raise SolverStageError(stage, exc) from exc

    @staticmethod
    def _dual(scenario: ResolvedScenario) -> DualFunction:
        options = scenario.config.solvers
        grid, model, u0 = scenario.grid, scenario.model, scenario.u0
        L = float(u0.L) if isinstance(u0, SemiConcaveFn) else discrete_lipschitz(u0.values, u0.grid)
        if options.dual_x_box is not None:
            x_box = [tuple(b) for b in options.dual_x_box]
        else:
            padded, _ = grid.padded(padding_margin(model, L, 0.0, max(scenario.config.times), grid))
            x_box = list(zip(padded.lower, padded.upper))
        p_box = [tuple(b) for b in options.dual_p_box] if options.dual_p_box is not None else [(-(L + 1.0), L + 1.0)] * grid.dim
        return weak_solvers.legendre_concave_dual(u0, x_box, p_box, options.dual_resolution)

    @staticmethod
    def _solve(scenario: ResolvedScenario, name: str, t: float, dual: Optional[DualFunction]) -> SolutionField:
        options = scenario.config.solvers
        model, grid, u0 = scenario.model, scenario.grid, scenario.u0
        dt = options.dt or get_settings().dt
        if name == "inf-family":
            return weak_solvers.inf_family_solution(model, u0, t, grid, dt)
        if name == "variational":
            return weak_solvers.variational_solution(model, u0, t, grid, dt, options.site_density, hull_samples=options.hull_samples)
        if name == "iterated":
            return weak_solvers.iterated_variational(model, u0, t, grid, dt, options.k, site_density=options.site_density)
        if name == "hopf":
            return weak_solvers.hopf_solution(model, dual, t, grid)
        if name == "lax-oleinik":
            if t == 0:
                values = np.asarray(u0(grid.points()), dtype=float).reshape(grid.shape)
                return SolutionField(t=t, grid=grid, values=values, provenance=Provenance.lax_oleinik, meta={"exact": True})
            return weak_solvers.lax_oleinik(model, u0, t, grid, resolution=options.lax_oleinik_resolution)
        return weak_solvers.fd_viscosity_oracle(model, u0, t, grid, options.cfl)
