"""
Typer application: run scenario files and list the built-in components.
"""
from __future__ import annotations

import logging
from enum import Enum
from pathlib import Path
from typing import List, Optional

import typer

from hj_lab.adapters.cli import schemas
from hj_lab.core.config import get_settings
from hj_lab.core.errors import ArgumentError, HJLabError
from hj_lab.core.logging import configure_logging
from hj_lab.domain.models import ScenarioConfig
from hj_lab.infrastructure.registries.hamiltonians import BuiltinHamiltonians
from hj_lab.infrastructure.registries.initial_conditions import BuiltinInitialConditions
from hj_lab.infrastructure.storage.field_store import FieldStore
from hj_lab.usecases.scenario_service import ScenarioOutcome, ScenarioService, load_config

logger = logging.getLogger(__name__)

EXIT_CHECK_FAILED = 1
EXIT_CONFIG = 2
EXIT_SOLVER = 3

app = typer.Typer(add_completion=False, help="Hamilton-Jacobi weak solution lab.")


class AssertCheck(str, Enum):
    ordering = "ordering"
    entropy_pass = "entropy-pass"
    entropy_fail = "entropy-fail"


def get_scenario_service() -> ScenarioService:
    return ScenarioService(BuiltinHamiltonians(), BuiltinInitialConditions())


def write_reports(outcome: ScenarioOutcome, config: ScenarioConfig) -> List[Path]:
    store = FieldStore(outcome.out_dir)
    files = [
        store.write_report(
            "ordering_report.json",
            schemas.OrderingDocument.from_domain(config, outcome.ordering).model_dump(mode="json"),
        )
    ]
    if config.checks.entropy is not None:
        document = schemas.EntropyDocument.from_domain(config, outcome.entropy)
        files.append(store.write_report("entropy_report.json", document.model_dump(mode="json")))
    return files


def evaluate_asserts(outcome: ScenarioOutcome, checks: List[AssertCheck]) -> List[str]:
    """Names of the asserted checks that did not hold."""
    failed: List[str] = []
    for check in checks:
        if check is AssertCheck.ordering and not outcome.ordering_passed:
            failed.append(check.value)
        elif check is not AssertCheck.ordering and outcome.entropy_passed is None:
            failed.append(f"{check.value} (skipped: no t > 0)")
        elif check is AssertCheck.entropy_pass and not outcome.entropy_passed:
            failed.append(check.value)
        elif check is AssertCheck.entropy_fail and outcome.entropy_passed:
            failed.append(check.value)
    return failed


@app.command("run")
def run_command(
    config_path: Path = typer.Argument(..., help="Scenario JSON file."),
    checks: List[AssertCheck] = typer.Option([], "--assert", help="Fail with exit code 1 unless the check holds."),
    out: Optional[Path] = typer.Option(None, "--out", help="Output directory (overrides the scenario and settings)."),
) -> None:
    settings = get_settings()
    configure_logging(settings.log_level)
    service = get_scenario_service()
    try:
        config = load_config(config_path)
        if config.checks.entropy is None and any(c is not AssertCheck.ordering for c in checks):
            typer.echo(f"error: scenario '{config.name}' has no entropy check to assert", err=True)
            raise typer.Exit(EXIT_CONFIG)
        outcome = service.run(config, out_dir=out, base_dir=config_path.resolve().parent)
    except ArgumentError as exc:
        typer.echo(f"config error: {exc}", err=True)
        raise typer.Exit(EXIT_CONFIG) from exc
    except HJLabError as exc:
        typer.echo(f"solver error: {exc}", err=True)
        raise typer.Exit(EXIT_SOLVER) from exc

    files = outcome.files + write_reports(outcome, config)
    for path in files:
        typer.echo(str(path))
    ordering = "n/a" if not outcome.ordering else ("PASS" if outcome.ordering_passed else "FAIL")
    typer.echo(f"ordering: {ordering}")
    if config.checks.entropy is not None:
        entropy = "skipped" if outcome.entropy_passed is None else ("PASS" if outcome.entropy_passed else "FAIL")
        typer.echo(f"entropy: {entropy}")

    failed = evaluate_asserts(outcome, checks)
    if failed:
        logger.info("asserted checks failed: %s", ", ".join(failed))
        typer.echo(f"asserted checks failed: {', '.join(failed)}", err=True)
        raise typer.Exit(EXIT_CHECK_FAILED)


@app.command("list")
def list_command() -> None:
    """Print the built-in Hamiltonians and initial conditions with their parameters."""
    for kind, component_id, schema in get_scenario_service().list_builtins():
        typer.echo(f"{kind:<18} {component_id:<18} {schema}")


if __name__ == "__main__":
    app()
