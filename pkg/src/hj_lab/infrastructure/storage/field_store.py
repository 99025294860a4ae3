"""
File output for scenario runs: per-time field tables (CSV plus gnuplot .dat) and JSON reports.
"""
from __future__ import annotations

import json
from pathlib import Path
from typing import Any, Dict, List, Sequence

import numpy as np

from hj_lab.core.config import get_settings
from hj_lab.core.errors import ConfigError
from hj_lab.domain.types import Grid, SampledData, SolutionField


def field_table_name(t: float) -> str:
    return f"fields_t{t:g}"


class FieldStore:
    def __init__(self, out_dir: Path) -> None:
        self.out_dir = Path(out_dir)
        self.fmt = f"%.{get_settings().csv_digits}g"

    def _ensure_dir(self) -> None:
        self.out_dir.mkdir(parents=True, exist_ok=True)

    def write_fields(self, t: float, fields: Sequence[SolutionField]) -> List[Path]:
        """One row per node, coordinates first, then one column per field in the given order."""
        if not fields:
            return []
        self._ensure_dir()
        grid = fields[0].grid
        coords = ["x", "y"][: grid.dim]
        columns = coords + [f.label for f in fields]
        table = np.column_stack([grid.points()] + [f.values.reshape(-1) for f in fields])

        csv_path = self.out_dir / f"{field_table_name(t)}.csv"
        np.savetxt(csv_path, table, fmt=self.fmt, delimiter=",", header=",".join(columns), comments="")

        dat_path = self.out_dir / f"{field_table_name(t)}.dat"
        with dat_path.open("w", encoding="utf-8") as handle:
            handle.write("# " + " ".join(columns) + "\n")
            rows_per_line = grid.counts[-1] if grid.dim == 2 else table.shape[0]
            for start in range(0, table.shape[0], rows_per_line):
                if start:
                    handle.write("\n")
                np.savetxt(handle, table[start:start + rows_per_line], fmt=self.fmt, delimiter=" ")
        return [csv_path, dat_path]

    def write_report(self, name: str, document: Dict[str, Any]) -> Path:
        self._ensure_dir()
        path = self.out_dir / name
        path.write_text(json.dumps(document, indent=2, sort_keys=False) + "\n", encoding="utf-8")
        return path


def load_sampled_csv(path: Path) -> SampledData:
    """Two-column (x, u) CSV on a uniform d=1 grid; a header line is allowed."""
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"sampled data file not found: {path}")
    try:
        data = np.genfromtxt(path, delimiter=",", comments="#", skip_header=_header_lines(path))
    except ValueError as exc:
        raise ConfigError(f"cannot parse sampled data in {path}") from exc
    data = np.atleast_2d(data)
    if data.shape[1] != 2 or data.shape[0] < 3 or not np.all(np.isfinite(data)):
        raise ConfigError(f"{path} must hold at least 3 finite (x, u) rows")
    x, u = data[:, 0], data[:, 1]
    steps = np.diff(x)
    if np.any(steps <= 0) or not np.allclose(steps, steps[0], rtol=1e-9, atol=1e-12):
        raise ConfigError(f"{path} must list x on a uniform increasing grid")
    grid = Grid.uniform([x[0]], [x[-1]], [x.size])
    return SampledData(grid=grid, values=u, label=path.stem)


def _header_lines(path: Path) -> int:
    with path.open(encoding="utf-8") as handle:
        first = handle.readline().split(",")[0].strip()
    try:
        float(first)
    except ValueError:
        return 1
    return 0
