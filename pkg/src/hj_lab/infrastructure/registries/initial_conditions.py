"""
Built-in semi-concave initial conditions addressable by string id.
"""
from __future__ import annotations

import itertools
from pathlib import Path
from typing import Any, Callable, Dict, Iterable, List, Tuple

import numpy as np
from numpy.polynomial import Polynomial

from hj_lab.core.errors import ConfigError
from hj_lab.domain.models import GeneratorKind
from hj_lab.domain.registries import InitialData
from hj_lab.domain.types import Generator, Grid, SemiConcaveFn
from hj_lab.infrastructure.storage.field_store import load_sampled_csv


def _affine(p: Iterable[float], offset: float, label: str = "") -> Generator:
    p = np.asarray(list(p), dtype=float)
    return Generator(kind=GeneratorKind.affine, x0=np.zeros(p.size), p=p, c=-float(offset), label=label)


def neg_abs(grid: Grid, params: Dict[str, Any]) -> SemiConcaveFn:
    """-|x| in d=1, -(|x| + |y|) in d=2: the minimum of the sign-pattern slopes."""
    slopes = list(itertools.product((1.0, -1.0), repeat=grid.dim))
    generators = tuple(_affine(s, 0.0, label=f"slope{s}") for s in slopes)
    return SemiConcaveFn(generators=generators, B=0.0, L=float(np.sqrt(grid.dim)), label="neg-abs")


def min_affine(grid: Grid, params: Dict[str, Any]) -> SemiConcaveFn:
    """min_i (p_i . x - c_i)."""
    slopes = params.get("slopes")
    offsets = params.get("offsets")
    if not slopes or offsets is None or len(slopes) != len(offsets):
        raise ConfigError("min-affine needs matching slopes and offsets")
    generators: List[Generator] = []
    for p, c in zip(slopes, offsets):
        p = np.atleast_1d(np.asarray(p, dtype=float))
        if p.size != grid.dim:
            raise ConfigError(f"min-affine slope {p.tolist()} does not match dimension {grid.dim}")
        generators.append(_affine(p, c))
    L = max(float(np.linalg.norm(g.p)) for g in generators)
    return SemiConcaveFn(generators=tuple(generators), B=0.0, L=L, label="min-affine")


def concave_poly(grid: Grid, params: Dict[str, Any]) -> SemiConcaveFn:
    """A single polynomial generator.

    B and L are measured on the grid box widened by its own extent on each side,
    which is where characteristics reaching the grid start from for moderate t.
    """
    if grid.dim != 1:
        raise ConfigError("concave-poly is defined for d=1 only")
    coefficients = np.asarray(params["coefficients"], dtype=float)
    poly = Polynomial(coefficients)
    width = grid.upper[0] - grid.lower[0]
    x = np.linspace(grid.lower[0] - width, grid.upper[0] + width, 12 * grid.counts[0])
    B = max(0.0, float(np.max(poly.deriv(2)(x))))
    L = float(np.max(np.abs(poly.deriv()(x))))
    generator = Generator(kind=GeneratorKind.poly, x0=np.zeros(1), p=np.zeros(1), c=0.0, coefficients=coefficients)
    return SemiConcaveFn(generators=(generator,), B=B, L=L, label="concave-poly")


def sampled(grid: Grid, params: Dict[str, Any]) -> InitialData:
    if grid.dim != 1:
        raise ConfigError("grid data is d=1 only")
    path = Path(params["path"])
    if not path.is_absolute():
        path = Path(params.get("base_dir", ".")) / path
    return load_sampled_csv(path)


Factory = Callable[[Grid, Dict[str, Any]], InitialData]

_FACTORIES: Dict[str, Tuple[Factory, str]] = {
    "neg-abs": (neg_abs, "d=1,2; -|x| (d=2: -(|x|+|y|)); no params"),
    "min-affine": (min_affine, "d=1,2; min-affine:<p/c,...> or params {slopes: [...], offsets: [...]}, value p.x - c"),
    "concave-poly": (concave_poly, "d=1; concave-poly:<c0,c1,...> or params {coefficients: [...]}"),
    "grid": (sampled, "d=1; grid:<file> two-column CSV (x,u) on a uniform grid"),
}


def _split_id(ic_id: str, params: Dict[str, Any]) -> Tuple[str, Dict[str, Any]]:
    base, _, inline = ic_id.partition(":")
    params = dict(params)
    if not inline:
        return base, params
    try:
        if base == "min-affine":
            pairs = [item.split("/") for item in inline.split(",")]
            params["slopes"] = [float(p) for p, _ in pairs]
            params["offsets"] = [float(c) for _, c in pairs]
        elif base == "concave-poly":
            params["coefficients"] = [float(v) for v in inline.split(",")]
        elif base == "grid":
            params["path"] = inline
        else:
            raise ConfigError(f"inline parameters are not accepted by '{base}'")
    except ValueError as exc:
        raise ConfigError(f"cannot parse initial condition '{ic_id}'") from exc
    return base, params


class BuiltinInitialConditions:
    def list(self) -> Iterable[str]:
        return sorted(_FACTORIES)

    def describe(self, ic_id: str) -> str:
        base = ic_id.partition(":")[0]
        if base not in _FACTORIES:
            raise ConfigError(f"unknown initial condition id '{ic_id}'")
        return _FACTORIES[base][1]

    def get(self, ic_id: str, grid: Grid, params: Dict[str, Any] | None = None) -> InitialData:
        base, merged = _split_id(ic_id, params or {})
        if base not in _FACTORIES:
            raise ConfigError(f"unknown initial condition id '{ic_id}'")
        if base == "concave-poly" and "coefficients" not in merged:
            raise ConfigError("concave-poly needs coefficients (concave-poly:<c0,c1,...>)")
        if base == "grid" and "path" not in merged:
            raise ConfigError("grid needs a file (grid:<file>)")
        return _FACTORIES[base][0](grid, merged)
