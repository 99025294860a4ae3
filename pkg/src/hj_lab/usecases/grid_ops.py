"""
Grid helpers shared by the solvers: padding, launch and site lattices,
resampling of traced characteristics onto nodes, discrete Lipschitz constants.
"""
from __future__ import annotations

import math
from typing import Tuple

import numpy as np
from scipy.interpolate import LinearNDInterpolator

from hj_lab.core.errors import ArgumentError
from hj_lab.domain.types import Array, Grid, HamiltonianModel, SolutionPatch
from hj_lab.usecases.characteristics import speed_bound


def padding_margin(model: HamiltonianModel, L0: float, t0: float, t1: float, grid: Grid) -> float:
    """Distance characteristics can travel on [t0, t1], plus two cells."""
    if t1 <= t0:
        return 0.0
    return (t1 - t0) * speed_bound(model, L0, t0, t1, grid) + 2.0 * float(np.max(grid.spacing))


def launch_grid(grid: Grid, margin: float, oversampling: int) -> Tuple[Grid, Grid, Tuple[int, ...]]:
    """(padded grid, launch grid refining it, node offsets of ``grid`` inside the padded one)."""
    padded, offsets = grid.padded(margin)
    launch = Grid(padded.lower, padded.upper, tuple((c - 1) * oversampling + 1 for c in padded.counts))
    return padded, launch, offsets


def site_lattice(grid: Grid, margin: float, density: float) -> Array:
    """Sites every ``stride`` nodes of the grid, extended past it by at least ``margin``.

    The lattice always contains the grid's lower corner node, so the same grid
    and density give the same sites whatever the margin.
    """
    if density <= 0:
        raise ArgumentError("site density must be positive")
    h = grid.spacing
    axes = []
    for lo, c, hi in zip(grid.lower, grid.counts, h):
        stride = max(1, int(round(1.0 / (density * hi))))
        step = stride * hi
        below = int(math.ceil(max(margin, 0.0) / step - 1e-9))
        above = int(math.ceil(((c - 1) * hi + max(margin, 0.0)) / step - 1e-9))
        axes.append(lo + step * np.arange(-below, above + 1))
    return np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, grid.dim)


def resample_patch(patch: SolutionPatch, grid: Grid) -> Tuple[Array, Array]:
    """Values and gradients carried by a patch's final characteristics, read at grid nodes.

    Nodes outside the traced region hold +inf (values) and 0 (gradients).
    """
    q = patch.final_q
    values = patch.final_values
    grads = patch.final_p
    d = grid.dim
    if d == 1:
        order = np.lexsort((values, q[:, 0]))
        qs, vs, gs = q[order, 0], values[order], grads[order]
        first = np.r_[True, np.diff(qs) > 0]
        qs, vs, gs = qs[first], vs[first], gs[first]
        nodes = grid.axes()[0]
        slack = 1e-12 * max(1.0, float(np.max(np.abs(nodes))))
        covered = (nodes >= qs[0] - slack) & (nodes <= qs[-1] + slack)
        if qs.size == 1:
            out_v = np.full(nodes.shape, vs[0])
            out_g = np.broadcast_to(gs[0], (nodes.size, 1)).copy()
        else:
            out_v = np.interp(nodes, qs, vs)
            out_g = np.interp(nodes, qs, gs[:, 0])[:, None]
    else:
        interpolator = LinearNDInterpolator(q, np.column_stack([values, grads]), fill_value=np.nan)
        sampled = interpolator(grid.points())
        covered = np.isfinite(sampled[:, 0])
        out_v, out_g = sampled[:, 0], sampled[:, 1:]
    out_v = np.where(covered, out_v, np.inf)
    out_g = np.where(covered[:, None], out_g, 0.0)
    return out_v, out_g


def discrete_lipschitz(values: Array, grid: Grid) -> float:
    """Largest axis-wise difference quotient of node values."""
    values = np.asarray(values, dtype=float).reshape(grid.shape)
    best = 0.0
    for axis, h in enumerate(grid.spacing):
        best = max(best, float(np.max(np.abs(np.diff(values, axis=axis)))) / float(h))
    return best
