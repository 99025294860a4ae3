"""
Weak-solution pipelines.

inf-family      minimum of the evolved members of a generating family
variational     the same after rebuilding a phi-cap family with dF0 = Du0
iterated        k-fold composition of the variational operator on time substeps
hopf            min over the concave dual domain of p.x - u0*(p) - tH(p)
lax-oleinik     min over y of u0(y) + t L*((x - y)/t) for convex H
fd-oracle       monotone Lax-Friedrichs scheme, independent of all the above
"""
from __future__ import annotations

import logging
from dataclasses import replace
from typing import List, Optional, Sequence, Tuple

import numpy as np

from hj_lab.core.config import get_settings
from hj_lab.core.errors import ArgumentError, CapabilityError, ContractError, EmptyDomainError, HorizonError, StabilityError
from hj_lab.domain.models import ConvexityTag, GeneratorKind, OrderingPair, OrderingReport, Provenance, SemigroupReport
from hj_lab.domain.registries import InitialData
from hj_lab.domain.types import Array, DualFunction, EvolvedFamily, Generator, Grid, HamiltonianModel, SampledData, SemiConcaveFn, SolutionField
from hj_lab.usecases.characteristics import evolve_family, step_times
from hj_lab.usecases.grid_ops import discrete_lipschitz, launch_grid, padding_margin, resample_patch, site_lattice
from hj_lab.usecases.hamiltonian import require_autonomous, require_smooth
from hj_lab.usecases.semiconcave import build_family_f0, clamp_constant, estimate_constants, fn_oracle, sampled_oracle

logger = logging.getLogger(__name__)

_VISCOSITY_CLASS = {Provenance.fd_oracle, Provenance.hopf, Provenance.lax_oleinik, Provenance.iterated}
_MAX_WIDENINGS = 4


def _check_grid(model: HamiltonianModel, grid: Grid) -> None:
    if grid.dim != model.dim:
        raise ArgumentError(f"grid dimension {grid.dim} does not match model dimension {model.dim}")
    if any(c < 2 for c in grid.counts):
        raise ArgumentError("grids need at least 2 nodes per axis")


def _require_d1(grid: Grid, solver: str) -> None:
    if grid.dim != 1:
        raise CapabilityError(f"{solver} is implemented for d=1 only")


def _initial_lipschitz(u0: InitialData) -> float:
    if isinstance(u0, SemiConcaveFn):
        return float(u0.L)
    return discrete_lipschitz(u0.values, u0.grid)


# ----- generating families -----


def evolve_onto_grid(
    model: HamiltonianModel,
    generators: Sequence[Generator],
    grid: Grid,
    t: float,
    dt: float,
    t0: float = 0.0,
    L0: float = 1.0,
    hint: str = "",
) -> EvolvedFamily:
    """Evolve generators from t0 to t and read values, gradients and time slopes at grid nodes."""
    settings = get_settings()
    points = grid.points()
    if t == t0:
        values = np.stack([g.value(points) for g in generators])
        grads = np.stack([g.gradient(points) for g in generators])
    else:
        margin = padding_margin(model, L0, t0, t, grid)
        for attempt in range(_MAX_WIDENINGS + 1):
            _, launch, _ = launch_grid(grid, margin, settings.launch_oversampling)
            values, grads = _evolve_chunked(model, generators, launch, grid, t, dt, t0, hint)
            uncovered = np.all(np.isinf(values), axis=0)
            if not uncovered.any():
                break
            if attempt == _MAX_WIDENINGS:
                raise EmptyDomainError(f"{int(uncovered.sum())} nodes are reached by no characteristic at t={t:g}")
            margin *= 2.0
            logger.debug("widening launch margin to %.3g", margin)
    eta = -model.eval(t, points[None, :, :], grads)
    return EvolvedFamily(
        t=t,
        grid=grid,
        generator_ids=np.arange(len(generators)),
        values=values,
        grads=grads,
        eta=eta,
    )


def _evolve_chunked(
    model: HamiltonianModel,
    generators: Sequence[Generator],
    launch: Grid,
    grid: Grid,
    t: float,
    dt: float,
    t0: float,
    hint: str,
) -> Tuple[Array, Array]:
    chunk = max(1, (1 << 20) // launch.size)
    values = np.empty((len(generators), grid.size))
    grads = np.empty((len(generators), grid.size, grid.dim))
    for start in range(0, len(generators), chunk):
        patches = evolve_family(model, generators[start:start + chunk], launch, t, dt, t0, first_id=start)
        for patch in patches:
            if patch.caustic_time <= t:
                raise HorizonError(patch.generator_id, patch.caustic_time, t, hint)
            values[patch.generator_id], grads[patch.generator_id] = resample_patch(patch, grid)
    return values, grads


def inf_family_solution(
    model: HamiltonianModel,
    fn: SemiConcaveFn,
    t: float,
    grid: Grid,
    dt: Optional[float] = None,
    t0: float = 0.0,
    hint: str = "",
) -> SolutionField:
    require_smooth(model, "inf_family_solution")
    _check_grid(model, grid)
    if t < t0:
        raise ArgumentError("solutions are computed forward in time")
    dt = get_settings().dt if dt is None else dt
    logger.info("inf-family: %d generators to t=%g", len(fn.generators), t)
    family = evolve_onto_grid(model, fn.generators, grid, t, dt, t0, fn.L, hint)
    return SolutionField(
        t=t,
        grid=grid,
        values=family.minimum().reshape(grid.shape),
        provenance=Provenance.inf_family,
        meta={"dt": dt, "t0": t0, "generators": len(fn.generators)},
        family=family,
    )


def rebuild_family(
    model: HamiltonianModel,
    u0: InitialData,
    t: float,
    grid: Grid,
    t0: float = 0.0,
    site_density: Optional[float] = None,
    hull_samples: Optional[int] = None,
) -> SemiConcaveFn:
    """Phi-cap family meeting dF0 = Du0, sited over the region characteristics reach the grid from."""
    settings = get_settings()
    if isinstance(u0, SemiConcaveFn):
        B, L = clamp_constant(u0.B), clamp_constant(u0.L)
        margin = padding_margin(model, L, t0, t, grid)
        sites = site_lattice(grid, margin, settings.site_density if site_density is None else site_density)
        oracle = fn_oracle(u0, hull_samples)
    elif isinstance(u0, SampledData):
        B, L = estimate_constants(u0.values, u0.grid)
        sites = u0.grid.points()
        oracle = sampled_oracle(u0, hull_samples)
    else:
        raise ArgumentError(f"unsupported initial data {type(u0).__name__}")
    return build_family_f0(u0, sites, B, L, oracle)


def variational_solution(
    model: HamiltonianModel,
    u0: InitialData,
    t: float,
    grid: Grid,
    dt: Optional[float] = None,
    site_density: Optional[float] = None,
    t0: float = 0.0,
    hull_samples: Optional[int] = None,
) -> SolutionField:
    require_smooth(model, "variational_solution")
    _require_d1(grid, "variational_solution")
    family = rebuild_family(model, u0, t, grid, t0, site_density, hull_samples)
    field = inf_family_solution(model, family, t, grid, dt, t0)
    meta = dict(field.meta, B=family.B, L=family.L)
    return replace(field, provenance=Provenance.variational, meta=meta)


def _crop_family(family: EvolvedFamily, grid: Grid, offsets: Tuple[int, ...], padded: Grid) -> EvolvedFamily:
    nodes = grid.crop(np.arange(padded.size).reshape(padded.shape), offsets).ravel()
    return EvolvedFamily(
        t=family.t,
        grid=grid,
        generator_ids=family.generator_ids,
        values=family.values[:, nodes],
        grads=family.grads[:, nodes],
        eta=family.eta[:, nodes],
    )


def iterated_variational(
    model: HamiltonianModel,
    u0: InitialData,
    t: float,
    grid: Grid,
    dt: Optional[float] = None,
    k: int = 16,
    t0: float = 0.0,
    site_density: Optional[float] = None,
) -> SolutionField:
    """Compose the variational operator over substeps of length 1/k, resampling on the grid between them."""
    require_smooth(model, "iterated_variational")
    _require_d1(grid, "iterated_variational")
    if k < 1:
        raise ArgumentError("k must be a positive integer")
    if t < t0:
        raise ArgumentError("solutions are computed forward in time")
    steps = step_times(t0, t, 1.0 / k) if t > t0 else np.array([t0, t])
    hint = "increase k to shorten the substeps"
    if steps.size == 2:
        field = variational_solution(model, u0, t, grid, dt, site_density, t0)
        return replace(field, provenance=Provenance.iterated, meta=dict(field.meta, k=k, substeps=1))

    work, offsets = grid.padded(padding_margin(model, _initial_lipschitz(u0), t0, t, grid))
    data: InitialData = u0
    field: Optional[SolutionField] = None
    for start, stop in zip(steps[:-1], steps[1:]):
        family = rebuild_family(model, data, float(stop), work, float(start), site_density)
        field = inf_family_solution(model, family, float(stop), work, dt, float(start), hint)
        data = SampledData(grid=work, values=field.values.copy(), label=f"iterate-{stop:g}")
        if logger.isEnabledFor(logging.DEBUG):
            logger.debug("iterated substep [%.4g, %.4g]: %d generators", start, stop, len(family.generators))
    logger.info("iterated: k=%d, %d substeps to t=%g", k, steps.size - 1, t)
    return SolutionField(
        t=t,
        grid=grid,
        values=grid.crop(field.values, offsets),
        provenance=Provenance.iterated,
        meta={"k": k, "substeps": int(steps.size - 1), "dt": field.meta["dt"]},
        family=_crop_family(field.family, grid, offsets, work),
    )


# ----- Hopf formula -----


def legendre_concave_dual(
    u0,
    x_box: Sequence[Tuple[float, float]],
    p_box: Sequence[Tuple[float, float]],
    resolution: int,
) -> DualFunction:
    """u0*(p) = inf_x (p.x - u0(x)) by grid minimization, keeping only nodes where the infimum settles."""
    if resolution < 2:
        raise ArgumentError("dual resolution must be at least 2")
    if len(x_box) != len(p_box) or not x_box:
        raise ArgumentError("x and p boxes must share a nonzero dimension")
    if any(not hi > lo for lo, hi in list(x_box) + list(p_box)):
        raise ArgumentError("dual boxes must be nonempty")
    d = len(x_box)
    xs = Grid.uniform([lo for lo, _ in x_box], [hi for _, hi in x_box], [resolution] * d)
    ps = Grid.uniform([lo for lo, _ in p_box], [hi for _, hi in p_box], [resolution] * d)
    X, P = xs.points(), ps.points()
    uX = np.asarray(u0(X), dtype=float)
    chunk = max(1, get_settings().node_chunk)

    values = np.empty(P.shape[0])
    keep = np.ones(P.shape[0], dtype=bool)
    for start in range(0, P.shape[0], chunk):
        obj = P[start:start + chunk] @ X.T - uX
        idx = np.argmin(obj, axis=1)
        best = obj[np.arange(obj.shape[0]), idx]
        values[start:start + chunk] = best
        cube = obj.reshape((obj.shape[0],) + xs.shape)
        where = np.unravel_index(idx, xs.shape)
        slack = 1e-9 * (1.0 + np.abs(best))
        for axis in range(d):
            for edge, inward in ((0, 1), (resolution - 1, -1)):
                sel = np.flatnonzero(where[axis] == edge)
                if sel.size == 0:
                    continue
                neighbour = [w[sel] for w in where]
                neighbour[axis] = neighbour[axis] + inward
                inner = cube[(sel,) + tuple(neighbour)]
                keep[start + sel] &= ~(inner - best[sel] > slack[sel])

    if not keep.any():
        raise EmptyDomainError("every dual node diverges on the x box")
    dropped = int((~keep).sum())
    if dropped:
        logger.warning("dual: dropped %d of %d p-nodes whose infimum escapes the x box", dropped, keep.size)
    return DualFunction(p_nodes=P[keep], values=values[keep], p_lower=ps.lower, p_upper=ps.upper)


def dual_family(dual: DualFunction) -> SemiConcaveFn:
    """Affine family {p.x - u0*(p)} indexed by the retained dual domain."""
    origin = np.zeros(dual.dim)
    generators = tuple(
        Generator(kind=GeneratorKind.affine, x0=origin, p=p.copy(), c=-float(v), label=f"dual[{i}]")
        for i, (p, v) in enumerate(zip(dual.p_nodes, dual.values))
    )
    L = float(np.max(np.linalg.norm(dual.p_nodes, axis=-1)))
    return SemiConcaveFn(generators=generators, B=0.0, L=L, label="dual")


def hopf_solution(model: HamiltonianModel, dual: DualFunction, t: float, grid: Grid) -> SolutionField:
    require_autonomous(model, "hopf_solution")
    _check_grid(model, grid)
    if t < 0:
        raise ArgumentError("t must be nonnegative")
    if dual.p_nodes.shape[0] == 0:
        raise EmptyDomainError("empty dual domain")
    if dual.dim != grid.dim:
        raise ArgumentError("dual and grid dimensions differ")
    settings = get_settings()
    X = grid.points()
    P = dual.p_nodes
    h = np.asarray(model.eval(t, np.zeros_like(P), P), dtype=float)
    offsets = dual.values + t * h

    values = np.empty(X.shape[0])
    argmin = np.empty(X.shape[0], dtype=int)
    for start in range(0, X.shape[0], settings.node_chunk):
        table = X[start:start + settings.node_chunk] @ P.T - offsets
        argmin[start:start + settings.node_chunk] = np.argmin(table, axis=1)
        values[start:start + settings.node_chunk] = table.min(axis=1)

    on_edge = np.isclose(P[argmin], dual.p_lower, atol=1e-12) | np.isclose(P[argmin], dual.p_upper, atol=1e-12)
    if on_edge.any():
        logger.warning(
            "hopf: minimizer on the p-box boundary at %d nodes; u0* + tH may not grow enough, widen the p box",
            int(on_edge.any(axis=-1).sum()),
        )

    family = None
    if P.shape[0] * X.shape[0] <= settings.family_limit:
        table = P @ X.T - offsets[:, None]
        family = EvolvedFamily(
            t=t,
            grid=grid,
            generator_ids=np.arange(P.shape[0]),
            values=table,
            grads=np.broadcast_to(P[:, None, :], (P.shape[0], X.shape[0], grid.dim)),
            eta=np.broadcast_to(-h[:, None], table.shape),
        )
    return SolutionField(
        t=t,
        grid=grid,
        values=values.reshape(grid.shape),
        provenance=Provenance.hopf,
        meta={"dual_nodes": int(P.shape[0])},
        family=family,
    )


# ----- Lax-Oleinik and finite differences -----


def lax_oleinik(
    model: HamiltonianModel,
    u0,
    t: float,
    grid: Grid,
    y_box: Optional[Tuple[float, float]] = None,
    resolution: int = 801,
    p_bound: Optional[float] = None,
) -> SolutionField:
    if model.convexity_tag is not ConvexityTag.convex:
        raise ContractError(f"lax_oleinik needs a convex-in-p Hamiltonian, '{model.name}' is {model.convexity_tag.value}")
    require_smooth(model, "lax_oleinik")
    require_autonomous(model, "lax_oleinik")
    _require_d1(grid, "lax_oleinik")
    if not t > 0:
        raise ArgumentError("lax_oleinik needs t > 0")
    if resolution < 2:
        raise ArgumentError("resolution must be at least 2")
    settings = get_settings()
    x = grid.axes()[0]
    L0 = float(u0.L) if isinstance(u0, SemiConcaveFn) else discrete_lipschitz(u0(grid.points()), grid)
    if y_box is None:
        padded, _ = grid.padded(padding_margin(model, L0, 0.0, t, grid))
        y_box = (padded.lower[0], padded.upper[0])
    y = np.linspace(y_box[0], y_box[1], resolution)
    uy = np.asarray(u0(y[:, None]), dtype=float)

    bound = L0 + 1.0 if p_bound is None else p_bound
    p = np.linspace(-bound, bound, resolution)
    hp = np.asarray(model.eval(t, np.zeros((resolution, 1)), p[:, None]), dtype=float)
    q = np.linspace((x[0] - y[-1]) / t, (x[-1] - y[0]) / t, resolution)
    lagrangian = np.max(q[:, None] * p[None, :] - hp[None, :], axis=1)

    values = np.empty(x.size)
    for start in range(0, x.size, settings.node_chunk):
        xs = x[start:start + settings.node_chunk]
        velocity = (xs[:, None] - y[None, :]) / t
        values[start:start + settings.node_chunk] = np.min(uy[None, :] + t * np.interp(velocity, q, lagrangian), axis=1)
    return SolutionField(
        t=t,
        grid=grid,
        values=values.reshape(grid.shape),
        provenance=Provenance.lax_oleinik,
        meta={"resolution": resolution, "p_bound": bound, "y_box": list(y_box)},
    )


def fd_viscosity_oracle(
    model: HamiltonianModel,
    u0,
    t: float,
    grid: Grid,
    cfl: float = 0.5,
    t0: float = 0.0,
) -> SolutionField:
    """Monotone Lax-Friedrichs scheme with linearly extrapolated ghost nodes on a padded grid."""
    require_smooth(model, "fd_viscosity_oracle")
    _require_d1(grid, "fd_viscosity_oracle")
    if not 0 < cfl <= 1:
        raise ArgumentError("cfl must lie in (0, 1]")
    if t < t0:
        raise ArgumentError("solutions are computed forward in time")
    L0 = float(u0.L) if isinstance(u0, SemiConcaveFn) else discrete_lipschitz(u0(grid.points()), grid)
    work, offsets = grid.padded(padding_margin(model, L0, t0, t, grid) + 4.0 * float(grid.spacing[0]))
    x = work.axes()[0]
    h = float(work.spacing[0])
    sample_x = x[:: max(1, x.size // 64)]
    u = np.asarray(u0(work.points()), dtype=float)

    time, steps, alpha_max = t0, 0, 0.0
    while time < t - 1e-12 * max(1.0, abs(t)):
        ghost = np.concatenate([[2 * u[0] - u[1]], u, [2 * u[-1] - u[-2]]])
        backward = (u - ghost[:-2]) / h
        forward = (ghost[2:] - u) / h
        lo = min(backward.min(), forward.min())
        hi = max(backward.max(), forward.max())
        sample_p = np.linspace(lo, hi, 65)
        speeds = model.grad_p(time, sample_x[:, None, None], sample_p[None, :, None])
        alpha = max(float(np.max(np.abs(speeds))), 1e-12)
        alpha_max = max(alpha_max, alpha)
        step = min(cfl * h / alpha, t - time)
        hamiltonian = model.eval(time, x[:, None], (0.5 * (backward + forward))[:, None])
        u = u - step * (hamiltonian - 0.5 * alpha * (forward - backward))
        if not np.all(np.isfinite(u)) or np.max(np.abs(u)) > 1e150:
            raise StabilityError(f"finite-difference values overflowed at t={time:.6g}")
        time += step
        steps += 1
    logger.info("fd-oracle: %d steps, max viscosity coefficient %.3g", steps, alpha_max)
    return SolutionField(
        t=t,
        grid=grid,
        values=grid.crop(u, offsets),
        provenance=Provenance.fd_oracle,
        meta={"cfl": cfl, "steps": steps, "alpha_max": alpha_max},
    )


# ----- comparison -----


def _rank(field: SolutionField) -> int:
    if field.provenance in _VISCOSITY_CLASS:
        return 0
    return 1 if field.provenance is Provenance.variational else 2


def compare_solutions(fields: Sequence[SolutionField], tol: float) -> OrderingReport:
    """Check v <= g <= inf-family pairwise; fields of the same class are expected to agree."""
    if not fields:
        raise ArgumentError("nothing to compare")
    reference = fields[0]
    for other in fields[1:]:
        if not other.grid.matches(reference.grid) or other.t != reference.t:
            raise ArgumentError(f"{other.label} is not on the grid/time of {reference.label}")
    pairs: List[OrderingPair] = []
    for i, first in enumerate(fields):
        for second in fields[i + 1:]:
            lower, upper = (first, second) if _rank(first) <= _rank(second) else (second, first)
            difference = lower.values - upper.values
            if _rank(lower) == _rank(upper):
                relation, violation = "==", float(np.max(np.abs(difference)))
            else:
                relation, violation = "<=", max(float(np.max(difference)), 0.0)
            pairs.append(
                OrderingPair(
                    lower=lower.label,
                    upper=upper.label,
                    relation=relation,
                    max_violation=violation,
                    max_abs_difference=float(np.max(np.abs(difference))),
                    passed=violation <= tol,
                )
            )
    return OrderingReport(t=reference.t, tol=tol, pairs=pairs)


def semigroup_inequality_check(
    model: HamiltonianModel,
    u0: InitialData,
    times: Tuple[float, float, float],
    grid: Grid,
    dt: Optional[float] = None,
    tol: float = 2e-2,
) -> SemigroupReport:
    """Compare G(s1->s2) G(s0->s1) u0 against G(s0->s2) u0 on the grid."""
    s0, s1, s2 = (float(s) for s in times)
    if not (s0 <= s1 <= s2 and s0 < s2):
        raise ArgumentError("semigroup check needs s0 <= s1 <= s2 with s0 < s2")
    _require_d1(grid, "semigroup_inequality_check")
    right = variational_solution(model, u0, s2, grid, dt, t0=s0)
    if s1 == s0:
        left_values = right.values
    else:
        work, offsets = grid.padded(padding_margin(model, _initial_lipschitz(u0), s1, s2, grid))
        first = variational_solution(model, u0, s1, work, dt, t0=s0)
        middle = SampledData(grid=work, values=first.values.copy(), label=f"G[{s0:g},{s1:g}]")
        left_values = variational_solution(model, middle, s2, grid, dt, t0=s1).values
    difference = left_values - right.values
    violation = max(float(np.max(difference)), 0.0)
    return SemigroupReport(
        times=(s0, s1, s2),
        max_violation=violation,
        max_abs_difference=float(np.max(np.abs(difference))),
        tol=tol,
        passed=violation <= tol,
    )
