"""
Semi-concave functions as finite minima of C^2 generators.

Holds the phi-cap construction used to rebuild a generating family from a
semi-concave function, evaluation of the minimum with its active set, and the
superdifferential machinery (active gradients, hull, extreme points).
"""
from __future__ import annotations

import logging
from typing import Callable, FrozenSet, List, Optional, Sequence, Tuple, Union

import numpy as np
from scipy.optimize import linprog

from hj_lab.core.config import get_settings
from hj_lab.core.errors import ArgumentError
from hj_lab.domain.models import GeneratorKind
from hj_lab.domain.types import Array, EvolvedFamily, Generator, Grid, PhiProfile, SampledData, SemiConcaveFn, SuperDifferential

logger = logging.getLogger(__name__)

SupergradientOracle = Callable[[Array], Array]


# ----- phi profile -----


def build_phi(B: float, L: float, samples: int = 257) -> PhiProfile:
    if not (B > 0 and L > 0):
        raise ArgumentError(f"build_phi needs B > 0 and L > 0, got B={B}, L={L}")
    if samples < 2:
        raise ArgumentError("build_phi needs at least 2 samples")
    shell = PhiProfile(B=float(B), L=float(L), r_nodes=np.empty(0), psi_nodes=np.empty(0), Psi_nodes=np.empty(0), phi_nodes=np.empty(0))
    r = np.linspace(0.0, 1.5 * shell.support_end, samples)
    return PhiProfile(
        B=float(B),
        L=float(L),
        r_nodes=r,
        psi_nodes=shell.psi(r),
        Psi_nodes=shell.Psi(r),
        phi_nodes=shell.phi(r),
    )


def hessian_norm_radial(profile: PhiProfile, r: float) -> float:
    """Operator norm of the Hessian of x -> phi(|x|) at radius r."""
    if r < 0:
        raise ArgumentError("radius must be nonnegative")
    if r == 0:
        return float(profile.B)
    return float(max(abs(profile.psi(r)), abs(profile.Psi(r)) / r))


# ----- evaluation -----


def eval_min(fn: SemiConcaveFn, x: Array) -> Tuple[float, FrozenSet[int]]:
    x = np.asarray(x, dtype=float).reshape(fn.dim)
    values = fn.values(x)
    best = float(values.min())
    tol = get_settings().activation_tol
    return best, frozenset(int(i) for i in np.flatnonzero(values <= best + tol))


def generator_bounds(gen: Generator, box: Grid) -> Tuple[float, float]:
    """Sampled sup |df| and sup ||d^2 f|| of a generator by central differences."""
    step = get_settings().fd_step
    x = box.points()
    d = gen.dim
    basis = np.eye(d) * step
    grad = np.stack([(gen.value(x + e) - gen.value(x - e)) / (2 * step) for e in basis], axis=-1)
    hess = np.empty(x.shape[:-1] + (d, d))
    center = gen.value(x)
    for i in range(d):
        hess[:, i, i] = (gen.value(x + basis[i]) - 2 * center + gen.value(x - basis[i])) / step**2
        for j in range(i + 1, d):
            mixed = (
                gen.value(x + basis[i] + basis[j])
                - gen.value(x + basis[i] - basis[j])
                - gen.value(x - basis[i] + basis[j])
                + gen.value(x - basis[i] - basis[j])
            ) / (4 * step**2)
            hess[:, i, j] = hess[:, j, i] = mixed
    return float(np.max(np.linalg.norm(grad, axis=-1))), float(np.max(np.linalg.norm(hess, ord=2, axis=(-2, -1))))


def semiconcavity_defect(
    u: Callable[[Array], Array],
    B: float,
    lower: Sequence[float],
    upper: Sequence[float],
    pairs: int = 1000,
    seed: int = 0,
) -> float:
    """Largest midpoint-concavity defect of x -> u(x) - B|x|^2/2 over random pairs in a box.

    Nonpositive (up to rounding) for a B-semi-concave u.
    """
    rng = np.random.default_rng(seed)
    lower = np.asarray(lower, dtype=float)
    upper = np.asarray(upper, dtype=float)
    a = rng.uniform(lower, upper, size=(pairs, lower.size))
    b = rng.uniform(lower, upper, size=(pairs, lower.size))

    def w(z: Array) -> Array:
        return u(z) - 0.5 * B * np.sum(z * z, axis=-1)

    defect = 0.5 * (w(a) + w(b)) - w(0.5 * (a + b))
    return float(defect.max())


# ----- hulls and extreme points -----


def cluster_points(points: Array, tol: float) -> Array:
    """Indices of greedy representatives: a point joins the first kept one within tol."""
    kept: List[int] = []
    for i, point in enumerate(points):
        if not any(np.linalg.norm(point - points[k]) <= tol for k in kept):
            kept.append(i)
    return np.asarray(kept, dtype=int)


def convex_hull_2d(points: Array) -> Array:
    """Counter-clockwise hull vertices (monotone chain); collinear points are dropped."""
    pts = np.unique(np.asarray(points, dtype=float), axis=0)
    if pts.shape[0] <= 2:
        return pts

    def cross(o: Array, a: Array, b: Array) -> float:
        return (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])

    lower: List[Array] = []
    for point in pts:
        while len(lower) >= 2 and cross(lower[-2], lower[-1], point) <= 0:
            lower.pop()
        lower.append(point)
    upper: List[Array] = []
    for point in pts[::-1]:
        while len(upper) >= 2 and cross(upper[-2], upper[-1], point) <= 0:
            upper.pop()
        upper.append(point)
    hull = np.array(lower[:-1] + upper[:-1])
    if hull.shape[0] < 2:
        return pts[[0, -1]]
    return hull


def extreme_mask(vertices: Array) -> Array:
    """True where a vertex is not a convex combination of the others."""
    vertices = np.asarray(vertices, dtype=float)
    m = vertices.shape[0]
    if m <= 2:
        return np.ones(m, dtype=bool)
    if vertices.shape[1] == 1:
        column = vertices[:, 0]
        return (column == column.min()) | (column == column.max())
    mask = np.ones(m, dtype=bool)
    for i in range(m):
        others = np.delete(vertices, i, axis=0)
        a_eq = np.vstack([others.T, np.ones(m - 1)])
        b_eq = np.append(vertices[i], 1.0)
        result = linprog(np.zeros(m - 1), A_eq=a_eq, b_eq=b_eq, bounds=(0, None), method="highs")
        mask[i] = result.status != 0
    return mask


def _p_hull(p: Array) -> Array:
    if p.shape[1] == 1:
        return np.array([[p[:, 0].min()], [p[:, 0].max()]])
    return convex_hull_2d(p)


def superdifferential_from_gradients(
    grads: Array,
    eta: Optional[Array] = None,
    cluster_tol: Optional[float] = None,
) -> SuperDifferential:
    """Merge nearby active gradients and describe their hull.

    With ``eta`` the vertices live in (eta, p) space and extremality is tested
    there; without it they are spatial covectors of a time slice.
    """
    tol = get_settings().cluster_tol if cluster_tol is None else cluster_tol
    if tol <= 0:
        raise ArgumentError("cluster_tol must be positive")
    grads = np.asarray(grads, dtype=float)
    keep = cluster_points(grads, tol)
    p = grads[keep]
    slopes = None if eta is None else np.asarray(eta, dtype=float)[keep]
    vertices = p if slopes is None else np.column_stack([slopes, p])
    return SuperDifferential(p=p, eta=slopes, extreme=extreme_mask(vertices), hull=_p_hull(p))


def superdifferential(fn: SemiConcaveFn, x: Array, cluster_tol: Optional[float] = None) -> SuperDifferential:
    x = np.asarray(x, dtype=float).reshape(fn.dim)
    _, active = eval_min(fn, x)
    grads = np.stack([fn.generators[i].gradient(x) for i in sorted(active)])
    return superdifferential_from_gradients(grads, cluster_tol=cluster_tol)


def family_superdifferential(family: EvolvedFamily, node: int, cluster_tol: Optional[float] = None) -> SuperDifferential:
    """Space-time superdifferential of an evolved family at one grid node."""
    column = family.values[:, node]
    active = np.flatnonzero(column <= column.min() + get_settings().activation_tol)
    return superdifferential_from_gradients(family.grads[active, node], family.eta[active, node], cluster_tol)


def sample_hull(sd: SuperDifferential, samples: int) -> Array:
    """Representative points of the hull: a uniform sweep in d=1, vertices plus centroid in d=2."""
    if sd.is_singleton or samples <= 1:
        return sd.p[:1] if samples <= 1 else sd.p
    if sd.dim == 1:
        lo, hi = sd.interval
        return np.linspace(lo, hi, samples)[:, None]
    hull = sd.hull
    if samples >= 3 and hull.shape[0] >= 3:
        return np.vstack([hull, hull.mean(axis=0, keepdims=True)])
    return hull


# ----- supergradient oracles and the phi-cap family -----


def fn_oracle(fn: SemiConcaveFn, samples: Optional[int] = None) -> SupergradientOracle:
    count = get_settings().hull_samples if samples is None else samples

    def oracle(x: Array) -> Array:
        return sample_hull(superdifferential(fn, x), count)

    return oracle


def one_sided_slopes(values: Array, spacing: float) -> Tuple[Array, Array]:
    """(right, left) difference quotients at every node; edges reuse their only neighbour."""
    diff = np.diff(values) / spacing
    right = np.append(diff, diff[-1])
    left = np.insert(diff, 0, diff[0])
    return right, left


def sampled_oracle(data: SampledData, samples: Optional[int] = None) -> SupergradientOracle:
    """Du at a node of sampled d=1 data: the interval between its one-sided slopes."""
    settings = get_settings()
    count = settings.hull_samples if samples is None else samples
    axis = data.grid.axes()[0]
    right, left = one_sided_slopes(np.asarray(data.values, dtype=float), float(data.grid.spacing[0]))

    def oracle(x: Array) -> Array:
        i = int(np.argmin(np.abs(axis - float(np.asarray(x).reshape(-1)[0]))))
        lo, hi = sorted((right[i], left[i]))
        if hi - lo <= settings.cluster_tol:
            return np.array([[0.5 * (lo + hi)]])
        return np.linspace(lo, hi, max(count, 2))[:, None]

    return oracle


def estimate_constants(values: Array, grid: Grid) -> Tuple[float, float]:
    """(B, L) of d=1 nodal data from second and first differences, clamped to the configured range."""
    if grid.dim != 1:
        raise ArgumentError("constant estimation from samples is d=1 only")
    h = float(grid.spacing[0])
    values = np.asarray(values, dtype=float)
    L = float(np.max(np.abs(np.diff(values)))) / h
    B = float(np.max(np.diff(values, n=2), initial=0.0)) / h**2
    return clamp_constant(B), clamp_constant(L)


def clamp_constant(value: float) -> float:
    settings = get_settings()
    clamped = min(max(value, settings.constant_floor), settings.constant_ceiling)
    if value > settings.constant_ceiling:
        logger.warning("constant %.3g clamped to %.3g", value, clamped)
    return clamped


def build_family_f0(
    u: Union[SemiConcaveFn, SampledData, Callable[[Array], Array]],
    sites: Array,
    B: float,
    L: float,
    oracle: Optional[SupergradientOracle] = None,
    label: str = "F0",
) -> SemiConcaveFn:
    """Phi-cap family {u(x0) + p.(x - x0) + phi(|x - x0|)} over sites x0 and p in Du(x0)."""
    sites = np.asarray(sites, dtype=float)
    if sites.ndim != 2 or sites.shape[0] == 0:
        raise ArgumentError("build_family_f0 needs a nonempty (n, d) site array")
    if oracle is None:
        if isinstance(u, SemiConcaveFn):
            oracle = fn_oracle(u)
        elif isinstance(u, SampledData):
            oracle = sampled_oracle(u)
        else:
            raise ArgumentError("a supergradient oracle is required for plain callables")
    profile = build_phi(B, L)
    anchor = np.asarray(u(sites), dtype=float)
    generators = [
        Generator(kind=GeneratorKind.phi_cap, x0=site, p=np.asarray(p, dtype=float), c=float(value), profile=profile)
        for site, value in zip(sites, anchor)
        for p in oracle(site)
    ]
    logger.debug("built phi-cap family: %d sites, %d generators", sites.shape[0], len(generators))
    return SemiConcaveFn(generators=tuple(generators), B=float(B), L=float(L), label=label)
