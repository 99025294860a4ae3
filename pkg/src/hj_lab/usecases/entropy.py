"""
Generalized entropy conditions.

A semi-concave solution is the viscosity solution when, at every (t, x),
H(t, x, .) stays below its convex envelope built on the extreme spatial
gradients; a strict failure of the concave-envelope condition disproves it.
The extreme set used is always the projection of the space-time extreme set,
which can be larger than the extreme set of the time slice.
"""
from __future__ import annotations

import itertools
import logging
from typing import List, Optional, Union

import numpy as np

from hj_lab.core.config import get_settings
from hj_lab.core.errors import ArgumentError, CapabilityError, EnvelopeInfeasibleError, OrientationError
from hj_lab.domain.models import EntropyReport, EnvelopeMode, ShockClassification, TwoBranchReport
from hj_lab.domain.types import Array, EnvelopeQuery, EvolvedFamily, HamiltonianModel, SolutionField, SuperDifferential
from hj_lab.usecases.hamiltonian import eval_h, require_autonomous
from hj_lab.usecases.semiconcave import cluster_points, family_superdifferential

logger = logging.getLogger(__name__)

_FEASIBILITY = 1e-12


def extreme_spatial_gradients(sd: SuperDifferential, cluster_tol: Optional[float] = None) -> Array:
    tol = get_settings().cluster_tol if cluster_tol is None else cluster_tol
    p = sd.p[sd.extreme]
    return p[cluster_points(p, tol)]


def _mode(mode: Union[str, EnvelopeMode]) -> EnvelopeMode:
    return mode if isinstance(mode, EnvelopeMode) else EnvelopeMode(mode)


def envelope_value(q: EnvelopeQuery) -> float:
    """Optimum of sum a_i H_i over convex combinations of at most d+1 points equal to the query."""
    points = np.asarray(q.points, dtype=float)
    if points.ndim == 1:
        points = points[:, None]
    values = np.asarray(q.values, dtype=float)
    query = np.atleast_1d(np.asarray(q.query, dtype=float))
    if points.shape[0] != values.shape[0] or points.shape[1] != query.shape[0]:
        raise ArgumentError("envelope points, values and query disagree in shape")
    if points.shape[1] not in (1, 2):
        raise ArgumentError("envelopes are implemented for d=1 and d=2")
    candidates = _combinations_1d(points[:, 0], values, query[0]) if points.shape[1] == 1 else _combinations_2d(points, values, query)
    if not candidates:
        raise EnvelopeInfeasibleError(f"query {query.tolist()} lies outside the hull of the envelope points")
    return float(min(candidates) if _mode(q.mode) is EnvelopeMode.convex else max(candidates))


def _combinations_1d(p: Array, h: Array, query: float) -> List[float]:
    scale = 1.0 + np.max(np.abs(p))
    out = [float(v) for v in h[np.abs(p - query) <= _FEASIBILITY * scale]]
    for i, j in itertools.combinations(range(p.size), 2):
        lo, hi = (i, j) if p[i] < p[j] else (j, i)
        if p[lo] == p[hi] or not p[lo] <= query <= p[hi]:
            continue
        s = (p[hi] - query) / (p[hi] - p[lo])
        out.append(float(s * h[lo] + (1.0 - s) * h[hi]))
    return out


def _combinations_2d(p: Array, h: Array, query: Array) -> List[float]:
    scale = 1.0 + np.max(np.abs(p))
    tol = _FEASIBILITY * scale
    out = [float(v) for v in h[np.linalg.norm(p - query, axis=1) <= tol]]
    for i, j in itertools.combinations(range(p.shape[0]), 2):
        edge = p[j] - p[i]
        length2 = float(edge @ edge)
        if length2 == 0:
            continue
        s = float((query - p[i]) @ edge) / length2
        if -tol <= s <= 1 + tol and np.linalg.norm(p[i] + s * edge - query) <= tol:
            s = min(max(s, 0.0), 1.0)
            out.append(float((1.0 - s) * h[i] + s * h[j]))
    for i, j, k in itertools.combinations(range(p.shape[0]), 3):
        system = np.array([[p[i, 0], p[j, 0], p[k, 0]], [p[i, 1], p[j, 1], p[k, 1]], [1.0, 1.0, 1.0]])
        if abs(np.linalg.det(system)) <= tol:
            continue
        weights = np.linalg.solve(system, np.array([query[0], query[1], 1.0]))
        if np.all(weights >= -tol):
            out.append(float(weights @ h[[i, j, k]]))
    return out


def hull_samples(sd: SuperDifferential, samples: int) -> Array:
    """Uniform samples of the spatial hull: an interval sweep in d=1, barycentric lattices over a fan in d=2."""
    if sd.dim == 1:
        lo, hi = sd.interval
        return np.linspace(lo, hi, samples)[:, None]
    hull = sd.hull
    if hull.shape[0] == 1:
        return hull.copy()
    if hull.shape[0] == 2:
        s = np.linspace(0.0, 1.0, samples)[:, None]
        return (1.0 - s) * hull[0] + s * hull[1]
    n = samples - 1
    lattice = np.array([(a, b, n - a - b) for a in range(n + 1) for b in range(n + 1 - a)], dtype=float) / n
    points = []
    for k in range(1, hull.shape[0] - 1):
        corners = np.stack([hull[0], hull[k], hull[k + 1]])
        points.append(lattice @ corners)
    return np.unique(np.round(np.vstack(points), 14), axis=0)


def check_entropy_at(
    model: HamiltonianModel,
    t: float,
    x: Array,
    sd: SuperDifferential,
    mode: Union[str, EnvelopeMode] = EnvelopeMode.convex,
    samples: Optional[int] = None,
    tol: Optional[float] = None,
) -> EntropyReport:
    """Margins of the envelope of H over the extreme gradients against H on the superdifferential."""
    settings = get_settings()
    mode = _mode(mode)
    samples = settings.entropy_samples if samples is None else samples
    tol = settings.algebraic_tol if tol is None else tol
    x = np.atleast_1d(np.asarray(x, dtype=float))
    extreme = extreme_spatial_gradients(sd)
    if extreme.shape[0] == 0:
        raise ArgumentError("the extreme set is empty")
    if extreme.shape[0] == 1:
        return EntropyReport(
            t=t, x=x.tolist(), mode=mode, extreme=extreme.tolist(), tol=tol, passed=True, certificate="vacuous"
        )

    h_extreme = np.atleast_1d(eval_h(model, t, np.broadcast_to(x, extreme.shape), extreme))
    covectors = hull_samples(sd, samples)
    h_at = np.atleast_1d(eval_h(model, t, np.broadcast_to(x, covectors.shape), covectors))
    margins = np.array(
        [
            envelope_value(EnvelopeQuery(points=extreme, values=h_extreme, query=p, mode=mode.value)) - h
            for p, h in zip(covectors, h_at)
        ]
    )
    worst = int(np.argmin(margins))
    passed = bool(margins[worst] >= -tol)
    if mode is EnvelopeMode.convex:
        certificate = "viscosity" if passed else "none"
    else:
        certificate = "none" if passed else "not-viscosity"
    return EntropyReport(
        t=t,
        x=x.tolist(),
        mode=mode,
        extreme=extreme.tolist(),
        samples=covectors.tolist(),
        margins=margins.tolist(),
        tol=tol,
        passed=passed,
        worst_margin=float(margins[worst]),
        worst_p=covectors[worst].tolist(),
        certificate=certificate,
    )


def check_two_branch(
    model: HamiltonianModel,
    t: float,
    x: Array,
    p_minus: Array,
    p_plus: Array,
    s_samples: int = 33,
    tol: Optional[float] = None,
) -> TwoBranchReport:
    """Chord condition H(s p- + (1-s) p+) <= s H(p-) + (1-s) H(p+) on a uniform s grid."""
    tol = get_settings().algebraic_tol if tol is None else tol
    x = np.atleast_1d(np.asarray(x, dtype=float))
    p_minus = np.atleast_1d(np.asarray(p_minus, dtype=float))
    p_plus = np.atleast_1d(np.asarray(p_plus, dtype=float))
    if np.array_equal(p_minus, p_plus):
        raise ArgumentError("the two branches must differ")
    if s_samples < 2:
        raise ArgumentError("s_samples must be at least 2")
    s = np.linspace(0.0, 1.0, s_samples)[:, None]
    chord_points = s * p_minus + (1.0 - s) * p_plus
    xs = np.broadcast_to(x, chord_points.shape)
    h_minus = eval_h(model, t, x, p_minus)
    h_plus = eval_h(model, t, x, p_plus)
    violation = np.atleast_1d(eval_h(model, t, xs, chord_points)) - (s[:, 0] * h_minus + (1.0 - s[:, 0]) * h_plus)
    worst = int(np.argmax(violation))
    return TwoBranchReport(
        t=t,
        x=x.tolist(),
        p_minus=p_minus.tolist(),
        p_plus=p_plus.tolist(),
        worst_s=float(s[worst, 0]),
        max_violation=float(violation[worst]),
        tol=tol,
        passed=bool(violation[worst] <= tol),
    )


def classify_shock_d1(
    model: HamiltonianModel,
    p_minus: float,
    p_plus: float,
    tol: Optional[float] = None,
    s_samples: int = 33,
) -> ShockClassification:
    """Rankine-Hugoniot speed and admissibility of a jump p- >= p+ of the conservation law for p = du/dx."""
    require_autonomous(model, "classify_shock_d1")
    if model.dim != 1:
        raise ArgumentError("shock classification is d=1 only")
    if p_minus < p_plus:
        raise OrientationError(f"expected p- >= p+ for semi-concave data, got p-={p_minus}, p+={p_plus}")
    origin = np.zeros(1)
    if p_minus == p_plus:
        speed = float(np.asarray(model.grad_p(0.0, origin, np.array([p_minus])))[0])
        return ShockClassification(p_minus=p_minus, p_plus=p_plus, speed=speed, admissible=True)
    h_minus = eval_h(model, 0.0, origin, np.array([p_minus]))
    h_plus = eval_h(model, 0.0, origin, np.array([p_plus]))
    chord = check_two_branch(model, 0.0, origin, p_minus, p_plus, s_samples, tol)
    return ShockClassification(
        p_minus=p_minus,
        p_plus=p_plus,
        speed=float((h_minus - h_plus) / (p_minus - p_plus)),
        admissible=chord.passed,
        chord=chord,
    )


def scan_field(
    model: HamiltonianModel,
    source: Union[SolutionField, EvolvedFamily],
    mode: Union[str, EnvelopeMode] = EnvelopeMode.convex,
    tol: Optional[float] = None,
    samples: Optional[int] = None,
) -> List[EntropyReport]:
    """Entropy check at every node with at least two extreme spatial gradients, in grid order."""
    family = source.family if isinstance(source, SolutionField) else source
    if family is None:
        label = source.label if isinstance(source, SolutionField) else "source"
        raise CapabilityError(f"{label} field carries no generating family; superdifferentials are unavailable")
    settings = get_settings()
    points = family.grid.points()
    mins = family.values.min(axis=0)
    active_counts = np.sum(family.values <= mins + settings.activation_tol, axis=0)
    reports: List[EntropyReport] = []
    for node in np.flatnonzero(active_counts >= 2):
        sd = family_superdifferential(family, int(node))
        if extreme_spatial_gradients(sd).shape[0] < 2:
            continue
        reports.append(check_entropy_at(model, family.t, points[node], sd, mode, samples, tol))
    failed = sum(not r.passed for r in reports)
    logger.info("entropy scan at t=%g: %d nonsmooth nodes, %d failing", family.t, len(reports), failed)
    return reports
