"""
Characteristics of the Hamilton-Jacobi equation.

The Hamiltonian system is integrated with the convention

    dq/dt = dH/dp,   dp/dt = -dH/dq,   da/dt = p . dH/dp - H,

where ``a`` is the running action, so that along an arc launched from a C^2
solution f we have p(t) = d_x f(t, q(t)) and f(t, q(t)) = a(t).
"""
from __future__ import annotations

import logging
import math
from typing import Callable, List, Optional, Sequence, Tuple

import numpy as np

from hj_lab.core.config import get_settings
from hj_lab.core.errors import ArgumentError, BlowUpError
from hj_lab.domain.types import Array, CharacteristicArc, Generator, Grid, HamiltonianModel, PhaseState, SolutionPatch
from hj_lab.usecases.hamiltonian import require_smooth

logger = logging.getLogger(__name__)

Observer = Callable[[float, Array, Array], None]


def lipschitz_bound(L0: float, A: float, t: float) -> float:
    if L0 < 0 or A < 0 or t < 0:
        raise ArgumentError("lipschitz_bound needs L0, A, t >= 0")
    return (L0 + 1.0) * math.exp(A * t) - 1.0


def time_derivative_bound(L0: float, A: float, t: float) -> float:
    """Bound on |d_t f| and on the sup-distance ||G^t u - u|| / t."""
    return A * ((L0 + 1.0) * math.exp(A * t)) ** 2


def step_times(t0: float, t1: float, dt: float) -> Array:
    n = max(1, int(math.ceil((t1 - t0) / dt - 1e-9)))
    times = t0 + dt * np.arange(n + 1, dtype=float)
    times[-1] = t1
    return times


def _rk4_flow(
    model: HamiltonianModel,
    q: Array,
    p: Array,
    action: Array,
    t0: float,
    t1: float,
    dt: float,
    record: bool,
    observer: Optional[Observer] = None,
) -> Tuple[Array, Array, Array, Array]:
    """Classical 4-stage integration batched over leading axes.

    Returns (times, q, p, action) with a leading time axis holding every step
    when ``record`` is set, otherwise just the endpoints.
    """

    def rhs(t: float, q: Array, p: Array) -> Tuple[Array, Array, Array]:
        hp = model.grad_p(t, q, p)
        hx = model.grad_x(t, q, p)
        da = np.sum(p * hp, axis=-1) - model.eval(t, q, p)
        return hp, -hx, da

    times = step_times(t0, t1, dt)
    hist_q, hist_p, hist_a = [q], [p], [action]
    for t, t_next in zip(times[:-1], times[1:]):
        h = t_next - t
        k1 = rhs(t, q, p)
        k2 = rhs(t + h / 2, q + h / 2 * k1[0], p + h / 2 * k1[1])
        k3 = rhs(t + h / 2, q + h / 2 * k2[0], p + h / 2 * k2[1])
        k4 = rhs(t + h, q + h * k3[0], p + h * k3[1])
        q_next = q + h / 6 * (k1[0] + 2 * k2[0] + 2 * k3[0] + k4[0])
        p_next = p + h / 6 * (k1[1] + 2 * k2[1] + 2 * k3[1] + k4[1])
        a_next = action + h / 6 * (k1[2] + 2 * k2[2] + 2 * k3[2] + k4[2])
        if not (np.all(np.isfinite(q_next)) and np.all(np.isfinite(p_next)) and np.all(np.isfinite(a_next))):
            raise BlowUpError("non-finite characteristic state", last_time=float(t))
        q, p, action = q_next, p_next, a_next
        if observer is not None:
            observer(float(t_next), q, p)
        if record:
            hist_q.append(q)
            hist_p.append(p)
            hist_a.append(action)
    if not record:
        hist_q.append(q)
        hist_p.append(p)
        hist_a.append(action)
        times = np.array([t0, t1], dtype=float)
    return times, np.stack(hist_q), np.stack(hist_p), np.stack(hist_a)


def integrate_hs(
    model: HamiltonianModel,
    s0: PhaseState,
    t0: float,
    t1: float,
    dt: float,
    action0: float = 0.0,
) -> CharacteristicArc:
    if dt <= 0:
        raise ArgumentError("dt must be positive")
    if not t1 > t0:
        raise ArgumentError("integrate_hs needs t1 > t0")
    require_smooth(model, "integrate_hs")
    q = np.asarray(s0.q, dtype=float)
    p = np.asarray(s0.p, dtype=float)
    if q.shape != (model.dim,) or p.shape != (model.dim,):
        raise ArgumentError(f"phase state must have dimension {model.dim}")
    times, qs, ps, actions = _rk4_flow(model, q, p, np.asarray(float(action0)), t0, t1, dt, record=True)
    return CharacteristicArc(times=times, q=qs, p=ps, action=actions)


# ----- caustic detection -----


def jacobian_determinants(q: Array, launch_shape: Sequence[int], spacing: Sequence[float]) -> Array:
    """Finite-difference det(dq/dx0) for launch maps sampled on a tensor grid.

    ``q`` has shape (..., n, d) with n = prod(launch_shape); returns (..., n).
    """
    d = q.shape[-1]
    lead = q.shape[:-2]
    field = q.reshape(lead + tuple(launch_shape) + (d,))
    grid_axes = tuple(range(len(lead), len(lead) + d))
    jac = np.empty(lead + tuple(launch_shape) + (d, d))
    for i in range(d):
        grads = np.gradient(field[..., i], *spacing, axis=grid_axes)
        if d == 1:
            grads = [grads]
        for j in range(d):
            jac[..., i, j] = grads[j]
    return np.linalg.det(jac).reshape(lead + (-1,))


class CausticTracker:
    """Records, per leading index, the first time the launch-map Jacobian degenerates."""

    def __init__(self, initial_q: Array, launch_shape: Sequence[int], spacing: Sequence[float], t0: float, ratio: float):
        self.launch_shape = tuple(launch_shape)
        self.spacing = tuple(spacing)
        self.ratio = ratio
        self.det0 = jacobian_determinants(initial_q, self.launch_shape, self.spacing).min(axis=-1)
        self.previous = np.ones_like(self.det0)
        self.t_previous = t0
        self.times = np.full(self.det0.shape, np.inf)

    def observe(self, t: float, q: Array, p: Array) -> None:
        current = jacobian_determinants(q, self.launch_shape, self.spacing).min(axis=-1) / self.det0
        crossed = (current < self.ratio) & np.isinf(self.times)
        if np.any(crossed):
            fraction = (self.previous - self.ratio) / np.where(
                self.previous - current != 0, self.previous - current, 1.0
            )
            fraction = np.clip(fraction, 0.0, 1.0)
            self.times = np.where(crossed, self.t_previous + fraction * (t - self.t_previous), self.times)
        self.previous = current
        self.t_previous = t


# ----- generator evolution -----


def _check_launch(model: HamiltonianModel, launch_grid: Grid, t: float, t0: float, dt: float) -> None:
    require_smooth(model, "characteristic evolution")
    if launch_grid.dim != model.dim:
        raise ArgumentError(f"launch grid dimension {launch_grid.dim} does not match model dimension {model.dim}")
    if t < t0:
        raise ArgumentError("evolution runs forward in time only")
    if dt <= 0:
        raise ArgumentError("dt must be positive")


def evolve_generator(
    model: HamiltonianModel,
    gen: Generator,
    launch_grid: Grid,
    t: float,
    dt: float,
    t0: float = 0.0,
    generator_id: int = 0,
    keep_history: bool = True,
) -> SolutionPatch:
    _check_launch(model, launch_grid, t, t0, dt)
    return evolve_family(model, [gen], launch_grid, t, dt, t0, keep_history=keep_history, first_id=generator_id)[0]


def evolve_family(
    model: HamiltonianModel,
    generators: Sequence[Generator],
    launch_grid: Grid,
    t: float,
    dt: float,
    t0: float = 0.0,
    keep_history: bool = False,
    first_id: int = 0,
) -> List[SolutionPatch]:
    """Evolve every generator from the same launch grid in one batched integration."""
    _check_launch(model, launch_grid, t, t0, dt)
    settings = get_settings()
    points = launch_grid.points()
    p0 = np.stack([g.gradient(points) for g in generators])
    a0 = np.stack([g.value(points) for g in generators])
    q0 = np.broadcast_to(points, p0.shape).copy()

    if t == t0:
        times = np.array([t0])
        return [
            SolutionPatch(first_id + i, points, launch_grid.shape, times, q0[i][None], p0[i][None], a0[i][None], np.inf)
            for i in range(len(generators))
        ]

    spacing = launch_grid.spacing
    can_track = all(c >= 2 for c in launch_grid.counts)
    tracker = CausticTracker(q0, launch_grid.shape, spacing, t0, settings.caustic_ratio) if can_track else None
    logger.debug("evolving %d generators x %d launch points to t=%.4g", len(generators), points.shape[0], t)
    times, qs, ps, actions = _rk4_flow(
        model, q0, p0, a0, t0, t, dt, record=keep_history, observer=tracker.observe if tracker else None
    )
    caustics = tracker.times if tracker else np.full(len(generators), np.inf)
    return [
        SolutionPatch(
            generator_id=first_id + i,
            launch_points=points,
            launch_shape=launch_grid.shape,
            times=times,
            q=qs[:, i],
            p=ps[:, i],
            action=actions[:, i],
            caustic_time=float(caustics[i]),
        )
        for i in range(len(generators))
    ]


def caustic_time(patch: SolutionPatch) -> float:
    """First loss of injectivity of launch -> q(t), re-read from the recorded history when available."""
    if any(c < 2 for c in patch.launch_shape):
        raise ArgumentError("caustic detection needs at least 2 launch points per axis")
    if patch.times.shape[0] <= 2:
        return patch.caustic_time
    spacing = [
        (np.ptp(axis_values) / (count - 1))
        for axis_values, count in zip(patch.launch_points.T, patch.launch_shape)
    ]
    tracker = CausticTracker(patch.q[0], patch.launch_shape, spacing, float(patch.times[0]), get_settings().caustic_ratio)
    for t, q, p in zip(patch.times[1:], patch.q[1:], patch.p[1:]):
        tracker.observe(float(t), q, p)
    return float(tracker.times)


def speed_bound(model: HamiltonianModel, L0: float, t0: float, t1: float, grid: Grid, samples: int = 9) -> float:
    """Largest |dH/dp| over |p| below the Lipschitz bound on [t0, t1] and the grid box.

    For H = H(p) momenta are constant along characteristics, so |p| <= L0.
    """
    Lt = lipschitz_bound(L0, model.bound_A, max(t1 - t0, 0.0)) if model.depends_on_tx else L0
    axes = [np.linspace(-Lt, Lt, samples)] * model.dim
    ps = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, model.dim)
    xs = Grid(grid.lower, grid.upper, tuple(min(c, samples) for c in grid.counts)).points()
    best = 0.0
    for t in (t0, t1):
        speeds = np.linalg.norm(model.grad_p(t, xs[:, None, :], ps[None, :, :]), axis=-1)
        best = max(best, float(np.max(speeds)))
    return best
