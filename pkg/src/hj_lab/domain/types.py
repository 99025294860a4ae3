"""
Numeric value objects. Everything here is immutable after construction and
vectorized over leading axes: points and covectors are arrays of shape (..., d).
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np
from numpy.polynomial import Polynomial

from hj_lab.core.errors import ArgumentError, StabilityError
from hj_lab.domain.models import ConvexityTag, GeneratorKind, GridSpec, Provenance

Array = np.ndarray
HamiltonianFn = Callable[[float, Array, Array], Array]


@dataclass(frozen=True)
class HamiltonianModel:
    """H(t, x, p) with its first derivatives and the Hypothesis 1 constant."""

    name: str
    dim: int
    eval: HamiltonianFn
    grad_x: HamiltonianFn
    grad_p: HamiltonianFn
    bound_A: float
    convexity_tag: ConvexityTag = ConvexityTag.unknown
    smooth: bool = True
    depends_on_tx: bool = False
    description: str = ""


@dataclass(frozen=True)
class Grid:
    """Rectangular space grid; node arrays are laid out with ``indexing="ij"``."""

    lower: Tuple[float, ...]
    upper: Tuple[float, ...]
    counts: Tuple[int, ...]

    @classmethod
    def from_spec(cls, spec: GridSpec) -> "Grid":
        return cls(
            lower=tuple(float(a.min) for a in spec.axes),
            upper=tuple(float(a.max) for a in spec.axes),
            counts=tuple(int(a.count) for a in spec.axes),
        )

    @classmethod
    def uniform(cls, lower: Sequence[float], upper: Sequence[float], counts: Sequence[int]) -> "Grid":
        return cls(tuple(float(v) for v in lower), tuple(float(v) for v in upper), tuple(int(c) for c in counts))

    @property
    def dim(self) -> int:
        return len(self.counts)

    @property
    def shape(self) -> Tuple[int, ...]:
        return self.counts

    @property
    def size(self) -> int:
        return int(np.prod(self.counts))

    @property
    def spacing(self) -> Array:
        return (np.asarray(self.upper) - np.asarray(self.lower)) / (np.asarray(self.counts) - 1)

    def axes(self) -> List[Array]:
        return [np.linspace(lo, hi, n) for lo, hi, n in zip(self.lower, self.upper, self.counts)]

    def mesh(self) -> Array:
        """Node coordinates with shape (*counts, d)."""
        return np.stack(np.meshgrid(*self.axes(), indexing="ij"), axis=-1)

    def points(self) -> Array:
        return self.mesh().reshape(-1, self.dim)

    def padded(self, margin: float) -> Tuple["Grid", Tuple[int, ...]]:
        """Extend by whole cells on every side; returns the new grid and the per-axis node offset."""
        h = self.spacing
        extra = tuple(int(np.ceil(max(margin, 0.0) / hi - 1e-9)) for hi in h)
        lower = tuple(lo - n * hi for lo, n, hi in zip(self.lower, extra, h))
        upper = tuple(up + n * hi for up, n, hi in zip(self.upper, extra, h))
        counts = tuple(c + 2 * n for c, n in zip(self.counts, extra))
        return Grid(lower, upper, counts), extra

    def crop(self, values: Array, offsets: Tuple[int, ...]) -> Array:
        """Inverse of :meth:`padded` for node arrays laid out on the padded grid."""
        index = tuple(slice(o, o + c) for o, c in zip(offsets, self.counts))
        return values[index]

    def matches(self, other: "Grid", tol: float = 1e-12) -> bool:
        return (
            self.counts == other.counts
            and np.allclose(self.lower, other.lower, atol=tol, rtol=0)
            and np.allclose(self.upper, other.upper, atol=tol, rtol=0)
        )


@dataclass(frozen=True)
class PhaseState:
    q: Array
    p: Array

    def __post_init__(self) -> None:
        if not (np.all(np.isfinite(self.q)) and np.all(np.isfinite(self.p))):
            raise ArgumentError("phase state coordinates must be finite")


@dataclass(frozen=True)
class CharacteristicArc:
    """One traced characteristic: times (m,), q and p (m, d), running action (m,)."""

    times: Array
    q: Array
    p: Array
    action: Array

    @property
    def final(self) -> PhaseState:
        return PhaseState(self.q[-1], self.p[-1])


@dataclass(frozen=True)
class SolutionPatch:
    """Characteristics launched from one generator, batched over launch points.

    ``q`` and ``p`` have shape (m, n, d) and ``action`` (m, n), where m is the
    number of recorded times (just the endpoints when history is not kept).
    """

    generator_id: int
    launch_points: Array
    launch_shape: Tuple[int, ...]
    times: Array
    q: Array
    p: Array
    action: Array
    caustic_time: float

    def arc(self, index: int) -> CharacteristicArc:
        return CharacteristicArc(self.times, self.q[:, index], self.p[:, index], self.action[:, index])

    @property
    def final_q(self) -> Array:
        return self.q[-1]

    @property
    def final_p(self) -> Array:
        return self.p[-1]

    @property
    def final_values(self) -> Array:
        return self.action[-1]


@dataclass(frozen=True)
class PhiProfile:
    """Radial cap profile: psi is B on [0, 4L/B], tapers linearly to 0 at 5L/B.

    Psi and phi are its first and second primitives anchored at 0. The nodal
    table is kept for inspection; evaluation uses the exact piecewise integrals.
    """

    B: float
    L: float
    r_nodes: Array
    psi_nodes: Array
    Psi_nodes: Array
    phi_nodes: Array

    @property
    def plateau_end(self) -> float:
        return 4.0 * self.L / self.B

    @property
    def support_end(self) -> float:
        return 5.0 * self.L / self.B

    def psi(self, r: Array) -> Array:
        r = np.asarray(r, dtype=float)
        a, b = self.plateau_end, self.support_end
        taper = self.B * (b - r) / (b - a)
        return np.where(r <= a, self.B, np.where(r < b, taper, 0.0))

    def Psi(self, r: Array) -> Array:
        r = np.asarray(r, dtype=float)
        a, w = self.plateau_end, self.support_end - self.plateau_end
        s = np.clip(r - a, 0.0, w)
        return self.B * np.minimum(r, a) + self.B * (s - s**2 / (2.0 * w))

    def phi(self, r: Array) -> Array:
        r = np.asarray(r, dtype=float)
        a, b = self.plateau_end, self.support_end
        w = b - a
        s = np.clip(r - a, 0.0, w)
        tail = np.maximum(r - b, 0.0)
        head = np.minimum(r, a)
        Psi_a = self.B * a
        Psi_b = Psi_a + 0.5 * self.B * w
        return 0.5 * self.B * head**2 + Psi_a * s + self.B * (s**2 / 2.0 - s**3 / (6.0 * w)) + Psi_b * tail


@dataclass(frozen=True)
class Generator:
    """One C^2 member of a generating family.

    value(x) = c + p.(x - x0) + extra(x - x0) where extra is 0 (affine),
    phi(|x - x0|) (phi-cap), a quadratic form (quadratic) or a d=1 polynomial.
    """

    kind: GeneratorKind
    x0: Array
    p: Array
    c: float = 0.0
    profile: Optional[PhiProfile] = None
    hessian_matrix: Optional[Array] = None
    coefficients: Optional[Array] = None
    label: str = ""

    @property
    def dim(self) -> int:
        return int(self.x0.shape[0])

    def value(self, x: Array) -> Array:
        y = np.asarray(x, dtype=float) - self.x0
        base = self.c + y @ self.p
        if self.kind is GeneratorKind.affine:
            return base
        if self.kind is GeneratorKind.phi_cap:
            return base + self.profile.phi(np.linalg.norm(y, axis=-1))
        if self.kind is GeneratorKind.quadratic:
            return base + 0.5 * np.einsum("...i,ij,...j->...", y, self.hessian_matrix, y)
        return base + Polynomial(self.coefficients)(y[..., 0])

    def gradient(self, x: Array) -> Array:
        y = np.asarray(x, dtype=float) - self.x0
        base = np.broadcast_to(self.p, y.shape).astype(float)
        if self.kind is GeneratorKind.affine:
            return base.copy()
        if self.kind is GeneratorKind.phi_cap:
            r = np.linalg.norm(y, axis=-1, keepdims=True)
            safe = np.where(r > 0, r, 1.0)
            return base + np.where(r > 0, self.profile.Psi(r) * y / safe, 0.0)
        if self.kind is GeneratorKind.quadratic:
            return base + y @ self.hessian_matrix.T
        return base + Polynomial(self.coefficients).deriv()(y[..., :1])

    def hessian(self, x: Array) -> Array:
        y = np.asarray(x, dtype=float) - self.x0
        d = self.dim
        eye = np.eye(d)
        if self.kind is GeneratorKind.affine:
            return np.zeros(y.shape[:-1] + (d, d))
        if self.kind is GeneratorKind.quadratic:
            return np.broadcast_to(self.hessian_matrix, y.shape[:-1] + (d, d)).copy()
        if self.kind is GeneratorKind.poly:
            second = Polynomial(self.coefficients).deriv(2)(y[..., 0])
            return second[..., None, None] * np.ones((1, 1))
        r = np.linalg.norm(y, axis=-1)
        safe = np.where(r > 0, r, 1.0)
        e = y / safe[..., None]
        radial = np.einsum("...i,...j->...ij", e, e)
        tangential = np.where(r > 0, self.profile.Psi(r) / safe, self.profile.B)
        out = self.profile.psi(r)[..., None, None] * radial + tangential[..., None, None] * (eye - radial)
        return np.where((r > 0)[..., None, None], out, self.profile.B * eye)


@dataclass(frozen=True)
class SemiConcaveFn:
    """Pointwise minimum of finitely many generators, with its B and L constants."""

    generators: Tuple[Generator, ...]
    B: float
    L: float
    label: str = ""

    def __post_init__(self) -> None:
        if not self.generators:
            raise ArgumentError("a semi-concave function needs at least one generator")

    @property
    def dim(self) -> int:
        return self.generators[0].dim

    def values(self, x: Array) -> Array:
        return np.stack([g.value(x) for g in self.generators])

    def __call__(self, x: Array) -> Array:
        return self.values(x).min(axis=0)


@dataclass(frozen=True)
class SampledData:
    """Initial data known only at the nodes of a d=1 grid.

    Evaluation is piecewise linear, extended linearly past both ends.
    """

    grid: Grid
    values: Array
    label: str = "sampled"

    def __call__(self, x: Array) -> Array:
        s = np.asarray(x, dtype=float)[..., 0]
        axis = self.grid.axes()[0]
        h = float(self.grid.spacing[0])
        inner = np.interp(s, axis, self.values)
        left = self.values[0] + (s - axis[0]) * (self.values[1] - self.values[0]) / h
        right = self.values[-1] + (s - axis[-1]) * (self.values[-1] - self.values[-2]) / h
        return np.where(s < axis[0], left, np.where(s > axis[-1], right, inner))


@dataclass(frozen=True)
class SuperDifferential:
    """Clustered active gradients at one point and their convex hull.

    ``p`` has shape (m, d); ``eta`` holds the matching time slopes for
    space-time points and is ``None`` for time slices. ``hull`` lists the
    p-hull vertices in order (d=1: [lower, upper]; d=2: counter-clockwise).
    """

    p: Array
    eta: Optional[Array]
    extreme: Array
    hull: Array

    @property
    def dim(self) -> int:
        return int(self.p.shape[1])

    @property
    def vertices(self) -> Array:
        if self.eta is None:
            return self.p
        return np.column_stack([self.eta, self.p])

    @property
    def interval(self) -> Tuple[float, float]:
        return float(self.hull[0, 0]), float(self.hull[-1, 0])

    @property
    def is_singleton(self) -> bool:
        return self.p.shape[0] == 1


@dataclass(frozen=True)
class EnvelopeQuery:
    points: Array
    values: Array
    query: Array
    mode: str = "convex"


@dataclass(frozen=True)
class EvolvedFamily:
    """Per-generator values, gradients and time slopes on the nodes of a grid at time t.

    Arrays are flattened over nodes: values (G, N), grads (G, N, d), eta (G, N).
    Nodes a generator's characteristics never reach hold +inf.
    """

    t: float
    grid: Grid
    generator_ids: Array
    values: Array
    grads: Array
    eta: Array

    def minimum(self) -> Array:
        return self.values.min(axis=0)


@dataclass(frozen=True)
class SolutionField:
    t: float
    grid: Grid
    values: Array
    provenance: Provenance
    meta: Dict[str, Any] = field(default_factory=dict)
    family: Optional[EvolvedFamily] = None

    def __post_init__(self) -> None:
        if self.values.shape != self.grid.shape:
            raise ArgumentError(f"field shape {self.values.shape} does not match grid {self.grid.shape}")
        if not np.all(np.isfinite(self.values)):
            raise StabilityError(f"{self.provenance.value} field contains non-finite values")

    @property
    def label(self) -> str:
        if self.provenance is Provenance.iterated:
            return f"iterated-{self.meta.get('k', '?')}"
        return self.provenance.value


@dataclass(frozen=True)
class DualFunction:
    """Concave Legendre dual sampled on its retained effective domain."""

    p_nodes: Array
    values: Array
    p_lower: Tuple[float, ...]
    p_upper: Tuple[float, ...]

    @property
    def dim(self) -> int:
        return int(self.p_nodes.shape[1])
