"""
Built-in Hamiltonian library addressable by string id.
"""
from __future__ import annotations

from typing import Any, Callable, Dict, Iterable, Tuple

import numpy as np
from numpy.polynomial import Polynomial

from hj_lab.core.errors import ArgumentError, ConfigError
from hj_lab.domain.models import ConvexityTag
from hj_lab.domain.types import Array, HamiltonianModel


def _broadcast(x: Array, p: Array) -> Tuple[Array, Array]:
    x, p = np.broadcast_arrays(np.asarray(x, dtype=float), np.asarray(p, dtype=float))
    return x, p


def _sq(p: Array) -> Array:
    return np.sum(p * p, axis=-1)


def _zeros_like(x: Array, p: Array) -> Array:
    return np.zeros(np.broadcast_shapes(np.shape(x), np.shape(p)))


def quadratic(dim: int, sign: float = 1.0) -> HamiltonianModel:
    name = "quadratic" if sign > 0 else "neg-quadratic"
    return HamiltonianModel(
        name=name,
        dim=dim,
        eval=lambda t, x, p: sign * 0.5 * _sq(_broadcast(x, p)[1]),
        grad_x=lambda t, x, p: _zeros_like(x, p),
        grad_p=lambda t, x, p: sign * _broadcast(x, p)[1],
        bound_A=1.0,
        convexity_tag=ConvexityTag.convex if sign > 0 else ConvexityTag.concave,
        description=f"H(p) = {'' if sign > 0 else '-'}|p|^2/2",
    )


def rel_kinetic(dim: int) -> HamiltonianModel:
    def grad_p(t: float, x: Array, p: Array) -> Array:
        _, p = _broadcast(x, p)
        return p / np.sqrt(1.0 + _sq(p))[..., None]

    return HamiltonianModel(
        name="rel-kinetic",
        dim=dim,
        eval=lambda t, x, p: np.sqrt(1.0 + _sq(_broadcast(x, p)[1])),
        grad_x=lambda t, x, p: _zeros_like(x, p),
        grad_p=grad_p,
        bound_A=1.0,
        convexity_tag=ConvexityTag.convex,
        description="H(p) = sqrt(1 + |p|^2)",
    )


def saddle(dim: int) -> HamiltonianModel:
    if dim != 2:
        raise ConfigError("the saddle Hamiltonian is defined for d=2 only")
    signature = np.array([1.0, -1.0])

    return HamiltonianModel(
        name="saddle",
        dim=2,
        eval=lambda t, x, p: 0.5 * np.sum(signature * _broadcast(x, p)[1] ** 2, axis=-1),
        grad_x=lambda t, x, p: _zeros_like(x, p),
        grad_p=lambda t, x, p: signature * _broadcast(x, p)[1],
        bound_A=1.0,
        convexity_tag=ConvexityTag.nonconvex,
        description="H(p) = p1^2/2 - p2^2/2",
    )


def eikonal(dim: int) -> HamiltonianModel:
    def grad_p(t: float, x: Array, p: Array) -> Array:
        _, p = _broadcast(x, p)
        norm = np.sqrt(_sq(p))[..., None]
        return np.where(norm > 0, p / np.where(norm > 0, norm, 1.0), 0.0)

    return HamiltonianModel(
        name="eikonal",
        dim=dim,
        eval=lambda t, x, p: np.sqrt(_sq(_broadcast(x, p)[1])),
        grad_x=lambda t, x, p: _zeros_like(x, p),
        grad_p=grad_p,
        bound_A=1.0,
        convexity_tag=ConvexityTag.convex,
        smooth=False,
        description="H(p) = |p| (continuous only; Hopf and entropy paths)",
    )


def polynomial(dim: int, coefficients: Iterable[float], bound_A: float = 1.0, convexity: str | None = None) -> HamiltonianModel:
    if dim != 1:
        raise ConfigError("poly Hamiltonians are defined for d=1 only")
    coeffs = np.asarray(list(coefficients), dtype=float)
    if coeffs.size == 0:
        raise ConfigError("poly Hamiltonian needs at least one coefficient")
    poly = Polynomial(coeffs)
    slope = poly.deriv()
    if convexity is not None:
        tag = ConvexityTag(convexity)
    elif coeffs.size == 3 and coeffs[2] != 0:
        tag = ConvexityTag.convex if coeffs[2] > 0 else ConvexityTag.concave
    else:
        tag = ConvexityTag.unknown

    return HamiltonianModel(
        name="poly:" + ",".join(f"{c:g}" for c in coeffs),
        dim=1,
        eval=lambda t, x, p: poly(_broadcast(x, p)[1][..., 0]),
        grad_x=lambda t, x, p: _zeros_like(x, p),
        grad_p=lambda t, x, p: slope(_broadcast(x, p)[1]),
        bound_A=float(bound_A),
        convexity_tag=tag,
        description="H(p) = sum_k c_k p^k (ascending coefficients)",
    )


def linear_potential(dim: int) -> HamiltonianModel:
    if dim != 1:
        raise ConfigError("linear-potential is defined for d=1 only")
    return HamiltonianModel(
        name="linear-potential",
        dim=1,
        eval=lambda t, x, p: _broadcast(x, p)[0][..., 0],
        grad_x=lambda t, x, p: np.ones(np.broadcast_shapes(np.shape(x), np.shape(p))),
        grad_p=lambda t, x, p: _zeros_like(x, p),
        bound_A=1.0,
        convexity_tag=ConvexityTag.unknown,
        depends_on_tx=True,
        description="H(x, p) = x (|H| bound holds on |x| <= 1 only)",
    )


def pendulum(dim: int) -> HamiltonianModel:
    if dim != 1:
        raise ConfigError("pendulum is defined for d=1 only")

    def energy(t: float, x: Array, p: Array) -> Array:
        x, p = _broadcast(x, p)
        return 0.5 * p[..., 0] ** 2 + 1.0 - np.cos(x[..., 0])

    return HamiltonianModel(
        name="pendulum",
        dim=1,
        eval=energy,
        grad_x=lambda t, x, p: np.sin(_broadcast(x, p)[0]),
        grad_p=lambda t, x, p: _broadcast(x, p)[1],
        bound_A=1.0,
        convexity_tag=ConvexityTag.convex,
        depends_on_tx=True,
        description="H(x, p) = p^2/2 + 1 - cos(x)",
    )


Factory = Callable[[int, Dict[str, Any]], HamiltonianModel]

_FACTORIES: Dict[str, Tuple[Factory, str]] = {
    "quadratic": (lambda dim, params: quadratic(dim, 1.0), "d=1,2; no params"),
    "neg-quadratic": (lambda dim, params: quadratic(dim, -1.0), "d=1,2; no params"),
    "rel-kinetic": (lambda dim, params: rel_kinetic(dim), "d=1,2; no params"),
    "saddle": (lambda dim, params: saddle(dim), "d=2; no params"),
    "eikonal": (lambda dim, params: eikonal(dim), "d=1,2; no params; continuous only"),
    "poly": (
        lambda dim, params: polynomial(dim, params["coefficients"], params.get("A", 1.0), params.get("convexity")),
        "d=1; poly:<c0,c1,...> or params {coefficients: [...], A: float, convexity: tag}",
    ),
    "linear-potential": (lambda dim, params: linear_potential(dim), "d=1; no params"),
    "pendulum": (lambda dim, params: pendulum(dim), "d=1; no params"),
}


def _split_id(model_id: str, params: Dict[str, Any]) -> Tuple[str, Dict[str, Any]]:
    base, _, inline = model_id.partition(":")
    params = dict(params)
    if inline:
        if base != "poly":
            raise ConfigError(f"inline parameters are only accepted by poly, got '{model_id}'")
        try:
            params["coefficients"] = [float(v) for v in inline.split(",")]
        except ValueError as exc:
            raise ConfigError(f"cannot parse polynomial coefficients in '{model_id}'") from exc
    return base, params


class BuiltinHamiltonians:
    def list(self) -> Iterable[str]:
        return sorted(_FACTORIES)

    def describe(self, model_id: str) -> str:
        base = model_id.partition(":")[0]
        if base not in _FACTORIES:
            raise ConfigError(f"unknown Hamiltonian id '{model_id}'")
        return _FACTORIES[base][1]

    def get(self, model_id: str, dim: int, params: Dict[str, Any] | None = None) -> HamiltonianModel:
        base, merged = _split_id(model_id, params or {})
        if base not in _FACTORIES:
            raise ConfigError(f"unknown Hamiltonian id '{model_id}'")
        if dim not in (1, 2):
            raise ArgumentError("only d=1 and d=2 are supported")
        if base == "poly" and "coefficients" not in merged:
            raise ConfigError("poly needs coefficients (poly:<c0,c1,...>)")
        return _FACTORIES[base][0](dim, merged)
