"""
Evaluation of Hamiltonian models and sampled verification of the Hypothesis 1 bounds.
"""
from __future__ import annotations

import itertools
import logging
from typing import Tuple

import numpy as np

from hj_lab.core.config import get_settings
from hj_lab.core.errors import ArgumentError, ContractError
from hj_lab.domain.models import HypothesisReport, SampleBox
from hj_lab.domain.types import Array, HamiltonianModel

logger = logging.getLogger(__name__)


def _as_covectors(model: HamiltonianModel, x: Array, p: Array) -> Tuple[Array, Array]:
    x = np.atleast_1d(np.asarray(x, dtype=float))
    p = np.atleast_1d(np.asarray(p, dtype=float))
    if x.shape[-1] != model.dim or p.shape[-1] != model.dim:
        raise ArgumentError(
            f"model '{model.name}' has dimension {model.dim}, got x{x.shape} and p{p.shape}"
        )
    return x, p


def eval_h(model: HamiltonianModel, t: float, x: Array, p: Array) -> float | Array:
    x, p = _as_covectors(model, x, p)
    value = model.eval(float(t), x, p)
    return float(value) if np.ndim(value) == 0 else value


def require_smooth(model: HamiltonianModel, solver: str) -> None:
    if not model.smooth:
        raise ContractError(f"{solver} needs a C^2 Hamiltonian; '{model.name}' is continuous only")


def require_autonomous(model: HamiltonianModel, solver: str) -> None:
    if model.depends_on_tx:
        raise ContractError(f"{solver} needs H = H(p); '{model.name}' depends on (t, x)")


def central_gradient_p(model: HamiltonianModel, t: float, x: Array, p: Array, step: float) -> Array:
    out = np.empty(np.broadcast_shapes(x.shape, p.shape))
    for i in range(model.dim):
        e = np.zeros(model.dim)
        e[i] = step
        out[..., i] = (model.eval(t, x, p + e) - model.eval(t, x, p - e)) / (2.0 * step)
    return out


def central_gradient_x(model: HamiltonianModel, t: float, x: Array, p: Array, step: float) -> Array:
    out = np.empty(np.broadcast_shapes(x.shape, p.shape))
    for i in range(model.dim):
        e = np.zeros(model.dim)
        e[i] = step
        out[..., i] = (model.eval(t, x + e, p) - model.eval(t, x - e, p)) / (2.0 * step)
    return out


def hessian_norm_estimate(model: HamiltonianModel, t: float, x: Array, p: Array, step: float) -> Array:
    """Spectral norm of the finite-difference Hessian of H in the (x, p) variables."""
    d = model.dim
    z = np.concatenate(np.broadcast_arrays(x, p), axis=-1)

    def f(zz: Array) -> Array:
        return model.eval(t, zz[..., :d], zz[..., d:])

    n = 2 * d
    center = f(z)
    hess = np.empty(z.shape[:-1] + (n, n))
    basis = np.eye(n) * step
    for i in range(n):
        hess[..., i, i] = (f(z + basis[i]) - 2.0 * center + f(z - basis[i])) / step**2
        for j in range(i + 1, n):
            mixed = (
                f(z + basis[i] + basis[j])
                - f(z + basis[i] - basis[j])
                - f(z - basis[i] + basis[j])
                + f(z - basis[i] - basis[j])
            ) / (4.0 * step**2)
            hess[..., i, j] = hess[..., j, i] = mixed
    return np.linalg.norm(hess, ord=2, axis=(-2, -1))


def derivative_defect(model: HamiltonianModel, t: float, x: Array, p: Array, step: float = 1e-6) -> Tuple[float, float]:
    """Relative mismatch of grad_p and grad_x against central differences of eval."""
    x, p = _as_covectors(model, x, p)
    gp = model.grad_p(t, x, p)
    gx = model.grad_x(t, x, p)
    dp = np.linalg.norm(gp - central_gradient_p(model, t, x, p, step), axis=-1)
    dx = np.linalg.norm(gx - central_gradient_x(model, t, x, p, step), axis=-1)
    rel_p = dp / (1.0 + np.linalg.norm(gp, axis=-1))
    rel_x = dx / (1.0 + np.linalg.norm(gx, axis=-1))
    return float(np.max(rel_p)), float(np.max(rel_x))


def check_hypothesis1(model: HamiltonianModel, box: SampleBox, samples: int) -> HypothesisReport:
    settings = get_settings()
    if samples < 2:
        raise ArgumentError("check_hypothesis1 needs at least 2 samples per axis")
    if box.dim != model.dim:
        raise ArgumentError(f"box dimension {box.dim} does not match model dimension {model.dim}")
    intervals = [box.t, *box.x, *box.p]
    if any(not hi > lo for lo, hi in intervals):
        raise ArgumentError("degenerate sampling box (zero volume)")

    d = model.dim
    axes = [np.linspace(lo, hi, samples) for lo, hi in intervals]
    value_ratio = gradient_ratio = hessian_max = 0.0
    # one time slice at a time keeps the (x, p) sample cloud moderate in d=2
    for t in axes[0]:
        cloud = np.array(list(itertools.product(*axes[1:])))
        x, p = cloud[:, :d], cloud[:, d:]
        weight = 1.0 + np.linalg.norm(p, axis=-1)
        h = model.eval(float(t), x, p)
        grad = np.concatenate([model.grad_x(float(t), x, p), model.grad_p(float(t), x, p)], axis=-1)
        value_ratio = max(value_ratio, float(np.max(np.abs(h) / weight**2)))
        gradient_ratio = max(gradient_ratio, float(np.max(np.linalg.norm(grad, axis=-1) / weight)))
        hessian_max = max(hessian_max, float(np.max(hessian_norm_estimate(model, float(t), x, p, settings.fd_step))))

    limit = model.bound_A * settings.hypothesis_slack + 1e-9
    report = HypothesisReport(
        model=model.name,
        bound_A=model.bound_A,
        slack=settings.hypothesis_slack,
        samples=samples,
        max_value_ratio=value_ratio,
        max_gradient_ratio=gradient_ratio,
        max_hessian=hessian_max,
        value_ok=value_ratio <= limit,
        gradient_ok=gradient_ratio <= limit,
        hessian_ok=hessian_max <= limit,
    )
    if not report.passed:
        logger.warning(
            "Hypothesis 1 fails for %s: |H| ratio %.3g, |dH| ratio %.3g, |d2H| %.3g vs A=%.3g",
            model.name, value_ratio, gradient_ratio, hessian_max, model.bound_A,
        )
    return report
