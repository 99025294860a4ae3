from __future__ import annotations

import numpy as np
import pytest

from hj_lab.core.errors import ArgumentError
from hj_lab.domain.models import GeneratorKind
from hj_lab.domain.types import Generator, Grid, SampledData, SemiConcaveFn
from hj_lab.usecases.semiconcave import (
    build_family_f0,
    build_phi,
    cluster_points,
    convex_hull_2d,
    estimate_constants,
    eval_min,
    extreme_mask,
    generator_bounds,
    hessian_norm_radial,
    one_sided_slopes,
    sampled_oracle,
    semiconcavity_defect,
    superdifferential,
)


def _affine(*p: float, offset: float = 0.0) -> Generator:
    return Generator(kind=GeneratorKind.affine, x0=np.zeros(len(p)), p=np.array(p, dtype=float), c=-offset)


def _min_slopes(*slopes) -> SemiConcaveFn:
    generators = tuple(_affine(*np.atleast_1d(s)) for s in slopes)
    return SemiConcaveFn(generators=generators, B=0.0, L=max(float(np.linalg.norm(s)) for s in slopes))


# ----- phi profile -----


def test_phi_is_quadratic_on_the_plateau():
    profile = build_phi(1.0, 1.0)
    r = np.linspace(0.0, 4.0, 41)
    np.testing.assert_allclose(profile.phi(r), r**2 / 2.0, atol=1e-12)
    assert profile.phi(0.0) == 0.0
    assert profile.Psi(0.0) == 0.0


def test_phi_tail_is_5l_lipschitz():
    profile = build_phi(1.0, 1.0)
    assert float(profile.phi(10.0) - profile.phi(9.0)) <= 5.0 + 1e-12
    assert float(profile.Psi(100.0)) == pytest.approx(4.5)


def test_phi_primitives_are_consistent():
    profile = build_phi(2.0, 0.5)
    r = np.linspace(0.0, 2.0 * profile.support_end, 4001)
    h = r[1] - r[0]
    np.testing.assert_allclose(np.gradient(profile.phi(r), h)[1:-1], profile.Psi(r)[1:-1], atol=1e-5)
    np.testing.assert_allclose(profile.phi_nodes, profile.phi(profile.r_nodes))


@pytest.mark.parametrize("B, L", [(0.0, 1.0), (1.0, 0.0), (-1.0, 1.0)])
def test_phi_rejects_nonpositive_constants(B, L):
    with pytest.raises(ArgumentError):
        build_phi(B, L)


def test_hessian_norm_radial_values():
    profile = build_phi(1.0, 1.0)
    assert hessian_norm_radial(profile, 0.0) == 1.0
    assert hessian_norm_radial(profile, 2.0) == pytest.approx(1.0)
    assert hessian_norm_radial(profile, 100.0) <= 0.05


def test_hessian_norm_radial_matches_finite_differences_in_2d():
    profile = build_phi(1.0, 1.0)
    gen = Generator(kind=GeneratorKind.phi_cap, x0=np.zeros(2), p=np.zeros(2), profile=profile)
    rng = np.random.default_rng(7)
    step = 1e-4
    for r in rng.uniform(0.1, 8.0, size=50):
        if min(abs(r - profile.plateau_end), abs(r - profile.support_end)) < 10 * step:
            continue
        theta = rng.uniform(0.0, 2.0 * np.pi)
        x = r * np.array([np.cos(theta), np.sin(theta)])
        hess = np.empty((2, 2))
        basis = np.eye(2) * step
        for i in range(2):
            for j in range(2):
                hess[i, j] = (
                    gen.value(x + basis[i] + basis[j])
                    - gen.value(x + basis[i] - basis[j])
                    - gen.value(x - basis[i] + basis[j])
                    + gen.value(x - basis[i] - basis[j])
                ) / (4 * step**2)
        assert np.linalg.norm(hess, ord=2) == pytest.approx(hessian_norm_radial(profile, r), abs=1e-4)


# ----- evaluation and superdifferentials -----


def test_eval_min_active_sets():
    fn = _min_slopes(1.0, -1.0)
    value, active = eval_min(fn, np.array([0.0]))
    assert value == 0.0 and active == frozenset({0, 1})
    value, active = eval_min(fn, np.array([1.0]))
    assert value == -1.0 and active == frozenset({1})


def test_superdifferential_at_a_kink():
    sd = superdifferential(_min_slopes(1.0, -1.0), np.array([0.0]))
    assert sorted(sd.p[:, 0]) == [-1.0, 1.0]
    assert sd.interval == (-1.0, 1.0)
    assert sd.extreme.all()


def test_superdifferential_at_a_differentiability_point():
    sd = superdifferential(_min_slopes(1.0, -1.0), np.array([0.5]))
    assert sd.is_singleton
    np.testing.assert_array_equal(sd.hull, [[-1.0], [-1.0]])


def test_superdifferential_triangle_in_2d():
    fn = _min_slopes([1.0, 0.0], [0.0, 1.0], [-1.0, -1.0])
    sd = superdifferential(fn, np.zeros(2))
    assert sd.p.shape == (3, 2)
    assert sd.hull.shape == (3, 2)
    assert sd.extreme.all()


def test_extreme_mask_drops_interior_points():
    vertices = np.array([[0.0, 0.0], [2.0, 0.0], [0.0, 2.0], [0.5, 0.5]])
    np.testing.assert_array_equal(extreme_mask(vertices), [True, True, True, False])
    np.testing.assert_array_equal(extreme_mask(np.array([[-1.0], [0.0], [1.0]])), [True, False, True])


def test_convex_hull_is_counter_clockwise():
    hull = convex_hull_2d(np.array([[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0], [0.5, 0.5]]))
    assert hull.shape == (4, 2)
    area = 0.5 * np.sum(hull[:, 0] * np.roll(hull[:, 1], -1) - np.roll(hull[:, 0], -1) * hull[:, 1])
    assert area == pytest.approx(1.0)


def test_cluster_points_merges_near_duplicates():
    points = np.array([[1.0], [1.0 + 1e-9], [-1.0]])
    np.testing.assert_array_equal(cluster_points(points, 1e-6), [0, 2])


# ----- phi-cap families -----


def test_family_touches_u_at_sites():
    u = _min_slopes(1.0, -1.0)
    family = build_family_f0(u, np.array([[-1.0], [0.0], [1.0]]), 1.0, 1.0)
    assert len(family.generators) == 5
    for site in (-1.0, 0.0, 1.0):
        value, _ = eval_min(family, np.array([site]))
        assert value == pytest.approx(-abs(site), abs=1e-12)


def test_family_reconstructs_neg_abs():
    u = _min_slopes(1.0, -1.0)
    sites = np.linspace(-2.0, 2.0, 81)[:, None]
    family = build_family_f0(u, sites, 1.0, 1.0)
    x = np.linspace(-2.0, 2.0, 2001)[:, None]
    error = family(x) - u(x)
    assert error.min() >= -1e-12
    assert error.max() <= 1e-2

    box = Grid.uniform([-3.0], [3.0], [601])
    for gen in family.generators:
        slope, curvature = generator_bounds(gen, box)
        assert slope <= 6.0
        assert curvature <= 1.0 + 1e-3


def test_family_dominates_affine_u():
    u = _min_slopes(0.5)
    family = build_family_f0(u, np.array([[0.0], [1.0]]), 1.0, 1.0)
    x = np.linspace(-10.0, 10.0, 401)[:, None]
    for gen in family.generators:
        gap = gen.value(x) - u(x)
        assert gap.min() >= -1e-12
        assert np.count_nonzero(np.abs(gap) <= 1e-12) == 1


def test_family_requires_sites():
    with pytest.raises(ArgumentError):
        build_family_f0(_min_slopes(1.0), np.empty((0, 1)), 1.0, 1.0)


def test_semiconcavity_defect_signs():
    u = _min_slopes(1.0, -1.0)
    assert semiconcavity_defect(u, 0.0, [-2.0], [2.0]) <= 1e-12
    convex = lambda x: 2.0 * np.sum(x * x, axis=-1)  # noqa: E731
    assert semiconcavity_defect(convex, 1.0, [-2.0], [2.0]) > 0.0


# ----- sampled data -----


def test_sampled_oracle_brackets_the_kink():
    grid = Grid.uniform([-1.0], [1.0], [21])
    data = SampledData(grid=grid, values=-np.abs(grid.axes()[0]))
    oracle = sampled_oracle(data, samples=3)
    np.testing.assert_allclose(oracle(np.array([0.0]))[:, 0], [-1.0, 0.0, 1.0], atol=1e-12)
    np.testing.assert_allclose(oracle(np.array([0.5]))[:, 0], [-1.0])


def test_one_sided_slopes_reuse_edge_neighbours():
    right, left = one_sided_slopes(np.array([0.0, 1.0, 3.0]), 1.0)
    np.testing.assert_array_equal(right, [1.0, 2.0, 2.0])
    np.testing.assert_array_equal(left, [1.0, 1.0, 2.0])


def test_estimate_constants_clamps():
    grid = Grid.uniform([-1.0], [1.0], [21])
    B, L = estimate_constants(-np.abs(grid.axes()[0]), grid)
    assert B == pytest.approx(1e-6)
    assert L == pytest.approx(1.0)
    B, _ = estimate_constants(0.5 * grid.axes()[0] ** 2, grid)
    assert B == pytest.approx(1.0)


# ----- semi-concavity of phi-cap families -----


@pytest.fixture
def neg_abs_family() -> SemiConcaveFn:
    return build_family_f0(_min_slopes(1.0, -1.0), np.linspace(-2.0, 2.0, 41)[:, None], 1.0, 1.0)


def test_family_is_midpoint_concave_after_removing_the_quadratic(neg_abs_family):
    assert semiconcavity_defect(neg_abs_family, 1.0 + 1e-3, [-3.0], [3.0], pairs=2000) <= 1e-9


def test_two_dimensional_family_is_midpoint_concave():
    u = _min_slopes([1.0, 0.0], [0.0, 1.0], [-1.0, -1.0])
    axis = np.linspace(-1.0, 1.0, 9)
    sites = np.stack(np.meshgrid(axis, axis, indexing="ij"), axis=-1).reshape(-1, 2)
    family = build_family_f0(u, sites, 1.0, 2.0)
    assert semiconcavity_defect(family, 1.0 + 1e-3, [-1.5, -1.5], [1.5, 1.5], pairs=500) <= 1e-9


def test_extreme_supergradients_are_semiconcavity_witnesses(neg_abs_family):
    y = np.linspace(-3.0, 3.0, 601)[:, None]
    for x in (-1.0, 0.0, 0.35):
        sd = superdifferential(neg_abs_family, np.array([x]))
        value, _ = eval_min(neg_abs_family, np.array([x]))
        for p in sd.p[sd.extreme]:
            bound = value + (y[:, 0] - x) * p[0] + 0.5 * (1.0 + 1e-3) * (y[:, 0] - x) ** 2
            assert np.all(neg_abs_family(y) <= bound + 1e-9)


def test_nearby_gradients_stay_inside_the_hull(neg_abs_family):
    radius = 1e-4
    for x in (-1.0, 0.0, 1.0, 0.35):
        lo, hi = superdifferential(neg_abs_family, np.array([x])).interval
        for y in (x - radius, x + radius):
            nearby = superdifferential(neg_abs_family, np.array([y]))
            if not nearby.is_singleton:
                continue
            slack = 1e-6 + radius * 1.001
            assert lo - slack <= nearby.p[0, 0] <= hi + slack
