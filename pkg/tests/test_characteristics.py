from __future__ import annotations

import math

import numpy as np
import pytest

from hj_lab.core.errors import ArgumentError, BlowUpError, ContractError
from hj_lab.domain.models import ConvexityTag, GeneratorKind
from hj_lab.domain.types import Generator, Grid, HamiltonianModel, PhaseState, SolutionPatch
from hj_lab.usecases.characteristics import (
    caustic_time,
    evolve_family,
    evolve_generator,
    integrate_hs,
    lipschitz_bound,
    speed_bound,
    step_times,
    time_derivative_bound,
)


def _quadratic_generator(curvature: float) -> Generator:
    return Generator(kind=GeneratorKind.quadratic, x0=np.zeros(1), p=np.zeros(1), hessian_matrix=np.array([[curvature]]))


def test_straight_line_characteristic(hamiltonians):
    model = hamiltonians.get("quadratic", 1)
    arc = integrate_hs(model, PhaseState(np.array([0.0]), np.array([1.0])), 0.0, 1.0, 1e-3)
    assert arc.final.q[0] == pytest.approx(1.0, abs=1e-12)
    assert arc.final.p[0] == pytest.approx(1.0, abs=1e-12)
    assert arc.action[-1] == pytest.approx(0.5, abs=1e-12)
    assert arc.times[-1] == 1.0


def test_stationary_point(hamiltonians):
    model = hamiltonians.get("quadratic", 1)
    arc = integrate_hs(model, PhaseState(np.array([0.3]), np.array([0.0])), 0.0, 2.0, 0.1)
    np.testing.assert_allclose(arc.q[:, 0], 0.3)
    np.testing.assert_allclose(arc.action, 0.0)


def test_sign_convention_with_linear_potential(hamiltonians):
    model = hamiltonians.get("linear-potential", 1)
    arc = integrate_hs(model, PhaseState(np.array([0.0]), np.array([0.25])), 0.0, 1.0, 1e-2)
    assert arc.final.p[0] == pytest.approx(0.25 - 1.0, abs=1e-12)
    np.testing.assert_allclose(arc.q[:, 0], 0.0)


def test_fourth_order_convergence_on_the_pendulum(hamiltonians):
    model = hamiltonians.get("pendulum", 1)
    start = PhaseState(np.array([0.5]), np.array([0.8]))
    reference = integrate_hs(model, start, 0.0, 2.0, 1e-4).final
    coarse = integrate_hs(model, start, 0.0, 2.0, 0.1).final
    fine = integrate_hs(model, start, 0.0, 2.0, 0.05).final
    error_coarse = abs(coarse.q[0] - reference.q[0]) + abs(coarse.p[0] - reference.p[0])
    error_fine = abs(fine.q[0] - reference.q[0]) + abs(fine.p[0] - reference.p[0])
    assert error_coarse / error_fine >= 12.0


def test_last_step_is_clipped():
    times = step_times(0.0, 1.0, 0.3)
    np.testing.assert_allclose(times, [0.0, 0.3, 0.6, 0.9, 1.0])


def test_integrate_rejects_bad_arguments(hamiltonians):
    model = hamiltonians.get("quadratic", 1)
    start = PhaseState(np.array([0.0]), np.array([1.0]))
    with pytest.raises(ArgumentError):
        integrate_hs(model, start, 0.0, 1.0, 0.0)
    with pytest.raises(ArgumentError):
        integrate_hs(model, start, 1.0, 1.0, 0.1)
    with pytest.raises(ContractError):
        integrate_hs(hamiltonians.get("eikonal", 1), start, 0.0, 1.0, 0.1)


def test_blow_up_reports_last_valid_time():
    explosive = HamiltonianModel(
        name="explosive",
        dim=1,
        eval=lambda t, x, p: -np.exp(50.0 * np.asarray(x)[..., 0]),
        grad_x=lambda t, x, p: -50.0 * np.exp(50.0 * np.asarray(x)),
        grad_p=lambda t, x, p: np.ones(np.broadcast_shapes(np.shape(x), np.shape(p))),
        bound_A=1.0,
        convexity_tag=ConvexityTag.unknown,
        depends_on_tx=True,
    )
    with pytest.raises(BlowUpError) as info:
        integrate_hs(explosive, PhaseState(np.array([0.0]), np.array([0.0])), 0.0, 100.0, 0.5)
    assert 0.0 <= info.value.last_time < 100.0


def test_affine_generator_evolves_in_closed_form(hamiltonians):
    model = hamiltonians.get("rel-kinetic", 1)
    gen = Generator(kind=GeneratorKind.affine, x0=np.zeros(1), p=np.array([0.7]), c=-0.2)
    patch = evolve_generator(model, gen, Grid.uniform([-1.0], [1.0], [21]), 0.8, 1e-2)
    h = math.sqrt(1.0 + 0.7**2)
    expected = 0.7 * patch.final_q[:, 0] - 0.2 - 0.8 * h
    np.testing.assert_allclose(patch.final_values, expected, atol=1e-6)
    assert math.isinf(patch.caustic_time)
    assert math.isinf(caustic_time(patch))


def test_spreading_quadratic_generator(hamiltonians):
    model = hamiltonians.get("quadratic", 1)
    patch = evolve_generator(model, _quadratic_generator(1.0), Grid.uniform([-1.0], [1.0], [41]), 1.0, 1e-2)
    x = patch.final_q[:, 0]
    np.testing.assert_allclose(patch.final_values, x**2 / 4.0, atol=1e-5)
    np.testing.assert_allclose(patch.final_p[:, 0], x / 2.0, atol=1e-8)
    assert math.isinf(caustic_time(patch))


def test_focusing_quadratic_generator_reaches_a_caustic(hamiltonians):
    model = hamiltonians.get("quadratic", 1)
    patch = evolve_generator(model, _quadratic_generator(-1.0), Grid.uniform([-1.0], [1.0], [41]), 1.2, 1e-2)
    assert caustic_time(patch) == pytest.approx(1.0, abs=0.05)
    assert patch.caustic_time == pytest.approx(1.0, abs=0.05)


def test_transported_momentum_matches_patch_gradient(hamiltonians):
    model = hamiltonians.get("quadratic", 1)
    patch = evolve_generator(model, _quadratic_generator(-1.0), Grid.uniform([-1.0], [1.0], [201]), 0.5, 1e-2)
    q, values, p = patch.final_q[:, 0], patch.final_values, patch.final_p[:, 0]
    slopes = np.gradient(values, q)
    np.testing.assert_allclose(slopes[1:-1], p[1:-1], atol=1e-3)


def test_zero_horizon_returns_launch_values(hamiltonians):
    model = hamiltonians.get("quadratic", 1)
    gen = _quadratic_generator(-1.0)
    grid = Grid.uniform([-1.0], [1.0], [11])
    patch = evolve_generator(model, gen, grid, 0.0, 1e-2)
    np.testing.assert_array_equal(patch.final_values, gen.value(grid.points()))


def test_family_batches_share_the_launch_grid(hamiltonians):
    model = hamiltonians.get("quadratic", 2)
    gens = [
        Generator(kind=GeneratorKind.affine, x0=np.zeros(2), p=np.array(p, dtype=float))
        for p in ([1.0, 0.0], [0.0, 1.0], [-1.0, -1.0])
    ]
    patches = evolve_family(model, gens, Grid.uniform([-1.0, -1.0], [1.0, 1.0], [5, 5]), 0.5, 0.1)
    assert [patch.generator_id for patch in patches] == [0, 1, 2]
    for gen, patch in zip(gens, patches):
        np.testing.assert_allclose(patch.final_q, patch.launch_points + 0.5 * gen.p, atol=1e-12)


def test_caustic_detection_needs_two_points_per_axis(hamiltonians):
    model = hamiltonians.get("quadratic", 1)
    gen = Generator(kind=GeneratorKind.affine, x0=np.zeros(1), p=np.array([1.0]))
    patch = evolve_generator(model, gen, Grid.uniform([0.0], [1.0], [2]), 0.5, 0.1)
    single = SolutionPatch(
        patch.generator_id, patch.launch_points[:1], (1,), patch.times, patch.q[:, :1], patch.p[:, :1],
        patch.action[:, :1], patch.caustic_time,
    )
    with pytest.raises(ArgumentError):
        caustic_time(single)


@pytest.mark.parametrize(
    "L0, A, t, expected",
    [(1.0, 0.0, 5.0, 1.0), (0.0, 1.0, 0.0, 0.0), (1.0, 1.0, math.log(2.0), 3.0)],
)
def test_lipschitz_bound(L0, A, t, expected):
    assert lipschitz_bound(L0, A, t) == pytest.approx(expected)


def test_time_derivative_bound_formula():
    assert time_derivative_bound(1.0, 1.0, 0.0) == pytest.approx(4.0)
    assert time_derivative_bound(0.0, 0.0, 3.0) == 0.0


def test_speed_bound_for_autonomous_and_dependent_models(hamiltonians):
    grid = Grid.uniform([-1.0], [1.0], [11])
    assert speed_bound(hamiltonians.get("quadratic", 1), 1.0, 0.0, 1.0, grid) == pytest.approx(1.0)
    pendulum = speed_bound(hamiltonians.get("pendulum", 1), 1.0, 0.0, 1.0, grid)
    assert pendulum == pytest.approx(lipschitz_bound(1.0, 1.0, 1.0))


def test_patch_lipschitz_growth_stays_under_the_bound(hamiltonians):
    model = hamiltonians.get("pendulum", 1)
    gen = _quadratic_generator(0.5)
    launch = Grid.uniform([-1.0], [1.0], [81])
    L0 = float(np.max(np.abs(gen.gradient(launch.points()))))
    for t in (0.25, 0.5, 1.0):
        patch = evolve_generator(model, gen, launch, t, 1e-2)
        slopes = np.diff(patch.final_values) / np.diff(patch.final_q[:, 0])
        assert np.max(np.abs(slopes)) <= lipschitz_bound(L0, model.bound_A, t) * (1.0 + 1e-2)


def test_patch_arcs_match_single_characteristics(hamiltonians):
    model = hamiltonians.get("pendulum", 1)
    gen = _quadratic_generator(-0.5)
    launch = Grid.uniform([-1.0], [1.0], [11])
    patch = evolve_generator(model, gen, launch, 0.6, 0.05)
    for index in (0, 4, 10):
        x0 = patch.launch_points[index]
        single = integrate_hs(
            model, PhaseState(x0, gen.gradient(x0[None])[0]), 0.0, 0.6, 0.05, action0=float(gen.value(x0[None])[0])
        )
        arc = patch.arc(index)
        np.testing.assert_allclose(arc.times, single.times)
        np.testing.assert_allclose(arc.q, single.q, atol=1e-10)
        np.testing.assert_allclose(arc.p, single.p, atol=1e-10)
        np.testing.assert_allclose(arc.action, single.action, atol=1e-10)
        assert arc.final.q[0] == pytest.approx(patch.final_q[index, 0])
