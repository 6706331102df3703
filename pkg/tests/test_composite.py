import math
from typing import List

from hypothesis import given
from hypothesis import strategies as st
import numpy as np
import pytest

from balroute.composite import (
    CompositeProblem,
    box_indicator,
    convergence_bound,
    euclidean_box_prox,
    minimize,
    progress_lower_bound,
)
from balroute.error import RoutingFailure
from balroute.graph import Vector


def quadratic_problem(curvature: Vector, center: Vector, x0: Vector) -> CompositeProblem:
    """sum_i a_i (x_i - c_i)^2 / 2 over the unit box [-1, 1]^d."""
    lower, upper = -np.ones(len(center)), np.ones(len(center))
    smoothness = float(curvature.max())
    return CompositeProblem(
        smooth=lambda x: float(np.dot(curvature, (x - center) ** 2) / 2),
        gradient=lambda x: curvature * (x - center),
        nonsmooth=box_indicator(lower, upper),
        prox=euclidean_box_prox(lower, upper, smoothness),
        smoothness=smoothness,
        diameter=float(np.linalg.norm(upper - lower)),
        x0=x0,
    )


def test_one_dimensional_quadratic_converges() -> None:
    problem = quadratic_problem(np.array([2.0]), np.zeros(1), np.ones(1))
    trajectory = minimize(problem, 5)
    assert trajectory.values[0] == 1.0
    assert trajectory.final[0] == pytest.approx(0.0)
    assert trajectory.is_monotone()


def test_optimal_start_is_stationary() -> None:
    problem = quadratic_problem(np.array([3.0, 1.0]), np.array([0.5, 2.0]), np.array([0.5, 1.0]))
    trajectory = minimize(problem, 4)
    for x in trajectory.iterates:
        assert np.allclose(x, [0.5, 1.0])
    assert len(set(trajectory.values)) == 1


@given(
    st.lists(st.floats(0.1, 10.0), min_size=1, max_size=5),
    st.integers(0, 2**16),
)
def test_error_stays_below_the_bound(curvatures: List[float], seed: int) -> None:
    rng = np.random.default_rng(seed)
    d = len(curvatures)
    curvature = np.array(curvatures)
    center = rng.uniform(-3.0, 3.0, size=d)
    problem = quadratic_problem(curvature, center, rng.uniform(-1.0, 1.0, size=d))
    optimum = problem.objective(np.clip(center, -1.0, 1.0))
    trajectory = minimize(problem, 60)
    assert trajectory.is_monotone()
    eps0 = trajectory.values[0] - optimum
    for k, value in enumerate(trajectory.values[1:], 1):
        bound = convergence_bound(problem.smoothness, problem.diameter, eps0, k)
        assert value - optimum <= bound + 1e-9


def test_convergence_bound_formula() -> None:
    assert convergence_bound(1.0, 2.0, 0.5, 1) == max(2 * 1.0 * 4.0 / 4, 0.5)
    assert convergence_bound(1.0, 2.0, 100.0, 1) == 100.0
    assert convergence_bound(0.0, 1.0, 8.0, 5) == 8.0 * 0.25
    # the geometric term fades, the 1/k term takes over
    assert convergence_bound(1.0, 1.0, 1.0, 41) == 2.0 / 24
    with pytest.raises(RoutingFailure, match="k >= 1"):
        convergence_bound(1.0, 1.0, 1.0, 0)


def test_progress_lower_bound() -> None:
    assert progress_lower_bound(0.0, 1.0, 1.0) == 0.0
    assert progress_lower_bound(3.0, 0.0, 1.0) == 1.5
    assert progress_lower_bound(4.0, 2.0, 1.0) == 2.0
    assert progress_lower_bound(1.0, 4.0, 1.0) == 1.0 / 32


def test_problem_validation() -> None:
    with pytest.raises(RoutingFailure, match="positive smoothness"):
        CompositeProblem(
            lambda x: 0.0,
            lambda x: np.zeros_like(x),
            lambda x: 0.0,
            lambda x, grad: x,
            0.0,
            1.0,
            np.zeros(1),
        )
    with pytest.raises(RoutingFailure, match="outside the objective's domain"):
        quadratic_problem(np.ones(1), np.zeros(1), np.array([2.0]))


def test_prox_leaving_the_domain_is_an_error() -> None:
    problem = quadratic_problem(np.ones(1), np.zeros(1), np.zeros(1))
    escaping = CompositeProblem(
        problem.smooth,
        problem.gradient,
        problem.nonsmooth,
        lambda x, grad: x + 5.0,
        problem.smoothness,
        problem.diameter,
        problem.x0,
    )
    with pytest.raises(RoutingFailure, match="step 1"):
        minimize(escaping, 3)
    assert math.isinf(problem.nonsmooth(np.array([1.5])))
