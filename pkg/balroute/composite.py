"""
Composite minimization of g + psi, with g smooth in an arbitrary norm and psi
handled by a caller-supplied proximal oracle. Each step solves

    x_{k+1} = argmin <grad g(x_k), x> + (L/2) ||x - x_k||^2 + psi(x)
"""
from dataclasses import dataclass
import math
from typing import Callable, List

import numpy as np

from .error import RoutingFailure
from .graph import Vector

# prox(x_k, grad) -> argmin <grad, x> + (L/2) ||x - x_k||^2 + psi(x)
ProxOracle = Callable[[Vector, Vector], Vector]


@dataclass(frozen=True)
class CompositeProblem:
    smooth: Callable[[Vector], float]
    gradient: Callable[[Vector], Vector]
    nonsmooth: Callable[[Vector], float]
    prox: ProxOracle
    smoothness: float
    diameter: float
    x0: Vector

    def __post_init__(self) -> None:
        if not self.smoothness > 0 or not self.diameter > 0:
            raise RoutingFailure(
                f"Need positive smoothness and diameter, got L={self.smoothness}, D={self.diameter}."
            )
        if not math.isfinite(self.objective(self.x0)):
            raise RoutingFailure("The starting point lies outside the objective's domain.")

    def objective(self, x: Vector) -> float:
        return self.smooth(x) + self.nonsmooth(x)


@dataclass(frozen=True)
class Trajectory:
    iterates: List[Vector]
    values: List[float]

    @property
    def final(self) -> Vector:
        return self.iterates[-1]

    def is_monotone(self, tolerance: float = 1e-9) -> bool:
        return all(
            later <= earlier + tolerance * max(1.0, abs(earlier))
            for earlier, later in zip(self.values, self.values[1:])
        )


def minimize(problem: CompositeProblem, iterations: int) -> Trajectory:
    x = np.array(problem.x0, dtype=np.float64)
    iterates = [x]
    values = [problem.objective(x)]
    for k in range(iterations):
        x = problem.prox(x, problem.gradient(x))
        value = problem.objective(x)
        if not math.isfinite(value):
            raise RoutingFailure(f"Proximal step {k + 1} left the objective's domain.")
        iterates.append(x)
        values.append(value)
    return Trajectory(iterates, values)


def convergence_bound(smoothness: float, diameter: float, eps0: float, k: int) -> float:
    """Error bound after k steps, starting from error eps0."""
    if k < 1:
        raise RoutingFailure(f"The bound needs k >= 1, got {k}.")
    half_steps = (k - 1) // 2
    return max(
        2 * smoothness * diameter**2 / (half_steps + 4),
        0.5**half_steps * eps0,
    )


def progress_lower_bound(gap: float, distance: float, smoothness: float) -> float:
    """
    Least decrease of one step from a point with error `gap` at distance
    `distance` from an optimum.
    """
    if gap <= 0:
        return 0.0
    if distance == 0:
        return gap / 2
    return min((gap / distance) ** 2 / (2 * smoothness), gap / 2)


def euclidean_box_prox(lower: Vector, upper: Vector, smoothness: float) -> ProxOracle:
    """Prox oracle for psi = indicator of the box [lower, upper] in the 2-norm."""

    def prox(x: Vector, grad: Vector) -> Vector:
        result: Vector = np.clip(x - grad / smoothness, lower, upper)
        return result

    return prox


def box_indicator(lower: Vector, upper: Vector) -> Callable[[Vector], float]:
    def psi(x: Vector) -> float:
        inside = bool(np.all(x >= lower - 1e-12) and np.all(x <= upper + 1e-12))
        return 0.0 if inside else math.inf

    return psi
