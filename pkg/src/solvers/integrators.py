"""Classical fourth-order Runge-Kutta step shared by both solvers."""

from __future__ import annotations

from typing import Callable

import numpy as np

RightHandSide = Callable[[np.ndarray], np.ndarray]


def rk4_step(values: np.ndarray, dt: float, rhs: RightHandSide) -> np.ndarray:
    """
    Advance ``values`` by one RK4 step of size ``dt``.

    ``rhs`` is evaluated four times; it may raise to abort the step.
    """
    k1 = rhs(values)
    k2 = rhs(values + 0.5 * dt * k1)
    k3 = rhs(values + 0.5 * dt * k2)
    k4 = rhs(values + dt * k3)
    return values + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
