"""Fundamental solutions of linear matrix ODEs by fixed-step RK4.

``solve_matrix_ivp`` returns ``Y(s, s0; Z)`` with ``dY/ds = Z(s) Y`` and
``Y(s0) = I`` on every node of a parameter grid, marching forward and
backward from ``s0``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import ArgumentError, EvaluationError

STEPS_PER_UNIT = 2000


def uniform_grid(s_start, s_end, steps_per_unit=STEPS_PER_UNIT):
    """Uniform grid with ``ceil(steps_per_unit * (s_end - s_start))`` steps."""
    steps = max(1, math.ceil(steps_per_unit * (s_end - s_start) - 1e-9))
    return np.linspace(s_start, s_end, steps + 1)


def tabulated(grid, values):
    """Piecewise-linear interpolant of matrix samples (accuracy capped at O(h**2))."""
    grid = np.asarray(grid, dtype=float)
    values = np.asarray(values, dtype=float)
    flat = values.reshape(len(grid), -1)
    shape = values.shape[1:]

    def Z(s):
        return np.array([np.interp(s, grid, col) for col in flat.T]).reshape(shape)

    return Z


@dataclass(frozen=True)
class FundamentalSolution:
    s0: float
    grid: np.ndarray
    Y: np.ndarray
    Z: Callable

    @property
    def index0(self):
        return int(np.flatnonzero(self.grid == self.s0)[0])

    def at(self, s):
        """Y at the grid node nearest to ``s`` (no interpolation)."""
        return self.Y[int(np.argmin(np.abs(self.grid - s)))]


def _sample(Z, s):
    M = np.asarray(Z(s), dtype=float)
    if not np.isfinite(M).all():
        raise EvaluationError(f"coefficient matrix is not finite at s={s}")
    return M


def solve_matrix_ivp(Z, s0, grid):
    """Classical RK4 for ``dY/ds = Z(s) Y``, ``Y(s0) = I`` on ``grid``.

    ``grid`` must be strictly increasing and contain ``s0`` as a node.
    """
    grid = np.asarray(grid, dtype=float)
    if grid.ndim != 1 or grid.size < 1 or np.any(np.diff(grid) <= 0):
        raise ArgumentError("grid must be a strictly increasing 1-d array")
    hits = np.flatnonzero(np.isclose(grid, s0, rtol=0.0, atol=1e-12 * max(1.0, abs(s0))))
    if hits.size == 0:
        raise ArgumentError(f"s0={s0} is not a node of the grid")
    k0 = int(hits[0])
    grid = grid.copy()
    grid[k0] = s0
    n = _sample(Z, s0).shape[0]

    Y = np.empty((grid.size, n, n))
    Y[k0] = np.eye(n)
    for direction in (1, -1):
        k = k0
        k_end = grid.size - 1 if direction == 1 else 0
        Zk = _sample(Z, grid[k])
        while k != k_end:
            s, s_next = grid[k], grid[k + direction]
            h = s_next - s
            Zmid = _sample(Z, s + h / 2)
            Znext = _sample(Z, s_next)
            y = Y[k]
            k1 = Zk @ y
            k2 = Zmid @ (y + h / 2 * k1)
            k3 = Zmid @ (y + h / 2 * k2)
            k4 = Znext @ (y + h * k3)
            Y[k + direction] = y + h / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
            k += direction
            Zk = Znext
    return FundamentalSolution(float(s0), grid, Y, Z)
