import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.linalg import expm

from pathframes.acceptance import rk4_order_ratios
from pathframes.errors import ArgumentError, EvaluationError
from pathframes.ivp import solve_matrix_ivp, tabulated, uniform_grid


def test_zero_generator_gives_identity():
    sol = solve_matrix_ivp(lambda s: np.zeros((3, 3)), 0.0, uniform_grid(0.0, 1.0, 50))
    assert np.all(sol.Y == np.eye(3))


def test_identity_generator_gives_e():
    sol = solve_matrix_ivp(lambda s: np.eye(2), 0.0, uniform_grid(0.0, 1.0, 1000))
    assert np.max(np.abs(sol.Y[-1] - math.e * np.eye(2))) < 1e-8


def test_rotation_generator():
    Z = np.array([[0.0, -1.0], [1.0, 0.0]])
    grid = uniform_grid(0.0, 3.0)
    sol = solve_matrix_ivp(lambda s: Z, 0.0, grid)
    for s, Y in zip(grid[::200], sol.Y[::200]):
        R = np.array([[math.cos(s), -math.sin(s)], [math.sin(s), math.cos(s)]])
        assert np.max(np.abs(Y - R)) < 1e-12


def test_fourth_order_convergence():
    errors, ratios = rk4_order_ratios()
    assert len(ratios) == 3
    assert all(12 <= r <= 20 for r in ratios), ratios


def _Z(s):
    return np.array([[math.sin(s), 1.0 + s], [-0.5, math.cos(2 * s)]])


def test_interior_base_point_marches_both_ways():
    grid = uniform_grid(-1.0, 1.0)
    sol = solve_matrix_ivp(_Z, 0.0, grid)
    assert sol.index0 == 2000
    assert np.array_equal(sol.Y[sol.index0], np.eye(2))
    fine = solve_matrix_ivp(_Z, 0.0, uniform_grid(-1.0, 1.0, 4000))
    assert np.max(np.abs(fine.Y[::2] - sol.Y)) < 1e-10


@settings(max_examples=20, deadline=None)
@given(st.lists(st.integers(0, 1000), min_size=3, max_size=3, unique=True))
def test_cocycle(nodes):
    grid = uniform_grid(0.0, 1.0, 1000)
    i0, i1, i2 = sorted(nodes)
    Y20 = solve_matrix_ivp(_Z, grid[i0], grid).Y[i2]
    Y21 = solve_matrix_ivp(_Z, grid[i1], grid).Y[i2]
    Y10 = solve_matrix_ivp(_Z, grid[i0], grid).Y[i1]
    assert np.max(np.abs(Y20 - Y21 @ Y10)) < 1e-8


def test_backward_consistency():
    grid = uniform_grid(0.0, 1.5)
    forward = solve_matrix_ivp(_Z, 0.0, grid).Y[-1]
    backward = solve_matrix_ivp(_Z, 1.5, grid).Y[0]
    assert np.max(np.abs(forward @ backward - np.eye(2))) < 1e-8


def test_liouville():
    grid = uniform_grid(0.0, 2.0)
    sol = solve_matrix_ivp(_Z, 0.0, grid)
    logdet = np.log(np.abs(np.linalg.det(sol.Y)))
    h = grid[1] - grid[0]
    d = (logdet[2:] - logdet[:-2]) / (2 * h)
    trace = np.array([np.trace(_Z(s)) for s in grid[1:-1]])
    assert np.max(np.abs(d - trace)) < 1e-6


def test_constant_generator_matches_expm():
    Z = np.array([[0.1, 2.0, 0.0], [-1.0, 0.0, 0.3], [0.0, 0.5, -0.2]])
    sol = solve_matrix_ivp(lambda s: Z, 0.0, uniform_grid(0.0, 1.0))
    assert np.max(np.abs(sol.Y[-1] - expm(Z))) < 1e-11


def test_base_point_off_grid_raises():
    with pytest.raises(ArgumentError):
        solve_matrix_ivp(_Z, 0.12345, uniform_grid(0.0, 1.0, 10))


def test_non_increasing_grid_raises():
    with pytest.raises(ArgumentError):
        solve_matrix_ivp(_Z, 0.0, np.array([0.0, 0.5, 0.5, 1.0]))


def test_non_finite_generator_raises():
    with pytest.raises(EvaluationError):
        solve_matrix_ivp(lambda s: np.full((2, 2), np.nan if s > 0.5 else 0.0), 0.0,
                         uniform_grid(0.0, 1.0, 10))


def test_tabulated_generator_is_second_order():
    coarse = uniform_grid(0.0, 1.0, 100)
    Zt = tabulated(coarse, [_Z(s) for s in coarse])
    s = 0.4321
    assert np.max(np.abs(Zt(s) - _Z(s))) < 1e-3
