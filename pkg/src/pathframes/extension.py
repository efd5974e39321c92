"""Extending a frame on a path to local coordinates, and holonomicity tests.

``extend_to_coordinates`` builds functions ``x'`` on a tube around the path
whose coordinate basis coincides with a given frame on the path:

    x'(eta(s, t)) = x0 + int_{s0}^{s} A^{-1}(u) gamma'(u) du
                    + A^{-1}(s) (eta(s, t) - gamma(s))

so that ``dx'/dx = A^{-1}`` on the path.  In adapted coordinates, where
``gamma' = e_1``, the integrand is the first column of ``A^{-1}``.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy.integrate import cumulative_simpson

from .derivations import torsion_tensor
from .errors import DegeneracyError
from .geometry import (
    FrameField,
    MAX_CONDITION,
    TubeMap,
    commutation_coefficients,
    condition_number,
    finite_difference_jacobian,
    tensor_norm,
)

HOLONOMIC_TOL = 1e-5
JACOBIAN_TOL = 5e-6


@dataclass(frozen=True)
class CoordinateExtension:
    """Coordinates ``x'`` on a tube with ``d/dx'^j = E_j'`` on the path.

    The verification arrays are sampled on ``check_grid``:
    ``jacobian_mismatch`` is ``||dx'/dx - A^{-1}||_inf`` from finite
    differences of ``x'`` and ``basis_mismatch`` compares the induced
    coordinate basis with ``A``.  ``det_ratio`` holds the range of
    ``det(dx'/dx)`` over the sampled tube relative to its value on the path.
    """

    tube: TubeMap
    x_prime: Callable
    A_on_path: Callable
    s0: float
    x0: np.ndarray
    grid: np.ndarray
    check_grid: np.ndarray
    jacobian_mismatch: np.ndarray
    basis_mismatch: np.ndarray
    det_ratio: tuple
    _jacobian: Callable

    def jacobian(self, x):
        """Semi-analytic ``dx'/dx`` at a tube point."""
        return self._jacobian(x)

    def coordinate_frame(self):
        """The frame ``d/dx'^j`` as a ``FrameField`` on the tube."""
        return FrameField(lambda x: np.linalg.inv(self._jacobian(x)), chart=self.tube.path.chart)


def extend_to_coordinates(A_on_path, tube, s0=None, x0=None, grid=None, dA_on_path=None,
                          h=1e-5, check_stride=1, tol=JACOBIAN_TOL):
    """Extend a frame given on the path to coordinates on ``tube``.

    Parameters
    ----------
    A_on_path : callable
        ``s -> A(s)``, continuous and invertible.
    tube : TubeMap
        Must be injective; checked.
    s0, x0 : float, array_like
        Base parameter and the value of ``x'`` at ``gamma(s0)``; default
        ``path.s_start`` and ``gamma(s0)``.
    grid : array_like
        Quadrature grid for the integral term (composite Simpson).
    dA_on_path : callable, optional
        ``s -> dA/ds``; central differences of ``A_on_path`` otherwise.
    """
    path = tube.path
    tube.check_injective()
    grid = path.grid if grid is None else np.asarray(grid, dtype=float)
    s0 = path.s_start if s0 is None else float(s0)
    x0 = path.point(s0) if x0 is None else np.asarray(x0, dtype=float)

    def Ainv(s):
        A = np.asarray(A_on_path(s), dtype=float)
        if not condition_number(A) <= MAX_CONDITION:
            raise DegeneracyError(f"frame on the path is singular at s={s}")
        return np.linalg.inv(A)

    if dA_on_path is None:
        def dA_on_path(s, step=1e-6):
            return (np.asarray(A_on_path(s + step)) - np.asarray(A_on_path(s - step))) / (2 * step)

    integrand = np.array([Ainv(s) @ path.gamma_dot(s) for s in grid])
    cumulative = cumulative_simpson(integrand, x=grid, axis=0, initial=0.0)
    # shift so the integral starts at s0
    k0 = int(np.argmin(np.abs(grid - s0)))
    base = cumulative[k0] + _simpson_piece(Ainv, path, grid[k0], s0)

    def integral(s):
        k = int(np.clip(np.searchsorted(grid, s), 1, grid.size - 1))
        k = k if abs(grid[k] - s) <= abs(grid[k - 1] - s) else k - 1
        return cumulative[k] + _simpson_piece(Ainv, path, grid[k], s) - base

    def x_prime(x):
        x = np.asarray(x, dtype=float)
        s, _ = tube.inverse(x)
        return x0 + integral(s) + Ainv(s) @ (x - path.gamma(s))

    def jacobian(x):
        x = np.asarray(x, dtype=float)
        s, _ = tube.inverse(x)
        M = Ainv(s)
        offset = x - path.gamma(s)
        dMinv = -M @ dA_on_path(s) @ M
        d_ds = M @ path.gamma_dot(s) + dMinv @ offset
        adapted = np.column_stack([d_ds, M @ tube.normals])
        return adapted @ np.linalg.inv(tube.jacobian(s))

    check_grid = grid[::max(1, int(check_stride))]
    jac_err = np.empty(check_grid.size)
    basis_err = np.empty(check_grid.size)
    on_path_det = np.empty(check_grid.size)
    for a, s in enumerate(check_grid):
        x = path.point(s)
        J = finite_difference_jacobian(x_prime, x, h).T  # [i', j]
        A = np.asarray(A_on_path(s), dtype=float)
        jac_err[a] = tensor_norm(J - Ainv(s))
        basis_err[a] = tensor_norm(np.linalg.inv(J) - A)
        on_path_det[a] = np.linalg.det(J)
    if np.any(on_path_det == 0):
        raise DegeneracyError("coordinate Jacobian is singular on the path")

    params, points = tube.sample(s_count=min(60, grid.size), t_count=5)
    ratios = []
    for (s, _), x in zip(params, points):
        ratios.append(np.linalg.det(jacobian(x)) * np.linalg.det(np.asarray(A_on_path(s))))
    ratios = np.array(ratios)
    det_ratio = (float(ratios.min()), float(ratios.max()))

    return CoordinateExtension(tube, x_prime, A_on_path, s0, x0, grid, check_grid,
                               jac_err, basis_err, det_ratio, jacobian)


def _simpson_piece(Ainv, path, a, b):
    if a == b:
        return 0.0
    m = 0.5 * (a + b)
    f = [Ainv(u) @ path.gamma_dot(u) for u in (a, m, b)]
    return (b - a) / 6.0 * (f[0] + 4 * f[1] + f[2])


@dataclass(frozen=True)
class HolonomicityResult:
    """Commutator norms ``||C(gamma(s_k))||`` along a path and a verdict.

    ``verdict`` is ``"holonomic"`` below ``tol``, ``"anholonomic"`` above
    ``10 * tol`` and ``"inconclusive"`` in between.
    """

    grid: np.ndarray
    norms: np.ndarray
    coefficients: np.ndarray
    tol: float

    @property
    def max_norm(self):
        return float(np.max(self.norms))

    @property
    def verdict(self):
        if self.max_norm < self.tol:
            return "holonomic"
        if self.max_norm > 10 * self.tol:
            return "anholonomic"
        return "inconclusive"


def holonomicity_on_path(frame_field, path, grid=None, h=None, tol=HOLONOMIC_TOL):
    """Commutators of ``frame_field`` at the path nodes."""
    grid = path.grid if grid is None else np.asarray(grid, dtype=float)
    C = np.array([commutation_coefficients(frame_field, path.point(s), h) for s in grid])
    norms = np.array([tensor_norm(c) for c in C])
    return HolonomicityResult(grid, norms, C, tol)


def torsion_norms_on_path(conn, path, frame=None, grid=None, h=None):
    """``||T(gamma(s_k))||`` in ``frame`` (coordinate frame by default)."""
    grid = path.grid if grid is None else np.asarray(grid, dtype=float)
    frame = FrameField.identity(path.n, path.chart) if frame is None else frame
    return np.array([tensor_norm(torsion_tensor(conn, frame, path.point(s), h)) for s in grid])


def torsion_free_on_path(conn, path, frame=None, grid=None, tol=HOLONOMIC_TOL, h=None):
    """True iff the torsion tensor stays below ``tol`` on the path grid."""
    return bool(np.max(torsion_norms_on_path(conn, path, frame, grid, h)) < tol)
