"""Frames in which a derivation's components vanish along a path.

Two constructions are provided:

* ``special_frame_along_path`` solves ``dA/ds = -W(s) A`` with
  ``W(s) = W_{gamma'}(gamma(s))``, giving ``A(s) = Y(s, s0; -W) B``.  The
  components along the tangent vanish on the path.
* ``special_frame_all_fields`` does the same for every direction at once
  when the derivation is linear in ``X`` along the path:
  ``A = [I - Gamma(x - gamma(s))] Y(s, s0; -Gamma(gamma')) B`` on a tube.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .derivations import ConnectionField, connection_components, derivation_components
from .errors import ArgumentError, ConstructionError, DegeneracyError, NotAConnectionError
from .geometry import (
    FrameField,
    PathCurve,
    TubeMap,
    check_invertible,
    finite_difference_jacobian,
    tensor_norm,
)
from .ivp import STEPS_PER_UNIT, solve_matrix_ivp, uniform_grid

ALONG_PATH_TOL = 1e-8
ALL_FIELDS_TOL = 5e-6


def grid_derivative(grid, values):
    """d/ds of samples on a grid along axis 0.

    Fourth-order differences on uniform grids with at least five nodes,
    second-order ``np.gradient`` otherwise.
    """
    grid = np.asarray(grid, dtype=float)
    f = np.asarray(values, dtype=float)
    if grid.size != f.shape[0]:
        raise ArgumentError("grid and samples differ in length")
    if grid.size < 2:
        return np.zeros_like(f)
    steps = np.diff(grid)
    h = steps.mean()
    uniform = np.allclose(steps, h, rtol=1e-9, atol=0.0)
    if not uniform or grid.size < 5:
        return np.gradient(f, grid, axis=0, edge_order=2 if grid.size >= 3 else 1)
    d = np.empty_like(f)
    d[2:-2] = (-f[4:] + 8 * f[3:-1] - 8 * f[1:-3] + f[:-4]) / (12 * h)
    d[0] = (-25 * f[0] + 48 * f[1] - 36 * f[2] + 16 * f[3] - 3 * f[4]) / (12 * h)
    d[1] = (-3 * f[0] - 10 * f[1] + 18 * f[2] - 6 * f[3] + f[4]) / (12 * h)
    d[-1] = (25 * f[-1] - 48 * f[-2] + 36 * f[-3] - 16 * f[-4] + 3 * f[-5]) / (12 * h)
    d[-2] = (3 * f[-1] + 10 * f[-2] - 18 * f[-3] + 6 * f[-4] - f[-5]) / (12 * h)
    return d


def _hermite(grid, values, slopes, s):
    k = int(np.clip(np.searchsorted(grid, s) - 1, 0, grid.size - 2))
    h = grid[k + 1] - grid[k]
    u = (s - grid[k]) / h
    u2, u3 = u * u, u * u * u
    value = ((2 * u3 - 3 * u2 + 1) * values[k] + (u3 - 2 * u2 + u) * h * slopes[k]
             + (-2 * u3 + 3 * u2) * values[k + 1] + (u3 - u2) * h * slopes[k + 1])
    slope = ((6 * u2 - 6 * u) * (values[k] - values[k + 1]) / h
             + (3 * u2 - 4 * u + 1) * slopes[k] + (3 * u2 - 2 * u) * slopes[k + 1])
    return value, slope


@dataclass(frozen=True)
class TransportSolution:
    """Frame matrices ``A(s_k)`` along a path with their residual diagnostics.

    ``residual[k]`` is ``||W'(gamma(s_k))||_inf`` where ``W'`` uses
    ``dA/ds`` from fourth-order differences of the computed grid, and
    ``W_prime`` holds the matrices themselves.
    """

    grid: np.ndarray
    A_grid: np.ndarray
    B: np.ndarray
    s0: float
    W: Callable
    W_grid: np.ndarray
    dA_grid: np.ndarray
    W_prime: np.ndarray
    residual: np.ndarray
    path: Optional[PathCurve] = None

    @property
    def max_residual(self):
        return float(np.max(self.residual))

    def frame_at(self, s):
        """``A(s)`` between nodes by cubic Hermite interpolation with ``dA/ds = -W A``."""
        return _hermite(self.grid, self.A_grid, self.dA_grid, s)[0]

    def derivative_at(self, s):
        return _hermite(self.grid, self.A_grid, self.dA_grid, s)[1]

    def transition_to(self, other):
        """``A_self^{-1} A_other`` on the common grid."""
        return np.linalg.solve(self.A_grid, other.A_grid)


def special_frame_along_path(W_on_path, s0, B, grid, tol=ALONG_PATH_TOL, path=None):
    """Frame along a path in which the tangent components vanish.

    Parameters
    ----------
    W_on_path : callable
        ``s -> W_X(gamma(s))`` with ``X`` the tangent, in the working frame.
    s0 : float
        Grid node where ``A(s0) = B``.
    B : array_like
        Invertible initial matrix.
    grid : array_like
        Increasing parameter grid containing ``s0``.
    tol : float
        Bound on the residual ``max_k ||W'(gamma(s_k))||_inf``; exceeding it
        raises ``ConstructionError``.
    """
    B = np.array(B, dtype=float)
    try:
        check_invertible(B, "initial matrix B")
    except DegeneracyError as exc:
        raise ArgumentError(str(exc)) from exc
    fundamental = solve_matrix_ivp(lambda s: -np.asarray(W_on_path(s), dtype=float), s0, grid)
    grid = fundamental.grid
    A = fundamental.Y @ B
    W_grid = np.array([W_on_path(s) for s in grid], dtype=float)
    dA_ode = -W_grid @ A
    dA_fd = grid_derivative(grid, A)
    W_prime = np.linalg.solve(A, W_grid @ A + dA_fd)
    residual = np.array([tensor_norm(M) for M in W_prime])
    sol = TransportSolution(grid, A, B, float(s0), W_on_path, W_grid, dA_ode, W_prime, residual, path)
    if sol.max_residual > tol:
        raise ConstructionError(
            f"transport residual {sol.max_residual:.3e} exceeds {tol:.1e}; refine the grid")
    return sol


def tangent_components(D, path, frame=None):
    """``s -> W_{gamma'}(gamma(s))`` for a connection or S-derivation."""
    if frame is None:
        frame = FrameField.identity(path.n, path.chart)
    if isinstance(D, ConnectionField):
        if frame.coordinate:
            return lambda s: D.contract(path.gamma(s), path.gamma_dot(s))
        def W(s):
            x = path.point(s)
            return connection_components(D, np.linalg.solve(frame(x), path.gamma_dot(s)), frame, x)
        return W

    def W(s):
        x = path.point(s)
        return derivation_components(D, np.asarray(path.gamma_dot(s), dtype=float), frame, x)
    return W


def transport_along(D, path, B=None, s0=None, steps_per_unit=None, tol=ALONG_PATH_TOL):
    """Convenience wrapper: special frame for the tangent along ``path``."""
    grid = uniform_grid(path.s_start, path.s_end, steps_per_unit or STEPS_PER_UNIT)
    s0 = path.s_start if s0 is None else s0
    B = np.eye(path.n) if B is None else B
    return special_frame_along_path(tangent_components(D, path), s0, B, grid, tol, path)


def verify_transition_constancy(sol1, sol2):
    """Max ``||d(A1^{-1} A2)/ds||_inf`` over the shared grid."""
    if sol1.grid.shape != sol2.grid.shape or not np.array_equal(sol1.grid, sol2.grid):
        raise ArgumentError("transport solutions live on different grids")
    T = sol1.transition_to(sol2)
    dT = grid_derivative(sol1.grid, T)
    return max(tensor_norm(M) for M in dT)


@dataclass(frozen=True)
class LinearityCheck:
    linear: bool
    gammas: Optional[np.ndarray]
    residual: float
    grid: np.ndarray

    def __bool__(self):
        return self.linear


def _probes(n, probe_count, seed):
    if probe_count is None:
        probe_count = 2 * n
    if probe_count < n:
        raise ArgumentError(f"need at least {n} probe fields, got {probe_count}")
    rng = np.random.default_rng(seed)
    probes = np.vstack([np.eye(n), rng.normal(size=(probe_count - n, n))])
    if np.linalg.matrix_rank(probes) < n:
        raise ArgumentError("probe fields do not span the tangent space")
    return probes


def basis_components(S, path):
    """``s -> [W_{e_k}(gamma(s))]_k`` in the coordinate frame, indexed ``[k, i, j]``."""
    frame = FrameField.identity(path.n, path.chart)
    eye = np.eye(path.n)

    def gammas(s):
        x = path.point(s)
        return np.array([derivation_components(S, e, frame, x) for e in eye])
    return gammas


def is_linear_along_path(S, path, probe_count=None, seed=0, tol=1e-8, grid=None):
    """Test ``W_X(gamma(s)) = Gamma_k(gamma(s)) X^k`` on the path grid.

    The ``n`` coordinate-constant unit probes fix ``Gamma_k``; the remaining
    random constant probes cross-validate the fit.  Returns a
    ``LinearityCheck`` whose ``gammas`` are indexed ``[s, k, i, j]`` (None
    when the check fails).
    """
    n = path.n
    probes = _probes(n, probe_count, seed)
    grid = path.grid if grid is None else np.asarray(grid, dtype=float)
    frame = FrameField.identity(n, path.chart)
    gammas = np.empty((grid.size, n, n, n))
    worst = 0.0
    scale = 1.0
    for a, s in enumerate(grid):
        x = path.point(s)
        W = np.array([derivation_components(S, p, frame, x) for p in probes])
        gammas[a] = W[:n]
        scale = max(scale, float(np.max(np.abs(W[:n]))))
        if probes.shape[0] > n:
            predicted = np.einsum("pk,kij->pij", probes[n:], W[:n])
            worst = max(worst, float(np.max(np.abs(W[n:] - predicted))))
    linear = worst <= tol * scale
    return LinearityCheck(linear, gammas if linear else None, worst, grid)


@dataclass(frozen=True)
class TubeFrameSolution:
    """Frame on a tube whose components vanish on the path for every ``X``.

    ``frame`` maps chart points of the tube to frame matrices.
    ``residual[k]`` is ``max_m ||Gamma_m A + d_m A||_inf`` at ``check_grid[k]``.
    """

    tube: TubeMap
    transport: TransportSolution
    gammas: Callable
    frame: FrameField
    check_grid: np.ndarray
    Gamma_k_on_path: np.ndarray
    residual: np.ndarray
    transverse_step: float

    @property
    def max_residual(self):
        return float(np.max(self.residual))

    def A_field(self, s, t):
        x = self.tube.eta(s, t)
        offset = x - self.tube.path.gamma(s)
        G = self.gammas(s)
        return (np.eye(G.shape[1]) - np.einsum("kij,k->ij", G, offset)) @ self.transport.frame_at(s)

    def extracted_gammas(self, h=None):
        """``Gamma_k = -E_k(A) A^{-1}`` on the check grid, indexed ``[s, k, i, j]``."""
        h = self.transverse_step if h is None else h
        out = []
        for s in self.check_grid:
            x = self.tube.path.point(s)
            A = self.frame(x)
            dA = finite_difference_jacobian(self.frame.raw, x, h, chart=self.frame.chart)
            out.append(-dA @ np.linalg.inv(A))
        return np.array(out)


def special_frame_all_fields(D, tube, B=None, grid=None, transverse_step=1e-4, s0=None,
                             tol=ALL_FIELDS_TOL, probe_count=None, seed=0, check_stride=1,
                             transport_tol=ALONG_PATH_TOL):
    """Frame on a tube around ``tube.path`` killing ``W_X`` on the path for all ``X``.

    ``D`` is a ``ConnectionField`` or an ``SDerivationField``; the latter is
    first checked for linearity along the path and rejected with
    ``NotAConnectionError`` otherwise.  The quadratic transverse terms of the
    general solution are set to zero.
    """
    path = tube.path
    n = path.n
    tube.check_injective()
    if isinstance(D, ConnectionField):
        def gammas(s):
            return D.matrices(path.point(s))
    else:
        check = is_linear_along_path(D, path, probe_count, seed)
        if not check:
            raise NotAConnectionError(
                f"derivation is not linear in X along the path (residual {check.residual:.3e})")
        gammas = basis_components(D, path)

    if grid is None:
        grid = uniform_grid(path.s_start, path.s_end)
    s0 = path.s_start if s0 is None else s0
    B = np.eye(n) if B is None else B

    def W_tangent(s):
        return np.einsum("kij,k->ij", gammas(s), path.gamma_dot(s))

    transport = special_frame_along_path(W_tangent, s0, B, grid, transport_tol, path)
    eye = np.eye(n)

    def frame_at(x):
        s, _ = tube.inverse(x)
        offset = x - np.asarray(path.gamma(s), dtype=float)
        return (eye - np.einsum("kij,k->ij", gammas(s), offset)) @ transport.frame_at(s)

    frame = FrameField(frame_at, chart=path.chart)
    check_grid = transport.grid[::max(1, int(check_stride))]
    Gk = np.empty((check_grid.size, n, n, n))
    residual = np.empty(check_grid.size)
    for a, s in enumerate(check_grid):
        x = path.point(s)
        A = frame(x)
        dA = finite_difference_jacobian(frame.raw, x, transverse_step, chart=path.chart)
        Gk[a] = gammas(s)
        residual[a] = max(tensor_norm(Gk[a, m] @ A + dA[m]) for m in range(n))
    sol = TubeFrameSolution(tube, transport, gammas, frame, check_grid, Gk, residual,
                            transverse_step)
    if sol.max_residual > tol:
        raise ConstructionError(
            f"all-fields residual {sol.max_residual:.3e} exceeds {tol:.1e}")
    return sol


def derivative_along_path(W, V, grid, h=None):
    """``dV/ds + W(s) V(s)`` on ``grid``.

    ``W`` is a callable ``s -> matrix``, an array of matrices aligned with
    ``grid``, or a ``TransportSolution`` (whose residual matrices ``W'`` are
    the components in the constructed frame).  ``V`` is a callable
    ``s -> vector`` (differentiated by central differences with step ``h``)
    or an array of samples aligned with ``grid``.
    """
    grid = np.asarray(grid, dtype=float)
    if isinstance(W, TransportSolution):
        if not np.array_equal(W.grid, grid):
            raise ArgumentError("transport solution and grid differ")
        W_grid = W.W_prime
    elif callable(W):
        W_grid = np.array([W(s) for s in grid], dtype=float)
    else:
        W_grid = np.asarray(W, dtype=float)
        if W_grid.shape[0] != grid.size:
            raise ArgumentError("W samples are not aligned with the grid")
    if callable(V):
        V_grid = np.array([V(s) for s in grid], dtype=float)
        dV = np.empty_like(V_grid)
        for a, s in enumerate(grid):
            step = 1e-5 * max(1.0, abs(s)) if h is None else h
            dV[a] = (np.asarray(V(s + step)) - np.asarray(V(s - step))) / (2 * step)
    else:
        V_grid = np.asarray(V, dtype=float)
        if V_grid.shape[0] != grid.size:
            raise ArgumentError("V samples are not aligned with the grid")
        dV = grid_derivative(grid, V_grid)
    return dV + np.einsum("aij,aj->ai", W_grid, V_grid)
