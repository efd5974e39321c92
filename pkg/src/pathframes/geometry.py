"""Charts, paths, frame fields and commutation coefficients.

Everything lives in a single coordinate chart.  Frames are stored as
matrices ``A`` whose column ``j`` holds the chart components of the frame
vector ``E_j``, so a vector with frame components ``v`` has chart
components ``A @ v``.

Index layout used throughout the package for rank-3 arrays ``T[i, j, k]``:
the first axis is the upper index, the remaining two are the lower ones in
the order they are written.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy.linalg import null_space

from .errors import ArgumentError, DegeneracyError, DomainError, EvaluationError, GeometryError

# condition number above which a frame matrix is treated as singular
MAX_CONDITION = 1e12


def default_step(x):
    """Central-difference step ``1e-5 * max(1, |x|_inf)``."""
    return 1e-5 * max(1.0, float(np.max(np.abs(x))))


def tensor_norm(T):
    """Infinity norm of a vector, matrix or rank-3 array.

    Rank-3 arrays ``T[i, k, l]`` are flattened to ``n x n**2`` matrices
    (row ``i``) before taking the maximum absolute row sum.
    """
    T = np.asarray(T, dtype=float)
    if T.ndim <= 1:
        return float(np.max(np.abs(T))) if T.size else 0.0
    T = T.reshape(T.shape[0], -1)
    return float(np.max(np.sum(np.abs(T), axis=1)))


@dataclass(frozen=True)
class ChartDomain:
    """A rectangular coordinate box ``lower <= x <= upper``."""

    lower: np.ndarray
    upper: np.ndarray

    def __post_init__(self):
        lower = np.atleast_1d(np.asarray(self.lower, dtype=float))
        upper = np.atleast_1d(np.asarray(self.upper, dtype=float))
        if lower.ndim != 1 or lower.shape != upper.shape or lower.size < 1:
            raise ArgumentError("chart bounds must be 1-d arrays of equal length n >= 1")
        if not np.all(lower < upper):
            raise ArgumentError("chart bounds need lower[i] < upper[i]")
        object.__setattr__(self, "lower", lower)
        object.__setattr__(self, "upper", upper)

    @classmethod
    def box(cls, n, half_width=10.0):
        return cls(-half_width * np.ones(n), half_width * np.ones(n))

    @property
    def n(self):
        return self.lower.size

    def contains(self, x):
        x = np.asarray(x, dtype=float)
        return x.shape == self.lower.shape and bool(
            ((x >= self.lower) & (x <= self.upper)).all())

    def check(self, x):
        x = np.asarray(x, dtype=float)
        if x.shape != (self.n,):
            raise DomainError(f"point has shape {x.shape}, chart dimension is {self.n}")
        if not self.contains(x):
            raise DomainError(f"point {x} lies outside the chart box")
        return x


def _as_point(x):
    x = np.asarray(x, dtype=float)
    if x.ndim != 1:
        raise ArgumentError(f"a point must be a 1-d coordinate vector, got shape {x.shape}")
    return x


def finite_difference_jacobian(f, x, h=None, chart=None):
    """Central-difference partial derivatives of ``f`` at ``x``.

    Returns an array ``D`` with ``D[k] = (f(x + h e_k) - f(x - h e_k)) / 2h``,
    so ``D`` has shape ``(n,) + shape(f(x))``.  The error is O(h**2) for
    smooth ``f``.
    """
    x = _as_point(x)
    if h is None:
        h = default_step(x)
    if not h > 0:
        raise ArgumentError(f"finite-difference step must be positive, got {h}")
    n = x.size
    out = None
    for k in range(n):
        xp = x.copy()
        xm = x.copy()
        xp[k] += h
        xm[k] -= h
        if chart is not None and not (chart.contains(xp) and chart.contains(xm)):
            raise DomainError(f"stencil around {x} with step {h} leaves the chart")
        d = (np.asarray(f(xp), dtype=float) - np.asarray(f(xm), dtype=float)) / (2 * h)
        if out is None:
            out = np.empty((n,) + d.shape)
        out[k] = d
    return out


@dataclass(frozen=True)
class FrameField:
    """Point -> invertible ``n x n`` matrix of frame-vector components.

    ``coordinate=True`` marks the chart's own coordinate basis (the identity
    everywhere); commutators are then known to vanish without differencing.
    """

    frame: Callable[[np.ndarray], np.ndarray]
    chart: Optional[ChartDomain] = None
    coordinate: bool = False

    @classmethod
    def identity(cls, n, chart=None):
        eye = np.eye(n)
        return cls(lambda x: eye, chart=chart, coordinate=True)

    @classmethod
    def constant(cls, A, chart=None):
        A = np.array(A, dtype=float)
        check_invertible(A)
        return cls(lambda x: A, chart=chart)

    def raw(self, x):
        """Evaluate without the invertibility check (used inside stencils)."""
        x = _as_point(x)
        if self.chart is not None:
            self.chart.check(x)
        A = np.asarray(self.frame(x), dtype=float)
        if not np.isfinite(A).all():
            raise EvaluationError(f"frame is not finite at {x}")
        return A

    def __call__(self, x):
        A = self.raw(x)
        check_invertible(A)
        return A


def condition_number(A):
    """1-norm condition number; ``inf`` for singular matrices."""
    try:
        inv = np.linalg.inv(A)
    except np.linalg.LinAlgError:
        return np.inf
    return float(np.abs(A).sum(axis=0).max() * np.abs(inv).sum(axis=0).max())


def check_invertible(A, what="frame matrix"):
    A = np.asarray(A, dtype=float)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise DegeneracyError(f"{what} must be square, got shape {A.shape}")
    if not np.isfinite(A).all() or not condition_number(A) <= MAX_CONDITION:
        raise DegeneracyError(f"{what} is singular or ill-conditioned")
    return A


def commutation_coefficients(frame, x, h=None):
    """Structure functions ``C[i, j, k]`` with ``[E_j, E_k] = C^i_{jk} E_i``.

    The chart components of the bracket are
    ``A^m_j d_m A^i_k - A^m_k d_m A^i_j``; contracting with ``A^{-1}`` gives
    them in the frame itself.  The result is antisymmetric in ``(j, k)``
    bitwise.
    """
    x = _as_point(x)
    A = frame(x)
    n = A.shape[0]
    if frame.coordinate:
        return np.zeros((n, n, n))
    dA = finite_difference_jacobian(frame.raw, x, h, chart=frame.chart)  # [m, l, k]
    Ainv = np.linalg.inv(A)
    D = np.einsum("il,mj,mlk->ijk", Ainv, A, dA)
    return D - D.transpose(0, 2, 1)


@dataclass(frozen=True)
class PathCurve:
    """A C1 path ``s -> gamma(s)`` on ``[s_start, s_end]`` with its tangent.

    ``grid_size`` is the number of steps of the uniform sampling grid.
    """

    gamma: Callable[[float], np.ndarray]
    gamma_dot: Callable[[float], np.ndarray]
    s_start: float
    s_end: float
    grid_size: int = 1000
    chart: Optional[ChartDomain] = None
    name: str = "path"

    def __post_init__(self):
        if not self.s_start < self.s_end:
            raise ArgumentError("path needs s_start < s_end")
        if int(self.grid_size) < 1:
            raise ArgumentError("grid_size must be a positive integer")
        object.__setattr__(self, "grid_size", int(self.grid_size))

    @property
    def n(self):
        return np.asarray(self.gamma(self.s_start)).size

    @property
    def grid(self):
        return np.linspace(self.s_start, self.s_end, self.grid_size + 1)

    def with_grid_size(self, grid_size):
        return PathCurve(self.gamma, self.gamma_dot, self.s_start, self.s_end,
                         grid_size, self.chart, self.name)

    def point(self, s):
        x = np.asarray(self.gamma(s), dtype=float)
        if self.chart is not None:
            self.chart.check(x)
        return x

    def points(self, grid=None):
        grid = self.grid if grid is None else grid
        return np.array([self.point(s) for s in grid])

    def tangents(self, grid=None):
        grid = self.grid if grid is None else grid
        return np.array([np.asarray(self.gamma_dot(s), dtype=float) for s in grid])

    def tangent_error(self, grid=None, h=None):
        """Max deviation of ``gamma_dot`` from central differences of ``gamma``."""
        grid = self.grid if grid is None else grid
        h = 1e-4 if h is None else h
        worst = 0.0
        for s in grid:
            fd = (np.asarray(self.gamma(s + h)) - np.asarray(self.gamma(s - h))) / (2 * h)
            worst = max(worst, float(np.max(np.abs(fd - self.gamma_dot(s)))))
        return worst


def line_path(start, end, grid_size=1000, chart=None):
    """Straight chart line from ``start`` (s=0) to ``end`` (s=1)."""
    start = np.asarray(start, dtype=float)
    delta = np.asarray(end, dtype=float) - start
    return PathCurve(lambda s: start + s * delta, lambda s: delta.copy(),
                     0.0, 1.0, grid_size, chart, "line")


def circle_path(center, radius, s_start=0.0, s_end=2 * np.pi, grid_size=1000, chart=None):
    """Chart circle ``center + radius (cos s, sin s)`` in the first two coordinates."""
    center = np.asarray(center, dtype=float)

    def gamma(s):
        x = center.copy()
        x[0] += radius * np.cos(s)
        x[1] += radius * np.sin(s)
        return x

    def gamma_dot(s):
        v = np.zeros_like(center)
        v[0] = -radius * np.sin(s)
        v[1] = radius * np.cos(s)
        return v

    return PathCurve(gamma, gamma_dot, s_start, s_end, grid_size, chart, "circle")


def latitude_path(theta0, s_start=0.0, s_end=2 * np.pi, grid_size=1000, chart=None):
    """Coordinate line ``(theta0, s)``: a latitude on the sphere, a circle in polar charts."""
    return PathCurve(lambda s: np.array([theta0, s], dtype=float),
                     lambda s: np.array([0.0, 1.0]),
                     s_start, s_end, grid_size, chart, "latitude")


@dataclass(frozen=True)
class TubeMap:
    """Affine tube ``eta(s, t) = gamma(s) + N (t - t0)`` around a path.

    ``N`` holds an orthonormal basis of the complement of the unit tangent
    ``nu`` at the reference parameter, so ``eta`` is a bijection exactly when
    ``nu . gamma(s)`` is strictly increasing.
    """

    path: PathCurve
    normals: np.ndarray
    nu: np.ndarray
    radius: float
    t0: np.ndarray = field(default=None)

    def __post_init__(self):
        n = self.nu.size
        t0 = np.zeros(n - 1) if self.t0 is None else np.asarray(self.t0, dtype=float)
        object.__setattr__(self, "t0", t0)
        grid = self.path.grid
        heights = np.array([self.nu @ self.path.gamma(s) for s in grid])
        object.__setattr__(self, "_grid", grid)
        object.__setattr__(self, "_heights", heights)

    @property
    def n(self):
        return self.nu.size

    def eta(self, s, t):
        t = np.atleast_1d(np.asarray(t, dtype=float))
        return np.asarray(self.path.gamma(s), dtype=float) + self.normals @ (t - self.t0)

    def jacobian(self, s):
        """Columns ``d eta/ds, d eta/dt^1, ...`` at parameter ``s``."""
        return np.column_stack([self.path.gamma_dot(s), self.normals])

    def monotone(self):
        speeds = np.array([self.nu @ self.path.gamma_dot(s) for s in self._grid])
        return bool(np.all(speeds > 0) and np.all(np.diff(self._heights) > 0))

    def inverse(self, x, margin=None):
        """Adapted coordinates ``(s, t)`` of a chart point ``x``."""
        x = np.asarray(x, dtype=float)
        p = self.nu @ x
        grid, heights = self._grid, self._heights
        span = grid[-1] - grid[0]
        margin = 1e-3 * span if margin is None else margin
        s = float(np.interp(p, heights, grid))
        if p < heights[0] or p > heights[-1]:
            # short linear extrapolation off the ends, refined by Newton below
            slope = self.nu @ self.path.gamma_dot(s)
            s = s + (p - self.nu @ self.path.gamma(s)) / slope
        for _ in range(30):
            g = self.nu @ self.path.gamma(s) - p
            ds = g / (self.nu @ self.path.gamma_dot(s))
            s -= ds
            if abs(ds) <= 1e-15 * max(1.0, abs(s)):
                break
        if s < grid[0] - margin or s > grid[-1] + margin:
            raise DomainError(f"point {x} projects outside the tube's parameter range")
        t = self.normals.T @ (x - np.asarray(self.path.gamma(s), dtype=float)) + self.t0
        return s, t

    def sample(self, s_count=120, t_count=5):
        """Tube images over an ``s x t`` lattice; returns ``(params, points)``."""
        s_values = np.linspace(self._grid[0], self._grid[-1], s_count)
        axis = np.linspace(-self.radius, self.radius, t_count)
        offsets = np.array(np.meshgrid(*([axis] * (self.n - 1)), indexing="ij"))
        offsets = offsets.reshape(self.n - 1, -1).T + self.t0
        params, points = [], []
        for s in s_values:
            for t in offsets:
                params.append((s, t))
                points.append(self.eta(s, t))
        return params, np.array(points)

    def check_injective(self, s_count=120, t_count=3, collision_fraction=0.25):
        """Raise GeometryError unless the tube is injective and inside the chart."""
        if not self.monotone():
            raise GeometryError(
                f"tube around '{self.path.name}' is not injective: the path doubles "
                "back or self-intersects relative to the transverse plane")
        params, pts = self.sample(s_count, max(t_count, 1))
        chart = self.path.chart
        if chart is not None:
            for x in pts:
                if not chart.contains(x):
                    raise GeometryError(f"tube point {x} leaves the chart")
        # collision check over non-adjacent lattice sites
        ds = (self._grid[-1] - self._grid[0]) / (s_count - 1)
        speed = min(np.linalg.norm(self.path.gamma_dot(s)) for s, _ in params[::t_count])
        tol = collision_fraction * min(ds * speed, 2 * self.radius / max(t_count - 1, 1))
        diff = pts[:, None, :] - pts[None, :, :]
        dist = np.sqrt(np.einsum("abk,abk->ab", diff, diff))
        np.fill_diagonal(dist, np.inf)
        if np.min(dist) < tol:
            raise GeometryError("two tube samples collide; the tube is not injective")
        return True


def affine_tube(path, s_ref=None, radius=None):
    """Constant-transverse-frame tube around ``path``.

    The transverse basis completes the unit tangent at ``s_ref`` (default
    ``path.s_start``) by its orthogonal complement in chart coordinates.
    The default radius is 5% of the chord length (of the arc length when
    the path closes up).
    """
    s_ref = path.s_start if s_ref is None else s_ref
    tangent = np.asarray(path.gamma_dot(s_ref), dtype=float)
    norm = np.linalg.norm(tangent)
    if norm == 0:
        raise GeometryError("path tangent vanishes at the tube reference parameter")
    nu = tangent / norm
    normals = null_space(nu[None, :])
    if radius is None:
        chord = np.linalg.norm(np.asarray(path.gamma(path.s_end)) - np.asarray(path.gamma(path.s_start)))
        if chord < 1e-9:
            grid = path.grid
            pts = path.points(grid) if path.chart is None else np.array([path.gamma(s) for s in grid])
            chord = float(np.sum(np.linalg.norm(np.diff(pts, axis=0), axis=1)))
        radius = 0.05 * chord
    return TubeMap(path, normals, nu, float(radius))
