"""S-derivations, linear connections, their frame components and torsion.

Conventions
-----------
Connection coefficients are arrays ``Gamma[i, j, k]`` with
``nabla_{E_k} E_j = Gamma^i_{jk} E_i``; the matrix ``Gamma_k`` with entries
``(Gamma_k)^i_j = Gamma^i_{jk}`` is ``Gamma[:, :, k]``.

The torsion tensor carries an overall minus sign relative to the most common
textbook convention::

    T^i_{kl} = -(Gamma^i_{kl} - Gamma^i_{lk}) - C^i_{kl}

Vector fields are passed as callables returning chart components, or as
constant arrays.  ``S_X`` is likewise given by its chart components.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .errors import EvaluationError
from .geometry import (
    ChartDomain,
    FrameField,
    check_invertible,
    commutation_coefficients,
    finite_difference_jacobian,
)


def as_field(X):
    """Wrap a constant vector as a field; pass callables through."""
    if callable(X):
        return X
    v = np.asarray(X, dtype=float)
    return lambda x: v


@dataclass(frozen=True)
class ConnectionField:
    """Point -> ``n x n x n`` array of connection coefficients."""

    gamma_coeffs: Callable[[np.ndarray], np.ndarray]
    chart: Optional[ChartDomain] = None
    name: str = "connection"

    def coefficients(self, x):
        x = np.asarray(x, dtype=float)
        if self.chart is not None:
            self.chart.check(x)
        G = np.asarray(self.gamma_coeffs(x), dtype=float)
        if not np.isfinite(G).all():
            raise EvaluationError(f"connection coefficients are not finite at {x}")
        return G

    def matrices(self, x):
        """Stack of ``Gamma_k`` matrices, indexed ``[k, i, j]``."""
        return np.moveaxis(self.coefficients(x), 2, 0)

    def contract(self, x, v):
        """``Gamma_k v^k`` in the chart's coordinate basis."""
        return self.coefficients(x) @ np.asarray(v, dtype=float)


@dataclass(frozen=True)
class SDerivationField:
    """A map ``(X, x) -> S_X(x)`` returning chart components of a (1,1) tensor.

    ``linear`` is a declaration only; see ``is_linear_along_path`` for the
    numerical check along a path.
    """

    s_of: Callable
    linear: bool = False
    chart: Optional[ChartDomain] = None
    name: str = "S-derivation"

    def __call__(self, X, x):
        S = np.asarray(self.s_of(as_field(X), np.asarray(x, dtype=float)), dtype=float)
        if not np.all(np.isfinite(S)):
            raise EvaluationError(f"S_X is not finite at {x}")
        return S


def connection_derivation(conn, h=None):
    """The S-derivation ``D_X = nabla_X`` of a linear connection.

    In chart components ``(S_X)^i_j = Gamma^i_{jk} X^k + d_j X^i``.
    """

    def s_of(X, x):
        dX = finite_difference_jacobian(X, x, h)  # [j, i]
        return conn.contract(x, X(x)) + dX.T

    return SDerivationField(s_of, linear=True, chart=conn.chart, name=f"nabla[{conn.name}]")


def transform_components(W, A, XA):
    """Components after the frame change ``E_j' = A^i_j' E_i``.

    ``W' = A^{-1} (W A + X(A))`` where ``XA`` is the derivative of ``A``
    along ``X``.
    """
    A = check_invertible(A)
    return np.linalg.solve(A, np.asarray(W) @ A + np.asarray(XA))


def derivation_components(S, X, frame, x, h=None):
    """Frame components ``W_X`` of an S-derivation at ``x``.

    ``(W_X)^i_j = (S_X)^i_j - E_j(X^i) + C^i_{kj} X^k`` with every quantity
    taken in ``frame``; ``X^i`` are the frame components of ``X``.
    """
    X = as_field(X)
    x = np.asarray(x, dtype=float)
    A = frame(x)
    S_frame = np.linalg.solve(A, S(X, x) @ A)

    def frame_components(y):
        return np.linalg.solve(frame.raw(y), X(y))

    Xf = frame_components(x)
    dXf = finite_difference_jacobian(frame_components, x, h, chart=frame.chart)  # [m, i]
    E_of_X = dXf.T @ A  # [i, j] = A^m_j d_m X^i
    if frame.coordinate:
        return S_frame - E_of_X
    C = commutation_coefficients(frame, x, h)
    return S_frame - E_of_X + np.einsum("ikj,k->ij", C, Xf)


def _frame_derivatives(frame, x, h):
    if frame.coordinate:
        n = x.size
        return np.zeros((n, n, n))
    return finite_difference_jacobian(frame.raw, x, h, chart=frame.chart)


def connection_components(conn, X, frame, x, h=None):
    """``W_X = Gamma'_k X^k`` for a vector ``X`` given by frame components.

    The chart matrix ``Gamma_k v^k`` (``v = A X``) is carried into the frame
    with ``transform_components``, the derivative term being ``v^m d_m A``.
    """
    x = np.asarray(x, dtype=float)
    A = frame(x)
    v = A @ np.asarray(X, dtype=float)
    dA = _frame_derivatives(frame, x, h)
    XA = np.einsum("m,mij->ij", v, dA)
    return transform_components(conn.contract(x, v), A, XA)


def connection_in_frame(conn, frame, x, h=None):
    """Connection coefficients ``Gamma'[i, j, k]`` with respect to ``frame``."""
    x = np.asarray(x, dtype=float)
    A = frame(x)
    dA = _frame_derivatives(frame, x, h)
    G = conn.coefficients(x)
    # Gamma'_k = A^{-1} (Gamma(A e_k) A + A^m_k d_m A)
    rhs = np.einsum("ijm,mk,jl->ilk", G, A, A) + np.einsum("mk,mil->ilk", A, dA)
    return np.einsum("ai,ilk->alk", np.linalg.inv(A), rhs)


def torsion_of_derivation(D, X, Y, frame, x, h=None):
    """Frame components of ``T^D(X, Y) = D_X Y - D_Y X - [X, Y]``.

    ``D`` is a ``ConnectionField`` or an ``SDerivationField``; ``X`` and ``Y``
    are fields (or constant vectors) in chart components.
    """
    X, Y = as_field(X), as_field(Y)
    x = np.asarray(x, dtype=float)
    A = frame(x)
    Xf = np.linalg.solve(A, X(x))
    Yf = np.linalg.solve(A, Y(x))
    if isinstance(D, ConnectionField):
        WX = connection_components(D, Xf, frame, x, h)
        WY = connection_components(D, Yf, frame, x, h)
    else:
        WX = derivation_components(D, X, frame, x, h)
        WY = derivation_components(D, Y, frame, x, h)
    C = commutation_coefficients(frame, x, h)
    return WX @ Yf - WY @ Xf - np.einsum("ikl,k,l->i", C, Xf, Yf)


def torsion_tensor(conn, frame, x, h=None):
    """``T[i, k, l] = -(Gamma'^i_{kl} - Gamma'^i_{lk}) - C^i_{kl}`` in ``frame``."""
    G = connection_in_frame(conn, frame, x, h)
    C = commutation_coefficients(frame, x, h)
    return -(G - G.transpose(0, 2, 1)) - C


def contract_torsion(T, X, Y):
    """``T^i_{kl} X^k Y^l``."""
    return np.einsum("ikl,k,l->i", T, X, Y)


__all__ = [
    "ConnectionField",
    "SDerivationField",
    "as_field",
    "connection_components",
    "connection_derivation",
    "connection_in_frame",
    "contract_torsion",
    "derivation_components",
    "torsion_of_derivation",
    "torsion_tensor",
    "transform_components",
]
