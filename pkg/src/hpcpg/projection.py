"""The C1 projector onto degree-r polynomials and the L2 projection.

A function to be projected is passed as ``u(x, deriv)`` returning values of
the ``deriv``-th derivative at an array of points.  On the reference interval
(-1, 1) the degree-``r`` projection matches ``u`` and ``u'`` at -1 and makes
``(u - Pu)''`` orthogonal to polynomials of degree ``r - 2``.  For ``r >= 3``
it equals the cubic Hermite interpolant plus the truncated expansion of ``u``
in generalized Jacobi polynomials ``J_i^{-2,-2}``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np
from numpy.polynomial import Polynomial

from .cpg import CpgSolution, LocalSolution
from .errors import DomainError, InvalidDegreeError
from .mesh import TimeMesh
from .orthopoly import gauss_legendre_rule, jacobi_gen_eval, legendre_table

__all__ = [
    "ReferenceProjection",
    "hermite_cubic",
    "legendre_coefficients",
    "project_c1",
    "project_c1_scaled",
    "project_piecewise",
    "l2_project",
]

Func = Callable[[np.ndarray, int], np.ndarray]


def hermite_cubic(u_left: float, u_right: float, du_left: float, du_right: float) -> Polynomial:
    """Cubic on (-1, 1) matching values and slopes at both endpoints."""
    basis = (
        Polynomial([2.0, -3.0, 0.0, 1.0]) / 4.0,    # (x^3 - 3x + 2) / 4
        Polynomial([2.0, 3.0, 0.0, -1.0]) / 4.0,    # (-x^3 + 3x + 2) / 4
        Polynomial([1.0, -1.0, -1.0, 1.0]) / 4.0,   # (x^3 - x^2 - x + 1) / 4
        Polynomial([-1.0, -1.0, 1.0, 1.0]) / 4.0,   # (x^3 + x^2 - x - 1) / 4
    )
    data = (u_left, u_right, du_left, du_right)
    return sum((c * p for c, p in zip(data, basis)), Polynomial([0.0]))


def legendre_coefficients(g: Callable[[np.ndarray], np.ndarray], n: int, points: int) -> np.ndarray:
    """Legendre coefficients ``(2i+1)/2 * int g L_i`` for ``i = 0..n`` on (-1, 1)."""
    rule = gauss_legendre_rule(points)
    vals = np.asarray(g(rule.nodes), dtype=float)
    L = legendre_table(n, rule.nodes)[0]
    return (2.0 * np.arange(n + 1) + 1.0) / 2.0 * (L @ (rule.weights * vals))


@dataclass(frozen=True)
class ReferenceProjection:
    """``head(x) + sum_i b_i J_i^{-2,-2}(x)`` on (-1, 1), ``i = 4..r``."""

    degree: int
    head: Polynomial
    tail: np.ndarray

    def __call__(self, x, deriv: int = 0) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        out = self.head.deriv(deriv)(x) if deriv else self.head(x)
        out = np.asarray(out, dtype=float) * np.ones_like(x)
        for i, b in enumerate(self.tail, start=4):
            out = out + b * jacobi_gen_eval((-2, -2), i, x, deriv)
        return out

    def legendre(self) -> np.ndarray:
        """Legendre coefficients of the projection (exact up to rounding)."""
        return legendre_coefficients(self, self.degree, self.degree + 1)


def project_c1(u: Func, r: int, points: int | None = None) -> ReferenceProjection:
    """Project ``u`` onto polynomials of degree ``r`` on (-1, 1).

    ``points`` sets the Gauss rule for the Legendre coefficients of ``u''``
    (default ``max(2r, 32)``).
    """
    if r < 2:
        raise InvalidDegreeError(f"projection degree must be >= 2, got {r}")
    ends = np.array([-1.0, 1.0])
    val = np.asarray(u(ends, 0), dtype=float)
    der = np.asarray(u(ends, 1), dtype=float)
    if r == 2:
        head = (
            Polynomial([val[0]])
            - Polynomial([-3.0, -2.0, 1.0]) / 4.0 * der[0]   # (x+1)(x-3)/4
            + Polynomial([1.0, 2.0, 1.0]) / 4.0 * der[1]     # (x+1)^2/4
        )
        return ReferenceProjection(2, head, np.zeros(0))
    head = hermite_cubic(val[0], val[1], der[0], der[1])
    if r == 3:
        return ReferenceProjection(3, head, np.zeros(0))
    npts = points or max(2 * r, 32)
    a = legendre_coefficients(lambda x: u(x, 2), r - 2, npts)
    i = np.arange(4, r + 1)
    b = a[i - 2] / (4.0 * (i - 2) * (i - 3))
    return ReferenceProjection(r, head, b)


def _pullback(u: Func, a: float, b: float) -> Func:
    h = b - a

    def ref(x, deriv=0):
        t = 0.5 * (a + b + h * np.asarray(x, dtype=float))
        return np.asarray(u(t, deriv), dtype=float) * (0.5 * h) ** deriv

    return ref


def project_c1_scaled(u: Func, interval, r: int, points: int | None = None) -> LocalSolution:
    """Projection on ``(a, b)`` through the affine map from (-1, 1).

    ``u`` is scalar-valued; the result has one column.
    """
    a, b = map(float, interval)
    if not a < b:
        raise DomainError(f"degenerate interval ({a}, {b})")
    ref = project_c1(_pullback(u, a, b), r, points)
    return LocalSolution((a, b), ref.legendre()[:, None])


def project_piecewise(u: Func, mesh: TimeMesh, points: int | None = None) -> CpgSolution:
    """Apply the scaled projection interval by interval (scalar ``u``)."""
    locals_ = [
        project_c1_scaled(u, mesh.interval(n), int(mesh.degrees[n - 1]), points)
        for n in range(1, mesh.n_intervals + 1)
    ]
    t0 = np.array([mesh.nodes[0]])
    zeros = np.zeros(mesh.n_intervals)
    return CpgSolution(mesh, locals_, zeros.astype(int), zeros,
                       np.asarray(u(t0, 0), float).reshape(1),
                       np.asarray(u(t0, 1), float).reshape(1))


def l2_project(v: Callable[[np.ndarray], np.ndarray], interval, d: int,
               points: int | None = None) -> np.ndarray:
    """Legendre coefficients (on the pulled-back interval) of the best L2 fit of degree ``d``."""
    if d < 0:
        raise InvalidDegreeError(f"degree must be >= 0, got {d}")
    a, b = map(float, interval)
    if not a < b:
        raise DomainError(f"degenerate interval ({a}, {b})")
    npts = points or max(2 * d + 2, 32)
    return legendre_coefficients(lambda x: v(0.5 * (a + b + (b - a) * x)), d, npts)
