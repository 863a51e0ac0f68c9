"""Legendre and generalized Jacobi polynomials, shifted bases, Gauss-Legendre rules.

All evaluators accept scalars or arrays for ``x`` and return arrays of the
same shape (0-d arrays for scalar input).  Values are produced by three-term
recurrences; derivatives of the Legendre family use the differentiated
recurrence ``L'_{n+1} = L'_{n-1} + (2n+1) L_n`` which stays well behaved at
the endpoints.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .errors import DomainError, InvalidDegreeError

__all__ = [
    "QuadRule",
    "BasisSample",
    "legendre_table",
    "legendre_eval",
    "jacobi_eval",
    "jacobi_gen_eval",
    "gauss_legendre_rule",
    "shifted_basis_sample",
]

_FAMILIES = {(-1, -1): 2, (-2, -2): 4}


@dataclass(frozen=True)
class QuadRule:
    """Gauss-Legendre nodes and weights on the reference interval (-1, 1)."""

    nodes: np.ndarray
    weights: np.ndarray

    def mapped(self, a: float, b: float) -> tuple[np.ndarray, np.ndarray]:
        """Nodes and weights pushed forward to ``(a, b)``."""
        half = 0.5 * (b - a)
        return 0.5 * (a + b) + half * self.nodes, half * self.weights

    def __len__(self) -> int:
        return len(self.nodes)


@dataclass(frozen=True)
class BasisSample:
    """Shifted Legendre basis sampled at points.

    ``values[k]`` is the ``(degree+1, npoints)`` matrix of k-th time
    derivatives; row ``l`` holds ``phi_{l+1}`` (zero-based row = Legendre degree).
    """

    values: tuple[np.ndarray, ...]

    def __getitem__(self, k: int) -> np.ndarray:
        return self.values[k]


def legendre_table(n: int, x, deriv: int = 0) -> np.ndarray:
    """Return ``[L_0^{(k)}(x), ..., L_n^{(k)}(x)]`` for ``k = 0..deriv``.

    Output shape is ``(deriv+1, n+1) + x.shape``.
    """
    if n < 0:
        raise InvalidDegreeError(f"Legendre degree must be >= 0, got {n}")
    if deriv not in (0, 1, 2):
        raise ValueError(f"derivative order must be 0, 1 or 2, got {deriv}")
    x = np.asarray(x, dtype=float)
    out = np.zeros((deriv + 1, n + 1) + x.shape)
    out[0, 0] = 1.0
    if n >= 1:
        out[0, 1] = x
    for m in range(1, n):
        out[0, m + 1] = ((2 * m + 1) * x * out[0, m] - m * out[0, m - 1]) / (m + 1)
    for k in range(1, deriv + 1):
        # L^{(k)}_{m+1} = L^{(k)}_{m-1} + (2m+1) L^{(k-1)}_m
        if n >= 1:
            out[k, 1] = out[k - 1, 0]
        for m in range(1, n):
            out[k, m + 1] = out[k, m - 1] + (2 * m + 1) * out[k - 1, m]
    return out


def legendre_eval(n: int, x, k: int = 0):
    """``k``-th derivative of the Legendre polynomial ``L_n`` at ``x``."""
    x = np.asarray(x, dtype=float)
    if np.any(np.abs(x) > 1.0 + 1e-14):
        raise DomainError("Legendre evaluation requires |x| <= 1")
    return legendre_table(n, x, k)[k, n]


def _jacobi_values(n: int, alpha: float, beta: float, x: np.ndarray) -> np.ndarray:
    """Classical Jacobi ``P_0..P_n`` (standard normalization) by recurrence."""
    out = np.zeros((n + 1,) + x.shape)
    out[0] = 1.0
    if n >= 1:
        out[1] = 0.5 * (alpha - beta) + 0.5 * (alpha + beta + 2.0) * x
    ab = alpha + beta
    for m in range(2, n + 1):
        c = 2 * m + ab
        a1 = 2.0 * m * (m + ab) * (c - 2)
        a2 = (c - 1) * (alpha * alpha - beta * beta)
        a3 = (c - 2) * (c - 1) * c
        a4 = 2.0 * (m + alpha - 1) * (m + beta - 1) * c
        out[m] = ((a2 + a3 * x) * out[m - 1] - a4 * out[m - 2]) / a1
    return out


def jacobi_eval(n: int, alpha: float, beta: float, x, k: int = 0):
    """``k``-th derivative of the classical Jacobi polynomial ``P_n^{(alpha,beta)}``.

    Uses ``d/dx P_n^{(a,b)} = (n+a+b+1)/2 * P_{n-1}^{(a+1,b+1)}``.
    """
    if n < 0:
        raise InvalidDegreeError(f"Jacobi degree must be >= 0, got {n}")
    x = np.asarray(x, dtype=float)
    if k > n:
        return np.zeros_like(x)
    scale = 1.0
    for j in range(k):
        scale *= 0.5 * (n + alpha + beta + 1 + j)
    return scale * _jacobi_values(n - k, alpha + k, beta + k, x)[n - k]


def jacobi_gen_eval(family: tuple[int, int], n: int, x, k: int = 0):
    """Generalized Jacobi polynomial with negative indices, or a derivative.

    ``family`` is ``(-1, -1)`` giving ``(1-x^2) P^{(1,1)}_{n-2}`` (``n >= 2``) or
    ``(-2, -2)`` giving ``(1-x^2)^2 P^{(2,2)}_{n-4}`` (``n >= 4``).  Derivatives
    up to order 2 come from the product rule on these definitions.
    """
    family = tuple(family)
    if family not in _FAMILIES:
        raise ValueError(f"unsupported family {family}")
    if k not in (0, 1, 2):
        raise ValueError(f"derivative order must be 0, 1 or 2, got {k}")
    shift = _FAMILIES[family]
    if n < shift:
        raise InvalidDegreeError(
            f"degree {n} below minimum {shift} for family {family}"
        )
    x = np.asarray(x, dtype=float)
    power = shift // 2
    a = float(power)
    p = [jacobi_eval(n - shift, a, a, x, j) for j in range(k + 1)]
    s = 1.0 - x * x
    if power == 1:
        w = [s, -2.0 * x, np.full_like(x, -2.0)]
    else:
        w = [s * s, -4.0 * x * s, 12.0 * x * x - 4.0]
    if k == 0:
        return w[0] * p[0]
    if k == 1:
        return w[1] * p[0] + w[0] * p[1]
    return w[2] * p[0] + 2.0 * w[1] * p[1] + w[0] * p[2]


@lru_cache(maxsize=128)
def _gauss_legendre(n: int) -> tuple[np.ndarray, np.ndarray]:
    i = np.arange(1, n + 1)
    # Chebyshev-like initial guess, refined by Newton on L_n
    x = np.cos(np.pi * (i - 0.25) / (n + 0.5))
    for _ in range(100):
        tab = legendre_table(n, x, 1)
        dx = tab[0, n] / tab[1, n]
        x = x - dx
        if np.max(np.abs(dx)) < 1e-16:
            break
    dp = legendre_table(n, x, 1)[1, n]
    w = 2.0 / ((1.0 - x * x) * dp * dp)
    order = np.argsort(x)
    x, w = x[order], w[order]
    # exact symmetry
    x = 0.5 * (x - x[::-1])
    w = 0.5 * (w + w[::-1])
    x.setflags(write=False)
    w.setflags(write=False)
    return x, w


def gauss_legendre_rule(n: int) -> QuadRule:
    """``n``-point Gauss-Legendre rule on (-1, 1), exact for degree ``2n-1``."""
    if n < 1:
        raise ValueError(f"need at least one quadrature point, got {n}")
    x, w = _gauss_legendre(int(n))
    return QuadRule(x, w)


def shifted_basis_sample(interval, degree: int, points, deriv: int = 0) -> BasisSample:
    """Sample ``phi_l(t) = L_{l-1}((2t - a - b) / (b - a))`` and derivatives.

    Returns all derivative orders ``0..deriv`` with the chain-rule factor
    ``(2 / (b - a))**k`` applied.
    """
    a, b = map(float, interval)
    if not a < b:
        raise DomainError(f"degenerate interval ({a}, {b})")
    t = np.atleast_1d(np.asarray(points, dtype=float))
    slack = 1e-12 * max(1.0, abs(a), abs(b))
    if np.any(t < a - slack) or np.any(t > b + slack):
        raise DomainError(f"sample points outside interval ({a}, {b})")
    x = np.clip((2.0 * t - a - b) / (b - a), -1.0, 1.0)
    tab = legendre_table(degree, x, deriv)
    scale = 2.0 / (b - a)
    return BasisSample(tuple(tab[k] * scale**k for k in range(deriv + 1)))
