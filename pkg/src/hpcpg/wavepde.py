"""Spectral-Galerkin semi-discretization of ``u_tt - div(b grad u) = f(x, t, u)``.

The space on an interval or rectangle with homogeneous Dirichlet data uses,
per direction, the interior modes ``phi_k = L_{k-1} - L_{k+1}`` (``k = 1..M-1``)
of the mapped coordinate.  For constant ``b`` the 1D stiffness is diagonal and
the mass is pentadiagonal with zero odd bands, both known in closed form; the
2D matrices are Kronecker products of the 1D blocks.  Unknowns in 2D are
ordered ``i * n_y + j`` for the mode ``phi_i(x) phi_j(y)``.

Callables take spatial coordinates as a tuple ``X`` of broadcastable arrays
(``(x,)`` or ``(x, y)``):

* ``f(X, t, u)`` -- source, may depend on the solution ``u``
* ``u0(X)``, ``u1(X)`` -- initial value and velocity
* ``exact(X, t, deriv)`` -- optional, time derivatives ``0..2``
* ``b(X)`` -- optional variable coefficient (assembled by quadrature)
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence, Union

import numpy as np
from scipy.linalg import cho_factor, cho_solve, eigh

from .cpg import CpgSolution, ProblemDef
from .errors import CapabilityError, DomainError, InvalidDegreeError
from .orthopoly import gauss_legendre_rule, legendre_table

__all__ = [
    "WavePDE",
    "SpectralSpace",
    "SemiDiscreteSystem",
    "FieldSolution",
    "build_space",
    "semi_discretize",
    "make_field",
    "reconstruct",
    "pde_norm_error",
    "pde_error_report",
    "PDE_NORM_KINDS",
]

PDE_NORM_KINDS = ("L2L2", "H1L2", "H2L2", "LinfL2")


@dataclass
class WavePDE:
    f: Callable
    u0: Callable
    u1: Callable
    b: Union[float, Callable] = 1.0
    exact: Optional[Callable] = None
    # Lipschitz constant of f in u (the part iterated explicitly)
    lipschitz: float = 1.0
    name: str = ""


@dataclass(frozen=True)
class SpectralSpace:
    domain: tuple[tuple[float, float], ...]
    degrees: tuple[int, ...]
    mass_1d: tuple[np.ndarray, ...] = field(repr=False)
    stiff_1d: tuple[np.ndarray, ...] = field(repr=False)

    @property
    def dim(self) -> int:
        return len(self.domain)

    @property
    def modes(self) -> tuple[int, ...]:
        return tuple(m - 1 for m in self.degrees)

    @property
    def n_dofs(self) -> int:
        return math.prod(self.modes)

    def basis_1d(self, d: int, x, deriv: int = 0) -> np.ndarray:
        """Mode values (or x-derivatives) in direction ``d``; shape ``(modes, len(x))``."""
        a, b = self.domain[d]
        m = self.degrees[d]
        x = np.atleast_1d(np.asarray(x, dtype=float))
        h = b - a
        if np.any(x < a - 1e-12 * h) or np.any(x > b + 1e-12 * h):
            raise DomainError(f"points outside [{a}, {b}]")
        s = np.clip((2.0 * x - a - b) / h, -1.0, 1.0)
        tab = legendre_table(m, s, deriv)[deriv] * (2.0 / h) ** deriv
        return tab[: m - 1] - tab[2 : m + 1]

    def quadrature(self, extra: int = 4):
        """Per-direction Gauss nodes and weights with ``degree + extra`` points."""
        out = []
        for (a, b), m in zip(self.domain, self.degrees):
            out.append(gauss_legendre_rule(m + extra).mapped(a, b))
        return out

    def mass(self) -> np.ndarray:
        return _kron_all(self.mass_1d)

    def stiffness(self) -> np.ndarray:
        mats = []
        for d in range(self.dim):
            blocks = list(self.mass_1d)
            blocks[d] = self.stiff_1d[d]
            mats.append(_kron_all(blocks))
        return sum(mats)

    def evaluate(self, coeffs: np.ndarray, X: Sequence[np.ndarray], deriv: int = 0) -> np.ndarray:
        """Field values on the tensor grid ``X`` for coefficient rows ``(q, n)``.

        Returns shape ``(q,) + grid shape``; ``deriv`` selects a spatial
        derivative direction only in 1D.
        """
        coeffs = np.atleast_2d(coeffs)
        q = coeffs.shape[0]
        if self.dim == 1:
            P = self.basis_1d(0, np.ravel(X[0]), deriv)
            return coeffs @ P
        Px = self.basis_1d(0, np.ravel(X[0]))
        Py = self.basis_1d(1, np.ravel(X[1]))
        C = coeffs.reshape(q, *self.modes)
        return np.einsum("ix,qij,jy->qxy", Px, C, Py)


def _kron_all(blocks) -> np.ndarray:
    out = blocks[0]
    for blk in blocks[1:]:
        out = np.kron(out, blk)
    return out


def _mass_stiff_1d(a: float, b: float, m: int) -> tuple[np.ndarray, np.ndarray]:
    n = m - 1
    k = np.arange(1, n + 1)
    h = b - a
    M = np.diag(2.0 / (2 * k - 1) + 2.0 / (2 * k + 3))
    off = -2.0 / (2 * k[:-2] + 3)
    M[np.arange(n - 2), np.arange(2, n)] = off
    M[np.arange(2, n), np.arange(n - 2)] = off
    S = np.diag(2.0 * (2 * k + 1))
    return 0.5 * h * M, (2.0 / h) * S


def build_space(domain, degrees) -> SpectralSpace:
    """Tensor space on an interval ``(a, b)`` or rectangle ``((a1, b1), (a2, b2))``."""
    dom = tuple(domain)
    if len(dom) == 2 and np.isscalar(dom[0]):
        dom = (dom,)
    dom = tuple((float(a), float(b)) for a, b in dom)
    degs = (int(degrees),) * len(dom) if np.isscalar(degrees) else tuple(int(m) for m in degrees)
    if len(degs) != len(dom) or len(dom) not in (1, 2):
        raise ValueError("need one degree per direction on a 1D or 2D domain")
    for a, b in dom:
        if not (np.isfinite(a) and np.isfinite(b) and a < b):
            raise DomainError(f"degenerate domain side ({a}, {b})")
    if min(degs) < 2:
        raise InvalidDegreeError(f"spectral degree must be >= 2, got {degs}")
    blocks = [_mass_stiff_1d(a, b, m) for (a, b), m in zip(dom, degs)]
    return SpectralSpace(dom, degs, tuple(M for M, _ in blocks), tuple(S for _, S in blocks))


@dataclass
class SemiDiscreteSystem:
    """``B a'' + D a = F(t, a)`` with initial coefficients ``alpha0``, ``alpha1``."""

    space: SpectralSpace
    mass: np.ndarray
    stiffness: np.ndarray
    load: Callable[[np.ndarray, np.ndarray], np.ndarray]
    alpha0: np.ndarray
    alpha1: np.ndarray
    mass_factor: tuple = field(repr=False)
    quad_extra: int = 4

    def mass_solve(self, rhs: np.ndarray) -> np.ndarray:
        return cho_solve(self.mass_factor, rhs)


def _grid(space: SpectralSpace, quad):
    if space.dim == 1:
        (x, wx), = quad
        return (x,), wx
    (x, wx), (y, wy) = quad
    return (x[:, None], y[None, :]), wx[:, None] * wy[None, :]


def _project_load(space: SpectralSpace, quad, vals: np.ndarray) -> np.ndarray:
    """``(g, phi_j)`` for grid values ``vals`` of shape ``(q,) + grid``."""
    if space.dim == 1:
        (x, wx), = quad
        return (vals * wx) @ space.basis_1d(0, x).T
    (x, wx), (y, wy) = quad
    Px = space.basis_1d(0, x) * wx
    Py = space.basis_1d(1, y) * wy
    out = np.einsum("ix,qxy,jy->qij", Px, vals, Py)
    return out.reshape(vals.shape[0], -1)


def _variable_stiffness(space: SpectralSpace, b: Callable, extra: int) -> np.ndarray:
    quad = space.quadrature(extra)
    X, W = _grid(space, quad)
    bw = np.asarray(b(X), dtype=float) * W
    if space.dim == 1:
        (x, _), = quad
        P = space.basis_1d(0, x, 1)
        return (P * bw) @ P.T
    (x, _), (y, _) = quad
    Px, Py = space.basis_1d(0, x), space.basis_1d(1, y)
    dPx, dPy = space.basis_1d(0, x, 1), space.basis_1d(1, y, 1)
    D = (np.einsum("ix,kx,xy,jy,ly->ijkl", dPx, dPx, bw, Py, Py)
         + np.einsum("ix,kx,xy,jy,ly->ijkl", Px, Px, bw, dPy, dPy))
    n = space.n_dofs
    return D.reshape(n, n)


def semi_discretize(pde: WavePDE, space: SpectralSpace, quad_extra: int = 4,
                    quad_points: Optional[int] = None) -> tuple[SemiDiscreteSystem, ProblemDef]:
    """Assemble the coefficient ODE system and wrap it as a :class:`ProblemDef`.

    The returned problem has ``rhs(t, a, a') = -B^{-1} D a + B^{-1} F(t, a)``
    and declares ``B^{-1} D`` as its stiffness, with modes from the symmetric
    generalized eigenproblem, so the time stepper can treat it implicitly.
    ``quad_points`` overrides ``degree + quad_extra`` points per direction.
    """
    if quad_points is not None:
        if quad_points < max(space.degrees) + 1:
            raise ValueError(
                f"quadrature with {quad_points} points is too coarse for degree {max(space.degrees)}"
            )
        quad_extra = quad_points - max(space.degrees)
    if quad_extra < 1:
        raise ValueError("quadrature needs at least degree + 1 points per direction")
    quad = space.quadrature(quad_extra)
    X, W = _grid(space, quad)
    B = space.mass()
    if callable(pde.b):
        D = _variable_stiffness(space, pde.b, quad_extra)
    else:
        D = float(pde.b) * space.stiffness()
    factor = cho_factor(B)

    def initial(g):
        vals = np.broadcast_to(np.asarray(g(X), dtype=float), W.shape)
        return cho_solve(factor, _project_load(space, quad, vals[None])[0])

    alpha0 = initial(pde.u0)
    alpha1 = initial(pde.u1)
    tshape = (-1,) + (1,) * space.dim

    def load(t, alpha):
        t = np.atleast_1d(np.asarray(t, dtype=float))
        u = space.evaluate(alpha, X)
        vals = np.asarray(pde.f(X, t.reshape(tshape), u), dtype=float)
        vals = np.broadcast_to(vals, u.shape)
        return _project_load(space, quad, vals)

    system = SemiDiscreteSystem(space, B, D, load, alpha0, alpha1, factor, quad_extra)

    K = cho_solve(factor, D)
    lam, V = eigh(D, B)
    modes = (lam, V, V.T @ B)

    def rhs(t, a, v):
        F = load(t, a)
        return cho_solve(factor, F.T).T - a @ K.T

    problem = ProblemDef(
        dim=space.n_dofs, rhs=rhs, u0=alpha0, u1=alpha1, lipschitz=pde.lipschitz,
        stiffness=K, stiffness_modes=modes, name=pde.name,
    )
    return system, problem


@dataclass
class FieldSolution:
    solution: CpgSolution
    space: SpectralSpace
    system: Optional[SemiDiscreteSystem] = None

    def __call__(self, X, t, t_deriv: int = 0):
        return reconstruct(self, X, t, t_deriv)


def make_field(solution: CpgSolution, system: SemiDiscreteSystem) -> FieldSolution:
    return FieldSolution(solution, system.space, system)


def reconstruct(field: FieldSolution, x, t: float, t_deriv: int = 0) -> np.ndarray:
    """``sum_i phi_i(x) alpha_i^{(t_deriv)}(t)`` at a point or tensor grid ``x``.

    ``x`` is a coordinate tuple (scalars or 1D arrays per direction); the
    result has the tensor-grid shape (0-d for a single point).
    """
    space = field.space
    coords = tuple(np.atleast_1d(np.asarray(c, dtype=float)) for c in x)
    if len(coords) != space.dim:
        raise DomainError(f"expected {space.dim} coordinates, got {len(coords)}")
    for c, (a, b) in zip(coords, space.domain):
        if np.any(c < a) or np.any(c > b):
            raise DomainError(f"point outside domain side [{a}, {b}]")
    alpha = field.solution(np.array([t]), t_deriv)
    if space.dim == 1:
        grid = (coords[0],)
    else:
        grid = (coords[0], coords[1])
    vals = space.evaluate(alpha, grid)[0]
    if all(np.ndim(c) == 0 for c in x):
        return vals.reshape(())
    return vals


def _exact_grid(exact, X, t: np.ndarray, deriv: int, shape) -> np.ndarray:
    if exact is None or getattr(exact, "max_deriv", 2) < deriv:
        raise CapabilityError(f"exact solution does not provide time derivative {deriv}")
    tshape = (-1,) + (1,) * len(shape)
    try:
        vals = exact(X, t.reshape(tshape), deriv)
    except (NotImplementedError, IndexError, KeyError) as exc:
        raise CapabilityError(f"exact solution does not provide time derivative {deriv}") from exc
    return np.broadcast_to(np.asarray(vals, dtype=float), (t.size,) + shape)


def _space_l2(field: FieldSolution, exact, t: np.ndarray, deriv: int, extra: int) -> np.ndarray:
    """Spatial L2 norm of the error at each time in ``t``."""
    space = field.space
    quad = space.quadrature(extra)
    X, W = _grid(space, quad)
    uh = space.evaluate(field.solution(t, deriv), X)
    e = uh - _exact_grid(exact, X, t, deriv, W.shape)
    axes = tuple(range(1, e.ndim))
    return np.sqrt(np.sum(W * e * e, axis=axes))


def pde_error_report(field: FieldSolution, exact, spatial_extra: int = 4,
                     time_extra: int = 8, linf_samples: int = 10) -> dict:
    """All space-time error measures of a field against ``exact(X, t, deriv)``."""
    sq = np.zeros(3)
    for local in field.solution.locals:
        t, w = gauss_legendre_rule(local.degree + time_extra).mapped(*local.interval)
        for d in range(3):
            sq[d] += np.sum(w * _space_l2(field, exact, t, d, spatial_extra) ** 2)
    cum = np.cumsum(sq)
    nodes = field.solution.mesh.nodes
    samples = [nodes]
    for a, b in zip(nodes[:-1], nodes[1:]):
        samples.append(a + (b - a) * np.arange(1, linf_samples + 1) / (linf_samples + 1))
    ts = np.concatenate(samples)
    linf = float(np.max(_space_l2(field, exact, ts, 0, spatial_extra)))
    nv = float(np.max(_space_l2(field, exact, nodes[1:], 0, spatial_extra)))
    nd = float(np.max(_space_l2(field, exact, nodes[1:], 1, spatial_extra)))
    return {
        "L2L2": math.sqrt(cum[0]),
        "H1L2": math.sqrt(cum[1]),
        "H2L2": math.sqrt(cum[2]),
        "LinfL2": linf,
        "nodal_val": nv,
        "nodal_deriv": nd,
    }


def pde_norm_error(field: FieldSolution, exact, kind: str) -> float:
    """One of ``L2L2``, ``H1L2``, ``H2L2``, ``LinfL2``."""
    if kind not in PDE_NORM_KINDS:
        raise ValueError(f"unknown norm kind {kind!r}; expected one of {PDE_NORM_KINDS}")
    return pde_error_report(field, exact)[kind]
