"""C1-continuous Petrov-Galerkin time stepping for ``u'' = f(t, u, u')``.

On each interval the local solution is a degree-``r`` polynomial expanded in
shifted Legendre polynomials.  Testing the equation against the first
``r - 1`` basis functions and imposing the value and slope handed over from
the previous interval yields a small nonlinear system ``A U = F(U)``, solved
by fixed-point iteration ``U <- A^{-1} F(U)``.

Right-hand sides are evaluated in batches: ``rhs(t, u, v)`` receives ``t`` of
shape ``(q,)`` and ``u``, ``v`` of shape ``(q, M)`` and returns ``(q, M)``.
"""

from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass
from functools import lru_cache
from typing import Callable, Optional

import numpy as np
from scipy.linalg import lu_factor, lu_solve

from .errors import DomainError, InvalidDegreeError, StepFailure
from .mesh import TimeMesh, contraction_check
from .orthopoly import QuadRule, gauss_legendre_rule, legendre_table, shifted_basis_sample

log = logging.getLogger(__name__)

__all__ = [
    "ProblemDef",
    "SolverOptions",
    "StepMatrix",
    "LocalSolution",
    "CpgSolution",
    "ContractionWarning",
    "assemble_step_matrix",
    "assemble_rhs",
    "solve_step",
    "solve",
    "eval_solution",
]

_STALL = 256 * np.finfo(float).eps

Rhs = Callable[[np.ndarray, np.ndarray, np.ndarray], np.ndarray]
Exact = Callable[[np.ndarray, int], np.ndarray]


class ContractionWarning(UserWarning):
    """Step sizes exceed the sufficient bound for a contractive iteration."""


@dataclass
class ProblemDef:
    """Second-order IVP ``u'' = f(t, u, u')``, ``u(0) = u0``, ``u'(0) = u1``.

    ``stiffness`` optionally declares a linear part ``K`` with
    ``f(t, u, v) = -K u + g(t, u, v)``.  The solver then treats ``-K u``
    implicitly and iterates only on ``g``; ``rhs`` must still return the full
    ``f``.  ``stiffness_modes`` may carry a precomputed diagonalization
    ``(eigvals, V, V_inv)`` of ``K``.  ``lipschitz`` estimates the constant of
    ``g`` when a stiffness is given and of ``f`` otherwise.
    """

    dim: int
    rhs: Rhs
    u0: np.ndarray
    u1: np.ndarray
    lipschitz: float
    exact: Optional[Exact] = None
    stiffness: Optional[np.ndarray] = None
    stiffness_modes: Optional[tuple] = None
    name: str = ""

    def __post_init__(self):
        self.u0 = np.atleast_1d(np.asarray(self.u0, dtype=float))
        self.u1 = np.atleast_1d(np.asarray(self.u1, dtype=float))
        if self.dim < 1 or self.u0.shape != (self.dim,) or self.u1.shape != (self.dim,):
            raise ValueError(
                f"initial data shapes {self.u0.shape}, {self.u1.shape} do not match dim={self.dim}"
            )
        if not self.lipschitz > 0:
            raise ValueError(f"lipschitz estimate must be positive, got {self.lipschitz}")
        if self.stiffness is not None:
            self.stiffness = np.asarray(self.stiffness, dtype=float)
            if self.stiffness.shape != (self.dim, self.dim):
                raise ValueError("stiffness must be dim x dim")

    def remainder(self, t, u, v):
        """The part of ``f`` not covered by ``stiffness`` (all of ``f`` if none)."""
        f = self.rhs(t, u, v)
        if self.stiffness is not None:
            f = f + u @ self.stiffness.T
        return f


@dataclass(frozen=True)
class SolverOptions:
    tol: float = 1e-13
    max_iters: int = 200
    # None means r + 8 points on each interval
    quad_points: Optional[int] = None
    quad_extra: int = 8
    # use ProblemDef.stiffness implicitly when present
    linear_implicit: bool = True

    def n_quad(self, r: int) -> int:
        return self.quad_points if self.quad_points else r + self.quad_extra


@dataclass(frozen=True)
class StepMatrix:
    """Local matrix ``A`` for step ``k`` and degree ``r`` with its LU factors."""

    k: float
    r: int
    matrix: np.ndarray
    lu: tuple

    def solve(self, rhs: np.ndarray) -> np.ndarray:
        return lu_solve(self.lu, rhs)


def _step_matrix_entries(k: float, r: int) -> np.ndarray:
    A = np.zeros((r + 1, r + 1))
    # one-based (i, j): Galerkin rows from integrals of phi_j'' phi_i
    for i in range(1, r):
        for j in range(i + 2, r + 2, 2):
            A[i - 1, j - 1] = (2.0 / k) * (i + j - 1) * (j - i)
    j = np.arange(1, r + 2)
    A[r - 1] = (-1.0) ** (j - 1)
    A[r] = (-1.0) ** j * (j - 1) * j / k
    return A


@lru_cache(maxsize=256)
def assemble_step_matrix(k: float, r: int) -> StepMatrix:
    """Assemble and factor the ``(r+1) x (r+1)`` local matrix."""
    if r < 2:
        raise InvalidDegreeError(f"degree must be >= 2, got {r}")
    if not k > 0:
        raise ValueError(f"step size must be positive, got {k}")
    A = _step_matrix_entries(float(k), int(r))
    A.setflags(write=False)
    return StepMatrix(float(k), int(r), A, lu_factor(A))


@dataclass
class LocalSolution:
    """Degree-``r`` polynomial on ``(a, b)``: ``coeffs[l]`` multiplies ``L_l``."""

    interval: tuple[float, float]
    coeffs: np.ndarray
    # right-endpoint value and slope accumulated without re-summing the series
    end_val: Optional[np.ndarray] = None
    end_der: Optional[np.ndarray] = None

    @property
    def degree(self) -> int:
        return self.coeffs.shape[0] - 1

    def __call__(self, t, deriv: int = 0) -> np.ndarray:
        """Values (or derivatives) at points ``t``; shape ``(len(t), M)``."""
        a, b = self.interval
        t = np.atleast_1d(np.asarray(t, dtype=float))
        x = (2.0 * t - a - b) / (b - a)
        tab = legendre_table(self.degree, x, deriv)[deriv] * (2.0 / (b - a)) ** deriv
        return tab.T @ self.coeffs


@dataclass
class CpgSolution:
    mesh: TimeMesh
    locals: list[LocalSolution]
    iterations: np.ndarray
    residuals: np.ndarray
    u0: np.ndarray
    u1: np.ndarray

    @property
    def dim(self) -> int:
        return self.u0.size

    def __call__(self, t, deriv: int = 0) -> np.ndarray:
        return eval_solution(self, t, deriv)


def eval_solution(solution: CpgSolution, t, deriv: int = 0) -> np.ndarray:
    """Evaluate the piecewise solution.

    A scalar ``t`` returns shape ``(M,)``; an array returns ``(len(t), M)``.
    Nodes belong to the interval on their left; at ``t_0`` the imposed
    initial data is returned for ``deriv`` 0 and 1.
    """
    if deriv not in (0, 1, 2):
        raise ValueError(f"derivative order must be 0, 1 or 2, got {deriv}")
    scalar = np.ndim(t) == 0
    tt = np.atleast_1d(np.asarray(t, dtype=float))
    mesh = solution.mesh
    t0, T = mesh.nodes[0], mesh.nodes[-1]
    slack = 1e-12 * max(1.0, abs(T))
    if np.any(tt < t0 - slack) or np.any(tt > T + slack):
        raise DomainError(f"t outside [{t0}, {T}]")
    tt = np.clip(tt, t0, T)
    out = np.empty((tt.size, solution.dim))
    owner = mesh.locate(tt)
    for n in np.unique(owner):
        sel = owner == n
        out[sel] = solution.locals[n - 1](tt[sel], deriv)
    if deriv < 2:
        start = tt == t0
        if np.any(start):
            out[start] = solution.u0 if deriv == 0 else solution.u1
    return out[0] if scalar else out


def _taylor_coeffs(k: float, r: int, init_val: np.ndarray, init_deriv: np.ndarray) -> np.ndarray:
    # u0 + (t - a) u1 with t - a = (k/2)(L_0 + L_1)
    c = np.zeros((r + 1, init_val.size))
    c[0] = init_val + 0.5 * k * init_deriv
    c[1] = 0.5 * k * init_deriv
    return c


def _time_mass(k: float, r: int) -> np.ndarray:
    # int phi_i phi_i dt = k / (2i - 1) for the Galerkin rows; zero on the boundary rows
    mt = np.zeros(r + 1)
    mt[: r - 1] = k / (2.0 * np.arange(1, r) - 1.0)
    return mt


def _load_rows(func, interval, r, coeffs, quad: QuadRule, index: int) -> np.ndarray:
    a, b = interval
    t, w = quad.mapped(a, b)
    basis = shifted_basis_sample((a, b), r, t, 1)
    u = basis[0].T @ coeffs
    v = basis[1].T @ coeffs
    try:
        f = np.asarray(func(t, u, v), dtype=float).reshape(u.shape)
    except StepFailure:
        raise
    except Exception as exc:
        raise StepFailure(f"rhs evaluation failed on interval {index}: {exc}", index) from exc
    return basis[0][: r - 1] @ (w[:, None] * f)


def assemble_rhs(problem: ProblemDef, interval, r: int, iterate, init_val, init_deriv,
                 quad: QuadRule, index: int = 0) -> np.ndarray:
    """Right-hand side ``F(U)`` of the local system, shape ``(r+1, M)``.

    Rows ``0..r-2`` hold Gauss approximations of ``int f(t, U, U') phi_i dt``
    for the current iterate; the last two rows hold the handed-in value and
    derivative.  ``iterate`` is a :class:`LocalSolution` or a coefficient array.
    """
    coeffs = iterate.coeffs if isinstance(iterate, LocalSolution) else np.asarray(iterate, float)
    coeffs = coeffs.reshape(r + 1, -1)
    F = np.empty_like(coeffs)
    F[: r - 1] = _load_rows(problem.rhs, interval, r, coeffs, quad, index)
    F[r - 1] = init_val
    F[r] = init_deriv
    return F


class _ImplicitLinear:
    """Solver for ``A U + M_t U K^T = G`` using a diagonalization of ``K``."""

    def __init__(self, problem: ProblemDef):
        if problem.stiffness_modes is not None:
            lam, V, Vinv = problem.stiffness_modes
        else:
            lam, V = np.linalg.eig(problem.stiffness)
            if np.max(np.abs(lam.imag)) > 1e-10 * max(1.0, np.max(np.abs(lam))):
                raise ValueError("stiffness must have a real spectrum")
            lam, V = lam.real, V.real
            Vinv = np.linalg.inv(V)
        self.lam = np.asarray(lam, dtype=float)
        self.V = np.asarray(V, dtype=float)
        self.Vinv = np.asarray(Vinv, dtype=float)
        self._inv = {}

    def inverses(self, k: float, r: int) -> np.ndarray:
        key = (k, r)
        if key not in self._inv:
            A = assemble_step_matrix(k, r).matrix
            mats = A[None, :, :] + self.lam[:, None, None] * np.diag(_time_mass(k, r))[None, :, :]
            self._inv[key] = np.linalg.inv(mats)
        return self._inv[key]

    def solve(self, k: float, r: int, G: np.ndarray) -> np.ndarray:
        W = G @ self.Vinv.T                     # (r+1, M) in modal coordinates
        W = np.einsum("mij,jm->im", self.inverses(k, r), W)
        return W @ self.V.T


def solve_step(problem: ProblemDef, interval, r: int, init_val, init_deriv,
               opts: SolverOptions = SolverOptions(), index: int = 1,
               _linear: Optional[_ImplicitLinear] = None) -> tuple[LocalSolution, int, float]:
    """Advance one interval by fixed-point iteration.

    The unknown is the correction ``W`` to the linear Taylor polynomial built
    from the handed-in data.  Iteration stops once the sup-norm change of
    ``W`` is below ``tol * |W|_inf`` (or stops shrinking at rounding level).
    Returns ``(local, iterations, last_change)``; raises :class:`StepFailure`
    after ``max_iters`` iterations without convergence.
    """
    a, b = map(float, interval)
    k = b - a
    init_val = np.asarray(init_val, dtype=float).reshape(-1)
    init_deriv = np.asarray(init_deriv, dtype=float).reshape(-1)
    quad = gauss_legendre_rule(opts.n_quad(r))
    implicit = opts.linear_implicit and problem.stiffness is not None
    if implicit and _linear is None:
        _linear = _ImplicitLinear(problem)
    func = problem.remainder if implicit else problem.rhs
    step = assemble_step_matrix(k, r)

    # iterate on the correction W to the linear Taylor polynomial: its
    # boundary rows vanish, so rounding scales with |W| = O(k^2) instead of |U|
    base = _taylor_coeffs(k, r, init_val, init_deriv)
    W = np.zeros_like(base)
    G = np.zeros_like(base)
    if implicit:
        # the implicit linear part also acts on the Taylor polynomial
        shift = _linear.solve(k, r, _time_mass(k, r)[:, None] * (base @ problem.stiffness.T))
    change = np.inf
    for it in range(1, opts.max_iters + 1):
        G[: r - 1] = _load_rows(func, (a, b), r, base + W, quad, index)
        W_new = _linear.solve(k, r, G) - shift if implicit else step.solve(G)
        if not np.all(np.isfinite(W_new)):
            raise StepFailure(f"iteration diverged on interval {index}", index, change, it)
        prev, change = change, float(np.max(np.abs(W_new - W)))
        W = W_new
        size = float(np.max(np.abs(W)))
        # converged relative to the correction, or stalled at rounding level
        stalled = change <= _STALL * max(size, np.finfo(float).tiny) and change >= prev
        if change <= opts.tol * size or stalled:
            end_val = init_val + k * init_deriv + W.sum(axis=0)
            l = np.arange(r + 1)
            end_der = init_deriv + (l * (l + 1) / k) @ W
            return LocalSolution((a, b), base + W, end_val, end_der), it, change
    raise StepFailure(
        f"fixed-point iteration did not converge on interval {index} "
        f"after {opts.max_iters} iterations (last change {change:.3e})",
        index, change, opts.max_iters,
    )


def solve(problem: ProblemDef, mesh: TimeMesh, opts: SolverOptions = SolverOptions()) -> CpgSolution:
    """March over all intervals, handing value and slope across nodes."""
    implicit = opts.linear_implicit and problem.stiffness is not None
    ok = contraction_check(mesh, problem.lipschitz)
    if not ok.all():
        warnings.warn(
            f"{int((~ok).sum())} of {ok.size} intervals violate the contraction bound "
            f"for L={problem.lipschitz}", ContractionWarning, stacklevel=2,
        )
    linear = _ImplicitLinear(problem) if implicit else None
    val, der = problem.u0.copy(), problem.u1.copy()
    locals_, iters, changes = [], [], []
    for n in range(1, mesh.n_intervals + 1):
        interval = mesh.interval(n)
        local, it, change = solve_step(problem, interval, int(mesh.degrees[n - 1]),
                                       val, der, opts, index=n, _linear=linear)
        locals_.append(local)
        iters.append(it)
        changes.append(change)
        val, der = local.end_val, local.end_der
    log.debug("solved %d intervals, max iterations %d", mesh.n_intervals, max(iters))
    return CpgSolution(mesh, locals_, np.array(iters), np.array(changes),
                       problem.u0.copy(), problem.u1.copy())
