"""Error norms, nodal errors, empirical orders and Hamiltonian energy."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .cpg import CpgSolution
from .errors import CapabilityError, CpgError
from .orthopoly import gauss_legendre_rule

__all__ = [
    "ErrorReport",
    "EnergySeries",
    "SingularityError",
    "NORM_KINDS",
    "norm_error",
    "error_report",
    "nodal_errors",
    "eoc",
    "hamiltonian_energy",
    "energy_series",
    "sup_samples",
]

NORM_KINDS = ("L2", "H1", "H2", "Linf", "dLinf")
SUP_POINTS = 50


class SingularityError(CpgError, ValueError):
    """Hamiltonian evaluated at the gravitational singularity."""


@dataclass(frozen=True)
class ErrorReport:
    l2: float
    h1: float
    h2: float
    linf: float
    dlinf: float
    nodal_max_value: float
    nodal_max_deriv: float


@dataclass(frozen=True)
class EnergySeries:
    times: np.ndarray
    energies: np.ndarray
    errors: np.ndarray


def _exact(exact, t: np.ndarray, deriv: int) -> np.ndarray:
    if getattr(exact, "max_deriv", 2) < deriv:
        raise CapabilityError(f"exact solution does not provide derivative {deriv}")
    try:
        vals = exact(t, deriv)
    except (NotImplementedError, IndexError, KeyError) as exc:
        raise CapabilityError(f"exact solution does not provide derivative {deriv}") from exc
    return np.asarray(vals, dtype=float).reshape(t.size, -1)


def _pointwise(diff: np.ndarray) -> np.ndarray:
    return np.sqrt(np.sum(diff * diff, axis=-1))


def sup_samples(a: float, b: float, n: int = SUP_POINTS) -> np.ndarray:
    """Chebyshev-Gauss points on ``(a, b)`` plus both endpoints, ascending."""
    j = np.arange(1, n + 1)
    x = np.cos((2 * j - 1) * np.pi / (2 * n))[::-1]
    return np.concatenate(([a], 0.5 * (a + b) + 0.5 * (b - a) * x, [b]))


def _integral_squares(solution: CpgSolution, exact, top: int, extra: int) -> np.ndarray:
    sums = np.zeros(top + 1)
    for local in solution.locals:
        t, w = gauss_legendre_rule(local.degree + extra).mapped(*local.interval)
        for d in range(top + 1):
            e = _pointwise(local(t, d) - _exact(exact, t, d))
            sums[d] += np.sum(w * e * e)
    return sums


def _sup(solution: CpgSolution, exact, deriv: int) -> float:
    worst = 0.0
    for local in solution.locals:
        t = sup_samples(*local.interval)
        worst = max(worst, float(np.max(_pointwise(local(t, deriv) - _exact(exact, t, deriv)))))
    return worst


def norm_error(solution: CpgSolution, exact, kind: str, quad_extra: int = 8) -> float:
    """Error of ``solution`` against ``exact(t, deriv)`` in one norm.

    Integral norms use a Gauss rule with ``r + quad_extra`` points per
    interval and the cumulative convention ``|e|_{H2}^2 = |e|^2 + |e'|^2 + |e''|^2``.
    Sup norms sample 50 Chebyshev points per interval plus the endpoints.
    """
    if kind == "Linf":
        return _sup(solution, exact, 0)
    if kind == "dLinf":
        return _sup(solution, exact, 1)
    top = {"L2": 0, "H1": 1, "H2": 2}.get(kind)
    if top is None:
        raise ValueError(f"unknown norm kind {kind!r}; expected one of {NORM_KINDS}")
    return math.sqrt(float(np.sum(_integral_squares(solution, exact, top, quad_extra))))


def nodal_errors(solution: CpgSolution, exact) -> tuple[float, float]:
    """Largest value and derivative errors over the nodes ``t_1..t_N``."""
    t = solution.mesh.nodes[1:]
    ev = _pointwise(solution(t, 0) - _exact(exact, t, 0))
    ed = _pointwise(solution(t, 1) - _exact(exact, t, 1))
    return float(ev.max()), float(ed.max())


def error_report(solution: CpgSolution, exact, quad_extra: int = 8) -> ErrorReport:
    sq = np.cumsum(_integral_squares(solution, exact, 2, quad_extra))
    nv, nd = nodal_errors(solution, exact)
    return ErrorReport(
        l2=math.sqrt(sq[0]), h1=math.sqrt(sq[1]), h2=math.sqrt(sq[2]),
        linf=_sup(solution, exact, 0), dlinf=_sup(solution, exact, 1),
        nodal_max_value=nv, nodal_max_deriv=nd,
    )


def eoc(errors: Sequence[float], steps: Sequence[float]) -> list[float | None]:
    """Orders ``log(e_{i-1}/e_i) / log(k_{i-1}/k_i)``; ``None`` where undefined."""
    if len(errors) != len(steps) or len(errors) < 2:
        raise ValueError("need two or more errors and matching steps")
    out: list[float | None] = []
    for (e0, e1), (k0, k1) in zip(zip(errors, errors[1:]), zip(steps, steps[1:])):
        if not (e0 > 0 and e1 > 0 and k0 > 0 and k1 > 0) or k0 == k1:
            out.append(None)
            continue
        out.append(math.log(e0 / e1) / math.log(k0 / k1))
    return out


def hamiltonian_energy(state) -> np.ndarray | float:
    """Kepler energy ``(p1^2 + p2^2)/2 - 1/|q|`` of ``(q1, q2, p1, p2)``.

    ``state`` may be a 4-sequence or an array whose last axis has length 4.
    """
    s = np.asarray(state, dtype=float)
    q1, q2, p1, p2 = np.moveaxis(s, -1, 0)
    rad = np.hypot(q1, q2)
    if np.any(rad == 0.0):
        raise SingularityError("energy undefined at q = (0, 0)")
    h = 0.5 * (p1 * p1 + p2 * p2) - 1.0 / rad
    return float(h) if np.ndim(h) == 0 else h


def energy_series(solution: CpgSolution) -> EnergySeries:
    """Energy and its drift from the initial energy at every node."""
    if solution.dim != 2:
        raise ValueError("energy series needs a planar two-body solution (dim 2)")
    t = solution.mesh.nodes
    state = np.hstack([solution(t, 0), solution(t, 1)])
    h = hamiltonian_energy(state)
    h0 = hamiltonian_energy(np.concatenate([solution.u0, solution.u1]))
    err = np.abs(h - h0)
    err[0] = 0.0
    return EnergySeries(t.copy(), h, err)
