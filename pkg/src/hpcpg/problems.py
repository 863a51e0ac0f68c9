"""Built-in test problems with exact solutions and manufactured forcing."""

from __future__ import annotations

import importlib
import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .cpg import ProblemDef
from .errors import LookupFailure
from .wavepde import SemiDiscreteSystem, WavePDE, build_space, semi_discretize

__all__ = [
    "Example",
    "ExampleInstance",
    "registry",
    "get_example",
    "instantiate",
    "ex1_problem",
    "two_body_problem",
    "kepler_exact",
    "linear_wave_pde",
    "sine_gordon_pde",
]


@dataclass
class ExampleInstance:
    """A ready-to-solve problem.

    ``exact`` is ``exact(t, deriv) -> (q, M)`` for ODE problems and
    ``exact(X, t, deriv)`` (field values) when ``system`` is set.
    """

    problem: ProblemDef
    T: float
    exact: Optional[Callable] = None
    system: Optional[SemiDiscreteSystem] = None
    note: str = ""

    @property
    def is_pde(self) -> bool:
        return self.system is not None


@dataclass(frozen=True)
class Example:
    id: str
    description: str
    T: float
    lipschitz: float
    factory: Callable[..., ExampleInstance] = field(repr=False)
    params: dict = field(default_factory=dict)


# --- Example 1 -------------------------------------------------------------
# u'' = sin u - 2 cos u' + g(t) with u = sin t:
#   u'' = -sin t,  sin u = sin(sin t),  cos u' = cos(cos t)
#   => g(t) = -sin t - sin(sin t) + 2 cos(cos t)
# |df/du| <= 1 and |df/du'| <= 2, hence L = 2.

def _ex1_g(t):
    return -np.sin(t) - np.sin(np.sin(t)) + 2.0 * np.cos(np.cos(t))


def _ex1_rhs(t, u, v):
    return np.sin(u) - 2.0 * np.cos(v) + _ex1_g(t)[:, None]


def _sin_exact(t, deriv=0):
    t = np.atleast_1d(np.asarray(t, dtype=float))
    return np.sin(t + 0.5 * math.pi * deriv)[:, None]


def ex1_problem() -> ProblemDef:
    return ProblemDef(dim=1, rhs=_ex1_rhs, u0=[0.0], u1=[1.0], lipschitz=2.0,
                      exact=_sin_exact, name="ex1")


def _ex1(T: float = 1.0) -> ExampleInstance:
    return ExampleInstance(ex1_problem(), T, _sin_exact)


# --- Example 2: Kepler two-body problem ------------------------------------

def _kepler_rhs(t, u, v):
    r3 = np.sum(u * u, axis=1, keepdims=True) ** 1.5
    return -u / r3


def kepler_exact(eps: float) -> Callable:
    """Closed-form orbit through the eccentric anomaly ``E - eps sin E = t``.

    ``q1 = cos E - eps``, ``q2 = sqrt(1 - eps^2) sin E``.
    """
    s = math.sqrt(1.0 - eps * eps)

    def anomaly(t):
        E = t + eps * np.sin(t)
        for _ in range(100):
            step = (E - eps * np.sin(E) - t) / (1.0 - eps * np.cos(E))
            E = E - step
            if np.max(np.abs(step)) < 1e-16 * max(1.0, float(np.max(np.abs(t)))):
                break
        return E

    def exact(t, deriv=0):
        t = np.atleast_1d(np.asarray(t, dtype=float))
        E = anomaly(t)
        c, sn = np.cos(E), np.sin(E)
        q = np.stack([c - eps, s * sn], axis=1)
        if deriv == 0:
            return q
        dE = 1.0 / (1.0 - eps * c)
        if deriv == 1:
            return np.stack([-sn * dE, s * c * dE], axis=1)
        if deriv == 2:
            return _kepler_rhs(t, q, None)
        raise NotImplementedError("derivatives above 2")

    exact.max_deriv = 2
    return exact


def two_body_problem(eps: float = 0.2) -> ProblemDef:
    if not 0.0 <= eps < 1.0:
        raise ValueError(f"eccentricity must lie in [0, 1), got {eps}")
    # |d(-q/|q|^3)/dq| <= 2/|q|^3, largest at perihelion |q| = 1 - eps
    lip = 2.0 / (1.0 - eps) ** 3
    return ProblemDef(
        dim=2, rhs=_kepler_rhs, u0=[1.0 - eps, 0.0],
        u1=[0.0, math.sqrt((1.0 + eps) / (1.0 - eps))], lipschitz=lip,
        exact=kepler_exact(eps), name="two_body",
    )


def _two_body(T: float = 10.0, eps: float = 0.2) -> ExampleInstance:
    p = two_body_problem(eps)
    return ExampleInstance(p, T, p.exact)


# --- Example 3: linear wave on the unit square ------------------------------
# u = w(x, y) cos t, w = x(1-x) y(1-y)
#   u_tt = -w cos t,  Laplace(u) = -2 (x(1-x) + y(1-y)) cos t
#   => f = u_tt - Laplace(u) = (-w + 2 (x(1-x) + y(1-y))) cos t

def _bubble(X):
    x, y = X
    return x * (1.0 - x) * y * (1.0 - y)


def _wave_exact(X, t, deriv=0):
    if deriv > 2:
        raise NotImplementedError("derivatives above 2")
    return _bubble(X) * np.cos(t + 0.5 * math.pi * deriv)


def _wave_source(X, t, u):
    x, y = X
    return (-_bubble(X) + 2.0 * (x * (1.0 - x) + y * (1.0 - y))) * np.cos(t)


def linear_wave_pde() -> WavePDE:
    # the source does not depend on u; any small positive bound is valid
    return WavePDE(f=_wave_source, u0=_bubble, u1=lambda X: 0.0 * _bubble(X),
                   exact=_wave_exact, lipschitz=1e-3, name="linear_wave")


_SUBSTITUTION_NOTE = (
    "spatial space: tensor Legendre modal space; the exact solution lies in it, "
    "so no spatial error enters and the time error is measured alone "
    "(stands in for a quadratic finite element space with the same property)"
)


def _linear_wave(T: float = 1.0, degree: int = 3, quad_extra: int = 4) -> ExampleInstance:
    pde = linear_wave_pde()
    space = build_space(((0.0, 1.0), (0.0, 1.0)), degree)
    system, problem = semi_discretize(pde, space, quad_extra)
    return ExampleInstance(problem, T, _wave_exact, system, _SUBSTITUTION_NOTE)


# --- Example 4: sine-Gordon on [-1, 1]^2 --------------------------------------
# u = s(x, y) cos(2 pi t), s = sin(pi x) sin(pi y)
#   u_tt = -4 pi^2 u,  Laplace(u) = -2 pi^2 u
#   => u_tt - Laplace(u) + sin u = -2 pi^2 u + sin u =: F(x, y, t)
# the semi-discrete source is F - sin(u_h); |d sin(u)/du| <= 1.

def _sg_exact(X, t, deriv=0):
    if deriv > 2:
        raise NotImplementedError("derivatives above 2")
    x, y = X
    w = 2.0 * math.pi
    return np.sin(math.pi * x) * np.sin(math.pi * y) * w ** deriv * np.cos(w * t + 0.5 * math.pi * deriv)


def _sg_source(X, t, u):
    ue = _sg_exact(X, t, 0)
    return -2.0 * math.pi ** 2 * ue + np.sin(ue) - np.sin(u)


def sine_gordon_pde() -> WavePDE:
    return WavePDE(f=_sg_source, u0=lambda X: _sg_exact(X, 0.0, 0),
                   u1=lambda X: 0.0 * X[0] * X[1], exact=_sg_exact, lipschitz=1.0,
                   name="sine_gordon")


def _sine_gordon(T: float = 2.0, degree: int = 20, quad_extra: int = 4) -> ExampleInstance:
    pde = sine_gordon_pde()
    space = build_space(((-1.0, 1.0), (-1.0, 1.0)), degree)
    system, problem = semi_discretize(pde, space, quad_extra)
    return ExampleInstance(problem, T, _sg_exact, system)


_REGISTRY = {
    e.id: e
    for e in (
        Example("ex1", "u'' = sin u - 2 cos u' + g(t), exact u = sin t", 1.0, 2.0, _ex1),
        Example("two_body", "planar Kepler problem, eccentricity eps", 10.0,
                2.0 / 0.8 ** 3, _two_body, {"eps": 0.2}),
        Example("linear_wave", "u_tt - Laplace u = f on the unit square, u = x(1-x)y(1-y)cos t",
                1.0, 1e-3, _linear_wave, {"degree": 3}),
        Example("sine_gordon", "u_tt - Laplace u + sin u = f on [-1,1]^2, "
                "u = sin(pi x) sin(pi y) cos(2 pi t)", 2.0, 1.0, _sine_gordon, {"degree": 20}),
    )
}


def registry() -> list[Example]:
    return list(_REGISTRY.values())


def get_example(example_id: str) -> Example:
    try:
        return _REGISTRY[example_id]
    except KeyError:
        raise LookupFailure(
            f"unknown example {example_id!r}; known: {', '.join(_REGISTRY)}"
        ) from None


def _load_custom(target: str) -> Callable:
    module, _, attr = target.partition(":")
    if not module or not attr:
        raise LookupFailure(f"custom problem must be given as 'module:attribute', got {target!r}")
    try:
        obj = importlib.import_module(module)
        for part in attr.split("."):
            obj = getattr(obj, part)
    except (ImportError, AttributeError) as exc:
        raise LookupFailure(f"cannot load custom problem {target!r}: {exc}") from exc
    return obj


def instantiate(example_id: str, T: Optional[float] = None, params: Optional[dict] = None,
                target: Optional[str] = None) -> ExampleInstance:
    """Build an example by id, or a ``custom`` one from ``module:attribute``.

    A custom target is called with ``params`` and must return a
    :class:`ExampleInstance` or a :class:`ProblemDef` (whose ``exact`` is used).
    """
    params = dict(params or {})
    if example_id == "custom":
        if target is None:
            raise LookupFailure("custom example needs a 'target' of the form module:attribute")
        made = _load_custom(target)(**params)
        if isinstance(made, ProblemDef):
            if T is None:
                raise LookupFailure("custom ProblemDef needs an explicit horizon T")
            made = ExampleInstance(made, float(T), made.exact)
        if not isinstance(made, ExampleInstance):
            raise LookupFailure(f"custom target {target!r} returned {type(made).__name__}")
        if T is not None:
            made.T = float(T)
        return made
    ex = get_example(example_id)
    kwargs = {**ex.params, **params}
    return ex.factory(T=float(T) if T is not None else ex.T, **kwargs)
