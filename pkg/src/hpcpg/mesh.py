"""Time partitions with per-interval approximation degrees."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InvalidDegreeError, MeshValidationError

__all__ = ["TimeMesh", "build_uniform", "build_from_arrays", "contraction_check"]


@dataclass(frozen=True)
class TimeMesh:
    """Nodes ``t_0 < ... < t_N`` and degrees ``r_1..r_N`` (one per interval)."""

    nodes: np.ndarray
    degrees: np.ndarray

    def __post_init__(self):
        nodes = np.array(self.nodes, dtype=float)
        degrees = np.array(self.degrees, dtype=int)
        if nodes.ndim != 1 or nodes.size < 2:
            raise MeshValidationError("mesh needs at least two nodes")
        if degrees.shape != (nodes.size - 1,):
            raise MeshValidationError(
                f"expected {nodes.size - 1} degrees, got {degrees.size}"
            )
        if not np.all(np.isfinite(nodes)) or np.any(np.diff(nodes) <= 0):
            raise MeshValidationError("mesh nodes must be finite and strictly increasing")
        if np.any(degrees < 2):
            raise MeshValidationError("every interval degree must be >= 2")
        nodes.setflags(write=False)
        degrees.setflags(write=False)
        object.__setattr__(self, "nodes", nodes)
        object.__setattr__(self, "degrees", degrees)

    @property
    def n_intervals(self) -> int:
        return self.nodes.size - 1

    @property
    def steps(self) -> np.ndarray:
        return np.diff(self.nodes)

    @property
    def max_step(self) -> float:
        return float(self.steps.max())

    @property
    def T(self) -> float:
        return float(self.nodes[-1])

    def interval(self, n: int) -> tuple[float, float]:
        """Endpoints of the one-based interval ``n``."""
        return float(self.nodes[n - 1]), float(self.nodes[n])

    def locate(self, t) -> np.ndarray:
        """One-based interval index owning each ``t``; nodes belong to the left interval."""
        idx = np.searchsorted(self.nodes, np.asarray(t, dtype=float), side="left")
        return np.clip(idx, 1, self.n_intervals)


def build_uniform(T: float, N: int, r: int) -> TimeMesh:
    """Uniform mesh of ``N`` intervals on ``[0, T]`` with degree ``r`` everywhere."""
    if r < 2:
        raise InvalidDegreeError(f"degree must be >= 2, got {r}")
    if T <= 0 or N < 1:
        raise MeshValidationError(f"need T > 0 and N >= 1, got T={T}, N={N}")
    nodes = np.arange(N + 1) * (T / N)
    nodes[-1] = T
    return TimeMesh(nodes, np.full(N, r, dtype=int))


def build_from_arrays(nodes, degrees) -> TimeMesh:
    return TimeMesh(np.asarray(nodes, dtype=float), np.asarray(degrees, dtype=int))


def contraction_check(mesh: TimeMesh, L: float) -> np.ndarray:
    """Per-interval flags for the sufficient solvability bound ``(L k/2) sqrt(8+k^2) < 1``."""
    if L <= 0:
        raise ValueError(f"Lipschitz constant must be positive, got {L}")
    k = mesh.steps
    return 0.5 * L * k * np.sqrt(8.0 + k * k) < 1.0
