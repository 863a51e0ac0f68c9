"""Convergence sweeps over degrees and step sizes, with CSV/JSON reports.

A config is a TOML file::

    example = "ex1"            # ex1 | two_body | linear_wave | sine_gordon | custom
    mode = "h_version"         # h_version | p_version | single_run | energy_trace
    degrees = [3, 4]
    steps = ["1/32", "1/64"]   # step sizes k; the mesh has N = T/k intervals
    T = 1.0                    # optional, defaults to the example's horizon

    [params]                   # forwarded to the example factory
    [solver]                   # tol, max_iters, quad_points
    [output]                   # dir, jobs, timing

Several ``[[sweep]]`` tables (each with ``degrees`` and ``steps``) may
replace the top-level lists when the step range differs between degrees.
"""

from __future__ import annotations

import csv
import io
import json
import logging
import math
import time
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Optional

import numpy as np
import tomli

from .cpg import ContractionWarning, SolverOptions, solve
from .errors import CpgError
from .mesh import build_uniform
from .metrics import energy_series, eoc, error_report
from .problems import ExampleInstance, instantiate
from .wavepde import make_field, pde_error_report

log = logging.getLogger(__name__)

__all__ = [
    "ConfigError",
    "Sweep",
    "ExperimentConfig",
    "CellResult",
    "ConvergenceReport",
    "CSV_COLUMNS",
    "parse_step",
    "load_config",
    "config_from_dict",
    "apply_overrides",
    "run",
    "write_outputs",
]

MODES = ("h_version", "p_version", "single_run", "energy_trace")
EXAMPLES = ("ex1", "two_body", "linear_wave", "sine_gordon", "custom")
ERROR_FIELDS = ("l2", "h1", "h2", "linf", "nodal_val", "nodal_deriv")
CSV_COLUMNS = (
    "r", "k",
    "l2", "l2_eoc", "h1", "h1_eoc", "h2", "h2_eoc", "linf", "linf_eoc",
    "nodal_val", "nodal_val_eoc", "nodal_deriv", "nodal_deriv_eoc",
    "iters_max", "wall_ms",
)


class ConfigError(CpgError, ValueError):
    """Malformed or inconsistent experiment configuration."""


def parse_step(value) -> float:
    """A step given as a number or as a string like ``"1/64"``."""
    if isinstance(value, bool):
        raise ConfigError(f"invalid step {value!r}")
    try:
        k = float(Fraction(value)) if isinstance(value, str) else float(value)
    except (ValueError, ZeroDivisionError) as exc:
        raise ConfigError(f"invalid step {value!r}") from exc
    if not (math.isfinite(k) and k > 0):
        raise ConfigError(f"steps must be positive, got {value!r}")
    return k


@dataclass(frozen=True)
class Sweep:
    degrees: tuple[int, ...]
    steps: tuple[float, ...]

    def __post_init__(self):
        if not self.degrees or not self.steps:
            raise ConfigError("degree and step lists must be nonempty")
        if any(int(r) != r or r < 2 for r in self.degrees):
            raise ConfigError(f"degrees must be integers >= 2, got {list(self.degrees)}")
        if any(not (k > 0) for k in self.steps):
            raise ConfigError("steps must be positive")


@dataclass
class ExperimentConfig:
    example: str
    mode: str
    sweeps: list[Sweep]
    T: Optional[float] = None
    params: dict = field(default_factory=dict)
    target: Optional[str] = None
    tol: float = SolverOptions.tol
    max_iters: int = SolverOptions.max_iters
    quad_points: Optional[int] = None
    out: Path = Path("results")
    jobs: int = 1
    timing: bool = False

    def __post_init__(self):
        if self.example not in EXAMPLES:
            raise ConfigError(f"unknown example {self.example!r}; expected one of {EXAMPLES}")
        if self.example == "custom" and not self.target:
            raise ConfigError("example 'custom' needs target = 'module:attribute'")
        if self.mode not in MODES:
            raise ConfigError(f"unknown mode {self.mode!r}; expected one of {MODES}")
        if not self.sweeps:
            raise ConfigError("no degrees/steps given")
        if self.mode == "single_run" and len(self.cells()) != 1:
            raise ConfigError("single_run takes exactly one degree and one step")
        if self.mode == "energy_trace" and self.example not in ("two_body", "custom"):
            raise ConfigError("energy_trace needs a two-body problem")
        if self.T is not None and not self.T > 0:
            raise ConfigError(f"horizon T must be positive, got {self.T}")
        if not (self.tol > 0 and self.max_iters >= 1):
            raise ConfigError("tol must be positive and max_iters >= 1")
        if self.quad_points is not None and self.quad_points < 1:
            raise ConfigError("quad_points must be positive")
        if self.jobs < 1:
            raise ConfigError("jobs must be >= 1")
        self.out = Path(self.out)

    @property
    def solver(self) -> SolverOptions:
        return SolverOptions(tol=self.tol, max_iters=self.max_iters, quad_points=self.quad_points)

    def cells(self) -> list[tuple[int, float]]:
        """All ``(r, k)`` pairs in report order, duplicates dropped."""
        seen, out = set(), []
        for sw in self.sweeps:
            if self.mode == "p_version":
                pairs = [(r, k) for k in sw.steps for r in sw.degrees]
            else:
                pairs = [(r, k) for r in sw.degrees for k in sw.steps]
            for pair in pairs:
                if pair not in seen:
                    seen.add(pair)
                    out.append(pair)
        return out


def _sweep(raw: dict, where: str) -> Sweep:
    try:
        degrees = tuple(int(r) for r in raw["degrees"])
        steps = tuple(parse_step(k) for k in raw["steps"])
    except KeyError as exc:
        raise ConfigError(f"{where}: missing {exc.args[0]!r}") from None
    except (TypeError, ValueError) as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(f"{where}: {exc}") from exc
    return Sweep(degrees, steps)


_TOP_KEYS = {"example", "mode", "degrees", "steps", "T", "target", "params", "solver",
             "output", "sweep"}


def config_from_dict(data: dict) -> ExperimentConfig:
    unknown = set(data) - _TOP_KEYS
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    if "sweep" in data:
        if "degrees" in data or "steps" in data:
            raise ConfigError("give either top-level degrees/steps or [[sweep]] tables, not both")
        sweeps = [_sweep(s, f"sweep {i + 1}") for i, s in enumerate(data["sweep"])]
    elif "degrees" in data or "steps" in data:
        sweeps = [_sweep(data, "config")]
    else:
        sweeps = []
    solver = dict(data.get("solver", {}))
    output = dict(data.get("output", {}))
    bad = set(solver) - {"tol", "max_iters", "quad_points"}
    bad |= set(output) - {"dir", "jobs", "timing"}
    if bad:
        raise ConfigError(f"unknown solver/output keys: {sorted(bad)}")
    out = Path(output.get("dir", "results"))
    try:
        return ExperimentConfig(
            example=str(data.get("example", "")),
            mode=str(data.get("mode", "h_version")),
            sweeps=sweeps,
            T=float(data["T"]) if "T" in data else None,
            params=dict(data.get("params", {})),
            target=data.get("target"),
            tol=float(solver.get("tol", SolverOptions.tol)),
            max_iters=int(solver.get("max_iters", SolverOptions.max_iters)),
            quad_points=int(solver["quad_points"]) if solver.get("quad_points") else None,
            out=out,
            jobs=int(output.get("jobs", 1)),
            timing=bool(output.get("timing", False)),
        )
    except (TypeError, ValueError) as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(str(exc)) from exc


def load_config(path, overrides: Optional[dict] = None) -> ExperimentConfig:
    """Read a TOML config; ``overrides`` replaces top-level keys before validation.

    ``output.dir`` is taken relative to the current directory.
    """
    path = Path(path)
    try:
        with path.open("rb") as fh:
            data = tomli.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    except tomli.TOMLDecodeError as exc:
        raise ConfigError(f"{path}: {exc}") from exc
    return config_from_dict(apply_overrides(data, overrides or {}))


def apply_overrides(data: dict, overrides: dict) -> dict:
    """Merge flag-style overrides (``example``, ``mode``, ``degrees``, ``steps``,
    ``out``, ``tol``, ``quad_points``) into raw config data."""
    data = {**data}
    for key in ("example", "mode", "T"):
        if overrides.get(key) is not None:
            data[key] = overrides[key]
    if overrides.get("degrees") is not None or overrides.get("steps") is not None:
        blocks = data.pop("sweep", None) or [{}]
        base = {"degrees": data.pop("degrees", blocks[0].get("degrees")),
                "steps": data.pop("steps", blocks[0].get("steps"))}
        if overrides.get("degrees") is not None:
            base["degrees"] = overrides["degrees"]
        if overrides.get("steps") is not None:
            base["steps"] = overrides["steps"]
        data["degrees"], data["steps"] = base["degrees"], base["steps"]
    solver = dict(data.get("solver", {}))
    for key in ("tol", "quad_points"):
        if overrides.get(key) is not None:
            solver[key] = overrides[key]
    data["solver"] = solver
    if overrides.get("out") is not None:
        data["output"] = {**data.get("output", {}), "dir": str(overrides["out"])}
    return data


# --- running -----------------------------------------------------------------

@dataclass
class CellResult:
    r: int
    k: float
    N: int
    ok: bool
    errors: dict = field(default_factory=dict)
    dlinf: Optional[float] = None
    iters_max: Optional[int] = None
    iters_total: Optional[int] = None
    c1_jump: Optional[float] = None
    wall_ms: Optional[float] = None
    energy_max: Optional[float] = None
    energy: Optional[dict] = None
    contraction_warning: bool = False
    message: str = ""


@dataclass
class ConvergenceReport:
    config: ExperimentConfig
    cells: list[CellResult]
    eocs: list[dict]
    energy_eoc: list[Optional[float]]
    note: str = ""

    @property
    def failed(self) -> list[CellResult]:
        return [c for c in self.cells if not c.ok]

    def column(self, name: str) -> list[Optional[float]]:
        return [c.errors.get(name) for c in self.cells]


def _n_intervals(T: float, k: float) -> int:
    N = int(round(T / k))
    if N < 1 or abs(N * k - T) > 1e-9 * T:
        raise ConfigError(f"step {k!r} does not divide the horizon T={T}")
    return N


def _c1_jump(solution) -> float:
    nodes = solution.mesh.nodes[1:-1]
    worst = 0.0
    for n, t in enumerate(nodes, start=1):
        left, right = solution.locals[n - 1], solution.locals[n]
        for d in (0, 1):
            worst = max(worst, float(np.max(np.abs(left([t], d) - right([t], d)))))
    return worst


def _measure(inst: ExampleInstance, solution) -> tuple[dict, Optional[float]]:
    if inst.exact is None:
        return {}, None
    if inst.is_pde:
        rep = pde_error_report(make_field(solution, inst.system), inst.exact)
        return {
            "l2": rep["L2L2"], "h1": rep["H1L2"], "h2": rep["H2L2"], "linf": rep["LinfL2"],
            "nodal_val": rep["nodal_val"], "nodal_deriv": rep["nodal_deriv"],
        }, None
    rep = error_report(solution, inst.exact)
    return {
        "l2": rep.l2, "h1": rep.h1, "h2": rep.h2, "linf": rep.linf,
        "nodal_val": rep.nodal_max_value, "nodal_deriv": rep.nodal_max_deriv,
    }, rep.dlinf


def run_cell(inst: ExampleInstance, cfg: ExperimentConfig, r: int, k: float) -> CellResult:
    """Solve and measure one ``(r, k)`` cell; failures are recorded, not raised."""
    N = _n_intervals(inst.T, k)
    cell = CellResult(r=r, k=k, N=N, ok=False)
    start = time.perf_counter()
    try:
        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter("always", ContractionWarning)
            solution = solve(inst.problem, build_uniform(inst.T, N, r), cfg.solver)
        cell.contraction_warning = any(issubclass(w.category, ContractionWarning) for w in caught)
        cell.iters_max = int(solution.iterations.max())
        cell.iters_total = int(solution.iterations.sum())
        cell.c1_jump = _c1_jump(solution)
        cell.errors, cell.dlinf = _measure(inst, solution)
        if cfg.mode == "energy_trace":
            series = energy_series(solution)
            cell.energy = {"t": series.times.tolist(), "H": series.energies.tolist(),
                           "E": series.errors.tolist()}
            cell.energy_max = float(series.errors.max())
        cell.ok = True
    except (CpgError, ArithmeticError, np.linalg.LinAlgError) as exc:
        cell.message = f"{type(exc).__name__}: {exc}"
        log.warning("cell r=%d k=%g failed: %s", r, k, cell.message)
    if cfg.timing:
        cell.wall_ms = 1e3 * (time.perf_counter() - start)
    return cell


def _instance(cfg: ExperimentConfig) -> ExampleInstance:
    return instantiate(cfg.example, cfg.T, cfg.params, cfg.target)


def _cell_job(args) -> CellResult:
    cfg, r, k = args
    return run_cell(_instance(cfg), cfg, r, k)


def _block_key(cfg: ExperimentConfig, cell: CellResult):
    return cell.k if cfg.mode == "p_version" else cell.r


def _orders(cfg: ExperimentConfig, cells: list[CellResult], values: list[Optional[float]]):
    """EOC of each cell against the previous cell of the same block (``None`` if undefined)."""
    out: list[Optional[float]] = [None] * len(cells)
    if cfg.mode == "p_version":
        return out  # orders in k are meaningless at fixed k
    for i in range(1, len(cells)):
        prev, cur = cells[i - 1], cells[i]
        if _block_key(cfg, prev) != _block_key(cfg, cur):
            continue
        a, b = values[i - 1], values[i]
        if a is None or b is None:
            continue
        out[i] = eoc([a, b], [prev.k, cur.k])[0]
    return out


def run(cfg: ExperimentConfig) -> ConvergenceReport:
    """Run every cell of ``cfg`` (in parallel when ``jobs > 1``) and build the report."""
    pairs = cfg.cells()
    inst = _instance(cfg)  # validates the example before any work
    for r, k in pairs:
        _n_intervals(inst.T, k)
    if cfg.jobs > 1 and len(pairs) > 1:
        with ProcessPoolExecutor(max_workers=cfg.jobs) as pool:
            cells = list(pool.map(_cell_job, [(cfg, r, k) for r, k in pairs]))
    else:
        cells = [run_cell(inst, cfg, r, k) for r, k in pairs]
    eocs = [dict() for _ in cells]
    for name in ERROR_FIELDS:
        for row, value in zip(eocs, _orders(cfg, cells, [c.errors.get(name) for c in cells])):
            row[name] = value
    energy_eoc = _orders(cfg, cells, [c.energy_max for c in cells])
    return ConvergenceReport(cfg, cells, eocs, energy_eoc, inst.note)


# --- output ------------------------------------------------------------------

def _fmt(x) -> str:
    if x is None:
        return ""
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return "%.17g" % float(x)


def report_csv(report: ConvergenceReport) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_COLUMNS)
    for cell, orders in zip(report.cells, report.eocs):
        row = [_fmt(cell.r), _fmt(cell.k)]
        for name in ("l2", "h1", "h2", "linf", "nodal_val", "nodal_deriv"):
            row += [_fmt(cell.errors.get(name)), _fmt(orders.get(name))]
        row += [_fmt(cell.iters_max), _fmt(cell.wall_ms)]
        writer.writerow(row)
    return buf.getvalue()


def energy_csv(report: ConvergenceReport) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(("r", "k", "t", "H", "E"))
    for cell in report.cells:
        if cell.energy is None:
            continue
        for t, h, e in zip(cell.energy["t"], cell.energy["H"], cell.energy["E"]):
            writer.writerow((_fmt(cell.r), _fmt(cell.k), _fmt(t), _fmt(h), _fmt(e)))
    return buf.getvalue()


def _json_float(x):
    if x is None or not math.isfinite(x):
        return None
    return float("%.17g" % x)


def report_json(report: ConvergenceReport) -> dict:
    cfg = report.config
    config = {k: v for k, v in asdict(cfg).items() if k not in ("sweeps", "out")}
    config["sweeps"] = [{"degrees": list(s.degrees), "steps": list(s.steps)} for s in cfg.sweeps]
    rows = []
    for cell, orders, e_eoc in zip(report.cells, report.eocs, report.energy_eoc):
        rows.append({
            "r": cell.r, "k": cell.k, "N": cell.N, "ok": cell.ok, "message": cell.message,
            "dof_full": (cell.r + 1) * cell.N, "dof_free": (cell.r - 1) * cell.N,
            "errors": {k: _json_float(v) for k, v in cell.errors.items()},
            "dlinf": _json_float(cell.dlinf),
            "eoc": {k: _json_float(v) for k, v in orders.items()},
            "iters_max": cell.iters_max, "iters_total": cell.iters_total,
            "c1_jump": _json_float(cell.c1_jump),
            "contraction_warning": cell.contraction_warning,
            "energy_max": _json_float(cell.energy_max), "energy_max_eoc": _json_float(e_eoc),
            "wall_ms": _json_float(cell.wall_ms),
        })
    return {"config": config, "note": report.note, "failed": len(report.failed), "rows": rows}


def write_outputs(report: ConvergenceReport, out: Optional[Path] = None) -> list[Path]:
    """Write ``report.csv``, ``report.json`` and (energy mode) ``energy.csv``."""
    out = Path(out or report.config.out)
    out.mkdir(parents=True, exist_ok=True)
    paths = [out / "report.csv", out / "report.json"]
    paths[0].write_text(report_csv(report))
    paths[1].write_text(json.dumps(report_json(report), indent=2, sort_keys=True) + "\n")
    if report.config.mode == "energy_trace":
        paths.append(out / "energy.csv")
        paths[2].write_text(energy_csv(report))
    return paths

