"""End-to-end acceptance criteria, one test per criterion.

Each test records a ``criterion N: PASS|FAIL`` line that is printed in the
terminal summary; the test itself fails when the criterion does.
Set ``HPCPG_FULL_GRID=1`` to also run the complete sine-Gordon grid.
"""

import math
import os
import time
from pathlib import Path

import numpy as np
import pytest

from conftest import ACCEPTANCE_LINES
from hpcpg.cpg import assemble_step_matrix, solve_step, ProblemDef
from hpcpg.experiments import load_config, report_csv, run
from hpcpg.mesh import build_uniform
from hpcpg.metrics import eoc
from hpcpg.orthopoly import gauss_legendre_rule, legendre_eval
from hpcpg.problems import kepler_exact
from hpcpg.projection import project_c1, project_piecewise

from reference_tables import (
    EX1_NODAL,
    EX1_NORMS,
    LINEAR_WAVE,
    SINE_GORDON,
    SINE_GORDON_NODAL,
    cells,
)

CONFIGS = Path(__file__).resolve().parents[1] / "configs"
_RUNS: dict = {}


def _run(name):
    """Run a shipped config once per session; returns ``(report, csv_text, seconds)``."""
    if name not in _RUNS:
        start = time.perf_counter()
        rep = run(load_config(CONFIGS / name))
        _RUNS[name] = (rep, report_csv(rep), time.perf_counter() - start)
    return _RUNS[name]


def _record(n, title, problems):
    status = "PASS" if not problems else "FAIL"
    detail = "" if not problems else f" ({len(problems)} issue(s); first: {problems[0]})"
    line = f"criterion {n}: {status} - {title}{detail}"
    ACCEPTANCE_LINES[n] = line
    print(line)
    assert not problems, "\n".join(problems)


def _lookup(report):
    """``{(r, k): (cell, orders)}`` with ``dlinf`` orders added."""
    out = {}
    cells_ = report.cells
    for i, (cell, orders) in enumerate(zip(cells_, report.eocs)):
        orders = dict(orders)
        prev = cells_[i - 1] if i else None
        if prev is not None and prev.r == cell.r and prev.dlinf and cell.dlinf:
            orders["dlinf"] = eoc([prev.dlinf, cell.dlinf], [prev.k, cell.k])[0]
        else:
            orders["dlinf"] = None
        out[(cell.r, round(1 / cell.k))] = (cell, orders)
    return out


def _compare(report, table, rows, order_tol, factor, check_values=True):
    problems = []
    got = _lookup(report)
    for r, k, name, ref, ref_order in cells(table):
        if not rows(r, k):
            continue
        key = (r, round(1 / k))
        if key not in got or not got[key][0].ok:
            problems.append(f"r={r} k=1/{key[1]}: cell missing or failed")
            continue
        cell, orders = got[key]
        value = cell.dlinf if name == "dlinf" else cell.errors[name]
        order = orders[name]
        if check_values and not (ref / factor <= value <= ref * factor):
            problems.append(f"r={r} k=1/{key[1]} {name}: {value:.3e} vs {ref:.2e}")
        if order is None or abs(order - ref_order) > order_tol:
            problems.append(f"r={r} k=1/{key[1]} {name} order: {order} vs {ref_order}")
    return problems


def test_criterion_1_ex1_h_version():
    rep, _, secs = _run("ex1_h_version.toml")
    problems = _compare(rep, EX1_NORMS, lambda r, k: True, 0.1, 3.0)
    if secs >= 30:
        problems.append(f"runtime {secs:.1f}s >= 30s")
    _record(1, f"Example 1 norms/orders vs reference values ({secs:.1f}s)", problems)


def test_criterion_2_nodal_superconvergence():
    rep, _, secs = _run("ex1_nodal.toml")
    problems = _compare(rep, EX1_NODAL, lambda r, k: r >= 3, 1e9, 3.0)
    got = _lookup(rep)
    for r in (3, 4, 5):
        ks = sorted({round(1 / k) for rr, k, *_ in cells(EX1_NODAL) if rr == r})
        for n in ks[1:]:   # the two finer pairs of each block
            _, orders = got[(r, n)]
            for name in ("nodal_val", "nodal_deriv"):
                if orders[name] is None or abs(orders[name] - (2 * r - 2)) > 0.15:
                    problems.append(f"r={r} k=1/{n} {name} order {orders[name]} vs {2 * r - 2}")
    _record(2, "nodal orders 2r-2 and nodal values vs reference values", problems)


def test_criterion_3_p_version():
    rep, _, secs = _run("ex1_p_version.toml")
    problems = []
    for N in (1, 4):
        series = [(c.r, c.errors["h1"]) for c in rep.cells if round(1 / c.k) == N]
        series.sort()
        if [r for r, _ in series] != list(range(3, 15)):
            problems.append(f"N={N}: degrees {[r for r, _ in series]}")
            continue
        for (r0, e0), (r1, e1) in zip(series, series[1:]):
            if not (e1 < e0 or max(e0, e1) < 1e-13):
                problems.append(f"N={N}: H1 error rises from r={r0} ({e0:.2e}) to r={r1} ({e1:.2e})")
        if N == 1 and not series[-1][1] < 1e-12:
            problems.append(f"N=1, r=14: H1 error {series[-1][1]:.2e} >= 1e-12")
    _record(3, "p-version H1 decay on N=1 and N=4", problems)


def _sin(t, d=0):
    return np.sin(np.asarray(t, float) + 0.5 * math.pi * d)


def test_criterion_4_projector():
    problems = []
    for r in (3, 4, 5):
        errs = []
        for N in (4, 8, 16):
            sol = project_piecewise(_sin, build_uniform(1.0, N, r))
            sq = np.zeros(3)
            for local in sol.locals:
                t, w = gauss_legendre_rule(30).mapped(*local.interval)
                for d in range(3):
                    sq[d] += np.sum(w * (local(t, d)[:, 0] - _sin(t, d)) ** 2)
            errs.append(np.sqrt(np.cumsum(sq)))
        errs = np.array(errs)
        orders = np.log2(errs[-2] / errs[-1])
        for name, got, want in zip(("L2", "H1", "H2"), orders, (r + 1, r, r - 1)):
            if abs(got - want) > 0.1:
                problems.append(f"r={r} {name} order {got:.3f} vs {want}")
        P = project_c1(lambda x, d=0: math.pi**d * np.sin(math.pi * np.asarray(x) + 0.5 * math.pi * d), r)
        rule = gauss_legendre_rule(40)
        x, w = rule.nodes, rule.weights
        resid = math.pi**2 * -np.sin(math.pi * x) - P(x, 2)
        worst = max(abs(np.sum(w * resid * legendre_eval(i, x))) for i in range(r - 1))
        if worst > 1e-10:
            problems.append(f"r={r}: orthogonality residual {worst:.1e}")
        ends = [abs(P(s, d) - math.pi**d * np.sin(math.pi * s + 0.5 * math.pi * d))
                for s in (-1.0, 1.0) for d in (0, 1)]
        if max(ends) > 1e-11:
            problems.append(f"r={r}: endpoint mismatch {max(ends):.1e}")
    _record(4, "projector orders r+1/r/r-1, endpoints and orthogonality", problems)


def _quadrature_step_matrix(k, r):
    rule = gauss_legendre_rule(r + 2)
    t, w = rule.mapped(0.0, k)
    x = 2 * t / k - 1
    A = np.zeros((r + 1, r + 1))
    for j in range(r + 1):
        c = np.zeros(j + 1)
        c[j] = 1.0
        L = np.polynomial.Legendre(c)
        d2 = L.deriv(2)(x) * (2 / k) ** 2 if j >= 2 else 0 * x
        for i in range(r - 1):
            A[i, j] = np.sum(w * d2 * legendre_eval(i, x))
        A[r - 1, j] = L(-1.0)
        A[r, j] = L.deriv()(-1.0) * 2 / k
    return A


def test_criterion_5_exactness():
    problems = []
    for r in range(2, 13):
        for k in (1.0, 0.3, 1 / 64):
            A = assemble_step_matrix(k, r).matrix
            Q = _quadrature_step_matrix(k, r)
            gap = np.abs(A - Q).max() / max(1.0, np.abs(Q).max())
            if gap > 1e-11:
                problems.append(f"step matrix r={r} k={k}: {gap:.1e}")
    zero = ProblemDef(1, lambda t, u, v: 0 * u, [0.0], [0.0], 1.0)
    local, _, _ = solve_step(zero, (0, 0.5), 2, [1.0], [2.0])
    t = np.linspace(0, 0.5, 7)
    if np.abs(local(t)[:, 0] - (1 + 2 * t)).max() > 1e-14:
        problems.append("affine data not reproduced")
    cubic = ProblemDef(1, lambda t, u, v: (6 * t)[:, None] + 0 * u, [0.0], [0.0], 1.0)
    local, _, _ = solve_step(cubic, (0, 1), 3, [0.0], [0.0])
    t = np.linspace(0, 1, 11)
    if np.abs(local(t)[:, 0] - t**3).max() > 1e-12:
        problems.append("cubic data not reproduced")
    for name in ("ex1_h_version.toml", "ex1_nodal.toml", "ex1_p_version.toml",
                 "two_body_energy.toml", "linear_wave.toml", "sine_gordon.toml"):
        rep, _, _ = _run(name)
        for c in rep.cells:
            if c.ok and c.c1_jump > 1e-11:
                problems.append(f"{name} r={c.r} k={c.k:g}: C1 jump {c.c1_jump:.1e}")
    _record(5, "step-matrix oracle, polynomial reproduction, C1 continuity", problems)


def test_criterion_6_two_body_energy(frozen):
    rep, _, secs = _run("two_body_energy.toml")
    problems = []
    ref = frozen["two_body"]
    exact = kepler_exact(ref["eps"])
    T = np.array([ref["T"]])
    closed = np.concatenate([exact(T, 0)[0], exact(T, 1)[0]])
    if np.abs(closed - ref["reference_final"]).max() > 1e-10:
        problems.append("closed-form orbit disagrees with the reference integrator")
    if [c.r for c in rep.cells] != [3, 3, 3]:
        problems.append("unexpected cells")
    for c in rep.cells:
        if c.energy is None or c.energy["E"][0] != 0.0:
            problems.append(f"k={c.k:g}: E(t0) != 0")
    for c, order in zip(rep.cells[1:], rep.energy_eoc[1:]):
        if order is None or abs(order - 4.0) > 0.3:
            problems.append(f"k={c.k:g}: energy order {order} vs 4")
    if secs >= 60:
        problems.append(f"runtime {secs:.1f}s >= 60s")
    _record(6, f"two-body energy order 4 and E(t0)=0 ({secs:.1f}s)", problems)


def test_criterion_7_linear_wave():
    rep, _, secs = _run("linear_wave.toml")
    problems = _compare(rep, LINEAR_WAVE, lambda r, k: r in (3, 4), 0.1, 3.0)
    if secs >= 120:
        problems.append(f"runtime {secs:.1f}s >= 120s")
    _record(7, f"linear wave norms/orders vs reference values ({secs:.1f}s)", problems)


def test_criterion_8_sine_gordon():
    rep, _, secs = _run("sine_gordon.toml")
    have = {round(1 / c.k) for c in rep.cells}
    problems = _compare(rep, SINE_GORDON, lambda r, k: r == 3 and round(1 / k) in have,
                        0.15, 5.0)
    got = _lookup(rep)
    for r, k, name, _, _ in cells(SINE_GORDON_NODAL):
        n = round(1 / k)
        if (r, n) in got and got[(r, n)][1][name] is not None:
            order = got[(r, n)][1][name]
            if abs(order - (2 * r - 2)) > 0.2:
                problems.append(f"r={r} k=1/{n} {name} order {order:.3f} vs {2 * r - 2}")
    if secs >= 600:
        problems.append(f"runtime {secs:.1f}s >= 600s")
    _record(8, f"sine-Gordon r=3 norms/orders and nodal orders ({secs:.1f}s)", problems)


@pytest.mark.slow
@pytest.mark.skipif(os.environ.get("HPCPG_FULL_GRID") != "1", reason="set HPCPG_FULL_GRID=1")
def test_sine_gordon_full_grid():
    rep = run(load_config(CONFIGS / "sine_gordon_full.toml"))
    problems = _compare(rep, SINE_GORDON, lambda r, k: True, 0.15, 5.0)
    assert not problems, "\n".join(problems)


def test_criterion_9_determinism():
    problems = []
    for name in ("ex1_h_version.toml", "ex1_nodal.toml", "ex1_p_version.toml",
                 "two_body_energy.toml", "linear_wave.toml", "sine_gordon.toml"):
        _, first, _ = _run(name)
        again = report_csv(run(load_config(CONFIGS / name)))
        if again != first:
            problems.append(f"{name}: CSV differs between runs")
    _record(9, "repeated runs give bit-identical CSV", problems)
