"""Cutting-plane loop that makes the MISOCP frequency secure.

Each round solves the base model plus the current cut pool, splits the
returned topology into connected components, evaluates every component's
nadir and steady-state deviation with the exact SFR formulas, and adds one
linear cut per violated limit.  The loop stops at the first frequency-secure
solution.
"""

from __future__ import annotations

import csv
import io
import itertools
import logging
import math
import time
from dataclasses import dataclass, field, replace
from typing import Callable, Iterable, Sequence

import numpy as np

from .case import NetworkCase, SwitchConfig, connected_subsets, internal_edges, spanning_tree_edges
from .conic import SolveSettings, solve_misocp
from .relaxation import ModelInstance, Solution, build_base_model, extract_solution, frequency_cut
from .sfr import component_aggregate, component_coefficients, settling_time, simulate_step

__all__ = [
    "SEPARATION_TOL",
    "CutRecord",
    "IterationRecord",
    "CuttingPlaneResult",
    "CutLoopError",
    "LimitReached",
    "ComponentCheck",
    "VerifyReport",
    "separate",
    "spanning_trees",
    "expand_trees",
    "run",
    "verify",
    "trace_csv",
]

log = logging.getLogger("mgresilience.cuts")

# frequency violations below this (pu) are solver noise, not a reason to cut
SEPARATION_TOL = 1e-6


@dataclass(frozen=True)
class CutRecord:
    nodes: frozenset
    kind: str  # nadir_min | nadir_max | ss_min | ss_max
    coefficient: float  # alpha_S for nadir cuts, beta_S for steady-state cuts
    iteration: int
    tree: frozenset = frozenset()  # closed lines whose opening relaxes the cut
    value: float = 0.0  # violating deviation (pu) that triggered the cut

    @property
    def key(self) -> tuple:
        return (tuple(sorted(self.nodes)), self.kind, tuple(sorted(self.tree)))

    def label(self) -> str:
        return f"{self.kind}{{{','.join(sorted(self.nodes))}}}"


@dataclass(frozen=True)
class IterationRecord:
    k: int
    psi: float  # objective, $
    pool_size: int  # cuts in the model when this round was solved
    curtailment_pu: float
    curtailment_kw: float
    edges: tuple[str, ...]
    seconds: float
    added: tuple[str, ...] = ()
    nodes: int = 0


@dataclass
class CuttingPlaneResult:
    solution: Solution
    trace: list[IterationRecord]
    pool: list[CutRecord]
    model: ModelInstance
    guard: int
    last_solve: object = None

    @property
    def iterations(self) -> int:
        return len(self.trace)


class CutLoopError(RuntimeError):
    """The loop could not reach a frequency-secure solution."""

    def __init__(self, message: str, trace: Sequence[IterationRecord] = ()):
        super().__init__(message)
        self.trace = list(trace)


class LimitReached(CutLoopError):
    """A node, time or round limit stopped the loop; ``solution`` is the last incumbent."""

    def __init__(self, message: str, trace: Sequence[IterationRecord] = (), solution: Solution | None = None):
        super().__init__(message, trace)
        self.solution = solution


def _limits(case: NetworkCase):
    lim = case.frequency_limits
    return (lim.nadir_min, lim.nadir_max), (lim.ss_min, lim.ss_max)


def separate(case: NetworkCase, sol: Solution, iteration: int = 0, tol: float = SEPARATION_TOL) -> list[CutRecord]:
    """Cut records for every component whose exact deviation leaves its band."""
    (n_lo, n_hi), (s_lo, s_hi) = _limits(case)
    cfg = sol.switch_config()
    out = []
    for comp in sorted(sol.components, key=lambda c: sorted(c)):
        mm = sol.mismatch(case, comp)
        alpha, beta = component_coefficients(case, comp)
        nad, ss = alpha * mm, beta * mm
        tree = spanning_tree_edges(case, cfg, comp) or frozenset()
        checks = (
            ("nadir_min", nad < n_lo - tol, alpha, nad),
            ("nadir_max", nad > n_hi + tol, alpha, nad),
            ("ss_min", ss < s_lo - tol, beta, ss),
            ("ss_max", ss > s_hi + tol, beta, ss),
        )
        for kind, violated, coef, val in checks:
            if violated:
                out.append(CutRecord(frozenset(comp), kind, coef, iteration, tree, val))
    return out


def spanning_trees(case: NetworkCase, nodes: Iterable[str]) -> list[frozenset]:
    """Every set of |S| - 1 linking lines inside S that connects S, sorted."""
    s = frozenset(nodes)
    inner = sorted(internal_edges(case, s))
    if len(s) == 1:
        return [frozenset()]
    out = []
    for combo in itertools.combinations(inner, len(s) - 1):
        if spanning_tree_edges(case, SwitchConfig(combo), s) is not None:
            out.append(frozenset(combo))
    return out


def expand_trees(case: NetworkCase, found: Sequence[CutRecord]) -> list[CutRecord]:
    """Copy each violated record onto every spanning tree of its component.

    A tree cut is only active when that tree is closed and the cutset is open,
    so one record per tree covers all the ways the solver can re-form S.
    """
    out = []
    for rec in found:
        trees = spanning_trees(case, rec.nodes)
        trees.sort(key=lambda t: (t != rec.tree, sorted(t)))
        out += [CutRecord(rec.nodes, rec.kind, rec.coefficient, rec.iteration, t, rec.value) for t in trees]
    return out


def run(
    case: NetworkCase,
    settings: SolveSettings | None = None,
    max_iterations: int | None = None,
    clock: Callable[[], float] = time.perf_counter,
    tol: float = SEPARATION_TOL,
    all_trees: bool = True,
) -> CuttingPlaneResult:
    """Solve, separate and add cuts until the solution is frequency secure.

    ``max_iterations`` defaults to ``4 r`` with r the number of connected
    microgrid subsets.  ``clock`` supplies the elapsed-time column of the
    trace; pass ``lambda: 0.0`` for byte-stable output.  With ``all_trees``
    each violated component is cut on every spanning tree at once instead of
    only the tree that is currently closed.
    """
    settings = settings or SolveSettings()
    model = build_base_model(case)
    guard = max_iterations if max_iterations is not None else 4 * len(connected_subsets(case))
    t0 = clock()
    wall0 = time.perf_counter()
    trace: list[IterationRecord] = []
    pool: list[CutRecord] = []
    hint = None
    sol = None
    for k in range(guard):
        # the time limit covers the whole loop, not each round
        left = settings.time_limit - (time.perf_counter() - wall0)
        if left <= 0:
            raise LimitReached(f"time limit reached after {k} rounds", trace, sol)
        res = solve_misocp(model, replace(settings, time_limit=left), hint)
        if res.x is None:
            if res.status == "infeasible":
                raise CutLoopError(f"round {k}: model is infeasible", trace)
            raise LimitReached(f"round {k}: no incumbent before the {res.status.replace('_', ' ')}", trace, sol)
        sol = extract_solution(case, model, res.x, res.status, res.objective)
        found = separate(case, sol, k, tol)
        pool_before = len(model.cuts)
        added = []
        for rec in expand_trees(case, found) if all_trees else found:
            con = frequency_cut(case, model, rec.nodes, rec.kind, rec.tree)
            if model.add_cut(rec.key, con):
                pool.append(rec)
                if rec.label() not in added:
                    added.append(rec.label())
        trace.append(
            IterationRecord(
                k=k,
                psi=sol.objective,
                pool_size=pool_before,
                curtailment_pu=sol.curtailment_pu,
                curtailment_kw=case.kw(sol.curtailment_pu),
                edges=sol.closed,
                seconds=clock() - t0,
                added=tuple(added),
                nodes=res.nodes,
            )
        )
        log.info(
            "round %d psi %.6g pool %d curtailment %.1f kW edges %s added %s",
            k, sol.objective, pool_before, case.kw(sol.curtailment_pu), ",".join(sol.closed) or "-",
            ",".join(added) or "-",
        )
        if res.status != "optimal":
            raise LimitReached(f"round {k}: {res.status.replace('_', ' ')} reached", trace, sol)
        if not found:
            return CuttingPlaneResult(sol, trace, pool, model, guard, res)
        if not added:
            worst = max(found, key=lambda r: abs(r.value))
            raise CutLoopError(
                f"round {k}: {worst.label()} is violated ({worst.value:.3g} pu) although its cut is "
                "already in the pool; tighten the solver tolerances",
                trace,
            )
        hint = res.x
    raise LimitReached(f"no frequency-secure solution within {guard} rounds", trace, sol)


# ---------------------------------------------------------------------------
# independent verification


@dataclass(frozen=True)
class ComponentCheck:
    nodes: tuple[str, ...]
    mismatch_pu: float
    nadir_pu: float  # simulated extremum
    steady_state_pu: float  # simulated final value
    nadir_ok: bool
    steady_state_ok: bool


@dataclass
class VerifyReport:
    components: list[ComponentCheck]
    violations: list[str] = field(default_factory=list)
    f_nominal: float = 50.0

    @property
    def ok(self) -> bool:
        return not self.violations

    def hz(self, pu: float) -> float:
        return pu * self.f_nominal


def _simulate(case: NetworkCase, nodes: Iterable[str], mismatch: float) -> tuple[float, float]:
    agg = component_aggregate(case, nodes)
    if mismatch == 0.0:
        return 0.0, 0.0
    t_end = settling_time(agg, 14.0)
    dt = min(1e-4, t_end / 2e4)
    traj = simulate_step(agg, mismatch, t_end, dt)
    return traj.extremum, float(traj.d_omega[-1])


def verify(case: NetworkCase, sol: Solution, tol: float = SEPARATION_TOL) -> VerifyReport:
    """Re-check a strategy with time-domain simulation and the physical limits."""
    (n_lo, n_hi), (s_lo, s_hi) = _limits(case)
    v = sol.values
    report = VerifyReport([], f_nominal=case.bases.f_nominal)
    for comp in sorted(sol.components, key=lambda c: sorted(c)):
        mm = sol.mismatch(case, comp)
        nad, ss = _simulate(case, comp, mm)
        nad_ok = n_lo - tol <= nad <= n_hi + tol
        ss_ok = s_lo - tol <= ss <= s_hi + tol
        names = tuple(sorted(comp))
        report.components.append(ComponentCheck(names, mm, nad, ss, nad_ok, ss_ok))
        label = "{" + ",".join(names) + "}"
        if not nad_ok:
            report.violations.append(f"nadir of {label} is {case.hz(nad):+.4f} Hz")
        if not ss_ok:
            report.violations.append(f"steady state of {label} is {case.hz(ss):+.4f} Hz")

    for m in case.microgrids:
        for bus in m.buses:
            c = v[f"C[{bus.id}]"]
            if not bus.v_min**2 - tol <= c <= bus.v_max**2 + tol:
                report.violations.append(f"voltage of {bus.id}: C = {c:.6f}")
        ct = v[f"Ct[{m.id}]"]
        if not m.linking_v_min**2 - tol <= ct <= m.linking_v_max**2 + tol:
            report.violations.append(f"linking voltage of {m.id}: C = {ct:.6f}")
        for ln in m.lines:
            loss = v[f"fP[{ln.from_bus},{ln.to_bus}]"] + v[f"fP[{ln.to_bus},{ln.from_bus}]"]
            if loss > ln.p_loss_max + tol:
                report.violations.append(f"loss on {ln.id}: {loss:.6g} pu")
        for ld in m.loads:
            x = sol.served[ld.id]
            for served, dem in (("rho", "pD"), ("sigma", "qD")):
                gap = v[f"{served}[{ld.id}]"] - x * v[f"{dem}[{ld.id}]"]
                if abs(gap) > tol:
                    report.violations.append(f"{served} of {ld.id} differs from x * {dem} by {gap:.3g}")
    for ln in case.linking_lines:
        loss = v[f"ftP[{ln.id}:{ln.from_mg}>{ln.to_mg}]"] + v[f"ftP[{ln.id}:{ln.to_mg}>{ln.from_mg}]"]
        if loss > ln.p_loss_max + tol:
            report.violations.append(f"loss on {ln.id}: {loss:.6g} pu")
    return report


def trace_csv(trace: Sequence[IterationRecord]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["k", "psi", "cut_pool", "curtailment", "edges", "seconds"])
    for r in trace:
        w.writerow([r.k, f"{r.psi:.2f}", r.pool_size, f"{round(r.curtailment_kw, 1) + 0.0:.1f}", " ".join(r.edges), f"{r.seconds:.3f}"])
    return buf.getvalue()
