"""Report emission for the command-line workflows.

Reports are plain JSON and CSV.  Every frequency appears twice, in pu and in
Hz, and nothing depends on wall-clock time unless timings are requested, so
identical inputs give byte-identical files.
"""

from __future__ import annotations

import csv
import io
import json
from pathlib import Path
from typing import Any, Sequence

from .case import NetworkCase
from .conic import SolveSettings
from .cuts import CutRecord, IterationRecord, VerifyReport
from .relaxation import Solution
from .sfr import StepTrajectory, component_coefficients
from .ufls import UflsOutcome

__all__ = [
    "freq",
    "solution_report",
    "verify_report",
    "comparison_rows",
    "comparison_table",
    "comparison_csv",
    "trajectory_csv",
    "dumps",
    "write",
]


def _r(v: float, nd: int = 9) -> float:
    # round away last-bit noise so reports stay stable across platforms
    return float(round(float(v), nd)) + 0.0


def freq(case: NetworkCase, pu: float) -> dict[str, float]:
    return {"pu": _r(pu, 10), "hz": _r(case.hz(pu), 8)}


def dumps(doc: Any) -> str:
    return json.dumps(doc, indent=2, sort_keys=True) + "\n"


def write(out_dir: Path, name: str, text: str) -> Path:
    out_dir.mkdir(parents=True, exist_ok=True)
    path = out_dir / name
    path.write_text(text)
    return path


def _settings(settings: SolveSettings) -> dict[str, float]:
    return {
        "feas_tol": settings.feas_tol,
        "gap_tol": settings.gap_tol,
        "int_tol": settings.int_tol,
        "mip_gap": settings.mip_gap,
        "node_limit": settings.node_limit,
        "time_limit": settings.time_limit,
    }


def _limits(case: NetworkCase) -> dict:
    lim = case.frequency_limits
    return {
        "nadir_min": freq(case, lim.nadir_min),
        "nadir_max": freq(case, lim.nadir_max),
        "steady_state_min": freq(case, lim.ss_min),
        "steady_state_max": freq(case, lim.ss_max),
    }


def solution_report(
    case: NetworkCase,
    status: str,
    solution: Solution | None,
    trace: Sequence[IterationRecord],
    pool: Sequence[CutRecord],
    settings: SolveSettings,
    message: str = "",
    timings: bool = False,
) -> dict:
    """JSON-ready summary of a cutting-plane run."""
    doc: dict[str, Any] = {
        "case": case.metadata.get("name", ""),
        "severity_kw": _r(case.kw(case.severity), 6),
        "f_nominal_hz": case.bases.f_nominal,
        "frequency_limits": _limits(case),
        "settings": _settings(settings),
        "status": status,
        "message": message,
        "iterations": len(trace),
        "cuts": [
            {"nodes": sorted(c.nodes), "kind": c.kind, "tree": sorted(c.tree), "iteration": c.iteration,
             "coefficient": _r(c.coefficient, 12), "trigger": freq(case, c.value)}
            for c in pool
        ],
    }
    if timings and trace:
        doc["seconds"] = _r(trace[-1].seconds, 3)
    if solution is None:
        doc["solution"] = None
        return doc
    comps = []
    for comp in sorted(solution.components, key=lambda c: sorted(c)):
        mm = solution.mismatch(case, comp)
        alpha, beta = component_coefficients(case, comp)
        comps.append(
            {"microgrids": sorted(comp), "mismatch_kw": _r(case.kw(mm), 6),
             "nadir": freq(case, alpha * mm), "steady_state": freq(case, beta * mm)}
        )
    doc["solution"] = {
        "objective": _r(solution.objective, 6),
        "closed_lines": list(solution.closed),
        "curtailment_kw": _r(case.kw(solution.curtailment_pu), 6),
        "nominal_shed_kw": _r(case.kw(solution.nominal_shed_pu), 6),
        "curtailment_by_microgrid_kw": {k: _r(case.kw(v), 6) for k, v in sorted(solution.curtailment_by_mg.items())},
        "shed_loads": solution.shed_loads(),
        "components": comps,
    }
    return doc


def verify_report(case: NetworkCase, rep: VerifyReport) -> dict:
    return {
        "ok": rep.ok,
        "violations": list(rep.violations),
        "components": [
            {"microgrids": list(c.nodes), "mismatch_kw": _r(case.kw(c.mismatch_pu), 6),
             "simulated_nadir": freq(case, c.nadir_pu), "simulated_steady_state": freq(case, c.steady_state_pu),
             "nadir_ok": c.nadir_ok, "steady_state_ok": c.steady_state_ok}
            for c in rep.components
        ],
    }


def comparison_rows(case: NetworkCase, ufls: UflsOutcome, rep: VerifyReport | None, solution: Solution | None) -> list[dict]:
    """One row per microgrid: baseline shed and frequencies next to the optimizer's."""
    opt_by_mg: dict[str, tuple] = {}
    if rep is not None and solution is not None:
        for c in rep.components:
            for m in c.nodes:
                opt_by_mg[m] = (c, "+".join(c.nodes))
    rows = []
    for mo in ufls.microgrids:
        row = {
            "microgrid": mo.microgrid,
            "deficit_kw": mo.deficit_kw,
            "ufls_shed_kw": mo.shed_kw,
            "ufls_nadir_pu": mo.nadir_hz / case.bases.f_nominal,
            "ufls_nadir_hz": mo.nadir_hz,
            "ufls_ss_pu": mo.steady_state_hz / case.bases.f_nominal,
            "ufls_ss_hz": mo.steady_state_hz,
            "ufls_ok": mo.ok,
        }
        if mo.microgrid in opt_by_mg:
            c, label = opt_by_mg[mo.microgrid]
            row.update(
                opt_component=label,
                opt_shed_kw=case.kw(solution.curtailment_by_mg[mo.microgrid]),
                opt_nadir_pu=c.nadir_pu,
                opt_nadir_hz=case.hz(c.nadir_pu),
                opt_ss_pu=c.steady_state_pu,
                opt_ss_hz=case.hz(c.steady_state_pu),
                opt_ok=c.nadir_ok and c.steady_state_ok,
            )
        rows.append(row)
    return rows


_COLUMNS = [
    "microgrid", "deficit_kw", "ufls_shed_kw", "ufls_nadir_pu", "ufls_nadir_hz", "ufls_ss_pu", "ufls_ss_hz", "ufls_ok",
    "opt_component", "opt_shed_kw", "opt_nadir_pu", "opt_nadir_hz", "opt_ss_pu", "opt_ss_hz", "opt_ok",
]


def _fmt(v) -> str:
    if isinstance(v, bool):
        return "yes" if v else "no"
    if isinstance(v, float):
        return f"{v:.6f}" if abs(v) < 1 else f"{v:.1f}"
    return str(v)


def comparison_csv(rows: Sequence[dict]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(_COLUMNS)
    for r in rows:
        w.writerow([_fmt(r[c]) if c in r else "" for c in _COLUMNS])
    return buf.getvalue()


def comparison_table(rows: Sequence[dict], ufls_total_kw: float, opt_total_kw: float | None) -> str:
    head = f"{'microgrid':<10} {'UFLS shed kW':>13} {'nadir Hz':>9} {'ss Hz':>8} {'ok':>3} | " \
           f"{'opt shed kW':>12} {'nadir Hz':>9} {'ss Hz':>8} {'ok':>3}"
    lines = [head, "-" * len(head)]
    for r in rows:
        left = f"{r['microgrid']:<10} {r['ufls_shed_kw']:>13.1f} {r['ufls_nadir_hz']:>9.4f} " \
               f"{r['ufls_ss_hz']:>8.4f} {_fmt(r['ufls_ok']):>3}"
        if "opt_shed_kw" in r:
            right = f"{r['opt_shed_kw']:>12.1f} {r['opt_nadir_hz']:>9.4f} {r['opt_ss_hz']:>8.4f} {_fmt(r['opt_ok']):>3}"
        else:
            right = f"{'-':>12} {'-':>9} {'-':>8} {'-':>3}"
        lines.append(f"{left} | {right}")
    lines.append("-" * len(head))
    opt = f"{opt_total_kw:>12.1f}" if opt_total_kw is not None else f"{'-':>12}"
    lines.append(f"{'total':<10} {ufls_total_kw:>13.1f} {'':>9} {'':>8} {'':>3} | {opt}")
    return "\n".join(lines) + "\n"


def trajectory_csv(traj: StepTrajectory, f_nominal: float, every: int = 1) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["t", "d_omega_pu", "d_f_hz"])
    for t, y in zip(traj.t[::every], traj.d_omega[::every]):
        w.writerow([f"{t:.6f}", f"{y:.10e}", f"{y * f_nominal:.8e}"])
    return buf.getvalue()
