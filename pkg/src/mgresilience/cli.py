"""Command-line front end: ``mgresilience <subcommand> [options]``.

Exit codes: 0 success (for ``solve``/``compare``: a frequency-secure optimum),
1 input or I/O error, 2 infeasible, 3 a node, time or round limit was hit.
Log verbosity follows the ``MGRES_LOG_LEVEL`` environment variable.
"""

from __future__ import annotations

import argparse
import logging
import os
import sys
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

from . import __version__
from . import report
from .case import (
    CaseError,
    NetworkCase,
    bundled_case_path,
    load_case,
    validate_case,
    with_f_nominal,
    with_frequency_limits,
    with_severity,
)
from .conic import SolveSettings, SolverError
from .cuts import CutLoopError, LimitReached, run, trace_csv, verify
from .relaxation import build_base_model, census, census_formula, write_cbf
from .sfr import component_aggregate, nadir, settling_time, simulate_step
from .ufls import DEFAULT_STAGES, RelayStage, outcome_csv, simulate_ufls

__all__ = ["RunConfig", "build_parser", "main"]

EXIT_OK, EXIT_ERROR, EXIT_INFEASIBLE, EXIT_LIMIT = 0, 1, 2, 3

log = logging.getLogger("mgresilience.cli")


@dataclass
class RunConfig:
    command: str
    case_path: Path
    severity_kw: float | None = None
    f_nominal: float | None = None
    nadir_limit_hz: float | None = None
    ss_limit_hz: float | None = None
    settings: SolveSettings = field(default_factory=SolveSettings)
    out: Path = Path("out")
    seed: int = 0
    reproducible: bool = False
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if not self.case_path.is_file():
            raise FileNotFoundError(f"case file not found: {self.case_path}")
        for name in ("severity_kw", "f_nominal", "nadir_limit_hz", "ss_limit_hz"):
            v = getattr(self, name)
            if v is not None and not isinstance(v, (int, float)):
                raise TypeError(f"{name} must be a number")
        if self.severity_kw is not None and self.severity_kw < 0:
            raise ValueError("severity must be nonnegative")
        if self.f_nominal is not None and self.f_nominal <= 0:
            raise ValueError("f-nominal must be positive")

    def load(self) -> NetworkCase:
        case = load_case(self.case_path)
        if self.f_nominal is not None:
            case = with_f_nominal(case, self.f_nominal)
        if self.nadir_limit_hz is not None or self.ss_limit_hz is not None:
            case = with_frequency_limits(case, self.nadir_limit_hz, self.ss_limit_hz)
        if self.severity_kw is not None:
            case = with_severity(case, self.severity_kw / case.bases.s_base)
        return case


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--case", type=Path, default=bundled_case_path(), help="case JSON (default: bundled case39)")
    p.add_argument("--severity", type=float, help="islanding severity in kW (rescales the case)")
    p.add_argument("--f-nominal", type=float, help="nominal frequency in Hz")
    p.add_argument("--nadir-limit", type=float, help="symmetric nadir band in Hz")
    p.add_argument("--ss-limit", type=float, help="symmetric steady-state band in Hz")
    p.add_argument("--mip-gap", type=float, default=0.0, help="relative MIP gap (default 0)")
    p.add_argument("--time-limit", type=float, default=3600.0, help="seconds for the whole run")
    p.add_argument("--node-limit", type=int, default=200_000)
    p.add_argument("--seed", type=int, default=0, help="seed for randomized checks (default 0)")
    p.add_argument("--out", type=Path, default=Path("out"), help="output directory")
    p.add_argument("--reproducible", action="store_true", help="omit wall-clock timings from outputs")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="mgresilience", description="Frequency-secure islanding of networked microgrids.")
    ap.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("solve", help="run the cutting-plane optimizer")
    _common(p)

    p = sub.add_parser("compare", help="optimizer against the UFLS baseline")
    _common(p)
    p.add_argument("--baseline-only", action="store_true", help="skip the optimizer")
    p.add_argument("--latency", type=float, default=0.0, help="relay measurement latency in s")

    p = sub.add_parser("baseline-ufls", help="simulate the conventional relay scheme")
    _common(p)
    p.add_argument("--latency", type=float, default=0.0)
    p.add_argument("--stage", action="append", metavar="HZ:FRACTION[:DELAY]",
                   help="relay stage; repeat for several (default: built-in four-stage table)")

    p = sub.add_parser("simulate-sfr", help="SFR step response of a set of microgrids")
    _common(p)
    p.add_argument("--subset", required=True, help="comma-separated microgrid ids")
    p.add_argument("--dp", type=float, required=True, help="step disturbance in pu (positive = surplus)")
    p.add_argument("--t-end", type=float, help="horizon in s (default: settling time)")
    p.add_argument("--dt", type=float, default=1e-3)

    p = sub.add_parser("validate", help="check a case file and print the model census")
    _common(p)
    p.add_argument("--cbf", action="store_true", help="also write the base model in CBF format")
    return ap


def _config(args: argparse.Namespace) -> RunConfig:
    settings = SolveSettings(mip_gap=args.mip_gap, time_limit=args.time_limit, node_limit=args.node_limit)
    skip = {"command", "case", "severity", "f_nominal", "nadir_limit", "ss_limit", "mip_gap", "time_limit",
            "node_limit", "seed", "out", "reproducible"}
    return RunConfig(
        command=args.command,
        case_path=args.case,
        severity_kw=args.severity,
        f_nominal=args.f_nominal,
        nadir_limit_hz=args.nadir_limit,
        ss_limit_hz=args.ss_limit,
        settings=settings,
        out=args.out,
        seed=args.seed,
        reproducible=args.reproducible,
        params={k: v for k, v in vars(args).items() if k not in skip},
    )


def _parse_stage(text: str) -> RelayStage:
    parts = text.split(":")
    if len(parts) not in (2, 3):
        raise ValueError(f"stage {text!r} must read HZ:FRACTION[:DELAY]")
    return RelayStage(*(float(x) for x in parts))


def _optimize(cfg: RunConfig, case: NetworkCase):
    """Run the loop and write its reports; returns (exit code, solution, verify report)."""
    clock = (lambda: 0.0) if cfg.reproducible else time.perf_counter
    sol, trace, pool, message = None, [], [], ""
    try:
        res = run(case, cfg.settings, clock=clock)
        sol, trace, pool, status, code = res.solution, res.trace, res.pool, "optimal", EXIT_OK
    except LimitReached as e:
        sol, trace, status, code, message = e.solution, e.trace, "limit", EXIT_LIMIT, str(e)
    except CutLoopError as e:
        trace, status, code, message = e.trace, "infeasible", EXIT_INFEASIBLE, str(e)
    doc = report.solution_report(case, status, sol, trace, pool, cfg.settings, message, timings=not cfg.reproducible)
    report.write(cfg.out, "solution.json", report.dumps(doc))
    report.write(cfg.out, "trace.csv", trace_csv(trace))
    rep = None
    if sol is not None:
        rep = verify(case, sol)
        report.write(cfg.out, "verify.json", report.dumps(report.verify_report(case, rep)))
        if code == EXIT_OK and not rep.ok:
            message = "verify found violations: " + "; ".join(rep.violations)
            code = EXIT_INFEASIBLE
    if message:
        print(message, file=sys.stderr)
    return code, sol, rep


def cmd_solve(cfg: RunConfig) -> int:
    case = cfg.load()
    code, sol, rep = _optimize(cfg, case)
    if sol is not None:
        print(f"status {'ok' if code == EXIT_OK else 'not ok'}; objective {sol.objective:.2f}; "
              f"curtailment {round(case.kw(sol.curtailment_pu), 1) + 0.0:.1f} kW; closed lines {' '.join(sol.closed) or '-'}")
        for c in rep.components:
            nad, ss = round(c.nadir_pu, 6) + 0.0, round(c.steady_state_pu, 6) + 0.0
            print(f"  {{{','.join(c.nodes)}}}: nadir {nad:+.6f} pu ({case.hz(nad):+.4f} Hz), "
                  f"steady state {ss:+.6f} pu ({case.hz(ss):+.4f} Hz)")
    print(f"reports written to {cfg.out}")
    return code


def cmd_compare(cfg: RunConfig) -> int:
    case = cfg.load()
    code, sol, rep = EXIT_OK, None, None
    if not cfg.params.get("baseline_only"):
        code, sol, rep = _optimize(cfg, case)
    ufls = simulate_ufls(case, DEFAULT_STAGES, latency=cfg.params.get("latency", 0.0))
    rows = report.comparison_rows(case, ufls, rep, sol)
    opt_total = case.kw(sol.curtailment_pu) if sol is not None else None
    table = report.comparison_table(rows, ufls.total_shed_kw, opt_total)
    report.write(cfg.out, "compare.csv", report.comparison_csv(rows))
    report.write(cfg.out, "compare.txt", table)
    print(table, end="")
    return code


def cmd_baseline_ufls(cfg: RunConfig) -> int:
    case = cfg.load()
    stages = [_parse_stage(s) for s in cfg.params["stage"]] if cfg.params.get("stage") else list(DEFAULT_STAGES)
    ufls = simulate_ufls(case, stages, latency=cfg.params.get("latency", 0.0))
    report.write(cfg.out, "ufls.csv", outcome_csv(ufls))
    events = "t,microgrid,stage,kw\n" + "".join(f"{e.t:.3f},{e.microgrid},{e.stage},{e.kw:.1f}\n" for e in ufls.events)
    report.write(cfg.out, "ufls_events.csv", events)
    rows = report.comparison_rows(case, ufls, None, None)
    print(report.comparison_table(rows, ufls.total_shed_kw, None), end="")
    if ufls.violating:
        print(f"outside limits: {' '.join(ufls.violating)}")
    return EXIT_OK


def cmd_simulate_sfr(cfg: RunConfig) -> int:
    case = cfg.load()
    subset = [s.strip() for s in cfg.params["subset"].split(",") if s.strip()]
    unknown = sorted(set(subset) - set(case.mg_ids))
    if not subset or unknown:
        raise ValueError(f"unknown microgrid id(s): {', '.join(unknown) or '(empty subset)'}")
    agg = component_aggregate(case, subset)
    dp = cfg.params["dp"]
    t_end = cfg.params.get("t_end") or settling_time(agg, 14.0)
    dt = cfg.params.get("dt", 1e-3)
    traj = simulate_step(agg, dp, t_end, dt)
    m = nadir(agg)
    f0 = case.bases.f_nominal
    report.write(cfg.out, "sfr.csv", report.trajectory_csv(traj, f0))
    print(f"subset {{{','.join(sorted(subset))}}} step {dp:+g} pu")
    print(f"  closed form: nadir {m.d_omega_nadir_unit * dp:+.8f} pu ({m.d_omega_nadir_unit * dp * f0:+.6f} Hz), "
          f"steady state {m.d_omega_ss_unit * dp:+.8f} pu ({m.d_omega_ss_unit * dp * f0:+.6f} Hz)")
    print(f"  simulated:   extremum {traj.extremum:+.8f} pu ({traj.extremum * f0:+.6f} Hz) at {traj.t_extremum:.4f} s, "
          f"final {traj.d_omega[-1]:+.8f} pu ({traj.d_omega[-1] * f0:+.6f} Hz)")
    return EXIT_OK


def cmd_validate(cfg: RunConfig) -> int:
    case = cfg.load()
    validate_case(case)
    model = build_base_model(case)
    counts = census(model)
    expected = census_formula(case)
    print(f"ok: {len(case.microgrids)} microgrids, {len(case.linking_lines)} linking lines, "
          f"severity {case.kw(case.severity):.1f} kW, f_nominal {case.bases.f_nominal:g} Hz")
    for key in ("variables", "binaries", "linear", "cones"):
        flag = "" if counts[key] == expected[key] else f" (formula {expected[key]})"
        print(f"  {key}: {counts[key]}{flag}")
    if cfg.params.get("cbf"):
        path = report.write(cfg.out, "model.cbf", write_cbf(model))
        print(f"  model written to {path}")
    return EXIT_OK


COMMANDS = {
    "solve": cmd_solve,
    "compare": cmd_compare,
    "baseline-ufls": cmd_baseline_ufls,
    "simulate-sfr": cmd_simulate_sfr,
    "validate": cmd_validate,
}


def main(argv: Sequence[str] | None = None) -> int:
    level = os.environ.get("MGRES_LOG_LEVEL", "WARNING").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING), format="%(levelname)s %(name)s: %(message)s")
    args = build_parser().parse_args(argv)
    try:
        cfg = _config(args)
        return COMMANDS[cfg.command](cfg)
    except (CaseError, OSError, ValueError, TypeError, KeyError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_ERROR
    except SolverError as e:
        print(f"solver error: {e}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
