"""Conventional under-frequency load shedding, simulated per microgrid.

Each microgrid islands on its own and faces its own pre-islanding import as a
step deficit.  Relay stages watch the frequency deviation; a stage trips when
the deviation stays beyond its threshold for the stage delay plus the
measurement latency, and sheds a fixed share of the microgrid's load.  The
SFR state carries over continuously across trips.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .case import NetworkCase
from .sfr import _iterate_affine, _rk4_map, _state_matrices, component_aggregate, settling_time

__all__ = ["RelayStage", "ShedEvent", "MicrogridOutcome", "UflsOutcome", "DEFAULT_STAGES", "simulate_ufls", "outcome_csv"]


@dataclass(frozen=True)
class RelayStage:
    threshold_hz: float  # trip when the deviation falls below -threshold_hz
    fraction: float  # share of the microgrid's nominal load shed by this stage
    delay: float = 0.1  # s

    def __post_init__(self):
        if not (math.isfinite(self.threshold_hz) and self.threshold_hz > 0):
            raise ValueError("threshold must be a positive deviation in Hz")
        if not 0.0 < self.fraction <= 1.0:
            raise ValueError("block fraction must lie in (0, 1]")
        if not (math.isfinite(self.delay) and self.delay >= 0):
            raise ValueError("delay must be nonnegative")


# stand-in relay table: 0.3 / 0.5 / 0.7 / 0.9 Hz, 10% blocks, 100 ms delay
DEFAULT_STAGES = (
    RelayStage(0.3, 0.10, 0.1),
    RelayStage(0.5, 0.10, 0.1),
    RelayStage(0.7, 0.10, 0.1),
    RelayStage(0.9, 0.10, 0.1),
)


@dataclass(frozen=True)
class ShedEvent:
    t: float
    microgrid: str
    stage: int
    kw: float


@dataclass(frozen=True)
class MicrogridOutcome:
    microgrid: str
    deficit_kw: float
    shed_kw: float
    nadir_hz: float
    steady_state_hz: float
    nadir_ok: bool
    steady_state_ok: bool

    @property
    def ok(self) -> bool:
        return self.nadir_ok and self.steady_state_ok


@dataclass
class UflsOutcome:
    microgrids: list[MicrogridOutcome]
    events: list[ShedEvent] = field(default_factory=list)
    traces: dict = field(default_factory=dict)  # microgrid -> (t, d_omega pu)

    @property
    def total_shed_kw(self) -> float:
        return sum(m.shed_kw for m in self.microgrids)

    @property
    def violating(self) -> list[str]:
        return [m.microgrid for m in self.microgrids if not m.ok]


def _check_stages(stages: Sequence[RelayStage]) -> None:
    th = [s.threshold_hz for s in stages]
    if any(b < a for a, b in zip(th, th[1:])):
        raise ValueError("stage thresholds must not decrease")


def _simulate_one(agg, deficit_pu, load_pu, stages, latency, f_nominal, t_end, dt):
    a, b = _state_matrices(agg)
    n = int(round(t_end / dt))
    thresholds = [s.threshold_hz / f_nominal for s in stages]
    waits = [int(math.ceil((s.delay + latency) / dt - 1e-9)) for s in stages]
    tripped = [False] * len(stages)
    since: list[int | None] = [None] * len(stages)  # global step where the current run below the threshold began
    u = -deficit_pu
    x = np.zeros(2)
    k0 = 0
    ys = []
    trips = []  # (step, stage, shed pu)
    while True:
        phi, gam = _rk4_map(a, b, u, dt)
        states = _iterate_affine(phi, gam, x, n - k0)
        y = states[:, 0]
        # earliest trip of any armed stage on this segment; y[0] was scanned on the previous one
        first = None
        for i, th in enumerate(thresholds):
            if tripped[i]:
                continue
            start = since[i]
            for j in range(1, len(y)):
                if y[j] < -th:
                    start = k0 + j if start is None else start
                    if k0 + j - start >= waits[i]:
                        if first is None or j < first[0]:
                            first = (j, i)
                        break
                else:
                    start = None
        end = len(y) - 1 if first is None else first[0]
        # carry each armed stage's timer up to the segment end
        for i, th in enumerate(thresholds):
            if tripped[i]:
                continue
            for j in range(1, end + 1):
                if y[j] < -th:
                    since[i] = k0 + j if since[i] is None else since[i]
                else:
                    since[i] = None
        if first is None:
            ys.append(y if not ys else y[1:])
            break
        j, i = first
        ys.append(y[: j + 1] if not ys else y[1 : j + 1])
        shed = min(stages[i].fraction * load_pu, load_pu - sum(s for _, _, s in trips))
        tripped[i] = True
        trips.append((k0 + j, i, max(shed, 0.0)))
        u += max(shed, 0.0)
        x = states[j]
        k0 += j
    y = np.concatenate(ys)
    return y, trips, u


def simulate_ufls(
    case: NetworkCase,
    stages: Sequence[RelayStage] = DEFAULT_STAGES,
    latency: float = 0.0,
    dt: float = 1e-3,
    t_end: float | None = None,
) -> UflsOutcome:
    """Run the relay scheme in every microgrid, each islanded on its own."""
    _check_stages(stages)
    if not (math.isfinite(latency) and latency >= 0):
        raise ValueError("latency must be nonnegative")
    f0 = case.bases.f_nominal
    lim = case.frequency_limits
    out = UflsOutcome([])
    for m in case.microgrids:
        agg = component_aggregate(case, [m.id])
        if not all(math.isfinite(v) for v in (agg.H_a, agg.D, agg.inv_R_a, agg.K_a, agg.T_prime)):
            raise ValueError(f"non-finite dynamics in {m.id}")
        horizon = t_end if t_end is not None else max(settling_time(agg, 14.0), 2.0) + sum(
            s.delay for s in stages
        ) + latency
        load = m.total_load
        y, trips, u_final = _simulate_one(agg, m.delta_p0, load, stages, latency, f0, horizon, dt)
        t = np.arange(len(y)) * dt
        nadir = float(y.min()) if m.delta_p0 >= 0 else float(y.max())
        ss = u_final / (agg.D + agg.inv_R_a)
        shed = sum(s for _, _, s in trips)
        out.microgrids.append(
            MicrogridOutcome(
                microgrid=m.id,
                deficit_kw=case.kw(m.delta_p0),
                shed_kw=case.kw(shed),
                nadir_hz=nadir * f0,
                steady_state_hz=ss * f0,
                nadir_ok=lim.nadir_min - 1e-12 <= nadir <= lim.nadir_max + 1e-12,
                steady_state_ok=lim.ss_min - 1e-12 <= ss <= lim.ss_max + 1e-12,
            )
        )
        for step, i, s in trips:
            out.events.append(ShedEvent(step * dt, m.id, i + 1, case.kw(s)))
        out.traces[m.id] = (t, y)
    out.events.sort(key=lambda e: (e.t, e.microgrid, e.stage))
    return out


def outcome_csv(outcome: UflsOutcome) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["microgrid", "deficit_kw", "shed_kw", "nadir_hz", "steady_state_hz", "nadir_ok", "steady_state_ok"])
    for m in outcome.microgrids:
        w.writerow(
            [m.microgrid, f"{m.deficit_kw:.1f}", f"{m.shed_kw:.1f}", f"{m.nadir_hz:.4f}",
             f"{m.steady_state_hz:.4f}", int(m.nadir_ok), int(m.steady_state_ok)]
        )
    return buf.getvalue()
