"""Multi-microgrid case data model, case-file I/O and linking-grid graph utilities.

All electrical quantities are per unit on ``bases.s_base`` / ``bases.v_base``.
Frequency limits are stored in Hz exactly as read and exposed in per unit
through properties (division by the nominal frequency).

Sign convention used throughout the package: ``delta_p0 > 0`` is power
imported by a microgrid from the linking grid before islanding.  The
post-islanding power mismatch of a component S is
``sum(-delta_p0[m] for m in S) + shed``; negative values are deficits.
"""

from __future__ import annotations

import itertools
import json
import math
from collections import deque
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Iterable, Mapping, Sequence

__all__ = [
    "CaseError",
    "CaseParseError",
    "CaseValidationError",
    "BaseValues",
    "Bus",
    "Line",
    "LinkingLine",
    "Der",
    "Load",
    "VscDynamics",
    "Microgrid",
    "FrequencyLimits",
    "NetworkCase",
    "SwitchConfig",
    "load_case",
    "parse_case",
    "case_to_dict",
    "dump_case",
    "bundled_case_path",
    "with_severity",
    "with_f_nominal",
    "with_frequency_limits",
    "connected_components",
    "spanning_tree_feasible",
    "spanning_tree_feasible_enumerated",
    "spanning_tree_edges",
    "cutset",
    "internal_edges",
    "connected_subsets",
]

ZIP_TOL = 1e-9
SEVERITY_TOL = 1e-6


class CaseError(Exception):
    """Base class for case loading problems."""


class CaseParseError(CaseError):
    """The case file is not a well-formed case document."""


class CaseValidationError(CaseError):
    """The case document parsed but violates a model invariant."""


@dataclass(frozen=True)
class BaseValues:
    s_base: float  # kW
    v_base: float  # kV
    f_nominal: float = 50.0  # Hz

    def __post_init__(self):
        for name in ("s_base", "v_base", "f_nominal"):
            if not getattr(self, name) > 0:
                raise CaseValidationError(f"bases.{name} must be strictly positive")


@dataclass(frozen=True)
class Bus:
    id: str
    microgrid_id: str
    v_min: float
    v_max: float
    is_boundary: bool = False


@dataclass(frozen=True)
class Line:
    id: str
    from_bus: str
    to_bus: str
    g: float
    b: float
    p_loss_max: float


@dataclass(frozen=True)
class LinkingLine:
    id: str
    from_mg: str
    to_mg: str
    g: float
    b: float
    p_flow_max: float
    q_flow_max: float
    p_loss_max: float
    big_m_p: float
    big_m_q: float

    def endpoints(self) -> frozenset:
        return frozenset((self.from_mg, self.to_mg))


@dataclass(frozen=True)
class Der:
    id: str
    bus: str
    p_min: float
    p_max: float
    q_min: float
    q_max: float
    ramp_up: float
    ramp_down: float
    p_initial: float


@dataclass(frozen=True)
class Load:
    id: str
    bus: str
    p_bar: float
    q_bar: float
    zip_p: tuple[float, float, float]
    zip_q: tuple[float, float, float]
    voll: float
    load_class: str = "general"

    def p_at(self, c: float) -> float:
        """Active demand at squared voltage ``c`` (ZIP model)."""
        ki, kc, kp = self.zip_p
        return self.p_bar * (ki * c + kc * math.sqrt(c) + kp)

    def q_at(self, c: float) -> float:
        ki, kc, kp = self.zip_q
        return self.q_bar * (ki * c + kc * math.sqrt(c) + kp)


@dataclass(frozen=True)
class VscDynamics:
    H: float
    R: float
    T: float
    T_prime: float


@dataclass(frozen=True)
class Microgrid:
    id: str
    buses: tuple[Bus, ...]
    lines: tuple[Line, ...]
    ders: tuple[Der, ...]
    loads: tuple[Load, ...]
    boundary_bus: str
    dynamics: VscDynamics
    delta_p0: float
    delta_q0: float = 0.0
    linking_v_min: float = 0.95
    linking_v_max: float = 1.05

    def bus(self, bus_id: str) -> Bus:
        for b in self.buses:
            if b.id == bus_id:
                return b
        raise KeyError(bus_id)

    @property
    def total_load(self) -> float:
        return sum(ld.p_bar for ld in self.loads)


@dataclass(frozen=True)
class FrequencyLimits:
    """Frequency security limits.  Limits are kept in Hz; pu via properties."""

    nadir_min_hz: float
    nadir_max_hz: float
    ss_min_hz: float
    ss_max_hz: float
    f_nominal: float
    big_m_nadir: float
    big_m_ss: float

    @property
    def nadir_min(self) -> float:
        return self.nadir_min_hz / self.f_nominal

    @property
    def nadir_max(self) -> float:
        return self.nadir_max_hz / self.f_nominal

    @property
    def ss_min(self) -> float:
        return self.ss_min_hz / self.f_nominal

    @property
    def ss_max(self) -> float:
        return self.ss_max_hz / self.f_nominal


@dataclass(frozen=True)
class NetworkCase:
    bases: BaseValues
    microgrids: tuple[Microgrid, ...]
    linking_lines: tuple[LinkingLine, ...]
    damping: float
    frequency_limits: FrequencyLimits
    severity: float
    metadata: Mapping = field(default_factory=dict, hash=False)

    @property
    def mg_ids(self) -> tuple[str, ...]:
        return tuple(m.id for m in self.microgrids)

    def microgrid(self, mg_id: str) -> Microgrid:
        for m in self.microgrids:
            if m.id == mg_id:
                return m
        raise KeyError(mg_id)

    def linking_line(self, line_id: str) -> LinkingLine:
        for ln in self.linking_lines:
            if ln.id == line_id:
                return ln
        raise KeyError(line_id)

    def all_loads(self) -> Iterable[tuple[Microgrid, Load]]:
        for m in self.microgrids:
            for ld in m.loads:
                yield m, ld

    def kw(self, pu: float) -> float:
        return pu * self.bases.s_base

    def hz(self, pu: float) -> float:
        return pu * self.bases.f_nominal


@dataclass(frozen=True)
class SwitchConfig:
    on_edges: frozenset

    def __init__(self, on_edges: Iterable[str] = ()):
        object.__setattr__(self, "on_edges", frozenset(on_edges))

    @classmethod
    def all_on(cls, case: NetworkCase) -> "SwitchConfig":
        return cls(ln.id for ln in case.linking_lines)


# ---------------------------------------------------------------------------
# parsing


def _req(d: Mapping, key: str, where: str):
    if not isinstance(d, Mapping):
        raise CaseParseError(f"{where}: expected an object")
    if key not in d:
        raise CaseParseError(f"{where}: missing key '{key}'")
    return d[key]


def _num(d: Mapping, key: str, where: str, default=None) -> float:
    if default is not None and key not in d:
        return float(default)
    v = _req(d, key, where)
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise CaseParseError(f"{where}.{key}: expected a number, got {v!r}")
    if not math.isfinite(v):
        raise CaseValidationError(f"{where}.{key} must be finite")
    return float(v)


def _triple(d: Mapping, key: str, where: str) -> tuple[float, float, float]:
    v = _req(d, key, where)
    if not isinstance(v, Sequence) or len(v) != 3:
        raise CaseParseError(f"{where}.{key}: expected a list of 3 numbers")
    out = []
    for x in v:
        if isinstance(x, bool) or not isinstance(x, (int, float)):
            raise CaseParseError(f"{where}.{key}: expected a list of 3 numbers")
        out.append(float(x))
    return tuple(out)


def default_linking_big_m(g: float, b: float, v_max: float) -> float:
    """Upper bound of |G(C_mm - C_mk) - B S_mk| over the voltage box."""
    return 2.0 * v_max**2 * (abs(g) + abs(b))


def parse_case(doc: Mapping, f_nominal: float | None = None) -> NetworkCase:
    """Build and validate a :class:`NetworkCase` from a decoded JSON document."""
    if not isinstance(doc, Mapping):
        raise CaseParseError("case document must be a JSON object")
    for key in ("bases", "damping", "frequency_limits", "microgrids", "linking_lines", "severity"):
        _req(doc, key, "case")

    b = doc["bases"]
    bases = BaseValues(
        s_base=_num(b, "s_base", "bases"),
        v_base=_num(b, "v_base", "bases"),
        f_nominal=float(f_nominal) if f_nominal is not None else _num(b, "f_nominal", "bases", 50.0),
    )

    mgs_doc = doc["microgrids"]
    if not isinstance(mgs_doc, list) or not mgs_doc:
        raise CaseParseError("microgrids: expected a non-empty list")
    microgrids = tuple(_parse_microgrid(m, i) for i, m in enumerate(mgs_doc))

    mg_by_id = {m.id: m for m in microgrids}
    links_doc = doc["linking_lines"]
    if not isinstance(links_doc, list):
        raise CaseParseError("linking_lines: expected a list")
    links = []
    for i, ld in enumerate(links_doc):
        where = f"linking_lines[{i}]"
        fm, tm = str(_req(ld, "from_mg", where)), str(_req(ld, "to_mg", where))
        g, bb = _num(ld, "g", where), _num(ld, "b", where)
        vmax = max(
            (mg_by_id[x].linking_v_max for x in (fm, tm) if x in mg_by_id),
            default=1.0,
        )
        m_def = default_linking_big_m(g, bb, vmax)
        links.append(
            LinkingLine(
                id=str(ld.get("id", f"l{i + 1}")),
                from_mg=fm,
                to_mg=tm,
                g=g,
                b=bb,
                p_flow_max=_num(ld, "p_flow_max", where),
                q_flow_max=_num(ld, "q_flow_max", where),
                p_loss_max=_num(ld, "p_loss_max", where),
                big_m_p=_num(ld, "big_m_p", where, m_def),
                big_m_q=_num(ld, "big_m_q", where, m_def),
            )
        )
    links = tuple(links)

    damping = _num(doc, "damping", "case")
    severity = _num(doc, "severity", "case")

    fl = doc["frequency_limits"]
    limits = FrequencyLimits(
        nadir_min_hz=_num(fl, "nadir_min_hz", "frequency_limits"),
        nadir_max_hz=_num(fl, "nadir_max_hz", "frequency_limits"),
        ss_min_hz=_num(fl, "ss_min_hz", "frequency_limits"),
        ss_max_hz=_num(fl, "ss_max_hz", "frequency_limits"),
        f_nominal=bases.f_nominal,
        big_m_nadir=float("nan"),
        big_m_ss=float("nan"),
    )
    case = NetworkCase(
        bases=bases,
        microgrids=microgrids,
        linking_lines=links,
        damping=damping,
        frequency_limits=limits,
        severity=severity,
        metadata=dict(doc.get("metadata", {})),
    )
    # big-Ms depend on the aggregated dynamics, so they are resolved last
    m_nadir, m_ss = default_frequency_big_m(case)
    limits = replace(
        limits,
        big_m_nadir=_num(fl, "big_m_nadir", "frequency_limits", m_nadir),
        big_m_ss=_num(fl, "big_m_ss", "frequency_limits", m_ss),
    )
    case = replace(case, frequency_limits=limits)
    validate_case(case)
    return case


def _parse_microgrid(d: Mapping, i: int) -> Microgrid:
    where = f"microgrids[{i}]"
    mg_id = str(_req(d, "id", where))
    buses = []
    for j, bd in enumerate(_req(d, "buses", where)):
        w = f"{where}.buses[{j}]"
        buses.append(
            Bus(
                id=str(_req(bd, "id", w)),
                microgrid_id=mg_id,
                v_min=_num(bd, "v_min", w),
                v_max=_num(bd, "v_max", w),
                is_boundary=bool(bd.get("is_boundary", False)),
            )
        )
    lines = []
    for j, ld in enumerate(_req(d, "lines", where)):
        w = f"{where}.lines[{j}]"
        fb, tb = str(_req(ld, "from_bus", w)), str(_req(ld, "to_bus", w))
        lines.append(
            Line(
                id=str(ld.get("id", f"{fb}-{tb}")),
                from_bus=fb,
                to_bus=tb,
                g=_num(ld, "g", w),
                b=_num(ld, "b", w),
                p_loss_max=_num(ld, "p_loss_max", w),
            )
        )
    ders = []
    for j, gd in enumerate(_req(d, "ders", where)):
        w = f"{where}.ders[{j}]"
        ders.append(
            Der(
                id=str(_req(gd, "id", w)),
                bus=str(_req(gd, "bus", w)),
                p_min=_num(gd, "p_min", w),
                p_max=_num(gd, "p_max", w),
                q_min=_num(gd, "q_min", w),
                q_max=_num(gd, "q_max", w),
                ramp_up=_num(gd, "ramp_up", w),
                ramp_down=_num(gd, "ramp_down", w),
                p_initial=_num(gd, "p_initial", w),
            )
        )
    loads = []
    for j, ld in enumerate(_req(d, "loads", where)):
        w = f"{where}.loads[{j}]"
        bus = str(_req(ld, "bus", w))
        loads.append(
            Load(
                id=str(ld.get("id", f"{bus}")),
                bus=bus,
                p_bar=_num(ld, "p_bar", w),
                q_bar=_num(ld, "q_bar", w),
                zip_p=_triple(ld, "zip_p", w),
                zip_q=_triple(ld, "zip_q", w),
                voll=_num(ld, "voll", w),
                load_class=str(ld.get("load_class", "general")),
            )
        )
    dyn = _req(d, "dynamics", where)
    w = f"{where}.dynamics"
    dynamics = VscDynamics(
        H=_num(dyn, "H", w), R=_num(dyn, "R", w), T=_num(dyn, "T", w), T_prime=_num(dyn, "T_prime", w)
    )
    boundary = [b.id for b in buses if b.is_boundary]
    return Microgrid(
        id=mg_id,
        buses=tuple(buses),
        lines=tuple(lines),
        ders=tuple(ders),
        loads=tuple(loads),
        boundary_bus=str(d.get("boundary_bus", boundary[0] if len(boundary) == 1 else "")),
        dynamics=dynamics,
        delta_p0=_num(d, "delta_p0", where),
        delta_q0=_num(d, "delta_q0", where, 0.0),
        linking_v_min=_num(d, "linking_v_min", where, 0.95),
        linking_v_max=_num(d, "linking_v_max", where, 1.05),
    )


def default_frequency_big_m(case: NetworkCase) -> tuple[float, float]:
    """Big-Ms for the frequency cuts, 1.5x the largest attainable term.

    The relaxed side of every cut must absorb ``|limit| + coeff_S * |mismatch|``
    for any subset S; the mismatch is bounded by all exchanges plus all
    demand at its upper ZIP value.  Subsets are enumerated for up to 12
    microgrids, otherwise singletons and the full set are used.
    """
    from .sfr import component_coefficients  # sfr imports this module

    worst_mismatch = sum(abs(m.delta_p0) for m in case.microgrids)
    for m in case.microgrids:
        for ld in m.loads:
            c_max = m.bus(ld.bus).v_max ** 2 if ld.bus in {b.id for b in m.buses} else 1.0
            worst_mismatch += max(ld.p_bar, ld.p_at(c_max))
    ids = case.mg_ids
    if len(ids) <= 12:
        candidates = [frozenset(c) for r in range(1, len(ids) + 1) for c in itertools.combinations(ids, r)]
    else:
        candidates = [frozenset([m]) for m in ids] + [frozenset(ids)]
    alpha_max = beta_max = 0.0
    try:
        for s in candidates:
            a, b = component_coefficients(case, s)
            alpha_max, beta_max = max(alpha_max, a), max(beta_max, b)
    except (ValueError, KeyError):
        return float("nan"), float("nan")
    lim = case.frequency_limits
    nadir = alpha_max * worst_mismatch + max(abs(lim.nadir_min), abs(lim.nadir_max))
    ss = beta_max * worst_mismatch + max(abs(lim.ss_min), abs(lim.ss_max))
    return 1.5 * nadir, 1.5 * ss


def validate_case(case: NetworkCase) -> None:
    """Raise :class:`CaseValidationError` naming the first violated invariant."""
    if case.damping < 0:
        raise CaseValidationError("damping must be nonnegative")
    ids = [m.id for m in case.microgrids]
    if len(set(ids)) != len(ids):
        raise CaseValidationError("microgrid ids must be unique")
    t_primes = set()
    all_bus_ids: set[str] = set()
    for m in case.microgrids:
        _validate_microgrid(m, all_bus_ids)
        t_primes.add(m.dynamics.T_prime)
    if len(t_primes) > 1:
        raise CaseValidationError("T_prime must be identical across all microgrids")

    line_ids = [ln.id for ln in case.linking_lines]
    if len(set(line_ids)) != len(line_ids):
        raise CaseValidationError("linking line ids must be unique")
    for ln in case.linking_lines:
        if ln.from_mg not in ids or ln.to_mg not in ids:
            raise CaseValidationError(f"linking line {ln.id} references an unknown microgrid")
        if ln.from_mg == ln.to_mg:
            raise CaseValidationError(f"linking line {ln.id} endpoints must be distinct microgrids")
        for name in ("p_flow_max", "q_flow_max", "p_loss_max", "big_m_p", "big_m_q"):
            if not getattr(ln, name) > 0:
                raise CaseValidationError(f"linking line {ln.id}: {name} must be positive")
        vmax = max(case.microgrid(ln.from_mg).linking_v_max, case.microgrid(ln.to_mg).linking_v_max)
        need = default_linking_big_m(ln.g, ln.b, vmax)
        if ln.big_m_p < need - 1e-12 or ln.big_m_q < need - 1e-12:
            raise CaseValidationError(
                f"linking line {ln.id}: big-M below the flow-expression bound {need:.6g}"
            )

    lim = case.frequency_limits
    if lim.nadir_min_hz > 0 or lim.ss_min_hz > 0:
        raise CaseValidationError("lower frequency limits must be negative or zero")
    if lim.nadir_max_hz < 0 or lim.ss_max_hz < 0:
        raise CaseValidationError("upper frequency limits must be positive or zero")
    need_nadir, need_ss = default_frequency_big_m(case)
    if not (lim.big_m_nadir >= need_nadir / 1.5 and lim.big_m_ss >= need_ss / 1.5):
        raise CaseValidationError("frequency big-Ms must exceed the largest attainable deviation")

    total = sum(m.delta_p0 for m in case.microgrids)
    if abs(total - case.severity) > SEVERITY_TOL:
        raise CaseValidationError(
            f"sum of microgrid delta_p0 ({total:.9g}) inconsistent with severity ({case.severity:.9g})"
        )


def _validate_microgrid(m: Microgrid, seen_bus_ids: set[str]) -> None:
    where = f"microgrid {m.id}"
    bus_ids = [b.id for b in m.buses]
    if not bus_ids:
        raise CaseValidationError(f"{where}: no buses")
    for b in m.buses:
        if b.id in seen_bus_ids:
            raise CaseValidationError(f"bus id {b.id} is not unique")
        seen_bus_ids.add(b.id)
        if not (0 < b.v_min <= b.v_max):
            raise CaseValidationError(f"{where}: bus {b.id} needs 0 < v_min <= v_max")
    boundary = [b.id for b in m.buses if b.is_boundary]
    if len(boundary) != 1:
        raise CaseValidationError(f"{where}: exactly one boundary bus required, found {len(boundary)}")
    if m.boundary_bus != boundary[0]:
        raise CaseValidationError(f"{where}: boundary_bus does not match the flagged boundary bus")
    if not (0 < m.linking_v_min <= m.linking_v_max):
        raise CaseValidationError(f"{where}: linking voltage bounds invalid")

    bus_set = set(bus_ids)
    lids = [ln.id for ln in m.lines]
    if len(set(lids)) != len(lids):
        raise CaseValidationError(f"{where}: line ids must be unique")
    for ln in m.lines:
        if ln.from_bus not in bus_set or ln.to_bus not in bus_set:
            raise CaseValidationError(f"{where}: line {ln.id} endpoints must be in the same microgrid")
        if ln.from_bus == ln.to_bus:
            raise CaseValidationError(f"{where}: line {ln.id} is a self loop")
        if not ln.p_loss_max > 0:
            raise CaseValidationError(f"{where}: line {ln.id} p_loss_max must be positive")
    if not _is_connected(bus_ids, [(ln.from_bus, ln.to_bus) for ln in m.lines]):
        raise CaseValidationError(f"{where}: internal graph must be connected")

    for g in m.ders:
        if g.bus not in bus_set:
            raise CaseValidationError(f"{where}: DER {g.id} bus unknown")
        if not (g.p_min <= g.p_initial <= g.p_max):
            raise CaseValidationError(f"{where}: DER {g.id} needs p_min <= p_initial <= p_max")
        if g.q_min > g.q_max:
            raise CaseValidationError(f"{where}: DER {g.id} needs q_min <= q_max")
        if g.ramp_up < 0 or g.ramp_down < 0:
            raise CaseValidationError(f"{where}: DER {g.id} ramp limits must be nonnegative")

    load_buses = set()
    for ld in m.loads:
        if ld.bus not in bus_set:
            raise CaseValidationError(f"{where}: load {ld.id} bus unknown")
        if ld.bus in load_buses:
            raise CaseValidationError(f"{where}: more than one load at bus {ld.bus}")
        load_buses.add(ld.bus)
        if ld.p_bar < 0 or ld.q_bar < 0:
            raise CaseValidationError(f"{where}: load {ld.id} demand must be nonnegative")
        for name, trip in (("zip_p", ld.zip_p), ("zip_q", ld.zip_q)):
            if abs(sum(trip) - 1.0) > ZIP_TOL:
                raise CaseValidationError(f"{where}: load {ld.id} zip coefficients must sum to 1 ({name})")
            if min(trip) < 0:
                raise CaseValidationError(f"{where}: load {ld.id} zip coefficients must be nonnegative ({name})")
        if ld.voll < 0:
            raise CaseValidationError(f"{where}: load {ld.id} voll must be nonnegative")

    d = m.dynamics
    for name in ("H", "R", "T", "T_prime"):
        if not getattr(d, name) > 0:
            raise CaseValidationError(f"{where}: dynamics.{name} must be strictly positive")


def _is_connected(nodes: Sequence[str], edges: Iterable[tuple[str, str]]) -> bool:
    comps = _components(nodes, edges)
    return len(comps) == 1


def load_case(path: str | Path, f_nominal: float | None = None) -> NetworkCase:
    """Read, parse and validate a JSON case file."""
    path = Path(path)
    try:
        text = path.read_text()
    except FileNotFoundError:
        raise
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise CaseParseError(f"{path}: malformed JSON ({exc})") from exc
    return parse_case(doc, f_nominal=f_nominal)


def case_to_dict(case: NetworkCase) -> dict:
    lim = case.frequency_limits
    return {
        "metadata": dict(case.metadata),
        "bases": {"s_base": case.bases.s_base, "v_base": case.bases.v_base, "f_nominal": case.bases.f_nominal},
        "damping": case.damping,
        "severity": case.severity,
        "frequency_limits": {
            "nadir_min_hz": lim.nadir_min_hz,
            "nadir_max_hz": lim.nadir_max_hz,
            "ss_min_hz": lim.ss_min_hz,
            "ss_max_hz": lim.ss_max_hz,
            "big_m_nadir": lim.big_m_nadir,
            "big_m_ss": lim.big_m_ss,
        },
        "microgrids": [
            {
                "id": m.id,
                "boundary_bus": m.boundary_bus,
                "delta_p0": m.delta_p0,
                "delta_q0": m.delta_q0,
                "linking_v_min": m.linking_v_min,
                "linking_v_max": m.linking_v_max,
                "dynamics": {"H": m.dynamics.H, "R": m.dynamics.R, "T": m.dynamics.T, "T_prime": m.dynamics.T_prime},
                "buses": [
                    {"id": b.id, "v_min": b.v_min, "v_max": b.v_max, "is_boundary": b.is_boundary} for b in m.buses
                ],
                "lines": [
                    {"id": ln.id, "from_bus": ln.from_bus, "to_bus": ln.to_bus, "g": ln.g, "b": ln.b,
                     "p_loss_max": ln.p_loss_max}
                    for ln in m.lines
                ],
                "ders": [
                    {"id": g.id, "bus": g.bus, "p_min": g.p_min, "p_max": g.p_max, "q_min": g.q_min,
                     "q_max": g.q_max, "ramp_up": g.ramp_up, "ramp_down": g.ramp_down, "p_initial": g.p_initial}
                    for g in m.ders
                ],
                "loads": [
                    {"id": ld.id, "bus": ld.bus, "p_bar": ld.p_bar, "q_bar": ld.q_bar, "zip_p": list(ld.zip_p),
                     "zip_q": list(ld.zip_q), "voll": ld.voll, "load_class": ld.load_class}
                    for ld in m.loads
                ],
            }
            for m in case.microgrids
        ],
        "linking_lines": [
            {"id": ln.id, "from_mg": ln.from_mg, "to_mg": ln.to_mg, "g": ln.g, "b": ln.b,
             "p_flow_max": ln.p_flow_max, "q_flow_max": ln.q_flow_max, "p_loss_max": ln.p_loss_max,
             "big_m_p": ln.big_m_p, "big_m_q": ln.big_m_q}
            for ln in case.linking_lines
        ],
    }


def dump_case(case: NetworkCase) -> str:
    return json.dumps(case_to_dict(case), indent=2) + "\n"


def bundled_case_path(name: str = "case39") -> Path:
    return Path(__file__).parent / "data" / f"{name}.json"


def with_severity(case: NetworkCase, severity: float) -> NetworkCase:
    """Rescale the pre-islanding import to ``severity`` (pu).

    Each microgrid exchange is scaled proportionally and the microgrid's loads
    absorb the change so the pre-islanding generation is untouched.
    """
    if case.severity == 0:
        if severity == 0:
            return case
        raise CaseValidationError("cannot rescale a zero-severity case")
    k = severity / case.severity
    mgs = []
    for m in case.microgrids:
        new_dp = m.delta_p0 * k
        total = m.total_load
        if total <= 0:
            if abs(new_dp - m.delta_p0) > 0:
                raise CaseValidationError(f"microgrid {m.id} has no load to absorb the severity change")
            mgs.append(m)
            continue
        scale = 1.0 + (new_dp - m.delta_p0) / total
        if scale < 0:
            raise CaseValidationError(f"severity {severity} makes microgrid {m.id} load negative")
        loads = tuple(replace(ld, p_bar=ld.p_bar * scale, q_bar=ld.q_bar * scale) for ld in m.loads)
        mgs.append(replace(m, loads=loads, delta_p0=new_dp, delta_q0=m.delta_q0 * k))
    out = replace(case, microgrids=tuple(mgs), severity=float(sum(m.delta_p0 for m in mgs)))
    return _refresh_big_m(out)


def with_f_nominal(case: NetworkCase, f_nominal: float) -> NetworkCase:
    bases = replace(case.bases, f_nominal=float(f_nominal))
    lim = replace(case.frequency_limits, f_nominal=float(f_nominal))
    return _refresh_big_m(replace(case, bases=bases, frequency_limits=lim))


def with_frequency_limits(
    case: NetworkCase, nadir_hz: float | None = None, steady_state_hz: float | None = None
) -> NetworkCase:
    """Replace the nadir and/or steady-state bands with symmetric ones (Hz)."""
    lim = case.frequency_limits
    if nadir_hz is not None:
        lim = replace(lim, nadir_min_hz=-abs(nadir_hz), nadir_max_hz=abs(nadir_hz))
    if steady_state_hz is not None:
        lim = replace(lim, ss_min_hz=-abs(steady_state_hz), ss_max_hz=abs(steady_state_hz))
    return _refresh_big_m(replace(case, frequency_limits=lim))


def _refresh_big_m(case: NetworkCase) -> NetworkCase:
    nadir, ss = default_frequency_big_m(case)
    lim = case.frequency_limits
    lim = replace(lim, big_m_nadir=max(lim.big_m_nadir, nadir), big_m_ss=max(lim.big_m_ss, ss))
    out = replace(case, frequency_limits=lim)
    validate_case(out)
    return out


# ---------------------------------------------------------------------------
# graph utilities over the linking grid (nodes are microgrid ids)


def _components(nodes: Sequence[str], edges: Iterable[tuple[str, str]]) -> list[frozenset]:
    adj: dict[str, list[str]] = {n: [] for n in nodes}
    for a, b in edges:
        adj[a].append(b)
        adj[b].append(a)
    seen: set[str] = set()
    out = []
    for n in nodes:
        if n in seen:
            continue
        comp = {n}
        queue = deque([n])
        seen.add(n)
        while queue:
            u = queue.popleft()
            for v in adj[u]:
                if v not in seen:
                    seen.add(v)
                    comp.add(v)
                    queue.append(v)
        out.append(frozenset(comp))
    return out


def _check_cfg(case: NetworkCase, cfg: SwitchConfig) -> None:
    known = {ln.id for ln in case.linking_lines}
    unknown = set(cfg.on_edges) - known
    if unknown:
        raise ValueError(f"switch config references unknown linking lines: {sorted(unknown)}")


def _check_nodes(case: NetworkCase, nodes: Iterable[str]) -> frozenset:
    s = frozenset(nodes)
    if not s:
        raise ValueError("node set must be nonempty")
    unknown = s - set(case.mg_ids)
    if unknown:
        raise ValueError(f"unknown microgrid ids: {sorted(unknown)}")
    return s


def connected_components(case: NetworkCase, cfg: SwitchConfig) -> list[frozenset]:
    """Connected components of the linking graph restricted to ``cfg.on_edges``.

    Components are returned in order of their first microgrid in the case.
    """
    _check_cfg(case, cfg)
    edges = [(ln.from_mg, ln.to_mg) for ln in case.linking_lines if ln.id in cfg.on_edges]
    return _components(case.mg_ids, edges)


def internal_edges(case: NetworkCase, nodes: Iterable[str]) -> frozenset:
    """L(S): linking lines with both ends in S."""
    s = _check_nodes(case, nodes)
    return frozenset(ln.id for ln in case.linking_lines if ln.from_mg in s and ln.to_mg in s)


def cutset(case: NetworkCase, nodes: Iterable[str]) -> frozenset:
    """delta(S): linking lines with exactly one end in S."""
    s = _check_nodes(case, nodes)
    return frozenset(ln.id for ln in case.linking_lines if (ln.from_mg in s) != (ln.to_mg in s))


def spanning_tree_edges(case: NetworkCase, cfg: SwitchConfig, nodes: Iterable[str]) -> frozenset | None:
    """Edges of a breadth-first spanning tree of S using on-edges of L(S), or None.

    The tree is deterministic: neighbours are explored in case order.
    """
    s = _check_nodes(case, nodes)
    _check_cfg(case, cfg)
    lines = [ln for ln in case.linking_lines if ln.id in cfg.on_edges and ln.from_mg in s and ln.to_mg in s]
    root = next(m for m in case.mg_ids if m in s)
    seen = {root}
    tree = set()
    queue = deque([root])
    while queue:
        u = queue.popleft()
        for ln in lines:
            if u not in (ln.from_mg, ln.to_mg):
                continue
            v = ln.to_mg if ln.from_mg == u else ln.from_mg
            if v not in seen:
                seen.add(v)
                tree.add(ln.id)
                queue.append(v)
    return frozenset(tree) if seen == s else None


def spanning_tree_feasible(case: NetworkCase, cfg: SwitchConfig, nodes: Iterable[str]) -> bool:
    """True iff the closed edges inside S contain a spanning tree of S."""
    return spanning_tree_edges(case, cfg, nodes) is not None


def spanning_tree_feasible_enumerated(case: NetworkCase, cfg: SwitchConfig, nodes: Iterable[str]) -> bool:
    """Exhaustive check of the integer spanning-tree system over u in {0,1}^L(S).

    Looks for u <= Z on L(S) with sum(u) = |S| - 1 and at least one selected
    edge crossing every proper nonempty subset of S.  Exponential; for tests.
    """
    s = _check_nodes(case, nodes)
    _check_cfg(case, cfg)
    order = [m for m in case.mg_ids if m in s]
    lines = [ln for ln in case.linking_lines if ln.from_mg in s and ln.to_mg in s]
    subsets = [
        frozenset(c) for r in range(1, len(order)) for c in itertools.combinations(order, r)
    ]
    for u in itertools.product((0, 1), repeat=len(lines)):
        if any(ui and ln.id not in cfg.on_edges for ui, ln in zip(u, lines)):
            continue
        if sum(u) != len(order) - 1:
            continue
        chosen = [ln for ui, ln in zip(u, lines) if ui]
        if all(any((ln.from_mg in sub) != (ln.to_mg in sub) for ln in chosen) for sub in subsets):
            return True
    return False


def connected_subsets(case: NetworkCase) -> list[frozenset]:
    """All nonempty microgrid subsets that induce a connected linking subgraph."""
    ids = case.mg_ids
    all_on = SwitchConfig.all_on(case)
    out = []
    for r in range(1, len(ids) + 1):
        for c in itertools.combinations(ids, r):
            if spanning_tree_feasible(case, all_on, c):
                out.append(frozenset(c))
    return out
