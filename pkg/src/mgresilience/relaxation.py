"""Mixed-integer SOCP relaxation of the post-islanding operation problem.

The model is held in a small solver-agnostic container: a registry of
bounded variables, linear rows, rotated second-order cones
``||v||^2 <= a * b`` and a linear objective.  Frequency cuts are appended to
a separate pool that only grows.

Variable naming (bus / line / load / DER ids come from the case):

=================  ==================================================
``C[i]``           squared voltage of bus i
``C[i,j]``         V_i V_j cos(theta_i - theta_j) for line (i, j)
``S[i,j]``         V_i V_j sin(theta_i - theta_j)
``fP[i,j]``        active flow leaving i towards j (``fQ`` reactive)
``pG[g]``          DER active output (``qG`` reactive)
``x[d]``           1 if load d is served
``pD[d]``          voltage-dependent demand (``qD`` reactive)
``rho[d]``         x * pD (``sigma`` for x * qD)
``dP[m]``          post-islanding import of microgrid m (``dQ``)
``Ct[m]``          squared voltage of the linking bus of m
``Ct[m,k]``        linking-side ``C`` for line (m, k); ``St`` likewise
``ftP[l:m>k]``     active flow on linking line l from m to k (``ftQ``)
``Z[l]``           1 if linking line l is closed
=================  ==================================================
"""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np

from .case import Load, NetworkCase, SwitchConfig, connected_components, cutset, internal_edges
from .sfr import component_coefficients

__all__ = [
    "VarRef",
    "Affine",
    "LinearConstraint",
    "ConeConstraint",
    "ModelInstance",
    "Solution",
    "CUT_KINDS",
    "build_base_model",
    "zip_bounds",
    "big_m_load",
    "frequency_cut",
    "extract_solution",
    "census",
    "census_formula",
    "write_cbf",
]

BINARY = "binary"
CONTINUOUS = "continuous"
CUT_KINDS = ("nadir_min", "nadir_max", "ss_min", "ss_max")


@dataclass(frozen=True)
class VarRef:
    index: int
    kind: str
    lower: float
    upper: float
    name: str


@dataclass(frozen=True)
class Affine:
    terms: tuple[tuple[int, float], ...]
    const: float = 0.0

    def value(self, x: np.ndarray) -> float:
        return self.const + sum(c * x[i] for i, c in self.terms)


@dataclass(frozen=True)
class LinearConstraint:
    terms: tuple[tuple[int, float], ...]
    sense: str  # "<=", "==", ">="
    rhs: float
    tag: str = ""

    def __post_init__(self):
        if self.sense not in ("<=", "==", ">="):
            raise ValueError(f"bad sense {self.sense!r}")
        if not all(math.isfinite(c) for _, c in self.terms) or not math.isfinite(self.rhs):
            raise ValueError(f"non-finite coefficient in {self.tag or 'constraint'}")

    def lhs(self, x: np.ndarray) -> float:
        return sum(c * x[i] for i, c in self.terms)

    def violation(self, x: np.ndarray) -> float:
        v = self.lhs(x) - self.rhs
        if self.sense == "<=":
            return max(0.0, v)
        if self.sense == ">=":
            return max(0.0, -v)
        return abs(v)


@dataclass(frozen=True)
class ConeConstraint:
    """``sum(v_i^2) <= a * b`` with ``a, b >= 0``."""

    vec: tuple[Affine, ...]
    a: Affine
    b: Affine
    tag: str = ""

    def violation(self, x: np.ndarray) -> float:
        a, b = self.a.value(x), self.b.value(x)
        sq = sum(v.value(x) ** 2 for v in self.vec)
        return max(0.0, sq - a * b, -a, -b)


def _merge(terms: Iterable[tuple[int, float]]) -> tuple[tuple[int, float], ...]:
    acc: dict[int, float] = {}
    for i, c in terms:
        acc[i] = acc.get(i, 0.0) + c
    return tuple((i, c) for i, c in sorted(acc.items()) if c != 0.0)


@dataclass
class ModelInstance:
    variables: list[VarRef] = field(default_factory=list)
    constraints: list[LinearConstraint] = field(default_factory=list)
    cones: list[ConeConstraint] = field(default_factory=list)
    objective: dict[int, float] = field(default_factory=dict)
    objective_constant: float = 0.0
    cuts: list[LinearConstraint] = field(default_factory=list)
    cut_keys: list = field(default_factory=list)
    _names: dict[str, int] = field(default_factory=dict, repr=False)

    # -- construction
    def add_var(self, name: str, lower: float, upper: float, kind: str = CONTINUOUS) -> int:
        if name in self._names:
            raise ValueError(f"duplicate variable {name}")
        if kind == BINARY:
            lower, upper = max(0.0, lower), min(1.0, upper)
        if not lower <= upper:
            raise ValueError(f"variable {name}: lower bound above upper bound")
        idx = len(self.variables)
        self.variables.append(VarRef(idx, kind, float(lower), float(upper), name))
        self._names[name] = idx
        return idx

    def add_linear(self, terms, sense: str, rhs: float, tag: str) -> None:
        self.constraints.append(LinearConstraint(_merge(terms), sense, float(rhs), tag))

    def add_cone(self, vec: Sequence[Affine], a: Affine, b: Affine, tag: str) -> None:
        self.cones.append(ConeConstraint(tuple(vec), a, b, tag))

    def add_cut(self, key, con: LinearConstraint) -> bool:
        """Append ``con`` to the cut pool unless ``key`` is already present."""
        if key in self.cut_keys:
            return False
        self.cut_keys.append(key)
        self.cuts.append(con)
        return True

    # -- access
    def idx(self, name: str) -> int:
        return self._names[name]

    def var(self, name: str) -> VarRef:
        return self.variables[self._names[name]]

    def has(self, name: str) -> bool:
        return name in self._names

    @property
    def n(self) -> int:
        return len(self.variables)

    def binaries(self) -> list[int]:
        return [v.index for v in self.variables if v.kind == BINARY]

    def all_linear(self) -> list[LinearConstraint]:
        return self.constraints + self.cuts

    def lower(self) -> np.ndarray:
        return np.array([v.lower for v in self.variables])

    def upper(self) -> np.ndarray:
        return np.array([v.upper for v in self.variables])

    def objective_value(self, x: np.ndarray) -> float:
        return self.objective_constant + sum(c * x[i] for i, c in self.objective.items())

    def max_violation(self, x: np.ndarray, tags: Iterable[str] | None = None) -> float:
        keep = None if tags is None else set(tags)
        worst = 0.0
        for con in self.all_linear():
            if keep is None or con.tag in keep:
                worst = max(worst, con.violation(x))
        for cone in self.cones:
            if keep is None or cone.tag in keep:
                worst = max(worst, cone.violation(x))
        if keep is None:
            lo, hi = self.lower(), self.upper()
            worst = max(worst, float(np.max(np.maximum(lo - x, x - hi), initial=0.0)))
        return worst


# ---------------------------------------------------------------------------
# ZIP helpers


def zip_bounds(load: Load, c_min: float, c_max: float) -> tuple[float, float, float, float]:
    """Demand at the two ends of the squared-voltage box, ordered per component."""
    if not 0 < c_min <= c_max:
        raise ValueError("squared-voltage box must satisfy 0 < c_min <= c_max")
    p0, p1 = load.p_at(c_min), load.p_at(c_max)
    q0, q1 = load.q_at(c_min), load.q_at(c_max)
    return min(p0, p1), max(p0, p1), min(q0, q1), max(q0, q1)


def big_m_load(load: Load, c_max: float) -> tuple[float, float]:
    """Big-Ms of the rho/sigma block: nominal demand, raised to the ZIP value at
    the top of the voltage box when that is larger (over-voltage draws more)."""
    return max(load.p_bar, load.p_at(c_max)), max(load.q_bar, load.q_at(c_max))


def _zip_rows(model: ModelInstance, kind: str, p_bar: float, zip_coef, i_c: int, i_p: int,
              lo: float, hi: float, c_min: float, c_max: float) -> None:
    ki, kc, kp = zip_coef
    # p <= p_bar (ki C + kc sqrt(C) + kp): as a cone (p/p_bar - ki C - kp)^2 <= kc^2 C * 1
    if p_bar * kc > 0:
        lhs = Affine(((i_p, 1.0 / p_bar), (i_c, -ki)), -kp)
        model.add_cone([lhs], Affine(((i_c, kc * kc),)), Affine((), 1.0), tag=f"zip_cone_{kind}")
    else:
        model.add_linear([(i_p, 1.0), (i_c, -p_bar * ki)], "<=", p_bar * kp, tag=f"zip_lin_{kind}")
    # chord through the box end points, below the concave curve
    slope = (hi - lo) / (c_max - c_min) if c_max > c_min else 0.0
    model.add_linear([(i_p, 1.0), (i_c, -slope)], ">=", lo - slope * c_min, tag=f"zip_hyperplane_{kind}")


def _big_m_rows(model: ModelInstance, kind: str, i_x: int, i_p: int, i_r: int, lo: float, hi: float) -> None:
    """rho = x * p for binary x and p in [lo, hi], as four switched rows.

    Each row carries its own big-M (lo or hi), which makes the block the convex
    envelope of the product; at x in {0, 1} it is exact.
    """
    # rho <= p - lo (1 - x);  rho >= p - hi (1 - x);  rho <= hi x;  rho >= lo x
    model.add_linear([(i_r, 1.0), (i_p, -1.0), (i_x, -lo)], "<=", -lo, tag=f"bigm_{kind}")
    model.add_linear([(i_r, 1.0), (i_p, -1.0), (i_x, -hi)], ">=", -hi, tag=f"bigm_{kind}")
    model.add_linear([(i_r, 1.0), (i_x, -hi)], "<=", 0.0, tag=f"bigm_{kind}")
    model.add_linear([(i_r, 1.0), (i_x, -lo)], ">=", 0.0, tag=f"bigm_{kind}")


# ---------------------------------------------------------------------------
# base model


def _link_flow_name(kind: str, line_id: str, src: str, dst: str) -> str:
    return f"{kind}[{line_id}:{src}>{dst}]"


def build_base_model(case: NetworkCase) -> ModelInstance:
    """Assemble the relaxation (without frequency cuts) for ``case``."""
    model = ModelInstance()
    ix = model.idx

    for m in case.microgrids:
        for bus in m.buses:
            model.add_var(f"C[{bus.id}]", bus.v_min**2, bus.v_max**2)
        for ln in m.lines:
            i, j = ln.from_bus, ln.to_bus
            vv = m.bus(i).v_max * m.bus(j).v_max
            for a, b in ((i, j), (j, i)):
                model.add_var(f"C[{a},{b}]", -vv, vv)
                model.add_var(f"S[{a},{b}]", -vv, vv)
                model.add_var(f"fP[{a},{b}]", -math.inf, math.inf)
                model.add_var(f"fQ[{a},{b}]", -math.inf, math.inf)
        for g in m.ders:
            model.add_var(f"pG[{g.id}]", g.p_min, g.p_max)
            model.add_var(f"qG[{g.id}]", g.q_min, g.q_max)
        for ld in m.loads:
            bus = m.bus(ld.bus)
            c_min, c_max = bus.v_min**2, bus.v_max**2
            p_lo, p_hi, q_lo, q_hi = zip_bounds(ld, c_min, c_max)
            mp, mq = big_m_load(ld, c_max)
            model.add_var(f"x[{ld.id}]", 0.0, 1.0, BINARY)
            model.add_var(f"pD[{ld.id}]", p_lo, p_hi)
            model.add_var(f"qD[{ld.id}]", q_lo, q_hi)
            model.add_var(f"rho[{ld.id}]", 0.0, mp)
            model.add_var(f"sigma[{ld.id}]", 0.0, mq)
        cap_p = sum(ln.p_flow_max for ln in case.linking_lines if m.id in (ln.from_mg, ln.to_mg))
        cap_q = sum(ln.q_flow_max for ln in case.linking_lines if m.id in (ln.from_mg, ln.to_mg))
        model.add_var(f"dP[{m.id}]", -cap_p, cap_p)
        model.add_var(f"dQ[{m.id}]", -cap_q, cap_q)
        model.add_var(f"Ct[{m.id}]", m.linking_v_min**2, m.linking_v_max**2)

    for ln in case.linking_lines:
        mg_a, mg_b = case.microgrid(ln.from_mg), case.microgrid(ln.to_mg)
        vv = mg_a.linking_v_max * mg_b.linking_v_max
        model.add_var(f"Z[{ln.id}]", 0.0, 1.0, BINARY)
        for a, b in ((ln.from_mg, ln.to_mg), (ln.to_mg, ln.from_mg)):
            model.add_var(f"Ct[{ln.id}:{a},{b}]", -vv, vv)
            model.add_var(f"St[{ln.id}:{a},{b}]", -vv, vv)
            model.add_var(_link_flow_name("ftP", ln.id, a, b), -math.inf, math.inf)
            model.add_var(_link_flow_name("ftQ", ln.id, a, b), -math.inf, math.inf)

    # objective: sum voll * p_bar * (1 - x)
    for _, ld in case.all_loads():
        w = ld.voll * ld.p_bar
        model.objective_constant += w
        if w != 0.0:
            model.objective[ix(f"x[{ld.id}]")] = model.objective.get(ix(f"x[{ld.id}]"), 0.0) - w

    for m in case.microgrids:
        _microgrid_rows(model, m)

    for m in case.microgrids:
        out_p, out_q = [], []
        for ln in case.linking_lines:
            if m.id not in (ln.from_mg, ln.to_mg):
                continue
            other = ln.to_mg if ln.from_mg == m.id else ln.from_mg
            out_p.append((ix(_link_flow_name("ftP", ln.id, m.id, other)), 1.0))
            out_q.append((ix(_link_flow_name("ftQ", ln.id, m.id, other)), 1.0))
        model.add_linear([(ix(f"dP[{m.id}]"), 1.0)] + out_p, "==", 0.0, tag="link_balance_p")
        model.add_linear([(ix(f"dQ[{m.id}]"), 1.0)] + out_q, "==", 0.0, tag="link_balance_q")

    for ln in case.linking_lines:
        _linking_rows(model, ln)

    return model


def _microgrid_rows(model: ModelInstance, m) -> None:
    ix = model.idx
    # bus balances: generation - served load (+ import at the boundary) = outgoing flows
    for bus in m.buses:
        for kind, gen, served, imp in (("p", "pG", "rho", "dP"), ("q", "qG", "sigma", "dQ")):
            terms = [(ix(f"{gen}[{g.id}]"), 1.0) for g in m.ders if g.bus == bus.id]
            terms += [(ix(f"{served}[{ld.id}]"), -1.0) for ld in m.loads if ld.bus == bus.id]
            if bus.id == m.boundary_bus:
                terms.append((ix(f"{imp}[{m.id}]"), 1.0))
            flow = "fP" if kind == "p" else "fQ"
            for ln in m.lines:
                if bus.id == ln.from_bus:
                    terms.append((ix(f"{flow}[{ln.from_bus},{ln.to_bus}]"), -1.0))
                elif bus.id == ln.to_bus:
                    terms.append((ix(f"{flow}[{ln.to_bus},{ln.from_bus}]"), -1.0))
            model.add_linear(terms, "==", 0.0, tag=f"balance_{kind}")

    for ln in m.lines:
        i, j = ln.from_bus, ln.to_bus
        for a, b in ((i, j), (j, i)):
            c_aa, c_ab, s_ab = ix(f"C[{a}]"), ix(f"C[{a},{b}]"), ix(f"S[{a},{b}]")
            # fP = G (C_aa - C_ab) - B S_ab ; fQ = -B (C_aa - C_ab) - G S_ab
            model.add_linear(
                [(ix(f"fP[{a},{b}]"), 1.0), (c_aa, -ln.g), (c_ab, ln.g), (s_ab, ln.b)], "==", 0.0, tag="flow_def"
            )
            model.add_linear(
                [(ix(f"fQ[{a},{b}]"), 1.0), (c_aa, ln.b), (c_ab, -ln.b), (s_ab, ln.g)], "==", 0.0, tag="flow_def"
            )
        model.add_linear([(ix(f"C[{i},{j}]"), 1.0), (ix(f"C[{j},{i}]"), -1.0)], "==", 0.0, tag="symmetry")
        model.add_linear([(ix(f"S[{i},{j}]"), 1.0), (ix(f"S[{j},{i}]"), 1.0)], "==", 0.0, tag="symmetry")
        model.add_linear(
            [(ix(f"fP[{i},{j}]"), 1.0), (ix(f"fP[{j},{i}]"), 1.0)], "<=", ln.p_loss_max, tag="loss_cap"
        )
        _pair_cone(model, ix(f"C[{i}]"), ix(f"C[{j}]"), ix(f"C[{i},{j}]"), ix(f"S[{i},{j}]"), "line_cone")

    for g in m.ders:
        i_p = ix(f"pG[{g.id}]")
        model.add_linear([(i_p, 1.0)], "<=", g.p_initial + g.ramp_up, tag="ramp")
        model.add_linear([(i_p, 1.0)], ">=", g.p_initial - g.ramp_down, tag="ramp")

    for ld in m.loads:
        bus = m.bus(ld.bus)
        c_min, c_max = bus.v_min**2, bus.v_max**2
        p_lo, p_hi, q_lo, q_hi = zip_bounds(ld, c_min, c_max)
        i_c, i_x = ix(f"C[{ld.bus}]"), ix(f"x[{ld.id}]")
        i_p, i_q = ix(f"pD[{ld.id}]"), ix(f"qD[{ld.id}]")
        _zip_rows(model, "p", ld.p_bar, ld.zip_p, i_c, i_p, p_lo, p_hi, c_min, c_max)
        _zip_rows(model, "q", ld.q_bar, ld.zip_q, i_c, i_q, q_lo, q_hi, c_min, c_max)
        _big_m_rows(model, "p", i_x, i_p, ix(f"rho[{ld.id}]"), p_lo, p_hi)
        _big_m_rows(model, "q", i_x, i_q, ix(f"sigma[{ld.id}]"), q_lo, q_hi)


def _linking_rows(model: ModelInstance, ln) -> None:
    ix = model.idx
    z = ix(f"Z[{ln.id}]")
    m, k = ln.from_mg, ln.to_mg
    for a, b in ((m, k), (k, m)):
        c_aa, c_ab, s_ab = ix(f"Ct[{a}]"), ix(f"Ct[{ln.id}:{a},{b}]"), ix(f"St[{ln.id}:{a},{b}]")
        fp, fq = ix(_link_flow_name("ftP", ln.id, a, b)), ix(_link_flow_name("ftQ", ln.id, a, b))
        expr_p = [(c_aa, ln.g), (c_ab, -ln.g), (s_ab, -ln.b)]
        expr_q = [(c_aa, -ln.b), (c_ab, ln.b), (s_ab, -ln.g)]
        for expr, f, big in ((expr_p, fp, ln.big_m_p), (expr_q, fq, ln.big_m_q)):
            # |expr - f| <= M (1 - Z)
            model.add_linear(expr + [(f, -1.0), (z, -big)], ">=", -big, tag="link_flow_bigm")
            model.add_linear(expr + [(f, -1.0), (z, big)], "<=", big, tag="link_flow_bigm")
        for f, cap in ((fp, ln.p_flow_max), (fq, ln.q_flow_max)):
            model.add_linear([(f, 1.0), (z, -cap)], "<=", 0.0, tag="link_flow_limit")
            model.add_linear([(f, 1.0), (z, cap)], ">=", 0.0, tag="link_flow_limit")
    ab, ba = f"{ln.id}:{m},{k}", f"{ln.id}:{k},{m}"
    model.add_linear([(ix(f"Ct[{ab}]"), 1.0), (ix(f"Ct[{ba}]"), -1.0)], "==", 0.0, tag="link_symmetry")
    model.add_linear([(ix(f"St[{ab}]"), 1.0), (ix(f"St[{ba}]"), 1.0)], "==", 0.0, tag="link_symmetry")
    model.add_linear(
        [(ix(_link_flow_name("ftP", ln.id, m, k)), 1.0), (ix(_link_flow_name("ftP", ln.id, k, m)), 1.0)],
        "<=",
        ln.p_loss_max,
        tag="link_loss_cap",
    )
    # valid at every integer point (cone when closed, zero flow when open); without it a
    # fractional Z lets the linking grid create power through negative losses
    model.add_linear(
        [(ix(_link_flow_name("ftP", ln.id, m, k)), 1.0), (ix(_link_flow_name("ftP", ln.id, k, m)), 1.0)],
        ">=",
        0.0,
        tag="link_loss_floor",
    )
    _pair_cone(model, ix(f"Ct[{m}]"), ix(f"Ct[{k}]"), ix(f"Ct[{ab}]"), ix(f"St[{ab}]"), "link_cone")


def _pair_cone(model: ModelInstance, ci: int, cj: int, cij: int, sij: int, tag: str) -> None:
    """C_ij^2 + S_ij^2 <= C_i C_j, written in difference form.

    With u = C_i + C_j - 2 C_ij the same set reads
    (C_i - C_j)^2 + (2 S_ij)^2 + u^2 <= u * 2 (C_i + C_j).  Both sides are of the
    order of the line loss, which keeps low-impedance lines well conditioned.
    """
    u = Affine(((ci, 1.0), (cj, 1.0), (cij, -2.0)))
    model.add_cone(
        [Affine(((ci, 1.0), (cj, -1.0))), Affine(((sij, 2.0),)), u],
        u,
        Affine(((ci, 2.0), (cj, 2.0))),
        tag=tag,
    )


# ---------------------------------------------------------------------------
# frequency cuts


def frequency_cut(
    case: NetworkCase,
    model: ModelInstance,
    nodes: Iterable[str],
    kind: str,
    internal: Iterable[str] | None = None,
) -> LinearConstraint:
    """Linear frequency-security row for the component ``nodes``.

    The row reads ``coef * mismatch_S + M * sum_T (1 - Z) + M * sum_cut Z >= lower``
    (mirrored for the upper limits), where ``mismatch_S`` sums
    ``-delta_p0 + sum(pD - rho)`` over S.  ``T`` defaults to all linking lines
    inside S; passing a spanning tree of closed lines gives a stronger row that
    is still valid, since it is only enforced when S is exactly a component.
    """
    if kind not in CUT_KINDS:
        raise ValueError(f"unknown cut kind {kind!r}")
    s = frozenset(nodes)
    inner = internal_edges(case, s) if internal is None else frozenset(internal)
    if not inner <= internal_edges(case, s):
        raise ValueError("relaxation edges must lie inside the component")
    cut = cutset(case, s)
    alpha, beta = component_coefficients(case, s)
    lim = case.frequency_limits
    coef, big, bound = {
        "nadir_min": (alpha, lim.big_m_nadir, lim.nadir_min),
        "nadir_max": (alpha, lim.big_m_nadir, lim.nadir_max),
        "ss_min": (beta, lim.big_m_ss, lim.ss_min),
        "ss_max": (beta, lim.big_m_ss, lim.ss_max),
    }[kind]
    ix = model.idx
    terms: list[tuple[int, float]] = []
    dp0 = 0.0
    for m in case.microgrids:
        if m.id not in s:
            continue
        dp0 += m.delta_p0
        for ld in m.loads:
            terms.append((ix(f"pD[{ld.id}]"), coef))
            terms.append((ix(f"rho[{ld.id}]"), -coef))
    relax_inner = [ix(f"Z[{e}]") for e in sorted(inner)]
    relax_cut = [ix(f"Z[{e}]") for e in sorted(cut)]
    if kind.endswith("_min"):
        terms += [(i, -big) for i in relax_inner] + [(i, big) for i in relax_cut]
        rhs = bound + coef * dp0 - big * len(relax_inner)
        return LinearConstraint(_merge(terms), ">=", rhs, tag=f"cut_{kind}")
    terms += [(i, big) for i in relax_inner] + [(i, -big) for i in relax_cut]
    rhs = bound + coef * dp0 + big * len(relax_inner)
    return LinearConstraint(_merge(terms), "<=", rhs, tag=f"cut_{kind}")


# ---------------------------------------------------------------------------
# solutions


@dataclass(frozen=True)
class Solution:
    status: str
    objective: float
    values: Mapping[str, float]
    served: Mapping[str, int]  # load id -> x
    closed: tuple[str, ...]  # linking lines with Z = 1, sorted
    curtailment_pu: float  # sum(pD - rho)
    curtailment_by_mg: Mapping[str, float]
    nominal_shed_pu: float  # sum(p_bar * (1 - x))
    components: tuple[frozenset, ...]

    def switch_config(self) -> SwitchConfig:
        return SwitchConfig(self.closed)

    def mismatch(self, case: NetworkCase, nodes: Iterable[str]) -> float:
        s = set(nodes)
        return sum(-m.delta_p0 + self.curtailment_by_mg[m.id] for m in case.microgrids if m.id in s)

    def shed_loads(self) -> list[str]:
        return sorted(k for k, v in self.served.items() if v == 0)


def extract_solution(
    case: NetworkCase, model: ModelInstance, raw: Sequence[float], status: str = "optimal",
    objective: float | None = None,
) -> Solution:
    x = np.asarray(raw, dtype=float)
    if x.shape != (model.n,) or not np.all(np.isfinite(x)):
        raise ValueError("raw values must be a finite vector covering every variable")
    values = {v.name: float(x[v.index]) for v in model.variables}
    served = {}
    by_mg = {}
    nominal = 0.0
    for m in case.microgrids:
        tot = 0.0
        for ld in m.loads:
            xi = int(round(values[f"x[{ld.id}]"]))
            served[ld.id] = xi
            tot += values[f"pD[{ld.id}]"] - values[f"rho[{ld.id}]"]
            nominal += ld.p_bar * (1 - xi)
        by_mg[m.id] = tot
    closed = tuple(sorted(ln.id for ln in case.linking_lines if round(values[f"Z[{ln.id}]"]) == 1))
    comps = tuple(connected_components(case, SwitchConfig(closed)))
    return Solution(
        status=status,
        objective=model.objective_value(x) if objective is None else float(objective),
        values=values,
        served=served,
        closed=closed,
        curtailment_pu=sum(by_mg.values()),
        curtailment_by_mg=by_mg,
        nominal_shed_pu=nominal,
        components=comps,
    )


# ---------------------------------------------------------------------------
# census and dump


def census(model: ModelInstance) -> dict[str, int]:
    """Counts of variables, binaries, linear rows by family and cones by family."""
    out: dict[str, int] = {
        "variables": model.n,
        "binaries": len(model.binaries()),
        "linear": len(model.constraints),
        "cones": len(model.cones),
    }
    for tag, n in sorted(Counter(c.tag for c in model.constraints).items()):
        out[f"linear.{tag}"] = n
    for tag, n in sorted(Counter(c.tag for c in model.cones).items()):
        out[f"cones.{tag}"] = n
    return out


def census_formula(case: NetworkCase) -> dict[str, int]:
    """Closed-form counts from the case dimensions (see docs/census.md)."""
    nb = sum(len(m.buses) for m in case.microgrids)
    nl = sum(len(m.lines) for m in case.microgrids)
    ng = sum(len(m.ders) for m in case.microgrids)
    nd = sum(len(m.loads) for m in case.microgrids)
    nm = len(case.microgrids)
    nt = len(case.linking_lines)
    dpc = sum(1 for _, ld in case.all_loads() if ld.p_bar * ld.zip_p[1] > 0)
    dqc = sum(1 for _, ld in case.all_loads() if ld.q_bar * ld.zip_q[1] > 0)
    linear = (
        2 * nb + 4 * nl + 2 * nl + nl  # balances, flow definitions, symmetry, loss caps
        + 2 * nm + 2 * nt + 8 * nt + 8 * nt + 2 * nt  # linking balances, symmetry, big-M flows, limits, loss cap and floor
        + 2 * ng  # ramps
        + (nd - dpc) + (nd - dqc) + 2 * nd  # linear ZIP rows, hyperplanes
        + 8 * nd  # bilinear big-M block
    )
    return {
        "variables": nb + 8 * nl + 2 * ng + 5 * nd + 3 * nm + 9 * nt,
        "binaries": nd + nt,
        "linear": linear,
        "cones": nl + nt + dpc + dqc,
    }


def write_cbf(model: ModelInstance, include_cuts: bool = True) -> str:
    """Serialize the model in the Conic Benchmark Format (CBF, version 3).

    Variables are declared free; bounds become ``L+`` rows.  Each rotated cone
    ``||v||^2 <= a b`` is written as a ``QR`` block ``(a/2, b, v)``.
    """
    rows: list[tuple[str, list[tuple[int, float]], float]] = []  # (domain, coeffs, const) as A x + b
    for v in model.variables:
        if math.isfinite(v.lower):
            rows.append(("L+", [(v.index, 1.0)], -v.lower))
        if math.isfinite(v.upper):
            rows.append(("L+", [(v.index, -1.0)], v.upper))
    lin = model.all_linear() if include_cuts else model.constraints
    for c in lin:
        if c.sense == "==":
            rows.append(("L=", list(c.terms), -c.rhs))
        elif c.sense == ">=":
            rows.append(("L+", list(c.terms), -c.rhs))
        else:
            rows.append(("L+", [(i, -a) for i, a in c.terms], c.rhs))
    blocks: list[tuple[str, int]] = []
    for dom, _, _ in rows:
        if blocks and blocks[-1][0] == dom:
            blocks[-1] = (dom, blocks[-1][1] + 1)
        else:
            blocks.append((dom, 1))
    for cone in model.cones:
        half = Affine(tuple((i, 0.5 * a) for i, a in cone.a.terms), 0.5 * cone.a.const)
        for aff in (half, cone.b) + cone.vec:
            rows.append(("QR", list(aff.terms), aff.const))
        blocks.append(("QR", 2 + len(cone.vec)))

    out = ["VER", "3", "", "OBJSENSE", "MIN", "", "VAR", f"{model.n} 1", f"F {model.n}", ""]
    ints = model.binaries()
    if ints:
        out += ["INT", str(len(ints))] + [str(i) for i in ints] + [""]
    out += ["CON", f"{len(rows)} {len(blocks)}"] + [f"{d} {k}" for d, k in blocks] + [""]
    obj = sorted((i, c) for i, c in model.objective.items() if c != 0.0)
    out += ["OBJACOORD", str(len(obj))] + [f"{i} {c!r}" for i, c in obj] + [""]
    if model.objective_constant != 0.0:
        out += ["OBJBCOORD", repr(model.objective_constant), ""]
    acoords = [(r, i, a) for r, (_, terms, _) in enumerate(rows) for i, a in terms if a != 0.0]
    out += ["ACOORD", str(len(acoords))] + [f"{r} {i} {a!r}" for r, i, a in acoords] + [""]
    bcoords = [(r, b) for r, (_, _, b) in enumerate(rows) if b != 0.0]
    out += ["BCOORD", str(len(bcoords))] + [f"{r} {b!r}" for r, b in bcoords] + [""]
    return "\n".join(out)
