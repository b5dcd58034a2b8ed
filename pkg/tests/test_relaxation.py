import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mgresilience.case import Load, SwitchConfig, connected_components, internal_edges, with_severity
from mgresilience.relaxation import (
    CUT_KINDS,
    build_base_model,
    census,
    census_formula,
    extract_solution,
    frequency_cut,
    write_cbf,
    zip_bounds,
)
from mgresilience.sfr import component_coefficients

from conftest import SOUND_TAGS, exact_point, small_case


def _load(zp, p_bar=1.0):
    return Load("d", "b", p_bar, 0.5 * p_bar, zp, zp, 1.0)


@pytest.fixture(scope="module")
def model(bundled):
    return build_base_model(bundled)


def test_census_bundled(bundled, model):
    c = census(model)
    assert (c["variables"], c["binaries"], c["linear"], c["cones"]) == (563, 40, 793, 110)
    f = census_formula(bundled)
    assert {k: c[k] for k in f} == f


@pytest.mark.parametrize("seed", range(8))
def test_census_formula_random(seed):
    rng = np.random.default_rng(seed)
    case = small_case(rng, n_mg=int(rng.integers(1, 4)), loads_per_mg=int(rng.integers(1, 4)))
    m = build_base_model(case)
    f = census_formula(case)
    assert {k: census(m)[k] for k in f} == f


def test_zip_bounds_examples():
    assert zip_bounds(_load((0.0, 0.0, 1.0), 2.0), 0.81, 1.21)[:2] == (2.0, 2.0)
    lo, hi, _, _ = zip_bounds(_load((1.0, 0.0, 0.0), 2.0), 0.81, 1.21)
    assert (lo, hi) == pytest.approx((0.81 * 2.0, 1.21 * 2.0))
    lo, hi, _, _ = zip_bounds(_load((0.2, 0.3, 0.5)), 0.9025, 1.1025)
    # 0.2 C + 0.3 sqrt(C) + 0.5 at C = 0.95^2 and 1.05^2
    assert (lo, hi) == pytest.approx((0.9655, 1.0355))
    with pytest.raises(ValueError):
        zip_bounds(_load((1.0, 0.0, 0.0)), 0.0, 1.0)


def test_single_microgrid_has_no_switches():
    case = small_case(np.random.default_rng(3), n_mg=1)
    m = build_base_model(case)
    assert not any(v.name.startswith("Z[") for v in m.variables)
    assert census(m)["binaries"] == len(case.microgrids[0].loads)


def test_exact_points_satisfy_relaxation(bundled, model):
    rng = np.random.default_rng(11)
    for _ in range(200):
        x = exact_point(bundled, model, rng)
        assert model.max_violation(x, SOUND_TAGS) < 1e-9


def test_big_m_block_exact_at_binaries(bundled, model):
    # with x fixed at 0 or 1 the four rows pin rho to x * pD for any pD in range
    ld = bundled.microgrids[0].loads[0]
    ix = model.idx
    rows = [c for c in model.constraints if c.tag == "bigm_p" and ix(f"rho[{ld.id}]") in dict(c.terms)]
    assert len(rows) == 4
    v = model.var(f"pD[{ld.id}]")
    for xv, pv in itertools.product((0.0, 1.0), np.linspace(v.lower, v.upper, 5)):
        x = np.zeros(model.n)
        x[ix(f"x[{ld.id}]")], x[ix(f"pD[{ld.id}]")] = xv, pv
        # each row is rho + rest (sense) rhs, so it bounds rho from one side
        lo_r, hi_r = -math.inf, math.inf
        for c in rows:
            rest = sum(a * x[i] for i, a in c.terms if i != ix(f"rho[{ld.id}]"))
            if c.sense == "<=":
                hi_r = min(hi_r, c.rhs - rest)
            else:
                lo_r = max(lo_r, c.rhs - rest)
        assert lo_r == pytest.approx(xv * pv, abs=1e-12)
        assert hi_r == pytest.approx(xv * pv, abs=1e-12)


@settings(max_examples=100, deadline=None)
@given(
    st.sampled_from([(0.3, 0.3, 0.4), (1.0, 0.0, 0.0), (0.0, 1.0, 0.0), (0.2, 0.5, 0.3), (0.0, 0.0, 1.0)]),
    st.floats(0.81, 1.0),
    st.floats(1.0, 1.21),
    st.floats(0.0, 1.0),
)
def test_hyperplane_below_zip_curve(zp, c_min, c_max, t):
    ld = _load(zp)
    lo, hi, _, _ = zip_bounds(ld, c_min, c_max)
    c = c_min + t * (c_max - c_min)
    slope = (hi - lo) / (c_max - c_min) if c_max > c_min else 0.0
    # chord of a concave nondecreasing curve stays below it
    assert lo + slope * (c - c_min) <= ld.p_at(c) + 1e-12


def _with_config(case, model, closed, served):
    return exact_point(case, model, np.random.default_rng(0), closed=closed, served=served)


def test_frequency_cut_enforced_and_relaxed(bundled, model):
    s = {"m1", "m2"}
    alpha, beta = component_coefficients(bundled, s)
    served = {ld.id: 1 for _, ld in bundled.all_loads()}
    inner = internal_edges(bundled, s)
    # S is a component: l1 closed, every cutset line open
    x = _with_config(bundled, model, inner, served)
    mm = -sum(m.delta_p0 for m in bundled.microgrids if m.id in s)
    for kind in CUT_KINDS:
        row = frequency_cut(bundled, model, s, kind)
        coef = alpha if kind.startswith("nadir") else beta
        lim = getattr(bundled.frequency_limits, kind)
        ok = coef * mm >= lim if kind.endswith("_min") else coef * mm <= lim
        assert (row.violation(x) <= 1e-9) == ok
    # closing a cutset line or opening the tree disables the row
    row = frequency_cut(bundled, model, s, "ss_min")
    assert row.violation(x) > 0
    for closed in (set(inner) | {"l2"}, set()):
        y = _with_config(bundled, model, closed, served)
        assert row.violation(y) <= 1e-9


def test_frequency_cut_errors(bundled, model):
    with pytest.raises(ValueError):
        frequency_cut(bundled, model, {"m1"}, "nadir")
    with pytest.raises(ValueError):
        frequency_cut(bundled, model, {"m1"}, "ss_min", internal={"l1"})


def test_zero_load_case_optimum_is_zero():
    from mgresilience.conic import solve_misocp

    case = with_severity(small_case(np.random.default_rng(5), n_mg=2), 0.0)
    m = build_base_model(case)
    res = solve_misocp(m)
    assert res.ok
    assert res.objective == pytest.approx(0.0, abs=1e-5)
    sol = extract_solution(case, m, res.x)
    assert sol.shed_loads() == []


def test_extract_solution(bundled, model):
    served = {ld.id: 1 for _, ld in bundled.all_loads()}
    shed = [bundled.microgrids[0].loads[0], bundled.microgrids[2].loads[1]]
    for ld in shed:
        served[ld.id] = 0
    x = exact_point(bundled, model, np.random.default_rng(2), closed={"l1", "l3", "l5"}, served=served)
    sol = extract_solution(bundled, model, x)
    assert sol.closed == ("l1", "l3", "l5")
    assert sol.shed_loads() == sorted(ld.id for ld in shed)
    assert sol.nominal_shed_pu == pytest.approx(sum(ld.p_bar for ld in shed))
    assert sol.curtailment_pu == pytest.approx(sum(x[model.idx(f"pD[{ld.id}]")] for ld in shed))
    assert set(sol.components) == set(connected_components(bundled, SwitchConfig(["l1", "l3", "l5"])))
    assert sol.objective == pytest.approx(sum(ld.voll * ld.p_bar for ld in shed))
    with pytest.raises(ValueError):
        extract_solution(bundled, model, x[:-1])
    bad = x.copy()
    bad[0] = math.nan
    with pytest.raises(ValueError):
        extract_solution(bundled, model, bad)


def test_write_cbf(bundled, model):
    text = write_cbf(model)
    lines = text.splitlines()
    assert lines[:2] == ["VER", "3"]
    var = lines[lines.index("VAR") + 1].split()
    assert var == [str(model.n), "1"]
    ints = int(lines[lines.index("INT") + 1])
    assert ints == 40
    con = lines[lines.index("CON") + 1].split()
    n_blocks = int(con[1])
    blocks = lines[lines.index("CON") + 2 : lines.index("CON") + 2 + n_blocks]
    assert sum(int(b.split()[1]) for b in blocks) == int(con[0])
    assert sum(1 for b in blocks if b.startswith("QR")) == 110
    assert write_cbf(model) == text
