import itertools

import numpy as np
import pytest
from scipy.optimize import linprog

from mgresilience.conic import SolveSettings, solve_misocp, solve_socp
from mgresilience.relaxation import Affine, ModelInstance, build_base_model

from conftest import small_case


def _cone_toy() -> ModelInstance:
    m = ModelInstance()
    x = m.add_var("x", -2.0, 2.0)
    y = m.add_var("y", 0.0, 5.0)
    z = m.add_var("z", 0.0, 5.0)
    m.add_linear([(y, 1.0)], "==", 1.0, tag="fix")
    m.add_linear([(z, 1.0)], "==", 1.0, tag="fix")
    m.add_cone([Affine(((x, 1.0),))], Affine(((y, 1.0),)), Affine(((z, 1.0),)), tag="toy")
    m.objective[x] = 1.0
    return m


def test_rotated_cone_toy():
    res = solve_socp(_cone_toy())
    assert res.ok
    assert res.objective == pytest.approx(-1.0, abs=1e-6)
    assert res.x[0] == pytest.approx(-1.0, abs=1e-6)


def test_infeasible_rows():
    m = ModelInstance()
    x = m.add_var("x", 0.0, 1.0)
    m.add_linear([(x, 1.0)], ">=", 2.0, tag="bad")
    m.objective[x] = 1.0
    assert solve_socp(m).status == "infeasible"
    b = m.add_var("b", 0.0, 1.0, "binary")
    m.objective[b] = 1.0
    assert solve_misocp(m).status == "infeasible"


def test_bad_settings():
    with pytest.raises(ValueError):
        SolveSettings(feas_tol=0.0)
    with pytest.raises(ValueError):
        SolveSettings(mip_gap=-1.0)


@pytest.mark.parametrize("seed", range(6))
def test_lp_matches_linprog(seed):
    rng = np.random.default_rng(seed)
    n, k = 6, 8
    A = rng.normal(size=(k, n))
    x0 = rng.uniform(0.2, 0.8, n)
    b = A @ x0 + rng.uniform(0.0, 0.5, k)
    c = rng.normal(size=n)
    m = ModelInstance()
    for i in range(n):
        m.add_var(f"x{i}", 0.0, 1.0)
        m.objective[i] = float(c[i])
    for row, rhs in zip(A, b):
        m.add_linear([(i, float(a)) for i, a in enumerate(row)], "<=", float(rhs), tag="lp")
    ref = linprog(c, A_ub=A, b_ub=b, bounds=[(0, 1)] * n, method="highs")
    res = solve_socp(m)
    assert res.ok
    assert res.objective == pytest.approx(ref.fun, abs=1e-6)


def _knapsack(rng, n=8) -> tuple[ModelInstance, np.ndarray, np.ndarray, float]:
    # max value with a weight budget and one cone tying a continuous slack to the picks
    v = rng.uniform(1, 10, n)
    w = rng.uniform(1, 5, n)
    cap = 0.5 * w.sum()
    m = ModelInstance()
    for i in range(n):
        m.add_var(f"b{i}", 0.0, 1.0, "binary")
        m.objective[i] = -float(v[i])
    t = m.add_var("t", 0.0, 10.0)
    m.add_linear([(i, float(w[i])) for i in range(n)], "<=", float(cap), tag="cap")
    # t^2 <= 1 * 1 with a small reward on t: t = 1 at the optimum
    m.add_cone([Affine(((t, 1.0),))], Affine((), 1.0), Affine((), 1.0), tag="t")
    m.objective[t] = -0.5
    return m, v, w, cap


@pytest.mark.parametrize("seed", range(5))
def test_branch_and_bound_matches_enumeration(seed):
    rng = np.random.default_rng(100 + seed)
    m, v, w, cap = _knapsack(rng)
    best = min(
        -float(v @ np.array(p)) for p in itertools.product((0, 1), repeat=len(v)) if w @ np.array(p) <= cap
    )
    res = solve_misocp(m)
    assert res.ok
    assert res.objective == pytest.approx(best - 0.5, abs=1e-6)
    assert np.allclose(res.x[: len(v)], np.round(res.x[: len(v)]), atol=1e-6)


def test_deterministic_and_hint_neutral():
    case = small_case(np.random.default_rng(7), n_mg=3)
    model = build_base_model(case)
    a = solve_misocp(model)
    b = solve_misocp(model)
    assert a.ok and b.ok
    assert a.objective == b.objective
    assert np.array_equal(a.x, b.x)
    assert a.nodes == b.nodes
    c = solve_misocp(model, hint=a.x)
    assert c.objective == pytest.approx(a.objective, rel=1e-7, abs=1e-6)
    assert a.max_kkt["primal"] <= 1e-7


def test_node_limit_reported():
    rng = np.random.default_rng(3)
    m, *_ = _knapsack(rng, n=12)
    res = solve_misocp(m, SolveSettings(node_limit=1))
    assert res.status in ("node_limit", "optimal")
    if res.status == "node_limit":
        assert res.bound <= res.objective + 1e-9
