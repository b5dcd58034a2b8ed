"""Continuous SOCP solves and best-first branch-and-bound over binaries.

The continuous relaxations are handed to the Clarabel interior-point solver
after a light presolve (fixed-variable removal and singleton-row bound
tightening).  Rotated cones ``||v||^2 <= a b`` become standard second-order
cones ``||(a - b, 2 v)|| <= a + b`` at this interface.  KKT residuals of
every continuous solve are recomputed here from the returned primal-dual
pair rather than trusted from the solver.
"""

from __future__ import annotations

import heapq
import logging
import math
import time
from dataclasses import dataclass, field

import clarabel
import numpy as np
from scipy import sparse

from .relaxation import ModelInstance

__all__ = ["SolveSettings", "SolveResult", "SolverError", "solve_socp", "solve_misocp"]

log = logging.getLogger("mgresilience.conic")

_FIX_TOL = 1e-10
# nodes whose bound is within this relative distance of the incumbent are pruned
_PRUNE_REL = 1e-6


class SolverError(RuntimeError):
    """Numerical failure or a malformed (unbounded) model."""


@dataclass(frozen=True)
class SolveSettings:
    feas_tol: float = 1e-7
    gap_tol: float = 1e-7
    int_tol: float = 1e-6
    mip_gap: float = 0.0
    node_limit: int = 200_000
    time_limit: float = 3600.0  # s; in the cutting-plane loop this budget covers all rounds

    def __post_init__(self):
        for name in ("feas_tol", "gap_tol", "int_tol", "node_limit", "time_limit"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if not self.mip_gap >= 0:
            raise ValueError("mip_gap must be nonnegative")


@dataclass
class SolveResult:
    status: str  # optimal | infeasible | node_limit | time_limit
    objective: float
    x: np.ndarray | None
    bound: float
    dual_gap: float
    nodes: int
    wall_time: float
    kkt: dict = field(default_factory=dict)
    max_kkt: dict = field(default_factory=dict)  # worst residuals over all continuous solves

    @property
    def ok(self) -> bool:
        return self.status == "optimal"


# ---------------------------------------------------------------------------
# compilation


class _Compiled:
    """Sparse form of a model: lo <= A x <= hi, cone blocks s = G x + h."""

    def __init__(self, model: ModelInstance):
        n = model.n
        self.n = n
        lin = model.all_linear()
        rows, cols, vals = [], [], []
        lo = np.full(len(lin), -np.inf)
        hi = np.full(len(lin), np.inf)
        for r, con in enumerate(lin):
            for i, a in con.terms:
                rows.append(r)
                cols.append(i)
                vals.append(a)
            if con.sense in ("==", ">="):
                lo[r] = con.rhs
            if con.sense in ("==", "<="):
                hi[r] = con.rhs
        self.A = sparse.csr_matrix((vals, (rows, cols)), shape=(len(lin), n))
        self.A.sum_duplicates()
        self.lo, self.hi = lo, hi
        self.pattern = self.A.copy()
        self.pattern.data = np.ones_like(self.pattern.data)

        # cone blocks as SOC rows: (a + b, a - b, 2 v)
        grows, gcols, gvals, h, sizes = [], [], [], [], []
        r = 0
        for cone in model.cones:
            block = []
            ta = dict(cone.a.terms)
            tb = dict(cone.b.terms)
            plus = {k: ta.get(k, 0.0) + tb.get(k, 0.0) for k in set(ta) | set(tb)}
            minus = {k: ta.get(k, 0.0) - tb.get(k, 0.0) for k in set(ta) | set(tb)}
            block.append((plus, cone.a.const + cone.b.const))
            block.append((minus, cone.a.const - cone.b.const))
            for v in cone.vec:
                block.append(({k: 2.0 * c for k, c in v.terms}, 2.0 * v.const))
            for terms, const in block:
                for k, c in terms.items():
                    if c != 0.0:
                        grows.append(r)
                        gcols.append(k)
                        gvals.append(c)
                h.append(const)
                r += 1
            sizes.append(len(block))
        self.G = sparse.csr_matrix((gvals, (grows, gcols)), shape=(r, n))
        self.h = np.array(h, dtype=float)
        self.cone_sizes = sizes
        self.c = np.zeros(n)
        for i, a in model.objective.items():
            self.c[i] = a
        self.c0 = model.objective_constant


def _presolve(comp: _Compiled, lb: np.ndarray, ub: np.ndarray, tol: float):
    """Remove fixed variables and turn singleton rows into bounds.

    Returns ``(lb, ub, active_rows)`` or ``None`` when infeasibility is proven.
    """
    lb, ub = lb.astype(float).copy(), ub.astype(float).copy()
    if np.any(lb > ub + tol):
        return None
    active = np.ones(comp.A.shape[0], dtype=bool)
    while True:
        fixed = ub - lb <= _FIX_TOL
        mid = np.zeros_like(lb)
        mid[fixed] = 0.5 * (lb[fixed] + ub[fixed])
        lb[fixed] = ub[fixed] = mid[fixed]
        cf = comp.A @ mid
        count = comp.pattern @ (~fixed).astype(float)
        changed = False
        empty = active & (count == 0)
        if np.any(empty):
            scale = 1.0 + np.abs(cf[empty])
            if np.any(cf[empty] < comp.lo[empty] - tol * scale) or np.any(cf[empty] > comp.hi[empty] + tol * scale):
                return None
            active[empty] = False
        single = np.flatnonzero(active & (count == 1))
        if len(single) == 0:
            break
        free_cols = ~fixed
        for r in single:
            s, e = comp.A.indptr[r], comp.A.indptr[r + 1]
            js = comp.A.indices[s:e]
            vs = comp.A.data[s:e]
            k = np.flatnonzero(free_cols[js])
            if len(k) != 1:
                continue
            j, a = js[k[0]], vs[k[0]]
            if abs(a) < 1e-9:
                continue
            lo_r, hi_r = comp.lo[r] - cf[r], comp.hi[r] - cf[r]
            new_lo, new_hi = (lo_r / a, hi_r / a) if a > 0 else (hi_r / a, lo_r / a)
            if new_lo > lb[j]:
                lb[j] = new_lo
            if new_hi < ub[j]:
                ub[j] = new_hi
            if lb[j] > ub[j]:
                if lb[j] - ub[j] > tol * (1.0 + abs(lb[j])):
                    return None
                lb[j] = ub[j] = 0.5 * (lb[j] + ub[j])
            active[r] = False
            changed = True
        if not changed:
            break
    return lb, ub, active


def _merge_parallel(A: sparse.csr_matrix, lo: np.ndarray, hi: np.ndarray, tol: float):
    """Merge rows with proportional coefficients into one two-sided row.

    A pair of opposite inequalities that meet becomes an equality, which keeps
    the interior-point method away from feasible sets without interior.
    Returns ``(A, lo, hi)`` with each row scaled to a unit first coefficient,
    or None when a merged row is empty.
    """
    A = A.tocsr()
    A.sort_indices()
    nnz = np.diff(A.indptr)
    rows = np.flatnonzero(nnz > 0)
    if len(rows) == 0:
        return sparse.csr_matrix((0, A.shape[1])), np.zeros(0), np.zeros(0)
    A = A[rows]
    nnz = nnz[rows]
    lo, hi = lo[rows], hi[rows]
    starts = A.indptr[:-1]
    scale = A.data[starts]
    q = np.round(A.data / np.repeat(scale, nnz), 10)
    # order-free fingerprints of (pattern, normalized values); confirmed exactly below
    w = _hash_weights(A.shape[1])
    h1 = np.add.reduceat(w[0][A.indices] * (q + 1.2345), starts)
    h2 = np.add.reduceat(w[1][A.indices] * (q * q + 0.5), starts)
    _, first, group = np.unique(
        np.column_stack([nnz, h1, h2]), axis=0, return_index=True, return_inverse=True
    )
    group = group.ravel()
    pos = scale > 0
    l = np.where(pos, lo, hi) / scale
    h = np.where(pos, hi, lo) / scale
    ng = len(first)
    sizes = np.bincount(group, minlength=ng)
    for g in np.flatnonzero(sizes > 1):
        members = np.flatnonzero(group == g)
        r0 = members[0]
        s0 = slice(A.indptr[r0], A.indptr[r0 + 1])
        for r in members[1:]:
            sr = slice(A.indptr[r], A.indptr[r + 1])
            if not (np.array_equal(A.indices[s0], A.indices[sr]) and np.array_equal(q[s0], q[sr])):
                group[r] = ng  # fingerprint collision: keep the row on its own
                first = np.append(first, r)
                ng += 1
    L = np.full(ng, -np.inf)
    H = np.full(ng, np.inf)
    np.maximum.at(L, group, l)
    np.minimum.at(H, group, h)
    bad = L - H > tol * (1.0 + np.abs(np.where(np.isfinite(L), L, 0.0)))
    if np.any(bad):
        return None
    fin = np.isfinite(L) & np.isfinite(H)
    meet = fin & (H - L <= 1e-12 * (1.0 + np.abs(np.where(fin, L, 0.0))))
    mid = np.where(meet, 0.5 * (L + H), 0.0)
    L = np.where(meet, mid, L)
    H = np.where(meet, mid, H)
    order = np.argsort(first, kind="stable")
    reps = first[order]
    out = sparse.diags(1.0 / scale[reps]) @ A[reps]
    return out.tocsr(), L[order], H[order]


_HASH_CACHE: dict = {}


def _hash_weights(n: int) -> tuple[np.ndarray, np.ndarray]:
    if n not in _HASH_CACHE:
        rng = np.random.default_rng(20240611)
        _HASH_CACHE[n] = (rng.uniform(1.0, 2.0, n), rng.uniform(1.0, 2.0, n))
    return _HASH_CACHE[n]


def _kkt(A, b, c, x, z, n_zero: int, n_nonneg: int, sizes) -> dict:
    """Relative primal infeasibility of x, dual residual and duality gap.

    Primal feasibility is measured on ``b - A x`` projected onto the cones rather
    than on the solver's slack, so it reflects the point actually returned.
    """
    r = b - A @ x
    scale = 1.0 + np.abs(b)
    worst = np.max(np.abs(r[:n_zero]) / scale[:n_zero], initial=0.0)
    sl = slice(n_zero, n_zero + n_nonneg)
    worst = max(worst, np.max(np.maximum(-r[sl], 0.0) / scale[sl], initial=0.0))
    sizes = np.asarray(sizes, dtype=int)
    if len(sizes):
        starts = n_zero + n_nonneg + np.concatenate(([0], np.cumsum(sizes)[:-1]))
        rc = r[n_zero + n_nonneg :]
        bc = b[n_zero + n_nonneg :]
        rel = starts - starts[0]
        tail = np.sqrt(np.add.reduceat(rc * rc, rel) - rc[rel] ** 2)
        bnorm = np.sqrt(np.add.reduceat(bc * bc, rel))
        worst = max(worst, float(np.max(np.maximum(tail - rc[rel], 0.0) / (1.0 + bnorm))))
    aty = A.T @ z
    dual = np.max(np.abs(c + aty), initial=0.0) / max(1.0, np.max(np.abs(c), initial=0.0))
    pobj, dobj = float(c @ x), float(-b @ z)
    gap = abs(pobj - dobj) / max(1.0, abs(pobj), abs(dobj))
    return {"primal": float(worst), "dual": float(dual), "gap": float(gap)}


# retried in order when a node solve stalls near a degenerate optimum
_FALLBACKS = ({}, {"equilibrate_enable": False}, {"max_step_fraction": 0.95})


def _clarabel_settings(feas: float, gap: float):
    st = clarabel.DefaultSettings()
    st.verbose = False
    st.max_threads = 1
    st.max_iter = 200
    st.tol_feas = feas
    st.tol_gap_abs = gap
    st.tol_gap_rel = gap
    # "almost solved" must still be a usable point
    st.reduced_tol_feas = max(feas, 1e-6)
    st.reduced_tol_gap_abs = max(gap, 1e-6)
    st.reduced_tol_gap_rel = max(gap, 1e-6)
    return st


def _solve_relaxation(comp: _Compiled, lb: np.ndarray, ub: np.ndarray, settings: SolveSettings):
    """One continuous solve; returns (status, objective, x, kkt)."""
    pre = _presolve(comp, lb, ub, settings.feas_tol)
    if pre is None:
        return "infeasible", math.inf, None, {}
    lb, ub, active = pre
    fixed = ub - lb <= _FIX_TOL
    free = np.flatnonzero(~fixed)
    xfix = np.where(fixed, lb, 0.0)
    nf = len(free)

    A_rows = comp.A[active]
    cf = A_rows @ xfix
    lo, hi = comp.lo[active] - cf, comp.hi[active] - cf
    merged = _merge_parallel(A_rows[:, free].tocsr(), lo, hi, settings.feas_tol)
    if merged is None:
        return "infeasible", math.inf, None, {}
    A_free, lo, hi = merged
    eq = lo == hi
    le = ~eq & np.isfinite(hi)
    ge = ~eq & np.isfinite(lo)

    # cone blocks, dropping those with every variable fixed
    hfix = comp.h + comp.G @ xfix
    G_free = comp.G[:, free].tocsr()
    row_nnz = np.diff(G_free.indptr)
    starts = np.concatenate(([0], np.cumsum(comp.cone_sizes)[:-1])).astype(int)
    sizes_all = np.asarray(comp.cone_sizes, dtype=int)
    keep_rows = np.zeros(G_free.shape[0], dtype=bool)
    sizes: list[int] = []
    if len(sizes_all):
        live = np.add.reduceat(row_nnz, starts) > 0
        dead = starts[~live]
        if len(dead):
            h2 = np.add.reduceat(hfix * hfix, starts)[~live]
            head = hfix[dead]
            if np.any(head + settings.feas_tol < np.sqrt(np.maximum(h2 - head**2, 0.0))):
                return "infeasible", math.inf, None, {}
        keep_rows = np.repeat(live, sizes_all)
        sizes = sizes_all[live].tolist()

    eye = sparse.identity(nf, format="csr")
    fin_ub = np.isfinite(ub[free])
    fin_lb = np.isfinite(lb[free])
    parts_A = [A_free[eq], A_free[le], -A_free[ge], eye[fin_ub], -eye[fin_lb], -G_free[keep_rows]]
    parts_b = [hi[eq], hi[le], -lo[ge], ub[free][fin_ub], -lb[free][fin_lb], hfix[keep_rows]]
    n_zero = int(eq.sum())
    n_nonneg = int(le.sum() + ge.sum() + fin_ub.sum() + fin_lb.sum())
    c_free = comp.c[free]
    const = comp.c0 + float(comp.c @ xfix)

    if nf == 0:
        x = xfix.copy()
        return "optimal", const, x, {"primal": 0.0, "dual": 0.0, "gap": 0.0}

    A = sparse.vstack(parts_A, format="csc")
    b = np.concatenate(parts_b)
    cones = []
    if n_zero:
        cones.append(clarabel.ZeroConeT(n_zero))
    if n_nonneg:
        cones.append(clarabel.NonnegativeConeT(n_nonneg))
    cones += [clarabel.SecondOrderConeT(s) for s in sizes]

    P = sparse.csc_matrix((nf, nf))
    # unit-scale objective; raw VOLL weights wreck the interior-point accuracy
    c_scale = max(1.0, float(np.max(np.abs(c_free), initial=0.0)))
    c_run = c_free / c_scale
    S = clarabel.SolverStatus
    tol = max(settings.feas_tol, settings.gap_tol)
    spare = None  # best near-optimal point, used if no fallback meets the tolerances
    for extra in _FALLBACKS:
        st = _clarabel_settings(settings.feas_tol, settings.gap_tol)
        for key, val in extra.items():
            setattr(st, key, val)
        sol = clarabel.DefaultSolver(P, c_run, A, b, cones, st).solve()
        status = sol.status
        if status in (S.PrimalInfeasible, S.AlmostPrimalInfeasible):
            return "infeasible", math.inf, None, {}
        if status in (S.DualInfeasible, S.AlmostDualInfeasible):
            raise SolverError("relaxation is unbounded (malformed model)")
        if status == S.Solved:
            break
        if sol.x is not None and len(sol.x) == nf:
            # an early stop may still return a point that meets our own residual test
            kkt = _kkt(A, b, c_run, np.asarray(sol.x), np.asarray(sol.z), n_zero, n_nonneg, sizes)
            worst = max(kkt.values())
            if worst <= tol:
                break
            if worst <= 10.0 * tol and (spare is None or worst < spare[0]):
                spare = (worst, sol)
    else:
        if spare is not None:
            sol = spare[1]
        else:
            # stalled solves are usually infeasible nodes without a clean certificate
            viol = _phase1(A, b, n_zero, n_nonneg, sizes, st)
            if viol is not None and viol > 10.0 * settings.feas_tol:
                return "infeasible", math.inf, None, {"phase1": viol}
            raise SolverError(f"continuous solve failed with status {status}; iterations={sol.iterations}")
    xr = np.asarray(sol.x)
    kkt = _kkt(A, b, c_run, xr, np.asarray(sol.z), n_zero, n_nonneg, sizes)
    x = xfix.copy()
    x[free] = xr
    return "optimal", const + float(c_free @ xr), x, kkt


def _phase1(A, b, n_zero, n_nonneg, sizes, st) -> float | None:
    """Smallest uniform slack that makes the conic system feasible, or None."""
    m, n = A.shape
    Az, bz = A[:n_zero], b[:n_zero]
    Ar, br = A[n_zero:], b[n_zero:]
    # relax: equality rows become two-sided, every nonneg row and cone head gain +t
    t_col = np.zeros(m - n_zero)
    t_col[:n_nonneg] = -1.0
    pos = n_nonneg
    for size in sizes:
        t_col[pos] = -1.0
        pos += size
    ones = -np.ones((n_zero, 1))
    A1 = sparse.vstack(
        [
            sparse.hstack([Az, ones]),
            sparse.hstack([-Az, ones]),
            sparse.hstack([sparse.csr_matrix((1, n)), -np.ones((1, 1))]),
            sparse.hstack([Ar, sparse.csr_matrix(t_col[:, None])]),
        ],
        format="csc",
    )
    b1 = np.concatenate([bz, -bz, [0.0], br])
    cones = [clarabel.NonnegativeConeT(2 * n_zero + 1 + n_nonneg)]
    cones += [clarabel.SecondOrderConeT(s) for s in sizes]
    c1 = np.zeros(n + 1)
    c1[-1] = 1.0
    sol = clarabel.DefaultSolver(sparse.csc_matrix((n + 1, n + 1)), c1, A1, b1, cones, st).solve()
    if sol.status not in (clarabel.SolverStatus.Solved, clarabel.SolverStatus.AlmostSolved):
        return None
    return float(sol.x[-1])


def _merge_kkt(acc: dict, kkt: dict) -> None:
    for k, v in kkt.items():
        acc[k] = max(acc.get(k, 0.0), v)


def solve_socp(
    model: ModelInstance,
    settings: SolveSettings | None = None,
    lower: np.ndarray | None = None,
    upper: np.ndarray | None = None,
) -> SolveResult:
    """Solve the continuous relaxation (binaries relaxed to their bounds)."""
    settings = settings or SolveSettings()
    t0 = time.perf_counter()
    comp = _Compiled(model)
    lb = model.lower() if lower is None else np.asarray(lower, dtype=float)
    ub = model.upper() if upper is None else np.asarray(upper, dtype=float)
    status, obj, x, kkt = _solve_relaxation(comp, lb, ub, settings)
    return SolveResult(
        status=status,
        objective=obj,
        x=x,
        bound=obj,
        dual_gap=kkt.get("gap", math.inf) if status == "optimal" else math.inf,
        nodes=1,
        wall_time=time.perf_counter() - t0,
        kkt=kkt,
        max_kkt=dict(kkt),
    )


# ---------------------------------------------------------------------------
# branch and bound


@dataclass(order=True)
class _Node:
    bound: float
    id: int
    depth: int = field(compare=False)
    fix: tuple = field(compare=False)  # ((var index, value), ...)


def solve_misocp(
    model: ModelInstance,
    settings: SolveSettings | None = None,
    hint: np.ndarray | None = None,
) -> SolveResult:
    """Best-first branch-and-bound on the binaries of ``model``.

    Branches on the most fractional binary (lowest index on ties) and dives
    depth-first until the first incumbent.  ``hint`` is an optional point whose
    binary values seed the incumbent (one fixed-binary solve).
    """
    settings = settings or SolveSettings()
    t0 = time.perf_counter()
    comp = _Compiled(model)
    lb0, ub0 = model.lower(), model.upper()
    bins = np.array(model.binaries(), dtype=int)
    worst_kkt: dict = {}

    inc_obj, inc_x, inc_kkt = math.inf, None, {}
    nodes = 0

    def cutoff() -> float:
        if inc_x is None:
            return math.inf
        return inc_obj - max(_PRUNE_REL * max(1.0, abs(inc_obj)), settings.mip_gap * abs(inc_obj))

    def solve_fixed(values: np.ndarray):
        lb, ub = lb0.copy(), ub0.copy()
        lb[bins] = ub[bins] = np.round(values[bins])
        return _solve_relaxation(comp, lb, ub, settings)

    def try_incumbent(x_int: np.ndarray) -> bool:
        nonlocal inc_obj, inc_x, inc_kkt
        status, obj, x, kkt = solve_fixed(x_int)
        if status != "optimal":
            return False
        _merge_kkt(worst_kkt, kkt)
        if obj < inc_obj - 1e-12 * max(1.0, abs(obj)):
            inc_obj, inc_x, inc_kkt = obj, x, kkt
            return True
        return False

    if hint is not None and len(bins):
        try_incumbent(np.asarray(hint, dtype=float))

    counter = 0
    stack: list[_Node] = [_Node(-math.inf, 0, 0, ())]
    heap: list[_Node] = []
    status = "optimal"

    def open_bound() -> float:
        return min([n.bound for n in heap] + [n.bound for n in stack], default=math.inf)

    while stack or heap:
        if inc_x is not None and settings.mip_gap > 0 and _gap(inc_obj, open_bound()) <= settings.mip_gap:
            break
        if nodes >= settings.node_limit:
            status = "node_limit"
            break
        if time.perf_counter() - t0 > settings.time_limit:
            status = "time_limit"
            break
        if inc_x is None and stack:
            node = stack.pop()
        else:
            while stack:
                heapq.heappush(heap, stack.pop())
            node = heapq.heappop(heap)
        if node.bound >= cutoff():
            continue
        lb, ub = lb0.copy(), ub0.copy()
        for j, v in node.fix:
            lb[j] = ub[j] = v
        try:
            st, obj, x, kkt = _solve_relaxation(comp, lb, ub, settings)
        except SolverError:
            # split an unsolvable node on its first free binary; the parent bound still holds
            free_bins = [int(j) for j in bins if ub[j] - lb[j] > 0.5]
            if not free_bins:
                raise
            nodes += 1
            j = free_bins[0]
            for v in (0.0, 1.0):
                counter += 1
                child = _Node(node.bound, counter, node.depth + 1, node.fix + ((j, v),))
                (stack if inc_x is None else heap).append(child)
            heapq.heapify(heap)
            _log_node(node, node.bound, inc_obj, f"numerical failure, split on {j}")
            continue
        nodes += 1
        if st != "optimal":
            _log_node(node, math.inf, inc_obj, "infeasible")
            continue
        _merge_kkt(worst_kkt, kkt)
        if obj >= cutoff():
            _log_node(node, obj, inc_obj, "pruned")
            continue

        xb = x[bins]
        dist = np.minimum(xb - np.floor(xb), np.ceil(xb) - xb)
        if len(bins) == 0 or dist.max(initial=0.0) <= settings.int_tol:
            try_incumbent(x)
            _log_node(node, obj, inc_obj, "integral")
            continue

        # most fractional, lowest index on ties
        best = int(np.argmax(dist))
        j = int(bins[best])
        order = (1.0, 0.0) if x[j] >= 0.5 else (0.0, 1.0)
        children = []
        for v in order:
            counter += 1
            children.append(_Node(obj, counter, node.depth + 1, node.fix + ((j, v),)))
        _log_node(node, obj, inc_obj, f"branch on {j} at {x[j]:.4f}")
        if inc_x is None:
            stack.extend(reversed(children))  # dive into the rounding direction first
        else:
            for ch in children:
                heapq.heappush(heap, ch)

    wall = time.perf_counter() - t0
    remaining = open_bound()
    if inc_x is None:
        if status == "optimal":
            return SolveResult("infeasible", math.inf, None, math.inf, math.inf, nodes, wall, {}, worst_kkt)
        return SolveResult(status, math.inf, None, remaining, math.inf, nodes, wall, {}, worst_kkt)
    bound = min(remaining, inc_obj)
    return SolveResult(
        status=status,
        objective=inc_obj,
        x=inc_x,
        bound=bound,
        dual_gap=_gap(inc_obj, bound),
        nodes=nodes,
        wall_time=wall,
        kkt=inc_kkt,
        max_kkt=worst_kkt,
    )


def _gap(inc: float, bound: float) -> float:
    if not math.isfinite(inc):
        return math.inf
    return max(0.0, inc - bound) / max(1.0, abs(inc))


def _log_node(node: _Node, bound: float, inc: float, note: str) -> None:
    if log.isEnabledFor(logging.INFO):
        log.info(
            "node %d depth %d bound %.9g incumbent %.9g gap %.3g %s",
            node.id, node.depth, bound, inc, _gap(inc, bound) if math.isfinite(bound) else math.inf, note,
        )
