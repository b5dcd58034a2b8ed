"""Aggregated system frequency response (SFR) of a set of VSC-interfaced microgrids.

The closed loop of the aggregate is

    H(s) = (1 + T' s) / (2 H_a T' (s^2 + 2 xi w_n s + w_n^2))

driven by the power disturbance (positive = surplus).  Closed-form unit-step
steady state / nadir coefficients live next to a fixed-step RK4 simulator of
the block-diagram realization, which serves as the numerical oracle.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from typing import Iterable, Sequence

import numpy as np

from .case import NetworkCase, VscDynamics

__all__ = [
    "REGIME_TOL",
    "Regime",
    "SfrAggregate",
    "SfrShape",
    "FrequencyMetrics",
    "StepTrajectory",
    "aggregate",
    "shape",
    "steady_state",
    "nadir",
    "step_response",
    "settling_time",
    "simulate_step",
    "simulate_piecewise",
    "simulate_swing_coi",
    "simulate_aggregate_swing",
    "component_aggregate",
    "component_coefficients",
]

REGIME_TOL = 1e-9


class Regime(str, Enum):
    UNDER = "under"
    CRITICAL = "critical"
    OVER = "over"


@dataclass(frozen=True)
class SfrAggregate:
    H_a: float
    D: float
    inv_R_a: float
    K_a: float
    T_prime: float

    def __post_init__(self):
        vals = (self.H_a, self.D, self.inv_R_a, self.K_a, self.T_prime)
        if not all(math.isfinite(v) for v in vals):
            raise ValueError("SFR parameters must be finite")
        if self.H_a <= 0 or self.T_prime <= 0:
            raise ValueError("H_a and T_prime must be positive")
        if self.inv_R_a <= 0:
            raise ValueError("aggregate droop gain 1/R_a must be positive")
        if self.D < 0:
            raise ValueError("damping D must be nonnegative")
        if self.T_prime - self.K_a / self.inv_R_a <= 0:
            raise ValueError("nadir radicand T' - K_a R_a must be positive")

    @property
    def beta(self) -> float:
        """Steady-state deviation per unit step."""
        return 1.0 / (self.D + self.inv_R_a)


@dataclass(frozen=True)
class SfrShape:
    omega_n: float
    xi: float
    omega_r: float  # nan unless under-damped
    regime: Regime


@dataclass(frozen=True)
class FrequencyMetrics:
    d_omega_ss_unit: float
    d_omega_nadir_unit: float
    t_nadir: float | None
    phi: float | None


@dataclass(frozen=True)
class StepTrajectory:
    t: np.ndarray
    d_omega: np.ndarray
    extremum: float
    t_extremum: float
    interior: bool  # False when the extremum sits on the last sample (monotone response)

    def hz(self, f_nominal: float) -> np.ndarray:
        return self.d_omega * f_nominal


def aggregate(dynamics: Sequence[VscDynamics], D: float) -> SfrAggregate:
    """Center-of-inertia aggregate; D is carried over unchanged."""
    dyn = list(dynamics)
    if not dyn:
        raise ValueError("cannot aggregate an empty set of microgrids")
    t_prime = dyn[0].T_prime
    if any(abs(d.T_prime - t_prime) > 1e-12 * max(1.0, t_prime) for d in dyn):
        raise ValueError("all microgrids must share the same T_prime")
    return SfrAggregate(
        H_a=math.fsum(d.H for d in dyn),
        D=float(D),
        inv_R_a=math.fsum(1.0 / d.R for d in dyn),
        K_a=math.fsum(d.T / d.R for d in dyn),
        T_prime=t_prime,
    )


def shape(agg: SfrAggregate) -> SfrShape:
    two_ht = 2.0 * agg.H_a * agg.T_prime
    k = agg.D + agg.inv_R_a
    omega_n = math.sqrt(k / two_ht)
    xi = (2.0 * agg.H_a + agg.T_prime * agg.D + agg.K_a) / (2.0 * math.sqrt(two_ht * k))
    if abs(xi - 1.0) <= REGIME_TOL:
        regime = Regime.CRITICAL
    elif xi < 1.0:
        regime = Regime.UNDER
    else:
        regime = Regime.OVER
    omega_r = omega_n * math.sqrt(1.0 - xi * xi) if regime is Regime.UNDER else float("nan")
    return SfrShape(omega_n=omega_n, xi=xi, omega_r=omega_r, regime=regime)


def steady_state(agg: SfrAggregate, dP: float) -> float:
    return dP / (agg.D + agg.inv_R_a)


def _real_poles(sh: SfrShape) -> tuple[float, float]:
    """Decay rates p1 <= p2 of an over-damped shape (poles at -p1, -p2)."""
    root = math.sqrt(sh.xi * sh.xi - 1.0)
    p2 = sh.omega_n * (sh.xi + root)
    # p1 * p2 = w_n^2 avoids cancellation in xi - root
    return sh.omega_n**2 / p2, p2


def nadir(agg: SfrAggregate) -> FrequencyMetrics:
    """Unit-step nadir and steady-state coefficients.

    Under-damped responses use the three-branch nadir time keyed on
    ``xi w_n T'`` against 1.  Critically and over-damped responses equal the
    steady state unless the lead zero at ``-1/T'`` is slower than the
    dominant pole (``xi w_n T' > 1``); that overshoot is evaluated exactly
    from the real-pole step response.
    """
    sh = shape(agg)
    beta = agg.beta
    tp = agg.T_prime
    if sh.regime is Regime.UNDER:
        wn, xi, wr = sh.omega_n, sh.xi, sh.omega_r
        key = xi * wn * tp
        if abs(key - 1.0) <= 1e-12:
            t_n = math.pi / (2.0 * wr)
        elif key < 1.0:
            t_n = (math.pi - math.atan(wr * tp / (1.0 - key))) / wr
        else:
            t_n = math.atan(wr * tp / (key - 1.0)) / wr
        radicand = (tp - agg.K_a / agg.inv_R_a) / (2.0 * agg.H_a / agg.inv_R_a)
        alpha = beta * (1.0 + math.sqrt(radicand) * math.exp(-xi * wn * t_n))
        phi = math.atan2(math.sqrt(1.0 - xi * xi), xi)
        return FrequencyMetrics(beta, alpha, t_n, phi)

    if sh.regime is Regime.CRITICAL:
        wn = sh.omega_n
        if wn * tp > 1.0:
            t_n = tp / (wn * tp - 1.0)
            return FrequencyMetrics(beta, float(step_response(agg, t_n)), t_n, None)
        return FrequencyMetrics(beta, beta, None, None)

    p1, p2 = _real_poles(sh)
    if tp * p1 > 1.0:
        t_n = math.log((tp * p2 - 1.0) / (tp * p1 - 1.0)) / (p2 - p1)
        return FrequencyMetrics(beta, float(step_response(agg, t_n)), t_n, None)
    return FrequencyMetrics(beta, beta, None, None)


def step_response(agg: SfrAggregate, t, dP: float = 1.0):
    """Closed-form response to a step of height ``dP`` at t = 0."""
    t = np.asarray(t, dtype=float)
    sh = shape(agg)
    tp = agg.T_prime
    c = 1.0 / (2.0 * agg.H_a * tp)
    if sh.regime is Regime.UNDER:
        wn, xi, wr = sh.omega_n, sh.xi, sh.omega_r
        phi = math.atan2(math.sqrt(1.0 - xi * xi), xi)
        y = c * (1.0 / wn**2 + np.exp(-xi * wn * t) / wr * (tp * np.sin(wr * t) - np.sin(wr * t + phi) / wn))
    elif sh.regime is Regime.CRITICAL:
        wn = sh.omega_n
        e = np.exp(-wn * t)
        y = c * (1.0 / wn**2 - e / wn**2 - (1.0 - tp * wn) * t * e / wn)
    else:
        p1, p2 = _real_poles(sh)
        y = c * (
            1.0 / (p1 * p2)
            + (1.0 - tp * p1) * np.exp(-p1 * t) / (p1 * (p1 - p2))
            + (1.0 - tp * p2) * np.exp(-p2 * t) / (p2 * (p2 - p1))
        )
    return dP * y


def settling_time(agg: SfrAggregate, n: float = 10.0) -> float:
    """``n`` time constants of the slowest pole."""
    sh = shape(agg)
    if sh.regime is Regime.OVER:
        rate = _real_poles(sh)[0]
    else:
        rate = sh.xi * sh.omega_n
    return n / rate


# ---------------------------------------------------------------------------
# time-domain oracle


def _state_matrices(agg: SfrAggregate) -> tuple[np.ndarray, np.ndarray]:
    """Block-diagram realization: states (d_omega, lag state of the lead-lag)."""
    h2 = 2.0 * agg.H_a
    tp = agg.T_prime
    lead = agg.K_a / tp
    a = np.array(
        [
            [-(agg.D + lead) / h2, -1.0 / h2],
            [(agg.inv_R_a - lead) / tp, -1.0 / tp],
        ]
    )
    b = np.array([1.0 / h2, 0.0])
    return a, b


def _rk4_map(a: np.ndarray, b: np.ndarray, u: float, h: float) -> tuple[np.ndarray, np.ndarray]:
    """Exact one-step map of classical RK4 for x' = A x + b u with constant u."""
    ha = h * a
    eye = np.eye(len(a))
    ha2 = ha @ ha
    ha3 = ha2 @ ha
    phi = eye + ha + ha2 / 2.0 + ha3 / 6.0 + ha3 @ ha / 24.0
    gam = h * (eye + ha / 2.0 + ha2 / 6.0 + ha3 / 24.0) @ b * u
    return phi, gam


def _iterate_affine(phi: np.ndarray, gam: np.ndarray, x0: np.ndarray, n: int, block: int = 512) -> np.ndarray:
    """States x_0..x_n of x_{k+1} = phi x_k + gam, computed block-wise."""
    dim = len(x0)
    out = np.empty((n + 1, dim))
    out[0] = x0
    if n == 0:
        return out
    m = min(block, n)
    powers = np.empty((m + 1, dim, dim))
    offsets = np.empty((m + 1, dim))
    powers[0] = np.eye(dim)
    offsets[0] = 0.0
    for j in range(1, m + 1):
        powers[j] = phi @ powers[j - 1]
        offsets[j] = phi @ offsets[j - 1] + gam
    k = 0
    while k < n:
        step = min(m, n - k)
        xs = out[k]
        out[k + 1 : k + step + 1] = np.einsum("jab,b->ja", powers[1 : step + 1], xs) + offsets[1 : step + 1]
        k += step
    return out


def _extremum(t: np.ndarray, y: np.ndarray, sign: float) -> tuple[float, float, bool]:
    if sign == 0 or len(y) < 3:
        i = len(y) - 1
        return float(y[i]), float(t[i]), False
    idx = int(np.argmax(sign * y))
    if idx == 0 or idx == len(y) - 1:
        return float(y[idx]), float(t[idx]), False
    ya, yb, yc = y[idx - 1], y[idx], y[idx + 1]
    denom = ya - 2.0 * yb + yc
    if denom == 0.0:
        return float(yb), float(t[idx]), True
    delta = 0.5 * (ya - yc) / denom
    value = yb - 0.25 * (ya - yc) * delta
    dt = t[idx + 1] - t[idx]
    return float(value), float(t[idx] + delta * dt), True


def simulate_step(agg: SfrAggregate, dP: float, t_end: float, dt: float) -> StepTrajectory:
    """Fixed-step RK4 response of the aggregate SFR to a step of height ``dP``."""
    return simulate_piecewise(agg, [(0.0, dP)], t_end, dt)


def simulate_piecewise(
    agg: SfrAggregate,
    segments: Sequence[tuple[float, float]],
    t_end: float,
    dt: float,
    x0: Sequence[float] | None = None,
) -> StepTrajectory:
    """RK4 response to a piecewise-constant disturbance.

    ``segments`` is a list of ``(t_start, dP)`` with increasing start times
    snapped to the step grid; the first must start at 0.  State is continuous
    across changes.
    """
    if not (dt > 0 and math.isfinite(dt)) or not (t_end >= 0 and math.isfinite(t_end)):
        raise ValueError("dt must be positive and t_end finite and nonnegative")
    if not segments or segments[0][0] != 0.0:
        raise ValueError("first segment must start at t = 0")
    if not all(math.isfinite(u) for _, u in segments):
        raise ValueError("non-finite disturbance")
    n = int(round(t_end / dt))
    a, b = _state_matrices(agg)
    x = np.zeros(2) if x0 is None else np.asarray(x0, dtype=float)
    starts = [int(round(ts / dt)) for ts, _ in segments] + [n]
    pieces = []
    for i, (_, u) in enumerate(segments):
        k0, k1 = min(starts[i], n), min(max(starts[i + 1], starts[i]), n)
        if k1 <= k0 and i < len(segments) - 1:
            continue
        phi, gam = _rk4_map(a, b, u, dt)
        xs = _iterate_affine(phi, gam, x, k1 - k0)
        pieces.append(xs if not pieces else xs[1:])
        x = xs[-1]
    states = np.concatenate(pieces) if pieces else np.zeros((1, 2))
    y = states[:, 0]
    t = np.arange(len(y)) * dt
    sign = math.copysign(1.0, segments[0][1]) if segments[0][1] != 0 else 0.0
    ext, t_ext, interior = _extremum(t, y, sign)
    return StepTrajectory(t=t, d_omega=y, extremum=ext, t_extremum=t_ext, interior=interior)


def simulate_swing_coi(
    H: Sequence[float], times: Sequence[float], inputs: np.ndarray, t_end: float, dt: float
) -> tuple[np.ndarray, np.ndarray]:
    """Integrate each microgrid's swing equation and return the COI deviation.

    ``inputs[k, m]`` is the net power (mechanical minus electrical) of
    microgrid m from ``times[k]`` until the next breakpoint.
    """
    H = np.asarray(H, dtype=float)
    n = int(round(t_end / dt))
    w = np.zeros(len(H))
    coi = np.empty(n + 1)
    coi[0] = 0.0
    idx = np.searchsorted(np.asarray(times), np.arange(n) * dt, side="right") - 1
    for k in range(n):
        u = inputs[idx[k]]

        def f(_w):
            return u / (2.0 * H)

        k1 = f(w)
        k2 = f(w + 0.5 * dt * k1)
        k3 = f(w + 0.5 * dt * k2)
        k4 = f(w + dt * k3)
        w = w + dt / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)
        coi[k + 1] = np.dot(H, w) / H.sum()
    return np.arange(n + 1) * dt, coi


def simulate_aggregate_swing(
    H_a: float, times: Sequence[float], inputs: Sequence[float], t_end: float, dt: float
) -> tuple[np.ndarray, np.ndarray]:
    """Single equivalent swing equation driven by the summed input."""
    n = int(round(t_end / dt))
    w = 0.0
    out = np.empty(n + 1)
    out[0] = 0.0
    idx = np.searchsorted(np.asarray(times), np.arange(n) * dt, side="right") - 1
    for k in range(n):
        u = inputs[idx[k]]
        slope = u / (2.0 * H_a)
        w = w + dt / 6.0 * (slope + 2 * slope + 2 * slope + slope)
        out[k + 1] = w
    return np.arange(n + 1) * dt, out


def component_aggregate(case: NetworkCase, nodes: Iterable[str]) -> SfrAggregate:
    s = set(nodes)
    if not s:
        raise ValueError("component must be nonempty")
    dyn = [m.dynamics for m in case.microgrids if m.id in s]
    if len(dyn) != len(s):
        raise KeyError(f"unknown microgrid ids: {sorted(s - set(case.mg_ids))}")
    return aggregate(dyn, case.damping)


def component_coefficients(case: NetworkCase, nodes: Iterable[str]) -> tuple[float, float]:
    """(nadir, steady-state) unit-step coefficients of the component ``nodes``."""
    m = nadir(component_aggregate(case, nodes))
    return m.d_omega_nadir_unit, m.d_omega_ss_unit
