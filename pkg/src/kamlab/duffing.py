"""Forced Duffing oscillator x'' + x^3 = f(t) in action-angle variables.

The unforced solution (C, S) with C' = S, S' = -C^3, (C, S)(0) = (1, 0)
gives the chart x = c^(1/3) rho^(1/3) C(theta T), y = c^(2/3) rho^(2/3) S(theta T)
with T the minimal period and c = 3/T. Swapping the roles of t and theta turns
the forced system into a 1-periodic system in theta whose period map is the
Poincare map studied here.
"""

from __future__ import annotations

import json
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from functools import lru_cache
from pathlib import Path
from typing import Sequence

import numba
import numpy as np
from scipy.integrate import solve_ivp
from scipy.interpolate import CubicHermiteSpline

CHART_VERSION = 1


class IntegrationError(RuntimeError):
    pass


class DenominatorSignLoss(IntegrationError):
    pass


class FloorBreach(IntegrationError):
    pass


class OriginInput(ValueError):
    pass


class EmptyBand(ValueError):
    pass


# forcing

@dataclass(frozen=True)
class DuffingForcing:
    """f(t) = sum_j Re(a_j exp(i <k_j, omega> t)) over a finite harmonic list."""

    omega: tuple[float, ...]
    ks: tuple[tuple[int, ...], ...]
    amplitudes: tuple[complex, ...]

    def __post_init__(self):
        if len(self.ks) != len(self.amplitudes):
            raise ValueError("one amplitude per harmonic")
        for k in self.ks:
            if len(k) != len(self.omega):
                raise ValueError("harmonic index length must match omega")

    @classmethod
    def cosines(cls, amplitude: float, omega: Sequence[float]) -> "DuffingForcing":
        """amplitude * sum_i cos(omega_i t)."""
        n = len(omega)
        ks = tuple(tuple(int(i == j) for j in range(n)) for i in range(n))
        return cls(tuple(float(w) for w in omega), ks, tuple(complex(amplitude) for _ in range(n)))

    @classmethod
    def zero(cls, omega: Sequence[float] = (1.0,)) -> "DuffingForcing":
        return cls(tuple(float(w) for w in omega), (), ())

    @property
    def frequencies(self) -> np.ndarray:
        if not self.ks:
            return np.zeros(0)
        return np.asarray(self.ks, dtype=float) @ np.asarray(self.omega, dtype=float)

    @property
    def sup_bound(self) -> float:
        return float(sum(abs(a) for a in self.amplitudes))

    def _arrays(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        a = np.asarray(self.amplitudes, dtype=complex)
        return self.frequencies, a.real.copy(), a.imag.copy()

    def __call__(self, t, phase: np.ndarray | None = None) -> np.ndarray:
        """f(t); with ``phase`` (shape (P, n)) the shifted shell value F(phase + omega t)."""
        t = np.asarray(t, dtype=float)
        if not self.ks:
            return np.zeros(np.broadcast(t, np.zeros(len(phase)) if phase is not None else t).shape)
        nu, re, im = self._arrays()
        arg = t[..., None] * nu
        if phase is not None:
            arg = arg + np.asarray(phase, dtype=float) @ np.asarray(self.ks, dtype=float).T
        return np.cos(arg) @ re - np.sin(arg) @ im

    def to_dict(self) -> dict:
        return {"omega": list(self.omega), "harmonics": [
            {"k": list(k), "re": a.real, "im": a.imag} for k, a in zip(self.ks, self.amplitudes)]}

    @classmethod
    def from_dict(cls, d: dict) -> "DuffingForcing":
        hs = d.get("harmonics", [])
        return cls(tuple(float(w) for w in d["omega"]), tuple(tuple(int(v) for v in h["k"]) for h in hs),
                   tuple(complex(h["re"], h.get("im", 0.0)) for h in hs))


# chart

@dataclass(frozen=True)
class ActionAngleChart:
    """Tabulated (C, S) on a quarter period; the rest follows from the symmetries."""

    T_star: float
    nodes: np.ndarray
    C_tab: np.ndarray
    S_tab: np.ndarray

    @property
    def c(self) -> float:
        return 3.0 / self.T_star

    @property
    def d(self) -> float:
        return self.c ** (4.0 / 3.0) / 4.0

    @property
    def twist_coefficient(self) -> float:
        return 3.0 / (4.0 * self.d)

    @property
    def _splines(self):
        cache = self.__dict__.get("_spl")
        if cache is None:
            cs = CubicHermiteSpline(self.nodes, self.C_tab, self.S_tab)
            ss = CubicHermiteSpline(self.nodes, self.S_tab, -self.C_tab ** 3)
            cache = (cs, ss)
            object.__setattr__(self, "_spl", cache)
        return cache

    def cs(self, t) -> tuple[np.ndarray, np.ndarray]:
        """(C(t), S(t)) for arbitrary real t."""
        T = self.T_star
        half, quarter = T / 2, T / 4
        u = np.mod(np.asarray(t, dtype=float), T)
        sgn_c = np.ones_like(u)
        sgn_s = np.ones_like(u)
        upper = u > half
        u = np.where(upper, u - half, u)
        sgn_c = np.where(upper, -sgn_c, sgn_c)
        sgn_s = np.where(upper, -sgn_s, sgn_s)
        mirror = u > quarter
        u = np.where(mirror, half - u, u)
        sgn_c = np.where(mirror, -sgn_c, sgn_c)
        u = np.clip(u, 0.0, quarter)
        cs, ss = self._splines
        return sgn_c * cs(u), sgn_s * ss(u)

    def invariant_residual(self, samples: int = 20001) -> float:
        t = np.linspace(0.0, self.T_star, samples)
        C, S = self.cs(t)
        return float(np.max(np.abs(2 * S ** 2 + C ** 4 - 1)))

    def derivative_residual(self, samples: int = 2001) -> float:
        """max |C' - S| + |S' + C^3| using the spline derivatives on the quarter period."""
        u = np.linspace(0.0, self.T_star / 4, samples)
        cs, ss = self._splines
        return float(np.max(np.abs(cs(u, 1) - ss(u)) + np.abs(ss(u, 1) + cs(u) ** 3)))

    def quarter_phase(self, X: np.ndarray, Y: np.ndarray) -> np.ndarray:
        """u in [0, T/4] with C(u) = X >= 0 and S(u) = -Y, Y >= 0 (X^4 + 2Y^2 = 1)."""
        cs, ss = self._splines
        # C decreases and -S increases along the quarter; pick the better-conditioned one
        use_c = Y >= X ** 3
        u = np.where(use_c, np.interp(X, self.C_tab[::-1], self.nodes[::-1]),
                     np.interp(Y, -self.S_tab, self.nodes))
        for _ in range(6):
            Cu, Su = cs(u), ss(u)
            step = np.where(use_c, (Cu - X) / np.where(Su == 0, -1.0, Su), (Su + Y) / -(Cu ** 3))
            u = np.clip(u - step, 0.0, self.T_star / 4)
        return u

    def to_json(self) -> str:
        return json.dumps({"version": CHART_VERSION, "T_star": self.T_star, "nodes": self.nodes.tolist(),
                           "C": self.C_tab.tolist(), "S": self.S_tab.tolist()})

    @classmethod
    def from_json(cls, text: str) -> "ActionAngleChart":
        d = json.loads(text)
        if d.get("version") != CHART_VERSION:
            raise ValueError("chart cache version mismatch")
        return cls(float(d["T_star"]), np.asarray(d["nodes"]), np.asarray(d["C"]), np.asarray(d["S"]))


def _cs_rhs(t, z):
    return [z[1], -z[0] ** 3]


def integrate_cs(resolution: int = 2 ** 14, rtol: float = 1e-13) -> ActionAngleChart:
    """Integrate C' = S, S' = -C^3 from (1, 0) to the first zero of C (a quarter period)."""
    event = lambda t, z: z[0]
    event.terminal = True
    event.direction = -1
    sol = solve_ivp(_cs_rhs, (0.0, 10.0), [1.0, 0.0], method="DOP853", rtol=rtol, atol=1e-16,
                    events=event)
    if sol.status != 1 or not len(sol.t_events[0]):
        raise IntegrationError("quarter period not found")
    quarter = float(sol.t_events[0][0])
    nodes = np.linspace(0.0, quarter, resolution + 1)
    tab = solve_ivp(_cs_rhs, (0.0, quarter), [1.0, 0.0], method="DOP853", rtol=rtol, atol=1e-16,
                    t_eval=nodes)
    if not tab.success:
        raise IntegrationError(tab.message)
    C, S = tab.y
    C[-1] = 0.0
    S[-1] = -math.sqrt(0.5)
    chart = ActionAngleChart(4 * quarter, nodes, C, S)
    if chart.invariant_residual() > 1e-10:
        raise IntegrationError("chart invariant 2S^2 + C^4 = 1 not met to 1e-10")
    return chart


@lru_cache(maxsize=1)
def default_chart() -> ActionAngleChart:
    """Process-wide chart, read from $KAMLAB_CACHE/chart-v<version>.json when present."""
    root = os.environ.get("KAMLAB_CACHE")
    path = Path(root) / f"chart-v{CHART_VERSION}.json" if root else None
    if path is not None and path.exists():
        return ActionAngleChart.from_json(path.read_text())
    chart = integrate_cs()
    if path is not None:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(chart.to_json())
    return chart


def quadrature_period() -> float:
    """4 sqrt(2) int_0^1 dx / sqrt(1 - x^4), computed by adaptive quadrature."""
    from scipy.integrate import quad

    # 1 - x^4 = (1 - x)(1 + x)(1 + x^2); the endpoint singularity goes into the weight
    val, _ = quad(lambda x: 1.0 / math.sqrt((1 + x) * (1 + x * x)), 0.0, 1.0, weight="alg",
                  wvar=(0.0, -0.5), epsabs=0.0, epsrel=1e-13)
    return 4 * math.sqrt(2) * val


# action-angle map

@dataclass(frozen=True)
class PolarState:
    theta: float
    rho: float
    t: float


def from_action_angle(theta, rho, chart: ActionAngleChart | None = None):
    chart = chart or default_chart()
    rho = np.asarray(rho, dtype=float)
    if np.any(rho <= 0):
        raise OriginInput("rho must be positive")
    C, S = chart.cs(np.asarray(theta, dtype=float) * chart.T_star)
    c = chart.c
    return np.cbrt(c * rho) * C, np.cbrt(c * rho) ** 2 * S


def to_action_angle(x, y, chart: ActionAngleChart | None = None):
    chart = chart or default_chart()
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if np.any((x == 0) & (y == 0)):
        raise OriginInput("the origin has no action-angle coordinates")
    energy = 0.5 * y ** 2 + 0.25 * x ** 4
    rho = (energy / chart.d) ** 0.75
    scale = np.cbrt(chart.c * rho)
    X = x / scale
    Y = y / scale ** 2
    T = chart.T_star
    u = chart.quarter_phase(np.abs(X), np.abs(Y))
    # quadrants of the orbit: S <= 0 on [0, T/2], C >= 0 on [0, T/4] and [3T/4, T]
    phase = np.where(Y <= 0, np.where(X >= 0, u, T / 2 - u), np.where(X <= 0, T / 2 + u, T - u))
    return np.mod(phase / T, 1.0), rho


def energy(x, y):
    return 0.5 * np.asarray(y) ** 2 + 0.25 * np.asarray(x) ** 4


def rho_star(forcing: DuffingForcing, chart: ActionAngleChart | None = None) -> float:
    """Smallest rho whose swapped-time denominator keeps half its unforced value."""
    chart = chart or default_chart()
    return chart.c ** (1 / 3) * forcing.sup_bound / (2 * chart.d)


def _denominator(rho, C, f, chart):
    return 4 / 3 * chart.d * np.cbrt(rho) - chart.c ** (1 / 3) * C * f / (3 * np.cbrt(rho) ** 2)


# swapped-time flow

def flow_g5(theta0, rho0, t0, forcing: DuffingForcing, theta_span: float = 1.0,
            chart: ActionAngleChart | None = None, rtol: float = 1e-12, atol: float = 1e-14,
            phase: np.ndarray | None = None, floor: float | None = None):
    """Integrate dt/dtheta and drho/dtheta over ``theta_span``; vectorized over states.

    Time is carried as the offset tau = t - t0 and the action as rho - rho0,
    so the tolerances act on the increments. ``phase`` (shape (P, n)) replaces
    f(t) by the shell value F(phase + omega tau).
    Returns (theta1, rho1, t1) arrays.
    """
    chart = chart or default_chart()
    th0, r0, t00 = np.broadcast_arrays(*(np.atleast_1d(np.asarray(v, dtype=float)) for v in (theta0, rho0, t0)))
    P = th0.size
    floor = rho_star(forcing, chart) if floor is None else floor
    if np.any(r0 <= floor):
        raise FloorBreach("initial action below the admissibility floor")
    T, c13 = chart.T_star, chart.c ** (1 / 3)

    def rhs(s, z):
        tau, dr = z[:P], z[P:]
        rho = r0 + dr
        if np.any(rho <= floor):
            raise FloorBreach("action fell below the admissibility floor")
        C, S = chart.cs((th0 + s) * T)
        f = forcing(t00 + tau) if phase is None else forcing(tau, phase)
        den = _denominator(rho, C, f, chart)
        if np.any(den <= 0):
            raise DenominatorSignLoss("dt/dtheta lost its sign")
        return np.concatenate([1 / den, c13 * T * np.cbrt(rho) * S * f / den])

    sol = solve_ivp(rhs, (0.0, theta_span), np.zeros(2 * P), method="DOP853", rtol=rtol, atol=atol)
    if not sol.success:
        raise IntegrationError(sol.message)
    tau, dr = sol.y[:P, -1], sol.y[P:, -1]
    return th0 + theta_span, r0 + dr, t00 + tau


def poincare(state: PolarState, forcing: DuffingForcing, chart: ActionAngleChart | None = None,
             **kw) -> PolarState:
    th, r, t = flow_g5(state.theta, state.rho, state.t, forcing, 1.0, chart, **kw)
    return PolarState(float(th[0] % 1.0), float(r[0]), float(t[0]))


def poincare_map(t0, rho0, forcing: DuffingForcing, theta0: float = 0.0,
                 chart: ActionAngleChart | None = None, **kw):
    """(t1, rho1) of the period map at fixed angle section, vectorized over states."""
    _, r, t = flow_g5(theta0, rho0, t0, forcing, 1.0, chart, **kw)
    return t, r


@dataclass
class PoincareJacobian:
    matrix: np.ndarray
    det: float
    area_det: float


def poincare_jacobian(t0: float, rho0: float, forcing: DuffingForcing, chart: ActionAngleChart | None = None,
                      t_step: float = 1e-4, rho_rel_step: float = 1e-4) -> PoincareJacobian:
    """Central-difference Jacobian of (t0, rho0) -> (t1, rho1) at the section theta = 0.

    ``det`` is taken in (t, rho). The map preserves D(t, rho) drho ^ dt with
    D the swapped-time denominator, so ``area_det`` = det * D(t1, rho1) / D(t0, rho0)
    is the determinant in those area coordinates.
    """
    chart = chart or default_chart()
    hr = rho_rel_step * rho0
    ts = np.array([t0 + t_step, t0 - t_step, t0, t0])
    rs = np.array([rho0, rho0, rho0 + hr, rho0 - hr])
    t1, r1 = poincare_map(ts, rs, forcing, chart=chart)
    J = np.array([[(t1[0] - t1[1]) / (2 * t_step), (t1[2] - t1[3]) / (2 * hr)],
                  [(r1[0] - r1[1]) / (2 * t_step), (r1[2] - r1[3]) / (2 * hr)]])
    det = float(np.linalg.det(J))
    tc, rc = poincare_map(t0, rho0, forcing, chart=chart)
    d0 = _denominator(rho0, 1.0, forcing(t0), chart)
    d1 = _denominator(rc[0], 1.0, forcing(tc[0]), chart)
    return PoincareJacobian(J, det, float(det * d1 / d0))


# twist expansion

@dataclass
class TwistFit:
    coefficient: float
    exponent: float
    remainder_exponent: float
    reference: float

    @property
    def relative_error(self) -> float:
        return abs(self.coefficient - self.reference) / self.reference


def twist_fit(forcing: DuffingForcing, rho_grid: Sequence[float], t0: Sequence[float] | float = 0.0,
              chart: ActionAngleChart | None = None) -> TwistFit:
    """Fit t1 - t0 = a rho0^(-1/3) + remainder over the grid (averaged over the t0 samples)."""
    chart = chart or default_chart()
    rho = np.asarray(rho_grid, dtype=float)
    if rho.size < 3 or rho.max() / rho.min() < 100:
        raise ValueError("the action grid must span at least two decades")
    t0s = np.atleast_1d(np.asarray(t0, dtype=float))
    R, T0 = np.meshgrid(rho, t0s)
    t1, _ = poincare_map(T0.ravel(), R.ravel(), forcing, chart=chart)
    dt = (t1 - T0.ravel()).reshape(T0.shape).mean(axis=0)
    lr = np.log(rho)
    exponent = float(np.polyfit(lr, np.log(dt), 1)[0])
    basis = np.stack([rho ** (-1 / 3), rho ** (-4 / 3)], axis=1)
    a = float(np.linalg.lstsq(basis, dt, rcond=None)[0][0])
    rem = np.abs(dt - chart.twist_coefficient * rho ** (-1 / 3))
    good = rem > 1e-13 * dt
    rem_exp = float(np.polyfit(lr[good], np.log(rem[good]), 1)[0]) if good.sum() >= 2 else math.nan
    return TwistFit(a, exponent, rem_exp, chart.twist_coefficient)


# small-twist variables

def rescale_mu(rho, delta: float, chart: ActionAngleChart | None = None):
    """mu with delta mu = (3/(4d)) rho^(-1/3)."""
    chart = chart or default_chart()
    return chart.twist_coefficient * np.cbrt(np.asarray(rho, dtype=float)) ** -1 / delta


def rho_from_mu(mu, delta: float, chart: ActionAngleChart | None = None):
    chart = chart or default_chart()
    return (chart.twist_coefficient / (delta * np.asarray(mu, dtype=float))) ** 3


def band_delta(rho_lo: float, rho_hi: float, chart: ActionAngleChart | None = None) -> float:
    """delta that maps rho_lo to mu = 2; [rho_lo, rho_hi] then lies in mu in [1, 2]."""
    if not 0 < rho_lo < rho_hi:
        raise EmptyBand("the action band is empty")
    if rho_hi > 8 * rho_lo:
        raise EmptyBand("an action band wider than a factor 8 does not fit into mu in [1, 2]")
    chart = chart or default_chart()
    return chart.twist_coefficient * rho_lo ** (-1 / 3) / 2


def ptilde(t0, mu0, delta: float, forcing: DuffingForcing, chart: ActionAngleChart | None = None,
           phase: np.ndarray | None = None, **kw):
    """Period map in (t, mu); returns (t1, mu1, f1, f2) with t1 = t0 + delta mu0 + delta f1,
    mu1 = mu0 + delta f2."""
    chart = chart or default_chart()
    t0 = np.asarray(t0, dtype=float)
    mu0 = np.asarray(mu0, dtype=float)
    rho0 = rho_from_mu(mu0, delta, chart)
    _, r1, t1 = flow_g5(0.0, rho0, t0, forcing, 1.0, chart, phase=phase, **kw)
    mu1 = rescale_mu(r1, delta, chart)
    t1 = t1.reshape(np.broadcast(t0, mu0).shape)
    mu1 = mu1.reshape(t1.shape)
    return t1, mu1, (t1 - t0 - delta * mu0) / delta, (mu1 - mu0) / delta


def ptilde_remainders(forcing: DuffingForcing, deltas: Sequence[float], samples: int = 64,
                      seed: int = 0, chart: ActionAngleChart | None = None) -> list[tuple[float, float, float]]:
    """(delta, sup |f1|, sup |f2|) over random (t0, mu0) with mu0 in [1, 2]."""
    rng = np.random.default_rng(seed)
    t0 = rng.uniform(0, 100, samples)
    mu0 = rng.uniform(1, 2, samples)
    out = []
    for d in deltas:
        _, _, f1, f2 = ptilde(t0, mu0, d, forcing, chart)
        out.append((float(d), float(np.max(np.abs(f1))), float(np.max(np.abs(f2)))))
    return out


def ptilde_twist_map(forcing: DuffingForcing, delta: float, kmax: int = 4, deg: int = 4,
                     mu_center: float = 1.5, mu_radius: float = 0.25,
                     chart: ActionAngleChart | None = None):
    """Small-twist TwistMap for the period map: angle t with frequencies omega, action mu.

    x1 = x + delta mu + f, mu1 = mu + g, with f = delta f1 and g = delta f2
    sampled on the collocation grid through the shell forcing.
    """
    from .fourier import ShellSeries, collocation, from_samples
    from .kam import TwistMap

    chart = chart or default_chart()
    proto = ShellSeries(forcing.omega, mu_center, kmax, deg)
    theta, mu = collocation(proto, mu_radius)
    _, _, f1, f2 = ptilde(np.zeros(mu.size), mu.reshape(-1), delta, forcing, chart,
                          phase=theta.reshape(-1, proto.n))
    f = from_samples((delta * f1).reshape(mu.shape), proto, mu_radius)
    g = from_samples((delta * f2).reshape(mu.shape), proto, mu_radius)
    return TwistMap(f, g, form="small-twist", delta=delta)


# Cartesian oracle

def cartesian_flow(x0, y0, t0: float, t1: float, forcing: DuffingForcing, rtol: float = 1e-13,
                   atol: float = 1e-13):
    sol = solve_ivp(lambda t, z: [z[1], -z[0] ** 3 + forcing(t)], (t0, t1), [x0, y0],
                    method="DOP853", rtol=rtol, atol=atol)
    if not sol.success:
        raise IntegrationError(sol.message)
    return sol.y[0, -1], sol.y[1, -1]


# boundedness

_Y6 = (0.784513610477560, 0.235573213359357, -1.17767998417887)
_Y6_W0 = 1.0 - 2.0 * sum(_Y6)
_Y6_SEQ = np.array([_Y6[0], _Y6[1], _Y6[2], _Y6_W0, _Y6[2], _Y6[1], _Y6[0]])


@numba.njit(cache=True, nogil=True)
def _force(t, nu, re, im):
    s = 0.0
    for j in range(nu.size):
        s += re[j] * math.cos(nu[j] * t) - im[j] * math.sin(nu[j] * t)
    return s


@numba.njit(cache=True, nogil=True)
def _yoshida_orbit(x, y, t, h, n_steps, nu, re, im, seq):
    """Sixth-order symplectic splitting in extended phase space; returns final state and sup energy."""
    e_sup = 0.5 * y * y + 0.25 * x ** 4
    for _ in range(n_steps):
        for w in seq:
            hw = h * w
            x += 0.5 * hw * y
            t += 0.5 * hw
            y -= hw * (x ** 3 - _force(t, nu, re, im))
            x += 0.5 * hw * y
            t += 0.5 * hw
        e = 0.5 * y * y + 0.25 * x ** 4
        if e > e_sup:
            e_sup = e
    return x, y, t, e_sup


@dataclass
class OrbitStats:
    index: int
    initial_energy: float
    sup_energy: float
    final_energy: float
    bounded: bool
    step: float
    error: str = ""

    @property
    def ratio(self) -> float:
        return self.sup_energy / self.initial_energy


def orbit_step(initial_energy: float, cap: float = 10.0, resolution: float = 0.05) -> float:
    """Step with omega * h ~ ``resolution`` at ``cap`` times the initial energy."""
    amp = (4 * cap * initial_energy) ** 0.25
    return resolution / max(amp, 1.0)


def integrate_orbit(x0: float, y0: float, t0: float, horizon: float, forcing: DuffingForcing,
                    step: float) -> tuple[float, float, float, float]:
    nu, re, im = forcing._arrays()
    n = max(1, int(math.ceil(horizon / step)))
    return _yoshida_orbit(float(x0), float(y0), float(t0), horizon / n, n, nu, re, im, _Y6_SEQ)


def boundedness_experiment(forcing: DuffingForcing, initial: Sequence[tuple[float, float]], horizon: float,
                           cap: float = 10.0, threads: int = 1, resolution: float = 0.05) -> list[OrbitStats]:
    """Per-orbit sup of (1/2)y^2 + (1/4)x^4 over [0, horizon]; orbits run concurrently."""

    def one(i: int) -> OrbitStats:
        x0, y0 = initial[i]
        e0 = float(energy(x0, y0))
        h = orbit_step(e0, cap, resolution)
        try:
            x, y, _, sup = integrate_orbit(x0, y0, 0.0, horizon, forcing, h)
        except Exception as exc:  # reported per orbit
            return OrbitStats(i, e0, math.nan, math.nan, False, h, repr(exc))
        return OrbitStats(i, e0, float(sup), float(energy(x, y)), bool(sup <= cap * e0), h)

    idx = range(len(initial))
    if threads > 1:
        with ThreadPoolExecutor(threads) as pool:
            return list(pool.map(one, idx))
    return [one(i) for i in idx]


def sample_initial_conditions(count: int, energy_range: tuple[float, float], seed: int,
                              chart: ActionAngleChart | None = None) -> list[tuple[float, float]]:
    """Random states with energy uniform in the range and uniform angle."""
    chart = chart or default_chart()
    rng = np.random.default_rng(seed)
    e = rng.uniform(*energy_range, count)
    th = rng.uniform(0.0, 1.0, count)
    x, y = from_action_angle(th, (e / chart.d) ** 0.75, chart)
    return list(zip(x.tolist(), y.tolist()))
