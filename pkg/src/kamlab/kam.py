"""KAM iteration for twist maps with almost periodic (finite-frequency) angle dependence.

A map in standard form reads x1 = x + y + f(x, y), y1 = y + g(x, y). Each
step builds a near-identity change of variables x = xi + u, y = eta + v
from two homological equations, conjugates the map, and measures the new
perturbation in the weighted majorant norm.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field, replace
from fractions import Fraction
from typing import Callable, Sequence

import numpy as np

from .diophantine import ApproximationFunction, DiophantineContext, check_rotation, gamma0
from .fourier import (
    DomainEscape,
    NormParams,
    ShellSeries,
    SpatialWeight,
    chebyshev_nodes,
    collocation,
    compose_inner,
    derivative,
    eval_many,
    from_samples,
    norm,
)

DIVISOR_FLOOR = 1e-13


class KamError(RuntimeError):
    pass


class NonzeroMean(KamError):
    pass


class ResonantDivisor(KamError):
    pass


class NonresonanceViolation(KamError):
    pass


class ThetaRefusal(KamError):
    pass


class PreconditionViolation(KamError):
    def __init__(self, violations: Sequence[str]):
        self.violations = list(violations)
        super().__init__("; ".join(self.violations))


class PicardFailure(KamError):
    pass


class ScheduleError(KamError):
    def __init__(self, violations: Sequence[str]):
        self.violations = list(violations)
        super().__init__("; ".join(self.violations))


class DegenerateTwist(KamError):
    pass


# maps and curves

@dataclass(frozen=True)
class TwistMap:
    """x1 = x + advance(y) + f(x, y), y1 = y + g(x, y).

    ``advance`` is y (standard), delta*y (small-twist) or beta + delta*h(y)
    (shifted), with ``h`` given by ascending polynomial coefficients.
    """

    f: ShellSeries
    g: ShellSeries
    form: str = "standard"
    delta: float = 1.0
    beta: float = 0.0
    h: tuple[float, ...] | None = None

    def __post_init__(self):
        self.f._check(self.g)
        if self.form not in ("standard", "small-twist", "shifted"):
            raise ValueError(f"unknown map form {self.form!r}")
        if self.form == "shifted" and not self.h:
            raise ValueError("shifted form needs the polynomial h")

    @property
    def omega(self) -> np.ndarray:
        return self.f.omega

    def advance(self, y):
        y = np.asarray(y, dtype=float)
        if self.form == "standard":
            return y
        if self.form == "small-twist":
            return self.delta * y
        return self.beta + self.delta * np.polynomial.polynomial.polyval(y, self.h)

    def apply_shell(self, theta: np.ndarray, y: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Angle advance x1 - x and new action at torus points (theta, y)."""
        fv, gv = eval_many([self.f, self.g], theta, y)
        return self.advance(y) + fv, y + gv

    def apply(self, x, y) -> tuple[np.ndarray, np.ndarray]:
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        shape = np.broadcast(x, y).shape
        xx = np.broadcast_to(x, shape).reshape(-1)
        yy = np.broadcast_to(y, shape).reshape(-1)
        dx, y1 = self.apply_shell(xx[:, None] * self.omega, yy)
        return (xx + dx).reshape(shape), y1.reshape(shape)

    def perturbation_norm(self, p: NormParams, w: SpatialWeight = SpatialWeight()) -> float:
        return norm(self.f, p, w) + norm(self.g, p, w)


@dataclass(frozen=True)
class InvariantCurve:
    """x = xi + u(xi), y = v(xi) with the dynamics xi -> xi + alpha on it."""

    u: ShellSeries
    v: ShellSeries
    alpha: float

    def points(self, xi) -> tuple[np.ndarray, np.ndarray]:
        xi = np.asarray(xi, dtype=float)
        return xi + self.u.evaluate(xi), self.v.evaluate(xi)


@dataclass(frozen=True)
class KamTransform:
    u: ShellSeries
    v: ShellSeries
    p: ShellSeries | None = None
    q: ShellSeries | None = None


@dataclass
class StepEstimates:
    eps_in: float
    eps_out: float
    theta: float
    q: float
    bound_rhs: float
    theta_worst: float = math.nan
    bound_rhs_worst: float = math.nan
    amplification: float = 1.0
    transform_size: float = 0.0
    transform_derivative: float = 0.0
    transform_ok: bool = True
    picard_sweeps: int = 0
    conjugacy_defect: float = 0.0


@dataclass(frozen=True)
class KamConstants:
    c4: float = 1.0
    c7: float = 8.0
    picard_max_sweeps: int = 50
    picard_floor: float = 0.0


# homological equation

def solve_homological(h: ShellSeries, alpha: float, ctx: DiophantineContext | None = None,
                      mean_tol: float = 1e-14) -> ShellSeries:
    """Mean-free l with l(x + alpha) - l(x) = h(x) on the truncation."""
    if np.max(np.abs(h.mean()), initial=0.0) > mean_tol:
        raise NonzeroMean("h has nonzero mean; the difference equation is not solvable")
    if ctx is not None:
        rep = check_rotation(alpha, replace(ctx, interval=None))
        if not rep.passed:
            raise NonresonanceViolation(f"rotation condition fails at k={rep.worst_k}, j={rep.worst_j}")
    div = np.exp(1j * h.orbit_frequencies() * alpha) - 1.0
    zero = (h.kmax,) * h.n
    active = np.any(h.coeffs != 0, axis=-1)
    active[zero] = False
    if np.any(np.abs(div[active]) < DIVISOR_FLOOR):
        raise ResonantDivisor("divisor below the hard floor on a nonzero harmonic")
    safe = np.where(active, div, 1.0)
    c = np.where(active[..., None], h.coeffs / safe[..., None], 0.0)
    return h.like(c)


def homological_bound(h: ShellSeries, l: ShellSeries, ctx: DiophantineContext,
                      src: NormParams, tgt: NormParams) -> tuple[float, float]:
    """(||l||_{m',r'}, gamma^-1 Gamma0(r-r') Gamma0(m-m') ||h||_{m,r}) at the common action radius."""
    lhs = norm(l, NormParams(tgt.m, tgt.r, src.s), ctx.weight)
    rhs = (gamma0(ctx.delta, src.r - tgt.r) * gamma0(ctx.delta, src.m - tgt.m)
           * norm(h, src, ctx.weight) / ctx.gamma)
    return lhs, rhs


def _with_mean(s: ShellSeries, mean_poly: np.ndarray) -> ShellSeries:
    c = s.coeffs.copy()
    c[(s.kmax,) * s.n] = mean_poly
    return s.like(c, symmetrize=False)


def build_uv(tmap: TwistMap, alpha: float, ctx: DiophantineContext | None = None) -> KamTransform:
    """[v] = -[f], v~ solves v~(xi+alpha) - v~ = g - [g], u solves u(xi+alpha) - u = p - [p]."""
    if tmap.form != "standard":
        raise ValueError("rescale the map to standard form first")
    f, g = tmap.f, tmap.g
    deg = max(f.deg, g.deg)
    f, g = f.truncate_degree(deg), g.truncate_degree(deg)
    vt = solve_homological(g.without_mean(), alpha, ctx)
    v = _with_mean(vt, -f.mean())
    p = vt + f
    u = solve_homological(p.without_mean(), alpha, ctx)
    return KamTransform(u, v)


def _amplification(h: ShellSeries, l: ShellSeries, src: NormParams, tgt: NormParams,
                   w: SpatialWeight) -> float:
    nh = norm(h, src, w)
    return norm(l, tgt, w) / nh if nh > 0 else 0.0


# push-forward

@dataclass
class PushReport:
    sweeps: int
    last_change: float
    conjugacy_defect: float


def push_forward(tmap: TwistMap, tr: KamTransform, s_out: float, s_in: float | None = None,
                 tol: float = 1e-12, max_sweeps: int = 50) -> tuple[TwistMap, PushReport]:
    """f+, g+ with U o M+ = M o U, solved by Picard sweeps on the collocation grid."""
    f, g, u, v = tmap.f, tmap.g, tr.u, tr.v
    deg = max(f.deg, g.deg, u.deg, v.deg)
    proto = f.like(deg=deg)
    theta, y = collocation(proto, s_out)
    shape = y.shape
    th = theta.reshape(-1, f.n)
    eta = y.reshape(-1).copy()
    om = f.omega
    u0, v0 = eval_many([u, v], th, eta)
    ys = eta + v0
    if s_in is not None and np.max(np.abs(ys - f.alpha)) > s_in:
        raise DomainEscape("transformed domain leaves the source disk")
    fv, gv = eval_many([f, g], th + u0[:, None] * om, ys)
    phi = fv + v0 + u0
    psi = gv + v0
    fp = phi - u0
    gp = psi - v0
    last = math.inf
    for sweep in range(1, max_sweeps + 1):
        xs = th + (eta + fp)[:, None] * om
        uu, vv = eval_many([u, v], xs, eta + gp)
        fn = phi - uu
        gn = psi - vv
        change = max(np.max(np.abs(fn - fp)), np.max(np.abs(gn - gp)))
        fp, gp = fn, gn
        if change <= tol:
            break
        if sweep > 1 and change >= last:
            # stagnation: accept only at the rounding level of the iterates
            scale = max(np.max(np.abs(fp)), np.max(np.abs(gp)), np.max(np.abs(phi)))
            if change <= 64 * np.finfo(float).eps * max(scale, 1e-300):
                break
            raise PicardFailure(f"Picard sweeps stopped contracting at change {change:.3g}")
        last = change
    else:
        raise PicardFailure(f"no convergence in {max_sweeps} sweeps (change {change:.3g})")
    fplus = from_samples(fp.reshape(shape), proto, s_out)
    gplus = from_samples(gp.reshape(shape), proto, s_out)
    new = TwistMap(fplus, gplus)
    defect = conjugacy_defect(tmap, tr, new, s_out)
    return new, PushReport(sweep, float(change), defect)


def conjugacy_defect(tmap: TwistMap, tr: KamTransform, new: TwistMap, s: float) -> float:
    """sup over the collocation grid of |U(M+(xi,eta)) - M(U(xi,eta))|."""
    theta, y = collocation(new.f.like(deg=max(new.f.deg, tr.u.deg)), s)
    th = theta.reshape(-1, new.f.n)
    eta = y.reshape(-1)
    om = new.omega
    u0, v0 = eval_many([tr.u, tr.v], th, eta)
    dx, y1 = tmap.apply_shell(th + u0[:, None] * om, eta + v0)
    lhs_x = u0 + dx
    fp, gp = eval_many([new.f, new.g], th, eta)
    xi1 = eta + fp
    uu, vv = eval_many([tr.u, tr.v], th + xi1[:, None] * om, eta + gp)
    rhs_x = xi1 + uu
    rhs_y = eta + gp + vv
    return float(max(np.max(np.abs(lhs_x - rhs_x)), np.max(np.abs(y1 - rhs_y))))


# one step

def c24_violations(p: NormParams, q: NormParams) -> list[str]:
    out = []
    if not 0 < q.m < p.m < 1:
        out.append("(c24) requires 0 < m+ < m < 1")
    if not 0 < q.r < p.r < 1:
        out.append("(c24) requires 0 < r+ < r < 1")
    if not 0 < 3 * q.s < p.s:
        out.append("(c24) requires 0 < 3 s+ < s")
    if not p.s < (p.r - q.r) / 4:
        out.append("(c24) requires s < (r - r+)/4")
    return out


def theta_worst_case(eps: float, p: NormParams, q: NormParams, ctx: DiophantineContext,
                     c4: float = 1.0) -> float:
    g_r = gamma0(ctx.delta, (p.r - q.r) / 10)
    g_m = gamma0(ctx.delta, (p.m - q.m) / 10)
    return c4 * g_r ** 2 * g_m ** 2 * eps / p.s


@dataclass
class GateReport:
    eps: float
    theta: float
    theta_worst: float
    amplification: float
    transform: KamTransform


def step_gate(tmap: TwistMap, alpha: float, ctx: DiophantineContext, p_in: NormParams,
              p_out: NormParams, c4: float = 1.0) -> GateReport:
    """Perturbation size, transform and the size parameter theta of one step."""
    w = ctx.weight
    eps = tmap.perturbation_norm(p_in, w)
    if eps == 0.0:
        zero = tmap.f.zero()
        return GateReport(0.0, 0.0, 0.0, 1.0, KamTransform(zero, zero))
    tr = build_uv(tmap, alpha, ctx)
    vt = tr.v.without_mean()
    a_v = _amplification(tmap.g.without_mean(), vt, p_in, p_out, w)
    a_u = _amplification((vt + tmap.f).without_mean(), tr.u, p_in, p_out, w)
    amp = max(1.0, a_u, a_v)
    return GateReport(eps, c4 * amp ** 2 * eps / p_in.s, theta_worst_case(eps, p_in, p_out, ctx, c4), amp, tr)


def kam_step(tmap: TwistMap, alpha: float, ctx: DiophantineContext, p_in: NormParams,
             p_out: NormParams, constants: KamConstants = KamConstants()
             ) -> tuple[KamTransform, TwistMap, StepEstimates]:
    """One conjugation step with the size gate and the step estimates.

    The gate uses theta = c4 * A^2 * eps / s where A >= 1 is the measured
    amplification of the two homological solves between the norm parameters;
    A replaces the worst-case factor gamma^-1 Gamma0 Gamma0, which is also
    reported (``theta_worst``). The size gate is checked before the domain
    inequalities, so an oversized perturbation is reported as such.
    """
    w = ctx.weight
    s, sp = p_in.s, p_out.s
    dr = p_in.r - p_out.r
    gate = step_gate(tmap, alpha, ctx, p_in, p_out, constants.c4)
    eps, tr, amp, theta, worst = gate.eps, gate.transform, gate.amplification, gate.theta, gate.theta_worst
    if eps == 0.0:
        est = StepEstimates(0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0)
        return tr, tmap, est
    if not theta < 0.25:
        raise ThetaRefusal(f"theta = {theta:.3g} >= 1/4 at eps = {eps:.3g}")
    viol = c24_violations(p_in, p_out)
    if viol:
        raise PreconditionViolation(viol)
    # domain nesting: U maps D(r+, s+) into D(r, s)
    theta_pts, y_pts = collocation(tmap.f, sp)
    vv = tr.v.evaluate_torus(theta_pts, y_pts)
    if np.max(np.abs(vv)) + sp >= s:
        raise DomainEscape("U(D+) is not contained in D")
    tol = max(1e-2 * eps ** 2, constants.picard_floor)
    new, rep = push_forward(tmap, tr, sp, s, tol, constants.picard_max_sweeps)
    eps_out = new.perturbation_norm(p_out, w)
    bracket = (sp / s) ** 2 * eps
    rhs = constants.c7 * (amp ** 2 / dr * (s * eps + eps ** 2 / s) + bracket)
    g_r = gamma0(ctx.delta, dr / 10)
    g_m = gamma0(ctx.delta, (p_in.m - p_out.m) / 10)
    rhs_worst = constants.c7 * ((g_r * g_m) ** 2 / dr * (s * eps + eps ** 2 / s) + bracket)
    size = norm(tr.u, p_out, w) + norm(tr.v, p_out, w)
    d_xi = norm(derivative(tr.u, "x"), p_out, w) + norm(derivative(tr.v, "x"), p_out, w)
    d_eta = norm(derivative(tr.u, "y"), p_out, w) + norm(derivative(tr.v, "y"), p_out, w)
    dmax = max(d_xi, d_eta)
    est = StepEstimates(
        eps_in=eps, eps_out=eps_out, theta=theta, q=rhs / 4, bound_rhs=rhs,
        theta_worst=worst, bound_rhs_worst=rhs_worst, amplification=amp,
        transform_size=size, transform_derivative=dmax,
        transform_ok=bool(size < theta * s and dmax < theta),
        picard_sweeps=rep.sweeps, conjugacy_defect=rep.conjugacy_defect,
    )
    return tr, new, est


# schedule

@dataclass(frozen=True)
class KamSchedule:
    """Parameter sequences of the iteration.

    m_n = (m0/2)(1 + 2^-n), r_n = (r0/2)(1 + 2^-n), s_n = eps_n^(2/3),
    eps_{n+1} = r0^-1 c8^(n+1) Gamma0^-2(c8^(n+1)) eps_n^(4/3).

    The recursion is carried out on logarithms in exact rational arithmetic
    (each input logarithm is the exact rational value of its double), so the
    invariants below are decided without rounding.
    """

    m0: float
    r0: float
    eps0: float
    c8: float = 4.0
    n_steps: int = 4
    delta: ApproximationFunction = ApproximationFunction()
    strict: bool = True
    log_eps: tuple[Fraction, ...] = field(init=False, repr=False)
    log_gamma: tuple[Fraction, ...] = field(init=False, repr=False)

    def __post_init__(self):
        if not self.c8 > 2:
            raise ScheduleError(["(c25) requires c8 > 2"])
        if min(self.m0, self.r0, self.eps0) <= 0:
            raise ScheduleError(["(c24) requires positive m0, r0, eps0"])
        lr = Fraction(math.log(self.r0))
        lc = Fraction(math.log(self.c8))
        lg = [Fraction(math.log(gamma0(self.delta, self.c8 ** (n + 1)))) for n in range(self.n_steps + 2)]
        le = [Fraction(math.log(self.eps0))]
        for n in range(self.n_steps + 1):
            le.append(-lr + (n + 1) * lc - 2 * lg[n] + Fraction(4, 3) * le[n])
        object.__setattr__(self, "log_eps", tuple(le))
        object.__setattr__(self, "log_gamma", tuple(lg))
        if self.strict:
            v = self.violations()
            if v:
                raise ScheduleError(v)

    def m(self, n: int) -> float:
        return self.m0 / 2 * (1 + 2.0 ** -n)

    def r(self, n: int) -> float:
        return self.r0 / 2 * (1 + 2.0 ** -n)

    def eps(self, n: int) -> float:
        return math.exp(float(self.log_eps[n]))

    def s(self, n: int) -> float:
        return math.exp(float(Fraction(2, 3) * self.log_eps[n]))

    def params(self, n: int, alpha: float = 0.0) -> NormParams:
        return NormParams(self.m(n), self.r(n), self.s(n), alpha)

    def log_e(self, n: int) -> Fraction:
        lr = Fraction(math.log(self.r0))
        lc = Fraction(math.log(self.c8))
        return -3 * lr + 3 * (n + 4) * lc - 6 * self.log_gamma[n] + self.log_eps[n]

    def e(self, n: int) -> float:
        return math.exp(float(self.log_e(n)))

    def violations(self) -> list[str]:
        out = []
        if not (0 < self.m0 < 1 and 0 < self.r0 < 1):
            out.append("(c24) requires 0 < m0 < 1 and 0 < r0 < 1")
        log3 = Fraction(math.log(3.0))
        log2 = Fraction(math.log(2.0))
        lr = Fraction(math.log(self.r0))
        for n in range(self.n_steps + 1):
            ls_n = Fraction(2, 3) * self.log_eps[n]
            ls_next = Fraction(2, 3) * self.log_eps[n + 1]
            if not log3 + ls_next < ls_n:
                out.append(f"(c24) 3 s_{n + 1} < s_{n} fails")
            # (r_n - r_{n+1})/4 = r0 2^(-n-4)
            if not ls_n < lr - (n + 4) * log2:
                out.append(f"(c24) s_{n} < (r_{n} - r_{n + 1})/4 fails")
            if n < self.n_steps and not self.log_e(n + 1) <= Fraction(4, 3) * self.log_e(n):
                out.append(f"(c25) e_{n + 1} <= e_{n}^(4/3) fails")
        return out


# full iteration

@dataclass
class ConvergenceRow:
    n: int
    eps_predicted: float
    eps_measured: float
    theta: float
    q_bound: float
    wall_ms: float
    eps_next_bound: float = math.nan
    transform_ok: bool = True
    accumulated_ok: bool = True


@dataclass
class KamResult:
    curve: InvariantCurve
    table: list[ConvergenceRow]
    final_map: TwistMap
    transform: KamTransform
    estimates: list[StepEstimates]
    steps: int


def _compose_accumulated(prev: ShellSeries | None, tr: KamTransform, s_new: float,
                         s_old: float, which: str) -> ShellSeries:
    base = tr.u if which == "p" else tr.v
    if prev is None:
        return base
    return compose_inner(prev, tr.u, tr.v, s_new, s_old) + base


def run_kam(tmap: TwistMap, alpha: float, ctx: DiophantineContext, schedule: KamSchedule,
            constants: KamConstants = KamConstants(), target: float = 0.0,
            on_row: Callable[[ConvergenceRow], None] | None = None) -> KamResult:
    """Iterate kam_step along the schedule and accumulate V_n = U_0 o ... o U_n."""
    w = ctx.weight
    p0 = schedule.params(0, alpha)
    eps_meas = tmap.perturbation_norm(p0, w)
    if eps_meas > schedule.eps0:
        raise PreconditionViolation([f"initial perturbation {eps_meas:.3g} exceeds eps0 = {schedule.eps0:.3g}"])
    cur = tmap
    p_acc = q_acc = None
    table: list[ConvergenceRow] = []
    estimates: list[StepEstimates] = []
    prod = 1.0
    steps = 0
    last_tr = KamTransform(tmap.f.zero(), tmap.f.zero())
    for n in range(schedule.n_steps):
        p_n = schedule.params(n, alpha)
        eps_n = cur.perturbation_norm(p_n, w)
        if eps_n == 0.0 or eps_n < target:
            break
        t0 = time.perf_counter()
        p_next = schedule.params(n + 1, alpha)
        tr, cur, est = kam_step(cur, alpha, ctx, p_n, p_next, constants)
        p_acc = _compose_accumulated(p_acc, tr, p_next.s, p_n.s, "p")
        q_acc = _compose_accumulated(q_acc, tr, p_next.s, p_n.s, "q")
        prod *= 1 + 2 * est.theta
        P1 = max(norm(derivative(p_acc, "x"), p_next, w), norm(derivative(q_acc, "x"), p_next, w))
        P2 = max(norm(derivative(p_acc, "y"), p_next, w), norm(derivative(q_acc, "y"), p_next, w))
        row = ConvergenceRow(n, schedule.eps(n), eps_n, est.theta, est.q,
                             (time.perf_counter() - t0) * 1e3, est.bound_rhs,
                             est.transform_ok, bool(P1 + P2 < prod - 1))
        table.append(row)
        estimates.append(est)
        if on_row:
            on_row(row)
        last_tr = KamTransform(tr.u, tr.v, p_acc, q_acc)
        steps += 1
    n_final = steps
    eps_final = cur.perturbation_norm(schedule.params(n_final, alpha), w)
    table.append(ConvergenceRow(n_final, schedule.eps(n_final), eps_final, math.nan, math.nan, 0.0))
    if p_acc is None:
        zero = tmap.f.zero().truncate_degree(0)
        curve = InvariantCurve(zero, zero + alpha, alpha)
    else:
        curve = InvariantCurve(p_acc.at_action(alpha), q_acc.at_action(alpha) + alpha, alpha)
    return KamResult(curve, table, cur, last_tr, estimates, steps)


def fitted_exponent(eps: Sequence[float], schedule: KamSchedule | None = None) -> float:
    """Least-squares slope of log eps_{n+1} against log eps_n.

    With a schedule, the step-dependent prefactor c8^(n+1) / (r0 Gamma0^2(c8^(n+1)))
    of the schedule law is removed first, so the slope is the exponent of
    eps_{n+1} = C_n eps_n^p. Without one, an affine fit (constant prefactor).
    """
    e = np.log(np.asarray(eps, dtype=float))
    x, y = e[:-1], e[1:].copy()
    if schedule is not None:
        n = np.arange(len(x))
        y -= ((n + 1) * math.log(schedule.c8) - math.log(schedule.r0)
              - 2 * np.array([float(schedule.log_gamma[i]) for i in n]))
    return float(np.polyfit(x, y, 1)[0])


# verification

@dataclass
class ConjugacyReport:
    residual: float
    residual_x: float
    residual_y: float
    n_samples: int


def verify_conjugacy(tmap: TwistMap, curve: InvariantCurve, n_samples: int = 512,
                     window: float = 200.0) -> ConjugacyReport:
    """sup_xi |M(xi + u(xi), v(xi)) - (xi + alpha + u(xi + alpha), v(xi + alpha))|."""
    xi = np.linspace(0.0, window, n_samples, endpoint=False)
    om = tmap.omega
    theta = xi[:, None] * om
    uu, vv = eval_many([curve.u, curve.v], theta, np.full(n_samples, curve.u.alpha))
    dx, y1 = tmap.apply_shell(theta + uu[:, None] * om, vv)
    theta_a = theta + curve.alpha * om
    ua, va = eval_many([curve.u, curve.v], theta_a, np.full(n_samples, curve.u.alpha))
    rx = np.max(np.abs(uu + dx - curve.alpha - ua))
    ry = np.max(np.abs(y1 - va))
    return ConjugacyReport(float(max(rx, ry)), float(rx), float(ry), n_samples)


# small twist

@dataclass(frozen=True)
class RescaledProblem:
    tmap: TwistMap
    rotation_scale: float
    eps_scale: float
    alpha_map: Callable[[float], float]


def small_twist_rescale(tmap: TwistMap, s: float | None = None) -> RescaledProblem:
    """Standard-form problem equivalent to a small-twist or shifted map.

    Small twist: Y = delta*y turns x1 = x + delta*y + f into x1 = x + Y + f
    and the rotation alpha into delta*alpha. Shifted: Y = beta + delta*h(y).
    """
    if tmap.form == "standard":
        return RescaledProblem(tmap, 1.0, 1.0, lambda a: a)
    d = tmap.delta
    if not 0 < d <= 1:
        raise ValueError("delta must lie in (0, 1]")
    f, g = tmap.f, tmap.g
    if tmap.form == "small-twist":
        def rescale(series: ShellSeries, factor: float) -> ShellSeries:
            c = series.coeffs * factor / d ** np.arange(series.deg + 1)
            return ShellSeries(series.omega, d * series.alpha, series.kmax, series.deg, c, series.slots)
        new = TwistMap(rescale(f, 1.0), rescale(g, d))
        return RescaledProblem(new, d, d, lambda a: d * a)
    # shifted form
    if s is None:
        raise ValueError("shifted form needs the action radius s")
    hp = np.polynomial.polynomial.polyder(tmap.h)
    ys = np.linspace(f.alpha - s, f.alpha + s, 2001)
    hpv = np.polynomial.polynomial.polyval(ys, hp)
    if np.any(hpv == 0) or np.any(np.sign(hpv) != np.sign(hpv[0])):
        raise DegenerateTwist("h' vanishes on the annulus")
    Y0 = tmap.beta + d * np.polynomial.polynomial.polyval(f.alpha, tmap.h)
    big_m = max(float(np.max(np.abs(hpv))), 1.0)
    sY = d * float(np.min(np.abs(hpv))) * s
    proto = ShellSeries(f.omega, Y0, f.kmax, f.deg, slots=f.slots)
    theta, Yn = collocation(proto, sY)
    th = theta.reshape(-1, f.n)
    Yv = Yn.reshape(-1)
    y = np.full_like(Yv, f.alpha)
    for _ in range(60):
        r = tmap.beta + d * np.polynomial.polynomial.polyval(y, tmap.h) - Yv
        y = y - r / (d * np.polynomial.polynomial.polyval(y, hp))
        if np.max(np.abs(r)) < 1e-15 * max(1.0, abs(Y0)):
            break
    fv, gv = eval_many([f, g], th, y)
    gY = tmap.beta + d * np.polynomial.polynomial.polyval(y + gv, tmap.h) - Yv
    new = TwistMap(from_samples(fv.reshape(Yn.shape), proto, sY),
                   from_samples(gY.reshape(Yn.shape), proto, sY))
    return RescaledProblem(new, d, d / big_m,
                           lambda a: tmap.beta + d * float(np.polynomial.polynomial.polyval(a, tmap.h)))


# intersection property

@dataclass
class IntersectionReport:
    witnesses: list[bool]
    gap_ranges: list[tuple[float, float]]
    max_det_deviation: float | None

    @property
    def all_intersect(self) -> bool:
        return all(self.witnesses)


def check_intersection(mapping: Callable[[np.ndarray, np.ndarray], tuple[np.ndarray, np.ndarray]] | TwistMap,
                       curves: Sequence[tuple[np.ndarray, Callable[[np.ndarray], np.ndarray] | np.ndarray]],
                       exact_symplectic: bool = False, fd_step: float = 1e-6) -> IntersectionReport:
    """Numeric intersection witnesses for sampled curves y = phi(x).

    A witness is a sign change (or zero) of y1 - phi(x1) along the image of
    the curve; for y = const this is the sign of y1 - y.
    """
    fn = mapping.apply if isinstance(mapping, TwistMap) else mapping
    wit, ranges = [], []
    det_dev = 0.0
    for xs, phi in curves:
        xs = np.asarray(xs, dtype=float)
        if xs.size < 512:
            raise ValueError("curves need at least 512 samples")
        ys = phi(xs) if callable(phi) else np.asarray(phi, dtype=float)
        x1, y1 = fn(xs, ys)
        target = phi(x1) if callable(phi) else ys
        gap = np.asarray(y1) - np.asarray(target)
        wit.append(bool(np.min(gap) <= 0 <= np.max(gap)))
        ranges.append((float(np.min(gap)), float(np.max(gap))))
        if exact_symplectic:
            pick = xs[:: max(1, xs.size // 32)]
            pys = ys[:: max(1, xs.size // 32)]
            det_dev = max(det_dev, float(np.max(np.abs(jacobian_det(fn, pick, pys, fd_step) - 1))))
    return IntersectionReport(wit, ranges, det_dev if exact_symplectic else None)


def jacobian_det(fn, x: np.ndarray, y: np.ndarray, h: float = 1e-6) -> np.ndarray:
    """Central finite-difference Jacobian determinant of a planar map."""
    xp = fn(x + h, y)
    xm = fn(x - h, y)
    yp = fn(x, y + h)
    ym = fn(x, y - h)
    a = (np.asarray(xp[0]) - xm[0]) / (2 * h)
    b = (np.asarray(yp[0]) - ym[0]) / (2 * h)
    c = (np.asarray(xp[1]) - xm[1]) / (2 * h)
    d = (np.asarray(yp[1]) - ym[1]) / (2 * h)
    return a * d - b * c


# calibration family

def desk_map(eps: float, alpha: float, omega: Sequence[float] = (1.0, math.sqrt(2.0)), kmax: int = 12,
             deg: int = 8, s: float = 0.01, symplectic: bool = True) -> TwistMap:
    """Two-frequency calibration map with harmonics <(1,1),omega> x in f and <(1,0),omega> x in g.

    ``symplectic=False`` gives f = eps cos(<(1,1),omega>x)(1 + (y - alpha)),
    g = eps sin(<(1,0),omega>x). That map does not preserve area, and its
    invariant curves drift at second order in eps. The default is the
    area-preserving map generated by
        S(x, y1) = x y1 + y1^2/2 + eps W(x, y1),
        W = cos(<(1,0),omega>x) + cos(<(1,1),omega>x) (e + e^2/2),  e = y1 - alpha,
    which has the same first-order harmonic content:
        y1 = y - eps W_x(x, y1),  x1 = x + y1 + eps W_y(x, y1).
    """
    om = np.asarray(omega, dtype=float)
    n = om.size
    k10 = (1,) + (0,) * (n - 1)
    k11 = (1, 1) + (0,) * (n - 2)
    if not symplectic:
        f = ShellSeries.from_terms(om, alpha, kmax, deg, {k11: [eps / 2, eps / 2]})
        g = ShellSeries.from_terms(om, alpha, kmax, deg, {k10: [-0.5j * eps]})
        return TwistMap(f, g)
    w10 = om[0]
    w11 = om[0] + om[1]
    proto = ShellSeries(om, alpha, kmax, deg)
    theta, y = collocation(proto, s)
    a = theta[..., 0]
    b = theta[..., 0] + theta[..., 1]

    def w_x(e):
        return -w10 * np.sin(a) - w11 * np.sin(b) * (e + e * e / 2)

    y1 = np.array(y, dtype=float)
    for _ in range(100):
        nxt = y - eps * w_x(y1 - alpha)
        if np.max(np.abs(nxt - y1)) < 1e-17:
            y1 = nxt
            break
        y1 = nxt
    e = y1 - alpha
    gvals = y1 - y
    fvals = gvals + eps * np.cos(b) * (1 + e)
    return TwistMap(from_samples(fvals, proto, s), from_samples(gvals, proto, s))
