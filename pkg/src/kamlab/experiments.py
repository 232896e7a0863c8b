"""Experiment runners shared by the command line and the acceptance tests.

Each runner takes a resolved parameter dict and a seed and returns an
:class:`Outcome` of CSV tables and JSON documents. Nothing here touches the
filesystem.
"""

from __future__ import annotations

import json
import math
import time
from dataclasses import dataclass, field
from typing import Any, Callable

import numpy as np

from . import duffing as dfg
from .diophantine import ApproximationFunction, DiophantineContext, find_rotation, measure_resonant
from .fourier import NormParams, ShellSeries, invert_near_identity, norm, to_dict
from .kam import (
    KamConstants,
    KamSchedule,
    ScheduleError,
    TwistMap,
    desk_map,
    fitted_exponent,
    homological_bound,
    run_kam,
    small_twist_rescale,
    solve_homological,
    step_gate,
    verify_conjugacy,
)

SQRT2 = math.sqrt(2.0)


@dataclass
class Table:
    header: list[str]
    rows: list[list[Any]] = field(default_factory=list)


@dataclass
class Outcome:
    tables: dict[str, Table] = field(default_factory=dict)
    documents: dict[str, Any] = field(default_factory=dict)
    summary: dict[str, Any] = field(default_factory=dict)


DEFAULTS: dict[str, dict[str, Any]] = {
    "homological": {
        "omega": [1.0, SQRT2], "kmax": 20, "instances": 100, "samples": 512, "window": 100.0,
        "gamma": 0.01, "tau": 2.0, "c": 0.05, "interval": [1.0, 2.0], "decay": 0.3,
        "m": 0.5, "r": 0.5, "m_out": 0.25, "r_out": 0.25,
    },
    "kam": {
        "omega": [1.0, SQRT2], "alpha": None, "interval": [1.0, 2.0], "gamma": 0.01, "tau": 2.0,
        "c": 0.05, "kmax": 12, "deg": 8, "amplitude": 4e-6, "symplectic": True, "fit_radius": 0.05,
        "eps0": 1e-4, "m0": 0.5, "r0": 0.99, "c8": 2.1, "steps": 4, "target": 1e-16,
        "c4": 1.0, "c7": 8.0, "verify_samples": 512, "verify_window": 200.0,
    },
    "measure": {
        "omega": [1.0, SQRT2], "interval": [1.0, 2.0], "gammas": [1e-2, 1e-3, 1e-4], "samples": 10000,
        "kmax": 20, "tau": 2.0, "normalize": True, "c": 0.05, "shard_size": 1000,
    },
    "duffing-chart": {"resolution": 16384, "rtol": 1e-13},
    "duffing-poincare": {
        "omega": [1.0, SQRT2], "amplitude": 0.1, "states": 20, "rho_range": [1e6, 1e7],
        "t_range": [0.0, 100.0], "t_step": 1e-4, "rho_rel_step": 1e-4,
        "oracle_states": 10, "oracle_rho_range": [1e2, 1e4],
    },
    "duffing-bound": {
        "omega": [1.0, SQRT2], "amplitude": 0.5, "orbits": 50, "energy_range": [10.0, 100.0],
        "horizon": 1e4, "cap": 10.0, "resolution": 0.05, "control_orbits": 5,
    },
    "twist-fit": {
        "omega": [1.0, SQRT2], "amplitude": 0.1, "rho_min": 1e3, "rho_max": 1e6, "points": 7,
        "t0": [0.0, 1.0, 2.5], "deltas": [0.1, 0.05, 0.025], "remainder_samples": 32,
    },
}


def _context(p: dict, kmax: int, normalize: bool = False) -> DiophantineContext:
    return DiophantineContext(np.asarray(p["omega"], dtype=float), gamma=p.get("gamma", 0.0),
                              delta=ApproximationFunction(p["tau"], normalize=normalize),
                              c=p["c"], kmax=kmax)


# homological

def random_mean_free(omega, kmax: int, rng: np.random.Generator, decay: float, alpha: float = 0.0) -> ShellSeries:
    proto = ShellSeries(omega, alpha, kmax)
    ks = np.indices(proto.coeffs.shape[:-1]) - kmax
    absk = np.abs(ks).sum(axis=0)
    c = (rng.standard_normal(absk.shape) + 1j * rng.standard_normal(absk.shape)) * np.exp(-decay * absk)
    c[(kmax,) * proto.n] = 0.0
    return proto.like(c[..., None])


def homological_experiment(p: dict, seed: int) -> Outcome:
    ctx = _context(p, p["kmax"])
    alpha, margin = find_rotation(tuple(p["interval"]), ctx)
    rng = np.random.default_rng(seed)
    src = NormParams(p["m"], p["r"], 1.0)
    tgt = NormParams(p["m_out"], p["r_out"], 1.0)
    xi = np.linspace(0.0, p["window"], p["samples"], endpoint=False)
    table = Table(["instance", "alpha", "residual", "relative_residual", "bound_lhs", "bound_rhs", "bound_holds"])
    worst_rel, violations = 0.0, 0
    for i in range(p["instances"]):
        h = random_mean_free(p["omega"], p["kmax"], rng, p["decay"])
        l = solve_homological(h, alpha)
        res = float(np.max(np.abs(l.evaluate(xi + alpha) - l.evaluate(xi) - h.evaluate(xi))))
        rel = res / norm(h, src, ctx.weight)
        lhs, rhs = homological_bound(h, l, ctx, src, tgt)
        ok = lhs <= rhs
        violations += not ok
        worst_rel = max(worst_rel, rel)
        table.rows.append([i, alpha, res, rel, lhs, rhs, ok])
    return Outcome({"homological": table}, summary={
        "alpha": alpha, "rotation_margin": margin, "max_relative_residual": worst_rel,
        "bound_violations": violations})


# kam

def kam_setup(p: dict):
    ctx = _context(p, p["kmax"])
    alpha = p["alpha"]
    if alpha is None:
        alpha, _ = find_rotation(tuple(p["interval"]), ctx, candidates=2000)
    schedule = KamSchedule(p["m0"], p["r0"], p["eps0"], p["c8"], p["steps"], ctx.delta, strict=False)
    tmap = desk_map(p["amplitude"], alpha, p["omega"], p["kmax"], p["deg"], p["fit_radius"], p["symplectic"])
    return ctx, float(alpha), schedule, tmap


def kam_violations(p: dict) -> tuple[list[str], dict]:
    """Schedule, axiom and step-size checks before any iteration."""
    delta = ApproximationFunction(p["tau"])
    out = list(delta.check_axioms())
    try:
        ctx, alpha, schedule, tmap = kam_setup(p)
    except ScheduleError as e:
        return out + e.violations, {}
    out += schedule.violations()
    info = {"alpha": alpha}
    eps_meas = tmap.perturbation_norm(schedule.params(0, alpha), ctx.weight)
    info["eps_measured"] = eps_meas
    if eps_meas > schedule.eps0:
        out.append(f"initial perturbation {eps_meas:.6g} exceeds eps0 = {schedule.eps0:.6g}")
    if not out:
        gate = step_gate(tmap, alpha, ctx, schedule.params(0, alpha), schedule.params(1, alpha), p["c4"])
        info["theta"] = gate.theta
        info["theta_worst_case"] = gate.theta_worst
        if not gate.theta < 0.25:
            out.append(f"theta < 1/4 fails: theta = {gate.theta:.6g}")
    return out, info


def kam_experiment(p: dict, seed: int, timings: bool = False) -> Outcome:
    ctx, alpha, schedule, tmap = kam_setup(p)
    if not schedule.strict:
        v = schedule.violations()
        if v:
            raise ScheduleError(v)
    constants = KamConstants(p["c4"], p["c7"])
    t0 = time.perf_counter()
    result = run_kam(tmap, alpha, ctx, schedule, constants, target=p["target"])
    elapsed = time.perf_counter() - t0
    rep = verify_conjugacy(tmap, result.curve, p["verify_samples"], p["verify_window"])
    header = ["n", "eps_predicted", "eps_measured", "theta", "q_bound"] + (["wall_ms"] if timings else [])
    table = Table(header)
    for r in result.table:
        table.rows.append([r.n, r.eps_predicted, r.eps_measured, r.theta, r.q_bound]
                          + ([r.wall_ms] if timings else []))
    eps = [r.eps_measured for r in result.table]
    curve = {"alpha": alpha, "u": to_dict(result.curve.u), "v": to_dict(result.curve.v)}
    summary = {
        "alpha": alpha, "steps": result.steps, "residual": rep.residual,
        "fitted_exponent": fitted_exponent(eps, schedule), "fitted_exponent_affine": fitted_exponent(eps),
        "transform_checks": all(r.transform_ok for r in result.table[:-1]),
        "accumulated_checks": all(r.accumulated_ok for r in result.table[:-1]),
    }
    if timings:
        summary["wall_s"] = elapsed
    return Outcome({"convergence": table}, {"curve": curve}, summary)


# measure

def measure_experiment(p: dict, seed: int, threads: int = 1) -> Outcome:
    ctx = _context(p, p["kmax"], normalize=p["normalize"])
    rows = measure_resonant(ctx, tuple(p["interval"]), p["gammas"], p["samples"], seed, threads,
                            p["shard_size"])
    table = Table(["gamma", "estimate", "ci_halfwidth", "n", "ratio"])
    for r in rows:
        table.rows.append([r.gamma, r.estimate, r.ci_halfwidth, r.n, r.estimate / r.gamma])
    return Outcome({"measure": table}, summary={"ratios": [r.estimate / r.gamma for r in rows]})


# duffing

def _forcing(p: dict) -> dfg.DuffingForcing:
    return dfg.DuffingForcing.cosines(p["amplitude"], p["omega"])


def chart_experiment(p: dict, seed: int) -> Outcome:
    chart = dfg.integrate_cs(p["resolution"], p["rtol"])
    t_quad = dfg.quadrature_period()
    table = Table(["T_star", "T_quadrature", "c", "d", "twist_coefficient", "invariant_residual",
                   "derivative_residual"])
    table.rows.append([chart.T_star, t_quad, chart.c, chart.d, chart.twist_coefficient,
                       chart.invariant_residual(), chart.derivative_residual()])
    return Outcome({"chart": table}, {"chart": json.loads(chart.to_json())},
                   {"T_star": chart.T_star, "period_error": abs(chart.T_star - t_quad)})


def poincare_experiment(p: dict, seed: int) -> Outcome:
    forcing = _forcing(p)
    rng = np.random.default_rng(seed)
    table = Table(["kind", "t0", "rho0", "theta0", "t1", "rho1", "det", "area_det", "rho_error", "theta_error"])
    lo, hi = np.log10(p["rho_range"])
    for _ in range(p["states"]):
        t0 = float(rng.uniform(*p["t_range"]))
        r0 = float(10 ** rng.uniform(lo, hi))
        J = dfg.poincare_jacobian(t0, r0, forcing, t_step=p["t_step"], rho_rel_step=p["rho_rel_step"])
        t1, r1 = dfg.poincare_map(t0, r0, forcing)
        table.rows.append(["jacobian", t0, r0, 0.0, float(t1[0]), float(r1[0]), J.det, J.area_det, "", ""])
    lo, hi = np.log10(p["oracle_rho_range"])
    for _ in range(p["oracle_states"]):
        t0 = float(rng.uniform(*p["t_range"]))
        r0 = float(10 ** rng.uniform(lo, hi))
        th0 = float(rng.uniform())
        err = oracle_comparison(th0, r0, t0, forcing)
        table.rows.append(["oracle", t0, r0, th0, err["t1"], err["rho1"], "", "", err["rho_error"],
                           err["theta_error"]])
    jac = [r for r in table.rows if r[0] == "jacobian"]
    orc = [r for r in table.rows if r[0] == "oracle"]
    return Outcome({"poincare": table}, summary={
        "max_det_deviation": max((abs(r[6] - 1) for r in jac), default=0.0),
        "max_area_det_deviation": max((abs(r[7] - 1) for r in jac), default=0.0),
        "max_oracle_error": max((max(r[8], r[9]) for r in orc), default=0.0)})


def oracle_comparison(theta0: float, rho0: float, t0: float, forcing: dfg.DuffingForcing) -> dict:
    """One angle period of the swapped-time flow against direct Cartesian integration."""
    _, r1, t1 = dfg.flow_g5(theta0, rho0, t0, forcing, 1.0)
    x0, y0 = dfg.from_action_angle(theta0, rho0)
    xe, ye = dfg.cartesian_flow(float(x0), float(y0), t0, float(t1[0]), forcing)
    th, rho = dfg.to_action_angle(xe, ye)
    return {"t1": float(t1[0]), "rho1": float(r1[0]),
            "rho_error": float(abs(rho / r1[0] - 1)),
            "theta_error": float(abs((th - theta0 + 0.5) % 1.0 - 0.5))}


def bound_experiment(p: dict, seed: int, threads: int = 1) -> Outcome:
    forcing = _forcing(p)
    ics = dfg.sample_initial_conditions(p["orbits"], tuple(p["energy_range"]), seed)
    stats = dfg.boundedness_experiment(forcing, ics, p["horizon"], p["cap"], threads, p["resolution"])
    table = Table(["kind", "orbit", "initial_energy", "sup_energy", "final_energy", "ratio", "bounded",
                   "energy_drift", "step", "error"])
    for s in stats:
        table.rows.append(["forced", s.index, s.initial_energy, s.sup_energy, s.final_energy, s.ratio,
                           s.bounded, "", s.step, s.error])
    control = dfg.boundedness_experiment(dfg.DuffingForcing.zero(p["omega"]), ics[: p["control_orbits"]],
                                         p["horizon"], p["cap"], threads, p["resolution"])
    drift = 0.0
    for s in control:
        d = abs(s.final_energy / s.initial_energy - 1)
        drift = max(drift, d, abs(s.ratio - 1))
        table.rows.append(["control", s.index, s.initial_energy, s.sup_energy, s.final_energy, s.ratio,
                           s.bounded, d, s.step, s.error])
    return Outcome({"orbits": table}, summary={
        "all_bounded": all(s.bounded for s in stats), "max_ratio": max(s.ratio for s in stats),
        "control_drift": drift, "truncated_forcing": True})


def twist_experiment(p: dict, seed: int) -> Outcome:
    forcing = _forcing(p)
    grid = np.geomspace(p["rho_min"], p["rho_max"], p["points"])
    fit = dfg.twist_fit(forcing, grid, p["t0"])
    table = Table(["coefficient", "reference", "relative_error", "exponent", "remainder_exponent"])
    table.rows.append([fit.coefficient, fit.reference, fit.relative_error, fit.exponent, fit.remainder_exponent])
    rem = Table(["delta", "sup_f1", "sup_f2"])
    for d, f1, f2 in dfg.ptilde_remainders(forcing, p["deltas"], p["remainder_samples"], seed):
        rem.rows.append([d, f1, f2])
    return Outcome({"twist": table, "remainders": rem},
                   summary={"coefficient": fit.coefficient, "exponent": fit.exponent})


@dataclass
class ConfinementReport:
    alphas: list[float]
    steps: list[int]
    fit_residuals: list[float]
    flow_residuals: list[float]
    iterates: int
    confined: bool
    ordering_kept: bool


def ptilde_confinement(amplitude: float = 0.1, omega=(1.0, SQRT2), delta: float = 0.05, kmax: int = 4,
                       deg: int = 4, bands=((1.3, 1.5), (1.5, 1.7)), gamma: float = 1e-3,
                       orbits: int = 8, iterates: int = 1000, seed: int = 0) -> ConfinementReport:
    """KAM curves of the rescaled period map at two rotations, then orbits of the true map between them.

    Each curve is checked against both the sampled series map and the period
    map itself. Orbits start between the two curves and must stay between
    them, with their action ordering unchanged, for ``iterates`` steps.
    """
    forcing = dfg.DuffingForcing.cosines(amplitude, omega)
    chart = dfg.default_chart()
    resc = small_twist_rescale(dfg.ptilde_twist_map(forcing, delta, kmax, deg, 1.5, 0.25, chart))
    ctx = DiophantineContext(tuple(omega), gamma=gamma, kmax=kmax)
    graphs, alphas, steps, fit_res, flow_res = [], [], [], [], []
    for band in bands:
        mu_alpha, _ = find_rotation(tuple(band), ctx, scale=delta)
        alpha = delta * mu_alpha
        tmap = TwistMap(resc.tmap.f.recentered(alpha), resc.tmap.g.recentered(alpha))
        eps = tmap.perturbation_norm(NormParams(0.5, 0.99, 1e-3, alpha), ctx.weight)
        schedule = KamSchedule(0.5, 0.99, 2 * eps, 2.1, 4)
        result = run_kam(tmap, alpha, ctx, schedule, target=1e-16)
        curve = result.curve
        fit_res.append(verify_conjugacy(tmap, curve).residual)
        xi = np.linspace(0.0, 100.0, 256)
        t, Y = curve.points(xi)
        t1, mu1, _, _ = dfg.ptilde(t, Y / delta, delta, forcing, chart)
        ta, Ya = curve.points(xi + alpha)
        flow_res.append(float(max(np.max(np.abs(t1 - ta)), delta * np.max(np.abs(mu1 - Ya / delta)))))
        # graph mu = phi(t): invert t = xi + u(xi)
        back = invert_near_identity(curve.u, 1.0)
        graphs.append(lambda tt, c=curve, b=back: c.v.evaluate(tt + b.evaluate(tt)) / delta)
        alphas.append(alpha)
        steps.append(result.steps)
    lower, upper = graphs
    rng = np.random.default_rng(seed)
    t = np.sort(rng.uniform(0.0, 50.0, orbits))
    t[:] = t[0]
    frac = np.linspace(0.2, 0.8, orbits)
    mu = lower(t) + frac * (upper(t) - lower(t))
    confined = ordered = True
    for _ in range(iterates):
        t, mu, _, _ = dfg.ptilde(t, mu, delta, forcing, chart, rtol=1e-9, atol=1e-12)
        lo, hi = lower(t), upper(t)
        confined &= bool(np.all((lo < mu) & (mu < hi)))
        # orbits sharing a start time keep their vertical order
        ordered &= bool(np.all(np.diff(mu - lo) > 0))
    return ConfinementReport(alphas, steps, fit_res, flow_res, iterates, confined, ordered)


RUNNERS: dict[str, Callable[..., Outcome]] = {
    "homological": homological_experiment,
    "kam": kam_experiment,
    "measure": measure_experiment,
    "duffing-chart": chart_experiment,
    "duffing-poincare": poincare_experiment,
    "duffing-bound": bound_experiment,
    "twist-fit": twist_experiment,
}
