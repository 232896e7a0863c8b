import math

import numpy as np
import pytest
from scipy import special

from kamlab import duffing as dfg
from kamlab import experiments as ex
from kamlab.diophantine import DiophantineContext, find_rotation
from kamlab.fourier import NormParams
from kamlab.kam import TwistMap, check_intersection, kam_step, small_twist_rescale

OMEGA2 = (1.0, math.sqrt(2.0))
FORCING = dfg.DuffingForcing.cosines(0.1, OMEGA2)


# chart

def test_chart_invariants(chart):
    assert chart.invariant_residual() < 1e-10
    assert chart.derivative_residual() < 1e-8
    C, S = chart.cs(np.array([0.0]))
    assert C[0] == 1.0 and S[0] == 0.0


def test_period_matches_quadrature(chart):
    assert abs(chart.T_star - dfg.quadrature_period()) < 1e-6
    assert chart.T_star == pytest.approx(7.416298, abs=1e-6)


def test_chart_matches_elliptic_functions(chart):
    # C(t) = cn(t; 1/2) with the period compressed by sqrt(1/2): C'' = -C^3
    t = np.linspace(0, chart.T_star, 401)
    sn, cn, dn, _ = special.ellipj(t, 0.5)
    C, S = chart.cs(t)
    np.testing.assert_allclose(C, cn, atol=1e-10)
    np.testing.assert_allclose(S, -sn * dn, atol=1e-10)


def test_chart_symmetry(chart):
    t = np.random.default_rng(0).uniform(0, chart.T_star, 100)
    Cp, Sp = chart.cs(t)
    Cm, Sm = chart.cs(-t)
    np.testing.assert_allclose(Cm, Cp, atol=1e-14)
    np.testing.assert_allclose(Sm, -Sp, atol=1e-14)


def test_chart_constants(chart):
    assert chart.c == pytest.approx(3 / chart.T_star)
    assert chart.d == pytest.approx(chart.c ** (4 / 3) / 4)
    assert chart.twist_coefficient == pytest.approx(3 / (4 * chart.d))


def test_chart_json_round_trip(chart):
    back = dfg.ActionAngleChart.from_json(chart.to_json())
    assert back.T_star == chart.T_star
    t = np.linspace(0, 20, 50)
    np.testing.assert_array_equal(back.cs(t)[0], chart.cs(t)[0])


# action-angle coordinates

def test_action_angle_origin_point(chart):
    x, y = dfg.from_action_angle(0.0, 1.0, chart)
    assert x == pytest.approx(chart.c ** (1 / 3), rel=1e-14) and y == 0.0


def test_action_angle_round_trip(chart):
    rng = np.random.default_rng(1)
    theta = rng.uniform(0, 1, 1000)
    rho = rng.uniform(1, 100, 1000)
    x, y = dfg.from_action_angle(theta, rho, chart)
    th, r = dfg.to_action_angle(x, y, chart)
    assert np.max(np.abs((th - theta + 0.5) % 1.0 - 0.5)) < 1e-9
    assert np.max(np.abs(r / rho - 1)) < 1e-9


def test_round_trip_over_wide_action_range(chart):
    rho = np.geomspace(1, 1e6, 200)
    theta = np.linspace(0, 1, 200, endpoint=False)
    th, r = dfg.to_action_angle(*dfg.from_action_angle(theta, rho, chart), chart)
    assert np.max(np.abs((th - theta + 0.5) % 1.0 - 0.5)) < 1e-9
    assert np.max(np.abs(r / rho - 1)) < 1e-9


def test_energy_in_action_angle(chart):
    rng = np.random.default_rng(2)
    theta, rho = rng.uniform(0, 1, 200), rng.uniform(1, 100, 200)
    x, y = dfg.from_action_angle(theta, rho, chart)
    np.testing.assert_allclose(dfg.energy(x, y), chart.d * rho ** (4 / 3), rtol=1e-10)


def test_action_angle_preserves_area(chart):
    rng = np.random.default_rng(3)
    h = 1e-6
    for theta, rho in zip(rng.uniform(0, 1, 20), rng.uniform(1, 50, 20)):
        xa, ya = dfg.from_action_angle(theta + h, rho, chart)
        xb, yb = dfg.from_action_angle(theta - h, rho, chart)
        xc, yc = dfg.from_action_angle(theta, rho + h * rho, chart)
        xd, yd = dfg.from_action_angle(theta, rho - h * rho, chart)
        det = ((xa - xb) * (yc - yd) - (xc - xd) * (ya - yb)) / (4 * h * h * rho)
        assert abs(abs(det) - 1) < 1e-7


def test_origin_rejected(chart):
    with pytest.raises(dfg.OriginInput):
        dfg.to_action_angle(0.0, 0.0, chart)
    with pytest.raises(dfg.OriginInput):
        dfg.from_action_angle(0.2, 0.0, chart)


# swapped-time flow and period map

def test_unforced_period_map(chart):
    rho = np.array([1e2, 1e4, 1e6])
    t1, r1 = dfg.poincare_map(np.zeros(3), rho, dfg.DuffingForcing.zero(OMEGA2), chart=chart)
    np.testing.assert_allclose(r1, rho, rtol=1e-14)
    np.testing.assert_allclose(t1, chart.twist_coefficient * rho ** (-1 / 3), rtol=1e-11)


def test_action_change_scales_like_cube_root(chart):
    rho = np.array([1e3, 1e4, 1e5])
    t0 = np.linspace(0, 3, 8)
    R, T0 = np.meshgrid(rho, t0)
    _, r1 = dfg.poincare_map(T0.ravel(), R.ravel(), FORCING, chart=chart)
    change = np.abs(r1 - R.ravel()).reshape(R.shape).max(axis=0)
    slope = np.polyfit(np.log(rho), np.log(change), 1)[0]
    assert slope == pytest.approx(-1 / 3, rel=0.2)


def test_flow_matches_cartesian_oracle():
    rng = np.random.default_rng(4)
    for _ in range(3):
        err = ex.oracle_comparison(float(rng.uniform()), float(10 ** rng.uniform(2, 4)),
                                   float(rng.uniform(0, 100)), FORCING)
        assert err["rho_error"] < 1e-7 and err["theta_error"] < 1e-7


def test_flow_floor_breach():
    with pytest.raises(dfg.FloorBreach):
        dfg.flow_g5(0.0, 1e-3, 0.0, FORCING)


def test_period_map_area_preserving(chart):
    rng = np.random.default_rng(5)
    for _ in range(4):
        jac = dfg.poincare_jacobian(float(rng.uniform(0, 100)), float(10 ** rng.uniform(6, 7)), FORCING, chart)
        assert abs(jac.area_det - 1) < 1e-6
        assert abs(jac.det - 1) < 1e-6


def test_period_map_has_intersection_witness(chart):
    # curves rho = const, parametrized by the section time
    def period_map(t, rho):
        return dfg.poincare_map(t, rho, FORCING, chart=chart)

    ts = np.linspace(0, 60, 512)
    rep = check_intersection(period_map, [(ts, lambda t: np.full_like(t, 1e6))])
    assert rep.all_intersect


def test_twist_fit(chart):
    fit = dfg.twist_fit(FORCING, np.geomspace(1e3, 1e6, 7), [0.0, 1.0, 2.5], chart)
    assert fit.relative_error < 0.01
    assert fit.exponent == pytest.approx(-1 / 3, abs=0.02)
    unforced = dfg.twist_fit(dfg.DuffingForcing.zero(OMEGA2), np.geomspace(1e3, 1e6, 5), 0.0, chart)
    assert unforced.relative_error < 1e-10


def test_twist_fit_needs_two_decades(chart):
    with pytest.raises(ValueError):
        dfg.twist_fit(FORCING, [1e3, 2e3, 5e3], 0.0, chart)


# small-twist variables

def test_rescale_mu_examples(chart):
    delta = 0.05
    rho = (chart.twist_coefficient / delta) ** 3
    assert dfg.rescale_mu(rho, delta, chart) == pytest.approx(1.0, rel=1e-14)
    rho_a = 1e4
    d = dfg.band_delta(rho_a, 8 * rho_a, chart)
    mu = dfg.rescale_mu(np.array([rho_a, 8 * rho_a]), d, chart)
    np.testing.assert_allclose(mu, [2.0, 1.0], rtol=1e-14)
    np.testing.assert_allclose(dfg.rho_from_mu(mu, d, chart), [rho_a, 8 * rho_a], rtol=1e-13)


def test_band_errors():
    with pytest.raises(dfg.EmptyBand):
        dfg.band_delta(10.0, 5.0)
    with pytest.raises(dfg.EmptyBand):
        dfg.band_delta(1.0, 100.0)


def test_ptilde_remainders_decay(chart):
    rows = dfg.ptilde_remainders(FORCING, [0.1, 0.05, 0.025], samples=16, chart=chart)
    f1 = [r[1] for r in rows]
    f2 = [r[2] for r in rows]
    assert f1[0] > f1[1] > f1[2] and f2[0] > f2[1] > f2[2]
    slope = np.polyfit(np.log([r[0] for r in rows]), np.log(f1), 1)[0]
    assert slope > 1


def test_ptilde_passes_size_gate(chart):
    delta = 0.05
    resc = small_twist_rescale(dfg.ptilde_twist_map(FORCING, delta, kmax=4, deg=4, mu_center=1.5,
                                                    mu_radius=0.25, chart=chart))
    assert resc.rotation_scale == delta
    ctx = DiophantineContext(OMEGA2, gamma=1e-3, kmax=4)
    mu_alpha, margin = find_rotation((1.3, 1.7), ctx, scale=delta)
    assert margin > 0
    alpha = delta * mu_alpha
    tmap = TwistMap(resc.tmap.f.recentered(alpha), resc.tmap.g.recentered(alpha))
    s = delta * 0.25 * 0.5
    tr, new, est = kam_step(tmap, alpha, ctx, NormParams(0.5, 0.5, s), NormParams(0.4, 0.4, s / 4))
    assert est.theta < 0.25
    assert est.eps_out < est.eps_in


# boundedness

def test_zero_forcing_conserves_energy():
    stats = dfg.boundedness_experiment(dfg.DuffingForcing.zero(OMEGA2), [(2.0, 1.0), (0.5, -4.0)], 1e3)
    for s in stats:
        assert abs(s.final_energy / s.initial_energy - 1) < 1e-9
        assert abs(s.ratio - 1) < 1e-9


def test_integrator_against_adaptive_oracle():
    forcing = dfg.DuffingForcing.cosines(0.5, OMEGA2)
    x0, y0 = 2.0, 1.0
    xs, ys = dfg.cartesian_flow(x0, y0, 0.0, 50.0, forcing)
    x, y, _, _ = dfg.integrate_orbit(x0, y0, 0.0, 50.0, forcing, dfg.orbit_step(dfg.energy(x0, y0)))
    assert abs(x - xs) < 1e-8 and abs(y - ys) < 1e-8


def test_boundedness_deterministic_across_threads():
    forcing = dfg.DuffingForcing.cosines(0.5, OMEGA2)
    ics = dfg.sample_initial_conditions(4, (10.0, 100.0), seed=3)
    one = dfg.boundedness_experiment(forcing, ics, 200.0, threads=1)
    two = dfg.boundedness_experiment(forcing, ics, 200.0, threads=2)
    assert one == two


@pytest.mark.slow
def test_kam_curves_confine_orbits_between_them():
    rep = ex.ptilde_confinement(iterates=1000)
    assert rep.steps and all(s >= 1 for s in rep.steps)
    assert max(rep.fit_residuals) < 1e-9
    assert max(rep.flow_residuals) < 1e-6
    assert rep.confined and rep.ordering_kept
