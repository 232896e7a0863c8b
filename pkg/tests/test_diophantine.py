import itertools
import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from kamlab.diophantine import (
    ApproximationFunction,
    CombinatorialBudget,
    DiophantineContext,
    GOLDEN,
    NoAdmissibleRotation,
    check_frequency,
    check_rotation,
    distribution_count,
    find_rotation,
    gamma0,
    kronecker_sequence,
    measure_resonant,
    rotation_margins,
)
from kamlab.fourier import SpatialWeight

W = SpatialWeight(3.0)
OMEGA2 = (1.0, math.sqrt(2.0))


# approximation function and gamma0

def test_default_family_satisfies_axioms():
    assert ApproximationFunction(2.0).check_axioms() == []
    assert ApproximationFunction(3.5).check_axioms() == []


def test_axiom_check_flags_bad_families():
    wobbly = ApproximationFunction(family="custom", fn=lambda t: 2.0 + np.sin(t))
    assert "(b15) Delta is not nondecreasing on [1, inf)" in wobbly.check_axioms()


def test_gamma0_examples():
    flat = ApproximationFunction(family="constant")
    for rho in (0.1, 1.0, 7.0):
        assert gamma0(flat, rho) == pytest.approx(1.0)
    assert gamma0(ApproximationFunction(2.0), 1.0) == pytest.approx(4 / math.e, rel=1e-12)
    assert gamma0(ApproximationFunction(2.0), 50.0) == pytest.approx(1.0, abs=1e-12)


@given(st.floats(0.01, 20.0), st.floats(1.0, 3.0), st.floats(0.5, 4.0))
def test_gamma0_monotone_in_rho(rho, factor, tau):
    d = ApproximationFunction(tau)
    assert gamma0(d, rho) >= 1.0
    assert gamma0(d, rho * factor) <= gamma0(d, rho) * (1 + 1e-12)


def test_gamma0_matches_closed_form():
    # (1+t)^tau e^{-rho t} peaks at t = tau/rho - 1
    for tau, rho in [(2.0, 0.1), (3.0, 0.5), (1.5, 0.2)]:
        t = tau / rho - 1
        assert gamma0(ApproximationFunction(tau), rho) == pytest.approx((1 + t) ** tau * math.exp(-rho * t), rel=1e-12)


# frequency nonresonance

def exhaustive_frequency_margin(omega, c, kmax, tau=2.0):
    best = math.inf
    for k in itertools.product(range(-kmax, kmax + 1), repeat=len(omega)):
        if sum(map(abs, k)) == 0 or sum(map(abs, k)) > kmax:
            continue
        supp = 1 + sum(math.log1p(i) ** 3 for i, v in enumerate(k) if v != 0)
        bound = c / ((1 + supp) ** tau * (1 + sum(map(abs, k))) ** tau)
        best = min(best, abs(sum(a * b for a, b in zip(k, omega))) - bound)
    return best


def test_frequency_check_matches_enumeration():
    rep = check_frequency(DiophantineContext(OMEGA2, c=0.05, kmax=20))
    assert rep.worst_margin == pytest.approx(exhaustive_frequency_margin(OMEGA2, 0.05, 20), abs=1e-15)
    assert rep.passed and rep.rationally_independent


def test_rationally_dependent_frequency_fails():
    rep = check_frequency(DiophantineContext((1.0, 2.0), c=0.05, kmax=5))
    assert not rep.passed and not rep.rationally_independent
    assert rep.worst_k in {(2, -1), (-2, 1)}
    assert (2, -1) in rep.violations or (-2, 1) in rep.violations


def test_single_frequency_passes_for_small_c():
    assert check_frequency(DiophantineContext((1.0,), c=1.0, kmax=10)).passed


# rotation nonresonance

def golden_oracle_margin(alpha_over_2pi: Fraction, gamma, kmax, tau=2.0):
    """min over 0 < q <= K of ||q x|| - gamma/(Delta(1) Delta(q)) in exact rationals."""
    best = math.inf
    for q in range(1, kmax + 1):
        qx = q * alpha_over_2pi
        dist = abs(qx - round(qx))
        best = min(best, float(dist) - gamma / (2.0 ** tau * (1 + q) ** tau))
    return best


def test_golden_rotation_passes_and_matches_oracle():
    x = Fraction(GOLDEN).limit_denominator(10**15)
    alpha = 2 * math.pi * float(x)
    ctx = DiophantineContext((1.0,), gamma=0.1, kmax=30)
    rep = check_rotation(alpha, ctx)
    assert rep.passed
    assert rep.margin == pytest.approx(golden_oracle_margin(x, 0.1, 30), abs=1e-12)


def test_impossible_gamma_fails_at_smallest_k():
    ctx = DiophantineContext(OMEGA2, gamma=10.0, kmax=5)
    rep = check_rotation(1.3, ctx)
    assert not rep.passed
    assert sum(map(abs, rep.worst_k)) == 1


def test_exact_resonance_detected():
    k0 = np.array([2, -1])
    alpha = 2 * math.pi / float(k0 @ np.asarray(OMEGA2))
    rep = check_rotation(alpha, DiophantineContext(OMEGA2, gamma=1e-6, kmax=5))
    assert not rep.passed
    assert rep.worst_k in {(2, -1), (-2, 1)} and abs(rep.worst_j) == 1


@given(st.floats(0.2, 5.0), st.floats(0.01, 1.0), st.floats(1e-4, 0.05))
def test_rotation_check_is_scale_consistent(alpha, scale, gamma):
    ctx = DiophantineContext(OMEGA2, gamma=gamma, kmax=8)
    scaled = check_rotation(alpha, ctx, scale=scale)
    direct = check_rotation(alpha * scale, ctx)
    assert scaled.margin == direct.margin
    assert scaled.worst_k == direct.worst_k


def test_find_rotation_positive_margin_and_scan_oracle():
    ctx = DiophantineContext(OMEGA2, gamma=1e-3, kmax=6)
    alpha, margin = find_rotation((1.0, 2.0), ctx, candidates=2000)
    assert margin > 0 and 1.001 <= alpha <= 1.999
    # the chosen candidate maximises the largest passing gamma over the same scan
    scan = 1.001 + 0.998 * kronecker_sequence(2000)
    rel = rotation_margins(scan, ctx, relative=True)
    assert rotation_margins([alpha], ctx, relative=True)[0] == pytest.approx(rel.max())
    assert check_rotation(alpha, ctx).margin == pytest.approx(margin)


def test_find_rotation_single_frequency_oracle():
    ctx = DiophantineContext((1.0,), gamma=0.05, kmax=20)
    alpha, margin = find_rotation((1.0, 2.0), ctx)
    x = Fraction(alpha / (2 * math.pi))
    assert margin > 0
    assert margin == pytest.approx(golden_oracle_margin(x, 0.05, 20), abs=1e-12)


def test_find_rotation_empty_interval():
    with pytest.raises(NoAdmissibleRotation):
        find_rotation((1.0, 2.0), DiophantineContext(OMEGA2, gamma=0.5))


# resonant measure

def test_measure_zero_gamma_row():
    rows = measure_resonant(DiophantineContext(OMEGA2, kmax=8), (1.0, 2.0), [0.0], n_samples=1000)
    assert rows[0].estimate == 0.0


def test_measure_halving_and_monotone():
    ctx = DiophantineContext(OMEGA2, kmax=12, delta=ApproximationFunction(2.0, normalize=True))
    rows = measure_resonant(ctx, (1.0, 2.0), [4e-3, 2e-3, 1e-3], n_samples=10_000, seed=3)
    for big, small in zip(rows, rows[1:]):
        assert 0.3 <= small.estimate / big.estimate <= 0.7
        assert small.estimate <= big.estimate + big.ci_halfwidth + small.ci_halfwidth


def test_admissible_measure_tends_to_full_interval():
    ctx = DiophantineContext(OMEGA2, kmax=12)
    rows = measure_resonant(ctx, (1.0, 2.0), [1e-3, 1e-4, 1e-5], n_samples=5000, seed=2)
    admissible = [(1.0 - 2 * r.gamma) * (1 - r.estimate) for r in rows]
    assert admissible == sorted(admissible)
    assert admissible[-1] > 0.99


def test_measure_independent_of_threads():
    ctx = DiophantineContext(OMEGA2, kmax=8)
    one = measure_resonant(ctx, (1.0, 2.0), [1e-2, 1e-3], n_samples=3000, seed=5, threads=1)
    four = measure_resonant(ctx, (1.0, 2.0), [1e-2, 1e-3], n_samples=3000, seed=5, threads=4)
    assert one == four


def test_measure_requires_enough_samples():
    with pytest.raises(ValueError):
        measure_resonant(DiophantineContext(OMEGA2), (1.0, 2.0), [1e-3], n_samples=999)


# subset counting

def recursive_count(slots, n, t, logs):
    if n == 0:
        return 1 if t >= 1.0 else 0
    if len(slots) < n:
        return 0
    head, rest = slots[0], slots[1:]
    return recursive_count(rest, n - 1, t - logs[head], logs) + recursive_count(rest, n, t, logs)


def test_distribution_count_examples():
    universe = range(-3, 4)
    assert distribution_count(1, 1.5, W, universe) == 3
    for n in range(4):
        assert distribution_count(n, 0.99, W, universe) == 0
    assert distribution_count(2, 1.0, W, universe) == 0


@given(st.sets(st.integers(-12, 12), min_size=1, max_size=9), st.integers(0, 9), st.floats(0.5, 40.0))
def test_distribution_count_recursive_oracle(universe, n, t):
    slots = sorted(universe)
    logs = {i: math.log1p(abs(i)) ** 3 for i in slots}
    assert distribution_count(n, t, W, slots) == recursive_count(slots, n, t, logs)


def test_distribution_count_budget():
    with pytest.raises(CombinatorialBudget):
        distribution_count(15, 100.0, W, range(-20, 21), budget=1000)
