import math
import time

from kamlab import experiments as ex
from kamlab.cli import run
from kamlab.kam import KamSchedule


def params(kind, **overrides):
    return {**ex.DEFAULTS[kind], **overrides}


def test_criterion_1_homological_exactness(criterion):
    with criterion(1, "homological residual < 1e-12 ||h|| on 100 instances in < 5 s") as d:
        t0 = time.perf_counter()
        out = ex.homological_experiment(params("homological"), seed=0)
        d["wall_s"] = time.perf_counter() - t0
        d["max_relative_residual"] = out.summary["max_relative_residual"]
        assert len(out.tables["homological"].rows) == 100
        assert d["max_relative_residual"] < 1e-12
        assert d["wall_s"] < 5


def test_criterion_2_homological_bound(criterion):
    with criterion(2, "homological bound holds exactly on the same 100 instances") as d:
        out = ex.homological_experiment(params("homological"), seed=0)
        d["violations"] = out.summary["bound_violations"]
        assert d["violations"] == 0


def test_criterion_3_kam_contraction(criterion):
    with criterion(3, "desk map: 3-4 steps, exponent in [1.2, 2.1], residual < 1e-9, < 60 s") as d:
        t0 = time.perf_counter()
        out = ex.kam_experiment(params("kam"), seed=0)
        d["wall_s"] = time.perf_counter() - t0
        s = out.summary
        d.update(steps=s["steps"], exponent=s["fitted_exponent"], residual=s["residual"])
        assert 3 <= s["steps"] <= 4
        assert 1.2 <= s["fitted_exponent"] <= 2.1
        assert s["residual"] < 1e-9
        assert d["wall_s"] < 60


def test_criterion_4_schedule_law(criterion):
    with criterion(4, "schedule invariants hold exactly for n <= 20") as d:
        p = params("kam")
        sched = KamSchedule(p["m0"], p["r0"], p["eps0"], p["c8"], n_steps=20)
        v = sched.violations()
        d["violations"] = len(v)
        assert v == []


def test_criterion_5_measure(criterion):
    with criterion(5, "resonant fraction monotone in gamma, fraction/gamma within a factor 2, < 30 s") as d:
        t0 = time.perf_counter()
        out = ex.measure_experiment(params("measure", gammas=[1e-2, 1e-3, 1e-4], samples=10_000), seed=1)
        d["wall_s"] = time.perf_counter() - t0
        estimates = [row[1] for row in out.tables["measure"].rows]
        ratios = out.summary["ratios"]
        d["ratio_spread"] = max(ratios) / min(ratios)
        assert estimates[0] >= estimates[1] >= estimates[2]
        assert d["ratio_spread"] <= 2
        assert d["wall_s"] < 30


def test_criterion_6_duffing_chart(criterion):
    with criterion(6, "chart invariant < 1e-10, period matches quadrature to 1e-6") as d:
        out = ex.chart_experiment(params("duffing-chart"), seed=0)
        header, row = out.tables["chart"].header, out.tables["chart"].rows[0]
        d["invariant"] = row[header.index("invariant_residual")]
        d["period_error"] = out.summary["period_error"]
        assert d["invariant"] < 1e-10
        assert d["period_error"] < 1e-6
        assert math.isclose(out.summary["T_star"], 7.4163, abs_tol=1e-4)


def test_criterion_7_twist_expansion(criterion):
    with criterion(7, "twist coefficient within 1%, exponent -1/3 +- 0.02, |det - 1| < 1e-6 at 20 states") as d:
        tw = ex.twist_experiment(params("twist-fit"), seed=0)
        header, row = tw.tables["twist"].header, tw.tables["twist"].rows[0]
        d["relative_error"] = row[header.index("relative_error")]
        d["exponent"] = tw.summary["exponent"]
        pm = ex.poincare_experiment(params("duffing-poincare", states=20, oracle_states=0), seed=0)
        d["det_deviation"] = pm.summary["max_det_deviation"]
        assert d["relative_error"] < 0.01
        assert abs(d["exponent"] + 1 / 3) <= 0.02
        assert sum(r[0] == "jacobian" for r in pm.tables["poincare"].rows) == 20
        assert d["det_deviation"] < 1e-6


def test_criterion_8_oracle_equivalence(criterion):
    with criterion(8, "swapped-time flow matches Cartesian integration to 1e-7 at 10 states") as d:
        out = ex.poincare_experiment(params("duffing-poincare", states=0, oracle_states=10), seed=1)
        d["max_error"] = out.summary["max_oracle_error"]
        assert sum(r[0] == "oracle" for r in out.tables["poincare"].rows) == 10
        assert d["max_error"] < 1e-7


def test_criterion_9_boundedness(criterion):
    with criterion(9, "50 forced orbits stay below 10x energy over 1e4, control drift < 1e-9") as d:
        out = ex.bound_experiment(params("duffing-bound"), seed=7)
        d.update(max_ratio=out.summary["max_ratio"], control_drift=out.summary["control_drift"])
        assert sum(r[0] == "forced" for r in out.tables["orbits"].rows) == 50
        assert out.summary["all_bounded"]
        assert d["control_drift"] < 1e-9


def test_criterion_10_determinism(criterion, tmp_path):
    with criterion(10, "repeated runs give byte-identical CSV outputs") as d:
        runs = [
            ["measure", "--gamma", "1e-2,1e-3,1e-4", "--samples", "10000", "--seed", "1"],
            ["homological", "--seed", "0"],
            ["duffing-poincare", "--seed", "0", "--set", "states=2", "--set", "oracle_states=2"],
        ]
        compared = 0
        for i, argv in enumerate(runs):
            a, b = tmp_path / f"{i}a", tmp_path / f"{i}b"
            assert run(argv + ["--out", str(a)]) == 0
            assert run(argv + ["--out", str(b), "--threads", "2"]) == 0
            for csv_a in sorted(a.glob("*.csv")):
                assert csv_a.read_bytes() == (b / csv_a.name).read_bytes()
                compared += 1
        d["files_compared"] = compared
        assert compared >= 3
